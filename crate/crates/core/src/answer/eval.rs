//! Two-track evaluation: exact big-rational arithmetic while the value stays
//! rational, outward-rounded interval arithmetic once it does not.

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::ast::{BinOp, Constant, Expr, Func};
use super::EvalError;

/// Working precision in bits (about 96 decimal digits).
pub(crate) const PREC: usize = 320;
/// Significant digits reported in `numeric_value`.
pub(crate) const REPORT_DIGITS: usize = 60;
/// Largest exact power, in bits of the result, computed with big rationals.
const MAX_EXACT_BITS: f64 = 65_536.0;
/// Largest result magnitude, in bits, accepted at all.
const MAX_MAGNITUDE_BITS: f64 = 1_073_741_824.0;
const MAX_FACTORIAL: u64 = 10_000;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constant cache"));
}

fn with_cc<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

/// Closed enclosure `[lo, hi]` of a real value.
#[derive(Clone, Debug)]
pub(crate) struct Interval {
    pub lo: BigFloat,
    pub hi: BigFloat,
}

#[derive(Clone, Debug)]
pub(crate) enum Value {
    Exact(BigRational),
    Approx(Interval),
}

fn lt(a: &BigFloat, b: &BigFloat) -> bool {
    matches!(a.cmp(b), Some(c) if c < 0)
}

fn bf_int(v: i64) -> BigFloat {
    BigFloat::from_i64(v, PREC)
}

fn bf_f64(v: f64) -> BigFloat {
    BigFloat::from_f64(v, PREC)
}

fn bigint_to_bf(v: &BigInt, rm: RoundingMode) -> BigFloat {
    let s = v.to_string();
    with_cc(|cc| BigFloat::parse(&s, Radix::Dec, PREC, rm, cc))
}

fn min_of(xs: &[BigFloat]) -> BigFloat {
    xs.iter().skip(1).fold(xs[0].clone(), |m, x| if lt(x, &m) { x.clone() } else { m })
}

fn max_of(xs: &[BigFloat]) -> BigFloat {
    xs.iter().skip(1).fold(xs[0].clone(), |m, x| if lt(&m, x) { x.clone() } else { m })
}

impl Interval {
    fn point(x: BigFloat) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    fn from_rational(r: &BigRational) -> Self {
        let n_lo = bigint_to_bf(r.numer(), RoundingMode::Down);
        let n_hi = bigint_to_bf(r.numer(), RoundingMode::Up);
        let d_lo = bigint_to_bf(r.denom(), RoundingMode::Down);
        let d_hi = bigint_to_bf(r.denom(), RoundingMode::Up);
        let lows = [
            n_lo.div(&d_lo, PREC, RoundingMode::Down),
            n_lo.div(&d_hi, PREC, RoundingMode::Down),
        ];
        let highs = [
            n_hi.div(&d_lo, PREC, RoundingMode::Up),
            n_hi.div(&d_hi, PREC, RoundingMode::Up),
        ];
        Interval {
            lo: min_of(&lows),
            hi: max_of(&highs),
        }
    }

    fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    /// Pads the enclosure by a few ulps to absorb library rounding in transcendental calls.
    fn widen(self) -> Interval {
        let mag = max_of(&[self.lo.abs(), self.hi.abs()]);
        let eps = mag
            .mul(&bf_f64(2f64.powi(-((PREC as i32) - 8))), PREC, RoundingMode::Up)
            .add(&bf_f64(2f64.powi(-1000)), PREC, RoundingMode::Up);
        Interval {
            lo: self.lo.sub(&eps, PREC, RoundingMode::Down),
            hi: self.hi.add(&eps, PREC, RoundingMode::Up),
        }
    }

    fn check(self) -> Result<Interval, EvalError> {
        for b in [&self.lo, &self.hi] {
            if b.is_nan() || b.is_inf() {
                return Err(EvalError::TooLarge("value leaves the representable range".into()));
            }
        }
        Ok(self)
    }

    pub fn midpoint(&self) -> BigFloat {
        self.lo
            .add(&self.hi, PREC, RoundingMode::ToEven)
            .div(&bf_int(2), PREC, RoundingMode::ToEven)
    }

    pub fn radius(&self) -> BigFloat {
        self.hi
            .sub(&self.lo, PREC, RoundingMode::Up)
            .div(&bf_int(2), PREC, RoundingMode::Up)
    }

    fn neg(&self) -> Interval {
        Interval {
            lo: self.hi.neg(),
            hi: self.lo.neg(),
        }
    }

    fn add(&self, o: &Interval) -> Interval {
        Interval {
            lo: self.lo.add(&o.lo, PREC, RoundingMode::Down),
            hi: self.hi.add(&o.hi, PREC, RoundingMode::Up),
        }
    }

    fn sub(&self, o: &Interval) -> Interval {
        Interval {
            lo: self.lo.sub(&o.hi, PREC, RoundingMode::Down),
            hi: self.hi.sub(&o.lo, PREC, RoundingMode::Up),
        }
    }

    fn mul(&self, o: &Interval) -> Interval {
        let pairs = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let lows: Vec<_> = pairs.iter().map(|(a, b)| a.mul(b, PREC, RoundingMode::Down)).collect();
        let highs: Vec<_> = pairs.iter().map(|(a, b)| a.mul(b, PREC, RoundingMode::Up)).collect();
        Interval {
            lo: min_of(&lows),
            hi: max_of(&highs),
        }
    }

    fn div(&self, o: &Interval) -> Result<Interval, EvalError> {
        if o.contains_zero() {
            return Err(EvalError::Inconclusive("divisor cannot be separated from zero".into()));
        }
        let pairs = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let lows: Vec<_> = pairs.iter().map(|(a, b)| a.div(b, PREC, RoundingMode::Down)).collect();
        let highs: Vec<_> = pairs.iter().map(|(a, b)| a.div(b, PREC, RoundingMode::Up)).collect();
        Ok(Interval {
            lo: min_of(&lows),
            hi: max_of(&highs),
        })
    }

    fn abs(&self) -> Interval {
        if !self.lo.is_negative() {
            self.clone()
        } else if !self.hi.is_positive() {
            self.neg()
        } else {
            Interval {
                lo: bf_int(0),
                hi: max_of(&[self.lo.abs(), self.hi.abs()]),
            }
        }
    }

    fn powi(&self, n: i64) -> Result<Interval, EvalError> {
        let mut result = Interval::point(bf_int(1));
        let mut base = self.clone();
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base).check()?;
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base).check()?;
            }
        }
        if n < 0 {
            result = Interval::point(bf_int(1)).div(&result)?;
        }
        result.check()
    }

    /// Enclosure of an increasing function.
    fn increasing(&self, f: impl Fn(&BigFloat, RoundingMode) -> BigFloat) -> Result<Interval, EvalError> {
        Interval {
            lo: f(&self.lo, RoundingMode::Down),
            hi: f(&self.hi, RoundingMode::Up),
        }
        .check()
        .map(Interval::widen)
    }

    /// Enclosure of a periodic function via midpoint plus radius (Lipschitz constant 1).
    fn lipschitz(&self, f: impl Fn(&BigFloat) -> BigFloat) -> Result<Interval, EvalError> {
        let m = self.midpoint();
        let r = self.radius();
        let y = f(&m);
        Interval {
            lo: y.sub(&r, PREC, RoundingMode::Down),
            hi: y.add(&r, PREC, RoundingMode::Up),
        }
        .check()
        .map(Interval::widen)
    }
}

/// Formats a positive decimal digit string with exponent as `d.ddd…e±k`.
fn scientific(negative: bool, digits: &str, exp10: i64) -> String {
    let digits: String = digits.chars().take(REPORT_DIGITS).collect();
    let digits = format!("{digits:0<width$}", width = REPORT_DIGITS);
    let sign = if negative { "-" } else { "" };
    let esign = if exp10 < 0 { "-" } else { "+" };
    format!("{sign}{}.{}e{esign}{}", &digits[..1], &digits[1..], exp10.abs())
}

pub(crate) fn format_rational(r: &BigRational) -> String {
    if r.is_zero() {
        return "0".into();
    }
    let (num, den) = (r.numer().abs(), r.denom().clone());
    let ten = BigInt::from(10);
    let mut k = num.to_string().len() as i64 - den.to_string().len() as i64;
    let pow10 = |e: i64| -> BigRational {
        let p = num_traits::pow(ten.clone(), e.unsigned_abs() as usize);
        if e >= 0 {
            BigRational::from_integer(p)
        } else {
            BigRational::new(BigInt::one(), p)
        }
    };
    let abs = BigRational::new(num, den);
    while pow10(k) > abs {
        k -= 1;
    }
    while pow10(k + 1) <= abs {
        k += 1;
    }
    let scaled = (abs * pow10(REPORT_DIGITS as i64 - 1 - k)).floor().to_integer();
    scientific(r.is_negative(), &scaled.to_string(), k)
}

pub(crate) fn format_float(x: &BigFloat) -> String {
    if x.is_zero() {
        return "0".into();
    }
    let s = with_cc(|cc| x.format(Radix::Dec, RoundingMode::ToEven, cc)).unwrap_or_else(|_| "NaN".into());
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.as_str()),
    };
    let (mantissa, exp) = body.split_once('e').unwrap_or((body, "0"));
    let exp: i64 = exp.trim_start_matches('+').parse().unwrap_or(0);
    let (int_part, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let all = format!("{int_part}{frac}");
    let lead = all.len() - all.trim_start_matches('0').len();
    let digits = &all[lead..];
    if digits.is_empty() {
        return "0".into();
    }
    let exp10 = exp + int_part.len() as i64 - 1 - lead as i64;
    scientific(negative, digits, exp10)
}

pub(crate) fn float_to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    format_float(x).parse().unwrap_or(f64::INFINITY)
}

fn bits_estimate(r: &BigRational) -> f64 {
    r.numer().bits().max(r.denom().bits()) as f64
}

/// `r^n` for an integer `n`. `Ok(None)` means too large to hold exactly.
fn rational_powi(r: &BigRational, n: &BigInt) -> Result<Option<BigRational>, EvalError> {
    if r.is_zero() {
        return match n.sign() {
            Sign::Minus => Err(EvalError::DivisionByZero),
            Sign::NoSign => Ok(Some(BigRational::one())),
            Sign::Plus => Ok(Some(BigRational::zero())),
        };
    }
    if r.abs().is_one() {
        let odd = n.is_odd_int();
        return Ok(Some(if r.is_negative() && odd {
            -BigRational::one()
        } else {
            BigRational::one()
        }));
    }
    let size = n.abs().to_f64().unwrap_or(f64::INFINITY) * bits_estimate(r);
    if size > MAX_MAGNITUDE_BITS {
        return Err(EvalError::TooLarge(format!("power with exponent {n}")));
    }
    if size > MAX_EXACT_BITS {
        return Ok(None);
    }
    let e = n.abs().to_u32().expect("bounded by size check");
    let p = BigRational::new(r.numer().pow(e), r.denom().pow(e));
    Ok(Some(if n.is_negative() { p.recip() } else { p }))
}

trait OddInt {
    fn is_odd_int(&self) -> bool;
}

impl OddInt for BigInt {
    fn is_odd_int(&self) -> bool {
        num_integer::Integer::is_odd(self)
    }
}

/// Exact `q`-th root of a non-negative rational, when it exists.
fn rational_root(r: &BigRational, q: u32) -> Option<BigRational> {
    let root = |v: &BigInt| -> Option<BigInt> {
        let c = v.nth_root(q);
        (num_traits::pow(c.clone(), q as usize) == *v).then_some(c)
    };
    Some(BigRational::new(root(r.numer())?, root(r.denom())?))
}

pub(crate) fn interval_of(v: &Value) -> Interval {
    match v {
        Value::Exact(r) => Interval::from_rational(r),
        Value::Approx(iv) => iv.clone(),
    }
}

fn exact_integer(v: &Value, what: &str) -> Result<BigInt, EvalError> {
    match v {
        Value::Exact(r) if r.is_integer() => Ok(r.to_integer()),
        _ => Err(EvalError::Domain(format!("{what} requires an integer argument"))),
    }
}

pub(crate) fn evaluate(e: &Expr) -> Result<Value, EvalError> {
    Ok(match e {
        Expr::Integer(v) => Value::Exact(BigRational::from_integer(v.clone())),
        Expr::Decimal { digits, scale } => Value::Exact(BigRational::new(
            digits.clone(),
            num_traits::pow(BigInt::from(10), *scale as usize),
        )),
        Expr::Constant(Constant::Pi) => {
            let (lo, hi) = with_cc(|cc| (cc.pi(PREC, RoundingMode::Down), cc.pi(PREC, RoundingMode::Up)));
            Value::Approx(Interval { lo, hi }.widen())
        }
        Expr::Constant(Constant::E) => {
            Value::Approx(Interval::point(bf_int(1)).increasing(|x, rm| with_cc(|cc| x.exp(PREC, rm, cc)))?)
        }
        Expr::Neg(inner) => match evaluate(inner)? {
            Value::Exact(r) => Value::Exact(-r),
            Value::Approx(iv) => Value::Approx(iv.neg()),
        },
        Expr::Binary(op, l, r) => binary(*op, evaluate(l)?, evaluate(r)?)?,
        Expr::Call(func, args) => {
            let vals = args.iter().map(evaluate).collect::<Result<Vec<_>, _>>()?;
            call(*func, &vals)?
        }
    })
}

fn binary(op: BinOp, a: Value, b: Value) -> Result<Value, EvalError> {
    if op == BinOp::Pow {
        return power(&a, &b);
    }
    if let (Value::Exact(x), Value::Exact(y)) = (&a, &b) {
        return Ok(Value::Exact(match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => {
                if y.is_zero() {
                    return Err(EvalError::DivisionByZero);
                }
                x / y
            }
            BinOp::Pow => unreachable!(),
        }));
    }
    if op == BinOp::Div && matches!(&b, Value::Exact(y) if y.is_zero()) {
        return Err(EvalError::DivisionByZero);
    }
    let (x, y) = (interval_of(&a), interval_of(&b));
    let iv = match op {
        BinOp::Add => x.add(&y),
        BinOp::Sub => x.sub(&y),
        BinOp::Mul => x.mul(&y),
        BinOp::Div => x.div(&y)?,
        BinOp::Pow => unreachable!(),
    };
    Ok(Value::Approx(iv.check()?))
}

fn power(a: &Value, b: &Value) -> Result<Value, EvalError> {
    if let (Value::Exact(x), Value::Exact(y)) = (a, b) {
        if y.is_integer() {
            if let Some(r) = rational_powi(x, y.numer())? {
                return Ok(Value::Exact(r));
            }
        } else {
            let (p, q) = (y.numer(), y.denom());
            if x.is_negative() && !q.is_odd_int() {
                return Err(EvalError::Domain("even root of a negative number".into()));
            }
            if x.is_zero() {
                return if y.is_positive() {
                    Ok(Value::Exact(BigRational::zero()))
                } else {
                    Err(EvalError::DivisionByZero)
                };
            }
            if let Some(q) = q.to_u32() {
                if let Some(root) = rational_root(&x.abs(), q) {
                    let root = if x.is_negative() { -root } else { root };
                    if let Some(r) = rational_powi(&root, p)? {
                        return Ok(Value::Exact(r));
                    }
                }
            }
        }
    }
    approx_power(a, b).map(Value::Approx)
}

fn approx_power(a: &Value, b: &Value) -> Result<Interval, EvalError> {
    let base = interval_of(a);
    if let Value::Exact(y) = b {
        if y.is_integer() {
            let n = y
                .numer()
                .to_i64()
                .filter(|n| n.unsigned_abs() <= 1 << 31)
                .ok_or_else(|| EvalError::TooLarge(format!("power with exponent {y}")))?;
            return base.powi(n);
        }
        if base.hi.is_negative() && y.denom().is_odd_int() {
            let mag = approx_power(&Value::Approx(base.neg()), b)?;
            return Ok(if y.numer().is_odd_int() { mag.neg() } else { mag });
        }
        if let Value::Exact(x) = a {
            if x.is_zero() && y.is_positive() {
                return Ok(Interval::point(bf_int(0)));
            }
        }
    }
    if !base.lo.is_positive() {
        return Err(if !base.hi.is_positive() {
            EvalError::Domain("non-real power of a non-positive base".into())
        } else {
            EvalError::Inconclusive("power base cannot be separated from zero".into())
        });
    }
    let exp = interval_of(b);
    let corners = [(&base.lo, &exp.lo), (&base.lo, &exp.hi), (&base.hi, &exp.lo), (&base.hi, &exp.hi)];
    let mut lows = Vec::with_capacity(4);
    let mut highs = Vec::with_capacity(4);
    for (x, y) in corners {
        with_cc(|cc| {
            lows.push(x.pow(y, PREC, RoundingMode::Down, cc));
            highs.push(x.pow(y, PREC, RoundingMode::Up, cc));
        });
    }
    Interval {
        lo: min_of(&lows),
        hi: max_of(&highs),
    }
    .check()
    .map(Interval::widen)
}

fn guard_magnitude(iv: &Interval, limit: f64, what: &str) -> Result<(), EvalError> {
    let bound = bf_f64(limit);
    if lt(&bound, &iv.hi) || lt(&iv.lo, &bound.neg()) {
        return Err(EvalError::TooLarge(format!("{what} argument exceeds {limit:e}")));
    }
    Ok(())
}

fn call(func: Func, args: &[Value]) -> Result<Value, EvalError> {
    let x = &args[0];
    let exact_is = |v: i64| matches!(x, Value::Exact(r) if *r == BigRational::from_integer(BigInt::from(v)));
    Ok(match func {
        Func::Sqrt => power(x, &Value::Exact(BigRational::new(1.into(), 2.into())))?,
        Func::Root => {
            let n = exact_integer(x, "root index")?;
            if !n.is_positive() {
                return Err(EvalError::Domain("root index must be positive".into()));
            }
            power(&args[1], &Value::Exact(BigRational::new(1.into(), n)))?
        }
        Func::Exp if exact_is(0) => Value::Exact(BigRational::one()),
        Func::Exp => {
            let iv = interval_of(x);
            guard_magnitude(&iv, 1e9, "exp")?;
            Value::Approx(iv.increasing(|v, rm| with_cc(|cc| v.exp(PREC, rm, cc)))?)
        }
        Func::Ln => {
            if let Value::Exact(r) = x {
                if !r.is_positive() {
                    return Err(EvalError::Domain(format!("logarithm of non-positive value {r}")));
                }
                if r.is_one() {
                    return Ok(Value::Exact(BigRational::zero()));
                }
            }
            let iv = interval_of(x);
            if !iv.lo.is_positive() {
                return Err(if !iv.hi.is_positive() {
                    EvalError::Domain("logarithm of a non-positive value".into())
                } else {
                    EvalError::Inconclusive("logarithm argument cannot be separated from zero".into())
                });
            }
            Value::Approx(iv.increasing(|v, rm| with_cc(|cc| v.ln(PREC, rm, cc)))?)
        }
        Func::Sin | Func::Tan if exact_is(0) => Value::Exact(BigRational::zero()),
        Func::Cos if exact_is(0) => Value::Exact(BigRational::one()),
        Func::Sin => Value::Approx(trig(x, |v| with_cc(|cc| v.sin(PREC, RoundingMode::ToEven, cc)))?),
        Func::Cos => Value::Approx(trig(x, |v| with_cc(|cc| v.cos(PREC, RoundingMode::ToEven, cc)))?),
        Func::Tan => {
            let s = trig(x, |v| with_cc(|cc| v.sin(PREC, RoundingMode::ToEven, cc)))?;
            let c = trig(x, |v| with_cc(|cc| v.cos(PREC, RoundingMode::ToEven, cc)))?;
            if c.contains_zero() {
                return Err(EvalError::Domain("tangent at a pole".into()));
            }
            Value::Approx(s.div(&c)?.check()?)
        }
        Func::Abs => match x {
            Value::Exact(r) => Value::Exact(r.abs()),
            Value::Approx(iv) => Value::Approx(iv.abs()),
        },
        Func::Factorial => {
            let n = exact_integer(x, "factorial")?;
            if n.is_negative() {
                return Err(EvalError::Domain("factorial of a negative integer".into()));
            }
            let n = n
                .to_u64()
                .filter(|&n| n <= MAX_FACTORIAL)
                .ok_or_else(|| EvalError::TooLarge(format!("factorial argument above {MAX_FACTORIAL}")))?;
            let mut acc = BigInt::one();
            for i in 2..=n {
                acc *= i;
            }
            Value::Exact(BigRational::from_integer(acc))
        }
        Func::Binomial => {
            let n = exact_integer(x, "binomial")?;
            let k = exact_integer(&args[1], "binomial")?;
            if n.is_negative() {
                return Err(EvalError::Domain("binomial with negative upper argument".into()));
            }
            if k.is_negative() || k > n {
                return Ok(Value::Exact(BigRational::zero()));
            }
            let k = std::cmp::min(k.clone(), &n - &k);
            let k = k
                .to_u64()
                .filter(|&k| k <= MAX_FACTORIAL)
                .ok_or_else(|| EvalError::TooLarge("binomial lower argument too large".into()))?;
            let mut acc = BigInt::one();
            for i in 0..k {
                acc = acc * (&n - BigInt::from(i)) / BigInt::from(i + 1);
            }
            Value::Exact(BigRational::from_integer(acc))
        }
    })
}

fn trig(x: &Value, f: impl Fn(&BigFloat) -> BigFloat) -> Result<Interval, EvalError> {
    let iv = interval_of(x);
    guard_magnitude(&iv, 1e15, "trigonometric")?;
    iv.lipschitz(f)
}

/// Relative 1e-30 / absolute 1e-40 agreement of two enclosures' midpoints.
pub(crate) fn approx_equal(a: &Interval, b: &Interval) -> bool {
    let (ma, mb) = (a.midpoint(), b.midpoint());
    let diff = ma.sub(&mb, PREC, RoundingMode::ToEven).abs();
    let scale = max_of(&[ma.abs(), mb.abs()]);
    let (rel, abs_tol) = with_cc(|cc| {
        (
            BigFloat::parse("1e-30", Radix::Dec, PREC, RoundingMode::ToEven, cc),
            BigFloat::parse("1e-40", Radix::Dec, PREC, RoundingMode::ToEven, cc),
        )
    });
    let tol = max_of(&[scale.mul(&rel, PREC, RoundingMode::ToEven), abs_tol]);
    !lt(&tol, &diff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::parse_expr;

    fn exact(s: &str) -> BigRational {
        match evaluate(&parse_expr(s).unwrap()).unwrap() {
            Value::Exact(r) => r,
            Value::Approx(_) => panic!("{s} should be exact"),
        }
    }

    fn approx(s: &str) -> Interval {
        match evaluate(&parse_expr(s).unwrap()).unwrap() {
            Value::Exact(_) => panic!("{s} should not be exact"),
            Value::Approx(iv) => iv,
        }
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn exact_folding() {
        assert_eq!(exact("2^{10}+2^9+2^8+1"), q(1793, 1));
        assert_eq!(exact("sqrt(9/4)"), q(3, 2));
        assert_eq!(exact(r"\sqrt[3]{-8}"), q(-2, 1));
        assert_eq!(exact("8^(2/3)"), q(4, 1));
        assert_eq!(exact("binomial(10, 3)"), q(120, 1));
        assert_eq!(exact("5!"), q(120, 1));
        assert_eq!(exact("0.25"), q(1, 4));
        assert_eq!(exact("2^-2"), q(1, 4));
        assert_eq!(exact("ln(1) + cos(0)"), q(1, 1));
        assert_eq!(exact("|-3|"), q(3, 1));
    }

    #[test]
    fn pi_to_fifty_digits() {
        let iv = approx("pi");
        let s = format_float(&iv.midpoint());
        assert!(s.starts_with("3.1415926535897932384626433832795028841971693993751"), "{s}");
        assert!(float_to_f64(&iv.radius()) < 1e-90);
    }

    #[test]
    fn enclosures_contain_known_values() {
        let iv = approx("sqrt(2)^2");
        let two = Interval::from_rational(&q(2, 1));
        assert!(approx_equal(&iv, &two));
        assert!(!lt(&two.lo, &iv.lo) && !lt(&iv.hi, &two.hi));
        assert!(approx_equal(&approx("exp(ln(3))"), &Interval::from_rational(&q(3, 1))));
        assert!(approx_equal(&approx("sin(pi/6)"), &Interval::from_rational(&q(1, 2))));
        assert!(approx_equal(&approx("tan(pi/4)"), &Interval::from_rational(&q(1, 1))));
        assert!(!approx_equal(&approx("pi"), &Interval::from_rational(&q(355, 113))));
    }

    #[test]
    fn domain_errors() {
        let err = |s: &str| evaluate(&parse_expr(s).unwrap()).unwrap_err();
        assert_eq!(err("1/0"), EvalError::DivisionByZero);
        assert_eq!(err("pi/0"), EvalError::DivisionByZero);
        assert_eq!(err("0^-1"), EvalError::DivisionByZero);
        assert!(matches!(err("ln(0)"), EvalError::Domain(_)));
        assert!(matches!(err("ln(-pi)"), EvalError::Domain(_)));
        assert!(matches!(err("sqrt(-1)"), EvalError::Domain(_)));
        assert!(matches!(err("(1/2)!"), EvalError::Domain(_)));
        assert!(matches!(err("pi!"), EvalError::Domain(_)));
        assert!(matches!(err("100000!"), EvalError::TooLarge(_)));
        assert!(matches!(err("2^(2^40)"), EvalError::TooLarge(_)));
        assert!(matches!(err("tan(pi/2)"), EvalError::Domain(_)));
    }

    #[test]
    fn big_powers_fall_back_to_intervals() {
        let iv = approx("3^100000 / 3^99999");
        assert!(approx_equal(&iv, &Interval::from_rational(&q(3, 1))));
    }

    #[test]
    fn rational_formatting_is_exact() {
        assert_eq!(format_rational(&q(1793, 1)), format!("1.793{}e+3", "0".repeat(56)));
        assert_eq!(format_rational(&q(-1, 3)), format!("-3.{}e-1", "3".repeat(59)));
        assert_eq!(format_rational(&q(1, 1000)), format!("1.{}e-3", "0".repeat(59)));
        assert_eq!(format_rational(&q(0, 1)), "0");
        let third = Interval::from_rational(&q(1, 3));
        assert_eq!(format_float(&third.midpoint()), format!("3.{}e-1", "3".repeat(59)));
    }
}
