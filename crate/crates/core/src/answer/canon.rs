//! Structural normal form: flattened sums and products, rational-closed
//! subtrees folded, commutative operands sorted.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::ast::{BinOp, Constant, Expr, Func};
use super::eval::{evaluate, Value};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Norm {
    Rational(BigRational),
    Constant(Constant),
    Sum(Vec<Norm>),
    Product(Vec<Norm>),
    Pow(Box<Norm>, Box<Norm>),
    Call(Func, Vec<Norm>),
}

fn rational(n: i64) -> Norm {
    Norm::Rational(BigRational::from_integer(BigInt::from(n)))
}

/// Folds a subtree to a rational when its evaluation is exact and cheap.
fn fold(e: &Expr) -> Option<BigRational> {
    match evaluate(e) {
        Ok(Value::Exact(r)) => Some(r),
        _ => None,
    }
}

fn normalize(e: &Expr) -> Norm {
    match e {
        Expr::Integer(v) => Norm::Rational(BigRational::from_integer(v.clone())),
        Expr::Decimal { .. } => Norm::Rational(fold(e).expect("decimal literals are exact")),
        Expr::Constant(c) => Norm::Constant(*c),
        Expr::Neg(inner) => product(vec![rational(-1), normalize(inner)]),
        Expr::Binary(op, l, r) => {
            let (a, b) = (normalize(l), normalize(r));
            match op {
                BinOp::Add => sum(vec![a, b]),
                BinOp::Sub => sum(vec![a, product(vec![rational(-1), b])]),
                BinOp::Mul => product(vec![a, b]),
                BinOp::Div => product(vec![a, pow(b, rational(-1))]),
                BinOp::Pow => pow(a, b),
            }
        }
        Expr::Call(func, args) => {
            let args: Vec<Norm> = args.iter().map(normalize).collect();
            if args.iter().all(|a| matches!(a, Norm::Rational(_))) {
                let folded = Expr::Call(*func, args.iter().map(to_expr).collect());
                if let Some(r) = fold(&folded) {
                    return Norm::Rational(r);
                }
            }
            Norm::Call(*func, args)
        }
    }
}

fn sum(terms: Vec<Norm>) -> Norm {
    let mut constant = BigRational::zero();
    let mut rest = Vec::new();
    for t in terms {
        match t {
            Norm::Sum(inner) => {
                for u in inner {
                    match u {
                        Norm::Rational(r) => constant += r,
                        other => rest.push(other),
                    }
                }
            }
            Norm::Rational(r) => constant += r,
            other => rest.push(other),
        }
    }
    if !constant.is_zero() || rest.is_empty() {
        rest.push(Norm::Rational(constant));
    }
    rest.sort();
    if rest.len() == 1 {
        rest.pop().expect("one term")
    } else {
        Norm::Sum(rest)
    }
}

fn product(factors: Vec<Norm>) -> Norm {
    let mut coeff = BigRational::one();
    let mut rest = Vec::new();
    for f in factors {
        match f {
            Norm::Product(inner) => {
                for u in inner {
                    match u {
                        Norm::Rational(r) => coeff *= r,
                        other => rest.push(other),
                    }
                }
            }
            Norm::Rational(r) => coeff *= r,
            other => rest.push(other),
        }
    }
    if coeff.is_zero() {
        return Norm::Rational(coeff);
    }
    if !coeff.is_one() || rest.is_empty() {
        rest.push(Norm::Rational(coeff));
    }
    rest.sort();
    if rest.len() == 1 {
        rest.pop().expect("one factor")
    } else {
        Norm::Product(rest)
    }
}

fn pow(base: Norm, exp: Norm) -> Norm {
    if matches!(&exp, Norm::Rational(r) if r.is_one()) {
        return base;
    }
    if let (Norm::Rational(_), Norm::Rational(_)) = (&base, &exp) {
        let folded = Expr::binary(BinOp::Pow, to_expr(&base), to_expr(&exp));
        if let Some(r) = fold(&folded) {
            return Norm::Rational(r);
        }
    }
    Norm::Pow(Box::new(base), Box::new(exp))
}

fn rational_expr(r: &BigRational) -> Expr {
    let magnitude = if r.denom().is_one() {
        Expr::Integer(r.numer().abs())
    } else {
        Expr::binary(BinOp::Div, Expr::Integer(r.numer().abs()), Expr::Integer(r.denom().clone()))
    };
    if r.is_negative() {
        Expr::neg(magnitude)
    } else {
        magnitude
    }
}

fn to_expr(n: &Norm) -> Expr {
    let chain = |op: BinOp, items: &[Norm]| {
        let mut it = items.iter().map(to_expr);
        let first = it.next().expect("non-empty chain");
        it.fold(first, |acc, x| Expr::binary(op, acc, x))
    };
    match n {
        Norm::Rational(r) => rational_expr(r),
        Norm::Constant(c) => Expr::Constant(*c),
        Norm::Sum(items) => chain(BinOp::Add, items),
        Norm::Product(items) => chain(BinOp::Mul, items),
        Norm::Pow(b, e) => Expr::binary(BinOp::Pow, to_expr(b), to_expr(e)),
        Norm::Call(f, args) => Expr::Call(*f, args.iter().map(to_expr).collect()),
    }
}

/// Expression tree in normal form; a fixed point of itself.
pub(crate) fn normalized_tree(e: &Expr) -> Expr {
    to_expr(&normalize(e))
}
