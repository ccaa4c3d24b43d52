use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sqrt,
    /// `Root` takes `[index, radicand]`.
    Root,
    Exp,
    /// Natural logarithm; both `log` and `ln` map here.
    Ln,
    Sin,
    Cos,
    Tan,
    Abs,
    Factorial,
    Binomial,
}

impl Func {
    pub fn arity(self) -> usize {
        match self {
            Func::Root | Func::Binomial => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Root => "root",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Abs => "abs",
            Func::Factorial => "factorial",
            Func::Binomial => "binomial",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "root" => Func::Root,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "abs" => Func::Abs,
            "factorial" => Func::Factorial,
            "binomial" | "binom" => Func::Binomial,
            _ => return None,
        })
    }
}

/// Closed scalar expression. Literals are exact; there are no variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Integer(BigInt),
    /// `digits × 10^-scale`, kept apart from integers so `0.50` prints back as written.
    Decimal { digits: BigInt, scale: u32 },
    Constant(Constant),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        Expr::Integer(BigInt::from(v))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn neg(inner: Expr) -> Expr {
        Expr::Neg(Box::new(inner))
    }

    pub fn call(func: Func, args: Vec<Expr>) -> Expr {
        Expr::Call(func, args)
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Integer(_) | Expr::Decimal { .. } | Expr::Constant(_) => 1,
            Expr::Neg(e) => 1 + e.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }

    /// Operands of a left-nested chain of `op`, e.g. the addends of `a + b + c`.
    pub fn chain_operands(&self, op: BinOp) -> Vec<&Expr> {
        match self {
            Expr::Binary(o, l, r) if *o == op => {
                let mut out = l.chain_operands(op);
                out.push(r);
                out
            }
            other => vec![other],
        }
    }
}

fn is_atomic(e: &Expr) -> bool {
    match e {
        Expr::Integer(v) => !v.is_negative(),
        Expr::Decimal { digits, .. } => !digits.is_negative(),
        Expr::Constant(_) | Expr::Call(..) => true,
        Expr::Neg(_) | Expr::Binary(..) => false,
    }
}

struct Operand<'a>(&'a Expr);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if is_atomic(self.0) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "({})", self.0)
        }
    }
}

/// Plain infix rendering that the parser accepts back.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Integer(v) => write!(f, "{v}"),
            Expr::Decimal { digits, scale } => {
                let neg = digits.is_negative();
                let mut s = digits.abs().to_string();
                let scale = *scale as usize;
                if s.len() <= scale {
                    s = format!("{}{}", "0".repeat(scale + 1 - s.len()), s);
                }
                let (int_part, frac) = s.split_at(s.len() - scale);
                if neg {
                    f.write_str("-")?;
                }
                if frac.is_empty() {
                    write!(f, "{int_part}")
                } else {
                    write!(f, "{int_part}.{frac}")
                }
            }
            Expr::Constant(Constant::Pi) => f.write_str("pi"),
            Expr::Constant(Constant::E) => f.write_str("e"),
            Expr::Neg(inner) => write!(f, "-{}", Operand(inner)),
            Expr::Binary(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "{} {sym} {}", Operand(l), Operand(r))
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl Expr {
    pub fn is_zero_literal(&self) -> bool {
        match self {
            Expr::Integer(v) => v.is_zero(),
            Expr::Decimal { digits, .. } => digits.is_zero(),
            _ => false,
        }
    }
}
