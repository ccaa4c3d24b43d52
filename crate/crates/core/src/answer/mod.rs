//! Scalar answer parsing, canonicalization and equivalence judging.

mod ast;
mod canon;
mod eval;
mod parse;

use num_rational::BigRational;
use thiserror::Error;

use crate::types::RecordFlag;

pub use ast::{BinOp, Constant, Expr, Func};
pub use parse::{parse_expr, ParseError, ParseErrorKind};

use eval::{approx_equal, evaluate, float_to_f64, format_float, format_rational, interval_of, Interval, Value};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("value too large: {0}")]
    TooLarge(String),
    #[error("cannot decide numerically: {0}")]
    Inconclusive(String),
}

/// The reference answer itself could not be evaluated; the problem needs attention.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum JudgeError {
    #[error("gold answer does not parse: {0}")]
    GoldParse(ParseError),
    #[error("gold answer does not evaluate: {0}")]
    GoldEval(EvalError),
}

/// Normalized value of a closed expression.
#[derive(Clone, Debug)]
pub struct CanonicalForm {
    /// Present when the expression is rational-closed.
    pub exact_value: Option<BigRational>,
    /// Decimal rendering with 60 significant digits, `d.ddd…e±k`, or `0`.
    pub numeric_value: String,
    /// Absolute radius of the enclosure around `numeric_value`; 0 when exact.
    pub error_bound: f64,
    pub normalized_tree: Expr,
    enclosure: Interval,
}

pub fn canonicalize(expr: &Expr) -> Result<CanonicalForm, EvalError> {
    let value = evaluate(expr)?;
    let enclosure = interval_of(&value);
    let (exact_value, numeric_value, error_bound) = match value {
        Value::Exact(r) => {
            let s = format_rational(&r);
            (Some(r), s, 0.0)
        }
        Value::Approx(iv) => (None, format_float(&iv.midpoint()), float_to_f64(&iv.radius())),
    };
    Ok(CanonicalForm {
        exact_value,
        numeric_value,
        error_bound,
        normalized_tree: canon::normalized_tree(expr),
        enclosure,
    })
}

impl CanonicalForm {
    pub fn equivalent_to(&self, other: &CanonicalForm) -> bool {
        match (&self.exact_value, &other.exact_value) {
            (Some(a), Some(b)) => a == b,
            _ => approx_equal(&self.enclosure, &other.enclosure),
        }
    }
}

/// Value equivalence of two closed expressions.
pub fn equivalent(a: &Expr, b: &Expr) -> Result<bool, EvalError> {
    Ok(canonicalize(a)?.equivalent_to(&canonicalize(b)?))
}

/// Parses and canonicalizes in one step.
pub fn canonicalize_str(text: &str) -> Result<CanonicalForm, AnswerError> {
    let expr = parse_expr(text)?;
    Ok(canonicalize(&expr)?)
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum AnswerError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Result of scoring one answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Judgment {
    pub outcome: bool,
    pub flag: Option<RecordFlag>,
}

impl Judgment {
    fn fail(flag: RecordFlag) -> Self {
        Judgment {
            outcome: false,
            flag: Some(flag),
        }
    }
}

/// Scores `answer` against an already canonicalized gold.
pub fn judge_against(answer: &str, gold: &CanonicalForm) -> Judgment {
    if answer.trim().is_empty() {
        return Judgment::fail(RecordFlag::MissingAnswer);
    }
    let expr = match parse_expr(answer) {
        Ok(e) => e,
        Err(_) => return Judgment::fail(RecordFlag::ParseFailure),
    };
    match canonicalize(&expr) {
        Ok(form) => Judgment {
            outcome: form.equivalent_to(gold),
            flag: None,
        },
        Err(_) => Judgment::fail(RecordFlag::EvalFailure),
    }
}

pub fn canonical_gold(gold: &str) -> Result<CanonicalForm, JudgeError> {
    let expr = parse_expr(gold).map_err(JudgeError::GoldParse)?;
    canonicalize(&expr).map_err(JudgeError::GoldEval)
}

/// `y = 1` iff `answer` parses and is equivalent to `gold`.
pub fn judge(answer: &str, gold: &str) -> Result<Judgment, JudgeError> {
    Ok(judge_against(answer, &canonical_gold(gold)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(a: &str, b: &str) -> bool {
        equivalent(&parse_expr(a).unwrap(), &parse_expr(b).unwrap()).unwrap()
    }

    #[test]
    fn quoted_pairs() {
        assert!(eq(r"1/\pi", r"\pi^{-1}"));
        assert!(!eq(r"\frac{2}{\sqrt{5}\pi}", r"1/\pi"));
        assert!(eq("2^{10}+2^9+2^8+1", "1793"));
        assert!(!eq("199", "98"));
    }

    #[test]
    fn canonical_examples() {
        let c = canonicalize_str("2^{10}+2^9+2^8+1").unwrap();
        assert_eq!(c.exact_value, Some(BigRational::from_integer(1793.into())));
        assert!(canonicalize_str("1/0").is_err());
        let pi = canonicalize_str(r"\pi").unwrap();
        assert!(pi.exact_value.is_none());
        assert!(pi.numeric_value.starts_with("3.14159265358979323846264338327950288419716939937510"));
        assert!(pi.error_bound > 0.0 && pi.error_bound < 1e-80);
    }

    #[test]
    fn judge_examples() {
        assert_eq!(judge("1/2", "0.5").unwrap(), Judgment { outcome: true, flag: None });
        assert_eq!(judge("199", "98").unwrap(), Judgment { outcome: false, flag: None });
        assert_eq!(judge("banana", "7").unwrap(), Judgment::fail(RecordFlag::ParseFailure));
        assert_eq!(judge("", "7").unwrap(), Judgment::fail(RecordFlag::MissingAnswer));
        assert_eq!(judge("ln(0)", "7").unwrap(), Judgment::fail(RecordFlag::EvalFailure));
        assert!(matches!(judge("7", "x+1"), Err(JudgeError::GoldParse(_))));
        assert!(matches!(judge("7", "1/0"), Err(JudgeError::GoldEval(_))));
    }

    #[test]
    fn tolerance_is_relative_then_absolute() {
        assert!(eq("pi", "pi + 10^-45"));
        assert!(!eq("pi", "pi + 10^-25"));
        assert!(eq("sqrt(2) - sqrt(2)", "10^-41"));
        assert!(!eq("sqrt(2) - sqrt(2)", "10^-39"));
    }
}
