//! Recursive-descent parser for scalar answers written either as plain infix
//! (`2^10 + 1`, `sqrt(5)*pi`) or in a LaTeX subset (`\frac{2}{\sqrt{5}\pi}`).

use num_bigint::BigInt;
use thiserror::Error;

use super::ast::{BinOp, Constant, Expr, Func};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    Syntax,
    FreeVariable(String),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("cannot parse answer at position {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn syntax(position: usize, message: impl Into<String>) -> Self {
        ParseError {
            position,
            message: message.into(),
            kind: ParseErrorKind::Syntax,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Word(String),
    Cmd(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Bang,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Pipe,
    End,
}

/// Removes math delimiters, surrounding whitespace and a trailing period.
/// Returns the char range of the payload.
fn strip_wrappers(chars: &[char]) -> (usize, usize) {
    let (mut lo, mut hi) = (0, chars.len());
    loop {
        let before = (lo, hi);
        while lo < hi && chars[lo].is_whitespace() {
            lo += 1;
        }
        while hi > lo && chars[hi - 1].is_whitespace() {
            hi -= 1;
        }
        if hi > lo && chars[hi - 1] == '.' {
            hi -= 1;
        }
        let s = &chars[lo..hi];
        let pairs: [(&str, &str); 4] = [("$$", "$$"), ("$", "$"), ("\\(", "\\)"), ("\\[", "\\]")];
        for (open, close) in pairs {
            let (o, c) = (open.chars().count(), close.chars().count());
            if s.len() >= o + c
                && s[..o].iter().copied().eq(open.chars())
                && s[s.len() - c..].iter().copied().eq(close.chars())
            {
                lo += o;
                hi -= c;
                break;
            }
        }
        if (lo, hi) == before {
            return (lo, hi);
        }
    }
}

struct Lexer<'a> {
    chars: &'a [char],
    pos: usize,
    end: usize,
}

impl Lexer<'_> {
    fn peek(&self) -> Option<char> {
        (self.pos < self.end).then(|| self.chars[self.pos])
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn braced_text(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        if self.peek() != Some('{') {
            return Err(ParseError::syntax(self.pos, "expected '{'"));
        }
        self.pos += 1;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == '}' {
                let text: String = self.chars[start..self.pos].iter().collect();
                self.pos += 1;
                return Ok(text.trim().to_string());
            }
            self.pos += 1;
        }
        Err(ParseError::syntax(start, "unterminated '{'"))
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let at = self.pos;
            let Some(c) = self.peek() else {
                out.push((Tok::End, at));
                return Ok(out);
            };
            self.pos += 1;
            let tok = match c {
                '+' => Tok::Plus,
                '-' | '\u{2212}' | '\u{2013}' => Tok::Minus,
                '*' | '\u{00d7}' | '\u{00b7}' | '\u{22c5}' => Tok::Star,
                '/' | '\u{00f7}' => Tok::Slash,
                '^' => Tok::Caret,
                '!' => Tok::Bang,
                ',' => Tok::Comma,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '|' => Tok::Pipe,
                '\u{03c0}' => Tok::Cmd("pi".into()),
                '\u{221a}' => Tok::Cmd("sqrt".into()),
                '\\' => match self.command(at)? {
                    Some(tok) => tok,
                    None => continue,
                },
                c if c.is_ascii_digit() || (c == '.' && matches!(self.peek(), Some(d) if d.is_ascii_digit())) => {
                    let start = at;
                    let mut seen_dot = c == '.';
                    while let Some(d) = self.peek() {
                        if d.is_ascii_digit() {
                            self.pos += 1;
                        } else if d == '.' && !seen_dot && matches!(self.chars.get(self.pos + 1), Some(x) if x.is_ascii_digit()) {
                            seen_dot = true;
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                    // `1.5e-3` is scientific notation; a bare `2e` stays 2·e.
                    if matches!(self.peek(), Some('e' | 'E')) {
                        let sign = matches!(self.chars.get(self.pos + 1), Some('+' | '-')) as usize;
                        if matches!(self.chars.get(self.pos + 1 + sign), Some(x) if x.is_ascii_digit()) {
                            self.pos += 1 + sign;
                            while matches!(self.peek(), Some(d) if d.is_ascii_digit()) {
                                self.pos += 1;
                            }
                        }
                    }
                    Tok::Num(self.chars[start..self.pos].iter().collect())
                }
                c if c.is_ascii_alphabetic() => {
                    let start = at;
                    while matches!(self.peek(), Some(d) if d.is_ascii_alphabetic()) {
                        self.pos += 1;
                    }
                    Tok::Word(self.chars[start..self.pos].iter().collect())
                }
                other => {
                    return Err(ParseError::syntax(at, format!("unexpected character {other:?}")));
                }
            };
            out.push((tok, at));
        }
    }

    /// Lexes the command following a backslash. `None` means the command is
    /// layout-only and produces no token.
    fn command(&mut self, at: usize) -> Result<Option<Tok>, ParseError> {
        let Some(first) = self.peek() else {
            return Err(ParseError::syntax(at, "dangling backslash"));
        };
        if !first.is_ascii_alphabetic() {
            self.pos += 1;
            return Ok(match first {
                ',' | ';' | ':' | '!' | ' ' => None,
                '{' => Some(Tok::LBrace),
                '}' => Some(Tok::RBrace),
                '|' => Some(Tok::Pipe),
                other => {
                    return Err(ParseError::syntax(at, format!("unsupported command \\{other}")));
                }
            });
        }
        let start = self.pos;
        while matches!(self.peek(), Some(d) if d.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        Ok(match name.as_str() {
            "left" | "right" | "big" | "Big" | "bigg" | "Bigg" => {
                self.skip_ws();
                if self.peek() == Some('.') {
                    self.pos += 1;
                }
                None
            }
            "quad" | "qquad" | "displaystyle" | "textstyle" | "boxed" => None,
            "cdot" | "times" | "ast" => Some(Tok::Star),
            "div" => Some(Tok::Slash),
            "frac" | "dfrac" | "tfrac" => Some(Tok::Cmd("frac".into())),
            "binom" | "dbinom" | "tbinom" => Some(Tok::Cmd("binom".into())),
            "mathrm" | "text" | "operatorname" | "mathit" => Some(Tok::Word(self.braced_text()?)),
            "pi" | "sqrt" | "exp" | "ln" | "log" | "sin" | "cos" | "tan" => Some(Tok::Cmd(name)),
            _ => return Err(ParseError::syntax(at, format!("unsupported command \\{name}"))),
        })
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.idx].0
    }

    fn pos(&self) -> usize {
        self.toks[self.idx].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.idx].0.clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::syntax(self.pos(), format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn starts_implicit_factor(&self) -> bool {
        matches!(self.peek(), Tok::LParen | Tok::LBrace | Tok::Word(_) | Tok::Cmd(_))
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => {
                    self.bump();
                    BinOp::Mul
                }
                Tok::Slash => {
                    self.bump();
                    BinOp::Div
                }
                _ if self.starts_implicit_factor() => BinOp::Mul,
                _ => return Ok(lhs),
            };
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(Expr::neg(self.unary()?))
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.postfix()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.exponent()?;
            return Ok(Expr::binary(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    /// Exponent: a braced group or a single token, right-associative.
    fn exponent(&mut self) -> Result<Expr, ParseError> {
        let atom = match self.peek() {
            Tok::Minus => {
                self.bump();
                return Ok(Expr::neg(self.exponent()?));
            }
            Tok::Plus => {
                self.bump();
                return self.exponent();
            }
            _ => self.primary()?,
        };
        if *self.peek() == Tok::Caret {
            self.bump();
            let rest = self.exponent()?;
            return Ok(Expr::binary(BinOp::Pow, atom, rest));
        }
        Ok(atom)
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        while *self.peek() == Tok::Bang {
            self.bump();
            e = Expr::call(Func::Factorial, vec![e]);
        }
        Ok(e)
    }

    /// Argument of `\frac`, `\sqrt`, `\binom`: a braced group or one token.
    /// A bare multi-digit number contributes only its first digit, as in `\frac12`.
    fn group_arg(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::LBrace {
            self.bump();
            let e = self.expr()?;
            self.expect(Tok::RBrace, "'}'")?;
            return Ok(e);
        }
        if let Tok::Num(s) = self.peek().clone() {
            if s.len() > 1 && !s.contains('.') {
                let (head, tail) = s.split_at(1);
                let at = self.pos();
                self.toks[self.idx] = (Tok::Num(tail.to_string()), at + 1);
                return number(head, at);
            }
        }
        self.primary()
    }

    fn fn_arg(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::LParen | Tok::LBrace => self.primary(),
            Tok::Minus => {
                self.bump();
                Ok(Expr::neg(self.fn_arg()?))
            }
            _ => self.power(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.pos();
        match self.bump() {
            Tok::Num(s) => number(&s, at),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::LBrace => {
                let e = self.expr()?;
                self.expect(Tok::RBrace, "'}'")?;
                Ok(e)
            }
            Tok::LBracket => {
                let e = self.expr()?;
                self.expect(Tok::RBracket, "']'")?;
                Ok(e)
            }
            Tok::Pipe => {
                let e = self.expr()?;
                self.expect(Tok::Pipe, "closing '|'")?;
                Ok(Expr::call(Func::Abs, vec![e]))
            }
            Tok::Cmd(name) => self.command(&name, at),
            Tok::Word(w) => self.word(&w, at),
            Tok::End => Err(ParseError::syntax(at, "unexpected end of input")),
            other => Err(ParseError::syntax(at, format!("unexpected token {other:?}"))),
        }
    }

    fn command(&mut self, name: &str, at: usize) -> Result<Expr, ParseError> {
        match name {
            "pi" => Ok(Expr::Constant(Constant::Pi)),
            "frac" => {
                let num = self.group_arg()?;
                let den = self.group_arg()?;
                Ok(Expr::binary(BinOp::Div, num, den))
            }
            "binom" => {
                let n = self.group_arg()?;
                let k = self.group_arg()?;
                Ok(Expr::call(Func::Binomial, vec![n, k]))
            }
            "sqrt" => {
                if *self.peek() == Tok::LBracket {
                    self.bump();
                    let index = self.expr()?;
                    self.expect(Tok::RBracket, "']'")?;
                    let radicand = self.group_arg()?;
                    return Ok(Expr::call(Func::Root, vec![index, radicand]));
                }
                let radicand = self.group_arg()?;
                Ok(Expr::call(Func::Sqrt, vec![radicand]))
            }
            other => {
                let func = Func::from_name(other)
                    .ok_or_else(|| ParseError::syntax(at, format!("unsupported command \\{other}")))?;
                if *self.peek() == Tok::Caret {
                    return Err(ParseError::syntax(self.pos(), "powers of functions are not supported"));
                }
                let arg = self.fn_arg()?;
                Ok(Expr::call(func, vec![arg]))
            }
        }
    }

    fn word(&mut self, w: &str, at: usize) -> Result<Expr, ParseError> {
        match w {
            "pi" => return Ok(Expr::Constant(Constant::Pi)),
            "e" => return Ok(Expr::Constant(Constant::E)),
            _ => {}
        }
        let Some(func) = Func::from_name(w) else {
            return Err(ParseError {
                position: at,
                message: format!("free variable or unknown name {w:?}"),
                kind: ParseErrorKind::FreeVariable(w.to_string()),
            });
        };
        self.expect(Tok::LParen, &format!("'(' after {w}"))?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "')'")?;
        if args.len() != func.arity() {
            return Err(ParseError::syntax(
                at,
                format!("{w} takes {} argument(s), got {}", func.arity(), args.len()),
            ));
        }
        Ok(Expr::call(func, args))
    }
}

fn number(text: &str, at: usize) -> Result<Expr, ParseError> {
    let bad = || ParseError::syntax(at, format!("malformed number {text:?}"));
    let (mantissa, exponent) = match text.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i64>().map_err(|_| bad())?),
        None => (text, 0),
    };
    if exponent.abs() > MAX_EXPONENT {
        return Err(ParseError::syntax(at, format!("exponent of {text:?} exceeds {MAX_EXPONENT}")));
    }
    let (int_part, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: BigInt = format!("{int_part}{frac}").parse().map_err(|_| bad())?;
    let scale = frac.len() as i64 - exponent;
    if scale <= 0 {
        return Ok(Expr::Integer(digits * BigInt::from(10).pow((-scale) as u32)));
    }
    Ok(Expr::Decimal {
        digits,
        scale: scale as u32,
    })
}

/// Largest power of ten accepted in scientific notation.
const MAX_EXPONENT: i64 = 10_000;

const MAX_TOKENS: usize = 10_000;
const MAX_NESTING: usize = 200;

/// Bounds recursion depth before descending.
fn check_size(toks: &[(Tok, usize)]) -> Result<(), ParseError> {
    if toks.len() > MAX_TOKENS {
        return Err(ParseError::syntax(0, format!("answer longer than {MAX_TOKENS} tokens")));
    }
    let mut depth = 0usize;
    let mut run = 0usize;
    for (tok, at) in toks {
        match tok {
            Tok::LParen | Tok::LBrace | Tok::LBracket => depth += 1,
            Tok::RParen | Tok::RBrace | Tok::RBracket => depth = depth.saturating_sub(1),
            _ => {}
        }
        run = if matches!(tok, Tok::Minus | Tok::Plus) { run + 1 } else { 0 };
        if depth > MAX_NESTING || run > MAX_NESTING {
            return Err(ParseError::syntax(*at, "expression nested too deeply"));
        }
    }
    Ok(())
}

/// Parses an answer string into a closed expression tree.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let (lo, hi) = strip_wrappers(&chars);
    if lo >= hi {
        return Err(ParseError {
            position: 0,
            message: "empty answer".into(),
            kind: ParseErrorKind::Empty,
        });
    }
    let toks = Lexer {
        chars: &chars,
        pos: lo,
        end: hi,
    }
    .tokens()?;
    check_size(&toks)?;
    let mut p = Parser { toks, idx: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(ParseError::syntax(p.pos(), format!("unexpected trailing token {:?}", p.peek())));
    }
    Ok(e)
}
