//! Guard expressions: a small boolean language over diagnostic fields.
//!
//! ```text
//! expr    := and ("or" and)*
//! and     := unary ("and" unary)*
//! unary   := "not" unary | atom
//! atom    := "(" expr ")" | "true" | "false"
//!          | field [ cmp operand | "in" "{" operand ("," operand)* "}" ]
//! cmp     := "<=" | "<" | ">=" | ">" | "==" | "!="
//! operand := number | "$" param | symbol
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use super::fields::{field_type, FieldType, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    pub fn holds(self, lhs: &Value, rhs: &Value) -> bool {
        match (lhs, rhs) {
            (Value::Num(a), Value::Num(b)) => {
                let eps = 1e-9;
                match self {
                    CmpOp::Lt => *a < b - eps,
                    CmpOp::Le => *a <= b + eps,
                    CmpOp::Gt => *a > b + eps,
                    CmpOp::Ge => *a >= b - eps,
                    CmpOp::Eq => (a - b).abs() <= eps,
                    CmpOp::Ne => (a - b).abs() > eps,
                }
            }
            (a, b) => match self {
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                _ => false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Num(f64),
    Param(String),
    Sym(String),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Num(n) => write!(f, "{n}"),
            Operand::Param(p) => write!(f, "${p}"),
            Operand::Sym(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GuardExpr {
    Const(bool),
    Field(String),
    Compare {
        field: String,
        op: CmpOp,
        rhs: Operand,
    },
    In {
        field: String,
        set: Vec<Operand>,
    },
    Not(Box<GuardExpr>),
    And(Vec<GuardExpr>),
    Or(Vec<GuardExpr>),
}

/// Values bound to `$name` parameters at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardParams {
    pub epsilon: f64,
}

impl GuardParams {
    pub const NAMES: &'static [&'static str] = &["epsilon"];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "epsilon" => Some(self.epsilon),
            _ => None,
        }
    }
}

impl Operand {
    pub fn resolve(&self, params: &GuardParams) -> Value {
        match self {
            Operand::Num(n) => Value::Num(*n),
            Operand::Param(p) => Value::Num(params.get(p).unwrap_or(f64::NAN)),
            Operand::Sym(s) => Value::Sym(s.clone()),
        }
    }
}

impl fmt::Display for GuardExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(e: &GuardExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match e {
                GuardExpr::And(_) | GuardExpr::Or(_) => write!(f, "({e})"),
                _ => write!(f, "{e}"),
            }
        }
        match self {
            GuardExpr::Const(b) => write!(f, "{b}"),
            GuardExpr::Field(name) => f.write_str(name),
            GuardExpr::Compare { field, op, rhs } => write!(f, "{field} {} {rhs}", op.symbol()),
            GuardExpr::In { field, set } => {
                let items: Vec<String> = set.iter().map(ToString::to_string).collect();
                write!(f, "{field} in {{{}}}", items.join(", "))
            }
            GuardExpr::Not(e) => {
                f.write_str("not ")?;
                child(e, f)
            }
            GuardExpr::And(xs) | GuardExpr::Or(xs) => {
                let sep = if matches!(self, GuardExpr::And(_)) { " and " } else { " or " };
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    child(x, f)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Param(String),
    Num(f64),
    Cmp(CmpOp),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |at: usize, msg: String| Error::Schema(format!("guard {src:?} at {at}: {msg}"));
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ',' => Tok::Comma,
            '<' | '>' | '=' | '!' => {
                let two = chars.get(i + 1) == Some(&'=');
                let op = match (c, two) {
                    ('<', true) => CmpOp::Le,
                    ('<', false) => CmpOp::Lt,
                    ('>', true) => CmpOp::Ge,
                    ('>', false) => CmpOp::Gt,
                    ('=', true) => CmpOp::Eq,
                    ('!', true) => CmpOp::Ne,
                    _ => return Err(err(i, format!("unexpected {c:?}"))),
                };
                i += usize::from(two);
                Tok::Cmp(op)
            }
            '$' => {
                i += 1;
                let s: String = chars[i..]
                    .iter()
                    .take_while(|c| c.is_alphanumeric() || **c == '_')
                    .collect();
                if s.is_empty() {
                    return Err(err(start, "empty parameter name".into()));
                }
                i += s.chars().count() - 1;
                Tok::Param(s)
            }
            c if c.is_ascii_digit() || c == '.' => {
                let s: String = chars[i..]
                    .iter()
                    .take_while(|c| c.is_ascii_digit() || **c == '.')
                    .collect();
                i += s.len() - 1;
                Tok::Num(s.parse().map_err(|_| err(start, format!("bad number {s:?}")))?)
            }
            c if c.is_alphabetic() || c == '_' => {
                let s: String = chars[i..]
                    .iter()
                    .take_while(|c| c.is_alphanumeric() || **c == '_')
                    .collect();
                i += s.chars().count() - 1;
                Tok::Ident(s)
            }
            _ => return Err(err(i, format!("unexpected {c:?}"))),
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: impl fmt::Display) -> Error {
        let at = self.toks.get(self.pos).map_or(self.src.len(), |t| t.0);
        Error::Schema(format!("guard {:?} at {at}: {msg}", self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {tok:?}")))
        }
    }

    fn or(&mut self) -> Result<GuardExpr> {
        let mut xs = vec![self.and()?];
        while self.keyword("or") {
            self.pos += 1;
            xs.push(self.and()?);
        }
        Ok(if xs.len() == 1 { xs.pop().unwrap() } else { GuardExpr::Or(xs) })
    }

    fn and(&mut self) -> Result<GuardExpr> {
        let mut xs = vec![self.unary()?];
        while self.keyword("and") {
            self.pos += 1;
            xs.push(self.unary()?);
        }
        Ok(if xs.len() == 1 { xs.pop().unwrap() } else { GuardExpr::And(xs) })
    }

    fn unary(&mut self) -> Result<GuardExpr> {
        if self.keyword("not") {
            self.pos += 1;
            return Ok(GuardExpr::Not(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn operand(&mut self) -> Result<Operand> {
        match self.next() {
            Some(Tok::Num(n)) => Ok(Operand::Num(n)),
            Some(Tok::Param(p)) => Ok(Operand::Param(p)),
            Some(Tok::Ident(s)) => Ok(Operand::Sym(s)),
            _ => {
                self.pos -= 1;
                Err(self.err("expected a number, $parameter or symbol"))
            }
        }
    }

    fn atom(&mut self) -> Result<GuardExpr> {
        match self.next() {
            Some(Tok::LParen) => {
                let e = self.or()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(s)) if s == "true" || s == "false" => Ok(GuardExpr::Const(s == "true")),
            Some(Tok::Ident(s)) if ["and", "or", "not", "in"].contains(&s.as_str()) => {
                self.pos -= 1;
                Err(self.err(format!("unexpected keyword {s:?}")))
            }
            Some(Tok::Ident(field)) => match self.peek() {
                Some(Tok::Cmp(op)) => {
                    let op = *op;
                    self.pos += 1;
                    let rhs = self.operand()?;
                    Ok(GuardExpr::Compare { field, op, rhs })
                }
                Some(Tok::Ident(s)) if s == "in" => {
                    self.pos += 1;
                    self.expect(Tok::LBrace)?;
                    let mut set = vec![self.operand()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                        set.push(self.operand()?);
                    }
                    self.expect(Tok::RBrace)?;
                    Ok(GuardExpr::In { field, set })
                }
                _ => Ok(GuardExpr::Field(field)),
            },
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected a field, '(' or 'not'"))
            }
        }
    }
}

/// Parses and type-checks a guard.
pub fn parse(src: &str) -> Result<GuardExpr> {
    let mut p = Parser {
        src,
        toks: lex(src)?,
        pos: 0,
    };
    if p.toks.is_empty() {
        return Err(Error::Schema("empty guard".into()));
    }
    let e = p.or()?;
    if p.pos < p.toks.len() {
        return Err(p.err("trailing input"));
    }
    check(&e)?;
    Ok(e)
}

fn check_operand(field: &str, ty: &FieldType, rhs: &Operand) -> Result<()> {
    match (ty, rhs) {
        (FieldType::Num, Operand::Num(_)) => Ok(()),
        (FieldType::Num, Operand::Param(p)) if GuardParams::NAMES.contains(&p.as_str()) => Ok(()),
        (FieldType::Num, Operand::Param(p)) => Err(Error::Schema(format!("unknown parameter ${p}"))),
        (FieldType::Sym(allowed), Operand::Sym(s)) if allowed.contains(&s.as_str()) => Ok(()),
        _ => Err(Error::Schema(format!("field {field:?} cannot be compared with {rhs}"))),
    }
}

fn lookup(field: &str) -> Result<FieldType> {
    field_type(field).ok_or_else(|| Error::Schema(format!("guard references unknown field {field:?}")))
}

fn check(e: &GuardExpr) -> Result<()> {
    match e {
        GuardExpr::Const(_) => Ok(()),
        GuardExpr::Field(name) => match lookup(name)? {
            FieldType::Bool => Ok(()),
            _ => Err(Error::Schema(format!("field {name:?} is not boolean"))),
        },
        GuardExpr::Compare { field, op, rhs } => {
            let ty = lookup(field)?;
            if matches!(ty, FieldType::Bool) {
                return Err(Error::Schema(format!("boolean field {field:?} used in a comparison")));
            }
            if matches!(ty, FieldType::Sym(_)) && !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                return Err(Error::Schema(format!("field {field:?} only supports == and !=")));
            }
            check_operand(field, &ty, rhs)
        }
        GuardExpr::In { field, set } => {
            let ty = lookup(field)?;
            if matches!(ty, FieldType::Bool) {
                return Err(Error::Schema(format!("boolean field {field:?} used in a set test")));
            }
            set.iter().try_for_each(|o| check_operand(field, &ty, o))
        }
        GuardExpr::Not(x) => check(x),
        GuardExpr::And(xs) | GuardExpr::Or(xs) => xs.iter().try_for_each(check),
    }
}

/// Direct recursive evaluation against a field lookup.
pub fn eval(e: &GuardExpr, env: &dyn Fn(&str) -> Option<Value>, params: &GuardParams) -> bool {
    match e {
        GuardExpr::Const(b) => *b,
        GuardExpr::Field(name) => env(name) == Some(Value::Bool(true)),
        GuardExpr::Compare { field, op, rhs } => {
            env(field).is_some_and(|v| op.holds(&v, &rhs.resolve(params)))
        }
        GuardExpr::In { field, set } => env(field)
            .is_some_and(|v| set.iter().any(|o| CmpOp::Eq.holds(&v, &o.resolve(params)))),
        GuardExpr::Not(x) => !eval(x, env, params),
        GuardExpr::And(xs) => xs.iter().all(|x| eval(x, env, params)),
        GuardExpr::Or(xs) => xs.iter().any(|x| eval(x, env, params)),
    }
}

/// A single test against one field.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Is { field: String, value: bool },
    Cmp { field: String, op: CmpOp, rhs: Operand },
    In { field: String, set: Vec<Operand>, member: bool },
    Const(bool),
}

impl Literal {
    pub fn field(&self) -> Option<&str> {
        match self {
            Literal::Is { field, .. } | Literal::Cmp { field, .. } | Literal::In { field, .. } => Some(field),
            Literal::Const(_) => None,
        }
    }

    /// Whether the literal unifies with a bound field value.
    pub fn accepts(&self, value: &Value, params: &GuardParams) -> bool {
        match self {
            Literal::Is { value: want, .. } => value == &Value::Bool(*want),
            Literal::Cmp { op, rhs, .. } => op.holds(value, &rhs.resolve(params)),
            Literal::In { set, member, .. } => {
                set.iter().any(|o| CmpOp::Eq.holds(value, &o.resolve(params))) == *member
            }
            Literal::Const(b) => *b,
        }
    }
}

/// Disjunctive normal form: any clause whose literals all hold.
pub fn to_dnf(e: &GuardExpr) -> Vec<Vec<Literal>> {
    fn go(e: &GuardExpr, positive: bool) -> Vec<Vec<Literal>> {
        match e {
            GuardExpr::Const(b) => vec![vec![Literal::Const(*b == positive)]],
            GuardExpr::Field(f) => vec![vec![Literal::Is {
                field: f.clone(),
                value: positive,
            }]],
            GuardExpr::Compare { field, op, rhs } => vec![vec![Literal::Cmp {
                field: field.clone(),
                op: if positive { *op } else { op.negate() },
                rhs: rhs.clone(),
            }]],
            GuardExpr::In { field, set } => vec![vec![Literal::In {
                field: field.clone(),
                set: set.clone(),
                member: positive,
            }]],
            GuardExpr::Not(x) => go(x, !positive),
            GuardExpr::And(xs) | GuardExpr::Or(xs) => {
                let conj = matches!(e, GuardExpr::And(_)) == positive;
                let parts: Vec<_> = xs.iter().map(|x| go(x, positive)).collect();
                if conj {
                    parts.into_iter().fold(vec![vec![]], |acc, part| {
                        let mut out = Vec::with_capacity(acc.len() * part.len());
                        for a in &acc {
                            for b in &part {
                                let mut c = a.clone();
                                c.extend(b.iter().cloned());
                                out.push(c);
                            }
                        }
                        out
                    })
                } else {
                    parts.into_iter().flatten().collect()
                }
            }
        }
    }
    go(e, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn env_of(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn parses_the_grapheme_guard() {
        let src = "not (prefix_error or suffix_error or segmentation_error) and not suffixing_change_applies \
                   and phoneme_distance <= $epsilon and grapheme_mismatch_count in {1, 2} and morpheme_boundaries_preserved";
        let e = parse(src).unwrap();
        let again = parse(&e.to_string()).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn unknown_field_is_named() {
        let err = parse("phonem_match <= 0.1").unwrap_err().to_string();
        assert!(err.contains("phonem_match"), "{err}");
    }

    #[test]
    fn type_errors() {
        assert!(parse("segmentation_error > 1").is_err());
        assert!(parse("grapheme_mismatch_count").is_err());
        assert!(parse("meaning_understood == maybe").is_err());
        assert!(parse("meaning_understood < yes").is_err());
        assert!(parse("phoneme_distance <= $delta").is_err());
        assert!(parse("a and").is_err());
        assert!(parse("(segmentation_error").is_err());
        assert!(parse("segmentation_error segmentation_error").is_err());
    }

    #[test]
    fn precedence_and_binds_tighter() {
        let e = parse("segmentation_error or base_error and has_error").unwrap();
        assert!(matches!(e, GuardExpr::Or(ref xs) if xs.len() == 2));
    }

    #[test]
    fn eval_and_dnf_agree_on_a_grid() {
        let e = parse("not (base_error and grapheme_mismatch_count >= 2) or meaning_understood != yes").unwrap();
        let dnf = to_dnf(&e);
        let params = GuardParams { epsilon: 0.15 };
        for base in [false, true] {
            for g in 0..4 {
                for m in ["yes", "no", "unknown"] {
                    let env = env_of(&[
                        ("base_error", Value::Bool(base)),
                        ("grapheme_mismatch_count", Value::Num(g as f64)),
                        ("meaning_understood", Value::Sym(m.into())),
                    ]);
                    let direct = eval(&e, &|k| env.get(k).cloned(), &params);
                    let via_dnf = dnf.iter().any(|clause| {
                        clause.iter().all(|l| match l.field() {
                            Some(f) => env.get(f).is_some_and(|v| l.accepts(v, &params)),
                            None => l.accepts(&Value::Bool(true), &params),
                        })
                    });
                    assert_eq!(direct, via_dnf, "{base} {g} {m}");
                }
            }
        }
    }
}
