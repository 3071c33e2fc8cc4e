//! Text format for custom rule sets.
//!
//! One directive per line; `#` starts a comment.
//!
//! ```text
//! name  my-receipts
//! bio   on                                   # or off; default on
//! field total.total_price                    # mandatory, single
//! field sub_total.service_price optional
//! field menu.price sum                       # sum over every span
//! rule  total.total_price = sub_total.subtotal_price + sub_total.service_price
//! rule  sub_total.tax_price = 10% * (sub_total.subtotal_price)
//! ```
//!
//! Expressions: `+`, `-`, `*` by a numeric scalar (`0.1`, `10%`), parentheses,
//! `sum(field)`, and numeric literals, which stand for amounts in whole
//! currency units when not multiplying.

use thiserror::Error;

use super::rules::{Aggregation, ArithmeticRule, Expr, FieldKind, FieldSpec, RuleSet};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

pub fn parse_rule_set(text: &str) -> Result<RuleSet, ConfigError> {
    let mut set = RuleSet { name: "custom".into(), require_bio: true, fields: vec![], rules: vec![] };
    let mut rule_lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (directive, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match directive {
            "name" => set.name = rest.to_string(),
            "bio" => {
                set.require_bio = match rest {
                    "on" => true,
                    "off" => false,
                    other => return Err(err(line_no, format!("bio expects on/off, got {other:?}"))),
                }
            }
            "field" => {
                let mut words = rest.split_whitespace();
                let name = words.next().ok_or_else(|| err(line_no, "field needs a name"))?;
                if !is_ident(name) {
                    return Err(err(line_no, format!("invalid field name {name:?}")));
                }
                if set.field(name).is_some() {
                    return Err(err(line_no, format!("field {name} declared twice")));
                }
                let mut spec = FieldSpec::mandatory(name);
                for w in words {
                    match w {
                        "mandatory" => spec.kind = FieldKind::Mandatory,
                        "optional" => spec.kind = FieldKind::Optional,
                        "single" => spec.aggregation = Aggregation::Single,
                        "sum" => spec.aggregation = Aggregation::Sum,
                        other => return Err(err(line_no, format!("unknown field attribute {other:?}"))),
                    }
                }
                set.fields.push(spec);
            }
            "rule" => rule_lines.push((line_no, rest.to_string())),
            other => return Err(err(line_no, format!("unknown directive {other:?}"))),
        }
    }
    for (line_no, text) in rule_lines {
        let rule = parse_rule(&text).map_err(|m| err(line_no, m))?;
        for f in rule.fields() {
            if set.field(f).is_none() {
                return Err(err(line_no, format!("rule references undeclared field {f}")));
            }
        }
        set.rules.push(rule);
    }
    Ok(set)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

pub fn parse_rule(text: &str) -> Result<ArithmeticRule, String> {
    let (lhs, rhs) = text.split_once('=').ok_or("rule needs '='")?;
    let lhs = lhs.trim();
    if !is_ident(lhs) {
        return Err(format!("left-hand side must be a field, got {lhs:?}"));
    }
    let tokens = lex(rhs)?;
    let mut p = Parser { tokens, pos: 0 };
    let expr = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(format!("unexpected {:?}", p.tokens[p.pos]));
    }
    Ok(ArithmeticRule::new(lhs, expr.into_amount()?))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
}

fn lex(s: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1
            }
            '*' | '×' => {
                out.push(Tok::Star);
                i += 1
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let lit: String = chars[start..i].iter().collect();
                let mut v: f64 = lit.parse().map_err(|_| format!("bad number {lit:?}"))?;
                if i < chars.len() && chars[i] == '%' {
                    v /= 100.0;
                    i += 1;
                }
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(format!("unexpected character {other:?}")),
        }
    }
    Ok(out)
}

/// Intermediate value: a plain scalar, or an amount-valued expression.
enum Node {
    Scalar(f64),
    Amount(Expr),
}

impl Node {
    fn into_amount(self) -> Result<Expr, String> {
        Ok(match self {
            Node::Scalar(c) => Expr::Const(c),
            Node::Amount(e) => e,
        })
    }
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Node, String> {
        let mut acc = self.term()?;
        while let Some(op @ (Tok::Plus | Tok::Minus)) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = match (acc, rhs) {
                (Node::Scalar(a), Node::Scalar(b)) => Node::Scalar(if op == Tok::Plus { a + b } else { a - b }),
                (a, b) => {
                    let (a, b) = (a.into_amount()?, b.into_amount()?);
                    Node::Amount(if op == Tok::Plus { a.add(b) } else { a.sub(b) })
                }
            };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Node, String> {
        let mut acc = self.factor()?;
        while self.peek() == Some(&Tok::Star) {
            self.pos += 1;
            let rhs = self.factor()?;
            acc = match (acc, rhs) {
                (Node::Scalar(a), Node::Scalar(b)) => Node::Scalar(a * b),
                (Node::Scalar(s), Node::Amount(e)) | (Node::Amount(e), Node::Scalar(s)) => Node::Amount(e.scale(s)),
                (Node::Amount(_), Node::Amount(_)) => return Err("amounts can only be multiplied by a scalar".into()),
            };
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Node, String> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Node::Scalar(v)),
            Some(Tok::Minus) => Ok(match self.factor()? {
                Node::Scalar(v) => Node::Scalar(-v),
                Node::Amount(e) => Node::Amount(e.scale(-1.0)),
            }),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err("missing ')'".into()),
                }
            }
            Some(Tok::Ident(name)) if name == "sum" && self.peek() == Some(&Tok::LParen) => {
                self.pos += 1;
                let field = match self.next() {
                    Some(Tok::Ident(f)) => f,
                    _ => return Err("sum() takes a field name".into()),
                };
                match self.next() {
                    Some(Tok::RParen) => Ok(Node::Amount(Expr::SumOf(field))),
                    _ => Err("missing ')' after sum(".into()),
                }
            }
            Some(Tok::Ident(name)) => Ok(Node::Amount(Expr::Field(name))),
            Some(t) => Err(format!("unexpected {t:?}")),
            None => Err("unexpected end of expression".into()),
        }
    }
}
