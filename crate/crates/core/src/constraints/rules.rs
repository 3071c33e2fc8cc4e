//! Field specifications and arithmetic consistency rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::amount::{parse_amount, Amount, Locale};
use super::bio::{extract_spans, extract_spans_lenient, Spans, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Absent: every rule mentioning the field is not evaluated.
    Mandatory,
    /// Absent: the field counts as zero.
    Optional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// The first span's value.
    Single,
    /// The sum over all spans.
    Sum,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    pub aggregation: Aggregation,
}

impl FieldSpec {
    pub fn mandatory(name: &str) -> Self {
        Self { name: name.into(), kind: FieldKind::Mandatory, aggregation: Aggregation::Single }
    }

    pub fn optional(name: &str) -> Self {
        Self { name: name.into(), kind: FieldKind::Optional, aggregation: Aggregation::Single }
    }

    pub fn summed(mut self) -> Self {
        self.aggregation = Aggregation::Sum;
        self
    }
}

/// Right-hand side of a rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Field(String),
    /// Sum over every span of a field regardless of its declared aggregation.
    SumOf(String),
    /// A literal amount in whole currency units.
    Const(f64),
    Scale(f64, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn field(name: &str) -> Self {
        Expr::Field(name.into())
    }

    pub fn add(self, rhs: Expr) -> Self {
        Expr::Add(Box::new(self), Box::new(rhs))
    }

    pub fn sub(self, rhs: Expr) -> Self {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }

    pub fn scale(self, factor: f64) -> Self {
        Expr::Scale(factor, Box::new(self))
    }

    fn collect_fields<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Field(f) | Expr::SumOf(f) => {
                out.insert(f);
            }
            Expr::Const(_) => {}
            Expr::Scale(_, e) => e.collect_fields(out),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.collect_fields(out);
                b.collect_fields(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Field(name) => write!(f, "{name}"),
            Expr::SumOf(name) => write!(f, "sum({name})"),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Scale(s, e) => write!(f, "{s} * ({e})"),
            Expr::Add(a, b) => write!(f, "{a} + {b}"),
            Expr::Sub(a, b) => write!(f, "{a} - ({b})"),
        }
    }
}

/// `lhs = rhs` over extracted field values.
#[derive(Debug, Clone, PartialEq)]
pub struct ArithmeticRule {
    pub lhs: String,
    pub rhs: Expr,
}

impl ArithmeticRule {
    pub fn new(lhs: &str, rhs: Expr) -> Self {
        Self { lhs: lhs.into(), rhs }
    }

    /// Every field the rule mentions.
    pub fn fields(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        out.insert(self.lhs.as_str());
        self.rhs.collect_fields(&mut out);
        out
    }
}

impl fmt::Display for ArithmeticRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated,
    /// A mandatory field is missing; counts as satisfied in conjunctions.
    NotEvaluated,
}

impl Verdict {
    pub fn passes(self) -> bool {
        self != Verdict::Violated
    }
}

/// Parsed amounts per field, in span order.
pub type FieldValues = BTreeMap<String, Vec<Amount>>;

/// Absolute tolerance in minor units.
pub const ABS_TOLERANCE_CENTS: f64 = 1.0;
pub const REL_TOLERANCE: f64 = 1e-6;

pub fn amounts_match(lhs: f64, rhs: f64) -> bool {
    let diff = (lhs - rhs).abs();
    diff <= ABS_TOLERANCE_CENTS || diff <= REL_TOLERANCE * lhs.abs().max(rhs.abs())
}

/// Evaluates one rule. Fields without a spec are treated as mandatory.
pub fn eval_rule(rule: &ArithmeticRule, specs: &[FieldSpec], values: &FieldValues) -> Verdict {
    let spec_of = |name: &str| specs.iter().find(|s| s.name == name);
    for name in rule.fields() {
        let present = values.get(name).is_some_and(|v| !v.is_empty());
        let mandatory = spec_of(name).map_or(true, |s| s.kind == FieldKind::Mandatory);
        if !present && mandatory {
            return Verdict::NotEvaluated;
        }
    }
    let value = |name: &str, force_sum: bool| -> f64 {
        let Some(amounts) = values.get(name).filter(|v| !v.is_empty()) else {
            return 0.0;
        };
        let agg = spec_of(name).map_or(Aggregation::Single, |s| s.aggregation);
        if force_sum || agg == Aggregation::Sum {
            amounts.iter().map(|a| a.cents as f64).sum()
        } else {
            amounts[0].cents as f64
        }
    };
    fn eval(e: &Expr, value: &dyn Fn(&str, bool) -> f64) -> f64 {
        match e {
            Expr::Field(f) => value(f, false),
            Expr::SumOf(f) => value(f, true),
            Expr::Const(c) => c * 100.0,
            Expr::Scale(s, e) => s * eval(e, value),
            Expr::Add(a, b) => eval(a, value) + eval(b, value),
            Expr::Sub(a, b) => eval(a, value) - eval(b, value),
        }
    }
    let lhs = value(&rule.lhs, false);
    let rhs = eval(&rule.rhs, &value);
    if amounts_match(lhs, rhs) {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    }
}

/// Why a labeling fails a rule set.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleFailure {
    NotBio,
    Unparseable { field: String, text: String },
    Violated(usize),
}

/// Declared fields, arithmetic rules and whether BIO validity is required.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    pub name: String,
    pub require_bio: bool,
    pub fields: Vec<FieldSpec>,
    pub rules: Vec<ArithmeticRule>,
}

impl RuleSet {
    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Parses the spans of every declared field.
    pub fn field_values(&self, spans: &Spans, locale: Locale) -> Result<FieldValues, RuleFailure> {
        let mut values = FieldValues::new();
        for spec in &self.fields {
            let Some(found) = spans.get(&spec.name) else { continue };
            let mut amounts = Vec::with_capacity(found.len());
            for span in found {
                match parse_amount(&span.text, locale) {
                    Some(a) => amounts.push(a),
                    None => return Err(RuleFailure::Unparseable { field: spec.name.clone(), text: span.text.clone() }),
                }
            }
            values.insert(spec.name.clone(), amounts);
        }
        Ok(values)
    }

    /// Per-rule verdicts for a labeling whose spans are well formed.
    pub fn evaluate<S: AsRef<str>>(
        &self,
        tokens: &[Token],
        labels: &[S],
        locale: Locale,
    ) -> Result<Vec<Verdict>, RuleFailure> {
        let spans =
            if self.require_bio { extract_spans(tokens, labels) } else { extract_spans_lenient(tokens, labels) }
                .map_err(|_| RuleFailure::NotBio)?;
        let values = self.field_values(&spans, locale)?;
        Ok(self.rules.iter().map(|r| eval_rule(r, &self.fields, &values)).collect())
    }

    /// Checks a labeling; on failure reports the first failing part.
    pub fn check<S: AsRef<str>>(
        &self,
        tokens: &[Token],
        labels: &[S],
        locale: Locale,
    ) -> Result<Vec<Verdict>, RuleFailure> {
        let verdicts = self.evaluate(tokens, labels, locale)?;
        match verdicts.iter().position(|v| !v.passes()) {
            Some(i) => Err(RuleFailure::Violated(i)),
            None => Ok(verdicts),
        }
    }
}
