//! Global constraints over a document's labeling.
//!
//! A [`Constraint`] is a pure predicate over the token texts and a label
//! vector. Decoders treat it as a black box. Constraints are built from BIO
//! validity, rule sets (field parseability plus arithmetic rules) and
//! arbitrary closures, combined by conjunction.

pub mod amount;
pub mod bio;
pub mod config;
pub mod datasets;
pub mod rules;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

pub use amount::{parse_amount, Amount, Locale};
pub use bio::{bio_valid, extract_spans, Span, Spans, Tag, Token};
pub use config::{parse_rule_set, ConfigError};
pub use datasets::Dataset;
pub use rules::{eval_rule, ArithmeticRule, Expr, FieldKind, FieldSpec, RuleFailure, RuleSet, Verdict};

/// What a constraint gets to see besides the labels.
#[derive(Debug, Clone, Copy)]
pub struct DocContext<'a> {
    pub tokens: &'a [Token],
    pub locale: Locale,
}

impl<'a> DocContext<'a> {
    pub fn new(tokens: &'a [Token], locale: Locale) -> Self {
        Self { tokens, locale }
    }
}

type Predicate = dyn Fn(&DocContext<'_>, &[&str]) -> bool + Send + Sync;

#[derive(Clone)]
enum Part {
    Never,
    Bio,
    Rules(Arc<RuleSet>),
    Custom(Arc<Predicate>),
}

/// Conjunction of constraint parts. An empty conjunction always holds.
#[derive(Clone)]
pub struct Constraint {
    name: String,
    parts: Vec<Part>,
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Constraint").field("name", &self.name).field("parts", &self.parts.len()).finish()
    }
}

/// Outcome of checking the BIO and semantic parts separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Breakdown {
    pub bio: bool,
    /// `None` when the labels are not BIO-valid (semantics not checked) or
    /// the constraint has no semantic part.
    pub semantic: Option<bool>,
}

impl Constraint {
    /// The constraint that always holds.
    pub fn none() -> Self {
        Self { name: "none".into(), parts: vec![] }
    }

    /// The constraint that never holds; used to force full enumeration.
    pub fn never() -> Self {
        Self { name: "never".into(), parts: vec![Part::Never] }
    }

    pub fn bio() -> Self {
        Self { name: "bio".into(), parts: vec![Part::Bio] }
    }

    pub fn rule_set(set: RuleSet) -> Self {
        let mut parts = Vec::new();
        if set.require_bio {
            parts.push(Part::Bio);
        }
        let name = set.name.clone();
        parts.push(Part::Rules(Arc::new(set)));
        Self { name, parts }
    }

    /// BIO validity, field parseability and the dataset's arithmetic rules.
    pub fn dataset(d: Dataset) -> Self {
        Self::rule_set(d.rule_set())
    }

    pub fn from_config_file(path: &Path) -> Result<Self, ConfigLoadError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigLoadError::Io(path.display().to_string(), e.to_string()))?;
        Ok(Self::rule_set(parse_rule_set(&text)?))
    }

    pub fn from_fn<F>(name: &str, f: F) -> Self
    where
        F: Fn(&DocContext<'_>, &[&str]) -> bool + Send + Sync + 'static,
    {
        Self { name: name.into(), parts: vec![Part::Custom(Arc::new(f))] }
    }

    pub fn and(mut self, other: Constraint) -> Self {
        self.name = format!("{}+{}", self.name, other.name);
        self.parts.extend(other.parts);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Evaluates the conjunction. Never fails: malformed labels are simply
    /// not satisfying.
    pub fn check(&self, ctx: &DocContext<'_>, labels: &[&str]) -> bool {
        if labels.len() != ctx.tokens.len() {
            return false;
        }
        self.parts.iter().all(|part| match part {
            Part::Never => false,
            Part::Bio => bio_valid(labels).unwrap_or(false),
            Part::Rules(set) => set.check(ctx.tokens, labels, ctx.locale).is_ok(),
            Part::Custom(f) => f(ctx, labels),
        })
    }

    /// BIO validity and, for BIO-valid labels, the non-BIO parts.
    pub fn breakdown(&self, ctx: &DocContext<'_>, labels: &[&str]) -> Breakdown {
        let bio = bio_valid(labels).unwrap_or(false);
        let has_semantic = self.parts.iter().any(|p| !matches!(p, Part::Bio));
        let semantic = (bio && has_semantic).then(|| self.check(ctx, labels));
        Breakdown { bio, semantic }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigLoadError {
    #[error("cannot read {0}: {1}")]
    Io(String, String),
    #[error(transparent)]
    Parse(#[from] ConfigError),
}
