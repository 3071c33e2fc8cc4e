//! Decode results and a uniform entry point over all decoders.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::constraints::{Constraint, DocContext};
use crate::error::{DecodeError, TableError};
use crate::lazyk;
use crate::table::{LabelSeq, ProbTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeStatus {
    Satisfied,
    /// The budget (`max_k` or the probability mass threshold) ran out.
    ExhaustedBudget,
    /// Every sequence the decoder can produce was examined.
    SearchExhausted,
}

impl fmt::Display for DecodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecodeStatus::Satisfied => "satisfied",
            DecodeStatus::ExhaustedBudget => "exhausted-budget",
            DecodeStatus::SearchExhausted => "search-exhausted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeParams {
    /// Maximum number of sequences examined.
    pub max_k: usize,
    /// Stop once the examined sequences' total probability reaches this.
    pub mass_threshold: Option<f64>,
}

impl DecodeParams {
    pub fn new(max_k: usize) -> Self {
        Self { max_k, mass_threshold: None }
    }

    pub fn with_mass_threshold(mut self, p: f64) -> Self {
        self.mass_threshold = Some(p);
        self
    }

    pub(crate) fn validate(&self) -> Result<(), DecodeError> {
        if self.max_k == 0 {
            return Err(DecodeError::ZeroBudget);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub status: DecodeStatus,
    /// The satisfying sequence, when `status` is `Satisfied`.
    pub sequence: Option<LabelSeq>,
    pub examined: usize,
    pub elapsed: Duration,
    /// Part of `elapsed` spent inside the constraint.
    pub constraint_time: Duration,
}

impl DecodeOutcome {
    pub fn is_satisfied(&self) -> bool {
        self.status == DecodeStatus::Satisfied
    }
}

/// Constraint wrapper that accumulates evaluation time.
pub(crate) struct TimedCheck<'a> {
    constraint: &'a Constraint,
    ctx: DocContext<'a>,
    vocab: &'a [String],
    pub(crate) spent: Duration,
}

impl<'a> TimedCheck<'a> {
    pub(crate) fn new(constraint: &'a Constraint, ctx: DocContext<'a>, vocab: &'a [String]) -> Self {
        Self { constraint, ctx, vocab, spent: Duration::ZERO }
    }

    pub(crate) fn check(&mut self, table: &ProbTable, ranks: &[u16]) -> bool {
        let start = Instant::now();
        let labels: Vec<&str> =
            ranks.iter().enumerate().map(|(i, &r)| self.vocab[table.label_at(i, r)].as_str()).collect();
        let ok = self.constraint.check(&self.ctx, &labels);
        self.spent += start.elapsed();
        ok
    }
}

pub(crate) fn check_dims(table: &ProbTable, vocab: &[String], ctx: &DocContext<'_>) -> Result<(), TableError> {
    if vocab.len() != table.l() {
        return Err(TableError::VocabMismatch { got: vocab.len(), expected: table.l() });
    }
    if ctx.tokens.len() != table.n() {
        return Err(TableError::LengthMismatch { got: ctx.tokens.len(), expected: table.n() });
    }
    Ok(())
}

/// Accumulates examined probability mass against an optional threshold.
pub(crate) struct MassBudget {
    threshold: Option<f64>,
    mass: f64,
}

impl MassBudget {
    pub(crate) fn new(threshold: Option<f64>) -> Self {
        Self { threshold, mass: 0.0 }
    }

    /// Records a failed sequence; true once the threshold is reached.
    pub(crate) fn spend(&mut self, probability: f64) -> bool {
        self.mass += probability;
        self.threshold.is_some_and(|t| self.mass > t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    Argmax,
    Lazyk,
    Bestfirst,
    Beam,
    ViterbiBio,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 5] =
        [DecoderKind::Argmax, DecoderKind::Lazyk, DecoderKind::Bestfirst, DecoderKind::Beam, DecoderKind::ViterbiBio];

    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Argmax => "argmax",
            DecoderKind::Lazyk => "lazyk",
            DecoderKind::Bestfirst => "bestfirst",
            DecoderKind::Beam => "beam",
            DecoderKind::ViterbiBio => "viterbi-bio",
        }
    }

    /// Whether `max_k` affects the result.
    pub fn uses_budget(self) -> bool {
        matches!(self, DecoderKind::Lazyk | DecoderKind::Bestfirst | DecoderKind::Beam)
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DecoderKind::ALL.into_iter().find(|d| d.name() == s).ok_or_else(|| format!("unknown decoder {s:?}"))
    }
}

/// A decode outcome plus the labeling to report for the document.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub outcome: DecodeOutcome,
    /// The satisfying sequence, or the decoder's unconstrained answer when
    /// none was found (argmax for the search decoders).
    pub prediction: LabelSeq,
}

/// Runs one decoder on one document.
pub fn run_decoder(
    kind: DecoderKind,
    table: &ProbTable,
    vocab: &[String],
    ctx: &DocContext<'_>,
    constraint: &Constraint,
    params: DecodeParams,
) -> Result<Decoded, DecodeError> {
    params.validate()?;
    check_dims(table, vocab, ctx)?;
    let outcome = match kind {
        DecoderKind::Lazyk => lazyk::lazy_k_decode(table, vocab, ctx, constraint, params)?,
        DecoderKind::Bestfirst => baselines::best_first_decode(table, vocab, ctx, constraint, params)?,
        DecoderKind::Beam => baselines::beam_decode(table, vocab, ctx, constraint, params)?,
        DecoderKind::Argmax | DecoderKind::ViterbiBio => {
            let start = Instant::now();
            let single = if kind == DecoderKind::Argmax {
                Some(LabelSeq::argmax(table))
            } else {
                match baselines::viterbi_bio(table, vocab) {
                    Ok(seq) => Some(seq),
                    Err(DecodeError::NoValidSequence) => None,
                    Err(e) => return Err(e),
                }
            };
            let mut check = TimedCheck::new(constraint, *ctx, vocab);
            let (status, sequence, prediction) = match single {
                Some(seq) => {
                    let ok = check.check(table, &seq.ranks);
                    if ok {
                        (DecodeStatus::Satisfied, Some(seq.clone()), seq)
                    } else {
                        (DecodeStatus::ExhaustedBudget, None, seq)
                    }
                }
                None => (DecodeStatus::SearchExhausted, None, LabelSeq::argmax(table)),
            };
            let outcome =
                DecodeOutcome { status, sequence, examined: 1, elapsed: start.elapsed(), constraint_time: check.spent };
            return Ok(Decoded { outcome, prediction });
        }
    };
    let prediction = outcome.sequence.clone().unwrap_or_else(|| LabelSeq::argmax(table));
    Ok(Decoded { outcome, prediction })
}
