//! Scoring: token-level micro-F1, constraint satisfaction ratio, their
//! product, and per-page timing.

use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{Constraint, DocContext};
use crate::corpus::Document;
use crate::decode::{run_decoder, DecodeParams, DecodeStatus, Decoded, DecoderKind};
use crate::error::DecodeError;

/// The label treated as the negative class.
pub const OUTSIDE: &str = "O";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{pred} predicted documents for {gold} gold documents")]
    DocCount { pred: usize, gold: usize },
    #[error("document {doc}: {pred} predicted labels for {gold} gold labels")]
    Length { doc: usize, pred: usize, gold: usize },
    #[error("document {0} has no gold labels")]
    MissingGold(usize),
    #[error("document {doc}: {source}")]
    Decode { doc: usize, source: DecodeError },
    #[error("repeats must be at least 1")]
    ZeroRepeats,
}

/// Token-level confusion counts with `O` as the negative class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Counts {
    pub fn add<S: AsRef<str>, T: AsRef<str>>(&mut self, pred: &[S], gold: &[T]) {
        for (p, g) in pred.iter().zip(gold) {
            let (p, g) = (p.as_ref(), g.as_ref());
            if p != OUTSIDE && p == g {
                self.tp += 1;
                continue;
            }
            if p != OUTSIDE {
                self.fp += 1;
            }
            if g != OUTSIDE {
                self.fn_ += 1;
            }
        }
    }

    /// `2TP / (2TP + FP + FN)`; 1 when there is nothing to find or predict.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

pub fn micro_f1<S: AsRef<str>, T: AsRef<str>>(pred: &[Vec<S>], gold: &[Vec<T>]) -> Result<f64, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::DocCount { pred: pred.len(), gold: gold.len() });
    }
    let mut counts = Counts::default();
    for (doc, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(EvalError::Length { doc, pred: p.len(), gold: g.len() });
        }
        counts.add(p, g);
    }
    Ok(counts.f1())
}

/// Fraction of documents whose labels satisfy `constraint`; 1 for no documents.
pub fn satisfaction_ratio<S: AsRef<str>>(docs: &[DocContext<'_>], preds: &[Vec<S>], constraint: &Constraint) -> f64 {
    if docs.is_empty() {
        return 1.0;
    }
    let ok = docs
        .iter()
        .zip(preds)
        .filter(|(ctx, labels)| {
            let labels: Vec<&str> = labels.iter().map(AsRef::as_ref).collect();
            constraint.check(ctx, &labels)
        })
        .count();
    ok as f64 / docs.len() as f64
}

pub fn f1s(micro_f1: f64, csr: f64) -> f64 {
    micro_f1 * csr
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Seconds per page over repeated passes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub repeats: usize,
    /// Including time spent in the constraint.
    pub per_page: Stat,
    /// Excluding time spent in the constraint.
    pub per_page_search: Stat,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExaminedStats {
    pub mean: f64,
    pub max: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub decoder: DecoderKind,
    pub max_k: usize,
    pub docs: usize,
    pub micro_f1: f64,
    pub csr: f64,
    pub f1s: f64,
    /// Documents on which the decoder found a satisfying sequence.
    pub satisfied: usize,
    pub examined: ExaminedStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// Decodes every document, in input order; `jobs > 1` decodes in parallel.
pub fn decode_corpus(
    docs: &[Document],
    kind: DecoderKind,
    constraint: &Constraint,
    params: DecodeParams,
    jobs: usize,
) -> Result<Vec<Decoded>, EvalError> {
    let one = |(i, d): (usize, &Document)| {
        run_decoder(kind, &d.table, d.vocab(), &d.ctx(), constraint, params)
            .map_err(|source| EvalError::Decode { doc: i, source })
    };
    if jobs <= 1 {
        return docs.iter().enumerate().map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    pool.install(|| docs.par_iter().enumerate().map(one).collect())
}

/// Scores decoded documents against their gold labels.
pub fn score(
    docs: &[Document],
    decoded: &[Decoded],
    kind: DecoderKind,
    constraint: &Constraint,
    params: DecodeParams,
) -> Result<EvalReport, EvalError> {
    if docs.len() != decoded.len() {
        return Err(EvalError::DocCount { pred: decoded.len(), gold: docs.len() });
    }
    let mut counts = Counts::default();
    let mut satisfied_labels = 0;
    for (i, (doc, dec)) in docs.iter().zip(decoded).enumerate() {
        let gold = doc.record.gold_labels.as_ref().ok_or(EvalError::MissingGold(i))?;
        let pred = dec
            .prediction
            .labels(&doc.table, doc.vocab())
            .map_err(|e| EvalError::Decode { doc: i, source: e.into() })?;
        if pred.len() != gold.len() {
            return Err(EvalError::Length { doc: i, pred: pred.len(), gold: gold.len() });
        }
        counts.add(&pred, gold);
        if constraint.check(&doc.ctx(), &pred) {
            satisfied_labels += 1;
        }
    }
    let micro = counts.f1();
    let csr = if docs.is_empty() { 1.0 } else { satisfied_labels as f64 / docs.len() as f64 };
    let examined: Vec<usize> = decoded.iter().map(|d| d.outcome.examined).collect();
    let total: usize = examined.iter().sum();
    Ok(EvalReport {
        decoder: kind,
        max_k: params.max_k,
        docs: docs.len(),
        micro_f1: micro,
        csr,
        f1s: f1s(micro, csr),
        satisfied: decoded.iter().filter(|d| d.outcome.status == DecodeStatus::Satisfied).count(),
        examined: ExaminedStats {
            mean: if docs.is_empty() { 0.0 } else { total as f64 / docs.len() as f64 },
            max: examined.iter().copied().max().unwrap_or(0),
            total,
        },
        timing: None,
    })
}

pub fn evaluate(
    docs: &[Document],
    kind: DecoderKind,
    constraint: &Constraint,
    params: DecodeParams,
    jobs: usize,
) -> Result<EvalReport, EvalError> {
    let decoded = decode_corpus(docs, kind, constraint, params, jobs)?;
    score(docs, &decoded, kind, constraint, params)
}

/// Per-page timing over `repeats` passes. Each pass decodes the whole corpus
/// and sums per-document decoder time.
pub fn bench(
    docs: &[Document],
    kind: DecoderKind,
    constraint: &Constraint,
    params: DecodeParams,
    repeats: usize,
    jobs: usize,
) -> Result<(Timing, Vec<Decoded>), EvalError> {
    if repeats == 0 {
        return Err(EvalError::ZeroRepeats);
    }
    let pages = docs.len().max(1) as f64;
    let mut incl = Vec::with_capacity(repeats);
    let mut excl = Vec::with_capacity(repeats);
    let mut last = Vec::new();
    for _ in 0..repeats {
        let decoded = decode_corpus(docs, kind, constraint, params, jobs)?;
        let total: Duration = decoded.iter().map(|d| d.outcome.elapsed).sum();
        let checks: Duration = decoded.iter().map(|d| d.outcome.constraint_time).sum();
        incl.push(total.as_secs_f64() / pages);
        excl.push(total.saturating_sub(checks).as_secs_f64() / pages);
        last = decoded;
    }
    let timing = Timing { repeats, per_page: Stat::of(&incl), per_page_search: Stat::of(&excl) };
    Ok((timing, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{Locale, Token};

    #[test]
    fn f1_extremes() {
        let gold = vec![vec!["B-a", "I-a", "O"]];
        assert_eq!(micro_f1(&gold, &gold).unwrap(), 1.0);
        assert_eq!(micro_f1(&[vec!["O", "O", "O"]], &gold).unwrap(), 0.0);
        assert_eq!(micro_f1(&[vec!["O"]], &[vec!["O"]]).unwrap(), 1.0);
        assert!(micro_f1(&[vec!["O"]], &gold).is_err());
        assert!(micro_f1::<&str, &str>(&[], &gold).is_err());
    }

    #[test]
    fn f1_matches_confusion_counts() {
        // 5 entity tokens; two substitutions count as FP and FN each.
        let gold = vec![vec!["O", "B-a", "I-a", "O", "B-b", "I-b", "I-b", "O", "O", "O"]];
        let pred = vec![vec!["O", "B-a", "I-b", "O", "B-b", "B-a", "I-b", "O", "O", "O"]];
        let (tp, fp, fn_) = (3.0, 2.0, 2.0);
        let expected = 2.0 * tp / (2.0 * tp + fp + fn_);
        assert!((micro_f1(&pred, &gold).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn csr_counts_documents() {
        let toks = vec![Token::new("a"), Token::new("b")];
        let ctxs: Vec<DocContext<'_>> = (0..10).map(|_| DocContext::new(&toks, Locale::default())).collect();
        let preds: Vec<Vec<&str>> =
            (0..10).map(|i| if i % 3 == 0 { vec!["O", "I-x"] } else { vec!["B-x", "I-x"] }).collect();
        assert_eq!(satisfaction_ratio(&ctxs, &preds, &Constraint::bio()), 0.6);
        assert_eq!(satisfaction_ratio(&ctxs, &preds, &Constraint::never()), 0.0);
        assert_eq!(satisfaction_ratio(&ctxs, &preds, &Constraint::none()), 1.0);
    }

    #[test]
    fn product_and_stats() {
        assert!((f1s(0.9, 0.5) - 0.45).abs() < 1e-15);
        assert_eq!(f1s(1.0, 1.0), 1.0);
        assert_eq!(Stat::of(&[2.0]), Stat { mean: 2.0, std: 0.0 });
        let s = Stat::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }
}
