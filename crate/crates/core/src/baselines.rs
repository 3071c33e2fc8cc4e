//! Reference decoders: argmax, beam search, full-expansion best-first search,
//! brute-force enumeration and BIO-constrained Viterbi.
//!
//! All of them order sequences like Lazy-k does, by exact cost and then by
//! rank vector, so their outputs can be compared element for element.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use rustc_hash::FxHashSet;

use crate::constraints::{Constraint, DocContext, Tag};
use crate::cost::SeqCost;
use crate::decode::{check_dims, DecodeOutcome, DecodeParams, DecodeStatus, MassBudget, TimedCheck};
use crate::error::{DecodeError, TableError};
use crate::table::{labels_of, LabelSeq, ProbTable, Rank};

/// Largest state space [`brute_force_topk`] agrees to enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Label names of the most probable label at every position.
pub fn argmax_decode<'v, S: AsRef<str>>(table: &ProbTable, vocab: &'v [S]) -> Result<Vec<&'v str>, TableError> {
    labels_of(table, &LabelSeq::argmax(table).ranks, vocab)
}

fn seq_order(a: &LabelSeq, b: &LabelSeq) -> Ordering {
    a.cost.cmp(&b.cost).then_with(|| a.ranks.cmp(&b.ranks))
}

/// Left-to-right beam search with beam width `k`; returns the final beam
/// sorted best first.
///
/// Every step scores all `k * l` extensions and sorts them.
pub fn beam_topk(table: &ProbTable, k: usize) -> Result<Vec<LabelSeq>, DecodeError> {
    if k == 0 {
        return Err(DecodeError::ZeroBudget);
    }
    let mut beam = vec![LabelSeq { ranks: Vec::new(), cost: SeqCost::zero() }];
    for i in 0..table.n() {
        let mut next = Vec::with_capacity(beam.len() * table.l());
        for prefix in &beam {
            for r in 0..table.l() as Rank {
                let mut ranks = prefix.ranks.clone();
                ranks.push(r);
                let mut cost = prefix.cost.clone();
                cost.push_logp(table.logp_at_rank(i, r));
                next.push(LabelSeq { ranks, cost });
            }
        }
        next.sort_by(seq_order);
        next.truncate(k);
        beam = next;
    }
    Ok(beam)
}

/// The `k` best sequences by exhaustive enumeration.
pub fn brute_force_topk(table: &ProbTable, k: usize) -> Result<Vec<LabelSeq>, DecodeError> {
    let space = table.state_space();
    if space > BRUTE_FORCE_LIMIT {
        return Err(DecodeError::StateSpaceTooLarge(space));
    }
    let (n, l) = (table.n(), table.l() as Rank);
    let mut all = Vec::with_capacity(space as usize);
    let mut ranks = vec![0 as Rank; n];
    loop {
        all.push(LabelSeq { cost: table.cost_unchecked(&ranks), ranks: ranks.clone() });
        let mut i = n;
        loop {
            if i == 0 {
                all.sort_by(seq_order);
                all.truncate(k);
                return Ok(all);
            }
            i -= 1;
            ranks[i] += 1;
            if ranks[i] < l {
                break;
            }
            ranks[i] = 0;
        }
    }
}

/// Beam search of width `max_k`, then the first beam member that satisfies
/// the constraint.
pub fn beam_decode(
    table: &ProbTable,
    vocab: &[String],
    ctx: &DocContext<'_>,
    constraint: &Constraint,
    params: DecodeParams,
) -> Result<DecodeOutcome, DecodeError> {
    let start = Instant::now();
    params.validate()?;
    check_dims(table, vocab, ctx)?;
    let beam = beam_topk(table, params.max_k)?;
    let mut check = TimedCheck::new(constraint, *ctx, vocab);
    let mut budget = MassBudget::new(params.mass_threshold);
    let mut status =
        if beam.len() < params.max_k { DecodeStatus::SearchExhausted } else { DecodeStatus::ExhaustedBudget };
    let mut sequence = None;
    let mut examined = 0;
    for seq in beam {
        examined += 1;
        if check.check(table, &seq.ranks) {
            status = DecodeStatus::Satisfied;
            sequence = Some(seq);
            break;
        }
        if budget.spend(seq.probability()) {
            status = DecodeStatus::ExhaustedBudget;
            break;
        }
    }
    Ok(DecodeOutcome { status, sequence, examined, elapsed: start.elapsed(), constraint_time: check.spent })
}

/// Best-first search that pushes every child of each examined state.
pub fn best_first_decode(
    table: &ProbTable,
    vocab: &[String],
    ctx: &DocContext<'_>,
    constraint: &Constraint,
    params: DecodeParams,
) -> Result<DecodeOutcome, DecodeError> {
    let start = Instant::now();
    params.validate()?;
    check_dims(table, vocab, ctx)?;
    let mut check = TimedCheck::new(constraint, *ctx, vocab);
    let mut budget = MassBudget::new(params.mass_threshold);
    let last = (table.l() - 1) as Rank;

    let first = LabelSeq::argmax(table);
    let root: Rc<[Rank]> = first.ranks.into();
    let mut visited: FxHashSet<Rc<[Rank]>> = FxHashSet::default();
    visited.insert(Rc::clone(&root));
    let mut heap = BinaryHeap::from([Reverse((first.cost, root))]);
    let mut examined = 0;
    let mut status = DecodeStatus::SearchExhausted;
    let mut sequence = None;
    while let Some(Reverse((cost, ranks))) = heap.pop() {
        examined += 1;
        if check.check(table, &ranks) {
            status = DecodeStatus::Satisfied;
            sequence = Some(LabelSeq { ranks: ranks.to_vec(), cost });
            break;
        }
        if examined >= params.max_k || budget.spend(cost.probability()) {
            status = DecodeStatus::ExhaustedBudget;
            break;
        }
        for i in 0..ranks.len() {
            let r = ranks[i];
            if r == last {
                continue;
            }
            let mut child = ranks.to_vec();
            child[i] += 1;
            if visited.contains(child.as_slice()) {
                continue;
            }
            let mut child_cost = cost.clone();
            child_cost.pop_logp(table.logp_at_rank(i, r));
            child_cost.push_logp(table.logp_at_rank(i, r + 1));
            let child: Rc<[Rank]> = child.into();
            visited.insert(Rc::clone(&child));
            heap.push(Reverse((child_cost, child)));
        }
    }
    Ok(DecodeOutcome { status, sequence, examined, elapsed: start.elapsed(), constraint_time: check.spent })
}

/// The most probable BIO-valid sequence, by dynamic programming.
///
/// Among equally probable sequences the one with the lexicographically
/// smallest rank vector is returned. Fails with `NoValidSequence` when every
/// BIO-valid sequence selects an impossible label.
pub fn viterbi_bio<S: AsRef<str>>(table: &ProbTable, vocab: &[S]) -> Result<LabelSeq, DecodeError> {
    let (n, l) = (table.n(), table.l());
    if vocab.len() != l {
        return Err(TableError::VocabMismatch { got: vocab.len(), expected: l }.into());
    }
    let tags: Vec<Tag<'_>> = vocab
        .iter()
        .map(|v| Tag::parse(v.as_ref()).map_err(|_| DecodeError::NotBio(v.as_ref().to_string())))
        .collect::<Result<_, _>>()?;

    // best[i][r]: cheapest valid completion of positions i.. with rank r at i.
    let mut best: Vec<Vec<Option<SeqCost>>> = vec![vec![None; l]; n];
    for i in (0..n).rev() {
        for r in 0..l {
            let here = tags[table.label_at(i, r as Rank)];
            let tail = if i + 1 == n {
                Some(SeqCost::zero())
            } else {
                (0..l)
                    .filter(|&s| tags[table.label_at(i + 1, s as Rank)].may_follow(Some(here)))
                    .filter_map(|s| best[i + 1][s].as_ref())
                    .min()
                    .cloned()
            };
            best[i][r] = tail.map(|mut c| {
                c.push_logp(table.logp_at_rank(i, r as Rank));
                c
            });
        }
    }

    let mut ranks = Vec::with_capacity(n);
    let mut prev: Option<Tag<'_>> = None;
    for i in 0..n {
        let pick = (0..l)
            .filter(|&r| tags[table.label_at(i, r as Rank)].may_follow(prev))
            .filter_map(|r| best[i][r].as_ref().map(|c| (c, r)))
            // min_by keeps the first minimum, i.e. the smallest rank.
            .min_by(|a, b| a.0.cmp(b.0))
            .map(|(_, r)| r)
            .ok_or(DecodeError::NoValidSequence)?;
        prev = Some(tags[table.label_at(i, pick as Rank)]);
        ranks.push(pick as Rank);
    }
    let cost = table.cost_unchecked(&ranks);
    if !cost.is_finite() {
        return Err(DecodeError::NoValidSequence);
    }
    Ok(LabelSeq { ranks, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{bio_valid, Locale, Token};
    use crate::table::fixtures::{walkthrough, WALKTHROUGH_VOCAB};

    fn vocab() -> Vec<String> {
        WALKTHROUGH_VOCAB.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn argmax_labels() {
        assert_eq!(argmax_decode(&walkthrough(), &WALKTHROUGH_VOCAB).unwrap(), ["B_cash", "I_total", "I_total"]);
    }

    #[test]
    fn walkthrough_top_six() {
        let t = walkthrough();
        let expected: [[Rank; 3]; 6] = [[0, 0, 0], [0, 0, 1], [0, 1, 0], [1, 0, 0], [0, 1, 1], [1, 0, 1]];
        let probs = [0.08, 0.06, 0.06, 0.048, 0.045, 0.036];
        for list in [brute_force_topk(&t, 6).unwrap(), beam_topk(&t, 6).unwrap()] {
            let ranks: Vec<_> = list.iter().map(|s| s.ranks.clone()).collect();
            assert_eq!(ranks, expected.map(|r| r.to_vec()));
            for (s, p) in list.iter().zip(probs) {
                assert!((s.probability() - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn brute_force_guard() {
        let rows = vec![vec![-1.0; 10]; 8];
        let t = ProbTable::new(&rows).unwrap();
        assert!(matches!(brute_force_topk(&t, 1), Err(DecodeError::StateSpaceTooLarge(_))));
    }

    #[test]
    fn viterbi_on_walkthrough() {
        let t = walkthrough();
        let seq = viterbi_bio(&t, &vocab()).unwrap();
        assert_eq!(seq.labels(&t, &vocab()).unwrap(), ["B_total", "I_total", "I_total"]);
        assert!(bio_valid(&seq.labels(&t, &vocab()).unwrap()).unwrap());
    }

    #[test]
    fn viterbi_without_valid_finite_sequence() {
        // Only I-x is possible at the start.
        let t = ProbTable::from_probs(&[[0.0, 1.0], [0.5, 0.5]]).unwrap();
        assert_eq!(viterbi_bio(&t, &["B-x", "I-x"]), Err(DecodeError::NoValidSequence));
        assert!(matches!(viterbi_bio(&t, &["B-x", "Z"]), Err(DecodeError::NotBio(_))));
    }

    #[test]
    fn best_first_and_beam_decode_walkthrough() {
        let t = walkthrough();
        let toks = vec![Token::new("56"), Token::joined("."), Token::joined("000")];
        let ctx = DocContext::new(&toks, Locale::default());
        let c = Constraint::bio();
        let bf = best_first_decode(&t, &vocab(), &ctx, &c, DecodeParams::new(10)).unwrap();
        assert_eq!((bf.status, bf.examined), (DecodeStatus::Satisfied, 4));
        assert_eq!(bf.sequence.unwrap().ranks, [1, 0, 0]);
        let beam = beam_decode(&t, &vocab(), &ctx, &c, DecodeParams::new(3)).unwrap();
        assert_eq!((beam.status, beam.examined), (DecodeStatus::ExhaustedBudget, 3));
        let beam = beam_decode(&t, &vocab(), &ctx, &c, DecodeParams::new(4)).unwrap();
        assert_eq!(beam.sequence.unwrap().ranks, [1, 0, 0]);
        let never = Constraint::never();
        let bf = best_first_decode(&t, &vocab(), &ctx, &never, DecodeParams::new(1000)).unwrap();
        assert_eq!((bf.status, bf.examined), (DecodeStatus::SearchExhausted, 64));
        let beam = beam_decode(&t, &vocab(), &ctx, &never, DecodeParams::new(1000)).unwrap();
        assert_eq!((beam.status, beam.examined), (DecodeStatus::SearchExhausted, 64));
    }
}
