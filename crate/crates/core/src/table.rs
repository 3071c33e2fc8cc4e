//! Per-document probability tables and the rank representation of sequences.

use std::sync::Arc;

use crate::cost::{CostDelta, SeqCost};
use crate::error::TableError;

/// Index of a label within a position's probability-sorted order.
pub type Rank = u16;

/// An `n x l` matrix of log-probabilities with a fixed rank order per position.
///
/// Rank 0 is the most probable label at a position. Ties are broken by
/// ascending label index and impossible labels (`-inf`) always sort last.
#[derive(Debug, Clone)]
pub struct ProbTable {
    n: usize,
    l: usize,
    logp: Arc<[f64]>,
    // rank_order[i * l + j] = label index of rank j at position i
    rank_order: Arc<[u32]>,
    // edit_key[i * l + r] orders the moves (i, r -> r + 1) by delta, then by
    // descending position
    edit_key: Arc<[u32]>,
}

impl ProbTable {
    /// Builds a table from rows of natural-log probabilities.
    pub fn new<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, TableError> {
        let n = rows.len();
        if n == 0 {
            return Err(TableError::Empty);
        }
        let l = rows[0].as_ref().len();
        if l == 0 {
            return Err(TableError::Empty);
        }
        if l > Rank::MAX as usize {
            return Err(TableError::TooManyLabels(l));
        }
        let mut logp = Vec::with_capacity(n * l);
        let mut rank_order = Vec::with_capacity(n * l);
        for (row_idx, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != l {
                return Err(TableError::RaggedRow { row: row_idx, got: row.len(), expected: l });
            }
            for (label, &v) in row.iter().enumerate() {
                if v.is_nan() {
                    return Err(TableError::NaN { row: row_idx, label });
                }
                if v == f64::INFINITY {
                    return Err(TableError::PositiveInfinity { row: row_idx, label });
                }
            }
            if row.iter().all(|&v| v == f64::NEG_INFINITY) {
                return Err(TableError::NoPossibleLabel { row: row_idx });
            }
            let mut order: Vec<u32> = (0..l as u32).collect();
            // Descending log-probability, ascending label index on ties.
            order.sort_by(|&a, &b| row[b as usize].total_cmp(&row[a as usize]).then(a.cmp(&b)));
            logp.extend_from_slice(row);
            rank_order.extend(order);
        }
        let mut table = Self { n, l, logp: logp.into(), rank_order: rank_order.into(), edit_key: Arc::new([]) };
        table.edit_key = table.edit_keys();
        Ok(table)
    }

    fn edit_keys(&self) -> Arc<[u32]> {
        let mut moves: Vec<(CostDelta, usize, usize)> = Vec::with_capacity(self.n * (self.l - 1));
        for i in 0..self.n {
            for r in 0..self.l - 1 {
                moves.push((self.delta(i, r as Rank), i, r));
            }
        }
        moves.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
        let mut keys = vec![u32::MAX; self.n * self.l];
        for (k, &(_, i, r)) in moves.iter().enumerate() {
            keys[i * self.l + r] = k as u32;
        }
        keys.into()
    }

    /// Builds a table from raw probabilities in `[0, 1]`; zero maps to `-inf`.
    pub fn from_probs<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, TableError> {
        let logs: Vec<Vec<f64>> = rows.iter().map(|r| r.as_ref().iter().map(|p| p.ln()).collect()).collect();
        Self::new(&logs)
    }

    /// Number of positions (tokens).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of labels.
    pub fn l(&self) -> usize {
        self.l
    }

    /// Log-probability of `label` (a label index, not a rank) at `position`.
    pub fn logp(&self, position: usize, label: usize) -> f64 {
        self.logp[position * self.l + label]
    }

    pub fn row(&self, position: usize) -> &[f64] {
        &self.logp[position * self.l..(position + 1) * self.l]
    }

    /// Label index holding `rank` at `position`.
    pub fn label_at(&self, position: usize, rank: Rank) -> usize {
        self.rank_order[position * self.l + rank as usize] as usize
    }

    /// The labels of `position` in rank order.
    pub fn rank_order(&self, position: usize) -> &[u32] {
        &self.rank_order[position * self.l..(position + 1) * self.l]
    }

    /// Log-probability of the label with `rank` at `position`.
    pub fn logp_at_rank(&self, position: usize, rank: Rank) -> f64 {
        self.logp(position, self.label_at(position, rank))
    }

    /// Exact cost increase of moving `position` from `rank` to `rank + 1`.
    pub(crate) fn delta(&self, position: usize, rank: Rank) -> CostDelta {
        CostDelta::between(self.logp_at_rank(position, rank), self.logp_at_rank(position, rank + 1))
    }

    /// Sort key of the move `rank -> rank + 1` at `position`; lower keys have
    /// smaller deltas.
    pub(crate) fn edit_key(&self, position: usize, rank: Rank) -> u32 {
        self.edit_key[position * self.l + rank as usize]
    }

    pub(crate) fn cost_unchecked(&self, ranks: &[Rank]) -> SeqCost {
        let mut cost = SeqCost::zero();
        for (i, &r) in ranks.iter().enumerate() {
            cost.push_logp(self.logp_at_rank(i, r));
        }
        cost
    }

    /// Exact cost of a rank vector, after validating its shape.
    pub fn cost(&self, ranks: &[Rank]) -> Result<SeqCost, TableError> {
        self.check_ranks(ranks)?;
        Ok(self.cost_unchecked(ranks))
    }

    /// Total number of sequences, `l^n`, as a float (it overflows integers quickly).
    pub fn state_space(&self) -> f64 {
        (self.l as f64).powi(self.n as i32)
    }

    pub fn check_ranks(&self, ranks: &[Rank]) -> Result<(), TableError> {
        if ranks.len() != self.n {
            return Err(TableError::LengthMismatch { got: ranks.len(), expected: self.n });
        }
        for (position, &r) in ranks.iter().enumerate() {
            if r as usize >= self.l {
                return Err(TableError::RankOutOfRange { position, rank: r as usize, labels: self.l });
            }
        }
        Ok(())
    }

    /// Maps a rank vector to label indices.
    pub fn label_indices(&self, ranks: &[Rank]) -> Vec<usize> {
        ranks.iter().enumerate().map(|(i, &r)| self.label_at(i, r)).collect()
    }

    /// Rank vector of a sequence given as label indices.
    pub fn ranks_of_labels(&self, labels: &[usize]) -> Result<Vec<Rank>, TableError> {
        if labels.len() != self.n {
            return Err(TableError::LengthMismatch { got: labels.len(), expected: self.n });
        }
        labels
            .iter()
            .enumerate()
            .map(|(i, &lab)| {
                self.rank_order(i)
                    .iter()
                    .position(|&x| x as usize == lab)
                    .map(|r| r as Rank)
                    .ok_or(TableError::RankOutOfRange { position: i, rank: lab, labels: self.l })
            })
            .collect()
    }
}

/// A full label assignment in rank representation together with its cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSeq {
    pub ranks: Vec<Rank>,
    pub cost: SeqCost,
}

impl LabelSeq {
    pub fn new(table: &ProbTable, ranks: Vec<Rank>) -> Result<Self, TableError> {
        let cost = table.cost(&ranks)?;
        Ok(Self { ranks, cost })
    }

    /// The most probable sequence: rank 0 everywhere.
    pub fn argmax(table: &ProbTable) -> Self {
        let ranks = vec![0; table.n()];
        let cost = table.cost_unchecked(&ranks);
        Self { ranks, cost }
    }

    pub fn probability(&self) -> f64 {
        self.cost.probability()
    }

    /// Label names of this sequence.
    pub fn labels<'v, S: AsRef<str>>(&self, table: &ProbTable, vocab: &'v [S]) -> Result<Vec<&'v str>, TableError> {
        labels_of(table, &self.ranks, vocab)
    }
}

/// `sum(-logp)` over the selected labels; `+inf` if any is impossible.
pub fn seq_cost(table: &ProbTable, ranks: &[Rank]) -> Result<f64, TableError> {
    Ok(table.cost(ranks)?.value())
}

/// Signed rank distance `sum_i (b_i - a_i)`.
pub fn seq_distance(a: &[Rank], b: &[Rank]) -> Result<i64, TableError> {
    if a.len() != b.len() {
        return Err(TableError::LengthMismatch { got: b.len(), expected: a.len() });
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| y as i64 - x as i64).sum())
}

/// Label names selected by `ranks`.
pub fn labels_of<'v, S: AsRef<str>>(
    table: &ProbTable,
    ranks: &[Rank],
    vocab: &'v [S],
) -> Result<Vec<&'v str>, TableError> {
    if vocab.len() != table.l() {
        return Err(TableError::VocabMismatch { got: vocab.len(), expected: table.l() });
    }
    table.check_ranks(ranks)?;
    Ok(ranks.iter().enumerate().map(|(i, &r)| vocab[table.label_at(i, r)].as_ref()).collect())
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn walkthrough_rank_order() {
        let t = walkthrough();
        assert_eq!(t.rank_order(0)[..2], [2, 0]);
        assert_eq!(t.rank_order(1)[..2], [1, 3]);
        assert_eq!(t.rank_order(2)[..2], [1, 3]);
        // Impossible labels sort last, by label index.
        assert_eq!(t.rank_order(0)[2..], [1, 3]);
    }

    #[test]
    fn single_cell() {
        let t = ProbTable::new(&[[0.0]]).unwrap();
        assert_eq!((t.n(), t.l()), (1, 1));
        assert_eq!(t.rank_order(0), &[0]);
    }

    #[test]
    fn rejects_bad_matrices() {
        let empty: [[f64; 2]; 0] = [];
        assert_eq!(ProbTable::new(&empty).unwrap_err(), TableError::Empty);
        assert_eq!(
            ProbTable::new(&[[f64::NEG_INFINITY, f64::NEG_INFINITY]]).unwrap_err(),
            TableError::NoPossibleLabel { row: 0 }
        );
        assert_eq!(ProbTable::new(&[[0.0, f64::NAN]]).unwrap_err(), TableError::NaN { row: 0, label: 1 });
        assert!(matches!(
            ProbTable::new(&[vec![0.0, -1.0], vec![0.0]]).unwrap_err(),
            TableError::RaggedRow { row: 1, .. }
        ));
    }

    #[test]
    fn random_rank_order_matches_full_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| -rng.gen_range(0.01..5.0)).collect()).collect();
        let t = ProbTable::new(&rows).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let mut idx: Vec<usize> = (0..3).collect();
            idx.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap());
            let got: Vec<usize> = t.rank_order(i).iter().map(|&x| x as usize).collect();
            assert_eq!(got, idx);
        }
    }

    #[test]
    fn walkthrough_costs_and_labels() {
        let t = walkthrough();
        let c = seq_cost(&t, &[0, 0, 0]).unwrap();
        assert!((c - (-(0.08f64).ln())).abs() < 1e-12);
        assert_eq!(labels_of(&t, &[0, 0, 0], &WALKTHROUGH_VOCAB).unwrap(), ["B_cash", "I_total", "I_total"]);
        assert_eq!(labels_of(&t, &[1, 1, 1], &WALKTHROUGH_VOCAB).unwrap(), ["B_total", "I_cash", "I_cash"]);
        assert_eq!(seq_cost(&t, &[2, 0, 0]).unwrap(), f64::INFINITY);
        assert!(matches!(seq_cost(&t, &[4, 0, 0]), Err(TableError::RankOutOfRange { .. })));
        assert!(matches!(labels_of(&t, &[0, 0, 0], &["a"]), Err(TableError::VocabMismatch { .. })));
    }

    #[test]
    fn one_hot_costs_zero_and_recovers_gold() {
        let gold = [2usize, 0, 1, 1];
        let rows: Vec<Vec<f64>> =
            gold.iter().map(|&g| (0..3).map(|j| if j == g { 1.0 } else { 0.0 }).collect()).collect();
        let t = ProbTable::from_probs(&rows).unwrap();
        assert_eq!(seq_cost(&t, &[0; 4]).unwrap(), 0.0);
        let vocab = ["a", "b", "c"];
        assert_eq!(labels_of(&t, &[0; 4], &vocab).unwrap(), ["c", "a", "b", "b"]);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(seq_distance(&[0, 0, 0], &[0, 1, 0]).unwrap(), 1);
        assert_eq!(seq_distance(&[0, 0, 0], &[1, 1, 0]).unwrap(), 2);
        assert!(seq_distance(&[0], &[0, 1]).is_err());
    }

    fn random_table(rng: &mut ChaCha8Rng, n: usize, l: usize) -> (Vec<Vec<f64>>, ProbTable) {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..l).map(|_| rng.gen_range(0.001f64..1.0)).collect()).collect();
        let t = ProbTable::from_probs(&rows).unwrap();
        (rows, t)
    }

    proptest! {
        #[test]
        fn cost_matches_direct_product(seed in any::<u64>(), n in 1usize..7, l in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (rows, t) = random_table(&mut rng, n, l);
            let ranks: Vec<Rank> = (0..n).map(|_| rng.gen_range(0..l) as Rank).collect();
            let p: f64 = ranks.iter().enumerate().map(|(i, &r)| rows[i][t.label_at(i, r)]).product();
            let c = seq_cost(&t, &ranks).unwrap();
            prop_assert!((c - (-p.ln())).abs() <= 1e-9 * n as f64);
        }

        #[test]
        fn rank_order_is_non_increasing_and_deterministic(seed in any::<u64>(), n in 1usize..6, l in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (rows, t) = random_table(&mut rng, n, l);
            let again = ProbTable::from_probs(&rows).unwrap();
            for i in 0..n {
                prop_assert_eq!(t.rank_order(i), again.rank_order(i));
                for j in 1..l {
                    prop_assert!(t.logp_at_rank(i, j as Rank - 1) >= t.logp_at_rank(i, j as Rank));
                }
            }
        }

        #[test]
        fn incrementing_a_rank_never_lowers_cost(seed in any::<u64>(), n in 1usize..6, l in 2usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, t) = random_table(&mut rng, n, l);
            let ranks: Vec<Rank> = (0..n).map(|_| rng.gen_range(0..l - 1) as Rank).collect();
            let pos = rng.gen_range(0..n);
            let mut child = ranks.clone();
            child[pos] += 1;
            prop_assert!(t.cost(&child).unwrap() >= t.cost(&ranks).unwrap());
            prop_assert_eq!(seq_distance(&ranks, &child).unwrap(), 1);
        }

        #[test]
        fn distance_is_elementwise_sum(a in proptest::collection::vec(0u16..9, 5), b in proptest::collection::vec(0u16..9, 5)) {
            let want: i64 = (0..5).map(|i| b[i] as i64 - a[i] as i64).sum();
            prop_assert_eq!(seq_distance(&a, &b).unwrap(), want);
        }
    }
}
