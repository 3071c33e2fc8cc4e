//! Sequence costs with exact, order-independent accumulation.
//!
//! A cost is a sum of negative log-probabilities. Floating point addition is
//! not associative, so two sequences that pick the same multiset of
//! probabilities could otherwise compare unequal depending on the order in
//! which their costs were built up. [`SeqCost`] keeps the exact sum as a list
//! of non-overlapping partials (Shewchuk's algorithm), which makes equality
//! and ordering exact.
//!
//! Impossible labels (log-probability `-inf`) contribute an infinite term.
//! Those are counted separately so that the cost behaves like
//! `count * OMEGA + finite` for an infinitely large `OMEGA`: sequences with
//! fewer impossible labels always rank first, and the finite part still
//! orders sequences with the same count.

use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

type Partials = SmallVec<[f64; 4]>;

/// Exact running sum of `f64` terms.
#[derive(Clone, Default)]
pub struct ExactSum {
    partials: Partials,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a finite term. The represented sum stays exact.
    pub fn add(&mut self, mut x: f64) {
        debug_assert!(x.is_finite());
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        if x != 0.0 {
            self.partials.push(x);
        }
    }

    pub fn extend(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    pub fn subtract(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(-p);
        }
    }

    /// The exact sum correctly rounded to the nearest `f64`.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Half-way case: the remaining partials decide the rounding direction.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }

    /// Exact comparison of the two represented sums.
    pub fn cmp_exact(&self, other: &ExactSum) -> Ordering {
        let (a, b) = (self.value(), other.value());
        if a != b {
            // Rounding is monotone, so distinct rounded values order the exact values.
            return a.total_cmp(&b);
        }
        let mut diff = self.clone();
        diff.subtract(other);
        diff.value().total_cmp(&0.0)
    }
}

impl fmt::Debug for ExactSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Cost of a (partial) label sequence: `sum(-log p)` kept exactly.
#[derive(Clone, Default)]
pub struct SeqCost {
    impossible: u32,
    finite: ExactSum,
    // finite.value(), kept up to date
    rounded: f64,
}

impl SeqCost {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Adds the cost `-logp` of choosing a label with log-probability `logp`.
    pub fn push_logp(&mut self, logp: f64) {
        if logp == f64::NEG_INFINITY {
            self.impossible += 1;
        } else {
            self.finite.add(-logp);
            self.rounded = self.finite.value();
        }
    }

    /// Removes a term previously added with [`SeqCost::push_logp`].
    pub fn pop_logp(&mut self, logp: f64) {
        if logp == f64::NEG_INFINITY {
            debug_assert!(self.impossible > 0);
            self.impossible -= 1;
        } else {
            self.finite.add(logp);
            self.rounded = self.finite.value();
        }
    }

    /// Cost as a float; `+inf` when any impossible label is selected.
    pub fn value(&self) -> f64 {
        if self.impossible > 0 {
            f64::INFINITY
        } else {
            self.rounded
        }
    }

    /// Number of impossible (`-inf`) labels in the sequence.
    pub fn impossible(&self) -> u32 {
        self.impossible
    }

    /// Probability of the sequence, `exp(-cost)`.
    pub fn probability(&self) -> f64 {
        (-self.value()).exp()
    }

    pub fn is_finite(&self) -> bool {
        self.impossible == 0
    }
}

impl Ord for SeqCost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.impossible.cmp(&other.impossible).then_with(|| {
            if self.rounded != other.rounded {
                // Rounding is monotone, so distinct rounded values decide.
                self.rounded.total_cmp(&other.rounded)
            } else {
                self.finite.cmp_exact(&other.finite)
            }
        })
    }
}

impl PartialOrd for SeqCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for SeqCost {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SeqCost {}

impl fmt::Debug for SeqCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.impossible > 0 {
            write!(f, "inf[{}]+{:?}", self.impossible, self.finite)
        } else {
            write!(f, "{:?}", self.finite)
        }
    }
}

/// Exact increase in cost when a position moves from a label with
/// log-probability `from` to one with log-probability `to <= from`.
///
/// Ordered the same way as the resulting child costs, which is what the
/// per-state edit lists sort by.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostDelta {
    impossible: u32,
    hi: f64,
    lo: f64,
}

impl CostDelta {
    pub fn between(from: f64, to: f64) -> Self {
        match (from == f64::NEG_INFINITY, to == f64::NEG_INFINITY) {
            (true, true) => Self { impossible: 0, hi: 0.0, lo: 0.0 },
            // The finite part loses the `-from` term.
            (false, true) => Self { impossible: 1, hi: from, lo: 0.0 },
            (true, false) => unreachable!("rank order puts -inf last"),
            (false, false) => {
                // Knuth's two-sum: hi + lo == from - to exactly.
                let hi = from - to;
                let bb = hi - from;
                let lo = (from - (hi - bb)) + (-to - bb);
                Self { impossible: 0, hi, lo }
            }
        }
    }

    /// The delta rounded to a float (`+inf` when it introduces an impossible label).
    pub fn value(&self) -> f64 {
        if self.impossible > 0 {
            f64::INFINITY
        } else {
            self.hi
        }
    }

    pub fn cmp(&self, other: &Self) -> Ordering {
        self.impossible
            .cmp(&other.impossible)
            .then_with(|| self.hi.total_cmp(&other.hi))
            .then_with(|| self.lo.total_cmp(&other.lo))
    }
}
