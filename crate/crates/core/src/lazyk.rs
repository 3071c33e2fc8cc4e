//! Lazy-k decoding: best-first enumeration of label sequences with partial
//! expansion.
//!
//! Sequences are visited in increasing cost order. Every sequence after the
//! first is a single-rank increment of one visited earlier, so the search
//! only has to track, for each visited state, which of its single-edit
//! children it has handed out so far. The heap keeps one entry per state,
//! keyed by the cost of that state's next unexplored child.
//!
//! Ordering is total and deterministic: by exact cost, then by the rank
//! vector in lexicographic order. Within a state's children this means equal
//! cost increments are taken from the highest position first.

use std::cmp::Ordering;
use std::hash::BuildHasher;
use std::rc::Rc;
use std::time::Instant;

use hashbrown::HashTable;
use rustc_hash::FxBuildHasher;
use smallvec::SmallVec;

use crate::constraints::{Constraint, DocContext};
use crate::cost::SeqCost;
use crate::decode::{check_dims, DecodeOutcome, DecodeParams, DecodeStatus, MassBudget, TimedCheck};
use crate::error::DecodeError;
use crate::table::{LabelSeq, ProbTable, Rank};

pub type StateId = usize;

/// Positions of a state sorted by the cost of incrementing their rank.
///
/// Positions already at the last rank are left out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditList {
    positions: Box<[u32]>,
}

impl EditList {
    pub fn new(table: &ProbTable, ranks: &[Rank]) -> Self {
        let last = (table.l() - 1) as Rank;
        let mut keyed: SmallVec<[u64; 16]> = SmallVec::with_capacity(ranks.len());
        for (i, &r) in ranks.iter().enumerate() {
            if r < last {
                keyed.push((table.edit_key(i, r) as u64) << 32 | i as u64);
            }
        }
        keyed.sort_unstable();
        Self { positions: keyed.iter().map(|&k| k as u32).collect() }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, index: usize) -> Option<usize> {
        self.positions.get(index).map(|&p| p as usize)
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.positions.iter().map(|&p| p as usize)
    }
}

#[derive(Debug)]
enum Edits {
    Unexpanded,
    Ready(EditList),
    Retired,
}

#[derive(Debug)]
struct Node {
    counter: u32,
    cost: SeqCost,
    edits: Edits,
}

/// A single-edit child of a state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Child {
    pub ranks: Vec<Rank>,
    pub position: usize,
    pub cost: SeqCost,
}

/// Explored states with the index of their next untried child.
#[derive(Debug, Default)]
pub struct Frontier {
    width: usize,
    // rank vectors of all states, `width` ranks each
    ranks: Vec<Rank>,
    index: HashTable<u32>,
    nodes: Vec<Node>,
    scratch: Vec<Rank>,
}

fn hash(ranks: &[Rank]) -> u64 {
    FxBuildHasher.hash_one(ranks)
}

impl Frontier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, ranks: &[Rank]) -> bool {
        self.get(ranks).is_some()
    }

    pub fn get(&self, ranks: &[Rank]) -> Option<StateId> {
        if ranks.len() != self.width {
            return None;
        }
        self.index.find(hash(ranks), |&id| self.ranks(id as StateId) == ranks).map(|&id| id as StateId)
    }

    /// Registers a state with counter 0. Returns the existing id if present.
    ///
    /// All states must have the same length.
    pub fn insert(&mut self, ranks: &[Rank], cost: SeqCost) -> StateId {
        if self.nodes.is_empty() {
            self.width = ranks.len();
        }
        assert_eq!(ranks.len(), self.width, "state length differs from the frontier's");
        if let Some(id) = self.get(ranks) {
            return id;
        }
        let id = self.nodes.len();
        let width = self.width;
        let stored = &self.ranks;
        self.index.insert_unique(hash(ranks), id as u32, |&k| hash(&stored[k as usize * width..][..width]));
        self.ranks.extend_from_slice(ranks);
        self.nodes.push(Node { counter: 0, cost, edits: Edits::Unexpanded });
        id
    }

    pub fn ranks(&self, id: StateId) -> &[Rank] {
        &self.ranks[id * self.width..][..self.width]
    }

    pub fn cost(&self, id: StateId) -> &SeqCost {
        &self.nodes[id].cost
    }

    pub fn counter(&self, id: StateId) -> usize {
        self.nodes[id].counter as usize
    }

    pub fn advance(&mut self, id: StateId) {
        self.nodes[id].counter += 1;
    }

    /// Number of states whose edit list is currently cached.
    pub fn cached_edit_lists(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.edits, Edits::Ready(_))).count()
    }

    fn edit_list(&mut self, table: &ProbTable, id: StateId) -> Option<&EditList> {
        if let Edits::Unexpanded = self.nodes[id].edits {
            let list = EditList::new(table, &self.ranks[id * self.width..][..self.width]);
            self.nodes[id].edits = Edits::Ready(list);
        }
        match &self.nodes[id].edits {
            Edits::Ready(list) => Some(list),
            _ => None,
        }
    }

    /// The child at the state's current counter, without moving the counter.
    ///
    /// Returns `None` once every child has been handed out; the state's edit
    /// list is dropped at that point.
    pub fn next_best(&mut self, table: &ProbTable, id: StateId) -> Option<Child> {
        let position = self.next_position(table, id)?;
        let mut ranks = self.ranks(id).to_vec();
        ranks[position] += 1;
        let cost = self.child_cost(table, id, position);
        Some(Child { ranks, position, cost })
    }

    fn next_position(&mut self, table: &ProbTable, id: StateId) -> Option<usize> {
        let counter = self.counter(id);
        let position = self.edit_list(table, id).and_then(|list| list.position(counter));
        if position.is_none() {
            self.nodes[id].edits = Edits::Retired;
        }
        position
    }

    fn child_cost(&self, table: &ProbTable, id: StateId, position: usize) -> SeqCost {
        let from = self.ranks(id)[position];
        let mut cost = self.nodes[id].cost.clone();
        cost.pop_logp(table.logp_at_rank(position, from));
        cost.push_logp(table.logp_at_rank(position, from + 1));
        cost
    }

    /// [`Frontier::next_best`] for a state given by its rank vector.
    pub fn next_best_of(&mut self, table: &ProbTable, ranks: &[Rank]) -> Result<Option<Child>, DecodeError> {
        let id = self.get(ranks).ok_or(DecodeError::UnknownState)?;
        Ok(self.next_best(table, id))
    }
}

/// Heap entry: an originating state keyed by its next child's cost.
#[derive(Debug, Clone, Copy)]
pub struct HeapEntry {
    impossible: u32,
    rounded: f64,
    pub child: StateId,
    pub parent: StateId,
}

/// Min-heap of pending children in sequence order.
///
/// Entries carry the rounded cost; exact costs and rank vectors are looked
/// up in the frontier only to break ties.
#[derive(Debug, Default)]
pub struct ChildHeap {
    entries: Vec<HeapEntry>,
}

impl ChildHeap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The entry that [`ChildHeap::pop`] would return.
    pub fn peek(&self) -> Option<&HeapEntry> {
        self.entries.first()
    }

    pub fn push(&mut self, frontier: &Frontier, child: StateId, parent: StateId) {
        let cost = frontier.cost(child);
        let entry = HeapEntry { impossible: cost.impossible(), rounded: cost.value(), child, parent };
        let mut hole = self.entries.len();
        self.entries.push(entry);
        while hole > 0 {
            let up = (hole - 1) / 2;
            if !less(frontier, &entry, &self.entries[up]) {
                break;
            }
            self.entries[hole] = self.entries[up];
            hole = up;
        }
        self.entries[hole] = entry;
    }

    pub fn pop(&mut self, frontier: &Frontier) -> Option<HeapEntry> {
        let last = self.entries.pop()?;
        let Some(&top) = self.entries.first() else {
            return Some(last);
        };
        let len = self.entries.len();
        let mut hole = 0;
        loop {
            let mut down = 2 * hole + 1;
            if down >= len {
                break;
            }
            if down + 1 < len && less(frontier, &self.entries[down + 1], &self.entries[down]) {
                down += 1;
            }
            if !less(frontier, &self.entries[down], &last) {
                break;
            }
            self.entries[hole] = self.entries[down];
            hole = down;
        }
        self.entries[hole] = last;
        Some(top)
    }
}

fn less(frontier: &Frontier, a: &HeapEntry, b: &HeapEntry) -> bool {
    let quick = a.impossible.cmp(&b.impossible).then(a.rounded.total_cmp(&b.rounded));
    let order = if quick != Ordering::Equal {
        quick
    } else {
        frontier
            .cost(a.child)
            .cmp(frontier.cost(b.child))
            .then_with(|| frontier.ranks(a.child).cmp(frontier.ranks(b.child)))
    };
    order == Ordering::Less
}

/// Skips children already in the frontier; registers the first unseen one
/// and pushes `id` keyed by its cost. Pushes nothing once `id` has no
/// children left.
pub fn add_next_best(table: &ProbTable, frontier: &mut Frontier, heap: &mut ChildHeap, id: StateId) {
    let mut ranks = std::mem::take(&mut frontier.scratch);
    ranks.clear();
    ranks.extend_from_slice(frontier.ranks(id));
    while let Some(position) = frontier.next_position(table, id) {
        ranks[position] += 1;
        if frontier.contains(&ranks) {
            ranks[position] -= 1;
            frontier.advance(id);
            continue;
        }
        let cost = frontier.child_cost(table, id, position);
        let child = frontier.insert(&ranks, cost);
        heap.push(frontier, child, id);
        break;
    }
    frontier.scratch = ranks;
}

/// A sequence produced by the enumeration.
#[derive(Debug, Clone)]
pub struct Examined {
    pub ranks: Rc<[Rank]>,
    pub cost: SeqCost,
}

impl Examined {
    pub fn to_label_seq(&self) -> LabelSeq {
        LabelSeq { ranks: self.ranks.to_vec(), cost: self.cost.clone() }
    }
}

#[derive(Debug)]
enum Pending {
    Start,
    Expand { explored: StateId, origin: Option<StateId> },
}

/// Lazy enumeration of all sequences of a table in increasing cost order.
///
/// Expansion of the last yielded state is deferred to the next call, so a
/// caller that stops at a satisfying sequence does no extra work.
#[derive(Debug)]
pub struct LazyK<'t> {
    table: &'t ProbTable,
    frontier: Frontier,
    heap: ChildHeap,
    pending: Pending,
    examined: usize,
}

impl<'t> LazyK<'t> {
    pub fn new(table: &'t ProbTable) -> Self {
        Self { table, frontier: Frontier::new(), heap: ChildHeap::new(), pending: Pending::Start, examined: 0 }
    }

    /// Sequences yielded so far.
    pub fn examined(&self) -> usize {
        self.examined
    }

    pub fn heap_len(&self) -> usize {
        self.heap.len()
    }

    pub fn frontier_len(&self) -> usize {
        self.frontier.len()
    }

    pub fn frontier(&self) -> &Frontier {
        &self.frontier
    }
}

impl Iterator for LazyK<'_> {
    type Item = Examined;

    fn next(&mut self) -> Option<Examined> {
        match self.pending {
            Pending::Start => {
                let first = LabelSeq::argmax(self.table);
                let id = self.frontier.insert(&first.ranks, first.cost.clone());
                let ranks: Rc<[Rank]> = first.ranks.into();
                self.pending = Pending::Expand { explored: id, origin: None };
                self.examined = 1;
                return Some(Examined { ranks, cost: first.cost });
            }
            Pending::Expand { explored, origin } => {
                add_next_best(self.table, &mut self.frontier, &mut self.heap, explored);
                if let Some(origin) = origin {
                    add_next_best(self.table, &mut self.frontier, &mut self.heap, origin);
                }
            }
        }
        let entry = self.heap.pop(&self.frontier)?;
        // The origin's counter still points at this child.
        let id = entry.child;
        debug_assert_eq!(self.frontier.counter(id), 0);
        self.pending = Pending::Expand { explored: id, origin: Some(entry.parent) };
        self.examined += 1;
        Some(Examined { ranks: self.frontier.ranks(id).into(), cost: self.frontier.cost(id).clone() })
    }
}

/// Returns the most probable sequence satisfying `constraint`, examining at
/// most `params.max_k` sequences.
pub fn lazy_k_decode(
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
    let mut search = LazyK::new(table);
    let mut status = DecodeStatus::SearchExhausted;
    let mut sequence = None;
    while let Some(seq) = search.next() {
        if check.check(table, &seq.ranks) {
            status = DecodeStatus::Satisfied;
            sequence = Some(seq.to_label_seq());
            break;
        }
        if search.examined() >= params.max_k || budget.spend(seq.cost.probability()) {
            status = DecodeStatus::ExhaustedBudget;
            break;
        }
    }
    Ok(DecodeOutcome {
        status,
        sequence,
        examined: search.examined(),
        elapsed: start.elapsed(),
        constraint_time: check.spent,
    })
}
