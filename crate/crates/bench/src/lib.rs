//! Workloads shared by the decoder benchmarks.

use lazyk_core::corpus::Document;
use lazyk_core::synthetic::{gen_synthetic, SyntheticSpec};
use lazyk_core::{Constraint, Dataset, ProbTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A synthetic receipt corpus with its constraint set.
pub struct Workload {
    pub docs: Vec<Document>,
    pub constraint: Constraint,
}

impl Workload {
    pub fn receipts(dataset: Dataset, docs: usize, tokens_per_doc: usize, noise: f64) -> Self {
        let spec = SyntheticSpec { docs, tokens_per_doc, noise, dataset, seed: 17 };
        let docs = gen_synthetic(&spec)
            .expect("valid synthetic spec")
            .into_iter()
            .map(|r| Document::new(r).expect("generated records are valid"))
            .collect();
        Self { docs, constraint: Constraint::dataset(dataset) }
    }
}

/// An `n x l` table with pseudo-random, normalized rows.
pub fn random_table(n: usize, l: usize, seed: u64) -> ProbTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..l).map(|_| rng.gen_range(0.01..1.0)).collect();
            let z: f64 = raw.iter().sum();
            raw.iter().map(|x| (x / z).ln()).collect()
        })
        .collect();
    ProbTable::new(&rows).expect("finite rows")
}
