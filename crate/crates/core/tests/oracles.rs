use std::collections::BTreeSet;

use lazyk_core::baselines::{beam_decode, beam_topk, best_first_decode, brute_force_topk, viterbi_bio};
use lazyk_core::constraints::bio_valid;
use lazyk_core::lazyk::lazy_k_decode;
use lazyk_core::{Constraint, DecodeError, DecodeParams, DocContext, LazyK, Locale, ProbTable, Rank, Token};
use proptest::prelude::*;

/// Probabilities per position; `0.0` marks an impossible label.
fn prob_rows(max_n: usize, max_l: usize, quantized: bool) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_n, 2..=max_l).prop_flat_map(move |(n, l)| {
        let cell = if quantized {
            prop_oneof![1 => Just(0.0), 6 => (1..=5u32).prop_map(|q| q as f64 / 10.0)].boxed()
        } else {
            (0.001f64..1.0).boxed()
        };
        prop::collection::vec(prop::collection::vec(cell, l), n)
            .prop_filter("a possible label per row", |rows| rows.iter().all(|r| r.iter().any(|&p| p > 0.0)))
    })
}

/// Every sequence of label indices with its plain float cost, sorted by cost.
fn oracle(rows: &[Vec<f64>]) -> Vec<(Vec<usize>, f64)> {
    let l = rows[0].len();
    let mut all = vec![(Vec::new(), 0.0)];
    for row in rows {
        let mut next = Vec::with_capacity(all.len() * l);
        for (seq, cost) in &all {
            for (j, &p) in row.iter().enumerate() {
                let mut s: Vec<usize> = seq.clone();
                s.push(j);
                next.push((s, cost - p.ln()));
            }
        }
        all = next;
    }
    all.sort_by(|a, b| a.1.total_cmp(&b.1));
    all
}

fn tie(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

/// Lazy-k's full enumeration agrees with the oracle up to reordering within
/// float-level ties. Also asserts the frontier and heap bounds.
fn check_enumeration(rows: &[Vec<f64>]) -> Result<(), TestCaseError> {
    let table = ProbTable::from_probs(rows).unwrap();
    let mut search = LazyK::new(&table);
    let mut got: Vec<(Vec<usize>, f64)> = Vec::new();
    while let Some(s) = search.next() {
        prop_assert!(search.heap_len() <= search.examined());
        prop_assert!(search.frontier_len() <= 2 * search.examined());
        got.push((table.label_indices(&s.ranks), s.cost.value()));
    }
    let want = oracle(rows);
    prop_assert_eq!(got.len(), want.len());
    let mut start = 0;
    while start < want.len() {
        let mut end = start + 1;
        while end < want.len() && tie(want[end - 1].1, want[end].1) {
            end += 1;
        }
        let a: BTreeSet<&Vec<usize>> = want[start..end].iter().map(|x| &x.0).collect();
        let b: BTreeSet<&Vec<usize>> = got[start..end].iter().map(|x| &x.0).collect();
        prop_assert_eq!(a, b, "tie group at {}", start);
        for i in start..end {
            prop_assert!(tie(got[i].1, want[i].1) || (got[i].1.is_infinite() && want[i].1.is_infinite()));
        }
        start = end;
    }
    Ok(())
}

fn tokens(n: usize) -> Vec<Token> {
    (0..n).map(|i| Token::new(i.to_string())).collect()
}

fn names(l: usize) -> Vec<String> {
    (0..l).map(|i| format!("L{i}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn enumeration_matches_oracle(rows in prob_rows(5, 4, false)) {
        check_enumeration(&rows)?;
    }

    #[test]
    fn enumeration_matches_oracle_with_ties(rows in prob_rows(5, 4, true)) {
        check_enumeration(&rows)?;
    }

    #[test]
    fn beam_brute_force_and_lazyk_agree(rows in prob_rows(5, 4, true), k in 1usize..40) {
        let table = ProbTable::from_probs(&rows).unwrap();
        let brute: Vec<Vec<Rank>> = brute_force_topk(&table, k).unwrap().into_iter().map(|s| s.ranks).collect();
        let beam: Vec<Vec<Rank>> = beam_topk(&table, k).unwrap().into_iter().map(|s| s.ranks).collect();
        let lazy: Vec<Vec<Rank>> = LazyK::new(&table).take(k).map(|s| s.ranks.to_vec()).collect();
        prop_assert_eq!(&brute, &beam);
        prop_assert_eq!(&brute, &lazy);
    }

    #[test]
    fn search_decoders_return_the_same_sequence(rows in prob_rows(5, 4, true), k in 1usize..60, salt in 0usize..7) {
        let table = ProbTable::from_probs(&rows).unwrap();
        let toks = tokens(rows.len());
        let ctx = DocContext::new(&toks, Locale::default());
        let vocab = names(rows[0].len());
        // Accepts roughly one sequence in seven.
        let c = Constraint::from_fn("hash", move |_, labels| {
            labels.iter().map(|s| s.len() * 31 + s.as_bytes()[1] as usize).sum::<usize>() % 7 == salt
        });
        let p = DecodeParams::new(k);
        let a = lazy_k_decode(&table, &vocab, &ctx, &c, p).unwrap();
        let b = best_first_decode(&table, &vocab, &ctx, &c, p).unwrap();
        let d = beam_decode(&table, &vocab, &ctx, &c, p).unwrap();
        prop_assert_eq!(&a.sequence, &b.sequence);
        prop_assert_eq!(&a.sequence, &d.sequence);
        prop_assert_eq!((a.status, a.examined), (b.status, b.examined));
        prop_assert_eq!((a.status, a.examined), (d.status, d.examined));
    }

    #[test]
    fn viterbi_is_first_bio_valid_sequence(rows in prob_rows(6, 5, true)) {
        let table = ProbTable::from_probs(&rows).unwrap();
        let all = ["O", "B-a", "I-a", "B-b", "I-b"];
        let vocab: Vec<String> = all[..rows[0].len()].iter().map(|s| s.to_string()).collect();
        let first_valid = LazyK::new(&table).find(|s| {
            let labels: Vec<&str> = s.ranks.iter().enumerate().map(|(i, &r)| vocab[table.label_at(i, r)].as_str()).collect();
            bio_valid(&labels).unwrap()
        });
        match (viterbi_bio(&table, &vocab), first_valid) {
            (Ok(v), Some(s)) => {
                prop_assert!(s.cost.is_finite());
                prop_assert_eq!(v.ranks, s.ranks.to_vec());
            }
            (Err(DecodeError::NoValidSequence), s) => prop_assert!(s.map_or(true, |s| !s.cost.is_finite())),
            (other, s) => prop_assert!(false, "viterbi {:?} vs lazy-k {:?}", other, s),
        }
    }

    #[test]
    fn budget_monotonicity(rows in prob_rows(5, 4, false), k in 1usize..30, salt in 0usize..5) {
        let table = ProbTable::from_probs(&rows).unwrap();
        let toks = tokens(rows.len());
        let ctx = DocContext::new(&toks, Locale::default());
        let vocab = names(rows[0].len());
        let c = Constraint::from_fn("hash", move |_, labels| labels.concat().len() % 5 == salt);
        let small = lazy_k_decode(&table, &vocab, &ctx, &c, DecodeParams::new(k)).unwrap();
        let large = lazy_k_decode(&table, &vocab, &ctx, &c, DecodeParams::new(k + 10)).unwrap();
        if small.is_satisfied() {
            prop_assert_eq!(small.sequence, large.sequence);
        }
    }
}

#[test]
fn larger_tables_keep_the_bounds() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let n = rng.gen_range(20..60);
        let l = rng.gen_range(3..12);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..l).map(|_| rng.gen_range(0.01..1.0)).collect()).collect();
        let table = ProbTable::from_probs(&rows).unwrap();
        let mut search = LazyK::new(&table);
        let mut prev = None;
        for s in search.by_ref().take(2000) {
            if let Some(p) = prev.replace(s.cost.clone()) {
                assert!(p <= s.cost);
            }
        }
        assert!(search.heap_len() <= search.examined());
        assert!(search.frontier_len() <= 2 * search.examined());
    }
}
