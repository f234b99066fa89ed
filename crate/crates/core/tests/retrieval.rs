mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use promise_core::index::{build_index, embed_goal, parse_goal, TraceIndex, TraceRecord};
use promise_core::prover::{Prover, ToyProver};
use promise_core::retrieval::{
    abstract_steps, rerank, rerank_score, retrieve_shortlist, select_templates, sort_scored, Query, RetrievalError,
    ScoredCandidate, StructWeights,
};

use common::toy_prover;

const DIM: usize = 1024;

fn corpus() -> (ToyProver, TraceIndex) {
    let p = toy_prover();
    let index = build_index(&p, &BTreeSet::new(), DIM).index;
    (p, index)
}

// Reference scorer written from the formula, sharing nothing with the library
// beyond the stored embeddings.
fn reference_struct(query_text: &str, record: &TraceRecord) -> f64 {
    let q = embed_goal(&parse_goal(query_text), DIM).unwrap();
    let dot: f64 = q.iter().zip(&record.embedding).map(|(a, b)| a * b).sum();
    let nq: f64 = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nr: f64 = record.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d = ((1.0 - dot / (nq * nr)) / 2.0).clamp(0.0, 1.0);
    let qc = parse_goal(query_text).constants;
    let m = qc.intersection(&record.constants).count().min(10);
    let count = |text: &str| {
        let mut bag: BTreeMap<String, usize> = BTreeMap::new();
        for (t, n) in parse_goal(text).tokens {
            *bag.entry(t).or_default() += n;
        }
        bag
    };
    let (a, b) = (count(query_text), count(&record.goal_text));
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let (mut lo, mut hi) = (0, 0);
    for k in keys {
        let (x, y) = (a.get(k).copied().unwrap_or(0), b.get(k).copied().unwrap_or(0));
        lo += x.min(y);
        hi += x.max(y);
    }
    let l = if hi == 0 { 0.0 } else { lo as f64 / hi as f64 };
    (1.0 - d) + 0.05 * m as f64 + 0.10 * l
}

#[test]
fn worked_rerank_example_flips_the_order() {
    let first = rerank_score(0.43, 0.15, 0.18);
    let second = rerank_score(0.34, 0.82, 0.09);
    assert!((first - 0.31).abs() <= 0.005);
    assert!((second - 0.48).abs() <= 0.005);
    assert!(second > first);
    // Structural order alone would put the first ahead.
    let by_struct = [0.43, 0.34];
    assert!(by_struct[0] > by_struct[1]);
}

#[test]
fn planted_near_duplicate_ranks_first() {
    let (_, index) = corpus();
    let goal = "valid(inv, seq(skip, seq(skip, store(a))), inv)";
    let mut records = index.records().to_vec();
    records.push(TraceRecord {
        theorem_id: "planted".into(),
        step_index: 0,
        goal_text: "valid(inv, seq(skip, seq(skip, store(c))), inv)".into(),
        assumptions: vec![],
        suffix: vec!["apply (rule valid_seq_same)".into(), "done".into()],
        constants: parse_goal("valid(inv, seq(skip, seq(skip, store(c))), inv)").constants,
        embedding: embed_goal(&parse_goal("valid(inv, seq(skip, seq(skip, store(c))), inv)"), DIM).unwrap(),
    });
    let planted = TraceIndex::from_records(records, DIM).unwrap();
    let query = Query::new(goal, DIM);
    let short = retrieve_shortlist(&planted, &query, "target", 100, &StructWeights::default()).unwrap();
    assert_eq!(short[0].record.theorem_id, "planted");

    let mut expected: Vec<(f64, &str, usize)> = planted
        .records()
        .iter()
        .map(|r| (reference_struct(goal, r), r.theorem_id.as_str(), r.step_index))
        .collect();
    expected.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)).then(a.2.cmp(&b.2)));
    assert_eq!(short.len(), expected.len());
    for (got, want) in short.iter().zip(&expected) {
        assert!((got.s_struct - want.0).abs() < 1e-9, "{} vs {}", got.s_struct, want.0);
    }
    let got_top: Vec<_> = short.iter().take(5).map(|s| (s.record.theorem_id.as_str(), s.record.step_index)).collect();
    let want_top: Vec<_> = expected.iter().take(5).map(|e| (e.1, e.2)).collect();
    assert_eq!(got_top, want_top);
}

#[test]
fn small_and_target_only_indexes() {
    let (_, index) = corpus();
    let five = TraceIndex::from_records(index.records()[..5].to_vec(), DIM).unwrap();
    let q = Query::new("a + 0 = a", DIM);
    let short = retrieve_shortlist(&five, &q, "nothing", 30, &StructWeights::default()).unwrap();
    assert_eq!(short.len(), 5);
    assert!(short.windows(2).all(|w| w[0].s_struct >= w[1].s_struct));

    let only = TraceIndex::from_records(index.records_of("conj_le").to_vec(), DIM).unwrap();
    let err = retrieve_shortlist(&only, &q, "conj_le", 30, &StructWeights::default()).unwrap_err();
    assert_eq!(err, RetrievalError::EmptyIndex);
}

#[test]
fn template_counts_and_abstraction() {
    let (p, index) = corpus();
    let q = Query::new("le(b, b) ∧ le(0, b)", DIM);
    let short = retrieve_shortlist(&index, &q, "conj_le", 30, &StructWeights::default()).unwrap();
    let reranked = rerank(&short, &index, &q, "le(a, a) ∧ le(0, a)");
    assert_eq!(select_templates(&reranked, 8, None, &p).len(), 8);
    assert_eq!(select_templates(&reranked[..3], 8, None, &p).len(), 3);
    let capped = select_templates(&reranked, 8, Some(2), &p);
    let mut per: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &capped {
        *per.entry(t.source_theorem.as_str()).or_default() += 1;
    }
    assert!(per.values().all(|&n| n <= 2));

    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    assert_eq!(
        abstract_steps(&s(&["apply (simp add: add_zero)", "done"]), &p),
        s(&["apply (simp add: <Def/Simp names>)", "done"])
    );
    assert_eq!(abstract_steps(&s(&["apply (rule conj_intro)"]), &p), s(&["apply (rule <Rule lemma>)"]));
    assert_eq!(abstract_steps(&s(&["apply simp"]), &p), s(&["apply simp"]));
    assert_eq!(abstract_steps(&s(&["apply (unfold plus_def)"]), &p), s(&["apply (unfold <Def/Simp names>)"]));
    assert_eq!(abstract_steps(&s(&["apply (rule valid_skip)"]), &p), s(&["apply (rule <WP/refinement lemma>)"]));
}

fn scored_fixture<'a>(index: &'a TraceIndex, goal: &str, target: &str) -> Vec<ScoredCandidate<'a>> {
    let q = Query::new(goal, DIM);
    let short = retrieve_shortlist(index, &q, target, 30, &StructWeights::default()).unwrap();
    rerank(&short, index, &q, goal)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rerank_order_ignores_shortlist_order(
        perm in Just((0..30).collect::<Vec<usize>>()).prop_shuffle(),
        pick in 0usize..57,
    ) {
        let (_, index) = corpus();
        let record = &index.records()[pick];
        let q = Query::new(&record.goal_text, DIM);
        let short = retrieve_shortlist(&index, &q, &record.theorem_id, 30, &StructWeights::default()).unwrap();
        let base = rerank(&short, &index, &q, &record.goal_text);
        let shuffled: Vec<_> = perm.iter().filter(|&&i| i < short.len()).map(|&i| short[i]).collect();
        let again = rerank(&shuffled, &index, &q, &record.goal_text);
        let ids = |v: &[ScoredCandidate<'_>]| v.iter().map(|c| (c.record.theorem_id.clone(), c.record.step_index)).collect::<Vec<_>>();
        prop_assert_eq!(ids(&base), ids(&again));
        for c in &base {
            prop_assert!((c.recompute() - c.s_rerank).abs() <= 1e-12);
            prop_assert!(c.record.theorem_id != record.theorem_id);
        }
    }

    #[test]
    fn raising_goal_similarity_never_lowers_rank(pick in 0usize..57, which in 0usize..30, bump in 0.0f64..1.0) {
        let (_, index) = corpus();
        let record = &index.records()[pick];
        let mut cands = scored_fixture(&index, &record.goal_text, &record.theorem_id);
        let which = which % cands.len();
        let key = (cands[which].record.theorem_id.clone(), cands[which].record.step_index);
        let rank = |v: &[ScoredCandidate<'_>]| v.iter().position(|c| (c.record.theorem_id.clone(), c.record.step_index) == key).unwrap();
        let before = rank(&cands);
        let c = &mut cands[which];
        c.s_goal = (c.s_goal + bump).min(1.0);
        c.s_rerank = c.recompute();
        sort_scored(&mut cands);
        prop_assert!(rank(&cands) <= before);
    }

    #[test]
    fn target_never_retrieved(keep in proptest::collection::vec(any::<bool>(), 20), target_pick in 0usize..20, pick in 0usize..57) {
        let p = toy_prover();
        let ids = p.theorem_ids();
        let target = &ids[target_pick];
        let excluded: BTreeSet<String> = ids.iter().zip(&keep).filter(|(t, k)| !**k && *t != target).map(|(t, _)| t.clone()).collect();
        let index = build_index(&p, &excluded, DIM).index;
        prop_assert!(!index.records_of(target).is_empty());
        let full = build_index(&p, &BTreeSet::new(), DIM).index;
        let goal = &full.records()[pick].goal_text;
        let q = Query::new(goal, DIM);
        match retrieve_shortlist(&index, &q, target, 30, &StructWeights::default()) {
            Ok(short) => {
                prop_assert!(short.iter().all(|s| &s.record.theorem_id != target));
                let reranked = rerank(&short, &index, &q, goal);
                for t in select_templates(&reranked, 8, Some(2), &p) {
                    prop_assert!(&t.source_theorem != target);
                    prop_assert!(t.steps.iter().all(|s| !s.contains(target.as_str())));
                }
            }
            Err(e) => prop_assert_eq!(e, RetrievalError::EmptyIndex),
        }
    }
}
