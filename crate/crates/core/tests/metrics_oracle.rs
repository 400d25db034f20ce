use headscope::exec::Execution;
use headscope::metrics::{analyze, FilterPolicy};
use headscope::model::{forward_attention, synthetic};
use headscope_testkit::oracle::{mismatches, naive};
use headscope_testkit::{corpus_attention, fixture_corpus, RowStyle};

const TOL: f64 = 1e-9;

fn policies() -> Vec<FilterPolicy> {
    let d = FilterPolicy::default();
    vec![
        d,
        FilterPolicy {
            exclude_null_target: false,
            ..d
        },
        FilterPolicy {
            entropy_renormalize: false,
            entropy_null_threshold: 0.5,
            ..d
        },
        FilterPolicy {
            variability_prefix_n: 4,
            ..d
        },
    ]
}

#[test]
fn random_attention_matches_brute_force() {
    let corpus = fixture_corpus(20);
    let attention = corpus_attention(11, &corpus, 3, 4, RowStyle::Mixed);
    for policy in policies() {
        let want = naive(&corpus, &attention, 3, 4, policy);
        for exec in [Execution::Sequential, Execution::Parallel] {
            let report = analyze(exec, &corpus, &attention, 3, 4, policy, "m").unwrap();
            let bad = mismatches(&report, &want, TOL);
            assert!(bad.is_empty(), "{policy:?} {exec:?}\n{}", bad.join("\n"));
        }
    }
}

#[test]
fn model_attention_matches_brute_force() {
    let corpus = fixture_corpus(20);
    let bundle = synthetic::seeded_bundle(synthetic::tiny_config(), 5);
    let attention: Vec<_> = corpus.iter().map(|s| forward_attention(&bundle, &s.pieces.ids).unwrap()).collect();
    let policy = FilterPolicy::default();
    let report = analyze(Execution::Parallel, &corpus, &attention, 2, 4, policy, "m").unwrap();
    let bad = mismatches(&report, &naive(&corpus, &attention, 2, 4, policy), TOL);
    assert!(bad.is_empty(), "{}", bad.join("\n"));
}

#[test]
fn sequential_and_parallel_reports_are_identical() {
    let corpus = fixture_corpus(40);
    let attention = corpus_attention(3, &corpus, 2, 3, RowStyle::Mixed);
    let p = FilterPolicy::default();
    let a = analyze(Execution::Sequential, &corpus, &attention, 2, 3, p, "m").unwrap();
    let b = analyze(Execution::Parallel, &corpus, &attention, 2, 3, p, "m").unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn absent_tags_are_zero_and_flagged() {
    let corpus = fixture_corpus(20);
    let attention = corpus_attention(1, &corpus, 1, 2, RowStyle::Mixed);
    let r = analyze(Execution::Sequential, &corpus, &attention, 1, 2, FilterPolicy::default(), "m").unwrap();
    let intj = &r.pos_to["INTJ"];
    assert!(intj.metadata.contains_key("absent"));
    assert!(intj.cells().all(|(_, v)| v == 0.0));
    for l in 0..1 {
        for h in 0..2 {
            let total: f64 = r.pos_to.values().map(|g| g.get(l, h).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn comparison_catches_a_perturbed_cell() {
    let corpus = fixture_corpus(20);
    let attention = corpus_attention(11, &corpus, 2, 2, RowStyle::Mixed);
    let p = FilterPolicy::default();
    let want = naive(&corpus, &attention, 2, 2, p);
    let mut report = analyze(Execution::Sequential, &corpus, &attention, 2, 2, p, "m").unwrap();
    let v = report.entropy.values[1][0].unwrap();
    report.entropy.values[1][0] = Some(v * (1.0 + 1e-8));
    let bad = mismatches(&report, &want, TOL);
    assert_eq!(bad.len(), 1, "{bad:?}");
    assert!(bad[0].starts_with("entropy[1][0]"));
}
