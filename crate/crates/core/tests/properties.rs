use headscope::corpus::{align, AlignedSentence, Formulation, Sentence, Word};
use headscope::exec::Execution;
use headscope::metrics::{analyze, Accumulator, FilterPolicy, Prefix, Report, VariabilityAccumulator};
use headscope::model::{forward_attention, synthetic};
use headscope_testkit::{corpus_attention, fixture_corpus, gpt2_vocab, random_attention, rel_close, RowStyle};
use proptest::prelude::*;

/// Words that the GPT-2 vocabulary keeps as one piece, with or without a
/// leading space.
const SHORT_WORDS: [&str; 12] = ["the", "dog", "cat", "runs", "and", "big", "red", "sat", "on", "mat", "it", "was"];

/// Random tree over `n` words: `order` decides attachment, each word after
/// the first attaches to some earlier word in that order.
fn random_sentence(words: Vec<usize>, order_seed: Vec<usize>) -> Sentence {
    let n = words.len();
    let mut order: Vec<usize> = (0..n).collect();
    for (k, s) in order_seed.iter().enumerate().take(n) {
        order.swap(k, k + s % (n - k));
    }
    let mut head = vec![0usize; n];
    for k in 1..n {
        let parent = order[order_seed[k % order_seed.len()] % k];
        head[order[k]] = parent + 1;
    }
    let forms: Vec<&str> = words.iter().map(|&w| SHORT_WORDS[w]).collect();
    Sentence {
        id: "p".into(),
        text: forms.join(" "),
        words: forms
            .iter()
            .zip(&head)
            .map(|(f, &h)| Word {
                form: f.to_string(),
                upos: "X".into(),
                head: h,
                deprel: if h == 0 { "root".into() } else { "dep".into() },
            })
            .collect(),
        multiword: vec![],
    }
}

fn tree_strategy() -> impl Strategy<Value = Sentence> {
    (2usize..14).prop_flat_map(|n| {
        (
            prop::collection::vec(0..SHORT_WORDS.len(), n),
            prop::collection::vec(0usize..1000, n),
        )
            .prop_map(|(w, o)| random_sentence(w, o))
    })
}

fn report_for(corpus: &[AlignedSentence], seed: u64, policy: FilterPolicy, style: RowStyle) -> Report {
    let att = corpus_attention(seed, corpus, 2, 3, style);
    analyze(Execution::Sequential, corpus, &att, 2, 3, policy, "m").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tokenizer_round_trip(s in any::<String>()) {
        let v = gpt2_vocab();
        let seq = v.encode(&s);
        prop_assert_eq!(v.decode(&seq.ids).unwrap(), s.clone());
        prop_assert_eq!(seq.ids.len(), seq.pieces.len());
        prop_assert_eq!(seq.ids.len(), seq.spans.len());
        let mut at = 0;
        for sp in &seq.spans {
            prop_assert_eq!(sp.start, at);
            prop_assert!(sp.end > sp.start);
            at = sp.end;
        }
        prop_assert_eq!(at, s.len());
        prop_assert_eq!(v.encode(&s), seq);
    }

    #[test]
    fn tree_validation_accepts_generated_trees(s in tree_strategy()) {
        prop_assert!(s.validate().is_ok());
    }

    #[test]
    fn single_piece_words_keep_word_level_counts(s in tree_strategy()) {
        let n_words = s.words.len();
        let a = align(s, gpt2_vocab()).unwrap();
        prop_assert_eq!(a.len(), n_words);
        prop_assert_eq!(a.piece_to_word.clone(), (0..n_words).collect::<Vec<_>>());
        let mut either = 0;
        for i in 0..a.len() {
            for j in 0..i {
                let ing = a.dep(Formulation::AttendingParent, i, j);
                let ed = a.dep(Formulation::AttendedParent, i, j);
                prop_assert!(!(ing && ed));
                prop_assert_eq!(a.dep(Formulation::Either, i, j), ing || ed);
                either += usize::from(a.dep(Formulation::Either, i, j));
            }
        }
        // A tree over n words has n - 1 arcs.
        prop_assert_eq!(either, n_words - 1);
    }

    #[test]
    fn causality_and_prefix_consistency(ids in prop::collection::vec(0u32..50257, 2..24), k in 1usize..24, swap in 0u32..50257) {
        let bundle = synthetic::seeded_bundle(synthetic::tiny_config(), 9);
        let n = ids.len();
        let k = k.min(n);
        let full = forward_attention(&bundle, &ids).unwrap();
        let prefix = forward_attention(&bundle, &ids[..k]).unwrap();
        let mut changed = ids.clone();
        let t = k.min(n - 1);
        changed[t] = swap;
        let other = forward_attention(&bundle, &changed).unwrap();
        for l in 0..2 {
            for h in 0..4 {
                for i in 0..k {
                    for (a, b) in full.row(l, h, i).iter().zip(prefix.row(l, h, i)) {
                        prop_assert!((a - b).abs() <= 1e-5);
                    }
                }
                for i in 0..t {
                    prop_assert_eq!(full.row(l, h, i), other.row(l, h, i));
                }
            }
        }
        full.check(1e-5).unwrap();
        prop_assert!(full.as_dense().iter().all(|w| w.is_finite()));
    }

    #[test]
    fn merge_matches_single_pass(split in 1usize..29, seed in 0u64..1000) {
        let corpus = fixture_corpus(30);
        let att = corpus_attention(seed, &corpus, 2, 3, RowStyle::Mixed);
        let p = FilterPolicy::default();
        let fill = |range: std::ops::Range<usize>| {
            let mut acc = Accumulator::new(2, 3, p);
            for k in range {
                acc.add(&corpus[k], &att[k]).unwrap();
            }
            acc
        };
        let whole = fill(0..30);
        let left = fill(0..split);
        let right = fill(split..30);
        for merged in [left.clone().merged(&right), right.merged(&left)] {
            for (a, b) in merged.mass.iter().zip(&whole.mass) {
                prop_assert!(rel_close(*a, *b, 1e-12));
            }
            let means = merged.variability_means().unwrap();
            let mut v1 = VariabilityAccumulator::new(6);
            let mut v2 = VariabilityAccumulator::new(6);
            for (k, a) in att.iter().enumerate() {
                let pre = Prefix::of(a, p.variability_prefix_n);
                if k < split { v1.add(&means, &pre) } else { v2.add(&means, &pre) }
            }
            v1.merge(&v2);
            let got = Report::build(&merged, &v1, "m").unwrap();
            let want = analyze(Execution::Sequential, &corpus, &att, 2, 3, p, "m").unwrap();
            for (name, g) in want.grids() {
                let h = got.grids()[name];
                for ((l, hd), w) in g.cells() {
                    prop_assert!(rel_close(h.get(l, hd).unwrap(), w, 1e-9), "{} {} {}", name, l, hd);
                }
            }
        }
    }

    #[test]
    fn either_decomposes_and_ranges_hold(seed in 0u64..1000) {
        let corpus = fixture_corpus(25);
        let r = report_for(&corpus, seed, FilterPolicy::default(), RowStyle::Mixed);
        let max_len = corpus.iter().map(|s| s.len()).max().unwrap() as f64;
        let da = &r.dependency_alignment;
        for ((l, h), e) in da["either"].cells() {
            let sum = da["attending_parent"].get(l, h).unwrap() + da["attended_parent"].get(l, h).unwrap();
            prop_assert!(rel_close(e, sum, 1e-12), "{} vs {}", e, sum);
        }
        let proportions = [&r.null_attention, &r.variability].into_iter()
            .chain(da.values()).chain(r.pos_to.values()).chain(r.pos_from.values());
        for g in proportions {
            for (_, v) in g.cells() {
                prop_assert!((0.0..=1.0).contains(&v), "{} = {}", g.metric, v);
            }
        }
        for (_, v) in r.entropy.cells() {
            prop_assert!(v >= 0.0 && v <= max_len.ln() + 1e-12);
        }
        for (_, v) in r.mean_distance.cells() {
            prop_assert!(v >= 0.0 && v <= max_len - 1.0);
        }
    }

    #[test]
    fn null_filter_is_inert_without_null_mass(seed in 0u64..1000) {
        let corpus = fixture_corpus(25);
        let on = FilterPolicy::default();
        let off = FilterPolicy { exclude_null_target: false, ..on };
        let a = report_for(&corpus, seed, on, RowStyle::NoNull);
        let b = report_for(&corpus, seed, off, RowStyle::NoNull);
        for (name, g) in a.grids() {
            prop_assert_eq!(&g.values, &b.grids()[name].values, "{}", name);
        }
    }
}

#[test]
fn random_attention_rows_are_normalised() {
    random_attention(4, 2, 2, 12, RowStyle::Mixed).check(1e-5).unwrap();
}
