use headscope::corpus::AlignedSentence;
use headscope::exec::Execution;
use headscope::exemplars::{rank_exemplars, RankMode};
use headscope::metrics::{analyze, FilterPolicy};
use headscope::model::{forward_attention, synthetic, WeightBundle};
use headscope::pipeline::{extract, prepare_corpus, run, AttentionStore, ExemplarRequest, Source};
use headscope::Error;
use headscope_testkit::{fixture_corpus, gpt2_vocab};

fn bundle() -> WeightBundle {
    synthetic::seeded_bundle(synthetic::tiny_config(), 5)
}

fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn one_sentence_store_reloads_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("att.safetensors");
    let corpus = fixture_corpus(1);
    let b = bundle();
    extract(Execution::Parallel, &b, &corpus, &path, "h").unwrap();
    let mut store = AttentionStore::open(&path).unwrap();
    assert_eq!(store.len(), 1);
    assert_eq!(store.ids().collect::<Vec<_>>(), vec![corpus[0].id()]);
    let want = forward_attention(&b, &corpus[0].pieces.ids).unwrap();
    let got = store.read(0).unwrap();
    assert_eq!(bits(got.as_dense()), bits(want.as_dense()));
}

#[test]
fn rerun_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture_corpus(20);
    let b = bundle();
    let (p1, p2) = (dir.path().join("a"), dir.path().join("b"));
    extract(Execution::Parallel, &b, &corpus, &p1, "h").unwrap();
    extract(Execution::Sequential, &b, &corpus, &p2, "h").unwrap();
    assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
}

#[test]
fn streaming_report_equals_in_memory_analysis() {
    let corpus = fixture_corpus(70);
    let b = bundle();
    let policy = FilterPolicy::default();
    let attention: Vec<_> = corpus.iter().map(|s| forward_attention(&b, &s.pieces.ids).unwrap()).collect();
    let want = analyze(Execution::Sequential, &corpus, &attention, 2, 4, policy, "h")
        .unwrap()
        .to_json();

    let live = run(Execution::Parallel, &corpus, Source::Model(&b), policy, "h", true, None).unwrap();
    assert_eq!(live.report.unwrap().to_json(), want);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("att");
    extract(Execution::Parallel, &b, &corpus, &path, "h").unwrap();
    let mut store = AttentionStore::open(&path).unwrap();
    let stored = run(Execution::Sequential, &corpus, Source::Store(&mut store), policy, "h", true, None).unwrap();
    assert_eq!(stored.report.unwrap().to_json(), want);
}

#[test]
fn streaming_exemplars_equal_direct_ranking() {
    let corpus = fixture_corpus(70);
    let b = bundle();
    let policy = FilterPolicy::default();
    let attention: Vec<_> = corpus.iter().map(|s| forward_attention(&b, &s.pieces.ids).unwrap()).collect();
    let req = ExemplarRequest {
        heads: vec![(0, 1), (1, 3)],
        k: 5,
        mode: RankMode::MaxEdge,
    };
    let out = run(Execution::Parallel, &corpus, Source::Model(&b), policy, "h", false, Some(&req)).unwrap();
    assert!(out.report.is_none());
    for (got, &(l, h)) in out.exemplars.iter().zip(&req.heads) {
        let want = rank_exemplars(&corpus, &attention, l, h, 5, &policy, RankMode::MaxEdge).unwrap();
        assert_eq!(*got, want);
    }
}

#[test]
fn mismatched_manifest_is_stale() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("att");
    let corpus = fixture_corpus(3);
    let b = bundle();
    extract(Execution::Parallel, &b, &corpus, &path, "old").unwrap();
    let mut store = AttentionStore::open(&path).unwrap();
    let err = run(
        Execution::Parallel,
        &corpus,
        Source::Store(&mut store),
        FilterPolicy::default(),
        "new",
        true,
        None,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Stale { .. }), "{err}");
}

#[test]
fn store_rejects_a_different_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("att");
    let corpus = fixture_corpus(4);
    let b = bundle();
    extract(Execution::Parallel, &b, &corpus, &path, "h").unwrap();
    let mut store = AttentionStore::open(&path).unwrap();
    let mut swapped: Vec<AlignedSentence> = corpus.clone();
    swapped.swap(0, 1);
    let err = run(
        Execution::Parallel,
        &swapped,
        Source::Store(&mut store),
        FilterPolicy::default(),
        "h",
        true,
        None,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Integrity(_)), "{err}");
}

#[test]
fn long_sentences_are_truncated_to_context() {
    let raw: Vec<_> = fixture_corpus(5).into_iter().map(|s| s.sentence).collect();
    let full = prepare_corpus(raw.clone(), gpt2_vocab(), 1024).unwrap();
    let cut = prepare_corpus(raw, gpt2_vocab(), 6).unwrap();
    for (f, c) in full.iter().zip(&cut) {
        assert_eq!(c.len(), f.len().min(6));
        assert_eq!(c.pieces.ids[..], f.pieces.ids[..c.len()]);
        assert_eq!(c.piece_to_word[..], f.piece_to_word[..c.len()]);
    }
}
