use headscope_testkit as common;

use headscope::corpus::{align, parse_conllu, parse_conllu_str, sample_corpus, Formulation};
use serde::Deserialize;

#[derive(Deserialize)]
struct Reference {
    sent_id: String,
    text: String,
    words: usize,
}

#[test]
fn fixture_matches_reference_reader() {
    let sentences = parse_conllu(common::repo_path("fixtures/corpus/synthetic.conllu")).unwrap();
    let raw = std::fs::read_to_string(common::repo_path("fixtures/corpus/reference_word_counts.json")).unwrap();
    let reference: Vec<Reference> = serde_json::from_str(&raw).unwrap();
    assert_eq!(sentences.len(), 100);
    assert_eq!(reference.len(), 100);
    for (s, r) in sentences.iter().zip(&reference) {
        assert_eq!(s.id, r.sent_id);
        assert_eq!(s.text, r.text);
        assert_eq!(s.words.len(), r.words, "{}", s.id);
    }
}

#[test]
fn every_fixture_sentence_aligns_totally() {
    let vocab = common::gpt2_vocab();
    for s in parse_conllu(common::repo_path("fixtures/corpus/synthetic.conllu")).unwrap() {
        let n_words = s.words.len();
        let a = align(s, vocab).unwrap();
        assert_eq!(a.piece_to_word.len(), a.len());
        assert!(a.piece_to_word.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.piece_to_word.iter().all(|&w| w < n_words));
    }
}

const PLACE: &str = "# sent_id = p1
# text = Production began in Marietta, Georgia.
1\tProduction\tproduction\tNOUN\t_\t_\t2\tnsubj\t_\t_
2\tbegan\tbegin\tVERB\t_\t_\t0\troot\t_\t_
3\tin\tin\tADP\t_\t_\t4\tcase\t_\t_
4\tMarietta\tMarietta\tPROPN\t_\t_\t2\tobl\t_\tSpaceAfter=No
5\t,\t,\tPUNCT\t_\t_\t6\tpunct\t_\t_
6\tGeorgia\tGeorgia\tPROPN\t_\t_\t4\tappos\t_\tSpaceAfter=No
7\t.\t.\tPUNCT\t_\t_\t2\tpunct\t_\t_
";

#[test]
fn split_place_name_pieces_inherit_the_word_tag() {
    let s = parse_conllu_str(PLACE, "place").unwrap().remove(0);
    let a = align(s, common::gpt2_vocab()).unwrap();
    assert_eq!(
        a.pieces.pieces,
        ["Production", " began", " in", " Mar", "iet", "ta", ",", " Georgia", "."]
    );
    assert_eq!(a.piece_to_word, [0, 1, 2, 3, 3, 3, 4, 5, 6]);
    for i in 3..6 {
        assert_eq!(a.pos(i), "PROPN");
    }
    // "Georgia" is an appos of "Marietta": every piece pair of the two words is related.
    for i in 3..6 {
        assert!(a.dep(Formulation::AttendedParent, 7, i));
        assert!(a.dep(Formulation::Either, 7, i));
        assert!(!a.dep(Formulation::AttendingParent, 7, i));
    }
}

#[test]
fn multiword_contraction_alignment() {
    let src = "# sent_id = n1
# text = The committee didn't approve the survey.
1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_
2\tcommittee\tcommittee\tNOUN\t_\t_\t5\tnsubj\t_\t_
3-4\tdidn't\t_\t_\t_\t_\t_\t_\t_\t_
3\tdid\tdo\tAUX\t_\t_\t5\taux\t_\t_
4\tn't\tnot\tPART\t_\t_\t5\tadvmod\t_\t_
5\tapprove\tapprove\tVERB\t_\t_\t0\troot\t_\t_
6\tthe\tthe\tDET\t_\t_\t7\tdet\t_\t_
7\tsurvey\tsurvey\tNOUN\t_\t_\t5\tobj\t_\tSpaceAfter=No
8\t.\t.\tPUNCT\t_\t_\t5\tpunct\t_\t_
";
    let a = align(parse_conllu_str(src, "n").unwrap().remove(0), common::gpt2_vocab()).unwrap();
    assert_eq!(
        a.pieces.pieces,
        ["The", " committee", " didn", "'t", " approve", " the", " survey", "."]
    );
    // " didn" overlaps "did" by three bytes and "n't" by one.
    assert_eq!(a.piece_to_word, [0, 1, 2, 3, 4, 5, 6, 7]);
}

#[test]
fn manifests_are_reproducible() {
    let path = common::repo_path("fixtures/corpus/synthetic.conllu");
    let (a, picked_a) = sample_corpus(&path, 20, 7).unwrap();
    let (b, _) = sample_corpus(&path, 20, 7).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.sentence_ids.len(), 20);
    assert_eq!(a.available, 100);
    let (all, _) = sample_corpus(&path, 100, 7).unwrap();
    assert_eq!(all.sentence_ids.first().map(String::as_str), Some("syn-001"));
    assert_eq!(all.sentence_ids.last().map(String::as_str), Some("syn-100"));
    let sentences = parse_conllu(&path).unwrap();
    let picked = a.select(sentences).unwrap();
    assert_eq!(picked.iter().map(|s| s.id.clone()).collect::<Vec<_>>(), a.sentence_ids);
    assert_eq!(picked, picked_a);
}
