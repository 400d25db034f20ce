use headscope_testkit as common;

use headscope::tokenizer::pretokenize::{is_letter, is_number, is_space};
use serde::Deserialize;
use unicode_general_category::{get_general_category, GeneralCategory};

#[derive(Deserialize)]
struct Golden {
    vocab_size: usize,
    cases: Vec<Case>,
}

#[derive(Deserialize)]
struct Case {
    text: String,
    ids: Vec<u32>,
}

#[test]
fn bundled_vocabulary_shape() {
    let v = common::gpt2_vocab();
    assert_eq!(v.vocab_size(), 50257);
    assert_eq!(v.n_merges(), 50000);
    assert_eq!(v.token_id("<|endoftext|>"), Some(50256));
}

#[test]
fn matches_reference_ids() {
    let raw = std::fs::read_to_string(common::repo_path("fixtures/tokenizer/golden.json")).unwrap();
    let golden: Golden = serde_json::from_str(&raw).unwrap();
    let v = common::gpt2_vocab();
    assert_eq!(golden.vocab_size, v.vocab_size());
    assert!(golden.cases.len() >= 100);
    let mut mismatches = Vec::new();
    for case in &golden.cases {
        let seq = v.encode(&case.text);
        if seq.ids != case.ids {
            mismatches.push(format!("{:?}: got {:?} want {:?}", case.text, seq.ids, case.ids));
        }
        assert_eq!(v.decode(&seq.ids).unwrap(), case.text);
        // spans tile the input
        let mut at = 0;
        for s in &seq.spans {
            assert_eq!(s.start, at, "{:?}", case.text);
            at = s.end;
        }
        assert_eq!(at, case.text.len());
    }
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}

#[derive(Deserialize)]
struct Classes {
    letter: Vec<(u32, u32)>,
    number: Vec<(u32, u32)>,
    space: Vec<(u32, u32)>,
}

fn check_class(name: &str, ranges: &[(u32, u32)], pred: fn(char) -> bool) {
    let mut inside = vec![false; 0x110000];
    for &(a, b) in ranges {
        for c in a..=b {
            inside[c as usize] = true;
        }
    }
    // The reference regex build may know a newer Unicode version; code
    // points that are unassigned in our tables are counted, not compared.
    let mut newer = 0;
    for (cp, &want) in inside.iter().enumerate() {
        let Some(c) = char::from_u32(cp as u32) else { continue };
        if get_general_category(c) == GeneralCategory::Unassigned {
            newer += usize::from(want);
            continue;
        }
        assert_eq!(pred(c), want, "{name} class disagrees at U+{cp:04X}");
    }
    eprintln!("{name}: {newer} code points assigned only in the reference tables");
    assert!(newer < 5000);
}

#[test]
fn character_classes_match_reference_regex() {
    let raw = std::fs::read_to_string(common::repo_path("fixtures/tokenizer/char_classes.json")).unwrap();
    let c: Classes = serde_json::from_str(&raw).unwrap();
    check_class("letter", &c.letter, is_letter);
    check_class("number", &c.number, is_number);
    check_class("space", &c.space, is_space);
}
