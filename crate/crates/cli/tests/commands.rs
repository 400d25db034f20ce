mod common;

use std::fs;
use std::process::Command;

use common::{files, Workspace, MODEL_SEED};
use headscope::corpus::{align, sample_corpus};
use headscope::exemplars::RankMode;
use headscope::metrics::FilterPolicy;
use headscope::model::{forward_attention, synthetic};
use headscope::pipeline::AttentionStore;
use headscope::Error;
use headscope_cli::commands::{cmd_analyze, cmd_exemplars, cmd_extract, HeadSelection};
use headscope_cli::{exit_code, EXIT_CONFIG, EXIT_INTEGRITY};
use headscope_testkit::oracle::{mismatches, naive, naive_exemplars};
use headscope_testkit::{gpt2_vocab, repo_path};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_headscope"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn one_sentence_extract_reloads_exactly() {
    let ws = Workspace::new(1);
    let store = cmd_extract(&ws.config).unwrap();
    let mut s = AttentionStore::open(&store).unwrap();
    assert_eq!(s.len(), 1);
    let (_, sentences) = sample_corpus(ws.config.corpus.as_ref().unwrap(), 1, 7).unwrap();
    let aligned = align(sentences[0].clone(), gpt2_vocab()).unwrap();
    let bundle = synthetic::seeded_bundle(synthetic::tiny_config(), MODEL_SEED);
    let want = forward_attention(&bundle, &aligned.pieces.ids).unwrap();
    let got = s.read(0).unwrap();
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(got.as_dense()), bits(want.as_dense()));
    assert!(ws.out("manifest.json").is_file());
}

#[test]
fn extract_is_deterministic() {
    let ws = Workspace::new(12);
    let store = cmd_extract(&ws.config).unwrap();
    let first = fs::read(&store).unwrap();
    cmd_extract(&ws.config).unwrap();
    assert_eq!(fs::read(&store).unwrap(), first);
    assert_eq!(AttentionStore::open(&store).unwrap().len(), 12);
}

#[test]
fn analyze_matches_brute_force_and_golden() {
    let ws = Workspace::new(20);
    let report = cmd_analyze(&ws.config).unwrap();

    let (_, sentences) = sample_corpus(ws.config.corpus.as_ref().unwrap(), 20, 7).unwrap();
    let corpus: Vec<_> = sentences.into_iter().map(|s| align(s, gpt2_vocab()).unwrap()).collect();
    let bundle = synthetic::seeded_bundle(synthetic::tiny_config(), MODEL_SEED);
    let attention: Vec<_> = corpus.iter().map(|s| forward_attention(&bundle, &s.pieces.ids).unwrap()).collect();
    let bad = mismatches(&report, &naive(&corpus, &attention, 2, 4, FilterPolicy::default()), 1e-9);
    assert!(bad.is_empty(), "{}", bad.join("\n"));

    let golden = repo_path("fixtures/reports/tiny_synthetic20/report.json");
    let got = fs::read_to_string(ws.out("report.json")).unwrap();
    if std::env::var_os("HEADSCOPE_UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(golden.parent().unwrap()).unwrap();
        fs::write(&golden, &got).unwrap();
    }
    assert_eq!(
        got,
        fs::read_to_string(&golden).unwrap(),
        "report drifted from {}",
        golden.display()
    );
}

#[test]
fn analyze_creates_output_and_is_idempotent() {
    let ws = Workspace::new(8);
    assert!(!ws.config.output_dir.exists());
    cmd_analyze(&ws.config).unwrap();
    let listing = files(&ws.config.output_dir);
    assert!(listing.iter().any(|p| p.to_str() == Some("report.json")));
    assert!(listing.iter().any(|p| p.to_str() == Some("dependency_alignment.either.csv")));
    let snapshot: Vec<_> = listing.iter().map(|p| fs::read(ws.out(p.to_str().unwrap())).unwrap()).collect();
    cmd_analyze(&ws.config).unwrap();
    assert_eq!(files(&ws.config.output_dir), listing);
    let again: Vec<_> = listing.iter().map(|p| fs::read(ws.out(p.to_str().unwrap())).unwrap()).collect();
    assert_eq!(again, snapshot);
}

#[test]
fn store_and_live_analysis_agree() {
    let mut ws = Workspace::new(10);
    let live = cmd_analyze(&ws.config).unwrap();
    cmd_extract(&ws.config).unwrap();
    ws.config.model = None;
    let stored = cmd_analyze(&ws.config).unwrap();
    assert_eq!(live.to_json(), stored.to_json());
}

#[test]
fn stale_store_is_refused() {
    let mut ws = Workspace::new(10);
    cmd_extract(&ws.config).unwrap();
    ws.config.seed = 8;
    let err = cmd_analyze(&ws.config).unwrap_err();
    assert!(matches!(err, Error::Stale { .. }), "{err}");
    assert_eq!(exit_code(&err), EXIT_INTEGRITY);
}

#[test]
fn exemplars_match_oracle_ranking() {
    let ws = Workspace::new(100);
    let out = cmd_exemplars(&ws.config, &HeadSelection::One { layer: 1, head: 2 }, 3, RankMode::MaxEdge).unwrap();
    let (_, sentences) = sample_corpus(ws.config.corpus.as_ref().unwrap(), 100, 7).unwrap();
    let bundle = synthetic::seeded_bundle(synthetic::tiny_config(), MODEL_SEED);
    let attention: Vec<_> = sentences
        .into_iter()
        .map(|s| forward_attention(&bundle, &align(s, gpt2_vocab()).unwrap().pieces.ids).unwrap())
        .collect();
    let want = naive_exemplars(&attention, 1, 2, 3, FilterPolicy::default());
    let got: Vec<_> = out[0].records.iter().map(|r| (r.corpus_index, r.i, r.j, r.weight)).collect();
    assert_eq!(got, want);
    for ext in ["txt", "html", "json"] {
        assert!(ws.out(&format!("exemplars/layer1_head2.{ext}")).is_file());
    }
}

#[test]
fn one_sentence_k1_gives_one_record() {
    let ws = Workspace::new(1);
    let out = cmd_exemplars(&ws.config, &HeadSelection::One { layer: 0, head: 0 }, 1, RankMode::MaxEdge).unwrap();
    assert_eq!(out[0].records.len(), 1);
    assert!(!out[0].fewer_than_k);
}

#[test]
fn binary_reports_range_error_before_work() {
    let ws = Workspace::new(5);
    let cfg = ws.write_config();
    let out = bin()
        .args(["exemplars", "--layer", "0", "--head", "12", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("head 12 out of range"));
    assert!(!ws.config.output_dir.exists());
}

#[test]
fn binary_end_to_end_with_flag_overrides() {
    let ws = Workspace::new(500);
    let cfg = ws.write_config();
    let run = |args: &[&str]| {
        let out = bin()
            .args(args)
            .arg("--config")
            .arg(&cfg)
            .args(["--sample-size", "6"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    run(&["extract"]);
    run(&["analyze"]);
    let text = run(&["exemplars", "--layer", "1", "--head", "0", "-k", "2"]);
    assert!(text.starts_with("layer 1 head 0 (top 2)"), "{text}");
    assert!(text.contains("**"));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(ws.out("analyze.run.json")).unwrap()).unwrap();
    assert_eq!(meta["sentences"], 6);
}

#[test]
fn binary_exit_codes() {
    let ws = Workspace::new(5);
    let out = bin().args(["analyze", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let bad = ws.path("bad.json");
    fs::write(&bad, r#"{"sample_size": "many"}"#).unwrap();
    let out = bin().args(["analyze", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));

    let broken = ws.path("broken.conllu");
    fs::write(&broken, "1\tx\n\n").unwrap();
    let cfg = ws.write_config();
    let out = bin()
        .args(["analyze", "--config"])
        .arg(&cfg)
        .arg("--corpus")
        .arg(&broken)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INTEGRITY), "{}", String::from_utf8_lossy(&out.stderr));
}
