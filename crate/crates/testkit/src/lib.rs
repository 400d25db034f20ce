//! Shared test support: repository fixtures, synthetic attention and naive
//! reference implementations of the corpus metrics.

pub mod oracle;

use std::path::PathBuf;
use std::sync::OnceLock;

use headscope::corpus::{align, parse_conllu, AlignedSentence};
use headscope::model::AttentionTensor;
use headscope::tokenizer::BpeVocab;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn gpt2_vocab() -> &'static BpeVocab {
    static V: OnceLock<BpeVocab> = OnceLock::new();
    V.get_or_init(|| {
        BpeVocab::load(repo_path("assets/gpt2/vocab.json"), repo_path("assets/gpt2/merges.txt")).expect("bundled GPT-2 vocabulary loads")
    })
}

/// The first `n` sentences of the synthetic CoNLL-U fixture, aligned.
pub fn fixture_corpus(n: usize) -> Vec<AlignedSentence> {
    parse_conllu(repo_path("fixtures/corpus/synthetic.conllu"))
        .expect("fixture parses")
        .into_iter()
        .take(n)
        .map(|s| align(s, gpt2_vocab()).expect("fixture aligns"))
        .collect()
}

/// Shape of the rows produced by [`random_attention`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStyle {
    /// Mix of diffuse rows, one-hot rows and rows dominated by `j == 0`.
    Mixed,
    /// Row 0 is all zero and no row puts weight on `j == 0`.
    NoNull,
}

/// Seeded causal attention with normalised rows (except row 0 in `NoNull`).
pub fn random_attention(seed: u64, n_layers: usize, n_heads: usize, n: usize, style: RowStyle) -> AttentionTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = AttentionTensor::zeros(n_layers, n_heads, n);
    for l in 0..n_layers {
        for h in 0..n_heads {
            let m = t.head_mut(l, h);
            for i in 0..n {
                let row = &mut m[i * n..i * n + i + 1];
                let start = match style {
                    RowStyle::NoNull if i == 0 => continue,
                    RowStyle::NoNull => 1,
                    RowStyle::Mixed => 0,
                };
                match rng.random_range(0..6) {
                    0 => row[rng.random_range(start..=i)] = 1.0,
                    1 if style == RowStyle::Mixed => {
                        row[0] = 0.93;
                        if i > 0 {
                            row[rng.random_range(1..=i)] = 0.07;
                        } else {
                            row[0] = 1.0;
                        }
                    }
                    _ => {
                        let mut z = 0.0f32;
                        for w in row[start..].iter_mut() {
                            *w = if rng.random_bool(0.2) { 0.0 } else { rng.random::<f32>() };
                            z += *w;
                        }
                        if z == 0.0 {
                            row[i] = 1.0;
                        } else {
                            row[start..].iter_mut().for_each(|w| *w /= z);
                        }
                    }
                }
            }
        }
    }
    t
}

/// Random attention for every sentence of a corpus.
pub fn corpus_attention(seed: u64, corpus: &[AlignedSentence], n_layers: usize, n_heads: usize, style: RowStyle) -> Vec<AttentionTensor> {
    corpus
        .iter()
        .enumerate()
        .map(|(k, s)| random_attention(seed.wrapping_add(k as u64), n_layers, n_heads, s.len(), style))
        .collect()
}

/// `|a - b| <= tol * max(|a|, |b|)`, with exact equality required at zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}
