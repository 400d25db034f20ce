//! Seeded corpus sampling and the manifest that pins a sample.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::conllu::{parse_conllu, Sentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub source: PathBuf,
    pub source_sha256: String,
    pub seed: u64,
    pub available: usize,
    /// Sampled sentence ids in corpus order.
    pub sentence_ids: Vec<String>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    /// Hash of the canonical JSON form; identifies the sample in stores and reports.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&raw)?)
    }

    /// Picks the manifest's sentences out of the parsed source, in manifest order.
    pub fn select(&self, sentences: Vec<Sentence>) -> Result<Vec<Sentence>> {
        let wanted: HashSet<&str> = self.sentence_ids.iter().map(String::as_str).collect();
        let picked: Vec<Sentence> = sentences.into_iter().filter(|s| wanted.contains(s.id.as_str())).collect();
        if picked.len() != self.sentence_ids.len() || picked.iter().zip(&self.sentence_ids).any(|(s, id)| &s.id != id) {
            return Err(Error::Integrity(format!(
                "source {} no longer contains the {} manifest sentences in order",
                self.source.display(),
                self.sentence_ids.len()
            )));
        }
        Ok(picked)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Indices of a seeded `n`-of-`total` sample, ascending.
pub fn sample_indices(total: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > total {
        return Err(Error::Size {
            requested: n,
            available: total,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, total, n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Builds a manifest for `n` sentences of a parsed corpus.
pub fn sample_sentences(source: &Path, source_bytes: &[u8], sentences: &[Sentence], n: usize, seed: u64) -> Result<Manifest> {
    let mut seen = HashSet::new();
    if let Some(dup) = sentences.iter().find(|s| !seen.insert(s.id.as_str())) {
        return Err(Error::Integrity(format!(
            "duplicate sentence id `{}` in {}",
            dup.id,
            source.display()
        )));
    }
    let idx = sample_indices(sentences.len(), n, seed)?;
    Ok(Manifest {
        // File name only, so the hash does not depend on how the file was reached.
        source: source.file_name().map(PathBuf::from).unwrap_or_else(|| source.to_path_buf()),
        source_sha256: sha256_hex(source_bytes),
        seed,
        available: sentences.len(),
        sentence_ids: idx.into_iter().map(|i| sentences[i].id.clone()).collect(),
    })
}

/// Reads a CoNLL-U source and samples `n` sentences from it.
pub fn sample_corpus(source: impl AsRef<Path>, n: usize, seed: u64) -> Result<(Manifest, Vec<Sentence>)> {
    let source = source.as_ref();
    let bytes = fs::read(source).map_err(|e| Error::io(source, e))?;
    let sentences = parse_conllu(source)?;
    let manifest = sample_sentences(source, &bytes, &sentences, n, seed)?;
    let picked = manifest.select(sentences)?;
    Ok((manifest, picked))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_sample_is_identity() {
        assert_eq!(sample_indices(7, 7, 3).unwrap(), (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn sample_is_seeded_sorted_and_unique() {
        let a = sample_indices(100_000, 10_000, 42).unwrap();
        assert_eq!(a, sample_indices(100_000, 10_000, 42).unwrap());
        assert_ne!(a, sample_indices(100_000, 10_000, 43).unwrap());
        assert_eq!(a.len(), 10_000);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(*a.last().unwrap() < 100_000);
    }

    #[test]
    fn oversize_request() {
        assert!(matches!(
            sample_indices(3, 4, 0),
            Err(Error::Size {
                requested: 4,
                available: 3
            })
        ));
    }
}
