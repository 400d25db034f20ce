#![allow(dead_code)]

use std::path::{Path, PathBuf};

use headscope::model::synthetic;
use headscope_cli::config::RunConfig;
use headscope_testkit::repo_path;

pub const MODEL_SEED: u64 = 5;

/// A temp workspace holding a tiny seeded model and a config pointing at
/// the repository's vocabulary and synthetic treebank.
pub struct Workspace {
    pub dir: tempfile::TempDir,
    pub config: RunConfig,
}

impl Workspace {
    pub fn new(sample_size: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let model = dir.path().join("model.safetensors");
        synthetic::seeded_archive(synthetic::tiny_config(), MODEL_SEED)
            .write(&model)
            .unwrap();
        let config = RunConfig {
            model: Some(model),
            vocab: Some(repo_path("assets/gpt2/vocab.json")),
            merges: Some(repo_path("assets/gpt2/merges.txt")),
            corpus: Some(repo_path("fixtures/corpus/synthetic.conllu")),
            output_dir: dir.path().join("out"),
            sample_size,
            seed: 7,
            ..RunConfig::default()
        };
        Self { dir, config }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn out(&self, rel: &str) -> PathBuf {
        self.config.output_dir.join(rel)
    }

    pub fn write_config(&self) -> PathBuf {
        let p = self.path("config.json");
        std::fs::write(&p, serde_json::to_string_pretty(&self.config).unwrap()).unwrap();
        p
    }
}

/// Every file under `dir`, relative, sorted.
pub fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(rd) = std::fs::read_dir(dir) {
        for e in rd.flatten() {
            let p = e.path();
            if p.is_dir() {
                out.extend(files(&p).into_iter().map(|q| Path::new(&e.file_name()).join(q)));
            } else {
                out.push(PathBuf::from(e.file_name()));
            }
        }
    }
    out.sort();
    out
}
