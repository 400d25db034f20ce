use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use headscope::corpus::{sample_corpus, AlignedSentence, Manifest};
use headscope::exec::with_workers;
use headscope::exemplars::{render_html, render_text, HeadExemplars, RankMode};
use headscope::metrics::Report;
use headscope::model::{ModelConfig, TensorArchive, WeightBundle};
use headscope::pipeline::{self, prepare_corpus, AttentionStore, ExemplarRequest, Source};
use headscope::tokenizer::BpeVocab;
use headscope::{Error, Result};
use log::info;
use serde::Serialize;

use crate::config::{Command, RunConfig};

pub fn load_model(path: &Path) -> Result<WeightBundle> {
    let archive = TensorArchive::read(path)?;
    let config = ModelConfig::infer(&archive)?;
    WeightBundle::from_archive(archive, config)
}

pub fn load_vocab(c: &RunConfig) -> Result<BpeVocab> {
    let need = |p: &Option<PathBuf>, field: &str| p.clone().ok_or_else(|| Error::config(field, "required"));
    BpeVocab::load(need(&c.vocab, "vocab")?, need(&c.merges, "merges")?)
}

fn write(path: PathBuf, body: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, body).map_err(|e| Error::Io { path, source: e })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// Sampled, aligned corpus plus the manifest that identifies it.
fn load_corpus(c: &RunConfig, vocab: &BpeVocab, n_ctx: usize) -> Result<(Manifest, Vec<AlignedSentence>)> {
    let source = c.corpus.as_ref().ok_or_else(|| Error::config("corpus", "required"))?;
    let (manifest, sentences) = sample_corpus(source, c.sample_size, c.seed)?;
    info!(
        "sampled {} of {} sentences from {}",
        sentences.len(),
        manifest.available,
        source.display()
    );
    Ok((manifest, prepare_corpus(sentences, vocab, n_ctx)?))
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    manifest_hash: String,
    sentences: usize,
    pieces: usize,
    model: Option<ModelConfig>,
    tokenization: &'a str,
    config: &'a RunConfig,
}

fn write_run_meta(c: &RunConfig, command: &str, manifest: &Manifest, corpus: &[AlignedSentence], model: Option<ModelConfig>) -> Result<()> {
    let meta = RunMeta {
        command,
        manifest_hash: manifest.hash(),
        sentences: corpus.len(),
        pieces: corpus.iter().map(|s| s.len()).sum(),
        model,
        tokenization: pipeline::TOKENIZATION,
        config: c,
    };
    write(
        c.output_dir.join(format!("{command}.run.json")),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    manifest.write(c.output_dir.join("manifest.json"))
}

pub fn cmd_extract(c: &RunConfig) -> Result<PathBuf> {
    c.validate(Command::Extract)?;
    let bundle = load_model(c.model.as_ref().expect("validated"))?;
    let vocab = load_vocab(c)?;
    let (manifest, corpus) = load_corpus(c, &vocab, bundle.config.n_ctx)?;
    create_dir(&c.output_dir)?;
    let store = c.store_path();
    with_workers(c.workers, || {
        pipeline::extract(c.execution, &bundle, &corpus, &store, &manifest.hash())
    })?;
    write_run_meta(c, "extract", &manifest, &corpus, Some(bundle.config))?;
    info!("wrote {} records to {}", corpus.len(), store.display());
    Ok(store)
}

enum Attention {
    Store(AttentionStore),
    Model(Box<WeightBundle>),
}

impl Attention {
    fn open(c: &RunConfig) -> Result<Self> {
        let store = c.store_path();
        if store.is_file() {
            info!("reading attention from {}", store.display());
            Ok(Attention::Store(AttentionStore::open(store)?))
        } else {
            info!("no attention store at {}; running the model", store.display());
            Ok(Attention::Model(Box::new(load_model(c.model.as_ref().expect("validated"))?)))
        }
    }

    fn n_ctx(&self) -> usize {
        match self {
            Attention::Store(s) => s.n_ctx,
            Attention::Model(b) => b.config.n_ctx,
        }
    }

    fn model_config(&self) -> Option<ModelConfig> {
        match self {
            Attention::Store(_) => None,
            Attention::Model(b) => Some(b.config),
        }
    }

    fn source(&mut self) -> Source<'_> {
        match self {
            Attention::Store(s) => Source::Store(s),
            Attention::Model(b) => Source::Model(b),
        }
    }

    fn verify(&self, manifest: &Manifest) -> Result<()> {
        match self {
            Attention::Store(s) => s.verify(&manifest.hash()),
            Attention::Model(_) => Ok(()),
        }
    }
}

pub fn cmd_analyze(c: &RunConfig) -> Result<Report> {
    c.validate(Command::Analyze)?;
    let vocab = load_vocab(c)?;
    let mut att = Attention::open(c)?;
    let (manifest, corpus) = load_corpus(c, &vocab, att.n_ctx())?;
    att.verify(&manifest)?;
    let model = att.model_config();
    let out = with_workers(c.workers, || {
        pipeline::run(c.execution, &corpus, att.source(), c.policy, &manifest.hash(), true, None)
    })?;
    let report = out.report.expect("report requested");
    create_dir(&c.output_dir)?;
    report.write(&c.output_dir)?;
    write_run_meta(c, "analyze", &manifest, &corpus, model)?;
    info!("wrote report to {}", c.output_dir.display());
    Ok(report)
}

/// Which heads `exemplars` should rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeadSelection {
    One { layer: usize, head: usize },
    All,
}

pub fn cmd_exemplars(c: &RunConfig, heads: &HeadSelection, k: usize, mode: RankMode) -> Result<Vec<HeadExemplars>> {
    c.validate(Command::Exemplars)?;
    if k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    if let RankMode::TopEdgesMass { edges: 0 } = mode {
        return Err(Error::config("edges", "must be at least 1"));
    }
    let (nl, nh) = c.shape()?;
    let heads = match *heads {
        HeadSelection::One { layer, head } => {
            if layer >= nl {
                return Err(Error::Range {
                    what: "layer",
                    index: layer,
                    limit: nl,
                });
            }
            if head >= nh {
                return Err(Error::Range {
                    what: "head",
                    index: head,
                    limit: nh,
                });
            }
            vec![(layer, head)]
        }
        HeadSelection::All => (0..nl).flat_map(|l| (0..nh).map(move |h| (l, h))).collect(),
    };
    let vocab = load_vocab(c)?;
    let mut att = Attention::open(c)?;
    let (manifest, corpus) = load_corpus(c, &vocab, att.n_ctx())?;
    att.verify(&manifest)?;
    let request = ExemplarRequest { heads, k, mode };
    let out = with_workers(c.workers, || {
        pipeline::run(
            c.execution,
            &corpus,
            att.source(),
            c.policy,
            &manifest.hash(),
            false,
            Some(&request),
        )
    })?;
    let dir = c.output_dir.join("exemplars");
    create_dir(&dir)?;
    for h in &out.exemplars {
        let one = std::slice::from_ref(h);
        let stem = format!("layer{}_head{}", h.layer, h.head);
        write(dir.join(format!("{stem}.txt")), render_text(one))?;
        write(dir.join(format!("{stem}.html")), render_html(one))?;
        write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(h)? + "\n")?;
    }
    let doc = BTreeMap::from([
        ("manifest_hash", serde_json::to_value(manifest.hash())?),
        ("policy", serde_json::to_value(c.policy)?),
        ("rank_mode", serde_json::to_value(mode)?),
        ("heads", serde_json::to_value(&out.exemplars)?),
    ]);
    write(dir.join("exemplars.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(out.exemplars)
}
