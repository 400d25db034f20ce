//! Corpus-scale runs: attention extraction into a store on disk, and a single
//! streaming pass that feeds the metric accumulators and exemplar heaps.
//!
//! Attention is produced batch by batch, and every batch is a whole number of
//! reduction chunks, so results equal [`crate::metrics::analyze`] on the same
//! tensors bit for bit.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::corpus::{align, AlignedSentence, Sentence};
use crate::error::{Error, Result};
use crate::exec::{map_chunks, map_items, Execution, DEFAULT_CHUNK};
use crate::exemplars::{ExemplarCollector, HeadExemplars, RankMode};
use crate::metrics::{Accumulator, FilterPolicy, Prefix, Report, VariabilityAccumulator};
use crate::model::archive::{ArchiveReader, ArchiveWriter};
use crate::model::{forward_attention, AttentionTensor, WeightBundle};
use crate::tokenizer::BpeVocab;

/// Sentences per batch of attention held in memory at once.
const BATCH: usize = 4 * DEFAULT_CHUNK;

pub const STORE_FORMAT: &str = "headscope-attention/1";
pub const STORE_LAYOUT: &str = "per sentence [layer, head, i, j <= i], row-major";
pub const TOKENIZATION: &str = "sentence text verbatim, no prepended space";

/// Aligns every sentence and cuts piece sequences to the model context.
pub fn prepare_corpus(sentences: Vec<Sentence>, vocab: &BpeVocab, n_ctx: usize) -> Result<Vec<AlignedSentence>> {
    let mut out = Vec::with_capacity(sentences.len());
    for s in sentences {
        let mut a = align(s, vocab)?;
        if a.pieces.is_empty() {
            return Err(Error::Alignment {
                sentence: a.id().to_string(),
                message: "sentence encodes to no pieces".into(),
            });
        }
        if a.len() > n_ctx {
            warn!("sentence {}: {} pieces truncated to the context length {n_ctx}", a.id(), a.len());
            a.truncate(n_ctx);
        }
        out.push(a);
    }
    Ok(out)
}

fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Reads per-sentence attention written by [`extract`].
pub struct AttentionStore {
    reader: ArchiveReader,
    path: PathBuf,
    pub n_layers: usize,
    pub n_heads: usize,
    /// Context length sentences were cut to at extraction.
    pub n_ctx: usize,
    pub manifest_hash: String,
    index: HashMap<String, usize>,
}

impl AttentionStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let reader = ArchiveReader::open(&path)?;
        let meta = &reader.header.metadata;
        let field = |k: &str| {
            meta.get(k)
                .cloned()
                .ok_or_else(|| Error::Integrity(format!("{}: store metadata lacks `{k}`", path.display())))
        };
        if field("format")? != STORE_FORMAT {
            return Err(Error::Integrity(format!("{}: not an attention store", path.display())));
        }
        let count = |k: &str| -> Result<usize> {
            field(k)?
                .parse()
                .map_err(|_| Error::Integrity(format!("{}: bad `{k}` in store metadata", path.display())))
        };
        let (n_layers, n_heads, n_ctx) = (count("n_layers")?, count("n_heads")?, count("n_ctx")?);
        let manifest_hash = field("manifest_hash")?;
        let mut index = HashMap::new();
        for (k, e) in reader.header.entries.iter().enumerate() {
            if e.shape.len() != 3 || e.shape[0] != n_layers || e.shape[1] != n_heads {
                return Err(Error::Integrity(format!(
                    "{}: record `{}` has shape {:?}",
                    path.display(),
                    e.name,
                    e.shape
                )));
            }
            index.insert(e.name.clone(), k);
        }
        Ok(Self {
            reader,
            path,
            n_layers,
            n_heads,
            n_ctx,
            manifest_hash,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.reader.header.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sentence ids in record order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.reader.header.entries.iter().map(|e| e.name.as_str())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Fails with a staleness error unless the store was built for `manifest_hash`.
    pub fn verify(&self, manifest_hash: &str) -> Result<()> {
        if self.manifest_hash != manifest_hash {
            return Err(Error::Stale {
                store: self.manifest_hash.clone(),
                current: manifest_hash.to_string(),
            });
        }
        Ok(())
    }

    pub fn read(&mut self, index: usize) -> Result<AttentionTensor> {
        if index >= self.len() {
            return Err(Error::Range {
                what: "record",
                index,
                limit: self.len(),
            });
        }
        let t = self.reader.read(index)?;
        let packed = t.shape[2];
        let n = ((((8 * packed + 1) as f64).sqrt() as usize) - 1) / 2;
        if tri(n) != packed {
            return Err(Error::Integrity(format!(
                "{}: record {index} holds {packed} values per head, not a triangle",
                self.path.display()
            )));
        }
        AttentionTensor::from_packed(self.n_layers, self.n_heads, n, &t.data)
    }

    /// Attention for `s`, checking that the record belongs to it.
    pub fn read_for(&mut self, index: usize, s: &AlignedSentence) -> Result<AttentionTensor> {
        let name = &self
            .reader
            .header
            .entries
            .get(index)
            .ok_or(Error::Range {
                what: "record",
                index,
                limit: self.len(),
            })?
            .name;
        if name != s.id() {
            return Err(Error::Integrity(format!(
                "store record {index} is `{name}`, corpus has `{}`",
                s.id()
            )));
        }
        let a = self.read(index)?;
        if a.seq_len() != s.len() {
            return Err(Error::Integrity(format!(
                "sentence {}: store holds {} pieces, corpus has {}",
                s.id(),
                a.seq_len(),
                s.len()
            )));
        }
        Ok(a)
    }
}

fn forward_batch(exec: Execution, bundle: &WeightBundle, batch: &[AlignedSentence]) -> Result<Vec<AttentionTensor>> {
    map_items(exec, batch, |s| forward_attention(bundle, &s.pieces.ids))
        .into_iter()
        .collect()
}

/// Runs the model over the corpus and writes one packed record per sentence.
pub fn extract(
    exec: Execution,
    bundle: &WeightBundle,
    corpus: &[AlignedSentence],
    path: impl AsRef<Path>,
    manifest_hash: &str,
) -> Result<()> {
    let c = bundle.config;
    if corpus.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    let entries = corpus
        .iter()
        .map(|s| (s.id().to_string(), vec![c.n_layers, c.n_heads, tri(s.len())]))
        .collect();
    let metadata = BTreeMap::from([
        ("format".to_string(), STORE_FORMAT.to_string()),
        ("layout".to_string(), STORE_LAYOUT.to_string()),
        ("tokenization".to_string(), TOKENIZATION.to_string()),
        ("manifest_hash".to_string(), manifest_hash.to_string()),
        ("n_layers".to_string(), c.n_layers.to_string()),
        ("n_heads".to_string(), c.n_heads.to_string()),
        ("n_ctx".to_string(), c.n_ctx.to_string()),
        ("sentences".to_string(), corpus.len().to_string()),
    ]);
    let mut w = ArchiveWriter::create(path, entries, &metadata)?;
    for (b, batch) in corpus.chunks(BATCH).enumerate() {
        for a in forward_batch(exec, bundle, batch)? {
            w.write_next(&a.to_packed())?;
        }
        info!(
            "extracted {} / {} sentences",
            (b * BATCH + batch.len()).min(corpus.len()),
            corpus.len()
        );
    }
    w.finish()
}

/// Where a streaming run gets its attention from.
pub enum Source<'a> {
    Model(&'a WeightBundle),
    Store(&'a mut AttentionStore),
}

impl Source<'_> {
    fn shape(&self) -> (usize, usize) {
        match self {
            Source::Model(b) => (b.config.n_layers, b.config.n_heads),
            Source::Store(s) => (s.n_layers, s.n_heads),
        }
    }

    fn batch(&mut self, exec: Execution, start: usize, batch: &[AlignedSentence]) -> Result<Vec<AttentionTensor>> {
        match self {
            Source::Model(b) => forward_batch(exec, b, batch),
            Source::Store(s) => batch.iter().enumerate().map(|(k, sent)| s.read_for(start + k, sent)).collect(),
        }
    }
}

/// Which heads to collect exemplars for, and how many.
#[derive(Debug, Clone)]
pub struct ExemplarRequest {
    pub heads: Vec<(usize, usize)>,
    pub k: usize,
    pub mode: RankMode,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Option<Report>,
    pub exemplars: Vec<HeadExemplars>,
}

struct Partial {
    acc: Accumulator,
    prefixes: Vec<Prefix>,
    exemplars: Option<ExemplarCollector>,
}

/// One pass over the corpus computing the report (when `policy` is given)
/// and exemplars (when `exemplars` is given).
pub fn run(
    exec: Execution,
    corpus: &[AlignedSentence],
    mut source: Source<'_>,
    policy: FilterPolicy,
    manifest_hash: &str,
    with_report: bool,
    exemplars: Option<&ExemplarRequest>,
) -> Result<RunOutput> {
    policy.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    if let Source::Store(s) = &source {
        s.verify(manifest_hash)?;
        if s.len() != corpus.len() {
            return Err(Error::Integrity(format!(
                "store has {} records, corpus has {} sentences",
                s.len(),
                corpus.len()
            )));
        }
    }
    let (nl, nh) = source.shape();
    let new_collector = || {
        exemplars
            .map(|r| ExemplarCollector::new(r.heads.clone(), r.k, &policy, r.mode))
            .transpose()
    };
    let mut acc = Accumulator::new(nl, nh, policy);
    let mut prefixes = Vec::new();
    let mut collector = new_collector()?;

    for (b, batch) in corpus.chunks(BATCH).enumerate() {
        let start = b * BATCH;
        let attention = source.batch(exec, start, batch)?;
        let pairs: Vec<(&AlignedSentence, &AttentionTensor)> = batch.iter().zip(&attention).collect();
        let partials = map_chunks(exec, &pairs, DEFAULT_CHUNK, |offset, chunk| {
            let mut p = Partial {
                acc: Accumulator::new(nl, nh, policy),
                prefixes: Vec::new(),
                exemplars: new_collector()?,
            };
            for (k, (s, a)) in chunk.iter().enumerate() {
                if with_report {
                    p.acc.add(s, a)?;
                    p.prefixes.push(Prefix::of(a, policy.variability_prefix_n));
                }
                if let Some(c) = &mut p.exemplars {
                    c.add(start + offset + k, s, a)?;
                }
            }
            Ok::<_, Error>(p)
        });
        for p in partials {
            let p = p?;
            acc.merge(&p.acc);
            prefixes.extend(p.prefixes);
            if let (Some(c), Some(o)) = (&mut collector, p.exemplars) {
                c.merge(o);
            }
        }
        info!("processed {} / {} sentences", start + batch.len(), corpus.len());
    }

    let report = if with_report {
        let means = acc.variability_means()?;
        let parts = map_chunks(exec, &prefixes, DEFAULT_CHUNK, |_, chunk| {
            let mut v = VariabilityAccumulator::new(nl * nh);
            for p in chunk {
                v.add(&means, p);
            }
            v
        });
        let mut var = VariabilityAccumulator::new(nl * nh);
        for v in &parts {
            var.merge(v);
        }
        Some(Report::build(&acc, &var, manifest_hash)?)
    } else {
        None
    };
    Ok(RunOutput {
        report,
        exemplars: collector.map(|c| c.finish()).unwrap_or_default(),
    })
}
