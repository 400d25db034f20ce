//! Per-head exemplar sentences: the corpus sentences with the strongest
//! single attention edge.

mod render;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

pub use render::{marked_html, marked_text, render_html, render_text};

use crate::corpus::AlignedSentence;
use crate::error::{Error, Result};
use crate::metrics::FilterPolicy;
use crate::model::AttentionTensor;

/// How a sentence is scored for one head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum RankMode {
    /// Largest single edge.
    #[default]
    MaxEdge,
    /// Sum of the `edges` largest edges.
    TopEdgesMass { edges: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarRecord {
    pub rank: usize,
    pub sentence_id: String,
    /// Position of the sentence in the corpus.
    pub corpus_index: usize,
    pub pieces: Vec<String>,
    /// Attending position of the strongest edge.
    pub i: usize,
    /// Attended position of the strongest edge.
    pub j: usize,
    pub weight: f32,
    /// Ranking score; equals `weight` under [`RankMode::MaxEdge`].
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadExemplars {
    pub layer: usize,
    pub head: usize,
    pub k: usize,
    /// Set when the corpus had fewer than `k` sentences.
    pub fewer_than_k: bool,
    pub records: Vec<ExemplarRecord>,
}

/// Strongest edge of one head, skipping `j < first`. Ties keep the earliest
/// `(i, j)` in row-major order. Falls back to `(0, 0)` when no edge qualifies.
pub fn max_edge(a: &AttentionTensor, layer: usize, head: usize, first: usize) -> (usize, usize, f32) {
    let n = a.seq_len();
    let m = a.head(layer, head);
    let mut best: Option<(usize, usize, f32)> = None;
    for i in first..n {
        for j in first..=i {
            let w = m[i * n + j];
            if best.is_none_or(|(_, _, b)| w > b) {
                best = Some((i, j, w));
            }
        }
    }
    best.unwrap_or((0, 0, m[0]))
}

fn score(a: &AttentionTensor, layer: usize, head: usize, first: usize, mode: RankMode, edge: f32) -> f64 {
    match mode {
        RankMode::MaxEdge => f64::from(edge),
        RankMode::TopEdgesMass { edges } => {
            let n = a.seq_len();
            let m = a.head(layer, head);
            let mut w: Vec<f32> = (first..n).flat_map(|i| (first..=i).map(move |j| m[i * n + j])).collect();
            w.sort_unstable_by(|x, y| y.total_cmp(x));
            w.iter().take(edges).map(|&x| f64::from(x)).sum()
        }
    }
}

/// Heap entry ordered so that "greater" means "ranks higher".
#[derive(Debug, Clone)]
struct Candidate(ExemplarRecord);

impl Candidate {
    fn key(&self) -> (f64, Reverse<usize>) {
        (self.0.score, Reverse(self.0.corpus_index))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    }
}

/// Streams a corpus once, keeping the best `k` sentences per selected head.
#[derive(Debug, Clone)]
pub struct ExemplarCollector {
    heads: Vec<(usize, usize)>,
    k: usize,
    first: usize,
    mode: RankMode,
    seen: usize,
    /// Min-heaps: the weakest kept candidate is on top.
    heaps: Vec<BinaryHeap<Reverse<Candidate>>>,
}

impl ExemplarCollector {
    pub fn new(heads: Vec<(usize, usize)>, k: usize, policy: &FilterPolicy, mode: RankMode) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if let RankMode::TopEdgesMass { edges: 0 } = mode {
            return Err(Error::config("rank_mode.edges", "must be at least 1"));
        }
        Ok(Self {
            heaps: heads.iter().map(|_| BinaryHeap::with_capacity(k + 1)).collect(),
            heads,
            k,
            first: policy.first_target(),
            mode,
            seen: 0,
        })
    }

    /// Offers sentence number `index` to every head.
    pub fn add(&mut self, index: usize, s: &AlignedSentence, a: &AttentionTensor) -> Result<()> {
        if a.seq_len() != s.len() {
            return Err(Error::Integrity(format!(
                "sentence {}: attention covers {} pieces but the sentence has {}",
                s.id(),
                a.seq_len(),
                s.len()
            )));
        }
        for (slot, &(l, h)) in self.heads.iter().enumerate() {
            if l >= a.n_layers() || h >= a.n_heads() {
                return Err(Error::Range {
                    what: if l >= a.n_layers() { "layer" } else { "head" },
                    index: if l >= a.n_layers() { l } else { h },
                    limit: if l >= a.n_layers() { a.n_layers() } else { a.n_heads() },
                });
            }
            let (i, j, w) = max_edge(a, l, h, self.first);
            let sc = score(a, l, h, self.first, self.mode, w);
            let heap = &mut self.heaps[slot];
            if heap.len() == self.k {
                let (ws, wi) = heap.peek().expect("k >= 1").0.key();
                if sc.total_cmp(&ws).then(Reverse(index).cmp(&wi)) != Ordering::Greater {
                    continue;
                }
            }
            heap.push(Reverse(Candidate(ExemplarRecord {
                rank: 0,
                sentence_id: s.id().to_string(),
                corpus_index: index,
                pieces: s.pieces.pieces.clone(),
                i,
                j,
                weight: w,
                score: sc,
            })));
            if heap.len() > self.k {
                heap.pop();
            }
        }
        self.seen += 1;
        Ok(())
    }

    /// Combines collectors that saw disjoint parts of the corpus.
    pub fn merge(&mut self, other: ExemplarCollector) {
        assert_eq!(self.heads, other.heads, "collectors track different heads");
        self.seen += other.seen;
        for (mine, theirs) in self.heaps.iter_mut().zip(other.heaps) {
            for c in theirs {
                mine.push(c);
                if mine.len() > self.k {
                    mine.pop();
                }
            }
        }
    }

    pub fn finish(self) -> Vec<HeadExemplars> {
        let k = self.k;
        let seen = self.seen;
        self.heads
            .into_iter()
            .zip(self.heaps)
            .map(|((layer, head), heap)| {
                let mut records: Vec<ExemplarRecord> = heap.into_iter().map(|Reverse(Candidate(r))| r).collect();
                records.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.corpus_index.cmp(&b.corpus_index)));
                for (r, rec) in records.iter_mut().enumerate() {
                    rec.rank = r + 1;
                }
                HeadExemplars {
                    layer,
                    head,
                    k,
                    fewer_than_k: seen < k,
                    records,
                }
            })
            .collect()
    }
}

/// Ranks a whole in-memory corpus for one head.
pub fn rank_exemplars(
    corpus: &[AlignedSentence],
    attention: &[AttentionTensor],
    layer: usize,
    head: usize,
    k: usize,
    policy: &FilterPolicy,
    mode: RankMode,
) -> Result<HeadExemplars> {
    let mut c = ExemplarCollector::new(vec![(layer, head)], k, policy, mode)?;
    for (idx, (s, a)) in corpus.iter().zip(attention).enumerate() {
        c.add(idx, s, a)?;
    }
    Ok(c.finish().remove(0))
}
