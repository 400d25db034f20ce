//! Mergeable per-head sums behind every corpus metric.
//!
//! All sums are f64. Cells are indexed `layer * n_heads + head`. A state built
//! from one half of a corpus merges with the other half's by addition, so the
//! corpus can be mapped per sentence and reduced in any grouping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::policy::FilterPolicy;
use crate::corpus::{AlignedSentence, Formulation};
use crate::error::{Error, Result};
use crate::model::AttentionTensor;

/// Largest piece distance tracked by the distance-conditioned baseline.
pub const MAX_BASELINE_DISTANCE: usize = 30;
/// Span limit for the "relations within distance" fraction.
pub const SPAN_LIMIT: usize = 18;

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

fn add_map(a: &mut BTreeMap<String, Vec<f64>>, b: &BTreeMap<String, Vec<f64>>) {
    for (k, v) in b {
        match a.get_mut(k) {
            Some(x) => add_into(x, v),
            None => {
                a.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Unweighted piece-pair statistics of the parses themselves.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineCounts {
    /// Ordered pairs `1 <= j < i`.
    pub pairs: u64,
    /// Of those, pairs with a dependency arc (either direction).
    pub dep_pairs: u64,
    /// Index `d` counts all pairs `j < i` with `i - j == d` (`d <= 30`).
    pub pairs_at: Vec<u64>,
    pub dep_pairs_at: Vec<u64>,
    /// Over all dependent piece pairs `j < i`.
    pub span_sum: u64,
    pub span_count: u64,
    pub within_limit: u64,
}

impl BaselineCounts {
    fn new() -> Self {
        Self {
            pairs_at: vec![0; MAX_BASELINE_DISTANCE + 1],
            dep_pairs_at: vec![0; MAX_BASELINE_DISTANCE + 1],
            ..Self::default()
        }
    }

    fn merge(&mut self, o: &Self) {
        self.pairs += o.pairs;
        self.dep_pairs += o.dep_pairs;
        for (a, b) in self.pairs_at.iter_mut().zip(&o.pairs_at) {
            *a += b;
        }
        for (a, b) in self.dep_pairs_at.iter_mut().zip(&o.dep_pairs_at) {
            *a += b;
        }
        self.span_sum += o.span_sum;
        self.span_count += o.span_count;
        self.within_limit += o.within_limit;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub n_layers: usize,
    pub n_heads: usize,
    pub policy: FilterPolicy,
    pub sentences: u64,
    pub pieces: u64,
    /// Sum of all attention, unfiltered.
    pub total: Vec<f64>,
    /// Sum of attention to `j == 0`.
    pub null: Vec<f64>,
    /// Sum of attention over filtered targets (the shared denominator).
    pub mass: Vec<f64>,
    /// Filtered attention by the tag of the attended piece.
    pub pos_to: BTreeMap<String, Vec<f64>>,
    /// Filtered attention by the tag of the attending piece.
    pub pos_from: BTreeMap<String, Vec<f64>>,
    /// Filtered attention by the dependency label of the attended piece.
    pub deprel_to: BTreeMap<String, Vec<f64>>,
    /// Filtered attention on dependent pairs, indexed like `Formulation::ALL`.
    pub dep: [Vec<f64>; 3],
    /// Filtered attention times `i - j`.
    pub distance: Vec<f64>,
    pub entropy_sum: Vec<f64>,
    pub entropy_rows: Vec<u64>,
    /// Variability pass 1: sum of `alpha[i][j]` for `i, j < N`, laid out
    /// `[cell][i][j]`.
    pub prefix_sum: Vec<f64>,
    /// Number of sentences with a position `i`, for `i < N`.
    pub prefix_count: Vec<u64>,
    /// Sentences with at least N pieces.
    pub long_sentences: u64,
    pub baseline: BaselineCounts,
}

impl Accumulator {
    pub fn new(n_layers: usize, n_heads: usize, policy: FilterPolicy) -> Self {
        let cells = n_layers * n_heads;
        let n = policy.variability_prefix_n;
        Self {
            n_layers,
            n_heads,
            policy,
            sentences: 0,
            pieces: 0,
            total: vec![0.0; cells],
            null: vec![0.0; cells],
            mass: vec![0.0; cells],
            pos_to: BTreeMap::new(),
            pos_from: BTreeMap::new(),
            deprel_to: BTreeMap::new(),
            dep: [vec![0.0; cells], vec![0.0; cells], vec![0.0; cells]],
            distance: vec![0.0; cells],
            entropy_sum: vec![0.0; cells],
            entropy_rows: vec![0; cells],
            prefix_sum: vec![0.0; cells * n * n],
            prefix_count: vec![0; n],
            long_sentences: 0,
            baseline: BaselineCounts::new(),
        }
    }

    pub fn cells(&self) -> usize {
        self.n_layers * self.n_heads
    }

    /// Folds in another state built with the same shape and policy.
    pub fn merge(&mut self, o: &Accumulator) {
        assert_eq!((self.n_layers, self.n_heads), (o.n_layers, o.n_heads), "accumulator shapes differ");
        assert_eq!(self.policy, o.policy, "accumulator policies differ");
        self.sentences += o.sentences;
        self.pieces += o.pieces;
        add_into(&mut self.total, &o.total);
        add_into(&mut self.null, &o.null);
        add_into(&mut self.mass, &o.mass);
        add_map(&mut self.pos_to, &o.pos_to);
        add_map(&mut self.pos_from, &o.pos_from);
        add_map(&mut self.deprel_to, &o.deprel_to);
        for (a, b) in self.dep.iter_mut().zip(&o.dep) {
            add_into(a, b);
        }
        add_into(&mut self.distance, &o.distance);
        add_into(&mut self.entropy_sum, &o.entropy_sum);
        for (a, b) in self.entropy_rows.iter_mut().zip(&o.entropy_rows) {
            *a += b;
        }
        add_into(&mut self.prefix_sum, &o.prefix_sum);
        for (a, b) in self.prefix_count.iter_mut().zip(&o.prefix_count) {
            *a += b;
        }
        self.long_sentences += o.long_sentences;
        self.baseline.merge(&o.baseline);
    }

    pub fn merged(mut self, o: &Accumulator) -> Self {
        self.merge(o);
        self
    }

    fn check_shape(&self, s: &AlignedSentence, a: &AttentionTensor) -> Result<()> {
        if (a.n_layers(), a.n_heads()) != (self.n_layers, self.n_heads) {
            return Err(Error::Integrity(format!(
                "sentence {}: attention has {}x{} heads, expected {}x{}",
                s.id(),
                a.n_layers(),
                a.n_heads(),
                self.n_layers,
                self.n_heads
            )));
        }
        if a.seq_len() != s.len() {
            return Err(Error::Integrity(format!(
                "sentence {}: attention covers {} pieces but the sentence has {}",
                s.id(),
                a.seq_len(),
                s.len()
            )));
        }
        if s.is_empty() {
            return Err(Error::EmptyInput("sentence without pieces"));
        }
        Ok(())
    }

    /// Adds one sentence's attention to every pass-1 sum.
    pub fn add(&mut self, s: &AlignedSentence, a: &AttentionTensor) -> Result<()> {
        self.check_shape(s, a)?;
        let n = s.len();
        let cells = self.cells();
        let first = self.policy.first_target();
        let prefix_n = self.policy.variability_prefix_n;

        // Sentence-local label tables keep the inner loop free of map lookups.
        let intern = |label: &dyn Fn(usize) -> String| {
            let mut names: Vec<String> = Vec::new();
            let idx: Vec<usize> = (0..n)
                .map(|i| {
                    let l = label(i);
                    names.iter().position(|x| *x == l).unwrap_or_else(|| {
                        names.push(l);
                        names.len() - 1
                    })
                })
                .collect();
            (names, idx)
        };
        let (pos_names, pos_idx) = intern(&|i| s.pos(i).to_string());
        let (rel_names, rel_idx) = intern(&|i| s.deprel(i).to_string());
        let mut pos_to = vec![0.0; pos_names.len() * cells];
        let mut pos_from = vec![0.0; pos_names.len() * cells];
        let mut rel_to = vec![0.0; rel_names.len() * cells];

        let mut dep_kind = vec![(false, false); n * n];
        for i in 0..n {
            for j in 0..i {
                dep_kind[i * n + j] = (s.dep(Formulation::AttendingParent, i, j), s.dep(Formulation::AttendedParent, i, j));
            }
        }

        for l in 0..self.n_layers {
            for h in 0..self.n_heads {
                let cell = l * self.n_heads + h;
                let m = a.head(l, h);
                for i in 0..n {
                    let row = &m[i * n..=i * n + i];
                    let mut row_total = 0.0;
                    for &w in row {
                        row_total += f64::from(w);
                    }
                    self.total[cell] += row_total;
                    self.null[cell] += f64::from(row[0]);
                    for (j, &w) in row.iter().enumerate().skip(first) {
                        let w = f64::from(w);
                        self.mass[cell] += w;
                        self.distance[cell] += w * (i - j) as f64;
                        pos_to[pos_idx[j] * cells + cell] += w;
                        pos_from[pos_idx[i] * cells + cell] += w;
                        rel_to[rel_idx[j] * cells + cell] += w;
                        let (ing, ed) = dep_kind[i * n + j];
                        if ing {
                            self.dep[0][cell] += w;
                        }
                        if ed {
                            self.dep[1][cell] += w;
                        }
                        if ing || ed {
                            self.dep[2][cell] += w;
                        }
                        if i < prefix_n {
                            self.prefix_sum[(cell * prefix_n + i) * prefix_n + j] += w;
                        }
                    }
                    if let Some(e) = row_entropy(row, &self.policy) {
                        self.entropy_sum[cell] += e;
                        self.entropy_rows[cell] += 1;
                    }
                }
            }
        }

        for (names, local, map) in [
            (&pos_names, &pos_to, &mut self.pos_to),
            (&pos_names, &pos_from, &mut self.pos_from),
            (&rel_names, &rel_to, &mut self.deprel_to),
        ] {
            for (t, name) in names.iter().enumerate() {
                let dst = map.entry(name.clone()).or_insert_with(|| vec![0.0; cells]);
                add_into(dst, &local[t * cells..(t + 1) * cells]);
            }
        }

        for c in self.prefix_count.iter_mut().take(n) {
            *c += 1;
        }
        if n >= prefix_n {
            self.long_sentences += 1;
        }
        self.add_baseline(n, &dep_kind);
        self.sentences += 1;
        self.pieces += n as u64;
        Ok(())
    }

    fn add_baseline(&mut self, n: usize, dep_kind: &[(bool, bool)]) {
        let b = &mut self.baseline;
        for i in 0..n {
            for j in 0..i {
                let (ing, ed) = dep_kind[i * n + j];
                let related = ing || ed;
                let d = i - j;
                if j >= 1 {
                    b.pairs += 1;
                    b.dep_pairs += u64::from(related);
                }
                if d <= MAX_BASELINE_DISTANCE {
                    b.pairs_at[d] += 1;
                    b.dep_pairs_at[d] += u64::from(related);
                }
                if related {
                    b.span_sum += d as u64;
                    b.span_count += 1;
                    b.within_limit += u64::from(d <= SPAN_LIMIT);
                }
            }
        }
    }

    /// Per-position means for variability pass 2.
    pub fn variability_means(&self) -> Result<VariabilityMeans> {
        if self.long_sentences < 2 {
            return Err(Error::InsufficientData(format!(
                "variability needs at least 2 sentences of {} or more pieces, found {}",
                self.policy.variability_prefix_n, self.long_sentences
            )));
        }
        let n = self.policy.variability_prefix_n;
        let mut mean = self.prefix_sum.clone();
        for (k, v) in mean.iter_mut().enumerate() {
            let i = (k / n) % n;
            *v /= self.prefix_count[i] as f64;
        }
        Ok(VariabilityMeans {
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            policy: self.policy,
            mean,
        })
    }
}

/// Entropy (natural log) of one attention row under the policy, or `None`
/// when the row is left out.
pub fn row_entropy(row: &[f32], policy: &FilterPolicy) -> Option<f64> {
    let kept = if policy.exclude_null_target {
        if f64::from(row[0]) > policy.entropy_null_threshold {
            return None;
        }
        &row[1..]
    } else {
        row
    };
    let z: f64 = kept.iter().map(|&w| f64::from(w)).sum();
    if z <= 0.0 {
        return None;
    }
    let norm = if policy.entropy_renormalize { z } else { 1.0 };
    let mut h = 0.0;
    for &w in kept {
        let p = f64::from(w) / norm;
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    Some(h)
}

/// The `N x N` corner of every head's attention, kept for variability pass 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Prefix {
    pub len: usize,
    /// `[cell][i][j]` over `i, j < len`, lower triangle only is meaningful.
    pub data: Vec<f32>,
}

impl Prefix {
    pub fn of(a: &AttentionTensor, prefix_n: usize) -> Self {
        let len = a.seq_len().min(prefix_n);
        let mut data = Vec::with_capacity(a.n_layers() * a.n_heads() * len * len);
        for l in 0..a.n_layers() {
            for h in 0..a.n_heads() {
                let m = a.head(l, h);
                for i in 0..len {
                    data.extend_from_slice(&m[i * a.seq_len()..i * a.seq_len() + len]);
                }
            }
        }
        Self { len, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariabilityMeans {
    pub n_layers: usize,
    pub n_heads: usize,
    pub policy: FilterPolicy,
    /// `[cell][i][j]`, `N x N` per cell.
    pub mean: Vec<f64>,
}

/// Variability pass-2 sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilityAccumulator {
    pub deviation: Vec<f64>,
    pub mass: Vec<f64>,
}

impl VariabilityAccumulator {
    pub fn new(cells: usize) -> Self {
        Self {
            deviation: vec![0.0; cells],
            mass: vec![0.0; cells],
        }
    }

    pub fn add(&mut self, means: &VariabilityMeans, p: &Prefix) {
        let n = means.policy.variability_prefix_n;
        let first = means.policy.first_target();
        let cells = means.n_layers * means.n_heads;
        for cell in 0..cells {
            let block = &p.data[cell * p.len * p.len..(cell + 1) * p.len * p.len];
            for i in 0..p.len {
                for j in first..=i {
                    let w = f64::from(block[i * p.len + j]);
                    let m = means.mean[(cell * n + i) * n + j];
                    self.deviation[cell] += (w - m).abs();
                    self.mass[cell] += w;
                }
            }
        }
    }

    pub fn merge(&mut self, o: &Self) {
        add_into(&mut self.deviation, &o.deviation);
        add_into(&mut self.mass, &o.mass);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_rows() {
        let p = FilterPolicy::default();
        assert_eq!(row_entropy(&[1.0], &p), None);
        assert_eq!(row_entropy(&[0.0, 0.0, 1.0], &p), Some(0.0));
        let h = row_entropy(&[0.2, 0.2, 0.2, 0.2, 0.2], &p).unwrap();
        assert!((h - 4f64.ln()).abs() < 1e-12);
        assert_eq!(row_entropy(&[0.95, 0.05], &p), None);
        let raw = FilterPolicy {
            entropy_renormalize: false,
            ..p
        };
        let h = row_entropy(&[0.5, 0.25, 0.25], &raw).unwrap();
        assert!((h - 2.0 * 0.25 * 4f64.ln()).abs() < 1e-12);
        let unfiltered = FilterPolicy {
            exclude_null_target: false,
            ..p
        };
        assert!((row_entropy(&[0.5, 0.5], &unfiltered).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn prefix_corner() {
        let dense: Vec<f32> = (0..16).map(|v| v as f32).collect();
        let a = AttentionTensor::from_dense(1, 1, 4, dense).unwrap();
        let p = Prefix::of(&a, 2);
        assert_eq!(p.len, 2);
        assert_eq!(p.data, vec![0.0, 1.0, 4.0, 5.0]);
        assert_eq!(Prefix::of(&a, 10).len, 4);
    }
}
