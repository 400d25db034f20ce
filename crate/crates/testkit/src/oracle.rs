//! Brute-force reference versions of the corpus metrics.
//!
//! Written straight from the formulas: one explicit loop nest per metric and
//! per cell, word-level relations looked up directly in the parse. Nothing
//! here shares code with the accumulator in `headscope::metrics`.

use std::collections::{BTreeMap, BTreeSet};

use headscope::corpus::AlignedSentence;
use headscope::metrics::FilterPolicy;
use headscope::model::AttentionTensor;

pub type Cells = Vec<Vec<Option<f64>>>;

#[derive(Debug, Clone, Default)]
pub struct Naive {
    pub grids: BTreeMap<String, Cells>,
    pub null_average: f64,
    pub dep_type_by_layer: BTreeMap<String, Vec<Option<f64>>>,
    pub pair_fraction: Option<f64>,
    /// Index 0 is distance 1.
    pub p_dep: Vec<Option<f64>>,
    pub mean_span: Option<f64>,
    pub within_18: Option<f64>,
}

fn word(s: &AlignedSentence, i: usize) -> usize {
    s.piece_to_word[i]
}

/// 1 when the word of `parent` is the syntactic head of the word of `child`.
fn governs(s: &AlignedSentence, parent: usize, child: usize) -> bool {
    let (wp, wc) = (word(s, parent), word(s, child));
    wp != wc && s.sentence.words[wc].head == wp + 1
}

struct Ctx<'a> {
    corpus: &'a [AlignedSentence],
    attention: &'a [AttentionTensor],
    policy: FilterPolicy,
}

impl Ctx<'_> {
    fn skip(&self, j: usize) -> bool {
        self.policy.exclude_null_target && j == 0
    }

    /// sum(alpha * f) / sum(alpha) over filtered (i, j).
    fn weighted(&self, l: usize, h: usize, f: &dyn Fn(&AlignedSentence, usize, usize) -> f64) -> Option<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for (s, a) in self.corpus.iter().zip(self.attention) {
            for i in 0..s.len() {
                for j in 0..=i {
                    if self.skip(j) {
                        continue;
                    }
                    let w = a.weight(l, h, i, j) as f64;
                    num += w * f(s, i, j);
                    den += w;
                }
            }
        }
        if den > 0.0 {
            Some(num / den)
        } else {
            None
        }
    }

    fn entropy(&self, l: usize, h: usize) -> Option<f64> {
        let mut total = 0.0;
        let mut rows = 0usize;
        for (s, a) in self.corpus.iter().zip(self.attention) {
            for i in 0..s.len() {
                let null = a.weight(l, h, i, 0) as f64;
                if self.policy.exclude_null_target && null > self.policy.entropy_null_threshold {
                    continue;
                }
                let js: Vec<usize> = (0..=i).filter(|&j| !self.skip(j)).collect();
                let z: f64 = js.iter().map(|&j| a.weight(l, h, i, j) as f64).sum();
                if z <= 0.0 {
                    continue;
                }
                let z = if self.policy.entropy_renormalize { z } else { 1.0 };
                let mut e = 0.0;
                for &j in &js {
                    let p = a.weight(l, h, i, j) as f64 / z;
                    if p > 0.0 {
                        e += -p * p.ln();
                    }
                }
                total += e;
                rows += 1;
            }
        }
        if rows > 0 {
            Some(total / rows as f64)
        } else {
            None
        }
    }

    fn variability(&self, l: usize, h: usize) -> Option<f64> {
        let big_n = self.policy.variability_prefix_n;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..big_n {
            for j in 0..=i {
                if self.skip(j) {
                    continue;
                }
                let present: Vec<f64> = self
                    .corpus
                    .iter()
                    .zip(self.attention)
                    .filter(|(s, _)| s.len() > i)
                    .map(|(_, a)| a.weight(l, h, i, j) as f64)
                    .collect();
                if present.is_empty() {
                    continue;
                }
                let mean = present.iter().sum::<f64>() / present.len() as f64;
                for w in present {
                    num += (w - mean).abs();
                    den += w;
                }
            }
        }
        if den > 0.0 {
            Some(num / (2.0 * den))
        } else {
            None
        }
    }
}

pub fn naive(corpus: &[AlignedSentence], attention: &[AttentionTensor], n_layers: usize, n_heads: usize, policy: FilterPolicy) -> Naive {
    let ctx = Ctx { corpus, attention, policy };
    let grid =
        |f: &dyn Fn(usize, usize) -> Option<f64>| -> Cells { (0..n_layers).map(|l| (0..n_heads).map(|h| f(l, h)).collect()).collect() };
    let mut out = Naive::default();

    // Unfiltered share of attention on the first piece.
    let mut null_num = 0.0;
    let mut null_den = 0.0;
    let null = grid(&|l, h| {
        let mut num = 0.0;
        let mut den = 0.0;
        for (s, a) in corpus.iter().zip(attention) {
            for i in 0..s.len() {
                for j in 0..=i {
                    let w = a.weight(l, h, i, j) as f64;
                    den += w;
                    if j == 0 {
                        num += w;
                    }
                }
            }
        }
        (den > 0.0).then(|| num / den)
    });
    for (s, a) in corpus.iter().zip(attention) {
        for l in 0..n_layers {
            for h in 0..n_heads {
                for i in 0..s.len() {
                    for j in 0..=i {
                        let w = a.weight(l, h, i, j) as f64;
                        null_den += w;
                        if j == 0 {
                            null_num += w;
                        }
                    }
                }
            }
        }
    }
    out.null_average = null_num / null_den;
    out.grids.insert("null_attention".into(), null);

    let tags: BTreeSet<String> = corpus
        .iter()
        .flat_map(|s| s.sentence.words.iter().map(|w| w.upos.clone()))
        .collect();
    for tag in &tags {
        let to = grid(&|l, h| ctx.weighted(l, h, &|s, _i, j| f64::from(s.sentence.words[word(s, j)].upos == *tag)));
        let from = grid(&|l, h| ctx.weighted(l, h, &|s, i, _j| f64::from(s.sentence.words[word(s, i)].upos == *tag)));
        out.grids.insert(format!("pos_to.{tag}"), to);
        out.grids.insert(format!("pos_from.{tag}"), from);
    }

    out.grids.insert(
        "dependency_alignment.attending_parent".into(),
        grid(&|l, h| ctx.weighted(l, h, &|s, i, j| f64::from(governs(s, i, j)))),
    );
    out.grids.insert(
        "dependency_alignment.attended_parent".into(),
        grid(&|l, h| ctx.weighted(l, h, &|s, i, j| f64::from(governs(s, j, i)))),
    );
    out.grids.insert(
        "dependency_alignment.either".into(),
        grid(&|l, h| ctx.weighted(l, h, &|s, i, j| f64::from(governs(s, i, j) || governs(s, j, i)))),
    );
    out.grids
        .insert("mean_distance".into(), grid(&|l, h| ctx.weighted(l, h, &|_s, i, j| (i - j) as f64)));
    out.grids.insert("entropy".into(), grid(&|l, h| ctx.entropy(l, h)));
    out.grids.insert("variability".into(), grid(&|l, h| ctx.variability(l, h)));

    let labels: BTreeSet<String> = corpus
        .iter()
        .flat_map(|s| s.sentence.words.iter().map(|w| w.deprel.clone()))
        .collect();
    for label in &labels {
        let per_layer = (0..n_layers)
            .map(|l| {
                let vals: Vec<f64> = (0..n_heads)
                    .filter_map(|h| ctx.weighted(l, h, &|s, _i, j| f64::from(s.sentence.words[word(s, j)].deprel == *label)))
                    .collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect();
        out.dep_type_by_layer.insert(label.clone(), per_layer);
    }

    let related = |s: &AlignedSentence, i: usize, j: usize| governs(s, i, j) || governs(s, j, i);
    let (mut pairs, mut dep_pairs) = (0u64, 0u64);
    let mut at = [[0u64; 2]; 31];
    let (mut span, mut spans, mut within) = (0u64, 0u64, 0u64);
    for s in corpus {
        for i in 0..s.len() {
            for j in 0..i {
                let r = related(s, i, j);
                if j >= 1 {
                    pairs += 1;
                    dep_pairs += r as u64;
                }
                let d = i - j;
                if d <= 30 {
                    at[d][0] += 1;
                    at[d][1] += r as u64;
                }
                if r {
                    span += d as u64;
                    spans += 1;
                    within += (d <= 18) as u64;
                }
            }
        }
    }
    let frac = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
    out.pair_fraction = frac(dep_pairs, pairs);
    out.p_dep = (1..=30).map(|d| frac(at[d][1], at[d][0])).collect();
    out.mean_span = frac(span, spans);
    out.within_18 = frac(within, spans);
    out
}

fn check(out: &mut Vec<String>, what: String, got: Option<f64>, want: Option<f64>, tol: f64) {
    match (got, want) {
        (Some(g), Some(w)) if crate::rel_close(g, w, tol) => {}
        (None, None) => {}
        _ => out.push(format!("{what}: got {got:?}, want {want:?}")),
    }
}

/// Every disagreement between a report and the brute-force values.
pub fn mismatches(report: &headscope::metrics::Report, naive: &Naive, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    let grids = report.grids();
    for (name, cells) in &naive.grids {
        let Some(g) = grids.get(name.as_str()) else {
            out.push(format!("{name}: missing from report"));
            continue;
        };
        for (l, row) in cells.iter().enumerate() {
            for (h, want) in row.iter().enumerate() {
                check(&mut out, format!("{name}[{l}][{h}]"), g.get(l, h), *want, tol);
            }
        }
    }
    check(
        &mut out,
        "null_average".into(),
        report.null_attention_average,
        Some(naive.null_average),
        tol,
    );
    for (label, want) in &naive.dep_type_by_layer {
        match report.dep_type_by_layer.get(label) {
            Some(got) => {
                for (l, (g, w)) in got.iter().zip(want).enumerate() {
                    check(&mut out, format!("dep_type.{label}[{l}]"), *g, *w, tol);
                }
            }
            None => out.push(format!("dep_type.{label}: missing")),
        }
    }
    let b = &report.baseline;
    check(&mut out, "baseline.pair_fraction".into(), b.pair_fraction, naive.pair_fraction, tol);
    for (p, want) in b.by_distance.iter().zip(&naive.p_dep) {
        check(&mut out, format!("baseline.p_dep[{}]", p.distance), p.p_dep, *want, tol);
    }
    check(&mut out, "baseline.mean_span".into(), b.mean_span, naive.mean_span, tol);
    check(&mut out, "baseline.within_18".into(), b.within_span_limit, naive.within_18, tol);
    out
}

/// Exemplar ranking for one head: (sentence index, i, j, weight) of the top
/// `k` sentences, from a full stable sort of every sentence's best edge.
pub fn naive_exemplars(
    attention: &[AttentionTensor],
    layer: usize,
    head: usize,
    k: usize,
    policy: FilterPolicy,
) -> Vec<(usize, usize, usize, f32)> {
    let lo = usize::from(policy.exclude_null_target);
    let mut best: Vec<(usize, usize, usize, f32)> = attention
        .iter()
        .enumerate()
        .map(|(idx, a)| {
            let mut cands: Vec<(usize, usize, f32)> = Vec::new();
            for i in 0..a.seq_len() {
                for j in lo..=i {
                    cands.push((i, j, a.weight(layer, head, i, j)));
                }
            }
            let top = cands.iter().map(|c| c.2).fold(f32::NEG_INFINITY, f32::max);
            let (i, j, w) = cands
                .into_iter()
                .find(|c| c.2 == top)
                .unwrap_or((0, 0, a.weight(layer, head, 0, 0)));
            (idx, i, j, w)
        })
        .collect();
    best.sort_by(|a, b| b.3.partial_cmp(&a.3).unwrap());
    best.truncate(k);
    best
}
