//! Turns accumulated sums into grids, curves and correlations.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::accumulate::{Accumulator, VariabilityAccumulator, MAX_BASELINE_DISTANCE, SPAN_LIMIT};
use super::grid::HeadMetricGrid;
use super::pearson::{pearson, Correlation};
use super::policy::FilterPolicy;
use crate::corpus::{Formulation, UPOS_TAGS};
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub sentences: u64,
    pub pieces: u64,
    pub mean_pieces_per_sentence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistancePoint {
    pub distance: usize,
    pub pairs: u64,
    pub p_dep: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// Share of ordered pairs `1 <= j < i` standing in a dependency relation.
    pub pair_fraction: Option<f64>,
    /// P(dep | i - j = d) over all pairs `j < i`, d = 1..=30.
    pub by_distance: Vec<DistancePoint>,
    /// Mean `i - j` over dependent piece pairs.
    pub mean_span: Option<f64>,
    pub span_limit: usize,
    /// Share of dependent piece pairs with `i - j <= span_limit`.
    pub within_span_limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCorrelation {
    pub x: String,
    pub y: String,
    #[serde(flatten)]
    pub result: Option<Correlation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub manifest_hash: String,
    pub policy: FilterPolicy,
    /// Notes on reductions that the formulas leave open.
    pub conventions: BTreeMap<String, String>,
    pub corpus: CorpusSummary,
    pub null_attention: HeadMetricGrid,
    pub null_attention_average: Option<f64>,
    pub pos_to: BTreeMap<String, HeadMetricGrid>,
    pub pos_from: BTreeMap<String, HeadMetricGrid>,
    pub dependency_alignment: BTreeMap<String, HeadMetricGrid>,
    pub dependency_alignment_by_layer: BTreeMap<String, Vec<Option<f64>>>,
    pub baseline: Baseline,
    /// Label -> per-layer head-mean share of attention to pieces with that label.
    pub dep_type_by_layer: BTreeMap<String, Vec<Option<f64>>>,
    pub variability: HeadMetricGrid,
    pub mean_distance: HeadMetricGrid,
    pub mean_distance_by_layer: Vec<Option<f64>>,
    pub entropy: HeadMetricGrid,
    pub entropy_by_layer: Vec<Option<f64>>,
    pub correlations: Vec<NamedCorrelation>,
}

fn share(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn tag_grids(prefix: &str, acc: &Accumulator, sums: &BTreeMap<String, Vec<f64>>, manifest_hash: &str) -> BTreeMap<String, HeadMetricGrid> {
    let (nl, nh) = (acc.n_layers, acc.n_heads);
    let zeros = vec![0.0; acc.cells()];
    let mut out = BTreeMap::new();
    let names = UPOS_TAGS.iter().map(|t| t.to_string()).chain(sums.keys().cloned());
    for tag in names {
        if out.contains_key(&tag) {
            continue;
        }
        let num = sums.get(&tag).unwrap_or(&zeros);
        let mut g = HeadMetricGrid::ratio(format!("{prefix}.{tag}"), nl, nh, num, &acc.mass);
        g.metadata.insert("manifest_hash".into(), manifest_hash.into());
        if !sums.contains_key(&tag) {
            g.metadata.insert("absent".into(), "tag does not occur in the corpus".into());
            // A tag that never occurs takes no share at all.
            g.values.iter_mut().flatten().for_each(|v| *v = Some(0.0));
        }
        out.insert(tag, g);
    }
    out
}

fn correlate(x: &HeadMetricGrid, y: &HeadMetricGrid) -> NamedCorrelation {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for ((l, h), a) in x.cells() {
        if let Some(b) = y.get(l, h) {
            xs.push(a);
            ys.push(b);
        }
    }
    let (result, error) = match pearson(&xs, &ys) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    NamedCorrelation {
        x: x.metric.clone(),
        y: y.metric.clone(),
        result,
        error,
    }
}

impl Report {
    pub fn build(acc: &Accumulator, var: &VariabilityAccumulator, manifest_hash: &str) -> Result<Report> {
        if acc.sentences == 0 {
            return Err(Error::EmptyInput("corpus"));
        }
        let (nl, nh) = (acc.n_layers, acc.n_heads);
        let stamp = |mut g: HeadMetricGrid| {
            g.metadata.insert("manifest_hash".into(), manifest_hash.into());
            g.metadata
                .insert("exclude_null_target".into(), acc.policy.exclude_null_target.to_string());
            g
        };

        let null_attention = stamp(HeadMetricGrid::ratio("null_attention", nl, nh, &acc.null, &acc.total));
        let total: f64 = acc.total.iter().sum();
        let null_attention_average = (total > 0.0).then(|| acc.null.iter().sum::<f64>() / total);

        let mut dependency_alignment = BTreeMap::new();
        let mut dependency_alignment_by_layer = BTreeMap::new();
        for (k, f) in Formulation::ALL.iter().enumerate() {
            let g = stamp(HeadMetricGrid::ratio(
                format!("dependency_alignment.{}", f.name()),
                nl,
                nh,
                &acc.dep[k],
                &acc.mass,
            ));
            dependency_alignment_by_layer.insert(f.name().to_string(), g.layer_means());
            dependency_alignment.insert(f.name().to_string(), g);
        }

        let b = &acc.baseline;
        let baseline = Baseline {
            pair_fraction: share(b.dep_pairs, b.pairs),
            by_distance: (1..=MAX_BASELINE_DISTANCE)
                .map(|d| DistancePoint {
                    distance: d,
                    pairs: b.pairs_at[d],
                    p_dep: share(b.dep_pairs_at[d], b.pairs_at[d]),
                })
                .collect(),
            mean_span: share(b.span_sum, b.span_count),
            span_limit: SPAN_LIMIT,
            within_span_limit: share(b.within_limit, b.span_count),
        };

        let mut dep_type_by_layer = BTreeMap::new();
        for (label, sums) in &acc.deprel_to {
            let g = HeadMetricGrid::ratio("dep_type", nl, nh, sums, &acc.mass);
            dep_type_by_layer.insert(label.clone(), g.layer_means());
        }

        let variability = stamp(HeadMetricGrid::ratio(
            "variability",
            nl,
            nh,
            &var.deviation,
            &var.mass.iter().map(|m| 2.0 * m).collect::<Vec<_>>(),
        ));
        let mean_distance = stamp(HeadMetricGrid::ratio("mean_distance", nl, nh, &acc.distance, &acc.mass));
        let entropy = stamp(HeadMetricGrid::from_fn("entropy", nl, nh, |l, h| {
            let k = l * nh + h;
            (acc.entropy_rows[k] > 0).then(|| acc.entropy_sum[k] / acc.entropy_rows[k] as f64)
        }));

        let correlations = vec![
            correlate(&mean_distance, &entropy),
            correlate(&mean_distance, &dependency_alignment["either"]),
        ];

        let conventions = BTreeMap::from([
            ("entropy_log".to_string(), "natural".to_string()),
            (
                "entropy_pooling".to_string(),
                "mean over all retained rows of the corpus".to_string(),
            ),
            ("layer_pooling".to_string(), "unweighted mean over the layer's heads".to_string()),
            (
                "dep_type_normalization".to_string(),
                "share of filtered attention, so labels sum to 1 per head".to_string(),
            ),
            (
                "dependency_lift".to_string(),
                "every piece of a head word relates to every piece of its dependent".to_string(),
            ),
            (
                "baseline_by_distance_pairs".to_string(),
                "all ordered pairs j < i, including j = 0".to_string(),
            ),
            ("tokenization".to_string(), "sentence text verbatim, no prepended space".to_string()),
        ]);

        Ok(Report {
            schema_version: REPORT_SCHEMA_VERSION,
            manifest_hash: manifest_hash.to_string(),
            policy: acc.policy,
            conventions,
            corpus: CorpusSummary {
                sentences: acc.sentences,
                pieces: acc.pieces,
                mean_pieces_per_sentence: acc.pieces as f64 / acc.sentences as f64,
            },
            null_attention,
            null_attention_average,
            pos_to: tag_grids("pos_to", acc, &acc.pos_to, manifest_hash),
            pos_from: tag_grids("pos_from", acc, &acc.pos_from, manifest_hash),
            mean_distance_by_layer: mean_distance.layer_means(),
            entropy_by_layer: entropy.layer_means(),
            dependency_alignment,
            dependency_alignment_by_layer,
            baseline,
            dep_type_by_layer,
            variability,
            mean_distance,
            entropy,
            correlations,
        })
    }

    /// Every grid by its metric name (`null_attention`, `pos_to.NOUN`,
    /// `dependency_alignment.either`, ...).
    pub fn grids(&self) -> BTreeMap<&str, &HeadMetricGrid> {
        let mut out = BTreeMap::new();
        for g in [&self.null_attention, &self.variability, &self.mean_distance, &self.entropy]
            .into_iter()
            .chain(self.dependency_alignment.values())
            .chain(self.pos_to.values())
            .chain(self.pos_from.values())
        {
            out.insert(g.metric.as_str(), g);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Writes `report.json` and one CSV per grid into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: String, body: String| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(p, e))
        };
        put("report.json".into(), self.to_json())?;
        for (name, g) in self.grids() {
            let file: String = name
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
                .collect();
            put(format!("{file}.csv"), g.to_csv())?;
        }
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Report> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&raw)?)
    }
}
