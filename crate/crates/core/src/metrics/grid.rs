use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// One scalar per (layer, head). `None` marks an undefined cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadMetricGrid {
    pub metric: String,
    pub n_layers: usize,
    pub n_heads: usize,
    /// `values[layer][head]`
    pub values: Vec<Vec<Option<f64>>>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl HeadMetricGrid {
    pub fn from_fn(metric: impl Into<String>, n_layers: usize, n_heads: usize, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Self {
        Self {
            metric: metric.into(),
            n_layers,
            n_heads,
            values: (0..n_layers).map(|l| (0..n_heads).map(|h| f(l, h)).collect()).collect(),
            metadata: BTreeMap::new(),
        }
    }

    /// Cell-wise `num / den`, undefined where `den` is zero.
    pub fn ratio(metric: impl Into<String>, n_layers: usize, n_heads: usize, num: &[f64], den: &[f64]) -> Self {
        Self::from_fn(metric, n_layers, n_heads, |l, h| {
            let k = l * n_heads + h;
            (den[k] > 0.0).then(|| num[k] / den[k])
        })
    }

    pub fn get(&self, layer: usize, head: usize) -> Option<f64> {
        self.values[layer][head]
    }

    /// Defined cells as ((layer, head), value), row-major.
    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .flat_map(|(l, row)| row.iter().enumerate().filter_map(move |(h, v)| v.map(|v| ((l, h), v))))
    }

    /// Unweighted mean over each layer's defined heads.
    pub fn layer_means(&self) -> Vec<Option<f64>> {
        self.values
            .iter()
            .map(|row| {
                let vals: Vec<f64> = row.iter().flatten().copied().collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect()
    }

    /// Unweighted mean over all defined cells.
    pub fn mean(&self) -> Option<f64> {
        let (s, n) = self.cells().fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        (n > 0).then(|| s / n as f64)
    }

    /// Cell with the largest value; the first in row-major order wins ties.
    pub fn argmax(&self) -> Option<((usize, usize), f64)> {
        self.cells().fold(None, |best, c| match best {
            Some((_, b)) if c.1 <= b => best,
            _ => Some(c),
        })
    }

    pub fn argmin(&self) -> Option<((usize, usize), f64)> {
        self.cells().fold(None, |best, c| match best {
            Some((_, b)) if c.1 >= b => best,
            _ => Some(c),
        })
    }

    /// Rows are layers, columns heads; undefined cells are written `null`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer");
        for h in 0..self.n_heads {
            write!(out, ",head_{h}").unwrap();
        }
        out.push('\n');
        for (l, row) in self.values.iter().enumerate() {
            write!(out, "{l}").unwrap();
            for v in row {
                match v {
                    Some(v) => write!(out, ",{v}").unwrap(),
                    None => out.push_str(",null"),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_nulls() {
        let g = HeadMetricGrid::ratio("x", 2, 2, &[1.0, 0.0, 3.0, 1.0], &[2.0, 0.0, 4.0, 4.0]);
        assert_eq!(g.to_csv(), "layer,head_0,head_1\n0,0.5,null\n1,0.75,0.25\n");
        assert_eq!(g.layer_means(), vec![Some(0.5), Some(0.5)]);
        assert_eq!(g.argmax(), Some(((1, 0), 0.75)));
        assert_eq!(g.argmin(), Some(((1, 1), 0.25)));
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("[0.5,null]"));
    }
}
