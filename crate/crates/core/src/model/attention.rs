use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attention weights of one sentence, laid out `[layer][head][i][j]`.
/// Entries with `j > i` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTensor {
    n_layers: usize,
    n_heads: usize,
    seq_len: usize,
    data: Vec<f32>,
}

impl AttentionTensor {
    pub fn zeros(n_layers: usize, n_heads: usize, seq_len: usize) -> Self {
        Self {
            n_layers,
            n_heads,
            seq_len,
            data: vec![0.0; n_layers * n_heads * seq_len * seq_len],
        }
    }

    /// Wraps a dense `[layer][head][i][j]` buffer.
    pub fn from_dense(n_layers: usize, n_heads: usize, seq_len: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != n_layers * n_heads * seq_len * seq_len {
            return Err(Error::Integrity(format!(
                "{} values cannot fill a {n_layers}x{n_heads}x{seq_len}x{seq_len} attention tensor",
                data.len()
            )));
        }
        Ok(Self {
            n_layers,
            n_heads,
            seq_len,
            data,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_heads(&self) -> usize {
        self.n_heads
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    fn offset(&self, layer: usize, head: usize) -> usize {
        (layer * self.n_heads + head) * self.seq_len * self.seq_len
    }

    /// `seq_len x seq_len` matrix of one head.
    pub fn head(&self, layer: usize, head: usize) -> &[f32] {
        let o = self.offset(layer, head);
        &self.data[o..o + self.seq_len * self.seq_len]
    }

    pub fn head_mut(&mut self, layer: usize, head: usize) -> &mut [f32] {
        let o = self.offset(layer, head);
        let n = self.seq_len;
        &mut self.data[o..o + n * n]
    }

    /// Weights of attending position `i` over `j = 0..=i`.
    pub fn row(&self, layer: usize, head: usize, i: usize) -> &[f32] {
        let o = self.offset(layer, head) + i * self.seq_len;
        &self.data[o..=o + i]
    }

    pub fn weight(&self, layer: usize, head: usize, i: usize, j: usize) -> f32 {
        self.data[self.offset(layer, head) + i * self.seq_len + j]
    }

    pub fn as_dense(&self) -> &[f32] {
        &self.data
    }

    /// Rows restricted to the causal triangle, row-major, per head:
    /// `[layer][head][i][j <= i]`.
    pub fn to_packed(&self) -> Vec<f32> {
        let n = self.seq_len;
        let mut out = Vec::with_capacity(self.n_layers * self.n_heads * n * (n + 1) / 2);
        for l in 0..self.n_layers {
            for h in 0..self.n_heads {
                for i in 0..n {
                    out.extend_from_slice(self.row(l, h, i));
                }
            }
        }
        out
    }

    pub fn from_packed(n_layers: usize, n_heads: usize, seq_len: usize, packed: &[f32]) -> Result<Self> {
        let tri = seq_len * (seq_len + 1) / 2;
        if packed.len() != n_layers * n_heads * tri {
            return Err(Error::Integrity(format!(
                "packed attention has {} values, expected {}",
                packed.len(),
                n_layers * n_heads * tri
            )));
        }
        let mut t = Self::zeros(n_layers, n_heads, seq_len);
        let mut src = packed.iter();
        for l in 0..n_layers {
            for h in 0..n_heads {
                let m = t.head_mut(l, h);
                for i in 0..seq_len {
                    for j in 0..=i {
                        m[i * seq_len + j] = *src.next().expect("length checked");
                    }
                }
            }
        }
        Ok(t)
    }

    /// Checks causality, range and row normalisation (within `tol`).
    pub fn check(&self, tol: f32) -> Result<()> {
        let n = self.seq_len;
        for l in 0..self.n_layers {
            for h in 0..self.n_heads {
                let m = self.head(l, h);
                for i in 0..n {
                    let row = &m[i * n..(i + 1) * n];
                    if let Some(j) = (i + 1..n).find(|&j| row[j] != 0.0) {
                        return Err(Error::Integrity(format!(
                            "layer {l} head {h}: future position {j} has weight from {i}"
                        )));
                    }
                    if row.iter().any(|w| !(0.0..=1.0).contains(w)) {
                        return Err(Error::Integrity(format!("layer {l} head {h} row {i}: weight outside [0, 1]")));
                    }
                    let s: f32 = row.iter().sum();
                    if (s - 1.0).abs() > tol {
                        return Err(Error::Integrity(format!("layer {l} head {h} row {i}: weights sum to {s}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Query/key decomposition of one attention row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronDetail {
    pub layer: usize,
    pub head: usize,
    pub position: usize,
    pub query: Vec<f32>,
    /// One key per attended position `j <= position`.
    pub keys: Vec<Vec<f32>>,
    /// `query * keys[j]` element-wise.
    pub elementwise_products: Vec<Vec<f32>>,
    /// `sum(elementwise_products[j]) / sqrt(d_head)`.
    pub dot_products: Vec<f32>,
    pub softmax: Vec<f32>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_roundtrip() {
        let mut t = AttentionTensor::zeros(2, 3, 4);
        for l in 0..2 {
            for h in 0..3 {
                let m = t.head_mut(l, h);
                for i in 0..4 {
                    for j in 0..=i {
                        m[i * 4 + j] = (l * 100 + h * 10 + i + j) as f32;
                    }
                }
            }
        }
        let packed = t.to_packed();
        assert_eq!(packed.len(), 2 * 3 * 10);
        assert_eq!(AttentionTensor::from_packed(2, 3, 4, &packed).unwrap(), t);
        assert!(AttentionTensor::from_packed(2, 3, 4, &packed[1..]).is_err());
    }

    #[test]
    fn check_rejects_future_weight() {
        let mut t = AttentionTensor::zeros(1, 1, 2);
        t.head_mut(0, 0).copy_from_slice(&[0.5, 0.5, 0.0, 1.0]);
        assert!(t.check(1e-5).is_err());
        t.head_mut(0, 0).copy_from_slice(&[1.0, 0.0, 0.25, 0.75]);
        t.check(1e-5).unwrap();
    }
}
