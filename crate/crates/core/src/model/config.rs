use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::archive::{Header, TensorArchive};
use crate::error::{Error, Result};

/// Decoder hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_head: usize,
    pub n_ctx: usize,
    pub vocab_size: usize,
    pub layer_norm_epsilon: f32,
}

impl ModelConfig {
    /// The released GPT-2 small configuration.
    pub fn gpt2_small() -> Self {
        Self {
            n_layers: 12,
            n_heads: 12,
            d_model: 768,
            d_head: 64,
            n_ctx: 1024,
            vocab_size: 50257,
            layer_norm_epsilon: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonzero = [
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_model", self.d_model),
            ("d_head", self.d_head),
            ("n_ctx", self.n_ctx),
            ("vocab_size", self.vocab_size),
        ];
        if let Some((field, _)) = nonzero.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(*field, "must be positive"));
        }
        if self.d_model != self.n_heads * self.d_head {
            return Err(Error::config(
                "d_model",
                format!("{} != n_heads ({}) x d_head ({})", self.d_model, self.n_heads, self.d_head),
            ));
        }
        if !(self.layer_norm_epsilon > 0.0 && self.layer_norm_epsilon.is_finite()) {
            return Err(Error::config("layer_norm_epsilon", "must be a small positive number"));
        }
        Ok(())
    }

    /// Reads the configuration implied by an archive: dimensions from tensor
    /// shapes, head count from the `n_head` metadata entry (GPT-2 uses 64-wide
    /// heads when it is absent).
    pub fn infer(archive: &TensorArchive) -> Result<Self> {
        Self::infer_from(
            |name| {
                archive
                    .get(name)
                    .or_else(|| archive.get(&format!("transformer.{name}")))
                    .map(|t| t.shape.clone())
            },
            &archive.metadata,
        )
    }

    /// Same as [`ModelConfig::infer`] from a header alone, without reading weights.
    pub fn infer_header(header: &Header) -> Result<Self> {
        let shapes: HashMap<&str, &Vec<usize>> = header.entries.iter().map(|e| (e.name.as_str(), &e.shape)).collect();
        Self::infer_from(
            |name| {
                shapes
                    .get(name)
                    .or_else(|| shapes.get(format!("transformer.{name}").as_str()))
                    .map(|s| s.to_vec())
            },
            &header.metadata,
        )
    }

    fn infer_from(shape_of: impl Fn(&str) -> Option<Vec<usize>>, metadata: &BTreeMap<String, String>) -> Result<Self> {
        let shape = |name: &str| shape_of(name).ok_or_else(|| Error::Integrity(format!("missing tensor `{name}`")));
        let wte = shape("wte.weight")?;
        let wpe = shape("wpe.weight")?;
        let (&[vocab_size, d_model], &[n_ctx, _]) = (wte.as_slice(), wpe.as_slice()) else {
            return Err(Error::Integrity("embedding tensors must be 2-dimensional".into()));
        };
        let n_layers = (0..).take_while(|l| shape_of(&format!("h.{l}.ln_1.weight")).is_some()).count();
        let meta = |key: &str| -> Result<Option<usize>> {
            metadata
                .get(key)
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::Integrity(format!("metadata `{key}` is not a count: {v:?}")))
                })
                .transpose()
        };
        let n_heads = meta("n_head")?.unwrap_or(d_model / 64);
        let eps = metadata.get("layer_norm_epsilon").and_then(|v| v.parse().ok()).unwrap_or(1e-5);
        let cfg = Self {
            n_layers,
            n_heads,
            d_model,
            d_head: d_model.checked_div(n_heads).unwrap_or(0),
            n_ctx,
            vocab_size,
            layer_norm_epsilon: eps,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
