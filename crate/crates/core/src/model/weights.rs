use std::path::Path;

use super::archive::{Tensor, TensorArchive};
use super::config::ModelConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

/// Conv1D-style projection: `y = x W + b` with `W` stored `[in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    pub d_in: usize,
    pub d_out: usize,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub ln_1: LayerNorm,
    pub attn_qkv: Linear,
    pub attn_proj: Linear,
    pub ln_2: LayerNorm,
    pub mlp_fc: Linear,
    pub mlp_proj: Linear,
}

/// All parameters of a GPT-2 decoder, shape-checked against its config.
#[derive(Debug, Clone)]
pub struct WeightBundle {
    pub config: ModelConfig,
    pub wte: Vec<f32>,
    pub wpe: Vec<f32>,
    pub blocks: Vec<Block>,
    pub ln_f: LayerNorm,
}

/// Every tensor name and shape a config requires, in the released
/// checkpoint's naming.
pub fn required_tensors(c: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let d = c.d_model;
    let mut out = vec![
        ("wte.weight".to_string(), vec![c.vocab_size, d]),
        ("wpe.weight".to_string(), vec![c.n_ctx, d]),
    ];
    for l in 0..c.n_layers {
        let p = |s: &str| format!("h.{l}.{s}");
        out.extend([
            (p("ln_1.weight"), vec![d]),
            (p("ln_1.bias"), vec![d]),
            (p("attn.c_attn.weight"), vec![d, 3 * d]),
            (p("attn.c_attn.bias"), vec![3 * d]),
            (p("attn.c_proj.weight"), vec![d, d]),
            (p("attn.c_proj.bias"), vec![d]),
            (p("ln_2.weight"), vec![d]),
            (p("ln_2.bias"), vec![d]),
            (p("mlp.c_fc.weight"), vec![d, 4 * d]),
            (p("mlp.c_fc.bias"), vec![4 * d]),
            (p("mlp.c_proj.weight"), vec![4 * d, d]),
            (p("mlp.c_proj.bias"), vec![d]),
        ]);
    }
    out.push(("ln_f.weight".to_string(), vec![d]));
    out.push(("ln_f.bias".to_string(), vec![d]));
    out
}

impl WeightBundle {
    /// Loads a tensor archive and checks it against `config`.
    pub fn load(path: impl AsRef<Path>, config: ModelConfig) -> Result<Self> {
        Self::from_archive(TensorArchive::read(path)?, config)
    }

    /// Builds a bundle from an archive. A `transformer.` name prefix is
    /// accepted; tensors the config does not need are ignored.
    pub fn from_archive(mut archive: TensorArchive, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let keys: Vec<String> = archive.tensors.keys().cloned().collect();
        for k in keys {
            if let Some(stripped) = k.strip_prefix("transformer.") {
                let t = archive.tensors.remove(&k).expect("key listed above");
                archive.tensors.insert(stripped.to_string(), t);
            }
        }
        for (name, shape) in required_tensors(&config) {
            match archive.tensors.get(&name) {
                None => return Err(Error::Integrity(format!("missing tensor `{name}`"))),
                Some(t) if t.shape != shape => {
                    return Err(Error::Integrity(format!(
                        "tensor `{name}` has shape {:?}, expected {shape:?}",
                        t.shape
                    )))
                }
                Some(_) => {}
            }
        }

        let mut take = |name: &str| archive.tensors.remove(name).expect("checked above").data;
        let d = config.d_model;
        let wte = take("wte.weight");
        let wpe = take("wpe.weight");
        let mut blocks = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let mut ln = |s: &str| LayerNorm {
                weight: take(&format!("h.{l}.{s}.weight")),
                bias: take(&format!("h.{l}.{s}.bias")),
            };
            let (ln_1, ln_2) = (ln("ln_1"), ln("ln_2"));
            let mut lin = |s: &str, d_in, d_out| Linear {
                weight: take(&format!("h.{l}.{s}.weight")),
                bias: take(&format!("h.{l}.{s}.bias")),
                d_in,
                d_out,
            };
            blocks.push(Block {
                ln_1,
                attn_qkv: lin("attn.c_attn", d, 3 * d),
                attn_proj: lin("attn.c_proj", d, d),
                ln_2,
                mlp_fc: lin("mlp.c_fc", d, 4 * d),
                mlp_proj: lin("mlp.c_proj", 4 * d, d),
            });
        }
        let ln_f = LayerNorm {
            weight: take("ln_f.weight"),
            bias: take("ln_f.bias"),
        };
        Ok(Self {
            config,
            wte,
            wpe,
            blocks,
            ln_f,
        })
    }

    /// Converts back into an archive with the released naming.
    pub fn to_archive(&self) -> TensorArchive {
        let c = &self.config;
        let d = c.d_model;
        let mut a = TensorArchive::default();
        a.insert("wte.weight", Tensor::new(vec![c.vocab_size, d], self.wte.clone()));
        a.insert("wpe.weight", Tensor::new(vec![c.n_ctx, d], self.wpe.clone()));
        for (l, b) in self.blocks.iter().enumerate() {
            let p = |s: &str| format!("h.{l}.{s}");
            a.insert(p("ln_1.weight"), Tensor::new(vec![d], b.ln_1.weight.clone()));
            a.insert(p("ln_1.bias"), Tensor::new(vec![d], b.ln_1.bias.clone()));
            a.insert(p("ln_2.weight"), Tensor::new(vec![d], b.ln_2.weight.clone()));
            a.insert(p("ln_2.bias"), Tensor::new(vec![d], b.ln_2.bias.clone()));
            for (name, lin) in [
                ("attn.c_attn", &b.attn_qkv),
                ("attn.c_proj", &b.attn_proj),
                ("mlp.c_fc", &b.mlp_fc),
                ("mlp.c_proj", &b.mlp_proj),
            ] {
                a.insert(
                    p(&format!("{name}.weight")),
                    Tensor::new(vec![lin.d_in, lin.d_out], lin.weight.clone()),
                );
                a.insert(p(&format!("{name}.bias")), Tensor::new(vec![lin.d_out], lin.bias.clone()));
            }
        }
        a.insert("ln_f.weight", Tensor::new(vec![d], self.ln_f.weight.clone()));
        a.insert("ln_f.bias", Tensor::new(vec![d], self.ln_f.bias.clone()));
        a.metadata.insert("n_head".into(), c.n_heads.to_string());
        a.metadata.insert("layer_norm_epsilon".into(), c.layer_norm_epsilon.to_string());
        a
    }
}
