//! Deterministic synthetic weights.
//!
//! Every tensor is filled from a counter-based splitmix64 stream keyed by the
//! seed and the tensor name, so other implementations can regenerate the
//! exact same parameters (the reference-attention fixture script does).
//! Element `k` of tensor `name` is
//!
//! ```text
//! z = splitmix64_mix(seed ^ fnv1a64(name) + (k + 1) * 0x9E3779B97F4A7C15)
//! v = offset + scale * (2 * (z >> 40) / 2^24 - 1)      (all in f32)
//! ```
//!
//! Scales are chosen so attention is neither uniform nor one-hot.

use super::archive::{Tensor, TensorArchive};
use super::config::ModelConfig;
use super::weights::{required_tensors, WeightBundle};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// (offset, scale) for a tensor.
fn init_range(name: &str, d_model: usize) -> (f32, f32) {
    let root = (d_model as f32).sqrt();
    let is_norm = name.contains("ln_");
    match name {
        "wte.weight" => (0.0, 0.5),
        "wpe.weight" => (0.0, 0.2),
        n if is_norm && n.ends_with(".weight") => (1.0, 0.2),
        _ if is_norm => (0.0, 0.1),
        n if n.ends_with("attn.c_attn.weight") => (0.0, 3.0 / root),
        n if n.ends_with("attn.c_attn.bias") => (0.0, 0.1),
        n if n.ends_with("mlp.c_proj.weight") => (0.0, 1.0 / (2.0 * root)),
        n if n.ends_with(".weight") => (0.0, 1.0 / root),
        _ => (0.0, 0.05),
    }
}

pub fn seeded_values(seed: u64, name: &str, len: usize, offset: f32, scale: f32) -> Vec<f32> {
    let base = seed ^ fnv1a(name);
    (0..len as u64)
        .map(|k| {
            let z = mix(base.wrapping_add((k + 1).wrapping_mul(GOLDEN)));
            let unit = (z >> 40) as f32 / 16_777_216.0;
            offset + scale * (2.0 * unit - 1.0)
        })
        .collect()
}

/// Full weight archive for `config` generated from `seed`.
pub fn seeded_archive(config: ModelConfig, seed: u64) -> TensorArchive {
    let mut a = TensorArchive::default();
    for (name, shape) in required_tensors(&config) {
        let (offset, scale) = init_range(&name, config.d_model);
        let data = seeded_values(seed, &name, shape.iter().product(), offset, scale);
        a.insert(name, Tensor::new(shape, data));
    }
    a.metadata.insert("n_head".into(), config.n_heads.to_string());
    a
}

pub fn seeded_bundle(config: ModelConfig, seed: u64) -> WeightBundle {
    WeightBundle::from_archive(seeded_archive(config, seed), config).expect("generated archive matches its own config")
}

/// Two layers, four 8-wide heads, full GPT-2 vocabulary.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        n_layers: 2,
        n_heads: 4,
        d_model: 32,
        d_head: 8,
        n_ctx: 64,
        vocab_size: 50257,
        layer_norm_epsilon: 1e-5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = seeded_values(1, "x", 1000, 1.0, 0.2);
        assert_eq!(a, seeded_values(1, "x", 1000, 1.0, 0.2));
        assert_ne!(a, seeded_values(2, "x", 1000, 1.0, 0.2));
        assert!(a.iter().all(|v| (0.8..1.2).contains(v)));
    }

    #[test]
    fn known_stream_values() {
        // splitmix64 reference: first output for state 0 is 0xE220A8397B1DCDAF.
        assert_eq!(mix(GOLDEN), 0xE220_A839_7B1D_CDAF);
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a("a"), 0xaf63_dc4c_8601_ec8c);
    }
}
