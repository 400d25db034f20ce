//! Corpus-level attention statistics.

pub mod accumulate;
pub mod grid;
pub mod pearson;
pub mod policy;
pub mod report;

pub use accumulate::{row_entropy, Accumulator, Prefix, VariabilityAccumulator, VariabilityMeans};
pub use grid::HeadMetricGrid;
pub use pearson::{pearson, Correlation};
pub use policy::FilterPolicy;
pub use report::Report;

use crate::corpus::AlignedSentence;
use crate::error::{Error, Result};
use crate::exec::{map_chunks, Execution, DEFAULT_CHUNK};
use crate::model::AttentionTensor;

/// Both passes over sentences whose attention is already in memory.
pub fn analyze(
    exec: Execution,
    sentences: &[AlignedSentence],
    attention: &[AttentionTensor],
    n_layers: usize,
    n_heads: usize,
    policy: FilterPolicy,
    manifest_hash: &str,
) -> Result<Report> {
    policy.validate()?;
    if sentences.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    if sentences.len() != attention.len() {
        return Err(Error::Integrity(format!(
            "{} sentences but {} attention tensors",
            sentences.len(),
            attention.len()
        )));
    }
    let pairs: Vec<(&AlignedSentence, &AttentionTensor)> = sentences.iter().zip(attention).collect();
    let partials = map_chunks(exec, &pairs, DEFAULT_CHUNK, |_, chunk| {
        let mut acc = Accumulator::new(n_layers, n_heads, policy);
        for (s, a) in chunk {
            acc.add(s, a)?;
        }
        Ok::<_, Error>(acc)
    });
    let mut acc = Accumulator::new(n_layers, n_heads, policy);
    for p in partials {
        acc.merge(&p?);
    }
    let means = acc.variability_means()?;
    let var_parts = map_chunks(exec, attention, DEFAULT_CHUNK, |_, chunk| {
        let mut v = VariabilityAccumulator::new(n_layers * n_heads);
        for a in chunk {
            v.add(&means, &Prefix::of(a, policy.variability_prefix_n));
        }
        v
    });
    let mut var = VariabilityAccumulator::new(n_layers * n_heads);
    for v in &var_parts {
        var.merge(v);
    }
    Report::build(&acc, &var, manifest_hash)
}
