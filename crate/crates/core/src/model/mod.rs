//! GPT-2 decoder: weights, tensor archive format and the attention-capturing
//! forward pass.

pub mod archive;
mod attention;
mod config;
mod forward;
pub mod synthetic;
mod weights;

pub use archive::{Tensor, TensorArchive};
pub use attention::{AttentionTensor, NeuronDetail};
pub use config::ModelConfig;
pub use forward::{forward_attention, neuron_detail};
pub use weights::{required_tensors, Block, LayerNorm, Linear, WeightBundle};
