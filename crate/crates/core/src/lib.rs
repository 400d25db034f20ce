pub mod corpus;
pub mod error;
pub mod exec;
pub mod exemplars;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod tokenizer;

pub use error::{Error, ErrorKind, Result};
