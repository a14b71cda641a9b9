//! Online disentanglement of multi-party chat into conversation threads.
//!
//! Each incoming utterance points at one earlier utterance (or itself, to open
//! a thread) within a fixed window. Scores combine speaker/time/mention
//! features with a Bi-LSTM soft-alignment coherence between the two messages.

pub mod cli;
pub mod corpus;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod linker;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod objectives;
pub mod synth;
pub mod trainer;
pub mod union_find;

pub use corpus::{ChatFile, LinkAnnotation, Utterance};
pub use decoder::{decode_file, Session, Step};
pub use error::{Error, Result};
pub use metrics::{Clustering, MetricBundle};
pub use model::{Model, ModelConfig};
pub use trainer::{evaluate, tune_self_link_threshold, TrainConfig, TrainReport, Trainer};
