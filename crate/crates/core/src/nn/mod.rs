//! Dense tensors, a reverse-mode tape, the Bi-LSTM, Adam, gradient checks
//! and the checkpoint container.

pub mod adam;
pub mod align;
pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use gradcheck::{check_gradients, check_param_gradients, GradCheck};
pub use lstm::{BiLstm, LstmParams};
pub use params::{Gradients, ParamId, ParameterStore};
pub use tape::{Backward, NodeId, Tape};
pub use tensor::Tensor;
