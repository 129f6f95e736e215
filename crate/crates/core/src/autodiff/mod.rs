//! Reverse-mode automatic differentiation over dense row-major tensors.
//!
//! A [`Graph`] evaluates eagerly and records each operation; [`Graph::backward`]
//! sweeps the tape once from a scalar output. Only the operations the model
//! needs are provided.

mod adam;
mod checkpoint;
mod denormal;
mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub(crate) use checkpoint::Reader;
pub use denormal::FlushDenormals;
pub use gradcheck::{check_gradients, relative_error, GradCheck, GradCheckConfig};
pub use graph::{softmax_rows, Gradients, Graph, Var};
pub use params::{ParamId, ParamStore};
pub use tensor::{Precision, Real, Tensor};
