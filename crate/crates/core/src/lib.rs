//! Dynamic 3D facial expression synthesis.
//!
//! Given a neutral face mesh and a motion label (expression, onset/apex/offset
//! timestamps, intensity), a recurrent encoder turns the label signal into a
//! latent trajectory and a spiral-convolution mesh decoder maps every latent
//! frame to per-vertex displacements added onto the neutral face.
//!
//! Module map:
//!
//! - [`mesh`]: triangle meshes, OBJ/PLY, adjacency, edge-graph distances
//! - [`sampling`]: quadric decimation pyramid and barycentric up-sampling
//! - [`spiral`]: rings, disks and fixed-length spiral orderings
//! - [`autodiff`]: tape-based reverse mode over dense tensors, Adam
//! - [`layers`]: spiral convolution, unpooling, dense, LSTM cell
//! - [`data`]: motion labels, intensity scaling, synthetic and on-disk datasets
//! - [`model`]: the generator, its loss and the training loop
//! - [`eval`]: PCA blendshape baseline, metrics, classifier, interpolation
//! - [`pipeline`]: configuration and the command implementations behind the CLI

pub mod autodiff;
pub mod cache;
pub mod data;
pub mod error;
pub mod eval;
pub mod layers;
pub mod mesh;
pub mod model;
pub mod pipeline;
pub mod sampling;
pub mod spiral;

pub use error::{Error, Result};
