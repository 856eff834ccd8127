//! Feed-forward networks with hand-written reverse-mode gradients.

mod adam;
mod matrix;
mod mlp;
mod normalize;

pub use adam::AdamState;
pub use matrix::Matrix;
pub use mlp::{soft_update, Activation, Mlp, MlpCache};
pub use normalize::Normalizer;
