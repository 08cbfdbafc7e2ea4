//! Minimal dense network with manual backpropagation, momentum SGD and the
//! 1cycle learning-rate schedule. Everything runs in `f64`.

mod checkpoint;
mod lr;
mod network;
mod sgd;
mod tensor;

pub use checkpoint::{Checkpoint, LayerParams};
pub use lr::LrSchedule;
pub use network::{Activation, DenseLayer, ForwardCache, Gradients, LayerGrad, Network};
pub use sgd::{SgdState, DEFAULT_MOMENTUM};
pub use tensor::Tensor2D;

pub(crate) use network::argmax;
