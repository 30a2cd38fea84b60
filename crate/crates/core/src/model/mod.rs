//! Instrumented pre-norm decoder-only transformer.
//!
//! Each block is `h ← h + Attn(Norm(h))`, then `h ← h + MLP(Norm(h))`, with
//! rotary positions on queries and keys, a SiLU-gated MLP and no biases.
//! Hidden states are indexed by half-layer step: step `2l` is the input of
//! block `l` and step `2l + 1` the residual stream right after its attention.

mod backward;
mod checkpoint;
mod config;
mod forward;
mod loss;
mod rope;
mod weights;

pub use backward::{loss_and_grad, Sample};
pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, Manifest, OptimizerState, TensorEntry, FORMAT_VERSION,
};
pub use config::ModelConfig;
pub use forward::{attention_output_norms, forward, forward_batch, CaptureLevel, ForwardTrace, LayerStep};
pub use loss::{cross_entropy_loss, LossValue};
pub use rope::{rope_apply, rope_apply_inverse};
pub use weights::{LayerWeights, ModelWeights, TensorView, TensorViewMut};

#[inline]
pub(crate) fn sigmoid<T: crate::numerics::Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[inline]
pub(crate) fn silu<T: crate::numerics::Real>(x: T) -> T {
    x * sigmoid(x)
}
