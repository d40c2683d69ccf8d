//! Audio-visual separation network: dilated-convolution audio/visual streams
//! fused into a bidirectional LSTM that emits per-stream spectrogram masks,
//! with hand-rolled reverse-mode gradients, a PIT loss, and a binary
//! checkpoint format.

pub mod checkpoint;
pub mod error;
pub mod layers;
pub mod loss;
pub mod model;
pub mod topology;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, model_from_bytes, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use error::{NetError, Result};
pub use loss::{
    ordered_loss_head, pit_loss_head, pit_separation_loss, separation_loss, PERMUTATION_LIMIT,
    R_FLOOR,
};
pub use model::{AudioVisualModel, Gradients, MaskSet, ModelConfig, Tape, MAX_STREAMS};
pub use topology::{
    audio_stream_specs, receptive_context, visual_stream_specs, Activation, ContextRow, LayerSpec,
};
