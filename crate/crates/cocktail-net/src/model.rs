//! Model assembly: configuration, symmetric initialization, inference and
//! training forwards, and the full reverse-mode backward pass.
//!
//! # Architecture
//!
//! The compressed mixture spectrogram (real/imaginary planes) runs through a
//! dilated convolution stack; each speaker's face-embedding stream runs
//! through a shared 1-D convolution stack and is upsampled 4x to the
//! spectrogram frame rate.  Per-frame features are concatenated, fused by a
//! bidirectional LSTM and three dense layers, and split into one sigmoid
//! mask per speaker stream (plus an optional trailing noise mask).
//!
//! # Stream symmetry
//!
//! The visual stack is a single parameter set applied to every stream, the
//! fusion weights of every visual slot start as copies of the first slot,
//! and the dense-head rows of every speaker mask start as copies of the
//! first head.  A freshly initialized model therefore commutes with
//! permutations of its visual inputs; training breaks the tie because each
//! slot sees different gradients.

use ndarray::{s, Array2, Array3, ArrayD, ArrayViewD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use cocktail_dsp::embed::{EmbeddingStream, EMBEDDING_FPS};
use cocktail_dsp::mask::{MaskKind, TFMask};
use cocktail_dsp::spectral::ComplexSpectrogram;
use cocktail_dsp::DspError;

use crate::error::{NetError, Result};
use crate::layers::{
    relu_backward, relu_forward, sigmoid_backward, sigmoid_forward, upsample4_fit,
    upsample4_fit_backward, BatchNorm, Blstm, BlstmCache, BnCache, BnGrads, BnStats, Conv2d,
    Conv2dGrads, Dense,
};
use crate::topology::{audio_stream_specs, visual_stream_specs, Activation, LayerSpec};

/// Most streams a model may separate; the PIT loss enumerates stream
/// permutations, so this also bounds the factorial search.
pub const MAX_STREAMS: usize = 3;

/// serde bridge for the mask family (the kind lives in the signal crate,
/// which carries no serializer dependency).
mod mask_kind_serde {
    use super::MaskKind;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(kind: &MaskKind, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(match kind {
            MaskKind::Ratio => "ratio",
            MaskKind::ComplexRatio => "complex-ratio",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<MaskKind, D::Error> {
        match String::deserialize(de)?.as_str() {
            "ratio" => Ok(MaskKind::Ratio),
            "complex-ratio" => Ok(MaskKind::ComplexRatio),
            other => Err(D::Error::custom(format!("unknown mask kind `{other}`"))),
        }
    }
}

/// Everything needed to rebuild a model skeleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub audio_layers: Vec<LayerSpec>,
    pub visual_layers: Vec<LayerSpec>,
    /// Separated speaker streams (1 to [`MAX_STREAMS`]).
    pub n_speaker_streams: usize,
    #[serde(with = "mask_kind_serde")]
    pub mask_kind: MaskKind,
    /// Emit a trailing mask for the non-speech residual.
    pub predicts_noise_mask: bool,
    /// Drop the visual streams entirely (the permutation-invariant
    /// baseline): the fusion input is the audio stack alone and the model
    /// takes no embeddings.
    #[serde(default)]
    pub audio_only: bool,
    pub blstm_hidden: usize,
    /// Dense fusion sizes; the last entry must equal
    /// [`head_dim`](Self::head_dim).
    pub fc_sizes: [usize; 3],
    pub embed_dim: usize,
    pub n_freq: usize,
}

impl ModelConfig {
    /// Full-scale profile: reference-width streams, 400-unit BLSTM,
    /// 257-bin spectrograms, 1024-dim embeddings.
    pub fn paper(n_speaker_streams: usize, predicts_noise_mask: bool) -> Self {
        Self::with_scale(1.0, 400, 400, 257, 1024, n_speaker_streams, predicts_noise_mask)
    }

    /// Desk profile: quarter-width streams, 64-unit BLSTM, 49-bin
    /// spectrograms, 64-dim embeddings.
    pub fn desk(n_speaker_streams: usize, predicts_noise_mask: bool) -> Self {
        Self::with_scale(0.25, 64, 64, 49, 64, n_speaker_streams, predicts_noise_mask)
    }

    /// Audio-only variant of [`paper`](Self::paper): same audio stream,
    /// BLSTM, and head; no visual streams.
    pub fn paper_audio_only(n_speaker_streams: usize, predicts_noise_mask: bool) -> Self {
        Self::paper(n_speaker_streams, predicts_noise_mask).strip_visual()
    }

    /// Audio-only variant of [`desk`](Self::desk).
    pub fn desk_audio_only(n_speaker_streams: usize, predicts_noise_mask: bool) -> Self {
        Self::desk(n_speaker_streams, predicts_noise_mask).strip_visual()
    }

    /// Audio-only variant of [`micro`](Self::micro).
    pub fn micro_audio_only() -> Self {
        Self::micro().strip_visual()
    }

    fn strip_visual(mut self) -> Self {
        self.visual_layers.clear();
        self.embed_dim = 0;
        self.audio_only = true;
        self
    }

    fn with_scale(
        width_scale: f64,
        blstm_hidden: usize,
        fc_width: usize,
        n_freq: usize,
        embed_dim: usize,
        n_speaker_streams: usize,
        predicts_noise_mask: bool,
    ) -> Self {
        let mut cfg = ModelConfig {
            audio_layers: audio_stream_specs(width_scale),
            visual_layers: visual_stream_specs(width_scale),
            n_speaker_streams,
            mask_kind: MaskKind::ComplexRatio,
            predicts_noise_mask,
            audio_only: false,
            blstm_hidden,
            fc_sizes: [fc_width, fc_width, 0],
            embed_dim,
            n_freq,
        };
        cfg.fc_sizes[2] = cfg.head_dim();
        cfg
    }

    /// Toy profile small enough for exhaustive finite-difference checks:
    /// two convolutions per stream, 5 bins, 3-dim embeddings.
    pub fn micro() -> Self {
        let conv = |filters, kernel, dilation| LayerSpec {
            filters,
            kernel,
            dilation,
            has_batchnorm: true,
            activation: Activation::Relu,
        };
        let mut cfg = ModelConfig {
            audio_layers: vec![conv(4, (3, 3), (1, 1)), conv(3, (3, 3), (2, 1))],
            visual_layers: vec![conv(4, (3, 1), (1, 1)), conv(4, (3, 1), (2, 1))],
            n_speaker_streams: 2,
            mask_kind: MaskKind::ComplexRatio,
            predicts_noise_mask: true,
            audio_only: false,
            blstm_hidden: 3,
            fc_sizes: [6, 6, 0],
            embed_dim: 3,
            n_freq: 5,
        };
        cfg.fc_sizes[2] = cfg.head_dim();
        cfg
    }

    /// Total output masks (speaker streams plus the optional noise mask).
    pub fn n_masks(&self) -> usize {
        self.n_speaker_streams + usize::from(self.predicts_noise_mask)
    }

    /// Width of the final dense layer: one sigmoid plane set per mask.
    pub fn head_dim(&self) -> usize {
        self.n_masks() * self.n_freq * self.mask_kind.planes()
    }

    /// Visual input streams the model expects (zero for the audio-only
    /// baseline; otherwise one per speaker stream).
    pub fn n_visual_streams(&self) -> usize {
        if self.audio_only {
            0
        } else {
            self.n_speaker_streams
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_speaker_streams == 0 || self.n_speaker_streams > MAX_STREAMS {
            return Err(NetError::InvalidConfig(format!(
                "speaker streams must lie in 1..={MAX_STREAMS}, got {}",
                self.n_speaker_streams
            )));
        }
        if self.audio_layers.is_empty() || (!self.audio_only && self.visual_layers.is_empty()) {
            return Err(NetError::InvalidConfig("empty convolution stack".into()));
        }
        if self.audio_only && !self.visual_layers.is_empty() {
            return Err(NetError::InvalidConfig(
                "audio-only profile must not carry visual layers".into(),
            ));
        }
        if self.fc_sizes[2] != self.head_dim() {
            return Err(NetError::InvalidConfig(format!(
                "final dense size {} does not match the mask head ({} masks x {} bins x {} planes)",
                self.fc_sizes[2],
                self.n_masks(),
                self.n_freq,
                self.mask_kind.planes()
            )));
        }
        if self.n_freq == 0 || self.blstm_hidden == 0 {
            return Err(NetError::InvalidConfig("zero-sized model dimension".into()));
        }
        if (self.embed_dim == 0) != self.audio_only {
            return Err(NetError::InvalidConfig(
                "embedding width must be zero exactly for the audio-only profile".into(),
            ));
        }
        Ok(())
    }
}

/// One convolution block: conv, then optional batch norm, then activation.
#[derive(Debug, Clone)]
struct ConvBlock {
    conv: Conv2d,
    bn: Option<BatchNorm>,
    act: Activation,
}

impl ConvBlock {
    fn new(in_c: usize, spec: &LayerSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(ConvBlock {
            conv: Conv2d::new(in_c, spec, rng)?,
            bn: spec.has_batchnorm.then(|| BatchNorm::new(spec.filters)),
            act: spec.activation,
        })
    }
}

/// The separation network with explicit parameters.
#[derive(Debug, Clone)]
pub struct AudioVisualModel {
    pub config: ModelConfig,
    audio: Vec<ConvBlock>,
    /// One parameter set shared by every visual stream.
    visual: Vec<ConvBlock>,
    blstm: Blstm,
    fc1: Dense,
    fc2: Dense,
    fc3: Dense,
}

/// Speaker masks in stream order plus the optional noise mask; all sigmoid
/// compressed.
#[derive(Debug)]
pub struct MaskSet {
    pub speakers: Vec<TFMask>,
    pub noise: Option<TFMask>,
}

impl MaskSet {
    /// Masks in head order: speakers first, noise last.
    pub fn all(&self) -> Vec<&TFMask> {
        self.speakers.iter().chain(self.noise.iter()).collect()
    }
}

/// Recorded activations of one conv stack pass.
struct StackTape {
    /// `inputs[i]` feeds block `i`; the final entry is the stack output.
    inputs: Vec<Array3<f64>>,
    bn: Vec<Option<BnCache>>,
    stats: Vec<Option<BnStats>>,
}

/// Recorded activations of one training forward; feed back to
/// [`AudioVisualModel::backward`].
pub struct Tape {
    audio: StackTape,
    visual: Vec<StackTape>,
    fused: Array2<f64>,
    blstm_cache: BlstmCache,
    blstm_out: Array2<f64>,
    fc1_out: Array2<f64>,
    fc2_out: Array2<f64>,
    /// Pre-sigmoid head `[frames, head_dim]`; the loss differentiates
    /// against this directly.
    pub u: Array2<f64>,
}

/// Named parameter gradients in traversal order (see
/// [`AudioVisualModel::visit_params`]).
pub type Gradients = Vec<(String, ArrayD<f64>)>;

struct BlockGrads {
    conv: Conv2dGrads,
    bn: Option<BnGrads>,
}

impl BlockGrads {
    fn add_assign(&mut self, other: &BlockGrads) {
        self.conv.dw += &other.conv.dw;
        self.conv.db += &other.conv.db;
        if let (Some(a), Some(b)) = (self.bn.as_mut(), other.bn.as_ref()) {
            a.dgamma += &b.dgamma;
            a.dbeta += &b.dbeta;
        }
    }
}

impl AudioVisualModel {
    /// Audio-stream output channels.
    fn audio_channels(&self) -> usize {
        self.audio.last().expect("validated").conv.out_c()
    }

    /// Visual-stream output channels (zero for the audio-only baseline).
    fn visual_channels(&self) -> usize {
        self.visual.last().map(|b| b.conv.out_c()).unwrap_or(0)
    }

    /// Per-frame fusion width: flattened audio bins plus one visual block
    /// per stream.
    fn fusion_dim(&self) -> usize {
        self.config.n_freq * self.audio_channels()
            + self.config.n_visual_streams() * self.visual_channels()
    }

    /// Build a model with seeded initialization.
    ///
    /// Weights draw from a fan-in-scaled uniform distribution in a fixed
    /// traversal order, then the stream-symmetric blocks (visual fusion
    /// columns, speaker head rows) are tied by copying the first slot.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut audio = Vec::new();
        let mut in_c = 2;
        for spec in &config.audio_layers {
            audio.push(ConvBlock::new(in_c, spec, &mut rng)?);
            in_c = spec.filters;
        }
        let mut visual = Vec::new();
        in_c = config.embed_dim;
        for spec in &config.visual_layers {
            visual.push(ConvBlock::new(in_c, spec, &mut rng)?);
            in_c = spec.filters;
        }
        let audio_c = audio.last().expect("non-empty").conv.out_c();
        let visual_c = visual.last().map(|b| b.conv.out_c()).unwrap_or(0);
        let fusion = config.n_freq * audio_c + config.n_visual_streams() * visual_c;
        let blstm = Blstm::new(fusion, config.blstm_hidden, &mut rng);
        let fc1 = Dense::new(2 * config.blstm_hidden, config.fc_sizes[0], &mut rng);
        let fc2 = Dense::new(config.fc_sizes[0], config.fc_sizes[1], &mut rng);
        let fc3 = Dense::new(config.fc_sizes[1], config.fc_sizes[2], &mut rng);
        let mut model = AudioVisualModel {
            config,
            audio,
            visual,
            blstm,
            fc1,
            fc2,
            fc3,
        };
        model.tie_streams();
        Ok(model)
    }

    /// Copy the first visual fusion slot over the others and the first
    /// speaker head over the other speaker heads (the noise head stays
    /// independent).
    fn tie_streams(&mut self) {
        let cfg = &self.config;
        let vis_c = self.visual_channels();
        let audio_flat = cfg.n_freq * self.audio_channels();
        for dir in [&mut self.blstm.fwd, &mut self.blstm.bwd] {
            let first = dir
                .w_ih
                .slice(s![.., audio_flat..audio_flat + vis_c])
                .to_owned();
            for slot in 1..cfg.n_speaker_streams {
                let start = audio_flat + slot * vis_c;
                dir.w_ih
                    .slice_mut(s![.., start..start + vis_c])
                    .assign(&first);
            }
        }
        let head = cfg.n_freq * cfg.mask_kind.planes();
        let first = self.fc3.w.slice(s![..head, ..]).to_owned();
        for stream in 1..cfg.n_speaker_streams {
            let start = stream * head;
            self.fc3
                .w
                .slice_mut(s![start..start + head, ..])
                .assign(&first);
        }
    }

    // -- parameter traversal -------------------------------------------------

    /// Visit every trainable parameter in a fixed order (audio blocks,
    /// visual blocks, BLSTM directions, dense layers).  Gradient vectors and
    /// optimizer state index into this order.
    pub fn visit_params(&self, f: &mut dyn FnMut(&str, ArrayViewD<f64>)) {
        for (i, b) in self.audio.iter().enumerate() {
            f(&format!("audio{i}.conv.w"), b.conv.w.view().into_dyn());
            f(&format!("audio{i}.conv.b"), b.conv.b.view().into_dyn());
            if let Some(bn) = &b.bn {
                f(&format!("audio{i}.bn.gamma"), bn.gamma.view().into_dyn());
                f(&format!("audio{i}.bn.beta"), bn.beta.view().into_dyn());
            }
        }
        for (i, b) in self.visual.iter().enumerate() {
            f(&format!("visual{i}.conv.w"), b.conv.w.view().into_dyn());
            f(&format!("visual{i}.conv.b"), b.conv.b.view().into_dyn());
            if let Some(bn) = &b.bn {
                f(&format!("visual{i}.bn.gamma"), bn.gamma.view().into_dyn());
                f(&format!("visual{i}.bn.beta"), bn.beta.view().into_dyn());
            }
        }
        for (name, dir) in [("fwd", &self.blstm.fwd), ("bwd", &self.blstm.bwd)] {
            f(&format!("blstm.{name}.w_ih"), dir.w_ih.view().into_dyn());
            f(&format!("blstm.{name}.w_hh"), dir.w_hh.view().into_dyn());
            f(&format!("blstm.{name}.b"), dir.b.view().into_dyn());
        }
        for (name, d) in [("fc1", &self.fc1), ("fc2", &self.fc2), ("fc3", &self.fc3)] {
            f(&format!("{name}.w"), d.w.view().into_dyn());
            f(&format!("{name}.b"), d.b.view().into_dyn());
        }
    }

    /// Mutable variant of [`visit_params`](Self::visit_params); same order.
    pub fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<f64>)) {
        for (i, b) in self.audio.iter_mut().enumerate() {
            f(&format!("audio{i}.conv.w"), b.conv.w.view_mut().into_dyn());
            f(&format!("audio{i}.conv.b"), b.conv.b.view_mut().into_dyn());
            if let Some(bn) = &mut b.bn {
                f(&format!("audio{i}.bn.gamma"), bn.gamma.view_mut().into_dyn());
                f(&format!("audio{i}.bn.beta"), bn.beta.view_mut().into_dyn());
            }
        }
        for (i, b) in self.visual.iter_mut().enumerate() {
            f(&format!("visual{i}.conv.w"), b.conv.w.view_mut().into_dyn());
            f(&format!("visual{i}.conv.b"), b.conv.b.view_mut().into_dyn());
            if let Some(bn) = &mut b.bn {
                f(&format!("visual{i}.bn.gamma"), bn.gamma.view_mut().into_dyn());
                f(&format!("visual{i}.bn.beta"), bn.beta.view_mut().into_dyn());
            }
        }
        for (name, dir) in [("fwd", &mut self.blstm.fwd), ("bwd", &mut self.blstm.bwd)] {
            f(&format!("blstm.{name}.w_ih"), dir.w_ih.view_mut().into_dyn());
            f(&format!("blstm.{name}.w_hh"), dir.w_hh.view_mut().into_dyn());
            f(&format!("blstm.{name}.b"), dir.b.view_mut().into_dyn());
        }
        for (name, d) in [
            ("fc1", &mut self.fc1),
            ("fc2", &mut self.fc2),
            ("fc3", &mut self.fc3),
        ] {
            f(&format!("{name}.w"), d.w.view_mut().into_dyn());
            f(&format!("{name}.b"), d.b.view_mut().into_dyn());
        }
    }

    /// Visit the non-trainable state (batch-norm running averages) in a
    /// fixed order, for checkpointing.
    pub fn visit_buffers(&self, f: &mut dyn FnMut(&str, ArrayViewD<f64>)) {
        for (prefix, blocks) in [("audio", &self.audio), ("visual", &self.visual)] {
            for (i, b) in blocks.iter().enumerate() {
                if let Some(bn) = &b.bn {
                    f(
                        &format!("{prefix}{i}.bn.running_mean"),
                        bn.running_mean.view().into_dyn(),
                    );
                    f(
                        &format!("{prefix}{i}.bn.running_var"),
                        bn.running_var.view().into_dyn(),
                    );
                }
            }
        }
    }

    /// Mutable variant of [`visit_buffers`](Self::visit_buffers).
    pub fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&str, ArrayViewMutD<f64>)) {
        for (prefix, blocks) in [("audio", &mut self.audio), ("visual", &mut self.visual)] {
            for (i, b) in blocks.iter_mut().enumerate() {
                if let Some(bn) = &mut b.bn {
                    f(
                        &format!("{prefix}{i}.bn.running_mean"),
                        bn.running_mean.view_mut().into_dyn(),
                    );
                    f(
                        &format!("{prefix}{i}.bn.running_var"),
                        bn.running_var.view_mut().into_dyn(),
                    );
                }
            }
        }
    }

    /// Total trainable scalar count.
    pub fn n_params(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.len());
        n
    }

    // -- input preparation ---------------------------------------------------

    fn prep_inputs(
        &self,
        spec: &ComplexSpectrogram,
        embeddings: &[EmbeddingStream],
    ) -> Result<(Array3<f64>, Vec<Array3<f64>>)> {
        if !spec.compressed {
            return Err(NetError::Dsp(DspError::CompressionState { expected: true }));
        }
        if spec.n_freq() != self.config.n_freq {
            return Err(NetError::CountMismatch {
                context: "frequency bins",
                need: self.config.n_freq,
                got: spec.n_freq(),
            });
        }
        if embeddings.len() != self.config.n_visual_streams() {
            return Err(NetError::StreamCount {
                need: self.config.n_visual_streams(),
                got: embeddings.len(),
            });
        }
        let t_len = spec.n_frames();
        let mut vis_inputs = Vec::with_capacity(embeddings.len());
        for e in embeddings {
            if e.fps != EMBEDDING_FPS {
                return Err(NetError::EmbeddingFps {
                    need: EMBEDDING_FPS,
                    got: e.fps,
                });
            }
            if e.dim() != self.config.embed_dim {
                return Err(NetError::CountMismatch {
                    context: "embedding dimension",
                    need: self.config.embed_dim,
                    got: e.dim(),
                });
            }
            // Fail early if the upsampled stream cannot cover the clip.
            let up = 4 * e.n_frames();
            if up.abs_diff(t_len) > 2 {
                return Err(NetError::FrameMismatch {
                    audio: t_len,
                    visual: up,
                });
            }
            let mut x = Array3::zeros((e.n_frames(), 1, e.dim()));
            for (t, row) in e.data.rows().into_iter().enumerate() {
                for (d, &v) in row.iter().enumerate() {
                    x[(t, 0, d)] = v as f64;
                }
            }
            vis_inputs.push(x);
        }
        let (t, f) = spec.data.dim();
        let mut x_a = Array3::zeros((t, f, 2));
        for ((ti, fi), z) in spec.data.indexed_iter() {
            x_a[(ti, fi, 0)] = z.re;
            x_a[(ti, fi, 1)] = z.im;
        }
        Ok((x_a, vis_inputs))
    }

    // -- forward passes ------------------------------------------------------

    fn run_stack_infer(blocks: &[ConvBlock], mut x: Array3<f64>) -> Array3<f64> {
        for b in blocks {
            x = b.conv.forward(&x);
            if let Some(bn) = &b.bn {
                x = bn.forward_infer(&x);
            }
            match b.act {
                Activation::Relu => relu_forward(&mut x),
                Activation::Sigmoid => sigmoid_forward(&mut x),
                Activation::None => {}
            }
        }
        x
    }

    fn run_stack_train(blocks: &[ConvBlock], x: Array3<f64>) -> StackTape {
        let mut inputs = vec![x];
        let mut bn_caches = Vec::with_capacity(blocks.len());
        let mut stats = Vec::with_capacity(blocks.len());
        for b in blocks {
            let mut y = b.conv.forward(inputs.last().expect("seeded"));
            if let Some(bn) = &b.bn {
                let (y2, cache, st) = bn.forward_train(&y);
                y = y2;
                bn_caches.push(Some(cache));
                stats.push(Some(st));
            } else {
                bn_caches.push(None);
                stats.push(None);
            }
            match b.act {
                Activation::Relu => relu_forward(&mut y),
                Activation::Sigmoid => sigmoid_forward(&mut y),
                Activation::None => {}
            }
            inputs.push(y);
        }
        StackTape {
            inputs,
            bn: bn_caches,
            stats,
        }
    }

    /// Concatenate flattened audio features with every visual stream,
    /// per frame.
    fn fuse(&self, audio_out: &Array3<f64>, vis_up: &[Array2<f64>]) -> Array2<f64> {
        let (t_len, f_len, c_len) = audio_out.dim();
        let audio_flat = audio_out
            .view()
            .into_shape_with_order((t_len, f_len * c_len))
            .expect("contiguous");
        let mut fused = Array2::zeros((t_len, self.fusion_dim()));
        fused
            .slice_mut(s![.., ..f_len * c_len])
            .assign(&audio_flat);
        let mut offset = f_len * c_len;
        for v in vis_up {
            fused
                .slice_mut(s![.., offset..offset + v.ncols()])
                .assign(v);
            offset += v.ncols();
        }
        fused
    }

    /// Split the head output into per-mask sigmoid-compressed grids.
    fn masks_from_head(&self, u: &Array2<f64>) -> MaskSet {
        let cfg = &self.config;
        let t_len = u.nrows();
        let planes = cfg.mask_kind.planes();
        let per_head = cfg.n_freq * planes;
        let mut heads = Vec::with_capacity(cfg.n_masks());
        for h in 0..cfg.n_masks() {
            let mut grid = u
                .slice(s![.., h * per_head..(h + 1) * per_head])
                .to_owned()
                .into_shape_with_order((t_len, cfg.n_freq, planes))
                .expect("head shape");
            sigmoid_forward(&mut grid);
            heads.push(TFMask {
                kind: cfg.mask_kind,
                planes: grid,
                compressed: true,
            });
        }
        let noise = cfg.predicts_noise_mask.then(|| heads.pop().expect("head"));
        MaskSet {
            speakers: heads,
            noise,
        }
    }

    /// Inference forward: batch-norm running averages, no recording.
    pub fn forward(
        &self,
        spec: &ComplexSpectrogram,
        embeddings: &[EmbeddingStream],
    ) -> Result<MaskSet> {
        let (x_a, vis_inputs) = self.prep_inputs(spec, embeddings)?;
        let t_len = x_a.dim().0;
        let audio_out = Self::run_stack_infer(&self.audio, x_a);
        let mut vis_up = Vec::with_capacity(vis_inputs.len());
        for v in vis_inputs {
            let out = Self::run_stack_infer(&self.visual, v);
            let (tv, _, c) = out.dim();
            let flat = out
                .into_shape_with_order((tv, c))
                .expect("unit frequency axis");
            vis_up.push(upsample4_fit(&flat, t_len)?);
        }
        let fused = self.fuse(&audio_out, &vis_up);
        let (blstm_out, _) = self.blstm.forward(&fused);
        let mut h1 = self.fc1.forward(&blstm_out);
        relu_forward(&mut h1);
        let mut h2 = self.fc2.forward(&h1);
        relu_forward(&mut h2);
        let u = self.fc3.forward(&h2);
        Ok(self.masks_from_head(&u))
    }

    /// Training forward: per-sample batch-norm statistics, full activation
    /// recording.  The model itself is not mutated; fold the observed
    /// statistics in afterwards with
    /// [`update_running_stats`](Self::update_running_stats).
    pub fn forward_training(
        &self,
        spec: &ComplexSpectrogram,
        embeddings: &[EmbeddingStream],
    ) -> Result<(MaskSet, Tape)> {
        let (x_a, vis_inputs) = self.prep_inputs(spec, embeddings)?;
        let t_len = x_a.dim().0;
        let audio_tape = Self::run_stack_train(&self.audio, x_a);
        let mut visual_tapes = Vec::with_capacity(vis_inputs.len());
        let mut vis_up = Vec::with_capacity(vis_inputs.len());
        for v in vis_inputs {
            let tape = Self::run_stack_train(&self.visual, v);
            let out = tape.inputs.last().expect("non-empty stack");
            let (tv, _, c) = out.dim();
            let flat = out
                .view()
                .into_shape_with_order((tv, c))
                .expect("unit frequency axis");
            vis_up.push(upsample4_fit(&flat.to_owned(), t_len)?);
            visual_tapes.push(tape);
        }
        let fused = self.fuse(audio_tape.inputs.last().expect("non-empty"), &vis_up);
        let (blstm_out, blstm_cache) = self.blstm.forward(&fused);
        let mut fc1_out = self.fc1.forward(&blstm_out);
        relu_forward(&mut fc1_out);
        let mut fc2_out = self.fc2.forward(&fc1_out);
        relu_forward(&mut fc2_out);
        let u = self.fc3.forward(&fc2_out);
        let masks = self.masks_from_head(&u);
        Ok((
            masks,
            Tape {
                audio: audio_tape,
                visual: visual_tapes,
                fused,
                blstm_cache,
                blstm_out,
                fc1_out,
                fc2_out,
                u,
            },
        ))
    }

    /// Fold the batch statistics a training forward observed into the
    /// running averages (audio blocks, then each stream's visual pass).
    pub fn update_running_stats(&mut self, tape: &Tape) {
        for (b, st) in self.audio.iter_mut().zip(&tape.audio.stats) {
            if let (Some(bn), Some(st)) = (b.bn.as_mut(), st.as_ref()) {
                bn.update_running(st);
            }
        }
        for stream in &tape.visual {
            for (b, st) in self.visual.iter_mut().zip(&stream.stats) {
                if let (Some(bn), Some(st)) = (b.bn.as_mut(), st.as_ref()) {
                    bn.update_running(st);
                }
            }
        }
    }

    // -- backward ------------------------------------------------------------

    fn backward_stack(
        blocks: &[ConvBlock],
        tape: &StackTape,
        mut dy: Array3<f64>,
    ) -> (Array3<f64>, Vec<BlockGrads>) {
        let mut grads: Vec<Option<BlockGrads>> = (0..blocks.len()).map(|_| None).collect();
        for (i, b) in blocks.iter().enumerate().rev() {
            match b.act {
                Activation::Relu => relu_backward(&tape.inputs[i + 1], &mut dy),
                Activation::Sigmoid => sigmoid_backward(&tape.inputs[i + 1], &mut dy),
                Activation::None => {}
            }
            let bn_grads = if let Some(bn) = &b.bn {
                let cache = tape.bn[i].as_ref().expect("cache recorded");
                let (dx, g) = bn.backward(cache, &dy);
                dy = dx;
                Some(g)
            } else {
                None
            };
            let (dx, conv_grads) = b.conv.backward(&tape.inputs[i], &dy);
            dy = dx;
            grads[i] = Some(BlockGrads {
                conv: conv_grads,
                bn: bn_grads,
            });
        }
        (dy, grads.into_iter().map(|g| g.expect("filled")).collect())
    }

    /// Reverse-mode pass from a head gradient `du` (`[frames, head_dim]`,
    /// typically produced by the loss) to named parameter gradients in
    /// [`visit_params`](Self::visit_params) order.
    pub fn backward(&self, tape: &Tape, du: &Array2<f64>) -> Result<Gradients> {
        if du.dim() != tape.u.dim() {
            return Err(NetError::CountMismatch {
                context: "head gradient frames",
                need: tape.u.len(),
                got: du.len(),
            });
        }
        let (mut dh2, fc3_g) = self.fc3.backward(&tape.fc2_out, du);
        relu_backward(&tape.fc2_out, &mut dh2);
        let (mut dh1, fc2_g) = self.fc2.backward(&tape.fc1_out, &dh2);
        relu_backward(&tape.fc1_out, &mut dh1);
        let (dblstm_out, fc1_g) = self.fc1.backward(&tape.blstm_out, &dh1);
        let (dfused, blstm_g) = self
            .blstm
            .backward(&tape.blstm_cache, &tape.fused, &dblstm_out);

        let audio_flat = self.config.n_freq * self.audio_channels();
        let t_len = dfused.nrows();
        let d_audio = dfused
            .slice(s![.., ..audio_flat])
            .to_owned()
            .into_shape_with_order((t_len, self.config.n_freq, self.audio_channels()))
            .expect("audio grad shape");
        let (_, audio_grads) = Self::backward_stack(&self.audio, &tape.audio, d_audio);

        let vis_c = self.visual_channels();
        let mut visual_grads: Option<Vec<BlockGrads>> = None;
        for (slot, stream_tape) in tape.visual.iter().enumerate() {
            let vis_frames = stream_tape.inputs[0].dim().0;
            let start = audio_flat + slot * vis_c;
            let d_up = dfused.slice(s![.., start..start + vis_c]).to_owned();
            let d_flat = upsample4_fit_backward(&d_up, vis_frames);
            let d_vis = d_flat
                .into_shape_with_order((vis_frames, 1, vis_c))
                .expect("visual grad shape");
            let (_, grads) = Self::backward_stack(&self.visual, stream_tape, d_vis);
            match visual_grads.as_mut() {
                None => visual_grads = Some(grads),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&grads) {
                        a.add_assign(g);
                    }
                }
            }
        }
        // The audio-only baseline has no visual streams and hence no
        // visual gradient entries.
        let visual_grads = visual_grads.unwrap_or_default();

        let mut out: Gradients = Vec::new();
        for (prefix, grads) in [("audio", &audio_grads), ("visual", &visual_grads)] {
            for (i, g) in grads.iter().enumerate() {
                out.push((format!("{prefix}{i}.conv.w"), g.conv.dw.clone().into_dyn()));
                out.push((format!("{prefix}{i}.conv.b"), g.conv.db.clone().into_dyn()));
                if let Some(bn) = &g.bn {
                    out.push((format!("{prefix}{i}.bn.gamma"), bn.dgamma.clone().into_dyn()));
                    out.push((format!("{prefix}{i}.bn.beta"), bn.dbeta.clone().into_dyn()));
                }
            }
        }
        for (name, g) in [("fwd", &blstm_g.fwd), ("bwd", &blstm_g.bwd)] {
            out.push((format!("blstm.{name}.w_ih"), g.dw_ih.clone().into_dyn()));
            out.push((format!("blstm.{name}.w_hh"), g.dw_hh.clone().into_dyn()));
            out.push((format!("blstm.{name}.b"), g.db.clone().into_dyn()));
        }
        for (name, g) in [("fc1", &fc1_g), ("fc2", &fc2_g), ("fc3", &fc3_g)] {
            out.push((format!("{name}.w"), g.dw.clone().into_dyn()));
            out.push((format!("{name}.b"), g.db.clone().into_dyn()));
        }
        Ok(out)
    }
}
