//! The reference layer topology of the audio and visual streams, and the
//! receptive-context bookkeeping that documents it.

use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

/// Activation applied after a layer (and its batch norm, when present).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Sigmoid,
    None,
}

/// One dilated convolution layer: stride 1 everywhere, temporal and spectral
/// extent preserved by symmetric zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub filters: usize,
    /// Kernel extent as (time, frequency).
    pub kernel: (usize, usize),
    /// Dilation as (time, frequency).
    pub dilation: (usize, usize),
    pub has_batchnorm: bool,
    pub activation: Activation,
}

impl LayerSpec {
    fn conv(filters: usize, kernel: (usize, usize), dilation: (usize, usize)) -> Self {
        LayerSpec {
            filters,
            kernel,
            dilation,
            has_batchnorm: true,
            activation: Activation::Relu,
        }
    }
}

/// Reference audio-stream filter count before width scaling.
pub const AUDIO_WIDTH: usize = 96;
/// Reference final audio layer filter count before width scaling.
pub const AUDIO_HEAD_WIDTH: usize = 8;
/// Reference visual-stream filter count before width scaling.
pub const VISUAL_WIDTH: usize = 256;

fn scaled(reference: usize, width_scale: f64) -> usize {
    ((reference as f64 * width_scale).round() as usize).max(1)
}

/// The fifteen-layer dilated audio stream, with filter counts scaled by
/// `width_scale` (1.0 reproduces the reference widths: fourteen 96-filter
/// layers and a final 8-filter 1x1 layer).
pub fn audio_stream_specs(width_scale: f64) -> Vec<LayerSpec> {
    let w = scaled(AUDIO_WIDTH, width_scale);
    let head = scaled(AUDIO_HEAD_WIDTH, width_scale);
    vec![
        LayerSpec::conv(w, (1, 7), (1, 1)),
        LayerSpec::conv(w, (7, 1), (1, 1)),
        LayerSpec::conv(w, (5, 5), (1, 1)),
        LayerSpec::conv(w, (5, 5), (2, 1)),
        LayerSpec::conv(w, (5, 5), (4, 1)),
        LayerSpec::conv(w, (5, 5), (8, 1)),
        LayerSpec::conv(w, (5, 5), (16, 1)),
        LayerSpec::conv(w, (5, 5), (32, 1)),
        LayerSpec::conv(w, (5, 5), (1, 1)),
        LayerSpec::conv(w, (5, 5), (2, 2)),
        LayerSpec::conv(w, (5, 5), (4, 4)),
        LayerSpec::conv(w, (5, 5), (8, 8)),
        LayerSpec::conv(w, (5, 5), (16, 16)),
        LayerSpec::conv(w, (5, 5), (32, 32)),
        LayerSpec::conv(head, (1, 1), (1, 1)),
    ]
}

/// The six-layer dilated visual stream; convolutions and dilations act over
/// the temporal axis only (frequency extent is 1 throughout).
pub fn visual_stream_specs(width_scale: f64) -> Vec<LayerSpec> {
    let w = scaled(VISUAL_WIDTH, width_scale);
    vec![
        LayerSpec::conv(w, (7, 1), (1, 1)),
        LayerSpec::conv(w, (5, 1), (1, 1)),
        LayerSpec::conv(w, (5, 1), (2, 1)),
        LayerSpec::conv(w, (5, 1), (4, 1)),
        LayerSpec::conv(w, (5, 1), (8, 1)),
        LayerSpec::conv(w, (5, 1), (16, 1)),
    ]
}

/// Per-layer context under two conventions, as (time, frequency) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextRow {
    /// Documented convention: the first layer with kernel extent > 1 on an
    /// axis contributes its full extent; every later layer adds
    /// dilation·(kernel−1)/2 on that axis.
    pub context: (usize, usize),
    /// Standard receptive field: each layer adds dilation·(kernel−1).
    pub receptive_field: (usize, usize),
}

/// Cumulative context after each layer of `layers`.
///
/// Two columns are returned per layer because the documented context row of
/// the reference architecture follows a half-growth convention after the
/// first extended layer on each axis, which is smaller than the standard
/// receptive field; the documented convention is the conformance target.
pub fn receptive_context(layers: &[LayerSpec]) -> Result<Vec<ContextRow>> {
    if layers.is_empty() {
        return Err(NetError::InvalidConfig("empty layer list".into()));
    }
    let mut rows = Vec::with_capacity(layers.len());
    let mut ctx = (0usize, 0usize); // 0 marks "no extended kernel seen yet"
    let mut rf = (1usize, 1usize);
    for l in layers {
        let (kt, kf) = l.kernel;
        let (dt, df) = l.dilation;
        if kt % 2 == 0 || kf % 2 == 0 {
            return Err(NetError::EvenKernel { kt, kf });
        }
        ctx.0 = grow_context(ctx.0, kt, dt);
        ctx.1 = grow_context(ctx.1, kf, df);
        rf.0 += dt * (kt - 1);
        rf.1 += df * (kf - 1);
        rows.push(ContextRow {
            context: (ctx.0.max(1), ctx.1.max(1)),
            receptive_field: rf,
        });
    }
    Ok(rows)
}

fn grow_context(current: usize, k: usize, d: usize) -> usize {
    if k == 1 {
        current
    } else if current == 0 {
        k
    } else {
        current + d * (k - 1) / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Golden context row of the reference audio stream.
    const AUDIO_CONTEXT: [(usize, usize); 15] = [
        (1, 7),
        (7, 7),
        (9, 9),
        (13, 11),
        (21, 13),
        (37, 15),
        (69, 17),
        (133, 19),
        (135, 21),
        (139, 25),
        (147, 33),
        (163, 49),
        (195, 81),
        (259, 145),
        (259, 145),
    ];

    /// Golden context row of the reference visual stream.
    const VISUAL_CONTEXT: [(usize, usize); 6] = [(7, 1), (9, 1), (13, 1), (21, 1), (37, 1), (69, 1)];

    #[test]
    fn audio_stream_reproduces_every_documented_context_entry() {
        let rows = receptive_context(&audio_stream_specs(1.0)).unwrap();
        let got: Vec<(usize, usize)> = rows.iter().map(|r| r.context).collect();
        assert_eq!(got, AUDIO_CONTEXT.to_vec());
    }

    #[test]
    fn visual_stream_reproduces_every_documented_context_entry() {
        let rows = receptive_context(&visual_stream_specs(1.0)).unwrap();
        let got: Vec<(usize, usize)> = rows.iter().map(|r| r.context).collect();
        assert_eq!(got, VISUAL_CONTEXT.to_vec());
    }

    #[test]
    fn reference_widths_and_final_head_are_exact() {
        let audio = audio_stream_specs(1.0);
        assert_eq!(audio.len(), 15);
        assert!(audio[..14].iter().all(|l| l.filters == 96));
        assert_eq!(audio[14].filters, 8);
        assert_eq!(audio[14].kernel, (1, 1));
        let visual = visual_stream_specs(1.0);
        assert_eq!(visual.len(), 6);
        assert!(visual.iter().all(|l| l.filters == 256));
    }

    #[test]
    fn quarter_width_scale_gives_24_filter_convs() {
        let audio = audio_stream_specs(0.25);
        assert!(audio[..14].iter().all(|l| l.filters == 24));
        assert_eq!(audio[14].filters, 2);
        assert!(visual_stream_specs(0.25).iter().all(|l| l.filters == 64));
    }

    #[test]
    fn single_1x1_layer_has_unit_context_under_both_conventions() {
        let rows = receptive_context(&[LayerSpec::conv(4, (1, 1), (1, 1))]).unwrap();
        assert_eq!(rows[0].context, (1, 1));
        assert_eq!(rows[0].receptive_field, (1, 1));
    }

    #[test]
    fn even_kernels_are_rejected() {
        let err = receptive_context(&[LayerSpec::conv(4, (4, 1), (1, 1))]).unwrap_err();
        assert!(err.to_string().contains("odd kernels"), "{err}");
    }

    #[test]
    fn standard_receptive_field_outgrows_the_documented_convention() {
        // After the first extended layer per axis, the documented convention
        // adds half of what the standard recurrence adds; the final standard
        // field is therefore strictly larger.
        let rows = receptive_context(&audio_stream_specs(1.0)).unwrap();
        let last = rows.last().unwrap();
        assert!(last.receptive_field.0 > last.context.0);
        assert!(last.receptive_field.1 > last.context.1);
        assert_eq!(last.receptive_field, (511, 283));
    }

    #[test]
    fn empty_layer_list_is_rejected() {
        assert!(receptive_context(&[]).is_err());
    }
}
