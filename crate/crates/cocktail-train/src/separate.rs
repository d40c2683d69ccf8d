//! Inference: run a trained model on a mixture and resynthesize per-speaker
//! waveforms.  One forward pass handles any input length; a single-stream
//! model on a multi-speaker sample runs once per speaker instead.

use cocktail_corpus::MixtureSample;
use cocktail_dsp::mask::{apply_crm, apply_rm, TFMask};
use cocktail_dsp::spectral::{istft, stft, ComplexSpectrogram, StftConfig};
use cocktail_dsp::{EmbeddingStream, MaskKind, Waveform};
use cocktail_net::AudioVisualModel;

use crate::data::{protocol_for, Protocol};
use crate::error::Result;

/// Shared reconstruction leg: undo the sigmoid squash on a network mask,
/// apply it to the uncompressed mixture grid, and invert.
pub fn resynthesize(
    mask: &TFMask,
    spec: &ComplexSpectrogram,
    out_len: usize,
) -> Result<Waveform> {
    let real = mask.sigmoid_decompress()?;
    let masked = match real.kind {
        MaskKind::Ratio => apply_rm(&real, spec)?,
        MaskKind::ComplexRatio => apply_crm(&real, spec)?,
    };
    Ok(istft(&masked, out_len)?)
}

/// One forward pass on a raw mixture: compress, predict masks, resynthesize
/// every speaker stream.  A predicted interference mask is dropped.
pub fn separate_streams(
    model: &AudioVisualModel,
    mixture: &Waveform,
    embeddings: &[EmbeddingStream],
) -> Result<Vec<Waveform>> {
    let cfg = StftConfig::for_rate(mixture.sample_rate());
    let spec = stft(mixture, &cfg)?;
    let masks = model.forward(&spec.compress()?, embeddings)?;
    masks
        .speakers
        .iter()
        .map(|m| resynthesize(m, &spec, mixture.len()))
        .collect()
}

/// Separate a corpus sample into per-speaker estimates, in source order.
///
/// Stream counts must be compatible with the sample's task: either one model
/// stream per source, or a single audio-visual stream that runs once per
/// speaker (re-conditioned on that speaker's embeddings each pass).
pub fn separate(model: &AudioVisualModel, sample: &MixtureSample) -> Result<Vec<Waveform>> {
    match protocol_for(&model.config, sample.task)? {
        Protocol::Matched => {
            let embs: &[EmbeddingStream] = if model.config.audio_only {
                &[]
            } else {
                &sample.embeddings
            };
            separate_streams(model, &sample.mixture, embs)
        }
        Protocol::PerSpeaker => sample
            .embeddings
            .iter()
            .map(|e| {
                let outs = separate_streams(model, &sample.mixture, std::slice::from_ref(e))?;
                Ok(outs.into_iter().next().expect("one speaker stream"))
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cocktail_dsp::mask::{oracle_crm, oracle_rm};
    use cocktail_dsp::waveform::SAMPLE_RATE_DESK;

    fn tone(freq: f64, len: usize) -> Waveform {
        let rate = SAMPLE_RATE_DESK;
        let samples: Vec<f64> = (0..len)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect();
        Waveform::new(samples, rate).unwrap()
    }

    #[test]
    fn oracle_masks_pass_through_the_reconstruction_leg() {
        let clean = tone(440.0, 8_000);
        let other = tone(997.0, 8_000);
        let mix = Waveform::sum(&[&clean, &other]).unwrap();
        let cfg = StftConfig::for_rate(mix.sample_rate());
        let noisy = stft(&mix, &cfg).unwrap();
        let clean_spec = stft(&clean, &cfg).unwrap();

        for mask in [
            oracle_rm(&clean_spec, &noisy).unwrap(),
            oracle_crm(&clean_spec, &noisy).unwrap(),
        ] {
            // Round through the network's sigmoid range first, as a model
            // output would arrive.
            let squashed = mask.sigmoid_compress().unwrap();
            let out = resynthesize(&squashed, &noisy, mix.len()).unwrap();
            assert_eq!(out.len(), mix.len());
            let err: f64 = out
                .samples()
                .iter()
                .zip(clean.samples())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            assert!(
                err / clean.energy() < 0.05,
                "relative error {}",
                err / clean.energy()
            );
        }
    }

    #[test]
    fn uncompressed_masks_are_rejected() {
        let mix = tone(300.0, 4_000);
        let cfg = StftConfig::for_rate(mix.sample_rate());
        let noisy = stft(&mix, &cfg).unwrap();
        let mask = oracle_rm(&noisy, &noisy).unwrap();
        assert!(resynthesize(&mask, &noisy, mix.len()).is_err());
    }
}
