//! Minimal RIFF/WAVE codec for the one format the pipeline speaks:
//! PCM signed 16-bit little-endian. Readers accept mono or stereo (stereo is
//! reduced to the left channel); writers always emit mono.

use std::fs;
use std::path::Path;

use crate::waveform::Waveform;
use crate::{DspError, Result};

/// Reads a 16-bit PCM WAV file into a waveform.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DspError::io(path.display().to_string(), e))?;
    decode_wav(&bytes)
}

/// Decodes WAV bytes; exposed for tests.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    let bad = |detail: &str| DspError::malformed("WAV", detail.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE header"));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // codec, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = pos + 8 + size;
        if body_end > bytes.len() {
            return Err(bad("chunk overruns file"));
        }
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(bad("fmt chunk too small"));
                }
                fmt = Some((
                    u16::from_le_bytes([body[0], body[1]]),
                    u16::from_le_bytes([body[2], body[3]]),
                    u32::from_le_bytes([body[4], body[5], body[6], body[7]]),
                    u16::from_le_bytes([body[14], body[15]]),
                ));
            }
            b"data" => data = Some(body),
            _ => {} // skip LIST, fact, ...
        }
        pos = body_end + (size & 1); // chunks are word-aligned
    }
    let (codec, channels, rate, bits) = fmt.ok_or_else(|| bad("no fmt chunk"))?;
    if codec != 1 || bits != 16 {
        return Err(bad(&format!("unsupported encoding (codec {codec}, {bits}-bit)")));
    }
    if !(channels == 1 || channels == 2) {
        return Err(bad(&format!("unsupported channel count {channels}")));
    }
    let data = data.ok_or_else(|| bad("no data chunk"))?;
    let frame = 2 * channels as usize;
    if data.len() % frame != 0 {
        return Err(bad("data chunk not frame-aligned"));
    }
    let mut samples = Vec::with_capacity(data.len() / frame);
    for f in data.chunks_exact(frame) {
        // left channel only
        let v = i16::from_le_bytes([f[0], f[1]]);
        samples.push(v as f64 / 32768.0);
    }
    Waveform::new(samples, rate)
}

/// Writes a waveform as mono 16-bit PCM. Samples are rounded to the nearest
/// level and clamped at full scale.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(w)).map_err(|e| DspError::io(path.display().to_string(), e))
}

/// Encodes to WAV bytes; exposed for tests.
pub fn encode_wav(w: &Waveform) -> Vec<u8> {
    let data_len = (w.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + w.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&w.sample_rate().to_le_bytes());
    out.extend_from_slice(&(w.sample_rate() * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in w.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}
