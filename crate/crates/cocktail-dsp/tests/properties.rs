//! Property tests over the spectral front end.

use cocktail_dsp::mask::{apply_crm, oracle_crm, oracle_rm};
use cocktail_dsp::spectral::{istft, stft, StftConfig};
use cocktail_dsp::Waveform;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(n: usize, seed: u64, amp: f64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Waveform::new((0..n).map(|_| rng.gen_range(-amp..amp)).collect(), 8_000).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// stft(a*x + b*y) == a*stft(x) + b*stft(y)
    #[test]
    fn stft_linearity(seed in 0u64..1_000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let cfg = StftConfig::desk();
        let x = noise(3_000, seed, 0.4);
        let y = noise(3_000, seed.wrapping_add(7_777), 0.4);
        let mixed = Waveform::new(
            x.samples().iter().zip(y.samples()).map(|(u, v)| a * u + b * v).collect(),
            8_000,
        ).unwrap();
        let sx = stft(&x, &cfg).unwrap();
        let sy = stft(&y, &cfg).unwrap();
        let sm = stft(&mixed, &cfg).unwrap();
        for ((zx, zy), zm) in sx.data.iter().zip(sy.data.iter()).zip(sm.data.iter()) {
            let want = a * zx + b * zy;
            prop_assert!((want - zm).norm() <= 1e-9 * (1.0 + want.norm()));
        }
    }

    /// decompress(compress(s)) == s
    #[test]
    fn compression_round_trip(seed in 0u64..1_000) {
        let s = stft(&noise(2_000, seed, 0.5), &StftConfig::desk()).unwrap();
        let back = s.compress().unwrap().decompress().unwrap();
        for (a, b) in s.data.iter().zip(back.data.iter()) {
            prop_assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()));
        }
    }

    /// The complex ratio mask reconstructs the clean spectrogram it was
    /// derived from, and the masked mixture inverts to the clean signal.
    #[test]
    fn oracle_crm_reconstruction(seed in 0u64..1_000) {
        let cfg = StftConfig::desk();
        let c = noise(4_000, seed, 0.3);
        let i = noise(4_000, seed.wrapping_add(1), 0.3);
        let n = Waveform::sum(&[&c, &i]).unwrap();
        let sc = stft(&c, &cfg).unwrap();
        let sn = stft(&n, &cfg).unwrap();
        let est = apply_crm(&oracle_crm(&sc, &sn).unwrap(), &sn).unwrap();
        let rec = istft(&est, 4_000).unwrap();
        let win = cfg.win_samples(8_000);
        let mut err = 0.0;
        let mut ref_e = 0.0;
        for t in win..(4_000 - win) {
            let d = rec.samples()[t] - c.samples()[t];
            err += d * d;
            ref_e += c.samples()[t] * c.samples()[t];
        }
        prop_assert!((err / ref_e).sqrt() <= 1e-3);
    }

    /// Ratio masks stay in [0, 1] whatever the pair of spectra.
    #[test]
    fn ratio_mask_bounded(seed in 0u64..1_000, gain in 0.1f64..5.0) {
        let cfg = StftConfig::desk();
        let c = noise(2_000, seed, 0.4).scaled(gain);
        let n = noise(2_000, seed.wrapping_add(3), 0.4);
        let m = oracle_rm(&stft(&c, &cfg).unwrap(), &stft(&n, &cfg).unwrap()).unwrap();
        for v in m.planes.iter() {
            prop_assert!((0.0..=1.0).contains(v));
        }
    }
}
