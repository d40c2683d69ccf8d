//! End-to-end metric check on real synthetic mixtures: enhancing two-speaker
//! mixtures with the oracle complex mask must yield a strictly positive mean
//! SDR improvement, and handing back the reference itself must reach the cap.

use cocktail_corpus::{make_mixture, SpeakerPool, SynthConfig, Task};
use cocktail_dsp::mask::{apply_crm, oracle_crm};
use cocktail_dsp::spectral::{istft, stft, StftConfig};
use cocktail_metrics::{sdr, sdr_improvement, SDR_CAP_DB};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn oracle_complex_mask_improves_two_speaker_mixtures() {
    let pool = SpeakerPool::generate(8, 16, 414).unwrap();
    let synth = SynthConfig {
        duration_s: 1.0,
        ..SynthConfig::default()
    };
    let cfg = StftConfig::desk();

    let mut improvements = Vec::new();
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9_000 + seed);
        let speakers = pool.draw(false, 2, &mut rng);
        let sample = make_mixture(Task::TwoSpeakerClean, &speakers, &synth, 7_700 + seed).unwrap();
        let noisy = stft(&sample.mixture, &cfg).unwrap();
        for k in 0..2 {
            let clean = stft(&sample.speech[k], &cfg).unwrap();
            let mask = oracle_crm(&clean, &noisy).unwrap();
            let enhanced_spec = apply_crm(&mask, &noisy).unwrap();
            let enhanced = istft(&enhanced_spec, sample.mixture.len()).unwrap();
            let other = &sample.speech[1 - k];
            let imp = sdr_improvement(
                &enhanced,
                &sample.mixture,
                &sample.speech[k],
                &[other],
                None,
            )
            .unwrap();
            improvements.push(imp);
        }
    }
    let mean = improvements.iter().sum::<f64>() / improvements.len() as f64;
    assert!(mean > 1.0, "mean oracle improvement {mean} dB");
}

#[test]
fn returning_the_reference_attains_the_cap_minus_input_sdr() {
    let pool = SpeakerPool::generate(8, 16, 414).unwrap();
    let synth = SynthConfig {
        duration_s: 1.0,
        ..SynthConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let speakers = pool.draw(false, 2, &mut rng);
    let sample = make_mixture(Task::TwoSpeakerClean, &speakers, &synth, 505).unwrap();

    let target = &sample.speech[0];
    let other = &sample.speech[1];
    let input_sdr = sdr(&sample.mixture, target, &[other], None).unwrap();
    let imp = sdr_improvement(target, &sample.mixture, target, &[other], None).unwrap();
    assert!((imp - (SDR_CAP_DB - input_sdr)).abs() < 1e-12);
}
