//! Property tests: determinism, the exact sum identity, and embedding
//! normalization hold for arbitrary seeds and every task recipe.

use cocktail_corpus::{
    make_mixture, synth_noise, synth_utterance, SpeakerModel, SynthConfig, Task,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn speakers(n: usize, seed: u64) -> Vec<SpeakerModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| SpeakerModel::sample(i as u64, 8, &mut rng)).collect()
}

fn short_cfg() -> SynthConfig {
    SynthConfig { duration_s: 0.4, ..SynthConfig::default() }
}

fn any_task() -> impl Strategy<Value = Task> {
    prop_oneof![
        Just(Task::OneSpeakerNoise),
        Just(Task::TwoSpeakerClean),
        Just(Task::TwoSpeakerNoise),
        Just(Task::ThreeSpeakerClean),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn utterances_and_noise_are_deterministic(seed in any::<u64>()) {
        let spk = speakers(1, seed ^ 0xABCD)[0].clone();
        let cfg = short_cfg();
        let (w1, e1) = synth_utterance(&spk, &cfg, seed).unwrap();
        let (w2, e2) = synth_utterance(&spk, &cfg, seed).unwrap();
        prop_assert_eq!(w1.samples(), w2.samples());
        prop_assert_eq!(&e1.data, &e2.data);
        let n1 = synth_noise(0.4, cfg.sample_rate, seed).unwrap();
        let n2 = synth_noise(0.4, cfg.sample_rate, seed).unwrap();
        prop_assert_eq!(n1.samples(), n2.samples());
    }

    #[test]
    fn every_task_sums_exactly_and_stays_in_range(task in any_task(), seed in any::<u64>()) {
        let pool = speakers(3, 99);
        let refs: Vec<&SpeakerModel> = pool.iter().take(task.n_speakers()).collect();
        let sample = make_mixture(task, &refs, &short_cfg(), seed).unwrap();
        let sources = sample.sources();
        prop_assert_eq!(sample.embeddings.len(), task.n_speakers());
        prop_assert_eq!(sources.len(), task.n_speakers() + usize::from(task.has_noise()));
        for i in 0..sample.mixture.len() {
            let sum: f64 = sources.iter().map(|w| w.samples()[i]).sum();
            prop_assert_eq!(sample.mixture.samples()[i], sum);
        }
        let peak = sample.mixture.samples().iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        prop_assert!(peak <= 1.0, "mixture peak {} must stay in range", peak);
    }

    #[test]
    fn embedding_frames_stay_unit_norm(seed in any::<u64>()) {
        let spk = speakers(1, seed ^ 0x1234)[0].clone();
        let (_, embeds) = synth_utterance(&spk, &short_cfg(), seed).unwrap();
        for fr in 0..embeds.n_frames() {
            let norm: f32 = embeds.data.row(fr).iter().map(|v| v * v).sum::<f32>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-5, "frame {} norm {}", fr, norm);
        }
    }
}
