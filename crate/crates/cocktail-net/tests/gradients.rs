//! Whole-model gradient verification: the hand-rolled backward pass against
//! central finite differences of the complete pipeline (training forward,
//! permutation-invariant loss head) on a toy-profile model.

use cocktail_dsp::embed::EmbeddingStream;
use cocktail_dsp::spectral::{ComplexSpectrogram, StftConfig};
use cocktail_dsp::Complex64;
use cocktail_net::loss::pit_loss_head;
use cocktail_net::{AudioVisualModel, ModelConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-3;
const FD_REL_TOL: f64 = 1e-3;

struct Fixture {
    /// Uncompressed mixture (bin magnitudes in [1, 2]).
    noisy: ComplexSpectrogram,
    /// The network input: the same mixture, compressed.
    compressed: ComplexSpectrogram,
    embs: Vec<EmbeddingStream>,
    speaker_targets: Vec<Array2<Complex64>>,
    noise_target: Array2<Complex64>,
}

fn fixture(seed: u64, cfg: &ModelConfig, t: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = Array2::from_shape_fn((t, cfg.n_freq), |_| {
        Complex64::from_polar(rng.gen_range(1.0..2.0), rng.gen_range(0.0..std::f64::consts::TAU))
    });
    let noisy = ComplexSpectrogram {
        data,
        cfg: StftConfig::desk(),
        sample_rate: 8_000,
        compressed: false,
    };
    let compressed = noisy.compress().unwrap();
    let mut target = || {
        let masked = noisy.data.mapv(|z| {
            z * Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
        });
        ComplexSpectrogram {
            data: masked,
            cfg: noisy.cfg,
            sample_rate: noisy.sample_rate,
            compressed: false,
        }
        .compress()
        .unwrap()
        .data
    };
    let speaker_targets: Vec<_> = (0..cfg.n_speaker_streams).map(|_| target()).collect();
    let noise_target = target();
    let mut rng2 = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let embs = (0..cfg.n_visual_streams())
        .map(|_| {
            EmbeddingStream::new(Array2::from_shape_fn((t / 4, cfg.embed_dim), |_| {
                rng2.gen_range(-1.0f32..1.0)
            }))
        })
        .collect();
    Fixture {
        noisy,
        compressed,
        embs,
        speaker_targets,
        noise_target,
    }
}

/// Break the symmetric stream initialization so the permutation search has a
/// strict winner and finite differences stay on one side of the tie.
fn jitter(model: &mut AudioVisualModel, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.visit_params_mut(&mut |_, mut v| {
        v.map_inplace(|x| *x += rng.gen_range(-0.05..0.05));
    });
}

fn pipeline_loss(model: &AudioVisualModel, fx: &Fixture) -> (f64, Vec<usize>) {
    let (_, tape) = model.forward_training(&fx.compressed, &fx.embs).unwrap();
    let (loss, _, perm) = pit_loss_head(
        &tape.u,
        &model.config,
        &fx.noisy,
        &fx.speaker_targets,
        Some(&fx.noise_target),
    )
    .unwrap();
    (loss, perm)
}

fn nudged(model: &AudioVisualModel, name: &str, flat: usize, delta: f64) -> AudioVisualModel {
    let mut m = model.clone();
    let mut hit = false;
    m.visit_params_mut(&mut |n, mut v| {
        if n == name {
            let slice = v.as_slice_mut().expect("standard layout");
            slice[flat] += delta;
            hit = true;
        }
    });
    assert!(hit, "unknown parameter {name}");
    m
}

/// Check two random slots of every tensor against central differences.
fn fd_sweep(model: &AudioVisualModel, fx: &Fixture, slot_seed: u64, step: f64) {
    let (_, tape) = model.forward_training(&fx.compressed, &fx.embs).unwrap();
    let (_, du, perm0) = pit_loss_head(
        &tape.u,
        &model.config,
        &fx.noisy,
        &fx.speaker_targets,
        Some(&fx.noise_target),
    )
    .unwrap();
    let grads = model.backward(&tape, &du).unwrap();

    // The gradient list must mirror the parameter traversal exactly.
    let mut names = Vec::new();
    model.visit_params(&mut |n, v| names.push((n.to_string(), v.len())));
    assert_eq!(grads.len(), names.len());
    for ((gn, g), (pn, len)) in grads.iter().zip(&names) {
        assert_eq!(gn, pn);
        assert_eq!(g.len(), *len, "{gn}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(slot_seed);
    let mut checked = 0usize;
    let mut worst: (f64, String) = (0.0, String::new());
    for (name, g) in &grads {
        let flat_g = g.as_slice().expect("standard layout");
        for _ in 0..2 {
            let idx = rng.gen_range(0..flat_g.len());
            let (up, perm_u) = pipeline_loss(&nudged(model, name, idx, step), fx);
            let (down, perm_d) = pipeline_loss(&nudged(model, name, idx, -step), fx);
            assert_eq!(perm_u, perm0, "{name}[{idx}] flipped the assignment");
            assert_eq!(perm_d, perm0, "{name}[{idx}] flipped the assignment");
            let fd = (up - down) / (2.0 * step);
            let got = flat_g[idx];
            let rel = (got - fd).abs() / got.abs().max(fd.abs()).max(1e-4);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{idx}]: analytic {got}, fd {fd}"));
            }
            assert!(
                rel <= FD_REL_TOL,
                "{name}[{idx}]: analytic {got}, fd {fd}, rel {rel}"
            );
            checked += 1;
        }
    }
    assert!(checked >= 2 * grads.len());
    eprintln!("checked {checked} parameter slots; worst rel err {} at {}", worst.0, worst.1);
}

#[test]
fn backward_matches_finite_differences_across_every_tensor() {
    let mut model = AudioVisualModel::build(ModelConfig::micro(), 41).unwrap();
    jitter(&mut model, 42);
    let fx = fixture(43, &model.config, 8);
    fd_sweep(&model, &fx, 44, FD_STEP);
}

#[test]
fn audio_only_backward_matches_finite_differences() {
    let mut model = AudioVisualModel::build(ModelConfig::micro_audio_only(), 61).unwrap();
    jitter(&mut model, 62);
    let fx = fixture(63, &model.config, 8);
    assert!(fx.embs.is_empty());
    // This fixture has enough curvature in the batch-norm scales that the
    // standard step's O(h^2) truncation error exceeds the tolerance; a
    // quarter step keeps the same analytic gradients within it.
    fd_sweep(&model, &fx, 64, FD_STEP / 4.0);
}

#[test]
fn zero_upstream_gradient_yields_zero_parameter_gradients() {
    let mut model = AudioVisualModel::build(ModelConfig::micro(), 45).unwrap();
    jitter(&mut model, 46);
    let fx = fixture(47, &model.config, 8);
    let (_, tape) = model.forward_training(&fx.compressed, &fx.embs).unwrap();
    let zeros = Array2::zeros(tape.u.dim());
    let grads = model.backward(&tape, &zeros).unwrap();
    for (name, g) in &grads {
        assert!(g.iter().all(|&v| v == 0.0), "{name} has non-zero gradient");
    }
}

#[test]
fn backward_is_linear_in_the_upstream_gradient() {
    let mut model = AudioVisualModel::build(ModelConfig::micro(), 48).unwrap();
    jitter(&mut model, 49);
    let fx = fixture(50, &model.config, 8);
    let (_, tape) = model.forward_training(&fx.compressed, &fx.embs).unwrap();
    let (_, du, _) = pit_loss_head(
        &tape.u,
        &model.config,
        &fx.noisy,
        &fx.speaker_targets,
        Some(&fx.noise_target),
    )
    .unwrap();
    let g1 = model.backward(&tape, &du).unwrap();
    let doubled = du.mapv(|v| 2.0 * v);
    let g2 = model.backward(&tape, &doubled).unwrap();
    for ((n1, a), (n2, b)) in g1.iter().zip(&g2) {
        assert_eq!(n1, n2);
        for (x, y) in a.iter().zip(b.iter()) {
            let diff = (2.0 * x - y).abs();
            assert!(
                diff <= 1e-12 * y.abs().max(1.0),
                "{n1}: {x} doubled vs {y}"
            );
        }
    }
}

#[test]
fn loss_decreases_along_the_negative_gradient() {
    // One explicit steepest-descent step on the toy model must reduce the
    // pipeline loss: the end-to-end direction is a descent direction.
    let mut model = AudioVisualModel::build(ModelConfig::micro(), 51).unwrap();
    jitter(&mut model, 52);
    let fx = fixture(53, &model.config, 8);
    let (loss0, _) = pipeline_loss(&model, &fx);
    let (_, tape) = model.forward_training(&fx.compressed, &fx.embs).unwrap();
    let (_, du, _) = pit_loss_head(
        &tape.u,
        &model.config,
        &fx.noisy,
        &fx.speaker_targets,
        Some(&fx.noise_target),
    )
    .unwrap();
    let grads = model.backward(&tape, &du).unwrap();
    let step = 1e-2;
    let mut i = 0;
    model.visit_params_mut(&mut |name, mut v| {
        assert_eq!(grads[i].0, name);
        v.zip_mut_with(&grads[i].1, |p, &g| *p -= step * g);
        i += 1;
    });
    let (loss1, _) = pipeline_loss(&model, &fx);
    assert!(
        loss1 < loss0,
        "descent step increased the loss: {loss0} -> {loss1}"
    );
}
