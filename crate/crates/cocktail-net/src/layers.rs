//! Network building blocks with explicit reverse-mode backward passes.
//!
//! Activations flow as `[time, freq, channels]` tensors (frequency extent 1
//! for the visual stream).  Convolutions run as tiled im2col + GEMM in both
//! directions; the LSTM projects all input contributions in one GEMM and
//! walks the recurrence per frame.  Everything is `f64`: the budget is
//! dominated by GEMM throughput and the gradient contracts are checked
//! against central finite differences at tight tolerances.

use ndarray::{linalg::general_mat_mul, s, Array1, Array2, Array3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NetError, Result};
use crate::topology::LayerSpec;

/// Batch-norm running-average momentum.
pub const BN_MOMENTUM: f64 = 0.99;
/// Batch-norm variance stabilizer.
pub const BN_EPS: f64 = 1e-5;
/// im2col tiles are bounded to roughly this many output rows.
const IM2COL_BLOCK_ROWS: usize = 8_192;

/// Fan-in-scaled uniform draw: U(−√(3/fan_in), √(3/fan_in)), unit variance
/// scaling.
pub fn init_uniform(rng: &mut ChaCha8Rng, fan_in: usize, n: usize) -> Vec<f64> {
    let limit = (3.0 / fan_in.max(1) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Dilated 2-D convolution, stride 1, symmetric zero same-padding.
///
/// Weights are stored GEMM-ready as `[out_c, kt·kf·in_c]` with patch columns
/// ordered (kernel-time, kernel-freq, channel).
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub in_c: usize,
    pub kernel: (usize, usize),
    pub dilation: (usize, usize),
}

/// Parameter gradients of one convolution.
pub struct Conv2dGrads {
    pub dw: Array2<f64>,
    pub db: Array1<f64>,
}

impl Conv2d {
    pub fn new(in_c: usize, spec: &LayerSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        let (kt, kf) = spec.kernel;
        if kt % 2 == 0 || kf % 2 == 0 {
            return Err(NetError::EvenKernel { kt, kf });
        }
        if spec.filters == 0 || in_c == 0 {
            return Err(NetError::InvalidConfig("zero-width convolution".into()));
        }
        let k = in_c * kt * kf;
        let w = Array2::from_shape_vec((spec.filters, k), init_uniform(rng, k, spec.filters * k))
            .expect("weight shape");
        Ok(Conv2d {
            w,
            b: Array1::zeros(spec.filters),
            in_c,
            kernel: spec.kernel,
            dilation: spec.dilation,
        })
    }

    pub fn out_c(&self) -> usize {
        self.w.nrows()
    }

    fn patch_len(&self) -> usize {
        self.in_c * self.kernel.0 * self.kernel.1
    }

    /// Frames per im2col tile for a given frequency extent.
    fn block_frames(&self, f_len: usize) -> usize {
        (IM2COL_BLOCK_ROWS / f_len.max(1)).max(1)
    }

    /// Gather the input patches for output frames `[t0, t1)` into `cols`
    /// (one row per output position, zero outside the padded input).
    fn fill_cols(&self, cols: &mut Array2<f64>, x: &Array3<f64>, t0: usize, t1: usize) {
        let (t_len, f_len, in_c) = x.dim();
        let (kt, kf) = self.kernel;
        let (dt, df) = self.dilation;
        let pad_t = (dt * (kt - 1) / 2) as isize;
        let pad_f = (df * (kf - 1) / 2) as isize;
        let xs = x.as_slice().expect("contiguous input");
        cols.fill(0.0);
        let k = self.patch_len();
        let cs = cols.as_slice_mut().expect("contiguous cols");
        for t in t0..t1 {
            let row_base = (t - t0) * f_len;
            for it in 0..kt {
                let ts = t as isize + (it * dt) as isize - pad_t;
                if ts < 0 || ts >= t_len as isize {
                    continue;
                }
                let x_t = ts as usize * f_len;
                for f in 0..f_len {
                    let row = row_base + f;
                    for jf in 0..kf {
                        let fs = f as isize + (jf * df) as isize - pad_f;
                        if fs < 0 || fs >= f_len as isize {
                            continue;
                        }
                        let src = (x_t + fs as usize) * in_c;
                        let dst = row * k + (it * kf + jf) * in_c;
                        cs[dst..dst + in_c].copy_from_slice(&xs[src..src + in_c]);
                    }
                }
            }
        }
    }

    /// Scatter-add of patch-space gradients back onto the input grid; the
    /// exact adjoint of [`fill_cols`](Self::fill_cols).
    fn spread_cols(&self, cols: &Array2<f64>, dx: &mut Array3<f64>, t0: usize, t1: usize) {
        let (t_len, f_len, in_c) = dx.dim();
        let (kt, kf) = self.kernel;
        let (dt, df) = self.dilation;
        let pad_t = (dt * (kt - 1) / 2) as isize;
        let pad_f = (df * (kf - 1) / 2) as isize;
        let k = self.patch_len();
        let cs = cols.as_slice().expect("contiguous cols");
        let dxs = dx.as_slice_mut().expect("contiguous grad");
        for t in t0..t1 {
            let row_base = (t - t0) * f_len;
            for it in 0..kt {
                let ts = t as isize + (it * dt) as isize - pad_t;
                if ts < 0 || ts >= t_len as isize {
                    continue;
                }
                let x_t = ts as usize * f_len;
                for f in 0..f_len {
                    let row = row_base + f;
                    for jf in 0..kf {
                        let fs = f as isize + (jf * df) as isize - pad_f;
                        if fs < 0 || fs >= f_len as isize {
                            continue;
                        }
                        let dst = (x_t + fs as usize) * in_c;
                        let src = row * k + (it * kf + jf) * in_c;
                        for c in 0..in_c {
                            dxs[dst + c] += cs[src + c];
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &Array3<f64>) -> Array3<f64> {
        let (t_len, f_len, _) = x.dim();
        let out_c = self.out_c();
        let tb = self.block_frames(f_len);
        let mut y = Array2::zeros((t_len * f_len, out_c));
        let mut cols = Array2::zeros((tb * f_len, self.patch_len()));
        let wt = self.w.t();
        let mut t0 = 0;
        while t0 < t_len {
            let t1 = (t0 + tb).min(t_len);
            let rows = (t1 - t0) * f_len;
            self.fill_cols(&mut cols, x, t0, t1);
            general_mat_mul(
                1.0,
                &cols.slice(s![..rows, ..]),
                &wt,
                0.0,
                &mut y.slice_mut(s![t0 * f_len..t1 * f_len, ..]),
            );
            t0 = t1;
        }
        for mut row in y.rows_mut() {
            row += &self.b;
        }
        y.into_shape_with_order((t_len, f_len, out_c))
            .expect("conv output shape")
    }

    pub fn backward(&self, x: &Array3<f64>, dy: &Array3<f64>) -> (Array3<f64>, Conv2dGrads) {
        let (t_len, f_len, _) = x.dim();
        let out_c = self.out_c();
        let k = self.patch_len();
        let dy2 = dy
            .view()
            .into_shape_with_order((t_len * f_len, out_c))
            .expect("grad shape");
        let mut dx = Array3::zeros(x.dim());
        let mut dw = Array2::zeros((out_c, k));
        let mut db = Array1::zeros(out_c);
        for row in dy2.rows() {
            db += &row;
        }
        let tb = self.block_frames(f_len);
        let mut cols = Array2::zeros((tb * f_len, k));
        let mut dcols = Array2::zeros((tb * f_len, k));
        let mut t0 = 0;
        while t0 < t_len {
            let t1 = (t0 + tb).min(t_len);
            let rows = (t1 - t0) * f_len;
            let dy_rows = dy2.slice(s![t0 * f_len..t1 * f_len, ..]);
            self.fill_cols(&mut cols, x, t0, t1);
            general_mat_mul(1.0, &dy_rows.t(), &cols.slice(s![..rows, ..]), 1.0, &mut dw);
            general_mat_mul(
                1.0,
                &dy_rows,
                &self.w,
                0.0,
                &mut dcols.slice_mut(s![..rows, ..]),
            );
            self.spread_cols(&dcols, &mut dx, t0, t1);
            t0 = t1;
        }
        (dx, Conv2dGrads { dw, db })
    }
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

/// Per-channel normalization over the (time, freq) extent of one sample.
///
/// Training normalizes with the statistics of the current forward pass and
/// reports them so the caller can fold them into the running averages in a
/// deterministic order; inference uses the running averages.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

pub struct BnCache {
    x_hat: Array3<f64>,
    inv_std: Array1<f64>,
}

/// The statistics a training forward observed, to be folded into the running
/// averages by the caller.
pub struct BnStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

pub struct BnGrads {
    pub dgamma: Array1<f64>,
    pub dbeta: Array1<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
        }
    }

    fn stats(x: &Array3<f64>) -> (Array1<f64>, Array1<f64>) {
        let (t_len, f_len, c_len) = x.dim();
        let n = (t_len * f_len) as f64;
        let mut mean = Array1::zeros(c_len);
        for t in 0..t_len {
            for f in 0..f_len {
                mean += &x.slice(s![t, f, ..]);
            }
        }
        mean /= n;
        let mut var = Array1::zeros(c_len);
        for t in 0..t_len {
            for f in 0..f_len {
                for c in 0..c_len {
                    let d = x[(t, f, c)] - mean[c];
                    var[c] += d * d;
                }
            }
        }
        var /= n;
        (mean, var)
    }

    fn normalize(x: &Array3<f64>, mean: &Array1<f64>, inv_std: &Array1<f64>) -> Array3<f64> {
        let mut x_hat = x.clone();
        for mut frame in x_hat.rows_mut() {
            frame -= mean;
            frame *= inv_std;
        }
        x_hat
    }

    fn scale_shift(&self, x_hat: &Array3<f64>) -> Array3<f64> {
        let mut y = x_hat.clone();
        for mut frame in y.rows_mut() {
            frame *= &self.gamma;
            frame += &self.beta;
        }
        y
    }

    pub fn forward_train(&self, x: &Array3<f64>) -> (Array3<f64>, BnCache, BnStats) {
        let (mean, var) = Self::stats(x);
        let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let x_hat = Self::normalize(x, &mean, &inv_std);
        let y = self.scale_shift(&x_hat);
        (y, BnCache { x_hat, inv_std }, BnStats { mean, var })
    }

    pub fn forward_infer(&self, x: &Array3<f64>) -> Array3<f64> {
        let inv_std = self.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let x_hat = Self::normalize(x, &self.running_mean, &inv_std);
        self.scale_shift(&x_hat)
    }

    /// Fold observed statistics into the running averages.
    pub fn update_running(&mut self, stats: &BnStats) {
        self.running_mean
            .zip_mut_with(&stats.mean, |r, &m| *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * m);
        self.running_var
            .zip_mut_with(&stats.var, |r, &v| *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * v);
    }

    pub fn backward(&self, cache: &BnCache, dy: &Array3<f64>) -> (Array3<f64>, BnGrads) {
        let (t_len, f_len, c_len) = dy.dim();
        let n = (t_len * f_len) as f64;
        let mut dbeta = Array1::zeros(c_len);
        let mut dgamma = Array1::zeros(c_len);
        for t in 0..t_len {
            for f in 0..f_len {
                for c in 0..c_len {
                    dbeta[c] += dy[(t, f, c)];
                    dgamma[c] += dy[(t, f, c)] * cache.x_hat[(t, f, c)];
                }
            }
        }
        // dx = inv_std/n · γ · (n·dy − Σdy − x̂·Σ(dy·x̂))
        let mut dx = Array3::zeros(dy.dim());
        for t in 0..t_len {
            for f in 0..f_len {
                for c in 0..c_len {
                    let term = n * dy[(t, f, c)] - dbeta[c] - cache.x_hat[(t, f, c)] * dgamma[c];
                    dx[(t, f, c)] = self.gamma[c] * cache.inv_std[c] * term / n;
                }
            }
        }
        (dx, BnGrads { dgamma, dbeta })
    }
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

pub fn relu_forward<D: ndarray::Dimension>(x: &mut ndarray::Array<f64, D>) {
    x.mapv_inplace(|v| v.max(0.0));
}

/// Backward through ReLU given the *activated* output (y > 0 ⇔ pass-through).
pub fn relu_backward<D: ndarray::Dimension>(
    y: &ndarray::Array<f64, D>,
    dy: &mut ndarray::Array<f64, D>,
) {
    dy.zip_mut_with(y, |g, &v| {
        if v <= 0.0 {
            *g = 0.0;
        }
    });
}

pub fn sigmoid_forward<D: ndarray::Dimension>(x: &mut ndarray::Array<f64, D>) {
    x.mapv_inplace(sigmoid);
}

/// Backward through the logistic function given the *activated* output.
pub fn sigmoid_backward<D: ndarray::Dimension>(
    y: &ndarray::Array<f64, D>,
    dy: &mut ndarray::Array<f64, D>,
) {
    dy.zip_mut_with(y, |g, &v| *g *= v * (1.0 - v));
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// Frame-wise affine layer: `[T, in] → [T, out]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

pub struct DenseGrads {
    pub dw: Array2<f64>,
    pub db: Array1<f64>,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = Array2::from_shape_vec(
            (out_dim, in_dim),
            init_uniform(rng, in_dim, out_dim * in_dim),
        )
        .expect("dense shape");
        Dense {
            w,
            b: Array1::zeros(out_dim),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut y = Array2::zeros((x.nrows(), self.w.nrows()));
        general_mat_mul(1.0, x, &self.w.t(), 0.0, &mut y);
        for mut row in y.rows_mut() {
            row += &self.b;
        }
        y
    }

    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>) -> (Array2<f64>, DenseGrads) {
        let mut dx = Array2::zeros(x.dim());
        general_mat_mul(1.0, dy, &self.w, 0.0, &mut dx);
        let mut dw = Array2::zeros(self.w.dim());
        general_mat_mul(1.0, &dy.t(), x, 0.0, &mut dw);
        let mut db = Array1::zeros(self.b.len());
        for row in dy.rows() {
            db += &row;
        }
        (dx, DenseGrads { dw, db })
    }
}

// ---------------------------------------------------------------------------
// Bidirectional LSTM
// ---------------------------------------------------------------------------

/// One LSTM direction; gates ordered (input, forget, cell, output).
#[derive(Debug, Clone)]
pub struct LstmDir {
    pub w_ih: Array2<f64>,
    pub w_hh: Array2<f64>,
    pub b: Array1<f64>,
}

impl LstmDir {
    fn new(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let w_ih = Array2::from_shape_vec(
            (4 * hidden, input),
            init_uniform(rng, input, 4 * hidden * input),
        )
        .expect("lstm shape");
        let w_hh = Array2::from_shape_vec(
            (4 * hidden, hidden),
            init_uniform(rng, hidden, 4 * hidden * hidden),
        )
        .expect("lstm shape");
        let mut b = Array1::zeros(4 * hidden);
        // Forget-gate bias starts at 1 so early training retains state.
        b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        LstmDir { w_ih, w_hh, b }
    }
}

/// Bidirectional LSTM over frames: `[T, D] → [T, 2H]` (forward direction in
/// the first H columns, backward in the last H).
#[derive(Debug, Clone)]
pub struct Blstm {
    pub fwd: LstmDir,
    pub bwd: LstmDir,
    pub hidden: usize,
}

/// Per-direction recurrence record for backpropagation through time.
struct DirCache {
    /// Gate activations per step: i, f, g, o, each `[T, H]`.
    gates: [Array2<f64>; 4],
    /// Cell states `[T, H]`.
    cell: Array2<f64>,
    /// tanh(cell) per step.
    cell_tanh: Array2<f64>,
    /// Hidden states `[T, H]` in sequence order.
    hidden_seq: Array2<f64>,
    /// Step order the recurrence visited (forward or reversed).
    order: Vec<usize>,
}

pub struct BlstmCache {
    dirs: [DirCache; 2],
}

pub struct BlstmGrads {
    pub fwd: LstmDirGrads,
    pub bwd: LstmDirGrads,
}

pub struct LstmDirGrads {
    pub dw_ih: Array2<f64>,
    pub dw_hh: Array2<f64>,
    pub db: Array1<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Blstm {
    pub fn new(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Blstm {
            fwd: LstmDir::new(input, hidden, rng),
            bwd: LstmDir::new(input, hidden, rng),
            hidden,
        }
    }

    fn run_dir(&self, dir: &LstmDir, x: &Array2<f64>, reverse: bool) -> DirCache {
        let t_len = x.nrows();
        let h = self.hidden;
        let mut z_all = Array2::zeros((t_len, 4 * h));
        general_mat_mul(1.0, x, &dir.w_ih.t(), 0.0, &mut z_all);
        for mut row in z_all.rows_mut() {
            row += &dir.b;
        }
        let order: Vec<usize> = if reverse {
            (0..t_len).rev().collect()
        } else {
            (0..t_len).collect()
        };
        let mut gates = [
            Array2::zeros((t_len, h)),
            Array2::zeros((t_len, h)),
            Array2::zeros((t_len, h)),
            Array2::zeros((t_len, h)),
        ];
        let mut cell = Array2::zeros((t_len, h));
        let mut cell_tanh = Array2::zeros((t_len, h));
        let mut hidden_seq = Array2::zeros((t_len, h));
        let mut h_prev = Array1::zeros(h);
        let mut c_prev = Array1::<f64>::zeros(h);
        let mut z = Array1::zeros(4 * h);
        for &t in &order {
            z.assign(&z_all.row(t));
            general_mat_mul(
                1.0,
                &dir.w_hh,
                &h_prev.view().insert_axis(ndarray::Axis(1)),
                1.0,
                &mut z.view_mut().insert_axis(ndarray::Axis(1)),
            );
            for j in 0..h {
                let i_g = sigmoid(z[j]);
                let f_g = sigmoid(z[h + j]);
                let g_g = z[2 * h + j].tanh();
                let o_g = sigmoid(z[3 * h + j]);
                let c = f_g * c_prev[j] + i_g * g_g;
                let ct = c.tanh();
                gates[0][(t, j)] = i_g;
                gates[1][(t, j)] = f_g;
                gates[2][(t, j)] = g_g;
                gates[3][(t, j)] = o_g;
                cell[(t, j)] = c;
                cell_tanh[(t, j)] = ct;
                hidden_seq[(t, j)] = o_g * ct;
            }
            h_prev.assign(&hidden_seq.row(t));
            c_prev.assign(&cell.row(t));
        }
        DirCache {
            gates,
            cell,
            cell_tanh,
            hidden_seq,
            order,
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, BlstmCache) {
        let t_len = x.nrows();
        let h = self.hidden;
        let f_cache = self.run_dir(&self.fwd, x, false);
        let b_cache = self.run_dir(&self.bwd, x, true);
        let mut y = Array2::zeros((t_len, 2 * h));
        y.slice_mut(s![.., ..h]).assign(&f_cache.hidden_seq);
        y.slice_mut(s![.., h..]).assign(&b_cache.hidden_seq);
        (
            y,
            BlstmCache {
                dirs: [f_cache, b_cache],
            },
        )
    }

    fn backward_dir(
        &self,
        dir: &LstmDir,
        cache: &DirCache,
        x: &Array2<f64>,
        dy: ndarray::ArrayView2<f64>,
        dx: &mut Array2<f64>,
    ) -> LstmDirGrads {
        let t_len = x.nrows();
        let h = self.hidden;
        let mut dz_all = Array2::zeros((t_len, 4 * h));
        let mut dh_next = Array1::zeros(h);
        let mut dc_next = Array1::<f64>::zeros(h);
        let mut dz = Array1::zeros(4 * h);
        // h_prev matrix in recurrence order for the weight gradient.
        let mut h_prev_mat = Array2::zeros((t_len, h));
        for (step, &t) in cache.order.iter().enumerate() {
            if step > 0 {
                let prev_t = cache.order[step - 1];
                h_prev_mat.row_mut(t).assign(&cache.hidden_seq.row(prev_t));
            }
        }
        for (step, &t) in cache.order.iter().enumerate().rev() {
            let c_prev_row: Array1<f64> = if step > 0 {
                cache.cell.row(cache.order[step - 1]).to_owned()
            } else {
                Array1::zeros(h)
            };
            for j in 0..h {
                let dh = dy[(t, j)] + dh_next[j];
                let i_g = cache.gates[0][(t, j)];
                let f_g = cache.gates[1][(t, j)];
                let g_g = cache.gates[2][(t, j)];
                let o_g = cache.gates[3][(t, j)];
                let ct = cache.cell_tanh[(t, j)];
                let dc = dh * o_g * (1.0 - ct * ct) + dc_next[j];
                dz[j] = dc * g_g * i_g * (1.0 - i_g);
                dz[h + j] = dc * c_prev_row[j] * f_g * (1.0 - f_g);
                dz[2 * h + j] = dc * i_g * (1.0 - g_g * g_g);
                dz[3 * h + j] = dh * ct * o_g * (1.0 - o_g);
                dc_next[j] = dc * f_g;
            }
            // dh_next = w_hhᵀ · dz
            general_mat_mul(
                1.0,
                &dir.w_hh.t(),
                &dz.view().insert_axis(ndarray::Axis(1)),
                0.0,
                &mut dh_next.view_mut().insert_axis(ndarray::Axis(1)),
            );
            dz_all.row_mut(t).assign(&dz);
        }
        general_mat_mul(1.0, &dz_all, &dir.w_ih, 1.0, dx);
        let mut dw_ih = Array2::zeros(dir.w_ih.dim());
        general_mat_mul(1.0, &dz_all.t(), x, 0.0, &mut dw_ih);
        let mut dw_hh = Array2::zeros(dir.w_hh.dim());
        general_mat_mul(1.0, &dz_all.t(), &h_prev_mat, 0.0, &mut dw_hh);
        let mut db = Array1::zeros(4 * h);
        for row in dz_all.rows() {
            db += &row;
        }
        LstmDirGrads { dw_ih, dw_hh, db }
    }

    pub fn backward(
        &self,
        cache: &BlstmCache,
        x: &Array2<f64>,
        dy: &Array2<f64>,
    ) -> (Array2<f64>, BlstmGrads) {
        let h = self.hidden;
        let mut dx = Array2::zeros(x.dim());
        let fwd = self.backward_dir(&self.fwd, &cache.dirs[0], x, dy.slice(s![.., ..h]), &mut dx);
        let bwd = self.backward_dir(&self.bwd, &cache.dirs[1], x, dy.slice(s![.., h..]), &mut dx);
        (dx, BlstmGrads { fwd, bwd })
    }
}

// ---------------------------------------------------------------------------
// Nearest-neighbor temporal upsampling
// ---------------------------------------------------------------------------

/// Nearest-neighbor 4x temporal upsampling followed by a fit to `t_audio`
/// frames: up to two surplus frames are truncated, up to two missing frames
/// are zero-padded, anything further apart is an error.
pub fn upsample4_fit(v: &Array2<f64>, t_audio: usize) -> Result<Array2<f64>> {
    let up = 4 * v.nrows();
    if up.abs_diff(t_audio) > 2 {
        return Err(NetError::FrameMismatch {
            audio: t_audio,
            visual: up,
        });
    }
    let mut out = Array2::zeros((t_audio, v.ncols()));
    for t in 0..t_audio.min(up) {
        out.row_mut(t).assign(&v.row(t / 4));
    }
    Ok(out)
}

/// Adjoint of [`upsample4_fit`]: fold per-frame gradients back onto the
/// visual frames (padded frames contribute nothing).
pub fn upsample4_fit_backward(dout: &Array2<f64>, v_frames: usize) -> Array2<f64> {
    let up = 4 * v_frames;
    let mut dv = Array2::zeros((v_frames, dout.ncols()));
    for t in 0..dout.nrows().min(up) {
        let mut row = dv.row_mut(t / 4);
        row += &dout.row(t);
    }
    dv
}
