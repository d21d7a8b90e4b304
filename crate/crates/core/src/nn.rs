//! Dense layers with hand-written gradients. Batches are `rows × features`.

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Tensor2 = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

fn shape_err(expected: impl Into<String>, got: &[usize]) -> Error {
    Error::ShapeMismatch { expected: expected.into(), got: format!("{got:?}") }
}

/// y = x·Wᵀ + b with W of shape `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Option<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads {
    pub x: Tensor2,
    pub weight: Array2<f64>,
    pub bias: Option<Array1<f64>>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize, bias: bool) -> Self {
        Self { weight: Array2::zeros((outputs, inputs)), bias: bias.then(|| Array1::zeros(outputs)) }
    }

    /// Uniform(−1/√in, 1/√in) weights and bias.
    pub fn init(inputs: usize, outputs: usize, bias: bool, rng: &mut crate::Rng) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-bound..bound));
        let bias = bias.then(|| Array1::from_shape_simple_fn(outputs, || rng.random_range(-bound..bound)));
        Self { weight, bias }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: &Tensor2) -> Result<Tensor2> {
        if x.ncols() != self.inputs() {
            return Err(shape_err(format!("[_, {}]", self.inputs()), x.shape()));
        }
        let mut y = x.dot(&self.weight.t());
        if let Some(b) = &self.bias {
            y += b;
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Tensor2, grad_out: &Tensor2) -> Result<LinearGrads> {
        if x.ncols() != self.inputs() {
            return Err(shape_err(format!("[_, {}]", self.inputs()), x.shape()));
        }
        if grad_out.ncols() != self.outputs() || grad_out.nrows() != x.nrows() {
            return Err(shape_err(format!("[{}, {}]", x.nrows(), self.outputs()), grad_out.shape()));
        }
        Ok(LinearGrads {
            x: grad_out.dot(&self.weight),
            weight: grad_out.t().dot(x),
            bias: self.bias.as_ref().map(|_| grad_out.sum_axis(Axis(0))),
        })
    }
}

pub fn softplus_scalar(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: &Tensor2) -> Tensor2 {
    x.mapv(softplus_scalar)
}

/// d softplus / dx, elementwise.
pub fn softplus_grad(x: &Tensor2) -> Tensor2 {
    x.mapv(logistic)
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Row-wise softmax.
pub fn softmax_rows(x: &Tensor2) -> Tensor2 {
    let mut y = x.clone();
    for mut row in y.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    y
}

/// Row-wise log-softmax.
pub fn log_softmax_rows(x: &Tensor2) -> Tensor2 {
    let mut y = x.clone();
    for mut row in y.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        row -= lse;
    }
    y
}

/// Vector-Jacobian product of row-wise softmax: y ⊙ (g − ⟨g, y⟩).
pub fn softmax_backward(y: &Tensor2, grad_out: &Tensor2) -> Tensor2 {
    let mut gx = grad_out.clone();
    for (mut gr, yr) in gx.rows_mut().into_iter().zip(y.rows()) {
        let dot = gr.dot(&yr);
        gr -= dot;
        gr *= &yr;
    }
    gx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gain: Array1<f64>,
    pub shift: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub epsilon: f64,
    pub learn_gain: bool,
    pub learn_shift: bool,
}

/// Intermediates kept by `BatchNorm::forward` for the backward pass and the
/// running-statistics update.
#[derive(Debug, Clone)]
pub struct BnCache {
    mode: Mode,
    xhat: Tensor2,
    inv_std: Array1<f64>,
    batch_mean: Array1<f64>,
    batch_var: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnGrads {
    pub x: Tensor2,
    pub gain: Array1<f64>,
    pub shift: Array1<f64>,
}

impl BatchNorm {
    pub fn new(features: usize, learn_gain: bool, learn_shift: bool) -> Self {
        Self {
            gain: Array1::ones(features),
            shift: Array1::zeros(features),
            running_mean: Array1::zeros(features),
            running_var: Array1::ones(features),
            momentum: 0.1,
            epsilon: 1e-5,
            learn_gain,
            learn_shift,
        }
    }

    pub fn features(&self) -> usize {
        self.gain.len()
    }

    /// Pure forward pass. Train mode normalizes with the (biased) batch
    /// statistics; call `update_running` afterwards to fold them in.
    pub fn forward(&self, x: &Tensor2, mode: Mode) -> Result<(Tensor2, BnCache)> {
        if x.ncols() != self.features() {
            return Err(shape_err(format!("[_, {}]", self.features()), x.shape()));
        }
        let (mean, var) = match mode {
            Mode::Train => {
                if x.nrows() < 2 {
                    return Err(Error::DegenerateBatch(x.nrows()));
                }
                let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
                let var = x.var_axis(Axis(0), 0.0);
                (mean, var)
            }
            Mode::Eval => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std = var.mapv(|v| 1.0 / (v + self.epsilon).sqrt());
        let xhat = (x - &mean) * &inv_std;
        let y = &xhat * &self.gain + &self.shift;
        Ok((y, BnCache { mode, xhat, inv_std, batch_mean: mean, batch_var: var }))
    }

    /// Exponential moving average of the batch statistics, with the unbiased
    /// variance. No-op for eval-mode caches.
    pub fn update_running(&mut self, cache: &BnCache) {
        if cache.mode != Mode::Train {
            return;
        }
        let n = cache.xhat.nrows() as f64;
        let m = self.momentum;
        self.running_mean = &self.running_mean * (1.0 - m) + &cache.batch_mean * m;
        self.running_var = &self.running_var * (1.0 - m) + &cache.batch_var * (m * n / (n - 1.0));
    }

    pub fn backward(&self, cache: &BnCache, grad_out: &Tensor2) -> BnGrads {
        let g_shift = grad_out.sum_axis(Axis(0));
        let g_gain = (grad_out * &cache.xhat).sum_axis(Axis(0));
        let scale = &self.gain * &cache.inv_std;
        let x = match cache.mode {
            Mode::Eval => grad_out * &scale,
            Mode::Train => {
                let n = grad_out.nrows() as f64;
                let centered = grad_out * n - &g_shift - &cache.xhat * &g_gain;
                centered * &(scale / n)
            }
        };
        BnGrads {
            x,
            gain: if self.learn_gain { g_gain } else { Array1::zeros(self.features()) },
            shift: if self.learn_shift { g_shift } else { Array1::zeros(self.features()) },
        }
    }
}

/// Inverted dropout. Returns the output and the multiplicative mask (entries
/// 0 or 1/(1−p)); the mask is `None` when the op is the identity.
pub fn dropout(x: &Tensor2, p: f64, mode: Mode, rng: &mut crate::Rng) -> Result<(Tensor2, Option<Tensor2>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    if mode == Mode::Eval || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - p);
    let mask = Array2::from_shape_simple_fn(x.raw_dim(), || if rng.random::<f64>() < p { 0.0 } else { keep });
    Ok((x * &mask, Some(mask)))
}

/// Adam moments for one flat parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                expected: self.m.len().to_string(),
                got: format!("params {}, grads {}", params.len(), grads.len()),
            });
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(r: usize, c: usize, rng: &mut crate::Rng) -> Tensor2 {
        Array2::from_shape_simple_fn((r, c), || StandardNormal.sample(rng))
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
    }

    /// Central differences of `f` at every entry of `x`.
    fn numeric_grad(x: &Tensor2, f: impl Fn(&Tensor2) -> f64) -> Tensor2 {
        let h = 1e-5;
        let mut g = Array2::zeros(x.raw_dim());
        for idx in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.as_slice_mut().unwrap()[idx] += h;
            xm.as_slice_mut().unwrap()[idx] -= h;
            g.as_slice_mut().unwrap()[idx] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        g
    }

    fn assert_close(a: &Tensor2, b: &Tensor2, tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!(rel_err(*x, *y) < tol, "{x} vs {y}");
        }
    }

    #[test]
    fn linear_simple_cases() {
        let l = Linear { weight: Array2::eye(3), bias: Some(Array1::zeros(3)) };
        let x = array![[1.0, -2.0, 3.0]];
        assert_eq!(l.forward(&x).unwrap(), x);

        let l = Linear { weight: array![[2.0]], bias: None };
        let x = array![[3.0]];
        assert_eq!(l.forward(&x).unwrap(), array![[6.0]]);
        let g = l.backward(&x, &array![[1.0]]).unwrap();
        assert_eq!(g.weight, array![[3.0]]);
        assert_eq!(g.x, array![[2.0]]);

        assert!(matches!(l.forward(&array![[1.0, 2.0]]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn linear_gradients_match_finite_differences() {
        let mut rng = rng_from_seed(3);
        let l = Linear::init(3, 4, true, &mut rng);
        let x = randn(5, 3, &mut rng);
        let up = randn(5, 4, &mut rng);
        let objective = |l: &Linear, x: &Tensor2| (l.forward(x).unwrap() * &up).sum();
        let g = l.backward(&x, &up).unwrap();

        assert_close(&g.x, &numeric_grad(&x, |x| objective(&l, x)), 1e-6);
        let gw = numeric_grad(&l.weight, |w| objective(&Linear { weight: w.clone(), bias: l.bias.clone() }, &x));
        assert_close(&g.weight, &gw, 1e-6);
        let b2 = l.bias.clone().unwrap().insert_axis(Axis(0));
        let gb =
            numeric_grad(&b2, |b| objective(&Linear { weight: l.weight.clone(), bias: Some(b.row(0).to_owned()) }, &x));
        assert_close(&g.bias.unwrap().insert_axis(Axis(0)), &gb, 1e-6);
    }

    #[test]
    fn softplus_values() {
        assert!((softplus_scalar(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus_scalar(50.0) - 50.0).abs() < 1e-12);
        assert!(softplus_scalar(-800.0) >= 0.0);
        assert!(softplus_scalar(800.0).is_finite());
        assert_eq!(logistic(0.0), 0.5);
        let mut rng = rng_from_seed(1);
        let x = randn(3, 4, &mut rng) * 3.0;
        let up = randn(3, 4, &mut rng);
        let analytic = softplus_grad(&x) * &up;
        assert_close(&analytic, &numeric_grad(&x, |x| (softplus(x) * &up).sum()), 1e-6);
    }

    #[test]
    fn softmax_values() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let y = softmax(&[1f64.ln(), 2f64.ln(), 3f64.ln()]);
        for (a, b) in y.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let x = [0.3, -1.2, 2.0];
        let shifted: Vec<f64> = x.iter().map(|v| v + 1000.0).collect();
        for (a, b) in softmax(&x).iter().zip(softmax(&shifted)) {
            assert!((a - b).abs() < 1e-12);
        }
        let rows = softmax_rows(&array![[0.3, -1.2, 2.0]]);
        assert!((rows.sum() - 1.0).abs() < 1e-15);
        let ls = log_softmax_rows(&array![[1000.0, 0.0]]);
        assert!(ls[[0, 0]].abs() < 1e-15 && (ls[[0, 1]] + 1000.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_backward_matches_finite_differences() {
        let mut rng = rng_from_seed(2);
        let x = randn(4, 5, &mut rng);
        let up = randn(4, 5, &mut rng);
        let analytic = softmax_backward(&softmax_rows(&x), &up);
        assert_close(&analytic, &numeric_grad(&x, |x| (softmax_rows(x) * &up).sum()), 1e-6);
    }

    #[test]
    fn batchnorm_eval_identity_and_train_statistics() {
        let bn = BatchNorm::new(3, true, true);
        let mut rng = rng_from_seed(4);
        let x = randn(6, 3, &mut rng);
        let (y, _) = bn.forward(&x, Mode::Eval).unwrap();
        let s = (1.0 + bn.epsilon).sqrt();
        assert_close(&(y * s), &x, 1e-12);

        // wide spread so ε is negligible next to the batch variance
        let x = randn(50, 3, &mut rng) * 4000.0 + 2.0;
        let (y, _) = bn.forward(&x, Mode::Train).unwrap();
        for col in y.columns() {
            let m = col.mean().unwrap();
            let v = col.var(0.0);
            assert!(m.abs() < 1e-9);
            assert!((v - 1.0).abs() < 1e-9);
        }
        assert!(matches!(bn.forward(&randn(1, 3, &mut rng), Mode::Train), Err(Error::DegenerateBatch(1))));
        assert!(bn.forward(&randn(1, 3, &mut rng), Mode::Eval).is_ok());
    }

    #[test]
    fn batchnorm_running_update() {
        let mut bn = BatchNorm::new(1, false, false);
        let x = array![[1.0], [3.0]];
        let (_, cache) = bn.forward(&x, Mode::Train).unwrap();
        bn.update_running(&cache);
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        // unbiased var of {1,3} is 2
        assert!((bn.running_var[0] - (0.9 + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn batchnorm_backward_matches_finite_differences() {
        let mut rng = rng_from_seed(5);
        let mut bn = BatchNorm::new(3, true, true);
        bn.gain = array![1.5, -0.7, 0.3];
        bn.shift = array![0.1, 0.2, -0.3];
        bn.running_mean = array![0.5, -0.5, 0.0];
        bn.running_var = array![2.0, 0.5, 1.0];
        let x = randn(6, 3, &mut rng);
        let up = randn(6, 3, &mut rng);
        for mode in [Mode::Train, Mode::Eval] {
            let (_, cache) = bn.forward(&x, mode).unwrap();
            let g = bn.backward(&cache, &up);
            let num = numeric_grad(&x, |x| (bn.forward(x, mode).unwrap().0 * &up).sum());
            assert_close(&g.x, &num, 1e-5);
            let gain = bn.gain.clone().insert_axis(Axis(0));
            let num_gain = numeric_grad(&gain, |gn| {
                let mut b = bn.clone();
                b.gain = gn.row(0).to_owned();
                (b.forward(&x, mode).unwrap().0 * &up).sum()
            });
            assert_close(&g.gain.clone().insert_axis(Axis(0)), &num_gain, 1e-5);
        }
        let frozen = BatchNorm::new(3, false, false);
        let (_, cache) = frozen.forward(&x, Mode::Train).unwrap();
        let g = frozen.backward(&cache, &up);
        assert!(g.gain.iter().chain(&g.shift).all(|&v| v == 0.0));
    }

    #[test]
    fn dropout_behaviour() {
        let mut rng = rng_from_seed(6);
        let x = Array2::from_elem((100, 1000), 1.0);
        assert_eq!(dropout(&x, 0.0, Mode::Train, &mut rng).unwrap().0, x);
        assert_eq!(dropout(&x, 0.9, Mode::Eval, &mut rng).unwrap().0, x);
        let (y, mask) = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        assert!((y.mean().unwrap() - 1.0).abs() < 0.01);
        assert!(mask.unwrap().iter().all(|&m| m == 0.0 || m == 2.0));
        assert!(matches!(dropout(&x, 1.0, Mode::Train, &mut rng), Err(Error::InvalidProbability(_))));
        assert!(dropout(&x, -0.1, Mode::Eval, &mut rng).is_err());
    }

    #[test]
    fn adam_first_step_and_convergence() {
        let mut s = AdamState::new(1, 0.001);
        let mut p = [0.0];
        s.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-15);

        let mut s = AdamState::new(2, 0.1);
        let mut p = [0.4, -2.0];
        for _ in 0..100 {
            s.step(&mut p, &[0.0, 0.0]).unwrap();
        }
        assert_eq!(p, [0.4, -2.0]);

        let mut s = AdamState::new(1, 0.01);
        let mut x = [1.0];
        for _ in 0..2000 {
            let g = [2.0 * x[0]];
            s.step(&mut x, &g).unwrap();
        }
        assert!(x[0].abs() < 1e-3, "{}", x[0]);
        assert!(s.step(&mut x, &[1.0, 2.0]).is_err());
    }
}
