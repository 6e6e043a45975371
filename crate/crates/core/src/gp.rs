//! Gaussian-process surrogate over unit-cube coordinates.
//!
//! Squared-exponential kernel with one length scale per dimension (ARD):
//!
//! ```text
//! k(x, x') = σ_f² · exp(−½ Σ_d ((x_d − x'_d) / ℓ_d)²)
//! ```
//!
//! Targets are standardised to zero mean and unit variance before fitting;
//! the constant prior mean is therefore the training-target mean. Kernel
//! parameters are chosen by maximising the log marginal likelihood with
//! BFGS from several starting points in log-parameter space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim;
use crate::rng::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelParams {
    /// σ_f² = 1, unit length scales, small noise.
    pub fn unit(dims: usize) -> Self {
        KernelParams {
            signal_variance: 1.0,
            length_scales: vec![1.0; dims],
            noise_variance: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.signal_variance > 0.0
            && self.noise_variance >= 0.0
            && self.length_scales.iter().all(|l| *l > 0.0)
            && self.signal_variance.is_finite()
            && self.noise_variance.is_finite()
            && self.length_scales.iter().all(|l| l.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid kernel parameters {self:?}")))
        }
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.length_scales)
            .map(|((x, y), l)| {
                let d = (x - y) / l;
                d * d
            })
            .sum();
        self.signal_variance * (-0.5 * r2).exp()
    }
}

/// Settings for the marginal-likelihood search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    /// Random starts in addition to the unit-length-scale start.
    pub restarts: usize,
    /// Likelihood evaluations allowed per start.
    pub max_evaluations: usize,
    pub signal_variance_bounds: (f64, f64),
    pub length_scale_bounds: (f64, f64),
    /// The lower bound doubles as the noise floor.
    pub noise_variance_bounds: (f64, f64),
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            restarts: 8,
            max_evaluations: 200,
            signal_variance_bounds: (1e-3, 1e3),
            length_scale_bounds: (1e-2, 1e2),
            noise_variance_bounds: (1e-8, 1.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GpModel {
    points: Vec<Vec<f64>>,
    targets: Vec<f64>,
    standardised: DVector<f64>,
    target_mean: f64,
    target_scale: f64,
    params: KernelParams,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Fits kernel parameters by multistart likelihood maximisation.
    pub fn fit(points: &[Vec<f64>], values: &[f64], cfg: &GpConfig, rng: &mut Rng) -> Result<Self> {
        GpModel::fit_warm(points, values, cfg, rng, None)
    }

    /// As [`GpModel::fit`], with `warm` (typically the previous fit) as an
    /// extra starting point. The random starts drawn are the same either way.
    pub fn fit_warm(
        points: &[Vec<f64>],
        values: &[f64],
        cfg: &GpConfig,
        rng: &mut Rng,
        warm: Option<&KernelParams>,
    ) -> Result<Self> {
        let data = TrainingData::new(points, values)?;
        let dims = data.dims;
        let bounds = LogBounds::new(cfg, dims)?;

        let mut starts = vec![bounds.to_free(&KernelParams::unit(dims))];
        if let Some(w) = warm.filter(|w| w.length_scales.len() == dims && w.validate().is_ok()) {
            starts.push(bounds.to_free(w));
        }
        for _ in 0..cfg.restarts {
            let theta: Vec<f64> = bounds
                .ranges
                .iter()
                .map(|(lo, hi)| {
                    let margin = 0.05 * (hi - lo);
                    rng.random_range(lo + margin..=hi - margin)
                })
                .collect();
            starts.push(bounds.free_from_log(&theta));
        }

        let results: Vec<optim::Minimum> = starts
            .par_iter()
            .map(|z0| {
                optim::bfgs(
                    |z| match data.lml(&bounds.to_log(z).0) {
                        Some((lml, factor)) => (-lml, Some(factor)),
                        None => (f64::INFINITY, None),
                    },
                    |z, factor| {
                        let dtheta = bounds.to_log(z).1;
                        let grad = data.lml_gradient(factor.expect("gradient requested at a finite point"));
                        grad.iter().zip(&dtheta).map(|(g, d)| -g * d).collect()
                    },
                    z0,
                    cfg.max_evaluations,
                )
            })
            .collect();

        let mut best: Option<&optim::Minimum> = None;
        for r in &results {
            if r.value.is_finite() && best.is_none_or(|b| r.value < b.value) {
                best = Some(r);
            }
        }
        let best = best.ok_or_else(|| {
            Error::Numeric("kernel matrix could not be factorised at any starting point".into())
        })?;
        let params = bounds.params(&bounds.to_log(&best.x).0);
        data.into_model(params)
    }

    /// Conditions a GP with fixed kernel parameters on the data.
    pub fn with_params(points: &[Vec<f64>], values: &[f64], params: KernelParams) -> Result<Self> {
        let data = TrainingData::new(points, values)?;
        if params.length_scales.len() != data.dims {
            return Err(Error::domain(format!(
                "{} length scales for {}-dimensional inputs",
                params.length_scales.len(),
                data.dims
            )));
        }
        params.validate()?;
        data.into_model(params)
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn dims(&self) -> usize {
        self.params.length_scales.len()
    }

    /// Constant prior mean, in objective units.
    pub fn prior_mean(&self) -> f64 {
        self.target_mean
    }

    /// Factor by which standardised targets were divided.
    pub fn target_scale(&self) -> f64 {
        self.target_scale
    }

    pub fn standardised_targets(&self) -> &DVector<f64> {
        &self.standardised
    }

    /// Lowest training target.
    pub fn best_target(&self) -> f64 {
        self.targets.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Kernel matrix plus noise and jitter, as factorised.
    pub fn kernel_matrix(&self) -> DMatrix<f64> {
        kernel_matrix(&self.points, &self.params, self.params.noise_variance + self.jitter)
    }

    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Posterior mean and latent-function variance at `x`, in objective units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let kstar = DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|p| self.params.kernel(p, x)),
        );
        let mean = self.target_mean + self.target_scale * kstar.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("Cholesky factor has a nonzero diagonal");
        let var = (self.params.signal_variance - v.dot(&v)).max(0.0);
        (mean, var * self.target_scale * self.target_scale)
    }

    /// Log marginal likelihood of the standardised targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.points.len() as f64;
        let log_det_half: f64 = self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * self.standardised.dot(&self.alpha) - log_det_half - 0.5 * n * LN_2PI
    }
}

fn kernel_matrix(points: &[Vec<f64>], params: &KernelParams, diagonal: f64) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = params.kernel(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += diagonal;
    }
    k
}

/// Cholesky with jitter escalating ×10 from 1e-10·σ_f² to 1e-4·σ_f².
fn factorise(base: &DMatrix<f64>, signal_variance: f64) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * signal_variance;
        let mut k = base.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(k) {
            return Some((chol, jitter));
        }
        rel *= 10.0;
    }
    None
}

/// Cholesky factor of the column-major `n × n` matrix in `a`, reading and
/// writing the lower triangle only. False if a pivot is not positive.
#[inline(always)]
fn cholesky_lower_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let (done, rest) = a.split_at_mut(j * n);
        let col = &mut rest[..n];
        for k in 0..j {
            let lk = &done[k * n..(k + 1) * n];
            let f = lk[j];
            for (c, l) in col[j..].iter_mut().zip(&lk[j..]) {
                *c -= f * l;
            }
        }
        let pivot = col[j];
        if pivot <= 0.0 || !pivot.is_finite() {
            return false;
        }
        let d = pivot.sqrt();
        col[j] = d;
        for c in &mut col[j + 1..] {
            *c /= d;
        }
    }
    true
}

/// Four independent partial sums, so the loop is not bound by add latency.
#[inline(always)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let split = len - len % 4;
    let mut acc = [0.0; 4];
    let mut i = 0;
    while i < split {
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut tail = 0.0;
    for k in split..len {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Solves `L Lᵀ x = b` given the lower factor from [`cholesky_lower_in_place`].
#[inline(always)]
fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for k in 0..n {
        let xk = x[k] / l[k * n + k];
        x[k] = xk;
        for (xi, li) in x[k + 1..].iter_mut().zip(&l[k * n + k + 1..(k + 1) * n]) {
            *xi -= xk * li;
        }
    }
    for k in (0..n).rev() {
        let s = dot(&x[k + 1..], &l[k * n + k + 1..(k + 1) * n]);
        x[k] = (x[k] - s) / l[k * n + k];
    }
    x
}

/// Replaces the lower-triangular `L` by `L⁻¹`, column by column. Column `j`
/// of the inverse depends only on columns `≥ j` of `L` and on itself, so
/// walking `j` upwards leaves every column that is still needed intact.
#[inline(always)]
fn invert_lower_in_place(l: &mut [f64], n: usize) {
    let mut col = vec![0.0; n];
    for j in 0..n {
        col[j..].fill(0.0);
        col[j] = 1.0;
        for k in j..n {
            let xk = col[k] / l[k * n + k];
            col[k] = xk;
            for (xi, li) in col[k + 1..].iter_mut().zip(&l[k * n + k + 1..(k + 1) * n]) {
                *xi -= xk * li;
            }
        }
        l[j * n + j..(j + 1) * n].copy_from_slice(&col[j..]);
    }
}

/// State kept from a likelihood evaluation for its gradient: the noise-free
/// kernel matrix, the Cholesky factor, `K⁻¹ y` and the parameters.
struct Factor {
    kf: Vec<f64>,
    l: Vec<f64>,
    alpha: Vec<f64>,
    inv_l2: Vec<f64>,
    sn2: f64,
}

struct TrainingData {
    points: Vec<Vec<f64>>,
    targets: Vec<f64>,
    y: DVector<f64>,
    mean: f64,
    scale: f64,
    dims: usize,
    /// Squared coordinate differences, one n × n matrix per dimension.
    sq_diffs: Vec<DMatrix<f64>>,
}

impl TrainingData {
    fn new(points: &[Vec<f64>], values: &[f64]) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::domain(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let n = points.len();
        if n < 2 {
            return Err(Error::domain("a GP needs at least two observations"));
        }
        let dims = points[0].len();
        if dims == 0 || points.iter().any(|p| p.len() != dims) {
            return Err(Error::domain("GP inputs must share a nonzero dimension"));
        }
        if points.iter().flatten().chain(values).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite GP training data".into()));
        }
        if points.iter().all(|p| p == &points[0]) {
            return Err(Error::domain("a GP needs at least two distinct points"));
        }

        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        // Constant targets: keep unit scale so the standardised targets are zero.
        let scale = if std > 1e-12 * mean.abs().max(1.0) { std } else { 1.0 };
        let y = DVector::from_iterator(n, values.iter().map(|v| (v - mean) / scale));

        let sq_diffs = (0..dims)
            .map(|d| DMatrix::from_fn(n, n, |i, j| (points[i][d] - points[j][d]).powi(2)))
            .collect();
        Ok(TrainingData {
            points: points.to_vec(),
            targets: values.to_vec(),
            y,
            mean,
            scale,
            dims,
            sq_diffs,
        })
    }

    /// Log marginal likelihood and its gradient with respect to
    /// `[ln σ_f², ln ℓ_1 .. ln ℓ_d, ln σ_n²]`.
    #[cfg(test)]
    fn lml_and_gradient(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (lml, factor) = self.lml(theta)?;
        Some((lml, self.lml_gradient(factor)))
    }

    // The search needs the gradient only at accepted steps, so the likelihood
    // hands its factorisation over rather than differentiating eagerly. Both
    // halves work on lower triangles of column-major buffers.

    fn lml(&self, theta: &[f64]) -> Option<(f64, Factor)> {
        #[cfg(target_arch = "x86_64")]
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime. FMA contraction
            // stays off, so results match the portable path bit for bit.
            return unsafe { self.lml_avx2(theta) };
        }
        self.lml_portable(theta)
    }

    fn lml_gradient(&self, factor: Factor) -> Vec<f64> {
        #[cfg(target_arch = "x86_64")]
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: as in `lml`.
            return unsafe { self.lml_gradient_avx2(factor) };
        }
        self.lml_gradient_portable(factor)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn lml_avx2(&self, theta: &[f64]) -> Option<(f64, Factor)> {
        self.lml_portable(theta)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn lml_gradient_avx2(&self, factor: Factor) -> Vec<f64> {
        self.lml_gradient_portable(factor)
    }

    #[inline(always)]
    fn lml_portable(&self, theta: &[f64]) -> Option<(f64, Factor)> {
        let n = self.points.len();
        let sf2 = theta[0].exp();
        let inv_l2: Vec<f64> = theta[1..=self.dims].iter().map(|t| (-2.0 * t).exp()).collect();
        let sn2 = theta[self.dims + 1].exp();

        let mut kf = vec![0.0; n * n];
        for j in 0..n {
            let col = &mut kf[j * n + j..(j + 1) * n];
            for (d, w) in inv_l2.iter().enumerate() {
                let sq = &self.sq_diffs[d].as_slice()[j * n + j..(j + 1) * n];
                for (acc, s) in col.iter_mut().zip(sq) {
                    *acc += w * s;
                }
            }
            for v in col.iter_mut() {
                *v = sf2 * (-0.5 * *v).exp();
            }
        }

        let mut l = kf.clone();
        let mut rel = JITTER_START;
        loop {
            let diag = sn2 + rel * sf2;
            for i in 0..n {
                l[i * n + i] += diag;
            }
            if cholesky_lower_in_place(&mut l, n) {
                break;
            }
            rel *= 10.0;
            if rel > JITTER_MAX * (1.0 + 1e-9) {
                return None;
            }
            l.copy_from_slice(&kf);
        }

        let alpha = cholesky_solve(&l, n, self.y.as_slice());
        let log_det_half: f64 = (0..n).map(|i| l[i * n + i].ln()).sum();
        let y_alpha: f64 = self.y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let lml = -0.5 * y_alpha - log_det_half - 0.5 * n as f64 * LN_2PI;
        if !lml.is_finite() {
            return None;
        }
        Some((lml, Factor { kf, l, alpha, inv_l2, sn2 }))
    }

    /// ∂lml/∂θ = ½ tr((ααᵀ − K⁻¹) ∂K/∂θ).
    #[inline(always)]
    fn lml_gradient_portable(&self, factor: Factor) -> Vec<f64> {
        let n = self.points.len();
        let Factor { kf, mut l, alpha, inv_l2, sn2 } = factor;
        invert_lower_in_place(&mut l, n);
        // K⁻¹ = L⁻ᵀ L⁻¹. Column j is Σ_k L⁻¹[k, j] · (row k of L⁻¹), so keep
        // the rows contiguous as well.
        let mut rows = vec![0.0; n * n];
        for j in 0..n {
            for k in j..n {
                rows[k * n + j] = l[j * n + k];
            }
        }
        let mut kinv = vec![0.0; n];
        let mut sums = vec![0.0; self.dims + 1];
        let mut trace = 0.0;
        for j in 0..n {
            kinv[j..].fill(0.0);
            for k in j..n {
                let f = l[j * n + k];
                for (c, r) in kinv[j..=k].iter_mut().zip(&rows[k * n + j..=k * n + k]) {
                    *c += f * r;
                }
            }
            // Both factors are symmetric, so off-diagonal terms count twice.
            for i in j..n {
                let idx = j * n + i;
                let mut a = alpha[i] * alpha[j] - kinv[i];
                if i == j {
                    trace += a;
                } else {
                    a *= 2.0;
                }
                let ak = a * kf[idx];
                sums[0] += ak;
                for d in 0..self.dims {
                    sums[d + 1] += ak * self.sq_diffs[d].as_slice()[idx];
                }
            }
        }
        let mut grad = Vec::with_capacity(self.dims + 2);
        grad.push(0.5 * sums[0]);
        for d in 0..self.dims {
            grad.push(0.5 * inv_l2[d] * sums[d + 1]);
        }
        grad.push(0.5 * sn2 * trace);
        grad
    }

    fn into_model(self, params: KernelParams) -> Result<GpModel> {
        let base = kernel_matrix(&self.points, &params, params.noise_variance);
        let (chol, jitter) = factorise(&base, params.signal_variance).ok_or_else(|| {
            Error::Numeric("kernel matrix is not positive definite even with maximal jitter".into())
        })?;
        let alpha = chol.solve(&self.y);
        Ok(GpModel {
            points: self.points,
            targets: self.targets,
            standardised: self.y,
            target_mean: self.mean,
            target_scale: self.scale,
            params,
            jitter,
            chol,
            alpha,
        })
    }
}

/// Box in log-parameter space, mapped onto ℝ through a logistic function so
/// the optimiser runs unconstrained.
struct LogBounds {
    ranges: Vec<(f64, f64)>,
}

impl LogBounds {
    fn new(cfg: &GpConfig, dims: usize) -> Result<Self> {
        let check = |name: &str, (lo, hi): (f64, f64)| -> Result<(f64, f64)> {
            if lo > 0.0 && hi > lo && hi.is_finite() {
                Ok((lo.ln(), hi.ln()))
            } else {
                Err(Error::domain(format!("invalid {name} bounds ({lo}, {hi})")))
            }
        };
        let mut ranges = vec![check("signal variance", cfg.signal_variance_bounds)?];
        let ls = check("length scale", cfg.length_scale_bounds)?;
        ranges.extend(std::iter::repeat_n(ls, dims));
        ranges.push(check("noise variance", cfg.noise_variance_bounds)?);
        Ok(LogBounds { ranges })
    }

    /// Log parameters and their derivatives with respect to the free variables.
    fn to_log(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        z.iter()
            .zip(&self.ranges)
            .map(|(zi, (lo, hi))| {
                let s = 1.0 / (1.0 + (-zi).exp());
                (lo + (hi - lo) * s, (hi - lo) * s * (1.0 - s))
            })
            .unzip()
    }

    fn free_from_log(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.ranges)
            .map(|(t, (lo, hi))| {
                let s = ((t - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
                (s / (1.0 - s)).ln()
            })
            .collect()
    }

    fn to_free(&self, p: &KernelParams) -> Vec<f64> {
        let mut theta = vec![p.signal_variance.ln()];
        theta.extend(p.length_scales.iter().map(|l| l.ln()));
        theta.push(p.noise_variance.ln());
        self.free_from_log(&theta)
    }

    fn params(&self, theta: &[f64]) -> KernelParams {
        let d = theta.len() - 2;
        KernelParams {
            signal_variance: theta[0].exp(),
            length_scales: theta[1..=d].iter().map(|t| t.exp()).collect(),
            noise_variance: theta[d + 1].exp(),
        }
    }
}
