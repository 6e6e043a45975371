//! Straight-line reference implementations used to cross-check `rcopt`.
//!
//! Nothing in here shares code with the library: matrices are plain
//! row-major `Vec<Vec<f64>>`, inverses come from Gauss-Jordan elimination,
//! and random numbers from a local SplitMix64 generator.

pub type Matrix = Vec<Vec<f64>>;

pub fn zeros(rows: usize, cols: usize) -> Matrix {
    vec![vec![0.0; cols]; rows]
}

pub fn transpose(a: &Matrix) -> Matrix {
    if a.is_empty() {
        return Vec::new();
    }
    let mut t = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b[0].len();
    let inner = b.len();
    let mut c = zeros(n, m);
    for i in 0..n {
        for k in 0..inner {
            let aik = a[i][k];
            for j in 0..m {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn matvec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting. `None` when a pivot vanishes.
pub fn inverse(a: &Matrix) -> Option<Matrix> {
    let n = a.len();
    let mut aug: Matrix = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| aug[p][col].abs().total_cmp(&aug[q][col].abs()))?;
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        let d = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// log|det A| via LU elimination with partial pivoting, together with the sign.
pub fn log_abs_det(a: &Matrix) -> (f64, f64) {
    let n = a.len();
    let mut m = a.clone();
    let mut sign = 1.0;
    let mut log = 0.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs()))
            .unwrap();
        if pivot != col {
            m.swap(col, pivot);
            sign = -sign;
        }
        let d = m[col][col];
        if d == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if d < 0.0 {
            sign = -sign;
        }
        log += d.abs().ln();
        for r in col + 1..n {
            let f = m[r][col] / d;
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    (sign, log)
}

// ---------------------------------------------------------------------------
// Gaussian process

/// Squared-exponential ARD kernel.
pub fn se_kernel(a: &[f64], b: &[f64], signal_variance: f64, length_scales: &[f64]) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(length_scales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    signal_variance * (-0.5 * r2).exp()
}

pub struct DenseGp {
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    /// Total diagonal addition: noise variance plus any jitter.
    pub diagonal: f64,
}

impl DenseGp {
    pub fn kernel_matrix(&self) -> Matrix {
        let n = self.points.len();
        let mut k = zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k[i][j] = se_kernel(
                    &self.points[i],
                    &self.points[j],
                    self.signal_variance,
                    &self.length_scales,
                );
            }
            k[i][i] += self.diagonal;
        }
        k
    }

    /// Posterior mean and variance of the latent function, in target units.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let kinv = inverse(&self.kernel_matrix()).expect("oracle kernel matrix singular");
        let kstar: Vec<f64> = self
            .points
            .iter()
            .map(|p| se_kernel(p, x, self.signal_variance, &self.length_scales))
            .collect();
        let w = matvec(&kinv, &self.targets);
        let mean = kstar.iter().zip(&w).map(|(a, b)| a * b).sum();
        let v = matvec(&kinv, &kstar);
        let reduction: f64 = kstar.iter().zip(&v).map(|(a, b)| a * b).sum();
        (mean, self.signal_variance - reduction)
    }

    /// −½ yᵀK⁻¹y − ½ log|K| − (n/2) log 2π
    pub fn log_marginal_likelihood(&self) -> f64 {
        let k = self.kernel_matrix();
        let kinv = inverse(&k).expect("oracle kernel matrix singular");
        let w = matvec(&kinv, &self.targets);
        let fit: f64 = self.targets.iter().zip(&w).map(|(a, b)| a * b).sum();
        let (_, logdet) = log_abs_det(&k);
        let n = self.targets.len() as f64;
        -0.5 * fit - 0.5 * logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

// ---------------------------------------------------------------------------
// Ridge regression

/// w = (SᵀS + λI)⁻¹ SᵀD through an explicit inverse.
pub fn ridge_normal_equations(states: &Matrix, targets: &Matrix, lambda: f64) -> Matrix {
    let st = transpose(states);
    let mut gram = matmul(&st, states);
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] += lambda;
    }
    let inv = inverse(&gram).expect("oracle gram matrix singular");
    matmul(&inv, &matmul(&st, targets))
}

// ---------------------------------------------------------------------------
// Reservoir

/// 8/10-bit style quantisers written out directly from their definitions.
pub fn quantise_phase(x: f64, bits: u32) -> f64 {
    let levels = 2f64.powi(bits as i32);
    let step = 2.0 * std::f64::consts::PI / levels;
    let mut clamped = x;
    if clamped < 0.0 {
        clamped = 0.0;
    }
    if clamped > 2.0 * std::f64::consts::PI {
        clamped = 2.0 * std::f64::consts::PI;
    }
    // Rounding may reach level 2^bits, i.e. phase 2π.
    let level = (clamped / step).round();
    level * step
}

pub fn quantise_intensity(s: f64, bits: u32) -> f64 {
    let levels = 2f64.powi(bits as i32);
    let mut code = (s * levels).floor();
    if code > levels - 1.0 {
        code = levels - 1.0;
    }
    if code < 0.0 {
        code = 0.0;
    }
    code / levels
}

pub fn reference_nonlinearity(x: f64, i0: f64, quantise: Option<(u32, u32)>) -> f64 {
    match quantise {
        None => i0 * x.sin() * x.sin(),
        Some((bits_in, bits_out)) => {
            let phase = quantise_phase(x, bits_in);
            let s = phase.sin() * phase.sin();
            i0 * quantise_intensity(s, bits_out)
        }
    }
}

/// Naive loop simulation over a dense interconnection matrix.
///
/// Each node's pre-activation is the feedback sum over `w[i][j] * x[j]` in
/// column order plus the separately accumulated input sum.
pub fn reference_trajectory(
    w: &Matrix,
    mask: &Matrix,
    inputs: &Matrix,
    i0: f64,
    quantise: Option<(u32, u32)>,
) -> Matrix {
    let n = w.len();
    let mut x = vec![0.0; n];
    let mut out = Vec::with_capacity(inputs.len());
    for u in inputs {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let mut feedback = 0.0;
            for j in 0..n {
                feedback += w[i][j] * x[j];
            }
            let mut drive = 0.0;
            for k in 0..u.len() {
                drive += mask[i][k] * u[k];
            }
            next[i] = reference_nonlinearity(feedback + drive, i0, quantise);
        }
        x = next;
        out.push(x.clone());
    }
    out
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// SplitMix64 with Box-Muller normals.
pub struct SplitMix {
    state: u64,
    spare: Option<f64>,
}

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix { state: seed, spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Monte-Carlo estimate of E[max(0, f_best − xi − Y)], Y ~ N(mean, sd²).
/// Returns (estimate, standard error).
pub fn monte_carlo_ei(mean: f64, sd: f64, f_best: f64, xi: f64, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = SplitMix::new(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let y = mean + sd * rng.normal();
        let gain = (f_best - xi - y).max(0.0);
        sum += gain;
        sum_sq += gain * gain;
    }
    let n = samples as f64;
    let est = sum / n;
    let var = (sum_sq / n - est * est).max(0.0);
    (est, (var / n).sqrt())
}

/// Upper edge of a 3σ binomial band around `n·p`, expressed as a fraction.
pub fn binomial_three_sigma(n: usize, p: f64) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}
