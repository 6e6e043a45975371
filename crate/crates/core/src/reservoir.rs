//! Simulation of the free-space photonic reservoir.
//!
//! The state update is `x(n+1) = f_nl(W·x(n) + b·u(n))` with the SLM/camera
//! nonlinearity `f_nl(X) = Q_out(i0 · sin²(Q_in(X)))`.
//!
//! Quantisers:
//! * `Q_in` models the 8-bit phase SLM. It clamps `X` to `[0, 2π]` and maps
//!   it to the nearest of `2^bits` uniform phase levels `k·2π/2^bits`,
//!   `k = 0 .. 2^bits − 1`. Values within half a step of `2π` round to `2π`,
//!   the same phase as level 0.
//! * `Q_out` models the 10-bit camera. It floors the normalised intensity
//!   `s ∈ [0, 1]` to the code `min(⌊s·2^bits⌋, 2^bits − 1)` and returns
//!   `i0 · code / 2^bits`.
//!
//! With quantisation disabled both are identities.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperspace::HyperPoint;
use crate::rng::{substream, STREAM_INTERCONNECT, STREAM_MASK};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub n_nodes: usize,
    pub n_inputs: usize,
    pub point: HyperPoint,
    /// Illumination intensity; states lie in `[0, i0]`.
    pub i0: f64,
    pub quant_in_bits: u32,
    pub quant_out_bits: u32,
    pub quantisation_enabled: bool,
    pub rng_seed: u64,
}

impl ReservoirConfig {
    pub fn new(n_nodes: usize, n_inputs: usize, point: HyperPoint, rng_seed: u64) -> Self {
        ReservoirConfig {
            n_nodes,
            n_inputs,
            point,
            i0: 1.0,
            quant_in_bits: 8,
            quant_out_bits: 10,
            quantisation_enabled: true,
            rng_seed,
        }
    }

    pub fn with_point(&self, point: HyperPoint) -> Self {
        ReservoirConfig {
            point,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 || self.n_inputs == 0 {
            return Err(Error::domain("reservoir needs at least one node and one input"));
        }
        if !(self.i0 > 0.0 && self.i0.is_finite()) {
            return Err(Error::domain(format!("i0 must be positive, got {}", self.i0)));
        }
        if !(1..=52).contains(&self.quant_in_bits) || !(1..=52).contains(&self.quant_out_bits) {
            return Err(Error::domain("quantiser bit depths must lie in 1..=52"));
        }
        let p = self.point;
        if p.to_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("hyper-parameters must be finite"));
        }
        if !(0.0..=1.0).contains(&p.rho) {
            return Err(Error::domain(format!("rho must lie in [0, 1], got {}", p.rho)));
        }
        Ok(())
    }

    fn quantisers(&self) -> Option<(u32, u32)> {
        self.quantisation_enabled
            .then_some((self.quant_in_bits, self.quant_out_bits))
    }
}

/// Dense N × K input mask with entries in `[−β, β]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputMask {
    matrix: DMatrix<f64>,
}

impl InputMask {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        InputMask { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StorageKind {
    Sparse,
    Dense,
}

#[derive(Clone, Debug, PartialEq)]
enum Storage {
    /// Column indices per row, sorted, diagonal included.
    Sparse { row_ptr: Vec<usize>, cols: Vec<usize> },
    Dense(DMatrix<f64>),
}

/// N × N interconnection matrix: `α` on the diagonal, `γ` on a random
/// fraction `ρ` of the off-diagonal entries, zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct InterconnectionMatrix {
    n: usize,
    alpha: f64,
    gamma: f64,
    storage: Storage,
}

impl InterconnectionMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn storage_kind(&self) -> StorageKind {
        match self.storage {
            Storage::Sparse { .. } => StorageKind::Sparse,
            Storage::Dense(_) => StorageKind::Dense,
        }
    }

    /// Number of nonzero off-diagonal entries.
    pub fn off_diagonal_nonzeros(&self) -> usize {
        match &self.storage {
            Storage::Sparse { cols, .. } => cols.len() - self.n,
            Storage::Dense(m) => {
                let mut count = 0;
                for i in 0..self.n {
                    for j in 0..self.n {
                        if i != j && m[(i, j)] != 0.0 {
                            count += 1;
                        }
                    }
                }
                count
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse { row_ptr, cols } => {
                let mut m = DMatrix::zeros(self.n, self.n);
                for i in 0..self.n {
                    for &j in &cols[row_ptr[i]..row_ptr[i + 1]] {
                        m[(i, j)] = if i == j { self.alpha } else { self.gamma };
                    }
                }
                m
            }
        }
    }

    pub fn with_storage(&self, kind: StorageKind) -> Self {
        let storage = match (kind, &self.storage) {
            (StorageKind::Dense, Storage::Sparse { .. }) => Storage::Dense(self.to_dense()),
            (StorageKind::Sparse, Storage::Dense(m)) => {
                let mut row_ptr = vec![0];
                let mut cols = Vec::new();
                for i in 0..self.n {
                    for j in 0..self.n {
                        if i == j || m[(i, j)] != 0.0 {
                            cols.push(j);
                        }
                    }
                    row_ptr.push(cols.len());
                }
                Storage::Sparse { row_ptr, cols }
            }
            _ => self.storage.clone(),
        };
        InterconnectionMatrix {
            storage,
            ..self.clone()
        }
    }

    /// `(W·x)_i`, summed over columns in ascending order.
    ///
    /// Both storage paths perform the same floating-point operations on the
    /// nonzero terms; zero terms add `+0.0`, so the results are bit-identical.
    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        match &self.storage {
            Storage::Sparse { row_ptr, cols } => {
                for &j in &cols[row_ptr[i]..row_ptr[i + 1]] {
                    let w = if i == j { self.alpha } else { self.gamma };
                    acc += w * x[j];
                }
            }
            Storage::Dense(m) => {
                for (j, xj) in x.iter().enumerate() {
                    acc += m[(i, j)] * xj;
                }
            }
        }
        acc
    }
}

/// Reservoir node intensities `x(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirState {
    pub values: DVector<f64>,
}

impl ReservoirState {
    /// The dark initial state `x(0) = 0`.
    pub fn zeros(n: usize) -> Self {
        ReservoirState {
            values: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn generate_input_mask(cfg: &ReservoirConfig) -> InputMask {
    let mut rng = substream(cfg.rng_seed, STREAM_MASK);
    let (n, k) = (cfg.n_nodes, cfg.n_inputs);
    let mut m = DMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..k {
            let r: f64 = rng.random_range(-1.0..=1.0);
            m[(i, j)] = r * cfg.point.beta;
        }
    }
    InputMask { matrix: m }
}

/// Draws the interconnection pattern. Each off-diagonal entry `(i, j)`,
/// visited row-major, consumes one uniform draw `r` and is nonzero iff
/// `r < ρ`, so patterns for different densities are nested.
pub fn generate_interconnection(cfg: &ReservoirConfig) -> InterconnectionMatrix {
    let mut rng = substream(cfg.rng_seed, STREAM_INTERCONNECT);
    let n = cfg.n_nodes;
    let HyperPoint { alpha, gamma, rho, .. } = cfg.point;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                cols.push(j);
                continue;
            }
            let r: f64 = rng.random();
            if r < rho {
                cols.push(j);
            }
        }
        row_ptr.push(cols.len());
    }
    let sparse = InterconnectionMatrix {
        n,
        alpha,
        gamma,
        storage: Storage::Sparse { row_ptr, cols },
    };
    // Sparse while the expected off-diagonal nonzeros per row stay below N/8.
    if rho * n as f64 <= n as f64 / 8.0 {
        sparse
    } else {
        sparse.with_storage(StorageKind::Dense)
    }
}

/// Nearest of `2^bits` phase levels over one 2π period; input clamped to
/// `[0, 2π]`. The top half-step rounds to 2π itself, which the SLM shows as
/// level 0; keeping the value 2π keeps the quantiser nondecreasing.
pub fn quantise_phase(x: f64, bits: u32) -> f64 {
    let levels = 2f64.powi(bits as i32);
    let step = TWO_PI / levels;
    (x.clamp(0.0, TWO_PI) / step).round() * step
}

/// Floor of `s ∈ [0, 1]` onto `2^bits` uniform codes, returned as `code / 2^bits`.
pub fn quantise_intensity(s: f64, bits: u32) -> f64 {
    let levels = 2f64.powi(bits as i32);
    let code = (s * levels).floor().clamp(0.0, levels - 1.0);
    code / levels
}

fn nonlinearity_scalar(x: f64, i0: f64, quantisers: Option<(u32, u32)>) -> f64 {
    match quantisers {
        None => {
            let s = x.sin();
            i0 * s * s
        }
        Some((bits_in, bits_out)) => {
            let s = quantise_phase(x, bits_in).sin();
            i0 * quantise_intensity(s * s, bits_out)
        }
    }
}

pub fn nonlinearity(x_pre: &[f64], cfg: &ReservoirConfig) -> Result<ReservoirState> {
    if let Some(i) = x_pre.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite pre-activation {} at node {i}",
            x_pre[i]
        )));
    }
    let q = cfg.quantisers();
    Ok(ReservoirState {
        values: DVector::from_iterator(
            x_pre.len(),
            x_pre.iter().map(|&x| nonlinearity_scalar(x, cfg.i0, q)),
        ),
    })
}

/// Pre-activation `X = W·x + b·u`; the two sums are accumulated separately.
pub fn pre_activation(
    x: &ReservoirState,
    u: &[f64],
    w: &InterconnectionMatrix,
    b: &InputMask,
) -> Result<Vec<f64>> {
    let n = w.size();
    let mask = b.matrix();
    if x.len() != n || mask.nrows() != n {
        return Err(Error::domain(format!(
            "shape mismatch: state {} / interconnection {n} / mask rows {}",
            x.len(),
            mask.nrows()
        )));
    }
    if u.len() != mask.ncols() {
        return Err(Error::domain(format!(
            "input has {} features, mask expects {}",
            u.len(),
            mask.ncols()
        )));
    }
    let xs = x.values.as_slice();
    Ok((0..n)
        .map(|i| {
            let feedback = w.row_dot(i, xs);
            let mut drive = 0.0;
            for (k, uk) in u.iter().enumerate() {
                drive += mask[(i, k)] * uk;
            }
            feedback + drive
        })
        .collect())
}

pub fn step(
    x: &ReservoirState,
    u: &[f64],
    w: &InterconnectionMatrix,
    b: &InputMask,
    cfg: &ReservoirConfig,
) -> Result<ReservoirState> {
    nonlinearity(&pre_activation(x, u, w, b)?, cfg)
}

/// Runs the reservoir over `inputs` (T × K); row `t` of the result (T × N)
/// is the state after consuming input row `t`.
pub fn run_sequence(
    cfg: &ReservoirConfig,
    w: &InterconnectionMatrix,
    b: &InputMask,
    inputs: &DMatrix<f64>,
    x0: &ReservoirState,
) -> Result<DMatrix<f64>> {
    let t_len = inputs.nrows();
    let mut trajectory = DMatrix::zeros(t_len, w.size());
    let mut x = x0.clone();
    let mut u = vec![0.0; inputs.ncols()];
    for t in 0..t_len {
        for (k, uk) in u.iter_mut().enumerate() {
            *uk = inputs[(t, k)];
        }
        x = step(&x, &u, w, b, cfg)?;
        trajectory.set_row(t, &x.values.transpose());
    }
    Ok(trajectory)
}

/// Everything needed to drive one reservoir instance.
#[derive(Clone, Debug)]
pub struct Reservoir {
    pub config: ReservoirConfig,
    pub interconnection: InterconnectionMatrix,
    pub mask: InputMask,
}

impl Reservoir {
    pub fn generate(config: &ReservoirConfig) -> Result<Self> {
        config.validate()?;
        Ok(Reservoir {
            interconnection: generate_interconnection(config),
            mask: generate_input_mask(config),
            config: config.clone(),
        })
    }

    pub fn run(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        run_sequence(
            &self.config,
            &self.interconnection,
            &self.mask,
            inputs,
            &ReservoirState::zeros(self.config.n_nodes),
        )
    }
}
