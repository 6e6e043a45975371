//! Expected improvement and candidate proposal.
//!
//! Everything here minimises: a campaign maximising accuracy hands the
//! surrogate negated accuracies.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::Result;
use crate::gp::GpModel;
use crate::hyperspace::{is_duplicate_unit, HyperPoint, HyperSpace, DEFAULT_DUPLICATE_TOL};
use crate::rng::Rng;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub candidate_pool_size: usize,
    pub local_refinement_steps: usize,
    pub duplicate_tol: f64,
    /// ξ: improvement demanded beyond the incumbent.
    pub exploration_jitter: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            candidate_pool_size: 4096,
            local_refinement_steps: 50,
            duplicate_tol: DEFAULT_DUPLICATE_TOL,
            exploration_jitter: 0.0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidate_pool_size == 0 {
            return Err(crate::Error::domain("candidate_pool_size must be at least 1"));
        }
        if !(self.duplicate_tol >= 0.0) || !(self.exploration_jitter >= 0.0) {
            return Err(crate::Error::domain(
                "duplicate_tol and exploration_jitter must be non-negative",
            ));
        }
        Ok(())
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `E[max(0, f_best − ξ − Y)]` for `Y ~ N(mean, sd²)`.
///
/// At `sd = 0` this is the plain improvement `max(0, f_best − mean − ξ)`.
pub fn expected_improvement(mean: f64, sd: f64, f_best: f64, xi: f64) -> f64 {
    let gain = f_best - mean - xi;
    if sd <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    (gain * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub point: HyperPoint,
    /// Free-dimension unit coordinates of `point`.
    pub unit: Vec<f64>,
    pub expected_improvement: f64,
    /// No non-duplicate candidate was found; `point` repeats a probed setting.
    pub duplicate_fallback: bool,
}

struct Scorer<'a> {
    model: &'a GpModel,
    f_best: f64,
    xi: f64,
}

impl Scorer<'_> {
    fn ei(&self, x: &[f64]) -> f64 {
        let (mean, var) = self.model.predict(x);
        expected_improvement(mean, var.sqrt(), self.f_best, self.xi)
    }
}

/// Picks the next point to evaluate.
///
/// Scores a seeded uniform pool over the free unit cube, refines the best
/// non-duplicate candidate by coordinate-wise moves, and returns it. If the
/// whole pool duplicates history the pool is redrawn once at twice the size;
/// failing that the best-scoring point is returned with `duplicate_fallback`.
pub fn propose_next(
    model: &GpModel,
    space: &HyperSpace,
    history: &[HyperPoint],
    cfg: &AcquisitionConfig,
    rng: &mut Rng,
) -> Result<Proposal> {
    cfg.validate()?;
    let dims = model.dims();
    let probed: Vec<Vec<f64>> = history
        .iter()
        .map(|p| space.project(&space.to_unit_clamped(p)))
        .collect();
    let scorer = Scorer {
        model,
        f_best: model.best_target(),
        xi: cfg.exploration_jitter,
    };
    let tol = cfg.duplicate_tol;

    let mut fallback: Option<(Vec<f64>, f64)> = None;
    let mut chosen: Option<(Vec<f64>, f64)> = None;
    for pool_size in [cfg.candidate_pool_size, 2 * cfg.candidate_pool_size] {
        for _ in 0..pool_size {
            let x: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
            let ei = scorer.ei(&x);
            if fallback.as_ref().is_none_or(|(_, best)| ei > *best) {
                fallback = Some((x.clone(), ei));
            }
            if is_duplicate_unit(&x, &probed, tol) {
                continue;
            }
            if chosen.as_ref().is_none_or(|(_, best)| ei > *best) {
                chosen = Some((x, ei));
            }
        }
        if chosen.is_some() {
            break;
        }
    }

    let (unit, ei, duplicate_fallback) = match chosen {
        Some((x, ei)) => {
            let (x, ei) = refine(&scorer, x, ei, &probed, tol, cfg.local_refinement_steps);
            (x, ei, false)
        }
        None => {
            let (x, ei) = fallback.expect("candidate pool is nonempty");
            log::warn!("every acquisition candidate duplicates a probed point; repeating one");
            (x, ei, true)
        }
    };
    Ok(Proposal {
        point: space.point_from_free(&unit)?,
        unit,
        expected_improvement: ei,
        duplicate_fallback,
    })
}

/// Coordinate-wise pattern search on EI, staying inside the cube and away
/// from probed points.
fn refine(
    scorer: &Scorer,
    mut x: Vec<f64>,
    mut ei: f64,
    probed: &[Vec<f64>],
    tol: f64,
    steps: usize,
) -> (Vec<f64>, f64) {
    let dims = x.len();
    let mut h = 0.05;
    let mut improved_in_sweep = false;
    for step in 0..steps {
        let d = step % dims;
        for dir in [1.0, -1.0] {
            let mut trial = x.clone();
            trial[d] = (trial[d] + dir * h).clamp(0.0, 1.0);
            if trial[d] == x[d] || is_duplicate_unit(&trial, probed, tol) {
                continue;
            }
            let t = scorer.ei(&trial);
            if t > ei {
                x = trial;
                ei = t;
                improved_in_sweep = true;
                break;
            }
        }
        if d == dims - 1 {
            if !improved_in_sweep {
                h *= 0.5;
            }
            improved_in_sweep = false;
        }
    }
    (x, ei)
}
