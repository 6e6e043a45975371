//! Cross-checks against the straight-line implementations in
//! `rcopt-oracles`. Shared by the core test suite and the acceptance run;
//! each check returns a one-line summary or the first mismatch.

use nalgebra::DMatrix;
use rand::Rng as _;
use rcopt::acquisition::expected_improvement;
use rcopt::gp::{GpModel, KernelParams};
use rcopt::hyperspace::HyperPoint;
use rcopt::readout::{ridge_train, TrainingConfig};
use rcopt::reservoir::{Reservoir, ReservoirConfig, StorageKind};
use rcopt::rng::substream;
use rcopt_oracles as oracle;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn to_rows(m: &DMatrix<f64>) -> oracle::Matrix {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// 100 instances of up to 50 points in up to 4 dimensions; mean, variance
/// and log marginal likelihood to 1e-8.
pub fn gp() -> Result<String, String> {
    let mut rng = substream(2024, 0);
    let mut worst: f64 = 0.0;
    for instance in 0..100 {
        let n = rng.random_range(2..=50);
        let dims = rng.random_range(1..=4);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dims).map(|_| rng.random::<f64>()).collect())
            .collect();
        let values: Vec<f64> = points
            .iter()
            .map(|p| p.iter().enumerate().map(|(d, x)| ((d + 1) as f64 * 3.0 * x).sin()).sum::<f64>())
            .collect();
        let params = KernelParams {
            signal_variance: rng.random_range(0.2..3.0),
            length_scales: (0..dims).map(|_| rng.random_range(0.1..1.5)).collect(),
            noise_variance: 10f64.powf(rng.random_range(-4.0..-1.0)),
        };
        let model = GpModel::with_params(&points, &values, params.clone()).map_err(|e| e.to_string())?;

        let dense = oracle::DenseGp {
            points: points.clone(),
            targets: model.standardised_targets().iter().copied().collect(),
            signal_variance: params.signal_variance,
            length_scales: params.length_scales.clone(),
            diagonal: params.noise_variance + model.jitter(),
        };
        let lml = dense.log_marginal_likelihood();
        let got = model.log_marginal_likelihood();
        ensure!(rel_close(got, lml, 1e-8), "instance {instance}: lml {got} vs {lml}");
        worst = worst.max((got - lml).abs() / lml.abs().max(1.0));

        let scale = model.target_scale();
        for _ in 0..5 {
            let x: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
            let (mean, var) = model.predict(&x);
            let (m_std, v_std) = dense.posterior(&x);
            let m_ref = model.prior_mean() + scale * m_std;
            let v_ref = v_std.max(0.0) * scale * scale;
            ensure!(rel_close(mean, m_ref, 1e-8), "instance {instance}: mean {mean} vs {m_ref}");
            // Variances are differences of O(σ_f²) terms; compare on that scale.
            let var_scale = params.signal_variance * scale * scale;
            ensure!(
                (var - v_ref).abs() <= 1e-8 * var_scale,
                "instance {instance}: var {var} vs {v_ref}"
            );
            worst = worst
                .max((mean - m_ref).abs() / mean.abs().max(m_ref.abs()).max(1.0))
                .max((var - v_ref).abs() / var_scale);
        }
    }
    Ok(format!("100 instances, worst relative error {worst:.1e}"))
}

/// 20 (mean, sd) pairs against 10⁶-sample Monte Carlo, plus the sd = 0 limit.
pub fn expected_improvement_checks() -> Result<String, String> {
    let f_best = 0.0;
    let mut case = 0;
    let mut worst: f64 = 0.0;
    // Kept where the tail mass is large enough for the sample to see it.
    for mean in [-1.0, -0.3, 0.0, 0.3, 0.8] {
        for sd in [0.2, 0.5, 1.0, 2.0] {
            let closed = expected_improvement(mean, sd, f_best, 0.0);
            let (mc, se) = oracle::monte_carlo_ei(mean, sd, f_best, 0.0, 1_000_000, 100 + case);
            ensure!(
                (closed - mc).abs() <= 3.0 * se,
                "mean {mean}, sd {sd}: closed {closed} vs MC {mc} ± {se}"
            );
            worst = worst.max((closed - mc).abs() / se);
            case += 1;
        }
    }
    ensure!(case == 20, "{case} grid points");
    for mean in [-2.0, -0.5, 0.0, 0.5, 3.0] {
        let ei = expected_improvement(mean, 0.0, f_best, 0.0);
        ensure!(ei == (f_best - mean).max(0.0), "sd 0, mean {mean}: {ei}");
    }
    Ok(format!("20 grid points, worst deviation {worst:.2} standard errors; sd = 0 exact"))
}

/// 40 × 8 instances: normal equations to 1e-10, stationarity to 1e-8.
pub fn ridge() -> Result<String, String> {
    let mut rng = substream(77, 0);
    for instance in 0..20 {
        let s = DMatrix::from_fn(40, 8, |_, _| rng.random_range(-1.0..1.0));
        let d = DMatrix::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0));
        let lambda = 10f64.powf(rng.random_range(-6.0..1.0));
        let cfg = TrainingConfig {
            ridge_lambda: lambda,
            include_bias: false,
            tune_lambda: false,
        };
        let w = ridge_train(&s, &d, &cfg).map_err(|e| e.to_string())?.to_matrix();
        let reference = oracle::ridge_normal_equations(&to_rows(&s), &to_rows(&d), lambda);
        for i in 0..8 {
            for c in 0..3 {
                ensure!(
                    (w[(i, c)] - reference[i][c]).abs() <= 1e-10 * reference[i][c].abs().max(1.0),
                    "instance {instance}: w[{i},{c}] {} vs {}",
                    w[(i, c)],
                    reference[i][c]
                );
            }
        }
        // Stationarity: Sᵀ(D − S·w) = λw.
        let lhs = s.transpose() * (&d - &s * &w);
        let rhs = &w * lambda;
        let scale = lhs.amax().max(rhs.amax()).max(1.0);
        let residual = (lhs - rhs).amax();
        ensure!(residual <= 1e-8 * scale, "instance {instance}: stationarity residual {residual}");
    }
    Ok("20 instances of 40 × 8".into())
}

/// 50-step trajectories at N = 32, bit for bit, through both storages.
pub fn reservoir() -> Result<String, String> {
    for (seed, quantised, rho) in [(1, true, 0.05), (2, false, 0.05), (3, true, 0.6), (4, false, 1.0)] {
        let point = HyperPoint::new(0.8, 0.3, 0.05, rho);
        let mut cfg = ReservoirConfig::new(32, 5, point, seed);
        cfg.quantisation_enabled = quantised;
        let reservoir = Reservoir::generate(&cfg).map_err(|e| e.to_string())?;
        let mut rng = substream(seed, 99);
        let inputs = DMatrix::from_fn(50, 5, |_, _| rng.random_range(-2.0..2.0));

        let got = reservoir.run(&inputs).map_err(|e| e.to_string())?;
        let reference = oracle::reference_trajectory(
            &to_rows(&reservoir.interconnection.to_dense()),
            &to_rows(reservoir.mask.matrix()),
            &to_rows(&inputs),
            cfg.i0,
            quantised.then_some((cfg.quant_in_bits, cfg.quant_out_bits)),
        );
        for t in 0..50 {
            for i in 0..32 {
                ensure!(
                    got[(t, i)].to_bits() == reference[t][i].to_bits(),
                    "seed {seed}, step {t}, node {i}: {} vs {}",
                    got[(t, i)],
                    reference[t][i]
                );
            }
        }

        for kind in [StorageKind::Sparse, StorageKind::Dense] {
            let other = Reservoir {
                interconnection: reservoir.interconnection.with_storage(kind),
                ..reservoir.clone()
            };
            let again = other.run(&inputs).map_err(|e| e.to_string())?;
            ensure!(
                got.iter().zip(again.iter()).all(|(a, b)| a.to_bits() == b.to_bits()),
                "seed {seed}: {kind:?} storage differs"
            );
        }
    }
    Ok("4 reservoirs, quantised and not, sparse and dense".into())
}
