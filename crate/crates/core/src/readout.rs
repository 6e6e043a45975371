//! Linear readout: ridge training, NMSE and winner-takes-all classification.

use std::io::{BufRead, Write};

use nalgebra::{Cholesky, DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_io;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Ridge regularisation strength λ ≥ 0.
    pub ridge_lambda: f64,
    /// Fit an unregularised constant term per output.
    pub include_bias: bool,
    /// Select λ on a validation split of the training sequences before the
    /// final fit (see `tasks`).
    pub tune_lambda: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            ridge_lambda: 1e-4,
            include_bias: true,
            tune_lambda: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(Error::domain(format!(
                "ridge_lambda must be a finite non-negative number, got {}",
                self.ridge_lambda
            )));
        }
        Ok(())
    }
}

/// N × C readout weights with an optional bias row.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutWeights {
    pub weights: DMatrix<f64>,
    pub bias: Option<RowDVector<f64>>,
}

impl ReadoutWeights {
    /// Outputs `y = S·w (+ bias)` for states S (T × N); result is T × C.
    pub fn outputs(&self, states: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = states * &self.weights;
        if let Some(bias) = &self.bias {
            for mut row in y.row_iter_mut() {
                row += bias;
            }
        }
        y
    }

    /// Weights stacked over the bias row, if any.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        match &self.bias {
            None => self.weights.clone(),
            Some(b) => {
                let n = self.weights.nrows();
                let mut m = self.weights.clone().insert_row(n, 0.0);
                m.set_row(n, b);
                m
            }
        }
    }

    pub fn from_matrix(m: DMatrix<f64>, has_bias: bool) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("readout weights must be finite"));
        }
        if !has_bias {
            return Ok(ReadoutWeights {
                weights: m,
                bias: None,
            });
        }
        if m.nrows() < 1 {
            return Err(Error::domain("a bias row requires at least one row"));
        }
        let n = m.nrows() - 1;
        let bias = m.row(n).into_owned();
        Ok(ReadoutWeights {
            weights: m.remove_row(n),
            bias: Some(bias),
        })
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        matrix_io::write_matrix(out, &self.to_matrix(), None)
    }

    pub fn read<R: BufRead>(input: R, has_bias: bool) -> Result<Self> {
        let (m, _) = matrix_io::read_matrix(input)?;
        ReadoutWeights::from_matrix(m, has_bias)
    }
}

/// Minimises `‖S·w − D‖² + λ‖w‖²` through a Cholesky solve of the normal
/// equations `(SᵀS + λI) w = SᵀD`. The bias, when requested, is an extra
/// unregularised column of ones.
pub fn ridge_train(
    states: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    cfg: &TrainingConfig,
) -> Result<ReadoutWeights> {
    cfg.validate()?;
    let (t, n) = states.shape();
    if t == 0 {
        return Err(Error::domain("ridge regression needs at least one sample"));
    }
    if targets.nrows() != t {
        return Err(Error::domain(format!(
            "states have {t} rows but targets have {}",
            targets.nrows()
        )));
    }
    if states.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite training data".into()));
    }

    let design = if cfg.include_bias {
        states.clone().insert_column(n, 1.0)
    } else {
        states.clone()
    };
    let p = design.ncols();
    let mut gram = design.tr_mul(&design);
    for i in 0..n {
        gram[(i, i)] += cfg.ridge_lambda;
    }
    let rhs = design.tr_mul(targets);

    let singular = || {
        Error::Singular(format!(
            "normal equations are rank deficient at ridge_lambda = {}; use ridge_lambda > 0",
            cfg.ridge_lambda
        ))
    };
    let max_diag = (0..p).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    let chol = Cholesky::new(gram).ok_or_else(singular)?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if max_diag == 0.0 || min_pivot * min_pivot <= 1e-13 * p as f64 * max_diag {
        return Err(singular());
    }

    let solution = chol.solve(&rhs);
    if cfg.include_bias {
        Ok(ReadoutWeights {
            weights: solution.rows(0, n).into_owned(),
            bias: Some(solution.row(n).into_owned()),
        })
    } else {
        Ok(ReadoutWeights {
            weights: solution,
            bias: None,
        })
    }
}

/// Mean squared error normalised by the (population) variance of `d`.
pub fn nmse(y: &[f64], d: &[f64]) -> Result<f64> {
    if y.len() != d.len() {
        return Err(Error::domain(format!(
            "nmse length mismatch: {} vs {}",
            y.len(),
            d.len()
        )));
    }
    if d.len() < 2 {
        return Err(Error::domain("nmse needs at least two samples"));
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::domain("nmse undefined for a constant target"));
    }
    let mse = y.iter().zip(d).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    Ok(mse / var)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if i == 0 || v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Winner-takes-all per frame, then the most frequent frame class.
/// Ties at either stage resolve to the lowest class index.
pub fn classify_sequence(frame_outputs: &DMatrix<f64>) -> usize {
    let classes = frame_outputs.ncols();
    let mut votes = vec![0usize; classes];
    for row in frame_outputs.row_iter() {
        votes[argmax(row.iter().copied())] += 1;
    }
    argmax(votes.into_iter().map(|v| v as f64))
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::domain(format!(
            "accuracy length mismatch: {} predictions, {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::domain("accuracy of an empty set"));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}
