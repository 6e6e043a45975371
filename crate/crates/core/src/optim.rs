//! Unconstrained BFGS with Armijo backtracking, used for kernel fitting.

// Stopping rules follow the usual L-BFGS-B defaults.
const GRAD_TOL: f64 = 1e-5;
const REL_TOL: f64 = 2.2e-9;

pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimises the function whose value `value` computes, with `gradient`
/// supplying the derivative at points the line search accepts. `value` may
/// return state (such as a factorisation) for `gradient` to reuse. Non-finite
/// values are treated as +∞ and rejected by the line search.
pub fn bfgs<S, F, G>(mut value: F, mut gradient: G, x0: &[f64], max_evals: usize) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, S),
    G: FnMut(&[f64], S) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, state) = value(&x);
    let mut evals = 1;
    if !fx.is_finite() {
        return Minimum {
            x,
            value: f64::INFINITY,
            evaluations: evals,
        };
    }
    let mut g = gradient(&x, state);
    let mut h = identity(n);
    let mut first = true;

    while evals < max_evals {
        let gnorm = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gnorm < GRAD_TOL {
            break;
        }
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            h = identity(n);
            p = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut t = if first { (1.0 / gnorm).min(1.0) } else { 1.0 };
        first = false;

        // Armijo backtracking; each cut minimises the quadratic through
        // f(0), f'(0) and f(t), kept within [0.1 t, 0.5 t].
        let mut accepted = None;
        while evals < max_evals && t > 1e-12 {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + t * pi).collect();
            let (ft, state) = value(&trial);
            evals += 1;
            if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft, state));
                break;
            }
            t = if ft.is_finite() {
                let curvature = ft - fx - slope * t;
                (-slope * t * t / (2.0 * curvature)).clamp(0.1 * t, 0.5 * t)
            } else {
                0.1 * t
            };
        }
        let Some((x_new, f_new, state)) = accepted else {
            break;
        };
        let g_new = gradient(&x_new, state);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        let converged = fx - f_new <= REL_TOL * fx.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        if converged {
            break;
        }
    }
    Minimum {
        x,
        value: fx,
        evaluations: evals,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}
