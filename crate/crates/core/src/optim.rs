//! Limited-memory BFGS with Armijo backtracking line search.
//!
//! Deterministic by construction: fixed initialization, fixed-order
//! arithmetic, no randomness. Sufficient for the convex MAP objective this
//! crate trains; the two-loop recursion keeps memory at O(m * dim).

use crate::error::{Error, Result};

/// Objective providing value and gradient at a point.
pub trait Objective {
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self(x)
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    /// Convergence when the L2 norm of the gradient drops below this.
    pub grad_tol: f64,
    /// History pairs kept for the inverse-Hessian approximation.
    pub history: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            grad_tol: 1e-6,
            history: 10,
            armijo_c1: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimize `objective` starting from `x0`.
///
/// The line search only ever accepts a sufficient decrease, so the value
/// sequence is non-increasing. Returns [`Error::NonFiniteLoss`] if the
/// objective produces NaN or infinity.
pub fn minimize<O: Objective>(objective: &O, x0: Vec<f64>, opts: &LbfgsOptions) -> Result<Minimum> {
    let dim = x0.len();
    let mut x = x0;
    let (mut fx, mut grad) = objective.value_and_gradient(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteLoss(0));
    }
    let initial_value = fx;

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    let mut iterations = 0;
    let mut converged = norm(&grad) < opts.grad_tol;

    while !converged && iterations < opts.max_iter {
        // Two-loop recursion: d = -H * grad.
        let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for i in (0..k).rev() {
            let alpha = rho_hist[i] * dot(&s_hist[i], &d);
            alphas[i] = alpha;
            for (dj, yj) in d.iter_mut().zip(&y_hist[i]) {
                *dj -= alpha * yj;
            }
        }
        if k > 0 {
            let last = k - 1;
            let yy = dot(&y_hist[last], &y_hist[last]);
            if yy > 0.0 {
                let gamma = 1.0 / (rho_hist[last] * yy);
                for dj in d.iter_mut() {
                    *dj *= gamma;
                }
            }
        }
        for i in 0..k {
            let beta = rho_hist[i] * dot(&y_hist[i], &d);
            for (dj, sj) in d.iter_mut().zip(&s_hist[i]) {
                *dj += (alphas[i] - beta) * sj;
            }
        }

        let mut directional = dot(&grad, &d);
        if directional >= 0.0 {
            // Fall back to steepest descent if curvature info went stale.
            d = grad.iter().map(|g| -g).collect();
            directional = dot(&grad, &d);
            if directional == 0.0 {
                converged = true;
                break;
            }
        }

        // Backtracking line search with the Armijo condition.
        let mut step = if k == 0 {
            let gnorm = norm(&grad);
            if gnorm > 0.0 {
                (1.0 / gnorm).min(1.0)
            } else {
                1.0
            }
        } else {
            1.0
        };
        let mut accepted = false;
        let mut x_new = vec![0.0; dim];
        let mut fx_new = fx;
        let mut grad_new = grad.clone();
        for _ in 0..opts.max_backtracks {
            for (xn, (xi, di)) in x_new.iter_mut().zip(x.iter().zip(&d)) {
                *xn = xi + step * di;
            }
            let (f_trial, g_trial) = objective.value_and_gradient(&x_new);
            if !f_trial.is_finite() {
                step *= 0.5;
                continue;
            }
            if f_trial <= fx + opts.armijo_c1 * step * directional {
                fx_new = f_trial;
                grad_new = g_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No acceptable step: gradient is numerically exhausted.
            break;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if s_hist.len() == opts.history {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(y);
        }

        x = x_new;
        fx = fx_new;
        grad = grad_new;
        iterations += 1;
        if !fx.is_finite() {
            return Err(Error::NonFiniteLoss(iterations));
        }
        converged = norm(&grad) < opts.grad_tol;
    }

    Ok(Minimum {
        grad_norm: norm(&grad),
        x,
        value: fx,
        initial_value,
        iterations,
        converged,
    })
}
