//! Derivative-based solver for the deterministic objectives.
//!
//! Gradients come from central finite differences; the search direction
//! is a BFGS quasi-Newton step safeguarded by Armijo backtracking, with
//! iterates clamped to the problem bounds. Plain steepest descent stalls
//! on the flat quartic floors these objectives produce, so the curvature
//! update is required to hit the gradient tolerance within the iteration
//! budget.

use crate::error::{Result, RomcError};
use crate::model::ObjectiveProblem;

/// Solver settings for [`solve_gradients`].
#[derive(Debug, Clone)]
pub struct GradOpts {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub init_step: f64,
    /// Relative finite-difference step; per-coordinate h = fd_step * max(1, |theta_d|).
    pub fd_step: f64,
}

impl Default for GradOpts {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-5,
            step_tol: 1e-8,
            armijo_c: 1e-4,
            backtrack: 0.5,
            init_step: 1.0,
            fd_step: 1e-5,
        }
    }
}

/// Outcome of one optimisation run.
#[derive(Debug, Clone)]
pub struct OptimResult {
    pub theta_star: Vec<f64>,
    /// Objective value at `theta_star`, re-evaluated at storage time.
    pub d_star: f64,
    /// True iff the gradient or step tolerance was met before `max_iters`.
    pub success: bool,
    pub n_evals: usize,
    pub gradient_at_star: Vec<f64>,
}

/// Central finite differences: `(f(x + h e_d) - f(x - h e_d)) / (2h)` per
/// coordinate, exactly 2D evaluations of `f`.
pub fn finite_diff_gradient<F>(f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(RomcError::InvalidArgument("finite-difference step must be > 0".into()));
    }
    let mut grad = Vec::with_capacity(theta.len());
    let mut point = theta.to_vec();
    for d in 0..theta.len() {
        point[d] = theta[d] + h;
        let plus = f(&point)?;
        point[d] = theta[d] - h;
        let minus = f(&point)?;
        point[d] = theta[d];
        let g = (plus - minus) / (2.0 * h);
        if !g.is_finite() {
            return Err(RomcError::Evaluation {
                theta: theta.to_vec(),
                seed: None,
                message: format!("non-finite finite-difference gradient in coordinate {d}"),
            });
        }
        grad.push(g);
    }
    Ok(grad)
}

fn fd_gradient_scaled<F>(f: &F, theta: &[f64], rel: f64, evals: &mut usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut grad = Vec::with_capacity(theta.len());
    let mut point = theta.to_vec();
    for d in 0..theta.len() {
        let h = rel * theta[d].abs().max(1.0);
        point[d] = theta[d] + h;
        let plus = f(&point)?;
        point[d] = theta[d] - h;
        let minus = f(&point)?;
        point[d] = theta[d];
        *evals += 2;
        let g = (plus - minus) / (2.0 * h);
        if !g.is_finite() {
            return Err(RomcError::Evaluation {
                theta: theta.to_vec(),
                seed: None,
                message: format!("non-finite gradient in coordinate {d}"),
            });
        }
        grad.push(g);
    }
    Ok(grad)
}

fn clamp_to_bounds(theta: &mut [f64], bounds: &[(f64, f64)]) {
    for (t, &(lo, hi)) in theta.iter_mut().zip(bounds) {
        *t = t.clamp(lo, hi);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Identity matrix as a flat row-major buffer.
fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|i| dot(&m[i * d..(i + 1) * d], v)).collect()
}

/// BFGS inverse-Hessian update: H <- (I - rho s y') H (I - rho y s') + rho s s'.
fn bfgs_update(h_inv: &mut [f64], s: &[f64], y: &[f64]) {
    let d = s.len();
    let sy = dot(s, y);
    if sy <= 1e-12 * norm(s) * norm(y) {
        return; // curvature condition failed; keep the previous estimate
    }
    let rho = 1.0 / sy;
    let hy = mat_vec(h_inv, y);
    let yhy = dot(y, &hy);
    let mut updated = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            updated[i * d + j] = h_inv[i * d + j] - rho * (s[i] * hy[j] + hy[i] * s[j])
                + rho * rho * yhy * s[i] * s[j]
                + rho * s[i] * s[j];
        }
    }
    h_inv.copy_from_slice(&updated);
}

/// Minimises g_i from `start`, returning the best point found.
///
/// Success means the gradient norm dropped below `grad_tol` or the
/// accepted step below `step_tol` within the iteration budget; iterates
/// never leave `problem.bounds`.
pub fn solve_gradients(
    problem: &ObjectiveProblem,
    start: &[f64],
    opts: &GradOpts,
) -> Result<OptimResult> {
    if opts.max_iters < 1 {
        return Err(RomcError::InvalidArgument("max_iters must be >= 1".into()));
    }
    for (t, &(lo, hi)) in start.iter().zip(&problem.bounds) {
        if *t < lo || *t > hi {
            return Err(RomcError::InvalidArgument(format!(
                "start point {t} outside bounds ({lo}, {hi})"
            )));
        }
    }
    let g = |theta: &[f64]| problem.eval(theta);
    let fail = |e: RomcError| RomcError::OptimisationFailed {
        problem: problem.index,
        message: e.to_string(),
    };

    let dim = start.len();
    let mut x = start.to_vec();
    let mut evals = 0usize;
    let mut fx = g(&x).map_err(fail)?;
    evals += 1;
    let mut grad = fd_gradient_scaled(&g, &x, opts.fd_step, &mut evals).map_err(fail)?;
    let mut h_inv = identity(dim);
    let mut converged = false;

    for _ in 0..opts.max_iters {
        if norm(&grad) < opts.grad_tol {
            converged = true;
            break;
        }
        let mut dir: Vec<f64> = mat_vec(&h_inv, &grad).iter().map(|v| -v).collect();
        let slope = dot(&dir, &grad);
        if !(slope < 0.0) {
            // quasi-Newton direction lost descent; restart from steepest descent
            dir = grad.iter().map(|v| -v).collect();
            h_inv = identity(dim);
        }
        let slope = dot(&dir, &grad);
        let dir_norm = norm(&dir);

        let mut step = opts.init_step;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        loop {
            let mut cand: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            clamp_to_bounds(&mut cand, &problem.bounds);
            let fc = g(&cand).map_err(fail)?;
            evals += 1;
            if fc <= fx + opts.armijo_c * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= opts.backtrack;
            if step * dir_norm < opts.step_tol {
                break;
            }
        }

        let Some((x_new, f_new)) = accepted else {
            // no decrease possible above the step floor: converged in step
            converged = true;
            break;
        };
        let displacement: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        if norm(&displacement) < opts.step_tol {
            x = x_new;
            converged = true;
            break;
        }
        let grad_new = fd_gradient_scaled(&g, &x_new, opts.fd_step, &mut evals).map_err(fail)?;
        let grad_delta: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        bfgs_update(&mut h_inv, &displacement, &grad_delta);
        x = x_new;
        fx = f_new;
        grad = grad_new;
    }

    let gradient_at_star = fd_gradient_scaled(&g, &x, opts.fd_step, &mut evals).map_err(fail)?;
    let d_star = g(&x).map_err(fail)?;
    evals += 1;
    Ok(OptimResult {
        theta_star: x,
        d_star,
        success: converged,
        n_evals: evals,
        gradient_at_star,
    })
}

/// Indices of results that converged with `d_star <= eps_filter`,
/// preserving input order.
pub fn filter_solutions(results: &[OptimResult], eps_filter: f64) -> Vec<usize> {
    results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.success && r.d_star <= eps_filter)
        .map(|(i, _)| i)
        .collect()
}

/// Empirical quantile of the optimal distances: sort ascending and take
/// the element at index `ceil(quantile * n) - 1`, clamped to the valid
/// range.
pub fn compute_eps(d_stars: &[f64], quantile: f64) -> Result<f64> {
    if d_stars.is_empty() {
        return Err(RomcError::InvalidArgument("empty distance list".into()));
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(RomcError::InvalidArgument(format!(
            "quantile {quantile} outside [0, 1]"
        )));
    }
    let mut sorted = d_stars.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite distance"));
    let n = sorted.len();
    let target = quantile * n as f64;
    // round-to-nearest guards against float fuzz when quantile * n is integral
    let k = if (target - target.round()).abs() < 1e-9 {
        target.round()
    } else {
        target.ceil()
    };
    let idx = (k as isize - 1).clamp(0, n as isize - 1) as usize;
    Ok(sorted[idx])
}
