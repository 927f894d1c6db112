//! Local quadratic surrogate of the objective inside a proposal box.
//!
//! A full degree-2 polynomial is least-squares fitted to objective
//! values at points sampled from the box; at inference time it replaces
//! simulator runs inside that box.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RomcError};
use crate::model::ObjectiveProblem;
use crate::regions::{box_sample, BoundingBox};

/// Fitted degree-2 polynomial in D variables.
///
/// Coefficient layout: constant, D linear terms, then the D(D+1)/2
/// products theta_i * theta_j for i <= j in lexicographic order.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    dim: usize,
    coefficients: Vec<f64>,
    training_rmse: f64,
}

/// Number of monomials of degree <= 2 in `dim` variables.
pub fn quadratic_basis_size(dim: usize) -> usize {
    1 + dim + dim * (dim + 1) / 2
}

fn basis_row(theta: &[f64], row: &mut [f64]) {
    row[0] = 1.0;
    let dim = theta.len();
    row[1..=dim].copy_from_slice(theta);
    let mut k = dim + 1;
    for i in 0..dim {
        for j in i..dim {
            row[k] = theta[i] * theta[j];
            k += 1;
        }
    }
}

impl QuadraticModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn training_rmse(&self) -> f64 {
        self.training_rmse
    }

    pub fn predict(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dim);
        let dim = self.dim;
        let mut acc = self.coefficients[0];
        for (c, t) in self.coefficients[1..=dim].iter().zip(theta) {
            acc += c * t;
        }
        let mut k = dim + 1;
        for i in 0..dim {
            for j in i..dim {
                acc += self.coefficients[k] * theta[i] * theta[j];
                k += 1;
            }
        }
        acc
    }
}

/// Least-squares fit of the quadratic basis to labelled points.
pub fn fit_quadratic(points: &[Vec<f64>], labels: &[f64]) -> Result<QuadraticModel> {
    let n = points.len();
    if n == 0 || n != labels.len() {
        return Err(RomcError::InvalidArgument(
            "fit_quadratic needs matching nonempty points and labels".into(),
        ));
    }
    let dim = points[0].len();
    let basis = quadratic_basis_size(dim);
    if n < basis {
        return Err(RomcError::InvalidArgument(format!(
            "{n} training points cannot determine {basis} quadratic coefficients"
        )));
    }
    let mut design = DMatrix::zeros(n, basis);
    for (i, p) in points.iter().enumerate() {
        let mut row = vec![0.0; basis];
        basis_row(p, &mut row);
        for (j, v) in row.iter().enumerate() {
            design[(i, j)] = *v;
        }
    }
    let y = DVector::from_column_slice(labels);

    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let coefficients = if svd.singular_values.min() > 1e-10 * max_sv {
        svd.solve(&y, 1e-14 * max_sv)
            .map_err(|e| RomcError::FitError(e.to_string()))?
    } else {
        // near-singular design: ridge-regularised normal equations
        let mut gram = design.transpose() * &design;
        for i in 0..basis {
            gram[(i, i)] += 1e-10;
        }
        let rhs = design.transpose() * &y;
        gram.cholesky()
            .ok_or_else(|| {
                RomcError::FitError("rank-deficient quadratic design matrix (degenerate box)".into())
            })?
            .solve(&rhs)
    };
    let residual = &design * &coefficients - &y;
    let training_rmse = (residual.norm_squared() / n as f64).sqrt();
    Ok(QuadraticModel {
        dim,
        coefficients: coefficients.iter().copied().collect(),
        training_rmse,
    })
}

/// Samples `n_train` points from the box, labels them with the true
/// objective (never a surrogate) and fits the quadratic model.
pub fn fit_box_surrogate(
    problem: &ObjectiveProblem,
    bbox: &BoundingBox,
    n_train: usize,
    seed: u64,
) -> Result<QuadraticModel> {
    if n_train < quadratic_basis_size(bbox.dim()) {
        return Err(RomcError::InvalidArgument(format!(
            "n_train = {n_train} below quadratic basis size {}",
            quadratic_basis_size(bbox.dim())
        )));
    }
    let points = box_sample(bbox, n_train, seed);
    let labels = points
        .iter()
        .map(|p| problem.eval(p))
        .collect::<Result<Vec<f64>>>()?;
    fit_quadratic(&points, &labels)
}

/// Fits the local surrogate on the problem's first region and stores it
/// on the problem.
pub fn fit_local_surrogate(
    problem: &mut ObjectiveProblem,
    n_train: usize,
    seed: u64,
) -> Result<()> {
    let bbox = problem
        .regions()
        .first()
        .ok_or_else(|| {
            RomcError::InvalidArgument(format!("problem {} has no region to fit", problem.index))
        })?
        .clone();
    let model = fit_box_surrogate(problem, &bbox, n_train, seed)?;
    problem.set_local_surrogate(model);
    Ok(())
}

/// Default training-set size for local surrogates.
pub const DEFAULT_N_TRAIN: usize = 30;
