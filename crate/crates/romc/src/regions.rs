//! Proposal-region construction around accepted optima.
//!
//! Around each accepted theta* we grow a rotated box: search directions
//! are the eigenvectors of the rank-one curvature estimate H = g g' at
//! theta* (standard basis when the gradient vanishes), and the extent
//! along each signed direction comes from a step-and-refine line search
//! against the acceptance threshold. The box carries the uniform
//! proposal used later for importance sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, RomcError};
use crate::model::{DistanceFn, ObjectiveProblem};

/// Rotated box: orthonormal direction rows with independent negative and
/// positive extents around the center.
#[derive(Debug, Clone)]
pub struct BoundingBox {
    center: Vec<f64>,
    directions: Vec<Vec<f64>>,
    neg: Vec<f64>,
    pos: Vec<f64>,
    volume: f64,
}

impl BoundingBox {
    /// `limits[d] = (neg_extent, pos_extent)` along `directions[d]`, both
    /// strictly positive.
    pub fn new(
        center: Vec<f64>,
        directions: Vec<Vec<f64>>,
        limits: &[(f64, f64)],
    ) -> Result<Self> {
        let dim = center.len();
        if directions.len() != dim || limits.len() != dim {
            return Err(RomcError::InvalidArgument(
                "directions/limits dimension mismatch".into(),
            ));
        }
        for i in 0..dim {
            for j in 0..dim {
                let d = dot(&directions[i], &directions[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                if (d - expect).abs() > 1e-8 {
                    return Err(RomcError::InvalidArgument(
                        "directions are not orthonormal".into(),
                    ));
                }
            }
        }
        let mut volume = 1.0;
        for &(neg, pos) in limits {
            if !(neg > 0.0 && pos > 0.0) {
                return Err(RomcError::InvalidArgument(
                    "box extents must be strictly positive".into(),
                ));
            }
            volume *= neg + pos;
        }
        Ok(Self {
            center,
            neg: limits.iter().map(|l| l.0).collect(),
            pos: limits.iter().map(|l| l.1).collect(),
            directions,
            volume,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// Per-direction (neg_extent, pos_extent) pairs.
    pub fn limits(&self) -> Vec<(f64, f64)> {
        self.neg.iter().copied().zip(self.pos.iter().copied()).collect()
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Back-projects theta onto the direction basis.
    fn coefficients(&self, theta: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = theta.iter().zip(&self.center).map(|(t, c)| t - c).collect();
        self.directions.iter().map(|v| dot(v, &centered)).collect()
    }

    /// True iff every back-projected coefficient lies inside its extent
    /// interval (inclusive, with slack for round-off).
    pub fn contains(&self, theta: &[f64]) -> bool {
        self.coefficients(theta)
            .iter()
            .zip(self.neg.iter().zip(&self.pos))
            .all(|(c, (neg, pos))| {
                let slack = 1e-9 * (neg + pos).max(1.0);
                *c >= -neg - slack && *c <= pos + slack
            })
    }

    /// Smallest axis-aligned box enclosing this one, as (lo, hi) pairs.
    pub fn enclosing_bounds(&self) -> Vec<(f64, f64)> {
        (0..self.dim())
            .map(|axis| {
                let mut spread = 0.0;
                for d in 0..self.dim() {
                    spread += self.directions[d][axis].abs() * self.neg[d].max(self.pos[d]);
                }
                (self.center[axis] - spread, self.center[axis] + spread)
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Search directions from the curvature estimate H = g g'.
///
/// The gradient direction is the only eigenvector with nonzero
/// eigenvalue; the rest complete it to an orthonormal basis. A vanishing
/// gradient means H is singular and the standard basis is returned.
pub fn curvature_directions(gradient: &[f64]) -> Vec<Vec<f64>> {
    let dim = gradient.len();
    let standard_basis = || {
        (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect::<Vec<_>>()
    };
    let g_norm = norm(gradient);
    if g_norm < 1e-8 {
        return standard_basis();
    }
    let mut rows: Vec<Vec<f64>> = vec![gradient.iter().map(|g| g / g_norm).collect()];
    // modified Gram-Schmidt over the standard basis
    for i in 0..dim {
        if rows.len() == dim {
            break;
        }
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        for row in &rows {
            let proj = dot(&v, row);
            for (vk, rk) in v.iter_mut().zip(row) {
                *vk -= proj * rk;
            }
        }
        let v_norm = norm(&v);
        if v_norm > 1e-8 {
            rows.push(v.iter().map(|x| x / v_norm).collect());
        }
    }
    debug_assert_eq!(rows.len(), dim);
    rows
}

/// Line search of Algorithm-style step/refine form: march by eta while
/// the distance stays inside eps, step back on exit, halve eta, repeat
/// `k_refine` times. `cap` bounds the total expansion.
fn extent_along(
    distance: &DistanceFn,
    center: &[f64],
    direction: &[f64],
    eps: f64,
    eta0: f64,
    k_refine: usize,
    cap: f64,
) -> Result<f64> {
    let mut offset = 0.0;
    let mut eta = eta0;
    let mut point = vec![0.0; center.len()];
    for _ in 0..k_refine {
        loop {
            let trial = offset + eta;
            if trial > cap {
                break;
            }
            for (p, (c, v)) in point.iter_mut().zip(center.iter().zip(direction)) {
                *p = c + trial * v;
            }
            if distance(&point)? > eps {
                break;
            }
            offset = trial;
        }
        eta /= 2.0;
    }
    // floor keeps the box from collapsing when theta* sits on the boundary
    Ok(offset.max(eta0 / (1u64 << k_refine) as f64))
}

/// Builds the proposal box for an already-solved problem.
///
/// With `use_surrogate` set and a surrogate available (Bayesian
/// optimisation path), the line searches query the surrogate instead of
/// running the simulator.
pub fn build_box(
    problem: &ObjectiveProblem,
    eps_region: f64,
    eta0: f64,
    k_refine: usize,
    use_surrogate: bool,
) -> Result<BoundingBox> {
    if k_refine < 1 || eta0 <= 0.0 {
        return Err(RomcError::InvalidArgument(
            "build_box needs k_refine >= 1 and eta0 > 0".into(),
        ));
    }
    let result = problem.result().ok_or_else(|| {
        RomcError::InvalidArgument(format!("problem {} has no optimisation result", problem.index))
    })?;
    if result.d_star > eps_region {
        return Err(RomcError::InvalidArgument(format!(
            "problem {}: d* = {} exceeds eps_region = {}",
            problem.index, result.d_star, eps_region
        )));
    }
    let distance = if use_surrogate {
        problem.surrogate().unwrap_or_else(|| problem.objective())
    } else {
        problem.objective()
    };
    let directions = curvature_directions(&result.gradient_at_star);
    // expansion cap: the bounds-box diagonal bounds any in-bounds excursion
    let cap = problem
        .bounds
        .iter()
        .map(|(lo, hi)| (hi - lo) * (hi - lo))
        .sum::<f64>()
        .sqrt();
    let center = result.theta_star.clone();
    let mut limits = Vec::with_capacity(directions.len());
    let mut flipped = vec![0.0; center.len()];
    for direction in &directions {
        let pos = extent_along(&distance, &center, direction, eps_region, eta0, k_refine, cap)?;
        for (f, v) in flipped.iter_mut().zip(direction) {
            *f = -v;
        }
        let neg = extent_along(&distance, &center, &flipped, eps_region, eta0, k_refine, cap)?;
        limits.push((neg, pos));
    }
    BoundingBox::new(center, directions, &limits)
}

/// Draws `n` uniform points from the box, deterministically in `seed`.
pub fn box_sample(bbox: &BoundingBox, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = bbox.dim();
    (0..n)
        .map(|_| {
            let mut theta = bbox.center.to_vec();
            for d in 0..dim {
                let c = rng.random_range(-bbox.neg[d]..bbox.pos[d]);
                for (t, v) in theta.iter_mut().zip(&bbox.directions[d]) {
                    *t += c * v;
                }
            }
            theta
        })
        .collect()
}

/// Density of the uniform distribution on the box: 1/volume inside,
/// zero outside.
pub fn box_pdf(bbox: &BoundingBox, theta: &[f64]) -> f64 {
    if bbox.contains(theta) {
        1.0 / bbox.volume
    } else {
        0.0
    }
}
