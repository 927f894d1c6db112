//! Grid tabulation and divergence diagnostics.
//!
//! Low-dimensional densities are tabulated at the centers of a regular
//! grid; the same cells drive the partition-function approximation and
//! the Jensen-Shannon / Kullback-Leibler comparison against a reference
//! posterior.

use std::io::Write;

use crate::error::{Result, RomcError};
use crate::exec::Exec;

/// Function values at the cell centers of a regular grid over `bounds`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    bounds: Vec<(f64, f64)>,
    step: f64,
    counts: Vec<usize>,
    values: Vec<f64>,
}

fn cells_per_dim(lo: f64, hi: f64, step: f64) -> usize {
    let raw = (hi - lo) / step;
    // guard against float fuzz when step divides the range exactly
    let n = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    (n as usize).max(1)
}

impl GridFunction {
    /// Wraps externally computed cell values (e.g. a sample histogram)
    /// on the grid implied by `bounds` and `step`.
    pub fn from_values(bounds: &[(f64, f64)], step: f64, values: Vec<f64>) -> Result<Self> {
        let counts: Vec<usize> = bounds
            .iter()
            .map(|&(lo, hi)| cells_per_dim(lo, hi, step))
            .collect();
        let total: usize = counts.iter().product();
        if values.len() != total {
            return Err(RomcError::InvalidArgument(format!(
                "{} values for a grid of {total} cells",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(RomcError::InvalidArgument(
                "grid values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            bounds: bounds.to_vec(),
            step,
            counts,
            values,
        })
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Cells per dimension; the value vector is their row-major product.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Center coordinates of the flat cell index (first dimension
    /// slowest).
    pub fn cell_center(&self, mut index: usize) -> Vec<f64> {
        let mut center = vec![0.0; self.dim()];
        for d in (0..self.dim()).rev() {
            let i = index % self.counts[d];
            index /= self.counts[d];
            center[d] = self.bounds[d].0 + (i as f64 + 0.5) * self.step;
        }
        center
    }

    /// Riemann integral: sum of values times the cell volume.
    pub fn integral(&self) -> f64 {
        let cell = self.step.powi(self.dim() as i32);
        self.values.iter().sum::<f64>() * cell
    }

    /// Returns a copy rescaled by `factor`.
    pub fn scaled(&self, factor: f64) -> GridFunction {
        GridFunction {
            bounds: self.bounds.clone(),
            step: self.step,
            counts: self.counts.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Writes one row per cell: `theta_1,...,theta_D,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for d in 0..self.dim() {
            write!(w, "theta_{},", d + 1)?;
        }
        writeln!(w, "value")?;
        for (i, v) in self.values.iter().enumerate() {
            for c in self.cell_center(i) {
                write!(w, "{},", crate::pipeline::fmt_f64(c))?;
            }
            writeln!(w, "{}", crate::pipeline::fmt_f64(*v))?;
        }
        Ok(())
    }
}

/// Evaluates `f` at every cell center of the regular grid with the given
/// per-dimension step.
pub fn tabulate<F>(f: F, bounds: &[(f64, f64)], step: f64, exec: Exec) -> Result<GridFunction>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    if step <= 0.0 {
        return Err(RomcError::InvalidArgument("grid step must be > 0".into()));
    }
    if bounds.is_empty() {
        return Err(RomcError::InvalidArgument("empty bounds".into()));
    }
    for &(lo, hi) in bounds {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(RomcError::InvalidArgument(format!(
                "bad grid bounds ({lo}, {hi})"
            )));
        }
    }
    let counts: Vec<usize> = bounds
        .iter()
        .map(|&(lo, hi)| cells_per_dim(lo, hi, step))
        .collect();
    let total: usize = counts.iter().product();
    let shell = GridFunction {
        bounds: bounds.to_vec(),
        step,
        counts: counts.clone(),
        values: Vec::new(),
    };
    let values = exec.try_map(total, |i| {
        let center = shell.cell_center(i);
        let v = f(&center)?;
        if !v.is_finite() || v < 0.0 {
            return Err(RomcError::Evaluation {
                theta: center,
                seed: None,
                message: format!("grid function evaluated to {v}"),
            });
        }
        Ok(v)
    })?;
    Ok(GridFunction {
        bounds: bounds.to_vec(),
        step,
        counts,
        values,
    })
}

/// Divergence family for [`divergence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    JensenShannon,
    KullbackLeibler,
}

fn kl_masses(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi == 0.0 {
                return f64::INFINITY;
            }
            acc += pi * (pi / qi).ln();
        }
    }
    acc
}

/// Divergence between two functions tabulated on the same grid, in nats.
///
/// Both are normalised to probability masses over the cells first, so
/// the result is invariant to the overall scale and the grid step.
pub fn divergence(p: &GridFunction, q: &GridFunction, kind: DivergenceKind) -> Result<f64> {
    if p.bounds != q.bounds || p.step != q.step || p.counts != q.counts {
        return Err(RomcError::InvalidArgument(
            "divergence requires identical grids".into(),
        ));
    }
    let sum_p: f64 = p.values.iter().sum();
    let sum_q: f64 = q.values.iter().sum();
    if sum_p <= 0.0 || sum_q <= 0.0 {
        return Err(RomcError::InvalidArgument(
            "divergence requires positive total mass".into(),
        ));
    }
    let pm: Vec<f64> = p.values.iter().map(|v| v / sum_p).collect();
    let qm: Vec<f64> = q.values.iter().map(|v| v / sum_q).collect();
    Ok(match kind {
        DivergenceKind::KullbackLeibler => kl_masses(&pm, &qm),
        DivergenceKind::JensenShannon => {
            let m: Vec<f64> = pm.iter().zip(&qm).map(|(a, b)| 0.5 * (a + b)).collect();
            0.5 * kl_masses(&pm, &m) + 0.5 * kl_masses(&qm, &m)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn normal_pdf(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn constant_function_tabulates_per_cell() {
        let g = tabulate(|_| Ok(1.0), &[(0.0, 1.0)], 0.25, Exec::Sequential).unwrap();
        assert_eq!(g.len(), 4);
        assert!(g.values().iter().all(|&v| v == 1.0));
        assert!((g.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standard_normal_integrates_to_one() {
        let g = tabulate(|t| Ok(normal_pdf(t[0])), &[(-5.0, 5.0)], 0.01, Exec::Sequential).unwrap();
        assert_eq!(g.len(), 1000);
        assert!((g.integral() - 1.0).abs() < 1e-3, "integral {}", g.integral());
    }

    #[test]
    fn two_dimensional_cell_count_is_the_product() {
        let g = tabulate(|_| Ok(0.5), &[(0.0, 1.0), (0.0, 2.0)], 0.25, Exec::Parallel).unwrap();
        assert_eq!(g.counts(), &[4, 8]);
        assert_eq!(g.len(), 32);
    }

    #[test]
    fn cell_centers_cover_the_grid() {
        let g = tabulate(|_| Ok(1.0), &[(0.0, 1.0), (10.0, 11.0)], 0.5, Exec::Sequential).unwrap();
        let centers: Vec<Vec<f64>> = (0..g.len()).map(|i| g.cell_center(i)).collect();
        assert_eq!(
            centers,
            vec![
                vec![0.25, 10.25],
                vec![0.25, 10.75],
                vec![0.75, 10.25],
                vec![0.75, 10.75],
            ]
        );
    }

    #[test]
    fn non_finite_values_error_with_cell_coordinates() {
        let r = tabulate(
            |t| Ok(if t[0] > 0.5 { f64::NAN } else { 1.0 }),
            &[(0.0, 1.0)],
            0.25,
            Exec::Sequential,
        );
        match r {
            Err(RomcError::Evaluation { theta, .. }) => assert!(theta[0] > 0.5),
            other => panic!("expected evaluation error, got {other:?}"),
        }
    }

    #[test]
    fn identical_grids_have_zero_divergence() {
        let p = tabulate(|t| Ok(normal_pdf(t[0])), &[(-3.0, 3.0)], 0.1, Exec::Sequential).unwrap();
        assert_eq!(divergence(&p, &p, DivergenceKind::JensenShannon).unwrap(), 0.0);
        assert_eq!(divergence(&p, &p, DivergenceKind::KullbackLeibler).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_supports_reach_the_js_ceiling() {
        let p = tabulate(
            |t| Ok(if t[0] < 0.0 { 1.0 } else { 0.0 }),
            &[(-1.0, 1.0)],
            0.1,
            Exec::Sequential,
        )
        .unwrap();
        let q = tabulate(
            |t| Ok(if t[0] > 0.0 { 1.0 } else { 0.0 }),
            &[(-1.0, 1.0)],
            0.1,
            Exec::Sequential,
        )
        .unwrap();
        let js = divergence(&p, &q, DivergenceKind::JensenShannon).unwrap();
        assert!((js - 2.0f64.ln()).abs() < 1e-9, "js {js}");
        assert_eq!(
            divergence(&p, &q, DivergenceKind::KullbackLeibler).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let p = tabulate(|_| Ok(1.0), &[(0.0, 1.0)], 0.25, Exec::Sequential).unwrap();
        let q = tabulate(|_| Ok(1.0), &[(0.0, 1.0)], 0.5, Exec::Sequential).unwrap();
        assert!(divergence(&p, &q, DivergenceKind::JensenShannon).is_err());
    }

    #[test]
    fn divergence_is_step_consistent() {
        // normalising to masses makes the value invariant to re-tabulation
        // with a different step
        let f = |t: &[f64]| Ok(normal_pdf(t[0]));
        let g = |t: &[f64]| Ok(normal_pdf(t[0] - 0.5));
        for step in [0.1, 0.05] {
            let p = tabulate(f, &[(-4.0, 4.0)], step, Exec::Sequential).unwrap();
            let q = tabulate(g, &[(-4.0, 4.0)], step, Exec::Sequential).unwrap();
            let js = divergence(&p, &q, DivergenceKind::JensenShannon).unwrap();
            assert!((js - 0.031).abs() < 0.01, "step {step}: js {js}");
        }
    }

    #[test]
    fn csv_round_trip_shape() {
        let g = tabulate(|t| Ok(t[0] + 2.0), &[(0.0, 1.0)], 0.5, Exec::Sequential).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "theta_1,value");
        assert_eq!(lines.len(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn js_is_symmetric_and_bounded(shift in -1.0f64..1.0, width in 0.2f64..2.0) {
            let p = tabulate(|t: &[f64]| Ok(normal_pdf(t[0])), &[(-4.0, 4.0)], 0.2, Exec::Sequential).unwrap();
            let q = tabulate(
                |t: &[f64]| Ok(normal_pdf((t[0] - shift) / width) / width),
                &[(-4.0, 4.0)],
                0.2,
                Exec::Sequential,
            )
            .unwrap();
            let pq = divergence(&p, &q, DivergenceKind::JensenShannon).unwrap();
            let qp = divergence(&q, &p, DivergenceKind::JensenShannon).unwrap();
            prop_assert!((pq - qp).abs() < 1e-12);
            prop_assert!((0.0..=2.0f64.ln() + 1e-12).contains(&pq));
        }
    }
}
