//! Discrete Sobolev constant: the largest ratio `|v|_p / |Dv|_2` on a grid.

use crate::error::{Error, Result};
use crate::grid::{h1_seminorm, lp_norm, Grid, ScalarField};
use crate::linalg::cg_solve_into;
use std::sync::Arc;

const REL_TOL: f64 = 1e-8;
const MAX_ITER: usize = 2_000;

#[derive(Clone, Debug)]
pub struct SobolevEstimate {
    /// Achieved ratio; a lower bound for the discrete constant.
    pub value: f64,
    pub maximizer: ScalarField,
    pub iterations: usize,
    /// `false` when the iteration stopped before the relative change fell below `1e-8`.
    pub converged: bool,
}

/// `|v|_p / |Dv|_2` (zero for the zero field).
pub fn sobolev_ratio(v: &ScalarField, p: f64) -> Result<f64> {
    let d = h1_seminorm(v);
    if d == 0.0 {
        return Ok(0.0);
    }
    Ok(lp_norm(v, p)? / d)
}

/// Maximizes the ratio by the iteration `v <- (-Delta)^{-1} (|v|^{p-2} v)`,
/// renormalized each step. The ratio is nondecreasing along the iteration.
pub fn estimate_sobolev_constant(grid: &Arc<Grid>, p: f64) -> Result<SobolevEstimate> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::ExponentOutOfRange(format!("Sobolev exponent {p} must be finite and > 2")));
    }
    let ext = grid.extents().to_vec();
    let mut v = ScalarField::from_fn(grid.clone(), |x| {
        ext.iter().enumerate().map(|(a, &l)| (std::f64::consts::PI * x[a] / l).sin()).product()
    })?;
    let lap = grid.laplacian();
    let m = grid.node_measure();
    let mut ratio = sobolev_ratio(&v, p)?;
    let mut best = (ratio, v.clone());
    let mut next = vec![0.0; grid.num_nodes()];
    for it in 1..=MAX_ITER {
        let rhs: Vec<f64> = v.values().iter().map(|&x| m * x.abs().powf(p - 2.0) * x).collect();
        cg_solve_into(lap, &rhs, &mut next, 1e-13, 20_000)?;
        let d = h1_seminorm(&ScalarField::new(grid.clone(), next.clone())?);
        v = ScalarField::new(grid.clone(), next.iter().map(|x| x / d).collect())?;
        let new_ratio = sobolev_ratio(&v, p)?;
        if new_ratio > best.0 {
            best = (new_ratio, v.clone());
        }
        let change = (new_ratio - ratio).abs() / new_ratio;
        ratio = new_ratio;
        if change < REL_TOL {
            return Ok(SobolevEstimate {
                value: best.0,
                maximizer: best.1,
                iterations: it,
                converged: true,
            });
        }
        // Warm start for the next solve, scaled to the normalized iterate.
        next.iter_mut().for_each(|x| *x /= d);
    }
    Ok(SobolevEstimate {
        value: best.0,
        maximizer: best.1,
        iterations: MAX_ITER,
        converged: false,
    })
}
