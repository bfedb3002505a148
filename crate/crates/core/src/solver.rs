//! The truncated problem in the transformed unknown `w`:
//!
//! ```text
//! -div(A Dw) + T_k(K_delta(x, w, Dw)) sign_k(w) = (1 + delta|w|) f + a0 w + a0 g_delta(w) sign(w),
//! ```
//!
//! solved by a relaxed Picard iteration `w <- (1 - rho) w + rho S(w)`, where
//! `S(w) = W` solves the monotone semilinear problem with the coefficient
//! `b = T_k(K_delta(x, w, Dw))` frozen. The continuation in `k` and the
//! residuals of the untruncated and of the original equation live here too.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constants::{check_smallness, compute_g, solve_delta0, zeros_y, Exponents, ProblemConstants, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::grid::{assemble_operator, gradient, hminus1_norm, lp_norm, nodal_gradient, Grid, MatrixField, ScalarField};
use crate::linalg::{cg_solve_into, dot, norm2, CsrMatrix};
use crate::nonlinear::{
    g_delta, k_delta, k_delta_signed, remainder_g, sign, sign_k, sign_k_primitive, sign_k_slope, transform_inverse,
    truncate_t, HModel, Height, PointCoeffs,
};

const CG_MAX_ITER: usize = 50_000;
const LINE_SEARCH_STEPS: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Substitution parameter; `None` selects `delta_0`.
    pub delta: Option<f64>,
    /// Allows `gamma <= delta < delta_0`, with the ball radius `Y_delta^-`.
    pub below_delta0: bool,
    /// Truncation height of a single solve.
    pub k: f64,
    pub relaxation: f64,
    pub outer_tol: f64,
    pub inner_tol: f64,
    pub cg_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub k_schedule: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta: None,
            below_delta0: false,
            k: 1e6,
            relaxation: 0.5,
            outer_tol: 1e-8,
            inner_tol: 1e-10,
            cg_tol: 1e-12,
            max_outer: 500,
            max_inner: 50,
            k_schedule: vec![1.0, 4.0, 16.0, 64.0, 256.0, 1024.0],
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidParameter(format!("relaxation {} not in (0, 1]", self.relaxation)));
        }
        for (name, v) in [
            ("outer_tol", self.outer_tol),
            ("inner_tol", self.inner_tol),
            ("cg_tol", self.cg_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidParameter("iteration limits must be positive".into()));
        }
        Height::new(self.k)?;
        for k in &self.k_schedule {
            Height::new(*k)?;
        }
        if self.k_schedule.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::InvalidParameter("k_schedule must be strictly increasing".into()));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidParameter(format!("delta = {d} must be positive")));
            }
        }
        Ok(())
    }
}

/// Discretized coefficients and data.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub grid: Arc<Grid>,
    pub a: MatrixField,
    pub op: CsrMatrix,
    pub coeffs: Vec<PointCoeffs>,
    pub f: ScalarField,
    pub a0: ScalarField,
    pub h: HModel,
}

impl ProblemData {
    /// `mu` is the coefficient of the `mu |xi|^2` model and is ignored by the others.
    pub fn new(a: MatrixField, f: ScalarField, a0: ScalarField, h: HModel, mu: f64) -> Result<Self> {
        let grid = a.grid().clone();
        if !Arc::ptr_eq(&grid, f.grid()) || !Arc::ptr_eq(&grid, a0.grid()) {
            return Err(Error::InvalidField("A, f and a0 must live on the same grid".into()));
        }
        let op = assemble_operator(&a)?;
        let coeffs = a.point_coeffs(mu);
        Ok(Self { grid, a, op, coeffs, f, a0, h })
    }

    pub fn norms(&self, exponents: &Exponents, q: f64) -> Result<FieldNorms> {
        Ok(FieldNorms {
            f_r: lp_norm(&self.f, exponents.f_norm)?,
            f_hm1: hminus1_norm(&self.f)?,
            a0_r: lp_norm(&self.a0, exponents.f_norm)?,
            a0_q: lp_norm(&self.a0, q)?,
        })
    }
}

/// Discrete norms of the data entering the constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub f_r: f64,
    pub f_hm1: f64,
    pub a0_r: f64,
    pub a0_q: f64,
}

/// Everything a solve needs from the constants engine.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Setup {
    pub constants: ProblemConstants,
    pub theta: f64,
    /// `G`; zero when `f` or `a0` vanish (the term it multiplies is then absent or inactive).
    pub g: f64,
    pub delta: f64,
    pub delta0: Option<f64>,
    /// Radius of the invariant ball in `|Dw|_2`.
    pub ball_radius: f64,
}

/// Resolves `delta` and the ball radius, enforcing `delta >= gamma` and both smallness conditions.
///
/// With `f = 0` the ball is `{0}`. With `a0 = 0` the estimate is linear and the
/// radius is `|f|_{H^-1} / L_delta`.
pub fn prepare(c: &ProblemConstants, config: &SolverConfig) -> Result<Setup> {
    config.validate()?;
    if let Some(d) = config.delta {
        if d < c.gamma {
            return Err(Error::PreconditionViolated(format!(
                "delta = {d} < gamma = {}: K_delta may be negative",
                c.gamma
            )));
        }
    }
    let theta = c.theta()?;
    if c.norm_f_n2 == 0.0 {
        let delta = config.delta.unwrap_or(c.gamma);
        return Ok(Setup { constants: c.clone(), theta, g: 0.0, delta, delta0: None, ball_radius: 0.0 });
    }
    if c.norm_a0_q == 0.0 {
        let delta = config.delta.unwrap_or(c.gamma);
        let l_gamma = c.l_delta(c.gamma);
        if !(l_gamma > 0.0) {
            return Err(Error::SmallnessViolated(format!("A1 fails: L_gamma = {l_gamma:e}")));
        }
        let l = c.l_delta(delta);
        if !(l > 0.0) {
            return Err(Error::InvalidParameter(format!("L_delta = {l:e} <= 0 at delta = {delta}")));
        }
        return Ok(Setup {
            constants: c.clone(),
            theta,
            g: 0.0,
            delta,
            delta0: None,
            ball_radius: c.norm_f_hm1 / l,
        });
    }
    c.validate()?;
    let g = compute_g(c, theta)?;
    let small = check_smallness(c, theta, g);
    if !small.both() {
        return Err(Error::SmallnessViolated(format!(
            "A1 margin {:e} ({}), A3 margin {:e} ({})",
            small.a1.margin,
            if small.a1.holds { "holds" } else { "fails" },
            small.a3.margin,
            if small.a3.holds { "holds" } else { "fails" },
        )));
    }
    let (delta0, z0) = solve_delta0(c, theta, g, DEFAULT_TOL)?;
    let delta = config.delta.unwrap_or(delta0);
    let ball_radius = if delta > delta0 * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} > delta_0 = {delta0}: no invariant ball"
        )));
    } else if delta < delta0 * (1.0 - 1e-12) {
        if !config.below_delta0 {
            return Err(Error::InvalidParameter(format!(
                "delta = {delta} < delta_0 = {delta0} requires below_delta0 mode"
            )));
        }
        zeros_y(delta, c, theta, g, DEFAULT_TOL)?.0
    } else {
        z0
    };
    Ok(Setup {
        constants: c.clone(),
        theta,
        g,
        delta,
        delta0: Some(delta0),
        ball_radius,
    })
}

/// `K_delta` at every node, from the nodal gradient of `w`.
pub fn k_field(data: &ProblemData, delta: f64, w: &ScalarField) -> Vec<f64> {
    let dw = nodal_gradient(w);
    w.values()
        .iter()
        .zip(&dw)
        .zip(&data.coeffs)
        .map(|((&t, z), x)| k_delta(x, t, z, delta, &data.h))
        .collect()
}

/// `b = T_k(K_delta)`, rejecting negative values beyond rounding.
pub fn frozen_coefficient(data: &ProblemData, delta: f64, k: Height, w: &ScalarField) -> Result<Vec<f64>> {
    let dw = nodal_gradient(w);
    let mut b = Vec::with_capacity(w.values().len());
    for (i, ((&t, z), x)) in w.values().iter().zip(&dw).zip(&data.coeffs).enumerate() {
        let kv = k_delta(x, t, z, delta, &data.h);
        let scale = delta * x.quad(z).abs() + x.mu.abs() * x.sq_norm(z);
        if kv < 0.0 {
            if kv < -1e-12 * scale {
                return Err(Error::PreconditionViolated(format!(
                    "K_delta = {kv:e} < 0 at node {i} (delta = {delta})"
                )));
            }
            b.push(0.0);
        } else {
            b.push(truncate_t(kv, k));
        }
    }
    Ok(b)
}

/// `F_hat(w) = (1 + delta|w|) f + a0 w + a0 g_delta(w) sign(w)` at every node.
pub fn rhs_field(data: &ProblemData, delta: f64, w: &ScalarField) -> Vec<f64> {
    w.values()
        .iter()
        .zip(data.f.values().iter().zip(data.a0.values()))
        .map(|(&t, (&f, &a0))| (1.0 + delta * t.abs()) * f + a0 * t + a0 * g_delta(t, delta) * sign(t))
        .collect()
}

/// Result of one monotone solve.
#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub w: ScalarField,
    pub iterations: usize,
    /// `|F(W)|_2 / |M F_hat|_2` (absolute when the right-hand side vanishes).
    pub residual: f64,
}

/// Solves `op W + M (b sign_k(W)) = rhs` for `b >= 0` by semismooth Newton with an
/// Armijo line search on the convex energy
/// `1/2 W op W + sum m b Psi_k(W) - W rhs`.
#[allow(clippy::too_many_arguments)]
pub fn solve_monotone(
    op: &CsrMatrix,
    m: f64,
    b: &[f64],
    rhs: &[f64],
    k: Height,
    start: &[f64],
    inner_tol: f64,
    cg_tol: f64,
    max_inner: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    if let Some(i) = b.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::PreconditionViolated(format!("b = {} < 0 at node {i}", b[i])));
    }
    let n = op.dim();
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0));
    }
    let target = inner_tol * rhs_norm;
    let energy = |w: &[f64], opw: &[f64]| -> f64 {
        let mut e = 0.5 * dot(w, opw) - dot(w, rhs);
        for i in 0..n {
            e += m * b[i] * sign_k_primitive(w[i], k);
        }
        e
    };
    let residual = |w: &[f64], opw: &[f64]| -> Vec<f64> {
        (0..n).map(|i| opw[i] + m * b[i] * sign_k(w[i], k) - rhs[i]).collect()
    };
    let mut w = start.to_vec();
    let mut opw = op.matvec(&w);
    let mut r = residual(&w, &opw);
    let mut r_norm = norm2(&r);
    let mut e = energy(&w, &opw);
    let mut dir = vec![0.0; n];
    for it in 0..max_inner {
        if r_norm <= target {
            return Ok((w, it, r_norm / rhs_norm));
        }
        let jac_diag: Vec<f64> = (0..n).map(|i| m * b[i] * sign_k_slope(w[i], k)).collect();
        let jac = op.with_added_diagonal(&jac_diag);
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        dir.iter_mut().for_each(|v| *v = 0.0);
        cg_solve_into(&jac, &neg_r, &mut dir, cg_tol, CG_MAX_ITER)?;
        let slope = dot(&r, &dir);
        let op_dir = op.matvec(&dir);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..LINE_SEARCH_STEPS {
            let trial: Vec<f64> = (0..n).map(|i| w[i] + t * dir[i]).collect();
            let op_trial: Vec<f64> = (0..n).map(|i| opw[i] + t * op_dir[i]).collect();
            let e_trial = energy(&trial, &op_trial);
            let r_trial = residual(&trial, &op_trial);
            let r_trial_norm = norm2(&r_trial);
            // Near the solution energy differences drown in rounding; a residual decrease also counts.
            if e_trial <= e + 1e-4 * t * slope || r_trial_norm <= (1.0 - 1e-4 * t) * r_norm {
                w = trial;
                opw = op_trial;
                r = r_trial;
                r_norm = r_trial_norm;
                e = e_trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonStall {
                iterations: it,
                residual: r_norm / rhs_norm,
            });
        }
    }
    if r_norm <= target {
        return Ok((w, max_inner, r_norm / rhs_norm));
    }
    Err(Error::NewtonStall {
        iterations: max_inner,
        residual: r_norm / rhs_norm,
    })
}

/// `S(w)`: solves the frozen-coefficient problem at `w`.
pub fn inner_solve(
    data: &ProblemData,
    delta: f64,
    k: Height,
    w: &ScalarField,
    start: &ScalarField,
    config: &SolverConfig,
) -> Result<InnerSolution> {
    let b = frozen_coefficient(data, delta, k, w)?;
    let m = data.grid.node_measure();
    let rhs: Vec<f64> = rhs_field(data, delta, w).iter().map(|v| m * v).collect();
    let (sol, iterations, residual) = solve_monotone(
        &data.op,
        m,
        &b,
        &rhs,
        k,
        start.values(),
        config.inner_tol,
        config.cg_tol,
        config.max_inner,
    )?;
    Ok(InnerSolution {
        w: ScalarField::new(data.grid.clone(), sol)?,
        iterations,
        residual,
    })
}

/// Slack of the a priori estimate
/// `alpha |DW| <= |f|_{H^-1} + delta C^2 |f|_r |Dw| + C^2 |a0|_r |Dw| + G C^{2+theta} |a0|_q |Dw|^{1+theta}`:
/// right-hand side minus left-hand side.
pub fn estimate_slack(setup: &Setup, norm_dw: f64, norm_dw_image: f64) -> f64 {
    let c = &setup.constants;
    let c2 = c.c_n * c.c_n;
    let rhs = c.norm_f_hm1
        + setup.delta * c2 * c.norm_f_n2 * norm_dw
        + c2 * c.norm_a0_n2 * norm_dw
        + setup.g * c.c_n.powf(2.0 + setup.theta) * c.norm_a0_q * norm_dw.powf(1.0 + setup.theta);
    rhs - c.alpha * norm_dw_image
}

/// [`estimate_slack`] evaluated on fields.
pub fn estimate_check(setup: &Setup, w: &ScalarField, w_image: &ScalarField) -> f64 {
    estimate_slack(setup, gradient(w).l2_norm(), gradient(w_image).l2_norm())
}

/// Solver slack `10 (inner_tol + cg_tol) (1 + |F_hat|_2)`.
pub fn solver_epsilon(config: &SolverConfig, fhat_norm: f64) -> f64 {
    10.0 * (config.inner_tol + config.cg_tol) * (1.0 + fhat_norm)
}

/// One outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: f64,
    pub m: usize,
    /// `|Dw^m|_2`.
    pub norm_dw: f64,
    /// `|D S(w^m)|_2`.
    pub norm_dw_image: f64,
    /// `|D(w^{m+1} - w^m)|_2`.
    pub increment: f64,
    pub slack: f64,
    pub eps_solver: f64,
    pub inner_iterations: usize,
    pub inner_residual: f64,
    pub ball_radius: f64,
    pub in_ball: bool,
    pub image_in_ball: bool,
    /// Weak residual of the truncated equation at `w^{m+1}`.
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<OuterRecord>,
}

impl IterationTrace {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(())
    }

    /// Iterates violating the ball bound or the estimate, as `(k, m)` pairs.
    pub fn violations(&self) -> Vec<(f64, usize)> {
        self.records
            .iter()
            .filter(|r| !r.in_ball || !r.image_in_ball || r.slack < -r.eps_solver)
            .map(|r| (r.k, r.m))
            .collect()
    }
}

/// Outcome of the Picard iteration at one truncation height.
#[derive(Clone, Debug)]
pub struct OuterRun {
    pub k: f64,
    pub w: ScalarField,
    pub trace: IterationTrace,
    pub converged: bool,
    pub iterations: usize,
    pub last_increment: f64,
    /// Weak residual of the truncated equation at the returned `w`.
    pub residual: f64,
}

impl OuterRun {
    /// Converts a non-converged run into [`Error::MaxOuterIterations`].
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::MaxOuterIterations {
                iterations: self.iterations,
                last_increment: self.last_increment,
            })
        }
    }
}

/// Relaxed Picard iteration from `w = 0`. Stops once both the increment
/// `|D(w^{m+1} - w^m)|_2` and the weak residual of the truncated equation are
/// at most `outer_tol`; otherwise returns `converged = false` after `max_outer` steps.
pub fn outer_fixed_point(data: &ProblemData, setup: &Setup, config: &SolverConfig, k: f64) -> Result<OuterRun> {
    config.validate()?;
    let height = Height::new(k)?;
    let rho = config.relaxation;
    let mut w = ScalarField::zeros(data.grid.clone());
    let mut image = ScalarField::zeros(data.grid.clone());
    let mut trace = IterationTrace::default();
    let radius = setup.ball_radius;
    let m = data.grid.node_measure();
    let mut last_increment = f64::INFINITY;
    let mut residual = residual_truncated(data, setup.delta, height, &w)?;
    for it in 0..config.max_outer {
        let fhat = rhs_field(data, setup.delta, &w);
        let fhat_norm = (m * dot(&fhat, &fhat)).sqrt();
        let eps = solver_epsilon(config, fhat_norm);
        let inner = inner_solve(data, setup.delta, height, &w, &image, config)?;
        image = inner.w;
        let norm_dw = gradient(&w).l2_norm();
        let norm_image = gradient(&image).l2_norm();
        let slack = estimate_slack(setup, norm_dw, norm_image);
        let next: Vec<f64> = w
            .values()
            .iter()
            .zip(image.values())
            .map(|(a, b)| (1.0 - rho) * a + rho * b)
            .collect();
        let next = ScalarField::new(data.grid.clone(), next)?;
        let diff = ScalarField::new(
            data.grid.clone(),
            next.values().iter().zip(w.values()).map(|(a, b)| a - b).collect(),
        )?;
        let increment = gradient(&diff).l2_norm();
        w = next;
        residual = residual_truncated(data, setup.delta, height, &w)?;
        trace.records.push(OuterRecord {
            k,
            m: it,
            norm_dw,
            norm_dw_image: norm_image,
            increment,
            slack,
            eps_solver: eps,
            inner_iterations: inner.iterations,
            inner_residual: inner.residual,
            ball_radius: radius,
            in_ball: norm_dw <= radius + eps,
            image_in_ball: norm_image <= radius + eps,
            residual,
        });
        last_increment = increment;
        if increment <= config.outer_tol && residual <= config.outer_tol {
            return Ok(OuterRun {
                k,
                w,
                trace,
                converged: true,
                iterations: it + 1,
                last_increment,
                residual,
            });
        }
    }
    Ok(OuterRun {
        k,
        w,
        trace,
        converged: false,
        iterations: config.max_outer,
        last_increment,
        residual,
    })
}

fn relative(r: &[f64], scale: &[f64]) -> f64 {
    let s = norm2(scale);
    let rn = norm2(r);
    if s == 0.0 {
        rn
    } else {
        rn / s
    }
}

/// Weak residual of the truncated equation, relative to the weak right-hand side.
pub fn residual_truncated(data: &ProblemData, delta: f64, k: Height, w: &ScalarField) -> Result<f64> {
    let m = data.grid.node_measure();
    let b = frozen_coefficient(data, delta, k, w)?;
    let opw = data.op.matvec(w.values());
    let rhs: Vec<f64> = rhs_field(data, delta, w).iter().map(|v| m * v).collect();
    let r: Vec<f64> = (0..rhs.len())
        .map(|i| opw[i] + m * b[i] * sign_k(w.values()[i], k) - rhs[i])
        .collect();
    Ok(relative(&r, &rhs))
}

/// Weak residual of the untruncated equation with the exact sign,
/// `-div(A Dw) + K_delta(x, w, Dw) sign(w) = F_hat(w)`.
pub fn residual_transformed(data: &ProblemData, delta: f64, w: &ScalarField) -> Result<f64> {
    let m = data.grid.node_measure();
    let dw = nodal_gradient(w);
    let opw = data.op.matvec(w.values());
    let rhs: Vec<f64> = rhs_field(data, delta, w).iter().map(|v| m * v).collect();
    let r: Vec<f64> = (0..rhs.len())
        .map(|i| {
            let ks = k_delta_signed(&data.coeffs[i], w.values()[i], &dw[i], delta, &data.h);
            opw[i] + m * ks - rhs[i]
        })
        .collect();
    Ok(relative(&r, &rhs))
}

/// Both sides of `|e^{delta|u|} Du|_2 = |D((e^{delta|u|} - 1)/delta sign u)|_2` on the grid.
///
/// `consistent` uses on each sample the difference quotient of the transform,
/// which makes the identity exact; `midpoint` evaluates `e^{delta|u|}` at the
/// vertex mean of the sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormIdentity {
    pub transformed: f64,
    pub midpoint: f64,
    pub consistent: f64,
    pub midpoint_gap: f64,
    pub consistent_gap: f64,
}

pub fn norm_identity(u: &ScalarField, w: &ScalarField, delta: f64) -> NormIdentity {
    let grid = u.grid();
    let du = gradient(u);
    let dw = gradient(w);
    let transformed = dw.l2_norm();
    let mut mid = 0.0;
    let mut cons = 0.0;
    let vertices = if grid.dim() == 1 { 2.0 } else { 3.0 };
    for ((s, gu), gw) in grid.samples().iter().zip(du.values()).zip(dw.values()) {
        let mean: f64 = s.entries.iter().map(|&(k, _)| u.values()[k]).sum::<f64>() / vertices;
        let factor = (delta * mean.abs()).exp();
        mid += s.weight * factor * factor * (gu[0] * gu[0] + gu[1] * gu[1]);
        // Each gradient component is one edge difference, so quotient factor times Du is Dw.
        cons += s.weight * (gw[0] * gw[0] + gw[1] * gw[1]);
    }
    let midpoint = mid.sqrt();
    let consistent = cons.sqrt();
    let gap = |x: f64| if transformed == 0.0 { x.abs() } else { (x - transformed).abs() / transformed };
    NormIdentity {
        transformed,
        midpoint,
        consistent,
        midpoint_gap: gap(midpoint),
        consistent_gap: gap(consistent),
    }
}

/// Residual of the original equation at `u` reconstructed from `w`.
#[derive(Clone, Debug)]
pub struct OriginalCheck {
    pub u: ScalarField,
    pub residual: f64,
    pub norm_identity: NormIdentity,
}

/// Reconstructs `u = log(1 + delta|w|)/delta sign(w)` and evaluates the weak residual of
/// `-div(A Du) = H(x, u, Du) + f + a0 u`, relative to the weak right-hand side.
pub fn residual_original(data: &ProblemData, delta: f64, w: &ScalarField) -> Result<OriginalCheck> {
    let u_vals = w
        .values()
        .iter()
        .map(|&t| transform_inverse(t, delta))
        .collect::<Result<Vec<_>>>()?;
    let u = ScalarField::new(data.grid.clone(), u_vals)?;
    let m = data.grid.node_measure();
    let du = nodal_gradient(&u);
    let opu = data.op.matvec(u.values());
    let rhs: Vec<f64> = (0..opu.len())
        .map(|i| {
            let s = u.values()[i];
            m * (data.h.eval(&data.coeffs[i], s, &du[i]) + data.f.values()[i] + data.a0.values()[i] * s)
        })
        .collect();
    let r: Vec<f64> = opu.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let norm_identity = norm_identity(&u, w, delta);
    Ok(OriginalCheck {
        u,
        residual: relative(&r, &rhs),
        norm_identity,
    })
}

/// Convergence diagnostics of the continuation in `k`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContinuationDiagnostics {
    pub k_schedule: Vec<f64>,
    pub n_ladder: Vec<f64>,
    /// `tail_energy[i][j] = |D G_{n_i}(w_{k_j})|_2^2`.
    pub tail_energy: Vec<Vec<f64>>,
    /// `|D(w_{k_j} - w_{k_{j+1}})|_2`.
    pub cauchy_increments: Vec<f64>,
    /// `truncation_increments[i][j] = |D(T_{n_i}(w_{k_j}) - T_{n_i}(w_{k_{j+1}}))|_2`.
    pub truncation_increments: Vec<Vec<f64>>,
    pub residual_truncated: Vec<f64>,
    pub residual_transformed: Vec<f64>,
    pub max_abs_w: Vec<f64>,
    pub outer_iterations: Vec<usize>,
}

impl ContinuationDiagnostics {
    /// Rows `n, E[n, k_1], ...`.
    pub fn tail_energy_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["n".to_string()];
        header.extend(self.k_schedule.iter().take(self.max_abs_w.len()).map(|k| format!("k={k}")));
        w.write_record(&header)?;
        for (n, row) in self.n_ladder.iter().zip(&self.tail_energy) {
            let mut rec = vec![n.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
        csv_string(w)
    }

    /// Rows `k_from, k_to, cauchy, T_{n_1}, ...`.
    pub fn increments_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["k_from".to_string(), "k_to".into(), "cauchy".into()];
        header.extend(self.n_ladder.iter().map(|n| format!("truncation_n={n}")));
        w.write_record(&header)?;
        for (j, c) in self.cauchy_increments.iter().enumerate() {
            let mut rec = vec![
                self.k_schedule[j].to_string(),
                self.k_schedule[j + 1].to_string(),
                format!("{c:e}"),
            ];
            rec.extend(self.truncation_increments.iter().map(|row| format!("{:e}", row[j])));
            w.write_record(&rec)?;
        }
        csv_string(w)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Outcome of the continuation; `failed_at` names the first `k` whose outer
/// iteration did not converge, in which case the diagnostics are partial.
#[derive(Clone, Debug)]
pub struct ContinuationRun {
    pub w_star: ScalarField,
    pub runs: Vec<OuterRun>,
    pub diagnostics: ContinuationDiagnostics,
    pub failed_at: Option<f64>,
}

impl ContinuationRun {
    pub fn trace(&self) -> IterationTrace {
        IterationTrace {
            records: self.runs.iter().flat_map(|r| r.trace.records.iter().cloned()).collect(),
        }
    }
}

fn map_field(w: &ScalarField, f: impl Fn(f64) -> f64) -> ScalarField {
    w.map(f).expect("finite map of a finite field")
}

fn diff_norm(a: &ScalarField, b: &ScalarField) -> f64 {
    let d: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    gradient(&ScalarField::new(a.grid().clone(), d).expect("finite difference")).l2_norm()
}

/// Runs [`outer_fixed_point`] for every `k` in the schedule, each from `w = 0`.
pub fn k_continuation(data: &ProblemData, setup: &Setup, config: &SolverConfig, n_ladder: &[f64]) -> Result<ContinuationRun> {
    if config.k_schedule.is_empty() {
        return Err(Error::InvalidParameter("empty k_schedule".into()));
    }
    let ladder = n_ladder.iter().map(|&n| Height::new(n)).collect::<Result<Vec<_>>>()?;
    let mut diag = ContinuationDiagnostics {
        k_schedule: config.k_schedule.clone(),
        n_ladder: n_ladder.to_vec(),
        tail_energy: vec![Vec::new(); n_ladder.len()],
        truncation_increments: vec![Vec::new(); n_ladder.len()],
        ..Default::default()
    };
    let mut runs: Vec<OuterRun> = Vec::new();
    let mut failed_at = None;
    for &k in &config.k_schedule {
        let run = outer_fixed_point(data, setup, config, k)?;
        let w = &run.w;
        for (i, &n) in ladder.iter().enumerate() {
            let g = map_field(w, |s| remainder_g(s, n));
            let e = gradient(&g).l2_norm();
            diag.tail_energy[i].push(e * e);
        }
        if let Some(prev) = runs.last() {
            diag.cauchy_increments.push(diff_norm(&prev.w, w));
            for (i, &n) in ladder.iter().enumerate() {
                let a = map_field(&prev.w, |s| truncate_t(s, n));
                let b = map_field(w, |s| truncate_t(s, n));
                diag.truncation_increments[i].push(diff_norm(&a, &b));
            }
        }
        diag.residual_truncated.push(run.residual);
        diag.residual_transformed.push(residual_transformed(data, setup.delta, w)?);
        diag.max_abs_w.push(w.max_abs());
        diag.outer_iterations.push(run.iterations);
        let converged = run.converged;
        runs.push(run);
        if !converged {
            failed_at = Some(k);
            break;
        }
    }
    let w_star = runs.last().expect("schedule is nonempty").w.clone();
    Ok(ContinuationRun {
        w_star,
        runs,
        diagnostics: diag,
        failed_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::solve_field;
    use crate::nonlinear::Shape;
    use rand::{Rng, SeedableRng};

    fn linear_data(n: usize, f: f64) -> ProblemData {
        let g = Grid::line(1.0, n).unwrap();
        let a = MatrixField::identity(g.clone());
        let f = ScalarField::from_fn(g.clone(), |_| f).unwrap();
        let a0 = ScalarField::zeros(g);
        ProblemData::new(a, f, a0, HModel::zero(), 0.0).unwrap()
    }

    fn constants_for(data: &ProblemData, gamma: f64, c_n: f64) -> ProblemConstants {
        let exps = Exponents::custom(6.0, 1.5).unwrap();
        let nrm = data.norms(&exps, 1.8).unwrap();
        ProblemConstants {
            n: 1,
            alpha: 1.0,
            gamma,
            c0: gamma,
            q: 1.8,
            norm_f_n2: nrm.f_r,
            norm_f_hm1: nrm.f_hm1,
            norm_a0_n2: nrm.a0_r,
            norm_a0_q: nrm.a0_q,
            c_n,
            exponents: exps,
        }
    }

    #[test]
    fn zero_coefficient_inner_solve_is_poisson() {
        let data = linear_data(63, 1.0);
        let w = ScalarField::zeros(data.grid.clone());
        let k = Height::new(10.0).unwrap();
        let sol = inner_solve(&data, 1.0, k, &w, &w, &SolverConfig::default()).unwrap();
        let h = data.grid.h()[0];
        for (i, v) in sol.w.values().iter().enumerate() {
            let x = data.grid.node_position(i)[0];
            assert!((v - x * (1.0 - x) / 2.0).abs() <= 2.0 * h * h);
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let data = linear_data(15, 0.0);
        let w = ScalarField::zeros(data.grid.clone());
        let sol = inner_solve(&data, 1.0, Height::new(1.0).unwrap(), &w, &w, &SolverConfig::default()).unwrap();
        assert_eq!(sol.w.max_abs(), 0.0);
        let c = constants_for(&data, 1.0, 0.4);
        let setup = prepare(&c, &SolverConfig::default()).unwrap();
        let run = outer_fixed_point(&data, &setup, &SolverConfig::default(), 1.0).unwrap();
        assert!(run.converged);
        assert_eq!(run.iterations, 1);
        assert_eq!(run.w.max_abs(), 0.0);
        assert_eq!(estimate_check(&setup, &run.w, &run.w), 0.0);
        assert_eq!(residual_transformed(&data, 1.0, &run.w).unwrap(), 0.0);
    }

    #[test]
    fn monotone_solve_ignores_start() {
        let g = Grid::line(1.0, 40).unwrap();
        let op = g.laplacian().clone();
        let m = g.node_measure();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let b: Vec<f64> = (0..40).map(|_| rng.gen_range(0.0..50.0)).collect();
        let rhs: Vec<f64> = (0..40).map(|i| m * (3.0 * (i as f64 * 0.3).sin())).collect();
        let k = Height::new(20.0).unwrap();
        let start: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x1, _, _) = solve_monotone(&op, m, &b, &rhs, k, &vec![0.0; 40], 1e-12, 1e-13, 100).unwrap();
        let (x2, _, _) = solve_monotone(&op, m, &b, &rhs, k, &start, 1e-12, 1e-13, 100).unwrap();
        let d = ScalarField::new(g.clone(), x1.iter().zip(&x2).map(|(a, b)| a - b).collect()).unwrap();
        assert!(gradient(&d).l2_norm() < 1e-8);
        // energy identity: W op W + sum m b sign_k(W) W = W rhs, middle term >= 0
        let opx = op.matvec(&x1);
        let mid: f64 = (0..40).map(|i| m * b[i] * sign_k(x1[i], k) * x1[i]).sum();
        assert!(mid >= 0.0);
        assert!((dot(&x1, &opx) + mid - dot(&x1, &rhs)).abs() < 1e-9 * dot(&x1, &rhs).abs().max(1e-300));
    }

    #[test]
    fn negative_coefficient_is_a_precondition_error() {
        let g = Grid::line(1.0, 5).unwrap();
        let err = solve_monotone(g.laplacian(), 0.1, &[1.0, -1.0, 0.0, 0.0, 0.0], &[1.0; 5], Height::new(1.0).unwrap(), &[0.0; 5], 1e-10, 1e-12, 10)
            .unwrap_err();
        assert!(matches!(err, Error::PreconditionViolated(_)));
    }

    #[test]
    fn delta_below_gamma_is_rejected() {
        let data = linear_data(15, 1.0);
        let c = constants_for(&data, 1.0, 0.4);
        let cfg = SolverConfig { delta: Some(0.5), ..Default::default() };
        assert!(matches!(prepare(&c, &cfg), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn linear_problem_matches_direct_solve() {
        let data = linear_data(63, 1.0);
        let c = constants_for(&data, 1.0, 0.4);
        let cfg = SolverConfig::default();
        let setup = prepare(&c, &cfg).unwrap();
        let run = outer_fixed_point(&data, &setup, &cfg, cfg.k).unwrap().into_result().unwrap();
        // With H = 0 and a0 = 0 the reconstructed u solves the Poisson problem up to discretization error.
        let u = residual_original(&data, setup.delta, &run.w).unwrap().u;
        let m = data.grid.node_measure();
        let rhs = ScalarField::from_fn(data.grid.clone(), |_| m).unwrap();
        let direct = solve_field(&data.op, &rhs, 1e-14).unwrap();
        let h = data.grid.h()[0];
        let err = u.values().iter().zip(direct.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= h * h, "{err:e}");
        for (i, v) in u.values().iter().enumerate() {
            let x = data.grid.node_position(i)[0];
            assert!((v - x * (1.0 - x) / 2.0).abs() <= 2.0 * h * h);
        }
        assert!(run.trace.violations().is_empty());
    }

    #[test]
    fn continuation_of_zero_hamiltonian_is_flat() {
        let data = linear_data(31, 1.0);
        let c = constants_for(&data, 1.0, 0.4);
        let cfg = SolverConfig { k_schedule: vec![100.0, 1e3, 1e4], ..Default::default() };
        let setup = prepare(&c, &cfg).unwrap();
        let run = k_continuation(&data, &setup, &cfg, &[0.01, 1.0]).unwrap();
        assert!(run.failed_at.is_none());
        // w > 1/k at every node for these k, so sign_k = sign and nothing depends on k
        for inc in &run.diagnostics.cauchy_increments {
            assert!(*inc < 1e-9, "{inc}");
        }
        assert!(run.w_star.max_abs() < 1.0);
        assert_eq!(run.diagnostics.tail_energy[1], vec![0.0; 3]);
    }

    #[test]
    fn shape_model_keeps_k_nonnegative() {
        let g = Grid::line(1.0, 31).unwrap();
        let a = MatrixField::identity(g.clone());
        let f = ScalarField::from_fn(g.clone(), |_| 1.0).unwrap();
        let a0 = ScalarField::from_fn(g.clone(), |_| 0.3).unwrap();
        let data = ProblemData::new(a, f, a0, HModel::shape(Shape::Sign { level: 1.0 }), 0.0).unwrap();
        let w = ScalarField::from_fn(g, |x| 3.0 * (x[0] - 0.4)).unwrap();
        let b = frozen_coefficient(&data, 1.0, Height::new(1e9).unwrap(), &w).unwrap();
        assert!(b.iter().all(|&v| v >= 0.0));
        assert!(matches!(
            frozen_coefficient(&data, 0.5, Height::new(1e9).unwrap(), &w),
            Err(Error::PreconditionViolated(_))
        ));
    }
}
