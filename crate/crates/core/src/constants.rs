//! Structural constants of the a priori estimate.
//!
//! Everything here is a pure function of a [`ProblemConstants`] record: the
//! exponent `theta`, the constant `G`, the convex family
//!
//! ```text
//! Phi_delta(X) = G C^{2+theta} |a0|_q X^{1+theta} - L_delta X + |f|_{H^-1},
//! L_delta      = alpha - C^2 |a0|_r - delta C^2 |f|_r,
//! ```
//!
//! its minimizer `Z_delta`, the critical parameter `delta_0` (the unique `delta`
//! for which `Phi_delta` has a double zero) and the two zeros `Y_delta^-`,
//! `Y_delta^+` for `delta < delta_0`.
//!
//! `r` is the exponent of the `f` norm (`N/2` when `N >= 3`) and `C` is the
//! Sobolev constant for the exponent `p` (`2* = 2N/(N-2)` when `N >= 3`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for the root finders.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Sobolev exponent `p` and the exponent `r` of the `f` and `a0` norms.
///
/// Hölder's inequality with `1/r + 2/p = 1` is what makes the estimate chain
/// close, so a custom pair must satisfy that relation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub sobolev: f64,
    pub f_norm: f64,
}

impl Exponents {
    /// `p = 2N/(N-2)`, `r = N/2`.
    pub fn for_dimension(n: u32) -> Result<Self> {
        if n < 3 {
            return Err(Error::ExponentOutOfRange(format!(
                "N = {n}: the Sobolev exponent 2* is only defined for N >= 3; \
                 supply an explicit exponent pair for N = 1, 2"
            )));
        }
        let n = n as f64;
        Ok(Self {
            sobolev: 2.0 * n / (n - 2.0),
            f_norm: n / 2.0,
        })
    }

    /// User supplied pair, used for `N = 1, 2` and for discrete experiments.
    pub fn custom(sobolev: f64, f_norm: f64) -> Result<Self> {
        if !(sobolev > 2.0) || !sobolev.is_finite() {
            return Err(Error::ExponentOutOfRange(format!(
                "Sobolev exponent p = {sobolev} must be finite and > 2"
            )));
        }
        let gap = 1.0 / f_norm + 2.0 / sobolev - 1.0;
        if !(f_norm > 1.0) || gap.abs() > 1e-12 {
            return Err(Error::ExponentOutOfRange(format!(
                "exponent pair (p = {sobolev}, r = {f_norm}) violates 1/r + 2/p = 1"
            )));
        }
        Ok(Self { sobolev, f_norm })
    }

    /// `theta = p/q' - 2` with `1/q + 1/q' = 1`; must lie in `(0, 1)`.
    pub fn theta(&self, q: f64) -> Result<f64> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::ExponentOutOfRange(format!("q = {q} must be finite and > 1")));
        }
        let theta = self.sobolev * (1.0 - 1.0 / q) - 2.0;
        if !(theta > 0.0) {
            return Err(Error::ExponentOutOfRange(format!(
                "theta = {theta}: need p/q' - 2 > 0, i.e. q > {} (q > N/2)",
                self.f_norm
            )));
        }
        if !(theta < 1.0) {
            return Err(Error::ExponentOutOfRange(format!(
                "theta = {theta}: need p/q' - 2 < 1, i.e. 1/q > 1 - 3/p (q < 2N/(6-N))"
            )));
        }
        Ok(theta)
    }
}

/// `theta = 2*/q' - 2` for `N >= 3`.
pub fn compute_theta(n: u32, q: f64) -> Result<f64> {
    let exps = Exponents::for_dimension(n)?;
    let nf = n as f64;
    if !(q > nf / 2.0) {
        return Err(Error::ExponentOutOfRange(format!("q = {q} violates q > N/2 = {}", nf / 2.0)));
    }
    if n <= 6 && !(q < 2.0 * nf / (6.0 - nf)) {
        return Err(Error::ExponentOutOfRange(format!(
            "q = {q} violates q < 2N/(6-N) = {}",
            2.0 * nf / (6.0 - nf)
        )));
    }
    exps.theta(q)
}

/// Upper bound `sup{1, 2^{1+l}/(l e)}` of the constant in `g_delta(t) <= delta^l C(l) |t|^{1+l}`.
///
/// The bound itself is used as `C(l)`.
pub fn c_lambda_bound(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::ExponentOutOfRange(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    Ok(f64::max(1.0, 2f64.powf(1.0 + lambda) / (lambda * std::f64::consts::E)))
}

/// Scalar data of the problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Spatial dimension of the physical problem.
    pub n: u32,
    pub alpha: f64,
    pub gamma: f64,
    pub c0: f64,
    /// Integrability exponent of `a0`.
    pub q: f64,
    /// `|f|` in `L^r`, `r = N/2` unless overridden by `exponents`.
    pub norm_f_n2: f64,
    pub norm_f_hm1: f64,
    pub norm_a0_n2: f64,
    pub norm_a0_q: f64,
    pub c_n: f64,
    pub exponents: Exponents,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.alpha,
            self.gamma,
            self.c0,
            self.q,
            self.norm_f_n2,
            self.norm_f_hm1,
            self.norm_a0_n2,
            self.norm_a0_q,
            self.c_n,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConstants("non-finite value".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidConstants(format!("alpha = {} must be > 0", self.alpha)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidConstants(format!("gamma = {} must be > 0", self.gamma)));
        }
        if self.c0 < 0.0 {
            return Err(Error::InvalidConstants(format!("c0 = {} must be >= 0", self.c0)));
        }
        if !(self.c_n > 0.0) {
            return Err(Error::InvalidConstants(format!("C_N = {} must be > 0", self.c_n)));
        }
        if self.norm_f_hm1 < 0.0 || self.norm_a0_n2 < 0.0 {
            return Err(Error::InvalidConstants("norms must be nonnegative".into()));
        }
        if !(self.norm_f_n2 > 0.0) {
            return Err(Error::DegenerateData("f = 0 (|f|_r = 0); f must not vanish".into()));
        }
        if !(self.norm_a0_q > 0.0) {
            return Err(Error::DegenerateData("a0 = 0 (|a0|_q = 0); a0 must not vanish".into()));
        }
        if self.n >= 3 {
            let expected = Exponents::for_dimension(self.n)?;
            if (expected.sobolev - self.exponents.sobolev).abs() > 1e-12
                || (expected.f_norm - self.exponents.f_norm).abs() > 1e-12
            {
                // discrete experiments may override the pair; only the Hölder relation is binding
                Exponents::custom(self.exponents.sobolev, self.exponents.f_norm)?;
            }
        } else {
            Exponents::custom(self.exponents.sobolev, self.exponents.f_norm)?;
        }
        self.theta()?;
        Ok(())
    }

    pub fn theta(&self) -> Result<f64> {
        self.exponents.theta(self.q)
    }

    /// `alpha - C^2 |a0|_r`.
    pub fn coercivity_left(&self) -> f64 {
        self.alpha - self.c_n * self.c_n * self.norm_a0_n2
    }

    /// `C^2 |f|_r`, the slope of `L_delta` in `delta`.
    pub fn f_slope(&self) -> f64 {
        self.c_n * self.c_n * self.norm_f_n2
    }

    /// `delta_1 = (alpha - C^2 |a0|_r) / (C^2 |f|_r)`, the zero of `L_delta`.
    pub fn delta1(&self) -> Result<f64> {
        let num = self.coercivity_left();
        if !(num > 0.0) {
            return Err(Error::NonpositiveDelta1(num));
        }
        Ok(num / self.f_slope())
    }

    /// `L_delta`.
    pub fn l_delta(&self, delta: f64) -> f64 {
        self.coercivity_left() - delta * self.f_slope()
    }
}

/// `G = ((alpha - C^2|a0|_r) / (C^2|f|_r))^theta C(theta)`.
pub fn compute_g(c: &ProblemConstants, theta: f64) -> Result<f64> {
    let num = c.alpha - c.c_n * c.c_n * c.norm_a0_n2;
    if !(num > 0.0) {
        return Err(Error::NonpositiveDelta1(num));
    }
    if !(c.norm_f_n2 > 0.0) {
        return Err(Error::DegenerateData("|f|_r = 0".into()));
    }
    let ratio = num / (c.c_n * c.c_n * c.norm_f_n2);
    Ok(ratio.powf(theta) * c_lambda_bound(theta)?)
}

/// Outcome of one smallness inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub holds: bool,
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Smallness {
    pub a1: Verdict,
    pub a3: Verdict,
}

impl Smallness {
    pub fn both(&self) -> bool {
        self.a1.holds && self.a3.holds
    }
}

/// Leading coefficient `G C^{2+theta} |a0|_q` of `Phi_delta`.
fn leading_coeff(c: &ProblemConstants, theta: f64, g: f64) -> f64 {
    g * c.c_n.powf(2.0 + theta) * c.norm_a0_q
}

/// A1: `alpha - C^2|a0|_r - gamma C^2|f|_r > 0`.
/// A3: `|f|_{H^-1} <= theta/(1+theta) L_gamma^{(1+theta)/theta} / ((1+theta) G C^{2+theta} |a0|_q)^{1/theta}`.
///
/// The A3 margin is the right-hand side minus `|f|_{H^-1}`; when A1 fails,
/// `L_gamma` is replaced by zero so the margin stays defined.
pub fn check_smallness(c: &ProblemConstants, theta: f64, g: f64) -> Smallness {
    let l_gamma = c.l_delta(c.gamma);
    let a1 = Verdict {
        holds: l_gamma > 0.0,
        margin: l_gamma,
    };
    let rhs = theta / (1.0 + theta) * l_gamma.max(0.0).powf((1.0 + theta) / theta)
        / ((1.0 + theta) * leading_coeff(c, theta, g)).powf(1.0 / theta);
    let margin = rhs - c.norm_f_hm1;
    let a3 = Verdict {
        holds: margin >= 0.0 && margin.is_finite(),
        margin,
    };
    Smallness { a1, a3 }
}

/// `Phi_delta(X)`.
pub fn phi(delta: f64, x: f64, c: &ProblemConstants, theta: f64, g: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::DomainError(format!("Phi_delta is defined for X >= 0, got {x}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::DomainError(format!("delta = {delta} must be >= 0")));
    }
    Ok(leading_coeff(c, theta, g) * x.powf(1.0 + theta) - c.l_delta(delta) * x + c.norm_f_hm1)
}

/// `L_delta` checked against `[0, delta_1]`; tiny negative values from rounding at
/// `delta = delta_1` are clamped to zero.
fn checked_l_delta(delta: f64, c: &ProblemConstants) -> Result<f64> {
    let delta1 = c.delta1()?;
    if !(delta >= 0.0) || delta > delta1 {
        return Err(Error::DeltaOutOfRange { delta, delta1 });
    }
    if delta == delta1 {
        return Ok(0.0);
    }
    Ok(c.l_delta(delta).max(0.0))
}

/// Minimizer `Z_delta = (L_delta / ((1+theta) G C^{2+theta} |a0|_q))^{1/theta}` of `Phi_delta` on `X >= 0`.
pub fn z_delta(delta: f64, c: &ProblemConstants, theta: f64, g: f64) -> Result<f64> {
    let l = checked_l_delta(delta, c)?;
    Ok((l / ((1.0 + theta) * leading_coeff(c, theta, g))).powf(1.0 / theta))
}

/// Closed form of the minimum value
/// `Phi_delta(Z_delta) = |f|_{H^-1} - theta/(1+theta) L_delta^{(1+theta)/theta} / ((1+theta) G C^{2+theta}|a0|_q)^{1/theta}`.
pub fn phi_min_closed_form(delta: f64, c: &ProblemConstants, theta: f64, g: f64) -> Result<f64> {
    let l = checked_l_delta(delta, c)?;
    Ok(c.norm_f_hm1
        - theta / (1.0 + theta) * l.powf((1.0 + theta) / theta)
            / ((1.0 + theta) * leading_coeff(c, theta, g)).powf(1.0 / theta))
}

/// `delta -> Phi_delta(Z_delta)`, evaluated through the minimizer.
pub fn phi_at_minimizer(delta: f64, c: &ProblemConstants, theta: f64, g: f64) -> Result<f64> {
    let z = z_delta(delta, c, theta, g)?;
    phi(delta, z, c, theta, g)
}

/// Bisection on a continuous function with `f(lo) <= 0 < f(hi)` until the
/// bracket cannot be split in floating point.
fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid <= 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(if f_lo.abs() <= f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) })
}

/// Critical parameter `delta_0` in `[gamma, delta_1)` with `Phi_{delta_0}(Z_{delta_0}) = 0`,
/// together with `Z_{delta_0}`.
///
/// `tol` is relative to `max(1, |f|_{H^-1})`.
pub fn solve_delta0(c: &ProblemConstants, theta: f64, g: f64, tol: f64) -> Result<(f64, f64)> {
    let delta1 = c.delta1()?;
    if !(c.gamma < delta1) {
        return Err(Error::SmallnessViolated(format!(
            "A1 fails: gamma = {} >= delta_1 = {delta1}",
            c.gamma
        )));
    }
    let scale = f64::max(1.0, c.norm_f_hm1);
    let thresh = tol * scale;
    let f = |d: f64| phi_at_minimizer(d, c, theta, g);
    let at_gamma = f(c.gamma)?;
    if at_gamma > thresh {
        return Err(Error::SmallnessViolated(format!(
            "A3 fails: Phi_gamma(Z_gamma) = {at_gamma:e} > 0"
        )));
    }
    let at_delta1 = f(delta1)?;
    if at_delta1 <= 0.0 {
        return Err(Error::BracketError(format!(
            "Phi_delta1(Z_delta1) = {at_delta1:e} <= 0, constants are inconsistent"
        )));
    }
    let delta0 = if at_gamma > 0.0 {
        c.gamma
    } else {
        let (root, value) = bisect(f, c.gamma, delta1)?;
        if value.abs() > thresh {
            return Err(Error::BracketError(format!(
                "bisection ended at |Phi| = {:e} above tolerance {thresh:e}",
                value.abs()
            )));
        }
        root
    };
    Ok((delta0, z_delta(delta0, c, theta, g)?))
}

/// The two zeros `Y^- < Z_delta < Y^+` of `Phi_delta` for `delta < delta_0`.
pub fn zeros_y(delta: f64, c: &ProblemConstants, theta: f64, g: f64, tol: f64) -> Result<(f64, f64)> {
    let z = z_delta(delta, c, theta, g)?;
    let min_value = phi(delta, z, c, theta, g)?;
    if !(min_value < 0.0) {
        return Err(Error::NoTwoZeros { min_value });
    }
    // Phi is decreasing on [0, Z] and increasing on [Z, inf); bisect on -Phi / Phi.
    let (y_minus, v_minus) = bisect(|x| Ok(-phi(delta, x, c, theta, g)?), 0.0, z)?;
    let mut x_hi = 2.0 * z.max(f64::MIN_POSITIVE);
    while phi(delta, x_hi, c, theta, g)? <= 0.0 {
        x_hi *= 2.0;
        if !x_hi.is_finite() {
            return Err(Error::BracketError("upper zero of Phi_delta not bracketed".into()));
        }
    }
    let (y_plus, v_plus) = bisect(|x| phi(delta, x, c, theta, g), z, x_hi)?;
    let thresh = tol * f64::max(1.0, c.norm_f_hm1);
    if v_minus.abs() > thresh || v_plus.abs() > thresh {
        return Err(Error::BracketError(format!(
            "zeros of Phi_delta not resolved to {thresh:e} (residuals {v_minus:e}, {v_plus:e})"
        )));
    }
    Ok((y_minus, y_plus))
}

/// Zeros of `Phi_delta` at one requested `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YZeros {
    pub delta: f64,
    pub y_minus: f64,
    pub y_plus: f64,
}

/// Everything derived from a [`ProblemConstants`] record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub theta: f64,
    pub c_theta: f64,
    pub g: f64,
    pub delta1: f64,
    pub delta0: Option<f64>,
    pub z_delta0: Option<f64>,
    pub smallness_a1: Verdict,
    pub smallness_a3: Verdict,
    pub y_zeros: Vec<YZeros>,
    pub tol: f64,
    pub c_n: f64,
}

impl CriticalReport {
    pub fn build(c: &ProblemConstants, tol: f64, y_deltas: &[f64]) -> Result<Self> {
        c.validate()?;
        let theta = c.theta()?;
        let c_theta = c_lambda_bound(theta)?;
        let g = compute_g(c, theta)?;
        let delta1 = c.delta1()?;
        let small = check_smallness(c, theta, g);
        let (delta0, z_delta0) = if small.both() {
            let (d, z) = solve_delta0(c, theta, g, tol)?;
            (Some(d), Some(z))
        } else {
            (None, None)
        };
        let mut y_zeros = Vec::new();
        for &d in y_deltas {
            if let Ok((y_minus, y_plus)) = zeros_y(d, c, theta, g, tol) {
                y_zeros.push(YZeros { delta: d, y_minus, y_plus });
            }
        }
        Ok(Self {
            theta,
            c_theta,
            g,
            delta1,
            delta0,
            z_delta0,
            smallness_a1: small.a1,
            smallness_a3: small.a3,
            y_zeros,
            tol,
            c_n: c.c_n,
        })
    }
}

/// One row of a `delta` sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub delta: f64,
    pub z_delta: f64,
    pub phi_min: f64,
    pub y_minus: Option<f64>,
    pub y_plus: Option<f64>,
}

/// Rows `(delta, Z_delta, Phi_delta(Z_delta), Y^-, Y^+)` on `points` equispaced values of `[lo, hi]`.
pub fn delta_sweep(c: &ProblemConstants, theta: f64, g: f64, lo: f64, hi: f64, points: usize, tol: f64) -> Result<Vec<DeltaRow>> {
    if points < 2 {
        return Err(Error::InvalidParameter("a sweep needs at least two points".into()));
    }
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let delta = if i + 1 == points { hi } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 };
        let z = z_delta(delta, c, theta, g)?;
        let phi_min = phi(delta, z, c, theta, g)?;
        let (y_minus, y_plus) = match zeros_y(delta, c, theta, g, tol) {
            Ok((a, b)) => (Some(a), Some(b)),
            Err(_) => (None, None),
        };
        rows.push(DeltaRow { delta, z_delta: z, phi_min, y_minus, y_plus });
    }
    Ok(rows)
}

/// One point of the admissibility frontier over `(f, a0)` scalings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub f_scale: f64,
    pub a0_scale: f64,
    pub a1: bool,
    pub a3: bool,
    pub a1_margin: f64,
    pub a3_margin: f64,
}

/// Smallness verdicts with every `f` norm multiplied by `f_scale` and every `a0` norm by `a0_scale`.
pub fn scaled_smallness(c: &ProblemConstants, f_scale: f64, a0_scale: f64) -> Result<FrontierRow> {
    let mut s = c.clone();
    s.norm_f_n2 *= f_scale;
    s.norm_f_hm1 *= f_scale;
    s.norm_a0_n2 *= a0_scale;
    s.norm_a0_q *= a0_scale;
    let theta = s.theta()?;
    match compute_g(&s, theta) {
        Ok(g) => {
            let v = check_smallness(&s, theta, g);
            Ok(FrontierRow {
                f_scale,
                a0_scale,
                a1: v.a1.holds,
                a3: v.a3.holds,
                a1_margin: v.a1.margin,
                a3_margin: v.a3.margin,
            })
        }
        Err(Error::NonpositiveDelta1(m)) => Ok(FrontierRow {
            f_scale,
            a0_scale,
            a1: false,
            a3: false,
            a1_margin: s.l_delta(s.gamma).min(m),
            a3_margin: -s.norm_f_hm1,
        }),
        Err(e) => Err(e),
    }
}
