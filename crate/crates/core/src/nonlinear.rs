//! Pointwise nonlinearities: the sign family, truncations, `g_delta`, `K_delta`,
//! the exponential change of unknown and the catalog of quadratic-growth
//! Hamiltonians `H(x, s, xi)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `delta |u|` above which `exp` overflows for practical purposes.
pub const OVERFLOW_LIMIT: f64 = 700.0;

/// Symmetric coefficient matrix at a point; only the leading `dim x dim` block is used.
pub type Mat2 = [[f64; 2]; 2];

/// Coefficient data attached to a point `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointCoeffs {
    pub dim: usize,
    pub a: Mat2,
    /// Value of `mu(x)` for the `mu |xi|^2` model; ignored otherwise.
    pub mu: f64,
}

impl PointCoeffs {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            a: [[1.0, 0.0], [0.0, 1.0]],
            mu: 0.0,
        }
    }

    /// `A z z`.
    pub fn quad(&self, z: &[f64; 2]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.a[i][j] * z[i] * z[j];
            }
        }
        s
    }

    pub fn sq_norm(&self, z: &[f64; 2]) -> f64 {
        z[..self.dim].iter().map(|v| v * v).sum()
    }
}

/// Smallest eigenvalue of the leading `dim x dim` block of a symmetric matrix.
pub fn min_eigenvalue(a: &Mat2, dim: usize) -> f64 {
    if dim == 1 {
        return a[0][0];
    }
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    0.5 * tr - disc
}

/// `+1`, `0` or `-1`.
pub fn sign(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A strictly positive truncation height `k` (or `n`).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Height(f64);

impl Height {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0) || k.is_nan() {
            return Err(Error::InvalidParameter(format!("truncation height {k} must be > 0")));
        }
        Ok(Self(k))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `k s` on `|s| <= 1/k`, `sign(s)` outside.
pub fn sign_k(s: f64, k: Height) -> f64 {
    let k = k.0;
    if s.abs() * k <= 1.0 {
        k * s
    } else {
        sign(s)
    }
}

/// Derivative of `sign_k` used by the semismooth Newton step (`k` on the knee interval).
pub fn sign_k_slope(s: f64, k: Height) -> f64 {
    if s.abs() * k.0 <= 1.0 {
        k.0
    } else {
        0.0
    }
}

/// Primitive of `sign_k` vanishing at zero.
pub fn sign_k_primitive(s: f64, k: Height) -> f64 {
    let k = k.0;
    if s.abs() * k <= 1.0 {
        0.5 * k * s * s
    } else {
        s.abs() - 0.5 / k
    }
}

/// `T_k(s)`: clamp to `[-k, k]`.
pub fn truncate_t(s: f64, k: Height) -> f64 {
    s.clamp(-k.0, k.0)
}

/// `G_n(s) = s - T_n(s)`.
pub fn remainder_g(s: f64, n: Height) -> f64 {
    let n = n.0;
    if s >= n {
        s - n
    } else if s <= -n {
        s + n
    } else {
        0.0
    }
}

/// `g(tau) = (1 + tau) log(1 + tau) - tau`, `tau >= 0`.
fn g_unit(tau: f64) -> f64 {
    if tau < 0.1 {
        // alternating series sum_{k>=2} (-1)^k tau^k / (k (k-1))
        let mut term = tau * tau;
        let mut acc = 0.0;
        for k in 2..28 {
            let kf = k as f64;
            let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sgn * term / (kf * (kf - 1.0));
            term *= tau;
        }
        acc
    } else {
        (1.0 + tau) * tau.ln_1p() - tau
    }
}

/// `g_delta(t) = -|t| + (1/delta)(1 + delta|t|) log(1 + delta|t|)`.
pub fn g_delta(t: f64, delta: f64) -> f64 {
    debug_assert!(delta > 0.0);
    g_unit(delta * t.abs()) / delta
}

/// `(1 + delta|t|) (1/delta) log(1 + delta|t|) sign(t)`, the right-hand side of
/// the identity `t + g_delta(t) sign(t) = ...`.
pub fn g_identity_rhs(t: f64, delta: f64) -> f64 {
    let tau = delta * t.abs();
    (1.0 + tau) * tau.ln_1p() / delta * sign(t)
}

/// `u -> w = (1/delta)(e^{delta|u|} - 1) sign(u)`.
pub fn transform_forward(u: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let tau = delta * u.abs();
    if tau > OVERFLOW_LIMIT {
        return Err(Error::TransformOverflow {
            node: 0,
            value: tau,
            limit: OVERFLOW_LIMIT,
        });
    }
    Ok(tau.exp_m1() / delta * sign(u))
}

/// `w -> u = (1/delta) log(1 + delta|w|) sign(w)`.
pub fn transform_inverse(w: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok((delta * w.abs()).ln_1p() / delta * sign(w))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be > 0")));
    }
    Ok(())
}

/// Direction of the change of unknown.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Inverse,
}

/// The substitution at a fixed `delta > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformPair {
    pub delta: f64,
    pub direction: Direction,
}

impl TransformPair {
    pub fn new(delta: f64, direction: Direction) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self { delta, direction })
    }

    /// Apply to nodal values; overflow is reported with the offending node.
    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        values
            .iter()
            .enumerate()
            .map(|(node, &v)| match self.direction {
                Direction::Forward => transform_forward(v, self.delta).map_err(|e| match e {
                    Error::TransformOverflow { value, limit, .. } => Error::TransformOverflow { node, value, limit },
                    other => other,
                }),
                Direction::Inverse => transform_inverse(v, self.delta),
            })
            .collect()
    }
}

/// `f_hat = f + a0 u`.
pub fn f_hat(f_val: f64, a0_val: f64, u_val: f64) -> f64 {
    f_val + a0_val * u_val
}

/// Bounded shape `h(s)` for the model `H = h(s) A(x) xi xi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `h(s) = level sign(s)`; `level = gamma` is the upper extremal case.
    Sign { level: f64 },
    /// `h(s) = level tanh(s / scale)`.
    Tanh { level: f64, scale: f64 },
    /// `h(s) = amplitude sin(s)`.
    Sine { amplitude: f64 },
    /// `h(s) = value`.
    Constant { value: f64 },
}

impl Shape {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Shape::Sign { level } => level * sign(s),
            Shape::Tanh { level, scale } => level * (s / scale).tanh(),
            Shape::Sine { amplitude } => amplitude * s.sin(),
            Shape::Constant { value } => value,
        }
    }

    /// Smallest `(c0, gamma)` with `-c0 <= h(s) sign(s) <= gamma`.
    pub fn certificate(&self) -> (f64, f64) {
        match *self {
            Shape::Sign { level } | Shape::Tanh { level, .. } => ((-level).max(0.0), level.max(0.0)),
            Shape::Sine { amplitude } => (amplitude.abs(), amplitude.abs()),
            Shape::Constant { value } => (value.abs(), value.abs()),
        }
    }
}

/// Catalog tag of a Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HKind {
    /// `H = h(s) A(x) xi xi`.
    ShapeTimesQuadratic { shape: Shape },
    /// `H = mu(x) |xi|^2`; `mu` is read from [`PointCoeffs::mu`].
    MuGradsq,
    /// `H = 0`.
    Zero,
}

/// A Hamiltonian together with its declared growth certificate
/// `-c0 A xi xi <= H(x, s, xi) sign(s) <= gamma A xi xi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HModel {
    pub kind: HKind,
    pub c0_cert: f64,
    pub gamma_cert: f64,
}

impl HModel {
    pub fn new(kind: HKind, c0_cert: f64, gamma_cert: f64) -> Self {
        Self { kind, c0_cert, gamma_cert }
    }

    pub fn zero() -> Self {
        Self::new(HKind::Zero, 0.0, 0.0)
    }

    /// Shape model with the tightest certificate.
    pub fn shape(shape: Shape) -> Self {
        let (c0, gamma) = shape.certificate();
        Self::new(HKind::ShapeTimesQuadratic { shape }, c0, gamma)
    }

    pub fn eval(&self, x: &PointCoeffs, s: f64, xi: &[f64; 2]) -> f64 {
        match self.kind {
            HKind::ShapeTimesQuadratic { shape } => shape.eval(s) * x.quad(xi),
            HKind::MuGradsq => x.mu * x.sq_norm(xi),
            HKind::Zero => 0.0,
        }
    }

    /// Describes the first violated growth inequality at `(x, s, xi)`, if any.
    pub fn growth_violation(&self, x: &PointCoeffs, s: f64, xi: &[f64; 2]) -> Option<String> {
        let axx = x.quad(xi);
        let hs = self.eval(x, s, xi) * sign(s);
        let slack = 1e-12 * (self.c0_cert + self.gamma_cert + 1.0) * axx.abs();
        if hs > self.gamma_cert * axx + slack {
            return Some(format!("H sign(s) = {hs:e} > gamma A xi xi = {:e} at s = {s}, xi = {xi:?}", self.gamma_cert * axx));
        }
        if hs < -self.c0_cert * axx - slack {
            return Some(format!("H sign(s) = {hs:e} < -c0 A xi xi = {:e} at s = {s}, xi = {xi:?}", -self.c0_cert * axx));
        }
        let at_zero = self.eval(x, s, &[0.0, 0.0]);
        if at_zero != 0.0 {
            return Some(format!("H(x, {s}, 0) = {at_zero:e} != 0"));
        }
        None
    }

    /// Random sampling of the growth certificate over `(s, xi)` at the supplied points.
    pub fn validate_samples<R: Rng>(&self, points: &[PointCoeffs], samples: usize, rng: &mut R) -> std::result::Result<(), String> {
        if points.is_empty() {
            return Ok(());
        }
        for _ in 0..samples {
            let x = &points[rng.gen_range(0..points.len())];
            let s = sample_scalar(rng);
            let xi = [sample_scalar(rng), sample_scalar(rng)];
            if let Some(msg) = self.growth_violation(x, s, &xi) {
                return Err(msg);
            }
        }
        Ok(())
    }

    /// `H(x, 0, xi)` is nonzero somewhere; only `mu |xi|^2` can do this.
    pub fn nonzero_at_origin(&self) -> bool {
        matches!(self.kind, HKind::MuGradsq)
    }
}

/// Log-uniform magnitude with random sign, occasionally exactly zero.
pub(crate) fn sample_scalar<R: Rng>(rng: &mut R) -> f64 {
    if rng.gen_bool(0.02) {
        return 0.0;
    }
    let mag = 10f64.powf(rng.gen_range(-4.0..3.0));
    if rng.gen_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// `K_delta(x, t, zeta) = delta/(1+delta|t|) A zeta zeta
///   - (1+delta|t|) H(x, (1/delta) log(1+delta|t|) sign(t), zeta/(1+delta|t|)) sign(t)`.
pub fn k_delta(x: &PointCoeffs, t: f64, zeta: &[f64; 2], delta: f64, h: &HModel) -> f64 {
    let e = 1.0 + delta * t.abs();
    let first = delta / e * x.quad(zeta);
    if t == 0.0 {
        return first;
    }
    let s = (delta * t.abs()).ln_1p() / delta * sign(t);
    let scaled = [zeta[0] / e, zeta[1] / e];
    first - e * h.eval(x, s, &scaled) * sign(t)
}

/// `K_delta(x, t, zeta) sign(t)`, with the value `-H(x, 0, zeta)` at `t = 0`.
pub fn k_delta_signed(x: &PointCoeffs, t: f64, zeta: &[f64; 2], delta: f64, h: &HModel) -> f64 {
    if t == 0.0 {
        -h.eval(x, 0.0, zeta)
    } else {
        k_delta(x, t, zeta, delta, h) * sign(t)
    }
}
