//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "problem": {
//!     "grid": { "dim": 1, "extents": [1.0], "n": [128] },
//!     "alpha": 1.0, "gamma": 1.0, "c0": 0.0, "q": 1.8,
//!     "A": { "kind": "identity" },
//!     "f": { "kind": "constant", "value": 0.5 },
//!     "a0": { "kind": "constant", "value": 0.5 },
//!     "h_model": { "kind": "shape_times_quadratic", "shape": { "kind": "tanh", "level": 1.0, "scale": 1.0 } }
//!   },
//!   "constants": { "c_n": "estimate" },
//!   "solver": { "relaxation": 0.5 },
//!   "report": { "n_ladder": [0.05, 0.1, 0.2, 1.0] },
//!   "seed": 7
//! }
//! ```
//!
//! Relative paths inside a config are resolved against the config's directory.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constants::Exponents;
use crate::error::{Error, Result};
use crate::grid::{read_field_csv, Grid, MatrixField, ScalarField};
use crate::nonlinear::{min_eigenvalue, HKind, HModel, Mat2, Shape};
use crate::solver::SolverConfig;

pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub constants: ConstantsSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub report: ReportSpec,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub n: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub grid: GridSpec,
    pub alpha: f64,
    pub gamma: f64,
    pub c0: f64,
    pub q: f64,
    /// Dimension used by the constants engine; defaults to the grid dimension.
    #[serde(default, rename = "N")]
    pub n_phys: Option<u32>,
    /// Defaults to `(2N/(N-2), N/2)` for `N >= 3` and `(6, 3/2)` otherwise.
    #[serde(default)]
    pub exponents: Option<Exponents>,
    #[serde(rename = "A")]
    pub a: MatrixSource,
    pub f: FieldSource,
    pub a0: FieldSource,
    pub h_model: HModelSpec,
    /// Advisory values; the norms actually used are recomputed from the fields.
    #[serde(default)]
    pub declared: Option<DeclaredNorms>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSource {
    Identity,
    Constant { matrix: Mat2 },
    /// `matrix (1 + amplitude prod_i sin(pi x_i / L_i))` at cell centers.
    Modulated { matrix: Mat2, amplitude: f64 },
    /// Explicit per-cell list (row-major over cells).
    Cells { cells: Vec<Mat2> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    Constant { value: f64 },
    /// `scale * prod_i x_i`.
    CoordinateProduct { scale: f64 },
    /// `amplitude * prod_i sin(pi x_i / L_i)`.
    SineBump { amplitude: f64 },
    /// CSV field file.
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub c0: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HModelSpec {
    #[serde(flatten)]
    pub kind: HKindSpec,
    /// Declared growth certificate; computed from the model when absent.
    #[serde(default)]
    pub certificate: Option<Certificate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HKindSpec {
    ShapeTimesQuadratic { shape: Shape },
    MuGradsq { mu: f64 },
    Zero,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredNorms {
    pub f_r: Option<f64>,
    pub f_hm1: Option<f64>,
    pub a0_r: Option<f64>,
    pub a0_q: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    /// `"estimate"` or `"literature:<value>"`.
    pub c_n: String,
    /// Continuum value used to cross-check the discrete estimate.
    #[serde(default)]
    pub continuum: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    crate::constants::DEFAULT_TOL
}

impl Default for ConstantsSpec {
    fn default() -> Self {
        Self {
            c_n: "estimate".into(),
            continuum: None,
            tol: default_tol(),
        }
    }
}

/// Where `C_N` comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CnSource {
    Estimate,
    Literature { value: f64 },
}

impl ConstantsSpec {
    pub fn source(&self) -> Result<CnSource> {
        let s = self.c_n.trim();
        if s == "estimate" {
            return Ok(CnSource::Estimate);
        }
        if let Some(v) = s.strip_prefix("literature:") {
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("constants.c_n: cannot parse {v:?} as a number")))?;
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("constants.c_n: literature value {value} must be positive")));
            }
            return Ok(CnSource::Literature { value });
        }
        Err(Error::Config(format!(
            "constants.c_n must be \"estimate\" or \"literature:<value>\", got {s:?}"
        )))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepSpec {
    /// Equispaced `delta` over `[gamma, delta_1]`.
    Delta { points: usize },
    /// Admissibility frontier over scalings of the `f` and `a0` norms.
    Norms { f_scales: Vec<f64>, a0_scales: Vec<f64> },
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec::Delta { points: 41 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_ladder")]
    pub n_ladder: Vec<f64>,
    #[serde(default)]
    pub sweep: SweepSpec,
    /// `delta` values at which the constants report lists `Y_delta^-`, `Y_delta^+`.
    #[serde(default)]
    pub y_deltas: Vec<f64>,
    /// Random samples per sampler in `verify`.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_ladder() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]
}

fn default_samples() -> usize {
    10_000
}

impl Default for ReportSpec {
    fn default() -> Self {
        Self {
            out_dir: None,
            n_ladder: default_ladder(),
            sweep: SweepSpec::default(),
            y_deltas: Vec::new(),
            samples: default_samples(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Reads a config and resolves relative field paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for src in [&mut cfg.problem.f, &mut cfg.problem.a0] {
            if let FieldSource::File { path } = src {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Schema-level checks that do not need the fields.
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        for (name, v) in [("alpha", p.alpha), ("gamma", p.gamma), ("q", p.q)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("problem.{name} = {v} must be positive")));
            }
        }
        if !(p.c0 >= 0.0 && p.c0.is_finite()) {
            return Err(Error::Config(format!("problem.c0 = {} must be nonnegative", p.c0)));
        }
        for src in [&p.f, &p.a0] {
            if let FieldSource::File { path } = src {
                if !path.exists() {
                    return Err(Error::Config(format!("field file {} does not exist", path.display())));
                }
            }
        }
        self.constants.source()?;
        self.exponents()?;
        self.solver.validate().map_err(|e| Error::Config(format!("solver: {e}")))?;
        if self.report.n_ladder.iter().any(|&n| !(n > 0.0)) {
            return Err(Error::Config("report.n_ladder entries must be positive".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn n_phys(&self) -> u32 {
        self.problem.n_phys.unwrap_or(self.problem.grid.dim as u32)
    }

    pub fn exponents(&self) -> Result<Exponents> {
        let e = match self.problem.exponents {
            Some(e) => Exponents::custom(e.sobolev, e.f_norm),
            None if self.n_phys() >= 3 => Exponents::for_dimension(self.n_phys()),
            None => Exponents::custom(6.0, 1.5),
        };
        e.map_err(|e| Error::Config(format!("problem.exponents: {e}")))
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        let g = &self.problem.grid;
        Grid::new(g.dim, &g.extents, &g.n).map_err(|e| Error::Config(format!("problem.grid: {e}")))
    }

    /// The Hamiltonian, its declared certificate and the `mu` coefficient.
    pub fn h_model(&self) -> (HModel, f64) {
        let spec = &self.problem.h_model;
        let alpha = self.problem.alpha;
        let (model, mu) = match spec.kind {
            HKindSpec::ShapeTimesQuadratic { shape } => (HModel::shape(shape), 0.0),
            HKindSpec::MuGradsq { mu } => {
                // |mu| |xi|^2 <= (|mu| / alpha) A xi xi
                let c = mu.abs() / alpha;
                (HModel::new(HKind::MuGradsq, c, c), mu)
            }
            HKindSpec::Zero => (HModel::zero(), 0.0),
        };
        match spec.certificate {
            Some(c) => (HModel::new(model.kind, c.c0, c.gamma), mu),
            None => (model, mu),
        }
    }
}

fn bump(ext: &[f64], x: [f64; 2]) -> f64 {
    ext.iter().enumerate().map(|(a, &l)| (PI * x[a] / l).sin()).product()
}

pub fn build_field(src: &FieldSource, grid: &Arc<Grid>) -> Result<ScalarField> {
    let ext = grid.extents().to_vec();
    let dim = grid.dim();
    match src {
        FieldSource::Constant { value } => ScalarField::from_fn(grid.clone(), |_| *value),
        FieldSource::CoordinateProduct { scale } => ScalarField::from_fn(grid.clone(), |x| scale * x[..dim].iter().product::<f64>()),
        FieldSource::SineBump { amplitude } => ScalarField::from_fn(grid.clone(), |x| amplitude * bump(&ext, x)),
        FieldSource::File { path } => read_field_csv(path, grid),
    }
}

/// Builds `A`; the declared `alpha` is the certified eigenvalue bound.
pub fn build_matrix(src: &MatrixSource, grid: &Arc<Grid>, alpha: f64) -> Result<MatrixField> {
    let ext = grid.extents().to_vec();
    match src {
        MatrixSource::Identity => {
            let eye = [[1.0, 0.0], [0.0, 1.0]];
            MatrixField::constant(grid.clone(), eye, alpha)
        }
        MatrixSource::Constant { matrix } => MatrixField::constant(grid.clone(), *matrix, alpha),
        MatrixSource::Modulated { matrix, amplitude } => {
            let cells = (0..grid.num_cells())
                .map(|c| {
                    let s = 1.0 + amplitude * bump(&ext, grid.cell_center(c));
                    [[matrix[0][0] * s, matrix[0][1] * s], [matrix[1][0] * s, matrix[1][1] * s]]
                })
                .collect();
            MatrixField::new(grid.clone(), cells, alpha)
        }
        MatrixSource::Cells { cells } => MatrixField::new(grid.clone(), cells.clone(), alpha),
    }
}

/// Smallest eigenvalue over the declared matrices, for diagnostics.
pub fn smallest_eigenvalue(a: &MatrixField) -> f64 {
    let dim = a.grid().dim();
    a.cells().iter().map(|m| min_eigenvalue(m, dim)).fold(f64::INFINITY, f64::min)
}
