//! Command pipeline behind the `quadgrad` binary: constants, smallness check,
//! solve, sweeps and the invariant suite.
//!
//! Reports are plain serializable structs without timestamps, so identical
//! configs and seeds give byte-identical JSON.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{build_field, build_matrix, CnSource, ExperimentConfig, SweepSpec};
use crate::constants::{phi, scaled_smallness, z_delta, zeros_y, CriticalReport, FrontierRow, ProblemConstants, Verdict};
use crate::error::{Error, Result};
use crate::grid::{gradient, hminus1_riesz, lp_norm, write_field_csv, Grid, ScalarField};
use crate::linalg::dot;
use crate::nonlinear::{k_delta, transform_forward, transform_inverse};
use crate::solver::{
    k_continuation, prepare, ContinuationRun, residual_original, residual_transformed, FieldNorms, NormIdentity, ProblemData, Setup,
    SolverConfig,
};
use crate::sobolev::{estimate_sobolev_constant, sobolev_ratio};

/// Exit statuses of the binary.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const SMALLNESS: i32 = 3;
    pub const NONCONVERGENCE: i32 = 4;
    pub const INVARIANT: i32 = 5;
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SmallnessViolated(_) | Error::NonpositiveDelta1(_) => exit::SMALLNESS,
        Error::MaxOuterIterations { .. } | Error::NewtonStall { .. } | Error::IterativeSolveFailure { .. } => exit::NONCONVERGENCE,
        Error::PreconditionViolated(_) | Error::TransformOverflow { .. } | Error::BracketError(_) | Error::MatrixInvariant(_) => {
            exit::INVARIANT
        }
        _ => exit::CONFIG,
    }
}

/// Where the `C_N` used by the constants engine came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CnProvenance {
    pub source: CnSource,
    pub value: f64,
    pub sobolev_exponent: f64,
    /// Iterations of the discrete estimator (zero for literature values).
    pub iterations: usize,
    pub converged: bool,
    pub continuum: Option<f64>,
}

/// A loaded config with its discretized data and discrete constants.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub data: ProblemData,
    pub norms: FieldNorms,
    pub c_n: CnProvenance,
    pub constants: ProblemConstants,
    pub warnings: Vec<String>,
}

impl Experiment {
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self> {
        Self::new(ExperimentConfig::load(path)?, seed)
    }

    pub fn new(config: ExperimentConfig, seed: Option<u64>) -> Result<Self> {
        config.validate()?;
        let seed = seed.unwrap_or_else(|| config.seed());
        let grid = config.grid()?;
        let p = &config.problem;
        let a = build_matrix(&p.a, &grid, p.alpha)?;
        let f = build_field(&p.f, &grid)?;
        let a0 = build_field(&p.a0, &grid)?;
        let (h, mu) = config.h_model();
        let mut warnings = Vec::new();
        if h.gamma_cert > p.gamma * (1.0 + 1e-12) || h.c0_cert > p.c0 * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "H certificate (c0 = {}, gamma = {}) exceeds the declared c0 = {}, gamma = {}",
                h.c0_cert, h.gamma_cert, p.c0, p.gamma
            )));
        }
        let data = ProblemData::new(a, f, a0, h, mu)?;
        let exps = config.exponents()?;
        let norms = data.norms(&exps, p.q)?;
        if let Some(d) = &p.declared {
            for (name, declared, actual) in [
                ("f_r", d.f_r, norms.f_r),
                ("f_hm1", d.f_hm1, norms.f_hm1),
                ("a0_r", d.a0_r, norms.a0_r),
                ("a0_q", d.a0_q, norms.a0_q),
            ] {
                if let Some(v) = declared {
                    if (v - actual).abs() > 0.01 * actual.abs().max(f64::MIN_POSITIVE) {
                        warnings.push(format!("declared {name} = {v} differs from the recomputed {actual} by more than 1%"));
                    }
                }
            }
        }
        let c_n = match config.constants.source()? {
            CnSource::Estimate => {
                let est = estimate_sobolev_constant(&grid, exps.sobolev)?;
                if !est.converged {
                    warnings.push(format!("Sobolev estimator stopped after {} iterations", est.iterations));
                }
                CnProvenance {
                    source: CnSource::Estimate,
                    value: est.value,
                    sobolev_exponent: exps.sobolev,
                    iterations: est.iterations,
                    converged: est.converged,
                    continuum: config.constants.continuum,
                }
            }
            CnSource::Literature { value } => CnProvenance {
                source: CnSource::Literature { value },
                value,
                sobolev_exponent: exps.sobolev,
                iterations: 0,
                converged: true,
                continuum: config.constants.continuum,
            },
        };
        let constants = ProblemConstants {
            n: config.n_phys(),
            alpha: p.alpha,
            gamma: p.gamma,
            c0: p.c0,
            q: p.q,
            norm_f_n2: norms.f_r,
            norm_f_hm1: norms.f_hm1,
            norm_a0_n2: norms.a0_r,
            norm_a0_q: norms.a0_q,
            c_n: c_n.value,
            exponents: exps,
        };
        Ok(Self {
            config,
            seed,
            data,
            norms,
            c_n,
            constants,
            warnings,
        })
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// `--out`, then `report.out_dir`, then `quadgrad-out`.
    pub fn out_dir(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf)
            .or_else(|| self.config.report.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("quadgrad-out"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantsReport {
    pub c_n: CnProvenance,
    pub norms: FieldNorms,
    pub constants: ProblemConstants,
    pub critical: CriticalReport,
    pub warnings: Vec<String>,
}

pub fn cmd_constants(exp: &Experiment) -> Result<ConstantsReport> {
    let critical = CriticalReport::build(&exp.constants, exp.config.constants.tol, &exp.config.report.y_deltas)?;
    Ok(ConstantsReport {
        c_n: exp.c_n.clone(),
        norms: exp.norms,
        constants: exp.constants.clone(),
        critical,
        warnings: exp.warnings.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub a1: Verdict,
    pub a3: Verdict,
    pub admissible: bool,
}

pub fn cmd_check(exp: &Experiment) -> Result<CheckReport> {
    exp.constants.validate().or_else(|e| match e {
        // A1 failures are verdicts, not errors.
        Error::NonpositiveDelta1(_) => Ok(()),
        e => Err(e),
    })?;
    let row = scaled_smallness(&exp.constants, 1.0, 1.0)?;
    Ok(CheckReport {
        a1: Verdict { holds: row.a1, margin: row.a1_margin },
        a3: Verdict { holds: row.a3, margin: row.a3_margin },
        admissible: row.a1 && row.a3,
    })
}

/// How a solve ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxOuterIterations,
    InvariantViolation,
}

impl SolveStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            SolveStatus::Converged => exit::SUCCESS,
            SolveStatus::MaxOuterIterations => exit::NONCONVERGENCE,
            SolveStatus::InvariantViolation => exit::INVARIANT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub delta: f64,
    pub delta0: Option<f64>,
    pub ball_radius: f64,
    pub k_schedule: Vec<f64>,
    pub failed_at_k: Option<f64>,
    pub outer_iterations: Vec<usize>,
    pub total_outer_iterations: usize,
    /// Iterates outside the ball or with estimate slack below `-eps_solver`.
    pub violations: usize,
    /// Smallest `slack + eps_solver` over all inner solves.
    pub min_slack_margin: f64,
    pub max_norm_dw: f64,
    pub residual_truncated: f64,
    pub residual_transformed: f64,
    pub residual_original: Option<f64>,
    pub norm_identity: Option<NormIdentity>,
    pub max_abs_w: f64,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

/// `k_schedule` entries below `k`, followed by `k`.
pub fn effective_schedule(cfg: &SolverConfig) -> Vec<f64> {
    let mut ks: Vec<f64> = cfg.k_schedule.iter().copied().filter(|&x| x < cfg.k).collect();
    ks.push(cfg.k);
    ks
}

/// Resolves `delta` and the invariant ball from the discrete constants.
pub fn setup(exp: &Experiment) -> Result<Setup> {
    prepare(&exp.constants, &exp.config.solver)
}

fn write_text(dir: &Path, name: &str, text: &str, files: &mut Vec<String>) -> Result<()> {
    std::fs::write(dir.join(name), text)?;
    files.push(name.to_string());
    Ok(())
}

/// A finished continuation with the setup and schedule it ran with.
#[derive(Clone, Debug)]
pub struct Solved {
    pub setup: Setup,
    pub config: SolverConfig,
    pub run: ContinuationRun,
}

/// Setup, growth-certificate sampling and the continuation, without writing files.
pub fn solve(exp: &Experiment) -> Result<Solved> {
    let setup = setup(exp)?;
    let (h, _) = exp.config.h_model();
    let mut rng = exp.rng();
    if let Err(msg) = h.validate_samples(&exp.data.coeffs, exp.config.report.samples, &mut rng) {
        return Err(Error::PreconditionViolated(format!("growth certificate: {msg}")));
    }
    let mut config = exp.config.solver.clone();
    config.k_schedule = effective_schedule(&config);
    let run = k_continuation(&exp.data, &setup, &config, &exp.config.report.n_ladder)?;
    Ok(Solved { setup, config, run })
}

/// Runs [`solve`] and writes `w.csv`, `u.csv`, `trace.jsonl`,
/// `tail_energy.csv`, `increments.csv` and `residuals.json` into `out`.
///
/// Setup failures (smallness, `delta < gamma`, bad data) are errors; a
/// non-converged or invariant-violating run is reported through the status
/// after all files are written.
pub fn cmd_solve(exp: &Experiment, out: &Path) -> Result<SolveReport> {
    let Solved { setup, config: cfg, run } = solve(exp)?;
    std::fs::create_dir_all(out)?;
    let trace = run.trace();
    let mut files = Vec::new();
    write_text(out, "trace.jsonl", &trace.to_jsonl()?, &mut files)?;
    write_text(out, "tail_energy.csv", &run.diagnostics.tail_energy_csv()?, &mut files)?;
    write_text(out, "increments.csv", &run.diagnostics.increments_csv()?, &mut files)?;
    write_field_csv(&out.join("w.csv"), &run.w_star)?;
    files.push("w.csv".into());
    let original = residual_original(&exp.data, setup.delta, &run.w_star);
    let (residual_original, norm_identity) = match &original {
        Ok(o) => {
            write_field_csv(&out.join("u.csv"), &o.u)?;
            files.push("u.csv".into());
            (Some(o.residual), Some(o.norm_identity))
        }
        Err(_) => (None, None),
    };
    let violations = trace.violations().len();
    let status = if run.failed_at.is_some() {
        SolveStatus::MaxOuterIterations
    } else if violations > 0 || original.is_err() {
        SolveStatus::InvariantViolation
    } else {
        SolveStatus::Converged
    };
    let mut warnings = exp.warnings.clone();
    if let Err(e) = original {
        warnings.push(format!("reconstruction failed: {e}"));
    }
    let last = run.runs.last().expect("at least one k");
    files.push("residuals.json".into());
    let report = SolveReport {
        status,
        delta: setup.delta,
        delta0: setup.delta0,
        ball_radius: setup.ball_radius,
        k_schedule: cfg.k_schedule.clone(),
        failed_at_k: run.failed_at,
        outer_iterations: run.diagnostics.outer_iterations.clone(),
        total_outer_iterations: trace.records.len(),
        violations,
        min_slack_margin: trace.records.iter().map(|r| r.slack + r.eps_solver).fold(f64::INFINITY, f64::min),
        max_norm_dw: trace.records.iter().map(|r| r.norm_dw).fold(0.0, f64::max),
        residual_truncated: last.residual,
        residual_transformed: residual_transformed(&exp.data, setup.delta, &run.w_star)?,
        residual_original,
        norm_identity,
        max_abs_w: run.w_star.max_abs(),
        files,
        warnings,
    };
    std::fs::write(out.join("residuals.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// One row of a `delta` sweep; `error` marks a failed point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub z_delta: Option<f64>,
    pub phi_min: Option<f64>,
    pub y_minus: Option<f64>,
    pub y_plus: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SweepReport {
    Delta {
        delta1: f64,
        delta0: Option<f64>,
        sign_changes: usize,
        rows: Vec<SweepRow>,
    },
    Norms {
        rows: Vec<FrontierRow>,
    },
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Sweeps over `delta in [gamma, delta_1]` or over norm scalings; writes `sweep.csv`.
pub fn cmd_sweep(exp: &Experiment, out: &Path) -> Result<SweepReport> {
    let c = &exp.constants;
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    let report = match &exp.config.report.sweep {
        SweepSpec::Delta { points } => {
            c.validate()?;
            if *points < 2 {
                return Err(Error::Config("sweep needs at least two points".into()));
            }
            let theta = c.theta()?;
            let g = crate::constants::compute_g(c, theta)?;
            let delta1 = c.delta1()?;
            let delta0 = crate::constants::solve_delta0(c, theta, g, exp.config.constants.tol).ok().map(|r| r.0);
            let mut rows = Vec::with_capacity(*points);
            for i in 0..*points {
                let delta = if i + 1 == *points {
                    delta1
                } else {
                    c.gamma + (delta1 - c.gamma) * i as f64 / (*points - 1) as f64
                };
                let row = match z_delta(delta, c, theta, g).and_then(|z| Ok((z, phi(delta, z, c, theta, g)?))) {
                    Ok((z, pm)) => {
                        let ys = if pm < 0.0 { zeros_y(delta, c, theta, g, exp.config.constants.tol).ok() } else { None };
                        SweepRow {
                            delta,
                            z_delta: Some(z),
                            phi_min: Some(pm),
                            y_minus: ys.map(|y| y.0),
                            y_plus: ys.map(|y| y.1),
                            error: None,
                        }
                    }
                    Err(e) => SweepRow {
                        delta,
                        z_delta: None,
                        phi_min: None,
                        y_minus: None,
                        y_plus: None,
                        error: Some(e.to_string()),
                    },
                };
                rows.push(row);
            }
            w.write_record(["delta", "z_delta", "phi_min", "y_minus", "y_plus", "error"])?;
            for r in &rows {
                w.write_record([
                    format!("{:e}", r.delta),
                    opt(r.z_delta),
                    opt(r.phi_min),
                    opt(r.y_minus),
                    opt(r.y_plus),
                    r.error.clone().unwrap_or_default(),
                ])?;
            }
            let signs: Vec<bool> = rows.iter().filter_map(|r| r.phi_min).map(|v| v > 0.0).collect();
            let sign_changes = signs.windows(2).filter(|p| p[0] != p[1]).count();
            SweepReport::Delta {
                delta1,
                delta0,
                sign_changes,
                rows,
            }
        }
        SweepSpec::Norms { f_scales, a0_scales } => {
            let mut rows = Vec::new();
            w.write_record(["f_scale", "a0_scale", "a1", "a3", "a1_margin", "a3_margin"])?;
            for &fs in f_scales {
                for &as_ in a0_scales {
                    let r = scaled_smallness(c, fs, as_)?;
                    w.write_record([
                        fs.to_string(),
                        as_.to_string(),
                        r.a1.to_string(),
                        r.a3.to_string(),
                        format!("{:e}", r.a1_margin),
                        format!("{:e}", r.a3_margin),
                    ])?;
                    rows.push(r);
                }
            }
            SweepReport::Norms { rows }
        }
    };
    w.flush()?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
    pub counterexample: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn pass(name: &str, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name: name.into(),
        status: CheckStatus::Pass,
        detail: detail.into(),
        counterexample: None,
    }
}

fn fail(name: &str, detail: impl Into<String>, cex: Option<Value>) -> CheckResult {
    CheckResult {
        name: name.into(),
        status: CheckStatus::Fail,
        detail: detail.into(),
        counterexample: cex,
    }
}

fn skipped(name: &str, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name: name.into(),
        status: CheckStatus::Skipped,
        detail: detail.into(),
        counterexample: None,
    }
}

fn random_field(grid: &std::sync::Arc<Grid>, rng: &mut ChaCha8Rng) -> ScalarField {
    let vals = (0..grid.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScalarField::new(grid.clone(), vals).expect("finite random values")
}

/// Random combination of the first few sine modes; nodal noise is far from
/// extremal for the Sobolev quotient.
fn smooth_random_field(grid: &std::sync::Arc<Grid>, rng: &mut ChaCha8Rng) -> ScalarField {
    let dim = grid.dim();
    let ext = grid.extents().to_vec();
    let modes: Vec<([f64; 2], f64)> = (0..6)
        .map(|_| {
            let k = [rng.gen_range(1..=4) as f64, if dim == 2 { rng.gen_range(1..=4) as f64 } else { 0.0 }];
            (k, rng.gen_range(-1.0..1.0))
        })
        .collect();
    ScalarField::from_fn(grid.clone(), |x| {
        modes
            .iter()
            .map(|(k, c)| c * (0..dim).map(|a| (std::f64::consts::PI * k[a] * x[a] / ext[a]).sin()).product::<f64>())
            .sum()
    })
    .expect("finite modes")
}

const FIELD_TRIALS: usize = 20;

/// Runs every invariant suite; failures are data, not errors.
pub fn cmd_verify(config: &ExperimentConfig, seed: Option<u64>) -> VerifyReport {
    let seed = seed.unwrap_or_else(|| config.seed());
    let mut checks = Vec::new();
    let exp = match Experiment::new(config.clone(), Some(seed)) {
        Ok(e) => {
            checks.push(pass("load", "config, matrix field and data fields valid"));
            e
        }
        Err(e) => {
            let name = match e {
                Error::MatrixInvariant(_) => "matrix_field",
                _ => "load",
            };
            checks.push(fail(name, e.to_string(), None));
            // The growth certificate can still be sampled without the grid data.
            let (h, _) = config.h_model();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = vec![crate::nonlinear::PointCoeffs::identity(config.problem.grid.dim.clamp(1, 2))];
            checks.push(match h.validate_samples(&pts, config.report.samples, &mut rng) {
                Ok(()) => pass("h_growth_certificate", format!("{} samples", config.report.samples)),
                Err(m) => fail("h_growth_certificate", m, None),
            });
            return VerifyReport { seed, passed: false, checks };
        }
    };
    let mut rng = exp.rng();
    let grid = exp.data.grid.clone();
    let op = &exp.data.op;
    let lap = grid.laplacian();
    let alpha = exp.config.problem.alpha;

    // symmetry, coercivity and discrete integration by parts
    let mut sym = 0.0f64;
    let mut ibp = 0.0f64;
    let mut coerc: Option<Value> = None;
    for _ in 0..FIELD_TRIALS {
        let u = random_field(&grid, &mut rng);
        let v = random_field(&grid, &mut rng);
        let ou = op.matvec(u.values());
        let ov = op.matvec(v.values());
        let a = dot(&ou, v.values());
        let b = dot(u.values(), &ov);
        let scale = dot(&ou, u.values()).abs().max(dot(&ov, v.values()).abs());
        sym = sym.max((a - b).abs() / scale);
        let e = exp.data.a.energy_pairing(&gradient(&u), &gradient(&v));
        ibp = ibp.max((a - e).abs() / scale);
        let q_op = dot(&ou, u.values());
        let q_lap = dot(&lap.matvec(u.values()), u.values());
        if q_op < alpha * q_lap * (1.0 - 1e-12) && coerc.is_none() {
            coerc = Some(json!({ "u_op_u": q_op, "alpha_u_lap_u": alpha * q_lap }));
        }
    }
    checks.push(if sym <= 1e-13 {
        pass("operator_symmetry", format!("max relative asymmetry {sym:e}"))
    } else {
        fail("operator_symmetry", format!("relative asymmetry {sym:e} > 1e-13"), None)
    });
    checks.push(match coerc {
        None => pass("operator_coercivity", "u op u >= alpha |Du|^2 on all samples"),
        Some(c) => fail("operator_coercivity", "Rayleigh quotient below alpha", Some(c)),
    });
    checks.push(if ibp <= 1e-12 {
        pass("integration_by_parts", format!("max relative gap {ibp:e}"))
    } else {
        fail("integration_by_parts", format!("relative gap {ibp:e} > 1e-12"), None)
    });

    // H^-1 duality
    checks.push(match hminus1_riesz(&exp.data.f, 1e-13) {
        Ok((norm, z)) => {
            let mut bad = None;
            for _ in 0..FIELD_TRIALS {
                let v = random_field(&grid, &mut rng);
                let lhs = exp.data.f.pairing(&v);
                let rhs = norm * gradient(&v).l2_norm();
                if lhs.abs() > rhs * (1.0 + 1e-10) + 1e-300 {
                    bad = Some(json!({ "pairing": lhs, "bound": rhs }));
                    break;
                }
            }
            let at_z = exp.data.f.pairing(&z);
            let eq = norm * gradient(&z).l2_norm();
            let gap = (at_z - eq).abs() / eq.max(f64::MIN_POSITIVE);
            match bad {
                Some(c) => fail("hminus1_duality", "pairing exceeds the dual bound", Some(c)),
                None if gap > 1e-8 && norm > 0.0 => fail("hminus1_duality", format!("no equality at the Riesz representative ({gap:e})"), None),
                None => pass("hminus1_duality", format!("equality gap at Riesz representative {gap:e}")),
            }
        }
        Err(e) => fail("hminus1_duality", e.to_string(), None),
    });

    // Hölder and Sobolev
    let exps = exp.constants.exponents;
    let mut holder_bad = None;
    let mut sob_bad = None;
    let mut worst_sob = 0.0f64;
    for _ in 0..FIELD_TRIALS {
        let v = smooth_random_field(&grid, &mut rng);
        let w = random_field(&grid, &mut rng);
        let m = grid.node_measure();
        let lhs: f64 = (0..grid.num_nodes()).map(|i| m * (exp.data.f.values()[i] * v.values()[i] * w.values()[i]).abs()).sum();
        let rhs = lp_norm(&exp.data.f, exps.f_norm).unwrap_or(f64::NAN)
            * lp_norm(&v, exps.sobolev).unwrap_or(f64::NAN)
            * lp_norm(&w, exps.sobolev).unwrap_or(f64::NAN);
        if !(lhs <= rhs * (1.0 + 1e-12)) && holder_bad.is_none() {
            holder_bad = Some(json!({ "lhs": lhs, "rhs": rhs }));
        }
        let ratio = sobolev_ratio(&v, exps.sobolev).unwrap_or(f64::NAN);
        worst_sob = worst_sob.max(ratio / exp.c_n.value);
        if !(ratio <= exp.c_n.value * (1.0 + 1e-12)) && sob_bad.is_none() {
            sob_bad = Some(json!({ "ratio": ratio, "c_n": exp.c_n.value }));
        }
    }
    checks.push(match holder_bad {
        None => pass("holder", "sum |f v w| <= |f|_r |v|_p |w|_p"),
        Some(c) => fail("holder", "discrete Hölder inequality violated", Some(c)),
    });
    checks.push(match sob_bad {
        None => pass("sobolev_inequality", format!("largest ratio / C_N = {worst_sob:.6}")),
        Some(c) => fail("sobolev_inequality", "|v|_p > C_N |Dv|_2", Some(c)),
    });
    checks.push(match (exp.c_n.source, exp.c_n.continuum) {
        (CnSource::Estimate, Some(cont)) if exp.c_n.value <= 1.05 * cont => {
            pass("sobolev_continuum", format!("estimate {} vs continuum {cont}", exp.c_n.value))
        }
        (CnSource::Estimate, Some(cont)) => fail(
            "sobolev_continuum",
            format!("estimate {} exceeds 1.05 x continuum {cont}", exp.c_n.value),
            None,
        ),
        _ => skipped("sobolev_continuum", "no continuum value or literature constant"),
    });

    // pointwise samplers
    let h = exp.data.h;
    let samples = exp.config.report.samples;
    checks.push(match h.validate_samples(&exp.data.coeffs, samples, &mut rng) {
        Ok(()) => pass("h_growth_certificate", format!("{samples} samples")),
        Err(m) => fail("h_growth_certificate", m.clone(), Some(json!({ "violation": m }))),
    });
    let gamma = exp.constants.gamma;
    let mut k_bad = None;
    for _ in 0..samples {
        let x = &exp.data.coeffs[rng.gen_range(0..exp.data.coeffs.len())];
        let t = rng.gen_range(-50.0..50.0);
        let z = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
        let kv = k_delta(x, t, &z, gamma, &h);
        let scale = gamma * x.quad(&z).abs() + x.mu.abs() * x.sq_norm(&z);
        if kv < -1e-12 * scale {
            k_bad = Some(json!({ "t": t, "zeta": z, "K": kv }));
            break;
        }
    }
    checks.push(match k_bad {
        None => pass("k_delta_nonnegative", format!("{samples} samples at delta = gamma")),
        Some(c) => fail("k_delta_nonnegative", "K_gamma < 0", Some(c)),
    });
    let mut rt = 0.0f64;
    let mut rt_bad = None;
    let delta0 = setup(&exp).ok().and_then(|s| s.delta0);
    for delta in [0.5 * gamma, gamma].into_iter().chain(delta0) {
        for i in 0..=4000 {
            let u = -20.0 + 40.0 * i as f64 / 4000.0;
            match transform_forward(u, delta).and_then(|w| transform_inverse(w, delta)) {
                Ok(back) => {
                    let err = (back - u).abs() / u.abs().max(1.0);
                    rt = rt.max(err);
                }
                Err(e) => {
                    rt_bad = Some(json!({ "u": u, "delta": delta, "error": e.to_string() }));
                }
            }
        }
    }
    checks.push(if rt <= 1e-12 && rt_bad.is_none() {
        pass("transform_roundtrip", format!("max relative error {rt:e}"))
    } else {
        fail("transform_roundtrip", format!("max relative error {rt:e}"), rt_bad)
    });

    // equivalence of the transformed and original equations at the computed solution
    checks.push(match setup(&exp) {
        Err(e) => skipped("equivalence", format!("no admissible setup: {e}")),
        Ok(s) => {
            let mut cfg = exp.config.solver.clone();
            cfg.k_schedule = vec![cfg.k];
            match k_continuation(&exp.data, &s, &cfg, &[]) {
                Err(e) => fail("equivalence", e.to_string(), None),
                Ok(run) if run.failed_at.is_some() => skipped("equivalence", "outer iteration did not converge"),
                Ok(run) => {
                    let viol = run.trace().violations();
                    let rt = residual_transformed(&exp.data, s.delta, &run.w_star).unwrap_or(f64::NAN);
                    match residual_original(&exp.data, s.delta, &run.w_star) {
                        Err(e) => fail("equivalence", e.to_string(), None),
                        Ok(o) => {
                            let detail = format!(
                                "residual_transformed {rt:e}, residual_original {:e}, norm identity gap {:e}",
                                o.residual, o.norm_identity.consistent_gap
                            );
                            if !viol.is_empty() {
                                fail("equivalence", format!("ball or estimate violated at {} iterates", viol.len()), Some(json!(viol)))
                            } else if !(rt <= 3.0 * cfg.outer_tol) || !(o.norm_identity.consistent_gap <= 1e-10) {
                                fail("equivalence", detail, None)
                            } else {
                                pass("equivalence", detail)
                            }
                        }
                    }
                }
            }
        }
    });

    let passed = checks.iter().all(|c| c.status != CheckStatus::Fail);
    VerifyReport { seed, passed, checks }
}
