//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use quadgrad::config::ExperimentConfig;
use quadgrad::constants::{
    c_lambda_bound, check_smallness, compute_g, compute_theta, phi, phi_min_closed_form, solve_delta0, z_delta, Exponents,
    ProblemConstants,
};
use quadgrad::experiment::{cmd_constants, cmd_sweep, solve, Experiment, SweepReport};
use quadgrad::grid::{hminus1_norm, solve_field, Grid, ScalarField};
use quadgrad::nonlinear::{
    g_delta, g_identity_rhs, k_delta, sign, transform_forward, transform_inverse, HKind, HModel, PointCoeffs, Shape,
};
use quadgrad::solver::{norm_identity, residual_original};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load(name: &str) -> Experiment {
    Experiment::load(&configs().join(format!("{name}.json")), None).expect("shipped config loads")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(t: Duration, limit: f64, what: &str) -> Result<(), String> {
    ensure(t.as_secs_f64() < limit, || format!("{what} took {:.2} s (limit {limit} s)", t.as_secs_f64()))
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

const BENCHMARKS: [&str; 4] = ["bench_1d_tanh", "bench_1d_mu", "bench_2d_tanh", "bench_2d_mu"];

fn random_constants(rng: &mut ChaCha8Rng) -> ProblemConstants {
    loop {
        let n: u32 = rng.gen_range(1..=5);
        let (exponents, q) = if n >= 3 {
            let nf = n as f64;
            let hi = if n < 6 { 2.0 * nf / (6.0 - nf) } else { f64::INFINITY };
            let q = rng.gen_range(nf / 2.0..hi.min(nf / 2.0 + 4.0));
            (Exponents::for_dimension(n).unwrap(), q)
        } else {
            (Exponents::custom(6.0, 1.5).unwrap(), rng.gen_range(1.5..2.0))
        };
        let c = ProblemConstants {
            n,
            alpha: rng.gen_range(0.2..5.0),
            gamma: rng.gen_range(0.1..3.0),
            c0: rng.gen_range(0.0..2.0),
            q,
            norm_f_n2: 10f64.powf(rng.gen_range(-3.0..0.0)),
            norm_f_hm1: 10f64.powf(rng.gen_range(-4.0..-1.0)),
            norm_a0_n2: 10f64.powf(rng.gen_range(-3.0..0.0)),
            norm_a0_q: 10f64.powf(rng.gen_range(-3.0..0.0)),
            c_n: rng.gen_range(0.1..1.0),
            exponents,
        };
        let Ok(theta) = c.theta() else { continue };
        if c.validate().is_err() {
            continue;
        }
        let Ok(g) = compute_g(&c, theta) else { continue };
        if check_smallness(&c, theta, g).both() {
            return c;
        }
    }
}

/// Golden-section minimization of `Phi_delta` on `[0, hi]`, independent of the closed form.
fn golden_min(c: &ProblemConstants, delta: f64, theta: f64, g: f64, hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let f = |x: f64| phi(delta, x, c, theta, g).unwrap();
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    f1.min(f2)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_g = 0.0f64;
    let mut worst_phi = 0.0f64;
    let mut worst_root = 0.0f64;
    for i in 0..200 {
        let c = random_constants(&mut rng);
        let theta = c.theta().map_err(|e| e.to_string())?;
        if c.n >= 3 {
            let t = compute_theta(c.n, c.q).map_err(|e| e.to_string())?;
            ensure((t - theta).abs() <= 1e-15, || format!("set {i}: compute_theta {t} vs {theta}"))?;
        }
        ensure(theta > 0.0 && theta < 1.0, || format!("set {i}: theta = {theta}"))?;
        let g = compute_g(&c, theta).map_err(|e| e.to_string())?;
        let delta1 = c.delta1().map_err(|e| e.to_string())?;
        let g_alt = delta1.powf(theta) * c_lambda_bound(theta).map_err(|e| e.to_string())?;
        worst_g = worst_g.max((g - g_alt).abs() / g_alt);
        for j in 0..5 {
            let delta = delta1 * j as f64 / 5.0;
            let z = z_delta(delta, &c, theta, g).map_err(|e| e.to_string())?;
            let closed = phi_min_closed_form(delta, &c, theta, g).map_err(|e| e.to_string())?;
            let golden = golden_min(&c, delta, theta, g, 2.0 * z + 1.0);
            // Relative to the size of the terms of Phi at its minimizer.
            let scale = c.norm_f_hm1 + c.l_delta(delta) * z;
            worst_phi = worst_phi.max((closed - golden).abs() / scale);
        }
        let (d0, z0) = solve_delta0(&c, theta, g, 1e-12).map_err(|e| format!("set {i}: {e}"))?;
        ensure(c.gamma <= d0 && d0 < delta1, || format!("set {i}: delta0 = {d0} outside [{}, {delta1})", c.gamma))?;
        let at = phi(d0, z0, &c, theta, g).map_err(|e| e.to_string())?;
        worst_root = worst_root.max(at.abs());
    }
    ensure(worst_g <= 1e-14, || format!("G mismatch {worst_g:e}"))?;
    ensure(worst_phi <= 1e-12, || format!("Phi minimum mismatch {worst_phi:e}"))?;
    ensure(worst_root <= 1e-12, || format!("|Phi(delta0, Z)| = {worst_root:e}"))?;
    within(start.elapsed(), 5.0, "constants engine")?;
    Ok(format!(
        "200 sets; G rel {worst_g:.1e}, Phi min rel {worst_phi:.1e}, |Phi_delta0(Z)| {worst_root:.1e}, {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn random_spd(rng: &mut ChaCha8Rng, alpha: f64) -> [[f64; 2]; 2] {
    let b = [[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)], [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]];
    let mut a = [[alpha, 0.0], [0.0, alpha]];
    for i in 0..2 {
        for j in 0..2 {
            a[i][j] += b[i][0] * b[j][0] + b[i][1] * b[j][1];
        }
    }
    a
}

fn catalog(rng: &mut ChaCha8Rng, alpha: f64) -> Vec<(String, HModel, f64)> {
    let gamma = rng.gen_range(0.2..2.0);
    let mu: f64 = rng.gen_range(-2.0..2.0);
    vec![
        ("sign".into(), HModel::shape(Shape::Sign { level: gamma }), 0.0),
        ("tanh".into(), HModel::shape(Shape::Tanh { level: gamma, scale: 0.7 }), 0.0),
        ("sine".into(), HModel::shape(Shape::Sine { amplitude: gamma }), 0.0),
        ("constant".into(), HModel::shape(Shape::Constant { value: -gamma }), 0.0),
        ("mu_gradsq".into(), HModel::new(HKind::MuGradsq, mu.abs() / alpha, mu.abs() / alpha), mu),
        ("zero".into(), HModel::zero(), 0.0),
    ]
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let alpha = 0.5;
    let models = catalog(&mut rng, alpha);
    for (name, h, mu) in &models {
        let (c0, gamma) = (h.c0_cert, h.gamma_cert);
        for i in 0..10_000 {
            let x = PointCoeffs { dim: 2, a: random_spd(&mut rng, alpha), mu: *mu };
            let t = rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-3.0..3.0));
            let zeta = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let delta = rng.gen_range(0.01..4.0);
            let axx = x.quad(&zeta);
            let eps = 1e-12 * (c0 + delta) * axx;
            let k = k_delta(&x, t, &zeta, delta, h);
            ensure(k <= (c0 + delta) * axx + eps && k >= -(delta - gamma).abs() * axx - eps, || {
                format!("{name} sample {i}: K = {k:e} outside [{:e}, {:e}]", -(delta - gamma).abs() * axx, (c0 + delta) * axx)
            })?;
            let d_hi = gamma + delta;
            let k_hi = k_delta(&x, t, &zeta, d_hi, h);
            ensure(k_hi >= -1e-12 * (c0 + d_hi) * axx, || format!("{name} sample {i}: K = {k_hi:e} < 0 at delta = {d_hi} >= gamma"))?;
        }
    }
    let mut worst_id = 0.0f64;
    for _ in 0..10_000 {
        let t = rng.gen_range(-1e3..1e3);
        let delta = 10f64.powf(rng.gen_range(-2.0..1.0));
        let lhs = t + g_delta(t, delta) * sign(t);
        let rhs = g_identity_rhs(t, delta);
        worst_id = worst_id.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    ensure(worst_id <= 1e-12, || format!("identity t + g sign t: relative gap {worst_id:e}"))?;
    for i in 0..10_000 {
        let lambda = rng.gen_range(0.01..1.0);
        let star = 10f64.powf(rng.gen_range(-2.0..1.5));
        let delta = star * rng.gen_range(1e-3..1.0);
        let t = rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-3.0..3.0));
        let g = g_delta(t, delta);
        let bound = star.powf(lambda) * c_lambda_bound(lambda).map_err(|e| e.to_string())? * t.abs().powf(1.0 + lambda);
        ensure(g >= 0.0 && g <= bound * (1.0 + 1e-12), || format!("g bound sample {i}: g = {g:e}, bound {bound:e}"))?;
    }
    let mut rng_c = ChaCha8Rng::seed_from_u64(22);
    for i in 0..20 {
        let c = random_constants(&mut rng_c);
        let theta = c.theta().map_err(|e| e.to_string())?;
        let g_big = compute_g(&c, theta).map_err(|e| e.to_string())?;
        let delta1 = c.delta1().map_err(|e| e.to_string())?;
        for _ in 0..500 {
            let delta = delta1 * rng.gen_range(1e-6..=1.0);
            let t = rng.gen_range(-1.0..1.0) * 10f64.powf(rng.gen_range(-3.0..3.0));
            let g = g_delta(t, delta);
            let bound = g_big * t.abs().powf(1.0 + theta);
            ensure(g >= 0.0 && g < bound * (1.0 + 1e-12), || format!("set {i}: g = {g:e} >= G|t|^(1+theta) = {bound:e}"))?;
        }
    }
    within(start.elapsed(), 5.0, "bound suite")?;
    Ok(format!(
        "{} models x 1e4 samples; identity gap {worst_id:.1e}, {:.2} s",
        models.len(),
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_3() -> Outcome {
    let exp = load("bench_1d_tanh");
    let gamma = exp.constants.gamma;
    let delta0 = cmd_constants(&exp).map_err(|e| e.to_string())?.critical.delta0.ok_or("no delta0")?;
    let mut worst = 0.0f64;
    for delta in [0.5 * gamma, gamma, delta0] {
        for i in 0..=40_000 {
            let u = -20.0 + 40.0 * i as f64 / 40_000.0;
            let back = transform_forward(u, delta).and_then(|w| transform_inverse(w, delta)).map_err(|e| e.to_string())?;
            worst = worst.max((back - u).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("roundtrip error {worst:e}"))?;
    let mut orders = Vec::new();
    for delta in [gamma, delta0] {
        let mut gaps = Vec::new();
        for n in [63, 127, 255] {
            let grid = Grid::line(1.0, n).map_err(|e| e.to_string())?;
            let u = ScalarField::from_fn(grid.clone(), |x| 0.4 * (std::f64::consts::PI * x[0]).sin() + 0.2 * (2.0 * std::f64::consts::PI * x[0]).sin())
                .map_err(|e| e.to_string())?;
            let w = u.map(|s| transform_forward(s, delta).unwrap()).map_err(|e| e.to_string())?;
            gaps.push(norm_identity(&u, &w, delta).midpoint_gap);
        }
        for p in gaps.windows(2) {
            orders.push(order(p[0], p[1]));
        }
    }
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(min_order >= 0.9, || format!("norm identity orders {orders:?}"))?;
    Ok(format!("roundtrip {worst:.1e}; norm identity min order {min_order:.2}"))
}

fn criterion_4() -> Outcome {
    let mut worst_direct = 0.0f64;
    let mut worst_exact = 0.0f64;
    for n in [31, 63] {
        let text = format!(
            r#"{{
            "problem": {{
                "grid": {{ "dim": 1, "extents": [1.0], "n": [{n}] }},
                "alpha": 1.0, "gamma": 1.0, "c0": 0.0, "q": 1.8,
                "A": {{ "kind": "identity" }},
                "f": {{ "kind": "constant", "value": 1.0 }},
                "a0": {{ "kind": "constant", "value": 0.0 }},
                "h_model": {{ "kind": "zero" }}
            }},
            "solver": {{ "k": 1e6 }},
            "report": {{ "samples": 1000 }}
        }}"#
        );
        let exp = Experiment::new(ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?, None).map_err(|e| e.to_string())?;
        let solved = solve(&exp).map_err(|e| e.to_string())?;
        ensure(solved.run.failed_at.is_none(), || format!("n = {n}: not converged"))?;
        let u = residual_original(&exp.data, solved.setup.delta, &solved.run.w_star).map_err(|e| e.to_string())?.u;
        let grid = exp.data.grid.clone();
        let h = grid.h()[0];
        let load = exp.data.f.scaled(grid.node_measure()).map_err(|e| e.to_string())?;
        let direct = solve_field(&exp.data.op, &load, 1e-14).map_err(|e| e.to_string())?;
        for i in 0..grid.num_nodes() {
            let x = grid.node_position(i)[0];
            worst_direct = worst_direct.max((u.values()[i] - direct.values()[i]).abs() / (h * h));
            worst_exact = worst_exact.max((u.values()[i] - x * (1.0 - x) / 2.0).abs() / (h * h));
        }
    }
    ensure(worst_exact <= 2.0, || format!("|u - x(1-x)/2|_inf = {worst_exact:.3} h^2"))?;
    ensure(worst_direct <= 1.0, || format!("|u - u_Poisson|_inf = {worst_direct:.3} h^2"))?;
    let grid = Grid::line(1.0, 255).map_err(|e| e.to_string())?;
    let one = ScalarField::from_fn(grid, |_| 1.0).map_err(|e| e.to_string())?;
    let hm1 = hminus1_norm(&one).map_err(|e| e.to_string())?;
    let target = 1.0 / 12f64.sqrt();
    ensure((hm1 - target).abs() <= 1e-3, || format!("|1|_H^-1 = {hm1} vs {target}"))?;
    Ok(format!(
        "vs discrete Poisson {worst_direct:.3} h^2, vs x(1-x)/2 {worst_exact:.3} h^2, |1|_H^-1 gap {:.1e}",
        (hm1 - target).abs()
    ))
}

struct BenchRun {
    name: &'static str,
    exp: Experiment,
    solved: quadgrad::experiment::Solved,
    seconds: f64,
}

fn bench_runs() -> Vec<Result<BenchRun, String>> {
    BENCHMARKS
        .iter()
        .map(|&name| {
            let exp = load(name);
            let start = Instant::now();
            let solved = solve(&exp).map_err(|e| format!("{name}: {e}"))?;
            Ok(BenchRun {
                name,
                exp,
                solved,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

fn criterion_5(runs: &[Result<BenchRun, String>]) -> Outcome {
    let mut summary = Vec::new();
    for r in runs {
        let r = r.as_ref().map_err(Clone::clone)?;
        let run = &r.solved.run;
        ensure(run.failed_at.is_none(), || format!("{}: no convergence at k = {:?}", r.name, run.failed_at))?;
        let radius = r.solved.setup.ball_radius;
        let trace = run.trace();
        for rec in &trace.records {
            ensure(rec.norm_dw <= radius + rec.eps_solver, || {
                format!("{}: |Dw| = {} > {radius} at k = {}, m = {}", r.name, rec.norm_dw, rec.k, rec.m)
            })?;
            ensure(rec.norm_dw_image <= radius + rec.eps_solver, || {
                format!("{}: |DS(w)| = {} > {radius} at k = {}, m = {}", r.name, rec.norm_dw_image, rec.k, rec.m)
            })?;
        }
        let tol = r.solved.config.outer_tol;
        for o in &run.runs {
            ensure(o.residual <= 3.0 * tol, || format!("{}: residual {:e} at k = {}", r.name, o.residual, o.k))?;
        }
        ensure(r.seconds < 60.0, || format!("{}: {:.1} s", r.name, r.seconds))?;
        summary.push(format!("{} {} iterates {:.2} s", r.name, trace.records.len(), r.seconds));
        let _ = &r.exp;
    }
    Ok(summary.join("; "))
}

fn criterion_6(runs: &[Result<BenchRun, String>]) -> Outcome {
    let mut total = 0;
    let mut worst = f64::INFINITY;
    for r in runs {
        let r = r.as_ref().map_err(Clone::clone)?;
        for rec in &r.solved.run.trace().records {
            total += 1;
            worst = worst.min(rec.slack + rec.eps_solver);
            ensure(rec.slack >= -rec.eps_solver, || {
                format!("{}: slack {:e} < -{:e} at k = {}, m = {}", r.name, rec.slack, rec.eps_solver, rec.k, rec.m)
            })?;
        }
    }
    Ok(format!("{total} inner solves, min slack + eps {worst:.2e}"))
}

fn criterion_7(runs: &[Result<BenchRun, String>]) -> Outcome {
    let mut summary = Vec::new();
    for r in runs {
        let r = r.as_ref().map_err(Clone::clone)?;
        let d = &r.solved.run.diagnostics;
        let inc = &d.cauchy_increments;
        ensure(inc.len() >= 3, || format!("{}: only {} increments", r.name, inc.len()))?;
        let tail = &inc[inc.len() - 3..];
        ensure(tail[0] >= tail[1] && tail[1] >= tail[2], || format!("{}: last increments {tail:?}", r.name))?;
        let last = d.k_schedule.len() - 1;
        let max_w = r.solved.run.w_star.max_abs();
        for (i, &n) in d.n_ladder.iter().enumerate() {
            if n > max_w {
                ensure(d.tail_energy[i][last] == 0.0, || format!("{}: E[{n}, k_last] = {:e}", r.name, d.tail_energy[i][last]))?;
            }
        }
        for j in 0..d.k_schedule.len() {
            for i in 1..d.n_ladder.len() {
                ensure(d.tail_energy[i][j] <= d.tail_energy[i - 1][j], || {
                    format!("{}: E not nonincreasing in n at k = {}", r.name, d.k_schedule[j])
                })?;
            }
        }
        summary.push(format!("{} {:.1e}>={:.1e}>={:.1e}", r.name, tail[0], tail[1], tail[2]));
    }
    Ok(summary.join("; "))
}

fn criterion_8() -> Outcome {
    let path = configs().join("bench_1d_tanh.json");
    let mut res = Vec::new();
    for n in [63usize, 127, 255] {
        let mut cfg = ExperimentConfig::load(&path).map_err(|e| e.to_string())?;
        cfg.problem.grid.n = vec![n];
        let exp = Experiment::new(cfg, None).map_err(|e| e.to_string())?;
        let solved = solve(&exp).map_err(|e| e.to_string())?;
        ensure(solved.run.failed_at.is_none(), || format!("n = {n}: not converged"))?;
        let chk = residual_original(&exp.data, solved.setup.delta, &solved.run.w_star).map_err(|e| e.to_string())?;
        res.push(chk.residual);
    }
    let orders: Vec<f64> = res.windows(2).map(|p| order(p[0], p[1])).collect();
    ensure(orders.iter().all(|&o| o >= 0.9), || format!("residuals {res:?}, orders {orders:?}"))?;
    Ok(format!("residuals {:.2e} {:.2e} {:.2e}, orders {:.2} {:.2}", res[0], res[1], res[2], orders[0], orders[1]))
}

fn criterion_9() -> Outcome {
    let exp = load("bench_1d_tanh");
    let z0 = cmd_constants(&exp).map_err(|e| e.to_string())?.critical.z_delta0.ok_or("no Z_delta0")?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let SweepReport::Delta { delta0, sign_changes, rows, .. } = cmd_sweep(&exp, dir.path()).map_err(|e| e.to_string())? else {
        return Err("shipped benchmark sweep is not a delta sweep".into());
    };
    let delta0 = delta0.ok_or("no delta0")?;
    ensure(sign_changes == 1, || format!("{sign_changes} sign changes"))?;
    ensure(rows.iter().all(|r| r.error.is_none()), || "a sweep row failed".into())?;
    let mut bracketed = 0;
    for r in rows.iter().filter(|r| r.delta < delta0) {
        let (lo, hi) = (r.y_minus.ok_or("missing Y-")?, r.y_plus.ok_or("missing Y+")?);
        ensure(lo < z0 && z0 < hi, || format!("delta = {}: Y- = {lo}, Z = {z0}, Y+ = {hi}", r.delta))?;
        bracketed += 1;
    }
    let z: Vec<f64> = rows.iter().map(|r| r.z_delta.unwrap()).collect();
    ensure(z.windows(2).all(|p| p[1] < p[0]), || "Z_delta column not strictly decreasing".into())?;
    ensure(*z.last().unwrap() == 0.0, || format!("Z at delta_1 = {}", z.last().unwrap()))?;
    Ok(format!("{} rows, one sign change, {bracketed} rows bracket Z_delta0 = {z0:.6}", rows.len()))
}

fn criterion_10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_quadgrad");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out_a3 = dir.path().join("a3");
    let status = Command::new(bin)
        .args(["solve", "--config"])
        .arg(configs().join("violate_a3.json"))
        .arg("--out")
        .arg(&out_a3)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.code() == Some(3), || format!("A3 violation exited with {:?}", status.status.code()))?;
    ensure(!out_a3.exists(), || "A3 violation produced solver output".into())?;
    let out_nc = dir.path().join("nc");
    let status = Command::new(bin)
        .args(["solve", "--config"])
        .arg(configs().join("nonconvergent.json"))
        .arg("--out")
        .arg(&out_nc)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.code() == Some(4), || format!("non-convergent config exited with {:?}", status.status.code()))?;
    let cfg = ExperimentConfig::load(&configs().join("nonconvergent.json")).map_err(|e| e.to_string())?;
    let trace = std::fs::read_to_string(out_nc.join("trace.jsonl")).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = trace.lines().collect();
    ensure(lines.len() == cfg.solver.max_outer, || format!("trace has {} lines, expected {}", lines.len(), cfg.solver.max_outer))?;
    for l in &lines {
        let v: serde_json::Value = serde_json::from_str(l).map_err(|e| e.to_string())?;
        for key in ["k", "m", "norm_dw", "increment", "slack", "eps_solver", "inner_iterations", "residual"] {
            ensure(v.get(key).is_some(), || format!("trace line lacks {key}"))?;
        }
    }
    ensure(out_nc.join("residuals.json").exists(), || "no residuals.json".into())?;
    Ok(format!("A3 violation exit 3 without output; non-convergence exit 4 with {} trace lines", lines.len()))
}

fn main() {
    let runs = bench_runs();
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "constants engine", criterion_1()),
        (2, "pointwise bound suite", criterion_2()),
        (3, "transform", criterion_3()),
        (4, "linear oracle", criterion_4()),
        (5, "ball invariance", criterion_5(&runs)),
        (6, "estimate chain", criterion_6(&runs)),
        (7, "continuation diagnostics", criterion_7(&runs)),
        (8, "equivalence", criterion_8()),
        (9, "frontier structure", criterion_9()),
        (10, "honest failure", criterion_10()),
    ];
    let mut failed = 0;
    for (id, name, r) in &results {
        match r {
            Ok(msg) => println!("PASS criterion {id} ({name}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {id} ({name}): {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
