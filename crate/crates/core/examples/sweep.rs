//! Delta sweep of `Phi_delta(Z_delta)` over `[gamma, delta_1]` on the 1D benchmark.

use std::path::Path;

use quadgrad::experiment::{cmd_sweep, Experiment, SweepReport};

fn main() -> quadgrad::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/bench_1d_tanh.json");
    let exp = Experiment::load(&path, None)?;
    let out = std::env::temp_dir().join("quadgrad-sweep");
    if let SweepReport::Delta { delta0, sign_changes, rows, .. } = cmd_sweep(&exp, &out)? {
        println!("delta_0 = {delta0:?}, sign changes: {sign_changes}");
        for r in rows.iter().step_by(5) {
            println!(
                "delta {:>8.4}  Z {:>8.5}  Phi(Z) {:>+10.5}  Y- {:>8}  Y+ {:>8}",
                r.delta,
                r.z_delta.unwrap_or(f64::NAN),
                r.phi_min.unwrap_or(f64::NAN),
                r.y_minus.map_or("-".into(), |y| format!("{y:.4}")),
                r.y_plus.map_or("-".into(), |y| format!("{y:.4}")),
            );
        }
    }
    Ok(())
}
