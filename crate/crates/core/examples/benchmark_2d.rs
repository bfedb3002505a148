//! Solves a shipped 2D benchmark and prints the headline numbers.
//!
//! `cargo run --release --example benchmark_2d [config]`

use std::path::PathBuf;

use quadgrad::experiment::{cmd_solve, Experiment};

fn main() -> quadgrad::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/bench_2d_tanh.json"));
    let exp = Experiment::load(&path, None)?;
    let out = std::env::temp_dir().join("quadgrad-benchmark-2d");
    let r = cmd_solve(&exp, &out)?;
    println!("status {:?}, delta = {}, ball radius {}", r.status, r.delta, r.ball_radius);
    println!("largest |Dw| {:.6}, max |w| {:.6}", r.max_norm_dw, r.max_abs_w);
    println!("outer iterations per k: {:?}", r.outer_iterations);
    println!("residuals: truncated {:.2e}, transformed {:.2e}, original {:?}", r.residual_truncated, r.residual_transformed, r.residual_original);
    println!("files in {}", out.display());
    Ok(())
}
