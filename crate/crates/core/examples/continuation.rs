//! Truncation continuation on the 1D benchmark: Cauchy increments between
//! successive heights and tail energies above each level.

use std::path::Path;

use quadgrad::experiment::{solve, Experiment};

fn main() -> quadgrad::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/bench_1d_tanh.json");
    let exp = Experiment::load(&path, None)?;
    let s = solve(&exp)?;
    let d = &s.run.diagnostics;
    for (ks, inc) in d.k_schedule.windows(2).zip(&d.cauchy_increments) {
        println!("k {:>9} -> {:>9}: |D(w_k - w_k')| = {inc:.3e}", ks[0], ks[1]);
    }
    let last = d.k_schedule.len() - 1;
    println!("max |w| = {:.4}", s.run.w_star.max_abs());
    for (n, row) in d.n_ladder.iter().zip(&d.tail_energy) {
        println!("E[n = {n:>5}, k_last] = {:.3e}", row[last]);
    }
    Ok(())
}
