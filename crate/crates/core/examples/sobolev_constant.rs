//! Discrete Sobolev constants on the unit interval and the unit square under refinement.

use quadgrad::grid::Grid;
use quadgrad::sobolev::estimate_sobolev_constant;

fn main() -> quadgrad::Result<()> {
    println!("1D, p = 6");
    for n in [32, 64, 128, 256] {
        let est = estimate_sobolev_constant(&Grid::line(1.0, n)?, 6.0)?;
        println!("  n = {n:4}  C_h = {:.12}  iterations = {:3}  converged = {}", est.value, est.iterations, est.converged);
    }
    println!("2D, p = 6");
    for n in [16, 32, 64] {
        let est = estimate_sobolev_constant(&Grid::rect([1.0, 1.0], [n, n])?, 6.0)?;
        println!("  n = {n:4}  C_h = {:.12}  iterations = {:3}  converged = {}", est.value, est.iterations, est.converged);
    }
    Ok(())
}
