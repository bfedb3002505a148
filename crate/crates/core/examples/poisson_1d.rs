//! With `H = 0` and `a0 = 0` the pipeline reduces to `-u'' = 1`, whose
//! solution is `x(1-x)/2`.

use quadgrad::config::ExperimentConfig;
use quadgrad::experiment::{solve, Experiment};
use quadgrad::solver::residual_original;

fn main() -> quadgrad::Result<()> {
    for n in [15, 31, 63, 127] {
        let text = format!(
            r#"{{ "problem": {{
                "grid": {{ "dim": 1, "extents": [1.0], "n": [{n}] }},
                "alpha": 1.0, "gamma": 1.0, "c0": 0.0, "q": 1.8,
                "A": {{ "kind": "identity" }},
                "f": {{ "kind": "constant", "value": 1.0 }},
                "a0": {{ "kind": "constant", "value": 0.0 }},
                "h_model": {{ "kind": "zero" }} }} }}"#
        );
        let exp = Experiment::new(ExperimentConfig::from_json(&text)?, None)?;
        let s = solve(&exp)?;
        let u = residual_original(&exp.data, s.setup.delta, &s.run.w_star)?.u;
        let grid = u.grid().clone();
        let err = (0..grid.num_nodes())
            .map(|i| {
                let x = grid.node_position(i)[0];
                (u.values()[i] - x * (1.0 - x) / 2.0).abs()
            })
            .fold(0.0, f64::max);
        let h = grid.h()[0];
        println!("n = {n:>4}: max error {err:.3e} = {:.3} h^2", err / (h * h));
    }
    Ok(())
}
