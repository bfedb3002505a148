//! Invariant suite on a good and on a corrupted config.

use std::path::Path;

use quadgrad::config::ExperimentConfig;
use quadgrad::experiment::cmd_verify;

fn main() -> quadgrad::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["bench_2d_mu.json", "corrupted_a.json"] {
        let cfg = ExperimentConfig::load(&dir.join(name))?;
        let r = cmd_verify(&cfg, None);
        println!("{name}: passed = {}", r.passed);
        for c in &r.checks {
            println!("  {:<22} {:?}  {}", c.name, c.status, c.detail);
        }
    }
    Ok(())
}
