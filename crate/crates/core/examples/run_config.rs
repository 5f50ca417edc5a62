//! Running a JSON experiment config from code, as the `qlimit run` binary
//! does.
//!
//! ```bash
//! cargo run --release -p qlimit --example run_config -- crates/core/examples/configs/torus_dirac.json
//! ```

use std::path::PathBuf;

use qlimit::config::ExperimentConfig;
use qlimit::runner::{run, RunOptions};

fn main() -> qlimit::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/sphere_dirac.json")
    });
    let cfg = ExperimentConfig::from_path(&path)?;
    let out = std::env::temp_dir().join("qlimit-run-config");
    let summary = run(cfg, &RunOptions { out: Some(out.clone()), seed: None, jobs: Some(2) })?;
    for c in &summary.checks {
        println!("{:>2} {:<22} {}", c.index, c.check, if c.pass { "PASS" } else { "FAIL" });
        for (k, q) in &c.metrics {
            println!("     {k} = {:.6e} +- {:.1e} ({})", q.value, q.error_bound, q.method);
        }
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
