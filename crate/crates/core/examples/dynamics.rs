//! Dynamics: a Hamiltonian acting on every fiber by conjugation with
//! exp(itH/hbar), and its limit compared with the classical flow.
//!
//! ```bash
//! cargo run --release -p qlimit --example dynamics
//! ```

use std::sync::Arc;

use qlimit::bundle::Bundle;
use qlimit::functors::{check_dynamics_lift, limit_dynamics, ClassicalFlowConfig, DynamicalBundleData};
use qlimit::quantization::fuzzy_sphere_scheme;
use qlimit::{parse_expression, TailConfig};

fn main() -> qlimit::Result<()> {
    let js: Vec<f64> = (1..=80).map(|k| k as f64 * 0.5).collect();
    let b = Bundle::from_scheme(Arc::new(fuzzy_sphere_scheme(&js)?));
    let d = DynamicalBundleData::new(&b, parse_expression("x3")?, vec![0.0, 0.1, 0.5, 1.0])?;

    let lift = check_dynamics_lift(&d, 4, 0)?;
    println!(
        "automorphism laws: group {:.1e}, product {:.1e}, star {:.1e}, pass {}",
        lift.group_law, lift.multiplicativity, lift.star, lift.pass
    );

    let gens = [parse_expression("x1")?, parse_expression("x1*x2")?];
    let r = limit_dynamics(&d, &gens, &ClassicalFlowConfig::default(), &TailConfig::default())?;
    for e in &r.entries {
        println!(
            "{:>8} t = {:.1}: max residual {:.2e}, slope {}",
            e.generator,
            e.t,
            e.residual.max_residual(),
            e.residual.slope.map_or("-".into(), |s| format!("{s:.3}"))
        );
    }
    println!("pass: {}", r.pass);
    Ok(())
}
