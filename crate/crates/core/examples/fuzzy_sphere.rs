//! The fuzzy sphere: spin-j matrix algebras quantizing functions on S^2.
//! Prints the norm profile of Q(x3) and the Dirac and von Neumann residuals.
//!
//! ```bash
//! cargo run --release -p qlimit --example fuzzy_sphere
//! ```

use qlimit::quantization::{check_dirac, check_rieffel, check_von_neumann, fuzzy_sphere_scheme};
use qlimit::{parse_expression, TailConfig};

fn main() -> qlimit::Result<()> {
    let js: Vec<f64> = (1..=80).map(|k| k as f64 * 0.5).collect();
    let s = fuzzy_sphere_scheme(&js)?;
    let cfg = TailConfig::default();
    let x = |t: &str| parse_expression(t).unwrap();

    let r = check_rieffel(&s, &x("x3"), &cfg)?;
    for (k, (h, n)) in r.norms.iter().enumerate().step_by(16) {
        let j = js[k];
        println!("j = {j:>5}  hbar = {h:.5}  ||Q(x3)|| = {n:.10}  sqrt(j/(j+1)) = {:.10}", (j / (j + 1.0)).sqrt());
    }
    if let Some(l) = r.limit {
        println!("limit {:.5} +- {:.1e}, sup|x3| = {}", l.value, l.error_bound, r.symbol_sup);
    }

    let d = check_dirac(&s, &x("x1"), &x("x2"), &cfg)?;
    println!("dirac x1,x2: max residual {:.1e}, exact = {}", d.max_residual(), d.exact);
    let d = check_dirac(&s, &x("x1*x2"), &x("x2*x3"), &cfg)?;
    println!("dirac x1x2,x2x3: slope {:.3}, pass = {}", d.slope.unwrap_or(f64::NAN), d.pass);

    let v = check_von_neumann(&s, &x("x1"), &x("x2"), &cfg)?;
    println!("von neumann x1,x2: slope {:.3}, pass = {}", v.slope.unwrap_or(f64::NAN), v.pass);
    Ok(())
}
