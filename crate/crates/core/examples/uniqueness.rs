//! The limit fiber is the classical algebra: quotient norms agree with
//! sup norms of classical symbols.
//!
//! ```bash
//! cargo run --release -p qlimit --example uniqueness
//! ```

use std::sync::Arc;

use qlimit::bundle::Bundle;
use qlimit::limit::{check_uniqueness, extend_to_limit, limit_fiber};
use qlimit::quantization::{fuzzy_sphere_scheme, nc_torus_scheme};
use qlimit::{parse_expression, GeneratorExpression, TailConfig};

fn exprs(list: &[&str]) -> Vec<GeneratorExpression> {
    list.iter().map(|s| parse_expression(s).unwrap()).collect()
}

fn main() -> qlimit::Result<()> {
    let cfg = TailConfig::default();

    let js: Vec<f64> = (1..=80).map(|k| k as f64 * 0.5).collect();
    let sphere = extend_to_limit(&Bundle::from_scheme(Arc::new(fuzzy_sphere_scheme(&js)?)))?.0;
    let r = check_uniqueness(&limit_fiber(&sphere, &cfg)?, &exprs(&["x3", "x1*x2", "x1*x2*x3"]), 5e-2, 0, 0)?;
    for e in &r.entries {
        println!("sphere {:>10}: ||.||_0 = {:.4}  sup = {:.4}", e.expr, e.quotient_norm, e.symbol_sup);
    }

    let ns: Vec<usize> = vec![4, 8, 12, 16, 24, 32, 48, 64];
    let torus = extend_to_limit(&Bundle::from_scheme(Arc::new(nc_torus_scheme(&ns)?)))?.0;
    let r = check_uniqueness(&limit_fiber(&torus, &cfg)?, &exprs(&["u", "v", "u + v", "e(1,1) + e(2,-1)"]), 5e-2, 0, 0)?;
    for e in &r.entries {
        println!("torus  {:>16}: ||.||_0 = {:.6}  sup = {:.6}", e.expr, e.quotient_norm, e.symbol_sup);
    }
    println!("pass: {}", r.pass);
    Ok(())
}
