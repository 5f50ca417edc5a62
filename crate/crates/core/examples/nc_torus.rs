//! The rational noncommutative torus: clock and shift matrices.
//! The Dirac residual for the modes (1,0), (0,1) is |2 pi - 2N sin(pi/N)|.
//!
//! ```bash
//! cargo run -p qlimit --example nc_torus
//! ```

use std::f64::consts::PI;

use qlimit::quantization::{check_dirac, nc_torus_scheme, torus::weyl_mode};
use qlimit::{parse_expression, TailConfig};

fn main() -> qlimit::Result<()> {
    let ns = [4, 8, 10, 16, 32, 64];
    let s = nc_torus_scheme(&ns)?;
    let r = check_dirac(
        &s,
        &parse_expression("u")?,
        &parse_expression("v")?,
        &TailConfig { slope_min: 1.9, ..TailConfig::default() },
    )?;
    for (row, n) in r.rows.iter().zip(ns) {
        let closed = (2.0 * PI - 2.0 * n as f64 * (PI / n as f64).sin()).abs();
        println!("N = {n:>3}  residual = {:.8}  formula = {closed:.8}", row.residual);
    }
    println!("slope {:.4}, pass = {}", r.slope.unwrap_or(f64::NAN), r.pass);

    // W(m + N e1) = (-1)^{m2} W(m)
    let n = 5;
    let w = weyl_mode(n, 1, 1);
    let shifted = weyl_mode(n, 1 + n as i32, 1);
    println!("W(1+N,1) + W(1,1) = {:.1e}", (&w + &shifted).norm());
    Ok(())
}
