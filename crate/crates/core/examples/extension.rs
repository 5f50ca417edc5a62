//! Extension of a bundle to the adjoined limit point and the limit fiber
//! as a quotient by the null ideal.
//!
//! ```bash
//! cargo run --release -p qlimit --example extension
//! ```

use std::sync::Arc;

use qlimit::bundle::{check_axioms, Bundle, Section};
use qlimit::limit::{extend_to_limit, limit_fiber, quotient_equal, quotient_norm};
use qlimit::quantization::fuzzy_sphere_scheme;
use qlimit::{parse_expression, TailConfig};

fn main() -> qlimit::Result<()> {
    let js: Vec<f64> = (1..=60).map(|k| k as f64 * 0.5).collect();
    let b = Bundle::from_scheme(Arc::new(fuzzy_sphere_scheme(&js)?));
    let (ext, alpha) = extend_to_limit(&b)?;
    println!("{} samples, limit point adjoined: {}", ext.len(), ext.base().has_limit());

    // evaluations at sampled points are unchanged
    let e = parse_expression("x1*x2 + 0.5*x3")?;
    let a = Section::new(&b, e.clone())?;
    let a_ext = Section::new(&ext, e)?;
    let k = 10;
    let same = match alpha.images()[k] {
        qlimit::Point::Sample(j) => a.at(k)? == a_ext.at(j)?,
        qlimit::Point::Limit => false,
    };
    println!("evaluation at sample {k} preserved: {same}");

    let cfg = TailConfig::default();
    let fiber = limit_fiber(&ext, &cfg)?;
    let x = |s: &str| fiber.element(parse_expression(s).unwrap());
    let c = x("x1*x2 - x2*x1")?;
    println!("||[x1, x2]||_0 = {:.2e} +- {:.1e}", quotient_norm(&c), c.limiting_norm.error_bound);
    println!("x1 x2 == x2 x1 in the limit: {}", quotient_equal(&fiber, &x("x1*x2")?, &x("x2*x1")?, cfg.null_tol)?);
    println!("x1 == x2 in the limit: {}", quotient_equal(&fiber, &x("x1")?, &x("x2")?, cfg.null_tol)?);
    println!("commutative on generators: {}", fiber.is_commutative(1e-3)?);

    let ax = check_axioms(&ext, 4, &cfg, 0)?;
    println!(
        "fullness {}, completeness {}, continuity {}",
        ax.fullness.pass, ax.completeness.pass, ax.continuity
    );
    Ok(())
}
