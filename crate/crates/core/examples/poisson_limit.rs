//! Poisson structure of the limit: the rescaled commutator bracket, the
//! second-order condition on base maps, and Poisson morphisms.
//!
//! ```bash
//! cargo run --release -p qlimit --example poisson_limit
//! ```

use std::sync::Arc;

use qlimit::base_space::make_geometric_grid;
use qlimit::bundle::Bundle;
use qlimit::functors::{
    check_bracket_laws, check_poisson_functoriality, is_second_order, make_morphism, poisson_bracket_at_limit,
    LetterMap, PostQuantizationData,
};
use qlimit::limit::quotient_equal;
use qlimit::quantization::fuzzy_sphere_scheme;
use qlimit::{parse_expression, BaseMap};

fn main() -> qlimit::Result<()> {
    let js: Vec<f64> = (1..=32).map(|k| k as f64 * 0.5).collect();
    let b = Bundle::from_scheme(Arc::new(fuzzy_sphere_scheme(&js)?));
    let p = PostQuantizationData::standard(&b)?;
    let fiber = p.limit_fiber()?;

    let x1 = parse_expression("x1")?;
    let x2 = parse_expression("x2")?;
    let c = poisson_bracket_at_limit(&p, &fiber, &x1, &x2)?;
    let minus_x3 = fiber.element(parse_expression("-x3")?)?;
    println!("{{x1, x2}} == -x3 at the limit: {}", quotient_equal(&fiber, &c, &minus_x3, 1e-3)?);

    let laws = check_bracket_laws(&p, 1e-3, 0)?;
    println!(
        "bracket laws on {} cases: antisymmetry {}, jacobi {}, leibniz {} failures",
        laws.cases, laws.antisymmetry_failures, laws.jacobi_failures, laws.leibniz_failures
    );

    let grid = make_geometric_grid(0.5, 0.5, 24)?;
    for (name, f) in [
        ("hbar", Box::new(|h: f64| h) as Box<dyn Fn(f64) -> f64>),
        ("hbar + hbar^2/2", Box::new(|h: f64| h + 0.5 * h * h)),
        ("hbar + hbar^2", Box::new(|h: f64| h + h * h)),
        ("hbar^2", Box::new(|h: f64| h * h)),
    ] {
        let r = is_second_order(&BaseMap::image_grid(&grid, f)?);
        println!("{name:>16}: second order {}, K = {}", r.pass, r.k().map_or("-".into(), |k| format!("{k:.4}")));
    }

    // alpha(hbar) = hbar - hbar^2/2 with beta = identity
    let alpha = BaseMap::image_grid(b.base(), |h| h - 0.5 * h * h)?;
    let target = b.with_base(alpha.target().clone())?;
    let sigma = make_morphism(alpha, LetterMap::Identity, &b, &target)?;
    let pb = PostQuantizationData::standard(&target)?;
    let r = check_poisson_functoriality(&sigma, &p, &pb, 1e-3)?;
    let worst_slope = r.entries.iter().filter_map(|e| e.discrepancy.slope).fold(f64::INFINITY, f64::min);
    println!(
        "functoriality: K = {:.3}, {} table pairs, min discrepancy slope {worst_slope:.3}, pass {}",
        r.second_order.k().unwrap_or(f64::NAN),
        r.entries.len(),
        r.pass
    );
    Ok(())
}
