//! Bundle morphisms: base maps with letter substitutions, their fiber maps,
//! composition, and the induced map on limit fibers.
//!
//! ```bash
//! cargo run --release -p qlimit --example morphisms
//! ```

use std::sync::Arc;

use qlimit::bundle::Bundle;
use qlimit::functors::{
    audit_fiber_maps, classical_limit, compose, identity_morphism, make_morphism, LetterMap,
};
use qlimit::quantization::{fuzzy_sphere_scheme, nc_torus_scheme};
use qlimit::{parse_expression, BaseMap};

fn main() -> qlimit::Result<()> {
    let js: Vec<f64> = (1..=24).map(|k| k as f64 * 0.5).collect();
    let b = Bundle::from_scheme(Arc::new(fuzzy_sphere_scheme(&js)?));
    let id = BaseMap::identity(b.base());

    let rot = make_morphism(id.clone(), LetterMap::cyclic_rotation(), &b, &b)?;
    println!("rotation: max deviation {:.1e} over {} relations", rot.audit().max_deviation, rot.audit().relations);

    let bad = LetterMap::coords([parse_expression("x1")?, parse_expression("x2")?, parse_expression("2*x3")?]);
    match make_morphism(id, bad, &b, &b) {
        Ok(_) => println!("x3 -> 2 x3 accepted"),
        Err(e) => println!("x3 -> 2 x3 rejected: {e}"),
    }

    let rot3 = compose(&rot, &compose(&rot, &rot)?)?;
    println!("rotation^3 == identity: {}", rot3 == identity_morphism(&b));

    let small = audit_fiber_maps(&rot, 4, 0)?;
    let worst = small.iter().filter_map(|r| r.isometry).fold(0.0, f64::max);
    println!("fiber maps: {} audited, all pass = {}, isometry defect {worst:.1e}", small.len(), small.iter().all(|r| r.pass));

    // sigma_0 sends the class of x1 to the class of x2
    let l = classical_limit(&rot)?;
    let img = l.apply_expr(&parse_expression("x1")?)?;
    let x2 = l.target().element(parse_expression("x2")?)?;
    let d = l.target().sub(&img, &x2)?;
    println!("sigma_0(x1) - x2 has quotient norm {:.1e}", d.limiting_norm.value);

    // torus: S acts on mode labels for every N, the shear only for even N
    for ns in [vec![4, 8, 16], vec![3, 5, 7]] {
        let t = Bundle::from_scheme(Arc::new(nc_torus_scheme(&ns)?));
        let tid = BaseMap::identity(t.base());
        let s = make_morphism(tid.clone(), LetterMap::modes([[0, -1], [1, 0]]), &t, &t).is_ok();
        let shear = make_morphism(tid, LetterMap::modes([[1, 1], [0, 1]]), &t, &t).is_ok();
        println!("torus N = {ns:?}: S valid {s}, shear valid {shear}");
    }
    Ok(())
}
