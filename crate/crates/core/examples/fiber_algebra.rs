//! Matrix fibers: operator norm, the C*-identity and the unitary flow.
//!
//! ```bash
//! cargo run -p qlimit --example fiber_algebra
//! ```

use qlimit::algebra::{commutator, conjugate, unitary_flow};
use qlimit::{FiberElement, C64};

fn main() -> qlimit::Result<()> {
    let a = FiberElement::from_rows(&[
        vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0)],
        vec![C64::new(0.5, -1.0), C64::new(-1.0, 0.0)],
    ])?;
    let b = FiberElement::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]])?;

    let n = a.operator_norm();
    let star = (&a.adjoint() * &a).operator_norm();
    println!("||a|| = {n:.12}");
    println!("||a* a|| = {star:.12}  (||a||^2 = {:.12})", n * n);
    println!(
        "||ab|| = {:.6} <= ||a|| ||b|| = {:.6}",
        (&a * &b).operator_norm(),
        n * b.operator_norm()
    );
    println!("||[a, b]|| = {:.6}", commutator(&a, &b)?.operator_norm());

    // exp(itH/hbar) with H = sigma_x
    let u = unitary_flow(&b, 0.7, 0.1)?;
    println!("unitarity defect of exp(itH/hbar): {:.2e}", u.unitarity_defect());
    let c = conjugate(&u, &a)?;
    println!("conjugation preserves the norm: {:.12}", c.operator_norm());
    Ok(())
}
