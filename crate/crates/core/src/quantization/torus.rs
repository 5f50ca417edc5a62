//! Clock and shift matrices and Weyl-ordered Fourier modes.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::algebra::C64;

/// `W(m) = w^(-m1 m2 / 2) U^m1 V^m2` with `U = diag(w^k)`, `V e_k = e_(k+1)`,
/// `w = exp(2 pi i / n)`. Entries are built directly so that `W(-m)` is
/// exactly the adjoint of `W(m)`.
pub fn weyl_mode(n: usize, m1: i32, m2: i32) -> DMatrix<C64> {
    let ni = n as i64;
    let (m1, m2) = (m1 as i64, m2 as i64);
    let mut w = DMatrix::<C64>::zeros(n, n);
    for c in 0..ni {
        let r = (c + m2).rem_euclid(ni);
        let mut k = (2 * r * m1 - m1 * m2).rem_euclid(2 * ni);
        if k > ni {
            k -= 2 * ni;
        }
        w[(r as usize, c as usize)] = phase(k, ni);
    }
    w
}

/// `exp(i pi k / n)` for `-n < k <= n`, odd in `k` bit for bit.
fn phase(k: i64, n: i64) -> C64 {
    if k == 0 {
        return C64::new(1.0, 0.0);
    }
    if k == n {
        return C64::new(-1.0, 0.0);
    }
    let (s, c) = (PI * k.abs() as f64 / n as f64).sin_cos();
    C64::new(c, if k < 0 { -s } else { s })
}

pub fn clock(n: usize) -> DMatrix<C64> {
    weyl_mode(n, 1, 0)
}

pub fn shift(n: usize) -> DMatrix<C64> {
    weyl_mode(n, 0, 1)
}

/// `m1 n2 - m2 n1`.
pub fn wedge(m: (i32, i32), n: (i32, i32)) -> i32 {
    m.0 * n.1 - m.1 * n.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_shift_relation_n2() {
        let (u, v) = (clock(2), shift(2));
        assert!((&u * &v + &v * &u).norm() < 1e-15);
    }

    #[test]
    fn weyl_adjoint_is_exact() {
        for n in [3, 7, 10] {
            for m in [(1, 2), (-3, 1), (2, 2), (0, -5)] {
                assert_eq!(weyl_mode(n, -m.0, -m.1), weyl_mode(n, m.0, m.1).adjoint());
            }
        }
    }

    #[test]
    fn sine_identity() {
        for n in [5, 10, 17] {
            for (m, k) in [((1, 0), (0, 1)), ((2, -1), (1, 3)), ((-1, 2), (2, 2))] {
                let a = weyl_mode(n, m.0, m.1);
                let b = weyl_mode(n, k.0, k.1);
                let comm = &a * &b - &b * &a;
                let s = (PI * wedge(m, k) as f64 / n as f64).sin();
                let rhs = weyl_mode(n, m.0 + k.0, m.1 + k.1).map(|z| z * C64::new(0.0, 2.0 * s));
                assert!((comm - rhs).norm() < 1e-12, "n={n} m={m:?} k={k:?}");
            }
        }
    }
}
