//! Spin-`j` matrices and fully symmetrized monomials.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;

use crate::algebra::C64;

/// `(S1, S2, S3)` in the basis `m = j, j-1, ..., -j`, with `[S1, S2] = i S3`.
pub fn spin_matrices(two_j: usize) -> [DMatrix<C64>; 3] {
    let n = two_j + 1;
    let j = two_j as f64 / 2.0;
    let mut sp = DMatrix::<C64>::zeros(n, n);
    let mut s3 = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let m = j - k as f64;
        s3[(k, k)] = C64::new(m, 0.0);
        if k > 0 {
            // S+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>
            sp[(k - 1, k)] = C64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    let sm = sp.adjoint();
    let s1 = (&sp + &sm).map(|z| z * 0.5);
    let s2 = (&sp - &sm).map(|z| z * C64::new(0.0, -0.5));
    [s1, s2, s3]
}

/// Sparse real polynomial in `x1, x2, x3`, keyed by exponent triple.
pub type Poly = BTreeMap<[u16; 3], f64>;

fn laplacian(p: &Poly) -> Poly {
    let mut out = Poly::new();
    for (k, &c) in p {
        for a in 0..3 {
            if k[a] >= 2 {
                let mut e = *k;
                e[a] -= 2;
                *out.entry(e).or_insert(0.0) += c * (k[a] as f64) * (k[a] as f64 - 1.0);
            }
        }
    }
    out.retain(|_, c| *c != 0.0);
    out
}

fn times_r2(p: &Poly, times: usize) -> Poly {
    let mut cur = p.clone();
    for _ in 0..times {
        let mut out = Poly::new();
        for (k, &c) in &cur {
            for a in 0..3 {
                let mut e = *k;
                e[a] += 2;
                *out.entry(e).or_insert(0.0) += c;
            }
        }
        cur = out;
    }
    cur
}

/// Restriction of the monomial `x^counts` to the unit sphere, written as
/// the sum of its homogeneous harmonic components `h_d + h_(d-2) + ...`.
/// Peels `p = sum_k r^(2k) h_(d-2k)` from the lowest harmonic up, using
/// `Δ^k (r^(2k) h_m) = prod_(i=1..k) 2i(2i+1+2m) h_m`.
pub fn harmonic_reduction(counts: [u16; 3]) -> Poly {
    let d: usize = counts.iter().map(|&c| c as usize).sum();
    let mut rem = Poly::from([(counts, 1.0)]);
    let mut out = Poly::new();
    for k in (0..=d / 2).rev() {
        let m = d - 2 * k;
        let mut h = rem.clone();
        for _ in 0..k {
            h = laplacian(&h);
        }
        let c: f64 = (1..=k).map(|i| (2 * i * (2 * i + 1 + 2 * m)) as f64).product();
        h.values_mut().for_each(|v| *v /= c);
        for (e, v) in times_r2(&h, k) {
            *rem.entry(e).or_insert(0.0) -= v;
        }
        rem.retain(|_, v| v.abs() > 1e-15);
        for (e, v) in h {
            *out.entry(e).or_insert(0.0) += v;
        }
    }
    out.retain(|_, v| *v != 0.0);
    out
}

/// Memo table of fully symmetrized products keyed by exponent triple.
#[derive(Debug, Default)]
pub(crate) struct SymmetrizedCache {
    table: HashMap<[u16; 3], DMatrix<C64>>,
    reduced: HashMap<[u16; 3], DMatrix<C64>>,
}

impl SymmetrizedCache {
    /// Quantization of the function `x^counts` on the sphere: symmetrized
    /// products of its harmonic components.
    pub fn quantize_monomial(&mut self, q: &[DMatrix<C64>; 3], counts: [u16; 3]) -> DMatrix<C64> {
        if let Some(m) = self.reduced.get(&counts) {
            return m.clone();
        }
        let n = q[0].nrows();
        let mut acc = DMatrix::<C64>::zeros(n, n);
        for (e, c) in harmonic_reduction(counts) {
            acc += self.get(q, e).map(|z| z * c);
        }
        self.reduced.insert(counts, acc.clone());
        acc
    }

    /// Average over all orderings of `x1^k1 x2^k2 x3^k3` with `x_a -> q[a]`.
    pub fn get(&mut self, q: &[DMatrix<C64>; 3], counts: [u16; 3]) -> DMatrix<C64> {
        if let Some(m) = self.table.get(&counts) {
            return m.clone();
        }
        let n = q[0].nrows();
        let total: u16 = counts.iter().sum();
        let value = if total == 0 {
            DMatrix::identity(n, n)
        } else {
            let mut acc = DMatrix::<C64>::zeros(n, n);
            for a in 0..3 {
                if counts[a] == 0 {
                    continue;
                }
                let mut rest = counts;
                rest[a] -= 1;
                let tail = self.get(q, rest);
                let w = counts[a] as f64 / total as f64;
                acc += (&q[a] * tail).map(|z| z * w);
            }
            acc
        };
        self.table.insert(counts, value.clone());
        value
    }
}
