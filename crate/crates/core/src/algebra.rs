//! Finite-dimensional C*-algebra core.
//!
//! Fibers are full matrix algebras `M_n(C)`. A [`FiberElement`] is a square,
//! non-empty complex matrix with finite entries; the `*` operation is the
//! conjugate transpose and the norm is the spectral norm.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Self-adjointness tolerance in the max-entry norm.
pub const SELF_ADJOINT_TOL: f64 = 1e-10;

/// An element of a fiber algebra `M_n(C)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberElement(DMatrix<C64>);

impl FiberElement {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(m))
    }

    /// Builds an element from row-major entries.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "fiber dimension must be positive");
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "fiber dimension must be positive");
        Self(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn scale(&self, z: C64) -> Self {
        Self(&self.0 * z)
    }

    pub fn scale_real(&self, x: f64) -> Self {
        Self(self.0.map(|z| z * x))
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Spectral norm (largest singular value). Relative accuracy is at the
    /// level of the SVD backend, well below 1e-10 for `dim <= 256`.
    pub fn operator_norm(&self) -> f64 {
        spectral_norm(&self.0).expect("fiber elements are non-empty")
    }

    /// Largest absolute entry.
    pub fn max_entry_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn self_adjoint_deviation(&self) -> f64 {
        (&self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.self_adjoint_deviation() <= tol
    }

    /// `||U* U - I||` in operator norm.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let d = self.0.adjoint() * &self.0 - DMatrix::<C64>::identity(n, n);
        spectral_norm(&d).unwrap_or(0.0)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        self.same_dim(rhs)?;
        Ok(Self(&self.0 * &rhs.0))
    }

    pub fn checked_add(&self, rhs: &Self) -> Result<Self> {
        self.same_dim(rhs)?;
        Ok(Self(&self.0 + &rhs.0))
    }

    pub fn checked_sub(&self, rhs: &Self) -> Result<Self> {
        self.same_dim(rhs)?;
        Ok(Self(&self.0 - &rhs.0))
    }

    fn same_dim(&self, rhs: &Self) -> Result<()> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: rhs.dim(),
            });
        }
        Ok(())
    }

    /// Column-stacked entries, used for span and rank computations.
    pub fn to_vector(&self) -> DVector<C64> {
        DVector::from_column_slice(self.0.as_slice())
    }

    pub fn from_vector(v: &DVector<C64>, n: usize) -> Result<Self> {
        if v.len() != n * n {
            return Err(Error::DimensionMismatch {
                left: v.len(),
                right: n * n,
            });
        }
        Self::from_matrix(DMatrix::from_column_slice(n, n, v.as_slice()))
    }
}

/// Spectral norm of an arbitrary complex matrix; rejects empty input.
pub fn spectral_norm(m: &DMatrix<C64>) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let sv = m.clone().svd(false, false).singular_values;
    Ok(sv.iter().copied().fold(0.0, f64::max))
}

pub fn adjoint(a: &FiberElement) -> FiberElement {
    a.adjoint()
}

pub fn operator_norm(a: &FiberElement) -> f64 {
    a.operator_norm()
}

/// `AB - BA`.
pub fn commutator(a: &FiberElement, b: &FiberElement) -> Result<FiberElement> {
    a.same_dim(b)?;
    Ok(FiberElement(&a.0 * &b.0 - &b.0 * &a.0))
}

/// `(i / hbar) [A, B]`.
pub fn scaled_bracket(a: &FiberElement, b: &FiberElement, hbar: f64) -> Result<FiberElement> {
    if !(hbar > 0.0) {
        return Err(Error::NonPositiveHbar(hbar));
    }
    Ok(commutator(a, b)?.scale(C64::new(0.0, 1.0 / hbar)))
}

/// `exp(i t H / hbar)` for self-adjoint `H`, via the Hermitian eigendecomposition.
pub fn unitary_flow(h: &FiberElement, t: f64, hbar: f64) -> Result<FiberElement> {
    if !(hbar > 0.0) {
        return Err(Error::NonPositiveHbar(hbar));
    }
    let deviation = h.self_adjoint_deviation();
    if deviation > SELF_ADJOINT_TOL {
        return Err(Error::NotSelfAdjoint { deviation });
    }
    if t == 0.0 {
        return Ok(FiberElement::identity(h.dim()));
    }
    // symmetrize so the eigensolver sees an exactly Hermitian input
    let herm = (&h.0 + h.0.adjoint()).map(|z| z * 0.5);
    let eig = SymmetricEigen::new(herm);
    let phases = eig
        .eigenvalues
        .map(|lambda| C64::from_polar(1.0, t * lambda / hbar));
    let v = &eig.eigenvectors;
    let u = v * DMatrix::from_diagonal(&phases) * v.adjoint();
    FiberElement::from_matrix(u)
}

/// Conjugation `U X U*`.
pub fn conjugate(u: &FiberElement, x: &FiberElement) -> Result<FiberElement> {
    u.same_dim(x)?;
    Ok(FiberElement(&u.0 * &x.0 * u.0.adjoint()))
}

/// Numerical rank of the complex span of `mats` (as vectors in `C^{n^2}`).
pub fn span_rank(mats: &[FiberElement], rel_tol: f64) -> usize {
    if mats.is_empty() {
        return 0;
    }
    let n2 = mats[0].dim() * mats[0].dim();
    let cols: Vec<DVector<C64>> = mats.iter().map(|m| m.to_vector()).collect();
    let stacked = DMatrix::from_columns(&cols);
    debug_assert_eq!(stacked.nrows(), n2);
    numerical_rank(&stacked, rel_tol)
}

pub(crate) fn numerical_rank(m: &DMatrix<C64>, rel_tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Basis of the null space of `m` (right singular vectors with negligible
/// singular value).
pub(crate) fn null_space(m: &DMatrix<C64>, rel_tol: f64) -> Vec<DVector<C64>> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Vec::new();
    }
    // pad to at least square so SVD returns a full set of right vectors
    let padded = if rows < cols {
        let mut p = DMatrix::<C64>::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let thresh = rel_tol * smax.max(1.0);
    let mut out = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= thresh {
            out.push(vt.row(k).adjoint());
        }
    }
    out
}

impl Add for &FiberElement {
    type Output = FiberElement;
    fn add(self, rhs: &FiberElement) -> FiberElement {
        FiberElement(&self.0 + &rhs.0)
    }
}

impl Sub for &FiberElement {
    type Output = FiberElement;
    fn sub(self, rhs: &FiberElement) -> FiberElement {
        FiberElement(&self.0 - &rhs.0)
    }
}

impl Mul for &FiberElement {
    type Output = FiberElement;
    fn mul(self, rhs: &FiberElement) -> FiberElement {
        FiberElement(&self.0 * &rhs.0)
    }
}

impl Neg for &FiberElement {
    type Output = FiberElement;
    fn neg(self) -> FiberElement {
        FiberElement(-&self.0)
    }
}

impl Add for FiberElement {
    type Output = FiberElement;
    fn add(self, rhs: FiberElement) -> FiberElement {
        FiberElement(self.0 + rhs.0)
    }
}

impl Sub for FiberElement {
    type Output = FiberElement;
    fn sub(self, rhs: FiberElement) -> FiberElement {
        FiberElement(self.0 - rhs.0)
    }
}

impl Mul for FiberElement {
    type Output = FiberElement;
    fn mul(self, rhs: FiberElement) -> FiberElement {
        FiberElement(self.0 * rhs.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pauli() -> [FiberElement; 3] {
        let o = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        [
            FiberElement::from_rows(&[vec![o, one], vec![one, o]]).unwrap(),
            FiberElement::from_rows(&[vec![o, -i], vec![i, o]]).unwrap(),
            FiberElement::from_rows(&[vec![one, o], vec![o, -one]]).unwrap(),
        ]
    }

    // independent closed-form singular values of a 2x2 matrix:
    // s_max^2 = (|A|_F^2 + sqrt(|A|_F^4 - 4|det A|^2)) / 2
    fn svd2_oracle(a: &FiberElement) -> f64 {
        let m = a.matrix();
        let fro2: f64 = m.iter().map(|z| z.norm_sqr()).sum();
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        ((fro2 + (fro2 * fro2 - 4.0 * det.norm_sqr()).max(0.0).sqrt()) / 2.0).sqrt()
    }

    #[test]
    fn adjoint_examples() {
        let id = FiberElement::identity(2);
        assert_eq!(id.adjoint(), id);
        let n = FiberElement::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let nt = FiberElement::from_real_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(n.adjoint(), nt);
        let z = c(0.0, 0.0);
        let a = FiberElement::from_rows(&[vec![z, c(0.0, 1.0)], vec![z, z]]).unwrap();
        let b = FiberElement::from_rows(&[vec![z, z], vec![c(0.0, -1.0), z]]).unwrap();
        assert_eq!(a.adjoint(), b);
        assert_eq!(a.adjoint().adjoint(), a);
    }

    #[test]
    fn norm_examples() {
        for n in 1..6 {
            assert!((FiberElement::identity(n).operator_norm() - 1.0).abs() < 1e-14);
        }
        let a = FiberElement::from_real_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert!((svd2_oracle(&a) - 2.0).abs() < 1e-15);
        assert!((a.operator_norm() - svd2_oracle(&a)).abs() < 1e-14);
        let d = FiberElement::from_real_rows(&[vec![0.5, 0.0], vec![0.0, -0.5]]).unwrap();
        assert!((d.operator_norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_rejected() {
        assert_eq!(
            spectral_norm(&DMatrix::<C64>::zeros(0, 0)),
            Err(Error::EmptyMatrix)
        );
        assert!(FiberElement::from_rows(&[]).is_err());
        assert!(FiberElement::from_matrix(DMatrix::from_element(1, 1, c(f64::NAN, 0.0))).is_err());
    }

    #[test]
    fn commutator_examples() {
        let [sx, sy, sz] = pauli();
        let id = FiberElement::identity(2);
        assert_eq!(commutator(&id, &sx).unwrap(), FiberElement::zeros(2));
        assert_eq!(commutator(&sy, &sy).unwrap(), FiberElement::zeros(2));
        // direct multiplication: sx sy = i sz, sy sx = -i sz
        let expected = sz.scale(c(0.0, 2.0));
        assert!((&commutator(&sx, &sy).unwrap() - &expected).max_entry_norm() < 1e-15);
        assert!(matches!(
            commutator(&sx, &FiberElement::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scaled_bracket_examples() {
        let [sx, sy, sz] = pauli();
        let hx = sx.scale_real(0.5);
        let hy = sy.scale_real(0.5);
        let r = scaled_bracket(&hx, &hy, 1.0).unwrap();
        assert!((&r - &sz.scale_real(-0.5)).max_entry_norm() < 1e-15);
        assert!(r.is_self_adjoint(1e-15));
        let r2 = scaled_bracket(&hx, &hy, 2.0).unwrap();
        assert!((&r - &r2.scale_real(2.0)).max_entry_norm() < 1e-15);
        assert_eq!(scaled_bracket(&hx, &hx, 0.3).unwrap(), FiberElement::zeros(2));
        assert!(scaled_bracket(&hx, &hy, 0.0).is_err());
        assert!(scaled_bracket(&hx, &hy, -1.0).is_err());
    }

    #[test]
    fn unitary_flow_examples() {
        let [sx, _, sz] = pauli();
        let id = FiberElement::identity(2);
        assert_eq!(unitary_flow(&sx, 0.0, 0.7).unwrap(), id);
        let zero = FiberElement::zeros(3);
        let u = unitary_flow(&zero, 2.5, 1.0).unwrap();
        assert!((&u - &FiberElement::identity(3)).max_entry_norm() < 1e-14);
        let u = unitary_flow(&sz, PI, 1.0).unwrap();
        assert!((&u + &id).max_entry_norm() < 1e-14);
        assert!(u.unitarity_defect() < 1e-12);

        let not_sa = FiberElement::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            unitary_flow(&not_sa, 1.0, 1.0),
            Err(Error::NotSelfAdjoint { .. })
        ));
        assert!(unitary_flow(&sz, 1.0, 0.0).is_err());
    }

    #[test]
    fn span_rank_of_paulis() {
        let [sx, sy, sz] = pauli();
        let id = FiberElement::identity(2);
        assert_eq!(span_rank(&[id.clone(), sx.clone(), sy, sz], 1e-12), 4);
        assert_eq!(span_rank(&[id.clone(), sx.clone(), sx], 1e-12), 2);
    }
}
