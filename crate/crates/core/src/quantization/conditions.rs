//! Numerical checks of von Neumann's, Dirac's and Rieffel's conditions, and
//! of nondegeneracy and closure of the quantized span.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{numerical_rank, scaled_bracket, FiberElement, C64};
use crate::bundle::{check_uniform_continuity, ContinuityReport};
use crate::convergence::{estimate_nonnegative_limit, ConvergenceReport, LimitEstimate, TailConfig};
use crate::error::Result;
use crate::expr::{GeneratorExpression, Term, Word};

use super::QuantizationScheme;

/// Tolerance for the limiting norm against the classical sup norm.
pub const SYMBOL_MATCH_TOL: f64 = 5e-2;
const RANK_TOL: f64 = 1e-9;

fn residual_report(
    name: String,
    s: &QuantizationScheme,
    cfg: &TailConfig,
    f: impl Fn(usize) -> Result<f64> + Sync,
) -> Result<ConvergenceReport> {
    let residual: Vec<f64> = (0..s.len())
        .into_par_iter()
        .map(&f)
        .collect::<Result<Vec<f64>>>()?;
    let hbar = s.hbars();
    Ok(ConvergenceReport::from_samples(name, &hbar, &residual, &residual, cfg))
}

/// `r(hbar) = ||Q(a) Q(b) - Q(ab)||` along the scheme's grid.
pub fn check_von_neumann(
    s: &QuantizationScheme,
    a: &GeneratorExpression,
    b: &GeneratorExpression,
    cfg: &TailConfig,
) -> Result<ConvergenceReport> {
    s.check_labels(a)?;
    s.check_labels(b)?;
    let ab = a * b;
    residual_report(format!("von_neumann[{a}|{b}]"), s, cfg, |k| {
        let qa = s.quantize(a, k)?;
        let qb = s.quantize(b, k)?;
        let qab = s.quantize(&ab, k)?;
        Ok((&qa * &qb - qab).operator_norm())
    })
}

/// `r(hbar) = ||(i/hbar)[Q(a), Q(b)] - Q({a, b})||` along the grid.
pub fn check_dirac(
    s: &QuantizationScheme,
    a: &GeneratorExpression,
    b: &GeneratorExpression,
    cfg: &TailConfig,
) -> Result<ConvergenceReport> {
    s.check_labels(a)?;
    s.check_labels(b)?;
    let pb = s.poisson_bracket(a, b)?;
    residual_report(format!("dirac[{a}|{b}]"), s, cfg, |k| {
        let qa = s.quantize(a, k)?;
        let qb = s.quantize(b, k)?;
        let lhs = scaled_bracket(&qa, &qb, s.hbar(k))?;
        Ok((lhs - s.quantize(&pb, k)?).operator_norm())
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RieffelReport {
    pub norms: Vec<(f64, f64)>,
    pub continuity: ContinuityReport,
    pub limit: Option<LimitEstimate>,
    pub symbol_sup: f64,
    pub matches_symbol: bool,
    pub pass: bool,
}

/// Norm profile `hbar -> ||Q(a)||`, its uniform continuity, its limit, and
/// the comparison of that limit with the classical sup norm.
pub fn check_rieffel(
    s: &QuantizationScheme,
    a: &GeneratorExpression,
    cfg: &TailConfig,
) -> Result<RieffelReport> {
    s.check_labels(a)?;
    let norms: Vec<f64> = (0..s.len())
        .into_par_iter()
        .map(|k| s.quantize(a, k).map(|q| q.operator_norm()))
        .collect::<Result<_>>()?;
    let base = s.base_space();
    let continuity = check_uniform_continuity(&base, &norms, f64::INFINITY, cfg)?;
    let hbar = s.hbars();
    let limit = estimate_nonnegative_limit(&hbar, &norms, cfg).ok();
    let symbol_sup = s.symbol_sup_norm(a)?;
    let matches_symbol = limit
        .is_some_and(|l| (l.value - symbol_sup).abs() <= SYMBOL_MATCH_TOL + l.error_bound);
    Ok(RieffelReport {
        norms: hbar.into_iter().zip(norms).collect(),
        pass: continuity.pass && matches_symbol,
        continuity,
        limit,
        symbol_sup,
        matches_symbol,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DeformationLevel {
    pub hbar: f64,
    pub degree_cap: usize,
    pub checked_degree: usize,
    pub quantized_rank: usize,
    pub joint_rank: usize,
    pub nondegenerate: bool,
    /// Nondegeneracy at the requested degree when it exceeds the cap;
    /// reported, not failed.
    pub above_cap_nondegenerate: Option<bool>,
    pub closure: bool,
    pub random_failures: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeformationReport {
    pub levels: Vec<DeformationLevel>,
    pub zero_quantizes_to_zero: bool,
    pub pass: bool,
}

fn symbol_sample_stride(len: usize) -> usize {
    (len / 256).max(1)
}

/// Rank of the quantized monomials, and of the quantized monomials stacked
/// with their classical symbols. Equal ranks mean `Q(A) = 0 => A = 0` on the
/// span.
fn rank_pair(s: &QuantizationScheme, level: usize, monos: &[Word]) -> (usize, usize) {
    let n = s.fiber_dim(level);
    let grid = s.symbol_grid();
    let stride = symbol_sample_stride(grid.len());
    let pts: Vec<[f64; 2]> = grid.points().iter().step_by(stride).copied().collect();
    let scale = ((n * n) as f64 / pts.len() as f64).sqrt();
    let mut q_cols = Vec::with_capacity(monos.len());
    let mut joint_cols = Vec::with_capacity(monos.len());
    for w in monos {
        let q = s.quantize_word(w, level);
        let expr = GeneratorExpression::word(w.clone());
        let mut col: Vec<C64> = q.iter().copied().collect();
        q_cols.push(DVector::from_vec(col.clone()));
        for &p in &pts {
            col.push(grid.eval_at(&expr, p).expect("registered monomial") * scale);
        }
        joint_cols.push(DVector::from_vec(col));
    }
    (
        numerical_rank(&DMatrix::from_columns(&q_cols), RANK_TOL),
        numerical_rank(&DMatrix::from_columns(&joint_cols), RANK_TOL),
    )
}

/// Nondegeneracy (via symbol rank) and closure of products of quantized
/// generators (via word-span rank), at each level.
pub fn check_deformation(
    s: &QuantizationScheme,
    max_degree: usize,
    trials: usize,
    seed: u64,
) -> Result<DeformationReport> {
    let zero = (0..s.len()).all(|k| {
        s.quantize(&GeneratorExpression::zero(), k)
            .map(|q| q.operator_norm() == 0.0)
            .unwrap_or(false)
    });
    let levels: Vec<DeformationLevel> = (0..s.len())
        .into_par_iter()
        .map(|k| {
            let cap = s.degree_cap(k);
            let checked = max_degree.min(cap);
            let monos = s.monomials(checked);
            let (q_rank, joint) = rank_pair(s, k, &monos);
            let above = (max_degree > cap).then(|| {
                let (a, b) = rank_pair(s, k, &s.monomials(max_degree));
                a == b
            });
            let closure = closure_holds(s, k);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let mut failures = 0;
            for _ in 0..trials {
                let terms: Vec<Term> = monos
                    .iter()
                    .map(|w| Term {
                        coeff: C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                        weight: None,
                        word: w.clone(),
                    })
                    .collect();
                let expr = GeneratorExpression::from_terms(terms);
                let qn = s.quantize(&expr, k).map(|q| q.operator_norm()).unwrap_or(f64::NAN);
                let sn = s.symbol_sup_norm(&expr).unwrap_or(f64::NAN);
                if !(qn > 1e-9 || sn < 1e-6) {
                    failures += 1;
                }
            }
            DeformationLevel {
                hbar: s.hbar(k),
                degree_cap: cap,
                checked_degree: checked,
                quantized_rank: q_rank,
                joint_rank: joint,
                nondegenerate: q_rank == joint,
                above_cap_nondegenerate: above,
                closure,
                random_failures: failures,
            }
        })
        .collect();
    let pass = zero
        && levels
            .iter()
            .all(|l| l.nondegenerate && l.closure && l.random_failures == 0);
    Ok(DeformationReport {
        levels,
        zero_quantizes_to_zero: zero,
        pass,
    })
}

/// Products of two quantized generators lie in the span of quantized
/// monomials of degree two (sphere) or of modes with `|m_i| <= 2` (torus).
fn closure_holds(s: &QuantizationScheme, level: usize) -> bool {
    let span: Vec<FiberElement> = s
        .monomials(2)
        .iter()
        .map(|w| FiberElement::from_matrix(s.quantize_word(w, level)).expect("finite"))
        .collect();
    let base_rank = crate::algebra::span_rank(&span, RANK_TOL);
    let gens: Vec<FiberElement> = s
        .generator_expressions()
        .iter()
        .map(|g| s.quantize(g, level).expect("registered"))
        .collect();
    for a in &gens {
        for b in &gens {
            let mut ext = span.clone();
            ext.push(a * b);
            if crate::algebra::span_rank(&ext, RANK_TOL) != base_rank {
                return false;
            }
        }
    }
    true
}
