//! Limiting seminorms, the null ideal, extension to an adjoined limit point,
//! and the limit fiber as a quotient.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::C64;
use crate::base_space::{is_dense_isometric_embedding, BaseMap, Point};
use crate::bundle::{module_action, Bundle, Section};
use crate::convergence::{estimate_nonnegative_limit, nearest, tail_indices, LimitEstimate, LimitMethod, TailConfig};
use crate::error::{Error, Result};
use crate::expr::{random_expression, Generator, GeneratorExpression, SampledFn};

/// Sample indices the limit estimator reads.
fn estimator_indices(dist: &[f64], cfg: &TailConfig) -> Vec<usize> {
    let mut wide = cfg.clone();
    wide.window = cfg.window.max(4);
    let mut idx = tail_indices(dist, &wide);
    idx.extend(nearest(dist, wide.window));
    idx.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    idx.dedup();
    idx
}

/// `lim_{hbar -> 0} ||φ_hbar(a)||` along the base grid.
pub fn limiting_norm(a: &Section, cfg: &TailConfig) -> Result<LimitEstimate> {
    let base = a.bundle().base();
    let dist = base.limit_distances();
    let levels = a.bundle().levels();
    if levels.windows(2).all(|w| w[0] == w[1]) && a.prefactor().is_none() && !a.expr().has_weights() {
        // constant bundle: every fiber is the same algebra with the same value
        let v = a.at(0)?.operator_norm();
        return Ok(LimitEstimate {
            value: v,
            error_bound: 0.0,
            method: LimitMethod::CauchyTail,
            samples_used: base.len().max(2),
        });
    }
    let idx = estimator_indices(&dist, cfg);
    let norms: Vec<f64> = idx
        .par_iter()
        .map(|&k| a.at(k).map(|v| v.operator_norm()))
        .collect::<Result<_>>()?;
    let d: Vec<f64> = idx.iter().map(|&k| dist[k]).collect();
    if base.len() < cfg.min_samples {
        return Err(Error::TooFewSamples {
            needed: cfg.min_samples,
            found: base.len(),
        });
    }
    estimate_nonnegative_limit(&d, &norms, cfg)
}

/// `a ∈ K_0`: the limiting norm vanishes within `tol` plus its error bound.
pub fn in_null_ideal(a: &Section, tol: f64, cfg: &TailConfig) -> Result<bool> {
    let l = limiting_norm(a, cfg)?;
    Ok(l.value <= tol + l.error_bound)
}

/// Extends a bundle along a dense isometric embedding into a base carrying
/// the limit point. The section algebra is unchanged; the fiber at the limit
/// is the quotient by the null ideal.
pub fn extend_bundle(b: &Arc<Bundle>, alpha: &BaseMap) -> Result<Arc<Bundle>> {
    if b.base().has_limit() {
        return Err(Error::LimitPointPresent);
    }
    if alpha.source().points() != b.base().points() {
        return Err(Error::NotDenseIsometric("source is not the bundle's base".into()));
    }
    if !alpha.target().has_limit() {
        return Err(Error::NotDenseIsometric("target has no limit point".into()));
    }
    if !is_dense_isometric_embedding(alpha) {
        return Err(Error::NotDenseIsometric("map is not a dense isometric embedding".into()));
    }
    let target = alpha.target();
    let mut levels = vec![usize::MAX; target.len()];
    for (i, p) in alpha.images().iter().enumerate() {
        match p {
            Point::Sample(k) => levels[*k] = b.level(i),
            Point::Limit => {
                return Err(Error::NotDenseIsometric("a sample is mapped to the limit".into()))
            }
        }
    }
    if levels.contains(&usize::MAX) {
        return Err(Error::NotDenseIsometric(
            "target sample outside the image carries no fiber".into(),
        ));
    }
    Bundle::new(target.clone(), b.scheme().clone(), levels, b.generators().to_vec())
}

/// Extension along the one-point compactification `I -> I ∪ {0_I}`.
pub fn extend_to_limit(b: &Arc<Bundle>) -> Result<(Arc<Bundle>, BaseMap)> {
    let target = b.base().one_point_compactify()?;
    let alpha = BaseMap::inclusion(b.base(), &target)?;
    Ok((extend_bundle(b, &alpha)?, alpha))
}

/// The same section viewed in the extended bundle.
pub fn extend_section(a: &Section, alpha: &BaseMap, extended: &Arc<Bundle>) -> Result<Section> {
    let mut inverse = vec![usize::MAX; extended.len()];
    for (i, p) in alpha.images().iter().enumerate() {
        if let Point::Sample(k) = p {
            inverse[*k] = i;
        }
    }
    if inverse.contains(&usize::MAX) {
        return Err(Error::NotDenseIsometric("extension map is not onto the samples".into()));
    }
    let expr = a.expr().pullback(&inverse);
    let s = Section::new(extended, expr)?;
    match a.prefactor() {
        Some(f) => module_action(&f.pullback(&inverse), &s),
        None => Ok(s),
    }
}

/// A coset in the limit fiber, with its quotient norm and classical symbol.
#[derive(Clone, Debug)]
pub struct LimitFiberElement {
    pub expr: GeneratorExpression,
    pub limiting_norm: LimitEstimate,
    pub symbol: Option<Vec<C64>>,
}

/// The fiber over the adjoined limit point, as the quotient of the section
/// algebra by the null ideal.
#[derive(Clone, Debug)]
pub struct LimitFiber {
    bundle: Arc<Bundle>,
    cfg: TailConfig,
}

pub fn limit_fiber(b: &Arc<Bundle>, cfg: &TailConfig) -> Result<LimitFiber> {
    if !b.base().has_limit() {
        return Err(Error::NotExtended);
    }
    Ok(LimitFiber {
        bundle: b.clone(),
        cfg: cfg.clone(),
    })
}

impl LimitFiber {
    pub fn bundle(&self) -> &Arc<Bundle> {
        &self.bundle
    }

    pub fn config(&self) -> &TailConfig {
        &self.cfg
    }

    pub fn generators(&self) -> Vec<GeneratorExpression> {
        self.bundle.generators().to_vec()
    }

    /// Class of a section in the quotient.
    pub fn element(&self, expr: GeneratorExpression) -> Result<LimitFiberElement> {
        let s = Section::new(&self.bundle, expr.clone())?;
        self.class_of(&s)
    }

    pub fn class_of(&self, a: &Section) -> Result<LimitFiberElement> {
        if !Arc::ptr_eq(a.bundle(), &self.bundle) && !a.bundle().same_fibers(&self.bundle) {
            return Err(Error::CompositionMismatch("section of another bundle".into()));
        }
        let limiting_norm = limiting_norm(a, &self.cfg)?;
        let expr = a.folded_expr();
        let symbol = self.bundle.scheme().classical_symbol(&expr).ok();
        Ok(LimitFiberElement {
            expr,
            limiting_norm,
            symbol,
        })
    }

    pub fn unit(&self) -> Result<LimitFiberElement> {
        self.element(GeneratorExpression::one())
    }

    pub fn zero(&self) -> Result<LimitFiberElement> {
        self.element(GeneratorExpression::zero())
    }

    pub fn add(&self, x: &LimitFiberElement, y: &LimitFiberElement) -> Result<LimitFiberElement> {
        self.element(&x.expr + &y.expr)
    }

    pub fn sub(&self, x: &LimitFiberElement, y: &LimitFiberElement) -> Result<LimitFiberElement> {
        self.element(&x.expr - &y.expr)
    }

    /// Product of representatives; well defined modulo the null ideal.
    pub fn product(&self, x: &LimitFiberElement, y: &LimitFiberElement) -> Result<LimitFiberElement> {
        self.element(&x.expr * &y.expr)
    }

    pub fn adjoint(&self, x: &LimitFiberElement) -> Result<LimitFiberElement> {
        self.element(x.expr.adjoint())
    }

    pub fn scale(&self, x: &LimitFiberElement, c: C64) -> Result<LimitFiberElement> {
        self.element(x.expr.scale(c))
    }

    /// Class of `φ(a)(b) - φ(b)(a)`.
    pub fn commutator(&self, x: &LimitFiberElement, y: &LimitFiberElement) -> Result<LimitFiberElement> {
        self.element(&(&x.expr * &y.expr) - &(&y.expr * &x.expr))
    }

    /// Generators commute modulo the null ideal.
    pub fn is_commutative(&self, tol: f64) -> Result<bool> {
        let gens = self.generators();
        for (i, a) in gens.iter().enumerate() {
            for b in &gens[i + 1..] {
                let c = self.element(&(a * b) - &(b * a))?;
                if !(c.limiting_norm.value <= tol + c.limiting_norm.error_bound) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

pub fn quotient_norm(x: &LimitFiberElement) -> f64 {
    x.limiting_norm.value
}

/// Coset equality: the quotient norm of the difference vanishes within
/// `tol` plus its error bound.
pub fn quotient_equal(
    fiber: &LimitFiber,
    x: &LimitFiberElement,
    y: &LimitFiberElement,
    tol: f64,
) -> Result<bool> {
    let d = fiber.sub(x, y)?;
    Ok(d.limiting_norm.value <= tol + d.limiting_norm.error_bound)
}

pub fn classical_symbol(fiber: &LimitFiber, x: &LimitFiberElement) -> Result<Vec<C64>> {
    match &x.symbol {
        Some(s) => Ok(s.clone()),
        None => fiber.bundle.scheme().classical_symbol(&x.expr),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessEntry {
    pub expr: String,
    pub quotient_norm: f64,
    pub error_bound: f64,
    pub symbol_sup: f64,
    pub deviation: f64,
    pub star_compatible: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub entries: Vec<UniquenessEntry>,
    pub violations: Vec<String>,
    pub pass: bool,
}

/// Compares the quotient representation of the limit fiber with the
/// classical-symbol representation on the given expressions (plus
/// `random_trials` random polynomials in the generators): equal norms, and
/// adjoints corresponding to complex conjugates.
pub fn check_uniqueness(
    fiber: &LimitFiber,
    exprs: &[GeneratorExpression],
    tol: f64,
    random_trials: usize,
    seed: u64,
) -> Result<UniquenessReport> {
    let mut all: Vec<GeneratorExpression> = exprs.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let letters: Vec<Generator> = fiber.bundle.scheme().generator_labels();
    for _ in 0..random_trials {
        let d = rng.gen_range(1..=2);
        all.push(random_expression(&mut rng, &letters, d, 3));
    }
    let scheme = fiber.bundle.scheme().clone();
    let entries: Vec<UniquenessEntry> = all
        .par_iter()
        .map(|e| {
            let x = fiber.element(e.clone())?;
            let xa = fiber.element(e.adjoint())?;
            let sym = classical_symbol(fiber, &x)?;
            let sym_a = classical_symbol(fiber, &xa)?;
            let symbol_sup = scheme.symbol_sup_norm(&x.expr)?;
            let conj_ok = sym
                .iter()
                .zip(&sym_a)
                .all(|(s, t)| (s.conj() - t).norm() <= 1e-12 * (1.0 + s.norm()));
            let norm_ok = (x.limiting_norm.value - xa.limiting_norm.value).abs()
                <= tol + x.limiting_norm.error_bound + xa.limiting_norm.error_bound;
            let deviation = (x.limiting_norm.value - symbol_sup).abs();
            let star_compatible = conj_ok && norm_ok;
            Ok(UniquenessEntry {
                expr: e.to_string(),
                quotient_norm: x.limiting_norm.value,
                error_bound: x.limiting_norm.error_bound,
                symbol_sup,
                deviation,
                star_compatible,
                pass: deviation <= tol && star_compatible,
            })
        })
        .collect::<Result<_>>()?;
    let violations: Vec<String> = entries
        .iter()
        .filter(|e| !e.pass)
        .map(|e| format!("{}: |{} - {}| = {:e}", e.expr, e.quotient_norm, e.symbol_sup, e.deviation))
        .collect();
    Ok(UniquenessReport {
        pass: violations.is_empty(),
        entries,
        violations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutativityEntry {
    pub a: String,
    pub b: String,
    pub quotient_norm: f64,
    pub error_bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutativityReport {
    pub tol: f64,
    pub entries: Vec<CommutativityEntry>,
    pub pass: bool,
}

/// Random pairs of polynomials of degree at most `max_degree` commute in
/// the quotient: `||[a, b]||_0 <= tol + error bound`.
pub fn check_limit_commutativity(
    fiber: &LimitFiber,
    pairs: usize,
    max_degree: usize,
    tol: f64,
    seed: u64,
) -> Result<CommutativityReport> {
    let letters = fiber.bundle.scheme().generator_labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(GeneratorExpression, GeneratorExpression)> = (0..pairs)
        .map(|_| {
            let da = rng.gen_range(1..=max_degree.max(1));
            let db = rng.gen_range(1..=max_degree.max(1));
            (
                random_expression(&mut rng, &letters, da, 3),
                random_expression(&mut rng, &letters, db, 3),
            )
        })
        .collect();
    let entries: Vec<CommutativityEntry> = cases
        .par_iter()
        .map(|(a, b)| {
            let c = fiber.element(&(a * b) - &(b * a))?;
            let n = c.limiting_norm;
            Ok(CommutativityEntry {
                a: a.to_string(),
                b: b.to_string(),
                quotient_norm: n.value,
                error_bound: n.error_bound,
                pass: n.value <= tol + n.error_bound,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CommutativityReport {
        tol,
        pass: entries.iter().all(|e| e.pass),
        entries,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IdealLawReport {
    pub cases: usize,
    pub absorption_failures: usize,
    pub closedness_failures: usize,
    pub nonmember_failures: usize,
    pub cstar_failures: usize,
    pub pass: bool,
}

/// Null-ideal laws on constructed cases: `a ∈ K` implies `ab, ba ∈ K`; sup
/// limits of Cauchy sequences in `K` stay in `K`; sections with nonzero limit
/// norm are not in `K`; and the C*-identity holds in the quotient.
pub fn check_ideal_laws(fiber: &LimitFiber, cases: usize, seed: u64) -> Result<IdealLawReport> {
    let b = fiber.bundle.clone();
    let cfg = fiber.cfg.clone();
    let tol = cfg.null_tol;
    let letters = b.scheme().generator_labels();
    let dist = b.base().limit_distances();
    let run = |case: usize| -> Result<[bool; 4]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(case as u64 * 7919));
        let p = rng.gen_range(0.5..2.0);
        let decay = SampledFn::new(dist.iter().map(|&d| C64::new(d.powf(p), 0.0)).collect(), Some(C64::new(0.0, 0.0)));
        let s = Section::new(&b, random_expression(&mut rng, &letters, 2, 3))?;
        let a = module_action(&decay, &s)?;
        let other = Section::new(&b, random_expression(&mut rng, &letters, 2, 3))?;
        let absorb = in_null_ideal(&a, tol, &cfg)?
            && in_null_ideal(&a.mul(&other)?, tol, &cfg)?
            && in_null_ideal(&other.mul(&a)?, tol, &cfg)?;
        // Cauchy sequence sum_k 2^-k a_k with a_k in K; its partial sums
        // converge in sup norm and the limit stays in K
        let mut partial = Section::zero(&b);
        let mut closed = true;
        for k in 0..6 {
            let sk = Section::new(&b, random_expression(&mut rng, &letters, 2, 2))?;
            let ak = module_action(&decay, &sk)?.scale(C64::new(0.5f64.powi(k), 0.0));
            partial = partial.add(&ak)?;
        }
        closed &= in_null_ideal(&partial, tol, &cfg)?;
        // a nonmember: unit plus a null element
        let nonmember = Section::unit(&b).add(&a)?;
        let outside = !in_null_ideal(&nonmember, tol, &cfg)?;
        // C*-identity in the quotient
        let x = fiber.class_of(&other)?;
        let xx = fiber.element(&other.expr().adjoint() * other.expr())?;
        let q = quotient_norm(&x);
        let err = xx.limiting_norm.error_bound + 2.0 * q * x.limiting_norm.error_bound + tol;
        let cstar = (quotient_norm(&xx) - q * q).abs() <= err;
        Ok([absorb, closed, outside, cstar])
    };
    let results: Vec<[bool; 4]> = (0..cases).into_par_iter().map(run).collect::<Result<_>>()?;
    let count = |i: usize| results.iter().filter(|r| !r[i]).count();
    let (a, c, n, s) = (count(0), count(1), count(2), count(3));
    Ok(IdealLawReport {
        cases,
        absorption_failures: a,
        closedness_failures: c,
        nonmember_failures: n,
        cstar_failures: s,
        pass: a + c + n + s == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::SampledBaseSpace;
    use crate::expr::parse_expression;
    use crate::quantization::{fuzzy_sphere_scheme, nc_torus_scheme};

    fn e(s: &str) -> GeneratorExpression {
        parse_expression(s).unwrap()
    }

    fn sphere(js: &[f64]) -> Arc<Bundle> {
        Bundle::from_scheme(Arc::new(fuzzy_sphere_scheme(js).unwrap()))
    }

    fn all_spins(max: f64) -> Vec<f64> {
        (1..=(2.0 * max) as usize).map(|k| k as f64 / 2.0).collect()
    }

    #[test]
    fn limiting_norm_examples() {
        let b = sphere(&[5.0, 10.0, 20.0, 40.0]);
        let cfg = TailConfig::default();
        let one = limiting_norm(&Section::unit(&b), &cfg).unwrap();
        assert_eq!((one.value, one.error_bound), (1.0, 0.0));
        let x3 = limiting_norm(&b.section(e("x3")).unwrap(), &cfg).unwrap();
        assert!((x3.value - 1.0).abs() < 2e-3, "{x3:?}");
        assert!(!in_null_ideal(&b.section(e("x3")).unwrap(), cfg.null_tol, &cfg).unwrap());
        assert!(in_null_ideal(&Section::zero(&b), cfg.null_tol, &cfg).unwrap());
        let f = SampledFn::from_real_fn(b.base(), |h| h);
        assert!(in_null_ideal(&module_action(&f, &Section::unit(&b)).unwrap(), cfg.null_tol, &cfg).unwrap());
    }

    #[test]
    fn oscillating_norm_is_not_cauchy() {
        let scheme = Arc::new(fuzzy_sphere_scheme(&[0.5]).unwrap());
        let base = crate::base_space::make_geometric_grid(1.0, 0.5, 12).unwrap();
        let b = Bundle::new(base, scheme, vec![0; 12], vec![e("x3")]).unwrap();
        let f = SampledFn::from_real_fn(b.base(), |h| (1.0 / h).sin());
        let a = module_action(&f, &Section::unit(&b)).unwrap();
        // |sin(1/h)| is what the norm sees
        let err = limiting_norm(&a, &TailConfig::default());
        assert_eq!(err, Err(Error::NonCauchyTail));
    }

    #[test]
    fn extension_is_conservative_and_commutative() {
        let b = sphere(&all_spins(10.0));
        let (ext, alpha) = extend_to_limit(&b).unwrap();
        let a = b.section(e("x1*x2 + 0.5*x3")).unwrap();
        let a_ext = extend_section(&a, &alpha, &ext).unwrap();
        for k in 0..b.len() {
            assert_eq!(a.at(k).unwrap(), a_ext.at(k).unwrap());
        }
        assert!(matches!(extend_to_limit(&ext), Err(Error::LimitPointPresent)));
        let fiber = limit_fiber(&ext, &TailConfig::default()).unwrap();
        assert!(fiber.is_commutative(1e-3).unwrap());
        assert!(matches!(limit_fiber(&b, &TailConfig::default()), Err(Error::NotExtended)));
    }

    #[test]
    fn quotient_examples() {
        let b = sphere(&all_spins(20.0));
        let (ext, _) = extend_to_limit(&b).unwrap();
        let fiber = limit_fiber(&ext, &TailConfig::default()).unwrap();
        let z = fiber.zero().unwrap();
        assert_eq!(quotient_norm(&z), 0.0);
        let x3 = fiber.element(e("x3")).unwrap();
        assert!((quotient_norm(&x3) - 1.0).abs() < 2e-3);
        assert!(quotient_equal(&fiber, &x3, &x3, 1e-3).unwrap());
        assert!(!quotient_equal(&fiber, &x3, &z, 1e-3).unwrap());
        let ab = fiber.element(e("x1*x2")).unwrap();
        let ba = fiber.element(e("x2*x1")).unwrap();
        assert!(quotient_equal(&fiber, &ab, &ba, 1e-3).unwrap());
        assert!((quotient_norm(&fiber.unit().unwrap()) - 1.0).abs() == 0.0);
        let casimir = fiber.element(e("x1*x1 + x2*x2 + x3*x3")).unwrap();
        assert!(classical_symbol(&fiber, &casimir).unwrap().iter().all(|z| (z.re - 1.0).abs() < 1e-14));
    }

    #[test]
    fn uniqueness_on_torus_is_exact() {
        let t = Bundle::from_scheme(Arc::new(nc_torus_scheme(&[8, 16, 32, 64]).unwrap()));
        let (ext, _) = extend_to_limit(&t).unwrap();
        let fiber = limit_fiber(&ext, &TailConfig::default()).unwrap();
        let modes: Vec<GeneratorExpression> = (-2..=2)
            .flat_map(|a| (-2..=2).map(move |b| (a, b)))
            .filter(|&m| m != (0, 0))
            .map(|(a, b)| GeneratorExpression::generator(Generator::Mode(a, b)))
            .collect();
        let r = check_uniqueness(&fiber, &modes, 5e-2, 0, 1).unwrap();
        assert!(r.pass);
        assert!(r.entries.iter().all(|x| (x.quotient_norm - 1.0).abs() < 1e-12 && x.symbol_sup == 1.0));
    }

    #[test]
    fn constant_bundle_has_its_fiber_as_limit() {
        let scheme = Arc::new(fuzzy_sphere_scheme(&[1.0]).unwrap());
        let base = SampledBaseSpace::from_points(vec![1.0]).unwrap().one_point_compactify().unwrap();
        let b = Bundle::new(base, scheme, vec![0], vec![e("x3")]).unwrap();
        let fiber = limit_fiber(&b, &TailConfig::default()).unwrap();
        let x = fiber.element(e("x3")).unwrap();
        assert!((quotient_norm(&x) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn random_pairs_commute_at_the_limit() {
        let (b, _) = extend_to_limit(&sphere(&all_spins(20.0))).unwrap();
        let f = limit_fiber(&b, &TailConfig::default()).unwrap();
        let r = check_limit_commutativity(&f, 10, 2, 1e-3, 5).unwrap();
        assert!(r.pass, "{:?}", r.entries.iter().filter(|e| !e.pass).collect::<Vec<_>>());
    }

    #[test]
    fn ideal_laws_small() {
        let b = sphere(&all_spins(12.0));
        let (ext, _) = extend_to_limit(&b).unwrap();
        let fiber = limit_fiber(&ext, &TailConfig::default()).unwrap();
        let r = check_ideal_laws(&fiber, 6, 3).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
