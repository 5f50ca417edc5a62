//! Post-quantization structure: a generating family closed under the
//! rescaled bracket, the induced Poisson bracket on the limit fiber, the
//! second-order condition on base maps, and the Poisson limit of morphisms.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{scaled_bracket, FiberElement, C64};
use crate::base_space::{BaseMap, Point};
use crate::bundle::{check_fullness, Bundle, FullnessConfig, Section};
use crate::convergence::{estimate_limit, ConvergenceReport, LimitEstimate, TailConfig};
use crate::error::{Error, Result};
use crate::expr::{Generator, GeneratorExpression, SampledFn, Word};
use crate::functors::morphism::{extended, limit_morphism_with, same_bundle, BundleMorphism, LimitMorphism};
use crate::limit::{limit_fiber, quotient_equal, LimitFiber, LimitFiberElement};

const SPAN_TOL: f64 = 1e-10;

/// A bundle with a finite family `P` and its bracket table
/// `(a, b) -> c_{a,b}`, the classical bracket of the two symbols.
#[derive(Clone, Debug)]
pub struct PostQuantizationData {
    bundle: Arc<Bundle>,
    extended: Arc<Bundle>,
    p: Vec<GeneratorExpression>,
    table: BTreeMap<(usize, usize), GeneratorExpression>,
    cfg: TailConfig,
}

impl PostQuantizationData {
    pub fn new(bundle: &Arc<Bundle>, p: Vec<GeneratorExpression>) -> Result<Self> {
        Self::with_config(bundle, p, &TailConfig::default())
    }

    pub fn with_config(bundle: &Arc<Bundle>, p: Vec<GeneratorExpression>, cfg: &TailConfig) -> Result<Self> {
        let s = bundle.scheme();
        let p: Vec<GeneratorExpression> = p.iter().map(|e| e.canonical()).collect();
        let mut table = BTreeMap::new();
        for (i, a) in p.iter().enumerate() {
            s.check_labels(a)?;
            for (j, b) in p.iter().enumerate() {
                table.insert((i, j), s.poisson_bracket(a, b)?.canonical());
            }
        }
        Ok(Self {
            bundle: bundle.clone(),
            extended: extended(bundle)?,
            p,
            table,
            cfg: cfg.clone(),
        })
    }

    /// `{1, x1, x2, x3}` on the sphere; `{e_m : |m1|, |m2| <= 2}` on the torus.
    pub fn standard(bundle: &Arc<Bundle>) -> Result<Self> {
        let p = match bundle.scheme().kind() {
            crate::quantization::SchemeKind::FuzzySphere => {
                let mut p = vec![GeneratorExpression::one()];
                p.extend((0..3).map(|a| GeneratorExpression::generator(Generator::Coord(a))));
                p
            }
            crate::quantization::SchemeKind::NcTorus => torus_modes(2),
        };
        Self::new(bundle, p)
    }

    pub fn bundle(&self) -> &Arc<Bundle> {
        &self.bundle
    }

    pub fn family(&self) -> &[GeneratorExpression] {
        &self.p
    }

    pub fn table(&self) -> &BTreeMap<(usize, usize), GeneratorExpression> {
        &self.table
    }

    pub fn limit_fiber(&self) -> Result<LimitFiber> {
        limit_fiber(&self.extended, &self.cfg)
    }

    /// Coefficients of `a` in the family, when `a` lies in its span.
    pub fn decompose(&self, a: &GeneratorExpression) -> Option<Vec<C64>> {
        decompose_in(&self.p, a)
    }

    /// `c_{a,b}` extended bilinearly to the span of `P`.
    pub fn bracket(&self, a: &GeneratorExpression, b: &GeneratorExpression) -> Result<GeneratorExpression> {
        let missing = || Error::MissingBracket(a.to_string(), b.to_string());
        let ca = self.decompose(a).ok_or_else(missing)?;
        let cb = self.decompose(b).ok_or_else(missing)?;
        let mut out = GeneratorExpression::zero();
        for (i, x) in ca.iter().enumerate() {
            for (j, y) in cb.iter().enumerate() {
                if x.norm() > 0.0 && y.norm() > 0.0 {
                    out = out + self.table[&(i, j)].scale(x * y);
                }
            }
        }
        Ok(out.canonical())
    }

    /// Class of the quantized section of `a` in the limit fiber.
    pub fn limit_class(&self, fiber: &LimitFiber, a: &GeneratorExpression) -> Result<LimitFiberElement> {
        fiber.class_of(&self.extended.quantized_section(a)?)
    }
}

/// `{e_m : |m1|, |m2| <= r}`.
pub fn torus_modes(r: i32) -> Vec<GeneratorExpression> {
    let mut out = Vec::new();
    for m1 in -r..=r {
        for m2 in -r..=r {
            out.push(GeneratorExpression::generator(Generator::Mode(m1, m2)));
        }
    }
    out
}

fn monomial_key(w: &Word) -> Word {
    let mut w: Word = w.iter().copied().filter(|g| *g != Generator::Mode(0, 0)).collect();
    w.sort();
    w
}

fn coefficient_map(e: &GeneratorExpression) -> BTreeMap<Word, C64> {
    let mut out: BTreeMap<Word, C64> = BTreeMap::new();
    for t in e.canonical().terms() {
        *out.entry(monomial_key(&t.word)).or_insert(C64::new(0.0, 0.0)) += t.coeff;
    }
    out
}

/// Least-squares coefficients of `a` in `family` over commutative monomials,
/// accepted when the reconstruction is exact.
pub(crate) fn decompose_in(family: &[GeneratorExpression], a: &GeneratorExpression) -> Option<Vec<C64>> {
    if a.has_weights() {
        return None;
    }
    let maps: Vec<_> = family.iter().map(coefficient_map).collect();
    let target = coefficient_map(a);
    let mut keys: Vec<Word> = maps.iter().flat_map(|m| m.keys().cloned()).collect();
    keys.extend(target.keys().cloned());
    keys.sort();
    keys.dedup();
    if family.is_empty() {
        return target.values().all(|c| c.norm() <= SPAN_TOL).then(Vec::new);
    }
    let m = DMatrix::from_fn(keys.len(), family.len(), |r, c| {
        maps[c].get(&keys[r]).copied().unwrap_or(C64::new(0.0, 0.0))
    });
    let v = DVector::from_fn(keys.len(), |r, _| target.get(&keys[r]).copied().unwrap_or(C64::new(0.0, 0.0)));
    let x = m.clone().svd(true, true).solve(&v, 1e-12).ok()?;
    let resid = (&m * &x - &v).norm();
    (resid <= SPAN_TOL * v.norm().max(1.0)).then(|| x.iter().copied().collect())
}

/// `beta[P_A] ⊆ span P_B`.
pub fn is_smooth(sigma: &BundleMorphism, pa: &PostQuantizationData, pb: &PostQuantizationData) -> Result<bool> {
    for a in &pa.p {
        if decompose_in(&pb.p, &sigma.apply(a)?).is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, Serialize)]
pub struct PostQuantizationReport {
    /// words in `P` generate every fiber
    pub density: bool,
    pub brackets: Vec<ConvergenceReport>,
    pub commutators: Vec<ConvergenceReport>,
    pub pass: bool,
}

/// `|hbar|_I` at each sample.
fn distances(b: &Bundle) -> Vec<f64> {
    b.base().limit_distances()
}

fn quantized(b: &Arc<Bundle>, a: &GeneratorExpression) -> Result<Section> {
    b.quantized_section(a)
}

/// Density surrogate, rescaled-bracket residuals for every table pair, and
/// decay of commutators for `random_pairs` random degree `<= 2` pairs.
pub fn check_post_quantization(
    data: &PostQuantizationData,
    random_pairs: usize,
    seed: u64,
) -> Result<PostQuantizationReport> {
    let b = &data.bundle;
    let cfg = &data.cfg;
    let dist = distances(b);
    let gens = b.with_generators(data.p.iter().filter(|e| e.degree() > 0).cloned().collect())?;
    let full_cfg = FullnessConfig {
        max_word_length: 2 * FullnessConfig::default().span_dim_max,
        ..FullnessConfig::default()
    };
    let density = check_fullness(&gens, 0, &full_cfg, seed)?.pass;
    let sections: Vec<Section> = data.p.iter().map(|a| quantized(b, a)).collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = data.table.keys().copied().filter(|(i, j)| i < j).collect();
    let brackets: Vec<ConvergenceReport> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<ConvergenceReport> {
            let c = quantized(b, &data.table[&(i, j)])?;
            let mut value = Vec::with_capacity(b.len());
            let mut residual = Vec::with_capacity(b.len());
            for k in 0..b.len() {
                let lhs = scaled_bracket(&sections[i].at(k)?, &sections[j].at(k)?, dist[k])?;
                let ck = c.at(k)?;
                value.push(ck.operator_norm());
                residual.push((&lhs - &ck).operator_norm());
            }
            Ok(ConvergenceReport::from_samples(
                format!("bracket[{}|{}]", data.p[i], data.p[j]),
                &dist,
                &value,
                &residual,
                cfg,
            ))
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nontrivial: Vec<&GeneratorExpression> = data.p.iter().filter(|e| e.degree() > 0).collect();
    let products: Vec<(GeneratorExpression, GeneratorExpression)> = (0..random_pairs)
        .map(|_| {
            let pick = |rng: &mut ChaCha8Rng| {
                let deg = rng.gen_range(1..=2);
                let mut e = GeneratorExpression::one();
                for _ in 0..deg {
                    e = &e * nontrivial[rng.gen_range(0..nontrivial.len())];
                }
                e.scale(C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            };
            let x = pick(&mut rng);
            let y = pick(&mut rng);
            (x, y)
        })
        .collect();
    let commutators: Vec<ConvergenceReport> = products
        .par_iter()
        .filter(|(x, y)| !data.bundle.scheme().poisson_bracket(x, y).map_or(true, |c| c.is_empty()))
        .map(|(x, y)| -> Result<ConvergenceReport> {
            let sx = quantized(b, x)?;
            let sy = quantized(b, y)?;
            let r = sx.commutator(&sy)?.norms()?;
            Ok(ConvergenceReport::from_samples(format!("commutator[{x}|{y}]"), &dist, &r, &r, cfg))
        })
        .collect::<Result<_>>()?;
    let pass = density && brackets.iter().all(|r| r.pass) && commutators.iter().all(|r| r.pass);
    Ok(PostQuantizationReport {
        density,
        brackets,
        commutators,
        pass,
    })
}

/// `{φ_0(a), φ_0(b)} = φ_0(c_{a,b})` for `a`, `b` in the span of `P`.
pub fn poisson_bracket_at_limit(
    data: &PostQuantizationData,
    fiber: &LimitFiber,
    a: &GeneratorExpression,
    b: &GeneratorExpression,
) -> Result<LimitFiberElement> {
    data.limit_class(fiber, &data.bracket(a, b)?)
}

/// Class of `hbar -> (i/|hbar|)[φ(a), φ(b)]` for sections `a`, `b`, whose
/// limit is the bracket when both lie in the algebra generated by `P`.
pub fn rescaled_commutator_class(
    data: &PostQuantizationData,
    fiber: &LimitFiber,
    a: &Section,
    b: &Section,
) -> Result<LimitFiberElement> {
    let base = data.extended.base();
    let w = SampledFn::from_distance_fn(base, |d| C64::new(0.0, 1.0 / d));
    let comm = &(&a.folded_expr() * &b.folded_expr()) - &(&b.folded_expr() * &a.folded_expr());
    fiber.element(comm.weighted(&w))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketLawReport {
    pub antisymmetry_failures: usize,
    pub bilinearity_failures: usize,
    pub jacobi_failures: usize,
    pub leibniz_failures: usize,
    pub table_failures: usize,
    pub cases: usize,
    pub pass: bool,
}

/// Antisymmetry, bilinearity and Jacobi on triples from `P`, Leibniz
/// `{a, bc} = {a,b}c + b{a,c}` against the rescaled commutator of products,
/// and the table itself against rescaled commutators, all modulo
/// `quotient_equal` with `tol`.
pub fn check_bracket_laws(data: &PostQuantizationData, tol: f64, seed: u64) -> Result<BracketLawReport> {
    let fiber = data.limit_fiber()?;
    let ext = &data.extended;
    let p: Vec<&GeneratorExpression> = data.p.iter().filter(|e| e.degree() > 0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eq = |x: &LimitFiberElement, y: &LimitFiberElement| quotient_equal(&fiber, x, y, tol);
    let n = p.len();
    let mut triples: Vec<(usize, usize, usize)> = Vec::new();
    if n <= 4 {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    triples.push((i, j, k));
                }
            }
        }
    } else {
        for _ in 0..24 {
            triples.push((rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)));
        }
    }
    let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let results: Vec<[bool; 5]> = triples
        .par_iter()
        .map(|&(i, j, k)| -> Result<[bool; 5]> {
            let (a, b, c) = (p[i], p[j], p[k]);
            let ab = poisson_bracket_at_limit(data, &fiber, a, b)?;
            let ba = poisson_bracket_at_limit(data, &fiber, b, a)?;
            let anti = eq(&ab, &fiber.scale(&ba, C64::new(-1.0, 0.0))?)?;
            let lin_l = poisson_bracket_at_limit(data, &fiber, &(a + &c.scale(z)), b)?;
            let ac_b = poisson_bracket_at_limit(data, &fiber, c, b)?;
            let lin = eq(&lin_l, &fiber.add(&ab, &fiber.scale(&ac_b, z)?)?)?;
            let jac = {
                let t1 = data.bracket(a, &data.bracket(b, c)?)?;
                let t2 = data.bracket(b, &data.bracket(c, a)?)?;
                let t3 = data.bracket(c, &data.bracket(a, b)?)?;
                let sum = data.limit_class(&fiber, &(&(&t1 + &t2) + &t3))?;
                eq(&sum, &fiber.zero()?)?
            };
            let sa = ext.quantized_section(a)?;
            let sb = ext.quantized_section(b)?;
            let sc = ext.quantized_section(c)?;
            let leib = {
                let lhs = rescaled_commutator_class(data, &fiber, &sa, &sb.mul(&sc)?)?;
                let bc_ab = fiber.product(&ab, &data.limit_class(&fiber, c)?)?;
                let ac = poisson_bracket_at_limit(data, &fiber, a, c)?;
                let b_ac = fiber.product(&data.limit_class(&fiber, b)?, &ac)?;
                eq(&lhs, &fiber.add(&bc_ab, &b_ac)?)?
            };
            let table = eq(&rescaled_commutator_class(data, &fiber, &sa, &sb)?, &ab)?;
            Ok([anti, lin, jac, leib, table])
        })
        .collect::<Result<_>>()?;
    let count = |i: usize| results.iter().filter(|r| !r[i]).count();
    let report = BracketLawReport {
        antisymmetry_failures: count(0),
        bilinearity_failures: count(1),
        jacobi_failures: count(2),
        leibniz_failures: count(3),
        table_failures: count(4),
        cases: results.len(),
        pass: false,
    };
    let pass = report.antisymmetry_failures
        + report.bilinearity_failures
        + report.jacobi_failures
        + report.leibniz_failures
        + report.table_failures
        == 0;
    Ok(BracketLawReport { pass, ..report })
}

/// `k(hbar) = |1/|hbar|_I - 1/|alpha(hbar)|_J|` and its extrapolated limit.
#[derive(Clone, Debug, Serialize)]
pub struct SecondOrderReport {
    pub hbar: Vec<f64>,
    pub k_values: Vec<f64>,
    pub snap_errors: Vec<f64>,
    pub estimate: Option<LimitEstimate>,
    pub pass: bool,
}

impl SecondOrderReport {
    pub fn k(&self) -> Option<f64> {
        self.estimate.as_ref().map(|e| e.value)
    }
}

pub fn is_second_order(alpha: &BaseMap) -> SecondOrderReport {
    is_second_order_with(alpha, &TailConfig::default())
}

pub fn is_second_order_with(alpha: &BaseMap, cfg: &TailConfig) -> SecondOrderReport {
    let hbar = alpha.source().limit_distances();
    let k_values: Vec<f64> = (0..hbar.len())
        .map(|k| {
            let a = alpha.image_distance_to_limit(k);
            if a > 0.0 {
                (1.0 / hbar[k] - 1.0 / a).abs()
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let estimate = if k_values.iter().all(|v| *v <= cfg.zero_tol) {
        Some(LimitEstimate::exact(0.0))
    } else if k_values.iter().all(|v| v.is_finite()) {
        estimate_limit(&hbar, &k_values, cfg).ok().map(|mut e| {
            if e.value < 0.0 {
                e.error_bound = e.error_bound.max(-e.value);
                e.value = 0.0;
            }
            e
        })
    } else {
        None
    };
    let pass = estimate.is_some();
    SecondOrderReport {
        hbar,
        k_values,
        snap_errors: alpha.snap_errors().to_vec(),
        estimate,
        pass,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PoissonFunctorialityEntry {
    pub a: String,
    pub b: String,
    pub coset_equal: bool,
    /// `||(i/|hbar|) φ(beta[a,b]) - (i/|alpha(hbar)|)[φ(beta a), φ(beta b)]||`
    pub discrepancy: ConvergenceReport,
    /// `k(hbar) ||φ(beta [a,b])||`
    pub bound: Vec<f64>,
    pub bound_holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PoissonFunctorialityReport {
    pub second_order: SecondOrderReport,
    pub entries: Vec<PoissonFunctorialityEntry>,
    pub pass: bool,
}

fn check_endpoints(sigma: &BundleMorphism, pa: &PostQuantizationData, pb: &PostQuantizationData) -> Result<()> {
    if !same_bundle(sigma.source(), &pa.bundle) || !same_bundle(sigma.target(), &pb.bundle) {
        return Err(Error::CompositionMismatch(
            "post-quantization data do not sit on the morphism's bundles".into(),
        ));
    }
    if !is_smooth(sigma, pa, pb)? {
        return Err(Error::NotSmooth("beta does not map P_A into the span of P_B".into()));
    }
    Ok(())
}

/// `{sigma_0 a, sigma_0 b} = sigma_0 {a, b}` on every table pair, with the
/// sampled discrepancy of the rescaled commutators and its bound.
pub fn check_poisson_functoriality(
    sigma: &BundleMorphism,
    pa: &PostQuantizationData,
    pb: &PostQuantizationData,
    tol: f64,
) -> Result<PoissonFunctorialityReport> {
    check_endpoints(sigma, pa, pb)?;
    let second_order = is_second_order_with(sigma.alpha(), &pa.cfg);
    if !second_order.pass {
        return Err(Error::NotSecondOrder);
    }
    let fiber = pb.limit_fiber()?;
    let tgt = sigma.target();
    let dist = distances(sigma.source());
    let pairs: Vec<(usize, usize)> = pa.table.keys().copied().filter(|(i, j)| i < j).collect();
    let entries: Vec<PoissonFunctorialityEntry> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<PoissonFunctorialityEntry> {
            let (a, b) = (&pa.p[i], &pa.p[j]);
            let (ba, bb) = (sigma.apply(a)?, sigma.apply(b)?);
            let lhs = pb.limit_class(&fiber, &sigma.apply(&pa.table[&(i, j)])?)?;
            let rhs = pb.limit_class(&fiber, &pb.bracket(&ba, &bb)?)?;
            let coset_equal = quotient_equal(&fiber, &lhs, &rhs, tol)?;
            let sa = tgt.quantized_section(&ba)?;
            let sb = tgt.quantized_section(&bb)?;
            let mut resid = Vec::new();
            let mut bound = Vec::new();
            let mut hs = Vec::new();
            for k in 0..sigma.source().len() {
                let Point::Sample(t) = sigma.alpha().images()[k] else {
                    continue;
                };
                let da = sigma.alpha().image_distance_to_limit(k);
                let c = FiberElement::from_matrix(
                    (sa.at(t)?.into_matrix() * sb.at(t)?.into_matrix())
                        - (sb.at(t)?.into_matrix() * sa.at(t)?.into_matrix()),
                )?;
                let diff = &c.scale(C64::new(0.0, 1.0 / dist[k])) - &c.scale(C64::new(0.0, 1.0 / da));
                resid.push(diff.operator_norm());
                bound.push(second_order.k_values[k] * c.operator_norm());
                hs.push(dist[k]);
            }
            let bound_holds = resid
                .iter()
                .zip(&bound)
                .all(|(r, b)| *r <= b * (1.0 + 1e-9) + 1e-14);
            Ok(PoissonFunctorialityEntry {
                a: a.to_string(),
                b: b.to_string(),
                coset_equal,
                discrepancy: ConvergenceReport::from_samples(
                    format!("poisson_functoriality[{a}|{b}]"),
                    &hs,
                    &bound,
                    &resid,
                    &pa.cfg,
                ),
                bound,
                bound_holds,
            })
        })
        .collect::<Result<_>>()?;
    let pass = entries
        .iter()
        .all(|e| e.coset_equal && e.bound_holds && e.discrepancy.pass);
    Ok(PoissonFunctorialityReport {
        second_order,
        entries,
        pass,
    })
}

/// `L_P(sigma)`: the limit morphism of a smooth, second-order morphism,
/// together with the families it respects.
#[derive(Clone, Debug)]
pub struct PoissonMorphism {
    pub limit: LimitMorphism,
    pub source_family: Vec<GeneratorExpression>,
    pub target_family: Vec<GeneratorExpression>,
}

impl PartialEq for PoissonMorphism {
    fn eq(&self, other: &Self) -> bool {
        self.limit == other.limit
            && self.source_family == other.source_family
            && self.target_family == other.target_family
    }
}

/// `L_P(sigma)` for a morphism between post-quantization bundles.
pub fn poisson_limit(
    sigma: &BundleMorphism,
    pa: &PostQuantizationData,
    pb: &PostQuantizationData,
) -> Result<PoissonMorphism> {
    check_endpoints(sigma, pa, pb)?;
    if !is_second_order_with(sigma.alpha(), &pa.cfg).pass {
        return Err(Error::NotSecondOrder);
    }
    let ext = super::morphism::extend_morphism(sigma)?;
    Ok(PoissonMorphism {
        limit: limit_morphism_with(&ext, &pa.cfg)?,
        source_family: pa.p.clone(),
        target_family: pb.p.clone(),
    })
}

impl PoissonMorphism {
    /// `L_P(outer) . L_P(self)`.
    pub fn then(&self, outer: &PoissonMorphism) -> Result<PoissonMorphism> {
        if self.target_family != outer.source_family {
            return Err(Error::CompositionMismatch("families do not match".into()));
        }
        Ok(PoissonMorphism {
            limit: self.limit.then(&outer.limit)?,
            source_family: self.source_family.clone(),
            target_family: outer.target_family.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::make_geometric_grid;
    use crate::expr::parse_expression;
    use crate::functors::morphism::{identity_morphism, make_morphism, LetterMap};
    use crate::quantization::{fuzzy_sphere_scheme, nc_torus_scheme};

    fn e(s: &str) -> GeneratorExpression {
        parse_expression(s).unwrap()
    }

    fn sphere(max_j: usize) -> Arc<Bundle> {
        let js: Vec<f64> = (1..=2 * max_j).map(|k| k as f64 * 0.5).collect();
        Bundle::from_scheme(Arc::new(fuzzy_sphere_scheme(&js).unwrap()))
    }

    #[test]
    fn sphere_table_is_exact() {
        let b = sphere(40);
        let d = PostQuantizationData::standard(&b).unwrap();
        assert_eq!(d.bracket(&e("x1"), &e("x2")).unwrap(), e("-x3").canonical());
        let r = check_post_quantization(&d, 6, 1).unwrap();
        assert!(r.density);
        for c in &r.brackets {
            assert!(c.exact, "{}", c.name);
        }
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn torus_residuals_follow_the_sine_formula() {
        let b = Bundle::from_scheme(Arc::new(nc_torus_scheme(&[4, 8, 16, 32]).unwrap()));
        let d = PostQuantizationData::new(&b, vec![e("u"), e("v")]).unwrap();
        let r = check_post_quantization(&d, 0, 1).unwrap();
        let rs = r.brackets[0].residuals();
        for (k, n) in [4.0f64, 8.0, 16.0, 32.0].iter().enumerate() {
            let exact = (2.0 * std::f64::consts::PI - 2.0 * n * (std::f64::consts::PI / n).sin()).abs();
            assert!((rs[k] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_bracket_laws_on_the_sphere() {
        let b = sphere(16);
        let d = PostQuantizationData::standard(&b).unwrap();
        let fiber = d.limit_fiber().unwrap();
        let c = poisson_bracket_at_limit(&d, &fiber, &e("x1"), &e("x2")).unwrap();
        let grid = b.scheme().symbol_grid();
        let pts = grid.points();
        let sym = c.symbol.clone().unwrap();
        for (s, p) in sym.iter().zip(pts) {
            assert!((s.re + p[0].cos()).abs() < 1e-12);
        }
        let aa = poisson_bracket_at_limit(&d, &fiber, &e("x2"), &e("x2")).unwrap();
        assert!(quotient_equal(&fiber, &aa, &fiber.zero().unwrap(), 1e-12).unwrap());
        assert!(matches!(
            poisson_bracket_at_limit(&d, &fiber, &e("x1*x2"), &e("x3")),
            Err(Error::MissingBracket(..))
        ));
        let r = check_bracket_laws(&d, 1e-3, 2).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn second_order_constants() {
        let base = make_geometric_grid(0.5, 0.5, 24).unwrap();
        let id = BaseMap::identity(&base);
        let r = is_second_order(&id);
        assert!(r.pass);
        assert_eq!(r.k(), Some(0.0));
        for a2 in [0.5, 1.0] {
            let alpha = BaseMap::image_grid(&base, |h| h + a2 * h * h).unwrap();
            let r = is_second_order(&alpha);
            assert!(r.pass);
            assert!((r.k().unwrap() - a2).abs() < 1e-2, "{:?}", r.estimate);
        }
        let sq = BaseMap::image_grid(&base, |h| h * h).unwrap();
        assert!(!is_second_order(&sq).pass);
    }

    #[test]
    fn poisson_functoriality_examples() {
        let b = sphere(20);
        let d = PostQuantizationData::standard(&b).unwrap();
        let id = identity_morphism(&b);
        let r = check_poisson_functoriality(&id, &d, &d, 1e-3).unwrap();
        assert!(r.pass);
        assert!(r.entries.iter().all(|e| e.discrepancy.exact));
        let rot = make_morphism(BaseMap::identity(b.base()), LetterMap::cyclic_rotation(), &b, &b).unwrap();
        assert!(check_poisson_functoriality(&rot, &d, &d, 1e-3).unwrap().pass);

        let alpha = BaseMap::image_grid(b.base(), |h| h - 0.5 * h * h).unwrap();
        let target = b.with_base(alpha.target().clone()).unwrap();
        let sigma = make_morphism(alpha, LetterMap::Identity, &b, &target).unwrap();
        let dt = PostQuantizationData::standard(&target).unwrap();
        let r = check_poisson_functoriality(&sigma, &d, &dt, 1e-3).unwrap();
        assert!((r.second_order.k().unwrap() - 0.5).abs() < 1e-2);
        for e in &r.entries {
            assert!(e.coset_equal && e.bound_holds);
            if !e.discrepancy.exact {
                assert!(e.discrepancy.slope.unwrap() >= 0.9, "{:?}", e.discrepancy.slope);
            }
        }
        assert!(r.pass);

        // hbar <= 1/2 keeps hbar -> hbar^2 a contraction
        let js: Vec<f64> = (4..=40).map(|k| k as f64 * 0.5).collect();
        let small = Bundle::from_scheme(Arc::new(fuzzy_sphere_scheme(&js).unwrap()));
        let ds = PostQuantizationData::standard(&small).unwrap();
        let sq = BaseMap::image_grid(small.base(), |h| h * h).unwrap();
        let tsq = small.with_base(sq.target().clone()).unwrap();
        let s2 = make_morphism(sq, LetterMap::Identity, &small, &tsq).unwrap();
        let dsq = PostQuantizationData::standard(&tsq).unwrap();
        assert!(matches!(
            check_poisson_functoriality(&s2, &ds, &dsq, 1e-3),
            Err(Error::NotSecondOrder)
        ));
    }
}
