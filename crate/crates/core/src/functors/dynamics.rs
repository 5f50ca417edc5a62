//! Dynamical bundles: a self-adjoint Hamiltonian whose unitary flow acts on
//! every fiber, the lift of that flow to sections, and the limiting
//! dynamics compared with the classical Hamiltonian flow.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{conjugate, unitary_flow, FiberElement, C64};
use crate::base_space::Point;
use crate::bundle::{Bundle, Section};
use crate::convergence::{estimate_nonnegative_limit, ConvergenceReport, LimitEstimate, TailConfig};
use crate::error::{Error, Result};
use crate::expr::{random_expression, Generator, GeneratorExpression, Term, Word};
use crate::functors::morphism::{
    extend_morphism, extended, fiber_map_at, limit_morphism, same_bundle, BundleMorphism, LimitMorphism,
};
use crate::limit::{limit_fiber, LimitFiber};
use crate::quantization::{PhaseSpace, SchemeKind};

const SELF_ADJOINT_TOL: f64 = 1e-10;
const LAW_TOL: f64 = 1e-8;

/// A bundle with a Hamiltonian (a classical expression, quantized fiberwise)
/// and the sampled times at which the dynamics is examined.
#[derive(Clone, Debug)]
pub struct DynamicalBundleData {
    bundle: Arc<Bundle>,
    hamiltonian: GeneratorExpression,
    section: Section,
    times: Vec<f64>,
}

impl PartialEq for DynamicalBundleData {
    fn eq(&self, other: &Self) -> bool {
        same_bundle(&self.bundle, &other.bundle)
            && self.hamiltonian == other.hamiltonian
            && self.times == other.times
    }
}

impl DynamicalBundleData {
    pub fn new(bundle: &Arc<Bundle>, hamiltonian: GeneratorExpression, times: Vec<f64>) -> Result<Self> {
        let hamiltonian = hamiltonian.canonical();
        let section = bundle.quantized_section(&hamiltonian)?;
        for k in 0..bundle.len() {
            let deviation = section.at(k)?.self_adjoint_deviation();
            if deviation > SELF_ADJOINT_TOL {
                return Err(Error::NotSelfAdjoint { deviation });
            }
        }
        Ok(Self {
            bundle: bundle.clone(),
            hamiltonian,
            section,
            times,
        })
    }

    pub fn bundle(&self) -> &Arc<Bundle> {
        &self.bundle
    }

    pub fn hamiltonian(&self) -> &GeneratorExpression {
        &self.hamiltonian
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `exp(i t H / |hbar|)` at sample `k`.
    pub fn propagator(&self, k: usize, t: f64) -> Result<FiberElement> {
        let hbar = self.bundle.base().limit_distance(k);
        unitary_flow(&self.section.at(k)?, t, hbar)
    }

    /// `τ_{t;hbar}(x) = U x U*`.
    pub fn evolve(&self, k: usize, t: f64, x: &FiberElement) -> Result<FiberElement> {
        conjugate(&self.propagator(k, t)?, x)
    }

    /// `τ_t(a)` fiberwise.
    pub fn evolve_section(&self, a: &Section, t: f64) -> Result<Vec<FiberElement>> {
        (0..self.bundle.len())
            .into_par_iter()
            .map(|k| self.evolve(k, t, &a.at(k)?))
            .collect()
    }
}

/// `F_D`: the extended bundle with the same Hamiltonian and times.
pub fn extend_dynamics(d: &DynamicalBundleData) -> Result<DynamicalBundleData> {
    DynamicalBundleData::new(&extended(&d.bundle)?, d.hamiltonian.clone(), d.times.clone())
}

/// Automorphism laws of `τ_{t;hbar}`; the intertwining `τ_{t;hbar} φ_hbar =
/// φ_hbar τ_t` holds by construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DynamicsLiftReport {
    pub identity: f64,
    pub group_law: f64,
    pub multiplicativity: f64,
    pub star: f64,
    pub unitarity: f64,
    pub pass: bool,
}

pub fn check_dynamics_lift(d: &DynamicalBundleData, trials: usize, seed: u64) -> Result<DynamicsLiftReport> {
    let letters = d.bundle.scheme().generator_labels();
    let per: Vec<[f64; 5]> = (0..d.bundle.len())
        .into_par_iter()
        .map(|k| -> Result<[f64; 5]> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9));
            let n = d.bundle.fiber_dim(k);
            let u0 = d.propagator(k, 0.0)?;
            let mut out = [(&u0 - &FiberElement::identity(n)).operator_norm(), 0.0, 0.0, 0.0, 0.0];
            for _ in 0..trials.max(1) {
                let pick = |rng: &mut ChaCha8Rng| {
                    if !d.times.is_empty() && rng.gen_bool(0.5) {
                        d.times[rng.gen_range(0..d.times.len())]
                    } else {
                        rng.gen_range(-2.0..2.0)
                    }
                };
                let (s, t) = (pick(&mut rng), pick(&mut rng));
                let a = Section::new(&d.bundle, random_expression(&mut rng, &letters, 2, 3))?.at(k)?;
                let b = Section::new(&d.bundle, random_expression(&mut rng, &letters, 2, 3))?.at(k)?;
                let scale = a.operator_norm().max(1.0);
                let st = d.evolve(k, s + t, &a)?;
                let s_t = d.evolve(k, s, &d.evolve(k, t, &a)?)?;
                out[1] = out[1].max((&st - &s_t).operator_norm() / scale);
                let ab = d.evolve(k, t, &(&a * &b))?;
                let ta = d.evolve(k, t, &a)?;
                let tb = d.evolve(k, t, &b)?;
                let sc = (a.operator_norm() * b.operator_norm()).max(1.0);
                out[2] = out[2].max((&ab - &(&ta * &tb)).operator_norm() / sc);
                out[3] = out[3].max((&d.evolve(k, t, &a.adjoint())? - &ta.adjoint()).operator_norm() / scale);
                out[4] = out[4].max(d.propagator(k, t)?.unitarity_defect());
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let max = |i: usize| per.iter().map(|r| r[i]).fold(0.0, f64::max);
    let r = DynamicsLiftReport {
        identity: max(0),
        group_law: max(1),
        multiplicativity: max(2),
        star: max(3),
        unitarity: max(4),
        pass: false,
    };
    let pass = r.identity <= LAW_TOL
        && r.group_law <= LAW_TOL
        && r.multiplicativity <= LAW_TOL
        && r.star <= LAW_TOL
        && r.unitarity <= LAW_TOL;
    Ok(DynamicsLiftReport { pass, ..r })
}

/// Integration and fitting parameters for the classical side.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalFlowConfig {
    pub steps_per_unit_time: usize,
    /// degree of the polynomial fitted to the flowed symbol; defaults to
    /// the generator's degree
    pub fit_degree: Option<usize>,
}

impl Default for ClassicalFlowConfig {
    fn default() -> Self {
        Self {
            steps_per_unit_time: 400,
            fit_degree: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitDynamicsEntry {
    pub generator: String,
    pub t: f64,
    /// max deviation of the fitted polynomial from the flowed symbol on the grid
    pub fit_error: f64,
    /// `||τ_{t;hbar}(φ_hbar(a)) - Q_hbar(f_t)||` along the grid
    pub residual: ConvergenceReport,
    pub limit: Option<LimitEstimate>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitDynamicsReport {
    pub entries: Vec<LimitDynamicsEntry>,
    pub pass: bool,
}

/// Exponent vector of a commutative monomial in the sphere coordinates.
fn exponents(word: &Word) -> Option<[usize; 3]> {
    let mut e = [0usize; 3];
    for g in word {
        match g {
            Generator::Coord(a) if *a < 3 => e[*a as usize] += 1,
            _ => return None,
        }
    }
    Some(e)
}

/// Real cartesian polynomial `sum c_e x^e`.
struct Poly(Vec<([usize; 3], f64)>);

impl Poly {
    fn from_expr(e: &GeneratorExpression) -> Result<Self> {
        let mut out = Vec::new();
        for (w, c) in e.canonical().commutative_monomials() {
            let ex = exponents(&w).ok_or_else(|| Error::Unsupported("non-coordinate letter".into()))?;
            out.push((ex, c.re));
        }
        Ok(Poly(out))
    }

    fn eval(&self, x: &[f64; 3]) -> f64 {
        self.0
            .iter()
            .map(|(e, c)| c * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32))
            .sum()
    }

    fn grad(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (e, c) in &self.0 {
            for a in 0..3 {
                if e[a] == 0 {
                    continue;
                }
                let mut term = c * e[a] as f64;
                for b in 0..3 {
                    let p = if a == b { e[b] - 1 } else { e[b] };
                    term *= x[b].powi(p as i32);
                }
                g[a] += term;
            }
        }
        g
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// The Hamiltonian vector field `x' = ∇h × x`, for which `d/dt f(x(t)) =
/// {h, f}` with `{x_a, x_b} = -ε_abc x_c`.
fn rk4(h: &Poly, x0: [f64; 3], t: f64, steps: usize) -> [f64; 3] {
    let f = |x: [f64; 3]| cross(h.grad(&x), x);
    let dt = t / steps as f64;
    let mut x = x0;
    let add = |x: [f64; 3], k: [f64; 3], s: f64| [x[0] + s * k[0], x[1] + s * k[1], x[2] + s * k[2]];
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(add(x, k1, dt / 2.0));
        let k3 = f(add(x, k2, dt / 2.0));
        let k4 = f(add(x, k3, dt));
        for a in 0..3 {
            x[a] += dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
    }
    x
}

fn monomials_up_to(d: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for total in 0..=d {
        for a in (0..=total).rev() {
            for b in (0..=total - a).rev() {
                out.push([a, b, total - a - b]);
            }
        }
    }
    out
}

fn monomial_expr(e: [usize; 3], c: f64) -> GeneratorExpression {
    let mut word = Vec::new();
    for a in 0..3 {
        word.extend(std::iter::repeat_n(Generator::Coord(a as u8), e[a]));
    }
    GeneratorExpression::from_terms(vec![Term {
        coeff: C64::new(c, 0.0),
        weight: None,
        word,
    }])
}

/// Pulls the symbol of `a` back along the classical flow for time `t` on
/// the quadrature grid and fits a polynomial; returns it with the fit error.
pub fn classical_flow_symbol(
    d: &DynamicalBundleData,
    a: &GeneratorExpression,
    t: f64,
    cfg: &ClassicalFlowConfig,
) -> Result<(GeneratorExpression, f64)> {
    let scheme = d.bundle.scheme();
    if scheme.kind() != SchemeKind::FuzzySphere || scheme.symbol_grid().space() != PhaseSpace::Sphere {
        return Err(Error::Unsupported("classical flow is implemented on the sphere".into()));
    }
    let h = Poly::from_expr(&d.hamiltonian)?;
    let f = Poly::from_expr(a)?;
    let pts: Vec<[f64; 3]> = scheme
        .symbol_grid()
        .points()
        .iter()
        .map(|p| {
            let (st, ct) = p[0].sin_cos();
            let (sp, cp) = p[1].sin_cos();
            [st * cp, st * sp, ct]
        })
        .collect();
    let steps = ((t.abs() * cfg.steps_per_unit_time as f64).ceil() as usize).max(1);
    let values: Vec<f64> = pts.par_iter().map(|&x| f.eval(&rk4(&h, x, t, steps))).collect();
    let mons = monomials_up_to(cfg.fit_degree.unwrap_or(a.degree()));
    let m = DMatrix::from_fn(pts.len(), mons.len(), |r, c| Poly(vec![(mons[c], 1.0)]).eval(&pts[r]));
    let v = DVector::from_vec(values.clone());
    let coef = m
        .clone()
        .svd(true, true)
        .solve(&v, 1e-12)
        .map_err(|e| Error::Unsupported(e.to_string()))?;
    let fit = &m * &coef;
    let fit_error = fit.iter().zip(&values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut expr = GeneratorExpression::zero();
    for (e, c) in mons.iter().zip(coef.iter()) {
        if c.abs() > 1e-15 {
            expr = expr + monomial_expr(*e, *c);
        }
    }
    Ok((expr.canonical(), fit_error))
}

/// For each generator `a` (a section expression) and time `t`, compares the
/// evolved section with the quantization of the classically flowed symbol:
/// the residual tends to 0, so `τ_{t;0}` is the classical flow on the limit
/// fiber.
pub fn limit_dynamics(
    d: &DynamicalBundleData,
    generators: &[GeneratorExpression],
    cfg: &ClassicalFlowConfig,
    tail: &TailConfig,
) -> Result<LimitDynamicsReport> {
    let b = &d.bundle;
    let dist = b.base().limit_distances();
    let cases: Vec<(usize, f64)> = (0..generators.len())
        .flat_map(|i| d.times.iter().map(move |&t| (i, t)))
        .collect();
    let entries: Vec<LimitDynamicsEntry> = cases
        .iter()
        .map(|&(i, t)| -> Result<LimitDynamicsEntry> {
            let a = &generators[i];
            let (ft, fit_error) = classical_flow_symbol(d, a, t, cfg)?;
            let sa = Section::new(b, a.clone())?;
            let q = b.quantized_section(&ft)?;
            let rows: Vec<(f64, f64)> = (0..b.len())
                .into_par_iter()
                .map(|k| -> Result<(f64, f64)> {
                    let ev = d.evolve(k, t, &sa.at(k)?)?;
                    Ok((ev.operator_norm(), (&ev - &q.at(k)?).operator_norm()))
                })
                .collect::<Result<_>>()?;
            let value: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let resid: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let residual = ConvergenceReport::from_samples(format!("limit_dynamics[{a}|t={t}]"), &dist, &value, &resid, tail);
            let limit = estimate_nonnegative_limit(&dist, &resid, tail).ok();
            let vanishes = residual.exact
                || limit
                    .as_ref()
                    .is_some_and(|l| l.value <= tail.null_tol + l.error_bound);
            let pass = residual.pass && vanishes;
            Ok(LimitDynamicsEntry {
                generator: a.to_string(),
                t,
                fit_error,
                residual,
                limit,
                pass,
            })
        })
        .collect::<Result<_>>()?;
    let pass = entries.iter().all(|e| e.pass);
    Ok(LimitDynamicsReport { entries, pass })
}

/// A bundle morphism intertwining the two dynamics: `τ^B_t . beta = beta . τ^A_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicalMorphism {
    pub sigma: BundleMorphism,
    pub source: DynamicalBundleData,
    pub target: DynamicalBundleData,
}

/// Checks the intertwining at every sample and time on random sections.
/// `σ_hbar` is a unital `*`-homomorphism, so `σ_hbar(τ^A(x)) = V σ(x) V*`
/// with `V = exp(i t σ(H_A) / |hbar|_I)`.
pub fn make_dynamical_morphism(
    sigma: &BundleMorphism,
    source: &DynamicalBundleData,
    target: &DynamicalBundleData,
    trials: usize,
    seed: u64,
) -> Result<DynamicalMorphism> {
    if !same_bundle(sigma.source(), &source.bundle) || !same_bundle(sigma.target(), &target.bundle) {
        return Err(Error::CompositionMismatch("dynamics do not sit on the morphism's bundles".into()));
    }
    let h_expr = source.section.folded_expr();
    let letters = source.bundle.scheme().generator_labels();
    let times = if source.times.is_empty() { vec![1.0] } else { source.times.clone() };
    (0..source.bundle.len())
        .into_par_iter()
        .map(|k| -> Result<()> {
            let Point::Sample(j) = sigma.alpha().images()[k] else {
                return Ok(());
            };
            let fm = fiber_map_at(sigma, k)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k as u64);
            let hi = fm.apply_expr(&h_expr)?;
            let hbar_i = source.bundle.base().limit_distance(k);
            for &t in &times {
                let v = unitary_flow(&hi, t, hbar_i)?;
                let ub = target.propagator(j, t)?;
                for _ in 0..trials.max(1) {
                    let a = random_expression(&mut rng, &letters, 2, 3);
                    let x = fm.apply_expr(&a)?;
                    let lhs = conjugate(&ub, &x)?;
                    let rhs = conjugate(&v, &x)?;
                    let dev = (&lhs - &rhs).operator_norm();
                    if dev > LAW_TOL * x.operator_norm().max(1.0) {
                        return Err(Error::CompatibilityViolation {
                            hbar: source.bundle.base().points()[k],
                            deviation: dev,
                        });
                    }
                }
            }
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(DynamicalMorphism {
        sigma: sigma.clone(),
        source: source.clone(),
        target: target.clone(),
    })
}

/// `F_D(sigma)`.
pub fn extend_dynamical_morphism(m: &DynamicalMorphism) -> Result<DynamicalMorphism> {
    Ok(DynamicalMorphism {
        sigma: extend_morphism(&m.sigma)?,
        source: extend_dynamics(&m.source)?,
        target: extend_dynamics(&m.target)?,
    })
}

pub fn compose_dynamical(m2: &DynamicalMorphism, m1: &DynamicalMorphism) -> Result<DynamicalMorphism> {
    if m1.target != m2.source {
        return Err(Error::CompositionMismatch("dynamics do not match".into()));
    }
    Ok(DynamicalMorphism {
        sigma: super::morphism::compose(&m2.sigma, &m1.sigma)?,
        source: m1.source.clone(),
        target: m2.target.clone(),
    })
}

pub fn identity_dynamical(d: &DynamicalBundleData) -> DynamicalMorphism {
    DynamicalMorphism {
        sigma: super::morphism::identity_morphism(&d.bundle),
        source: d.clone(),
        target: d.clone(),
    }
}

/// `G_D` on objects: the limit fiber with the Hamiltonian whose dynamics
/// restricts to it.
#[derive(Clone, Debug)]
pub struct LimitDynamics {
    pub fiber: LimitFiber,
    pub data: DynamicalBundleData,
}

impl PartialEq for LimitDynamics {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data && same_bundle(self.fiber.bundle(), other.fiber.bundle())
    }
}

pub fn restrict_dynamics(d: &DynamicalBundleData) -> Result<LimitDynamics> {
    Ok(LimitDynamics {
        fiber: limit_fiber(&d.bundle, &TailConfig::default())?,
        data: d.clone(),
    })
}

/// `G_D` on morphisms.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitDynamicalMorphism {
    pub limit: LimitMorphism,
    pub source: LimitDynamics,
    pub target: LimitDynamics,
}

pub fn restrict_dynamical_morphism(m: &DynamicalMorphism) -> Result<LimitDynamicalMorphism> {
    Ok(LimitDynamicalMorphism {
        limit: limit_morphism(&m.sigma)?,
        source: restrict_dynamics(&m.source)?,
        target: restrict_dynamics(&m.target)?,
    })
}

impl LimitDynamicalMorphism {
    pub fn then(&self, outer: &LimitDynamicalMorphism) -> Result<LimitDynamicalMorphism> {
        if self.target != outer.source {
            return Err(Error::CompositionMismatch("limit dynamics do not match".into()));
        }
        Ok(LimitDynamicalMorphism {
            limit: self.limit.then(&outer.limit)?,
            source: self.source.clone(),
            target: outer.target.clone(),
        })
    }
}

/// `L_D = G_D . F_D`.
pub fn limit_dynamical_morphism(m: &DynamicalMorphism) -> Result<LimitDynamicalMorphism> {
    restrict_dynamical_morphism(&extend_dynamical_morphism(m)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::BaseMap;
    use crate::expr::parse_expression;
    use crate::functors::morphism::{make_morphism, LetterMap};
    use crate::quantization::{fuzzy_sphere_scheme, nc_torus_scheme};

    fn e(s: &str) -> GeneratorExpression {
        parse_expression(s).unwrap()
    }

    fn sphere(max_j: usize) -> Arc<Bundle> {
        let js: Vec<f64> = (1..=2 * max_j).map(|k| k as f64 * 0.5).collect();
        Bundle::from_scheme(Arc::new(fuzzy_sphere_scheme(&js).unwrap()))
    }

    #[test]
    fn rotation_about_x3() {
        let b = sphere(6);
        let d = DynamicalBundleData::new(&b, e("x3"), vec![0.0, 0.3, 1.0]).unwrap();
        let r = check_dynamics_lift(&d, 4, 1).unwrap();
        assert!(r.pass, "{r:?}");
        let x1 = b.section(e("x1")).unwrap();
        let x2 = b.section(e("x2")).unwrap();
        for t in [0.0, 0.3, 1.0] {
            let ev = d.evolve_section(&x1, t).unwrap();
            for (k, v) in ev.iter().enumerate() {
                let expect = &x1.at(k).unwrap().scale_real(t.cos()) - &x2.at(k).unwrap().scale_real(t.sin());
                assert!((v - &expect).operator_norm() < 1e-12);
            }
        }
        assert!(DynamicalBundleData::new(&b, e("i*x3"), vec![]).is_err());
    }

    #[test]
    fn classical_flow_rotates_linear_symbols() {
        let b = sphere(2);
        let d = DynamicalBundleData::new(&b, e("x3"), vec![]).unwrap();
        let (f, err) = classical_flow_symbol(&d, &e("x1"), 0.7, &ClassicalFlowConfig::default()).unwrap();
        assert!(err < 1e-10);
        let expect = e(&format!("{}*x1 - {}*x2", 0.7f64.cos(), 0.7f64.sin()));
        assert!(f.approx_eq(&expect, 1e-10), "{f}");
    }

    #[test]
    fn limit_dynamics_linear_exact_and_quadratic_decay() {
        let b = sphere(40);
        let d = DynamicalBundleData::new(&b, e("x3"), vec![0.0, 0.1, 0.5, 1.0]).unwrap();
        let tail = TailConfig::default();
        let r = limit_dynamics(&d, &[e("x1")], &ClassicalFlowConfig::default(), &tail).unwrap();
        for en in &r.entries {
            assert!(en.residual.max_residual() <= 1e-8, "{}", en.residual.max_residual());
        }
        let r = limit_dynamics(&d, &[e("x1*x2")], &ClassicalFlowConfig::default(), &tail).unwrap();
        for en in &r.entries {
            assert!(en.pass, "{:?}", en.residual.slope);
            assert!(en.residual.slope.unwrap() >= 0.9);
        }
    }

    #[test]
    fn torus_has_no_classical_flow_here() {
        let b = Bundle::from_scheme(Arc::new(nc_torus_scheme(&[4, 8]).unwrap()));
        let d = DynamicalBundleData::new(&b, e("u + u'"), vec![0.5]).unwrap();
        assert!(check_dynamics_lift(&d, 2, 0).unwrap().pass);
        assert!(matches!(
            limit_dynamics(&d, &[e("v")], &ClassicalFlowConfig::default(), &TailConfig::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn rotation_morphism_intertwines_rotated_hamiltonians() {
        let b = sphere(3);
        let rot = make_morphism(BaseMap::identity(b.base()), LetterMap::cyclic_rotation(), &b, &b).unwrap();
        let da = DynamicalBundleData::new(&b, e("x3"), vec![0.4]).unwrap();
        let db = DynamicalBundleData::new(&b, e("x1"), vec![0.4]).unwrap();
        let m = make_dynamical_morphism(&rot, &da, &db, 3, 0).unwrap();
        assert!(make_dynamical_morphism(&rot, &da, &da, 3, 0).is_err());
        let l = limit_dynamical_morphism(&m).unwrap();
        let id = limit_dynamical_morphism(&identity_dynamical(&da)).unwrap();
        assert_eq!(id.then(&l).unwrap(), l);
    }
}
