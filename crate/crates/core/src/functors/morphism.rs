//! Bundle morphisms `(alpha, beta)`: a metric base map with a letter
//! substitution, audited for compatibility, their fiberwise maps, and their
//! extension to the limit point.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{null_space, numerical_rank, FiberElement, C64};
use crate::base_space::{self, is_metric_map, is_proper, BaseMap, Point};
use crate::bundle::{Bundle, Section, SpanBasis};
use crate::convergence::TailConfig;
use crate::error::{Error, Result};
use crate::expr::{random_expression, words_up_to, Generator, GeneratorExpression, Word};
use crate::limit::{classical_symbol, extend_to_limit, limit_fiber, limiting_norm, quotient_equal, LimitFiber, LimitFiberElement};
use crate::quantization::SchemeKind;

const RELATION_RANK_TOL: f64 = 1e-9;
const LAW_TOL: f64 = 1e-10;
const ISOMETRY_TOL: f64 = 1e-9;
const APPLY_DIM_MAX: usize = 16;

/// The substitution defining `beta` on generator letters; `beta` is its
/// `*`-homomorphic extension to all expressions.
#[derive(Clone, Debug, PartialEq)]
pub enum LetterMap {
    Identity,
    /// images of `x1, x2, x3`
    Coords(Vec<GeneratorExpression>),
    /// `e_m -> e_{A m}`
    Modes([[i32; 2]; 2]),
}

impl LetterMap {
    /// `(x1, x2, x3) -> (x2, x3, x1)`.
    pub fn cyclic_rotation() -> Self {
        Self::coords([1, 2, 0].map(|a| GeneratorExpression::generator(Generator::Coord(a))))
    }

    pub fn coords(images: [GeneratorExpression; 3]) -> Self {
        Self::Coords(images.into_iter().collect()).normalized()
    }

    pub fn modes(a: [[i32; 2]; 2]) -> Self {
        Self::Modes(a).normalized()
    }

    fn normalized(self) -> Self {
        match self {
            LetterMap::Coords(imgs) => {
                let imgs: Vec<_> = imgs.iter().map(|e| e.canonical()).collect();
                let id = (0..3).all(|a| imgs[a] == GeneratorExpression::generator(Generator::Coord(a as u8)));
                if id {
                    LetterMap::Identity
                } else {
                    LetterMap::Coords(imgs)
                }
            }
            LetterMap::Modes([[1, 0], [0, 1]]) => LetterMap::Identity,
            other => other,
        }
    }

    pub fn image(&self, g: Generator) -> Result<GeneratorExpression> {
        match (self, g) {
            (LetterMap::Identity, _) => Ok(GeneratorExpression::generator(g)),
            (LetterMap::Coords(imgs), Generator::Coord(a)) if (a as usize) < imgs.len() => {
                Ok(imgs[a as usize].clone())
            }
            (LetterMap::Modes(m), Generator::Mode(p, q)) => Ok(GeneratorExpression::generator(
                Generator::Mode(m[0][0] * p + m[0][1] * q, m[1][0] * p + m[1][1] * q),
            )),
            _ => Err(Error::UnknownLabel(g.label())),
        }
    }

    /// `beta(expr)`, with coefficient functions carried along unchanged.
    pub fn apply(&self, expr: &GeneratorExpression) -> Result<GeneratorExpression> {
        if *self == LetterMap::Identity {
            return Ok(expr.clone());
        }
        for g in expr.letters() {
            self.image(g)?;
        }
        Ok(expr.substitute(&|g| self.image(g).expect("checked")).canonical())
    }

    /// `outer . inner`.
    pub fn then(inner: &LetterMap, outer: &LetterMap) -> Result<LetterMap> {
        Ok(match (inner, outer) {
            (LetterMap::Identity, o) => o.clone(),
            (i, LetterMap::Identity) => i.clone(),
            (LetterMap::Modes(a), LetterMap::Modes(b)) => {
                let mut c = [[0; 2]; 2];
                for r in 0..2 {
                    for s in 0..2 {
                        c[r][s] = b[r][0] * a[0][s] + b[r][1] * a[1][s];
                    }
                }
                LetterMap::modes(c)
            }
            (LetterMap::Coords(imgs), o) => LetterMap::Coords(
                imgs.iter().map(|e| o.apply(e)).collect::<Result<_>>()?,
            )
            .normalized(),
            (LetterMap::Modes(_), LetterMap::Coords(_)) => {
                return Err(Error::CompositionMismatch("mode map followed by a coordinate map".into()))
            }
        })
    }

    fn check_kinds(&self, source: SchemeKind, target: SchemeKind) -> Result<()> {
        match (self, source, target) {
            (LetterMap::Identity, s, t) if s != t => Err(Error::CompositionMismatch(
                "identity letter map between different schemes".into(),
            )),
            (LetterMap::Coords(_), SchemeKind::NcTorus, _) => {
                Err(Error::CompositionMismatch("coordinate map on a torus source".into()))
            }
            (LetterMap::Modes(_), s, t) if s != SchemeKind::NcTorus || t != SchemeKind::NcTorus => {
                Err(Error::CompositionMismatch("mode map needs torus source and target".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Battery size and tolerance for the compatibility audit.
#[derive(Clone, Debug, PartialEq)]
pub struct CompatibilityConfig {
    pub max_word_length: usize,
    pub pairs: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for CompatibilityConfig {
    fn default() -> Self {
        Self {
            max_word_length: 2,
            pairs: 64,
            tol: 1e-10,
            seed: 0,
        }
    }
}

/// Outcome of the compatibility battery. `witness` is `(hbar, deviation)` at
/// the worst violating sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub samples: usize,
    pub relations: usize,
    pub pairs: usize,
    pub max_deviation: f64,
    pub witness: Option<(f64, f64)>,
    pub pass: bool,
}

/// `sigma = (alpha, beta)` between two bundles.
#[derive(Clone, Debug)]
pub struct BundleMorphism {
    alpha: BaseMap,
    beta: LetterMap,
    source: Arc<Bundle>,
    target: Arc<Bundle>,
    audit: CompatibilityReport,
}

/// Same fibers, base and generators.
pub(crate) fn same_bundle(a: &Bundle, b: &Bundle) -> bool {
    a.same_fibers(b) && a.generators() == b.generators()
}

impl PartialEq for BundleMorphism {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha
            && self.beta == other.beta
            && same_bundle(&self.source, &other.source)
            && same_bundle(&self.target, &other.target)
    }
}

impl BundleMorphism {
    pub fn alpha(&self) -> &BaseMap {
        &self.alpha
    }

    pub fn beta(&self) -> &LetterMap {
        &self.beta
    }

    pub fn source(&self) -> &Arc<Bundle> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Bundle> {
        &self.target
    }

    pub fn audit(&self) -> &CompatibilityReport {
        &self.audit
    }

    /// `beta(a)` as an expression of the target bundle. Coefficient
    /// functions are transported along `alpha`, which must then be a
    /// bijection of samples.
    pub fn apply(&self, expr: &GeneratorExpression) -> Result<GeneratorExpression> {
        let out = self.beta.apply(expr)?;
        if !out.has_weights() {
            return Ok(out);
        }
        let n = self.target.len();
        let mut inverse = vec![usize::MAX; n];
        for (s, p) in self.alpha.images().iter().enumerate() {
            match p {
                Point::Sample(t) if inverse[*t] == usize::MAX => inverse[*t] = s,
                _ => {
                    return Err(Error::Unsupported(
                        "coefficient functions need a sample bijection".into(),
                    ))
                }
            }
        }
        if self.source.len() != n || inverse.contains(&usize::MAX) {
            return Err(Error::Unsupported("coefficient functions need a sample bijection".into()));
        }
        Ok(out.pullback(&inverse))
    }

    /// `beta(a)` as a section of the target.
    pub fn apply_section(&self, a: &Section) -> Result<Section> {
        Section::new(&self.target, self.apply(&a.folded_expr())?)
    }
}

pub fn make_morphism(
    alpha: BaseMap,
    label_map: LetterMap,
    source: &Arc<Bundle>,
    target: &Arc<Bundle>,
) -> Result<BundleMorphism> {
    make_morphism_with(alpha, label_map, source, target, &CompatibilityConfig::default())
}

/// Builds `beta` from the label map and runs the compatibility battery;
/// fails with the violating witness.
pub fn make_morphism_with(
    alpha: BaseMap,
    label_map: LetterMap,
    source: &Arc<Bundle>,
    target: &Arc<Bundle>,
    cfg: &CompatibilityConfig,
) -> Result<BundleMorphism> {
    if alpha.source() != source.base() || alpha.target() != target.base() {
        return Err(Error::CompositionMismatch("base map does not join the two bases".into()));
    }
    let metric = is_metric_map(&alpha);
    if let Some((x, y)) = metric.witness {
        return Err(Error::NotMetricMap { x, y });
    }
    let beta = label_map.normalized();
    beta.check_kinds(source.scheme().kind(), target.scheme().kind())?;
    for g in source_letters(source) {
        target.scheme().check_labels(&beta.image(g)?)?;
    }
    if let LetterMap::Coords(imgs) = &beta {
        for (a, e) in imgs.iter().enumerate() {
            if !e.approx_eq(&e.adjoint(), 1e-14) {
                return Err(Error::Unsupported(format!("image of x{} is not self-adjoint", a + 1)));
            }
        }
    }
    let mut sigma = BundleMorphism {
        alpha,
        beta,
        source: source.clone(),
        target: target.clone(),
        audit: CompatibilityReport {
            samples: 0,
            relations: 0,
            pairs: 0,
            max_deviation: 0.0,
            witness: None,
            pass: true,
        },
    };
    let audit = compatibility_battery(&sigma, cfg)?;
    if let (false, Some((hbar, deviation))) = (audit.pass, audit.witness) {
        return Err(Error::CompatibilityViolation { hbar, deviation });
    }
    sigma.audit = audit;
    Ok(sigma)
}

/// Source generator letters closed under adjoints.
fn source_letters(b: &Bundle) -> Vec<Generator> {
    let mut out = b.scheme().generator_labels();
    for g in out.clone() {
        if !out.contains(&g.adjoint()) {
            out.push(g.adjoint());
        }
    }
    out
}

fn vec_of(m: &FiberElement) -> DVector<C64> {
    m.to_vector()
}

fn frobenius(v: &DVector<C64>) -> f64 {
    v.norm()
}

/// Linear relations among source words at each sample must survive `beta`
/// at `alpha(hbar)`; random pairs `a`, `a + relation` are compared as well.
pub fn compatibility_battery(sigma: &BundleMorphism, cfg: &CompatibilityConfig) -> Result<CompatibilityReport> {
    let letters = source_letters(&sigma.source);
    let words = words_up_to(&letters, cfg.max_word_length);
    let images: Vec<GeneratorExpression> = words
        .iter()
        .map(|w| sigma.beta.apply(&GeneratorExpression::word(w.clone())))
        .collect::<Result<_>>()?;
    let tail = TailConfig::default();
    let per_sample: Vec<(f64, f64, usize, usize)> = (0..sigma.source.len())
        .into_par_iter()
        .map(|k| -> Result<(f64, f64, usize, usize)> {
            let hbar = sigma.source.base().points()[k];
            let s_cols: Vec<DVector<C64>> = words
                .iter()
                .map(|w| Ok(vec_of(&FiberElement::from_matrix(sigma.source.word_matrix(k, w)?)?)))
                .collect::<Result<_>>()?;
            let s = DMatrix::from_columns(&s_cols);
            let rel = null_space(&s, RELATION_RANK_TOL);
            if rel.is_empty() {
                return Ok((hbar, 0.0, 0, 0));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (k as u64).wrapping_mul(0x9E37_79B9));
            let mut worst = 0.0f64;
            match sigma.alpha.images()[k] {
                Point::Sample(t) => {
                    let t_cols: Vec<DVector<C64>> = images
                        .iter()
                        .map(|e| Ok(vec_of(&sigma.target.eval_expr(e, t)?)))
                        .collect::<Result<_>>()?;
                    let tm = DMatrix::from_columns(&t_cols);
                    let col_norms: Vec<f64> = t_cols.iter().map(frobenius).collect();
                    let dev = |c: &DVector<C64>| -> f64 {
                        let scale: f64 = c.iter().zip(&col_norms).map(|(z, n)| z.norm() * n).sum();
                        frobenius(&(&tm * c)) / scale.max(1.0)
                    };
                    for c in &rel {
                        worst = worst.max(dev(c));
                    }
                    for _ in 0..cfg.pairs {
                        let a1 = DVector::from_fn(words.len(), |_, _| {
                            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                        });
                        let mut r = DVector::<C64>::zeros(words.len());
                        for c in &rel {
                            r += c * C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                        }
                        let a2 = &a1 + &r;
                        let lhs = &tm * &a1;
                        let rhs = &tm * &a2;
                        let scale: f64 = a2.iter().zip(&col_norms).map(|(z, n)| z.norm() * n).sum();
                        worst = worst.max(frobenius(&(lhs - rhs)) / scale.max(1.0));
                    }
                }
                Point::Limit => {
                    for c in &rel {
                        let mut e = GeneratorExpression::zero();
                        for (i, img) in images.iter().enumerate() {
                            if c[i].norm() > 0.0 {
                                e = e + img.scale(c[i]);
                            }
                        }
                        let l = limiting_norm(&Section::new(&sigma.target, e)?, &tail)?;
                        if l.value > tail.null_tol + l.error_bound {
                            worst = worst.max(l.value);
                        }
                    }
                }
            }
            Ok((hbar, worst, rel.len(), cfg.pairs))
        })
        .collect::<Result<_>>()?;
    let mut report = CompatibilityReport {
        samples: per_sample.len(),
        relations: 0,
        pairs: 0,
        max_deviation: 0.0,
        witness: None,
        pass: true,
    };
    for (hbar, dev, r, p) in per_sample {
        report.relations += r;
        report.pairs += p;
        if dev > report.max_deviation {
            report.max_deviation = dev;
            if dev > cfg.tol {
                report.witness = Some((hbar, dev));
            }
        }
    }
    report.pass = report.witness.is_none();
    Ok(report)
}

/// `(id, id)`.
pub fn identity_morphism(b: &Arc<Bundle>) -> BundleMorphism {
    make_morphism(BaseMap::identity(b.base()), LetterMap::Identity, b, b).expect("identity is compatible")
}

/// `sigma2 . sigma1`, re-audited.
pub fn compose(sigma2: &BundleMorphism, sigma1: &BundleMorphism) -> Result<BundleMorphism> {
    if !same_bundle(&sigma1.target, &sigma2.source) {
        return Err(Error::CompositionMismatch("target of the first is not the source of the second".into()));
    }
    let alpha = base_space::compose(&sigma2.alpha, &sigma1.alpha)?;
    let beta = LetterMap::then(&sigma1.beta, &sigma2.beta)?;
    make_morphism(alpha, beta, &sigma1.source, &sigma2.target)
}

/// `sigma_hbar` at a source sample.
pub struct FiberMap<'a> {
    sigma: &'a BundleMorphism,
    sample: usize,
    image: usize,
    solver: OnceLock<Option<(DMatrix<C64>, DMatrix<C64>)>>,
}

/// Homomorphism laws of a fiber map on random expressions, and isometry
/// when `beta` is bijective on the word span.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberMapReport {
    pub hbar: f64,
    pub image_hbar: f64,
    pub trials: usize,
    pub linearity: f64,
    pub multiplicativity: f64,
    pub star: f64,
    pub bijective: bool,
    pub isometry: Option<f64>,
    pub well_defined: Option<f64>,
    pub pass: bool,
}

pub fn fiber_map(sigma: &BundleMorphism, hbar: f64) -> Result<FiberMap<'_>> {
    let k = sigma.source.base().index_of(hbar)?;
    fiber_map_at(sigma, k)
}

pub fn fiber_map_at(sigma: &BundleMorphism, k: usize) -> Result<FiberMap<'_>> {
    if k >= sigma.source.len() {
        return Err(Error::OutOfRange(format!("sample {k}")));
    }
    let image = match sigma.alpha.images()[k] {
        Point::Sample(t) => t,
        Point::Limit => {
            return Err(Error::Unsupported(
                "sample mapped to the limit point; use limit_morphism".into(),
            ))
        }
    };
    Ok(FiberMap {
        sigma,
        sample: k,
        image,
        solver: OnceLock::new(),
    })
}

impl FiberMap<'_> {
    pub fn hbar(&self) -> f64 {
        self.sigma.source.base().points()[self.sample]
    }

    pub fn image_hbar(&self) -> f64 {
        self.sigma.target.base().points()[self.image]
    }

    /// `φ_hbar(a)`.
    pub fn source_value(&self, a: &GeneratorExpression) -> Result<FiberElement> {
        Section::new(&self.sigma.source, a.clone())?.at(self.sample)
    }

    /// `σ_hbar(φ_hbar(a)) = φ_{alpha(hbar)}(beta(a))`.
    pub fn apply_expr(&self, a: &GeneratorExpression) -> Result<FiberElement> {
        let mut b = self.sigma.beta.apply(a)?;
        if b.has_weights() {
            b = b.pullback(&vec![self.sample; self.sigma.target.len()]);
        }
        Section::new(&self.sigma.target, b)?.at(self.image)
    }

    /// `σ_hbar` on an arbitrary fiber element, by expanding it in a basis of
    /// source words. Available for fibers of dimension at most 16.
    pub fn apply(&self, x: &FiberElement) -> Result<FiberElement> {
        let n = self.sigma.source.fiber_dim(self.sample);
        if x.dim() != n {
            return Err(Error::DimensionMismatch { left: x.dim(), right: n });
        }
        let solver = self.solver.get_or_init(|| self.build_solver().ok().flatten());
        let Some((inv, t)) = solver else {
            return Err(Error::Unsupported(format!(
                "matrix-level fiber map needs a full word basis of dimension <= {APPLY_DIM_MAX}"
            )));
        };
        let c = inv * x.to_vector();
        FiberElement::from_vector(&(t * c), self.sigma.target.fiber_dim(self.image))
    }

    fn build_solver(&self) -> Result<Option<(DMatrix<C64>, DMatrix<C64>)>> {
        let b = &self.sigma.source;
        let n = b.fiber_dim(self.sample);
        if n > APPLY_DIM_MAX {
            return Ok(None);
        }
        let letters = source_letters(b);
        let mut span = SpanBasis::new();
        let mut chosen: Vec<(Word, DVector<C64>)> = Vec::new();
        let mut frontier: Vec<Word> = vec![Vec::new()];
        let id = FiberElement::identity(n).to_vector();
        span.try_add(&id);
        chosen.push((Vec::new(), id));
        for _ in 0..2 * n {
            let mut next = Vec::new();
            for w in &frontier {
                for &g in &letters {
                    let mut w2 = w.clone();
                    w2.push(g);
                    let v = FiberElement::from_matrix(b.word_matrix(self.sample, &w2)?)?.to_vector();
                    if span.try_add(&v) {
                        chosen.push((w2.clone(), v));
                        next.push(w2);
                    }
                }
            }
            if next.is_empty() || chosen.len() == n * n {
                break;
            }
            frontier = next;
        }
        if chosen.len() != n * n {
            return Ok(None);
        }
        let s = DMatrix::from_columns(&chosen.iter().map(|c| c.1.clone()).collect::<Vec<_>>());
        let Some(inv) = s.try_inverse() else {
            return Ok(None);
        };
        let t_cols: Vec<DVector<C64>> = chosen
            .iter()
            .map(|(w, _)| Ok(self.apply_expr(&GeneratorExpression::word(w.clone()))?.to_vector()))
            .collect::<Result<_>>()?;
        Ok(Some((inv, DMatrix::from_columns(&t_cols))))
    }

    /// Ranks of source words, their images, and target words of length
    /// `<= 2`: `beta` is bijective on the span when all three agree.
    fn is_bijective_on_span(&self) -> Result<bool> {
        let src_letters = source_letters(&self.sigma.source);
        let words = words_up_to(&src_letters, 2);
        let tgt_words = words_up_to(&source_letters(&self.sigma.target), 2);
        let cols = |b: &Arc<Bundle>, k: usize, ws: &[Word]| -> Result<Vec<DVector<C64>>> {
            ws.iter()
                .map(|w| Ok(FiberElement::from_matrix(b.word_matrix(k, w)?)?.to_vector()))
                .collect()
        };
        let s = cols(&self.sigma.source, self.sample, &words)?;
        let t: Vec<DVector<C64>> = words
            .iter()
            .map(|w| Ok(self.apply_expr(&GeneratorExpression::word(w.clone()))?.to_vector()))
            .collect::<Result<_>>()?;
        let u = cols(&self.sigma.target, self.image, &tgt_words)?;
        let rs = numerical_rank(&DMatrix::from_columns(&s), RELATION_RANK_TOL);
        let rt = numerical_rank(&DMatrix::from_columns(&t), RELATION_RANK_TOL);
        let ru = numerical_rank(&DMatrix::from_columns(&u), RELATION_RANK_TOL);
        let mut both = t.clone();
        both.extend(u);
        let rb = numerical_rank(&DMatrix::from_columns(&both), RELATION_RANK_TOL);
        Ok(rs == rt && rt == ru && rb == ru)
    }

    pub fn audit(&self, trials: usize, seed: u64) -> Result<FiberMapReport> {
        let letters = source_letters(&self.sigma.source);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bijective = self.is_bijective_on_span()?;
        let small = self.sigma.source.fiber_dim(self.sample) <= APPLY_DIM_MAX;
        let (mut lin, mut mul, mut star, mut iso, mut wd) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..trials {
            let a = random_expression(&mut rng, &letters, 2, 3);
            let b = random_expression(&mut rng, &letters, 2, 3);
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let sa = self.apply_expr(&a)?;
            let sb = self.apply_expr(&b)?;
            let scale = |x: f64| x.max(1.0);
            let na = sa.operator_norm();
            let nb = sb.operator_norm();
            let s_lin = self.apply_expr(&(&a + &b.scale(z)))?;
            lin = lin.max((&s_lin - &(&sa + &sb.scale(z))).operator_norm() / scale(na + z.norm() * nb));
            let s_mul = self.apply_expr(&(&a * &b))?;
            mul = mul.max((&s_mul - &(&sa * &sb)).operator_norm() / scale(na * nb));
            let s_star = self.apply_expr(&a.adjoint())?;
            star = star.max((&s_star - &sa.adjoint()).operator_norm() / scale(na));
            let pa = self.source_value(&a)?;
            if bijective {
                let np = pa.operator_norm();
                iso = iso.max((na - np).abs() / scale(np));
            }
            if small {
                if let Ok(y) = self.apply(&pa) {
                    wd = wd.max((&y - &sa).operator_norm() / scale(na));
                }
            }
        }
        let isometry = bijective.then_some(iso);
        let well_defined = (small && self.apply(&FiberElement::identity(self.sigma.source.fiber_dim(self.sample))).is_ok())
            .then_some(wd);
        let pass = lin <= LAW_TOL
            && mul <= LAW_TOL
            && star <= LAW_TOL
            && isometry.is_none_or(|d| d <= ISOMETRY_TOL)
            && well_defined.is_none_or(|d| d <= 1e-8);
        Ok(FiberMapReport {
            hbar: self.hbar(),
            image_hbar: self.image_hbar(),
            trials,
            linearity: lin,
            multiplicativity: mul,
            star,
            bijective,
            isometry,
            well_defined,
            pass,
        })
    }
}

/// Audits every fiber map of `sigma` in sample order.
pub fn audit_fiber_maps(sigma: &BundleMorphism, trials: usize, seed: u64) -> Result<Vec<FiberMapReport>> {
    (0..sigma.source.len())
        .into_par_iter()
        .filter(|&k| matches!(sigma.alpha.images()[k], Point::Sample(_)))
        .map(|k| fiber_map_at(sigma, k)?.audit(trials, seed.wrapping_add(k as u64)))
        .collect()
}

/// The bundle itself if its base already carries the limit point, else its
/// extension along the one-point compactification.
pub(crate) fn extended(b: &Arc<Bundle>) -> Result<Arc<Bundle>> {
    if b.base().has_limit() {
        Ok(b.clone())
    } else {
        Ok(extend_to_limit(b)?.0)
    }
}

/// `F(sigma) = (C(alpha), beta)` over the extended bundles, with
/// `C(alpha)(0_I) = 0_J`.
pub fn extend_morphism(sigma: &BundleMorphism) -> Result<BundleMorphism> {
    if !is_proper(&sigma.alpha) {
        return Err(Error::NotProper);
    }
    let src = extended(&sigma.source)?;
    let tgt = extended(&sigma.target)?;
    let alpha = sigma
        .alpha
        .with_spaces(src.base().clone(), tgt.base().clone())?
        .with_limit_image(Some(Point::Limit));
    make_morphism(alpha, sigma.beta.clone(), &src, &tgt)
}

/// `sigma_0` on limit fibers: `φ_0(a) -> φ_0(beta(a))`.
#[derive(Clone, Debug)]
pub struct LimitMorphism {
    sigma: BundleMorphism,
    source: LimitFiber,
    target: LimitFiber,
}

impl PartialEq for LimitMorphism {
    fn eq(&self, other: &Self) -> bool {
        self.sigma.beta == other.sigma.beta
            && self.sigma.alpha.limit_image() == other.sigma.alpha.limit_image()
            && same_bundle(self.source.bundle(), other.source.bundle())
            && same_bundle(self.target.bundle(), other.target.bundle())
    }
}

/// Coset checks for `sigma_0`: homomorphism laws and well-definedness on
/// pairs equal modulo the null ideal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitMorphismReport {
    pub cases: usize,
    pub homomorphism_failures: usize,
    pub well_defined_failures: usize,
    pub pass: bool,
}

pub fn limit_morphism(sigma: &BundleMorphism) -> Result<LimitMorphism> {
    limit_morphism_with(sigma, &TailConfig::default())
}

pub fn limit_morphism_with(sigma: &BundleMorphism, cfg: &TailConfig) -> Result<LimitMorphism> {
    if sigma.alpha.limit_image() != Some(Point::Limit) {
        return Err(Error::NotExtended);
    }
    Ok(LimitMorphism {
        source: limit_fiber(&sigma.source, cfg)?,
        target: limit_fiber(&sigma.target, cfg)?,
        sigma: sigma.clone(),
    })
}

/// `L(sigma) = G(F(sigma))`.
pub fn classical_limit(sigma: &BundleMorphism) -> Result<LimitMorphism> {
    limit_morphism(&extend_morphism(sigma)?)
}

impl LimitMorphism {
    pub fn morphism(&self) -> &BundleMorphism {
        &self.sigma
    }

    pub fn source(&self) -> &LimitFiber {
        &self.source
    }

    pub fn target(&self) -> &LimitFiber {
        &self.target
    }

    pub fn apply(&self, x: &LimitFiberElement) -> Result<LimitFiberElement> {
        self.target.element(self.sigma.apply(&x.expr)?)
    }

    pub fn apply_expr(&self, a: &GeneratorExpression) -> Result<LimitFiberElement> {
        self.target.element(self.sigma.apply(a)?)
    }

    /// `G(sigma2) . G(sigma1)`.
    pub fn then(&self, outer: &LimitMorphism) -> Result<LimitMorphism> {
        if !same_bundle(self.target.bundle(), outer.source.bundle()) {
            return Err(Error::CompositionMismatch("limit fibers do not match".into()));
        }
        Ok(LimitMorphism {
            sigma: compose(&outer.sigma, &self.sigma)?,
            source: self.source.clone(),
            target: outer.target.clone(),
        })
    }

    /// Symbols of `sigma_0(x)` on the target grid.
    pub fn image_symbol(&self, x: &LimitFiberElement) -> Result<Vec<C64>> {
        classical_symbol(&self.target, &self.apply(x)?)
    }

    /// Random degree `<= 2` pairs; null-ideal representatives are
    /// commutators, which vanish at the limit.
    pub fn audit(&self, cases: usize, tol: f64, seed: u64) -> Result<LimitMorphismReport> {
        let letters = source_letters(self.source.bundle());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<(GeneratorExpression, GeneratorExpression, GeneratorExpression)> = (0..cases)
            .map(|_| {
                let a = random_expression(&mut rng, &letters, 2, 2);
                let b = random_expression(&mut rng, &letters, 1, 2);
                let c = random_expression(&mut rng, &letters, 1, 2);
                (a, b, c)
            })
            .collect();
        let results: Vec<(bool, bool)> = inputs
            .par_iter()
            .map(|(a, b, c)| -> Result<(bool, bool)> {
                let s = &self.source;
                let ea = s.element(a.clone())?;
                let eb = s.element(b.clone())?;
                let prod = self.apply(&s.product(&ea, &eb)?)?;
                let prod2 = self.target.product(&self.apply(&ea)?, &self.apply(&eb)?)?;
                let adj = self.apply(&s.adjoint(&ea)?)?;
                let adj2 = self.target.adjoint(&self.apply(&ea)?)?;
                let hom = quotient_equal(&self.target, &prod, &prod2, tol)?
                    && quotient_equal(&self.target, &adj, &adj2, tol)?;
                let null = &(b * c) - &(c * b);
                let shifted = s.element(a + &null)?;
                let wd = !quotient_equal(s, &ea, &shifted, tol)?
                    || quotient_equal(&self.target, &self.apply(&ea)?, &self.apply(&shifted)?, tol)?;
                Ok((hom, wd))
            })
            .collect::<Result<_>>()?;
        let homomorphism_failures = results.iter().filter(|r| !r.0).count();
        let well_defined_failures = results.iter().filter(|r| !r.1).count();
        Ok(LimitMorphismReport {
            cases,
            homomorphism_failures,
            well_defined_failures,
            pass: homomorphism_failures == 0 && well_defined_failures == 0,
        })
    }
}

/// `G(id) = id` on the limit fiber of an extended bundle.
pub fn identity_limit_morphism(b: &Arc<Bundle>) -> Result<LimitMorphism> {
    limit_morphism(&identity_morphism(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::SampledBaseSpace;
    use crate::expr::parse_expression;
    use crate::quantization::{fuzzy_sphere_scheme, nc_torus_scheme};

    fn sphere(js: &[f64]) -> Arc<Bundle> {
        Bundle::from_scheme(Arc::new(fuzzy_sphere_scheme(js).unwrap()))
    }

    fn e(s: &str) -> GeneratorExpression {
        parse_expression(s).unwrap()
    }

    #[test]
    fn identity_and_rotation_are_compatible() {
        let b = sphere(&[0.5, 1.0, 1.5, 2.0]);
        let id = identity_morphism(&b);
        assert!(id.audit().pass);
        assert!(id.audit().relations > 0);
        let rot = make_morphism(BaseMap::identity(b.base()), LetterMap::cyclic_rotation(), &b, &b).unwrap();
        assert!(rot.audit().max_deviation < 1e-12);
    }

    #[test]
    fn doubling_x3_is_rejected() {
        let b = sphere(&[0.5, 1.0, 1.5]);
        let map = LetterMap::coords([e("x1"), e("x2"), e("2*x3")]);
        let err = make_morphism(BaseMap::identity(b.base()), map, &b, &b).unwrap_err();
        assert!(matches!(err, Error::CompatibilityViolation { .. }));
    }

    #[test]
    fn expanding_base_map_is_rejected() {
        let b = sphere(&[0.5, 1.0]);
        let src = b.with_base(SampledBaseSpace::from_points(vec![0.5, 0.4]).unwrap()).unwrap();
        let tgt = b.with_base(SampledBaseSpace::from_points(vec![1.0, 0.1]).unwrap()).unwrap();
        let alpha = BaseMap::new(src.base().clone(), tgt.base().clone(), vec![Point::Sample(0), Point::Sample(1)]).unwrap();
        let err = make_morphism(alpha, LetterMap::Identity, &src, &tgt).unwrap_err();
        assert!(matches!(err, Error::NotMetricMap { .. }));
        let constant = BaseMap::new(src.base().clone(), tgt.base().clone(), vec![Point::Sample(1), Point::Sample(1)]).unwrap();
        assert!(make_morphism(constant, LetterMap::Identity, &src, &tgt).is_err());
    }

    #[test]
    fn fiber_maps_are_isometric_homomorphisms() {
        let b = sphere(&[0.5, 1.0, 1.5, 2.0, 3.0]);
        let rot = make_morphism(BaseMap::identity(b.base()), LetterMap::cyclic_rotation(), &b, &b).unwrap();
        for r in audit_fiber_maps(&rot, 10, 1).unwrap() {
            assert!(r.pass, "{r:?}");
            assert!(r.bijective);
            assert!(r.isometry.unwrap() <= 1e-9);
            assert!(r.well_defined.unwrap() <= 1e-8);
        }
        let id = identity_morphism(&b);
        let fm = fiber_map(&id, b.base().points()[2]).unwrap();
        let x = fm.source_value(&e("x1*x2 + 2*x3")).unwrap();
        assert!((&fm.apply(&x).unwrap() - &x).operator_norm() < 1e-10);
        assert!(fiber_map(&id, 0.123).is_err());
    }

    #[test]
    fn composition_is_structural() {
        let b = sphere(&[0.5, 1.0, 1.5]);
        let id = identity_morphism(&b);
        let rot = make_morphism(BaseMap::identity(b.base()), LetterMap::cyclic_rotation(), &b, &b).unwrap();
        assert_eq!(compose(&rot, &id).unwrap(), rot);
        assert_eq!(compose(&id, &rot).unwrap(), rot);
        let rot2 = compose(&rot, &rot).unwrap();
        let expected = LetterMap::coords([e("x3"), e("x1"), e("x2")]);
        assert_eq!(rot2.beta(), &expected);
        assert_eq!(compose(&rot, &rot2).unwrap(), id);
    }

    #[test]
    fn torus_modes_compose_as_matrices() {
        let b = Bundle::from_scheme(Arc::new(nc_torus_scheme(&[4, 8, 16]).unwrap()));
        let s = make_morphism(BaseMap::identity(b.base()), LetterMap::modes([[1, 1], [0, 1]]), &b, &b).unwrap();
        let s2 = compose(&s, &s).unwrap();
        assert_eq!(s2.beta(), &LetterMap::Modes([[1, 2], [0, 1]]));
        let flip = LetterMap::modes([[0, 1], [1, 0]]);
        assert!(make_morphism(BaseMap::identity(b.base()), flip, &b, &b).is_err());
        // W(1,1)^N = (-1)^N: the shear is not an automorphism for odd N
        let odd = Bundle::from_scheme(Arc::new(nc_torus_scheme(&[3, 5]).unwrap()));
        let shear = LetterMap::modes([[1, 1], [0, 1]]);
        assert!(make_morphism(BaseMap::identity(odd.base()), shear, &odd, &odd).is_err());
    }

    #[test]
    fn extension_and_limit_morphism() {
        let js: Vec<f64> = (1..=24).map(|k| k as f64 * 0.5).collect();
        let b = sphere(&js);
        let rot = make_morphism(BaseMap::identity(b.base()), LetterMap::cyclic_rotation(), &b, &b).unwrap();
        let ext = extend_morphism(&rot).unwrap();
        assert_eq!(ext.alpha().limit_image(), Some(Point::Limit));
        let l = limit_morphism(&ext).unwrap();
        let x1 = l.source().element(e("x1")).unwrap();
        let img = l.image_symbol(&x1).unwrap();
        let x2 = b.scheme().classical_symbol(&e("x2")).unwrap();
        assert!(img.iter().zip(&x2).all(|(a, b)| (a - b).norm() < 1e-14));
        let eb = extended(&b).unwrap();
        assert_eq!(classical_limit(&identity_morphism(&b)).unwrap(), identity_limit_morphism(&eb).unwrap());
        let r = l.audit(4, 1e-3, 3).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
