//! Bundles of matrix fibers over a sampled base, their sections, and
//! empirical checks of the bundle axioms.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{FiberElement, C64};
use crate::base_space::{BaseMap, Point, SampledBaseSpace};
use crate::convergence::{
    estimate_limit, loglog_slope, modulus_of_continuity, LimitEstimate, TailConfig,
};
use crate::error::{Error, Result};
use crate::expr::{random_expression, Generator, GeneratorExpression, SampledFn, Word};
use crate::quantization::QuantizationScheme;

const ISOMETRY_TOL: f64 = 1e-12;

/// Fibers `M_n(C)` over the samples of a base space, produced by a
/// quantization scheme. Sample `k` carries the scheme fiber `levels[k]`.
#[derive(Clone, Debug)]
pub struct Bundle {
    base: SampledBaseSpace,
    scheme: Arc<QuantizationScheme>,
    levels: Vec<usize>,
    generators: Vec<GeneratorExpression>,
}

impl Bundle {
    /// One sample per scheme level, generated by the registered generators.
    pub fn from_scheme(scheme: Arc<QuantizationScheme>) -> Arc<Self> {
        let base = scheme.base_space();
        let levels = (0..scheme.len()).collect();
        let generators = scheme.generator_expressions();
        Arc::new(Self {
            base,
            scheme,
            levels,
            generators,
        })
    }

    pub fn new(
        base: SampledBaseSpace,
        scheme: Arc<QuantizationScheme>,
        levels: Vec<usize>,
        generators: Vec<GeneratorExpression>,
    ) -> Result<Arc<Self>> {
        if levels.len() != base.len() {
            return Err(Error::GridMismatch {
                expected: base.len(),
                found: levels.len(),
            });
        }
        if let Some(&l) = levels.iter().find(|&&l| l >= scheme.len()) {
            return Err(Error::OutOfRange(format!("scheme level {l}")));
        }
        for g in &generators {
            scheme.check_labels(g)?;
        }
        Ok(Arc::new(Self {
            base,
            scheme,
            levels,
            generators,
        }))
    }

    pub fn base(&self) -> &SampledBaseSpace {
        &self.base
    }

    pub fn scheme(&self) -> &Arc<QuantizationScheme> {
        &self.scheme
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> usize {
        self.levels[k]
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn fiber_dim(&self, k: usize) -> usize {
        self.scheme.fiber_dim(self.levels[k])
    }

    pub fn fiber_dims(&self) -> Vec<usize> {
        (0..self.len()).map(|k| self.fiber_dim(k)).collect()
    }

    pub fn generators(&self) -> &[GeneratorExpression] {
        &self.generators
    }

    pub fn generator_sections(self: &Arc<Self>) -> Vec<Section> {
        self.generators
            .iter()
            .map(|g| Section::new(self, g.clone()).expect("generators are registered"))
            .collect()
    }

    /// Same fibers over a different base (same number of samples).
    pub fn with_base(&self, base: SampledBaseSpace) -> Result<Arc<Self>> {
        Bundle::new(base, self.scheme.clone(), self.levels.clone(), self.generators.clone())
    }

    /// Same fibers and base, different generating family.
    pub fn with_generators(&self, generators: Vec<GeneratorExpression>) -> Result<Arc<Self>> {
        Bundle::new(self.base.clone(), self.scheme.clone(), self.levels.clone(), generators)
    }

    pub fn section(self: &Arc<Self>, expr: GeneratorExpression) -> Result<Section> {
        Section::new(self, expr)
    }

    /// The section `hbar -> Q_hbar(expr)`.
    pub fn quantized_section(self: &Arc<Self>, expr: &GeneratorExpression) -> Result<Section> {
        Section::new(self, self.scheme.quantized_section_expr(expr)?)
    }

    /// Matrices of single letters at sample `k`.
    pub fn letter_matrix(&self, k: usize, g: Generator) -> Result<DMatrix<C64>> {
        self.scheme.letter_matrix(self.levels[k], g)
    }

    /// Product of letter matrices of a noncommutative word at sample `k`.
    pub fn word_matrix(&self, k: usize, w: &[Generator]) -> Result<DMatrix<C64>> {
        let n = self.fiber_dim(k);
        let mut acc = DMatrix::<C64>::identity(n, n);
        for &g in w {
            acc *= self.letter_matrix(k, g)?;
        }
        Ok(acc)
    }

    /// Same scheme, fibers and base.
    pub fn same_fibers(&self, other: &Bundle) -> bool {
        Arc::ptr_eq(&self.scheme, &other.scheme) && self.levels == other.levels && self.base == other.base
    }

    /// Evaluates a noncommutative expression at sample `k`.
    pub fn eval_expr(&self, expr: &GeneratorExpression, k: usize) -> Result<FiberElement> {
        if k >= self.len() {
            return Err(Error::OutOfRange(format!("sample {k}")));
        }
        let n = self.fiber_dim(k);
        let mut letters: HashMap<Generator, DMatrix<C64>> = HashMap::new();
        let mut acc = DMatrix::<C64>::zeros(n, n);
        for t in expr.terms() {
            let c = t.coeff_at(k);
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let mut m: Option<DMatrix<C64>> = None;
            for &g in &t.word {
                if !letters.contains_key(&g) {
                    letters.insert(g, self.letter_matrix(k, g)?);
                }
                let l = &letters[&g];
                m = Some(match m {
                    None => l.clone(),
                    Some(p) => p * l,
                });
            }
            match m {
                None => {
                    for i in 0..n {
                        acc[(i, i)] += c;
                    }
                }
                Some(m) => acc += m.map(|z| z * c),
            }
        }
        FiberElement::from_matrix(acc)
    }
}

/// A section, represented by a generator expression with an optional
/// fiberwise scalar prefactor; evaluations are memoized per sample.
#[derive(Clone)]
pub struct Section {
    bundle: Arc<Bundle>,
    expr: GeneratorExpression,
    prefactor: Option<SampledFn>,
    cache: Arc<Vec<OnceLock<FiberElement>>>,
}

impl fmt::Debug for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Section")
            .field("expr", &self.expr.to_string())
            .field("prefactor", &self.prefactor.is_some())
            .finish()
    }
}

impl Section {
    pub fn new(bundle: &Arc<Bundle>, expr: GeneratorExpression) -> Result<Self> {
        bundle.scheme.check_labels(&expr)?;
        check_weight_grid(&expr, bundle.len())?;
        Ok(Self::unchecked(bundle.clone(), expr, None))
    }

    fn unchecked(bundle: Arc<Bundle>, expr: GeneratorExpression, prefactor: Option<SampledFn>) -> Self {
        let cache = Arc::new((0..bundle.len()).map(|_| OnceLock::new()).collect());
        Self {
            bundle,
            expr,
            prefactor,
            cache,
        }
    }

    pub fn zero(bundle: &Arc<Bundle>) -> Self {
        Self::unchecked(bundle.clone(), GeneratorExpression::zero(), None)
    }

    pub fn unit(bundle: &Arc<Bundle>) -> Self {
        Self::unchecked(bundle.clone(), GeneratorExpression::one(), None)
    }

    pub fn bundle(&self) -> &Arc<Bundle> {
        &self.bundle
    }

    pub fn expr(&self) -> &GeneratorExpression {
        &self.expr
    }

    pub fn prefactor(&self) -> Option<&SampledFn> {
        self.prefactor.as_ref()
    }

    /// The expression with the prefactor folded into its coefficients.
    pub fn folded_expr(&self) -> GeneratorExpression {
        match &self.prefactor {
            Some(f) => self.expr.weighted(f),
            None => self.expr.clone(),
        }
    }

    /// Same section over another bundle with the same sample count.
    pub fn rebind(&self, bundle: &Arc<Bundle>) -> Result<Self> {
        if bundle.len() != self.bundle.len() {
            return Err(Error::GridMismatch {
                expected: bundle.len(),
                found: self.bundle.len(),
            });
        }
        bundle.scheme.check_labels(&self.expr)?;
        Ok(Self::unchecked(bundle.clone(), self.expr.clone(), self.prefactor.clone()))
    }

    fn compatible(&self, other: &Section) -> Result<()> {
        if Arc::ptr_eq(&self.bundle, &other.bundle) || self.bundle.same_fibers(&other.bundle) {
            Ok(())
        } else {
            Err(Error::CompositionMismatch("sections of different bundles".into()))
        }
    }

    pub fn add(&self, other: &Section) -> Result<Section> {
        self.compatible(other)?;
        Ok(Self::unchecked(
            self.bundle.clone(),
            self.folded_expr() + other.folded_expr(),
            None,
        ))
    }

    pub fn sub(&self, other: &Section) -> Result<Section> {
        self.compatible(other)?;
        Ok(Self::unchecked(
            self.bundle.clone(),
            self.folded_expr() - other.folded_expr(),
            None,
        ))
    }

    pub fn mul(&self, other: &Section) -> Result<Section> {
        self.compatible(other)?;
        Ok(Self::unchecked(
            self.bundle.clone(),
            &self.folded_expr() * &other.folded_expr(),
            None,
        ))
    }

    pub fn scale(&self, c: C64) -> Section {
        Self::unchecked(self.bundle.clone(), self.expr.scale(c), self.prefactor.clone())
    }

    pub fn adjoint(&self) -> Section {
        Self::unchecked(
            self.bundle.clone(),
            self.expr.adjoint(),
            self.prefactor.as_ref().map(|f| f.conj()),
        )
    }

    /// `ab - ba`.
    pub fn commutator(&self, other: &Section) -> Result<Section> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// `φ_hbar(a)` at sample `k`.
    pub fn at(&self, k: usize) -> Result<FiberElement> {
        if k >= self.bundle.len() {
            return Err(Error::OutOfRange(format!("sample {k}")));
        }
        if let Some(v) = self.cache[k].get() {
            return Ok(v.clone());
        }
        let mut v = self.bundle.eval_expr(&self.expr, k)?;
        if let Some(f) = &self.prefactor {
            v = v.scale(f.value(k));
        }
        Ok(self.cache[k].get_or_init(|| v).clone())
    }

    /// All fiber values, computed in parallel, in grid order.
    pub fn values(&self) -> Result<Vec<FiberElement>> {
        (0..self.bundle.len()).into_par_iter().map(|k| self.at(k)).collect()
    }

    pub fn norms(&self) -> Result<Vec<f64>> {
        (0..self.bundle.len())
            .into_par_iter()
            .map(|k| self.at(k).map(|v| v.operator_norm()))
            .collect()
    }

    /// `||a|| = sup_hbar ||φ_hbar(a)||` over the samples.
    pub fn sup_norm(&self) -> Result<f64> {
        Ok(self.norms()?.into_iter().fold(0.0, f64::max))
    }
}

fn check_weight_grid(expr: &GeneratorExpression, n: usize) -> Result<()> {
    for t in expr.terms() {
        if let Some(w) = &t.weight {
            if w.len() != n {
                return Err(Error::GridMismatch {
                    expected: n,
                    found: w.len(),
                });
            }
        }
    }
    Ok(())
}

/// `φ_hbar(a)`.
pub fn evaluate(a: &Section, hbar: f64) -> Result<FiberElement> {
    let k = a.bundle.base.index_of(hbar)?;
    a.at(k)
}

/// `φ_hbar(a)` at a point of the base; the limit point has no matrix fiber.
pub fn evaluate_point(a: &Section, p: Point) -> Result<FiberElement> {
    match p {
        Point::Sample(k) => a.at(k),
        Point::Limit => Err(Error::Unsupported(
            "the limit fiber is a quotient; use the limit module".into(),
        )),
    }
}

/// `(hbar, ||φ_hbar(a)||)` in grid order.
pub fn norm_function(a: &Section) -> Result<Vec<(f64, f64)>> {
    let norms = a.norms()?;
    Ok(a.bundle.base.points().iter().copied().zip(norms).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    /// `(delta, omega(delta))`
    pub modulus_estimate: Vec<(f64, f64)>,
    pub exponent: Option<f64>,
    pub cauchy: bool,
    pub limit: Option<LimitEstimate>,
    /// Set when the sequence is not Cauchy; the section is flagged, not
    /// rejected, by callers that only need boundedness.
    pub flagged: bool,
    pub pass: bool,
}

/// Empirical uniform-continuity test of a sampled function: a power-law
/// modulus of continuity and a Cauchy tail toward the limit point.
pub fn check_uniform_continuity(
    base: &SampledBaseSpace,
    values: &[f64],
    window: f64,
    cfg: &TailConfig,
) -> Result<ContinuityReport> {
    if values.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: values.len(),
        });
    }
    if values.len() != base.len() {
        return Err(Error::GridMismatch {
            expected: base.len(),
            found: values.len(),
        });
    }
    let modulus = modulus_of_continuity(
        base.len(),
        |i, j| base.distance(Point::Sample(i), Point::Sample(j)),
        values,
        window,
    );
    let all_zero = modulus.iter().all(|&(_, w)| w <= cfg.zero_tol);
    let exponent = if all_zero {
        None
    } else {
        let d: Vec<f64> = modulus.iter().map(|m| m.0).collect();
        let w: Vec<f64> = modulus.iter().map(|m| m.1).collect();
        loglog_slope(&d, &w).map(|f| f.0)
    };
    let holder = all_zero || exponent.is_some_and(|g| g > 0.0);
    let limit = estimate_limit(&base.limit_distances(), values, cfg).ok();
    let cauchy = limit.is_some();
    Ok(ContinuityReport {
        modulus_estimate: modulus,
        exponent,
        cauchy,
        limit,
        flagged: !cauchy,
        pass: holder && cauchy,
    })
}

/// `f a`, with `φ_hbar(fa) = f(hbar) φ_hbar(a)`.
pub fn module_action(f: &SampledFn, a: &Section) -> Result<Section> {
    if f.len() != a.bundle.len() {
        return Err(Error::GridMismatch {
            expected: a.bundle.len(),
            found: f.len(),
        });
    }
    if !f.is_finite() {
        return Err(Error::NonFinite);
    }
    let prefactor = Some(match &a.prefactor {
        Some(g) => f.mul(g),
        None => f.clone(),
    });
    Ok(Section::unchecked(a.bundle.clone(), a.expr.clone(), prefactor))
}

/// Multiplies by a cutoff in `[0, 1]`, producing a section whose norm
/// follows the cutoff toward the limit point.
pub fn restrict_to_vanishing(a: &Section, cutoff: &SampledFn) -> Result<Section> {
    if cutoff
        .values()
        .iter()
        .any(|z| z.im != 0.0 || !(0.0..=1.0).contains(&z.re))
    {
        return Err(Error::OutOfRange("cutoff must take values in [0, 1]".into()));
    }
    module_action(cutoff, a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMethod {
    WordSpan,
    Irreducibility,
}

#[derive(Clone, Debug, Serialize)]
pub struct FullnessLevel {
    pub hbar: f64,
    pub dim: usize,
    pub rank: usize,
    pub word_length: usize,
    pub method: GenerationMethod,
    pub full: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FullnessReport {
    pub levels: Vec<FullnessLevel>,
    pub sup_norm_trials: usize,
    pub sup_norm_failures: usize,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FullnessConfig {
    /// Longest word used by the span test.
    pub max_word_length: usize,
    /// Fibers above this size use the irreducibility test.
    pub span_dim_max: usize,
}

impl Default for FullnessConfig {
    fn default() -> Self {
        Self {
            max_word_length: 4,
            span_dim_max: 16,
        }
    }
}

/// Orthonormal basis of a growing subspace of `C^d`.
pub(crate) struct SpanBasis {
    pub(crate) basis: Vec<DVector<C64>>,
}

impl SpanBasis {
    pub(crate) fn new() -> Self {
        Self { basis: Vec::new() }
    }

    pub(crate) fn try_add(&mut self, v: &DVector<C64>) -> bool {
        let scale = v.norm();
        if scale == 0.0 {
            return false;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &self.basis {
                let c = b.dotc(&w);
                w -= b * c;
            }
        }
        let r = w.norm();
        if r <= 1e-10 * scale {
            return false;
        }
        self.basis.push(w / C64::new(r, 0.0));
        true
    }
}

/// Rank of the span of words of length `<= max_len` in `gens`, and the
/// length at which it stopped growing.
pub fn word_span_rank(gens: &[DMatrix<C64>], max_len: usize) -> (usize, usize) {
    let Some(first) = gens.first() else {
        return (0, 0);
    };
    let n = first.nrows();
    let full = n * n;
    let vec_of = |m: &DMatrix<C64>| DVector::from_iterator(full, m.iter().copied());
    let mut span = SpanBasis { basis: Vec::new() };
    let id = DMatrix::<C64>::identity(n, n);
    span.try_add(&vec_of(&id));
    let mut frontier = vec![id];
    let mut used = 0;
    for len in 1..=max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for g in gens {
                let m = w * g;
                if span.try_add(&vec_of(&m)) {
                    next.push(m);
                }
            }
            if span.basis.len() == full {
                break;
            }
        }
        if next.is_empty() {
            break;
        }
        used = len;
        frontier = next;
        if span.basis.len() == full {
            break;
        }
    }
    (span.basis.len(), used)
}

/// The `*`-algebra generated by a `*`-closed set is all of `M_n` iff its
/// commutant is trivial. With a nondegenerate Hermitian combination `H`,
/// the commutant is diagonal in the eigenbasis of `H`, and trivial iff the
/// off-diagonal support graph of the generators is connected.
fn irreducible(gens: &[DMatrix<C64>], rng: &mut ChaCha8Rng) -> Option<bool> {
    let n = gens.first()?.nrows();
    for _attempt in 0..3 {
        let mut h = DMatrix::<C64>::zeros(n, n);
        for g in gens {
            let herm = (g + g.adjoint()).map(|z| z * 0.5);
            let anti = (g - g.adjoint()).map(|z| z * C64::new(0.0, -0.5));
            h += herm.map(|z| z * rng.gen_range(-1.0..1.0));
            h += anti.map(|z| z * rng.gen_range(-1.0..1.0));
        }
        let eig = h.clone().symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let spread = ev.last().unwrap() - ev.first().unwrap();
        let min_gap = ev.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if n > 1 && !(min_gap > 1e-8 * spread.max(1e-300)) {
            continue;
        }
        let p = &eig.eigenvectors;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        for g in gens {
            let m = p.adjoint() * g * p;
            let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for r in 0..n {
                for c in 0..n {
                    if r != c && m[(r, c)].norm() > 1e-9 * scale {
                        let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                        if a != b {
                            parent[a] = b;
                        }
                    }
                }
            }
        }
        let root = find(&mut parent, 0);
        return Some((0..n).all(|k| find(&mut parent, k) == root));
    }
    None
}

/// Generators at sample `k`, closed under adjoints.
fn star_closed_generators(b: &Bundle, k: usize) -> Result<Vec<DMatrix<C64>>> {
    let mut out = Vec::new();
    for g in &b.generators {
        let m = b.eval_expr(g, k)?;
        let dev = m.self_adjoint_deviation();
        let m = m.into_matrix();
        if dev > 1e-12 * m.norm().max(1.0) {
            out.push(m.adjoint());
        }
        out.push(m);
    }
    Ok(out)
}

/// Surjectivity surrogate at each fiber, and the supremum-norm formula on
/// random sections.
pub fn check_fullness(
    b: &Arc<Bundle>,
    trials: usize,
    cfg: &FullnessConfig,
    seed: u64,
) -> Result<FullnessReport> {
    let levels: Vec<FullnessLevel> = (0..b.len())
        .into_par_iter()
        .map(|k| {
            let n = b.fiber_dim(k);
            let gens = star_closed_generators(b, k)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9));
            let by_span = n <= cfg.span_dim_max;
            let (rank, len, method) = if by_span {
                let (r, l) = word_span_rank(&gens, cfg.max_word_length.max(1));
                (r, l, GenerationMethod::WordSpan)
            } else {
                match irreducible(&gens, &mut rng) {
                    Some(true) => (n * n, 0, GenerationMethod::Irreducibility),
                    Some(false) => (0, 0, GenerationMethod::Irreducibility),
                    None => {
                        let (r, l) = word_span_rank(&gens, 2 * n);
                        (r, l, GenerationMethod::WordSpan)
                    }
                }
            };
            Ok(FullnessLevel {
                hbar: b.base.points()[k],
                dim: n,
                rank,
                word_length: len,
                method,
                full: rank == n * n,
            })
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let letters = b.scheme.generator_labels();
    let mut failures = 0;
    for _ in 0..trials {
        let e = random_expression(&mut rng, &letters, 2, 3);
        let a = Section::new(b, e)?;
        let norms = a.norms()?;
        let sup = a.sup_norm()?;
        let aa = a.adjoint().mul(&a)?.sup_norm()?;
        let ok = norms.iter().all(|&x| x <= sup)
            && norms.iter().any(|&x| x == sup)
            && (aa - sup * sup).abs() <= 1e-9 * (sup * sup).max(1.0);
        if !ok {
            failures += 1;
        }
    }
    let pass = failures == 0 && levels.iter().all(|l| l.full);
    Ok(FullnessReport {
        levels,
        sup_norm_trials: trials,
        sup_norm_failures: failures,
        pass,
    })
}

/// `d_I(x, y) = d_J(α x, α y)` on all sampled pairs.
pub fn is_isometric(alpha: &BaseMap) -> bool {
    let (s, t) = (alpha.source(), alpha.target());
    let pts = s.all_points();
    for &x in &pts {
        for &y in &pts {
            let (Some(ax), Some(ay)) = (alpha.image(x), alpha.image(y)) else {
                return false;
            };
            let (d0, d1) = (s.distance(x, y), t.distance(ax, ay));
            if (d0 - d1).abs() > ISOMETRY_TOL * d0.max(1.0) {
                return false;
            }
        }
    }
    true
}

fn sample_images(alpha: &BaseMap) -> Result<Vec<usize>> {
    alpha
        .images()
        .iter()
        .map(|p| match p {
            Point::Sample(k) => Ok(*k),
            Point::Limit => Err(Error::InvalidBaseMap("sample mapped to the limit point".into())),
        })
        .collect()
}

/// The bundle over `α[I]`: fibers at `x` are the fibers of `b` at `α(x)`.
pub fn canonical_restriction(b: &Arc<Bundle>, alpha: &BaseMap) -> Result<Arc<Bundle>> {
    if alpha.target().points() != b.base.points() {
        return Err(Error::InvalidBaseMap("target is not the bundle's base".into()));
    }
    if !alpha.is_injective() {
        return Err(Error::InvalidBaseMap("restriction map is not injective".into()));
    }
    if !is_isometric(alpha) {
        return Err(Error::InvalidBaseMap("restriction map is not isometric".into()));
    }
    let idx = sample_images(alpha)?;
    let levels = idx.iter().map(|&k| b.levels[k]).collect();
    Bundle::new(alpha.source().clone(), b.scheme.clone(), levels, b.generators.clone())
}

/// A section of `b` truncated to the restricted bundle.
pub fn restrict_section(a: &Section, alpha: &BaseMap, restricted: &Arc<Bundle>) -> Result<Section> {
    let idx = sample_images(alpha)?;
    if idx.len() != restricted.len() {
        return Err(Error::GridMismatch {
            expected: restricted.len(),
            found: idx.len(),
        });
    }
    Ok(Section::unchecked(
        restricted.clone(),
        a.expr.pullback(&idx),
        a.prefactor.as_ref().map(|f| f.pullback(&idx)),
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct CompletenessReport {
    pub truncations: usize,
    pub final_distance: f64,
    pub norm_gap: f64,
    pub pass: bool,
}

/// Supremum-norm closure probe: the Neumann partial sums of `r g` for a
/// generator section `g` form a Cauchy sequence whose fiberwise limit
/// `(1 - r g)^{-1}` is approached in sup norm, with converging norm
/// functions.
pub fn check_completeness(b: &Arc<Bundle>, ratio: f64, truncations: usize) -> Result<CompletenessReport> {
    let g = b
        .generator_sections()
        .into_iter()
        .next()
        .ok_or_else(|| Error::Unsupported("bundle without generators".into()))?;
    let gnorm = g.sup_norm()?;
    let r = ratio / gnorm.max(1e-300);
    let limit: Vec<DMatrix<C64>> = (0..b.len())
        .map(|k| {
            let m = g.at(k)?.into_matrix();
            let n = m.nrows();
            let a = DMatrix::<C64>::identity(n, n) - m.map(|z| z * r);
            a.try_inverse().ok_or(Error::NonFinite)
        })
        .collect::<Result<_>>()?;
    let mut partial = GeneratorExpression::one();
    let mut power = GeneratorExpression::one();
    let gen_expr = g.expr().scale_real(r);
    for _ in 0..truncations {
        power = &power * &gen_expr;
        partial = partial + power.clone();
    }
    let s = Section::new(b, partial)?;
    let mut dist: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for (k, lim) in limit.iter().enumerate() {
        let v = s.at(k)?;
        let diff = FiberElement::from_matrix(v.matrix() - lim)?.operator_norm();
        let ln = crate::algebra::spectral_norm(lim)?;
        dist = dist.max(diff);
        gap = gap.max((v.operator_norm() - ln).abs());
    }
    let bound = ratio.powi(truncations as i32 + 1) / (1.0 - ratio);
    Ok(CompletenessReport {
        truncations,
        final_distance: dist,
        norm_gap: gap,
        pass: dist <= bound * (1.0 + 1e-9) + 1e-12 && gap <= dist + 1e-12 && gap <= 1e-9,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub fullness: FullnessReport,
    pub completeness: CompletenessReport,
    /// every generator norm function passes the continuity test
    pub continuity: bool,
    pub pass: bool,
}

/// Fullness, completeness and uniform-continuity surrogates together. The
/// span test runs with words up to twice the span dimension cap, enough for
/// every fiber it handles.
pub fn check_axioms(b: &Arc<Bundle>, trials: usize, cfg: &TailConfig, seed: u64) -> Result<AxiomReport> {
    let d = FullnessConfig::default();
    let full = FullnessConfig {
        max_word_length: 2 * d.span_dim_max,
        ..d
    };
    check_axioms_with(b, trials, cfg, &full, seed)
}

pub fn check_axioms_with(
    b: &Arc<Bundle>,
    trials: usize,
    cfg: &TailConfig,
    fullness: &FullnessConfig,
    seed: u64,
) -> Result<AxiomReport> {
    let fullness = check_fullness(b, trials, fullness, seed)?;
    let completeness = check_completeness(b, 0.5, 40)?;
    let mut continuity = true;
    for g in b.generator_sections() {
        let n = g.norms()?;
        continuity &= check_uniform_continuity(b.base(), &n, f64::INFINITY, cfg)?.pass;
    }
    Ok(AxiomReport {
        pass: fullness.pass && completeness.pass && continuity,
        fullness,
        completeness,
        continuity,
    })
}

/// Randomly generated word with letters from the bundle's generators.
pub fn random_section<R: Rng + ?Sized>(b: &Arc<Bundle>, rng: &mut R, degree: usize, terms: usize) -> Section {
    let letters = b.scheme.generator_labels();
    Section::new(b, random_expression(rng, &letters, degree, terms)).expect("registered letters")
}

/// Words evaluated at a sample, for span tests.
pub fn evaluate_words(b: &Bundle, k: usize, words: &[Word]) -> Result<Vec<FiberElement>> {
    words
        .iter()
        .map(|w| FiberElement::from_matrix(b.word_matrix(k, w)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::make_geometric_grid;
    use crate::expr::parse_expression;
    use crate::quantization::{fuzzy_sphere_scheme, nc_torus_scheme};

    fn sphere(js: &[f64]) -> Arc<Bundle> {
        Bundle::from_scheme(Arc::new(fuzzy_sphere_scheme(js).unwrap()))
    }

    fn e(s: &str) -> GeneratorExpression {
        parse_expression(s).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let b = sphere(&[0.5, 1.0, 1.5]);
        let x3 = b.section(e("x3")).unwrap();
        let v = x3.at(0).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((v.matrix()[(0, 0)].re - r).abs() < 1e-15);
        assert!((v.matrix()[(1, 1)].re + r).abs() < 1e-15);
        let one = Section::unit(&b);
        for k in 0..b.len() {
            assert_eq!(one.at(k).unwrap(), FiberElement::identity(b.fiber_dim(k)));
        }
        let h = b.base().points()[1];
        assert_eq!(evaluate(&x3, h).unwrap(), x3.at(1).unwrap());
        assert!(matches!(evaluate(&x3, 0.123), Err(Error::UnsampledPoint(_))));
    }

    #[test]
    fn norm_function_examples() {
        let b = sphere(&[0.5, 1.0]);
        let n = norm_function(&b.section(e("x3")).unwrap()).unwrap();
        assert!((n[0].1 - 0.57735).abs() < 1e-5);
        assert!((n[1].1 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-5);
        assert!(norm_function(&Section::zero(&b)).unwrap().iter().all(|p| p.1 == 0.0));
    }

    #[test]
    fn continuity_examples() {
        let base = make_geometric_grid(1.0, 0.5, 12).unwrap();
        let cfg = TailConfig::default();
        let constant = check_uniform_continuity(&base, &[2.0; 12], 1.0, &cfg).unwrap();
        assert!(constant.pass);
        assert!(constant.modulus_estimate.iter().all(|m| m.1 == 0.0));
        let id: Vec<f64> = base.points().to_vec();
        let lin = check_uniform_continuity(&base, &id, 1.0, &cfg).unwrap();
        assert!(lin.pass);
        assert!(lin.modulus_estimate.iter().all(|m| (m.0 - m.1).abs() < 1e-15));
        let sine: Vec<f64> = base.points().iter().map(|h| (1.0 / h).sin()).collect();
        let bad = check_uniform_continuity(&base, &sine, 1.0, &cfg).unwrap();
        assert!(!bad.pass && !bad.cauchy);
        assert!(check_uniform_continuity(&base.restrict_to(&[0, 1]).unwrap(), &[1.0, 1.0], 1.0, &cfg).is_err());
    }

    #[test]
    fn module_action_examples() {
        let b = sphere(&[0.5, 1.0, 2.0, 4.0]);
        let x3 = b.section(e("x3")).unwrap();
        let one = SampledFn::constant(b.len(), C64::new(1.0, 0.0));
        let same = module_action(&one, &x3).unwrap();
        for k in 0..b.len() {
            assert_eq!(same.at(k).unwrap(), x3.at(k).unwrap());
        }
        let zero = module_action(&SampledFn::constant(b.len(), C64::new(0.0, 0.0)), &x3).unwrap();
        assert_eq!(zero.sup_norm().unwrap(), 0.0);
        let f = SampledFn::from_real_fn(b.base(), |h| h);
        let fa = module_action(&f, &x3).unwrap();
        for (k, (h, n)) in norm_function(&fa).unwrap().into_iter().enumerate() {
            assert_eq!(n, h * x3.at(k).unwrap().operator_norm());
        }
        assert!(matches!(
            module_action(&SampledFn::constant(2, C64::new(1.0, 0.0)), &x3),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn fullness_examples() {
        let cfg = FullnessConfig {
            max_word_length: 2,
            span_dim_max: 16,
        };
        let b = sphere(&[0.5]);
        assert!(check_fullness(&b, 2, &cfg, 1).unwrap().pass);
        let t = Bundle::from_scheme(Arc::new(nc_torus_scheme(&[2]).unwrap()));
        assert!(check_fullness(&t, 2, &cfg, 1).unwrap().pass);
        let single = sphere(&[1.0]).with_generators(vec![e("x3")]).unwrap();
        let r = check_fullness(&single, 0, &cfg, 1).unwrap();
        assert!(!r.pass);
        assert_eq!(r.levels[0].rank, 3);
    }

    #[test]
    fn fullness_on_large_fibers() {
        let b = sphere(&[10.0, 20.0]);
        let r = check_fullness(&b, 1, &FullnessConfig::default(), 3).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.levels[0].method, GenerationMethod::Irreducibility);
        let t = Bundle::from_scheme(Arc::new(nc_torus_scheme(&[24, 33]).unwrap()));
        assert!(check_fullness(&t, 1, &FullnessConfig::default(), 3).unwrap().pass);
    }

    #[test]
    fn restriction_examples() {
        let scheme = Arc::new(fuzzy_sphere_scheme(&[0.5, 1.0, 1.5]).unwrap());
        let b = Bundle::from_scheme(scheme);
        let x = b.section(e("x1*x3 + x2")).unwrap();
        let id = BaseMap::identity(b.base());
        let same = canonical_restriction(&b, &id).unwrap();
        let xs = restrict_section(&x, &id, &same).unwrap();
        for k in 0..b.len() {
            assert_eq!(xs.at(k).unwrap(), x.at(k).unwrap());
        }
        let sub = b.base().restrict_to(&[1]).unwrap();
        let inc = BaseMap::inclusion(&sub, b.base()).unwrap();
        let one = canonical_restriction(&b, &inc).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(restrict_section(&x, &inc, &one).unwrap().at(0).unwrap(), x.at(1).unwrap());
    }

    #[test]
    fn vanishing_cutoff() {
        let b = sphere(&[0.5, 1.0, 2.0, 4.0, 8.0]);
        let mid = b.base().points()[2];
        let cut = SampledFn::from_real_fn(b.base(), |h| (h / mid).min(1.0));
        let v = restrict_to_vanishing(&Section::unit(&b), &cut).unwrap();
        for (h, n) in norm_function(&v).unwrap() {
            assert_eq!(n, (h / mid).min(1.0));
        }
        let bad = SampledFn::constant(b.len(), C64::new(2.0, 0.0));
        assert!(restrict_to_vanishing(&Section::unit(&b), &bad).is_err());
    }

    #[test]
    fn completeness_probe() {
        let b = sphere(&[0.5, 1.0, 2.0]);
        assert!(check_completeness(&b, 0.5, 40).unwrap().pass);
    }
}
