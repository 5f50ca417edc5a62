//! Strict deformation quantization schemes: the fuzzy sphere and the
//! rational noncommutative torus.

mod conditions;
pub mod sphere;
pub mod symbol;
pub mod torus;

use std::sync::Mutex;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{FiberElement, C64};
use crate::base_space::SampledBaseSpace;
use crate::error::{Error, Result};
use crate::expr::{Generator, GeneratorExpression, Word};

pub use conditions::{
    check_deformation, check_dirac, check_rieffel, check_von_neumann, DeformationLevel,
    DeformationReport, RieffelReport,
};
pub use symbol::{PhaseSpace, SymbolGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    FuzzySphere,
    NcTorus,
}

/// Parameterization of the sphere's deformation parameter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereHbar {
    /// `1 / sqrt(j(j+1))`: Dirac's condition is exact on linear generators.
    #[default]
    Casimir,
    /// `1 / j`.
    InverseSpin,
}

/// One fiber of a scheme: spin `j` or torus size `N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Level {
    pub param: f64,
    pub hbar: f64,
    pub dim: usize,
}

#[derive(Debug)]
pub struct QuantizationScheme {
    kind: SchemeKind,
    name: String,
    levels: Vec<Level>,
    spin: Vec<[DMatrix<C64>; 3]>,
    sym: Vec<Mutex<sphere::SymmetrizedCache>>,
    grid: SymbolGrid,
}

const SECTION_WORD_DEGREE_MAX: usize = 8;

/// Fuzzy sphere on the given spins (half-integers, increasing, `>= 1/2`).
pub fn fuzzy_sphere_scheme(j_values: &[f64]) -> Result<QuantizationScheme> {
    fuzzy_sphere_scheme_with(j_values, SphereHbar::Casimir)
}

pub fn fuzzy_sphere_scheme_with(j_values: &[f64], hbar: SphereHbar) -> Result<QuantizationScheme> {
    if j_values.is_empty() {
        return Err(Error::InvalidScheme("no spins".into()));
    }
    let mut levels = Vec::with_capacity(j_values.len());
    let mut spin = Vec::with_capacity(j_values.len());
    for (k, &j) in j_values.iter().enumerate() {
        let two_j = 2.0 * j;
        if !(j >= 0.5) || (two_j - two_j.round()).abs() > 1e-12 {
            return Err(Error::InvalidScheme(format!("invalid spin {j}")));
        }
        if k > 0 && !(j > j_values[k - 1]) {
            return Err(Error::InvalidScheme("spins must be increasing".into()));
        }
        let two_j = two_j.round() as usize;
        let c = (j * (j + 1.0)).sqrt();
        let h = match hbar {
            SphereHbar::Casimir => 1.0 / c,
            SphereHbar::InverseSpin => 1.0 / j,
        };
        let s = sphere::spin_matrices(two_j);
        spin.push(s.map(|m| m.map(|z| z / c)));
        levels.push(Level {
            param: j,
            hbar: h,
            dim: two_j + 1,
        });
    }
    let sym = levels.iter().map(|_| Mutex::new(Default::default())).collect();
    Ok(QuantizationScheme {
        kind: SchemeKind::FuzzySphere,
        name: "fuzzy_sphere".into(),
        levels,
        spin,
        sym,
        grid: SymbolGrid::sphere(48, 96),
    })
}

/// Rational noncommutative torus on the given sizes (increasing, `>= 2`).
pub fn nc_torus_scheme(n_values: &[usize]) -> Result<QuantizationScheme> {
    if n_values.is_empty() {
        return Err(Error::InvalidScheme("no sizes".into()));
    }
    let mut levels = Vec::with_capacity(n_values.len());
    for (k, &n) in n_values.iter().enumerate() {
        if n < 2 {
            return Err(Error::InvalidScheme(format!("torus size {n} < 2")));
        }
        if k > 0 && n <= n_values[k - 1] {
            return Err(Error::InvalidScheme("sizes must be increasing".into()));
        }
        levels.push(Level {
            param: n as f64,
            hbar: 1.0 / n as f64,
            dim: n,
        });
    }
    Ok(QuantizationScheme {
        kind: SchemeKind::NcTorus,
        name: "nc_torus".into(),
        levels,
        spin: Vec::new(),
        sym: Vec::new(),
        grid: SymbolGrid::torus(64),
    })
}

impl QuantizationScheme {
    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn hbar(&self, level: usize) -> f64 {
        self.levels[level].hbar
    }

    pub fn hbars(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.hbar).collect()
    }

    pub fn fiber_dim(&self, level: usize) -> usize {
        self.levels[level].dim
    }

    pub fn level_of_hbar(&self, hbar: f64) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| (l.hbar - hbar).abs() <= 1e-12 * hbar.abs().max(1.0))
            .ok_or(Error::UnsampledPoint(hbar))
    }

    /// Base space with one sample per level, `hbar` decreasing.
    pub fn base_space(&self) -> SampledBaseSpace {
        SampledBaseSpace::from_points(self.hbars()).expect("scheme levels are strictly decreasing")
    }

    pub fn symbol_grid(&self) -> &SymbolGrid {
        &self.grid
    }

    /// Registered generator labels.
    pub fn generator_labels(&self) -> Vec<Generator> {
        match self.kind {
            SchemeKind::FuzzySphere => (0..3).map(Generator::Coord).collect(),
            SchemeKind::NcTorus => vec![Generator::Mode(1, 0), Generator::Mode(0, 1)],
        }
    }

    pub fn generator_expressions(&self) -> Vec<GeneratorExpression> {
        self.generator_labels().into_iter().map(GeneratorExpression::generator).collect()
    }

    pub fn is_registered(&self, g: Generator) -> bool {
        match (self.kind, g) {
            (SchemeKind::FuzzySphere, Generator::Coord(a)) => a < 3,
            (SchemeKind::NcTorus, Generator::Mode(..)) => true,
            _ => false,
        }
    }

    pub fn check_labels(&self, expr: &GeneratorExpression) -> Result<()> {
        match expr.letters().into_iter().find(|&g| !self.is_registered(g)) {
            Some(g) => Err(Error::UnknownLabel(g.label())),
            None => Ok(()),
        }
    }

    /// Matrix of a single letter in the fiber at `level`.
    pub fn letter_matrix(&self, level: usize, g: Generator) -> Result<DMatrix<C64>> {
        match (self.kind, g) {
            (SchemeKind::FuzzySphere, Generator::Coord(a)) if a < 3 => {
                Ok(self.spin[level][a as usize].clone())
            }
            (SchemeKind::NcTorus, Generator::Mode(m1, m2)) => {
                Ok(torus::weyl_mode(self.levels[level].dim, m1, m2))
            }
            _ => Err(Error::UnknownLabel(g.label())),
        }
    }

    /// Classical Poisson bracket of two letters.
    pub fn letter_bracket(&self, a: Generator, b: Generator) -> Result<GeneratorExpression> {
        match (self.kind, a, b) {
            (SchemeKind::FuzzySphere, Generator::Coord(p), Generator::Coord(q)) if p < 3 && q < 3 => {
                if p == q {
                    return Ok(GeneratorExpression::zero());
                }
                let c = 3 - p - q;
                // {x_p, x_q} = -eps_{pqc} x_c
                let sign = if (q + 3 - p) % 3 == 1 { -1.0 } else { 1.0 };
                Ok(GeneratorExpression::generator(Generator::Coord(c)).scale_real(sign))
            }
            (SchemeKind::NcTorus, Generator::Mode(m1, m2), Generator::Mode(n1, n2)) => {
                let w = torus::wedge((m1, m2), (n1, n2));
                if w == 0 {
                    return Ok(GeneratorExpression::zero());
                }
                Ok(GeneratorExpression::generator(Generator::Mode(m1 + n1, m2 + n2))
                    .scale_real(-2.0 * std::f64::consts::PI * w as f64))
            }
            _ => Err(Error::MissingBracket(a.label(), b.label())),
        }
    }

    /// Structure constants on the registered generators.
    pub fn bracket_table(&self) -> Vec<((Generator, Generator), GeneratorExpression)> {
        let gens = self.generator_labels();
        let mut out = Vec::new();
        for &a in &gens {
            for &b in &gens {
                out.push(((a, b), self.letter_bracket(a, b).expect("registered pair")));
            }
        }
        out
    }

    /// Classical Poisson bracket of two expressions (Leibniz extension of the
    /// letter table; coefficient functions are carried along).
    pub fn poisson_bracket(
        &self,
        a: &GeneratorExpression,
        b: &GeneratorExpression,
    ) -> Result<GeneratorExpression> {
        for x in a.letters() {
            for y in b.letters() {
                self.letter_bracket(x, y)?;
            }
        }
        Ok(a.bracket_with(b, &|x, y| self.letter_bracket(x, y).expect("checked")))
    }

    /// The noncommutative section expression whose evaluation is `Q(expr)`:
    /// symmetrized words of the harmonic components on the sphere, combined
    /// Weyl modes on the torus.
    pub fn quantized_section_expr(&self, expr: &GeneratorExpression) -> Result<GeneratorExpression> {
        self.check_labels(expr)?;
        let mut out = GeneratorExpression::zero();
        for t in expr.terms() {
            let head = GeneratorExpression::from_terms(vec![crate::expr::Term {
                coeff: t.coeff,
                weight: t.weight.clone(),
                word: Vec::new(),
            }]);
            let body = match self.kind {
                SchemeKind::FuzzySphere => {
                    if t.word.len() > SECTION_WORD_DEGREE_MAX {
                        return Err(Error::Unsupported(format!(
                            "symmetrized section words of degree {} > {}",
                            t.word.len(),
                            SECTION_WORD_DEGREE_MAX
                        )));
                    }
                    let mut acc = GeneratorExpression::zero();
                    for (e, c) in sphere::harmonic_reduction(coord_counts(&t.word)) {
                        acc = acc + symmetrized_words(e).scale_real(c);
                    }
                    acc.canonical()
                }
                SchemeKind::NcTorus => {
                    let (m1, m2) = mode_sum(&t.word);
                    GeneratorExpression::generator(Generator::Mode(m1, m2))
                }
            };
            out = out + &head * &body;
        }
        Ok(out.canonical())
    }

    /// `Q_hbar(expr)` at a level. Coefficient functions are not part of the
    /// classical algebra; use [`Self::quantize_weighted`] for those.
    pub fn quantize(&self, expr: &GeneratorExpression, level: usize) -> Result<FiberElement> {
        if expr.has_weights() {
            return Err(Error::Unsupported(
                "quantize takes constant-coefficient expressions".into(),
            ));
        }
        self.quantize_weighted(expr, level, 0)
    }

    /// `Q_hbar(expr)` at a level, reading coefficient functions at `sample`.
    pub fn quantize_weighted(
        &self,
        expr: &GeneratorExpression,
        level: usize,
        sample: usize,
    ) -> Result<FiberElement> {
        self.check_labels(expr)?;
        if level >= self.levels.len() {
            return Err(Error::OutOfRange(format!("level {level}")));
        }
        let n = self.levels[level].dim;
        let mut acc = DMatrix::<C64>::zeros(n, n);
        for t in expr.terms() {
            let c = t.coeff_at(sample);
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let m = self.quantize_word(&t.word, level);
            acc += m.map(|z| z * c);
        }
        FiberElement::from_matrix(acc)
    }

    /// `Q_hbar` of a single classical monomial.
    pub fn quantize_word(&self, word: &[Generator], level: usize) -> DMatrix<C64> {
        match self.kind {
            SchemeKind::FuzzySphere => {
                let counts = coord_counts(word);
                let mut cache = self.sym[level].lock().unwrap_or_else(|e| e.into_inner());
                cache.quantize_monomial(&self.spin[level], counts)
            }
            SchemeKind::NcTorus => {
                let (m1, m2) = mode_sum(word);
                torus::weyl_mode(self.levels[level].dim, m1, m2)
            }
        }
    }

    /// Polynomial degree (sphere) or largest mode component (torus) above
    /// which quantization at `level` is no longer injective.
    pub fn degree_cap(&self, level: usize) -> usize {
        let l = &self.levels[level];
        match self.kind {
            SchemeKind::FuzzySphere => l.dim - 1,
            SchemeKind::NcTorus => (l.dim - 1) / 2,
        }
    }

    /// Classical symbol sampled on the phase-space grid.
    pub fn classical_symbol(&self, expr: &GeneratorExpression) -> Result<Vec<C64>> {
        self.check_labels(expr)?;
        self.grid.eval(expr)
    }

    pub fn symbol_sup_norm(&self, expr: &GeneratorExpression) -> Result<f64> {
        self.check_labels(expr)?;
        self.grid.sup_norm(expr)
    }

    /// Classical monomials up to `degree` in the registered generators:
    /// sphere monomials `x^k` with `|k| <= degree`, torus modes with
    /// `|m_i| <= degree`.
    pub fn monomials(&self, degree: usize) -> Vec<Word> {
        match self.kind {
            SchemeKind::FuzzySphere => {
                let mut out = Vec::new();
                for d in 0..=degree {
                    for a in 0..=d {
                        for b in 0..=(d - a) {
                            let c = d - a - b;
                            let mut w = vec![Generator::Coord(0); a];
                            w.extend(std::iter::repeat_n(Generator::Coord(1), b));
                            w.extend(std::iter::repeat_n(Generator::Coord(2), c));
                            out.push(w);
                        }
                    }
                }
                out
            }
            SchemeKind::NcTorus => {
                let d = degree as i32;
                let mut out = Vec::new();
                for m1 in -d..=d {
                    for m2 in -d..=d {
                        out.push(if (m1, m2) == (0, 0) {
                            Vec::new()
                        } else {
                            vec![Generator::Mode(m1, m2)]
                        });
                    }
                }
                out
            }
        }
    }
}

fn coord_counts(word: &[Generator]) -> [u16; 3] {
    let mut counts = [0u16; 3];
    for g in word {
        if let Generator::Coord(a) = g {
            counts[*a as usize] += 1;
        }
    }
    counts
}

fn mode_sum(word: &[Generator]) -> (i32, i32) {
    word.iter().fold((0, 0), |acc, g| match g {
        Generator::Mode(a, b) => (acc.0 + a, acc.1 + b),
        Generator::Coord(_) => acc,
    })
}

/// Average of all distinct orderings of `x1^k1 x2^k2 x3^k3`.
fn symmetrized_words(counts: [u16; 3]) -> GeneratorExpression {
    let total: u16 = counts.iter().sum();
    if total == 0 {
        return GeneratorExpression::one();
    }
    let mut acc = GeneratorExpression::zero();
    for a in 0..3 {
        if counts[a] == 0 {
            continue;
        }
        let mut rest = counts;
        rest[a] -= 1;
        let w = counts[a] as f64 / total as f64;
        let head = GeneratorExpression::generator(Generator::Coord(a as u8)).scale_real(w);
        acc = acc + &head * &symmetrized_words(rest);
    }
    acc.canonical()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::scaled_bracket;
    use crate::expr::parse_expression;

    fn e(s: &str) -> GeneratorExpression {
        parse_expression(s).unwrap()
    }

    fn half_steps(max: f64) -> Vec<f64> {
        (1..=(2.0 * max) as usize).map(|k| k as f64 / 2.0).collect()
    }

    #[test]
    fn sphere_examples() {
        let s = fuzzy_sphere_scheme(&[0.5, 1.0, 1.5, 2.0, 5.0]).unwrap();
        let q3 = s.quantize(&e("x3"), 0).unwrap();
        let r3 = 1.0 / 3f64.sqrt();
        assert!((q3.matrix()[(0, 0)].re - r3).abs() < 1e-15);
        assert!((q3.matrix()[(1, 1)].re + r3).abs() < 1e-15);
        let sq = s.quantize(&e("x3*x3"), 0).unwrap();
        assert!((sq - FiberElement::identity(2).scale_real(1.0 / 3.0)).operator_norm() < 1e-15);
        for level in 0..s.len() {
            let cas = s.quantize(&e("x1*x1 + x2*x2 + x3*x3"), level).unwrap();
            assert!((cas - FiberElement::identity(s.fiber_dim(level))).operator_norm() < 1e-12);
            let q1 = s.quantize(&e("x1"), level).unwrap();
            let q2 = s.quantize(&e("x2"), level).unwrap();
            let lhs = scaled_bracket(&q1, &q2, s.hbar(level)).unwrap();
            let rhs = s.quantize(&e("-x3"), level).unwrap();
            assert!((lhs - rhs).operator_norm() < 1e-12);
        }
    }

    #[test]
    fn sphere_rejects_bad_spins() {
        assert!(fuzzy_sphere_scheme(&[0.3]).is_err());
        assert!(fuzzy_sphere_scheme(&[1.0, 0.5]).is_err());
        assert!(fuzzy_sphere_scheme(&[0.0]).is_err());
    }

    #[test]
    fn sphere_bracket_orientation() {
        let s = fuzzy_sphere_scheme(&[1.0]).unwrap();
        let b = s.letter_bracket(Generator::Coord(0), Generator::Coord(1)).unwrap();
        assert!(b.approx_eq(&e("-x3"), 0.0));
        let b = s.letter_bracket(Generator::Coord(2), Generator::Coord(1)).unwrap();
        assert!(b.approx_eq(&e("x1"), 0.0));
        let b = s.letter_bracket(Generator::Coord(2), Generator::Coord(0)).unwrap();
        assert!(b.approx_eq(&e("-x2"), 0.0));
        assert!(matches!(
            s.letter_bracket(Generator::Coord(0), Generator::Mode(1, 0)),
            Err(Error::MissingBracket(..))
        ));
    }

    #[test]
    fn torus_examples() {
        let t = nc_torus_scheme(&[2, 10, 16]).unwrap();
        let u = t.quantize(&e("u"), 0).unwrap();
        let v = t.quantize(&e("v"), 0).unwrap();
        assert!((&u * &v + &v * &u).operator_norm() < 1e-15);
        for level in 0..t.len() {
            for m in [(1, 0), (3, -2), (-1, 5)] {
                let w = FiberElement::from_matrix(torus::weyl_mode(t.fiber_dim(level), m.0, m.1)).unwrap();
                assert!((w.operator_norm() - 1.0).abs() < 1e-12);
                assert!(w.unitarity_defect() < 1e-12);
            }
        }
        let u = t.quantize(&e("u"), 1).unwrap();
        let v = t.quantize(&e("v"), 1).unwrap();
        let lhs = scaled_bracket(&u, &v, t.hbar(1)).unwrap();
        let rhs = t.quantize(&t.poisson_bracket(&e("u"), &e("v")).unwrap(), 1).unwrap();
        let target = (2.0 * std::f64::consts::PI - 20.0 * (std::f64::consts::PI / 10.0).sin()).abs();
        assert!(((lhs - rhs).operator_norm() - target).abs() < 1e-12);
        assert!(nc_torus_scheme(&[1]).is_err());
    }

    #[test]
    fn quantize_is_linear_and_unital() {
        let s = fuzzy_sphere_scheme(&half_steps(3.0)).unwrap();
        for level in 0..s.len() {
            let one = s.quantize(&GeneratorExpression::one(), level).unwrap();
            assert_eq!(one, FiberElement::identity(s.fiber_dim(level)));
            let a = e("x1*x2 + 0.5i*x3");
            let b = e("x3*x3*x1 - 2");
            let lhs = s.quantize(&(a.scale_real(2.0) + b.clone()), level).unwrap();
            let rhs = s.quantize(&a, level).unwrap().scale_real(2.0) + s.quantize(&b, level).unwrap();
            assert!((lhs - rhs).operator_norm() < 1e-12);
        }
        assert!(matches!(s.quantize(&e("u"), 0), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn section_expr_matches_quantize() {
        let s = fuzzy_sphere_scheme(&[1.0, 2.5]).unwrap();
        let a = e("x1*x2*x3 + x3*x1 - x2*x2");
        let sec = s.quantized_section_expr(&a).unwrap();
        for level in 0..s.len() {
            let mut direct = DMatrix::<C64>::zeros(s.fiber_dim(level), s.fiber_dim(level));
            for t in sec.terms() {
                let mut m = DMatrix::<C64>::identity(s.fiber_dim(level), s.fiber_dim(level));
                for &g in &t.word {
                    m *= s.letter_matrix(level, g).unwrap();
                }
                direct += m.map(|z| z * t.coeff);
            }
            let q = s.quantize(&a, level).unwrap();
            assert!((q.matrix() - direct).norm() < 1e-13);
        }
    }
}
