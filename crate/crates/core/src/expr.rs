//! Generator expressions: finite linear combinations of words in generator
//! labels, with complex coefficients and optional coefficient functions
//! sampled on the base grid.
//!
//! The same expression is read two ways. As a *section* it is a
//! noncommutative polynomial in the generator sections, evaluated by plain
//! matrix products. As a *classical* polynomial (commutative) it is what a
//! quantization scheme quantizes and what the classical symbol evaluates.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rand::Rng;

use crate::algebra::C64;
use crate::base_space::SampledBaseSpace;
use crate::error::{Error, Result};

/// A generator label. `Coord(a)` is the coordinate `x_{a+1}` of the fuzzy
/// sphere; `Mode(m1, m2)` the Fourier mode `e_m` of the torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Generator {
    Coord(u8),
    Mode(i32, i32),
}

impl Generator {
    /// Formal adjoint: coordinates are self-adjoint, `e_m* = e_{-m}`.
    pub fn adjoint(self) -> Self {
        match self {
            Generator::Coord(a) => Generator::Coord(a),
            Generator::Mode(a, b) => Generator::Mode(-a, -b),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Generator::Coord(a) => format!("x{}", a + 1),
            Generator::Mode(1, 0) => "u".into(),
            Generator::Mode(0, 1) => "v".into(),
            Generator::Mode(-1, 0) => "u'".into(),
            Generator::Mode(0, -1) => "v'".into(),
            Generator::Mode(a, b) => format!("e({a},{b})"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (base, adj) = match s.strip_suffix('\'') {
            Some(b) => (b, true),
            None => (s, false),
        };
        let g = match base {
            "x1" => Generator::Coord(0),
            "x2" => Generator::Coord(1),
            "x3" => Generator::Coord(2),
            "u" => Generator::Mode(1, 0),
            "v" => Generator::Mode(0, 1),
            _ => {
                let inner = base
                    .strip_prefix("e(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::UnknownLabel(s.to_string()))?;
                let mut parts = inner.split(',');
                let m1 = parts.next().and_then(|p| p.trim().parse().ok());
                let m2 = parts.next().and_then(|p| p.trim().parse().ok());
                match (m1, m2, parts.next()) {
                    (Some(a), Some(b), None) => Generator::Mode(a, b),
                    _ => return Err(Error::UnknownLabel(s.to_string())),
                }
            }
        };
        Ok(if adj { g.adjoint() } else { g })
    }
}

pub type Word = Vec<Generator>;

pub fn word_label(w: &[Generator]) -> String {
    if w.is_empty() {
        "1".into()
    } else {
        w.iter().map(|g| g.label()).collect::<Vec<_>>().join("*")
    }
}

/// All words of length `0..=max_len` over `letters`, shortest first.
pub fn words_up_to(letters: &[Generator], max_len: usize) -> Vec<Word> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Word> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * letters.len());
        for w in &layer {
            for &g in letters {
                let mut w2 = w.clone();
                w2.push(g);
                next.push(w2);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// A scalar function sampled on the base grid, with its value at the limit
/// point when known.
#[derive(Clone, Debug)]
pub struct SampledFn {
    values: Arc<Vec<C64>>,
    limit: Option<C64>,
}

impl PartialEq for SampledFn {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.values, &other.values) || self.values == other.values)
            && self.limit == other.limit
    }
}

impl SampledFn {
    pub fn new(values: Vec<C64>, limit: Option<C64>) -> Self {
        Self {
            values: Arc::new(values),
            limit,
        }
    }

    /// Samples `f` at the base points; the limit value is `f(0)` when finite.
    pub fn from_fn(base: &SampledBaseSpace, f: impl Fn(f64) -> C64) -> Self {
        let values = base.points().iter().map(|&h| f(h)).collect();
        let l = f(0.0);
        let limit = (l.re.is_finite() && l.im.is_finite()).then_some(l);
        Self::new(values, limit)
    }

    pub fn from_real_fn(base: &SampledBaseSpace, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(base, |h| C64::new(f(h), 0.0))
    }

    /// Samples `f` at the distances `|hbar|_I` rather than the raw values.
    pub fn from_distance_fn(base: &SampledBaseSpace, f: impl Fn(f64) -> C64) -> Self {
        let values = base.limit_distances().into_iter().map(&f).collect();
        let l = f(0.0);
        let limit = (l.re.is_finite() && l.im.is_finite()).then_some(l);
        Self::new(values, limit)
    }

    pub fn constant(len: usize, c: C64) -> Self {
        Self::new(vec![c; len], Some(c))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> C64 {
        self.values[k]
    }

    pub fn limit(&self) -> Option<C64> {
        self.limit
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "sampled functions on different grids");
        let values = self.values.iter().zip(other.values.iter()).map(|(a, b)| a * b).collect();
        let limit = self.limit.zip(other.limit).map(|(a, b)| a * b);
        Self::new(values, limit)
    }

    pub fn conj(&self) -> Self {
        Self::new(
            self.values.iter().map(|z| z.conj()).collect(),
            self.limit.map(|z| z.conj()),
        )
    }

    /// `new[k] = old[map[k]]`.
    pub fn pullback(&self, map: &[usize]) -> Self {
        Self::new(map.iter().map(|&k| self.values[k]).collect(), self.limit)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: C64,
    pub weight: Option<SampledFn>,
    pub word: Word,
}

impl Term {
    /// Coefficient at sample `k`.
    pub fn coeff_at(&self, k: usize) -> C64 {
        match &self.weight {
            Some(w) => self.coeff * w.value(k),
            None => self.coeff,
        }
    }

    /// Coefficient at the limit point.
    pub fn coeff_at_limit(&self) -> Result<C64> {
        match &self.weight {
            Some(w) => w.limit().map(|l| self.coeff * l).ok_or(Error::MissingLimitValue),
            None => Ok(self.coeff),
        }
    }

    fn mul(&self, other: &Term) -> Term {
        let weight = match (&self.weight, &other.weight) {
            (None, None) => None,
            (Some(w), None) | (None, Some(w)) => Some(w.clone()),
            (Some(a), Some(b)) => Some(a.mul(b)),
        };
        let mut word = self.word.clone();
        word.extend_from_slice(&other.word);
        Term {
            coeff: self.coeff * other.coeff,
            weight,
            word,
        }
    }
}

/// Finite linear combination of generator words.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GeneratorExpression {
    terms: Vec<Term>,
}

impl GeneratorExpression {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::scalar(C64::new(1.0, 0.0))
    }

    pub fn scalar(c: C64) -> Self {
        Self::word_with(c, Vec::new())
    }

    pub fn real(x: f64) -> Self {
        Self::scalar(C64::new(x, 0.0))
    }

    pub fn generator(g: Generator) -> Self {
        Self::word_with(C64::new(1.0, 0.0), vec![g])
    }

    pub fn word(w: Word) -> Self {
        Self::word_with(C64::new(1.0, 0.0), w)
    }

    pub fn word_with(coeff: C64, w: Word) -> Self {
        Self {
            terms: vec![Term {
                coeff,
                weight: None,
                word: w,
            }],
        }
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest word length.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.word.len()).max().unwrap_or(0)
    }

    pub fn letters(&self) -> Vec<Generator> {
        let mut v: Vec<Generator> = self.terms.iter().flat_map(|t| t.word.iter().copied()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Length of the grid the coefficient functions are sampled on, if any.
    pub fn grid_len(&self) -> Option<usize> {
        self.terms.iter().find_map(|t| t.weight.as_ref().map(|w| w.len()))
    }

    pub fn has_weights(&self) -> bool {
        self.terms.iter().any(|t| t.weight.is_some())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * c,
                    ..t.clone()
                })
                .collect(),
        }
    }

    pub fn scale_real(&self, x: f64) -> Self {
        self.scale(C64::new(x, 0.0))
    }

    /// Multiplies every term by the sampled function `f`.
    pub fn weighted(&self, f: &SampledFn) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff,
                    weight: Some(match &t.weight {
                        Some(w) => w.mul(f),
                        None => f.clone(),
                    }),
                    word: t.word.clone(),
                })
                .collect(),
        }
    }

    /// Reverses words, adjoins letters, conjugates coefficients.
    pub fn adjoint(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff.conj(),
                    weight: t.weight.as_ref().map(|w| w.conj()),
                    word: t.word.iter().rev().map(|g| g.adjoint()).collect(),
                })
                .collect(),
        }
    }

    /// Merges like terms (same word, same weight), normalizes the torus unit
    /// mode `e_(0,0)` away, drops exact zeros, and sorts.
    pub fn canonical(&self) -> Self {
        let mut merged: Vec<Term> = Vec::new();
        for t in &self.terms {
            let word: Word = t
                .word
                .iter()
                .copied()
                .filter(|g| *g != Generator::Mode(0, 0))
                .collect();
            if let Some(m) = merged
                .iter_mut()
                .find(|m| m.word == word && m.weight == t.weight)
            {
                m.coeff += t.coeff;
            } else {
                merged.push(Term {
                    coeff: t.coeff,
                    weight: t.weight.clone(),
                    word,
                });
            }
        }
        merged.retain(|t| t.coeff != C64::new(0.0, 0.0));
        merged.sort_by(|a, b| {
            (a.word.len(), &a.word)
                .cmp(&(b.word.len(), &b.word))
                .then(a.weight.is_some().cmp(&b.weight.is_some()))
        });
        Self { terms: merged }
    }

    /// Structural equality up to `tol` on coefficients.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self - other)
            .canonical()
            .terms
            .iter()
            .all(|t| t.coeff.norm() * t.weight.as_ref().map_or(1.0, |w| w.sup_abs()) <= tol)
    }

    /// Replaces every letter by an expression and extends multiplicatively.
    pub fn substitute(&self, f: &dyn Fn(Generator) -> GeneratorExpression) -> Self {
        let mut out = Self::zero();
        for t in &self.terms {
            let mut acc = Self {
                terms: vec![Term {
                    coeff: t.coeff,
                    weight: t.weight.clone(),
                    word: Vec::new(),
                }],
            };
            for &g in &t.word {
                acc = &acc * &f(g);
            }
            out = out + acc;
        }
        out
    }

    /// Reindexes coefficient functions: `new[k] = old[map[k]]`.
    pub fn pullback(&self, map: &[usize]) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff,
                    weight: t.weight.as_ref().map(|w| w.pullback(map)),
                    word: t.word.clone(),
                })
                .collect(),
        }
    }

    /// Noncommutative bracket `[a, b]` computed letter by letter from a table
    /// of letter brackets, via the derivation rule
    /// `[A1..Ap, B1..Bq] = sum_{i,k} A<i B<k [Ai,Bk] B>k A>i`.
    pub fn bracket_with(
        &self,
        other: &Self,
        letter_bracket: &dyn Fn(Generator, Generator) -> GeneratorExpression,
    ) -> Self {
        let mut out = Self::zero();
        for s in &self.terms {
            for t in &other.terms {
                let lead = s.mul(&Term {
                    coeff: t.coeff,
                    weight: t.weight.clone(),
                    word: Vec::new(),
                });
                for i in 0..s.word.len() {
                    for k in 0..t.word.len() {
                        let c = letter_bracket(s.word[i], t.word[k]);
                        if c.is_empty() {
                            continue;
                        }
                        let mut prefix: Word = s.word[..i].to_vec();
                        prefix.extend_from_slice(&t.word[..k]);
                        let mut suffix: Word = t.word[k + 1..].to_vec();
                        suffix.extend_from_slice(&s.word[i + 1..]);
                        let head = Self {
                            terms: vec![Term {
                                coeff: lead.coeff,
                                weight: lead.weight.clone(),
                                word: prefix,
                            }],
                        };
                        out = out + &(&head * &c) * &Self::word(suffix);
                    }
                }
            }
        }
        out.canonical()
    }

    /// Groups a canonical expression by its commutative monomial (sorted word).
    pub fn commutative_monomials(&self) -> BTreeMap<Word, C64> {
        let mut map: BTreeMap<Word, C64> = BTreeMap::new();
        for t in &self.terms {
            let mut w = t.word.clone();
            w.sort();
            *map.entry(w).or_insert(C64::new(0.0, 0.0)) += t.coeff;
        }
        map
    }
}

impl fmt::Display for GeneratorExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            let c = t.coeff;
            let coeff = if c.im == 0.0 {
                format!("{}", c.re)
            } else {
                format!("({}{:+}i)", c.re, c.im)
            };
            let weight = if t.weight.is_some() { "f*" } else { "" };
            write!(f, "{coeff}*{weight}{}", word_label(&t.word))?;
        }
        Ok(())
    }
}

impl Add for GeneratorExpression {
    type Output = GeneratorExpression;
    fn add(mut self, rhs: GeneratorExpression) -> GeneratorExpression {
        self.terms.extend(rhs.terms);
        self
    }
}

impl Add for &GeneratorExpression {
    type Output = GeneratorExpression;
    fn add(self, rhs: &GeneratorExpression) -> GeneratorExpression {
        self.clone() + rhs.clone()
    }
}

impl Neg for &GeneratorExpression {
    type Output = GeneratorExpression;
    fn neg(self) -> GeneratorExpression {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Neg for GeneratorExpression {
    type Output = GeneratorExpression;
    fn neg(self) -> GeneratorExpression {
        -&self
    }
}

impl Sub for &GeneratorExpression {
    type Output = GeneratorExpression;
    fn sub(self, rhs: &GeneratorExpression) -> GeneratorExpression {
        self + &(-rhs)
    }
}

impl Sub for GeneratorExpression {
    type Output = GeneratorExpression;
    fn sub(self, rhs: GeneratorExpression) -> GeneratorExpression {
        &self - &rhs
    }
}

impl Mul for &GeneratorExpression {
    type Output = GeneratorExpression;
    fn mul(self, rhs: &GeneratorExpression) -> GeneratorExpression {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                terms.push(a.mul(b));
            }
        }
        GeneratorExpression { terms }
    }
}

impl Mul for GeneratorExpression {
    type Output = GeneratorExpression;
    fn mul(self, rhs: GeneratorExpression) -> GeneratorExpression {
        &self * &rhs
    }
}

/// Random expression with up to `n_terms` words of length `<= max_degree`
/// and coefficients drawn from the unit square.
pub fn random_expression<R: Rng + ?Sized>(
    rng: &mut R,
    letters: &[Generator],
    max_degree: usize,
    n_terms: usize,
) -> GeneratorExpression {
    let mut terms = Vec::with_capacity(n_terms);
    for _ in 0..n_terms.max(1) {
        let len = rng.gen_range(0..=max_degree);
        let word: Word = (0..len)
            .map(|_| letters[rng.gen_range(0..letters.len())])
            .collect();
        let coeff = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        terms.push(Term {
            coeff,
            weight: None,
            word,
        });
    }
    GeneratorExpression { terms }
}

/// Parses expressions like `2*x1*x2 - 0.5i*x3 + 1`, `u*v'`, `e(1,-2)`.
/// `'` marks the formal adjoint of a label.
pub fn parse_expression(src: &str) -> Result<GeneratorExpression> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.sum()?;
    if p.pos != p.tokens.len() {
        return Err(Error::Parse(format!("trailing input in `{src}`")));
    }
    Ok(e.canonical())
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(C64),
    Label(Generator),
    Plus,
    Minus,
    Star,
    Open,
    Close,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        match c {
            ' ' | '\t' => k += 1,
            '+' => {
                out.push(Tok::Plus);
                k += 1
            }
            '-' => {
                out.push(Tok::Minus);
                k += 1
            }
            '*' => {
                out.push(Tok::Star);
                k += 1
            }
            '(' => {
                out.push(Tok::Open);
                k += 1
            }
            ')' => {
                out.push(Tok::Close);
                k += 1
            }
            '0'..='9' | '.' => {
                let start = k;
                while k < chars.len()
                    && (chars[k].is_ascii_digit()
                        || chars[k] == '.'
                        || ((chars[k] == 'e' || chars[k] == 'E')
                            && k + 1 < chars.len()
                            && (chars[k + 1].is_ascii_digit() || chars[k + 1] == '-')))
                {
                    if chars[k] == 'e' || chars[k] == 'E' {
                        k += 1;
                    }
                    k += 1;
                }
                let s: String = chars[start..k].iter().collect();
                let x: f64 = s.parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
                if k < chars.len() && chars[k] == 'i' {
                    k += 1;
                    out.push(Tok::Num(C64::new(0.0, x)));
                } else {
                    out.push(Tok::Num(C64::new(x, 0.0)));
                }
            }
            'i' if !chars.get(k + 1).is_some_and(|c| c.is_alphanumeric()) => {
                out.push(Tok::Num(C64::new(0.0, 1.0)));
                k += 1;
            }
            'e' if chars.get(k + 1) == Some(&'(') => {
                let end = chars[k..]
                    .iter()
                    .position(|&c| c == ')')
                    .map(|p| p + k)
                    .ok_or_else(|| Error::Parse("unclosed mode label".into()))?;
                let mut stop = end + 1;
                if chars.get(stop) == Some(&'\'') {
                    stop += 1;
                }
                let s: String = chars[k..stop].iter().collect();
                out.push(Tok::Label(Generator::parse(&s)?));
                k = stop;
            }
            c if c.is_alphabetic() => {
                let start = k;
                while k < chars.len() && (chars[k].is_alphanumeric() || chars[k] == '\'') {
                    k += 1;
                }
                let s: String = chars[start..k].iter().collect();
                out.push(Tok::Label(Generator::parse(&s)?));
            }
            other => return Err(Error::Parse(format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn sum(&mut self) -> Result<GeneratorExpression> {
        let mut negate = false;
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            negate = true;
        }
        let first = self.product()?;
        let mut acc = if negate { -first } else { first };
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = acc + self.product()?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = acc - self.product()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<GeneratorExpression> {
        let mut acc = self.factor()?;
        while self.peek() == Some(&Tok::Star) {
            self.pos += 1;
            acc = &acc * &self.factor()?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<GeneratorExpression> {
        match self.tokens.get(self.pos).cloned() {
            Some(Tok::Num(z)) => {
                self.pos += 1;
                Ok(GeneratorExpression::scalar(z))
            }
            Some(Tok::Label(g)) => {
                self.pos += 1;
                Ok(GeneratorExpression::generator(g))
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let e = self.sum()?;
                if self.peek() != Some(&Tok::Close) {
                    return Err(Error::Parse("missing `)`".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}
