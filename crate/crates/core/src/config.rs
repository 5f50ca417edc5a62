//! Experiment configuration: a single JSON document naming a scheme, its
//! sizes, an optional base grid, tail tolerances, morphisms and the checks
//! to run.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::base_space::{make_geometric_grid, BaseMap, SampledBaseSpace};
use crate::convergence::TailConfig;
use crate::error::{Error, Result};
use crate::expr::{parse_expression, GeneratorExpression};
use crate::functors::LetterMap;
use crate::quantization::{fuzzy_sphere_scheme_with, nc_torus_scheme, QuantizationScheme, SphereHbar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub tail: TailConfig,
    #[serde(default)]
    pub morphisms: Vec<MorphismSpec>,
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeConfig {
    /// Spins `j` (half-integers).
    FuzzySphere {
        sizes: Vec<f64>,
        #[serde(default)]
        hbar: SphereHbarConfig,
    },
    /// Matrix sizes `N`.
    NcTorus { sizes: Vec<usize> },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereHbarConfig {
    #[default]
    Casimir,
    InverseSpin,
}

/// Geometric grid `hbar_max * ratio^k`, `k < count`; source of base maps
/// given as power series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub hbar_max: f64,
    pub ratio: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphismSpec {
    pub name: String,
    #[serde(default)]
    pub alpha: AlphaSpec,
    #[serde(default)]
    pub beta: BetaSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSpec {
    #[default]
    Identity,
    /// `alpha(hbar) = sum_k c_k hbar^(k+1)`.
    PowerSeries { coefficients: Vec<f64> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaSpec {
    #[default]
    Identity,
    /// Images of `x1, x2, x3`.
    Coords { images: [String; 3] },
    /// Integer matrix acting on mode labels.
    Modes { matrix: [[i32; 2]; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
}

fn default_out_dir() -> String {
    "qlimit-out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out_dir() }
    }
}

fn default_pairs() -> usize {
    50
}
fn default_degree() -> usize {
    2
}
fn default_trials() -> usize {
    8
}
fn default_times() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}
fn default_cases() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckKind {
    /// `||(i/hbar)[Q a, Q b] - Q{a,b}||`; pass on exactness or slope.
    Dirac {
        a: String,
        b: String,
        #[serde(default)]
        slope_min: Option<f64>,
        /// expected residual at the largest size, checked within `tol`
        #[serde(default)]
        expect_last: Option<f64>,
        #[serde(default)]
        tol: Option<f64>,
    },
    /// `||Q a Q b - Q(ab)||`.
    VonNeumann {
        a: String,
        b: String,
        #[serde(default)]
        slope_min: Option<f64>,
    },
    /// Norm profile of `Q a` against the classical sup norm.
    Rieffel { a: String },
    /// Limiting norm of the section of the expression.
    LimitingNorm {
        expr: String,
        #[serde(default)]
        expect: Option<f64>,
        #[serde(default)]
        tol: Option<f64>,
    },
    /// Random pairs commute at the limit.
    Commutativity {
        #[serde(default = "default_pairs")]
        pairs: usize,
        #[serde(default = "default_degree")]
        max_degree: usize,
        #[serde(default)]
        tol: Option<f64>,
    },
    /// Fullness, completeness and continuity of the extended bundle.
    Axioms {
        #[serde(default = "default_trials")]
        trials: usize,
    },
    /// Quotient norm against classical sup norm.
    Uniqueness {
        #[serde(default)]
        exprs: Vec<String>,
        #[serde(default)]
        random: usize,
        #[serde(default)]
        tol: Option<f64>,
    },
    IdealLaws {
        #[serde(default = "default_cases")]
        cases: usize,
    },
    PostQuantization {
        #[serde(default = "default_trials")]
        pairs: usize,
    },
    BracketLaws {
        #[serde(default)]
        tol: Option<f64>,
    },
    Dynamics {
        hamiltonian: String,
        generators: Vec<String>,
        #[serde(default = "default_times")]
        times: Vec<f64>,
    },
    /// Second-order constant of a morphism's base map.
    SecondOrder {
        morphism: String,
        #[serde(default)]
        expect: Option<f64>,
        #[serde(default)]
        tol: Option<f64>,
    },
    /// Compatibility battery and fiber-map audit of a morphism.
    Morphism {
        morphism: String,
        #[serde(default = "default_trials")]
        trials: usize,
    },
    PoissonFunctoriality {
        morphism: String,
        #[serde(default)]
        tol: Option<f64>,
    },
    FunctorLaws {
        #[serde(default = "default_cases")]
        cases: usize,
    },
}

impl CheckKind {
    pub fn tag(&self) -> &'static str {
        match self {
            CheckKind::Dirac { .. } => "dirac",
            CheckKind::VonNeumann { .. } => "von_neumann",
            CheckKind::Rieffel { .. } => "rieffel",
            CheckKind::LimitingNorm { .. } => "limiting_norm",
            CheckKind::Commutativity { .. } => "commutativity",
            CheckKind::Axioms { .. } => "axioms",
            CheckKind::Uniqueness { .. } => "uniqueness",
            CheckKind::IdealLaws { .. } => "ideal_laws",
            CheckKind::PostQuantization { .. } => "post_quantization",
            CheckKind::BracketLaws { .. } => "bracket_laws",
            CheckKind::Dynamics { .. } => "dynamics",
            CheckKind::SecondOrder { .. } => "second_order",
            CheckKind::Morphism { .. } => "morphism",
            CheckKind::PoissonFunctoriality { .. } => "poisson_functoriality",
            CheckKind::FunctorLaws { .. } => "functor_laws",
        }
    }

    fn expressions(&self) -> Vec<&str> {
        match self {
            CheckKind::Dirac { a, b, .. } | CheckKind::VonNeumann { a, b, .. } => vec![a, b],
            CheckKind::Rieffel { a } => vec![a],
            CheckKind::LimitingNorm { expr, .. } => vec![expr],
            CheckKind::Uniqueness { exprs, .. } => exprs.iter().map(String::as_str).collect(),
            CheckKind::Dynamics {
                hamiltonian,
                generators,
                ..
            } => std::iter::once(hamiltonian.as_str())
                .chain(generators.iter().map(String::as_str))
                .collect(),
            _ => vec![],
        }
    }

    fn tolerances(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            CheckKind::Dirac { slope_min, tol, .. } => out.extend(slope_min.iter().chain(tol)),
            CheckKind::VonNeumann { slope_min, .. } => out.extend(slope_min),
            CheckKind::LimitingNorm { tol, .. }
            | CheckKind::Commutativity { tol, .. }
            | CheckKind::Uniqueness { tol, .. }
            | CheckKind::BracketLaws { tol }
            | CheckKind::SecondOrder { tol, .. }
            | CheckKind::PoissonFunctoriality { tol, .. } => out.extend(tol),
            _ => {}
        }
        out.into_iter().copied().collect()
    }

    fn morphism(&self) -> Option<&str> {
        match self {
            CheckKind::SecondOrder { morphism, .. }
            | CheckKind::Morphism { morphism, .. }
            | CheckKind::PoissonFunctoriality { morphism, .. } => Some(morphism),
            _ => None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn build_scheme(&self) -> Result<QuantizationScheme> {
        match &self.scheme {
            SchemeConfig::FuzzySphere { sizes, hbar } => {
                let h = match hbar {
                    SphereHbarConfig::Casimir => SphereHbar::Casimir,
                    SphereHbarConfig::InverseSpin => SphereHbar::InverseSpin,
                };
                fuzzy_sphere_scheme_with(sizes, h)
            }
            SchemeConfig::NcTorus { sizes } => nc_torus_scheme(sizes),
        }
    }

    pub fn grid_space(&self) -> Result<Option<SampledBaseSpace>> {
        self.grid
            .as_ref()
            .map(|g| make_geometric_grid(g.hbar_max, g.ratio, g.count))
            .transpose()
    }

    pub fn morphism(&self, name: &str) -> Result<&MorphismSpec> {
        self.morphisms
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::Config(format!("unknown morphism `{name}`")))
    }

    /// Parses, checks labels against the scheme, checks tolerances and
    /// morphism references.
    pub fn validate(&self) -> Result<()> {
        let config = |e: Error| Error::Config(e.to_string());
        let scheme = self.build_scheme().map_err(config)?;
        if let Some(g) = &self.grid {
            make_geometric_grid(g.hbar_max, g.ratio, g.count).map_err(config)?;
        }
        let t = &self.tail;
        if !(t.thin_ratio > 1.0 && t.cauchy_tol > 0.0 && t.null_tol > 0.0 && t.zero_tol > 0.0 && t.slope_min > 0.0)
        {
            return Err(Error::Config("tail tolerances must be positive".into()));
        }
        let mut names = BTreeSet::new();
        for m in &self.morphisms {
            if !names.insert(m.name.as_str()) {
                return Err(Error::Config(format!("duplicate morphism `{}`", m.name)));
            }
            let beta = beta_map(&m.beta).map_err(config)?;
            if let LetterMap::Coords(images) = &beta {
                for e in images {
                    scheme.check_labels(e).map_err(config)?;
                }
            }
            if let AlphaSpec::PowerSeries { coefficients } = &m.alpha {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config(format!("morphism `{}`: bad coefficients", m.name)));
                }
            }
        }
        if self.checks.is_empty() {
            return Err(Error::Config("no checks".into()));
        }
        for c in &self.checks {
            for e in c.expressions() {
                let expr = parse_expression(e).map_err(config)?;
                scheme.check_labels(&expr).map_err(config)?;
            }
            if c.tolerances().iter().any(|t| !(*t > 0.0)) {
                return Err(Error::Config(format!("{}: tolerances must be positive", c.tag())));
            }
            if let Some(m) = c.morphism() {
                self.morphism(m)?;
            }
            if let CheckKind::Dynamics { times, .. } = c {
                if times.iter().any(|t| !t.is_finite()) {
                    return Err(Error::Config("dynamics: times must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

pub fn beta_map(spec: &BetaSpec) -> Result<LetterMap> {
    Ok(match spec {
        BetaSpec::Identity => LetterMap::Identity,
        BetaSpec::Coords { images } => LetterMap::coords([
            parse_expression(&images[0])?,
            parse_expression(&images[1])?,
            parse_expression(&images[2])?,
        ]),
        BetaSpec::Modes { matrix } => LetterMap::modes(*matrix),
    })
}

/// The base map of a spec on `source`: identity, or the power series onto
/// its exact image grid.
pub fn alpha_map(spec: &AlphaSpec, source: &SampledBaseSpace) -> Result<BaseMap> {
    match spec {
        AlphaSpec::Identity => Ok(BaseMap::identity(source)),
        AlphaSpec::PowerSeries { coefficients } => {
            let c = coefficients.clone();
            BaseMap::image_grid(source, move |h| {
                c.iter().rev().fold(0.0, |acc, ck| (acc + ck) * h)
            })
        }
    }
}

/// Expressions of a check, parsed.
pub fn parse_all(exprs: &[String]) -> Result<Vec<GeneratorExpression>> {
    exprs.iter().map(|e| parse_expression(e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_sphere_config() {
        let c = ExperimentConfig::from_json(
            r#"{"scheme": {"kind": "fuzzy_sphere", "sizes": [0.5, 1, 1.5]},
                "checks": [{"check": "dirac", "a": "x1", "b": "x2"}]}"#,
        )
        .unwrap();
        assert_eq!(c.checks[0].tag(), "dirac");
        assert_eq!(c.output.dir, "qlimit-out");
        assert_eq!(c.tail, TailConfig::default());
    }

    #[test]
    fn rejects_unknown_labels_and_bad_tolerances() {
        let bad = [
            r#"{"scheme": {"kind": "fuzzy_sphere", "sizes": [1]}, "checks": [{"check": "dirac", "a": "x4", "b": "x2"}]}"#,
            r#"{"scheme": {"kind": "nc_torus", "sizes": [4]}, "checks": [{"check": "rieffel", "a": "x1"}]}"#,
            r#"{"scheme": {"kind": "nc_torus", "sizes": [4]}, "checks": [{"check": "commutativity", "tol": -1}]}"#,
            r#"{"scheme": {"kind": "nc_torus", "sizes": [4]}, "checks": [{"check": "second_order", "morphism": "m"}]}"#,
            r#"{"scheme": {"kind": "nc_torus", "sizes": [4]}, "checks": [{"check": "nope"}]}"#,
            r#"{"scheme": {"kind": "nc_torus", "sizes": [4]}, "checks": []}"#,
        ];
        for b in bad {
            assert!(matches!(ExperimentConfig::from_json(b), Err(Error::Config(_))), "{b}");
        }
    }

    #[test]
    fn power_series_alpha() {
        let g = make_geometric_grid(0.5, 0.5, 4).unwrap();
        let a = alpha_map(&AlphaSpec::PowerSeries { coefficients: vec![1.0, -0.5] }, &g).unwrap();
        let v = a.exact_values().unwrap();
        assert!((v[0] - (0.5 - 0.125)).abs() < 1e-15);
    }
}
