//! Config-driven runner: executes the checks of an [`ExperimentConfig`],
//! writes one CSV per convergence table and a JSON summary.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{check_axioms, norm_function, Bundle, Section};
use crate::config::{alpha_map, beta_map, parse_all, AlphaSpec, CheckKind, ExperimentConfig, MorphismSpec};
use crate::convergence::{ConvergenceReport, LimitEstimate, LimitMethod, TailConfig};
use crate::error::{Error, Result};
use crate::expr::{parse_expression, GeneratorExpression};
use crate::functors::{
    audit_fiber_maps, check_bracket_laws, check_dynamics_lift, check_functor_laws, check_poisson_functoriality,
    check_post_quantization, is_second_order_with, limit_dynamics, make_morphism, BundleMorphism,
    ClassicalFlowConfig, DynamicalBundleData, PostQuantizationData,
};
use crate::limit::{check_ideal_laws, check_limit_commutativity, check_uniqueness, extend_to_limit, limit_fiber, limiting_norm, LimitFiber};
use crate::quantization::{check_dirac, check_rieffel, check_von_neumann, QuantizationScheme};

pub const SUMMARY_SCHEMA: &str = "qlimit-summary/1";

/// A reported number with its error bound and how it was obtained.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantity {
    pub value: f64,
    pub error_bound: f64,
    pub method: String,
}

impl Quantity {
    fn new(value: f64, error_bound: f64, method: &str) -> Self {
        Self {
            value,
            error_bound,
            method: method.into(),
        }
    }

    fn exact(value: f64) -> Self {
        Self::new(value, 0.0, "exact")
    }

    fn count(n: usize) -> Self {
        Self::new(n as f64, 0.0, "count")
    }

    fn grid_max(v: f64) -> Self {
        Self::new(v, 0.0, "max_over_grid")
    }

    fn estimate(e: &LimitEstimate) -> Self {
        let m = match e.method {
            LimitMethod::CauchyTail => "cauchy_tail",
            LimitMethod::Richardson => "richardson",
        };
        Self::new(e.value, e.error_bound, m)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckSummary {
    pub index: usize,
    pub check: String,
    pub pass: bool,
    pub metrics: BTreeMap<String, Quantity>,
    pub tables: Vec<String>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub schema: String,
    pub scheme: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<CheckSummary>,
}

/// Exit status of a run: 0 all checks pass, 1 a check failed, 2 config error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    CheckFailure = 1,
    ConfigError = 2,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

struct Context {
    cfg: ExperimentConfig,
    scheme: Arc<QuantizationScheme>,
    bundle: Arc<Bundle>,
    extended: Arc<Bundle>,
}

impl Context {
    fn tail(&self) -> &TailConfig {
        &self.cfg.tail
    }

    fn fiber(&self) -> Result<LimitFiber> {
        limit_fiber(&self.extended, self.tail())
    }

    fn expr(&self, s: &str) -> Result<GeneratorExpression> {
        parse_expression(s)
    }

    /// The morphism of a spec with source the configured bundle; a power
    /// series base map lands on the bundle re-based on its image grid.
    fn morphism(&self, spec: &MorphismSpec) -> Result<BundleMorphism> {
        let alpha = alpha_map(&spec.alpha, self.bundle.base())?;
        let target = match spec.alpha {
            AlphaSpec::Identity => self.bundle.clone(),
            AlphaSpec::PowerSeries { .. } => self.bundle.with_base(alpha.target().clone())?,
        };
        make_morphism(alpha, beta_map(&spec.beta)?, &self.bundle, &target)
    }
}

#[derive(Default)]
struct CheckOutput {
    pass: bool,
    metrics: BTreeMap<String, Quantity>,
    tables: Vec<ConvergenceReport>,
}

impl CheckOutput {
    fn metric(&mut self, k: impl Into<String>, q: Quantity) {
        self.metrics.insert(k.into(), q);
    }

    fn table(&mut self, prefix: &str, r: ConvergenceReport) {
        self.metric(format!("{prefix}max_residual"), Quantity::grid_max(r.max_residual()));
        if let Some(s) = r.slope {
            self.metric(format!("{prefix}slope"), Quantity::new(s, r.slope_stderr.unwrap_or(0.0), "loglog_fit"));
        }
        self.tables.push(r);
    }
}

fn report_from_pairs(name: String, rows: &[(f64, f64)], reference: f64, tail: &TailConfig) -> ConvergenceReport {
    let h: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let v: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let res: Vec<f64> = v.iter().map(|x| (x - reference).abs()).collect();
    ConvergenceReport::from_samples(name, &h, &v, &res, tail)
}

fn run_check(ctx: &Context, kind: &CheckKind, seed: u64) -> Result<CheckOutput> {
    let mut out = CheckOutput::default();
    let tail = ctx.tail().clone();
    let s = &ctx.scheme;
    match kind {
        CheckKind::Dirac {
            a,
            b,
            slope_min,
            expect_last,
            tol,
        } => {
            let t = TailConfig {
                slope_min: slope_min.unwrap_or(tail.slope_min),
                ..tail
            };
            let r = check_dirac(s, &ctx.expr(a)?, &ctx.expr(b)?, &t)?;
            let mut pass = r.pass;
            if let Some(e) = expect_last {
                let last = r.rows.last().map(|row| row.residual).unwrap_or(f64::NAN);
                out.metric("last_residual", Quantity::exact(last));
                pass &= (last - e).abs() <= tol.unwrap_or(1e-6);
            }
            out.pass = pass;
            out.table("", r);
        }
        CheckKind::VonNeumann { a, b, slope_min } => {
            let t = TailConfig {
                slope_min: slope_min.unwrap_or(tail.slope_min),
                ..tail
            };
            let r = check_von_neumann(s, &ctx.expr(a)?, &ctx.expr(b)?, &t)?;
            out.pass = r.pass;
            out.table("", r);
        }
        CheckKind::Rieffel { a } => {
            let r = check_rieffel(s, &ctx.expr(a)?, &tail)?;
            out.pass = r.pass;
            out.metric("symbol_sup", Quantity::new(r.symbol_sup, 0.0, "quadrature"));
            if let Some(l) = &r.limit {
                out.metric("limit", Quantity::estimate(l));
            }
            out.table("", report_from_pairs(format!("rieffel[{a}]"), &r.norms, r.symbol_sup, &tail));
        }
        CheckKind::LimitingNorm { expr, expect, tol } => {
            let sec = Section::new(&ctx.extended, ctx.expr(expr)?)?;
            let est = limiting_norm(&sec, &tail)?;
            out.metric("limit", Quantity::estimate(&est));
            out.pass = match expect {
                Some(e) => (est.value - e).abs() <= tol.unwrap_or(2e-3) + est.error_bound,
                None => true,
            };
            let rows: Vec<(f64, f64)> = norm_function(&sec)?.into_iter().filter(|r| r.0 > 0.0).collect();
            out.table("", report_from_pairs(format!("limiting_norm[{expr}]"), &rows, est.value, &tail));
        }
        CheckKind::Commutativity { pairs, max_degree, tol } => {
            let r = check_limit_commutativity(&ctx.fiber()?, *pairs, *max_degree, tol.unwrap_or(1e-3), seed)?;
            let worst = r.entries.iter().map(|e| e.quotient_norm).fold(0.0, f64::max);
            out.metric("max_quotient_norm", Quantity::new(worst, 0.0, "cauchy_tail"));
            out.metric("failures", Quantity::count(r.entries.iter().filter(|e| !e.pass).count()));
            out.pass = r.pass;
        }
        CheckKind::Axioms { trials } => {
            let r = check_axioms(&ctx.extended, *trials, &tail, seed)?;
            out.metric("fullness_sup_norm_failures", Quantity::count(r.fullness.sup_norm_failures));
            out.metric("completeness_final_distance", Quantity::exact(r.completeness.final_distance));
            out.metric("pass_fullness", Quantity::count(r.fullness.pass as usize));
            out.metric("pass_completeness", Quantity::count(r.completeness.pass as usize));
            out.metric("pass_continuity", Quantity::count(r.continuity as usize));
            out.pass = r.pass;
        }
        CheckKind::Uniqueness { exprs, random, tol } => {
            let mut es = parse_all(exprs)?;
            if es.is_empty() {
                es = ctx.bundle.generators().to_vec();
            }
            let r = check_uniqueness(&ctx.fiber()?, &es, tol.unwrap_or(5e-2), *random, seed)?;
            for e in &r.entries {
                out.metric(format!("quotient_norm[{}]", e.expr), Quantity::new(e.quotient_norm, e.error_bound, "richardson"));
                out.metric(format!("symbol_sup[{}]", e.expr), Quantity::new(e.symbol_sup, 0.0, "quadrature"));
            }
            out.pass = r.pass;
        }
        CheckKind::IdealLaws { cases } => {
            let r = check_ideal_laws(&ctx.fiber()?, *cases, seed)?;
            out.metric("cases", Quantity::count(r.cases));
            out.metric("absorption_failures", Quantity::count(r.absorption_failures));
            out.metric("closedness_failures", Quantity::count(r.closedness_failures));
            out.metric("nonmember_failures", Quantity::count(r.nonmember_failures));
            out.metric("cstar_failures", Quantity::count(r.cstar_failures));
            out.pass = r.pass;
        }
        CheckKind::PostQuantization { pairs } => {
            let d = PostQuantizationData::standard(&ctx.bundle)?;
            let r = check_post_quantization(&d, *pairs, seed)?;
            out.metric("density", Quantity::count(r.density as usize));
            for (i, t) in r.brackets.into_iter().enumerate() {
                out.table(&format!("bracket{i}_"), t);
            }
            for (i, t) in r.commutators.into_iter().enumerate() {
                out.table(&format!("commutator{i}_"), t);
            }
            out.pass = r.pass;
        }
        CheckKind::BracketLaws { tol } => {
            let d = PostQuantizationData::standard(&ctx.bundle)?;
            let r = check_bracket_laws(&d, tol.unwrap_or(1e-3), seed)?;
            out.metric("cases", Quantity::count(r.cases));
            out.metric("antisymmetry_failures", Quantity::count(r.antisymmetry_failures));
            out.metric("bilinearity_failures", Quantity::count(r.bilinearity_failures));
            out.metric("jacobi_failures", Quantity::count(r.jacobi_failures));
            out.metric("leibniz_failures", Quantity::count(r.leibniz_failures));
            out.metric("table_failures", Quantity::count(r.table_failures));
            out.pass = r.pass;
        }
        CheckKind::Dynamics {
            hamiltonian,
            generators,
            times,
        } => {
            let d = DynamicalBundleData::new(&ctx.bundle, ctx.expr(hamiltonian)?, times.clone())?;
            let lift = check_dynamics_lift(&d, 4, seed)?;
            out.metric("group_law", Quantity::exact(lift.group_law));
            out.metric("multiplicativity", Quantity::exact(lift.multiplicativity));
            let r = limit_dynamics(&d, &parse_all(generators)?, &ClassicalFlowConfig::default(), &tail)?;
            for (i, e) in r.entries.into_iter().enumerate() {
                if let Some(l) = &e.limit {
                    out.metric(format!("entry{i}_limit"), Quantity::estimate(l));
                }
                out.table(&format!("entry{i}_"), e.residual);
            }
            out.pass = lift.pass && r.pass;
        }
        CheckKind::SecondOrder { morphism, expect, tol } => {
            let spec = ctx.cfg.morphism(morphism)?;
            let source = ctx.cfg.grid_space()?.unwrap_or_else(|| ctx.bundle.base().clone());
            let alpha = alpha_map(&spec.alpha, &source)?;
            let r = is_second_order_with(&alpha, &tail);
            let mut pass = r.pass;
            match &r.estimate {
                Some(e) => {
                    out.metric("k", Quantity::estimate(e));
                    if let Some(x) = expect {
                        pass &= (e.value - x).abs() <= tol.unwrap_or(1e-2);
                    }
                }
                None => pass = false,
            }
            let k = r.k().unwrap_or(f64::NAN);
            let rows: Vec<(f64, f64)> = r.hbar.iter().copied().zip(r.k_values.iter().copied()).collect();
            out.table("", report_from_pairs(format!("second_order[{morphism}]"), &rows, k, &tail));
            out.pass = pass;
        }
        CheckKind::Morphism { morphism, trials } => {
            let sigma = ctx.morphism(ctx.cfg.morphism(morphism)?)?;
            let a = sigma.audit();
            out.metric("max_deviation", Quantity::exact(a.max_deviation));
            out.metric("relations", Quantity::count(a.relations));
            let fibers = audit_fiber_maps(&sigma, *trials, seed)?;
            let failed = fibers.iter().filter(|f| !f.pass).count();
            out.metric("fiber_map_failures", Quantity::count(failed));
            out.pass = a.pass && failed == 0;
        }
        CheckKind::PoissonFunctoriality { morphism, tol } => {
            let sigma = ctx.morphism(ctx.cfg.morphism(morphism)?)?;
            let pa = PostQuantizationData::standard(&ctx.bundle)?;
            let fam: Vec<GeneratorExpression> =
                pa.family().iter().map(|e| sigma.beta().apply(e)).collect::<Result<_>>()?;
            let pb = PostQuantizationData::new(sigma.target(), fam)?;
            let r = check_poisson_functoriality(&sigma, &pa, &pb, tol.unwrap_or(1e-3))?;
            if let Some(e) = &r.second_order.estimate {
                out.metric("k", Quantity::estimate(e));
            }
            for (i, e) in r.entries.into_iter().enumerate() {
                out.table(&format!("entry{i}_"), e.discrepancy);
            }
            out.pass = r.pass;
        }
        CheckKind::FunctorLaws { cases } => {
            let r = check_functor_laws(*cases, seed)?;
            for f in &r {
                out.metric(format!("{}_identity_failures", f.functor), Quantity::count(f.identity_failures));
                out.metric(format!("{}_composition_failures", f.functor), Quantity::count(f.composition_failures));
            }
            out.pass = r.iter().all(|f| f.pass);
        }
    }
    Ok(out)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Io(format!("bad path {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn table_file(index: usize, tag: &str, k: usize, n: usize) -> String {
    if n == 1 {
        format!("{index:02}_{tag}.csv")
    } else {
        format!("{index:02}_{tag}_{k}.csv")
    }
}

/// Runs every check of `cfg`, writing artifacts under the output directory.
pub fn run(cfg: ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let seed = opts.seed.unwrap_or(cfg.seed);
    let out_dir = opts.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let scheme = Arc::new(cfg.build_scheme()?);
    let bundle = Bundle::from_scheme(scheme.clone());
    let extended = extend_to_limit(&bundle)?.0;
    let ctx = Context {
        scheme,
        bundle,
        extended,
        cfg,
    };
    fs::create_dir_all(&out_dir)?;
    let work = || -> Vec<CheckSummary> {
        ctx.cfg
            .checks
            .par_iter()
            .enumerate()
            .map(|(index, kind)| {
                let check_seed = seed.wrapping_add(index as u64);
                let (pass, metrics, tables, error) = match run_check(&ctx, kind, check_seed) {
                    Ok(o) => {
                        let n = o.tables.len();
                        let mut names = Vec::with_capacity(n);
                        let mut write_error = None;
                        for (k, t) in o.tables.iter().enumerate() {
                            let name = table_file(index, kind.tag(), k, n);
                            if let Err(e) = write_atomic(&out_dir.join(&name), t.to_csv().as_bytes()) {
                                write_error = Some(e.to_string());
                            }
                            names.push(name);
                        }
                        (o.pass && write_error.is_none(), o.metrics, names, write_error)
                    }
                    Err(e) => (false, BTreeMap::new(), vec![], Some(e.to_string())),
                };
                CheckSummary {
                    index,
                    check: kind.tag().into(),
                    pass,
                    metrics,
                    tables,
                    error,
                }
            })
            .collect()
    };
    let checks = match opts.jobs {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work),
        None => work(),
    };
    let summary = RunSummary {
        schema: SUMMARY_SCHEMA.into(),
        scheme: ctx.scheme.name().into(),
        seed,
        pass: checks.iter().all(|c| c.pass),
        checks,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    write_atomic(&out_dir.join("summary.json"), format!("{json}\n").as_bytes())?;
    Ok(summary)
}

/// Loads, validates and runs a config file; messages go to standard error.
pub fn run_path(config: &Path, opts: &RunOptions) -> ExitStatus {
    let cfg = match ExperimentConfig::from_path(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qlimit: {e}");
            return ExitStatus::ConfigError;
        }
    };
    match run(cfg, opts) {
        Ok(s) => {
            for c in s.checks.iter().filter(|c| !c.pass) {
                match &c.error {
                    Some(e) => eprintln!("qlimit: check {} ({}) failed: {e}", c.index, c.check),
                    None => eprintln!("qlimit: check {} ({}) failed", c.index, c.check),
                }
            }
            if s.pass {
                ExitStatus::Success
            } else {
                ExitStatus::CheckFailure
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("qlimit: {e}");
            ExitStatus::ConfigError
        }
        Err(e) => {
            eprintln!("qlimit: {e}");
            ExitStatus::CheckFailure
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("qlimit-runner-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn sphere_dirac_is_exact() {
        let cfg = ExperimentConfig::from_json(
            r#"{"scheme": {"kind": "fuzzy_sphere", "sizes": [0.5, 1, 1.5, 2, 2.5, 3]},
                "checks": [{"check": "dirac", "a": "x1", "b": "x2"}]}"#,
        )
        .unwrap();
        let dir = tmp("dirac");
        let s = run(cfg, &RunOptions { out: Some(dir.clone()), ..Default::default() }).unwrap();
        assert!(s.pass);
        let csv = fs::read_to_string(dir.join("00_dirac.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "hbar,value,residual,slope_estimate");
        for l in lines {
            let r: f64 = l.split(',').nth(2).unwrap().parse().unwrap();
            assert!(r <= 1e-12, "{r}");
        }
        assert!(dir.join("summary.json").exists());
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn torus_dirac_follows_the_sine_formula() {
        let cfg = ExperimentConfig::from_json(
            r#"{"scheme": {"kind": "nc_torus", "sizes": [4, 8, 16, 32]},
                "checks": [{"check": "dirac", "a": "u", "b": "v", "slope_min": 1.9}]}"#,
        )
        .unwrap();
        let dir = tmp("torus");
        let s = run(cfg, &RunOptions { out: Some(dir.clone()), ..Default::default() }).unwrap();
        assert!(s.pass, "{:?}", s.checks[0]);
        let csv = fs::read_to_string(dir.join("00_dirac.csv")).unwrap();
        for l in csv.lines().skip(1) {
            let f: Vec<f64> = l.split(',').take(3).map(|x| x.parse().unwrap()).collect();
            let n = (1.0 / f[0]).round();
            let expect = (2.0 * std::f64::consts::PI - 2.0 * n * (std::f64::consts::PI / n).sin()).abs();
            assert!((f[2] - expect).abs() < 1e-10, "{} vs {expect}", f[2]);
        }
        fs::remove_dir_all(dir).unwrap();
    }
}
