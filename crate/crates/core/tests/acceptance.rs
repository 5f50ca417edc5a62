//! Acceptance suite. Each criterion prints one PASS/FAIL line; the target
//! exits nonzero if any criterion fails.
//!
//! ```bash
//! cargo test --release -p qlimit --test acceptance
//! ```

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use qlimit::base_space::make_geometric_grid;
use qlimit::bundle::{check_axioms, check_uniform_continuity, module_action, random_section, Bundle, Section};
use qlimit::expr::words_up_to;
use qlimit::functors::{
    audit_fiber_maps, check_bracket_laws, check_dynamics_lift, check_functor_laws, is_second_order, limit_dynamics,
    make_morphism, poisson_bracket_at_limit, ClassicalFlowConfig, DynamicalBundleData, LetterMap,
    PostQuantizationData,
};
use qlimit::limit::{
    check_ideal_laws, check_limit_commutativity, check_uniqueness, extend_to_limit, limit_fiber, quotient_equal,
    LimitFiber,
};
use qlimit::quantization::{check_dirac, check_rieffel, check_von_neumann};
use qlimit::quantization::{fuzzy_sphere_scheme, nc_torus_scheme, QuantizationScheme};
use qlimit::{
    parse_expression, BaseMap, FiberElement, Generator, GeneratorExpression, Point, SampledFn, TailConfig, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn e(s: &str) -> GeneratorExpression {
    parse_expression(s).unwrap()
}

fn spins(max: f64) -> Vec<f64> {
    (1..=(2.0 * max) as usize).map(|k| k as f64 * 0.5).collect()
}

fn sphere(js: &[f64]) -> Arc<QuantizationScheme> {
    Arc::new(fuzzy_sphere_scheme(js).unwrap())
}

fn torus(ns: &[usize]) -> Arc<QuantizationScheme> {
    Arc::new(nc_torus_scheme(ns).unwrap())
}

fn fiber_of(s: Arc<QuantizationScheme>) -> LimitFiber {
    let (ext, _) = extend_to_limit(&Bundle::from_scheme(s)).unwrap();
    limit_fiber(&ext, &TailConfig::default()).unwrap()
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> FiberElement {
    let m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    FiberElement::from_matrix(m).unwrap()
}

fn cstar_core() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=16);
        let a = random_matrix(&mut rng, n);
        let b = random_matrix(&mut rng, n);
        let (na, nb) = (a.operator_norm(), b.operator_norm());
        let cstar = ((&a.adjoint() * &a).operator_norm() - na * na).abs() / (na * na);
        let sub = ((&a * &b).operator_norm() - na * nb).max(0.0) / (na * nb);
        let tri = ((&a + &b).operator_norm() - na - nb).max(0.0) / (na + nb);
        worst = worst.max(cstar).max(sub).max(tri);
    }
    ensure(worst <= 1e-9, format!("max relative violation {worst:.2e}"))
}

fn rieffel() -> Outcome {
    let js = spins(40.0);
    let s = sphere(&js);
    let cfg = TailConfig::default();
    let mut worst: f64 = 0.0;
    for (k, &j) in js.iter().enumerate() {
        assert!((s.hbar(k) - 1.0 / (j * (j + 1.0)).sqrt()).abs() < 1e-15);
        let n = s.quantize(&e("x3"), k).unwrap().operator_norm();
        worst = worst.max((n - (j / (j + 1.0)).sqrt()).abs());
    }
    let r = check_rieffel(&s, &e("x3"), &cfg).unwrap();
    let limit = r.limit.map_or(f64::NAN, |l| l.value);

    let base = make_geometric_grid(1.0, 0.5, 24).unwrap();
    let b = Bundle::new(base, sphere(&[0.5]), vec![0; 24], vec![e("x3")]).unwrap();
    let f = SampledFn::from_real_fn(b.base(), |h| (1.0 / h).sin());
    let a = module_action(&f, &Section::unit(&b)).unwrap();
    let sine = check_uniform_continuity(b.base(), &a.norms().unwrap(), f64::INFINITY, &cfg).unwrap();

    ensure(
        worst <= 1e-10 && (limit - 1.0).abs() <= 2e-3 && r.continuity.pass && !sine.pass,
        format!(
            "norm error {worst:.1e}, limit {limit:.6}, continuity {}, sine rejected {}",
            r.continuity.pass, !sine.pass
        ),
    )
}

fn dirac() -> Outcome {
    let s = sphere(&spins(40.0));
    let mut cfg = TailConfig::default();
    let mut linear: f64 = 0.0;
    for (a, b) in [("x1", "x2"), ("x2", "x3"), ("x3", "x1")] {
        linear = linear.max(check_dirac(&s, &e(a), &e(b), &cfg).unwrap().max_residual());
    }
    cfg.slope_min = 0.9;
    let quad: Vec<_> = [("x1*x2", "x2*x3"), ("x1*x1", "x1*x2"), ("x1*x2", "x1*x3")]
        .iter()
        .map(|(a, b)| check_dirac(&s, &e(a), &e(b), &cfg).unwrap())
        .collect();
    let t = torus(&[4, 8, 10, 16, 32]);
    cfg.slope_min = 1.9;
    let tr = check_dirac(&t, &e("u"), &e("v"), &cfg).unwrap();
    let at10 = tr.rows.iter().find(|r| (r.hbar - 0.1).abs() < 1e-12).map_or(f64::NAN, |r| r.residual);
    let expect = (2.0 * std::f64::consts::PI - 20.0 * (std::f64::consts::PI / 10.0).sin()).abs();
    let qs: Vec<f64> = quad.iter().map(|r| r.slope.unwrap_or(f64::NAN)).collect();
    ensure(
        linear <= 1e-10
            && quad.iter().all(|r| r.pass && r.slope.is_some_and(|p| p >= 0.9))
            && tr.pass
            && tr.slope.is_some_and(|p| p >= 1.9)
            && (at10 - expect).abs() <= 1e-6,
        format!(
            "linear {linear:.1e}, quadratic slopes {qs:.3?}, torus slope {:.3}, N=10 residual {at10:.8}",
            tr.slope.unwrap_or(f64::NAN)
        ),
    )
}

fn von_neumann() -> Outcome {
    let s = sphere(&[5.0, 10.0, 20.0, 40.0]);
    let cfg = TailConfig {
        slope_min: 1.5,
        ..TailConfig::default()
    };
    let r = check_von_neumann(&s, &e("x3"), &e("x3"), &cfg).unwrap();
    ensure(
        r.pass,
        format!("max residual {:.1e}, exact {}, slope {:?}", r.max_residual(), r.exact, r.slope),
    )
}

fn commutativity() -> Outcome {
    let mut msg = Vec::new();
    let mut ok = true;
    for (name, s) in [("sphere", sphere(&spins(40.0))), ("torus", torus(&[8, 16, 32, 64, 128]))] {
        let r = check_limit_commutativity(&fiber_of(s), 50, 2, 1e-3, 11).unwrap();
        let worst = r.entries.iter().map(|x| x.quotient_norm - x.error_bound).fold(f64::MIN, f64::max);
        ok &= r.pass && r.entries.len() == 50;
        msg.push(format!("{name} max(norm - bound) {worst:.1e}"));
    }
    ensure(ok, msg.join(", "))
}

fn extension() -> Outcome {
    let cfg = TailConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut msg = Vec::new();
    let mut ok = true;
    for (name, s) in [("sphere", sphere(&spins(30.0))), ("torus", torus(&[4, 8, 16, 32, 64]))] {
        let b = Bundle::from_scheme(s);
        let (ext, alpha) = extend_to_limit(&b).unwrap();
        let mut exact = true;
        for _ in 0..8 {
            let a = random_section(&b, &mut rng, 3, 4);
            let a_ext = Section::new(&ext, a.expr().clone()).unwrap();
            for k in 0..b.len() {
                exact &= match alpha.images()[k] {
                    Point::Sample(j) => a.at(k).unwrap() == a_ext.at(j).unwrap(),
                    Point::Limit => false,
                };
            }
        }
        let ax = check_axioms(&ext, 4, &cfg, 0).unwrap();
        ok &= exact && ax.pass;
        msg.push(format!(
            "{name}: bit-exact {exact}, fullness {}, completeness {}, continuity {}",
            ax.fullness.pass, ax.completeness.pass, ax.continuity
        ));
    }
    ensure(ok, msg.join("; "))
}

fn uniqueness() -> Outcome {
    let s = sphere(&spins(40.0));
    let words: Vec<GeneratorExpression> = words_up_to(&s.generator_labels(), 3)
        .into_iter()
        .filter(|w| !w.is_empty())
        .map(GeneratorExpression::word)
        .collect();
    let rs = check_uniqueness(&fiber_of(s), &words, 5e-2, 0, 0).unwrap();
    let ws = rs.entries.iter().map(|x| x.deviation).fold(0.0, f64::max);

    let modes: Vec<GeneratorExpression> = (-2..=2)
        .flat_map(|a| (-2..=2).map(move |b| (a, b)))
        .filter(|&m| m != (0, 0))
        .map(|(a, b)| GeneratorExpression::generator(Generator::Mode(a, b)))
        .collect();
    let rt = check_uniqueness(&fiber_of(torus(&[8, 16, 32, 64])), &modes, 5e-2, 0, 0).unwrap();
    let unit = rt
        .entries
        .iter()
        .map(|x| (x.quotient_norm - 1.0).abs().max((x.symbol_sup - 1.0).abs()))
        .fold(0.0, f64::max);
    ensure(
        rs.pass && rt.pass && unit <= 1e-12,
        format!(
            "sphere {} words max deviation {ws:.1e}, torus {} modes max |norm - 1| {unit:.1e}",
            rs.entries.len(),
            rt.entries.len()
        ),
    )
}

fn ideal_laws() -> Outcome {
    let r = check_ideal_laws(&fiber_of(sphere(&spins(40.0))), 100, 8).unwrap();
    ensure(
        r.pass && r.cases == 100,
        format!(
            "{} cases: absorption {}, closedness {}, nonmember {}, c*-identity {} failures",
            r.cases, r.absorption_failures, r.closedness_failures, r.nonmember_failures, r.cstar_failures
        ),
    )
}

fn functor_laws() -> Outcome {
    let reports = check_functor_laws(200, 9).unwrap();
    let failing: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.functor.as_str()).collect();

    let mut iso: f64 = 0.0;
    let mut battery = true;
    let sb = Bundle::from_scheme(sphere(&spins(4.0)));
    let tb = Bundle::from_scheme(torus(&[4, 6, 8, 12, 16]));
    for (b, beta) in [(&sb, LetterMap::cyclic_rotation()), (&tb, LetterMap::modes([[0, -1], [1, 0]]))] {
        let sigma = make_morphism(BaseMap::identity(b.base()), beta, b, b).unwrap();
        for r in audit_fiber_maps(&sigma, 4, 3).unwrap() {
            battery &= r.pass && r.bijective;
            iso = iso.max(r.isometry.unwrap_or(f64::INFINITY));
        }
    }
    ensure(
        failing.is_empty() && battery && iso <= 1e-9,
        format!("200 cases, failing functors {failing:?}, fiber-map isometry defect {iso:.1e}"),
    )
}

fn dynamics() -> Outcome {
    let b = Bundle::from_scheme(sphere(&spins(40.0)));
    let d = DynamicalBundleData::new(&b, e("x3"), vec![0.1, 0.5, 1.0]).unwrap();
    let lift = check_dynamics_lift(&d, 2, 0).unwrap();
    let gens = [e("x1"), e("x2"), e("x3"), e("x1*x2")];
    let r = limit_dynamics(&d, &gens, &ClassicalFlowConfig::default(), &TailConfig::default()).unwrap();
    let (lin, quad): (Vec<_>, Vec<_>) = r.entries.iter().partition(|x| x.generator.matches('x').count() == 1);
    let lin_max = lin.iter().map(|x| x.residual.max_residual()).fold(0.0, f64::max);
    let slopes: Vec<f64> = quad.iter().map(|x| x.residual.slope.unwrap_or(f64::NAN)).collect();
    ensure(
        lift.pass
            && lin.len() == 9
            && lin_max <= 1e-8
            && quad.len() == 3
            && quad.iter().all(|x| x.pass && x.residual.slope.is_some_and(|p| p >= 0.9)),
        format!("linear max residual {lin_max:.1e}, quadratic slopes {slopes:.3?}"),
    )
}

fn poisson() -> Outcome {
    let s = sphere(&spins(32.0));
    let b = Bundle::from_scheme(s.clone());
    let p = PostQuantizationData::standard(&b).unwrap();
    let fiber = p.limit_fiber().unwrap();
    let mut table = true;
    for ((g, h), expect) in s.bracket_table() {
        let got = poisson_bracket_at_limit(
            &p,
            &fiber,
            &GeneratorExpression::generator(g),
            &GeneratorExpression::generator(h),
        )
        .unwrap();
        table &= quotient_equal(&fiber, &got, &fiber.element(expect).unwrap(), 1e-3).unwrap();
    }
    let laws = check_bracket_laws(&p, 1e-3, 0).unwrap();

    let grid = make_geometric_grid(0.5, 0.5, 24).unwrap();
    let mut ks = Vec::new();
    let mut k_ok = true;
    for a2 in [0.0, 0.5, 1.0] {
        let r = is_second_order(&BaseMap::image_grid(&grid, |h| h + a2 * h * h).unwrap());
        let k = r.k().unwrap_or(f64::NAN);
        k_ok &= r.pass && (k - a2).abs() <= 1e-2;
        ks.push(k);
    }
    let square = is_second_order(&BaseMap::image_grid(&grid, |h| h * h).unwrap());
    ensure(
        table && laws.pass && k_ok && !square.pass,
        format!(
            "table {table}, laws {} on {} cases, K {ks:.4?}, hbar^2 rejected {}",
            laws.pass, laws.cases, !square.pass
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("c*-core", cstar_core),
        ("rieffel", rieffel),
        ("dirac", dirac),
        ("von neumann", von_neumann),
        ("commutativity", commutativity),
        ("extension", extension),
        ("uniqueness", uniqueness),
        ("null ideal", ideal_laws),
        ("functor laws", functor_laws),
        ("dynamics", dynamics),
        ("poisson limit", poisson),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(m) => println!("PASS {:>2} {name}: {m} ({secs:.1}s)", i + 1),
            Err(m) => {
                println!("FAIL {:>2} {name}: {m} ({secs:.1}s)", i + 1);
                failed.push(*name);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
