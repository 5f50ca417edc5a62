use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use proptest::prelude::*;
use qlimit::algebra::{commutator, unitary_flow};
use qlimit::bundle::{Bundle, Section};
use qlimit::convergence::estimate_limit;
use qlimit::quantization::torus::{wedge, weyl_mode};
use qlimit::quantization::{fuzzy_sphere_scheme, QuantizationScheme};
use qlimit::{parse_expression, FiberElement, Generator, GeneratorExpression, TailConfig, C64};

fn matrix(n: usize) -> impl Strategy<Value = FiberElement> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n).prop_map(move |v| {
        let m = DMatrix::from_iterator(n, n, v.into_iter().map(|(a, b)| C64::new(a, b)));
        FiberElement::from_matrix(m).unwrap()
    })
}

fn pair() -> impl Strategy<Value = (FiberElement, FiberElement)> {
    (1usize..=8).prop_flat_map(|n| (matrix(n), matrix(n)))
}

fn diff(a: &FiberElement, b: &FiberElement) -> f64 {
    (a - b).operator_norm()
}

fn sphere() -> &'static Arc<QuantizationScheme> {
    static S: OnceLock<Arc<QuantizationScheme>> = OnceLock::new();
    S.get_or_init(|| Arc::new(fuzzy_sphere_scheme(&[0.5, 1.0, 1.5, 2.0, 3.0]).unwrap()))
}

fn sphere_expr() -> impl Strategy<Value = GeneratorExpression> {
    let term = (
        prop::collection::vec(0usize..3, 0..=3),
        -2.0..2.0f64,
        -2.0..2.0f64,
    );
    prop::collection::vec(term, 1..=4).prop_map(|terms| {
        terms
            .into_iter()
            .map(|(w, re, im)| {
                let word = w.into_iter().map(|i| Generator::parse(["x1", "x2", "x3"][i]).unwrap()).collect();
                GeneratorExpression::word_with(C64::new(re, im), word)
            })
            .fold(GeneratorExpression::zero(), |acc, t| acc + t)
    })
}

proptest! {
    #[test]
    fn adjoint_is_an_antimultiplicative_isometric_involution((a, b) in pair()) {
        prop_assert_eq!(a.adjoint().adjoint(), a.clone());
        prop_assert!((a.adjoint().operator_norm() - a.operator_norm()).abs() <= 1e-12 * (1.0 + a.operator_norm()));
        prop_assert!(diff(&(&a * &b).adjoint(), &(&b.adjoint() * &a.adjoint())) <= 1e-12);
    }

    #[test]
    fn norm_is_a_cstar_norm((a, b) in pair()) {
        let (na, nb) = (a.operator_norm(), b.operator_norm());
        prop_assert!(((&a.adjoint() * &a).operator_norm() - na * na).abs() <= 1e-10 * (1.0 + na * na));
        prop_assert!((&a * &b).operator_norm() <= na * nb * (1.0 + 1e-10) + 1e-14);
        prop_assert!((&a + &b).operator_norm() <= (na + nb) * (1.0 + 1e-10) + 1e-14);
    }

    #[test]
    fn flows_are_unitary_one_parameter_groups(a in (1usize..=6).prop_flat_map(matrix), s in -2.0..2.0f64, t in -2.0..2.0f64) {
        let h = (&a + &a.adjoint()).scale_real(0.5);
        let us = unitary_flow(&h, s, 0.5).unwrap();
        let ut = unitary_flow(&h, t, 0.5).unwrap();
        let ust = unitary_flow(&h, s + t, 0.5).unwrap();
        prop_assert!(us.unitarity_defect() <= 1e-10);
        prop_assert!(diff(&(&us * &ut), &ust) <= 1e-9);
    }

    #[test]
    fn weyl_modes_obey_the_sine_identity(n in 2usize..=24, m in (-3i32..=3, -3i32..=3), k in (-3i32..=3, -3i32..=3)) {
        let wm = FiberElement::from_matrix(weyl_mode(n, m.0, m.1)).unwrap();
        let wk = FiberElement::from_matrix(weyl_mode(n, k.0, k.1)).unwrap();
        let sum = FiberElement::from_matrix(weyl_mode(n, m.0 + k.0, m.1 + k.1)).unwrap();
        let phase = 2.0 * (std::f64::consts::PI * wedge(m, k) as f64 / n as f64).sin();
        let expect = sum.scale(C64::new(0.0, phase));
        prop_assert!(diff(&commutator(&wm, &wk).unwrap(), &expect) <= 1e-10);
        prop_assert!(wm.unitarity_defect() <= 1e-12);
    }

    #[test]
    fn quantization_is_linear_and_star_preserving(a in sphere_expr(), b in sphere_expr(), level in 0usize..5) {
        let s = sphere();
        let qa = s.quantize(&a, level).unwrap();
        let qb = s.quantize(&b, level).unwrap();
        prop_assert!(diff(&s.quantize(&(&a + &b), level).unwrap(), &(&qa + &qb)) <= 1e-10);
        prop_assert!(diff(&s.quantize(&a.clone().adjoint(), level).unwrap(), &qa.adjoint()) <= 1e-10);
    }

    #[test]
    fn printed_expressions_parse_back(a in sphere_expr(), level in 0usize..5) {
        let s = sphere();
        let back = parse_expression(&a.to_string()).unwrap();
        prop_assert!(diff(&s.quantize(&back, level).unwrap(), &s.quantize(&a, level).unwrap()) <= 1e-10);
    }

    #[test]
    fn sections_act_pointwise(a in sphere_expr(), b in sphere_expr(), c in (-2.0..2.0f64, -2.0..2.0f64)) {
        let bundle = Bundle::from_scheme(sphere().clone());
        let sa = Section::new(&bundle, a).unwrap();
        let sb = Section::new(&bundle, b).unwrap();
        let c = C64::new(c.0, c.1);
        let prod = sa.mul(&sb).unwrap();
        let scaled = sa.scale(c).norms().unwrap();
        for (k, n) in sa.norms().unwrap().into_iter().enumerate() {
            prop_assert!(diff(&prod.at(k).unwrap(), &(&sa.at(k).unwrap() * &sb.at(k).unwrap())) <= 1e-9);
            prop_assert!((scaled[k] - c.norm() * n).abs() <= 1e-10 * (1.0 + scaled[k]));
        }
    }

    #[test]
    fn power_law_tails_extrapolate(l in -2.0..2.0f64, c in 0.1..3.0f64, p in 0.5..3.0f64) {
        let h: Vec<f64> = (0..16).map(|k| 0.5f64.powi(k)).collect();
        let v: Vec<f64> = h.iter().map(|x| l + c * x.powf(p)).collect();
        let est = estimate_limit(&h, &v, &TailConfig::default()).unwrap();
        prop_assert!((est.value - l).abs() <= 1e-8 + est.error_bound);
        prop_assert!(est.error_bound <= 1e-3);
    }
}
