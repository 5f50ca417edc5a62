//! Randomized structural checks of the functor laws: identities go to
//! identities and composites to composites, compared as representations.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::base_space::BaseMap;
use crate::bundle::{canonical_restriction, Bundle};
use crate::error::Result;
use crate::expr::{parse_expression, GeneratorExpression};
use crate::quantization::{fuzzy_sphere_scheme, nc_torus_scheme, SchemeKind};

use super::dynamics::{
    compose_dynamical, extend_dynamical_morphism, extend_dynamics, identity_dynamical,
    limit_dynamical_morphism, make_dynamical_morphism, restrict_dynamical_morphism, restrict_dynamics,
    DynamicalBundleData, DynamicalMorphism, LimitDynamicalMorphism,
};
use super::morphism::{
    classical_limit, compose, extend_morphism, extended, identity_limit_morphism, identity_morphism,
    limit_morphism, make_morphism, BundleMorphism, LetterMap,
};
use super::poisson::{poisson_limit, PoissonMorphism, PostQuantizationData};

pub const FUNCTORS: [&str; 7] = ["F", "G", "L", "F_D", "G_D", "L_D", "L_P"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunctorLawReport {
    pub functor: String,
    pub cases: usize,
    pub identity_failures: usize,
    pub composition_failures: usize,
    pub pass: bool,
}

/// Three nested sub-bundles `A ⊆ B ⊆ C` of one scheme with morphisms
/// `sigma1: A -> B`, `sigma2: B -> C` over the inclusions, and Hamiltonians
/// transported along them.
#[derive(Clone, Debug)]
pub struct LawCase {
    pub bundles: [Arc<Bundle>; 3],
    pub sigma1: BundleMorphism,
    pub sigma2: BundleMorphism,
    pub dynamics: [DynamicalBundleData; 3],
}

fn sphere_maps() -> Vec<LetterMap> {
    let e = |s: &str| parse_expression(s).unwrap();
    let rot = LetterMap::cyclic_rotation();
    vec![
        LetterMap::Identity,
        rot.clone(),
        LetterMap::then(&rot, &rot).unwrap(),
        LetterMap::coords([e("-x1"), e("-x2"), e("x3")]),
        LetterMap::coords([e("x2"), e("x1"), e("-x3")]),
    ]
}

fn torus_maps() -> Vec<LetterMap> {
    vec![
        LetterMap::Identity,
        LetterMap::modes([[0, -1], [1, 0]]),
        LetterMap::modes([[-1, 0], [0, -1]]),
        LetterMap::modes([[1, 1], [0, 1]]),
        LetterMap::modes([[1, 0], [1, 1]]),
    ]
}

const SPHERE_HAMILTONIANS: [&str; 3] = ["x3", "x1 + 0.5*x2", "x3*x3 + x1"];
const TORUS_HAMILTONIANS: [&str; 3] = ["u + u'", "v + v'", "u + u' + 0.5*v + 0.5*v'"];

/// Full bundles from which the random cases are cut: spins `1/2..3` and
/// even torus sizes `4..16`.
fn ambient() -> Result<[Arc<Bundle>; 2]> {
    let js: Vec<f64> = (1..=6).map(|k| k as f64 * 0.5).collect();
    let ns: Vec<usize> = (2..=8).map(|k| 2 * k).collect();
    Ok([
        Bundle::from_scheme(Arc::new(fuzzy_sphere_scheme(&js)?)),
        Bundle::from_scheme(Arc::new(nc_torus_scheme(&ns)?)),
    ])
}

fn sub_bundle(full: &Arc<Bundle>, idx: &[usize]) -> Result<Arc<Bundle>> {
    let sub = full.base().restrict_to(idx)?;
    canonical_restriction(full, &BaseMap::inclusion(&sub, full.base())?)
}

fn random_subset(rng: &mut ChaCha8Rng, of: &[usize], min: usize) -> Vec<usize> {
    let n = rng.gen_range(min.min(of.len())..=of.len());
    let mut v: Vec<usize> = of.choose_multiple(rng, n).copied().collect();
    v.sort_unstable();
    v
}

fn random_case(full: &[Arc<Bundle>; 2], seed: u64) -> Result<LawCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = &full[rng.gen_range(0..2)];
    let (maps, hams) = match full.scheme().kind() {
        SchemeKind::FuzzySphere => (sphere_maps(), SPHERE_HAMILTONIANS),
        SchemeKind::NcTorus => (torus_maps(), TORUS_HAMILTONIANS),
    };
    let all: Vec<usize> = (0..full.len()).collect();
    let ic = random_subset(&mut rng, &all, 3);
    let ib = random_subset(&mut rng, &ic, 2);
    let ia = random_subset(&mut rng, &ib, 1);
    let a = sub_bundle(full, &ia)?;
    let b = sub_bundle(full, &ib)?;
    let c = sub_bundle(full, &ic)?;
    let b1 = maps.choose(&mut rng).unwrap().clone();
    let b2 = maps.choose(&mut rng).unwrap().clone();
    let sigma1 = make_morphism(BaseMap::inclusion(a.base(), b.base())?, b1.clone(), &a, &b)?;
    let sigma2 = make_morphism(BaseMap::inclusion(b.base(), c.base())?, b2.clone(), &b, &c)?;
    let times = vec![rng.gen_range(0.1..1.0)];
    let ha = parse_expression(hams.choose(&mut rng).unwrap())?;
    let hb = b1.apply(&ha)?;
    let hc = b2.apply(&hb)?;
    let dynamics = [
        DynamicalBundleData::new(&a, ha, times.clone())?,
        DynamicalBundleData::new(&b, hb, times.clone())?,
        DynamicalBundleData::new(&c, hc, times)?,
    ];
    Ok(LawCase {
        bundles: [a, b, c],
        sigma1,
        sigma2,
        dynamics,
    })
}

/// `n` cases, deterministic in `seed`.
pub fn random_law_cases(n: usize, seed: u64) -> Result<Vec<LawCase>> {
    let full = ambient()?;
    (0..n)
        .into_par_iter()
        .map(|i| random_case(&full, seed.wrapping_add(i as u64).wrapping_mul(0x2545_F491_4F6C_DD1D)))
        .collect()
}

/// `(identity preserved, composition preserved)` for each functor, in the
/// order of [`FUNCTORS`].
pub fn check_case(case: &LawCase) -> Result<[(bool, bool); 7]> {
    let [a, _, c] = &case.bundles;
    let (s1, s2) = (&case.sigma1, &case.sigma2);
    let s21 = compose(s2, s1)?;

    let fa = extended(a)?;
    let f1 = extend_morphism(s1)?;
    let f2 = extend_morphism(s2)?;
    let f_law = (
        extend_morphism(&identity_morphism(a))? == identity_morphism(&fa),
        extend_morphism(&s21)? == compose(&f2, &f1)?,
    );

    let g1 = limit_morphism(&f1)?;
    let g2 = limit_morphism(&f2)?;
    let g_law = (
        limit_morphism(&identity_morphism(&fa))? == identity_limit_morphism(&fa)?,
        limit_morphism(&compose(&f2, &f1)?)? == g1.then(&g2)?,
    );

    let l_law = (
        classical_limit(&identity_morphism(a))? == identity_limit_morphism(&fa)?,
        classical_limit(&s21)? == classical_limit(s1)?.then(&classical_limit(s2)?)?,
    );

    let [da, db, dc] = &case.dynamics;
    let m1 = make_dynamical_morphism(s1, da, db, 2, 0)?;
    let m2 = make_dynamical_morphism(s2, db, dc, 2, 1)?;
    let m21 = compose_dynamical(&m2, &m1)?;
    let fda = extend_dynamics(da)?;
    let fm1 = extend_dynamical_morphism(&m1)?;
    let fm2 = extend_dynamical_morphism(&m2)?;
    let fd_law = (
        extend_dynamical_morphism(&identity_dynamical(da))? == identity_dynamical(&fda),
        extend_dynamical_morphism(&m21)? == compose_dynamical(&fm2, &fm1)?,
    );

    let id_limit_dyn = |d: &DynamicalBundleData| -> Result<LimitDynamicalMorphism> {
        Ok(LimitDynamicalMorphism {
            limit: identity_limit_morphism(d.bundle())?,
            source: restrict_dynamics(d)?,
            target: restrict_dynamics(d)?,
        })
    };
    let gd_law = (
        restrict_dynamical_morphism(&identity_dynamical(&fda))? == id_limit_dyn(&fda)?,
        restrict_dynamical_morphism(&compose_dynamical(&fm2, &fm1)?)?
            == restrict_dynamical_morphism(&fm1)?.then(&restrict_dynamical_morphism(&fm2)?)?,
    );
    let ld = |m: &DynamicalMorphism| limit_dynamical_morphism(m);
    let ld_law = (
        ld(&identity_dynamical(da))? == id_limit_dyn(&fda)?,
        ld(&m21)? == ld(&m1)?.then(&ld(&m2)?)?,
    );

    // families transported along beta so that both morphisms are smooth
    let pa = PostQuantizationData::standard(a)?;
    let image = |m: &BundleMorphism, f: &[GeneratorExpression]| -> Result<Vec<GeneratorExpression>> {
        f.iter().map(|e| m.beta().apply(e)).collect()
    };
    let pb = PostQuantizationData::new(&case.bundles[1], image(s1, pa.family())?)?;
    let pc = PostQuantizationData::new(c, image(s2, pb.family())?)?;
    let identity_p = PoissonMorphism {
        limit: identity_limit_morphism(&fa)?,
        source_family: pa.family().to_vec(),
        target_family: pa.family().to_vec(),
    };
    let lp_law = (
        poisson_limit(&identity_morphism(a), &pa, &pa)? == identity_p,
        poisson_limit(&s21, &pa, &pc)? == poisson_limit(s1, &pa, &pb)?.then(&poisson_limit(s2, &pb, &pc)?)?,
    );

    Ok([f_law, g_law, l_law, fd_law, gd_law, ld_law, lp_law])
}

/// Runs [`check_case`] on `cases` random cases; a case that errors counts
/// as a failure of both laws for every functor.
pub fn check_functor_laws(cases: usize, seed: u64) -> Result<Vec<FunctorLawReport>> {
    let all = random_law_cases(cases, seed)?;
    let results: Vec<[(bool, bool); 7]> = all
        .par_iter()
        .map(|c| check_case(c).unwrap_or([(false, false); 7]))
        .collect();
    Ok(FUNCTORS
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let identity_failures = results.iter().filter(|r| !r[i].0).count();
            let composition_failures = results.iter().filter(|r| !r[i].1).count();
            FunctorLawReport {
                functor: name.to_string(),
                cases,
                identity_failures,
                composition_failures,
                pass: identity_failures == 0 && composition_failures == 0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laws_hold_on_a_small_sweep() {
        for c in random_law_cases(12, 7).unwrap() {
            let r = check_case(&c).unwrap();
            assert!(r.iter().all(|(i, k)| *i && *k), "{r:?}");
        }
    }

    #[test]
    fn cases_are_deterministic() {
        let a = random_law_cases(4, 3).unwrap();
        let b = random_law_cases(4, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.sigma1.beta(), y.sigma1.beta());
            assert_eq!(x.bundles[2].levels(), y.bundles[2].levels());
            assert_eq!(x.dynamics[2].hamiltonian(), y.dynamics[2].hamiltonian());
        }
    }
}
