//! Morphisms of bundles and the limit functors on them: extension `F`,
//! restriction to the limit fiber `G`, `L = G . F`, and their dynamical and
//! Poisson variants.

pub mod dynamics;
pub mod laws;
pub mod morphism;

pub use morphism::{
    audit_fiber_maps, classical_limit, compatibility_battery, compose, extend_morphism, fiber_map,
    fiber_map_at, identity_limit_morphism, identity_morphism, limit_morphism, limit_morphism_with,
    make_morphism, make_morphism_with, BundleMorphism, CompatibilityConfig, CompatibilityReport,
    FiberMap, FiberMapReport, LetterMap, LimitMorphism, LimitMorphismReport,
};
pub mod poisson;

pub use dynamics::{
    check_dynamics_lift, classical_flow_symbol, compose_dynamical, extend_dynamical_morphism, extend_dynamics,
    identity_dynamical, limit_dynamical_morphism, limit_dynamics, make_dynamical_morphism,
    restrict_dynamical_morphism, restrict_dynamics, ClassicalFlowConfig, DynamicalBundleData,
    DynamicalMorphism, DynamicsLiftReport, LimitDynamicalMorphism, LimitDynamics, LimitDynamicsEntry,
    LimitDynamicsReport,
};
pub use laws::{check_case, check_functor_laws, random_law_cases, FunctorLawReport, LawCase, FUNCTORS};

pub use poisson::{
    check_bracket_laws, check_post_quantization, check_poisson_functoriality, is_second_order,
    is_second_order_with, is_smooth, poisson_bracket_at_limit, poisson_limit, rescaled_commutator_class,
    torus_modes, BracketLawReport, PoissonFunctorialityEntry, PoissonFunctorialityReport, PoissonMorphism,
    PostQuantizationData, PostQuantizationReport, SecondOrderReport,
};
