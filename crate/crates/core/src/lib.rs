//! Sonar (hemispherical), parabolic, transversal and classical Radon
//! transforms on `R^n`, the change-of-variable operators that factor them
//! into one another, weighted and mixed Lebesgue norms, and explicit
//! inversion by hypersingular integrals or powers of the Laplacian.
//!
//! All numerics are generic over [`Scalar`] (`f32`, `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the tolerances in the
//! test suites are calibrated for.

// `!(x > 0)` style checks are meant to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod factorizations;
pub mod field;
pub mod inversion;
pub mod norms;
pub mod point;
pub mod quadrature;
pub mod scalar;
pub mod transforms;

pub use error::{Error, Result};
pub use field::{make_test_field, sample_on_grid, Domain, PhantomKind, ScalarField, SphereProfile, Support};
pub use point::Point;
pub use quadrature::{integrate, Grid, Interval, QuadratureSpec, Rule, RuleKind, SphereRule};
pub use scalar::Scalar;
pub use transforms::{
    classical_r, lambda_relation, parabolic_p, sonar_h, transversal_t, ParabolicVariant, RadonPlane,
};
pub use factorizations::{
    apply, scaling_exponents, verify_identity, Field, FieldKind, Identity, IdentityReport, OpTag, OperatorId,
    Stage,
};
pub use inversion::{
    c_n, dnl_constant, finite_difference, g_functional, hypersingular_apply, invert, laplacian_power,
    InversionKind, InversionMethod, ReconstructionConfig,
};
pub use norms::{admissible, lp_norm, mixed_norm, scaling_scan, LpWeight, MixedNormTriple, MixedWeight, ScanTransform};

pub type Point64 = Point<f64>;
pub type Field64 = ScalarField<f64>;
pub type Profile64 = SphereProfile<f64>;
pub type Spec64 = QuadratureSpec<f64>;
pub type Plane64 = RadonPlane<f64>;
pub type Config64 = ReconstructionConfig<f64>;
pub type Point32 = Point<f32>;
pub type Field32 = ScalarField<f32>;
pub type Spec32 = QuadratureSpec<f32>;
