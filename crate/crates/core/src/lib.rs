//! Rational points near affine subspaces: exhaustive counting, Diophantine
//! exponent estimates, and numerical checks of the upper bounds, sieve
//! inequalities and covering statements that govern them.
//!
//! Every real input is a [`Scalar`] (an exact rational or a quadratic surd
//! expression) evaluated to a rigorous [`Ball`]. Strict inequalities are
//! decided with a guard band and undecidable cases are tallied, never
//! silently resolved.

// NaN inputs are rejected through negated comparisons on purpose.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::large_enum_variant,
    clippy::should_implement_trait
)]

pub mod approx_fn;
pub mod ball;
pub mod bounds;
pub mod classify;
pub mod counting;
pub mod covering;
pub mod error;
pub mod exponents;
pub mod guard;
pub mod matrix;
pub mod parallel;
pub mod report;
pub mod scalar;
pub mod settings;
pub mod sieve;
pub mod torus;

pub use approx_fn::ApproxFunction;
pub use ball::{Ball, CBall};
pub use error::{Error, Result};
pub use guard::{dist_to_nearest_int, guarded_less, GuardedBool};
pub use matrix::{Matrix, ParamMatrix};
pub use scalar::Scalar;
pub use settings::Settings;
