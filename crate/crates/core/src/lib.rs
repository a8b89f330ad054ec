//! Conformal geometry of fourth order on symmetric model manifolds.
//!
//! Everything here works on cohomogeneity-one functions: a function of one
//! polar angle on a round factor, sampled at Chebyshev-Gauss angles. On top
//! of that sit the Schouten tensor, Q-curvature and Paneitz operator of
//! conformal metrics, the variational invariants `Y`, `Y4`, `Y4+`, `Y4*`, and
//! a continuation solver that deforms a starting metric to one with positive
//! scalar and Q-curvature.
#![no_std]
// `!(x > 0.0)` is used on purpose: NaN must fail the test.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod background;
pub mod conformal;
pub mod continuation;
pub mod error;
pub mod grid;
pub mod invariants;
pub mod linalg;
pub mod math;
pub mod metric;
pub mod paneitz;
pub mod quadrature;

pub use background::{make_background, BackgroundCurvature, BackgroundManifold};
pub use conformal::{ConformalFactor, ExponentConvention};
pub use error::{Error, Result};
pub use grid::{hessian_components, laplacian, make_grid, CollocationGrid};
pub use metric::{CurvatureFields, Metric, MetricTag};
