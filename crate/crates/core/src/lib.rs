//! Zeroth-order solvers for discrete convex simulation optimization.
//!
//! Given only noisy evaluations of an L-natural convex objective on the grid
//! `[1, N]^d`, the solvers return a point that is `epsilon`-optimal with
//! probability at least `1 - delta` (or exactly optimal under an
//! indifference-zone gap `c`):
//!
//! * [`onedim`]: trisection adaptive sampling and enhanced adaptive sampling on a line.
//! * [`lovasz`]: the Lovász extension, chain subgradients and rounding.
//! * [`cutplane`]: polytope localization with volumetric, analytic-center and
//!   hit-and-run engines, and the stochastic Vaidya solvers.
//! * [`dimred`]: LLL reduction, integral-hyperplane detection and the
//!   dimension-reduction solver that needs no Lipschitz constant.
//! * [`multieas`]: recursive enhanced adaptive sampling over marginal functions.
//! * [`bench`]: separable and two-queue staffing models, a subgradient baseline
//!   and brute force.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix formulas they implement.
#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod cutplane;
pub mod dimred;
pub mod error;
pub mod lovasz;
pub mod multieas;
pub mod onedim;
pub mod oracle;

pub use error::{Error, Result};
pub use oracle::{Estimate, Guarantee, SampleStats, Sampler, StochasticOracle, Stream};

/// Working scalar of the floating-point solvers.
pub type Real = f64;
/// Exact scalar for lattice computations.
pub type Rational = num_rational::BigRational;
/// Lattice basis over floating point.
pub type FloatBasis = dimred::LatticeBasis<f64>;
/// Lattice basis over exact rationals.
pub type ExactBasis = dimred::LatticeBasis<Rational>;
