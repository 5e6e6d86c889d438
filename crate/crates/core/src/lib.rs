//! Simulation and optimal control of a one-sided evolution with memory.
//!
//! The model tracks a componentwise nondecreasing state `q` on `[0, T]`,
//! starting from zero, driven by the force
//!
//! `z(t) = -a q(t) + l(t) - kappa(H(q)(t))`,
//!
//! where `a > 0` is an elastic modulus, `l` is the applied control and
//! `kappa` maps the accumulated history `H(q)(t) = y0 + ∫_0^t q ds` to a
//! threshold that the force must overcome. Two evolution laws share this
//! force:
//!
//! * the viscous law `dq/dt = max(z, 0) / eps`, and
//! * its rate-independent limit, where `z <= 0`, `dq/dt >= 0`, and the two
//!   are complementary: the state moves only while the force sits at zero.
//!
//! On top of the solvers ([`forward`]) the crate provides directional state
//! sensitivities ([`sensitivity`]), the backward costate/multiplier system
//! and the reduced gradient of tracking-type objectives ([`adjoint`]),
//! projected-metric descent plus a vanishing-viscosity sweep
//! ([`optimizer`]), and independent verification of the first-order
//! optimality systems on both sides of the limit ([`stationarity`]).
//!
//! Discrete conventions, shared by every module: uniform time grids,
//! trapezoid quadrature, forward-difference rates, and an `H1`-type metric
//! on controls that vanish at `t = 0` assembled from the trapezoid mass and
//! forward-difference stiffness ([`linalg`]).

pub mod adjoint;
pub mod error;
pub mod forward;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod sensitivity;
pub mod stationarity;

pub use error::{Error, Result};
