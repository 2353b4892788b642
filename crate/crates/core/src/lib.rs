//! Locally constrained mean curvature flow of spacelike graphs in generalized
//! Robertson-Walker spacetimes `(a, b) x S0` with metric `-dr^2 + w(r)^2 g_hat`.
//!
//! The crate evolves a graph `r = rho(xi)` over a compact fiber by the flow
//! `x_t = (Delta Theta) nu`, monitors the volume/area/oscillation functionals
//! along the way, and compares the result with the slice isoperimetric profile.
//! The `verify` module holds independent checks (a finite-difference curvature
//! oracle, spatial identity residuals and a normal-gauge marker tracker).
//!
//! Per-node sweeps run on rayon when the `parallel` feature is enabled (the
//! default) and sequentially otherwise. Reductions always sum in node order,
//! so both builds produce bit-identical results.

pub mod error;
pub mod exec;
pub mod fiber;
pub mod flow;
pub mod geometry;
pub mod integrals;
pub mod isoperimetric;
pub mod quad;
pub mod tensor;
pub mod verify;
pub mod warping;

pub use error::{Error, Result};
pub use fiber::{FiberGrid, FiberKind, Parity};
pub use flow::{FlowConfig, FlowOutcome, FlowRecord, FlowTrace, Integrator, Verdict};
pub use geometry::GraphState;
pub use integrals::Functionals;
pub use isoperimetric::{IsoVerdict, IsoperimetricProfile};
pub use warping::{Family, WarpValues, WarpingFactor};
