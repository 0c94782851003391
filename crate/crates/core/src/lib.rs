//! Synthesis, causal compensation, adaptive observation and closed-loop
//! simulation for LQR-based dyadic adaptive control of semilinear plants.
//!
//! A plant `v̇ = Av + Bu + αφ(v)` is split around the LQR closed-loop
//! generator `A_m = A − BK` into a particular half (carrying the
//! nonlinearity) and a homogeneous half (carrying the control). The
//! modules build the gain, the feedforward laws it is compared against,
//! a stable causal compensator from the Nehari problem, the adaptive
//! observers, and the simulator and cost accounting that tie them together.

pub mod adaptive;
pub mod error;
pub mod linalg;
pub mod linsys;
pub mod nehari;
pub mod ode;
pub mod quadrature;
pub mod riccati;
pub mod signal;
pub mod sim;
pub mod synthesis;

pub use error::{Error, Result};
pub use linsys::{build_heat_plant, Basis, LipschitzBounds, SemilinearPlant, StateSpace};
pub use riccati::{solve_care, DecayCertificate, GramianResult, LyapunovCertificate, RiccatiSolution};
pub use signal::SignalTimeline;
