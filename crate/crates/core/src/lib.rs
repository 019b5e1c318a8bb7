//! Robust tube model predictive control for tiltwing VTOL transition
//! manoeuvres.
//!
//! The library is organised around a two-state longitudinal point-mass
//! model of a tiltwing aircraft (forward and vertical velocity) driven by
//! tilt angle and thrust. The net forces on the airframe are fitted
//! offline by a quadratic polynomial in Gram form and decomposed into a
//! difference of convex functions; the controller successively linearises
//! that decomposition around guess trajectories and solves a convex
//! program whose solution is an elementwise tube containing every
//! disturbed trajectory, together with feedforward corrections.
//!
//! Modules:
//! - [`aero`]: coefficient tables, propeller wake model, lift/drag.
//! - [`dynamics`]: the two-state nonlinear plant, constraints, trim.
//! - [`dc`]: Gram-form polynomial fitting and the convex split.
//! - [`solver`]: solver-agnostic conic problem description and backend.
//! - [`mpc`]: gains, terminal ingredients, tube problem assembly, the
//!   successive-linearisation loop and the receding-horizon controller.
//! - [`gust`]: discrete one-minus-cosine gusts and disturbance bounds.
//! - [`sim`]: closed-loop scenario runner, sweeps, reports and CSV logs.

pub mod aero;
pub mod dc;
pub mod dynamics;
pub mod gust;
pub mod mpc;
pub mod sim;
pub mod solver;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("problem infeasible: {0}")]
    Infeasible(String),
    #[error("initial guess infeasible: {0}")]
    Bootstrap(String),
    #[error("artifact error: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
