//! Dynamics toolkit for an atomic-force-microscope cantilever under a
//! Lennard-Jones tip-sample force with squeeze-film damping and harmonic
//! forcing.
//!
//! The pipeline runs bottom-up:
//!
//! * [`model`]: the shifted force `m(x)`, energy and vector fields;
//! * [`equilibria`]: roots of `m(x) + a` and their classification;
//! * [`bifurcation`]: fold points in `a` and branch diagrams;
//! * [`homoclinic`]: the figure-eight separatrix through the saddle;
//! * [`melnikov`]: the forcing/damping integrals and the persistence threshold;
//! * [`verify`]: a direct simulation of manifold splitting for comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod equilibria;
mod error;
pub mod homoclinic;
pub mod melnikov;
pub mod model;
pub mod ode;
pub mod output;
pub mod parallel;
pub mod quad;
pub mod reference_case;
pub mod roots;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Params, PhaseState, Regime};
pub use parallel::Execution;
