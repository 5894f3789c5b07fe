//! Design, continuum generation and certified switching of exponentially
//! stable walking gaits for a planar five-link biped with point feet.
//!
//! The pipeline is: design a base gait ([`design`]), certify its periodic
//! orbit ([`limit_cycle`]), modulate it into a one-parameter family of
//! gaits indexed by speed ([`continuum`]), decide which switches between
//! family members are safe and how long to dwell on each ([`switching`]),
//! and finally track a speed schedule by switching gaits online
//! ([`supervisor`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod continuum;
pub mod control;
pub mod design;
pub mod error;
pub mod export;
pub mod limit_cycle;
pub mod model;
pub mod ode;
pub mod optim;
pub mod outputs;
pub mod pipeline;
pub mod qp;
pub mod sim;
pub mod supervisor;
pub mod switching;
pub mod zero_dynamics;

pub use error::{Error, Result};
pub use model::{Biped, ModelParams, State};
pub use outputs::{BezierOutputs, GaitParams};
