//! Files, configuration, simulation and command-line front end for the
//! `locasso-core` selection and estimation procedures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod simulation;

pub use error::SimError;
