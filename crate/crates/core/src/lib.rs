//! Collision operators, equilibria and relaxation for polyatomic Boltzmann gases.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod collide;
pub mod equilib;
pub mod fitlab;
pub mod hypotheses;
pub mod error;
pub mod model;
pub mod operator;
pub mod quadrature;
pub mod relax;
pub mod vec3;

pub use error::{Error, Result};
