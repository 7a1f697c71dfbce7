//! Driven Casimir oscillator: equilibria, homoclinic orbits, Melnikov
//! thresholds for chaos and brute-force survival maps.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod conservative;
pub mod duffing;
pub mod dynamics;
pub mod force;
pub mod interp;
pub mod melnikov;
pub mod output;
pub mod params;
pub mod quadrature;
pub mod system;
