//! LBT coexistence modelling: energy detection, analytic fixed point,
//! LBT state machines, MulteFire uplink protocol helpers and a slot-level
//! simulator.

pub mod analytic;
pub mod cli;
pub mod config;
pub mod detection;
pub mod lbt;
pub mod output;
pub mod protocol;
pub mod sim;
