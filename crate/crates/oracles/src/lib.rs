//! Independent reference computations for the coexsim test suites.
//!
//! Nothing here shares code with the library under test: the quadrature
//! integrates densities directly, the formula transcriptions are written in
//! their undivided form, and the renewal sums evaluate the Markov chains
//! stage by stage.

pub mod formulas;
pub mod quad;
pub mod special;
