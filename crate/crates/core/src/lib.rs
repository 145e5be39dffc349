//! Damped wave equation on tree-shaped string networks: junction algebra,
//! an exact method-of-characteristics simulator, closed-form spectra for
//! star and bone trees, and a finite-difference reference solver.

pub mod charsim;
pub mod network;
pub mod scattering;
pub mod spectrum;
pub mod fdref;
