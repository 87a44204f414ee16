//! Numerical toolkit for the rigid O(n) loop model on bipartite Boltzmann
//! planar maps.
//!
//! The crate solves the spectral-density equations of the model (phase
//! classification and disk functions), samples loop-decorated maps and their
//! peeling explorations, simulates the associated ricocheted random walks,
//! and evaluates the closed-form limit laws (first-passage percolation
//! radii, nesting and winding statistics) that the simulations are checked
//! against.

pub mod exec;
pub mod hfuncs;
pub mod model;
pub mod quad;
pub mod resolvent;
pub mod rng;
pub mod special;
