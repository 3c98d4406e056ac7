//! Pseudo-spectral simulation of the nonlocal transport flow
//! `∂ₜy + (𝙿y·∇)y = 0` on the periodic torus `[0, 2π)²`, where `𝙿` is the
//! Leray projector.
//!
//! Steady states of the flow are gradients, and near a map with strictly
//! convex potential the divergence-free part `𝙿y` decays exponentially while
//! `y` relaxes to the optimal (Brenier) rearrangement of its initial data.
//! The crate provides the spectral substrate ([`fields`]), the projector and
//! its advective commutator ([`leray`]), time integration of the perturbation
//! system ([`dynamics`]), measurement of every conserved or decaying quantity
//! ([`diagnostics`]), and an independent discrete optimal-transport oracle
//! ([`oracle`]).

pub mod diagnostics;
pub mod dynamics;
pub mod fields;
pub mod leray;
pub mod oracle;
