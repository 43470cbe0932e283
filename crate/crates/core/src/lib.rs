//! Coupled bulk-surface finite element solver for ligand-receptor kinetics on
//! evolving domains.
//!
//! A bulk concentration diffuses in an annular region whose inner boundary is
//! a moving membrane carrying receptor and complex fields. The mesh follows
//! the membrane via a level-set description; binding/unbinding couple the
//! three fields through the membrane flux. The time stepper treats diffusion,
//! the ALE advection from mesh motion, the windshield boundary term and the
//! binding loss implicitly, everything else explicitly.

pub mod app;
pub mod diagnostics;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod sparse;
pub mod stepper;
