//! Self-organizing logic circuits for fixed-point inversion.
//!
//! The pipeline turns `b = c / a` into an exact integer identity
//! ([`embedding`]), builds the multiplier circuit that checks it
//! ([`circuit`]), and lets the continuous dynamics of that circuit settle
//! on a satisfying assignment ([`dynamics`]). [`verify`] holds the
//! brute-force oracles and [`linear`] extends the construction to 2×2
//! linear systems.

pub mod circuit;
pub mod dynamics;
pub mod embedding;
pub mod harness;
pub mod linear;
pub mod verify;
