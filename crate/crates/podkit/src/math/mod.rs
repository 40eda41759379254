//! Shared numerical building blocks: special functions, Gauss quadrature,
//! derivative-free optimizers, seeded RNG streams and small statistics
//! helpers.

pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;
