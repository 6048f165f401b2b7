//! Quantum transport of a particle in a random potential on rooted regular trees.
//!
//! The crate covers exact Green-function recursion on truncated trees,
//! population dynamics for the infinite-tree Green-function distribution,
//! wave-packet propagation, and a harness that checks transport inequalities
//! against Monte-Carlo and dynamics output.

pub mod bounds;
pub mod cli;
pub mod disorder;
pub mod dynamics;
pub mod error;
pub mod green;
pub mod population;
pub mod rng;
pub mod stats;
pub mod tree;

pub use disorder::{sample_field, PotentialDistribution, PotentialField};
pub use error::{Error, Result};
pub use green::{Boundary, ComplexEnergy};
pub use population::GreenPool;
pub use tree::TreeGeometry;
