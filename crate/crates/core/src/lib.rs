//! Galton-Watson sub-trees of Levy trees under pruning (theta) and
//! sampling-intensity (lambda) dynamics.

pub mod ascension;
pub mod dynamics;
pub mod error;
pub mod gw;
pub mod harness;
pub mod mechanism;
pub mod metric;
pub mod numerics;
pub mod rng;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use mechanism::{Atom, Criticality, Landmarks, Mechanism, StablePart};
pub use tree::{NodeId, Position, SubtreeMask, Tree};
