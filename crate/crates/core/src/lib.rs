//! Binary cycles stored in Hopfield-type networks with delayed couplings.
//!
//! Modules, bottom-up:
//! - [`cycle`]: cycles, admissibility, classification, selected indices
//! - [`learning`]: pseudoinverse learning rule and network parameters
//! - [`graph`]: discrete transition graph and coexisting loops
//! - [`sim`]: delayed-network integration and retrieval read-out
//! - [`stability`]: characteristic roots and bifurcation boundaries of the trivial solution
//! - [`equilibria`]: memory-state equilibria, saddle-node curve, ring equilibria

pub mod cycle;
pub mod equilibria;
pub mod error;
pub mod graph;
pub mod learning;
mod linalg;
pub mod sim;
pub mod stability;

pub use cycle::{BinaryCycle, CycleClass, CycleKind, IndexSelection};
pub use error::{Error, Result};
pub use graph::TransitionGraph;
pub use learning::{Connectivity, NetworkParams};
pub use sim::{InitialHistory, RetrievalReport, Trajectory};
