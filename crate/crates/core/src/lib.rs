//! Simulation toolkit for the multi-team toric code nonlocal game.
//!
//! * [`lattice`]: torus geometry, loops, homology and game instances.
//! * [`stabilizer`]: bit-packed tableau backend for qubits.
//! * [`statevector`]: dense backend for qubits and Z_M qudits.
//! * [`game`]: referee, quantum and classical round play, win statistics.
//! * [`classical`]: exhaustive search over deterministic strategies.
//! * [`analysis`]: closed-form win probability and ground-state certification.

pub mod analysis;
pub mod classical;
pub mod error;
pub mod game;
pub mod lattice;
pub mod stabilizer;
pub mod statevector;

pub use error::{Error, Result};
