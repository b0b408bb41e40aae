use thiserror::Error;

use crate::lattice::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice {lx}x{ly}: both dimensions must be at least 2")]
    InvalidLattice { lx: usize, ly: usize },

    #[error("coordinate ({x}, {y}) outside {lx}x{ly} lattice")]
    OutOfRange { x: usize, y: usize, lx: usize, ly: usize },

    #[error("bond id {bond} outside lattice with {num_bonds} bonds")]
    BondOutOfRange { bond: usize, num_bonds: usize },

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("expected a {expected} loop")]
    WrongKind { expected: &'static str },

    #[error("invalid game instance: {}", format_violations(.0))]
    InvalidInstance(Vec<Violation>),

    #[error("requested {teams} teams but the lattice has only {columns} columns")]
    NotEnoughColumns { teams: usize, columns: usize },

    #[error("modulus must be at least 2, got {0}")]
    InvalidModulus(u32),

    #[error("input {input:?} violates the promise (sum must be divisible by {modulus})")]
    PromiseViolated { input: Vec<u32>, modulus: u32 },

    #[error("state with {amplitudes} amplitudes exceeds the budget of {budget}")]
    MemoryBudget { amplitudes: u128, budget: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("projection produced the zero vector: {0}")]
    ZeroProjection(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("stabilizer generators are invalid: {0}")]
    InvalidStabilizers(String),

    #[error("strategy shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("search space too large: about {work} evaluations, budget is {budget}")]
    SearchBudget { work: u128, budget: u128 },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("no convergence after {cycles} projection cycles (last change {last_change:e})")]
    Inconclusive { cycles: usize, last_change: f64 },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
