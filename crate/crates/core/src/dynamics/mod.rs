//! Truncated qubit-qubit-mode model and its Lindblad master equation.
//!
//! Basis ordering is the tensor product of the qubits in order followed by
//! the mode (last index fastest). Operators are sparse; density matrices are
//! dense, but the integrator and steady-state solver only touch the matrix
//! elements reachable from the initial support under the Liouvillian.

mod engine;
mod model;
mod state;

pub use engine::{
    default_time_step, evolve, evolve_with, steady_state, steady_state_by_evolution, Liouvillian,
    Restricted, SteadyMethod, SteadyState, SubspaceState, Trajectory,
};
pub use model::{
    build_collapse_operators, build_hamiltonian, embed, fock_cutoff_for, ladder, merge_baths,
    number, Bath, CollapseOp, Coupling, ModeParams, QubitParams, Space,
};
pub use state::{expectation, DensityMatrix, DensityRecord};
