//! Exact statevector simulation and analysis toolkit for prepare-and-measure
//! quantum key distribution.
//!
//! The crate is organised bottom-up:
//!
//! * [`gate`], [`circuit`], [`state`] and [`histogram`] form the simulation
//!   core. Every other module treats [`StateVector`] as the ground truth.
//! * [`qasm`] reads and writes the OpenQASM 2.0 subset used by the lab.
//! * [`protocol`] builds BB84 (two and four bases) and SARG04 sessions.
//! * [`adversary`] holds intercept-resend, controlled-Pauli noise and readout
//!   noise models.
//! * [`analysis`] covers tomography, fidelity, readout-error mitigation and
//!   report generation.
//!
//! Randomness is always explicit: every sampling call takes an [`RngSeed`],
//! and child seeds are derived with [`RngSeed::derive`], so results do not
//! depend on thread count or on whether the `parallel` feature is enabled.

pub mod adversary;
pub mod analysis;
pub mod circuit;
mod error;
pub mod exec;
pub mod gate;
pub mod histogram;
pub mod protocol;
pub mod qasm;
pub mod seed;
pub mod state;

pub use circuit::{run_circuit, Circuit, GateOp, Instruction};
pub use error::{Error, Result};
pub use exec::Exec;
pub use gate::{gate_matrix, Amp, GateKind, Unitary2};
pub use histogram::{measure_all, ShotHistogram};
pub use seed::{RngSeed, Stream};
pub use state::{exact_probabilities, StateVector, MAX_QUBITS};
