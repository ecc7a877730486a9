//! Prepare-and-measure protocols: BB84 over two or four bases and SARG04.

mod basis;
mod bb84;
mod sarg04;
mod session;

pub use basis::{decode_ops, encode_ops, BasisAlias, BasisSpec, PartyRecord};
pub use bb84::{build_bb84_circuit, qber, sift_bb84, SiftResult, Verdict, CHANNEL_BARRIER};
pub use sarg04::{
    build_sarg04_circuit, reference_basis, sarg04_announce, sarg04_encode, sarg04_key_bit, sarg04_sift_standard,
    sarg04_state, Sarg04Announcement, SargState,
};
pub use session::{
    exact_marginals, lane_pipeline, run_bb84_session, run_sarg04_session, run_session, session_circuit, session_parties, session_pipeline, Backend, KeyMode, Protocol,
    QubitMarginal, SessionConfig, SessionResult, DEFAULT_CHECK_FRACTION, DEFAULT_SHOTS, DEFAULT_THRESHOLD,
};

use std::f64::consts::{PI, TAU};

/// Wraps a phase into `(-π, π]`.
pub fn normalize_phase(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t -= TAU;
    }
    t
}
