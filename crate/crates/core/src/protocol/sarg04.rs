//! SARG04 encoding and the pair-announcement sifting rule.
//!
//! Alice's reference bit `y` picks the basis (0: computational, 1: Hadamard)
//! and `x` is the bit encoded in it. In the standard protocol Alice then
//! announces a pair made of one computational and one Hadamard state, one of
//! which is the state she sent. Bob keeps the round only when his outcome is
//! orthogonal to the pair member in his own measurement basis.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::basis::{BasisSpec, PartyRecord};
use super::bb84::build_bb84_circuit;
use crate::{Circuit, Error, GateKind, GateOp, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SargState {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl SargState {
    pub fn is_hadamard(self) -> bool {
        matches!(self, SargState::Plus | SargState::Minus)
    }

    /// The outcome this state yields with certainty in its own basis.
    pub fn bit(self) -> u8 {
        match self {
            SargState::Zero | SargState::Plus => 0,
            SargState::One | SargState::Minus => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sarg04Announcement {
    pub z_state: SargState,
    pub x_state: SargState,
    /// Hidden from Bob: whether the transmitted state is `x_state` (= y).
    #[serde(skip)]
    pub actual_is_x: bool,
}

/// The basis named by a SARG04 reference bit.
pub fn reference_basis(y: u8) -> BasisSpec {
    if y == 1 {
        BasisSpec::X
    } else {
        BasisSpec::Z
    }
}

pub fn sarg04_state(x: u8, y: u8) -> SargState {
    match (x, y) {
        (0, 0) => SargState::Zero,
        (_, 0) => SargState::One,
        (0, _) => SargState::Plus,
        _ => SargState::Minus,
    }
}

/// `y = 0`: `[X]` when `x = 1`, else nothing. `y = 1`: the same followed by `H`.
pub fn sarg04_encode(x: u8, y: u8, target: usize) -> Vec<GateOp> {
    let mut ops = Vec::with_capacity(2);
    if x == 1 {
        ops.push(GateOp::new(GateKind::X, target));
    }
    if y == 1 {
        ops.push(GateOp::new(GateKind::H, target));
    }
    ops
}

/// The announced pair: the transmitted state plus a uniformly drawn decoy
/// from the other basis, always listed as `(z_state, x_state)`.
pub fn sarg04_announce<R: Rng + ?Sized>(x: u8, y: u8, rng: &mut R) -> Sarg04Announcement {
    let actual = sarg04_state(x, y);
    let decoy_bit = u8::from(rng.random_bool(0.5));
    if y == 1 {
        Sarg04Announcement { z_state: sarg04_state(decoy_bit, 0), x_state: actual, actual_is_x: true }
    } else {
        Sarg04Announcement { z_state: actual, x_state: sarg04_state(decoy_bit, 1), actual_is_x: false }
    }
}

/// The secret bit carried by a conclusive round: Alice's reference bit.
pub fn sarg04_key_bit(actual_is_x: bool) -> u8 {
    u8::from(actual_is_x)
}

/// Bob measured in `bob_basis` (computational when `bob_y = 0`, Hadamard
/// when 1) and saw `outcome`. Returns the deduced key bit when the outcome
/// rules out the pair member of his own basis.
pub fn sarg04_sift_standard(announcement: &Sarg04Announcement, bob_y: u8, outcome: u8) -> Option<u8> {
    let (same_basis, other_is_x) =
        if bob_y == 1 { (announcement.x_state, false) } else { (announcement.z_state, true) };
    (outcome != same_basis.bit()).then(|| sarg04_key_bit(other_is_x))
}

/// Reference-bit circuit: reference bits select the encoding and decoding
/// bases; the layout matches [`build_bb84_circuit`].
pub fn build_sarg04_circuit(x: &[u8], y: &[u8], y_bob: &[u8]) -> Result<Circuit> {
    if y.len() != x.len() || y_bob.len() != x.len() {
        return Err(Error::LengthMismatch { what: "SARG04 bit strings", left: x.len(), right: y.len().max(y_bob.len()) });
    }
    let alice = PartyRecord::new(x.to_vec(), y.iter().map(|&b| reference_basis(b)).collect())?;
    let bob: Vec<BasisSpec> = y_bob.iter().map(|&b| reference_basis(b)).collect();
    build_bb84_circuit(&alice, &bob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::encode_ops;
    use crate::{run_circuit, RngSeed, StateVector};

    #[test]
    fn encode_examples() {
        let kinds = |ops: Vec<GateOp>| ops.into_iter().map(|o| o.kind).collect::<Vec<_>>();
        assert_eq!(kinds(sarg04_encode(1, 0, 0)), vec![GateKind::X]);
        assert_eq!(kinds(sarg04_encode(0, 1, 0)), vec![GateKind::H]);
        assert_eq!(kinds(sarg04_encode(1, 1, 0)), vec![GateKind::X, GateKind::H]);
        assert!(sarg04_encode(0, 0, 0).is_empty());
        for x in 0..2 {
            for y in 0..2 {
                assert_eq!(sarg04_encode(x, y, 0), encode_ops(x, reference_basis(y), 0));
            }
        }
    }

    #[test]
    fn encoded_minus_state() {
        let mut s = StateVector::new(1).unwrap();
        s.apply_all(&sarg04_encode(1, 1, 0)).unwrap();
        assert!(s.amplitudes()[1].re < 0.0 && s.amplitudes()[0].re > 0.0);
    }

    #[test]
    fn announcement_contains_actual_state() {
        let mut rng = RngSeed(5).rng();
        let mut decoy_plus = 0;
        for i in 0..4000u32 {
            let (x, y) = ((i % 2) as u8, ((i / 2) % 2) as u8);
            let a = sarg04_announce(x, y, &mut rng);
            let actual = sarg04_state(x, y);
            assert!(a.z_state == actual || a.x_state == actual);
            assert!(!a.z_state.is_hadamard() && a.x_state.is_hadamard());
            assert_eq!(a.actual_is_x, y == 1);
            if y == 0 && a.x_state == SargState::Plus {
                decoy_plus += 1;
            }
        }
        // 2000 decoys drawn, 3σ = 3·sqrt(2000/4) ≈ 67
        assert!((decoy_plus as i64 - 1000).abs() < 67, "{decoy_plus}");
    }

    #[test]
    fn sift_examples() {
        let pair = Sarg04Announcement { z_state: SargState::Zero, x_state: SargState::Plus, actual_is_x: true };
        assert_eq!(sarg04_sift_standard(&pair, 0, 1), Some(1));
        assert_eq!(sarg04_sift_standard(&pair, 0, 0), None);
        assert_eq!(sarg04_sift_standard(&pair, 1, 1), Some(0));
        assert_eq!(sarg04_sift_standard(&pair, 1, 0), None);
    }

    /// Enumerates (x, y, decoy, Bob's basis) with exact outcome probabilities
    /// taken from the statevector.
    #[test]
    fn noiseless_conclusive_rate_is_a_quarter_and_always_correct() {
        let mut conclusive = 0.0;
        let mut wrong = 0.0;
        for x in 0..2u8 {
            for y in 0..2u8 {
                for decoy in 0..2u8 {
                    let actual = sarg04_state(x, y);
                    let ann = if y == 1 {
                        Sarg04Announcement { z_state: sarg04_state(decoy, 0), x_state: actual, actual_is_x: true }
                    } else {
                        Sarg04Announcement { z_state: actual, x_state: sarg04_state(decoy, 1), actual_is_x: false }
                    };
                    for bob_y in 0..2u8 {
                        let mut c = Circuit::new(1).unwrap();
                        c.extend(sarg04_encode(x, y, 0)).unwrap();
                        if bob_y == 1 {
                            c.gate(GateKind::H, 0).unwrap();
                        }
                        let p1 = run_circuit(&c).unwrap().prob_one(0).unwrap();
                        for (outcome, p) in [(0u8, 1.0 - p1), (1u8, p1)] {
                            let w = p / 16.0;
                            if let Some(k) = sarg04_sift_standard(&ann, bob_y, outcome) {
                                conclusive += w;
                                if k != y {
                                    wrong += w;
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!((conclusive - 0.25).abs() < 1e-12, "{conclusive}");
        assert!(wrong.abs() < 1e-12);
    }
}
