use serde::{Deserialize, Serialize};

use super::basis::{decode_ops, encode_ops, BasisSpec, PartyRecord};
use crate::{Circuit, Error, GateKind, GateOp, Result};

/// Channel operations go right after this barrier (1-based) of a protocol
/// circuit.
pub const CHANNEL_BARRIER: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "A")]
    Accepted,
    #[serde(rename = "D")]
    Discarded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiftResult {
    pub accepted: Vec<usize>,
    pub verdicts: Vec<Verdict>,
}

impl SiftResult {
    pub fn from_verdicts(verdicts: Vec<Verdict>) -> Self {
        let accepted = verdicts
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == Verdict::Accepted)
            .map(|(i, _)| i)
            .collect();
        SiftResult { accepted, verdicts }
    }
}

/// Builds the prepare-and-measure circuit. Stages are separated by barriers:
/// bit preparation | Alice's basis rotation | channel | Bob's decoding |
/// measurement of every qubit.
pub fn build_bb84_circuit(alice: &PartyRecord, bob_bases: &[BasisSpec]) -> Result<Circuit> {
    alice.validate()?;
    if alice.is_empty() {
        return Err(Error::Empty("party record"));
    }
    if bob_bases.len() != alice.len() {
        return Err(Error::LengthMismatch { what: "Alice vs Bob bases", left: alice.len(), right: bob_bases.len() });
    }
    let n = alice.len();
    let mut c = Circuit::new(n)?;
    let encoded: Vec<Vec<GateOp>> =
        alice.bits.iter().zip(&alice.bases).enumerate().map(|(q, (&b, &basis))| encode_ops(b, basis, q)).collect();
    for ops in &encoded {
        c.extend(ops.iter().copied().filter(|o| o.kind == GateKind::X))?;
    }
    c.barrier();
    for ops in &encoded {
        c.extend(ops.iter().copied().filter(|o| o.kind != GateKind::X))?;
    }
    c.barrier().barrier();
    for (q, &basis) in bob_bases.iter().enumerate() {
        c.extend(decode_ops(basis, q))?;
    }
    c.barrier().measure_all();
    Ok(c)
}

/// Accepts index `i` iff both parties used the same basis.
pub fn sift_bb84(alice_bases: &[BasisSpec], bob_bases: &[BasisSpec]) -> Result<SiftResult> {
    if alice_bases.len() != bob_bases.len() {
        return Err(Error::LengthMismatch { what: "Alice vs Bob bases", left: alice_bases.len(), right: bob_bases.len() });
    }
    Ok(SiftResult::from_verdicts(
        alice_bases
            .iter()
            .zip(bob_bases)
            .map(|(a, b)| if a.same_as(b) { Verdict::Accepted } else { Verdict::Discarded })
            .collect(),
    ))
}

/// Fraction of `indices` where the two bit strings differ.
pub fn qber(alice_bits: &[u8], bob_bits: &[u8], indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Empty("QBER comparison set"));
    }
    if alice_bits.len() != bob_bits.len() {
        return Err(Error::LengthMismatch { what: "key lengths", left: alice_bits.len(), right: bob_bits.len() });
    }
    let mut errors = 0usize;
    for &i in indices {
        if i >= alice_bits.len() {
            return Err(Error::QubitIndex { index: i, n_qubits: alice_bits.len() });
        }
        errors += usize::from(alice_bits[i] != bob_bits[i]);
    }
    Ok(errors as f64 / indices.len() as f64)
}
