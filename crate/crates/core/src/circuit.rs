use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Error, GateKind, Result, StateVector, MAX_QUBITS};

/// One gate application, optionally controlled by a second qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<usize>,
}

impl GateOp {
    pub fn new(kind: GateKind, target: usize) -> Self {
        GateOp { kind, target, control: None }
    }

    pub fn controlled(kind: GateKind, control: usize, target: usize) -> Result<Self> {
        let op = GateOp { kind, target, control: Some(control) };
        op.check_shape()?;
        Ok(op)
    }

    fn check_shape(&self) -> Result<()> {
        if let Some(c) = self.control {
            if c == self.target {
                return Err(Error::ControlIsTarget(c));
            }
            if !self.kind.is_controllable() {
                return Err(Error::NotControllable(self.kind.name().into()));
            }
        }
        if let GateKind::P(theta) = self.kind {
            if !theta.is_finite() {
                return Err(Error::NonFinite("phase angle".into()));
            }
        }
        Ok(())
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        self.check_shape()?;
        for index in std::iter::once(self.target).chain(self.control) {
            if index >= n_qubits {
                return Err(Error::QubitIndex { index, n_qubits });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    Gate(GateOp),
    /// Full-register barrier. Semantically a no-op; kept so emitted circuits
    /// show the protocol stages.
    Barrier,
}

/// An ordered list of gate applications followed by a terminal measurement of
/// `measured`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<Instruction>,
    measured: BTreeSet<usize>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        Ok(Circuit { n_qubits, ops: Vec::new(), measured: BTreeSet::new() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[Instruction] {
        &self.ops
    }

    pub fn measured(&self) -> &BTreeSet<usize> {
        &self.measured
    }

    pub fn gates(&self) -> impl Iterator<Item = &GateOp> + '_ {
        self.ops.iter().filter_map(|i| match i {
            Instruction::Gate(g) => Some(g),
            Instruction::Barrier => None,
        })
    }

    pub fn push(&mut self, op: GateOp) -> Result<&mut Self> {
        op.validate(self.n_qubits)?;
        self.ops.push(Instruction::Gate(op));
        Ok(self)
    }

    pub fn gate(&mut self, kind: GateKind, target: usize) -> Result<&mut Self> {
        self.push(GateOp::new(kind, target))
    }

    pub fn extend<I: IntoIterator<Item = GateOp>>(&mut self, ops: I) -> Result<&mut Self> {
        for op in ops {
            self.push(op)?;
        }
        Ok(self)
    }

    pub fn barrier(&mut self) -> &mut Self {
        self.ops.push(Instruction::Barrier);
        self
    }

    pub fn measure(&mut self, qubit: usize) -> Result<&mut Self> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex { index: qubit, n_qubits: self.n_qubits });
        }
        self.measured.insert(qubit);
        Ok(self)
    }

    pub fn measure_all(&mut self) -> &mut Self {
        self.measured = (0..self.n_qubits).collect();
        self
    }

    pub fn clear_measurements(&mut self) -> &mut Self {
        self.measured.clear();
        self
    }

    /// Appends the instructions of `other` (which must not be wider) and
    /// merges its measured set.
    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n_qubits > self.n_qubits {
            return Err(Error::LengthMismatch {
                what: "appended circuit width",
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        self.ops.extend_from_slice(&other.ops);
        self.measured.extend(other.measured.iter().copied());
        Ok(self)
    }

    /// Inserts instructions at position `at` of the instruction list.
    pub fn insert_at(&mut self, at: usize, ops: &[Instruction]) -> Result<&mut Self> {
        for op in ops {
            if let Instruction::Gate(g) = op {
                g.validate(self.n_qubits)?;
            }
        }
        let at = at.min(self.ops.len());
        self.ops.splice(at..at, ops.iter().copied());
        Ok(self)
    }

    /// Widens the register by `extra` qubits; existing indices are unchanged.
    pub fn widen(&mut self, extra: usize) -> Result<&mut Self> {
        let n = self.n_qubits + extra;
        if n > MAX_QUBITS {
            return Err(Error::QubitCount(n));
        }
        self.n_qubits = n;
        Ok(self)
    }

    /// Index of the instruction following the `k`-th barrier (1-based).
    pub fn after_barrier(&self, k: usize) -> Option<usize> {
        self.ops
            .iter()
            .enumerate()
            .filter(|(_, i)| matches!(i, Instruction::Barrier))
            .nth(k.checked_sub(1)?)
            .map(|(pos, _)| pos + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(self.n_qubits));
        }
        for g in self.gates() {
            g.validate(self.n_qubits)?;
        }
        if let Some(&q) = self.measured.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::QubitIndex { index: q, n_qubits: self.n_qubits });
        }
        Ok(())
    }
}

/// Applies the circuit's gates in order to `|0…0⟩`. No sampling happens here.
pub fn run_circuit(circuit: &Circuit) -> Result<StateVector> {
    circuit.validate()?;
    let mut state = StateVector::new(circuit.n_qubits())?;
    for op in circuit.gates() {
        state.apply(op)?;
    }
    Ok(state)
}
