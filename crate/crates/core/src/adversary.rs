//! Attack and noise models layered on top of protocol circuits.
//!
//! * Intercept-resend: Eve rotates with her basis, collapses the qubit,
//!   and re-prepares her own outcome in her own basis. Collapse is sampled per
//!   shot, so these circuits run through a [`Pipeline`] instead of a plain
//!   [`Circuit`].
//! * Controlled-Pauli noise: an ancilla appended as the highest qubit drives
//!   `CX`/`CY`/`CZ` onto channel qubits.
//! * Readout noise: independent classical bit flips applied after sampling.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::histogram::{sample_counts, Sampler};
use crate::protocol::{decode_ops, encode_ops, BasisSpec, CHANNEL_BARRIER};
use crate::state::bitstring;
use crate::{run_circuit, Circuit, Error, Exec, GateKind, GateOp, Instruction, Result, RngSeed, ShotHistogram, StateVector, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseGate {
    CX,
    CY,
    CZ,
}

impl NoiseGate {
    pub fn kind(self) -> GateKind {
        match self {
            NoiseGate::CX => GateKind::X,
            NoiseGate::CY => GateKind::Y,
            NoiseGate::CZ => GateKind::Z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseAttack {
    pub target: usize,
    pub gate: NoiseGate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseAttackConfig {
    pub attacks: Vec<NoiseAttack>,
    #[serde(default = "one")]
    pub ancilla_value: u8,
}

fn one() -> u8 {
    1
}

impl NoiseAttackConfig {
    pub fn targets(&self) -> BTreeSet<usize> {
        self.attacks.iter().map(|a| a.target).collect()
    }
}

fn channel_position(ops: impl Iterator<Item = bool>) -> Option<usize> {
    ops.enumerate().filter(|(_, is_barrier)| *is_barrier).nth(CHANNEL_BARRIER - 1).map(|(i, _)| i + 1)
}

/// Appends an ancilla (new highest index), sets it to `ancilla_value` at the
/// start of the circuit and places the controlled gates in the channel stage.
/// The ancilla is not measured.
pub fn inject_controlled_pauli(circuit: &Circuit, cfg: &NoiseAttackConfig) -> Result<Circuit> {
    if cfg.ancilla_value > 1 {
        return Err(Error::Invalid(format!("ancilla value {} is not a bit", cfg.ancilla_value)));
    }
    let ancilla = circuit.n_qubits();
    let mut out = circuit.clone();
    out.widen(1)?;
    if cfg.ancilla_value == 1 {
        out.insert_at(0, &[Instruction::Gate(GateOp::new(GateKind::X, ancilla))])?;
    }
    let at = channel_position(out.ops().iter().map(|i| matches!(i, Instruction::Barrier)))
        .ok_or_else(|| Error::Invalid("circuit has no channel stage".into()))?;
    let mut gates = Vec::with_capacity(cfg.attacks.len());
    for a in &cfg.attacks {
        if a.target >= ancilla {
            return Err(Error::Invalid(format!("noise target {} is not a protocol qubit (ancilla is {ancilla})", a.target)));
        }
        gates.push(Instruction::Gate(GateOp::controlled(a.gate.kind(), ancilla, a.target)?));
    }
    out.insert_at(at, &gates)?;
    Ok(out)
}

/// How Eve picks her basis for one attacked qubit.
#[derive(Clone, Debug, PartialEq)]
pub enum EveBasisChoice {
    Fixed(BasisSpec),
    /// A fresh uniform draw for every shot.
    Uniform(Vec<BasisSpec>),
}

impl EveBasisChoice {
    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> BasisSpec {
        match self {
            EveBasisChoice::Fixed(b) => *b,
            EveBasisChoice::Uniform(set) => set[rng.random_range(0..set.len())],
        }
    }

    fn options(&self) -> Vec<(BasisSpec, f64)> {
        match self {
            EveBasisChoice::Fixed(b) => vec![(*b, 1.0)],
            EveBasisChoice::Uniform(set) => set.iter().map(|&b| (b, 1.0 / set.len() as f64)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EveStrategy {
    /// One basis per attacked qubit, or a single basis for all of them.
    Fixed(Vec<BasisSpec>),
    /// Uniform over the listed bases; an empty list means the protocol's set.
    Uniform(Vec<BasisSpec>),
}

impl Default for EveStrategy {
    fn default() -> Self {
        EveStrategy::Uniform(Vec::new())
    }
}

/// Which qubits Eve intercepts and how she measures them. With neither
/// `attacked` nor `attacked_fraction` set, every qubit is attacked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EveConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacked: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacked_fraction: Option<f64>,
    #[serde(default)]
    pub strategy: EveStrategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<RngSeed>,
}

impl EveConfig {
    /// Resolves the attacked set for an `n`-qubit session. A fractional attack
    /// picks `round(fraction·n)` qubits without replacement.
    pub fn resolve(&self, n: usize, protocol_set: &[BasisSpec], seed: RngSeed) -> Result<Vec<(usize, EveBasisChoice)>> {
        let seed = self.seed.unwrap_or(seed);
        let targets: Vec<usize> = match (&self.attacked, self.attacked_fraction) {
            (Some(_), Some(_)) => return Err(Error::Config("eve: set either attacked or attacked_fraction, not both".into())),
            (Some(list), None) => {
                let set: BTreeSet<usize> = list.iter().copied().collect();
                if set.len() != list.len() {
                    return Err(Error::Config("eve: attacked indices repeat".into()));
                }
                if let Some(&q) = list.iter().find(|&&q| q >= n) {
                    return Err(Error::QubitIndex { index: q, n_qubits: n });
                }
                list.clone()
            }
            (None, Some(f)) => {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::Config(format!("eve: attacked_fraction {f} outside [0, 1]")));
                }
                let k = (f * n as f64).round() as usize;
                let mut rng = seed.derive(Stream::EveTargets, 0).rng();
                let mut v = sample(&mut rng, n, k).into_vec();
                v.sort_unstable();
                v
            }
            (None, None) => (0..n).collect(),
        };
        let choices: Vec<EveBasisChoice> = match &self.strategy {
            EveStrategy::Fixed(bases) if bases.len() == 1 => vec![EveBasisChoice::Fixed(bases[0]); targets.len()],
            EveStrategy::Fixed(bases) if bases.len() == targets.len() => {
                bases.iter().map(|&b| EveBasisChoice::Fixed(b)).collect()
            }
            EveStrategy::Fixed(bases) => {
                return Err(Error::Config(format!(
                    "eve: {} fixed bases for {} attacked qubits",
                    bases.len(),
                    targets.len()
                )))
            }
            EveStrategy::Uniform(set) => {
                let set = if set.is_empty() { protocol_set.to_vec() } else { set.clone() };
                if set.is_empty() {
                    return Err(Error::Config("eve: empty basis set".into()));
                }
                vec![EveBasisChoice::Uniform(set); targets.len()]
            }
        };
        Ok(targets.into_iter().zip(choices).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChannelStep {
    Op(Instruction),
    Intercept { qubit: usize, basis: EveBasisChoice },
}

/// A circuit that may contain mid-circuit intercept-resend steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    n_qubits: usize,
    steps: Vec<ChannelStep>,
    measured: Vec<usize>,
}

/// Upper bound on intercept steps for exact branch enumeration.
pub const MAX_EXACT_INTERCEPTS: usize = 12;

impl From<&Circuit> for Pipeline {
    fn from(c: &Circuit) -> Self {
        Pipeline {
            n_qubits: c.n_qubits(),
            steps: c.ops().iter().map(|&i| ChannelStep::Op(i)).collect(),
            measured: c.measured().iter().copied().collect(),
        }
    }
}

impl Pipeline {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn measured(&self) -> &[usize] {
        &self.measured
    }

    pub fn steps(&self) -> &[ChannelStep] {
        &self.steps
    }

    pub fn intercept_count(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, ChannelStep::Intercept { .. })).count()
    }

    /// Replaces the measured set; measurement outcomes are reported in the
    /// given order (bit `k` of an outcome is `qubits[k]`).
    pub fn set_measured(&mut self, qubits: Vec<usize>) -> Result<()> {
        if let Some(&q) = qubits.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::QubitIndex { index: q, n_qubits: self.n_qubits });
        }
        self.measured = qubits;
        Ok(())
    }

    /// Appends unitary gates after the existing steps.
    pub fn push_ops(&mut self, ops: &[GateOp]) -> Result<()> {
        for op in ops {
            op.validate(self.n_qubits)?;
            self.steps.push(ChannelStep::Op(Instruction::Gate(*op)));
        }
        Ok(())
    }

    /// Truncates everything after the channel stage (Bob's decoding and
    /// later), keeping Alice's preparation and any channel operations.
    pub fn truncate_after_channel(&mut self) -> Result<()> {
        let after = self
            .steps
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, ChannelStep::Op(Instruction::Barrier)))
            .nth(CHANNEL_BARRIER)
            .map(|(i, _)| i)
            .ok_or_else(|| Error::Invalid("pipeline has no decoding stage".into()))?;
        self.steps.truncate(after);
        Ok(())
    }

    pub fn to_circuit(&self) -> Result<Circuit> {
        let mut c = Circuit::new(self.n_qubits)?;
        for step in &self.steps {
            match step {
                ChannelStep::Op(Instruction::Gate(g)) => {
                    c.push(*g)?;
                }
                ChannelStep::Op(Instruction::Barrier) => {
                    c.barrier();
                }
                ChannelStep::Intercept { .. } => {
                    return Err(Error::Invalid("intercept-resend steps have no unitary circuit form".into()))
                }
            }
        }
        for &q in &self.measured {
            c.measure(q)?;
        }
        Ok(c)
    }

    fn intercept<R: Rng + ?Sized>(state: &mut StateVector, qubit: usize, basis: BasisSpec, rng: &mut R) -> Result<()> {
        state.apply_all(&decode_ops(basis, qubit))?;
        let (bit, mut post) = state.collapse(qubit, rng)?;
        if bit == 1 {
            post.apply(&GateOp::new(GateKind::X, qubit))?;
        }
        post.apply_all(&encode_ops(bit, basis, qubit))?;
        *state = post;
        Ok(())
    }

    /// Runs one shot up to (not including) the terminal measurement.
    pub fn run_shot<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<StateVector> {
        let mut state = StateVector::new(self.n_qubits)?;
        for step in &self.steps {
            match step {
                ChannelStep::Op(Instruction::Gate(g)) => state.apply(g)?,
                ChannelStep::Op(Instruction::Barrier) => {}
                ChannelStep::Intercept { qubit, basis } => {
                    let b = basis.pick(rng);
                    Self::intercept(&mut state, *qubit, b, rng)?;
                }
            }
        }
        Ok(state)
    }

    fn measured_distribution(&self, state: &StateVector) -> Vec<f64> {
        let probs = state.probabilities();
        if self.measured.len() == self.n_qubits && self.measured.iter().enumerate().all(|(k, &q)| k == q) {
            return probs;
        }
        let mut out = vec![0.0; 1 << self.measured.len()];
        for (i, p) in probs.into_iter().enumerate() {
            let j = self.measured.iter().enumerate().fold(0, |acc, (k, &q)| acc | (i >> q & 1) << k);
            out[j] += p;
        }
        out
    }

    /// Samples `shots` measurements of the measured qubits. Without intercepts
    /// this is one multinomial draw from the final state; with intercepts shot
    /// `k` is simulated on its own with `seed.derive(Stream::Eve, k)`.
    pub fn sample(&self, shots: u64, seed: RngSeed, exec: Exec) -> Result<ShotHistogram> {
        if self.measured.is_empty() {
            return Err(Error::Empty("measured qubits"));
        }
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        let width = self.measured.len();
        if self.intercept_count() == 0 {
            let state = run_circuit(&self.to_circuit()?)?;
            return sample_counts(&self.measured_distribution(&state), width, shots, seed, exec);
        }
        let outcomes = exec.try_map(shots as usize, |k| -> Result<usize> {
            let mut rng = seed.derive(Stream::Eve, k as u64).rng();
            let state = self.run_shot(&mut rng)?;
            Ok(Sampler::new(&self.measured_distribution(&state))?.sample(&mut rng))
        })?;
        let mut counts = BTreeMap::<usize, u64>::new();
        for o in outcomes {
            *counts.entry(o).or_default() += 1;
        }
        ShotHistogram::from_counts(width, counts)
    }

    /// Exact outcome distribution over the measured qubits, enumerating every
    /// Eve basis choice and collapse branch.
    pub fn exact_distribution(&self) -> Result<Vec<f64>> {
        if self.intercept_count() > MAX_EXACT_INTERCEPTS {
            return Err(Error::Invalid(format!("more than {MAX_EXACT_INTERCEPTS} intercepts for exact enumeration")));
        }
        let mut acc = vec![0.0; 1 << self.measured.len()];
        self.branch(StateVector::new(self.n_qubits)?, 0, 1.0, &mut acc)?;
        Ok(acc)
    }

    fn branch(&self, mut state: StateVector, from: usize, weight: f64, acc: &mut [f64]) -> Result<()> {
        for (i, step) in self.steps.iter().enumerate().skip(from) {
            match step {
                ChannelStep::Op(Instruction::Gate(g)) => state.apply(g)?,
                ChannelStep::Op(Instruction::Barrier) => {}
                ChannelStep::Intercept { qubit, basis } => {
                    for (b, wb) in basis.options() {
                        let mut rotated = state.clone();
                        rotated.apply_all(&decode_ops(b, *qubit))?;
                        let p1 = rotated.prob_one(*qubit)?;
                        for (bit, p) in [(0u8, 1.0 - p1), (1u8, p1)] {
                            if p <= 1e-15 {
                                continue;
                            }
                            let mut post = rotated.project(*qubit, bit)?;
                            if bit == 1 {
                                post.apply(&GateOp::new(GateKind::X, *qubit))?;
                            }
                            post.apply_all(&encode_ops(bit, b, *qubit))?;
                            self.branch(post, i + 1, weight * wb * p, acc)?;
                        }
                    }
                    return Ok(());
                }
            }
        }
        for (a, p) in acc.iter_mut().zip(self.measured_distribution(&state)) {
            *a += weight * p;
        }
        Ok(())
    }
}

/// Inserts an intercept-resend step for every `(qubit, basis choice)` at the
/// channel position of `pipeline`.
pub fn apply_intercept_resend(pipeline: &Pipeline, targets: &[(usize, EveBasisChoice)]) -> Result<Pipeline> {
    let at = channel_position(pipeline.steps.iter().map(|s| matches!(s, ChannelStep::Op(Instruction::Barrier))))
        .ok_or_else(|| Error::Invalid("pipeline has no channel stage".into()))?;
    let mut steps = Vec::with_capacity(targets.len());
    for (q, choice) in targets {
        if *q >= pipeline.n_qubits {
            return Err(Error::QubitIndex { index: *q, n_qubits: pipeline.n_qubits });
        }
        if let EveBasisChoice::Uniform(set) = choice {
            if set.is_empty() {
                return Err(Error::Config("eve: empty basis set".into()));
            }
        }
        steps.push(ChannelStep::Intercept { qubit: *q, basis: choice.clone() });
    }
    let mut out = pipeline.clone();
    out.steps.splice(at..at, steps);
    Ok(out)
}

/// Per-qubit readout error: `p01` = P(read 1 | true 0), `p10` = P(read 0 | true 1).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutError {
    pub p01: f64,
    pub p10: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReadoutNoiseModel {
    pub qubits: Vec<ReadoutError>,
}

impl ReadoutNoiseModel {
    pub fn uniform(n: usize, p01: f64, p10: f64) -> Self {
        ReadoutNoiseModel { qubits: vec![ReadoutError { p01, p10 }; n] }
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (q, e) in self.qubits.iter().enumerate() {
            for p in [e.p01, e.p10] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!("readout error probability {p} on qubit {q} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// The model restricted to `qubits`, in that order.
    pub fn select(&self, qubits: &[usize]) -> Result<Self> {
        qubits
            .iter()
            .map(|&q| self.qubits.get(q).copied().ok_or(Error::QubitIndex { index: q, n_qubits: self.qubits.len() }))
            .collect::<Result<Vec<_>>>()
            .map(|qubits| ReadoutNoiseModel { qubits })
    }

    /// Flips each bit of `outcome` independently.
    pub fn corrupt<R: Rng + ?Sized>(&self, outcome: usize, rng: &mut R) -> usize {
        let mut out = outcome;
        for (q, e) in self.qubits.iter().enumerate() {
            let p = if outcome >> q & 1 == 1 { e.p10 } else { e.p01 };
            if p > 0.0 && rng.random::<f64>() < p {
                out ^= 1 << q;
            }
        }
        out
    }
}

/// Applies readout noise shot by shot. Outcome key `i` uses
/// `seed.derive(Stream::Readout, i)`.
pub fn apply_readout_noise(hist: &ShotHistogram, model: &ReadoutNoiseModel, seed: RngSeed) -> Result<ShotHistogram> {
    apply_readout_noise_with(hist, model, seed, Exec::default())
}

pub fn apply_readout_noise_with(hist: &ShotHistogram, model: &ReadoutNoiseModel, seed: RngSeed, exec: Exec) -> Result<ShotHistogram> {
    if model.len() != hist.n_qubits() {
        return Err(Error::LengthMismatch { what: "readout model vs histogram width", left: model.len(), right: hist.n_qubits() });
    }
    model.validate()?;
    let entries: Vec<(usize, u64)> = hist.counts().iter().map(|(&i, &c)| (i, c)).collect();
    let partial = exec.map(entries.len(), |k| {
        let (index, count) = entries[k];
        let mut rng = seed.derive(Stream::Readout, index as u64).rng();
        let mut counts = BTreeMap::<usize, u64>::new();
        for _ in 0..count {
            *counts.entry(model.corrupt(index, &mut rng)).or_default() += 1;
        }
        counts
    });
    let mut out = ShotHistogram::new(hist.n_qubits())?;
    for counts in partial {
        for (i, c) in counts {
            out.add(i, c)?;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMode {
    /// One prepared state per computational basis state.
    Full,
    /// All-zeros and all-ones only; per-qubit confusion from their marginals.
    Tensored,
}

pub const FULL_CALIBRATION_MAX_QUBITS: usize = 12;

impl CalibrationMode {
    pub fn for_width(n: usize) -> Self {
        if n > FULL_CALIBRATION_MAX_QUBITS {
            CalibrationMode::Tensored
        } else {
            CalibrationMode::Full
        }
    }
}

/// Observed histograms keyed by the prepared bitstring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    pub n_qubits: usize,
    pub mode: CalibrationMode,
    pub shots: u64,
    pub histograms: BTreeMap<String, ShotHistogram>,
}

/// Prepares computational basis states with `X` gates only, samples `shots`
/// each and passes the outcomes through `model`.
pub fn build_calibration_set(
    n_qubits: usize,
    model: &ReadoutNoiseModel,
    shots: u64,
    seed: RngSeed,
    mode: CalibrationMode,
) -> Result<CalibrationSet> {
    if model.len() != n_qubits {
        return Err(Error::LengthMismatch { what: "readout model vs calibration width", left: model.len(), right: n_qubits });
    }
    let prepared: Vec<usize> = match mode {
        CalibrationMode::Full => {
            if n_qubits > FULL_CALIBRATION_MAX_QUBITS {
                return Err(Error::Config(format!(
                    "full calibration is limited to {FULL_CALIBRATION_MAX_QUBITS} qubits (got {n_qubits}); use tensored mode"
                )));
            }
            (0..1usize << n_qubits).collect()
        }
        CalibrationMode::Tensored => vec![0, (1usize << n_qubits) - 1],
    };
    let mut histograms = BTreeMap::new();
    for p in prepared {
        let mut c = Circuit::new(n_qubits)?;
        for q in (0..n_qubits).filter(|q| p >> q & 1 == 1) {
            c.gate(GateKind::X, q)?;
        }
        c.measure_all();
        let s = seed.derive(Stream::Calibration, p as u64);
        let ideal = crate::measure_all(&run_circuit(&c)?, shots, s)?;
        histograms.insert(bitstring(p, n_qubits), apply_readout_noise(&ideal, model, s)?);
    }
    Ok(CalibrationSet { n_qubits, mode, shots, histograms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{build_bb84_circuit, PartyRecord};

    fn single(bit: u8, alice: BasisSpec, bob: BasisSpec) -> Circuit {
        build_bb84_circuit(&PartyRecord::new(vec![bit], vec![alice]).unwrap(), &[bob]).unwrap()
    }

    #[test]
    fn control_off_is_neutral() {
        let c = single(1, BasisSpec::HZ, BasisSpec::HZ);
        let cfg = NoiseAttackConfig { attacks: vec![NoiseAttack { target: 0, gate: NoiseGate::CZ }], ancilla_value: 0 };
        let attacked = inject_controlled_pauli(&c, &cfg).unwrap();
        assert_eq!(attacked.n_qubits(), 2);
        assert_eq!(attacked.measured().iter().copied().collect::<Vec<_>>(), vec![0]);
        let p = run_circuit(&attacked).unwrap().prob_one(0).unwrap();
        assert_eq!(p, run_circuit(&c).unwrap().prob_one(0).unwrap());
    }

    #[test]
    fn noise_target_must_be_protocol_qubit() {
        let c = single(0, BasisSpec::X, BasisSpec::X);
        let cfg = NoiseAttackConfig { attacks: vec![NoiseAttack { target: 1, gate: NoiseGate::CX }], ancilla_value: 1 };
        assert!(inject_controlled_pauli(&c, &cfg).is_err());
        let bare = Circuit::new(1).unwrap();
        let cfg = NoiseAttackConfig { attacks: vec![NoiseAttack { target: 0, gate: NoiseGate::CX }], ancilla_value: 1 };
        assert!(inject_controlled_pauli(&bare, &cfg).is_err());
    }

    #[test]
    fn eve_resolution() {
        let eve = EveConfig { attacked: Some(vec![0, 3]), strategy: EveStrategy::Fixed(vec![BasisSpec::X]), ..Default::default() };
        let r = eve.resolve(5, &[], RngSeed(0)).unwrap();
        assert_eq!(r, vec![(0, EveBasisChoice::Fixed(BasisSpec::X)), (3, EveBasisChoice::Fixed(BasisSpec::X))]);

        let eve = EveConfig { attacked_fraction: Some(0.5), ..Default::default() };
        let r = eve.resolve(10, &[BasisSpec::Z, BasisSpec::X], RngSeed(1)).unwrap();
        assert_eq!(r.len(), 5);
        assert_eq!(r, eve.resolve(10, &[BasisSpec::Z, BasisSpec::X], RngSeed(1)).unwrap());

        assert!(EveConfig { attacked: Some(vec![7]), ..Default::default() }.resolve(5, &[BasisSpec::X], RngSeed(0)).is_err());
        assert!(EveConfig { attacked: Some(vec![1]), attacked_fraction: Some(0.1), ..Default::default() }
            .resolve(5, &[BasisSpec::X], RngSeed(0))
            .is_err());
        assert!(EveConfig { strategy: EveStrategy::Fixed(vec![BasisSpec::X; 2]), ..Default::default() }
            .resolve(5, &[], RngSeed(0))
            .is_err());
        assert!(EveConfig::default().resolve(3, &[], RngSeed(0)).is_err());
    }

    #[test]
    fn matched_eve_is_invisible_and_mismatched_eve_randomises() {
        let c = single(1, BasisSpec::HZ, BasisSpec::HZ);
        let p = Pipeline::from(&c);
        let same = apply_intercept_resend(&p, &[(0, EveBasisChoice::Fixed(BasisSpec::HZ))]).unwrap();
        assert!((same.exact_distribution().unwrap()[1] - 1.0).abs() < 1e-12);

        let c = single(1, BasisSpec::Y, BasisSpec::Y);
        let wrong = apply_intercept_resend(&Pipeline::from(&c), &[(0, EveBasisChoice::Fixed(BasisSpec::X))]).unwrap();
        assert!((wrong.exact_distribution().unwrap()[1] - 0.5).abs() < 1e-12);
        assert!(wrong.to_circuit().is_err());
    }

    #[test]
    fn sampled_pipeline_matches_exact_and_exec() {
        let c = single(0, BasisSpec::X, BasisSpec::X);
        let eve = apply_intercept_resend(&Pipeline::from(&c), &[(0, EveBasisChoice::Uniform(vec![BasisSpec::Z, BasisSpec::X]))]).unwrap();
        let exact = eve.exact_distribution().unwrap();
        assert!((exact[1] - 0.25).abs() < 1e-12);
        let a = eve.sample(8192, RngSeed(3), Exec::Sequential).unwrap();
        let b = eve.sample(8192, RngSeed(3), Exec::Parallel).unwrap();
        assert_eq!(a, b);
        let (_, p1) = a.marginal(0).unwrap();
        assert!((p1 - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / 8192.0).sqrt());
    }

    #[test]
    fn readout_noise_examples() {
        let ideal = ShotHistogram::from_bitstrings(1, [("1", 8192)]).unwrap();
        let same = apply_readout_noise(&ideal, &ReadoutNoiseModel::uniform(1, 0.0, 0.0), RngSeed(0)).unwrap();
        assert_eq!(same, ideal);

        let noisy = apply_readout_noise(&ideal, &ReadoutNoiseModel::uniform(1, 0.0, 0.03), RngSeed(0)).unwrap();
        let (_, p1) = noisy.marginal(0).unwrap();
        let sigma = (0.03f64 * 0.97 / 8192.0).sqrt();
        assert!((p1 - 0.97).abs() < 3.0 * sigma, "{p1}");

        let zeros = ShotHistogram::from_bitstrings(1, [("0", 8192)]).unwrap();
        for h in [&ideal, &zeros] {
            let r = apply_readout_noise(h, &ReadoutNoiseModel::uniform(1, 0.5, 0.5), RngSeed(4)).unwrap();
            assert!((r.marginal(0).unwrap().1 - 0.5).abs() < 3.0 * (0.25f64 / 8192.0).sqrt());
        }

        assert!(apply_readout_noise(&ideal, &ReadoutNoiseModel::uniform(2, 0.0, 0.0), RngSeed(0)).is_err());
        assert!(apply_readout_noise(&ideal, &ReadoutNoiseModel::uniform(1, 1.5, 0.0), RngSeed(0)).is_err());
    }

    #[test]
    fn readout_noise_marginal_formula() {
        // true p = 0.3 on one qubit, p01 = 0.1, p10 = 0.2
        let h = ShotHistogram::from_counts(1, [(0, 70_000), (1, 30_000)]).unwrap();
        let noisy = apply_readout_noise(&h, &ReadoutNoiseModel::uniform(1, 0.1, 0.2), RngSeed(8)).unwrap();
        let expected: f64 = (1.0 - 0.2) * 0.3 + 0.1 * 0.7;
        let sigma = (expected * (1.0 - expected) / 100_000.0).sqrt();
        assert!((noisy.marginal(0).unwrap().1 - expected).abs() < 4.0 * sigma);
    }

    #[test]
    fn calibration_sets() {
        let cal = build_calibration_set(1, &ReadoutNoiseModel::uniform(1, 0.0, 0.0), 1000, RngSeed(0), CalibrationMode::Full).unwrap();
        assert_eq!(cal.histograms["0"].count_of("0"), 1000);
        assert_eq!(cal.histograms["1"].count_of("1"), 1000);

        let cal = build_calibration_set(1, &ReadoutNoiseModel::uniform(1, 0.1, 0.0), 8192, RngSeed(2), CalibrationMode::Full).unwrap();
        let f = cal.histograms["0"].count_of("1") as f64 / 8192.0;
        assert!((f - 0.1).abs() < 3.0 * (0.09f64 / 8192.0).sqrt());

        let cal = build_calibration_set(2, &ReadoutNoiseModel::uniform(2, 0.0, 0.0), 10, RngSeed(0), CalibrationMode::Full).unwrap();
        assert_eq!(cal.histograms.len(), 4);
        let cal = build_calibration_set(3, &ReadoutNoiseModel::uniform(3, 0.0, 0.0), 10, RngSeed(0), CalibrationMode::Tensored).unwrap();
        assert_eq!(cal.histograms.keys().cloned().collect::<Vec<_>>(), vec!["000", "111"]);

        assert!(build_calibration_set(13, &ReadoutNoiseModel::uniform(13, 0.0, 0.0), 10, RngSeed(0), CalibrationMode::Full).is_err());
        assert_eq!(CalibrationMode::for_width(13), CalibrationMode::Tensored);
    }
}
