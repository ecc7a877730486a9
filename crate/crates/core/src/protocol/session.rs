//! Whole protocol runs: randomness generation, transmission, sifting, check-bit
//! estimation and key extraction.
//!
//! Two key-extraction modes are offered. In statistics mode the full circuit
//! is sampled `shots` times and Bob's bit for qubit `i` is the majority
//! outcome of that qubit. In single-shot mode every qubit is one transmission
//! measured exactly once; qubits are simulated as independent lanes, so `n`
//! is not limited by the statevector size.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::basis::{BasisSpec, PartyRecord};
use super::bb84::{build_bb84_circuit, qber, sift_bb84, SiftResult, Verdict};
use super::sarg04::{sarg04_announce, sarg04_sift_standard, Sarg04Announcement};
use crate::adversary::{
    apply_intercept_resend, apply_readout_noise_with, inject_controlled_pauli, EveBasisChoice, EveConfig,
    NoiseAttack, NoiseAttackConfig, Pipeline, ReadoutNoiseModel,
};
use crate::{Circuit, Error, Exec, Result, RngSeed, ShotHistogram, Stream, MAX_QUBITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "BB84-2")]
    Bb84Two,
    #[serde(rename = "BB84-4")]
    Bb84Four,
    /// Private reference-bit comparison; key bit = x.
    #[serde(rename = "SARG04-paper")]
    Sarg04Paper,
    /// Pair announcement and conclusive-outcome sifting; key bit = y.
    #[serde(rename = "SARG04-standard")]
    Sarg04Standard,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Bb84Two => "BB84-2",
            Protocol::Bb84Four => "BB84-4",
            Protocol::Sarg04Paper => "SARG04-paper",
            Protocol::Sarg04Standard => "SARG04-standard",
        }
    }

    pub fn is_sarg04(self) -> bool {
        matches!(self, Protocol::Sarg04Paper | Protocol::Sarg04Standard)
    }

    pub fn default_basis_set(self) -> Vec<BasisSpec> {
        match self {
            Protocol::Bb84Four => vec![BasisSpec::X, BasisSpec::Y, BasisSpec::HT, BasisSpec::HZ],
            _ => vec![BasisSpec::Z, BasisSpec::X],
        }
    }

    pub fn default_mode(self) -> KeyMode {
        match self {
            Protocol::Sarg04Standard => KeyMode::SingleShot,
            _ => KeyMode::Statistics,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyMode {
    Statistics,
    SingleShot,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum Backend {
    #[default]
    Ideal,
    ReadoutNoise(ReadoutNoiseModel),
}

/// Everything needed to run one session. Bits and bases left as `None` are
/// drawn from `seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub protocol: Protocol,
    pub n_bits: Option<usize>,
    pub alice_bits: Option<Vec<u8>>,
    pub alice_bases: Option<Vec<BasisSpec>>,
    pub bob_bases: Option<Vec<BasisSpec>>,
    pub basis_set: Option<Vec<BasisSpec>>,
    pub bob_basis_set: Option<Vec<BasisSpec>>,
    pub shots: u64,
    pub mode: Option<KeyMode>,
    pub check_fraction: f64,
    pub threshold: f64,
    pub eve: Option<EveConfig>,
    pub noise_attack: Option<NoiseAttackConfig>,
    pub backend: Backend,
    pub seed: RngSeed,
    pub exec: Exec,
}

pub const DEFAULT_SHOTS: u64 = 8192;
pub const DEFAULT_CHECK_FRACTION: f64 = 0.5;
pub const DEFAULT_THRESHOLD: f64 = 0.11;

impl SessionConfig {
    pub fn new(protocol: Protocol) -> Self {
        SessionConfig {
            protocol,
            n_bits: None,
            alice_bits: None,
            alice_bases: None,
            bob_bases: None,
            basis_set: None,
            bob_basis_set: None,
            shots: DEFAULT_SHOTS,
            mode: None,
            check_fraction: DEFAULT_CHECK_FRACTION,
            threshold: DEFAULT_THRESHOLD,
            eve: None,
            noise_attack: None,
            backend: Backend::Ideal,
            seed: RngSeed(0),
            exec: Exec::default(),
        }
    }

    /// Fixed bits and bases for both parties.
    pub fn explicit(protocol: Protocol, bits: Vec<u8>, alice: Vec<BasisSpec>, bob: Vec<BasisSpec>) -> Self {
        SessionConfig {
            alice_bits: Some(bits),
            alice_bases: Some(alice),
            bob_bases: Some(bob),
            ..SessionConfig::new(protocol)
        }
    }

    pub fn key_mode(&self) -> KeyMode {
        self.mode.unwrap_or(self.protocol.default_mode())
    }

    pub fn basis_set(&self) -> Vec<BasisSpec> {
        self.basis_set.clone().unwrap_or_else(|| self.protocol.default_basis_set())
    }

    pub fn bob_basis_set(&self) -> Vec<BasisSpec> {
        self.bob_basis_set.clone().unwrap_or_else(|| self.basis_set())
    }

    /// The transmission count, from `n_bits` or the explicit vectors.
    pub fn resolved_n(&self) -> Result<usize> {
        let mut n = self.n_bits;
        let lens = [
            ("alice_bits", self.alice_bits.as_ref().map(Vec::len)),
            ("alice_bases", self.alice_bases.as_ref().map(Vec::len)),
            ("bob_bases", self.bob_bases.as_ref().map(Vec::len)),
        ];
        for (what, len) in lens {
            match (n, len) {
                (_, None) => {}
                (None, Some(l)) => n = Some(l),
                (Some(a), Some(b)) if a != b => {
                    return Err(Error::Config(format!("{what} has length {b}, expected {a}")));
                }
                _ => {}
            }
        }
        match n {
            None => Err(Error::Config("n_bits is required unless bits or bases are given".into())),
            Some(0) => Err(Error::Config("n_bits must be at least 1".into())),
            Some(n) => Ok(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.resolved_n()?;
        if !(0.0..1.0).contains(&self.check_fraction) {
            return Err(Error::Config(format!("check_fraction {} outside [0, 1)", self.check_fraction)));
        }
        if !(0.0..=0.5).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} outside [0, 0.5]", self.threshold)));
        }
        if self.shots == 0 {
            return Err(Error::ZeroShots);
        }
        if self.protocol == Protocol::Sarg04Standard && self.key_mode() == KeyMode::Statistics {
            return Err(Error::Config("SARG04-standard needs single-shot mode".into()));
        }
        for (what, set) in [("basis_set", self.basis_set()), ("bob_basis_set", self.bob_basis_set())] {
            if set.is_empty() {
                return Err(Error::Config(format!("{what} is empty")));
            }
        }
        if self.protocol.is_sarg04() {
            let ok = |b: &BasisSpec| *b == BasisSpec::Z || *b == BasisSpec::X;
            let explicit = self.alice_bases.iter().chain(&self.bob_bases).flatten();
            if !self.basis_set().iter().chain(&self.bob_basis_set()).chain(explicit).all(ok) {
                return Err(Error::Config("SARG04 uses the Z and X bases only".into()));
            }
        }
        if let Some(bits) = &self.alice_bits {
            if let Some(b) = bits.iter().find(|&&b| b > 1) {
                return Err(Error::Config(format!("alice_bits contains {b}")));
            }
        }
        if let Backend::ReadoutNoise(model) = &self.backend {
            model.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitMarginal {
    pub qubit: usize,
    pub p0: f64,
    pub p1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub protocol: Protocol,
    pub mode: KeyMode,
    pub n_bits: usize,
    pub shots: u64,
    pub seed: RngSeed,
    pub alice_bits: Vec<u8>,
    pub alice_bases: Vec<BasisSpec>,
    pub bob_bases: Vec<BasisSpec>,
    pub bob_bits: Vec<u8>,
    pub marginals: Vec<QubitMarginal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub announcements: Option<Vec<Sarg04Announcement>>,
    pub verdicts: Vec<Verdict>,
    pub accepted: Vec<usize>,
    pub alice_key: Vec<u8>,
    pub bob_key: Vec<u8>,
    pub check_indices: Vec<usize>,
    pub check_qber: Option<f64>,
    pub final_key_alice: Vec<u8>,
    pub final_key_bob: Vec<u8>,
    pub aborted: bool,
    #[serde(skip)]
    pub histogram: Option<ShotHistogram>,
}

impl SessionResult {
    /// Fraction of transmissions kept by sifting.
    pub fn sift_rate(&self) -> f64 {
        self.accepted.len() as f64 / self.n_bits as f64
    }

    /// Error rate over the whole sifted key, check bits included.
    pub fn sifted_error_rate(&self) -> Option<f64> {
        let all: Vec<usize> = (0..self.alice_key.len()).collect();
        qber(&self.alice_key, &self.bob_key, &all).ok()
    }

    /// Mean probability, over every transmission, that Bob's outcome differs
    /// from Alice's bit, before any sifting.
    pub fn transmission_error_rate(&self) -> f64 {
        let total: f64 = self
            .marginals
            .iter()
            .zip(&self.alice_bits)
            .map(|(m, &a)| if a == 0 { m.p1 } else { m.p0 })
            .sum();
        total / self.n_bits as f64
    }
}

struct Prepared {
    n: usize,
    alice: PartyRecord,
    bob_bases: Vec<BasisSpec>,
    eve: Vec<(usize, EveBasisChoice)>,
}

fn draw_bases(set: &[BasisSpec], n: usize, seed: RngSeed) -> Vec<BasisSpec> {
    let mut rng = seed.rng();
    (0..n).map(|_| set[rng.random_range(0..set.len())]).collect()
}

fn prepare(cfg: &SessionConfig) -> Result<Prepared> {
    cfg.validate()?;
    let n = cfg.resolved_n()?;
    let bits = match &cfg.alice_bits {
        Some(b) => b.clone(),
        None => {
            let mut rng = cfg.seed.derive(Stream::AliceBits, 0).rng();
            (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect()
        }
    };
    let set = cfg.basis_set();
    let alice_bases =
        cfg.alice_bases.clone().unwrap_or_else(|| draw_bases(&set, n, cfg.seed.derive(Stream::AliceBases, 0)));
    let bob_bases = cfg
        .bob_bases
        .clone()
        .unwrap_or_else(|| draw_bases(&cfg.bob_basis_set(), n, cfg.seed.derive(Stream::BobBases, 0)));
    let eve = match &cfg.eve {
        Some(e) => e.resolve(n, &set, cfg.seed.derive(Stream::Eve, u64::MAX))?,
        None => Vec::new(),
    };
    Ok(Prepared { n, alice: PartyRecord::new(bits, alice_bases)?, bob_bases, eve })
}

fn channel_pipeline(
    alice: &PartyRecord,
    bob_bases: &[BasisSpec],
    noise: Option<&NoiseAttackConfig>,
    eve: &[(usize, EveBasisChoice)],
) -> Result<Pipeline> {
    let mut c = build_bb84_circuit(alice, bob_bases)?;
    if let Some(cfg) = noise.filter(|c| !c.attacks.is_empty()) {
        c = inject_controlled_pauli(&c, cfg)?;
    }
    let p = Pipeline::from(&c);
    if eve.is_empty() {
        Ok(p)
    } else {
        apply_intercept_resend(&p, eve)
    }
}

/// Alice's record and Bob's bases exactly as a run with `cfg` uses them.
pub fn session_parties(cfg: &SessionConfig) -> Result<(PartyRecord, Vec<BasisSpec>)> {
    let p = prepare(cfg)?;
    Ok((p.alice, p.bob_bases))
}

/// The session's transmission circuit without eavesdropping: preparation,
/// noise attack (if any), decoding and measurement.
pub fn session_circuit(cfg: &SessionConfig) -> Result<Circuit> {
    let p = prepare(cfg)?;
    let mut c = build_bb84_circuit(&p.alice, &p.bob_bases)?;
    if let Some(noise) = cfg.noise_attack.as_ref().filter(|c| !c.attacks.is_empty()) {
        c = inject_controlled_pauli(&c, noise)?;
    }
    Ok(c)
}

/// The full transmission pipeline including intercept-resend steps.
pub fn session_pipeline(cfg: &SessionConfig) -> Result<Pipeline> {
    let p = prepare(cfg)?;
    channel_pipeline(&p.alice, &p.bob_bases, cfg.noise_attack.as_ref(), &p.eve)
}

struct Transmission {
    bob_bits: Vec<u8>,
    marginals: Vec<QubitMarginal>,
    histogram: Option<ShotHistogram>,
}

fn majority(p1: f64, tie: RngSeed) -> u8 {
    if p1 > 0.5 {
        1
    } else if p1 < 0.5 {
        0
    } else {
        u8::from(tie.rng().random_bool(0.5))
    }
}

fn transmit_statistics(cfg: &SessionConfig, p: &Prepared) -> Result<Transmission> {
    let width = p.n + usize::from(cfg.noise_attack.as_ref().is_some_and(|c| !c.attacks.is_empty()));
    if width > MAX_QUBITS {
        return Err(Error::Config(format!(
            "statistics mode simulates all {width} qubits jointly (limit {MAX_QUBITS}); use single-shot mode"
        )));
    }
    let pipeline = channel_pipeline(&p.alice, &p.bob_bases, cfg.noise_attack.as_ref(), &p.eve)?;
    let mut hist = pipeline.sample(cfg.shots, cfg.seed.derive(Stream::Shots, 0), cfg.exec)?;
    if let Backend::ReadoutNoise(model) = &cfg.backend {
        hist = apply_readout_noise_with(&hist, model, cfg.seed.derive(Stream::Readout, 0), cfg.exec)?;
    }
    let mut marginals = Vec::with_capacity(p.n);
    let mut bob_bits = Vec::with_capacity(p.n);
    for q in 0..p.n {
        let (p0, p1) = hist.marginal(q)?;
        marginals.push(QubitMarginal { qubit: q, p0, p1 });
        bob_bits.push(majority(p1, cfg.seed.derive(Stream::Tie, q as u64)));
    }
    Ok(Transmission { bob_bits, marginals, histogram: Some(hist) })
}

fn lane(cfg: &SessionConfig, p: &Prepared, i: usize) -> Result<Pipeline> {
    let alice = PartyRecord::new(vec![p.alice.bits[i]], vec![p.alice.bases[i]])?;
    let noise = cfg.noise_attack.as_ref().map(|c| NoiseAttackConfig {
        attacks: c.attacks.iter().filter(|a| a.target == i).map(|a| NoiseAttack { target: 0, gate: a.gate }).collect(),
        ancilla_value: c.ancilla_value,
    });
    let eve: Vec<(usize, EveBasisChoice)> =
        p.eve.iter().filter(|(q, _)| *q == i).map(|(_, b)| (0, b.clone())).collect();
    channel_pipeline(&alice, &p.bob_bases[i..=i], noise.as_ref(), &eve)
}

/// Transmission `qubit` on its own: one protocol qubit (index 0), plus the
/// noise ancilla (index 1) when a noise attack targets it. Qubits never
/// become entangled with each other, so lanes are exact.
pub fn lane_pipeline(cfg: &SessionConfig, qubit: usize) -> Result<Pipeline> {
    let p = prepare(cfg)?;
    if qubit >= p.n {
        return Err(Error::QubitIndex { index: qubit, n_qubits: p.n });
    }
    lane(cfg, &p, qubit)
}

/// Exact `P(1)` of Bob's outcome per qubit on the ideal backend, enumerating
/// every eavesdropper branch.
pub fn exact_marginals(cfg: &SessionConfig) -> Result<Vec<f64>> {
    let p = prepare(cfg)?;
    check_noise_targets(cfg, p.n)?;
    cfg.exec.try_map(p.n, |i| Ok(lane(cfg, &p, i)?.exact_distribution()?[1].clamp(0.0, 1.0)))
}

/// Simulates transmission `i` alone and measures it once.
fn transmit_lane(cfg: &SessionConfig, p: &Prepared, i: usize) -> Result<u8> {
    let pipeline = lane(cfg, p, i)?;
    let seed = cfg.seed.derive(Stream::Lane, i as u64);
    let mut hist = pipeline.sample(1, seed, Exec::Sequential)?;
    if let Backend::ReadoutNoise(model) = &cfg.backend {
        hist = apply_readout_noise_with(&hist, &model.select(&[i])?, seed.derive(Stream::Readout, 0), Exec::Sequential)?;
    }
    Ok(hist.marginal(0)?.1.round() as u8)
}

fn transmit_single_shot(cfg: &SessionConfig, p: &Prepared) -> Result<Transmission> {
    if let Backend::ReadoutNoise(model) = &cfg.backend {
        if model.len() != p.n {
            return Err(Error::LengthMismatch { what: "readout model vs qubits", left: model.len(), right: p.n });
        }
    }
    let bob_bits = cfg.exec.try_map(p.n, |i| transmit_lane(cfg, p, i))?;
    let marginals = bob_bits
        .iter()
        .enumerate()
        .map(|(q, &b)| QubitMarginal { qubit: q, p0: f64::from(1 - b), p1: f64::from(b) })
        .collect();
    let histogram = if p.n <= MAX_QUBITS {
        let index = bob_bits.iter().enumerate().fold(0usize, |acc, (q, &b)| acc | usize::from(b) << q);
        Some(ShotHistogram::from_counts(p.n, [(index, 1)])?)
    } else {
        None
    };
    Ok(Transmission { bob_bits, marginals, histogram })
}

fn check_noise_targets(cfg: &SessionConfig, n: usize) -> Result<()> {
    if let Some(a) = cfg.noise_attack.iter().flat_map(|c| &c.attacks).find(|a| a.target >= n) {
        return Err(Error::QubitIndex { index: a.target, n_qubits: n });
    }
    Ok(())
}

fn transmit(cfg: &SessionConfig, p: &Prepared) -> Result<Transmission> {
    check_noise_targets(cfg, p.n)?;
    match cfg.key_mode() {
        KeyMode::Statistics => transmit_statistics(cfg, p),
        KeyMode::SingleShot => transmit_single_shot(cfg, p),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    cfg: &SessionConfig,
    p: Prepared,
    t: Transmission,
    sift: SiftResult,
    alice_key: Vec<u8>,
    bob_key: Vec<u8>,
    announcements: Option<Vec<Sarg04Announcement>>,
) -> Result<SessionResult> {
    let k = (cfg.check_fraction * sift.accepted.len() as f64).ceil() as usize;
    let mut rng = cfg.seed.derive(Stream::CheckSubset, 0).rng();
    let mut positions = sample(&mut rng, sift.accepted.len(), k).into_vec();
    positions.sort_unstable();
    let check_qber = if positions.is_empty() { None } else { Some(qber(&alice_key, &bob_key, &positions)?) };
    let keep = |key: &[u8]| -> Vec<u8> {
        key.iter().enumerate().filter(|(j, _)| positions.binary_search(j).is_err()).map(|(_, &b)| b).collect()
    };
    let final_key_alice = keep(&alice_key);
    let final_key_bob = keep(&bob_key);
    let aborted = sift.accepted.is_empty() || check_qber.is_some_and(|q| q > cfg.threshold);
    Ok(SessionResult {
        protocol: cfg.protocol,
        mode: cfg.key_mode(),
        n_bits: p.n,
        shots: match cfg.key_mode() {
            KeyMode::Statistics => cfg.shots,
            KeyMode::SingleShot => 1,
        },
        seed: cfg.seed,
        alice_bits: p.alice.bits,
        alice_bases: p.alice.bases,
        bob_bases: p.bob_bases,
        bob_bits: t.bob_bits,
        marginals: t.marginals,
        announcements,
        check_indices: positions.iter().map(|&j| sift.accepted[j]).collect(),
        verdicts: sift.verdicts,
        accepted: sift.accepted,
        alice_key,
        bob_key,
        check_qber,
        final_key_alice,
        final_key_bob,
        aborted,
        histogram: t.histogram,
    })
}

fn run_basis_matching(cfg: &SessionConfig) -> Result<SessionResult> {
    let p = prepare(cfg)?;
    let t = transmit(cfg, &p)?;
    let sift = sift_bb84(&p.alice.bases, &p.bob_bases)?;
    let alice_key = sift.accepted.iter().map(|&i| p.alice.bits[i]).collect();
    let bob_key = sift.accepted.iter().map(|&i| t.bob_bits[i]).collect();
    finish(cfg, p, t, sift, alice_key, bob_key, None)
}

fn run_sarg04_standard(cfg: &SessionConfig) -> Result<SessionResult> {
    let p = prepare(cfg)?;
    let t = transmit(cfg, &p)?;
    let announcements: Vec<Sarg04Announcement> = (0..p.n)
        .map(|i| {
            let y = u8::from(p.alice.bases[i] == BasisSpec::X);
            sarg04_announce(p.alice.bits[i], y, &mut cfg.seed.derive(Stream::Announce, i as u64).rng())
        })
        .collect();
    let deduced: Vec<Option<u8>> = (0..p.n)
        .map(|i| sarg04_sift_standard(&announcements[i], u8::from(p.bob_bases[i] == BasisSpec::X), t.bob_bits[i]))
        .collect();
    let sift = SiftResult::from_verdicts(
        deduced.iter().map(|d| if d.is_some() { Verdict::Accepted } else { Verdict::Discarded }).collect(),
    );
    let alice_key = sift.accepted.iter().map(|&i| u8::from(announcements[i].actual_is_x)).collect();
    let bob_key = sift.accepted.iter().filter_map(|&i| deduced[i]).collect();
    finish(cfg, p, t, sift, alice_key, bob_key, Some(announcements))
}

pub fn run_bb84_session(cfg: &SessionConfig) -> Result<SessionResult> {
    if cfg.protocol.is_sarg04() {
        return Err(Error::Config(format!("{:?} is not a BB84 protocol", cfg.protocol)));
    }
    run_basis_matching(cfg)
}

/// `SARG04-paper` compares reference bits privately and keys on `x`, so it runs
/// exactly like two-basis BB84. Standard mode uses pair announcements.
pub fn run_sarg04_session(cfg: &SessionConfig) -> Result<SessionResult> {
    match cfg.protocol {
        Protocol::Sarg04Paper => run_basis_matching(cfg),
        Protocol::Sarg04Standard => run_sarg04_standard(cfg),
        p => Err(Error::Config(format!("{p:?} is not a SARG04 protocol"))),
    }
}

pub fn run_session(cfg: &SessionConfig) -> Result<SessionResult> {
    if cfg.protocol.is_sarg04() {
        run_sarg04_session(cfg)
    } else {
        run_bb84_session(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{EveStrategy, NoiseGate};

    fn golden() -> SessionConfig {
        use BasisSpec as B;
        SessionConfig::explicit(
            Protocol::Bb84Four,
            vec![1, 0, 1, 1, 0],
            vec![B::Y, B::HT, B::Y, B::HZ, B::HT],
            vec![B::Y, B::HT, B::X, B::HZ, B::HZ],
        )
    }

    #[test]
    fn golden_session_is_clean() {
        let r = run_session(&golden()).unwrap();
        assert_eq!(r.accepted, vec![0, 1, 3]);
        assert_eq!(r.alice_key, vec![1, 0, 1]);
        assert_eq!(r.bob_key, r.alice_key);
        assert_eq!(r.check_indices.len(), 2);
        assert_eq!(r.check_qber, Some(0.0));
        assert_eq!(r.final_key_alice.len(), 1);
        assert_eq!(r.final_key_alice, r.final_key_bob);
        assert!(!r.aborted);
        assert_eq!(r.histogram.as_ref().unwrap().shots(), 8192);
    }

    #[test]
    fn results_do_not_depend_on_exec() {
        let mut cfg = golden();
        cfg.eve = Some(EveConfig::default());
        cfg.exec = Exec::Sequential;
        let a = run_session(&cfg).unwrap();
        cfg.exec = Exec::Parallel;
        assert_eq!(a, run_session(&cfg).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut cfg = golden();
        cfg.check_fraction = 1.0;
        assert!(run_session(&cfg).is_err());
        let mut cfg = golden();
        cfg.threshold = 0.6;
        assert!(run_session(&cfg).is_err());
        let mut cfg = golden();
        cfg.n_bits = Some(4);
        assert!(run_session(&cfg).is_err());
        assert!(run_session(&SessionConfig::new(Protocol::Bb84Two)).is_err());
        let mut cfg = SessionConfig::new(Protocol::Sarg04Standard);
        cfg.n_bits = Some(4);
        cfg.mode = Some(KeyMode::Statistics);
        assert!(run_session(&cfg).is_err());
        let mut cfg = SessionConfig::new(Protocol::Sarg04Paper);
        cfg.n_bits = Some(4);
        cfg.basis_set = Some(vec![BasisSpec::Y]);
        assert!(run_session(&cfg).is_err());
        let mut cfg = golden();
        cfg.protocol = Protocol::Sarg04Standard;
        assert!(run_bb84_session(&SessionConfig { protocol: Protocol::Sarg04Paper, ..golden() }).is_err());
    }

    #[test]
    fn reference_bit_sarg04_equals_bb84_two() {
        let mut cfg = SessionConfig::new(Protocol::Bb84Two);
        cfg.n_bits = Some(12);
        cfg.seed = RngSeed(5);
        let a = run_session(&cfg).unwrap();
        cfg.protocol = Protocol::Sarg04Paper;
        let b = run_session(&cfg).unwrap();
        assert_eq!(SessionResult { protocol: Protocol::Bb84Two, ..b }, a);
    }

    #[test]
    fn full_eve_aborts_in_single_shot() {
        let mut cfg = SessionConfig::new(Protocol::Bb84Two);
        cfg.n_bits = Some(2000);
        cfg.mode = Some(KeyMode::SingleShot);
        cfg.eve = Some(EveConfig { strategy: EveStrategy::Uniform(vec![]), ..Default::default() });
        let r = run_session(&cfg).unwrap();
        assert!(r.aborted);
        let e = r.sifted_error_rate().unwrap();
        let sigma = (0.25f64 * 0.75 / r.alice_key.len() as f64).sqrt();
        assert!((e - 0.25).abs() < 4.0 * sigma, "{e}");
        assert!(r.histogram.is_none());
    }

    #[test]
    fn noise_attack_flips_hz_key_bit() {
        let mut cfg = golden();
        cfg.noise_attack =
            Some(NoiseAttackConfig { attacks: vec![NoiseAttack { target: 3, gate: NoiseGate::CZ }], ancilla_value: 1 });
        let r = run_session(&cfg).unwrap();
        assert_eq!(r.marginals[3].p0, 1.0);
        assert_eq!(r.histogram.unwrap().n_qubits(), 5);
        cfg.noise_attack.as_mut().unwrap().attacks[0].target = 5;
        assert!(run_session(&cfg).is_err());
    }

    #[test]
    fn sarg04_standard_noiseless() {
        let mut cfg = SessionConfig::new(Protocol::Sarg04Standard);
        cfg.n_bits = Some(4000);
        cfg.seed = RngSeed(11);
        let r = run_session(&cfg).unwrap();
        assert_eq!(r.mode, KeyMode::SingleShot);
        assert_eq!(r.alice_key, r.bob_key);
        let rate = r.sift_rate();
        assert!((rate - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / 4000.0).sqrt(), "{rate}");
        assert_eq!(r.announcements.as_ref().unwrap().len(), 4000);
    }

    #[test]
    fn exact_marginals_of_golden_attacks() {
        let mut cfg = golden();
        cfg.noise_attack = Some(NoiseAttackConfig {
            attacks: vec![
                NoiseAttack { target: 1, gate: NoiseGate::CX },
                NoiseAttack { target: 3, gate: NoiseGate::CZ },
                NoiseAttack { target: 4, gate: NoiseGate::CY },
            ],
            ancilla_value: 1,
        });
        let m = exact_marginals(&cfg).unwrap();
        let c = (std::f64::consts::PI / 8.0).cos().powi(2);
        for (got, want) in m.iter().zip([1.0, 0.5, 0.5, 0.0, 1.0 - c]) {
            assert!((got - want).abs() < 1e-12, "{m:?}");
        }
        assert_eq!(lane_pipeline(&cfg, 3).unwrap().n_qubits(), 2);
        assert_eq!(lane_pipeline(&cfg, 0).unwrap().n_qubits(), 1);
        assert!(lane_pipeline(&cfg, 5).is_err());
    }

    #[test]
    fn zero_check_fraction_keeps_whole_key() {
        let mut cfg = golden();
        cfg.check_fraction = 0.0;
        let r = run_session(&cfg).unwrap();
        assert!(r.check_indices.is_empty());
        assert_eq!(r.check_qber, None);
        assert_eq!(r.final_key_alice, r.alice_key);
        assert!(!r.aborted);
    }
}
