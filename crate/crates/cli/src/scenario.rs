//! Scenario files: the JSON description of one lab run.

use std::fmt;
use std::path::Path;

use qkdlab_core::adversary::{CalibrationMode, EveConfig, NoiseAttackConfig, ReadoutError, ReadoutNoiseModel};
use qkdlab_core::protocol::{
    reference_basis, Backend, BasisSpec, KeyMode, Protocol, SessionConfig, DEFAULT_CHECK_FRACTION, DEFAULT_SHOTS,
    DEFAULT_THRESHOLD,
};
use qkdlab_core::{Exec, RngSeed};
use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;

/// Environment variable consulted when neither `--seed` nor the scenario
/// sets a seed.
pub const SEED_ENV: &str = "QKDLAB_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Histogram,
    Report,
    Fidelity,
    Qasm,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MitigationMethod {
    #[default]
    LeastSquares,
    Inverse,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationSpec {
    /// Defaults to full below 13 qubits, tensored above.
    #[serde(default)]
    pub mode: Option<CalibrationMode>,
    #[serde(default)]
    pub method: MitigationMethod,
    /// Shots per calibration circuit; defaults to the scenario's shots.
    #[serde(default)]
    pub calibration_shots: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySpec {
    /// Defaults to every qubit.
    #[serde(default)]
    pub qubits: Option<Vec<usize>>,
    #[serde(default)]
    pub shots: Option<u64>,
}

/// One error model for every qubit, or one per qubit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReadoutSpec {
    Uniform(ReadoutError),
    PerQubit(Vec<ReadoutError>),
}

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

fn default_check_fraction() -> f64 {
    DEFAULT_CHECK_FRACTION
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Histogram, OutputKind::Report]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub protocol: Protocol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_bits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alice_bits: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alice_bases: Option<Vec<BasisSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bob_bases: Option<Vec<BasisSpec>>,
    /// SARG04 reference bits `y` (0: computational, 1: Hadamard).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alice_reference_bits: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bob_reference_bits: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_set: Option<Vec<BasisSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bob_basis_set: Option<Vec<BasisSpec>>,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<KeyMode>,
    #[serde(default = "default_check_fraction")]
    pub check_fraction: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eve: Option<EveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_attack: Option<NoiseAttackConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout_noise: Option<ReadoutSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mitigation: Option<MitigationSpec>,
    /// Expected `P(1)` per qubit for the report; defaults to the exact ideal
    /// marginals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_p1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tomography: Option<TomographySpec>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
}

/// A schema violation, located by a JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "scenario error at {at}: {}", self.message)
    }
}

impl std::error::Error for ScenarioError {}

fn pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    out
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ScenarioError {
            pointer: pointer(e.path()),
            message: e.inner().to_string(),
        })
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, ScenarioError> {
        serde_path_to_error::deserialize(value).map_err(|e| ScenarioError {
            pointer: pointer(e.path()),
            message: e.inner().to_string(),
        })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        Ok(Self::from_json(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?)
    }

    /// `--seed` beats the scenario, which beats `QKDLAB_SEED`; the fallback
    /// is 0.
    pub fn resolve_seed(&self, cli: Option<u64>, env: Option<&str>) -> anyhow::Result<RngSeed> {
        if let Some(s) = cli.or(self.seed) {
            return Ok(RngSeed(s));
        }
        match env.map(str::trim).filter(|s| !s.is_empty()) {
            Some(s) => s.parse().map(RngSeed).map_err(|_| anyhow::anyhow!("{SEED_ENV}={s:?} is not an unsigned integer")),
            None => Ok(RngSeed(0)),
        }
    }

    pub fn wants(&self, kind: OutputKind) -> bool {
        self.outputs.contains(&kind)
    }

    fn reference_bases(
        &self,
        bases: &Option<Vec<BasisSpec>>,
        bits: &Option<Vec<u8>>,
        what: &str,
    ) -> anyhow::Result<Option<Vec<BasisSpec>>> {
        match (bases, bits) {
            (Some(_), Some(_)) => anyhow::bail!("set either {what}_bases or {what}_reference_bits, not both"),
            (Some(b), None) => Ok(Some(b.clone())),
            (None, Some(y)) => {
                if !self.protocol.is_sarg04() {
                    anyhow::bail!("{what}_reference_bits only apply to SARG04");
                }
                if let Some(b) = y.iter().find(|&&b| b > 1) {
                    anyhow::bail!("{what}_reference_bits contains {b}");
                }
                Ok(Some(y.iter().map(|&b| reference_basis(b)).collect()))
            }
            (None, None) => Ok(None),
        }
    }

    pub fn session_config(&self, seed: RngSeed, exec: Exec) -> anyhow::Result<SessionConfig> {
        let mut cfg = SessionConfig::new(self.protocol);
        cfg.n_bits = self.n_bits;
        cfg.alice_bits = self.alice_bits.clone();
        cfg.alice_bases = self.reference_bases(&self.alice_bases, &self.alice_reference_bits, "alice")?;
        cfg.bob_bases = self.reference_bases(&self.bob_bases, &self.bob_reference_bits, "bob")?;
        cfg.basis_set = self.basis_set.clone();
        cfg.bob_basis_set = self.bob_basis_set.clone();
        cfg.shots = self.shots;
        cfg.mode = self.mode;
        cfg.check_fraction = self.check_fraction;
        cfg.threshold = self.threshold;
        cfg.eve = self.eve.clone();
        cfg.noise_attack = self.noise_attack.clone();
        cfg.seed = seed;
        cfg.exec = exec;
        if let Some(spec) = &self.readout_noise {
            let n = cfg.resolved_n()?;
            let model = match spec {
                ReadoutSpec::Uniform(e) => ReadoutNoiseModel { qubits: vec![*e; n] },
                ReadoutSpec::PerQubit(v) => {
                    if v.len() != n {
                        anyhow::bail!("readout_noise lists {} qubits, session has {n}", v.len());
                    }
                    ReadoutNoiseModel { qubits: v.clone() }
                }
            };
            cfg.backend = Backend::ReadoutNoise(model);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_reported_with_a_pointer() {
        let e = ScenarioFile::from_json(r#"{"protocol": "BB84-2", "n_bits": 4, "eve": {"attacked": [0], "bogus": 1}}"#)
            .unwrap_err();
        assert_eq!(e.pointer, "/eve/bogus");
        let e = ScenarioFile::from_json(r#"{"protocol": "BB84-2", "alice_bases": ["X", "Q"]}"#).unwrap_err();
        assert_eq!(e.pointer, "/alice_bases/1");
        let e = ScenarioFile::from_json(r#"{"protocol": "BB84-3"}"#).unwrap_err();
        assert_eq!(e.pointer, "/protocol");
        assert!(e.to_string().starts_with("scenario error at /protocol:"));
    }

    #[test]
    fn seed_precedence() {
        let mut s = ScenarioFile::from_json(r#"{"protocol": "BB84-2", "n_bits": 2}"#).unwrap();
        assert_eq!(s.resolve_seed(None, None).unwrap(), RngSeed(0));
        assert_eq!(s.resolve_seed(None, Some("7")).unwrap(), RngSeed(7));
        assert!(s.resolve_seed(None, Some("x")).is_err());
        s.seed = Some(3);
        assert_eq!(s.resolve_seed(None, Some("7")).unwrap(), RngSeed(3));
        assert_eq!(s.resolve_seed(Some(9), Some("7")).unwrap(), RngSeed(9));
    }

    #[test]
    fn sarg04_reference_bits_become_bases() {
        let s = ScenarioFile::from_json(
            r#"{"protocol": "SARG04-paper", "alice_bits": [1,0,1], "alice_reference_bits": [1,0,1], "bob_reference_bits": [1,0,0]}"#,
        )
        .unwrap();
        let cfg = s.session_config(RngSeed(0), Exec::Sequential).unwrap();
        assert_eq!(cfg.alice_bases.unwrap(), vec![BasisSpec::X, BasisSpec::Z, BasisSpec::X]);
        assert_eq!(cfg.bob_bases.unwrap(), vec![BasisSpec::X, BasisSpec::Z, BasisSpec::Z]);
        let bad = ScenarioFile::from_json(r#"{"protocol": "BB84-2", "alice_reference_bits": [1]}"#).unwrap();
        assert!(bad.session_config(RngSeed(0), Exec::Sequential).is_err());
    }

    #[test]
    fn readout_forms() {
        let s = ScenarioFile::from_json(r#"{"protocol": "BB84-2", "n_bits": 3, "readout_noise": {"p01": 0.1, "p10": 0.2}}"#)
            .unwrap();
        let cfg = s.session_config(RngSeed(0), Exec::Sequential).unwrap();
        assert_eq!(cfg.backend, Backend::ReadoutNoise(ReadoutNoiseModel::uniform(3, 0.1, 0.2)));
        let s = ScenarioFile::from_json(r#"{"protocol": "BB84-2", "n_bits": 3, "readout_noise": [{"p01": 0.1, "p10": 0.2}]}"#)
            .unwrap();
        assert!(s.session_config(RngSeed(0), Exec::Sequential).is_err());
    }
}
