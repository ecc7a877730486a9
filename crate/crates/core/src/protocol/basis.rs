use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::normalize_phase;
use crate::{Error, GateKind, GateOp, Result};

/// Phases closer than this are the same basis.
pub const PHASE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisAlias {
    Z,
    X,
    Y,
    HT,
    HZ,
}

impl BasisAlias {
    pub fn as_str(self) -> &'static str {
        match self {
            BasisAlias::Z => "Z",
            BasisAlias::X => "X",
            BasisAlias::Y => "Y",
            BasisAlias::HT => "HT",
            BasisAlias::HZ => "HZ",
        }
    }

    pub fn parse(s: &str) -> Option<BasisAlias> {
        Some(match s {
            "Z" => BasisAlias::Z,
            "X" => BasisAlias::X,
            "Y" => BasisAlias::Y,
            "HT" => BasisAlias::HT,
            "HZ" => BasisAlias::HZ,
            _ => return None,
        })
    }
}

/// An encoding basis.
///
/// Equatorial bases are reached by `H` followed by the phase gate
/// `diag(1, e^{iφ})`. The named aliases are `X` (φ = 0), `Y` (φ = -π/2,
/// the lab's `S`), `HT` (φ = π/4) and `HZ` (φ = π). `Z` is the
/// computational basis, which carries no rotation at all.
#[derive(Clone, Copy, Debug)]
pub enum BasisSpec {
    Computational,
    Equatorial { phase: f64 },
}

impl BasisSpec {
    pub const Z: BasisSpec = BasisSpec::Computational;
    pub const X: BasisSpec = BasisSpec::Equatorial { phase: 0.0 };
    pub const Y: BasisSpec = BasisSpec::Equatorial { phase: -FRAC_PI_2 };
    pub const HT: BasisSpec = BasisSpec::Equatorial { phase: FRAC_PI_4 };
    pub const HZ: BasisSpec = BasisSpec::Equatorial { phase: PI };

    pub fn equatorial(phase: f64) -> Result<BasisSpec> {
        if !phase.is_finite() {
            return Err(Error::NonFinite("basis phase".into()));
        }
        Ok(BasisSpec::Equatorial { phase })
    }

    pub fn from_alias(alias: BasisAlias) -> BasisSpec {
        match alias {
            BasisAlias::Z => BasisSpec::Z,
            BasisAlias::X => BasisSpec::X,
            BasisAlias::Y => BasisSpec::Y,
            BasisAlias::HT => BasisSpec::HT,
            BasisAlias::HZ => BasisSpec::HZ,
        }
    }

    pub fn phase(&self) -> Option<f64> {
        match self {
            BasisSpec::Computational => None,
            BasisSpec::Equatorial { phase } => Some(*phase),
        }
    }

    pub fn alias(&self) -> Option<BasisAlias> {
        [BasisAlias::Z, BasisAlias::X, BasisAlias::Y, BasisAlias::HT, BasisAlias::HZ]
            .into_iter()
            .find(|&a| self.same_as(&BasisSpec::from_alias(a)))
    }

    /// Sifting equality: same kind and phases equal modulo 2π within
    /// [`PHASE_TOL`].
    pub fn same_as(&self, other: &BasisSpec) -> bool {
        match (self, other) {
            (BasisSpec::Computational, BasisSpec::Computational) => true,
            (BasisSpec::Equatorial { phase: a }, BasisSpec::Equatorial { phase: b }) => {
                normalize_phase(a - b).abs() < PHASE_TOL
            }
            _ => false,
        }
    }
}

impl PartialEq for BasisSpec {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.alias(), self) {
            (Some(a), _) => f.write_str(a.as_str()),
            (None, BasisSpec::Equatorial { phase }) => write!(f, "H·P({phase})"),
            (None, BasisSpec::Computational) => f.write_str("Z"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawBasis {
    Alias(String),
    Phase {
        phase: f64,
    },
}

impl Serialize for BasisSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match (self.alias(), self) {
            (Some(a), _) => RawBasis::Alias(a.as_str().to_string()),
            (None, BasisSpec::Equatorial { phase }) => RawBasis::Phase { phase: *phase },
            (None, BasisSpec::Computational) => unreachable!("computational basis always has an alias"),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BasisSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match RawBasis::deserialize(deserializer)? {
            RawBasis::Alias(s) => BasisAlias::parse(&s)
                .map(BasisSpec::from_alias)
                .ok_or_else(|| D::Error::custom(format!("unknown basis `{s}` (expected Z, X, Y, HT, HZ or {{\"phase\": radians}})"))),
            RawBasis::Phase { phase } => BasisSpec::equatorial(phase).map_err(D::Error::custom),
        }
    }
}

/// Gates preparing `bit` in `basis` from `|0⟩`: `X` when the bit is 1, then
/// `H` and the basis phase gate for equatorial bases (no phase gate for φ = 0).
pub fn encode_ops(bit: u8, basis: BasisSpec, target: usize) -> Vec<GateOp> {
    let mut ops = Vec::with_capacity(3);
    if bit == 1 {
        ops.push(GateOp::new(GateKind::X, target));
    }
    if let BasisSpec::Equatorial { phase } = basis {
        ops.push(GateOp::new(GateKind::H, target));
        match GateKind::phase(phase) {
            GateKind::I => {}
            k => ops.push(GateOp::new(k, target)),
        }
    }
    ops
}

/// Gates rotating `basis` back onto the computational basis: the inverse
/// phase gate, then `H`.
pub fn decode_ops(basis: BasisSpec, target: usize) -> Vec<GateOp> {
    let mut ops = Vec::with_capacity(2);
    if let BasisSpec::Equatorial { phase } = basis {
        match GateKind::phase(-phase) {
            GateKind::I => {}
            k => ops.push(GateOp::new(k, target)),
        }
        ops.push(GateOp::new(GateKind::H, target));
    }
    ops
}

/// One party's bit string and basis choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartyRecord {
    pub bits: Vec<u8>,
    pub bases: Vec<BasisSpec>,
}

impl PartyRecord {
    pub fn new(bits: Vec<u8>, bases: Vec<BasisSpec>) -> Result<Self> {
        let r = PartyRecord { bits, bases };
        r.validate()?;
        Ok(r)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits.len() != self.bases.len() {
            return Err(Error::LengthMismatch { what: "bits vs bases", left: self.bits.len(), right: self.bases.len() });
        }
        if let Some(b) = self.bits.iter().find(|&&b| b > 1) {
            return Err(Error::Invalid(format!("bit value {b} is not 0 or 1")));
        }
        Ok(())
    }
}
