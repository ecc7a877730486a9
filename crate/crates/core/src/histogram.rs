//! Shot histograms and multinomial sampling.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::state::{bitstring, parse_bitstring};
use crate::{Error, Exec, Result, RngSeed, StateVector, Stream, MAX_QUBITS};

/// Shots per independently seeded sampling chunk.
pub const SHOT_CHUNK: usize = 1024;

/// Counts per basis index over `n_qubits` measured bits.
///
/// Serialises as `{"n_qubits": n, "shots": s, "counts": {"bitstring": c}}`
/// with keys in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotHistogram {
    n_qubits: usize,
    shots: u64,
    counts: BTreeMap<usize, u64>,
}

impl ShotHistogram {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        Ok(ShotHistogram { n_qubits, shots: 0, counts: BTreeMap::new() })
    }

    pub fn from_counts<I>(n_qubits: usize, counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, u64)>,
    {
        let mut h = ShotHistogram::new(n_qubits)?;
        for (index, count) in counts {
            h.add(index, count)?;
        }
        Ok(h)
    }

    /// Builds a histogram from bitstring keys; every key must be `n_qubits` long.
    pub fn from_bitstrings<'a, I>(n_qubits: usize, counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, u64)>,
    {
        let mut h = ShotHistogram::new(n_qubits)?;
        for (key, count) in counts {
            if key.len() != n_qubits {
                return Err(Error::Invalid(format!("bitstring `{key}` is not {n_qubits} bits long")));
            }
            let index =
                parse_bitstring(key).ok_or_else(|| Error::Invalid(format!("bad bitstring `{key}`")))?;
            h.add(index, count)?;
        }
        Ok(h)
    }

    pub fn add(&mut self, index: usize, count: u64) -> Result<()> {
        if index >> self.n_qubits != 0 {
            return Err(Error::Invalid(format!("outcome {index} wider than {} qubits", self.n_qubits)));
        }
        if count > 0 {
            *self.counts.entry(index).or_default() += count;
            self.shots += count;
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn counts(&self) -> &BTreeMap<usize, u64> {
        &self.counts
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn count_of(&self, bits: &str) -> u64 {
        parse_bitstring(bits).map_or(0, |i| self.count(i))
    }

    /// Relative frequencies `(p0, p1)` of qubit `qubit`.
    pub fn marginal(&self, qubit: usize) -> Result<(f64, f64)> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex { index: qubit, n_qubits: self.n_qubits });
        }
        if self.shots == 0 {
            return Err(Error::Empty("histogram"));
        }
        let ones: u64 = self.counts.iter().filter(|(i, _)| *i >> qubit & 1 == 1).map(|(_, c)| c).sum();
        let p1 = ones as f64 / self.shots as f64;
        Ok((1.0 - p1, p1))
    }

    /// Dense frequency vector of length `2^n_qubits`.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        if self.shots == 0 {
            return Err(Error::Empty("histogram"));
        }
        let mut f = vec![0.0; 1 << self.n_qubits];
        for (&i, &c) in &self.counts {
            f[i] = c as f64 / self.shots as f64;
        }
        Ok(f)
    }

    /// Restricts the histogram to the listed qubits; output bit `k` is input
    /// qubit `qubits[k]`.
    pub fn project(&self, qubits: &[usize]) -> Result<ShotHistogram> {
        if let Some(&q) = qubits.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::QubitIndex { index: q, n_qubits: self.n_qubits });
        }
        let mut out = ShotHistogram::new(qubits.len())?;
        for (&i, &c) in &self.counts {
            let j = qubits.iter().enumerate().fold(0, |acc, (k, &q)| acc | (i >> q & 1) << k);
            out.add(j, c)?;
        }
        Ok(out)
    }

    pub fn merge(&mut self, other: &ShotHistogram) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::LengthMismatch {
                what: "histogram width",
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        for (&i, &c) in &other.counts {
            self.add(i, c)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHistogram {
    n_qubits: usize,
    shots: u64,
    counts: BTreeMap<String, u64>,
}

impl Serialize for ShotHistogram {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawHistogram {
            n_qubits: self.n_qubits,
            shots: self.shots,
            counts: self.counts.iter().map(|(&i, &c)| (bitstring(i, self.n_qubits), c)).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ShotHistogram {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawHistogram::deserialize(deserializer)?;
        let h = ShotHistogram::from_bitstrings(raw.n_qubits, raw.counts.iter().map(|(k, &c)| (k.as_str(), c)))
            .map_err(D::Error::custom)?;
        if h.shots != raw.shots {
            return Err(D::Error::custom(format!("counts sum to {} but shots is {}", h.shots, raw.shots)));
        }
        Ok(h)
    }
}

/// Inverse-CDF sampler over a discrete distribution.
#[derive(Clone, Debug)]
pub struct Sampler {
    cdf: Vec<f64>,
    last_support: usize,
}

impl Sampler {
    pub fn new(probs: &[f64]) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("distribution"));
        }
        let mut acc = 0.0;
        let cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if !acc.is_finite() || (acc - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized(acc));
        }
        let last_support = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Ok(Sampler { cdf, last_support })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.last_support)
    }
}

/// Draws `shots` outcomes from `probs`. Chunk `k` of [`SHOT_CHUNK`] shots
/// uses `seed.derive(Stream::Shots, k)`, so the result is independent of
/// `exec`.
pub fn sample_counts(probs: &[f64], n_qubits: usize, shots: u64, seed: RngSeed, exec: Exec) -> Result<ShotHistogram> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let sampler = Sampler::new(probs)?;
    let chunks = (shots as usize).div_ceil(SHOT_CHUNK);
    let partial = exec.map(chunks, |k| {
        let mut rng = seed.derive(Stream::Shots, k as u64).rng();
        let len = SHOT_CHUNK.min(shots as usize - k * SHOT_CHUNK);
        let mut counts = BTreeMap::<usize, u64>::new();
        for _ in 0..len {
            *counts.entry(sampler.sample(&mut rng)).or_default() += 1;
        }
        counts
    });
    let mut h = ShotHistogram::new(n_qubits)?;
    for counts in partial {
        for (i, c) in counts {
            h.add(i, c)?;
        }
    }
    Ok(h)
}

/// Multinomial sample of `shots` full-register measurements of `state`.
pub fn measure_all(state: &StateVector, shots: u64, seed: RngSeed) -> Result<ShotHistogram> {
    measure_all_with(state, shots, seed, Exec::default())
}

pub fn measure_all_with(state: &StateVector, shots: u64, seed: RngSeed, exec: Exec) -> Result<ShotHistogram> {
    sample_counts(&state.probabilities(), state.n_qubits(), shots, seed, exec)
}
