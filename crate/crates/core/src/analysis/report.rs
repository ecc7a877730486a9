use serde::{Deserialize, Serialize};

use super::density::{DensityMatrix1Q, PauliExpectations};
use crate::protocol::{BasisSpec, SessionResult};
use crate::{Error, Result};

/// Rows pass when `|zscore| ≤ Z_PASS`.
pub const Z_PASS: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub qubit: usize,
    pub expected_p1: f64,
    pub observed_p1: f64,
    pub zscore: f64,
    pub pass: bool,
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub shots: u64,
    pub rows: Vec<ComparisonRow>,
}

/// Binomial z-score of an observed frequency. The variance uses `p` clamped
/// to `[½/shots, 1 − ½/shots]`, so deterministic expectations still give a
/// finite score.
pub fn binomial_zscore(expected: f64, observed: f64, shots: u64) -> f64 {
    let n = shots as f64;
    let p = expected.clamp(0.5 / n, 1.0 - 0.5 / n);
    (observed - expected) / (p * (1.0 - p) / n).sqrt()
}

/// Per-qubit comparison of `P(1)` against an expected table.
pub fn compare_to_expected(result: &SessionResult, expected_p1: &[f64]) -> Result<ComparisonReport> {
    if expected_p1.is_empty() {
        return Err(Error::Empty("expected table"));
    }
    if expected_p1.len() != result.marginals.len() {
        return Err(Error::LengthMismatch {
            what: "expected table vs qubits",
            left: expected_p1.len(),
            right: result.marginals.len(),
        });
    }
    if let Some(p) = expected_p1.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Invalid(format!("expected probability {p} outside [0, 1]")));
    }
    let rows = result
        .marginals
        .iter()
        .zip(expected_p1)
        .map(|(m, &e)| {
            let zscore = binomial_zscore(e, m.p1, result.shots);
            ComparisonRow { qubit: m.qubit, expected_p1: e, observed_p1: m.p1, zscore, pass: zscore.abs() <= Z_PASS, fidelity: None }
        })
        .collect();
    Ok(ComparisonReport { shots: result.shots, rows })
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Fills the fidelity column from `(qubit, fidelity)` pairs.
    pub fn attach_fidelities(&mut self, fidelities: &[(usize, f64)]) {
        for (q, f) in fidelities {
            if let Some(row) = self.rows.iter_mut().find(|r| r.qubit == *q) {
                row.fidelity = Some(*f);
            }
        }
    }

    /// CSV with header `qubit,expected_p1,observed_p1,zscore,pass,fidelity`;
    /// an unknown fidelity is an empty cell.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        w.write_record(["qubit", "expected_p1", "observed_p1", "zscore", "pass", "fidelity"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.qubit.to_string(),
                r.expected_p1.to_string(),
                r.observed_p1.to_string(),
                r.zscore.to_string(),
                r.pass.to_string(),
                r.fidelity.map(|f| f.to_string()).unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityEntry {
    pub qubit: usize,
    pub fidelity: f64,
    pub bit: u8,
    pub basis: BasisSpec,
    pub shots_per_setting: u64,
    pub expectations: PauliExpectations,
    pub rho: DensityMatrix1Q,
    pub bloch_norm: f64,
    pub rescaled: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub entries: Vec<FidelityEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{run_session, Protocol, SessionConfig};
    use crate::adversary::ReadoutNoiseModel;
    use crate::protocol::Backend;

    fn golden() -> SessionConfig {
        use BasisSpec as B;
        SessionConfig::explicit(
            Protocol::Bb84Four,
            vec![1, 0, 1, 1, 0],
            vec![B::Y, B::HT, B::Y, B::HZ, B::HT],
            vec![B::Y, B::HT, B::X, B::HZ, B::HZ],
        )
    }

    const EXPECTED: [f64; 5] = [1.0, 0.0, 0.5, 1.0, 0.853_553_390_593_273_8];

    #[test]
    fn ideal_run_passes() {
        let r = run_session(&golden()).unwrap();
        let rep = compare_to_expected(&r, &EXPECTED).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        let csv = rep.to_csv().unwrap();
        assert!(csv.starts_with("qubit,expected_p1,observed_p1,zscore,pass,fidelity\n0,1,1,0,true,\n"), "{csv}");
    }

    #[test]
    fn readout_noise_fails_deterministic_qubit() {
        let mut cfg = golden();
        cfg.backend = Backend::ReadoutNoise(ReadoutNoiseModel::uniform(5, 0.0, 0.03));
        let rep = compare_to_expected(&run_session(&cfg).unwrap(), &EXPECTED).unwrap();
        assert!(!rep.rows[0].pass);
        assert!(rep.rows[1].pass);
    }

    #[test]
    fn shape_errors() {
        let r = run_session(&golden()).unwrap();
        assert!(compare_to_expected(&r, &[]).is_err());
        assert!(compare_to_expected(&r, &[0.5; 4]).is_err());
        assert!(compare_to_expected(&r, &[1.5; 5]).is_err());
    }

    #[test]
    fn zscore_is_finite_at_the_edges() {
        assert_eq!(binomial_zscore(1.0, 1.0, 8192), 0.0);
        assert!(binomial_zscore(1.0, 0.97, 8192) < -100.0);
        let z = binomial_zscore(0.5, 0.51, 8192);
        assert!((z - 0.01 / (0.25f64 / 8192.0).sqrt()).abs() < 1e-12);
    }
}
