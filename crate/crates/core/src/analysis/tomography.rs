use serde::{Deserialize, Serialize};

use super::density::{DensityMatrix1Q, PauliExpectations};
use crate::adversary::{apply_readout_noise_with, Pipeline, ReadoutNoiseModel};
use crate::protocol::{encode_ops, BasisSpec};
use crate::{Amp, Circuit, Error, Exec, GateKind, GateOp, Result, RngSeed, ShotHistogram, StateVector, Stream};

/// Bloch norms above this are rejected instead of rescaled.
pub const BLOCH_SLACK: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TomoSetting {
    Z,
    X,
    Y,
}

impl TomoSetting {
    pub const ALL: [TomoSetting; 3] = [TomoSetting::Z, TomoSetting::X, TomoSetting::Y];

    /// Rotation mapping the setting's `+1` eigenstate onto `|0⟩`.
    pub fn rotation(self, target: usize) -> Vec<GateOp> {
        match self {
            TomoSetting::Z => vec![],
            TomoSetting::X => vec![GateOp::new(GateKind::H, target)],
            TomoSetting::Y => vec![GateOp::new(GateKind::S, target), GateOp::new(GateKind::H, target)],
        }
    }
}

/// `prep` followed by each setting's rotation, measuring `target` only.
pub fn tomography_circuits(prep: &Circuit, target: usize) -> Result<Vec<(TomoSetting, Circuit)>> {
    if target >= prep.n_qubits() {
        return Err(Error::QubitIndex { index: target, n_qubits: prep.n_qubits() });
    }
    TomoSetting::ALL
        .iter()
        .map(|&s| {
            let mut c = prep.clone();
            c.clear_measurements().barrier();
            c.extend(s.rotation(target))?;
            c.measure(target)?;
            Ok((s, c))
        })
        .collect()
}

/// The three bare settings on an `n`-qubit register.
pub fn tomography_settings(n_qubits: usize, target: usize) -> Result<Vec<(TomoSetting, Circuit)>> {
    tomography_circuits(&Circuit::new(n_qubits)?, target)
}

fn p0_minus_p1(h: &ShotHistogram, qubit: usize) -> Result<f64> {
    if h.shots() == 0 {
        return Err(Error::Empty("tomography histogram"));
    }
    let (p0, p1) = h.marginal(qubit)?;
    Ok(p0 - p1)
}

/// Each expectation is `p0 − p1` of `qubit` in its setting's histogram.
pub fn estimate_expectations(
    hist_z: &ShotHistogram,
    hist_x: &ShotHistogram,
    hist_y: &ShotHistogram,
    qubit: usize,
) -> Result<PauliExpectations> {
    Ok(PauliExpectations {
        ex: p0_minus_p1(hist_x, qubit)?,
        ey: p0_minus_p1(hist_y, qubit)?,
        ez: p0_minus_p1(hist_z, qubit)?,
    })
}

/// Infinite-shot expectations of `qubit` in `state`.
pub fn exact_expectations(state: &StateVector, qubit: usize) -> Result<PauliExpectations> {
    let mut e = [0.0; 3];
    for (slot, s) in e.iter_mut().zip(TomoSetting::ALL) {
        let mut rotated = state.clone();
        rotated.apply_all(&s.rotation(qubit))?;
        *slot = 1.0 - 2.0 * rotated.prob_one(qubit)?;
    }
    Ok(PauliExpectations { ez: e[0], ex: e[1], ey: e[2] })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub rho: DensityMatrix1Q,
    pub bloch_norm: f64,
    /// True when the measured Bloch vector was longer than 1 and was scaled
    /// back onto the sphere.
    pub rescaled: bool,
}

/// `ρ = (I + ex·X + ey·Y + ez·Z) / 2`, radially rescaling Bloch vectors
/// with norm in `(1, 1 + BLOCH_SLACK]`.
pub fn reconstruct_rho(e: PauliExpectations) -> Result<Reconstruction> {
    let norm = e.norm();
    if !norm.is_finite() {
        return Err(Error::NonFinite("Pauli expectations".into()));
    }
    if norm > 1.0 + BLOCH_SLACK {
        return Err(Error::Invalid(format!("Bloch vector norm {norm} exceeds 1 + {BLOCH_SLACK}")));
    }
    let rescaled = norm > 1.0;
    let e = if rescaled { e.scaled(1.0 / norm) } else { e };
    Ok(Reconstruction { rho: DensityMatrix1Q::from_bloch(e), bloch_norm: norm, rescaled })
}

/// The pure state Alice prepares for `bit` in `basis`.
pub fn theoretical_rho(bit: u8, basis: BasisSpec) -> Result<DensityMatrix1Q> {
    let mut s = StateVector::new(1)?;
    s.apply_all(&encode_ops(bit, basis, 0))?;
    let a = s.amplitudes();
    DensityMatrix1Q::pure([a[0], a[1]])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyRun {
    pub qubit: usize,
    pub shots: u64,
    pub counts_z: [u64; 2],
    pub counts_x: [u64; 2],
    pub counts_y: [u64; 2],
    pub expectations: PauliExpectations,
    pub reconstruction: Reconstruction,
}

/// Samples the three settings of `target` after `prep`, each with its own
/// derived seed, optionally through a one-qubit readout error model. `prep`
/// may contain intercept-resend steps.
pub fn run_tomography(
    prep: &Pipeline,
    target: usize,
    shots: u64,
    seed: RngSeed,
    readout: Option<&ReadoutNoiseModel>,
    exec: Exec,
) -> Result<TomographyRun> {
    if target >= prep.n_qubits() {
        return Err(Error::QubitIndex { index: target, n_qubits: prep.n_qubits() });
    }
    let mut hists = Vec::with_capacity(3);
    for (k, setting) in TomoSetting::ALL.into_iter().enumerate() {
        let mut p = prep.clone();
        p.push_ops(&setting.rotation(target))?;
        p.set_measured(vec![target])?;
        let s = seed.derive(Stream::Tomography, k as u64);
        let mut h = p.sample(shots, s, exec)?;
        if let Some(model) = readout {
            h = apply_readout_noise_with(&h, model, s.derive(Stream::Readout, 0), exec)?;
        }
        hists.push(h);
    }
    let counts = |h: &ShotHistogram| [h.count(0), h.count(1)];
    let expectations = estimate_expectations(&hists[0], &hists[1], &hists[2], 0)?;
    Ok(TomographyRun {
        qubit: target,
        shots,
        counts_z: counts(&hists[0]),
        counts_x: counts(&hists[1]),
        counts_y: counts(&hists[2]),
        expectations,
        reconstruction: reconstruct_rho(expectations)?,
    })
}

/// `|0⟩ + i|1⟩` normalised, the `+1` eigenstate of `Y`.
pub fn y_plus() -> [Amp; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [Amp::new(h, 0.0), Amp::new(0.0, h)]
}
