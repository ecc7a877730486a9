//! The `run`, `qasm`, `sweep` and `tomo` commands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use qkdlab_core::adversary::{build_calibration_set, CalibrationMode, ReadoutNoiseModel};
use qkdlab_core::analysis::{
    build_confusion_matrix, compare_to_expected, fidelity, mitigate, mitigate_inverse, run_tomography, theoretical_rho,
    tvd, FidelityEntry, FidelityReport,
};
use qkdlab_core::protocol::{
    exact_marginals, lane_pipeline, run_session, session_circuit, session_parties, Backend, PartyRecord, QubitMarginal,
    SessionConfig, SessionResult,
};
use qkdlab_core::state::bitstring;
use qkdlab_core::{qasm, Exec, RngSeed, ShotHistogram, Stream};
use serde::Serialize;

use crate::scenario::{MitigationMethod, OutputKind, ScenarioFile, SEED_ENV};
use crate::sweep::{rows_to_csv, run_sweep, SweepSpec};

/// How a successful command ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The session's check-bit QBER exceeded the threshold (or nothing
    /// survived sifting).
    Aborted,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Aborted => 2,
        }
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Tomography of the state Bob receives on `qubit` (after any attack, before
/// his decoding), compared with the state Alice prepared.
pub fn fidelity_entry(
    cfg: &SessionConfig,
    alice: &PartyRecord,
    qubit: usize,
    shots: u64,
    seed: RngSeed,
) -> anyhow::Result<FidelityEntry> {
    let mut lane = lane_pipeline(cfg, qubit)?;
    lane.truncate_after_channel()?;
    let readout = match &cfg.backend {
        Backend::ReadoutNoise(m) => Some(m.select(&[qubit])?),
        Backend::Ideal => None,
    };
    let run = run_tomography(&lane, 0, shots, seed.derive(Stream::Tomography, qubit as u64), readout.as_ref(), cfg.exec)?;
    let (bit, basis) = (alice.bits[qubit], alice.bases[qubit]);
    let f = fidelity(&run.reconstruction.rho, &theoretical_rho(bit, basis)?)?;
    Ok(FidelityEntry {
        qubit,
        fidelity: f,
        bit,
        basis,
        shots_per_setting: shots,
        expectations: run.expectations,
        rho: run.reconstruction.rho,
        bloch_norm: run.reconstruction.bloch_norm,
        rescaled: run.reconstruction.rescaled,
    })
}

fn fidelity_report(
    scenario: &ScenarioFile,
    cfg: &SessionConfig,
    result: &SessionResult,
    seed: RngSeed,
) -> anyhow::Result<FidelityReport> {
    let spec = scenario.tomography.clone().unwrap_or_default();
    let qubits = spec.qubits.unwrap_or_else(|| (0..result.n_bits).collect());
    let shots = spec.shots.unwrap_or(scenario.shots);
    let (alice, _) = session_parties(cfg)?;
    let entries = qubits
        .into_iter()
        .map(|q| {
            if q >= result.n_bits {
                anyhow::bail!("tomography qubit {q} out of range for {} qubits", result.n_bits);
            }
            fidelity_entry(cfg, &alice, q, shots, seed)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(FidelityReport { entries })
}

#[derive(Serialize)]
struct MitigatedArtifact {
    mode: CalibrationMode,
    method: MitigationMethod,
    calibration_shots: u64,
    shots: u64,
    probabilities: BTreeMap<String, f64>,
    marginals: Vec<QubitMarginal>,
    ideal_tvd_unmitigated: f64,
    ideal_tvd_mitigated: f64,
}

fn product_distribution(p1: &[f64]) -> Vec<f64> {
    (0..1usize << p1.len())
        .map(|i| p1.iter().enumerate().map(|(q, &p)| if i >> q & 1 == 1 { p } else { 1.0 - p }).product())
        .collect()
}

fn mitigated_artifact(
    scenario: &ScenarioFile,
    cfg: &SessionConfig,
    hist: &ShotHistogram,
    ideal_p1: &[f64],
) -> anyhow::Result<MitigatedArtifact> {
    let spec = scenario.mitigation.clone().unwrap_or_default();
    let n = hist.n_qubits();
    let model = match &cfg.backend {
        Backend::ReadoutNoise(m) => m.clone(),
        Backend::Ideal => ReadoutNoiseModel::uniform(n, 0.0, 0.0),
    };
    let mode = spec.mode.unwrap_or(CalibrationMode::for_width(n));
    let calibration_shots = spec.calibration_shots.unwrap_or(scenario.shots);
    let cal = build_calibration_set(n, &model, calibration_shots, cfg.seed.derive(Stream::Calibration, 0), mode)?;
    let m = build_confusion_matrix(&cal)?;
    let q = match spec.method {
        MitigationMethod::LeastSquares => mitigate(hist, &m)?,
        MitigationMethod::Inverse => mitigate_inverse(hist, &m)?,
    };
    let ideal = product_distribution(ideal_p1);
    let marginals = (0..n)
        .map(|k| q.marginal(k).map(|(p0, p1)| QubitMarginal { qubit: k, p0, p1 }))
        .collect::<qkdlab_core::Result<Vec<_>>>()?;
    Ok(MitigatedArtifact {
        mode,
        method: spec.method,
        calibration_shots,
        shots: hist.shots(),
        probabilities: q
            .probs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.abs() > 1e-15)
            .map(|(i, &p)| (bitstring(i, n), p))
            .collect(),
        marginals,
        ideal_tvd_unmitigated: tvd(&hist.frequencies()?, &ideal)?,
        ideal_tvd_mitigated: tvd(&q.probs, &ideal)?,
    })
}

/// `qkdlab run`: runs a scenario and writes its artifacts into `out`.
pub fn cmd_run(scenario_path: &Path, out: &Path, seed: Option<u64>, exec: Exec) -> anyhow::Result<Outcome> {
    let scenario = ScenarioFile::load(scenario_path)?;
    let seed = scenario.resolve_seed(seed, env_seed().as_deref())?;
    let cfg = scenario.session_config(seed, exec)?;
    let result = run_session(&cfg)?;

    write_artifact(out, "session.json", &to_json(&result)?)?;
    if scenario.wants(OutputKind::Histogram) {
        match &result.histogram {
            Some(h) => {
                write_artifact(out, "histogram.json", &to_json(h)?)?;
            }
            None => eprintln!("note: no joint histogram for {} single-shot qubits", result.n_bits),
        }
    }
    let fidelities = if scenario.wants(OutputKind::Fidelity) {
        let report = fidelity_report(&scenario, &cfg, &result, seed)?;
        write_artifact(out, "fidelity.json", &to_json(&report)?)?;
        Some(report)
    } else {
        None
    };
    let needs_ideal = scenario.wants(OutputKind::Report) || scenario.mitigation.is_some();
    let ideal = if needs_ideal { Some(exact_marginals(&cfg)?) } else { None };
    if scenario.wants(OutputKind::Report) {
        let expected = scenario.expected_p1.clone().or_else(|| ideal.clone()).unwrap_or_default();
        let mut report = compare_to_expected(&result, &expected)?;
        if let Some(f) = &fidelities {
            report.attach_fidelities(&f.entries.iter().map(|e| (e.qubit, e.fidelity)).collect::<Vec<_>>());
        }
        write_artifact(out, "report.csv", &report.to_csv()?)?;
    }
    if scenario.mitigation.is_some() {
        let hist = result.histogram.as_ref().context("mitigation needs a joint histogram")?;
        let art = mitigated_artifact(&scenario, &cfg, hist, ideal.as_deref().unwrap_or_default())?;
        write_artifact(out, "mitigated.json", &to_json(&art)?)?;
    }
    if scenario.wants(OutputKind::Qasm) {
        write_artifact(out, "circuit.qasm", &qasm::emit(&session_circuit(&cfg)?))?;
    }

    let qber = result.check_qber.map(|q| format!("{q:.4}")).unwrap_or_else(|| "n/a".into());
    println!(
        "{}: {} qubits, {} accepted, check QBER {qber}, final key {} bits{}",
        result.protocol.as_str(),
        result.n_bits,
        result.accepted.len(),
        result.final_key_alice.len(),
        if result.aborted { ", ABORTED" } else { "" }
    );
    Ok(if result.aborted { Outcome::Aborted } else { Outcome::Success })
}

/// `qkdlab qasm parse`: prints a summary, or the canonical text.
pub fn cmd_qasm_parse(file: &Path, canonical: bool) -> anyhow::Result<Outcome> {
    let src = fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
    let circuit = qasm::parse(&src).map_err(|e| anyhow::anyhow!("{}:{e}", file.display()))?;
    if canonical {
        print!("{}", qasm::emit(&circuit));
    } else {
        let barriers = circuit.ops().len() - circuit.gates().count();
        println!(
            "{}: {} qubits, {} gates, {} barriers, {} measured",
            file.display(),
            circuit.n_qubits(),
            circuit.gates().count(),
            barriers,
            circuit.measured().len()
        );
    }
    Ok(Outcome::Success)
}

/// `qkdlab qasm emit`: the scenario's transmission circuit. Intercept-resend
/// steps have no circuit form and are left out.
pub fn cmd_qasm_emit(scenario_path: &Path, out: Option<&Path>, seed: Option<u64>) -> anyhow::Result<Outcome> {
    let scenario = ScenarioFile::load(scenario_path)?;
    let seed = scenario.resolve_seed(seed, env_seed().as_deref())?;
    let cfg = scenario.session_config(seed, Exec::Sequential)?;
    if cfg.eve.is_some() {
        eprintln!("note: intercept-resend steps are not part of the emitted circuit");
    }
    let text = qasm::emit(&session_circuit(&cfg)?);
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(Outcome::Success)
}

/// `qkdlab sweep`: writes `sweep.csv`.
pub fn cmd_sweep(scenario_path: &Path, sweep_path: &Path, out: &Path, seed: Option<u64>, exec: Exec) -> anyhow::Result<Outcome> {
    let text = fs::read_to_string(scenario_path).with_context(|| format!("cannot read {}", scenario_path.display()))?;
    let base: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("{}", scenario_path.display()))?;
    let scenario = ScenarioFile::load(scenario_path)?;
    let seed = scenario.resolve_seed(seed, env_seed().as_deref())?;
    let spec_text = fs::read_to_string(sweep_path).with_context(|| format!("cannot read {}", sweep_path.display()))?;
    let spec: SweepSpec = serde_json::from_str(&spec_text).with_context(|| format!("{}", sweep_path.display()))?;
    let rows = run_sweep(&base, &spec, seed, exec)?;
    let path = write_artifact(out, "sweep.csv", &rows_to_csv(&rows)?)?;
    println!("{} grid points x {} repetitions -> {}", rows.len(), spec.repetitions, path.display());
    Ok(Outcome::Success)
}

/// `qkdlab tomo`: tomography of one received qubit, written to
/// `tomography.json`.
pub fn cmd_tomo(
    scenario_path: &Path,
    qubit: usize,
    shots: Option<u64>,
    out: &Path,
    seed: Option<u64>,
    exec: Exec,
) -> anyhow::Result<Outcome> {
    let scenario = ScenarioFile::load(scenario_path)?;
    let seed = scenario.resolve_seed(seed, env_seed().as_deref())?;
    let cfg = scenario.session_config(seed, exec)?;
    let n = cfg.resolved_n()?;
    if qubit >= n {
        anyhow::bail!("qubit {qubit} out of range for a {n}-qubit scenario");
    }
    let (alice, _) = session_parties(&cfg)?;
    let shots = shots.or(scenario.tomography.as_ref().and_then(|t| t.shots)).unwrap_or(scenario.shots);
    let entry = fidelity_entry(&cfg, &alice, qubit, shots, seed)?;
    println!("qubit {qubit}: fidelity {:.6} ({} shots per setting)", entry.fidelity, shots);
    write_artifact(out, "tomography.json", &to_json(&FidelityReport { entries: vec![entry] })?)?;
    Ok(Outcome::Success)
}
