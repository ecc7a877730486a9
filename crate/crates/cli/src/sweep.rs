//! Parameter sweeps over a scenario.

use qkdlab_core::protocol::{run_session, SessionResult};
use qkdlab_core::{Exec, RngSeed, Stream};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::scenario::ScenarioFile;

fn one() -> usize {
    1
}

/// A dotted `parameter` path into the scenario (`eve.attacked_fraction`,
/// `bob_bases.0.phase`, `bob_bases.*.phase`), the values it takes and the
/// number of repetitions per value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<Value>,
    #[serde(default = "one")]
    pub repetitions: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub parameter: Value,
    pub qber_mean: Option<f64>,
    pub qber_stderr: Option<f64>,
    pub sift_rate: f64,
    pub sifted_error_rate: Option<f64>,
    pub transmission_error_rate: f64,
}

/// Sets `path` in `doc`. Missing object keys are created; `*` applies the
/// rest of the path to every array element; a numeric segment indexes an
/// array. `null` nodes become objects when a key is set below them.
pub fn set_path(doc: &mut Value, path: &str, new: &Value) -> anyhow::Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        anyhow::bail!("malformed parameter path {path:?}");
    }
    set_segments(doc, &segments, new, path)
}

fn set_segments(node: &mut Value, segments: &[&str], new: &Value, path: &str) -> anyhow::Result<()> {
    let Some((head, rest)) = segments.split_first() else {
        *node = new.clone();
        return Ok(());
    };
    if node.is_null() {
        *node = Value::Object(Default::default());
    }
    match node {
        Value::Array(items) if *head == "*" => {
            if items.is_empty() {
                anyhow::bail!("`*` in {path:?} matches an empty array");
            }
            items.iter_mut().try_for_each(|v| set_segments(v, rest, new, path))
        }
        Value::Array(items) => {
            let i: usize = head.parse().map_err(|_| anyhow::anyhow!("{path:?}: `{head}` is not an array index"))?;
            let len = items.len();
            let item = items.get_mut(i).ok_or_else(|| anyhow::anyhow!("{path:?}: index {i} out of range ({len})"))?;
            set_segments(item, rest, new, path)
        }
        Value::Object(map) => set_segments(map.entry(head.to_string()).or_insert(Value::Null), rest, new, path),
        other => anyhow::bail!("{path:?}: cannot descend into `{head}` of {other}"),
    }
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len() as f64;
    v.sum::<f64>() / n
}

fn mean_stderr(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let stderr = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
    };
    (Some(mean), Some(stderr))
}

/// Runs every (value, repetition) pair. Repetition `r` uses
/// `seed.derive(Stream::Sweep, r)` at every grid point. Rows come back in
/// grid order.
pub fn run_sweep(base: &Value, spec: &SweepSpec, seed: RngSeed, exec: Exec) -> anyhow::Result<Vec<SweepRow>> {
    if spec.values.is_empty() {
        anyhow::bail!("sweep grid is empty");
    }
    if spec.repetitions == 0 {
        anyhow::bail!("sweep repetitions must be at least 1");
    }
    let configs = spec
        .values
        .iter()
        .map(|v| {
            let mut doc = base.clone();
            set_path(&mut doc, &spec.parameter, v)?;
            let scenario = ScenarioFile::from_value(doc)
                .map_err(|e| anyhow::anyhow!("parameter {:?} = {v}: {e}", spec.parameter))?;
            (0..spec.repetitions)
                .map(|r| scenario.session_config(seed.derive(Stream::Sweep, r as u64), Exec::Sequential))
                .collect::<anyhow::Result<Vec<_>>>()
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let flat: Vec<_> = configs.iter().flatten().collect();
    let results: Vec<SessionResult> = exec.try_map(flat.len(), |k| run_session(flat[k]))?;
    Ok(spec
        .values
        .iter()
        .zip(results.chunks(spec.repetitions))
        .map(|(value, runs)| {
            let qbers: Vec<f64> = runs.iter().filter_map(|r| r.check_qber).collect();
            let raw: Vec<f64> = runs.iter().filter_map(|r| r.sifted_error_rate()).collect();
            let (qber_mean, qber_stderr) = mean_stderr(&qbers);
            SweepRow {
                parameter: value.clone(),
                qber_mean,
                qber_stderr,
                sift_rate: mean(runs.iter().map(|r| r.sift_rate())),
                sifted_error_rate: mean_stderr(&raw).0,
                transmission_error_rate: mean(runs.iter().map(|r| r.transmission_error_rate())),
            }
        })
        .collect())
}

pub fn rows_to_csv(rows: &[SweepRow]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "parameter",
        "qber_mean",
        "qber_stderr",
        "sift_rate",
        "sifted_error_rate",
        "transmission_error_rate",
    ])?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let param = match &r.parameter {
            Value::String(s) => s.clone(),
            v => v.to_string(),
        };
        w.write_record([
            param,
            cell(r.qber_mean),
            cell(r.qber_stderr),
            r.sift_rate.to_string(),
            cell(r.sifted_error_rate),
            r.transmission_error_rate.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn paths() {
        let mut doc = json!({"bob_bases": [{"phase": 0.0}, "X"], "eve": null});
        set_path(&mut doc, "eve.attacked_fraction", &json!(0.5)).unwrap();
        set_path(&mut doc, "bob_bases.0.phase", &json!(1.0)).unwrap();
        assert_eq!(doc["eve"]["attacked_fraction"], json!(0.5));
        assert_eq!(doc["bob_bases"][0]["phase"], json!(1.0));
        assert!(set_path(&mut doc, "bob_bases.1.phase", &json!(1.0)).is_err());
        assert!(set_path(&mut doc, "bob_bases.5.phase", &json!(1.0)).is_err());
        assert!(set_path(&mut doc, "a..b", &json!(1.0)).is_err());
        let mut doc = json!({"b": [{"phase": 0.0}, {"phase": 0.0}]});
        set_path(&mut doc, "b.*.phase", &json!(2.0)).unwrap();
        assert_eq!(doc, json!({"b": [{"phase": 2.0}, {"phase": 2.0}]}));
    }

    #[test]
    fn unresolvable_parameter_is_an_error() {
        let base = json!({"protocol": "BB84-2", "n_bits": 4});
        let spec = SweepSpec { parameter: "eve.no_such_field".into(), values: vec![json!(1)], repetitions: 1 };
        assert!(run_sweep(&base, &spec, RngSeed(0), Exec::Sequential).is_err());
        let spec = SweepSpec { parameter: "shots".into(), values: vec![], repetitions: 1 };
        assert!(run_sweep(&base, &spec, RngSeed(0), Exec::Sequential).is_err());
    }

    #[test]
    fn stats() {
        assert_eq!(mean_stderr(&[]), (None, None));
        assert_eq!(mean_stderr(&[0.5]), (Some(0.5), Some(0.0)));
        let (m, s) = mean_stderr(&[0.0, 1.0]);
        assert_eq!(m, Some(0.5));
        assert!((s.unwrap() - 0.5).abs() < 1e-15);
    }
}
