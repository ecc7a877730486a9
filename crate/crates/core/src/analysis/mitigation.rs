use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::adversary::{CalibrationMode, CalibrationSet};
use crate::state::bitstring;
use crate::{Error, Result, ShotHistogram};

/// Iteration cap of the constrained least-squares solver.
pub const MAX_ITERATIONS: usize = 200_000;
/// Solver stops when no component moves by more than this in one step.
pub const STEP_TOL: f64 = 1e-13;

/// Column-stochastic readout confusion matrix: `M[observed][prepared]`.
#[derive(Clone, Debug, PartialEq)]
pub enum MitigationMatrix {
    Full(DMatrix<f64>),
    /// Per-qubit 2×2 factors, qubit 0 first; the full matrix is their
    /// Kronecker product with qubit 0 as the least significant index.
    Tensored(Vec<[[f64; 2]; 2]>),
}

fn check_stochastic(columns: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    for (j, col) in columns.enumerate() {
        if col.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Invalid(format!("confusion column {j} has a negative or non-finite entry")));
        }
        let s: f64 = col.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("confusion column {j} sums to {s}")));
        }
    }
    Ok(())
}

impl MitigationMatrix {
    pub fn full(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || !m.nrows().is_power_of_two() || m.nrows() < 2 {
            return Err(Error::Invalid(format!("confusion matrix must be 2^k square, got {}x{}", m.nrows(), m.ncols())));
        }
        check_stochastic(m.column_iter().map(|c| c.iter().copied().collect()))?;
        Ok(MitigationMatrix::Full(m))
    }

    pub fn tensored(factors: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Empty("tensored factors"));
        }
        check_stochastic(factors.iter().flat_map(|f| (0..2).map(move |j| vec![f[0][j], f[1][j]])))?;
        Ok(MitigationMatrix::Tensored(factors))
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            MitigationMatrix::Full(m) => m.nrows().trailing_zeros() as usize,
            MitigationMatrix::Tensored(f) => f.len(),
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    /// The dense matrix (Kronecker product in tensored mode).
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            MitigationMatrix::Full(m) => m.clone(),
            MitigationMatrix::Tensored(_) => {
                let d = self.dim();
                let mut out = DMatrix::zeros(d, d);
                for j in 0..d {
                    let mut e = vec![0.0; d];
                    e[j] = 1.0;
                    for (i, v) in self.apply(&e).into_iter().enumerate() {
                        out[(i, j)] = v;
                    }
                }
                out
            }
        }
    }

    fn apply_factors(factors: &[[[f64; 2]; 2]], x: &[f64], transpose: bool) -> Vec<f64> {
        let mut v = x.to_vec();
        for (q, f) in factors.iter().enumerate() {
            let bit = 1usize << q;
            let (a, b, c, d) = if transpose { (f[0][0], f[1][0], f[0][1], f[1][1]) } else { (f[0][0], f[0][1], f[1][0], f[1][1]) };
            for i in (0..v.len()).filter(|i| i & bit == 0) {
                let (u, w) = (v[i], v[i | bit]);
                v[i] = a * u + b * w;
                v[i | bit] = c * u + d * w;
            }
        }
        v
    }

    /// `M·x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            MitigationMatrix::Full(m) => (m * nalgebra::DVector::from_column_slice(x)).iter().copied().collect(),
            MitigationMatrix::Tensored(f) => Self::apply_factors(f, x, false),
        }
    }

    /// `Mᵀ·x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        match self {
            MitigationMatrix::Full(m) => (m.transpose() * nalgebra::DVector::from_column_slice(x)).iter().copied().collect(),
            MitigationMatrix::Tensored(f) => Self::apply_factors(f, x, true),
        }
    }

    /// Upper bound on the largest eigenvalue of `MᵀM`: `‖M‖₁·‖M‖∞`.
    fn lipschitz(&self) -> f64 {
        match self {
            MitigationMatrix::Full(m) => m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max),
            MitigationMatrix::Tensored(f) => f.iter().map(|g| (g[0][0] + g[0][1]).max(g[1][0] + g[1][1])).product(),
        }
    }
}

fn frequencies(cal: &CalibrationSet, key: &str) -> Result<Vec<f64>> {
    let h = cal.histograms.get(key).ok_or_else(|| Error::Invalid(format!("calibration is missing prepared state {key}")))?;
    if h.shots() == 0 {
        return Err(Error::ZeroShots);
    }
    h.frequencies()
}

pub fn build_confusion_matrix(cal: &CalibrationSet) -> Result<MitigationMatrix> {
    let n = cal.n_qubits;
    match cal.mode {
        CalibrationMode::Full => {
            let d = 1usize << n;
            let mut m = DMatrix::zeros(d, d);
            for j in 0..d {
                for (i, f) in frequencies(cal, &bitstring(j, n))?.into_iter().enumerate() {
                    m[(i, j)] = f;
                }
            }
            MitigationMatrix::full(m)
        }
        CalibrationMode::Tensored => {
            let zeros = cal.histograms.get(&"0".repeat(n)).ok_or(Error::Invalid("calibration is missing all-zeros".into()))?;
            let ones = cal.histograms.get(&"1".repeat(n)).ok_or(Error::Invalid("calibration is missing all-ones".into()))?;
            let factors = (0..n)
                .map(|q| {
                    let (z0, z1) = zeros.marginal(q)?;
                    let (o0, o1) = ones.marginal(q)?;
                    Ok([[z0, o0], [z1, o1]])
                })
                .collect::<Result<Vec<_>>>()?;
            MitigationMatrix::tensored(factors)
        }
    }
}

/// A mitigated distribution; `probs` may be negative only for raw inversion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiHistogram {
    pub n_qubits: usize,
    pub shots: u64,
    pub probs: Vec<f64>,
}

impl QuasiHistogram {
    /// Quasi-counts `probs · shots`.
    pub fn counts(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p * self.shots as f64).collect()
    }

    pub fn marginal(&self, qubit: usize) -> Result<(f64, f64)> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex { index: qubit, n_qubits: self.n_qubits });
        }
        let p1: f64 = self.probs.iter().enumerate().filter(|(i, _)| i >> qubit & 1 == 1).map(|(_, p)| p).sum();
        Ok((1.0 - p1, p1))
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

fn check_dims(hist: &ShotHistogram, m: &MitigationMatrix) -> Result<Vec<f64>> {
    if hist.n_qubits() != m.n_qubits() {
        return Err(Error::LengthMismatch { what: "histogram vs mitigation width", left: hist.n_qubits(), right: m.n_qubits() });
    }
    hist.frequencies()
}

/// Least squares `min ‖M·x − y‖₂` over the probability simplex, solved by
/// accelerated projected gradient with adaptive restart.
pub fn solve_constrained(m: &MitigationMatrix, y: &[f64]) -> Result<Vec<f64>> {
    let step = 1.0 / m.lipschitz();
    let grad = |x: &[f64]| -> Vec<f64> {
        let r: Vec<f64> = m.apply(x).iter().zip(y).map(|(a, b)| a - b).collect();
        m.apply_transpose(&r)
    };
    let mut x = project_simplex(y);
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..MAX_ITERATIONS {
        let g = grad(&z);
        let next = project_simplex(&z.iter().zip(&g).map(|(zi, gi)| zi - step * gi).collect::<Vec<_>>());
        let delta = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if delta <= STEP_TOL {
            return Ok(next);
        }
        let restart = g.iter().zip(next.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum::<f64>() > 0.0;
        let t_next = if restart { 1.0 } else { (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0 };
        let beta = if restart { 0.0 } else { (t - 1.0) / t_next };
        z = next.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        x = next;
        t = t_next;
    }
    let residual = m.apply(&x).iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Err(Error::NoConvergence { iterations: MAX_ITERATIONS, residual })
}

/// Constrained least-squares mitigation; the result is nonnegative and sums
/// to one.
pub fn mitigate(hist: &ShotHistogram, m: &MitigationMatrix) -> Result<QuasiHistogram> {
    let y = check_dims(hist, m)?;
    Ok(QuasiHistogram { n_qubits: hist.n_qubits(), shots: hist.shots(), probs: solve_constrained(m, &y)? })
}

/// Raw inversion `M⁻¹·y`, which can produce negative entries.
pub fn mitigate_inverse(hist: &ShotHistogram, m: &MitigationMatrix) -> Result<QuasiHistogram> {
    let y = check_dims(hist, m)?;
    let probs = match m {
        MitigationMatrix::Full(dense) => dense
            .clone()
            .lu()
            .solve(&nalgebra::DVector::from_vec(y))
            .ok_or_else(|| Error::Invalid("confusion matrix is singular".into()))?
            .iter()
            .copied()
            .collect(),
        MitigationMatrix::Tensored(factors) => {
            let inv = factors
                .iter()
                .map(|f| {
                    let det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
                    if det.abs() < 1e-12 {
                        return Err(Error::Invalid("confusion factor is singular".into()));
                    }
                    Ok([[f[1][1] / det, -f[0][1] / det], [-f[1][0] / det, f[0][0] / det]])
                })
                .collect::<Result<Vec<_>>>()?;
            MitigationMatrix::apply_factors(&inv, &y, false)
        }
    };
    Ok(QuasiHistogram { n_qubits: hist.n_qubits(), shots: hist.shots(), probs })
}

/// Total-variation distance `½ Σ |a − b|`.
pub fn tvd(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { what: "distribution lengths", left: a.len(), right: b.len() });
    }
    Ok(0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}
