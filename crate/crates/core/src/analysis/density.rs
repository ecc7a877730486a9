use serde::{Deserialize, Serialize};

use crate::{Amp, Error, Result, Unitary2};

/// Tolerance for Hermiticity, trace and eigenvalue checks.
pub const DENSITY_TOL: f64 = 1e-10;

/// Pauli expectation values `⟨X⟩, ⟨Y⟩, ⟨Z⟩` of one qubit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PauliExpectations {
    pub ex: f64,
    pub ey: f64,
    pub ez: f64,
}

impl PauliExpectations {
    pub fn new(ex: f64, ey: f64, ez: f64) -> Self {
        PauliExpectations { ex, ey, ez }
    }

    pub fn norm(&self) -> f64 {
        (self.ex * self.ex + self.ey * self.ey + self.ez * self.ez).sqrt()
    }

    pub fn scaled(&self, k: f64) -> Self {
        PauliExpectations { ex: self.ex * k, ey: self.ey * k, ez: self.ez * k }
    }
}

/// A single-qubit density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix1Q(pub [[Amp; 2]; 2]);

impl DensityMatrix1Q {
    /// `(I + ex·X + ey·Y + ez·Z) / 2`, without any validity check.
    pub fn from_bloch(e: PauliExpectations) -> Self {
        let h = 0.5;
        DensityMatrix1Q([
            [Amp::new(h * (1.0 + e.ez), 0.0), Amp::new(h * e.ex, -h * e.ey)],
            [Amp::new(h * e.ex, h * e.ey), Amp::new(h * (1.0 - e.ez), 0.0)],
        ])
    }

    /// `|ψ⟩⟨ψ|` for a normalised pair of amplitudes.
    pub fn pure(psi: [Amp; 2]) -> Result<Self> {
        let norm = psi[0].norm_sqr() + psi[1].norm_sqr();
        if (norm - 1.0).abs() > DENSITY_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(DensityMatrix1Q([
            [psi[0] * psi[0].conj(), psi[0] * psi[1].conj()],
            [psi[1] * psi[0].conj(), psi[1] * psi[1].conj()],
        ]))
    }

    pub fn maximally_mixed() -> Self {
        Self::from_bloch(PauliExpectations::default())
    }

    pub fn bloch(&self) -> PauliExpectations {
        let m = &self.0;
        PauliExpectations { ex: 2.0 * m[0][1].re, ey: -2.0 * m[0][1].im, ez: (m[0][0] - m[1][1]).re }
    }

    pub fn trace(&self) -> Amp {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Amp {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = &self.0;
        let t = (m[0][0].re + m[1][1].re) / 2.0;
        let d = (m[0][0].re - m[1][1].re) / 2.0;
        let off = (m[0][1] + m[1][0].conj()) / 2.0;
        let r = (d * d + off.norm_sqr()).sqrt();
        [t - r, t + r]
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.0;
        if m.iter().flatten().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("density matrix".into()));
        }
        let herm = (m[0][1] - m[1][0].conj()).norm().max(m[0][0].im.abs()).max(m[1][1].im.abs());
        if herm > DENSITY_TOL {
            return Err(Error::Invalid(format!("density matrix is not Hermitian (deviation {herm:e})")));
        }
        let tr = self.trace().re;
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::Invalid(format!("density matrix trace {tr} is not 1")));
        }
        let lo = self.eigenvalues()[0];
        if lo < -DENSITY_TOL {
            return Err(Error::Invalid(format!("density matrix has negative eigenvalue {lo:e}")));
        }
        Ok(())
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &Unitary2) -> Self {
        let a = u.0;
        let mut out = [[Amp::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                for k in 0..2 {
                    for l in 0..2 {
                        *cell += a[i][k] * self.0[k][l] * a[j][l].conj();
                    }
                }
            }
        }
        DensityMatrix1Q(out)
    }

    fn trace_product(&self, other: &Self) -> f64 {
        let (a, b) = (&self.0, &other.0);
        (0..2).flat_map(|i| (0..2).map(move |k| a[i][k] * b[k][i])).sum::<Amp>().re
    }
}

/// Uhlmann fidelity in the qubit closed form
/// `F = √( tr(ρσ) + 2√(det ρ · det σ) )`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix1Q, sigma: &DensityMatrix1Q) -> Result<f64> {
    rho.validate()?;
    sigma.validate()?;
    let dets = (rho.det().re * sigma.det().re).max(0.0);
    let f2 = rho.trace_product(sigma) + 2.0 * dets.sqrt();
    Ok(f2.max(0.0).sqrt().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn bloch_roundtrip() {
        let e = PauliExpectations::new(0.3, -0.4, 0.5);
        let b = DensityMatrix1Q::from_bloch(e).bloch();
        assert!((b.ex - 0.3).abs() < 1e-15 && (b.ey + 0.4).abs() < 1e-15 && (b.ez - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let zero = DensityMatrix1Q::pure([Amp::new(1.0, 0.0), Amp::new(0.0, 0.0)]).unwrap();
        let one = DensityMatrix1Q::pure([Amp::new(0.0, 0.0), Amp::new(1.0, 0.0)]).unwrap();
        assert!((fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-15);
        assert!(fidelity(&zero, &one).unwrap().abs() < 1e-15);
        let mixed = DensityMatrix1Q::maximally_mixed();
        assert!((fidelity(&mixed, &one).unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        let bad = DensityMatrix1Q::from_bloch(PauliExpectations::new(0.0, 0.0, 1.5));
        assert!(bad.validate().is_err());
        let mut m = DensityMatrix1Q::maximally_mixed();
        m.0[0][1] = Amp::new(0.0, 0.1);
        assert!(m.validate().is_err());
        assert!(fidelity(&bad, &m).is_err());
        assert!(DensityMatrix1Q::pure([Amp::new(1.0, 0.0), Amp::new(1.0, 0.0)]).is_err());
    }
}
