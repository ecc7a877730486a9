//! Single-qubit gate library.
//!
//! Matrices follow the lab's printed conventions verbatim. In particular the
//! phase gate `S` is `diag(1, e^{-iπ/2}) = diag(1, -i)`, the conjugate of the
//! more common convention, and `Sdg` is its inverse `diag(1, i)`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A complex amplitude.
pub type Amp = Complex64;

const ZERO: Amp = Amp::new(0.0, 0.0);
const ONE: Amp = Amp::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    I,
    X,
    Y,
    Z,
    H,
    S,
    Sdg,
    T,
    Tdg,
    /// `diag(1, e^{iθ})`.
    P(f64),
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::I => "id",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::H => "h",
            GateKind::S => "s",
            GateKind::Sdg => "sdg",
            GateKind::T => "t",
            GateKind::Tdg => "tdg",
            GateKind::P(_) => "p",
        }
    }

    /// Looks a gate up by name. `theta` must be given for `p` and only for `p`.
    pub fn from_name(name: &str, theta: Option<f64>) -> Result<GateKind> {
        let kind = match name.to_ascii_lowercase().as_str() {
            "i" | "id" => GateKind::I,
            "x" => GateKind::X,
            "y" => GateKind::Y,
            "z" => GateKind::Z,
            "h" => GateKind::H,
            "s" => GateKind::S,
            "sdg" => GateKind::Sdg,
            "t" => GateKind::T,
            "tdg" => GateKind::Tdg,
            "p" | "u1" => {
                let theta = theta.ok_or_else(|| Error::GateParameter {
                    gate: name.to_string(),
                    message: "missing angle".into(),
                })?;
                if !theta.is_finite() {
                    return Err(Error::NonFinite(format!("angle of `{name}`")));
                }
                return Ok(GateKind::P(theta));
            }
            _ => return Err(Error::UnknownGate(name.to_string())),
        };
        if theta.is_some() {
            return Err(Error::GateParameter {
                gate: name.to_string(),
                message: "gate takes no angle".into(),
            });
        }
        Ok(kind)
    }

    pub fn matrix(&self) -> Unitary2 {
        let phase = |theta: f64| Unitary2([[ONE, ZERO], [ZERO, Amp::from_polar(1.0, theta)]]);
        match *self {
            GateKind::I => Unitary2::identity(),
            GateKind::X => Unitary2([[ZERO, ONE], [ONE, ZERO]]),
            GateKind::Y => Unitary2([[ZERO, -Amp::i()], [Amp::i(), ZERO]]),
            GateKind::Z => Unitary2([[ONE, ZERO], [ZERO, -ONE]]),
            GateKind::H => {
                let h = Amp::new(FRAC_1_SQRT_2, 0.0);
                Unitary2([[h, h], [h, -h]])
            }
            GateKind::S => Unitary2([[ONE, ZERO], [ZERO, -Amp::i()]]),
            GateKind::Sdg => Unitary2([[ONE, ZERO], [ZERO, Amp::i()]]),
            GateKind::T => phase(FRAC_PI_4),
            GateKind::Tdg => phase(-FRAC_PI_4),
            GateKind::P(theta) => phase(theta),
        }
    }

    pub fn inverse(&self) -> GateKind {
        match *self {
            GateKind::S => GateKind::Sdg,
            GateKind::Sdg => GateKind::S,
            GateKind::T => GateKind::Tdg,
            GateKind::Tdg => GateKind::T,
            GateKind::P(theta) => GateKind::P(-theta),
            k => k,
        }
    }

    /// Gates that may carry a control qubit (`cx`, `cy`, `cz`).
    pub fn is_controllable(&self) -> bool {
        matches!(self, GateKind::X | GateKind::Y | GateKind::Z)
    }

    /// The phase gate `diag(1, e^{iθ})` using a named gate where one exists
    /// (the lab-convention `S` for `-π/2`, `T` for `π/4`, `Z` for `±π`).
    pub fn phase(theta: f64) -> GateKind {
        const EPS: f64 = 1e-12;
        let t = crate::protocol::normalize_phase(theta);
        if t.abs() < EPS {
            GateKind::I
        } else if (t + FRAC_PI_2).abs() < EPS {
            GateKind::S
        } else if (t - FRAC_PI_2).abs() < EPS {
            GateKind::Sdg
        } else if (t - FRAC_PI_4).abs() < EPS {
            GateKind::T
        } else if (t + FRAC_PI_4).abs() < EPS {
            GateKind::Tdg
        } else if (t.abs() - std::f64::consts::PI).abs() < EPS {
            GateKind::Z
        } else {
            GateKind::P(theta)
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateKind::P(theta) => write!(f, "p({theta})"),
            k => f.write_str(k.name()),
        }
    }
}

/// Looks a gate up by name and returns its matrix.
pub fn gate_matrix(name: &str, theta: Option<f64>) -> Result<Unitary2> {
    GateKind::from_name(name, theta).map(|k| k.matrix())
}

/// A 2×2 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unitary2(pub [[Amp; 2]; 2]);

impl Unitary2 {
    pub fn identity() -> Self {
        Unitary2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Unitary2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Unitary2) -> f64 {
        let mut d: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                d = d.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        d
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (*self * self.dagger()).max_abs_diff(&Unitary2::identity()) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    pub fn apply(&self, v: [Amp; 2]) -> [Amp; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;

    fn mul(self, rhs: Unitary2) -> Unitary2 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Unitary2(out)
    }
}
