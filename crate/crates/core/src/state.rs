//! Dense statevector over up to [`MAX_QUBITS`] qubits.
//!
//! Basis index bit `q` is qubit `q`. Bitstrings are rendered little-endian:
//! the rightmost character is qubit 0.

use std::collections::BTreeMap;

use rand::Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::gate::{Amp, Unitary2};
use crate::{Error, Exec, GateOp, Result};

pub const MAX_QUBITS: usize = 24;

/// Norm tolerance for a valid state.
pub const NORM_TOL: f64 = 1e-10;

/// Below this width gate application always runs sequentially.
const PAR_MIN_QUBITS: usize = 14;
#[cfg(feature = "parallel")]
const PAR_GRAIN: usize = 1 << 12;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Amp>,
}

/// Renders basis index `index` as an `n`-character little-endian bitstring.
pub fn bitstring(index: usize, n: usize) -> String {
    (0..n).rev().map(|q| if index >> q & 1 == 1 { '1' } else { '0' }).collect()
}

/// Parses a little-endian bitstring back into a basis index.
pub fn parse_bitstring(s: &str) -> Option<usize> {
    if s.is_empty() || s.len() > MAX_QUBITS {
        return None;
    }
    s.chars().try_fold(0usize, |acc, c| match c {
        '0' => Some(acc << 1),
        '1' => Some(acc << 1 | 1),
        _ => None,
    })
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let mut amps = vec![Amp::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Amp::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Amp>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        if amps.len() != 1 << n_qubits {
            return Err(Error::LengthMismatch {
                what: "amplitude vector",
                left: amps.len(),
                right: 1 << n_qubits,
            });
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("amplitude".into()));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(StateVector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Amp] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Amp> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::LengthMismatch {
                what: "state width",
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        self.apply_with(op, Exec::default())
    }

    pub fn apply_with(&mut self, op: &GateOp, exec: Exec) -> Result<()> {
        op.validate(self.n_qubits)?;
        let u = op.kind.matrix();
        if !u.is_finite() {
            return Err(Error::NonFinite(format!("matrix of {}", op.kind)));
        }
        let half = 1usize << op.target;
        let cmask = op.control.map_or(0, |c| 1usize << c);
        let parallel = exec.is_parallel() && self.n_qubits >= PAR_MIN_QUBITS;
        apply_kernel(&mut self.amps, half, cmask, &u, parallel);
        Ok(())
    }

    pub fn apply_all<'a, I: IntoIterator<Item = &'a GateOp>>(&mut self, ops: I) -> Result<()> {
        for op in ops {
            self.apply(op)?;
        }
        Ok(())
    }

    /// `|amp|²` for every basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Exact probability that `qubit` reads 1.
    pub fn prob_one(&self, qubit: usize) -> Result<f64> {
        self.check_index(qubit)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i >> qubit & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projects `qubit` onto `outcome` and renormalises. Fails on a
    /// zero-probability branch.
    pub fn project(&self, qubit: usize, outcome: u8) -> Result<StateVector> {
        self.check_index(qubit)?;
        let p1 = self.prob_one(qubit)?;
        let p = if outcome == 1 { p1 } else { 1.0 - p1 };
        if p <= 1e-300 {
            return Err(Error::Invalid(format!(
                "projection of qubit {qubit} onto {outcome} has zero probability"
            )));
        }
        let scale = 1.0 / p.sqrt();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if (i >> qubit & 1) as u8 == outcome { a * scale } else { Amp::new(0.0, 0.0) })
            .collect();
        Ok(StateVector { n_qubits: self.n_qubits, amps })
    }

    /// Samples a measurement of `qubit` and returns the outcome together with
    /// the collapsed, renormalised post-measurement state.
    pub fn collapse<R: Rng + ?Sized>(&self, qubit: usize, rng: &mut R) -> Result<(u8, StateVector)> {
        let p1 = self.prob_one(qubit)?;
        let u: f64 = rng.random();
        let outcome = if u < p1 { 1 } else { 0 };
        Ok((outcome, self.project(qubit, outcome)?))
    }

    fn check_index(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex { index: qubit, n_qubits: self.n_qubits });
        }
        Ok(())
    }
}

fn kernel(base: usize, lo: &mut [Amp], hi: &mut [Amp], cmask: usize, u: &Unitary2) {
    for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
        if cmask != 0 && (base + k) & cmask == 0 {
            continue;
        }
        let [x, y] = u.apply([*a, *b]);
        *a = x;
        *b = y;
    }
}

#[allow(unused_variables)]
fn apply_kernel(amps: &mut [Amp], half: usize, cmask: usize, u: &Unitary2, parallel: bool) {
    #[cfg(feature = "parallel")]
    if parallel {
        if half >= PAR_GRAIN {
            for (ci, chunk) in amps.chunks_mut(2 * half).enumerate() {
                let (lo, hi) = chunk.split_at_mut(half);
                let base = ci * 2 * half;
                lo.par_chunks_mut(PAR_GRAIN)
                    .zip(hi.par_chunks_mut(PAR_GRAIN))
                    .enumerate()
                    .for_each(|(j, (l, h))| kernel(base + j * PAR_GRAIN, l, h, cmask, u));
            }
        } else {
            amps.par_chunks_mut(2 * half).enumerate().for_each(|(ci, chunk)| {
                let (lo, hi) = chunk.split_at_mut(half);
                kernel(ci * 2 * half, lo, hi, cmask, u);
            });
        }
        return;
    }
    for (ci, chunk) in amps.chunks_mut(2 * half).enumerate() {
        let (lo, hi) = chunk.split_at_mut(half);
        kernel(ci * 2 * half, lo, hi, cmask, u);
    }
}

/// Nonzero outcome probabilities keyed by little-endian bitstring.
pub fn exact_probabilities(state: &StateVector) -> BTreeMap<String, f64> {
    state
        .probabilities()
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p > 0.0)
        .map(|(i, p)| (bitstring(i, state.n_qubits), p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::RngSeed;
    use crate::GateKind;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn plus() -> StateVector {
        let r = Amp::new(FRAC_1_SQRT_2, 0.0);
        StateVector::from_amplitudes(1, vec![r, r]).unwrap()
    }

    #[test]
    fn new_state_bounds() {
        assert_eq!(StateVector::new(1).unwrap().amplitudes(), &[Amp::new(1.0, 0.0), Amp::new(0.0, 0.0)]);
        let s = StateVector::new(3).unwrap();
        assert_eq!(s.amplitudes().len(), 8);
        assert_eq!(s.amplitudes()[0], Amp::new(1.0, 0.0));
        assert!(matches!(StateVector::new(25), Err(Error::QubitCount(25))));
        assert!(matches!(StateVector::new(0), Err(Error::QubitCount(0))));
    }

    #[test]
    fn rejects_bad_amplitudes() {
        let bad = vec![Amp::new(f64::NAN, 0.0), Amp::new(0.0, 0.0)];
        assert!(matches!(StateVector::from_amplitudes(1, bad), Err(Error::NonFinite(_))));
        let unnorm = vec![Amp::new(1.0, 0.0), Amp::new(1.0, 0.0)];
        assert!(matches!(StateVector::from_amplitudes(1, unnorm), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn hadamard_and_x_eigenstate() {
        let mut s = StateVector::new(1).unwrap();
        s.apply(&GateOp::new(GateKind::H, 0)).unwrap();
        assert!((s.inner(&plus()).unwrap().norm() - 1.0).abs() < 1e-15);
        s.apply(&GateOp::new(GateKind::X, 0)).unwrap();
        assert!((s.inner(&plus()).unwrap().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn controlled_not_truth_table() {
        // control q1 = |1>, target q0 = |0>
        let mut s = StateVector::new(2).unwrap();
        s.apply(&GateOp::new(GateKind::X, 1)).unwrap();
        s.apply(&GateOp::controlled(GateKind::X, 1, 0).unwrap()).unwrap();
        assert_eq!(s.probabilities(), vec![0.0, 0.0, 0.0, 1.0]);
        // control off leaves target untouched
        let mut s = StateVector::new(2).unwrap();
        s.apply(&GateOp::controlled(GateKind::X, 1, 0).unwrap()).unwrap();
        assert_eq!(s.probabilities(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn bitstrings_are_little_endian() {
        assert_eq!(bitstring(1, 3), "001");
        assert_eq!(bitstring(6, 3), "110");
        assert_eq!(parse_bitstring("110"), Some(6));
        assert_eq!(parse_bitstring("1a"), None);
        assert_eq!(parse_bitstring(""), None);
    }

    #[test]
    fn exact_probability_examples() {
        let p = exact_probabilities(&StateVector::new(1).unwrap());
        assert_eq!(p, BTreeMap::from([("0".to_string(), 1.0)]));
        let p = exact_probabilities(&plus());
        assert!((p["0"] - 0.5).abs() < 1e-15 && (p["1"] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn collapse_examples() {
        let mut rng = RngSeed(3).rng();
        // |10>: qubit 1 is one
        let mut s = StateVector::new(2).unwrap();
        s.apply(&GateOp::new(GateKind::X, 1)).unwrap();
        let (bit, post) = s.collapse(1, &mut rng).unwrap();
        assert_eq!(bit, 1);
        assert_eq!(post, s);

        for seed in 0..20 {
            let (bit, post) = plus().collapse(0, &mut RngSeed(seed).rng()).unwrap();
            let expect = if bit == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
            assert!(post.probabilities().iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-15));
        }

        let mut bell = StateVector::new(2).unwrap();
        bell.apply(&GateOp::new(GateKind::H, 0)).unwrap();
        bell.apply(&GateOp::controlled(GateKind::X, 0, 1).unwrap()).unwrap();
        for seed in 0..20 {
            let (bit, post) = bell.collapse(0, &mut RngSeed(seed).rng()).unwrap();
            let p = post.probabilities();
            if bit == 0 {
                assert!((p[0] - 1.0).abs() < 1e-12);
            } else {
                assert!((p[3] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_probability_projection_fails() {
        assert!(StateVector::new(1).unwrap().project(0, 1).is_err());
    }

    #[test]
    fn eigenstate_invariance() {
        let r = FRAC_1_SQRT_2;
        let cases: [(GateKind, [Amp; 2]); 6] = [
            (GateKind::X, [Amp::new(r, 0.0), Amp::new(r, 0.0)]),
            (GateKind::X, [Amp::new(r, 0.0), Amp::new(-r, 0.0)]),
            (GateKind::Z, [Amp::new(1.0, 0.0), Amp::new(0.0, 0.0)]),
            (GateKind::Z, [Amp::new(0.0, 0.0), Amp::new(1.0, 0.0)]),
            (GateKind::Y, [Amp::new(r, 0.0), Amp::new(0.0, r)]),
            (GateKind::Y, [Amp::new(r, 0.0), Amp::new(0.0, -r)]),
        ];
        for (kind, amps) in cases {
            let s = StateVector::from_amplitudes(1, amps.to_vec()).unwrap();
            let mut g = s.clone();
            g.apply(&GateOp::new(kind, 0)).unwrap();
            assert!((s.inner(&g).unwrap().norm() - 1.0).abs() < 1e-10, "{kind}");
        }
    }

    #[test]
    fn parallel_and_sequential_kernels_agree() {
        let n = 15;
        let mut a = StateVector::new(n).unwrap();
        for q in 0..n {
            a.apply_with(&GateOp::new(GateKind::H, q), Exec::Sequential).unwrap();
        }
        let mut b = a.clone();
        let ops = [
            GateOp::new(GateKind::T, 14),
            GateOp::controlled(GateKind::Y, 13, 2).unwrap(),
            GateOp::new(GateKind::P(0.3), 0),
            GateOp::controlled(GateKind::X, 0, 14).unwrap(),
        ];
        for op in &ops {
            a.apply_with(op, Exec::Sequential).unwrap();
            b.apply_with(op, Exec::Parallel).unwrap();
        }
        assert_eq!(a, b);
    }

    fn gate_strategy() -> impl Strategy<Value = GateKind> {
        prop_oneof![
            Just(GateKind::I),
            Just(GateKind::X),
            Just(GateKind::Y),
            Just(GateKind::Z),
            Just(GateKind::H),
            Just(GateKind::S),
            Just(GateKind::Sdg),
            Just(GateKind::T),
            Just(GateKind::Tdg),
            (-10.0f64..10.0).prop_map(GateKind::P),
        ]
    }

    proptest! {
        #[test]
        fn norm_is_preserved(
            ops in proptest::collection::vec((gate_strategy(), 0usize..3, proptest::option::of(0usize..3)), 1..40)
        ) {
            let mut s = StateVector::new(3).unwrap();
            for (kind, target, control) in ops {
                let op = match control {
                    Some(c) if c != target && kind.is_controllable() => GateOp::controlled(kind, c, target).unwrap(),
                    _ => GateOp::new(kind, target),
                };
                s.apply(&op).unwrap();
                prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }
    }
}
