//! Closed-form single-qubit oracle, written against plain complex arithmetic
//! and sharing no code with the simulator.

#![allow(dead_code)]

use num_complex::Complex64 as C;
use std::f64::consts::FRAC_1_SQRT_2;

pub type Ket = [C; 2];

#[derive(Clone, Copy, Debug)]
pub enum B {
    Z,
    Phase(f64),
}

pub const X: B = B::Phase(0.0);
pub const Y: B = B::Phase(-std::f64::consts::FRAC_PI_2);
pub const HT: B = B::Phase(std::f64::consts::FRAC_PI_4);
pub const HZ: B = B::Phase(std::f64::consts::PI);

/// The state carrying `bit` in basis `b`.
pub fn ket(bit: u8, b: B) -> Ket {
    match b {
        B::Z if bit == 0 => [C::new(1.0, 0.0), C::new(0.0, 0.0)],
        B::Z => [C::new(0.0, 0.0), C::new(1.0, 0.0)],
        B::Phase(phi) => {
            let sign = if bit == 0 { 1.0 } else { -1.0 };
            [C::new(FRAC_1_SQRT_2, 0.0), C::from_polar(sign * FRAC_1_SQRT_2, phi)]
        }
    }
}

pub fn overlap2(a: &Ket, b: &Ket) -> f64 {
    (a[0].conj() * b[0] + a[1].conj() * b[1]).norm_sqr()
}

/// Probability that a measurement in basis `b` reads 1.
pub fn p1(psi: &Ket, b: B) -> f64 {
    overlap2(&ket(1, b), psi)
}

pub fn pauli(name: char, psi: &Ket) -> Ket {
    let i = C::new(0.0, 1.0);
    match name {
        'X' => [psi[1], psi[0]],
        'Y' => [-i * psi[1], i * psi[0]],
        'Z' => [psi[0], -psi[1]],
        _ => unreachable!(),
    }
}

/// Sifted error probability when Eve measures in `eve` and resends, Alice
/// and Bob sharing `basis`.
pub fn intercept_error(bit: u8, basis: B, eve: B) -> f64 {
    let psi = ket(bit, basis);
    (0..2u8)
        .map(|r| {
            let resent = ket(r, eve);
            overlap2(&resent, &psi) * overlap2(&ket(1 - bit, basis), &resent)
        })
        .sum()
}
