//! Dense qubit-register states and single-qubit corrections.
//!
//! Basis indices are big-endian in qubit order: qubit 0 is the most
//! significant bit, so index `0b01` of a two-qubit register is the ket
//! `|01⟩` (qubit 0 in `|0⟩`, qubit 1 in `|1⟩`).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NORM_TOL: f64 = 1e-9;
pub const MAX_DENSE_QUBITS: usize = 24;

/// Bit mask of qubit `q` inside a basis index of an `n`-qubit register.
#[inline]
pub fn qubit_mask(q: usize, n: usize) -> u64 {
    1u64 << (n - 1 - q)
}

#[inline]
pub fn qubit_bit(index: u64, q: usize, n: usize) -> bool {
    index & qubit_mask(q, n) != 0
}

/// Z eigenvalue of qubit `q` in basis state `index`: +1 for `|0⟩`, -1 for `|1⟩`.
#[inline]
pub fn z_sign(index: u64, q: usize, n: usize) -> f64 {
    if qubit_bit(index, q, n) {
        -1.0
    } else {
        1.0
    }
}

/// Renders a basis index as a ket label, e.g. `01`.
pub fn ket_label(index: u64, n: usize) -> alloc::string::String {
    (0..n)
        .map(|q| if qubit_bit(index, q, n) { '1' } else { '0' })
        .collect()
}

/// Single-qubit operation used for heralded corrections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LocalOp {
    X,
    Y,
    Z,
    H,
    /// `diag(1, e^{iφ})`
    ZPhase(f64),
}

impl fmt::Display for LocalOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalOp::X => f.write_str("X"),
            LocalOp::Y => f.write_str("Y"),
            LocalOp::Z => f.write_str("Z"),
            LocalOp::H => f.write_str("H"),
            LocalOp::ZPhase(phi) => write!(f, "Zphase({phi:.6})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub qubit: usize,
    pub op: LocalOp,
}

impl Correction {
    pub fn new(qubit: usize, op: LocalOp) -> Self {
        Self { qubit, op }
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@q{}", self.op, self.qubit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    qubit_count: usize,
    amplitudes: Vec<C64>,
}

impl QubitState {
    /// Wraps already-normalized amplitudes.
    pub fn new(qubit_count: usize, amplitudes: Vec<C64>) -> Result<Self> {
        check_register(qubit_count)?;
        if amplitudes.len() != 1usize << qubit_count {
            return Err(Error::RegisterSize {
                expected: qubit_count,
                got: amplitudes.len().trailing_zeros() as usize,
            });
        }
        let state = Self {
            qubit_count,
            amplitudes,
        };
        let norm_sqr = state.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(state)
    }

    pub fn from_unnormalized(qubit_count: usize, mut amplitudes: Vec<C64>) -> Result<Self> {
        check_register(qubit_count)?;
        if amplitudes.len() != 1usize << qubit_count {
            return Err(Error::RegisterSize {
                expected: qubit_count,
                got: amplitudes.len().trailing_zeros() as usize,
            });
        }
        let norm = libm::sqrt(amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>());
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroProbability);
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(Self {
            qubit_count,
            amplitudes,
        })
    }

    /// Builds a state from `(ket, amplitude)` pairs; the result is normalized.
    pub fn from_kets(terms: &[(&str, C64)]) -> Result<Self> {
        let n = terms
            .first()
            .map(|(k, _)| k.len())
            .ok_or(Error::ZeroProbability)?;
        check_register(n)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        for (ket, amp) in terms {
            if ket.len() != n {
                return Err(Error::RegisterSize {
                    expected: n,
                    got: ket.len(),
                });
            }
            let idx = u64::from_str_radix(ket, 2)
                .map_err(|_| Error::InvalidParameter(alloc::format!("bad ket label '{ket}'")))?;
            amps[idx as usize] += *amp;
        }
        Self::from_unnormalized(n, amps)
    }

    pub fn basis(qubit_count: usize, index: u64) -> Result<Self> {
        check_register(qubit_count)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << qubit_count];
        let slot = amps
            .get_mut(index as usize)
            .ok_or(Error::QubitOutOfRange {
                index: index as usize,
                count: qubit_count,
            })?;
        *slot = C64::new(1.0, 0.0);
        Ok(Self {
            qubit_count,
            amplitudes: amps,
        })
    }

    /// `|+⟩^{⊗n}`
    pub fn plus(qubit_count: usize) -> Result<Self> {
        check_register(qubit_count)?;
        let a = libm::pow(2.0, -(qubit_count as f64) / 2.0);
        Ok(Self {
            qubit_count,
            amplitudes: vec![C64::new(a, 0.0); 1 << qubit_count],
        })
    }

    /// `(|0…0⟩ + |1…1⟩)/√2`
    pub fn ghz(qubit_count: usize) -> Result<Self> {
        check_register(qubit_count)?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << qubit_count];
        let h = core::f64::consts::FRAC_1_SQRT_2;
        amps[0] = C64::new(h, 0.0);
        amps[(1 << qubit_count) - 1] = C64::new(h, 0.0);
        Ok(Self {
            qubit_count,
            amplitudes: amps,
        })
    }

    pub fn bell_odd() -> Self {
        Self::from_kets(&[("01", C64::new(1.0, 0.0)), ("10", C64::new(1.0, 0.0))])
            .expect("valid kets")
    }

    pub fn bell_even(sign: f64) -> Self {
        Self::from_kets(&[("00", C64::new(1.0, 0.0)), ("11", C64::new(sign, 0.0))])
            .expect("valid kets")
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: u64) -> C64 {
        self.amplitudes[index as usize]
    }

    pub fn norm_sqr(&self) -> f64 {
        crate::math::compensated_sum(self.amplitudes.iter().map(|a| a.norm_sqr()))
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &QubitState) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .fold(C64::new(0.0, 0.0), |acc, x| acc + x)
    }

    pub fn fidelity(&self, other: &QubitState) -> f64 {
        if self.qubit_count != other.qubit_count {
            return 0.0;
        }
        self.inner(other).norm_sqr()
    }

    /// Indices with non-negligible amplitude.
    pub fn support(&self, tol: f64) -> Vec<u64> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > tol)
            .map(|(i, _)| i as u64)
            .collect()
    }

    pub fn apply_local(&mut self, q: usize, op: LocalOp) -> Result<()> {
        let n = self.qubit_count;
        if q >= n {
            return Err(Error::QubitOutOfRange { index: q, count: n });
        }
        let mask = qubit_mask(q, n) as usize;
        let h = core::f64::consts::FRAC_1_SQRT_2;
        for i in 0..self.amplitudes.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let (a0, a1) = (self.amplitudes[i], self.amplitudes[j]);
            let (b0, b1) = match op {
                LocalOp::X => (a1, a0),
                LocalOp::Y => (C64::new(0.0, -1.0) * a1, C64::new(0.0, 1.0) * a0),
                LocalOp::Z => (a0, -a1),
                LocalOp::H => ((a0 + a1) * h, (a0 - a1) * h),
                LocalOp::ZPhase(phi) => (a0, a1 * C64::from_polar(1.0, phi)),
            };
            self.amplitudes[i] = b0;
            self.amplitudes[j] = b1;
        }
        Ok(())
    }

    pub fn with_corrections(&self, corrections: &[Correction]) -> Result<Self> {
        let mut out = self.clone();
        for c in corrections {
            out.apply_local(c.qubit, c.op)?;
        }
        Ok(out)
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) -> Result<()> {
        let n = self.qubit_count;
        for &q in &[a, b] {
            if q >= n {
                return Err(Error::QubitOutOfRange { index: q, count: n });
            }
        }
        let m = qubit_mask(a, n) | qubit_mask(b, n);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            if (i as u64) & m == m && a != b {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    /// Multiplies basis amplitudes by `e^{i·phase(index)}`.
    pub fn apply_diagonal<F: Fn(u64) -> f64>(&mut self, phase: F) {
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            *amp *= C64::from_polar(1.0, phase(i as u64));
        }
    }
}

impl fmt::Display for QubitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, a) in self.amplitudes.iter().enumerate() {
            if a.norm() < 1e-12 {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(
                f,
                "({:.4}{:+.4}i)|{}⟩",
                a.re,
                a.im,
                ket_label(i as u64, self.qubit_count)
            )?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Row-major density matrix over an `n`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    qubit_count: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_raw(qubit_count: usize, data: Vec<C64>) -> Result<Self> {
        check_register(qubit_count)?;
        let dim = 1usize << qubit_count;
        if data.len() != dim * dim {
            return Err(Error::RegisterSize {
                expected: qubit_count,
                got: data.len(),
            });
        }
        Ok(Self { qubit_count, data })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn dim(&self) -> usize {
        1 << self.qubit_count
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim() + col]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            qubit_count: self.qubit_count,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn fidelity(&self, psi: &QubitState) -> f64 {
        let d = self.dim();
        let a = psi.amplitudes();
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..d {
            for c in 0..d {
                acc += a[r].conj() * self.get(r, c) * a[c];
            }
        }
        acc.re
    }
}

pub(crate) fn check_register(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DENSE_QUBITS {
        Err(Error::InvalidRegister {
            got: n,
            max: MAX_DENSE_QUBITS,
        })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ket_order_is_big_endian() {
        let s = QubitState::from_kets(&[("01", C64::new(1.0, 0.0))]).unwrap();
        assert_eq!(s.amplitude(1), C64::new(1.0, 0.0));
        assert!(!qubit_bit(1, 0, 2));
        assert!(qubit_bit(1, 1, 2));
        assert_eq!(ket_label(1, 2), "01");
    }

    #[test]
    fn hadamard_maps_zero_to_plus() {
        let mut s = QubitState::basis(1, 0).unwrap();
        s.apply_local(0, LocalOp::H).unwrap();
        assert!(s.fidelity(&QubitState::plus(1).unwrap()) > 1.0 - 1e-15);
    }

    #[test]
    fn y_matches_i_x_z() {
        let s = QubitState::from_kets(&[("0", C64::new(0.6, 0.0)), ("1", C64::new(0.0, 0.8))])
            .unwrap();
        let mut a = s.clone();
        a.apply_local(0, LocalOp::Y).unwrap();
        let mut b = s;
        b.apply_local(0, LocalOp::Z).unwrap();
        b.apply_local(0, LocalOp::X).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y * C64::new(0.0, 1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_unnormalized() {
        let amps = vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        assert!(matches!(
            QubitState::new(1, amps),
            Err(Error::NotNormalized { .. })
        ));
    }
}
