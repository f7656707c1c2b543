//! Exact joint evolution of a qubit register and a single bosonic bus mode.
//!
//! The bus is always a superposition of coherent states, one per register
//! basis state, so a state is a list of branches `(bits, coefficient, bus
//! amplitude)`. Conditional rotations, conditional displacements and plain
//! displacements map coherent states to coherent states, which keeps the
//! representation closed and exact at any amplitude. Overlaps are evaluated
//! from amplitude differences so that `|α| ~ 10^4` does not underflow.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::register::{check_register, qubit_mask, z_sign, DensityMatrix, QubitState, NORM_TOL};

/// Centers closer than this belong to the same homodyne peak.
pub const PEAK_TOL: f64 = 1e-9;
/// Branches with equal bits and bus amplitudes closer than this are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Dispersive-limit coupling of one qubit to the bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// vacuum-Rabi half-splitting (rad/s)
    pub g: f64,
    /// detuning (rad/s)
    pub delta: f64,
    /// dispersive coupling `g²/Δ` (rad/s)
    pub chi: f64,
    /// interaction time (s)
    pub t_int: f64,
    /// conditional rotation angle `χ·t`
    pub theta: f64,
}

impl PhysicalParams {
    pub fn new(g: f64, delta: f64, t_int: f64) -> Result<Self> {
        if delta == 0.0 || !delta.is_finite() || !g.is_finite() || !t_int.is_finite() {
            return Err(Error::InvalidParameter(
                "detuning must be finite and non-zero".into(),
            ));
        }
        let chi = g * g / delta;
        Ok(Self {
            g,
            delta,
            chi,
            t_int,
            theta: chi * t_int,
        })
    }
}

/// `⟨β|γ⟩` for coherent states.
pub fn coherent_overlap(beta: C64, gamma: C64) -> C64 {
    let log_mag = -(beta - gamma).norm_sqr() / 2.0;
    let phase = (beta.conj() * gamma).im;
    C64::from_polar(math::exp(log_mag), phase)
}

/// `ln|⟨x|β⟩|` and `arg⟨x|β⟩` for the quadrature `X(φ) = a†e^{iφ} + a e^{-iφ}`.
///
/// `⟨x|β⟩ = (2π)^{-1/4} exp(-(x - 2Re β')²/4 + i Im(β')x - i Im(β')Re(β'))`
/// with `β' = β e^{-iφ}`.
pub fn quadrature_wavefunction(beta: C64, phi: f64, x: f64) -> (f64, f64) {
    let b = beta * C64::from_polar(1.0, -phi);
    let d = x - 2.0 * b.re;
    let log_mag = -0.25 * libm::log(2.0 * core::f64::consts::PI) - d * d / 4.0;
    let phase = b.im * x - b.im * b.re;
    (log_mag, phase)
}

/// Homodyne peak center `2 Re(β e^{-iφ})`.
pub fn quadrature_center(beta: C64, phi: f64) -> f64 {
    2.0 * (beta * C64::from_polar(1.0, -phi)).re
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub bits: u64,
    pub coeff: C64,
    pub bus: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    qubit_count: usize,
    branches: Vec<Branch>,
}

impl HybridState {
    /// `2^{-n/2} Σ_b |b⟩ ⊗ |α⟩`
    pub fn plus(qubit_count: usize, alpha: C64) -> Result<Self> {
        check_register(qubit_count)?;
        let c = C64::new(libm::pow(2.0, -(qubit_count as f64) / 2.0), 0.0);
        let branches = (0..1u64 << qubit_count)
            .map(|bits| Branch {
                bits,
                coeff: c,
                bus: alpha,
            })
            .collect();
        Ok(Self {
            qubit_count,
            branches,
        })
    }

    /// `|ψ⟩ ⊗ |γ⟩`
    pub fn from_qubits(state: &QubitState, bus: C64) -> Self {
        let branches = state
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(i, &a)| Branch {
                bits: i as u64,
                coeff: a,
                bus,
            })
            .collect();
        Self {
            qubit_count: state.qubit_count(),
            branches,
        }
    }

    /// Builds a state from raw branches, merging duplicates.
    pub fn from_branches(qubit_count: usize, raw: Vec<Branch>) -> Result<Self> {
        check_register(qubit_count)?;
        let mut branches: Vec<Branch> = Vec::with_capacity(raw.len());
        for b in raw {
            if b.bits >> qubit_count != 0 {
                return Err(Error::QubitOutOfRange {
                    index: (64 - b.bits.leading_zeros()) as usize - 1,
                    count: qubit_count,
                });
            }
            match branches.iter_mut().find(|x| x.bits == b.bits) {
                Some(x) if (x.bus - b.bus).norm() <= MERGE_TOL => x.coeff += b.coeff,
                Some(_) => return Err(Error::DuplicateBranch { bits: b.bits }),
                None => branches.push(b),
            }
        }
        branches.sort_by_key(|b| b.bits);
        Ok(Self {
            qubit_count,
            branches,
        })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch(&self, bits: u64) -> Option<&Branch> {
        self.branches.iter().find(|b| b.bits == bits)
    }

    /// `Σ_{i,j: bits_i = bits_j} c_i c̄_j ⟨bus_j|bus_i⟩`
    pub fn norm_sqr(&self) -> f64 {
        let mut terms = Vec::new();
        for bi in &self.branches {
            for bj in self.branches.iter().filter(|b| b.bits == bi.bits) {
                terms.push((bi.coeff * bj.coeff.conj() * coherent_overlap(bj.bus, bi.bus)).re);
            }
        }
        math::compensated_sum(terms)
    }

    fn require_normalized(&self) -> Result<()> {
        let norm_sqr = self.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            Err(Error::NotNormalized { norm_sqr })
        } else {
            Ok(())
        }
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.qubit_count {
            Err(Error::QubitOutOfRange {
                index: q,
                count: self.qubit_count,
            })
        } else {
            Ok(())
        }
    }

    /// `R(θσ_z)` on qubit `q`: bus rotated by `+θ` when the qubit is `|0⟩`, `-θ` when `|1⟩`.
    pub fn conditional_rotation(&self, q: usize, theta: f64) -> Result<Self> {
        self.check_qubit(q)?;
        let n = self.qubit_count;
        let branches = self
            .branches
            .iter()
            .map(|b| Branch {
                bus: b.bus * C64::from_polar(1.0, z_sign(b.bits, q, n) * theta),
                ..*b
            })
            .collect();
        Ok(Self {
            qubit_count: n,
            branches,
        })
    }

    /// `Π_q R(θ_q σ_z)` in one step: each branch turns by `Σ_q s_q θ_q`, so branches
    /// whose angles cancel keep their bus bit for bit.
    pub fn joint_rotation(&self, thetas: &[f64]) -> Result<Self> {
        let n = self.qubit_count;
        if thetas.len() != n {
            return Err(Error::RegisterSize {
                expected: n,
                got: thetas.len(),
            });
        }
        let branches = self
            .branches
            .iter()
            .map(|b| {
                let angle: f64 = (0..n).map(|q| z_sign(b.bits, q, n) * thetas[q]).sum();
                Branch {
                    bus: if angle == 0.0 {
                        b.bus
                    } else {
                        b.bus * C64::from_polar(1.0, angle)
                    },
                    ..*b
                }
            })
            .collect();
        Ok(Self {
            qubit_count: n,
            branches,
        })
    }

    /// `D(βσ_z)` on qubit `q`.
    pub fn conditional_displacement(&self, q: usize, beta: C64) -> Result<Self> {
        self.check_qubit(q)?;
        let n = self.qubit_count;
        let branches = self
            .branches
            .iter()
            .map(|b| displaced(b, beta * z_sign(b.bits, q, n)))
            .collect();
        Ok(Self {
            qubit_count: n,
            branches,
        })
    }

    /// Unconditional `D(β)`.
    pub fn displacement(&self, beta: C64) -> Self {
        Self {
            qubit_count: self.qubit_count,
            branches: self.branches.iter().map(|b| displaced(b, beta)).collect(),
        }
    }

    /// Outcome density of a homodyne measurement of `X(φ)`, grouped into peaks.
    pub fn homodyne_pdf(&self, phi: f64) -> PeakModel {
        let mut items: Vec<(f64, f64, u64)> = self
            .branches
            .iter()
            .map(|b| (quadrature_center(b.bus, phi), b.coeff.norm_sqr(), b.bits))
            .collect();
        items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let mut peaks: Vec<Peak> = Vec::new();
        for (center, w, bits) in items {
            match peaks.last_mut() {
                Some(p) if (center - p.center).abs() <= PEAK_TOL => {
                    p.weight += w;
                    p.members.push(bits);
                }
                _ => peaks.push(Peak {
                    center,
                    weight: w,
                    members: vec![bits],
                }),
            }
        }
        let total: f64 = peaks.iter().map(|p| p.weight).sum();
        for p in &mut peaks {
            p.weight /= total;
        }
        PeakModel {
            phi,
            peaks,
            components: self
                .branches
                .iter()
                .map(|b| (quadrature_center(b.bus, phi), b.coeff.norm_sqr() / total))
                .collect(),
        }
    }

    /// Projective homodyne measurement of `X(φ)`; the bus is consumed.
    pub fn homodyne_project(&self, phi: f64, outcome: HomodyneOutcome) -> Result<HomodyneResult> {
        self.require_normalized()?;
        let n = self.qubit_count;
        let model = self.homodyne_pdf(phi);
        match outcome {
            HomodyneOutcome::Peak(j) => {
                let peak = model.peaks.get(j).ok_or(Error::NoSuchPeak(j))?;
                let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
                for b in self.branches.iter().filter(|b| peak.members.contains(&b.bits)) {
                    let (_, phase) = quadrature_wavefunction(b.bus, phi, peak.center);
                    amps[b.bits as usize] += b.coeff * C64::from_polar(1.0, phase);
                }
                Ok(HomodyneResult {
                    peak: Some(j),
                    weight: peak.weight,
                    probability: model.window_probability(j),
                    posterior: QubitState::from_unnormalized(n, amps)?,
                })
            }
            HomodyneOutcome::Value(x) => {
                let logs: Vec<(u64, f64, f64)> = self
                    .branches
                    .iter()
                    .filter(|b| b.coeff.norm_sqr() > 0.0)
                    .map(|b| {
                        let (lm, ph) = quadrature_wavefunction(b.bus, phi, x);
                        (b.bits, libm::log(b.coeff.norm()) + lm, ph + b.coeff.arg())
                    })
                    .collect();
                let top = logs
                    .iter()
                    .map(|t| t.1)
                    .fold(f64::NEG_INFINITY, f64::max);
                if !top.is_finite() {
                    return Err(Error::ZeroProbability);
                }
                let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
                for (bits, lm, ph) in logs {
                    amps[bits as usize] += C64::from_polar(math::exp(lm - top), ph);
                }
                Ok(HomodyneResult {
                    peak: Some(model.peak_index_of(x)),
                    weight: f64::NAN,
                    probability: model.density(x),
                    posterior: QubitState::from_unnormalized(n, amps)?,
                })
            }
        }
    }

    /// `P(n)` for a photon-number measurement of the bus.
    pub fn photon_number_probability(&self, count: u64) -> f64 {
        math::compensated_sum(self.branches.iter().map(|b| {
            let (lm, _) = fock_amplitude_log(b.bus, count);
            b.coeff.norm_sqr() * math::exp(2.0 * lm)
        }))
    }

    /// Bucket (photon-detection) measurement of the bus.
    pub fn measure_bucket(&self, outcome: BucketOutcome) -> Result<BucketResult> {
        self.require_normalized()?;
        let n = self.qubit_count;
        match outcome {
            BucketOutcome::Vacuum | BucketOutcome::Count(_) => {
                let count = match outcome {
                    BucketOutcome::Count(k) => k,
                    _ => 0,
                };
                let probability = self.photon_number_probability(count);
                let logs: Vec<(u64, f64, f64)> = self
                    .branches
                    .iter()
                    .filter(|b| b.coeff.norm_sqr() > 0.0)
                    .map(|b| {
                        let (lm, ph) = fock_amplitude_log(b.bus, count);
                        (b.bits, libm::log(b.coeff.norm()) + lm, ph + b.coeff.arg())
                    })
                    .collect();
                let top = logs
                    .iter()
                    .map(|t| t.1)
                    .fold(f64::NEG_INFINITY, f64::max);
                if !top.is_finite() {
                    return Err(Error::ZeroProbability);
                }
                let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
                for (bits, lm, ph) in logs {
                    amps[bits as usize] += C64::from_polar(math::exp(lm - top), ph);
                }
                Ok(BucketResult {
                    outcome,
                    probability,
                    posterior: Posterior::Pure(QubitState::from_unnormalized(n, amps)?),
                })
            }
            BucketOutcome::Click => {
                let dim = 1usize << n;
                let mut even = vec![C64::new(0.0, 0.0); dim * dim];
                let mut odd = vec![C64::new(0.0, 0.0); dim * dim];
                for bi in &self.branches {
                    for bj in &self.branches {
                        let s = (bi.bus.norm_sqr() + bj.bus.norm_sqr()) / 2.0;
                        let z = bi.bus * bj.bus.conj();
                        let up = (z - s).exp();
                        let down = (-z - s).exp();
                        let vac = C64::new(math::exp(-s), 0.0);
                        let cc = bi.coeff * bj.coeff.conj();
                        let idx = bi.bits as usize * dim + bj.bits as usize;
                        even[idx] += cc * ((up + down) * 0.5 - vac);
                        odd[idx] += cc * ((up - down) * 0.5);
                    }
                }
                let even = DensityMatrix::from_raw(n, even)?;
                let odd = DensityMatrix::from_raw(n, odd)?;
                let (te, to) = (even.trace(), odd.trace());
                let probability = te + to;
                if probability <= 0.0 {
                    return Err(Error::ZeroProbability);
                }
                let mut components = Vec::new();
                for (parity, m, t) in [(PhotonParity::Even, even, te), (PhotonParity::Odd, odd, to)] {
                    if t > 0.0 {
                        components.push(MixtureComponent {
                            parity,
                            weight: t / probability,
                            state: m.scaled(1.0 / t),
                        });
                    }
                }
                Ok(BucketResult {
                    outcome,
                    probability,
                    posterior: Posterior::Mixture(components),
                })
            }
        }
    }

    /// Largest pairwise distance between branch bus amplitudes.
    pub fn bus_spread(&self) -> f64 {
        let mut spread = 0.0f64;
        for (i, a) in self.branches.iter().enumerate() {
            for b in &self.branches[i + 1..] {
                spread = spread.max((a.bus - b.bus).norm());
            }
        }
        spread
    }

    /// Largest change of the bus amplitude when only qubit `q` is flipped.
    pub fn bus_dependence(&self, q: usize) -> Result<f64> {
        self.check_qubit(q)?;
        let mask = qubit_mask(q, self.qubit_count);
        let mut worst = 0.0f64;
        for a in &self.branches {
            if a.bits & mask != 0 {
                continue;
            }
            if let Some(b) = self.branch(a.bits | mask) {
                worst = worst.max((a.bus - b.bus).norm());
            }
        }
        Ok(worst)
    }

    /// Factors out a common bus state and returns the register state.
    pub fn extract_qubits(&self, tol: f64) -> Result<QubitState> {
        let spread = self.bus_spread();
        if spread >= tol {
            return Err(Error::ResidualEntanglement { spread, tol });
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << self.qubit_count];
        for b in &self.branches {
            amps[b.bits as usize] += b.coeff;
        }
        QubitState::from_unnormalized(self.qubit_count, amps)
    }
}

fn displaced(b: &Branch, beta: C64) -> Branch {
    let phase = (beta * b.bus.conj()).im;
    Branch {
        bits: b.bits,
        coeff: b.coeff * C64::from_polar(1.0, phase),
        bus: b.bus + beta,
    }
}

/// `ln|⟨n|β⟩|` and `arg⟨n|β⟩`; `-∞` magnitude when the overlap vanishes.
pub fn fock_amplitude_log(beta: C64, count: u64) -> (f64, f64) {
    let r2 = beta.norm_sqr();
    if count == 0 {
        return (-r2 / 2.0, 0.0);
    }
    if r2 == 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    let lm = -r2 / 2.0 + count as f64 * 0.5 * libm::log(r2) - 0.5 * math::ln_factorial(count);
    (lm, count as f64 * beta.arg())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Gaussian mean `2 Re(β e^{-iφ})`
    pub center: f64,
    pub weight: f64,
    /// register basis states contributing to this peak
    pub members: Vec<u64>,
}

/// Unit-variance Gaussian mixture describing homodyne outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakModel {
    pub phi: f64,
    /// sorted by ascending center
    pub peaks: Vec<Peak>,
    components: Vec<(f64, f64)>,
}

impl PeakModel {
    /// Decision window of each peak: midpoints between adjacent centers.
    pub fn windows(&self) -> Vec<(f64, f64)> {
        let k = self.peaks.len();
        (0..k)
            .map(|j| {
                let lo = if j == 0 {
                    f64::NEG_INFINITY
                } else {
                    0.5 * (self.peaks[j - 1].center + self.peaks[j].center)
                };
                let hi = if j + 1 == k {
                    f64::INFINITY
                } else {
                    0.5 * (self.peaks[j].center + self.peaks[j + 1].center)
                };
                (lo, hi)
            })
            .collect()
    }

    pub fn peak_index_of(&self, x: f64) -> usize {
        self.windows()
            .iter()
            .position(|&(lo, hi)| x >= lo && x < hi)
            .unwrap_or(self.peaks.len().saturating_sub(1))
    }

    /// Probability that the outcome lands in peak `j`'s window, tails included.
    pub fn window_probability(&self, j: usize) -> f64 {
        let (lo, hi) = self.windows()[j];
        math::compensated_sum(
            self.components
                .iter()
                .map(|&(c, w)| w * gaussian_mass(c, lo, hi)),
        )
    }

    /// Probability that the midpoint rule assigns the outcome to the wrong peak.
    pub fn misassignment_probability(&self) -> f64 {
        let windows = self.windows();
        let correct = math::compensated_sum(
            self.peaks
                .iter()
                .zip(&windows)
                .map(|(p, &(lo, hi))| p.weight * gaussian_mass(p.center, lo, hi)),
        );
        (1.0 - correct).max(0.0)
    }

    pub fn density(&self, x: f64) -> f64 {
        let norm = 1.0 / libm::sqrt(2.0 * core::f64::consts::PI);
        self.components
            .iter()
            .map(|&(c, w)| w * norm * math::exp(-(x - c) * (x - c) / 2.0))
            .sum()
    }
}

/// `P(lo <= N(c, 1) < hi)`
fn gaussian_mass(c: f64, lo: f64, hi: f64) -> f64 {
    let upper = if hi.is_finite() { math::normal_tail(hi - c) } else { 0.0 };
    let lower = if lo.is_finite() { math::normal_tail(lo - c) } else { 1.0 };
    (lower - upper).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HomodyneOutcome {
    /// select the whole decision window of a peak
    Peak(usize),
    /// condition on an exact quadrature value
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneResult {
    pub peak: Option<usize>,
    /// ideal peak weight (NaN for point outcomes)
    pub weight: f64,
    /// window probability for peaks, density for point outcomes
    pub probability: f64,
    pub posterior: QubitState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BucketOutcome {
    Vacuum,
    /// number-resolving detection of exactly `n` photons
    Count(u64),
    /// non-resolving detection of at least one photon
    Click,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhotonParity {
    /// n even, n >= 2
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub parity: PhotonParity,
    pub weight: f64,
    pub state: DensityMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Posterior {
    Pure(QubitState),
    /// heralded state with unknown photon number, split by parity
    Mixture(Vec<MixtureComponent>),
}

impl Posterior {
    pub fn as_pure(&self) -> Option<&QubitState> {
        match self {
            Posterior::Pure(s) => Some(s),
            Posterior::Mixture(_) => None,
        }
    }

    pub fn fidelity(&self, target: &QubitState) -> f64 {
        match self {
            Posterior::Pure(s) => s.fidelity(target),
            Posterior::Mixture(parts) => parts
                .iter()
                .map(|m| m.weight * m.state.fidelity(target))
                .sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketResult {
    pub outcome: BucketOutcome,
    pub probability: f64,
    pub posterior: Posterior,
}
