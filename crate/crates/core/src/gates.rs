//! Entangling protocols built from bus primitives: measured parity gates,
//! the three-qubit and cascaded gates, and measurement-free geometric
//! sequences.
//!
//! `theta` is always the per-qubit rotation; two qubits rotating by `θ`
//! each move the bus by `2θ` between neighbouring peaks.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::busim::{BucketOutcome, HomodyneOutcome, HybridState, Posterior};
use crate::error::{Error, Result};
use crate::graphstab::{GraphSpec, StabilizerTableau};
use crate::math;
use crate::register::{qubit_bit, qubit_mask, Correction, LocalOp, QubitState};

/// Spread below which the bus counts as disentangled.
pub const DISENTANGLED_TOL: f64 = 1e-9;
/// Phase tolerance for polynomial fits and correction solving.
pub const PHASE_TOL: f64 = 1e-9;
/// Adjacent-peak error above which a protocol warns.
pub const WARN_ERROR: f64 = 0.1;
/// Largest photon-number table a resolving bucket gate enumerates.
pub const MAX_COUNT_OUTCOMES: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeLabel {
    /// `(|01⟩+|10⟩)/√2`
    OddBell,
    /// `(|00⟩+|11⟩)/√2`
    EvenBell,
    /// `(|00⟩+(-1)^n|11⟩)/√2` heralded by `n` photons
    EvenBellCount(u64),
    /// a single basis state `bits` on `qubits` qubits
    Product { bits: u64, qubits: usize },
    Ghz,
    /// odd Bell pair on qubits 0,1 with qubit 2 in `|v⟩`
    BellQ3(u8),
    /// peak with several members in a cascaded gate
    PairEntangled,
    /// non-resolving detector fired
    Click,
    /// merged peaks that match no known family
    Unresolved,
}

impl OutcomeLabel {
    pub fn is_success(&self) -> bool {
        !matches!(
            self,
            OutcomeLabel::Product { .. } | OutcomeLabel::Click | OutcomeLabel::Unresolved
        )
    }
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeLabel::OddBell => f.write_str("odd-bell"),
            OutcomeLabel::EvenBell => f.write_str("even-bell"),
            OutcomeLabel::EvenBellCount(n) => write!(f, "even-bell-{n}"),
            OutcomeLabel::Product { bits, qubits } => {
                write!(f, "product-{}", crate::register::ket_label(*bits, *qubits))
            }
            OutcomeLabel::Ghz => f.write_str("ghz"),
            OutcomeLabel::BellQ3(v) => write!(f, "bell-q3-{v}"),
            OutcomeLabel::PairEntangled => f.write_str("pair-entangled"),
            OutcomeLabel::Click => f.write_str("click"),
            OutcomeLabel::Unresolved => f.write_str("unresolved"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateOutcome {
    pub label: OutcomeLabel,
    /// exact probability from branch enumeration
    pub probability: f64,
    /// probability mass inside the peak's decision window (homodyne only)
    pub window_probability: Option<f64>,
    pub peak_center: Option<f64>,
    pub posterior: Posterior,
    pub corrections: Vec<Correction>,
    /// ideal post-measurement state the corrections aim for
    pub target: Option<QubitState>,
    /// fidelity of the corrected posterior with `target`
    pub fidelity: Option<f64>,
}

impl GateOutcome {
    pub fn corrected(&self) -> Result<Posterior> {
        match &self.posterior {
            Posterior::Pure(s) => Ok(Posterior::Pure(s.with_corrections(&self.corrections)?)),
            mixed => Ok(mixed.clone()),
        }
    }
}

/// The three closed-form error estimates of the measured gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateErrorBudget {
    /// `½ erfc(α sinθ/√2)`
    pub p_err_momentum: f64,
    /// `½ erfc(α(1−cosθ)/√2)`
    pub p_err_position: f64,
    /// `exp(−4|αθ|²)`
    pub p_err_vacuum: f64,
    /// `α·θ`
    pub separation_parameter: f64,
    /// whether `α sinθ ≥ π`
    pub resolved: bool,
}

/// Evaluates the error formulas with `theta` as the rotation between adjacent peaks.
pub fn error_budget(alpha: f64, theta: f64) -> Result<GateErrorBudget> {
    if alpha.is_nan() || alpha <= 0.0 || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive (got {alpha}), theta finite (got {theta})"
        )));
    }
    let s = alpha * libm::sin(theta);
    Ok(GateErrorBudget {
        p_err_momentum: math::normal_tail(s.abs()),
        p_err_position: math::normal_tail(alpha * (1.0 - libm::cos(theta))),
        p_err_vacuum: math::exp(-4.0 * (alpha * theta) * (alpha * theta)),
        separation_parameter: alpha * theta,
        resolved: s.abs() >= PI * (1.0 - 1e-12),
    })
}

/// Full outcome table of a protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct GateReport {
    pub outcomes: Vec<GateOutcome>,
    pub budget: GateErrorBudget,
    /// exact midpoint-rule misassignment of the homodyne peaks
    pub peak_misassignment: Option<f64>,
    /// sum of `|k|` over rotations `kθ`
    pub time_units: u64,
    pub warnings: Vec<String>,
}

/// How a caller picks one outcome from a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Forced(OutcomeLabel),
    /// index into `outcomes`
    Index(usize),
    Sampled,
}

impl GateReport {
    pub fn total_probability(&self) -> f64 {
        math::compensated_sum(self.outcomes.iter().map(|o| o.probability))
    }

    pub fn find(&self, label: OutcomeLabel) -> Option<&GateOutcome> {
        self.outcomes.iter().find(|o| o.label == label)
    }

    pub fn success_probability(&self) -> f64 {
        math::compensated_sum(
            self.outcomes
                .iter()
                .filter(|o| o.label.is_success())
                .map(|o| o.probability),
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &GateOutcome {
        let u: f64 = rng.random::<f64>() * self.total_probability();
        let mut acc = 0.0;
        for o in &self.outcomes {
            acc += o.probability;
            if u < acc {
                return o;
            }
        }
        self.outcomes.last().expect("reports are never empty")
    }

    pub fn select<R: Rng + ?Sized>(&self, how: Selection, rng: &mut R) -> Result<&GateOutcome> {
        match how {
            Selection::Forced(label) => self
                .find(label)
                .ok_or_else(|| Error::InvalidOutcome(format!("{label}"))),
            Selection::Index(i) => self
                .outcomes
                .get(i)
                .ok_or_else(|| Error::InvalidOutcome(format!("index {i}"))),
            Selection::Sampled => Ok(self.sample(rng)),
        }
    }
}

fn require_size(state: &QubitState, n: usize) -> Result<()> {
    if state.qubit_count() != n {
        Err(Error::RegisterSize {
            expected: n,
            got: state.qubit_count(),
        })
    } else {
        Ok(())
    }
}

/// Names the state family of a set of basis states sharing one peak.
fn classify(members: &[u64], n: usize) -> OutcomeLabel {
    let mut m = members.to_vec();
    m.sort_unstable();
    match (n, m.as_slice()) {
        (_, [b]) => OutcomeLabel::Product { bits: *b, qubits: n },
        (2, [0b01, 0b10]) => OutcomeLabel::OddBell,
        (2, [0b00, 0b11]) => OutcomeLabel::EvenBell,
        (3, [0b000, 0b111]) => OutcomeLabel::Ghz,
        (3, [0b010, 0b100]) => OutcomeLabel::BellQ3(0),
        (3, [0b011, 0b101]) => OutcomeLabel::BellQ3(1),
        _ if n > 3 && m.iter().any(|&b| qubit_bit(b, 0, n) != qubit_bit(b, 1, n)) => {
            OutcomeLabel::PairEntangled
        }
        _ => OutcomeLabel::Unresolved,
    }
}

/// Input projected onto `members`, renormalized.
fn project(input: &QubitState, members: &[u64]) -> Result<QubitState> {
    let n = input.qubit_count();
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    for &b in members {
        amps[b as usize] = input.amplitude(b);
    }
    QubitState::from_unnormalized(n, amps)
}

/// Single-qubit `Z`-phase corrections taking `posterior` to `target` up to a global phase.
pub fn solve_phase_corrections(posterior: &QubitState, target: &QubitState) -> Option<Vec<Correction>> {
    let n = target.qubit_count();
    let support = target.support(1e-12);
    let (&b0, rest) = support.split_first()?;
    let rel = |b: u64| {
        let p = posterior.amplitude(b);
        if p.norm() < 1e-300 {
            return None;
        }
        Some(target.amplitude(b).arg() - p.arg())
    };
    let r0 = rel(b0)?;
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for &b in rest {
        let d = rel(b)? - r0;
        let mut known = 0.0;
        let mut free = Vec::new();
        for q in 0..n {
            let coef = qubit_bit(b, q, n) as i32 - qubit_bit(b0, q, n) as i32;
            if coef == 0 {
                continue;
            }
            match fixed[q] {
                Some(a) => known += coef as f64 * a,
                None => free.push((q, coef as f64)),
            }
        }
        match free.split_first() {
            Some((&(q, coef), others)) => {
                for &(o, _) in others {
                    fixed[o] = Some(0.0);
                }
                fixed[q] = Some(math::wrap_angle((d - known) / coef));
            }
            None => {
                if math::wrap_angle(d - known).abs() > PHASE_TOL {
                    return None;
                }
            }
        }
    }
    Some(
        fixed
            .iter()
            .enumerate()
            .filter_map(|(q, a)| match a {
                Some(a) if a.abs() > 1e-12 => Some(Correction::new(q, LocalOp::ZPhase(*a))),
                _ => None,
            })
            .collect(),
    )
}

/// Attaches corrections and fidelity for a pure posterior.
fn finish(
    label: OutcomeLabel,
    probability: f64,
    posterior: QubitState,
    target: Option<QubitState>,
) -> Result<GateOutcome> {
    let (corrections, fidelity) = match &target {
        Some(t) if label.is_success() => {
            let c = solve_phase_corrections(&posterior, t).unwrap_or_default();
            let f = posterior.with_corrections(&c)?.fidelity(t);
            (c, Some(f))
        }
        Some(t) => (Vec::new(), Some(posterior.fidelity(t))),
        None => (Vec::new(), None),
    };
    Ok(GateOutcome {
        label,
        probability,
        window_probability: None,
        peak_center: None,
        posterior: Posterior::Pure(posterior),
        corrections,
        target,
        fidelity,
    })
}

/// Rotates each qubit by `k_q θ`, measures `X(φ)` and tabulates every peak.
fn homodyne_protocol(
    alpha: f64,
    theta: f64,
    input: &QubitState,
    schedule: &[i64],
    phi: f64,
) -> Result<(Vec<GateOutcome>, f64)> {
    let thetas: Vec<f64> = schedule.iter().map(|&k| k as f64 * theta).collect();
    let s = HybridState::from_qubits(input, C64::new(alpha, 0.0)).joint_rotation(&thetas)?;
    let model = s.homodyne_pdf(phi);
    let mut outcomes = Vec::with_capacity(model.peaks.len());
    for (j, peak) in model.peaks.iter().enumerate() {
        let r = s.homodyne_project(phi, HomodyneOutcome::Peak(j))?;
        let label = classify(&peak.members, input.qubit_count());
        let target = project(input, &peak.members)?;
        let mut o = finish(label, peak.weight, r.posterior, Some(target))?;
        o.window_probability = Some(r.probability);
        o.peak_center = Some(peak.center);
        outcomes.push(o);
    }
    Ok((outcomes, model.misassignment_probability()))
}

fn time_of(schedule: &[i64]) -> u64 {
    schedule.iter().map(|k| k.unsigned_abs()).sum()
}

/// Parity gate read out in the momentum quadrature: three peaks.
pub fn parity_gate_momentum(alpha: f64, theta: f64, input: &QubitState) -> Result<GateReport> {
    require_size(input, 2)?;
    let budget = error_budget(alpha, theta)?;
    let (outcomes, mis) = homodyne_protocol(alpha, theta, input, &[1, 1], FRAC_PI_2)?;
    let mut warnings = Vec::new();
    if budget.p_err_momentum >= WARN_ERROR {
        warnings.push(format!(
            "adjacent peaks overlap: error {:.3e} >= {WARN_ERROR}",
            budget.p_err_momentum
        ));
    }
    Ok(GateReport {
        outcomes,
        budget,
        peak_misassignment: Some(mis),
        time_units: 2,
        warnings,
    })
}

/// Parity gate read out in the position quadrature: even and odd peaks.
pub fn parity_gate_position(alpha: f64, theta: f64, input: &QubitState) -> Result<GateReport> {
    require_size(input, 2)?;
    let budget = error_budget(alpha, theta)?;
    let (outcomes, mis) = homodyne_protocol(alpha, theta, input, &[1, 1], 0.0)?;
    let mut warnings = Vec::new();
    if budget.p_err_position >= WARN_ERROR {
        warnings.push(format!(
            "even and odd peaks overlap: error {:.3e} >= {WARN_ERROR}",
            budget.p_err_position
        ));
    }
    Ok(GateReport {
        outcomes,
        budget,
        peak_misassignment: Some(mis),
        time_units: 2,
        warnings,
    })
}

/// Parity gate with `D(−α)` and a photon measurement of the bus.
pub fn parity_gate_bucket(
    alpha: f64,
    theta: f64,
    input: &QubitState,
    number_resolving: bool,
) -> Result<GateReport> {
    require_size(input, 2)?;
    let budget = error_budget(alpha, theta)?;
    let s = HybridState::from_qubits(input, C64::new(alpha, 0.0))
        .joint_rotation(&[theta, theta])?
        .displacement(C64::new(-alpha, 0.0));
    let mut outcomes = Vec::new();
    let odd = project(input, &[0b01, 0b10]).ok();
    let vac = s.measure_bucket(BucketOutcome::Vacuum)?;
    let Posterior::Pure(vac_state) = vac.posterior else {
        unreachable!("vacuum posteriors are pure")
    };
    outcomes.push(finish(OutcomeLabel::OddBell, vac.probability, vac_state, odd)?);
    let mut warnings = Vec::new();
    let mu = 4.0 * alpha * alpha * libm::sin(theta) * libm::sin(theta);
    let even_part = input.amplitude(0b00).norm_sqr() + input.amplitude(0b11).norm_sqr();
    if even_part > 0.0 {
        if number_resolving {
            let width = 12.0 * libm::sqrt(mu) + 40.0;
            let lo = libm::floor(mu - width).max(1.0) as u64;
            let hi = libm::ceil(mu + width) as u64;
            if (hi - lo) as usize > MAX_COUNT_OUTCOMES {
                return Err(Error::InvalidParameter(format!(
                    "photon-number table of {} entries is too large; use click detection",
                    hi - lo
                )));
            }
            for n in lo..=hi {
                let p = s.photon_number_probability(n);
                if p < 1e-300 {
                    continue;
                }
                let r = s.measure_bucket(BucketOutcome::Count(n))?;
                let Posterior::Pure(post) = r.posterior else {
                    unreachable!("count posteriors are pure")
                };
                let mut amps = vec![C64::new(0.0, 0.0); 4];
                amps[0] = input.amplitude(0b00);
                amps[3] = input.amplitude(0b11) * if n % 2 == 0 { 1.0 } else { -1.0 };
                let target = QubitState::from_unnormalized(2, amps).ok();
                outcomes.push(finish(OutcomeLabel::EvenBellCount(n), p, post, target)?);
            }
        } else {
            let r = s.measure_bucket(BucketOutcome::Click)?;
            outcomes.push(GateOutcome {
                label: OutcomeLabel::Click,
                probability: r.probability,
                window_probability: None,
                peak_center: None,
                posterior: r.posterior,
                corrections: Vec::new(),
                target: None,
                fidelity: None,
            });
        }
    }
    if budget.p_err_vacuum >= WARN_ERROR {
        warnings.push(format!(
            "vacuum outcome contaminated: error {:.3e} >= {WARN_ERROR}",
            budget.p_err_vacuum
        ));
    }
    Ok(GateReport {
        outcomes,
        budget,
        peak_misassignment: None,
        time_units: 2,
        warnings,
    })
}

/// Three-qubit gate with rotations `θ, θ, −2θ` and momentum readout.
pub fn three_qubit_gate(alpha: f64, theta: f64, input: &QubitState) -> Result<GateReport> {
    require_size(input, 3)?;
    let schedule = [1, 1, -2];
    let budget = error_budget(alpha, theta)?;
    let (outcomes, mis) = homodyne_protocol(alpha, theta, input, &schedule, FRAC_PI_2)?;
    let mut warnings = Vec::new();
    if budget.p_err_momentum >= WARN_ERROR {
        warnings.push(format!(
            "adjacent peaks overlap: error {:.3e} >= {WARN_ERROR}",
            budget.p_err_momentum
        ));
    }
    Ok(GateReport {
        outcomes,
        budget,
        peak_misassignment: Some(mis),
        time_units: time_of(&schedule),
        warnings,
    })
}

/// Rotation multipliers `1, 1, 2, …, 2^{n−3}, −2^{n−2}` (just `1, 1` for two qubits).
pub fn cascade_schedule(n: usize) -> Result<Vec<i64>> {
    if !(2..=crate::register::MAX_DENSE_QUBITS).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "cascaded gate needs 2..={} qubits, got {n}",
            crate::register::MAX_DENSE_QUBITS
        )));
    }
    if n == 2 {
        return Ok(vec![1, 1]);
    }
    let mut k = vec![1, 1];
    for j in 0..n - 3 {
        k.push(1 << (j + 1));
    }
    k.push(-(1i64 << (n - 2)));
    Ok(k)
}

/// Exact fraction of sign assignments whose total rotation is shared with another one.
pub fn cascade_pair_success(n: usize) -> Result<(u64, u64)> {
    let k = cascade_schedule(n)?;
    let total = 1u64 << n;
    let mut sums: Vec<i64> = (0..total)
        .map(|b| {
            k.iter()
                .enumerate()
                .map(|(q, &kq)| if qubit_bit(b, q, n) { -kq } else { kq })
                .sum()
        })
        .collect();
    sums.sort_unstable();
    let mut shared = 0u64;
    let mut i = 0;
    while i < sums.len() {
        let j = sums[i..].iter().take_while(|&&s| s == sums[i]).count();
        if j > 1 {
            shared += j as u64;
        }
        i += j;
    }
    Ok((shared, total))
}

/// Cascaded gate on `|+⟩^n`; qubits 0 and 1 are the pair being linked.
pub fn cascaded_gate(n: usize, alpha: f64, theta: f64) -> Result<GateReport> {
    let schedule = cascade_schedule(n)?;
    let input = QubitState::plus(n)?;
    let budget = error_budget(alpha, theta)?;
    let (outcomes, mis) = homodyne_protocol(alpha, theta, &input, &schedule, FRAC_PI_2)?;
    let mut warnings = Vec::new();
    let expected_peaks = distinct_sums(&schedule);
    if outcomes.len() != expected_peaks {
        warnings.push(format!(
            "{} peaks resolved, {expected_peaks} expected: rotations alias at this theta",
            outcomes.len()
        ));
    }
    if budget.p_err_momentum >= WARN_ERROR {
        warnings.push(format!(
            "adjacent peaks overlap: error {:.3e} >= {WARN_ERROR}",
            budget.p_err_momentum
        ));
    }
    Ok(GateReport {
        outcomes,
        budget,
        peak_misassignment: Some(mis),
        time_units: time_of(&schedule),
        warnings,
    })
}

fn distinct_sums(schedule: &[i64]) -> usize {
    let n = schedule.len();
    let mut sums: Vec<i64> = (0..1u64 << n)
        .map(|b| {
            schedule
                .iter()
                .enumerate()
                .map(|(q, &k)| if qubit_bit(b, q, n) { -k } else { k })
                .sum()
        })
        .collect();
    sums.sort_unstable();
    sums.dedup();
    sums.len()
}

/// One bus interaction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Primitive {
    CondRotation { qubit: usize, theta: f64 },
    CondDisplacement { qubit: usize, beta: C64 },
    Displacement { beta: C64 },
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::CondRotation { qubit, theta } => write!(f, "R({theta:.6} Z{qubit})"),
            Primitive::CondDisplacement { qubit, beta } => {
                write!(f, "D(({:.6}{:+.6}i) Z{qubit})", beta.re, beta.im)
            }
            Primitive::Displacement { beta } => write!(f, "D({:.6}{:+.6}i)", beta.re, beta.im),
        }
    }
}

/// Primitives in application order (first element acts first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSequence {
    qubit_count: usize,
    steps: Vec<Primitive>,
}

impl InteractionSequence {
    pub fn new(qubit_count: usize, steps: Vec<Primitive>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::EmptySequence);
        }
        for p in &steps {
            if let Primitive::CondRotation { qubit, .. } | Primitive::CondDisplacement { qubit, .. } = p {
                if *qubit >= qubit_count {
                    return Err(Error::QubitOutOfRange {
                        index: *qubit,
                        count: qubit_count,
                    });
                }
            }
        }
        Ok(Self { qubit_count, steps })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn steps(&self) -> &[Primitive] {
        &self.steps
    }

    /// Number of conditional interactions involving `q`.
    pub fn interactions_of(&self, q: usize) -> usize {
        self.steps
            .iter()
            .filter(|p| match p {
                Primitive::CondRotation { qubit, .. } | Primitive::CondDisplacement { qubit, .. } => {
                    *qubit == q
                }
                Primitive::Displacement { .. } => false,
            })
            .count()
    }

    pub fn apply(&self, state: &HybridState) -> Result<HybridState> {
        Ok(self.trace(state)?.pop().expect("sequence is non-empty"))
    }

    /// Summed displacements `(global, per qubit)`; `None` if the sequence rotates the bus.
    pub fn net_displacement(&self) -> Option<(C64, Vec<C64>)> {
        let mut global = C64::new(0.0, 0.0);
        let mut per_qubit = vec![C64::new(0.0, 0.0); self.qubit_count];
        for p in &self.steps {
            match *p {
                Primitive::CondRotation { .. } => return None,
                Primitive::CondDisplacement { qubit, beta } => per_qubit[qubit] += beta,
                Primitive::Displacement { beta } => global += beta,
            }
        }
        Some((global, per_qubit))
    }

    /// Bus spread after the sequence. A rotation-free sequence whose conditional
    /// displacements sum to exactly zero on every qubit leaves all branches on
    /// one bus value, so the spread is `0` regardless of rounding in `end`.
    pub fn final_spread(&self, end: &HybridState) -> f64 {
        match self.net_displacement() {
            Some((_, per_qubit)) if per_qubit.iter().all(|b| *b == C64::new(0.0, 0.0)) => 0.0,
            _ => end.bus_spread(),
        }
    }

    /// State after every step.
    pub fn trace(&self, state: &HybridState) -> Result<Vec<HybridState>> {
        if state.qubit_count() != self.qubit_count {
            return Err(Error::RegisterSize {
                expected: self.qubit_count,
                got: state.qubit_count(),
            });
        }
        let mut out = Vec::with_capacity(self.steps.len());
        let mut s = state.clone();
        for p in &self.steps {
            s = match *p {
                Primitive::CondRotation { qubit, theta } => s.conditional_rotation(qubit, theta)?,
                Primitive::CondDisplacement { qubit, beta } => s.conditional_displacement(qubit, beta)?,
                Primitive::Displacement { beta } => s.displacement(beta),
            };
            out.push(s.clone());
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricResult {
    /// register state after the bus returns, before corrections
    pub state: QubitState,
    /// `ZPhase(4X)` on both qubits, removing the single-qubit part of the coupling
    pub corrections: Vec<Correction>,
    /// `X = Im(β̄₁β₂)`; the branch phase is `2X s₁s₂`
    pub coupling: f64,
    /// phase on `|11⟩` after corrections, wrapped to `(−π, π]`
    pub conditional_phase: f64,
    pub cz_equivalent: bool,
    pub bus_spread: f64,
}

/// `D(β₁σz₁) D(β₂σz₂) D(−β₁σz₁) D(−β₂σz₂)` applied in that order.
pub fn geometric_cz_sequence(beta1: C64, beta2: C64) -> InteractionSequence {
    InteractionSequence::new(
        2,
        vec![
            Primitive::CondDisplacement { qubit: 0, beta: beta1 },
            Primitive::CondDisplacement { qubit: 1, beta: beta2 },
            Primitive::CondDisplacement { qubit: 0, beta: -beta1 },
            Primitive::CondDisplacement { qubit: 1, beta: -beta2 },
        ],
    )
    .expect("fixed sequence is valid")
}

pub fn geometric_cz(beta1: C64, beta2: C64, input: &QubitState) -> Result<GeometricResult> {
    require_size(input, 2)?;
    let seq = geometric_cz_sequence(beta1, beta2);
    let out = seq.apply(&HybridState::from_qubits(input, C64::new(0.0, 0.0)))?;
    let bus_spread = seq.final_spread(&out);
    let state = out.extract_qubits(DISENTANGLED_TOL)?;
    let coupling = (beta1.conj() * beta2).im;
    let conditional_phase = math::wrap_angle(8.0 * coupling);
    let corrections = if math::wrap_angle(4.0 * coupling).abs() > 1e-15 {
        vec![
            Correction::new(0, LocalOp::ZPhase(math::wrap_angle(4.0 * coupling))),
            Correction::new(1, LocalOp::ZPhase(math::wrap_angle(4.0 * coupling))),
        ]
    } else {
        Vec::new()
    };
    Ok(GeometricResult {
        state,
        corrections,
        coupling,
        conditional_phase,
        cz_equivalent: (conditional_phase.abs() - PI).abs() < PHASE_TOL,
        bus_spread,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledDisplacement {
    pub sequence: InteractionSequence,
    /// conditional displacement realized, `2iα sinθ`
    pub net: C64,
    /// relative phase between the qubit branches left over, as corrections
    pub corrections: Vec<Correction>,
    pub global_phase: f64,
}

/// `D(αcosθ) R(θσz) D(−2α) R(−θσz) D(αcosθ)`, i.e. `D(2iα sinθ σz)` from rotations
/// and plain displacements. Steps are listed in application order.
pub fn compile_conditional_displacement(
    alpha: f64,
    theta: f64,
    qubit: usize,
    qubit_count: usize,
) -> Result<CompiledDisplacement> {
    let c = C64::new(alpha * libm::cos(theta), 0.0);
    let sequence = InteractionSequence::new(
        qubit_count,
        vec![
            Primitive::Displacement { beta: c },
            Primitive::CondRotation { qubit, theta },
            Primitive::Displacement {
                beta: C64::new(-2.0 * alpha, 0.0),
            },
            Primitive::CondRotation { qubit, theta: -theta },
            Primitive::Displacement { beta: c },
        ],
    )?;
    let net = C64::new(0.0, 2.0 * alpha * libm::sin(theta));
    // compare against the direct displacement on a single probe qubit from vacuum
    let probe = InteractionSequence::new(1, {
        let mut s = sequence.steps.clone();
        for p in &mut s {
            if let Primitive::CondRotation { qubit, .. } = p {
                *qubit = 0;
            }
        }
        s
    })?;
    let start = HybridState::plus(1, C64::new(0.0, 0.0))?;
    let via = probe.apply(&start)?;
    let direct = start.conditional_displacement(0, net)?;
    let phase = |s: &HybridState, b: u64| s.branch(b).map(|x| x.coeff.arg()).unwrap_or(0.0);
    let d0 = math::wrap_angle(phase(&via, 0) - phase(&direct, 0));
    let d1 = math::wrap_angle(phase(&via, 1) - phase(&direct, 1));
    let rel = math::wrap_angle(d0 - d1);
    let corrections = if rel.abs() > 1e-12 {
        vec![Correction::new(qubit, LocalOp::ZPhase(rel))]
    } else {
        Vec::new()
    };
    Ok(CompiledDisplacement {
        sequence,
        net,
        corrections,
        global_phase: d0,
    })
}

/// Direction of qubit `q` in the star: `iβ` for the centre, `β` for leaves.
pub fn star_sequence(n: usize, beta: f64) -> Result<InteractionSequence> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("star needs at least 2 qubits, got {n}")));
    }
    let dir = |q: usize| if q == 0 { C64::new(0.0, beta) } else { C64::new(beta, 0.0) };
    let mut steps = vec![Primitive::CondDisplacement { qubit: 0, beta: dir(0) }];
    steps.extend((1..n).map(|q| Primitive::CondDisplacement { qubit: q, beta: dir(q) }));
    steps.push(Primitive::CondDisplacement { qubit: 0, beta: -dir(0) });
    steps.extend((1..n).map(|q| Primitive::CondDisplacement { qubit: q, beta: -dir(q) }));
    InteractionSequence::new(n, steps)
}

/// Interleaved chain: `+q0, +q1, −q0, +q2, −q1, …, +q(n−1), −q(n−2), −q(n−1)`,
/// even qubits along `iβ`, odd ones along `β`.
pub fn chain_sequence(n: usize, beta: f64) -> Result<InteractionSequence> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("chain needs at least 2 qubits, got {n}")));
    }
    let dir = |q: usize| if q % 2 == 0 { C64::new(0.0, beta) } else { C64::new(beta, 0.0) };
    let mut steps = vec![
        Primitive::CondDisplacement { qubit: 0, beta: dir(0) },
        Primitive::CondDisplacement { qubit: 1, beta: dir(1) },
        Primitive::CondDisplacement { qubit: 0, beta: -dir(0) },
    ];
    for q in 2..n {
        steps.push(Primitive::CondDisplacement { qubit: q, beta: dir(q) });
        steps.push(Primitive::CondDisplacement { qubit: q - 1, beta: -dir(q - 1) });
    }
    steps.push(Primitive::CondDisplacement {
        qubit: n - 1,
        beta: -dir(n - 1),
    });
    InteractionSequence::new(n, steps)
}

/// `arg ψ(b) = c + Σ a_q b_q + Σ J_qr b_q b_r` for a uniform-magnitude state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    pub constant: f64,
    pub linear: Vec<f64>,
    /// `(q, r, J_qr)` for every `q < r`
    pub quadratic: Vec<(usize, usize, f64)>,
    /// largest wrapped deviation over all basis states
    pub residual: f64,
}

pub fn fit_phase_polynomial(state: &QubitState) -> Result<PhaseFit> {
    let n = state.qubit_count();
    let mag = libm::pow(2.0, -(n as f64) / 2.0);
    if state.amplitudes().iter().any(|a| (a.norm() - mag).abs() > 1e-9) {
        return Err(Error::Mismatch("state is not a uniform-magnitude phase state".into()));
    }
    let arg = |b: u64| state.amplitude(b).arg();
    let constant = arg(0);
    let linear: Vec<f64> = (0..n)
        .map(|q| math::wrap_angle(arg(qubit_mask(q, n)) - constant))
        .collect();
    let mut quadratic = Vec::new();
    for q in 0..n {
        for r in q + 1..n {
            let j = arg(qubit_mask(q, n) | qubit_mask(r, n)) - constant - linear[q] - linear[r];
            quadratic.push((q, r, math::wrap_angle(j)));
        }
    }
    let mut residual = 0.0f64;
    for b in 0..1u64 << n {
        let mut f = constant;
        for q in 0..n {
            if qubit_bit(b, q, n) {
                f += linear[q];
            }
        }
        for &(q, r, j) in &quadratic {
            if qubit_bit(b, q, n) && qubit_bit(b, r, n) {
                f += j;
            }
        }
        residual = residual.max(math::wrap_angle(arg(b) - f).abs());
    }
    Ok(PhaseFit {
        constant,
        linear,
        quadratic,
        residual,
    })
}

impl PhaseFit {
    /// Graph whose edges carry `J ≡ π`; `None` if some coupling is neither `0` nor `π`.
    pub fn graph(&self) -> Option<GraphSpec> {
        if self.residual > PHASE_TOL {
            return None;
        }
        let mut edges = Vec::new();
        for &(q, r, j) in &self.quadratic {
            if (j.abs() - PI).abs() < PHASE_TOL {
                edges.push((q, r));
            } else if j.abs() > PHASE_TOL {
                return None;
            }
        }
        GraphSpec::new(self.linear.len(), &edges).ok()
    }

    /// `ZPhase(−a_q)` on every qubit with a non-zero linear phase.
    pub fn corrections(&self) -> Vec<Correction> {
        self.linear
            .iter()
            .enumerate()
            .filter(|(_, a)| a.abs() > 1e-12)
            .map(|(q, a)| Correction::new(q, LocalOp::ZPhase(math::wrap_angle(-a))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFreeResult {
    /// register state after the sequence, before corrections
    pub state: QubitState,
    pub fit: PhaseFit,
    pub corrections: Vec<Correction>,
    pub graph: Option<GraphSpec>,
    /// stabilizers of `state`, when the linear phases are Clifford
    pub tableau: Option<StabilizerTableau>,
    pub bus_spread: f64,
}

/// Runs a displacement-only sequence on `|+⟩^n ⊗ |0⟩` and identifies the graph state made.
pub fn run_measurement_free(seq: &InteractionSequence) -> Result<MeasurementFreeResult> {
    let start = HybridState::plus(seq.qubit_count(), C64::new(0.0, 0.0))?;
    let out = seq.apply(&start)?;
    let bus_spread = seq.final_spread(&out);
    let state = out.extract_qubits(DISENTANGLED_TOL)?;
    let fit = fit_phase_polynomial(&state)?;
    let graph = fit.graph();
    let tableau = match &graph {
        Some(g) => {
            let mut t = StabilizerTableau::graph_state(g)?;
            let mut ok = true;
            for (q, &a) in fit.linear.iter().enumerate() {
                if t.apply_local(q, LocalOp::ZPhase(a)).is_err() {
                    ok = false;
                    break;
                }
            }
            ok.then_some(t)
        }
        None => None,
    };
    Ok(MeasurementFreeResult {
        corrections: fit.corrections(),
        state,
        fit,
        graph,
        tableau,
        bus_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphstab::equals_up_to_corrections;

    fn plus(n: usize) -> QubitState {
        QubitState::plus(n).unwrap()
    }

    #[test]
    fn momentum_gate_on_plus_plus() {
        let r = parity_gate_momentum(300.0, 0.02, &plus(2)).unwrap();
        assert_eq!(r.outcomes.len(), 3);
        assert!((r.total_probability() - 1.0).abs() < 1e-12);
        let odd = r.find(OutcomeLabel::OddBell).unwrap();
        assert!((odd.probability - 0.5).abs() < 1e-12);
        assert!(odd.fidelity.unwrap() > 1.0 - 1e-12);
        assert!(odd.target.as_ref().unwrap().fidelity(&QubitState::bell_odd()) > 1.0 - 1e-12);
        for bits in [0b00, 0b11] {
            let o = r.find(OutcomeLabel::Product { bits, qubits: 2 }).unwrap();
            assert!((o.probability - 0.25).abs() < 1e-12);
        }
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn momentum_gate_on_basis_input() {
        let r = parity_gate_momentum(300.0, 0.02, &QubitState::basis(2, 0).unwrap()).unwrap();
        assert_eq!(r.outcomes.len(), 1);
        assert_eq!(r.outcomes[0].label, OutcomeLabel::Product { bits: 0, qubits: 2 });
        assert_eq!(r.outcomes[0].probability, 1.0);
    }

    #[test]
    fn position_gate_even_and_odd() {
        let r = parity_gate_position(2000.0, 0.1, &plus(2)).unwrap();
        assert_eq!(r.outcomes.len(), 2);
        let even = r.find(OutcomeLabel::EvenBell).unwrap();
        assert!((even.probability - 0.5).abs() < 1e-12);
        assert!(even.fidelity.unwrap() > 1.0 - 1e-9);
        let corrected = even.corrected().unwrap();
        assert!(corrected.fidelity(&QubitState::bell_even(1.0)) > 1.0 - 1e-9);
        let odd = r.find(OutcomeLabel::OddBell).unwrap();
        assert!((odd.probability - 0.5).abs() < 1e-12);
    }

    #[test]
    fn position_gate_degenerate_theta() {
        let r = parity_gate_position(10.0, 0.0, &plus(2)).unwrap();
        assert_eq!(r.outcomes.len(), 1);
        assert_eq!(r.outcomes[0].label, OutcomeLabel::Unresolved);
        assert!((r.budget.p_err_position - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bucket_gate_counts() {
        let (alpha, theta) = (4.0, 0.3);
        let r = parity_gate_bucket(alpha, theta, &plus(2), true).unwrap();
        assert!((r.total_probability() - 1.0).abs() < 1e-9);
        for o in &r.outcomes {
            assert!(o.fidelity.unwrap() > 1.0 - 1e-9 || o.label == OutcomeLabel::OddBell);
        }
        let two = r.find(OutcomeLabel::EvenBellCount(2)).unwrap();
        assert!(two.corrected().unwrap().fidelity(&QubitState::bell_even(1.0)) > 1.0 - 1e-9);
        let three = r.find(OutcomeLabel::EvenBellCount(3)).unwrap();
        assert!(three.corrected().unwrap().fidelity(&QubitState::bell_even(-1.0)) > 1.0 - 1e-9);
        let click = parity_gate_bucket(alpha, theta, &plus(2), false).unwrap();
        assert_eq!(click.outcomes.len(), 2);
        assert!((click.total_probability() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_qubit_table() {
        let (alpha, theta) = (500.0, 0.01);
        let r = three_qubit_gate(alpha, theta, &plus(3)).unwrap();
        assert_eq!(r.outcomes.len(), 5);
        let ghz = r.find(OutcomeLabel::Ghz).unwrap();
        assert!((ghz.probability - 0.25).abs() < 1e-12);
        assert!(ghz.fidelity.unwrap() > 1.0 - 1e-12);
        assert!((r.success_probability() - 0.75).abs() < 1e-12);
        let mut centers: Vec<f64> = r.outcomes.iter().map(|o| o.peak_center.unwrap()).collect();
        centers.sort_by(f64::total_cmp);
        for (c, k) in centers.iter().zip([-4.0, -2.0, 0.0, 2.0, 4.0]) {
            assert!((c - 2.0 * alpha * libm::sin(k * theta)).abs() < 1e-9);
        }
        assert_eq!(r.time_units, 4);
    }

    #[test]
    fn cascade_success_fractions() {
        for n in 2..=10 {
            let (s, t) = cascade_pair_success(n).unwrap();
            assert_eq!(s * (1 << (n - 1)), t * ((1 << (n - 1)) - 1), "n = {n}");
        }
        assert!(cascade_schedule(1).is_err());
        assert_eq!(cascade_schedule(5).unwrap(), vec![1, 1, 2, 4, -8]);
    }

    #[test]
    fn geometric_cz_matches_cz() {
        let b = libm::sqrt(PI / 8.0);
        let input = plus(2);
        let r = geometric_cz(C64::new(0.0, b), C64::new(b, 0.0), &input).unwrap();
        assert!(r.cz_equivalent);
        assert_eq!(r.bus_spread, 0.0);
        let mut want = input.clone();
        want.apply_cz(0, 1).unwrap();
        let got = r.state.with_corrections(&r.corrections).unwrap();
        assert!(got.fidelity(&want) > 1.0 - 1e-12);
        let id = geometric_cz(C64::new(1.0, 0.0), C64::new(2.0, 0.0), &input).unwrap();
        assert!(id.state.fidelity(&input) > 1.0 - 1e-12);
    }

    #[test]
    fn compiled_displacement_is_exact() {
        let c = compile_conditional_displacement(3.0, 0.2, 0, 1).unwrap();
        assert!(c.corrections.is_empty());
        assert!((c.net - C64::new(0.0, 6.0 * libm::sin(0.2))).norm() < 1e-15);
        assert_eq!(c.sequence.steps().len(), 5);
    }

    #[test]
    fn star_and_chain_graphs() {
        let b = libm::sqrt(PI / 8.0);
        let star = run_measurement_free(&star_sequence(5, b).unwrap()).unwrap();
        assert_eq!(star.graph.as_ref().unwrap(), &GraphSpec::star(5));
        let t = star.tableau.as_ref().unwrap();
        assert!(equals_up_to_corrections(t, &GraphSpec::star(5), &star.corrections).unwrap());
        let chain = run_measurement_free(&chain_sequence(5, b).unwrap()).unwrap();
        assert_eq!(chain.graph.as_ref().unwrap(), &GraphSpec::chain(5));
        let t = chain.tableau.as_ref().unwrap();
        assert!(equals_up_to_corrections(t, &GraphSpec::chain(5), &chain.corrections).unwrap());
        assert!(star.bus_spread < 1e-12 && chain.bus_spread < 1e-12);
    }

    #[test]
    fn error_budget_values() {
        let b = error_budget(1000.0, 0.003).unwrap();
        assert!((b.p_err_momentum - 1.34992e-3).abs() < 1e-7);
        let zero = error_budget(5.0, 0.0).unwrap();
        assert_eq!(zero.p_err_momentum, 0.5);
        assert_eq!(zero.p_err_position, 0.5);
        assert_eq!(zero.p_err_vacuum, 1.0);
        assert!(error_budget(0.0, 0.1).is_err());
    }
}
