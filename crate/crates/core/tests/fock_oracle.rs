//! Branch evolution against a dense truncated-Fock simulation.

use proptest::prelude::*;
use qubus_core::busim::HybridState;
use qubus_core::register::QubitState;
use qubus_core::C64;

#[derive(Debug, Clone, Copy)]
enum Op {
    Rotate(usize, f64),
    CondShift(usize, C64),
    Shift(C64),
}

/// Qubit `q` of `bits` with qubit 0 as the most significant bit; `+1` for `|0⟩`.
fn sign(bits: usize, q: usize, n: usize) -> f64 {
    if (bits >> (n - 1 - q)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn coherent(gamma: C64, dim: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(dim);
    let mut c = C64::new((-gamma.norm_sqr() / 2.0).exp(), 0.0);
    for k in 0..dim {
        out.push(c);
        c = c * gamma / ((k + 1) as f64).sqrt();
    }
    out
}

/// `exp(β a† − β̄ a) v` on the truncated space, by repeated short Taylor steps.
fn displace(v: &[C64], beta: C64) -> Vec<C64> {
    let dim = v.len();
    let steps = (beta.norm() * (dim as f64).sqrt() * 2.0).ceil().max(1.0) as usize;
    let b = beta / steps as f64;
    let apply = |w: &[C64]| -> Vec<C64> {
        (0..dim)
            .map(|k| {
                let up = if k > 0 { b * (k as f64).sqrt() * w[k - 1] } else { C64::new(0.0, 0.0) };
                let down = if k + 1 < dim {
                    b.conj() * ((k + 1) as f64).sqrt() * w[k + 1]
                } else {
                    C64::new(0.0, 0.0)
                };
                up - down
            })
            .collect()
    };
    let mut cur = v.to_vec();
    for _ in 0..steps {
        let mut term = cur.clone();
        let mut acc = cur.clone();
        for order in 1..80 {
            term = apply(&term).into_iter().map(|x| x / order as f64).collect();
            let size: f64 = term.iter().map(|x| x.norm_sqr()).sum();
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += *t;
            }
            if size < 1e-36 {
                break;
            }
        }
        cur = acc;
    }
    cur
}

struct Dense {
    n: usize,
    dim: usize,
    amps: Vec<C64>,
}

impl Dense {
    fn new(qubits: &QubitState, gamma: C64, dim: usize) -> Self {
        let n = qubits.qubit_count();
        let bus = coherent(gamma, dim);
        let mut amps = vec![C64::new(0.0, 0.0); (1 << n) * dim];
        for (bits, a) in qubits.amplitudes().iter().enumerate() {
            for k in 0..dim {
                amps[bits * dim + k] = a * bus[k];
            }
        }
        Dense { n, dim, amps }
    }

    fn apply(&mut self, op: Op) {
        for bits in 0..1usize << self.n {
            let block = &mut self.amps[bits * self.dim..(bits + 1) * self.dim];
            match op {
                Op::Rotate(q, theta) => {
                    let s = sign(bits, q, self.n);
                    for (k, a) in block.iter_mut().enumerate() {
                        *a *= C64::from_polar(1.0, s * theta * k as f64);
                    }
                }
                Op::CondShift(q, beta) => {
                    let out = displace(block, beta * sign(bits, q, self.n));
                    block.copy_from_slice(&out);
                }
                Op::Shift(beta) => {
                    let out = displace(block, beta);
                    block.copy_from_slice(&out);
                }
            }
        }
    }

    fn from_hybrid(state: &HybridState, dim: usize) -> Self {
        let n = state.qubit_count();
        let mut amps = vec![C64::new(0.0, 0.0); (1 << n) * dim];
        for b in state.branches() {
            let bus = coherent(b.bus, dim);
            for k in 0..dim {
                amps[b.bits as usize * dim + k] += b.coeff * bus[k];
            }
        }
        Dense { n, dim, amps }
    }

    fn fidelity(&self, other: &Dense) -> f64 {
        let ip: C64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        let na: f64 = self.amps.iter().map(|a| a.norm_sqr()).sum();
        let nb: f64 = other.amps.iter().map(|a| a.norm_sqr()).sum();
        ip.norm_sqr() / (na * nb)
    }
}

/// Smallest `d` with `e^{−x} x^d / d! < 1e−12`, `x = r²`.
fn fock_dim(r: f64) -> usize {
    let x = r * r;
    let mut log_term = -x;
    let mut d = 0usize;
    loop {
        if d as f64 > x && log_term < (1e-12f64).ln() {
            return d.max(8);
        }
        d += 1;
        log_term += x.max(1e-300).ln() - (d as f64).ln();
    }
}

fn c64() -> impl Strategy<Value = C64> {
    (0.0..0.6f64, -3.2..3.2f64).prop_map(|(r, a)| C64::from_polar(r, a))
}

fn op(n: usize) -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..n, -1.5..1.5f64).prop_map(|(q, t)| Op::Rotate(q, t)),
        (0..n, c64()).prop_map(|(q, b)| Op::CondShift(q, b)),
        c64().prop_map(Op::Shift),
    ]
}

fn scenario() -> impl Strategy<Value = (usize, Vec<C64>, C64, Vec<Op>)> {
    (1usize..=3).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1 << n)
                .prop_map(|v| v.into_iter().map(|(r, i)| C64::new(r, i)).collect()),
            (0.0..1.2f64, -3.2..3.2f64).prop_map(|(r, a)| C64::from_polar(r, a)),
            prop::collection::vec(op(n), 1..=12),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn branch_evolution_matches_dense_fock((n, raw, alpha, ops) in scenario()) {
        prop_assume!(raw.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-3);
        let qubits = QubitState::from_unnormalized(n, raw).unwrap();
        let reach = alpha.norm()
            + ops
                .iter()
                .map(|o| match o {
                    Op::Rotate(..) => 0.0,
                    Op::CondShift(_, b) | Op::Shift(b) => b.norm(),
                })
                .sum::<f64>();
        let dim = fock_dim(reach) + 4;

        let mut dense = Dense::new(&qubits, alpha, dim);
        let mut hybrid = HybridState::from_qubits(&qubits, alpha);
        for &o in &ops {
            dense.apply(o);
            hybrid = match o {
                Op::Rotate(q, t) => hybrid.conditional_rotation(q, t).unwrap(),
                Op::CondShift(q, b) => hybrid.conditional_displacement(q, b).unwrap(),
                Op::Shift(b) => hybrid.displacement(b),
            };
        }
        prop_assert!(hybrid.branches().len() <= 1 << n);
        prop_assert!((hybrid.norm_sqr() - 1.0).abs() < 1e-9);
        let fid = dense.fidelity(&Dense::from_hybrid(&hybrid, dim));
        prop_assert!(fid >= 1.0 - 1e-9, "fidelity {fid}");
    }
}

#[test]
fn displacement_of_vacuum_is_coherent() {
    let dim = 40;
    let beta = C64::new(0.7, -0.4);
    let mut vac = vec![C64::new(0.0, 0.0); dim];
    vac[0] = C64::new(1.0, 0.0);
    let out = displace(&vac, beta);
    let want = coherent(beta, dim);
    for (a, b) in out.iter().zip(&want) {
        assert!((a - b).norm() < 1e-12);
    }
}
