//! Dense state-vector reference for small stabilizer scenarios.
//! Qubit `q` is bit `q` of the basis index.

use num_complex::Complex64 as C64;
use qubus_core::graphstab::{Cluster, FusionOutcome, GraphSpec, QubitStatus, Sign, StabilizerTableau};
use qubus_core::register::{Correction, LocalOp};

#[derive(Debug, Clone)]
pub struct Dense {
    pub n: usize,
    pub amps: Vec<C64>,
}

impl Dense {
    pub fn graph_state(g: &GraphSpec) -> Self {
        let n = g.vertex_count();
        let dim = 1usize << n;
        let amp = (dim as f64).sqrt().recip();
        let amps = (0..dim)
            .map(|i| {
                let odd = g.edges().filter(|&(u, v)| (i >> u) & (i >> v) & 1 == 1).count() % 2;
                C64::new(if odd == 1 { -amp } else { amp }, 0.0)
            })
            .collect();
        Dense { n, amps }
    }

    pub fn local(&mut self, q: usize, op: LocalOp) {
        let m = 1usize << q;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..self.amps.len() {
            if i & m != 0 {
                continue;
            }
            let (a0, a1) = (self.amps[i], self.amps[i | m]);
            let (b0, b1) = match op {
                LocalOp::X => (a1, a0),
                LocalOp::Y => (C64::new(0.0, -1.0) * a1, C64::new(0.0, 1.0) * a0),
                LocalOp::Z => (a0, -a1),
                LocalOp::H => ((a0 + a1) * h, (a0 - a1) * h),
                LocalOp::ZPhase(phi) => (a0, a1 * C64::from_polar(1.0, phi)),
            };
            self.amps[i] = b0;
            self.amps[i | m] = b1;
        }
    }

    pub fn cz(&mut self, a: usize, b: usize) {
        for (i, x) in self.amps.iter_mut().enumerate() {
            if (i >> a) & (i >> b) & 1 == 1 {
                *x = -*x;
            }
        }
    }

    pub fn correct(&mut self, cs: &[Correction]) {
        for c in cs {
            self.local(c.qubit, c.op);
        }
    }

    /// `P|ψ⟩` for a rendered Pauli string such as `-XZI` (first letter is qubit 0).
    pub fn pauli(&self, text: &str) -> Vec<C64> {
        let mut out = self.clone();
        for (q, ch) in text.trim_start_matches(['+', '-']).chars().enumerate() {
            match ch {
                'X' => out.local(q, LocalOp::X),
                'Y' => out.local(q, LocalOp::Y),
                'Z' => out.local(q, LocalOp::Z),
                _ => {}
            }
        }
        if text.starts_with('-') {
            out.amps.iter_mut().for_each(|a| *a = -*a);
        }
        out.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Projects onto the `sign` eigenspace of `text` and renormalizes; returns the probability.
    pub fn project(&mut self, text: &str, sign: f64) -> f64 {
        let p = self.pauli(text);
        for (a, b) in self.amps.iter_mut().zip(p) {
            *a = (*a + b * sign) * 0.5;
        }
        let prob = self.norm_sqr();
        if prob > 1e-15 {
            let s = prob.sqrt();
            self.amps.iter_mut().for_each(|a| *a /= s);
        }
        prob
    }

    pub fn z_text(&self, qs: &[usize]) -> String {
        let mut s = String::from("+");
        for q in 0..self.n {
            s.push(if qs.contains(&q) { 'Z' } else { 'I' });
        }
        s
    }

    pub fn expectation(&self, text: &str) -> f64 {
        let p = self.pauli(text);
        self.amps.iter().zip(p).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn fidelity(&self, other: &Dense) -> f64 {
        let ip: C64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        ip.norm_sqr()
    }
}

pub fn sign_value(s: Sign) -> f64 {
    f64::from(s.value())
}

/// The state a cluster's bookkeeping describes: its graph with retired qubits projected.
pub fn expected_dense(c: &Cluster) -> Dense {
    let mut sv = Dense::graph_state(c.graph());
    for q in 0..sv.n {
        if let QubitStatus::Pending(v) | QubitStatus::Removed(v) = c.status(q) {
            let text = sv.z_text(&[q]);
            sv.project(&text, sign_value(v));
        }
    }
    sv
}

pub fn stabilizes(t: &StabilizerTableau, sv: &Dense, tol: f64) -> bool {
    let n = t.qubit_count();
    t.generators()
        .iter()
        .all(|g| (sv.expectation(&g.render(n)) - 1.0).abs() < tol)
}

/// Physical projections and Hadamards of a fusion outcome; returns its probability.
pub fn physical_fusion(sv: &mut Dense, qubits: &[usize], outcome: FusionOutcome) -> f64 {
    let zz = |sv: &Dense, a, b| sv.z_text(&[a, b]);
    let z = |sv: &Dense, a| sv.z_text(&[a]);
    match outcome {
        FusionOutcome::Even | FusionOutcome::Odd => {
            let s = if outcome == FusionOutcome::Even { 1.0 } else { -1.0 };
            let t = zz(sv, qubits[0], qubits[1]);
            let p = sv.project(&t, s);
            sv.local(qubits[1], LocalOp::H);
            p
        }
        FusionOutcome::Ghz => {
            let (a, b, c) = (qubits[0], qubits[1], qubits[2]);
            let t1 = zz(sv, a, b);
            let t2 = zz(sv, b, c);
            let p = sv.project(&t1, 1.0) * sv.project(&t2, 1.0);
            sv.local(b, LocalOp::H);
            sv.local(c, LocalOp::H);
            p
        }
        FusionOutcome::Bell { spectator } => {
            let (a, b, c) = (qubits[0], qubits[1], qubits[2]);
            let tc = z(sv, c);
            let tab = zz(sv, a, b);
            let p = sv.project(&tc, sign_value(spectator)) * sv.project(&tab, -1.0);
            sv.local(b, LocalOp::H);
            p
        }
        FusionOutcome::Product { values } => {
            let mut p = 1.0;
            for (&q, v) in qubits.iter().zip(values) {
                let t = z(sv, q);
                p *= sv.project(&t, sign_value(v));
            }
            p
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_state_is_stabilized_by_its_generators() {
        let g = GraphSpec::chain(4);
        let sv = Dense::graph_state(&g);
        let t = StabilizerTableau::graph_state(&g).unwrap();
        assert!(stabilizes(&t, &sv, 1e-12));
        assert!((sv.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
