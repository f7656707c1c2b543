//! Tableau fusion, measurement and recovery against a dense state vector.

use proptest::prelude::*;
use qubus_core::graphstab::{
    Cluster, FuseLabel, FusionOutcome, FusionVariant, GraphSpec, PauliString, QubitStatus, Sign,
    StabilizerTableau,
};
use qubus_core::register::{Correction, LocalOp};
use qubus_core::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;

/// Qubit `q` lives in bit `q` of the basis index.
#[derive(Clone, Debug)]
struct Sv {
    n: usize,
    amps: Vec<C64>,
}

impl Sv {
    fn graph_state(g: &GraphSpec) -> Self {
        let n = g.vertex_count();
        let dim = 1usize << n;
        let amp = (dim as f64).sqrt().recip();
        let amps = (0..dim)
            .map(|i| {
                let odd = g.edges().filter(|&(u, v)| (i >> u) & (i >> v) & 1 == 1).count() % 2;
                C64::new(if odd == 1 { -amp } else { amp }, 0.0)
            })
            .collect();
        Sv { n, amps }
    }

    fn local(&mut self, q: usize, op: LocalOp) {
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

    fn cz(&mut self, a: usize, b: usize) {
        for (i, x) in self.amps.iter_mut().enumerate() {
            if (i >> a) & (i >> b) & 1 == 1 {
                *x = -*x;
            }
        }
    }

    fn correct(&mut self, cs: &[Correction]) {
        for c in cs {
            self.local(c.qubit, c.op);
        }
    }

    /// `P|ψ⟩` from the rendered letters, e.g. `-XZI`.
    fn pauli(&self, text: &str) -> Vec<C64> {
        let mut out = self.clone();
        let negative = text.starts_with('-');
        for (q, ch) in text.trim_start_matches(['+', '-']).chars().enumerate() {
            match ch {
                'X' => out.local(q, LocalOp::X),
                'Y' => out.local(q, LocalOp::Y),
                'Z' => out.local(q, LocalOp::Z),
                _ => {}
            }
        }
        if negative {
            out.amps.iter_mut().for_each(|a| *a = -*a);
        }
        out.amps
    }

    fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Projects onto the `sign` eigenspace of `text`; returns the probability.
    fn project(&mut self, text: &str, sign: f64) -> f64 {
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

    fn z_text(&self, qs: &[usize]) -> String {
        let mut s = String::from("+");
        for q in 0..self.n {
            s.push(if qs.contains(&q) { 'Z' } else { 'I' });
        }
        s
    }

    fn expectation(&self, text: &str) -> f64 {
        let p = self.pauli(text);
        self.amps.iter().zip(p).map(|(a, b)| (a.conj() * b).re).sum()
    }

    fn fidelity(&self, other: &Sv) -> f64 {
        let ip: C64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        ip.norm_sqr()
    }
}

fn sign_value(s: Sign) -> f64 {
    f64::from(s.value())
}

/// What the cluster claims the physical state is.
fn expected_dense(c: &Cluster) -> Sv {
    let mut sv = Sv::graph_state(c.graph());
    for q in 0..sv.n {
        if let QubitStatus::Pending(v) | QubitStatus::Removed(v) = c.status(q) {
            let text = sv.z_text(&[q]);
            sv.project(&text, sign_value(v));
        }
    }
    sv
}

fn tableau_stabilizes(t: &StabilizerTableau, sv: &Sv) -> bool {
    let n = t.qubit_count();
    t.generators()
        .iter()
        .all(|g| (sv.expectation(&g.render(n)) - 1.0).abs() < TOL)
}

fn assert_matches(c: &Cluster, physical: &Sv) {
    let want = expected_dense(c);
    let fid = want.fidelity(physical);
    assert!((fid - 1.0).abs() < TOL, "fidelity {fid} for graph {}", c.graph());
    assert!(tableau_stabilizes(c.tableau(), physical));
    assert!(c.tableau().is_valid());
    assert!(c.consistent());
}

/// Physical action of a fusion outcome on the dense register.
fn physical_fusion(sv: &mut Sv, qubits: &[usize], outcome: FusionOutcome) -> f64 {
    let zz = |sv: &Sv, a, b| sv.z_text(&[a, b]);
    let z = |sv: &Sv, a| sv.z_text(&[a]);
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

fn ends(chain: &[usize]) -> Vec<usize> {
    let mut e = vec![chain[0]];
    if chain.len() > 1 {
        e.push(*chain.last().unwrap());
    }
    e
}

fn recover_all_pending(c: &mut Cluster, sv: &mut Sv) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for q in c.pending_qubits() {
        if c.graph().degree(q) > 1 {
            continue;
        }
        let rep = c.recover_failure(q, None, &mut rng).unwrap();
        sv.correct(&rep.corrections);
        assert_matches(c, sv);
    }
}

#[test]
fn parity_fusion_matches_dense_for_small_chains() {
    let mut cases = 0;
    for lengths in [[1, 1], [1, 2], [2, 1], [2, 2], [1, 3], [3, 1]] {
        let (base, chains) = Cluster::disjoint_chains(&lengths).unwrap();
        for &a in &ends(&chains[0]) {
            for &b in &ends(&chains[1]) {
                for outcome in [FusionOutcome::Even, FusionOutcome::Odd] {
                    let mut c = base.clone();
                    let mut sv = Sv::graph_state(c.graph());
                    let prob = physical_fusion(&mut sv, &[a, b], outcome);
                    let rep = c.fuse(FusionVariant::Parity2, &[a, b], outcome).unwrap();
                    assert_eq!(rep.label, FuseLabel::ChainJoin);
                    assert!((rep.probability - prob).abs() < TOL);
                    sv.correct(&rep.corrections);
                    assert_matches(&c, &sv);
                    cases += 1;
                }
            }
        }
    }
    assert_eq!(cases, 26);
}

#[test]
fn three_qubit_fusion_matches_dense() {
    let signs = [Sign::Plus, Sign::Minus];
    let mut outcomes = vec![FusionOutcome::Ghz];
    for s in signs {
        outcomes.push(FusionOutcome::Bell { spectator: s });
    }
    for a in signs {
        for b in signs {
            for c in signs {
                outcomes.push(FusionOutcome::Product { values: [a, b, c] });
            }
        }
    }
    for lengths in [[1, 1, 1], [2, 1, 1], [1, 2, 1], [1, 1, 2]] {
        let (base, chains) = Cluster::disjoint_chains(&lengths).unwrap();
        for &x in &ends(&chains[0]) {
            for &y in &ends(&chains[1]) {
                for &z in &ends(&chains[2]) {
                    let qs = [x, y, z];
                    let mut total = 0.0;
                    for &outcome in &outcomes {
                        let mut c = base.clone();
                        let mut sv = Sv::graph_state(c.graph());
                        let prob = physical_fusion(&mut sv, &qs, outcome);
                        let rep = c.fuse(FusionVariant::Gate3, &qs, outcome).unwrap();
                        assert!((rep.probability - prob).abs() < TOL, "{outcome:?}");
                        total += prob;
                        sv.correct(&rep.corrections);
                        assert_matches(&c, &sv);
                        recover_all_pending(&mut c, &mut sv);
                    }
                    assert!(total > 0.0);
                }
            }
        }
    }
}

#[test]
fn z_recovery_on_active_end_matches_dense() {
    for len in 1..=4usize {
        for forced in [Sign::Plus, Sign::Minus] {
            let (mut c, chains) = Cluster::disjoint_chains(&[len]).unwrap();
            let end = *chains[0].last().unwrap();
            let mut sv = Sv::graph_state(c.graph());
            let t = sv.z_text(&[end]);
            let prob = sv.project(&t, sign_value(forced));
            assert!((prob - 0.5).abs() < TOL);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let rep = c.recover_failure(end, Some(forced), &mut rng).unwrap();
            assert_eq!(rep.outcome, forced);
            sv.correct(&rep.corrections);
            assert_matches(&c, &sv);
        }
    }
}

#[test]
fn interior_recovery_is_refused() {
    let (mut c, _) = Cluster::disjoint_chains(&[3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(c.recover_failure(1, None, &mut rng).is_err());
}

#[test]
fn repeated_recovery_leaves_single_plus() {
    for len in 1..=6usize {
        let (mut c, chains) = Cluster::disjoint_chains(&[len]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(len as u64);
        for &q in chains[0].iter().rev().take(len - 1) {
            c.recover_failure(q, None, &mut rng).unwrap();
        }
        let (tab, keep) = c.active_tableau().unwrap();
        assert_eq!(keep, vec![0]);
        let plus = StabilizerTableau::from_strings(&["X"]).unwrap();
        assert!(tab.same_group(&plus), "{tab}");
    }
}

#[derive(Debug, Clone)]
enum Step {
    H(usize),
    S(usize),
    Cz(usize, usize),
    Measure(Vec<u8>, bool),
}

fn step(n: usize) -> impl Strategy<Value = Step> {
    prop_oneof![
        (0..n).prop_map(Step::H),
        (0..n).prop_map(Step::S),
        (0..n, 0..n).prop_filter("distinct", |(a, b)| a != b).prop_map(|(a, b)| Step::Cz(a, b)),
        (prop::collection::vec(0u8..4, n), any::<bool>()).prop_map(|(l, s)| Step::Measure(l, s)),
    ]
}

fn circuit() -> impl Strategy<Value = (usize, Vec<Step>)> {
    (2usize..=4).prop_flat_map(|n| (Just(n), prop::collection::vec(step(n), 1..16)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn clifford_and_measurement_match_dense((n, steps) in circuit()) {
        let mut tab = StabilizerTableau::graph_state(&GraphSpec::empty(n)).unwrap();
        let mut sv = Sv::graph_state(&GraphSpec::empty(n));
        for s in &steps {
            match s {
                Step::H(q) => { tab.apply_h(*q).unwrap(); sv.local(*q, LocalOp::H); }
                Step::S(q) => {
                    tab.apply_s(*q).unwrap();
                    sv.local(*q, LocalOp::ZPhase(std::f64::consts::FRAC_PI_2));
                }
                Step::Cz(a, b) => { tab.apply_cz(*a, *b).unwrap(); sv.cz(*a, *b); }
                Step::Measure(letters, negative) => {
                    let body: String = letters.iter().map(|&l| ['I', 'X', 'Y', 'Z'][l as usize]).collect();
                    if body.chars().all(|c| c == 'I') {
                        continue;
                    }
                    let text = format!("{}{}", if *negative { '-' } else { '+' }, body);
                    let (_, obs) = PauliString::parse(&text).unwrap();
                    let mut trial = sv.clone();
                    let prob = trial.project(&text, 1.0);
                    let report = tab.clone().measure_forced(&obs, Sign::Plus);
                    if prob < 1e-12 {
                        prop_assert!(report.is_err());
                        let mut sv2 = sv.clone();
                        let p2 = sv2.project(&text, -1.0);
                        prop_assert!((p2 - 1.0).abs() < TOL);
                        tab.measure_forced(&obs, Sign::Minus).unwrap();
                        sv = sv2;
                    } else {
                        let r = report.unwrap();
                        prop_assert!((r.probability() - prob).abs() < TOL);
                        tab.measure_forced(&obs, Sign::Plus).unwrap();
                        sv = trial;
                    }
                }
            }
            prop_assert!(tab.is_valid());
            prop_assert!(tableau_stabilizes(&tab, &sv));
        }
    }

    #[test]
    fn parity_fusion_length_law(l1 in 1usize..30, l2 in 1usize..30, odd in any::<bool>()) {
        let (mut c, chains) = Cluster::disjoint_chains(&[l1, l2]).unwrap();
        let a = *chains[0].last().unwrap();
        let b = chains[1][0];
        let outcome = if odd { FusionOutcome::Odd } else { FusionOutcome::Even };
        c.fuse(FusionVariant::Parity2, &[a, b], outcome).unwrap();
        prop_assert!(c.consistent());
        let g = c.graph();
        // spine from the far end of chain 1 to the far end of chain 2
        let start = chains[0][0];
        let end = *chains[1].last().unwrap();
        let spine = if l2 == 1 { a } else { end };
        let path = bfs_path(g, start, spine);
        let spine_len = if l2 == 1 { l1 } else { path.len() };
        prop_assert_eq!(spine_len, l1 + l2 - 1);
        prop_assert_eq!(g.edge_count(), l1 + l2 - 1);
        if l1 > 1 && l2 > 1 {
            prop_assert_eq!(g.degree(b), 1);
            prop_assert!(g.has_edge(a, b));
            let census = g.degree_census();
            let count = |d: usize| census.iter().filter(|&&x| x == d).count();
            prop_assert_eq!(count(3), 1);
            prop_assert_eq!(count(1), 3);
        }
    }
}

fn bfs_path(g: &GraphSpec, from: usize, to: usize) -> Vec<usize> {
    let n = g.vertex_count();
    let mut prev = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::from([from]);
    prev[from] = from;
    while let Some(u) = queue.pop_front() {
        for v in g.neighbours(u) {
            if prev[v] == usize::MAX {
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = prev[cur];
        assert!(cur != usize::MAX, "no path");
        path.push(cur);
    }
    path.reverse();
    path
}
