//! The acceptance suite behind `qubus verify`.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use qubus_core::analytics::{self, Figure, YieldMode};
use qubus_core::busim::{Branch, HybridState};
use qubus_core::gates::{self, OutcomeLabel};
use qubus_core::graphstab::{Cluster, FuseLabel, FusionOutcome, FusionVariant, GraphSpec, PauliString, Sign, StabilizerTableau};
use qubus_core::growth::{self, RowStatus, StrategyConfig, Variant};
use qubus_core::register::{LocalOp, QubitState};
use qubus_core::C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::commands::{self, compiled_deviation, cz_fidelity, graph_check};
use crate::config::{self, layered};
use crate::oracle::{expected_dense, physical_fusion, sign_value, stabilizes, Dense};
use crate::{driver, output};

/// Exact-arithmetic agreement bound.
pub const EXACT_TOL: f64 = 1e-12;
/// Monte Carlo agreement bound in standard errors.
pub const Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    /// a known disagreement with a quoted value, reported but not failing
    Flag,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Flag => "flag",
            Status::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn status(&self) -> Status {
        self.checks.iter().map(|c| c.status).max().unwrap_or(Status::Fail)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub quick: bool,
    pub threads: Option<usize>,
    pub seed: u64,
}

impl VerifyOptions {
    pub fn full(seed: u64) -> Self {
        VerifyOptions { quick: false, threads: None, seed }
    }

    fn trials(&self) -> u64 {
        if self.quick {
            1_000
        } else {
            100_000
        }
    }

    fn relative(&self) -> f64 {
        if self.quick {
            0.05
        } else {
            0.01
        }
    }
}

pub const TITLES: [&str; 10] = [
    "parity gate outcome table",
    "momentum-quadrature misassignment",
    "three-qubit gate and cascade",
    "photon-counting parity gate",
    "geometric phase sequences",
    "stabilizer tableau against dense oracle",
    "Monte Carlo against closed forms",
    "quoted constants and crossover",
    "known discrepancies",
    "determinism across thread counts",
];

fn check(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        status: if ok { Status::Pass } else { Status::Fail },
        detail: detail.into(),
    }
}

fn flag(name: impl Into<String>, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        status: Status::Flag,
        detail: detail.into(),
    }
}

fn runtime(limit: f64, start: Instant) -> Check {
    let s = start.elapsed().as_secs_f64();
    check(format!("runtime < {limit} s"), s < limit, format!("{s:.3} s"))
}

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn run(opts: &VerifyOptions) -> Result<Vec<CriterionReport>> {
    (1..=10).map(|id| run_criterion(id, opts)).collect()
}

pub fn run_criterion(id: u8, opts: &VerifyOptions) -> Result<CriterionReport> {
    let start = Instant::now();
    let checks = match id {
        1 => parity_gate(start)?,
        2 => misassignment(start)?,
        3 => three_qubit()?,
        4 => bucket()?,
        5 => geometric(start, opts)?,
        6 => stabilizer_oracle(opts)?,
        7 => monte_carlo(opts)?,
        8 => constants()?,
        9 => discrepancies()?,
        10 => determinism(opts)?,
        other => anyhow::bail!("no criterion {other}"),
    };
    Ok(CriterionReport {
        id,
        title: TITLES[id as usize - 1].to_string(),
        checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn parity_gate(start: Instant) -> Result<Vec<Check>> {
    let r = gates::parity_gate_momentum(1000.0, 0.003, &QubitState::plus(2)?)?;
    let prob = |l| r.find(l).map(|o| o.probability).unwrap_or(f64::NAN);
    let odd = prob(OutcomeLabel::OddBell);
    let p00 = prob(OutcomeLabel::Product { bits: 0b00, qubits: 2 });
    let p11 = prob(OutcomeLabel::Product { bits: 0b11, qubits: 2 });
    let fid = r
        .find(OutcomeLabel::OddBell)
        .context("no odd outcome")?
        .corrected()?
        .fidelity(&QubitState::bell_odd());
    Ok(vec![
        check(
            "probabilities 1/2, 1/4, 1/4",
            near(odd, 0.5, EXACT_TOL) && near(p00, 0.25, EXACT_TOL) && near(p11, 0.25, EXACT_TOL),
            format!("odd {odd}, |00> {p00}, |11> {p11}"),
        ),
        check("odd Bell fidelity", fid >= 1.0 - EXACT_TOL, format!("{fid:.15}")),
        runtime(1.0, start),
    ])
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Two equal peaks a rotation `theta` apart, midpoint decision rule, integrated numerically.
pub fn neighbour_misassignment(alpha: f64, theta: f64) -> Result<f64> {
    let c = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let state = HybridState::from_branches(
        1,
        vec![
            Branch { bits: 0, coeff: c, bus: C64::new(alpha, 0.0) },
            Branch { bits: 1, coeff: c, bus: C64::from_polar(alpha, theta) },
        ],
    )?;
    let model = state.homodyne_pdf(std::f64::consts::FRAC_PI_2);
    anyhow::ensure!(model.peaks.len() == 2, "peaks merged");
    let (lo, hi) = (&model.peaks[0], &model.peaks[1]);
    let mid = 0.5 * (lo.center + hi.center);
    let phi = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let span = 40.0;
    let wrong_lo = simpson(|x| phi(x - lo.center), mid, mid + span, 40_000);
    let wrong_hi = simpson(|x| phi(x - hi.center), mid - span, mid, 40_000);
    Ok(lo.weight * wrong_lo + hi.weight * wrong_hi)
}

fn misassignment(start: Instant) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (alpha, theta) in [(1000.0, 0.003), (500.0, 0.0063)] {
        let numeric = neighbour_misassignment(alpha, theta)?;
        let closed = gates::error_budget(alpha, theta)?.p_err_momentum;
        let rel = (numeric - closed).abs() / closed;
        out.push(check(
            format!("integrated = erfc form at alpha {alpha}, theta {theta}"),
            rel <= 1e-6,
            format!("{numeric:.9e} vs {closed:.9e} (relative {rel:.1e})"),
        ));
    }
    let theta = (std::f64::consts::PI / 1000.0).asin();
    let at_pi = gates::error_budget(1000.0, theta)?.p_err_momentum;
    out.push(check("error below 1e-3 at alpha sin(theta) = pi", at_pi < 1e-3, format!("{at_pi:.4e}")));
    out.push(runtime(1.0, start));
    Ok(out)
}

fn three_qubit() -> Result<Vec<Check>> {
    let r = gates::three_qubit_gate(1000.0, 0.003, &QubitState::plus(3)?)?;
    let mut out = Vec::new();
    let ghz = r.find(OutcomeLabel::Ghz).context("no GHZ outcome")?;
    let of = |pred: fn(&OutcomeLabel) -> bool| -> Vec<f64> {
        let mut v: Vec<f64> = r.outcomes.iter().filter(|o| pred(&o.label)).map(|o| o.probability).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let bell = of(|l| matches!(l, OutcomeLabel::BellQ3(_)));
    let product = of(|l| matches!(l, OutcomeLabel::Product { .. }));
    out.push(check(
        "probabilities 1/4 GHZ, 1/4+1/4 Bell, 1/8+1/8 product",
        near(ghz.probability, 0.25, EXACT_TOL)
            && bell.len() == 2
            && bell.iter().all(|&p| near(p, 0.25, EXACT_TOL))
            && product.len() == 2
            && product.iter().all(|&p| near(p, 0.125, EXACT_TOL))
            && r.outcomes.len() == 5,
        format!("ghz {}, bell {bell:?}, product {product:?}", ghz.probability),
    ));
    let s = r.success_probability();
    out.push(check("pair success 3/4", near(s, 0.75, EXACT_TOL), format!("{s}")));
    let fid = ghz.fidelity.unwrap_or(0.0);
    let direct = ghz.corrected()?.fidelity(&QubitState::ghz(3)?);
    out.push(check(
        "GHZ fidelity",
        fid >= 1.0 - EXACT_TOL && direct >= 1.0 - EXACT_TOL,
        format!("{direct:.15}"),
    ));
    let mut exact = true;
    let mut detail = Vec::new();
    for n in 2..=8usize {
        let (shared, total) = gates::cascade_pair_success(n)?;
        let half = 1u64 << (n - 1);
        exact &= shared * half == total * (half - 1);
        detail.push(format!("n={n}: {shared}/{total}"));
    }
    out.push(check("cascade success 1 - 2^(1-n), n = 2..8", exact, detail.join(", ")));
    Ok(out)
}

fn bucket() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let resolved = gates::parity_gate_bucket(20_000.0, 2.5e-4, &QubitState::plus(2)?, false)?;
    let vac = resolved.find(OutcomeLabel::OddBell).context("no vacuum outcome")?;
    let fid = vac.corrected()?.fidelity(&QubitState::bell_odd());
    out.push(check("vacuum posterior is the odd Bell state", fid >= 1.0 - EXACT_TOL, format!("{fid:.15}")));

    let r = gates::parity_gate_bucket(4.0, 0.3, &QubitState::plus(2)?, true)?;
    let mut worst = 1.0f64;
    let mut counted = 0;
    for o in &r.outcomes {
        if let OutcomeLabel::EvenBellCount(n) = o.label {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            worst = worst.min(o.corrected()?.fidelity(&QubitState::bell_even(sign)));
            counted += 1;
        }
    }
    out.push(check(
        "count-n posterior is (|00> + (-1)^n |11>)/sqrt2",
        counted > 0 && worst >= 1.0 - 1e-10 && near(r.total_probability(), 1.0, 1e-9),
        format!("{counted} outcomes, worst fidelity {worst:.13}"),
    ));

    let (alpha, theta) = (20_000.0, 1e-4);
    let even = gates::parity_gate_bucket(alpha, theta, &QubitState::basis(2, 0)?, false)?;
    let leak = even.find(OutcomeLabel::OddBell).context("no vacuum outcome")?.probability;
    let small_angle = (-4.0 * (alpha * theta) * (alpha * theta)).exp();
    let exact = (-4.0 * alpha * alpha * theta.sin() * theta.sin()).exp();
    out.push(check(
        "vacuum error = exp(-4 (alpha theta)^2)",
        near(leak, small_angle, EXACT_TOL) && ((leak - exact) / exact).abs() <= 1e-12,
        format!("{leak:.6e} vs {small_angle:.6e}; exact-angle form {exact:.6e}"),
    ));
    Ok(out)
}

fn random_register<R: Rng>(rng: &mut R, n: usize) -> Result<QubitState> {
    let amps = (0..1 << n)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    Ok(QubitState::from_unnormalized(n, amps)?)
}

fn geometric(start: Instant, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let b = (std::f64::consts::PI / 8.0).sqrt();
    let (b1, b2) = (C64::new(b, 0.0), C64::new(0.0, b));
    let r = gates::geometric_cz(b1, b2, &QubitState::plus(2)?)?;
    let mut worst = 1.0f64;
    let mut spread = r.bus_spread;
    for i in 0..20 {
        let input = random_register(&mut growth::trial_rng(opts.seed, i), 2)?;
        let (f, s) = cz_fidelity(b1, b2, &input)?;
        worst = worst.min(f);
        spread = spread.max(s);
    }
    out.push(check(
        "geometric loop with conj(b1) b2 = i pi/8 is CZ",
        r.cz_equivalent && spread == 0.0 && worst >= 1.0 - EXACT_TOL,
        format!("bus spread {spread}, worst fidelity over 20 inputs {worst:.15}"),
    ));
    let mut dev = 0.0f64;
    for (alpha, theta) in [(3.0, 0.2), (1.0, 0.7), (10.0, 0.05), (50.0, 0.01)] {
        dev = dev.max(compiled_deviation(&gates::compile_conditional_displacement(alpha, theta, 0, 1)?)?);
    }
    out.push(check(
        "compiled displacement = direct up to reported phase",
        dev < 1e-9,
        format!("largest deviation {dev:.2e}"),
    ));
    for n in 3..=5 {
        let (star, _) = graph_check(&gates::star_sequence(n, b)?, &GraphSpec::star(n))?;
        let (chain, _) = graph_check(&gates::chain_sequence(n, b)?, &GraphSpec::chain(n))?;
        out.push(check(format!("star and chain graph states, N = {n}"), star && chain, format!("star {star}, chain {chain}")));
    }
    out.push(runtime(5.0, start));
    Ok(out)
}

fn chain_ends(chain: &[usize]) -> Vec<usize> {
    let mut e = vec![chain[0]];
    if chain.len() > 1 {
        e.push(*chain.last().unwrap_or(&chain[0]));
    }
    e
}

fn cluster_matches(c: &Cluster, physical: &Dense) -> bool {
    let want = expected_dense(c);
    (want.fidelity(physical) - 1.0).abs() < EXACT_TOL
        && stabilizes(c.tableau(), physical, EXACT_TOL)
        && c.tableau().is_valid()
        && c.consistent()
}

fn bfs_distance(g: &GraphSpec, from: usize, to: usize) -> Option<usize> {
    let mut dist = vec![usize::MAX; g.vertex_count()];
    let mut queue = std::collections::VecDeque::from([from]);
    dist[from] = 0;
    while let Some(u) = queue.pop_front() {
        for v in g.neighbours(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    (dist[to] != usize::MAX).then_some(dist[to])
}

fn stabilizer_oracle(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let (mut cases, mut bad) = (0, 0);
    for lengths in [[1, 1], [1, 2], [2, 1], [2, 2], [1, 3], [3, 1]] {
        let (base, chains) = Cluster::disjoint_chains(&lengths)?;
        for &a in &chain_ends(&chains[0]) {
            for &b in &chain_ends(&chains[1]) {
                for outcome in [FusionOutcome::Even, FusionOutcome::Odd] {
                    let mut c = base.clone();
                    let mut sv = Dense::graph_state(c.graph());
                    let prob = physical_fusion(&mut sv, &[a, b], outcome);
                    let rep = c.fuse(FusionVariant::Parity2, &[a, b], outcome)?;
                    sv.correct(&rep.corrections);
                    cases += 1;
                    if rep.label != FuseLabel::ChainJoin || !near(rep.probability, prob, EXACT_TOL) || !cluster_matches(&c, &sv) {
                        bad += 1;
                    }
                }
            }
        }
    }
    out.push(check("parity fusion, chains up to 4 qubits", bad == 0, format!("{cases} scenarios, {bad} mismatches")));

    let signs = [Sign::Plus, Sign::Minus];
    let mut outcomes = vec![FusionOutcome::Ghz];
    outcomes.extend(signs.iter().map(|&s| FusionOutcome::Bell { spectator: s }));
    for a in signs {
        for b in signs {
            for c in signs {
                outcomes.push(FusionOutcome::Product { values: [a, b, c] });
            }
        }
    }
    let (mut cases, mut bad) = (0, 0);
    let mut rng = growth::trial_rng(opts.seed, 0);
    for lengths in [[1, 1, 1], [2, 1, 1], [1, 2, 1], [1, 1, 2]] {
        let (base, chains) = Cluster::disjoint_chains(&lengths)?;
        for &x in &chain_ends(&chains[0]) {
            for &y in &chain_ends(&chains[1]) {
                for &z in &chain_ends(&chains[2]) {
                    for &outcome in &outcomes {
                        let qs = [x, y, z];
                        let mut c = base.clone();
                        let mut sv = Dense::graph_state(c.graph());
                        let prob = physical_fusion(&mut sv, &qs, outcome);
                        let rep = c.fuse(FusionVariant::Gate3, &qs, outcome)?;
                        sv.correct(&rep.corrections);
                        let mut ok = near(rep.probability, prob, EXACT_TOL) && cluster_matches(&c, &sv);
                        for q in c.pending_qubits() {
                            if c.graph().degree(q) > 1 {
                                continue;
                            }
                            let rec = c.recover_failure(q, None, &mut rng)?;
                            sv.correct(&rec.corrections);
                            ok &= cluster_matches(&c, &sv);
                        }
                        cases += 1;
                        bad += usize::from(!ok);
                    }
                }
            }
        }
    }
    out.push(check("three-qubit fusion and recovery", bad == 0, format!("{cases} scenarios, {bad} mismatches")));

    let (mut cases, mut bad) = (0, 0);
    for len in 1..=4usize {
        for forced in signs {
            let (mut c, chains) = Cluster::disjoint_chains(&[len])?;
            let end = *chains[0].last().context("empty chain")?;
            let mut sv = Dense::graph_state(c.graph());
            let t = sv.z_text(&[end]);
            let prob = sv.project(&t, sign_value(forced));
            let rep = c.recover_failure(end, Some(forced), &mut rng)?;
            sv.correct(&rep.corrections);
            cases += 1;
            bad += usize::from(!(near(prob, 0.5, EXACT_TOL) && rep.outcome == forced && cluster_matches(&c, &sv)));
        }
    }
    out.push(check("Z recovery at chain ends", bad == 0, format!("{cases} scenarios, {bad} mismatches")));

    let (circuits, mut bad) = (200u64, 0);
    for i in 0..circuits {
        let mut rng = growth::trial_rng(opts.seed ^ 0x5eed, i);
        let n = rng.random_range(2..=4usize);
        let mut tab = StabilizerTableau::graph_state(&GraphSpec::empty(n))?;
        let mut sv = Dense::graph_state(&GraphSpec::empty(n));
        let mut ok = true;
        for _ in 0..16 {
            match rng.random_range(0..4) {
                0 => {
                    let q = rng.random_range(0..n);
                    tab.apply_h(q)?;
                    sv.local(q, LocalOp::H);
                }
                1 => {
                    let q = rng.random_range(0..n);
                    tab.apply_s(q)?;
                    sv.local(q, LocalOp::ZPhase(std::f64::consts::FRAC_PI_2));
                }
                2 => {
                    let a = rng.random_range(0..n);
                    let b = (a + rng.random_range(1..n)) % n;
                    tab.apply_cz(a, b)?;
                    sv.cz(a, b);
                }
                _ => {
                    let body: String = (0..n).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect();
                    if body.chars().all(|c| c == 'I') {
                        continue;
                    }
                    let text = format!("{}{body}", if rng.random::<bool>() { '-' } else { '+' });
                    let (_, obs) = PauliString::parse(&text)?;
                    let sign = if rng.random::<bool>() { Sign::Plus } else { Sign::Minus };
                    let mut trial = sv.clone();
                    let prob = trial.project(&text, sign_value(sign));
                    match tab.clone().measure_forced(&obs, sign) {
                        Ok(rep) => {
                            ok &= near(rep.probability(), prob, EXACT_TOL);
                            tab.measure_forced(&obs, sign)?;
                            sv = trial;
                        }
                        Err(_) => ok &= prob < EXACT_TOL,
                    }
                }
            }
            ok &= tab.is_valid() && stabilizes(&tab, &sv, EXACT_TOL);
        }
        bad += usize::from(!ok);
    }
    out.push(check("random Clifford and measurement circuits", bad == 0, format!("{circuits} circuits, {bad} mismatches")));

    let mut bad = 0;
    let mut rng = growth::trial_rng(opts.seed ^ 0x1e17, 0);
    for _ in 0..100 {
        let (l1, l2) = (rng.random_range(1..30usize), rng.random_range(1..30usize));
        let (mut c, chains) = Cluster::disjoint_chains(&[l1, l2])?;
        let a = *chains[0].last().context("empty chain")?;
        let b = chains[1][0];
        let outcome = if rng.random::<bool>() { FusionOutcome::Odd } else { FusionOutcome::Even };
        c.fuse(FusionVariant::Parity2, &[a, b], outcome)?;
        let g = c.graph();
        let far = if l2 == 1 { a } else { *chains[1].last().context("empty chain")? };
        let spine = bfs_distance(g, chains[0][0], far).map(|d| d + 1);
        let mut ok = c.consistent() && spine == Some(l1 + l2 - 1) && g.edge_count() == l1 + l2 - 1;
        if l1 > 1 && l2 > 1 {
            let census = g.degree_census();
            let count = |d: usize| census.iter().filter(|&&x| x == d).count();
            ok &= g.degree(b) == 1 && g.has_edge(a, b) && count(3) == 1 && count(1) == 3;
        }
        bad += usize::from(!ok);
    }
    out.push(check("fusion length law L1 + L2 - 1", bad == 0, format!("100 random cases, {bad} violations")));
    Ok(out)
}

fn monte_carlo(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let trials = opts.trials();
    let rel = opts.relative();

    let start = Instant::now();
    let cfg = StrategyConfig::new(Variant::Sequential, 0.75, trials, opts.seed).with_target(41);
    let (_, s) = driver::simulate(&cfg, opts.threads)?;
    let secs = start.elapsed().as_secs_f64();
    let closed = analytics::seq_scaling(41.0, 0.75, 1.0)?.ops;
    let dev = (s.ops.mean - closed).abs() / closed;
    out.push(check(
        format!("sequential mean ops within {}% of (L-1)/(2p-1)", rel * 100.0),
        dev <= rel,
        format!(
            "{:.4} +/- {:.4} vs {closed} ({:.2}%); the restart walk at L = 1 gives 79 exactly",
            s.ops.mean,
            s.ops.stderr,
            dev * 100.0
        ),
    ));
    out.push(check("sequential run < 10 s", secs < 10.0, format!("{secs:.2} s for {trials} trials")));

    for (p, l) in [(0.75, 10u64), (0.9, 5)] {
        let j = growth::join_pair_experiment(p, l, trials, opts.seed)?;
        let want = analytics::join_yield(l, p, YieldMode::ExactSum)?;
        let z = (j.mean - want) / j.stderr;
        out.push(check(
            format!("join pair yield, p = {p}, L = {l}"),
            z.abs() <= Z_LIMIT,
            format!("{:.5} vs {want:.5} (z = {z:.2})", j.mean),
        ));
    }

    for p in [0.75, 0.5] {
        let cfg = StrategyConfig::new(Variant::VerticalLink, p, trials, opts.seed);
        let (_, s) = driver::simulate(&cfg, opts.threads)?;
        let want = 2.0 * (1.0 / p + 1.0);
        let dev = (s.consumed.mean - want).abs() / want;
        out.push(check(
            format!("vertical link qubits, p = {p}"),
            dev <= rel,
            format!("{:.4} vs {want:.4} ({:.3}%)", s.consumed.mean, dev * 100.0),
        ));
    }

    let mut printed_flags = Vec::new();
    for p in [0.5, 0.75] {
        for k in 1..=8u32 {
            let cfg = StrategyConfig::new(Variant::DivideConquer, p, trials, opts.seed)
                .with_qubits(1 << 16)
                .with_rounds(k);
            let (_, s) = driver::simulate(&cfg, opts.threads)?;
            let rows = growth::compare_to_analytic(&s, &growth::analytic_point(&cfg)?)?;
            let row = |m: &str| rows.iter().find(|r| r.metric == m).cloned();
            let (Some(c), Some(q)) = (row("chains"), row("structure")) else {
                anyhow::bail!("missing divide-and-conquer rows");
            };
            out.push(check(
                format!("divide-and-conquer C and Q, p = {p}, k = {k}"),
                c.z.abs() <= Z_LIMIT && q.z.abs() <= Z_LIMIT,
                format!(
                    "C {:.4} vs {:.4} (z = {:.2}), Q z = {:.2}; odd leftovers are discarded each round",
                    c.empirical, c.analytic, c.z, q.z
                ),
            ));
            if let Some(r) = row("ops@printed") {
                if r.status == RowStatus::Flag {
                    printed_flags.push(format!("k={k}"));
                }
            }
        }
        if !printed_flags.is_empty() {
            out.push(flag(
                format!("printed cumulative-ops form, p = {p}"),
                format!(
                    "differs from the simulated count at {}; the all-rounds sum n/2 (1-(p/2)^k)/(1-p/2) matches",
                    printed_flags.join(" ")
                ),
            ));
            printed_flags.clear();
        }
    }
    Ok(out)
}

fn constants() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for i in 2..=400 {
        let l = i as f64;
        let got = analytics::merge_linear_law(l, 0.75)?;
        worst = worst.max((got - (8.0 * l - 44.0 / 3.0)).abs() / l);
    }
    out.push(check("merge law p = 3/4 is 8L - 44/3", worst < 1e-12, format!("largest deviation per unit L {worst:.1e}")));
    let quoted = analytics::quoted_constants()?;
    let find = |prefix: &str| quoted.iter().find(|q| q.name.starts_with(prefix));
    let nv = find("vertical link ops, p=3/4").context("missing constant")?;
    out.push(check(
        "vertical link ops 46.7 at p = 3/4",
        nv.reproduced() == Some(true),
        format!("recomputed {:.4}", nv.recomputed.unwrap_or(f64::NAN)),
    ));
    let stored = analytics::reference_series("paper-16L-50")?;
    let law_ok = (5..=400).all(|i| stored.eval(i as f64).map(|v| v == 16.0 * i as f64 - 50.0).unwrap_or(false));
    let slope = find("merge law p=1/2").context("missing constant")?;
    let fourteen = find("ops to grow").context("missing constant")?;
    out.push(check(
        "stored p = 1/2 law 16L - 50 and the constant 14",
        law_ok && slope.reproduced() == Some(true) && fourteen.reproduced() == Some(true),
        format!("14 recomputed as {}; {}", fourteen.recomputed.unwrap_or(f64::NAN), fourteen.note),
    ));
    let lengths: Vec<f64> = (5..=400).map(f64::from).collect();
    let table = commands::scaling_table(Figure::Operations, None, &lengths, 0.75)?;
    let cross = commands::crossover_from_table(&table, "divide-conquer", "merge");
    out.push(check(
        "divide-and-conquer / merge crossover in [200, 300] at p = 3/4",
        cross.is_some_and(|l| (200.0..=300.0).contains(&l)),
        format!(
            "table crossover L = {}; bisection {:.2}",
            cross.map(|l| format!("{l:.2}")).unwrap_or_else(|| "none".into()),
            analytics::crossover_length(0.75)?
        ),
    ));
    Ok(out)
}

fn discrepancies() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let b = gates::error_budget(2.0, 1.0)?;
    let quoted = 3e-4;
    let vac = if (b.p_err_vacuum - quoted).abs() > 0.5 * quoted {
        flag(
            "vacuum error at alpha theta = 2",
            format!(
                "exp(-16) = {:.3e}, quoted {quoted:.0e}; the formula is kept and the prose value reported",
                b.p_err_vacuum
            ),
        )
    } else {
        check("vacuum error at alpha theta = 2", false, "quoted value unexpectedly reproduced")
    };
    out.push(vac);
    let table = analytics::quoted_constants()?;
    let nv = table
        .iter()
        .find(|q| q.name == "vertical link ops, p=1/2")
        .context("missing constant")?;
    out.push(match nv.reproduced() {
        Some(false) => flag(
            "vertical link ops at p = 1/2",
            format!("composition gives {:.1}, quoted {}; {}", nv.recomputed.unwrap_or(f64::NAN), nv.quoted, nv.note),
        ),
        _ => check("vertical link ops at p = 1/2", false, "quoted value unexpectedly reproduced"),
    });
    Ok(out)
}

fn determinism(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let configs = [
        StrategyConfig::new(Variant::Merge, 0.75, 2000, opts.seed).with_target(40),
        StrategyConfig::new(Variant::Sequential, 0.7, 2000, opts.seed).with_target(25),
        StrategyConfig::new(Variant::DivideConquer, 0.5, 500, opts.seed)
            .with_qubits(1 << 12)
            .with_rounds(5),
    ];
    for cfg in &configs {
        let mut seen: Vec<(String, String, Vec<u8>)> = Vec::new();
        for threads in [1usize, 2, 4, 8, 1] {
            let (csv, rows, records) = commands::growth_report(cfg, Some(threads))?;
            let mut jsonl = Vec::new();
            output::write_trials_jsonl(&mut jsonl, cfg, &records)?;
            seen.push((csv, rows, jsonl));
        }
        let same = seen.windows(2).all(|w| w[0] == w[1]);
        out.push(check(
            format!("{} output identical for 1, 2, 4, 8 threads and a rerun", cfg.variant),
            same,
            format!("{} bytes of CSV, {} bytes of JSONL", seen[0].0.len(), seen[0].2.len()),
        ));
    }
    Ok(out)
}

pub fn render(reports: &[CriterionReport]) -> String {
    let mut s = String::new();
    for r in reports {
        s.push_str(&format!("criterion {:>2}  {:<4}  {}  ({:.2} s)\n", r.id, r.status(), r.title, r.seconds));
        for c in &r.checks {
            s.push_str(&format!("    [{}] {}: {}\n", c.status, c.name, c.detail));
        }
    }
    let count = |st| reports.iter().filter(|r| r.status() == st).count();
    s.push_str(&format!(
        "summary: {} pass, {} flag, {} fail\n",
        count(Status::Pass),
        count(Status::Flag),
        count(Status::Fail)
    ));
    s
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyArgs {
    /// 10^3 trials and 5% tolerances
    #[arg(long)]
    pub quick: bool,
    /// Run only these criteria (comma-separated ids)
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<u8>>,
    /// Master seed; falls back to $QUBUS_SEED, then 0
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for the Monte Carlo checks
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write the report as JSON
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// JSON file with defaults for these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Exit code 1 only when some check fails; flags exit 0.
pub fn cmd_verify(flags: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let a = layered(flags, flags.config.as_deref())?;
    let seed = match a.seed {
        Some(s) => s,
        None => config::env_seed()?.unwrap_or(0),
    };
    let opts = VerifyOptions { quick: a.quick, threads: a.threads, seed };
    let ids: Vec<u8> = a.only.clone().unwrap_or_else(|| (1..=10).collect());
    let reports = ids.iter().map(|&id| run_criterion(id, &opts)).collect::<Result<Vec<_>>>()?;
    write!(out, "{}", render(&reports))?;
    if let Some(path) = &a.json {
        std::fs::write(path, serde_json::to_string_pretty(&reports)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if reports.iter().any(|r| r.status() == Status::Fail) { 1 } else { 0 })
}
