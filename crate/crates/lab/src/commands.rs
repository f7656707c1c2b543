//! The `gate`, `growth` and `scaling` subcommands.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use qubus_core::analytics::{self, Figure, FigurePoint};
use qubus_core::busim::HybridState;
use qubus_core::gates::{self, CompiledDisplacement, GateReport, InteractionSequence};
use qubus_core::graphstab::{equals_up_to_corrections, GraphSpec};
use qubus_core::growth::{self, StrategyConfig, Variant};
use qubus_core::register::{Correction, LocalOp, QubitState};
use qubus_core::C64;
use serde::{Deserialize, Serialize};

use crate::config::{self, layered};
use crate::expr::Expr;
use crate::plot::{Plot, Series};
use crate::{driver, graph_io, output};

pub const GATES: [&str; 9] = [
    "parity-momentum",
    "parity-position",
    "parity-bucket",
    "three-qubit",
    "cascade",
    "geometric-cz",
    "compiled",
    "star",
    "chain",
];

fn join_corrections(cs: &[Correction]) -> String {
    cs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

fn write_file(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

// ---------------------------------------------------------------- gate

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateArgs {
    /// parity-momentum | parity-position | parity-bucket | three-qubit | cascade |
    /// geometric-cz | compiled | star | chain
    pub name: Option<String>,
    /// Bus amplitude (expression allowed)
    #[arg(long)]
    pub alpha: Option<Expr>,
    /// Rotation angle per interaction (expression allowed)
    #[arg(long)]
    pub theta: Option<Expr>,
    /// Photon-number-resolving detector for parity-bucket
    #[arg(long)]
    pub resolving: bool,
    /// Qubit count for cascade, star and chain
    #[arg(long)]
    pub n: Option<usize>,
    /// Displacement magnitude for geometric-cz, star and chain, e.g. `sqrt(pi/8)`
    #[arg(long)]
    pub beta: Option<Expr>,
    /// Phase of the first geometric-cz displacement
    #[arg(long)]
    pub phase1: Option<Expr>,
    /// Phase of the second geometric-cz displacement
    #[arg(long)]
    pub phase2: Option<Expr>,
    /// Edge list the star/chain result must match (defaults to the named shape)
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Write the outcome table as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON file with defaults for these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn value_or(e: &Option<Expr>, default: f64) -> Result<f64> {
    e.as_ref().map(Expr::value).transpose().map(|v| v.unwrap_or(default))
}

/// Largest deviation between the compiled sequence (with its corrections) and the
/// direct conditional displacement, over both branches of `|+⟩`.
pub fn compiled_deviation(c: &CompiledDisplacement) -> Result<f64> {
    let start = HybridState::plus(1, C64::new(0.0, 0.0))?;
    let via = c.sequence.apply(&start)?;
    let direct = start.conditional_displacement(0, c.net)?;
    let rel = c
        .corrections
        .iter()
        .map(|k| match k.op {
            LocalOp::ZPhase(phi) => Ok(phi),
            other => bail!("unexpected correction {other}"),
        })
        .sum::<Result<f64>>()?;
    let global = C64::from_polar(1.0, c.global_phase);
    let mut worst = 0.0f64;
    for bits in [0u64, 1] {
        let (Some(a), Some(b)) = (via.branch(bits), direct.branch(bits)) else {
            bail!("branch {bits} missing");
        };
        let fix = if bits == 1 { C64::from_polar(1.0, rel) } else { C64::new(1.0, 0.0) };
        worst = worst.max((a.coeff * fix - global * b.coeff).norm());
        worst = worst.max((a.bus - b.bus).norm());
    }
    Ok(worst)
}

/// Fidelity of the corrected geometric gate output with `CZ|input⟩`.
pub fn cz_fidelity(beta1: C64, beta2: C64, input: &QubitState) -> Result<(f64, f64)> {
    let r = gates::geometric_cz(beta1, beta2, input)?;
    let mut want = input.clone();
    want.apply_cz(0, 1)?;
    Ok((r.state.with_corrections(&r.corrections)?.fidelity(&want), r.bus_spread))
}

/// Whether a displacement-only sequence makes `expected` up to its reported corrections.
pub fn graph_check(seq: &InteractionSequence, expected: &GraphSpec) -> Result<(bool, gates::MeasurementFreeResult)> {
    let r = gates::run_measurement_free(seq)?;
    let ok = match &r.tableau {
        Some(t) if t.qubit_count() == expected.vertex_count() => {
            r.bus_spread == 0.0 && equals_up_to_corrections(t, expected, &r.corrections)?
        }
        _ => false,
    };
    Ok((ok, r))
}

fn outcome_table(out: &mut dyn Write, gate: &str, r: &GateReport, relevant: f64, csv: Option<&PathBuf>) -> Result<()> {
    writeln!(out, "{:<18} {:>14} {:>14} {:>16}  corrections", "label", "probability", "window", "fidelity")?;
    let mut rows = Vec::new();
    for o in &r.outcomes {
        let fid = o.fidelity.map(|f| format!("{f:.12}")).unwrap_or_else(|| "-".into());
        let win = o.window_probability.map(|w| format!("{w:.8}")).unwrap_or_else(|| "-".into());
        writeln!(
            out,
            "{:<18} {:>14.10} {:>14} {:>16}  {}",
            o.label.to_string(),
            o.probability,
            win,
            fid,
            join_corrections(&o.corrections)
        )?;
        rows.push(vec![
            gate.to_string(),
            o.label.to_string(),
            o.probability.to_string(),
            o.window_probability.map(|w| w.to_string()).unwrap_or_default(),
            o.fidelity.map(|f| f.to_string()).unwrap_or_default(),
            join_corrections(&o.corrections),
        ]);
    }
    writeln!(out, "total probability: {}", r.total_probability())?;
    writeln!(out, "success probability: {}", r.success_probability())?;
    writeln!(out, "error budget: {relevant}")?;
    let b = &r.budget;
    writeln!(
        out,
        "closed forms: momentum {:.6e}, position {:.6e}, vacuum {:.6e}; alpha*theta = {}, resolved = {}",
        b.p_err_momentum, b.p_err_position, b.p_err_vacuum, b.separation_parameter, b.resolved
    )?;
    if let Some(m) = r.peak_misassignment {
        writeln!(out, "peak misassignment (midpoint rule): {m:.6e}")?;
    }
    writeln!(out, "interaction time units: {}", r.time_units)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = csv {
        write_file(path, &output::rows_csv(&output::GATE_COLUMNS, rows)?)?;
    }
    Ok(())
}

/// Runs one gate demo; returns the process exit code.
pub fn cmd_gate(flags: &GateArgs, out: &mut dyn Write) -> Result<i32> {
    let a = layered(flags, flags.config.as_deref())?;
    let name = a.name.as_deref().context("missing gate name")?;
    ensure!(GATES.contains(&name), "unknown gate `{name}`; expected one of {}", GATES.join(", "));
    let alpha = value_or(&a.alpha, 1000.0)?;
    let theta = value_or(&a.theta, 0.003)?;
    config::check_alpha(alpha)?;
    ensure!(theta.is_finite(), "theta must be finite");
    let beta = value_or(&a.beta, (std::f64::consts::PI / 8.0).sqrt())?;
    let csv = a.csv.as_ref();
    writeln!(out, "gate {name}")?;
    match name {
        "parity-momentum" | "parity-position" | "parity-bucket" | "three-qubit" | "cascade" => {
            writeln!(out, "alpha = {alpha}, theta = {theta}")?;
            let (r, relevant) = match name {
                "parity-momentum" => {
                    let r = gates::parity_gate_momentum(alpha, theta, &QubitState::plus(2)?)?;
                    let e = r.budget.p_err_momentum;
                    (r, e)
                }
                "parity-position" => {
                    let r = gates::parity_gate_position(alpha, theta, &QubitState::plus(2)?)?;
                    let e = r.budget.p_err_position;
                    (r, e)
                }
                "parity-bucket" => {
                    let r = gates::parity_gate_bucket(alpha, theta, &QubitState::plus(2)?, a.resolving)?;
                    let e = r.budget.p_err_vacuum;
                    (r, e)
                }
                "three-qubit" => {
                    let r = gates::three_qubit_gate(alpha, theta, &QubitState::plus(3)?)?;
                    let e = r.budget.p_err_momentum;
                    (r, e)
                }
                _ => {
                    let n = a.n.unwrap_or(4);
                    let (shared, total) = gates::cascade_pair_success(n)?;
                    writeln!(out, "schedule: {:?}", gates::cascade_schedule(n)?)?;
                    writeln!(out, "pair success: {shared}/{total} = {}", shared as f64 / total as f64)?;
                    let r = gates::cascaded_gate(n, alpha, theta)?;
                    let e = r.budget.p_err_momentum;
                    (r, e)
                }
            };
            outcome_table(out, name, &r, relevant, csv)?;
            Ok(0)
        }
        "geometric-cz" => {
            let p1 = value_or(&a.phase1, 0.0)?;
            let p2 = value_or(&a.phase2, std::f64::consts::FRAC_PI_2)?;
            let (b1, b2) = (C64::from_polar(beta, p1), C64::from_polar(beta, p2));
            let r = gates::geometric_cz(b1, b2, &QubitState::plus(2)?)?;
            let (fid, spread) = cz_fidelity(b1, b2, &QubitState::plus(2)?)?;
            writeln!(out, "beta1 = {b1}, beta2 = {b2}")?;
            writeln!(out, "coupling Im(conj(beta1) beta2) = {}", r.coupling)?;
            writeln!(out, "conditional phase after corrections = {}", r.conditional_phase)?;
            writeln!(out, "corrections: {}", join_corrections(&r.corrections))?;
            writeln!(out, "bus spread: {spread}")?;
            writeln!(out, "fidelity with CZ|++>: {fid:.15}")?;
            let ok = r.cz_equivalent && spread == 0.0 && fid >= 1.0 - 1e-12;
            writeln!(out, "cz check: {}", if ok { "PASS" } else { "FAIL" })?;
            Ok(if ok { 0 } else { 1 })
        }
        "compiled" => {
            let c = gates::compile_conditional_displacement(alpha, theta, 0, 1)?;
            writeln!(out, "alpha = {alpha}, theta = {theta}")?;
            let steps: Vec<String> = c.sequence.steps().iter().map(|s| s.to_string()).collect();
            writeln!(out, "sequence: {}", steps.join(" -> "))?;
            writeln!(out, "net conditional displacement: {}", c.net)?;
            writeln!(out, "corrections: {}", join_corrections(&c.corrections))?;
            writeln!(out, "global phase: {}", c.global_phase)?;
            let dev = compiled_deviation(&c)?;
            writeln!(out, "largest deviation from direct displacement: {dev:.3e}")?;
            let ok = dev < 1e-9;
            writeln!(out, "compiled check: {}", if ok { "PASS" } else { "FAIL" })?;
            Ok(if ok { 0 } else { 1 })
        }
        _ => {
            let n = a.n.unwrap_or(5);
            let (seq, default_graph) = if name == "star" {
                (gates::star_sequence(n, beta)?, GraphSpec::star(n))
            } else {
                (gates::chain_sequence(n, beta)?, GraphSpec::chain(n))
            };
            let expected = match &a.graph {
                Some(path) => graph_io::read_edge_list(path, Some(n))?,
                None => default_graph,
            };
            let (ok, r) = graph_check(&seq, &expected)?;
            writeln!(out, "n = {n}, beta = {beta}, interactions = {}", seq.steps().len())?;
            match &r.graph {
                Some(g) => {
                    let edges: Vec<String> = g.edges().map(|(u, v)| format!("{u}-{v}")).collect();
                    writeln!(out, "graph: {}", edges.join(" "))?;
                }
                None => writeln!(out, "graph: couplings are not all 0 or pi")?,
            }
            writeln!(out, "corrections: {}", join_corrections(&r.corrections))?;
            writeln!(out, "bus spread: {}", r.bus_spread)?;
            if let Some(t) = &r.tableau {
                writeln!(out, "stabilizers: {t}")?;
            }
            writeln!(out, "stabilizer check: {}", if ok { "PASS" } else { "FAIL" })?;
            if let Some(path) = csv {
                let rows = r.graph.iter().flat_map(|g| g.edges().map(|(u, v)| vec![u.to_string(), v.to_string()]).collect::<Vec<_>>());
                write_file(path, &output::rows_csv(&["u", "v"], rows)?)?;
            }
            Ok(if ok { 0 } else { 1 })
        }
    }
}

// ---------------------------------------------------------------- growth

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthArgs {
    /// sequential | merge | divide-conquer (dc) | vertical
    pub variant: Option<String>,
    /// Entangling success probability
    #[arg(long)]
    pub p: Option<f64>,
    /// Target chain length
    #[arg(short = 'L', long = "L")]
    #[serde(rename = "L")]
    pub length: Option<u64>,
    /// Fixed number of rounds (sequential, divide-conquer)
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Initial qubit population for divide-conquer (default 65536)
    #[arg(long)]
    pub qubits: Option<u64>,
    /// Number of independent trials (default 1000)
    #[arg(long)]
    pub trials: Option<u64>,
    /// Master seed; falls back to $QUBUS_SEED, then 0
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time per entangling attempt
    #[arg(long)]
    pub gate_time: Option<f64>,
    /// Starting length of the sequential chain
    #[arg(long)]
    pub initial_length: Option<u64>,
    /// Per-trial cap on sequential rounds
    #[arg(long)]
    pub max_rounds: Option<u64>,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long)]
    pub threads: Option<usize>,
    /// Aggregate CSV output
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Per-trial JSONL output
    #[arg(long)]
    pub jsonl: Option<PathBuf>,
    /// JSON file with defaults for these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn parse_variant(text: &str) -> Result<Variant> {
    let key = text.trim().to_ascii_lowercase();
    let canonical = match key.as_str() {
        "seq" => "sequential",
        "dc" => "divide_conquer",
        "vertical" => "vertical_link",
        other => other,
    };
    Ok(Variant::parse(canonical)?)
}

/// Resolves flags, config file and environment into a validated strategy.
pub fn growth_config(flags: &GrowthArgs) -> Result<(StrategyConfig, GrowthArgs)> {
    let a = layered(flags, flags.config.as_deref())?;
    let variant = parse_variant(a.variant.as_deref().context("missing growth variant")?)?;
    let p = a.p.unwrap_or(0.75);
    let trials = a.trials.unwrap_or(1000);
    config::check_probability(p)?;
    config::check_trials(trials)?;
    let seed = match a.seed {
        Some(s) => s,
        None => config::env_seed()?.unwrap_or(0),
    };
    let mut cfg = StrategyConfig::new(variant, p, trials, seed);
    if let Some(t) = a.gate_time {
        ensure!(t > 0.0 && t.is_finite(), "gate time must be positive");
        cfg = cfg.with_gate_time(t);
    }
    match variant {
        Variant::Sequential => {
            if let Some(l) = a.initial_length {
                cfg.initial_length = l;
            }
            cfg.max_rounds = a.max_rounds;
            match (a.length, a.rounds) {
                (Some(l), _) => cfg = cfg.with_target(l),
                (None, Some(k)) => cfg = cfg.with_rounds(k),
                (None, None) => bail!("sequential growth needs --L or --rounds"),
            }
        }
        Variant::Merge => {
            cfg = cfg.with_target(a.length.context("merge growth needs --L")?);
        }
        Variant::DivideConquer => {
            cfg = cfg.with_qubits(a.qubits.unwrap_or(1 << 16));
            match (a.rounds, a.length) {
                (Some(k), _) => cfg = cfg.with_rounds(k),
                (None, Some(l)) => cfg = cfg.with_target(l),
                (None, None) => bail!("divide-conquer growth needs --rounds or --L"),
            }
        }
        Variant::VerticalLink => {}
    }
    cfg.validate()?;
    Ok((cfg, a))
}

/// Aggregate CSV for a growth run; identical bytes for identical (config, seed).
pub fn growth_report(cfg: &StrategyConfig, threads: Option<usize>) -> Result<(String, String, Vec<growth::TrialRecord>)> {
    let (records, stats) = driver::simulate(cfg, threads)?;
    let point = growth::analytic_point(cfg)?;
    let rows = growth::compare_to_analytic(&stats, &point)?;
    Ok((output::growth_csv(&stats, &point, &rows)?, output::comparison_csv(&rows)?, records))
}

pub fn cmd_growth(flags: &GrowthArgs, out: &mut dyn Write) -> Result<i32> {
    let (cfg, a) = growth_config(flags)?;
    let (records, stats) = driver::simulate(&cfg, a.threads)?;
    let point = growth::analytic_point(&cfg)?;
    let rows = growth::compare_to_analytic(&stats, &point)?;
    writeln!(
        out,
        "growth {} p = {} trials = {} seed = {}",
        cfg.variant, cfg.p, cfg.trials, cfg.master_seed
    )?;
    writeln!(out, "{:<16} {:>16} {:>14} {:>14}", "metric", "mean", "stderr", "ci95")?;
    for name in ["ops", "time", "consumed", "wasted", "final_length", "structure", "chains"] {
        if let Some(m) = stats.metric(name) {
            writeln!(out, "{:<16} {:>16.6} {:>14.6} {:>14.6}", name, m.mean, m.stderr, m.ci95)?;
        }
    }
    writeln!(out, "reached fraction: {}", stats.reached_fraction)?;
    writeln!(out, "qubits conserved: {}", stats.conserved)?;
    writeln!(out, "{:<16} {:>16} {:>16} {:>10} {:>10}  status", "prediction", "empirical", "analytic", "z", "relative")?;
    for r in &rows {
        writeln!(
            out,
            "{:<16} {:>16.6} {:>16.6} {:>10.3} {:>10.2e}  {}",
            r.metric, r.empirical, r.analytic, r.z, r.relative, r.status
        )?;
    }
    let csv = output::growth_csv(&stats, &point, &rows)?;
    match &a.csv {
        Some(path) => write_file(path, &csv)?,
        None => write!(out, "{csv}")?,
    }
    if let Some(path) = &a.jsonl {
        let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        output::write_trials_jsonl(std::io::BufWriter::new(f), &cfg, &records)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------- scaling

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingArgs {
    /// Comma-separated series (dc, merge, seq, dc-serial, or any reference name); default all
    #[arg(long, value_delimiter = ',')]
    pub series: Option<Vec<String>>,
    /// ops | time
    #[arg(long)]
    pub figure: Option<String>,
    /// Success probability for the strategy series (default 0.75)
    #[arg(long)]
    pub p: Option<f64>,
    /// Smallest length (default 5)
    #[arg(long)]
    pub l_min: Option<f64>,
    /// Largest length (default 400)
    #[arg(long)]
    pub l_max: Option<f64>,
    /// Length step (default 5)
    #[arg(long)]
    pub l_step: Option<f64>,
    /// Explicit comma-separated lengths (overrides the range)
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<f64>>,
    /// Table output (default: stdout)
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// SVG line plot output
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Logarithmic value axis in the plot
    #[arg(long)]
    pub log_y: bool,
    /// JSON file with defaults for these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

pub fn parse_figure(text: &str) -> Result<Figure> {
    match text.to_ascii_lowercase().as_str() {
        "ops" | "operations" | "n" => Ok(Figure::Operations),
        "time" | "t" => Ok(Figure::Time),
        other => bail!("unknown figure `{other}`; expected ops or time"),
    }
}

fn canonical_series(name: &str) -> &str {
    match name {
        "dc" => "divide-conquer",
        "dc-serial" => "divide-conquer-serial",
        "seq" => "sequential",
        other => other,
    }
}

pub fn figure_name(fig: Figure) -> &'static str {
    match fig {
        Figure::Operations => "ops",
        Figure::Time => "time",
    }
}

/// Table rows for the requested series; reference laws outside the figure set are evaluated directly.
pub fn scaling_table(fig: Figure, series: Option<&[String]>, lengths: &[f64], p: f64) -> Result<Vec<FigurePoint>> {
    config::check_probability(p)?;
    let all = analytics::figure_series(fig, lengths, p)?;
    let Some(wanted) = series else {
        return Ok(all);
    };
    let mut known: Vec<String> = all.iter().map(|pt| pt.series.clone()).collect();
    known.dedup();
    let mut probe = analytics::figure_series(fig, &[1e6], p)?.into_iter().map(|pt| pt.series).collect::<Vec<_>>();
    known.append(&mut probe);
    let mut out = Vec::new();
    for raw in wanted {
        let name = canonical_series(raw.trim());
        if known.iter().any(|k| k == name) {
            out.extend(all.iter().filter(|pt| pt.series == name).cloned());
        } else if analytics::REFERENCE_SERIES.contains(&name) {
            let s = analytics::reference_series(name)?;
            for &l in lengths {
                let value = s.eval(l)?;
                out.push(FigurePoint { l, series: name.to_string(), value });
            }
        } else {
            bail!(
                "unknown series `{raw}`; known: dc, merge, seq, dc-serial, {}",
                analytics::REFERENCE_SERIES.join(", ")
            );
        }
    }
    out.sort_by(|a, b| a.l.total_cmp(&b.l));
    Ok(out)
}

/// First length where series `b` drops below `a`, interpolated between table rows.
pub fn crossover_from_table(points: &[FigurePoint], a: &str, b: &str) -> Option<f64> {
    let mut by_l: BTreeMap<u64, (f64, Option<f64>, Option<f64>)> = BTreeMap::new();
    for pt in points {
        let e = by_l.entry(pt.l.to_bits()).or_insert((pt.l, None, None));
        if pt.series == a {
            e.1 = Some(pt.value);
        } else if pt.series == b {
            e.2 = Some(pt.value);
        }
    }
    let mut rows: Vec<(f64, f64)> = by_l
        .values()
        .filter_map(|&(l, x, y)| Some((l, x? - y?)))
        .collect();
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));
    rows.windows(2).find_map(|w| {
        let ((l0, d0), (l1, d1)) = (w[0], w[1]);
        (d0 < 0.0 && d1 >= 0.0).then(|| l0 + (l1 - l0) * (-d0) / (d1 - d0))
    })
}

fn lengths_of(a: &ScalingArgs) -> Result<Vec<f64>> {
    if let Some(ls) = &a.lengths {
        ensure!(!ls.is_empty(), "empty length list");
        return Ok(ls.clone());
    }
    let (lo, hi, step) = (a.l_min.unwrap_or(5.0), a.l_max.unwrap_or(400.0), a.l_step.unwrap_or(5.0));
    ensure!(step > 0.0 && lo <= hi && lo.is_finite() && hi.is_finite(), "bad length range");
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

pub fn scaling_csv(fig: Figure, points: &[FigurePoint]) -> Result<String> {
    output::rows_csv(
        &output::SCALING_COLUMNS,
        points.iter().map(|pt| {
            vec![figure_name(fig).to_string(), pt.l.to_string(), pt.series.clone(), pt.value.to_string()]
        }),
    )
}

pub fn cmd_scaling(flags: &ScalingArgs, out: &mut dyn Write) -> Result<i32> {
    let a = layered(flags, flags.config.as_deref())?;
    let fig = parse_figure(a.figure.as_deref().unwrap_or("ops"))?;
    let p = a.p.unwrap_or(0.75);
    let lengths = lengths_of(&a)?;
    let points = scaling_table(fig, a.series.as_deref(), &lengths, p)?;
    let csv = scaling_csv(fig, &points)?;
    match &a.csv {
        Some(path) => {
            write_file(path, &csv)?;
            writeln!(out, "{} rows written to {}", points.len(), path.display())?;
        }
        None => write!(out, "{csv}")?,
    }
    if fig == Figure::Operations {
        if let Some(l) = crossover_from_table(&points, "divide-conquer", "merge") {
            eprintln!("divide-conquer overtakes merge at L = {l:.1}");
        }
    }
    if let Some(path) = &a.svg {
        let mut names: Vec<String> = Vec::new();
        for pt in &points {
            if !names.contains(&pt.series) {
                names.push(pt.series.clone());
            }
        }
        let plot = Plot {
            title: format!(
                "{} per chain, p = {p}",
                if fig == Figure::Operations { "entangling operations" } else { "time" }
            ),
            x_label: "chain length L".into(),
            y_label: if fig == Figure::Operations { "N".into() } else { "T / t".into() },
            log_y: a.log_y,
            series: names
                .into_iter()
                .map(|name| Series {
                    points: points.iter().filter(|pt| pt.series == name).map(|pt| (pt.l, pt.value)).collect(),
                    name,
                })
                .collect(),
        };
        write_file(path, &plot.to_svg())?;
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_aliases() {
        assert_eq!(parse_variant("vertical").unwrap(), Variant::VerticalLink);
        assert_eq!(parse_variant("dc").unwrap(), Variant::DivideConquer);
        assert_eq!(parse_variant("divide-conquer").unwrap(), Variant::DivideConquer);
        assert!(parse_variant("spiral").is_err());
    }

    #[test]
    fn single_series_single_length_is_one_row() {
        let pts = scaling_table(Figure::Operations, Some(&["merge".to_string()]), &[40.0], 0.75).unwrap();
        assert_eq!(pts.len(), 1);
        let csv = scaling_csv(Figure::Operations, &pts).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(scaling_table(Figure::Operations, Some(&["nope".to_string()]), &[40.0], 0.75).is_err());
        let paper = scaling_table(Figure::Operations, Some(&["paper-16L-50".to_string()]), &[10.0], 0.5).unwrap();
        assert_eq!(paper[0].value, 110.0);
    }

    #[test]
    fn crossover_interpolates() {
        let pt = |l: f64, s: &str, v: f64| FigurePoint { l, series: s.into(), value: v };
        let pts = vec![pt(1.0, "a", 0.0), pt(1.0, "b", 2.0), pt(2.0, "a", 4.0), pt(2.0, "b", 2.0)];
        assert_eq!(crossover_from_table(&pts, "a", "b"), Some(1.5));
        assert_eq!(crossover_from_table(&pts, "b", "a"), None);
    }
}
