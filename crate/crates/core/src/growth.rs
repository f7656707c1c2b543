//! Seeded Monte Carlo replicas of the chain-growth strategies.
//!
//! Every trial draws from its own ChaCha stream keyed by `(master_seed, index)`,
//! so a trial's record depends only on the config and its index. Aggregation
//! walks the records in index order with a fixed pairwise merge tree.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::analytics::{self, dc_length};
use crate::error::{Error, Result};
use crate::math::sqrt;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Rows with `|z|` above this are flagged.
pub const FLAG_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Sequential,
    Merge,
    DivideConquer,
    VerticalLink,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Sequential,
        Variant::Merge,
        Variant::DivideConquer,
        Variant::VerticalLink,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Sequential => "sequential",
            Variant::Merge => "merge",
            Variant::DivideConquer => "divide_conquer",
            Variant::VerticalLink => "vertical_link",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let key = text.trim().to_ascii_lowercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown growth variant `{text}`")))
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Qubit-cost rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Accounting {
    /// Dangling-bond qubits prepared before the first link attempt (both chains).
    pub vertical_up_front: u64,
    /// Extra dangling-bond qubits per failed link attempt.
    pub vertical_per_failure: u64,
    /// Restart a collapsed sequential chain from a fresh qubit without a gate attempt.
    pub reseed_free: bool,
}

impl Default for Accounting {
    fn default() -> Self {
        Accounting {
            vertical_up_front: 4,
            vertical_per_failure: 2,
            reseed_free: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub variant: Variant,
    pub p: f64,
    /// Time units per entangling attempt.
    pub gate_time: f64,
    pub target_length: Option<u64>,
    pub rounds: Option<u32>,
    /// Population size for divide-and-conquer.
    pub initial_qubits: Option<u64>,
    /// Starting length of the sequential chain.
    pub initial_length: u64,
    /// Per-trial cap on sequential rounds.
    pub max_rounds: Option<u64>,
    pub trials: u64,
    pub master_seed: u64,
    pub accounting: Accounting,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            variant: Variant::Sequential,
            p: 0.75,
            gate_time: 1.0,
            target_length: None,
            rounds: None,
            initial_qubits: None,
            initial_length: 1,
            max_rounds: None,
            trials: 1000,
            master_seed: 0,
            accounting: Accounting::default(),
        }
    }
}

impl StrategyConfig {
    pub fn new(variant: Variant, p: f64, trials: u64, master_seed: u64) -> Self {
        StrategyConfig {
            variant,
            p,
            trials,
            master_seed,
            ..StrategyConfig::default()
        }
    }

    pub fn with_target(mut self, length: u64) -> Self {
        self.target_length = Some(length);
        self
    }

    pub fn with_rounds(mut self, rounds: u32) -> Self {
        self.rounds = Some(rounds);
        self
    }

    pub fn with_qubits(mut self, n: u64) -> Self {
        self.initial_qubits = Some(n);
        self
    }

    pub fn with_gate_time(mut self, t: f64) -> Self {
        self.gate_time = t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p must lie in (0, 1], got {}",
                self.p
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be positive".into()));
        }
        if !(self.gate_time.is_finite() && self.gate_time >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gate time must be finite and non-negative, got {}",
                self.gate_time
            )));
        }
        match self.variant {
            Variant::Sequential => {
                if self.initial_length == 0 {
                    return Err(Error::InvalidParameter("initial length must be at least 1".into()));
                }
                match (self.target_length, self.rounds) {
                    (Some(_), Some(_)) => Err(Error::InvalidParameter(
                        "give either a target length or a round count, not both".into(),
                    )),
                    (None, None) => Err(Error::InvalidParameter(
                        "sequential growth needs a target length or a round count".into(),
                    )),
                    (Some(l), None) => {
                        if l < self.initial_length {
                            Err(Error::InvalidParameter(format!(
                                "target {l} below initial length {}",
                                self.initial_length
                            )))
                        } else if self.p <= 0.5 && self.max_rounds.is_none() {
                            Err(Error::NonGrowing(self.p))
                        } else {
                            Ok(())
                        }
                    }
                    (None, Some(_)) => Ok(()),
                }
            }
            Variant::Merge => {
                let l = self
                    .target_length
                    .ok_or_else(|| Error::InvalidParameter("merge needs a target length".into()))?;
                let critical = analytics::critical_length(self.p)?;
                if (l as f64) <= critical {
                    return Err(Error::NoGrowth {
                        length: l as f64,
                        critical,
                    });
                }
                Ok(())
            }
            Variant::DivideConquer => {
                let n = self.initial_qubits.ok_or_else(|| {
                    Error::InvalidParameter("divide-and-conquer needs an initial qubit count".into())
                })?;
                if n == 0 {
                    return Err(Error::InvalidParameter("initial qubit count must be positive".into()));
                }
                self.dc_rounds().map(|_| ())
            }
            Variant::VerticalLink => Ok(()),
        }
    }

    fn dc_rounds(&self) -> Result<u32> {
        match (self.rounds, self.target_length) {
            (Some(k), _) if k > 62 => Err(Error::InvalidParameter(format!("round count {k} too large"))),
            (Some(k), _) => Ok(k),
            (None, Some(l)) => analytics::dc_rounds_for(l),
            (None, None) => Err(Error::InvalidParameter(
                "divide-and-conquer needs a round count or a dyadic target length".into(),
            )),
        }
    }
}

/// Generator for trial `index`: ChaCha8 keyed by the master seed, stream = index.
pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u64,
    pub ops: u64,
    pub time: f64,
    pub consumed: u64,
    pub wasted: u64,
    pub final_length: u64,
    /// Qubits held in the finished structure.
    pub structure: u64,
    /// Surviving chains (divide-and-conquer), otherwise 0 or 1.
    pub chains: u64,
    /// Whether the stopping target was met (false when a round cap hit first).
    pub reached: bool,
}

impl TrialRecord {
    pub fn conserves(&self) -> bool {
        self.consumed == self.structure + self.wasted
    }
}

/// Run one replica. Valid configs only.
pub fn run_trial(config: &StrategyConfig, index: u64) -> Result<TrialRecord> {
    config.validate()?;
    let mut rng = trial_rng(config.master_seed, index);
    let mut rec = match config.variant {
        Variant::Sequential => sequential_trial(config, &mut rng),
        Variant::Merge => merge_trial(config, &mut rng)?,
        Variant::DivideConquer => dc_trial(config, &mut rng)?,
        Variant::VerticalLink => vertical_trial(config, &mut rng),
    };
    rec.index = index;
    Ok(rec)
}

fn attempt<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

fn sequential_trial<R: Rng + ?Sized>(cfg: &StrategyConfig, rng: &mut R) -> TrialRecord {
    let mut length = cfg.initial_length;
    let mut consumed = cfg.initial_length;
    let mut ops = 0u64;
    let mut rounds = 0u64;
    let cap = cfg.max_rounds.unwrap_or(u64::MAX);
    let done = |length: u64, rounds: u64| match (cfg.target_length, cfg.rounds) {
        (Some(l), _) => length >= l,
        (None, Some(k)) => rounds >= k as u64,
        (None, None) => true,
    };
    while !done(length, rounds) && rounds < cap {
        if length == 0 {
            // collapsed chain restarts from one fresh qubit
            length = 1;
            consumed += 1;
            if cfg.accounting.reseed_free {
                continue;
            }
        } else {
            consumed += 1;
            ops += 1;
            if attempt(rng, cfg.p) {
                length += 1;
            } else {
                length -= 1;
            }
        }
        rounds += 1;
    }
    TrialRecord {
        index: 0,
        ops,
        time: ops as f64 * cfg.gate_time,
        consumed,
        wasted: consumed - length,
        final_length: length,
        structure: length,
        chains: u64::from(length > 0),
        reached: done(length, rounds),
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Piece {
    length: u64,
    ops: u64,
    time: f64,
    consumed: u64,
}

/// Fuse two chains, retrying with both ends shrinking by one on failure.
fn join_with_retry<R: Rng + ?Sized>(a: Piece, b: Piece, p: f64, t: f64, rng: &mut R) -> Piece {
    let (mut la, mut lb) = (a.length, b.length);
    let mut ops = a.ops + b.ops;
    let mut attempts = 0u64;
    let length = loop {
        if la == 0 || lb == 0 {
            break la.max(lb);
        }
        attempts += 1;
        if attempt(rng, p) {
            break la + lb - 1;
        }
        la -= 1;
        lb -= 1;
    };
    ops += attempts;
    Piece {
        length,
        ops,
        time: a.time.max(b.time) + attempts as f64 * t,
        consumed: a.consumed + b.consumed,
    }
}

/// Build one chain of length `dc_length(level)` by pairing halves and
/// discarding both on a failed fusion.
fn build_dyadic<R: Rng + ?Sized>(level: u32, p: f64, t: f64, rng: &mut R) -> Piece {
    if level == 0 {
        return Piece {
            length: 1,
            ops: 0,
            time: 0.0,
            consumed: 1,
        };
    }
    let target = dc_length(level);
    let mut acc = Piece::default();
    loop {
        let a = build_dyadic(level - 1, p, t, rng);
        let b = build_dyadic(level - 1, p, t, rng);
        acc.ops += a.ops + b.ops + 1;
        acc.consumed += a.consumed + b.consumed;
        acc.time += a.time.max(b.time) + t;
        if attempt(rng, p) {
            acc.length = target;
            return acc;
        }
    }
}

/// Dyadic leaf level and number of merge levels used for a merge target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergePlan {
    pub critical: f64,
    /// Level `j` with leaf length `2^{j−1}+1`.
    pub leaf_level: u32,
    pub leaf_length: u64,
    /// Number of hierarchical merge levels.
    pub merge_levels: u32,
    /// Expected length `L_c + 2^J (L0 − L_c)` of the finished chain.
    pub nominal_length: f64,
}

pub fn merge_plan(p: f64, target: u64) -> Result<MergePlan> {
    let critical = analytics::critical_length(p)?;
    if (target as f64) <= critical {
        return Err(Error::NoGrowth {
            length: target as f64,
            critical,
        });
    }
    let l0 = analytics::minimal_length(p)?;
    let mut leaf_level = 1;
    while dc_length(leaf_level) < l0 {
        leaf_level += 1;
    }
    let leaf_length = dc_length(leaf_level);
    let excess = leaf_length as f64 - critical;
    let mut merge_levels = 0u32;
    while critical + excess * ((1u64 << merge_levels) as f64) < (target as f64) {
        merge_levels += 1;
        if merge_levels > 40 {
            return Err(Error::InvalidParameter(format!("target {target} too large")));
        }
    }
    Ok(MergePlan {
        critical,
        leaf_level,
        leaf_length,
        merge_levels,
        nominal_length: critical + excess * (1u64 << merge_levels) as f64,
    })
}

fn merge_tree<R: Rng + ?Sized>(level: u32, plan: &MergePlan, p: f64, t: f64, rng: &mut R) -> Piece {
    if level == 0 {
        return build_dyadic(plan.leaf_level, p, t, rng);
    }
    let a = merge_tree(level - 1, plan, p, t, rng);
    let b = merge_tree(level - 1, plan, p, t, rng);
    join_with_retry(a, b, p, t, rng)
}

fn merge_trial<R: Rng + ?Sized>(cfg: &StrategyConfig, rng: &mut R) -> Result<TrialRecord> {
    let target = cfg.target_length.unwrap_or(0);
    let plan = merge_plan(cfg.p, target)?;
    let piece = merge_tree(plan.merge_levels, &plan, cfg.p, cfg.gate_time, rng);
    Ok(TrialRecord {
        index: 0,
        ops: piece.ops,
        time: piece.time,
        consumed: piece.consumed,
        wasted: piece.consumed - piece.length,
        final_length: piece.length,
        structure: piece.length,
        chains: u64::from(piece.length > 0),
        reached: piece.length >= target,
    })
}

fn dc_trial<R: Rng + ?Sized>(cfg: &StrategyConfig, rng: &mut R) -> Result<TrialRecord> {
    let n = cfg.initial_qubits.unwrap_or(0);
    let rounds = cfg.dc_rounds()?;
    let mut chains = n;
    let mut ops = 0u64;
    for _ in 0..rounds {
        let pairs = chains / 2;
        ops += pairs;
        chains = if pairs == 0 {
            0
        } else {
            let dist = Binomial::new(pairs, cfg.p)
                .map_err(|e| Error::InvalidParameter(format!("{e}")))?;
            dist.sample(rng)
        };
    }
    let length = dc_length(rounds);
    let structure = chains * length;
    Ok(TrialRecord {
        index: 0,
        ops,
        time: rounds as f64 * cfg.gate_time,
        consumed: n,
        wasted: n - structure,
        final_length: if chains > 0 { length } else { 0 },
        structure,
        chains,
        reached: chains > 0,
    })
}

fn vertical_trial<R: Rng + ?Sized>(cfg: &StrategyConfig, rng: &mut R) -> TrialRecord {
    let acc = cfg.accounting;
    let mut attempts = 1u64;
    while !attempt(rng, cfg.p) {
        attempts += 1;
    }
    let consumed = acc.vertical_up_front + acc.vertical_per_failure * (attempts - 1);
    // the two dangling qubits measured on success leave half the up-front pair in place
    let structure = acc.vertical_up_front / 2;
    TrialRecord {
        index: 0,
        ops: attempts,
        time: attempts as f64 * cfg.gate_time,
        consumed,
        wasted: consumed - structure,
        final_length: 1,
        structure,
        chains: 1,
        reached: true,
    }
}

/// Running count, mean and centred second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn single(x: f64) -> Self {
        Moments {
            count: 1,
            mean: x,
            m2: 0.0,
        }
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let n = self.count + other.count;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean - self.mean;
        Moments {
            count: n,
            mean: self.mean + delta * nb / n as f64,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n as f64,
        }
    }

    /// Pairwise tree over `values` in order.
    pub fn from_slice(values: &[f64]) -> Moments {
        match values.len() {
            0 => Moments::default(),
            1 => Moments::single(values[0]),
            len => {
                let (a, b) = values.split_at(len / 2);
                Moments::from_slice(a).merge(Moments::from_slice(b))
            }
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample variance.
    pub variance: f64,
    pub stderr: f64,
    /// 95% confidence half-width.
    pub ci95: f64,
}

impl MetricSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let m = Moments::from_slice(values);
        let stderr = if m.count == 0 {
            0.0
        } else {
            sqrt(m.variance() / m.count as f64)
        };
        MetricSummary {
            mean: m.mean,
            variance: m.variance(),
            stderr,
            ci95: Z95 * stderr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthStats {
    pub config: StrategyConfig,
    pub trials: u64,
    pub ops: MetricSummary,
    pub time: MetricSummary,
    pub consumed: MetricSummary,
    pub wasted: MetricSummary,
    pub final_length: MetricSummary,
    pub structure: MetricSummary,
    pub chains: MetricSummary,
    pub reached_fraction: f64,
    pub conserved: bool,
}

impl GrowthStats {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        Some(match name {
            "ops" => &self.ops,
            "time" => &self.time,
            "consumed" => &self.consumed,
            "wasted" => &self.wasted,
            "final_length" => &self.final_length,
            "structure" => &self.structure,
            "chains" => &self.chains,
            _ => return None,
        })
    }
}

/// Aggregate records. They must be sorted by index.
pub fn summarize(config: &StrategyConfig, records: &[TrialRecord]) -> Result<GrowthStats> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("no trial records".into()));
    }
    if records.windows(2).any(|w| w[0].index >= w[1].index) {
        return Err(Error::InvalidParameter("records are not in index order".into()));
    }
    let col = |f: fn(&TrialRecord) -> f64| -> MetricSummary {
        let values: Vec<f64> = records.iter().map(f).collect();
        MetricSummary::from_values(&values)
    };
    Ok(GrowthStats {
        config: config.clone(),
        trials: records.len() as u64,
        ops: col(|r| r.ops as f64),
        time: col(|r| r.time),
        consumed: col(|r| r.consumed as f64),
        wasted: col(|r| r.wasted as f64),
        final_length: col(|r| r.final_length as f64),
        structure: col(|r| r.structure as f64),
        chains: col(|r| r.chains as f64),
        reached_fraction: records.iter().filter(|r| r.reached).count() as f64 / records.len() as f64,
        conserved: records.iter().all(TrialRecord::conserves),
    })
}

pub fn run_trials(config: &StrategyConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    (0..config.trials).map(|i| run_trial(config, i)).collect()
}

/// All trials in index order on the calling thread.
pub fn simulate(config: &StrategyConfig) -> Result<GrowthStats> {
    let records = run_trials(config)?;
    summarize(config, &records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JoinPairStats {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

/// Mean length after fusing two length-`l` chains with retries until
/// success or exhaustion.
pub fn join_pair_experiment(p: f64, l: u64, trials: u64, seed: u64) -> Result<JoinPairStats> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 1], got {p}")));
    }
    if l == 0 || trials == 0 {
        return Err(Error::InvalidParameter("length and trials must be positive".into()));
    }
    let chain = Piece {
        length: l,
        ..Piece::default()
    };
    let values: Vec<f64> = (0..trials)
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            join_with_retry(chain, chain, p, 1.0, &mut rng).length as f64
        })
        .collect();
    let summary = MetricSummary::from_values(&values);
    Ok(JoinPairStats {
        mean: summary.mean,
        stderr: summary.stderr,
        trials,
    })
}

/// Closed-form predictions matching one config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub variant: Variant,
    pub p: f64,
    /// Length the predictions refer to.
    pub l: f64,
    pub metrics: Vec<(String, f64)>,
}

impl ScalingPoint {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }
}

/// Empirical metric a prediction label refers to: the part before any `@`.
pub fn metric_of(label: &str) -> &str {
    label.split('@').next().unwrap_or(label)
}

/// `Σ_{j=0}^{k−1} C[j]/2 = (n/2)(1−(p/2)^k)/(1−p/2)`, one attempt per pair in every round.
pub fn dc_ops_all_rounds(k: u32, p: f64, n: f64) -> f64 {
    let h = p / 2.0;
    (n / 2.0) * (1.0 - crate::math::powi(h, k as i32)) / (1.0 - h)
}

pub fn analytic_point(config: &StrategyConfig) -> Result<ScalingPoint> {
    config.validate()?;
    let p = config.p;
    let t = config.gate_time;
    let m = |name: &str, v: f64| (String::from(name), v);
    let (l, metrics) = match config.variant {
        Variant::Sequential => match (config.target_length, config.rounds) {
            (Some(target), _) => {
                let l = target as f64 - config.initial_length as f64 + 1.0;
                let s = analytics::seq_scaling(l, p, t)?;
                (target as f64, alloc::vec![m("ops", s.ops), m("time", s.time)])
            }
            (None, Some(k)) => {
                let l = config.initial_length as f64 + k as f64 * (2.0 * p - 1.0);
                (l, alloc::vec![m("final_length", l), m("ops", k as f64)])
            }
            (None, None) => unreachable!("validated"),
        },
        Variant::Merge => {
            let plan = merge_plan(p, config.target_length.unwrap_or(0))?;
            let s = analytics::merge_scaling(plan.nominal_length, p, plan.leaf_length as f64, t)?;
            (
                plan.nominal_length,
                alloc::vec![
                    m("ops", s.n_floor),
                    m("time", s.t_closed),
                    m("final_length", plan.nominal_length)
                ],
            )
        }
        Variant::DivideConquer => {
            let k = config.dc_rounds()?;
            let n = config.initial_qubits.unwrap_or(0) as f64;
            let s = analytics::dc_scaling_k(k, p, n, t)?;
            (
                s.l as f64,
                alloc::vec![
                    m("chains", s.chains),
                    m("structure", s.qubits),
                    m("wasted", s.wasted),
                    m("ops@printed", s.ops_cumulative),
                    m("ops@all_rounds", dc_ops_all_rounds(k, p, n)),
                    m("time", s.time)
                ],
            )
        }
        Variant::VerticalLink => {
            let v = 2.0 * (1.0 / p + 1.0);
            (1.0, alloc::vec![m("consumed", v), m("ops", 1.0 / p)])
        }
    };
    Ok(ScalingPoint {
        variant: config.variant,
        p,
        l,
        metrics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Pass,
    Flag,
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowStatus::Pass => "pass",
            RowStatus::Flag => "flag",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub empirical: f64,
    pub stderr: f64,
    pub analytic: f64,
    pub z: f64,
    pub relative: f64,
    pub status: RowStatus,
}

/// `(mean − analytic)/stderr`; exact agreement with zero spread gives 0.
pub fn z_score(mean: f64, stderr: f64, analytic: f64) -> f64 {
    let diff = mean - analytic;
    if diff == 0.0 {
        0.0
    } else if stderr == 0.0 {
        if diff.abs() <= 1e-9 * analytic.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        }
    } else {
        diff / stderr
    }
}

pub fn compare_to_analytic(stats: &GrowthStats, point: &ScalingPoint) -> Result<Vec<ComparisonRow>> {
    if stats.config.variant != point.variant || (stats.config.p - point.p).abs() > 1e-15 {
        return Err(Error::Mismatch(format!(
            "stats for {} at p = {} against prediction for {} at p = {}",
            stats.config.variant, stats.config.p, point.variant, point.p
        )));
    }
    point
        .metrics
        .iter()
        .map(|(name, analytic)| {
            let s = stats
                .metric(metric_of(name))
                .ok_or_else(|| Error::Mismatch(format!("no empirical metric `{name}`")))?;
            let z = z_score(s.mean, s.stderr, *analytic);
            let relative = if *analytic == 0.0 {
                s.mean
            } else {
                (s.mean - analytic) / analytic.abs()
            };
            Ok(ComparisonRow {
                metric: name.clone(),
                empirical: s.mean,
                stderr: s.stderr,
                analytic: *analytic,
                z,
                relative,
                status: if z.abs() <= FLAG_Z {
                    RowStatus::Pass
                } else {
                    RowStatus::Flag
                },
            })
        })
        .collect()
}
