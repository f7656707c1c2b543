//! Parallel growth trials with output independent of the thread count.

use anyhow::{Context, Result};
use qubus_core::growth::{self, GrowthStats, StrategyConfig, TrialRecord};
use rayon::prelude::*;

/// Runs every trial on a pool of `threads` workers (all cores when `None`).
/// Records come back in index order, so the aggregate is the same for any pool size.
pub fn run_trials(config: &StrategyConfig, threads: Option<usize>) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .context("building the worker pool")?;
    let records = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|i| growth::run_trial(config, i))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(records)
}

pub fn simulate(config: &StrategyConfig, threads: Option<usize>) -> Result<(Vec<TrialRecord>, GrowthStats)> {
    let records = run_trials(config, threads)?;
    let stats = growth::summarize(config, &records)?;
    Ok((records, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use qubus_core::growth::Variant;

    #[test]
    fn matches_serial_engine() {
        let cfg = StrategyConfig::new(Variant::Merge, 0.8, 200, 5).with_target(30);
        let (recs, stats) = simulate(&cfg, Some(3)).unwrap();
        assert_eq!(recs, growth::run_trials(&cfg).unwrap());
        assert_eq!(stats, growth::simulate(&cfg).unwrap());
    }
}
