//! Command parameters from a JSON file overlaid with command-line flags.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Environment variable holding the seed used when neither flags nor file give one.
pub const SEED_ENV: &str = "QUBUS_SEED";

/// Flags win over the file; unset flags (`None`, `false`) leave file values alone.
pub fn layered<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Path>) -> Result<T> {
    let Some(path) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut base: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    ensure!(base.is_object(), "{} must hold a JSON object", path.display());
    if let (Value::Object(dst), Value::Object(src)) = (&mut base, serde_json::to_value(flags)?) {
        for (k, v) in src {
            if !matches!(v, Value::Null | Value::Bool(false)) {
                dst.insert(k, v);
            }
        }
    }
    serde_json::from_value(base).with_context(|| format!("invalid settings in {}", path.display()))
}

pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => Ok(Some(s.trim().parse().with_context(|| format!("{SEED_ENV}=`{s}` is not a u64"))?)),
        Err(_) => Ok(None),
    }
}

pub fn check_probability(p: f64) -> Result<()> {
    ensure!(p > 0.0 && p <= 1.0, "p must lie in (0, 1], got {p}");
    Ok(())
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    ensure!(alpha > 0.0 && alpha.is_finite(), "alpha must be positive, got {alpha}");
    Ok(())
}

pub fn check_trials(trials: u64) -> Result<()> {
    ensure!(trials >= 1, "trials must be at least 1");
    Ok(())
}
