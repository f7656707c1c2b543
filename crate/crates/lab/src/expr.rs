//! Numeric arguments given as expressions, e.g. `sqrt(pi/8)`.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, ensure, Result};
use serde::{Deserialize, Serialize};

pub fn eval(text: &str) -> Result<f64> {
    let v = meval::eval_str(text).map_err(|e| anyhow!("cannot evaluate `{text}`: {e}"))?;
    ensure!(v.is_finite(), "`{text}` evaluates to {v}");
    Ok(v)
}

/// A number written literally in a config file or as an expression on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expr {
    Value(f64),
    Text(String),
}

impl Expr {
    pub fn value(&self) -> Result<f64> {
        match self {
            Expr::Value(v) => Ok(*v),
            Expr::Text(t) => eval(t),
        }
    }
}

impl FromStr for Expr {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        eval(s)?;
        Ok(Expr::Text(s.to_string()))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Value(v) => write!(f, "{v}"),
            Expr::Text(t) => f.write_str(t),
        }
    }
}
