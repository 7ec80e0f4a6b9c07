//! Decoding methods, pseudo-reference schedules and grid specs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MbrError, Result};

/// Default number of bootstrap resamples per pruning step.
pub const DEFAULT_N_BOOT: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    /// No pruning: argmax over all hypotheses with the full reference list.
    Standard,
    /// Bootstrap confidence pruning with threshold `alpha`.
    Confidence { alpha: f64 },
    /// Drop the bottom `beta` proportion by expected utility each step.
    Rank { beta: f64 },
}

impl Method {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Method::Standard => Ok(()),
            Method::Confidence { alpha } if alpha > 0.0 && alpha <= 1.0 => Ok(()),
            Method::Confidence { alpha } => Err(MbrError::validation(format!(
                "alpha must be in (0, 1], got {alpha}"
            ))),
            Method::Rank { beta } if (0.0..1.0).contains(&beta) => Ok(()),
            Method::Rank { beta } => Err(MbrError::validation(format!(
                "beta must be in [0, 1), got {beta}"
            ))),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::Confidence { .. } => "confidence",
            Method::Rank { .. } => "rank",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            Method::Confidence { alpha } => Some(alpha),
            _ => None,
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match *self {
            Method::Rank { beta } => Some(beta),
            Method::Standard => Some(0.0),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Standard => write!(f, "standard"),
            Method::Confidence { alpha } => write!(f, "confidence:{alpha}"),
            Method::Rank { beta } => write!(f, "rank:{beta}"),
        }
    }
}

impl FromStr for Method {
    type Err = MbrError;

    /// `standard`, `confidence:<alpha>` or `rank:<beta>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse_num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| MbrError::validation(format!("bad number `{v}` in method `{s}`")))
        };
        let m = match s.split_once(':') {
            None if s == "standard" => Method::Standard,
            Some(("confidence", v)) => Method::Confidence {
                alpha: parse_num(v)?,
            },
            Some(("rank", v)) => Method::Rank { beta: parse_num(v)? },
            _ => {
                return Err(MbrError::validation(format!(
                    "unknown method `{s}` (expected standard, confidence:<alpha> or rank:<beta>)"
                )))
            }
        };
        m.validate()?;
        Ok(m)
    }
}

/// Strictly increasing pseudo-reference sample sizes r_1 < ... < r_T.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Schedule(Vec<usize>);

impl Schedule {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(MbrError::validation("schedule is empty"));
        }
        if sizes[0] == 0 {
            return Err(MbrError::validation("schedule sizes must be positive"));
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MbrError::validation(format!(
                "schedule must be strictly increasing: {sizes:?}"
            )));
        }
        Ok(Schedule(sizes))
    }

    /// `first`, doubling until `last` (inclusive; `last` is appended if the
    /// doubling overshoots it).
    pub fn doubling(first: usize, last: usize) -> Result<Self> {
        if first == 0 || first > last {
            return Err(MbrError::validation("doubling schedule needs 0 < first <= last"));
        }
        let mut sizes = vec![first];
        while *sizes.last().unwrap() < last {
            let next = (sizes.last().unwrap() * 2).min(last);
            sizes.push(next);
        }
        Schedule::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> usize {
        *self.0.last().expect("schedule is non-empty")
    }

    pub fn check_pool(&self, pool_len: usize, id: &str) -> Result<()> {
        if self.last() > pool_len {
            return Err(MbrError::validation(format!(
                "instance `{id}`: schedule needs {} pseudo-references but the pool has {pool_len}",
                self.last()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for Schedule {
    type Error = MbrError;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Schedule::new(v)
    }
}

impl From<Schedule> for Vec<usize> {
    fn from(s: Schedule) -> Self {
        s.0
    }
}

impl FromStr for Schedule {
    type Err = MbrError;
    fn from_str(s: &str) -> Result<Self> {
        let sizes = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| MbrError::validation(format!("bad schedule entry `{p}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Schedule::new(sizes)
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub method: Method,
    pub n_boot: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub trials: usize,
}

impl DecodeConfig {
    pub fn new(method: Method, schedule: Schedule) -> Self {
        DecodeConfig {
            method,
            n_boot: DEFAULT_N_BOOT,
            schedule,
            seed: 0,
            trials: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        if self.n_boot == 0 {
            return Err(MbrError::validation("n_boot must be >= 1"));
        }
        if self.trials == 0 {
            return Err(MbrError::validation("trials must be >= 1"));
        }
        Ok(())
    }
}

/// Rounds away binary noise accumulated by `start + i * step`.
fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// A comma list (`0.8,0.9`) or an inclusive range `start:stop:step`.
pub fn parse_float_grid(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    let bad = |p: &str| MbrError::validation(format!("bad grid value `{p}` in `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let start: f64 = start.trim().parse().map_err(|_| bad(start))?;
            let stop: f64 = stop.trim().parse().map_err(|_| bad(stop))?;
            let step: f64 = step.trim().parse().map_err(|_| bad(step))?;
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(MbrError::validation(format!("empty or invalid range `{s}`")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| tidy(start + i as f64 * step)).collect()
        }
        [_] => s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad(p)))
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(MbrError::validation(format!("bad grid `{s}`"))),
    };
    if grid.is_empty() {
        return Err(MbrError::validation("grid is empty"));
    }
    Ok(grid)
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    let v = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| MbrError::validation(format!("bad integer `{p}` in `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(MbrError::validation("list is empty"));
    }
    Ok(v)
}
