use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::InvalidParam(format!("unknown optimizer '{other}'"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

/// Which factorization the solver trains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// `Ĝ = H Hᵀ` with a width-3 bottleneck in `H`.
    #[default]
    Constrained,
    /// Unconstrained product of `d` square 3n×3n factors (ablation).
    Vanilla,
}

/// Optimization settings shared by every depth candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Standard deviation of the Gaussian factor initialization.
    pub init_scale: f64,
    /// Reweighting period λ.
    pub reweight_period: usize,
    /// Warm-up λ_warm before the first reweighting.
    pub warmup: usize,
    /// Disables reweighting entirely when false.
    pub reweight: bool,
    pub depth_candidates: Vec<usize>,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Width of the intermediate factors; `None` means 3n.
    pub hidden_width: Option<usize>,
    pub model: ModelKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            iterations: 5000,
            learning_rate: 1e-2,
            init_scale: 1e-3,
            reweight_period: 100,
            warmup: 1000,
            reweight: true,
            depth_candidates: vec![2, 4, 6, 8],
            seed: 0,
            optimizer: OptimizerKind::Adam,
            hidden_width: None,
            model: ModelKind::Constrained,
        }
    }
}

pub fn validate_depth(depth: usize) -> Result<()> {
    if depth < 2 || !depth.is_multiple_of(2) {
        Err(Error::InvalidDepth(depth))
    } else {
        Ok(())
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reweight_period == 0 {
            return Err(Error::InvalidParam("reweight period must be at least 1".into()));
        }
        if self.reweight && self.iterations > 0 && self.warmup >= self.iterations {
            return Err(Error::InvalidParam(format!(
                "warm-up ({}) must be shorter than the iteration budget ({})",
                self.warmup, self.iterations
            )));
        }
        if self.depth_candidates.is_empty() {
            return Err(Error::InvalidParam("no depth candidates".into()));
        }
        for &d in &self.depth_candidates {
            validate_depth(d)?;
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParam(format!("learning rate {}", self.learning_rate)));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidParam(format!("init scale {}", self.init_scale)));
        }
        if self.hidden_width == Some(0) {
            return Err(Error::InvalidParam("hidden width must be positive".into()));
        }
        Ok(())
    }

    /// True when reweighting runs at iteration `t` (0-based).
    pub fn reweights_at(&self, t: usize) -> bool {
        self.reweight && t >= self.warmup && (t - self.warmup).is_multiple_of(self.reweight_period)
    }

    /// Flat `key = value` text, one key per line.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "learning_rate = {}", self.learning_rate);
        let _ = writeln!(s, "init_scale = {}", self.init_scale);
        let _ = writeln!(s, "reweight_period = {}", self.reweight_period);
        let _ = writeln!(s, "warmup = {}", self.warmup);
        let _ = writeln!(s, "reweight = {}", self.reweight);
        let depths: Vec<String> = self.depth_candidates.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "depth_candidates = {}", depths.join(","));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "optimizer = {}", self.optimizer);
        if let Some(h) = self.hidden_width {
            let _ = writeln!(s, "hidden_width = {h}");
        }
        let _ = writeln!(
            s,
            "model = {}",
            match self.model {
                ModelKind::Constrained => "constrained",
                ModelKind::Vanilla => "vanilla",
            }
        );
        s
    }

    /// Applies one `key = value` setting. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidParam(format!("bad value '{v}' for {key}")))
        }
        match key {
            "iterations" => self.iterations = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "init_scale" => self.init_scale = num(key, value)?,
            "reweight_period" => self.reweight_period = num(key, value)?,
            "warmup" => self.warmup = num(key, value)?,
            "reweight" => self.reweight = num(key, value)?,
            "depth_candidates" => {
                self.depth_candidates = value
                    .split(',')
                    .map(|d| num(key, d.trim()))
                    .collect::<Result<_>>()?
            }
            "seed" => self.seed = num(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "hidden_width" => {
                self.hidden_width = match value {
                    "" | "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            "model" => {
                self.model = match value {
                    "constrained" => ModelKind::Constrained,
                    "vanilla" => ModelKind::Vanilla,
                    v => return Err(Error::InvalidParam(format!("unknown model '{v}'"))),
                }
            }
            _ => return Err(Error::InvalidParam(format!("unknown solver key '{key}'"))),
        }
        Ok(())
    }

    /// Parses text produced by [`to_kv`](Self::to_kv) on top of the defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = SolverConfig::default();
        for (key, value) in parse_kv(text)? {
            cfg.set(&key, &value)?;
        }
        Ok(cfg)
    }
}

/// Splits flat `key = value` text. Blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(k, l)| {
            let (key, value) = l
                .split_once('=')
                .ok_or_else(|| Error::InvalidParam(format!("config line {}: expected key = value", k + 1)))?;
            Ok((key.trim().to_string(), value.trim().to_string()))
        })
        .collect()
}
