//! Repair uncertainty model: multimodal repair-mode tables with diminishing
//! returns, Weibull-distributed repair times, normally distributed resource
//! requirements, and seeded scenario sampling.
//!
//! Sampling is deterministic given the seed. The generator is pinned to
//! `ChaCha8Rng`; repair times come from the Weibull inverse CDF applied to a
//! uniform draw and resource levels from a Box-Muller transform of two
//! uniform draws. Per scenario, lines are visited in table order and modes
//! ascending, consuming three uniforms per (line, mode).

use crate::netgraph::LineKey;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UncertaintyError {
    #[error("parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("sigma must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("saturation window ({0}, {1}) is empty or non-positive")]
    BadSaturation(f64, f64),
    #[error("line {line}: modes must have strictly increasing resource and strictly decreasing repair scale (diminishing returns)")]
    NonDiminishing { line: LineKey },
    #[error("line {line}: no repair modes")]
    EmptyModes { line: LineKey },
    #[error("scenario count must be at least 1")]
    NoScenarios,
    #[error("horizon must be at least 1")]
    BadHorizon,
    #[error("budget vector has {got} steps, horizon needs {need}")]
    BadBudgetLength { got: usize, need: usize },
    #[error("scenario probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("scenario {id} key set differs from scenario 0")]
    InconsistentKeys { id: usize },
    #[error("scenario {id}: duration {duration} outside [1, {horizon}]")]
    BadDuration { id: usize, duration: u32, horizon: u32 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Mean repair time of a Weibull distribution: `scale * gamma(1 + 1/shape)`.
pub fn mttr(scale: f64, shape: f64) -> Result<f64, UncertaintyError> {
    if !(scale > 0.0) {
        return Err(UncertaintyError::NonPositive {
            name: "scale",
            value: scale,
        });
    }
    if !(shape > 0.0) {
        return Err(UncertaintyError::NonPositive {
            name: "shape",
            value: shape,
        });
    }
    Ok(scale * statrs::function::gamma::gamma(1.0 + 1.0 / shape))
}

/// Weibull inverse CDF applied to a uniform draw `u in [0, 1)`.
pub fn weibull_from_uniform(scale: f64, shape: f64, u: f64) -> f64 {
    scale * (-(1.0 - u).ln()).powf(1.0 / shape)
}

/// Standard normal via the Box-Muller transform of two uniforms.
pub fn normal_from_uniforms(u1: f64, u2: f64) -> f64 {
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    r * (std::f64::consts::TAU * u2).cos()
}

/// One row of the diminishing-returns look-up: assigning `mean_resource`
/// units yields a Weibull repair time with the given scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RepairMode {
    pub mean_resource: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineModes {
    pub line: LineKey,
    pub modes: Vec<RepairMode>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepairModeTable {
    pub lines: Vec<LineModes>,
    /// Weibull shape, shared across lines and modes.
    pub shape: f64,
    /// Standard deviation of the required-resource draw.
    pub sigma: f64,
    /// (min_resource, max_resource) clamp for sampled resource levels.
    pub saturation: (f64, f64),
}

impl RepairModeTable {
    pub fn validate(&self) -> Result<(), UncertaintyError> {
        if !(self.shape > 0.0) {
            return Err(UncertaintyError::NonPositive {
                name: "shape",
                value: self.shape,
            });
        }
        if self.sigma < 0.0 {
            return Err(UncertaintyError::NegativeSigma(self.sigma));
        }
        let (lo, hi) = self.saturation;
        if !(lo > 0.0) || !(hi > lo) {
            return Err(UncertaintyError::BadSaturation(lo, hi));
        }
        for lm in &self.lines {
            if lm.modes.is_empty() {
                return Err(UncertaintyError::EmptyModes { line: lm.line });
            }
            for m in &lm.modes {
                if !(m.scale > 0.0) {
                    return Err(UncertaintyError::NonPositive {
                        name: "mode scale",
                        value: m.scale,
                    });
                }
                if !(m.mean_resource > 0.0) {
                    return Err(UncertaintyError::NonPositive {
                        name: "mode mean_resource",
                        value: m.mean_resource,
                    });
                }
            }
            for pair in lm.modes.windows(2) {
                if !(pair[1].mean_resource > pair[0].mean_resource
                    && pair[1].scale < pair[0].scale)
                {
                    return Err(UncertaintyError::NonDiminishing { line: lm.line });
                }
            }
        }
        Ok(())
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Self, UncertaintyError> {
        let text = std::fs::read_to_string(path)?;
        let table: RepairModeTable = serde_json::from_str(&text)?;
        table.validate()?;
        Ok(table)
    }
}

/// Per-step available repair resource.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BudgetSpec {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl BudgetSpec {
    pub fn materialize(&self, horizon: u32) -> Result<Vec<f64>, UncertaintyError> {
        match self {
            BudgetSpec::Constant(v) => Ok(vec![*v; horizon as usize]),
            BudgetSpec::PerStep(v) => {
                if v.len() < horizon as usize {
                    Err(UncertaintyError::BadBudgetLength {
                        got: v.len(),
                        need: horizon as usize,
                    })
                } else {
                    Ok(v[..horizon as usize].to_vec())
                }
            }
        }
    }
}

/// Sampled realization for one (line, mode) pair. `mode` is 1-based, to
/// match the repair-mode decision names `x[line][mode]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RepairRealization {
    pub line: LineKey,
    pub mode: u32,
    /// Repair duration in whole time steps, in [1, horizon].
    pub duration: u32,
    /// Required resource, clamped to the table's saturation window.
    pub resource: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub probability: f64,
    pub repairs: Vec<RepairRealization>,
    /// Available repair resource per time step, length = horizon.
    pub budget: Vec<f64>,
}

impl Scenario {
    pub fn draw(&self, line: LineKey, mode: u32) -> Option<&RepairRealization> {
        self.repairs.iter().find(|r| r.line == line && r.mode == mode)
    }

    pub fn key_set(&self) -> BTreeSet<(LineKey, u32)> {
        self.repairs.iter().map(|r| (r.line, r.mode)).collect()
    }

    /// Modes per line, from this scenario's key set.
    pub fn modes_by_line(&self) -> BTreeMap<LineKey, u32> {
        let mut out = BTreeMap::new();
        for r in &self.repairs {
            let e = out.entry(r.line).or_insert(0);
            *e = (*e).max(r.mode);
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSet {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub seed: u64,
    pub horizon: u32,
    pub scenarios: Vec<Scenario>,
}

fn default_schema() -> u32 {
    1
}

impl ScenarioSet {
    pub fn validate(&self) -> Result<(), UncertaintyError> {
        if self.scenarios.is_empty() {
            return Err(UncertaintyError::NoScenarios);
        }
        if self.horizon == 0 {
            return Err(UncertaintyError::BadHorizon);
        }
        let total: f64 = self.scenarios.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(UncertaintyError::ProbabilitySum(total));
        }
        let keys = self.scenarios[0].key_set();
        for s in &self.scenarios {
            if s.key_set() != keys {
                return Err(UncertaintyError::InconsistentKeys { id: s.id });
            }
            for r in &s.repairs {
                if r.duration < 1 || r.duration > self.horizon {
                    return Err(UncertaintyError::BadDuration {
                        id: s.id,
                        duration: r.duration,
                        horizon: self.horizon,
                    });
                }
            }
            if s.budget.len() != self.horizon as usize {
                return Err(UncertaintyError::BadBudgetLength {
                    got: s.budget.len(),
                    need: self.horizon as usize,
                });
            }
        }
        Ok(())
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Self, UncertaintyError> {
        let text = std::fs::read_to_string(path)?;
        let set: ScenarioSet = serde_json::from_str(&text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> Result<(), UncertaintyError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Draws `count` equally likely scenarios. Repair durations are Weibull
/// draws rounded up to whole steps and clamped to [1, horizon]; resource
/// levels are normal draws clamped to the saturation window.
pub fn sample_scenarios(
    table: &RepairModeTable,
    count: usize,
    horizon: u32,
    budget: &BudgetSpec,
    seed: u64,
) -> Result<ScenarioSet, UncertaintyError> {
    table.validate()?;
    if count == 0 {
        return Err(UncertaintyError::NoScenarios);
    }
    if horizon == 0 {
        return Err(UncertaintyError::BadHorizon);
    }
    let budget_steps = budget.materialize(horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sat_lo, sat_hi) = table.saturation;
    let mut scenarios = Vec::with_capacity(count);
    for id in 0..count {
        let mut repairs = Vec::new();
        for lm in &table.lines {
            for (k, mode) in lm.modes.iter().enumerate() {
                let u_t: f64 = rng.random();
                let raw_t = weibull_from_uniform(mode.scale, table.shape, u_t);
                let duration = (raw_t.ceil() as u32).clamp(1, horizon);
                let u1: f64 = rng.random();
                let u2: f64 = rng.random();
                let z = normal_from_uniforms(u1, u2);
                let resource = (mode.mean_resource + table.sigma * z).clamp(sat_lo, sat_hi);
                repairs.push(RepairRealization {
                    line: lm.line,
                    mode: (k + 1) as u32,
                    duration,
                    resource,
                });
            }
        }
        scenarios.push(Scenario {
            id,
            probability: 1.0 / count as f64,
            repairs,
            budget: budget_steps.clone(),
        });
    }
    let set = ScenarioSet {
        schema: 1,
        seed,
        horizon,
        scenarios,
    };
    set.validate()?;
    Ok(set)
}

/// The mean-value scenario: durations are the rounded-up Weibull means,
/// resources the mode means, with probability 1.
pub fn expected_scenario(
    table: &RepairModeTable,
    horizon: u32,
    budget: &BudgetSpec,
) -> Result<Scenario, UncertaintyError> {
    table.validate()?;
    if horizon == 0 {
        return Err(UncertaintyError::BadHorizon);
    }
    let (sat_lo, sat_hi) = table.saturation;
    let mut repairs = Vec::new();
    for lm in &table.lines {
        for (k, mode) in lm.modes.iter().enumerate() {
            let mean = mttr(mode.scale, table.shape)?;
            repairs.push(RepairRealization {
                line: lm.line,
                mode: (k + 1) as u32,
                duration: (mean.ceil() as u32).clamp(1, horizon),
                resource: mode.mean_resource.clamp(sat_lo, sat_hi),
            });
        }
    }
    Ok(Scenario {
        id: 0,
        probability: 1.0,
        repairs,
        budget: budget.materialize(horizon)?,
    })
}
