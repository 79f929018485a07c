//! JSON run configuration.
//!
//! ```json
//! {
//!   "instance": "case-study",
//!   "topology": { "topology": "cycle", "m": 6 },
//!   "eps0": 0.01, "r": 2.0, "eps_f": 0.01, "method": "I", "max_iter": 500
//! }
//! ```
//!
//! A custom instance replaces the string with
//! `{ "box": [[lo, hi], ...], "agents": [ { "objective": {...}, "constraint": {...} } ] }`.
//! An explicit topology lists the per-slot edges as `"slots": [[[j, i], ...], ...]`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{self, GraphSchedule, Topology};
use crate::llp::{LlpOracle, LlpSettings};
use crate::problem::{
    case_study_instance, check_interior_point, DecisionVector, Hyperbox, Interval, LocalObjective, ProblemInstance,
    SemiInfiniteConstraint,
};
use crate::sim::RunParams;
use crate::solver::SolverSettings;
use crate::termination::Method;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl ToString) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    Named(String),
    Custom(CustomInstance),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomInstance {
    #[serde(rename = "box")]
    pub domain: Vec<[f64; 2]>,
    pub agents: Vec<AgentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub objective: ObjectiveSpec,
    pub constraint: ConstraintSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Quadratic { center: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstraintSpec {
    /// `(x1 − v)² + 2·y·x2 − y² − 1` over `Y = [−1, 1]`.
    OffsetQuadratic { v: f64 },
    /// `x2 + (x1² − 2x1)·exp(−x1² + y² − 2x1·y)` with a configurable `Y`.
    Exponential {
        #[serde(default = "default_exponential_y")]
        y_box: [f64; 2],
    },
}

fn default_exponential_y() -> [f64; 2] {
    [0.0, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub topology: Topology,
    pub m: usize,
    #[serde(default)]
    pub slots: Option<Vec<Vec<(usize, usize)>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub instance: InstanceSpec,
    pub topology: TopologySpec,
    #[serde(default = "d_eps0")]
    pub eps0: f64,
    #[serde(default = "d_r")]
    pub r: f64,
    #[serde(default = "d_eps_f")]
    pub eps_f: f64,
    #[serde(default = "d_method")]
    pub method: Method,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    /// Optional Slater point; when given, `eps0` is checked against its slack.
    #[serde(default)]
    pub interior_point: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: Option<SolverSettings>,
    #[serde(default)]
    pub llp: Option<LlpSettings>,
}

fn d_eps0() -> f64 {
    0.01
}
fn d_r() -> f64 {
    2.0
}
fn d_eps_f() -> f64 {
    0.01
}
fn d_method() -> Method {
    Method::I
}
fn d_max_iter() -> usize {
    500
}

/// Everything `sim::run` needs.
pub struct ResolvedRun {
    pub instance: ProblemInstance,
    pub schedule: GraphSchedule,
    pub params: RunParams,
}

impl RunConfig {
    pub fn case_study(topology: Topology, method: Method) -> Self {
        RunConfig {
            instance: InstanceSpec::Named("case-study".into()),
            topology: TopologySpec {
                topology,
                m: 6,
                slots: None,
            },
            eps0: d_eps0(),
            r: d_r(),
            eps_f: d_eps_f(),
            method,
            max_iter: d_max_iter(),
            interior_point: None,
            solver: None,
            llp: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn params(&self) -> RunParams {
        RunParams {
            eps0: self.eps0,
            r: self.r,
            eps_f: self.eps_f,
            method: self.method,
            max_iter: self.max_iter,
            solver: self.solver.unwrap_or_default(),
            llp: self.llp.unwrap_or_default(),
        }
    }

    pub fn resolve(&self) -> Result<ResolvedRun, ConfigError> {
        let params = self.params();
        if !(params.eps0 > 0.0 && params.eps0.is_finite()) {
            return Err(ConfigError::invalid("eps0", "must be a positive number"));
        }
        if !(params.r > 1.0 && params.r.is_finite()) {
            return Err(ConfigError::invalid("r", "must be greater than 1"));
        }
        if params.eps_f.is_nan() || params.eps_f <= 0.0 {
            return Err(ConfigError::invalid("eps_f", "must be positive"));
        }
        if params.max_iter == 0 {
            return Err(ConfigError::invalid("max_iter", "must be at least 1"));
        }

        let instance = self.build_instance()?;
        let schedule = self.build_schedule()?;
        if schedule.m() != instance.m() {
            return Err(ConfigError::invalid(
                "topology.m",
                format!("{} nodes but the instance has {} agents", schedule.m(), instance.m()),
            ));
        }
        if let Some(x0) = &self.interior_point {
            let slack = check_interior_point(&instance, &DecisionVector::new(x0.clone()), &LlpOracle::new(params.llp))
                .map_err(|e| ConfigError::invalid("interior_point", e))?;
            if params.eps0 > slack {
                return Err(ConfigError::invalid(
                    "eps0",
                    format!("{} exceeds the interior-point slack {slack}", params.eps0),
                ));
            }
        }
        Ok(ResolvedRun {
            instance,
            schedule,
            params,
        })
    }

    fn build_instance(&self) -> Result<ProblemInstance, ConfigError> {
        match &self.instance {
            InstanceSpec::Named(name) if name == "case-study" => Ok(case_study_instance()),
            InstanceSpec::Named(name) => Err(ConfigError::invalid(
                "instance",
                format!("unknown instance `{name}` (expected `case-study` or an object)"),
            )),
            InstanceSpec::Custom(c) => {
                let domain = Hyperbox::new(c.domain.iter().map(|&[lo, hi]| Interval { lo, hi }).collect());
                let mut objectives = Vec::with_capacity(c.agents.len());
                let mut constraints = Vec::with_capacity(c.agents.len());
                for a in &c.agents {
                    objectives.push(match &a.objective {
                        ObjectiveSpec::Quadratic { center } => LocalObjective::quadratic(center.clone()),
                    });
                    constraints.push(match a.constraint {
                        ConstraintSpec::OffsetQuadratic { v } => SemiInfiniteConstraint::offset_quadratic(v),
                        ConstraintSpec::Exponential { y_box: [lo, hi] } => SemiInfiniteConstraint::exponential(lo, hi),
                    });
                }
                ProblemInstance::new(objectives, constraints, domain)
                    .map_err(|e| ConfigError::invalid("instance", e))
            }
        }
    }

    fn build_schedule(&self) -> Result<GraphSchedule, ConfigError> {
        let t = &self.topology;
        match (&t.slots, t.topology) {
            (Some(slots), _) => GraphSchedule::new(t.m, slots.clone()),
            (None, Topology::Explicit) => {
                return Err(ConfigError::invalid("topology.slots", "required for an explicit topology"))
            }
            (None, kind) => graph::generate(kind, t.m),
        }
        .map_err(|e| ConfigError::invalid("topology", e))
    }
}
