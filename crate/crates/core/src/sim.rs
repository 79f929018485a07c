//! Lock-step simulation of the full distributed bounding loop.
//!
//! One outer iteration: flood and solve the lower subproblem, run the lower
//! oracle at every agent, flood and solve the upper subproblem, run the upper
//! oracle, then one stopping round. The slot pointer advances continuously so
//! time-varying schedules are exercised across iterations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithm::{bound_values, AgentState, OracleError, UpperBound, UpperPoint};
use crate::bounds::{method1_accuracy, method2_accuracy};
use crate::consensus::{consensus_round, ConsensusError, FloodMessage, Phase};
use crate::graph::GraphSchedule;
use crate::llp::{LlpOracle, LlpSettings};
use crate::problem::{DecisionVector, ProblemInstance};
use crate::solver::{SolveError, SolverSettings};
use crate::termination::{run_stopping_round, Decision, Method};

/// Ceiling used when plotting an infinite upper bound.
pub const DEFAULT_PLOT_CEILING: f64 = 39.0;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub eps0: f64,
    pub r: f64,
    pub eps_f: f64,
    pub method: Method,
    pub max_iter: usize,
    pub solver: SolverSettings,
    pub llp: LlpSettings,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            eps0: 0.01,
            r: 2.0,
            eps_f: 0.01,
            method: Method::I,
            max_iter: 500,
            solver: SolverSettings::default(),
            llp: LlpSettings::default(),
        }
    }
}

impl RunParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(SimError::Config(format!("eps0 must be positive, got {}", self.eps0)));
        }
        if !(self.r > 1.0 && self.r.is_finite()) {
            return Err(SimError::Config(format!("r must exceed 1, got {}", self.r)));
        }
        if self.eps_f.is_nan() || self.eps_f <= 0.0 {
            return Err(SimError::Config(format!("eps_f must be positive, got {}", self.eps_f)));
        }
        if self.max_iter == 0 {
            return Err(SimError::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-agent data of one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent: usize,
    /// `g_max` at the lower point.
    pub g_max_lower: f64,
    /// `g_max` at the upper candidate.
    pub g_max_upper: f64,
    /// Restriction used in this iteration's upper subproblem.
    pub epsilon: f64,
    /// `|f_i(x̄_i) − f_i(x̃_i)|`; `None` when infinite.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based outer iteration number.
    pub k: usize,
    pub lower: f64,
    pub upper: UpperBound,
    pub lower_point: DecisionVector,
    pub upper_candidate: DecisionVector,
    pub agents: Vec<AgentRecord>,
    pub lower_cuts: usize,
    pub upper_cuts: usize,
    pub slots_consumed: usize,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub records: Vec<IterationRecord>,
    pub terminated: bool,
    pub iterations: usize,
    /// `x_i^opt` for each agent; empty unless terminated.
    pub solutions: Vec<DecisionVector>,
    pub method: Method,
    pub accuracy_bound: f64,
    pub total_slots: usize,
}

impl RunResult {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

pub type FloodObserver<'a> = &'a mut dyn FnMut(Phase, &FloodMessage);

/// Optional observers for message-level tracing.
#[derive(Default)]
pub struct Observers<'a> {
    pub flood: Option<FloodObserver<'a>>,
}

/// Runs the loop until a stopping round says stop or `max_iter` is reached.
/// Hitting the budget is not an error: the result comes back with
/// `terminated == false`.
pub fn run(instance: &ProblemInstance, schedule: &GraphSchedule, params: &RunParams) -> Result<RunResult, SimError> {
    run_observed(instance, schedule, params, Observers::default())
}

pub fn run_observed(
    instance: &ProblemInstance,
    schedule: &GraphSchedule,
    params: &RunParams,
    mut observers: Observers<'_>,
) -> Result<RunResult, SimError> {
    params.validate()?;
    if schedule.m() != instance.m() {
        return Err(SimError::Config(format!(
            "schedule has {} nodes but the instance has {} agents",
            schedule.m(),
            instance.m()
        )));
    }
    let m = instance.m();
    let llp = LlpOracle::new(params.llp);
    let accuracy_bound = match params.method {
        Method::I => method1_accuracy(m, params.eps_f),
        Method::II => method2_accuracy(schedule, params.eps_f),
    };
    let mut states: Vec<AgentState> = (1..=m).map(|id| AgentState::new(id, params.eps0)).collect();
    let mut slot = 0usize;
    let mut records = Vec::new();

    for k in 1..=params.max_iter {
        let slot_at_start = slot;

        let lower = {
            let mut tracer = observers.flood.as_deref_mut().map(|f| {
                move |msg: &FloodMessage| f(Phase::Lower, msg)
            });
            let tracer = tracer.as_mut().map(|t| t as &mut dyn FnMut(&FloodMessage));
            consensus_round(instance, &states, schedule, slot, Phase::Lower, &params.solver, tracer)
                .map_err(config_on_solver_failure)?
        };
        slot += lower.slots_used;
        let mut g_lower = Vec::with_capacity(m);
        for (s, x) in states.iter_mut().zip(&lower.points) {
            let con = &instance.constraints()[s.id - 1];
            g_lower.push(s.dlbd_oracle(con, x, &llp)?.g_max);
        }

        let epsilons: Vec<f64> = states.iter().map(|s| s.epsilon).collect();
        let upper = {
            let mut tracer = observers.flood.as_deref_mut().map(|f| {
                move |msg: &FloodMessage| f(Phase::Upper, msg)
            });
            let tracer = tracer.as_mut().map(|t| t as &mut dyn FnMut(&FloodMessage));
            consensus_round(instance, &states, schedule, slot, Phase::Upper, &params.solver, tracer)
                .map_err(config_on_solver_failure)?
        };
        slot += upper.slots_used;
        let mut g_upper = Vec::with_capacity(m);
        for (s, z) in states.iter_mut().zip(&upper.points) {
            let con = &instance.constraints()[s.id - 1];
            g_upper.push(s.dubd_oracle(con, z, &llp, params.r)?.g_max);
        }

        let gaps: Vec<f64> = states
            .iter()
            .map(|s| s.gap(&instance.objectives()[s.id - 1]))
            .collect();
        let round = run_stopping_round(&gaps, schedule, slot, params.method, params.eps_f);
        slot += round.slots_used;
        if round.decision == Decision::Stop && !round.simultaneous {
            log::warn!(
                "iteration {k}: method {} stop was not simultaneous across agents",
                params.method
            );
        }

        let (lower_value, upper_value) = bound_values(&states, instance);
        records.push(IterationRecord {
            k,
            lower: lower_value,
            upper: upper_value,
            lower_point: lower.points[0].clone(),
            upper_candidate: upper.points[0].clone(),
            agents: (0..m)
                .map(|i| AgentRecord {
                    agent: i + 1,
                    g_max_lower: g_lower[i],
                    g_max_upper: g_upper[i],
                    epsilon: epsilons[i],
                    gap: gaps[i].is_finite().then_some(gaps[i]),
                })
                .collect(),
            lower_cuts: lower.cut_count,
            upper_cuts: upper.cut_count,
            slots_consumed: slot - slot_at_start,
            decision: round.decision,
        });

        if round.decision == Decision::Stop {
            let solutions = states
                .iter()
                .map(|s| match &s.x_bar {
                    UpperPoint::Point(x) => Ok(x.clone()),
                    UpperPoint::Infeasible => Err(SimError::Config(format!(
                        "agent {} stopped without a feasible upper point",
                        s.id
                    ))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(RunResult {
                iterations: records.len(),
                records,
                terminated: true,
                solutions,
                method: params.method,
                accuracy_bound,
                total_slots: slot,
            });
        }
    }

    Ok(RunResult {
        iterations: records.len(),
        records,
        terminated: false,
        solutions: Vec::new(),
        method: params.method,
        accuracy_bound,
        total_slots: slot,
    })
}

/// An infeasible finite subproblem means the initial restriction was not
/// admissible; surface it as a configuration problem.
fn config_on_solver_failure(err: ConsensusError) -> SimError {
    match err {
        ConsensusError::Solve {
            source: SolveError::Infeasible { max_violation },
            ..
        } => SimError::Config(format!(
            "bounding subproblem infeasible (violation {max_violation:.3e}); eps0 is too large for this instance"
        )),
        other => SimError::Consensus(other),
    }
}

/// One point of the bound trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub k: usize,
    pub lower: f64,
    /// Upper bound with `+∞` replaced by the plotting ceiling.
    pub upper: f64,
    pub upper_finite: bool,
}

/// Per-iteration `(k, lower, upper)` with infinite uppers drawn at `ceiling`.
pub fn trace(result: &RunResult, ceiling: f64) -> Vec<TracePoint> {
    result
        .records
        .iter()
        .map(|r| TracePoint {
            k: r.k,
            lower: r.lower,
            upper: r.upper.or_ceiling(ceiling),
            upper_finite: r.upper.finite().is_some(),
        })
        .collect()
}

pub fn write_trace_csv<W: std::io::Write>(points: &[TracePoint], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
