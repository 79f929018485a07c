//! Per-agent state of the bounding procedures: scenario sets, restriction
//! parameter, lower/upper bounding oracles and candidate points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llp::{LlpError, LlpOracle, LlpSolution, Verdict};
use crate::problem::{DecisionVector, LocalObjective, ProblemInstance, Scenario, SemiInfiniteConstraint};
use crate::solver::{Cut, FiniteSubproblem, SolveError};

/// Per-agent cap on stored scenarios.
pub const MAX_SCENARIOS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Llp(#[from] LlpError),
    #[error("agent {agent} exceeded {MAX_SCENARIOS} stored scenarios")]
    ScenarioLimit { agent: usize },
}

/// Upper-bounding candidate: a verified point or the infeasible sentinel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UpperPoint {
    Point(DecisionVector),
    /// The last upper candidate violated the agent's constraint; its
    /// objective counts as `+∞`.
    Infeasible,
}

impl UpperPoint {
    pub fn point(&self) -> Option<&DecisionVector> {
        match self {
            UpperPoint::Point(x) => Some(x),
            UpperPoint::Infeasible => None,
        }
    }
}

/// Global upper bound; `+∞` is a variant, never a float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum UpperBound {
    Finite(f64),
    Infinite,
}

impl UpperBound {
    pub fn finite(self) -> Option<f64> {
        match self {
            UpperBound::Finite(v) => Some(v),
            UpperBound::Infinite => None,
        }
    }

    /// Value for plotting, with `+∞` replaced by `ceiling`.
    pub fn or_ceiling(self, ceiling: f64) -> f64 {
        self.finite().unwrap_or(ceiling)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// 1-based agent id.
    pub id: usize,
    pub lower_scenarios: Vec<Scenario>,
    pub upper_scenarios: Vec<Scenario>,
    pub epsilon: f64,
    /// Number of feasible upper verdicts so far.
    pub reductions: u32,
    pub x_tilde: Option<DecisionVector>,
    pub x_bar: UpperPoint,
}

impl AgentState {
    pub fn new(id: usize, epsilon0: f64) -> Self {
        Self {
            id,
            lower_scenarios: Vec::new(),
            upper_scenarios: Vec::new(),
            epsilon: epsilon0,
            reductions: 0,
            x_tilde: None,
            x_bar: UpperPoint::Infeasible,
        }
    }

    /// Lower bounding oracle: records `x_new` and, if it violates the
    /// semi-infinite constraint, adds the worst-case scenario as a cut.
    pub fn dlbd_oracle(
        &mut self,
        constraint: &SemiInfiniteConstraint,
        x_new: &DecisionVector,
        llp: &LlpOracle,
    ) -> Result<LlpSolution, OracleError> {
        let sol = llp.solve(constraint, x_new.as_slice())?;
        self.x_tilde = Some(x_new.clone());
        if llp.verdict(sol.g_max) == Verdict::Violated {
            push_scenario(&mut self.lower_scenarios, sol.y_star.clone(), self.id)?;
        }
        Ok(sol)
    }

    /// Upper bounding oracle: a violated `z_new` adds a cut and leaves the
    /// sentinel; a feasible one is accepted and the restriction shrinks by `r`.
    pub fn dubd_oracle(
        &mut self,
        constraint: &SemiInfiniteConstraint,
        z_new: &DecisionVector,
        llp: &LlpOracle,
        r: f64,
    ) -> Result<LlpSolution, OracleError> {
        let sol = llp.solve(constraint, z_new.as_slice())?;
        match llp.verdict(sol.g_max) {
            Verdict::Violated => {
                push_scenario(&mut self.upper_scenarios, sol.y_star.clone(), self.id)?;
                self.x_bar = UpperPoint::Infeasible;
            }
            Verdict::Feasible => {
                self.epsilon /= r;
                self.reductions += 1;
                self.x_bar = UpperPoint::Point(z_new.clone());
            }
        }
        Ok(sol)
    }

    pub fn lower_cuts(&self) -> Vec<Cut> {
        self.lower_scenarios
            .iter()
            .map(|y| Cut {
                agent: self.id,
                scenario: y.clone(),
                rhs: 0.0,
            })
            .collect()
    }

    pub fn upper_cuts(&self) -> Vec<Cut> {
        self.upper_scenarios
            .iter()
            .map(|y| Cut {
                agent: self.id,
                scenario: y.clone(),
                rhs: -self.epsilon,
            })
            .collect()
    }

    /// `|f_i(x̄_i) − f_i(x̃_i)|`, infinite under the sentinel.
    pub fn gap(&self, objective: &LocalObjective) -> f64 {
        match (&self.x_bar, &self.x_tilde) {
            (UpperPoint::Point(xb), Some(xt)) => {
                (objective.value(xb.as_slice()) - objective.value(xt.as_slice())).abs()
            }
            _ => f64::INFINITY,
        }
    }
}

fn push_scenario(set: &mut Vec<Scenario>, y: Scenario, agent: usize) -> Result<(), OracleError> {
    if set.len() >= MAX_SCENARIOS {
        return Err(OracleError::ScenarioLimit { agent });
    }
    set.push(y);
    Ok(())
}

/// Lower bounding subproblem over every agent's lower scenarios, rhs 0.
pub fn build_lower_subproblem(
    states: &[AgentState],
    instance: &ProblemInstance,
) -> Result<FiniteSubproblem, SolveError> {
    build(states, instance, AgentState::lower_cuts)
}

/// Upper bounding subproblem over every agent's upper scenarios, rhs `−ε_i`.
pub fn build_upper_subproblem(
    states: &[AgentState],
    instance: &ProblemInstance,
) -> Result<FiniteSubproblem, SolveError> {
    build(states, instance, AgentState::upper_cuts)
}

fn build(
    states: &[AgentState],
    instance: &ProblemInstance,
    cuts_of: fn(&AgentState) -> Vec<Cut>,
) -> Result<FiniteSubproblem, SolveError> {
    let mut ordered: Vec<&AgentState> = states.iter().collect();
    ordered.sort_by_key(|s| s.id);
    let cuts = ordered.into_iter().flat_map(cuts_of).collect();
    FiniteSubproblem::new(
        instance.objectives().to_vec(),
        instance.constraints().to_vec(),
        instance.domain().clone(),
        cuts,
    )
}

/// `(Σ f_i(x̃_i), Σ f_i(x̄_i))`, the upper part infinite if any agent holds
/// the sentinel.
pub fn bound_values(states: &[AgentState], instance: &ProblemInstance) -> (f64, UpperBound) {
    let objectives = instance.objectives();
    let lower = states
        .iter()
        .map(|s| {
            let x = s.x_tilde.as_ref().expect("lower point set before bounding");
            objectives[s.id - 1].value(x.as_slice())
        })
        .sum();
    let mut upper = 0.0;
    for s in states {
        match &s.x_bar {
            UpperPoint::Point(x) => upper += objectives[s.id - 1].value(x.as_slice()),
            UpperPoint::Infeasible => return (lower, UpperBound::Infinite),
        }
    }
    (lower, UpperBound::Finite(upper))
}
