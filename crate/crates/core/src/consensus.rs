//! Exact consensus on the bounding subproblems by flooding.
//!
//! Every agent repeatedly forwards everything it knows (objective parameters,
//! constraint parameters and cuts) to its out-neighbors. After `T·(m − 1)`
//! slots of a uniformly strongly connected schedule every agent holds the
//! same data, builds the same canonical subproblem and, since the solver is
//! deterministic, computes a bitwise identical minimizer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithm::AgentState;
use crate::graph::GraphSchedule;
use crate::problem::{DecisionVector, Hyperbox, LocalObjective, ProblemInstance, Scenario, SemiInfiniteConstraint};
use crate::solver::{self, Cut, FiniteSubproblem, SolveError, SolveReport, SolverSettings};

#[derive(Debug, Error, PartialEq)]
pub enum ConsensusError {
    #[error("agent {agent} is missing data from agent {missing} after flooding")]
    Incomplete { agent: usize, missing: usize },
    #[error("agents {first} and {second} computed different minimizers")]
    Mismatch { first: usize, second: usize },
    #[error("agent {agent}: {source}")]
    Solve { agent: usize, source: SolveError },
}

/// Which bounding subproblem is being agreed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Lower,
    Upper,
}

/// What one agent contributes to the flood.
#[derive(Debug, Clone)]
pub struct AgentPayload {
    pub agent: usize,
    pub objective: LocalObjective,
    pub constraint: SemiInfiniteConstraint,
    pub cuts: Vec<Cut>,
}

impl AgentPayload {
    pub fn from_state(state: &AgentState, instance: &ProblemInstance, phase: Phase) -> Self {
        Self {
            agent: state.id,
            objective: instance.objectives()[state.id - 1].clone(),
            constraint: instance.constraints()[state.id - 1].clone(),
            cuts: match phase {
                Phase::Lower => state.lower_cuts(),
                Phase::Upper => state.upper_cuts(),
            },
        }
    }
}

/// An agent's merged view: problem data keyed by agent, cuts keyed by
/// `(agent, insertion index)`.
#[derive(Debug, Clone, Default)]
pub struct Knowledge {
    agents: BTreeMap<usize, (LocalObjective, SemiInfiniteConstraint)>,
    cuts: BTreeMap<(usize, usize), Cut>,
}

impl Knowledge {
    pub fn from_payload(p: &AgentPayload) -> Self {
        let mut k = Self::default();
        k.agents.insert(p.agent, (p.objective.clone(), p.constraint.clone()));
        for (idx, cut) in p.cuts.iter().enumerate() {
            k.cuts.insert((p.agent, idx), cut.clone());
        }
        k
    }

    /// Idempotent, commutative set union.
    pub fn merge(&mut self, other: &Knowledge) {
        for (id, data) in &other.agents {
            self.agents.entry(*id).or_insert_with(|| data.clone());
        }
        for (key, cut) in &other.cuts {
            self.cuts.entry(*key).or_insert_with(|| cut.clone());
        }
    }

    pub fn knows(&self, agent: usize) -> bool {
        self.agents.contains_key(&agent)
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.agents.keys().copied()
    }

    /// Set equality over agents and cut tuples.
    pub fn same_as(&self, other: &Knowledge) -> bool {
        self.agents.keys().eq(other.agents.keys()) && self.cuts == other.cuts
    }

    pub fn cut_count(&self) -> usize {
        self.cuts.len()
    }

    /// Canonical subproblem from the merged data; requires agents `1..=m`.
    pub fn to_subproblem(&self, domain: &Hyperbox) -> Result<FiniteSubproblem, SolveError> {
        let m = self.agents.len();
        if self.agents.keys().copied().ne(1..=m) {
            return Err(SolveError::Malformed("knowledge does not cover agents 1..=m".into()));
        }
        let (objectives, constraints) = self.agents.values().cloned().unzip();
        FiniteSubproblem::new(objectives, constraints, domain.clone(), self.cuts.values().cloned().collect())
    }

    fn tuples(&self) -> Vec<TupleRecord> {
        self.cuts
            .values()
            .map(|c| TupleRecord {
                agent_id: c.agent,
                scenario: c.scenario.clone(),
                rhs: c.rhs,
            })
            .collect()
    }

    fn objective_params(&self) -> Vec<serde_json::Value> {
        self.agents
            .iter()
            .map(|(id, (obj, con))| {
                serde_json::json!({ "agent": id, "objective": obj.params(), "constraint": con.params() })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleRecord {
    pub agent_id: usize,
    pub scenario: Scenario,
    pub rhs: f64,
}

/// One broadcast, as written to the trace log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodMessage {
    pub sender: usize,
    pub slot: usize,
    pub tuples: Vec<TupleRecord>,
    pub objective_params: Vec<serde_json::Value>,
}

#[derive(Debug, Clone)]
pub struct FloodOutcome {
    /// `knowledge[i]` is agent `i + 1`'s merged view.
    pub knowledge: Vec<Knowledge>,
    pub slots_used: usize,
    /// `arrival[i][j]`: slots after which agent `i + 1` first held agent
    /// `j + 1`'s data.
    pub arrival: Vec<Vec<Option<usize>>>,
}

impl FloodOutcome {
    pub fn is_complete(&self) -> bool {
        let m = self.knowledge.len();
        self.knowledge.iter().all(|k| (1..=m).all(|j| k.knows(j)))
            && self.knowledge.windows(2).all(|w| w[0].same_as(&w[1]))
    }
}

/// Floods every payload for exactly `T·(m − 1)` slots starting at `start_slot`.
/// Each agent merges the previous slot's snapshot of its in-neighbors.
pub fn flood_constraints(
    payloads: &[AgentPayload],
    schedule: &GraphSchedule,
    start_slot: usize,
    mut tracer: Option<&mut dyn FnMut(&FloodMessage)>,
) -> FloodOutcome {
    let m = payloads.len();
    let mut knowledge: Vec<Knowledge> = payloads.iter().map(Knowledge::from_payload).collect();
    let mut arrival = vec![vec![None; m]; m];
    for (i, row) in arrival.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    let slots = schedule.flood_bound();
    for step in 0..slots {
        let t = start_slot + step;
        let snapshot = knowledge.clone();
        if let Some(trace) = tracer.as_deref_mut() {
            for (j, k) in snapshot.iter().enumerate() {
                if !schedule.out_neighbors(j + 1, t).is_empty() {
                    trace(&FloodMessage {
                        sender: j + 1,
                        slot: t,
                        tuples: k.tuples(),
                        objective_params: k.objective_params(),
                    });
                }
            }
        }
        for (i, k) in knowledge.iter_mut().enumerate() {
            for j in schedule.in_neighbors(i + 1, t) {
                k.merge(&snapshot[j - 1]);
            }
            for (origin, slot) in arrival[i].iter_mut().enumerate() {
                if slot.is_none() && k.knows(origin + 1) {
                    *slot = Some(step + 1);
                }
            }
        }
    }
    FloodOutcome {
        knowledge,
        slots_used: slots,
        arrival,
    }
}

/// Every agent solves its own merged subproblem; the results must agree
/// bitwise.
pub fn consensus_solve(
    knowledge: &[Knowledge],
    domain: &Hyperbox,
    settings: &SolverSettings,
) -> Result<Vec<SolveReport>, ConsensusError> {
    let m = knowledge.len();
    let mut reports: Vec<SolveReport> = Vec::with_capacity(m);
    for (i, k) in knowledge.iter().enumerate() {
        if let Some(missing) = (1..=m).find(|&j| !k.knows(j)) {
            return Err(ConsensusError::Incomplete { agent: i + 1, missing });
        }
        let problem = k
            .to_subproblem(domain)
            .map_err(|source| ConsensusError::Solve { agent: i + 1, source })?;
        let report = solver::solve(&problem, settings)
            .map_err(|source| ConsensusError::Solve { agent: i + 1, source })?;
        if let Some(first) = reports.first() {
            if !first.minimizer.bitwise_eq(&report.minimizer) {
                return Err(ConsensusError::Mismatch { first: 1, second: i + 1 });
            }
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Result of one flood-then-solve phase.
#[derive(Debug, Clone)]
pub struct ConsensusRound {
    pub points: Vec<DecisionVector>,
    pub reports: Vec<SolveReport>,
    pub slots_used: usize,
    pub cut_count: usize,
}

/// Floods the chosen phase's data from `states` and solves at every agent.
pub fn consensus_round(
    instance: &ProblemInstance,
    states: &[AgentState],
    schedule: &GraphSchedule,
    start_slot: usize,
    phase: Phase,
    settings: &SolverSettings,
    tracer: Option<&mut dyn FnMut(&FloodMessage)>,
) -> Result<ConsensusRound, ConsensusError> {
    let payloads: Vec<AgentPayload> = states
        .iter()
        .map(|s| AgentPayload::from_state(s, instance, phase))
        .collect();
    let outcome = flood_constraints(&payloads, schedule, start_slot, tracer);
    let reports = consensus_solve(&outcome.knowledge, instance.domain(), settings)?;
    Ok(ConsensusRound {
        points: reports.iter().map(|r| r.minimizer.clone()).collect(),
        cut_count: outcome.knowledge[0].cut_count(),
        reports,
        slots_used: outcome.slots_used,
    })
}
