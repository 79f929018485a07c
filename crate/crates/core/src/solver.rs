//! Deterministic solver for the finite convex subproblems
//!
//! ```text
//! minimize  Σ_i f_i(x)   over the box
//! s.t.      g_a(x, y) ≤ rhs   for every cut (a, y, rhs)
//! ```
//!
//! Augmented Lagrangian over the cuts; each inner problem is minimized by
//! projected gradient descent onto the box with Armijo backtracking along the
//! projection arc and Barzilai-Borwein trial steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{DecisionVector, Hyperbox, LocalObjective, Scenario, SemiInfiniteConstraint};

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const PENALTY_GROWTH: f64 = 10.0;

/// One sampled constraint `g_agent(x, scenario) ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    /// 1-based agent id.
    pub agent: usize,
    pub scenario: Scenario,
    pub rhs: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("malformed subproblem: {0}")]
    Malformed(String),
    #[error("subproblem is infeasible (max violation {max_violation:.3e})")]
    Infeasible { max_violation: f64 },
    #[error("iteration limit reached (max violation {max_violation:.3e}, stationarity {stationarity:.3e})")]
    IterationLimit {
        max_violation: f64,
        stationarity: f64,
    },
}

/// Finite convex program with cuts in canonical (agent, insertion) order.
#[derive(Debug, Clone)]
pub struct FiniteSubproblem {
    objectives: Vec<LocalObjective>,
    constraints: Vec<SemiInfiniteConstraint>,
    domain: Hyperbox,
    cuts: Vec<Cut>,
}

impl FiniteSubproblem {
    /// `objectives[i]` and `constraints[i]` belong to agent `i + 1`.
    pub fn new(
        objectives: Vec<LocalObjective>,
        constraints: Vec<SemiInfiniteConstraint>,
        domain: Hyperbox,
        cuts: Vec<Cut>,
    ) -> Result<Self, SolveError> {
        if objectives.len() != constraints.len() {
            return Err(SolveError::Malformed(
                "objective and constraint counts differ".into(),
            ));
        }
        if !domain.is_valid() {
            return Err(SolveError::Malformed("box is unbounded or empty".into()));
        }
        for (k, cut) in cuts.iter().enumerate() {
            if cut.agent == 0 || cut.agent > constraints.len() {
                return Err(SolveError::Malformed(format!("cut {k}: unknown agent {}", cut.agent)));
            }
            if cut.rhs.is_nan() || cut.rhs > 0.0 {
                return Err(SolveError::Malformed(format!("cut {k}: rhs {} > 0", cut.rhs)));
            }
            if !constraints[cut.agent - 1]
                .uncertainty
                .contains(cut.scenario.as_slice())
            {
                return Err(SolveError::Malformed(format!(
                    "cut {k}: scenario outside agent {}'s uncertainty set",
                    cut.agent
                )));
            }
            if k > 0 && cuts[k - 1].agent > cut.agent {
                return Err(SolveError::Malformed("cuts are not in canonical order".into()));
            }
        }
        Ok(Self {
            objectives,
            constraints,
            domain,
            cuts,
        })
    }

    pub fn domain(&self) -> &Hyperbox {
        &self.domain
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.objectives.iter().map(|f| f.value(x)).sum()
    }

    fn add_objective_gradient(&self, x: &[f64], out: &mut [f64]) {
        for f in &self.objectives {
            f.add_gradient(x, 1.0, out);
        }
    }

    /// `g(x, y) − rhs` for every cut.
    pub fn cut_values(&self, x: &[f64]) -> Vec<f64> {
        self.cuts
            .iter()
            .map(|c| self.constraints[c.agent - 1].value(x, c.scenario.as_slice()) - c.rhs)
            .collect()
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.cut_values(x).into_iter().fold(0.0, f64::max)
    }

    fn add_cut_gradient(&self, k: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let c = &self.cuts[k];
        self.constraints[c.agent - 1].add_gradient_x(x, c.scenario.as_slice(), scale, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub feasibility_tol: f64,
    pub stationarity_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub initial_penalty: f64,
    pub max_penalty: f64,
    /// Residual violation of the feasibility phase above which the cuts are
    /// declared inconsistent.
    pub infeasibility_threshold: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            stationarity_tol: 1e-8,
            max_outer: 200,
            max_inner: 500,
            initial_penalty: 10.0,
            max_penalty: 1e8,
            infeasibility_threshold: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub minimizer: DecisionVector,
    pub objective_value: f64,
    pub max_violation: f64,
    pub stationarity: f64,
    pub multipliers: Vec<f64>,
    /// Total inner projected-gradient iterations.
    pub iterations: usize,
    pub outer_iterations: usize,
    pub status: SolveStatus,
}

/// Solves from the box center.
pub fn solve(problem: &FiniteSubproblem, settings: &SolverSettings) -> Result<SolveReport, SolveError> {
    solve_from(problem, &problem.domain.center(), settings)
}

/// Solves from an explicit start point (projected onto the box first).
pub fn solve_from(
    problem: &FiniteSubproblem,
    start: &[f64],
    settings: &SolverSettings,
) -> Result<SolveReport, SolveError> {
    let report = solve_report(problem, start, settings);
    match report.status {
        SolveStatus::Optimal => Ok(report),
        SolveStatus::Infeasible => Err(SolveError::Infeasible {
            max_violation: report.max_violation,
        }),
        SolveStatus::IterationLimit => Err(SolveError::IterationLimit {
            max_violation: report.max_violation,
            stationarity: report.stationarity,
        }),
    }
}

/// Runs the solver and reports whatever state it ends in.
pub fn solve_report(problem: &FiniteSubproblem, start: &[f64], settings: &SolverSettings) -> SolveReport {
    let mut x = start.to_vec();
    problem.domain.project(&mut x);
    let ncuts = problem.cuts.len();
    let mut lambda = vec![0.0; ncuts];
    let mut rho = settings.initial_penalty;
    let mut prev_violation = f64::INFINITY;
    let mut total_inner = 0;
    let inner_tol = 0.5 * settings.stationarity_tol;

    let report = |x: &[f64], lambda: Vec<f64>, status, outer, inner| {
        let stationarity = stationarity_residual(problem, x, &lambda);
        SolveReport {
            minimizer: DecisionVector::new(x.to_vec()),
            objective_value: problem.objective(x),
            max_violation: problem.max_violation(x),
            stationarity,
            multipliers: lambda,
            iterations: inner,
            outer_iterations: outer,
            status,
        }
    };

    for outer in 1..=settings.max_outer {
        let lagrangian = |z: &[f64], grad: Option<&mut [f64]>| {
            augmented_lagrangian(problem, z, &lambda, rho, grad)
        };
        total_inner += projected_gradient(&lagrangian, &problem.domain, &mut x, inner_tol, settings.max_inner);

        let values = problem.cut_values(&x);
        for (l, c) in lambda.iter_mut().zip(&values) {
            *l = (*l + rho * c).max(0.0);
        }
        let violation = values.iter().copied().fold(0.0, f64::max);
        let stationarity = stationarity_residual(problem, &x, &lambda);
        if violation <= settings.feasibility_tol && stationarity <= settings.stationarity_tol {
            return report(&x, lambda, SolveStatus::Optimal, outer, total_inner);
        }
        if violation > settings.feasibility_tol && violation > 0.25 * prev_violation {
            if rho >= settings.max_penalty {
                // penalty saturated without progress: check consistency of the cuts
                let mut probe = x.clone();
                let residual = feasibility_phase(problem, &mut probe, settings);
                if residual > settings.infeasibility_threshold {
                    return report(&probe, lambda, SolveStatus::Infeasible, outer, total_inner);
                }
            }
            rho = (rho * PENALTY_GROWTH).min(settings.max_penalty);
        }
        prev_violation = violation;
    }

    let final_violation = problem.max_violation(&x);
    if final_violation > settings.feasibility_tol {
        let mut probe = x.clone();
        let residual = feasibility_phase(problem, &mut probe, settings);
        if residual > settings.infeasibility_threshold {
            return report(&probe, lambda, SolveStatus::Infeasible, settings.max_outer, total_inner);
        }
    }
    report(&x, lambda, SolveStatus::IterationLimit, settings.max_outer, total_inner)
}

/// Norm of `x − P(x − ∇ₓL(x, λ))`, the projected KKT residual.
pub fn stationarity_residual(problem: &FiniteSubproblem, x: &[f64], multipliers: &[f64]) -> f64 {
    let mut grad = vec![0.0; x.len()];
    problem.add_objective_gradient(x, &mut grad);
    for (k, &l) in multipliers.iter().enumerate() {
        if l != 0.0 {
            problem.add_cut_gradient(k, x, l, &mut grad);
        }
    }
    projected_step_norm(&problem.domain, x, &grad)
}

fn projected_step_norm(domain: &Hyperbox, x: &[f64], grad: &[f64]) -> f64 {
    x.iter()
        .zip(grad)
        .zip(domain.intervals())
        .map(|((xi, gi), iv)| {
            let d = xi - iv.clamp(xi - gi);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn augmented_lagrangian(
    problem: &FiniteSubproblem,
    x: &[f64],
    lambda: &[f64],
    rho: f64,
    grad: Option<&mut [f64]>,
) -> f64 {
    let values = problem.cut_values(x);
    let mut value = problem.objective(x);
    let shifted: Vec<f64> = lambda
        .iter()
        .zip(&values)
        .map(|(l, c)| (l + rho * c).max(0.0))
        .collect();
    for (s, l) in shifted.iter().zip(lambda) {
        value += (s * s - l * l) / (2.0 * rho);
    }
    if let Some(g) = grad {
        g.iter_mut().for_each(|v| *v = 0.0);
        problem.add_objective_gradient(x, g);
        for (k, &s) in shifted.iter().enumerate() {
            if s != 0.0 {
                problem.add_cut_gradient(k, x, s, g);
            }
        }
    }
    value
}

/// Minimizes `½ Σ max(0, g − rhs)²` and returns the final max violation.
fn feasibility_phase(problem: &FiniteSubproblem, x: &mut [f64], settings: &SolverSettings) -> f64 {
    let phi = |z: &[f64], grad: Option<&mut [f64]>| {
        let values = problem.cut_values(z);
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v = 0.0);
            for (k, &c) in values.iter().enumerate() {
                if c > 0.0 {
                    problem.add_cut_gradient(k, z, c, g);
                }
            }
        }
        values.iter().map(|c| 0.5 * c.max(0.0).powi(2)).sum()
    };
    projected_gradient(&phi, &problem.domain, x, 1e-14, 4 * settings.max_inner);
    problem.max_violation(x)
}

/// Projected gradient descent; returns the number of iterations taken.
fn projected_gradient<F>(f: &F, domain: &Hyperbox, x: &mut [f64], tol: f64, max_iter: usize) -> usize
where
    F: Fn(&[f64], Option<&mut [f64]>) -> f64,
{
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut value = f(x, Some(&mut grad));
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];

    let first = projected_step_norm(domain, x, &grad);
    let mut step = if first > 0.0 { (1.0 / first).min(1.0) } else { 1.0 };

    for iter in 0..max_iter {
        if projected_step_norm(domain, x, &grad) <= tol {
            return iter;
        }
        let mut accepted = false;
        let mut alpha = step;
        for _ in 0..MAX_BACKTRACKS {
            for k in 0..n {
                trial[k] = x[k] - alpha * grad[k];
            }
            domain.project(&mut trial);
            let decrease: f64 = (0..n).map(|k| grad[k] * (trial[k] - x[k])).sum();
            let trial_value = f(&trial, None);
            if trial_value <= value + ARMIJO_C * decrease {
                accepted = true;
                break;
            }
            alpha *= BACKTRACK_SHRINK;
        }
        if !accepted {
            return iter;
        }
        let trial_value = f(&trial, Some(&mut trial_grad));
        let (mut ss, mut sy) = (0.0, 0.0);
        for k in 0..n {
            let s = trial[k] - x[k];
            ss += s * s;
            sy += s * (trial_grad[k] - grad[k]);
        }
        if ss == 0.0 {
            return iter + 1;
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { (alpha * 2.0).min(1e12) };
        x.copy_from_slice(&trial);
        grad.copy_from_slice(&trial_grad);
        value = trial_value;
    }
    max_iter
}
