//! Problem instances: agents' convex objectives, semi-infinite constraints
//! and the shared compact box every subproblem lives in.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llp::LlpOracle;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Axis-aligned box, the product of one interval per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hyperbox(pub Vec<Interval>);

impl Hyperbox {
    pub fn new(intervals: Vec<Interval>) -> Self {
        Self(intervals)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.0
    }

    /// Bounded, nonempty and with finite endpoints.
    pub fn is_valid(&self) -> bool {
        !self.0.is_empty()
            && self
                .0
                .iter()
                .all(|iv| iv.lo.is_finite() && iv.hi.is_finite() && iv.lo <= iv.hi)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.0.iter().zip(x).all(|(iv, v)| iv.contains(*v))
    }

    pub fn center(&self) -> Vec<f64> {
        self.0.iter().map(Interval::midpoint).collect()
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, iv) in x.iter_mut().zip(&self.0) {
            *v = iv.clamp(*v);
        }
    }
}

/// Common decision vector shared by all agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionVector(pub Vec<f64>);

impl DecisionVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Bitwise equality, used to assert exact consensus.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Realization of an agent's uncertain parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scenario(pub Vec<f64>);

impl Scenario {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn scalar(y: f64) -> Self {
        Self(vec![y])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// User-supplied convex objective.
pub trait ObjectiveFn: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn strictly_convex(&self) -> bool {
        false
    }
}

/// User-supplied semi-infinite constraint `g(x, y)`, convex in `x`.
pub trait ConstraintFn: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64], y: &[f64]) -> f64;
    fn gradient_x(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    /// Closed-form maximizer over `y_box`; must return `Some` for every `x`
    /// whenever [`ConstraintFn::has_argmax`] is true.
    fn argmax(&self, _x: &[f64], _y_box: &Hyperbox) -> Option<Vec<f64>> {
        None
    }
    fn has_argmax(&self) -> bool {
        false
    }
}

/// An agent's local objective `f_i`.
#[derive(Debug, Clone)]
pub enum LocalObjective {
    /// `‖x − center‖²`.
    QuadraticDistance { center: Vec<f64> },
    Custom(Arc<dyn ObjectiveFn>),
}

impl LocalObjective {
    pub fn quadratic(center: Vec<f64>) -> Self {
        Self::QuadraticDistance { center }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::QuadraticDistance { center } => {
                x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum()
            }
            Self::Custom(f) => f.value(x),
        }
    }

    /// Adds `scale · ∇f(x)` to `out`.
    pub fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            Self::QuadraticDistance { center } => {
                for ((o, a), c) in out.iter_mut().zip(x).zip(center) {
                    *o += scale * 2.0 * (a - c);
                }
            }
            Self::Custom(f) => {
                let mut g = vec![0.0; x.len()];
                f.gradient(x, &mut g);
                for (o, gi) in out.iter_mut().zip(g) {
                    *o += scale * gi;
                }
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.add_gradient(x, 1.0, &mut g);
        g
    }

    pub fn strictly_convex(&self) -> bool {
        match self {
            Self::QuadraticDistance { .. } => true,
            Self::Custom(f) => f.strictly_convex(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::QuadraticDistance { .. } => "quadratic-distance",
            Self::Custom(_) => "custom",
        }
    }

    /// Parameters in a serializable form, for message traces.
    pub fn params(&self) -> serde_json::Value {
        match self {
            Self::QuadraticDistance { center } => {
                serde_json::json!({ "kind": self.kind_name(), "center": center })
            }
            Self::Custom(_) => serde_json::json!({ "kind": "custom" }),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ConstraintKind {
    /// `(x₁ − v)² + 2·y·x₂ − y² − 1`.
    OffsetQuadratic { v: f64 },
    /// `x₂ + (x₁² − 2x₁)·exp(−x₁² + y² − 2x₁y)`.
    Exponential,
    Custom(Arc<dyn ConstraintFn>),
}

/// Semi-infinite constraint `g(x, y) ≤ 0 ∀ y ∈ uncertainty`.
#[derive(Debug, Clone)]
pub struct SemiInfiniteConstraint {
    pub kind: ConstraintKind,
    pub uncertainty: Hyperbox,
    pub concave_in_y: bool,
}

impl SemiInfiniteConstraint {
    pub fn offset_quadratic(v: f64) -> Self {
        Self {
            kind: ConstraintKind::OffsetQuadratic { v },
            uncertainty: Hyperbox::new(vec![Interval::new(-1.0, 1.0)]),
            concave_in_y: true,
        }
    }

    /// The exponential constraint over `Y = [y_lo, y_hi]`.
    pub fn exponential(y_lo: f64, y_hi: f64) -> Self {
        Self {
            kind: ConstraintKind::Exponential,
            uncertainty: Hyperbox::new(vec![Interval::new(y_lo, y_hi)]),
            concave_in_y: true,
        }
    }

    pub fn custom(f: Arc<dyn ConstraintFn>, uncertainty: Hyperbox, concave_in_y: bool) -> Self {
        Self {
            kind: ConstraintKind::Custom(f),
            uncertainty,
            concave_in_y,
        }
    }

    pub fn y_dim(&self) -> usize {
        self.uncertainty.dim()
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            ConstraintKind::OffsetQuadratic { v } => {
                let d = x[0] - v;
                d * d + 2.0 * y[0] * x[1] - y[0] * y[0] - 1.0
            }
            ConstraintKind::Exponential => {
                let (a, b, y) = (x[0], x[1], y[0]);
                b + (a * a - 2.0 * a) * (-a * a + y * y - 2.0 * a * y).exp()
            }
            ConstraintKind::Custom(f) => f.value(x, y),
        }
    }

    /// Adds `scale · ∇ₓg(x, y)` to `out`.
    pub fn add_gradient_x(&self, x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) {
        match &self.kind {
            ConstraintKind::OffsetQuadratic { v } => {
                out[0] += scale * 2.0 * (x[0] - v);
                out[1] += scale * 2.0 * y[0];
            }
            ConstraintKind::Exponential => {
                let (a, y) = (x[0], y[0]);
                let coef = a * a - 2.0 * a;
                let e = (-a * a + y * y - 2.0 * a * y).exp();
                out[0] += scale * ((2.0 * a - 2.0) * e + coef * e * (-2.0 * a - 2.0 * y));
                out[1] += scale;
            }
            ConstraintKind::Custom(f) => {
                let mut g = vec![0.0; x.len()];
                f.gradient_x(x, y, &mut g);
                for (o, gi) in out.iter_mut().zip(g) {
                    *o += scale * gi;
                }
            }
        }
    }

    pub fn gradient_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.add_gradient_x(x, y, 1.0, &mut g);
        g
    }

    /// Closed-form maximizer of `g(x, ·)` over the uncertainty box, when known.
    pub fn analytic_argmax(&self, x: &[f64]) -> Option<Scenario> {
        match &self.kind {
            // concave in y with stationary point y = x₂
            ConstraintKind::OffsetQuadratic { .. } => {
                Some(Scenario::scalar(self.uncertainty.0[0].clamp(x[1])))
            }
            ConstraintKind::Exponential => {
                let iv = self.uncertainty.0[0];
                let a = x[0];
                let coef = a * a - 2.0 * a;
                if coef <= 0.0 {
                    // the exponent (y − x₁)² − 2x₁² is smallest at y = x₁
                    Some(Scenario::scalar(iv.clamp(a)))
                } else {
                    // convex in y outside x₁ ∈ [0, 2]: an endpoint wins
                    let lo = self.value(x, &[iv.lo]);
                    let hi = self.value(x, &[iv.hi]);
                    Some(Scenario::scalar(if hi > lo { iv.hi } else { iv.lo }))
                }
            }
            ConstraintKind::Custom(f) if f.has_argmax() => {
                f.argmax(x, &self.uncertainty).map(Scenario::new)
            }
            ConstraintKind::Custom(_) => None,
        }
    }

    pub fn has_analytic_argmax(&self) -> bool {
        match &self.kind {
            ConstraintKind::OffsetQuadratic { .. } | ConstraintKind::Exponential => true,
            ConstraintKind::Custom(f) => f.has_argmax(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            ConstraintKind::OffsetQuadratic { .. } => "offset-quadratic",
            ConstraintKind::Exponential => "exponential",
            ConstraintKind::Custom(_) => "custom",
        }
    }

    pub fn params(&self) -> serde_json::Value {
        let y_box: Vec<[f64; 2]> = self.uncertainty.0.iter().map(|iv| [iv.lo, iv.hi]).collect();
        match &self.kind {
            ConstraintKind::OffsetQuadratic { v } => {
                serde_json::json!({ "kind": self.kind_name(), "v": v, "y_box": y_box })
            }
            _ => serde_json::json!({ "kind": self.kind_name(), "y_box": y_box }),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("instance must have at least one agent")]
    NoAgents,
    #[error("agent count mismatch: {objectives} objectives but {constraints} constraints")]
    AgentCountMismatch { objectives: usize, constraints: usize },
    #[error("decision box must be bounded and nonempty")]
    InvalidBox,
    #[error("agent {agent}: {what} has dimension {got}, expected {expected}")]
    Dimension {
        agent: usize,
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("agent {agent}: uncertainty box must be bounded and nonempty")]
    InvalidUncertainty { agent: usize },
    #[error("global objective is not strictly convex")]
    NotStrictlyConvex,
    #[error("known optimum is infeasible for agent {agent} (g_max = {g_max})")]
    InfeasibleOptimum { agent: usize, g_max: f64 },
    #[error("point is outside the decision box")]
    OutsideBox,
    #[error("point is not interior: slack {slack} is not positive")]
    NonPositiveSlack { slack: f64 },
    #[error(transparent)]
    Llp(#[from] crate::llp::LlpError),
}

/// A distributed robust convex program in standard form.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    n: usize,
    objectives: Vec<LocalObjective>,
    constraints: Vec<SemiInfiniteConstraint>,
    domain: Hyperbox,
    known_optimum: Option<(DecisionVector, f64)>,
}

impl ProblemInstance {
    pub fn new(
        objectives: Vec<LocalObjective>,
        constraints: Vec<SemiInfiniteConstraint>,
        domain: Hyperbox,
    ) -> Result<Self, ProblemError> {
        if objectives.is_empty() {
            return Err(ProblemError::NoAgents);
        }
        if objectives.len() != constraints.len() {
            return Err(ProblemError::AgentCountMismatch {
                objectives: objectives.len(),
                constraints: constraints.len(),
            });
        }
        if !domain.is_valid() {
            return Err(ProblemError::InvalidBox);
        }
        let n = domain.dim();
        for (i, (obj, con)) in objectives.iter().zip(&constraints).enumerate() {
            if let LocalObjective::QuadraticDistance { center } = obj {
                if center.len() != n {
                    return Err(ProblemError::Dimension {
                        agent: i + 1,
                        what: "objective center",
                        got: center.len(),
                        expected: n,
                    });
                }
            }
            if !con.uncertainty.is_valid() {
                return Err(ProblemError::InvalidUncertainty { agent: i + 1 });
            }
            let needs_two = matches!(
                con.kind,
                ConstraintKind::OffsetQuadratic { .. } | ConstraintKind::Exponential
            );
            if needs_two && (n != 2 || con.y_dim() != 1) {
                return Err(ProblemError::Dimension {
                    agent: i + 1,
                    what: "built-in constraint decision space",
                    got: n,
                    expected: 2,
                });
            }
        }
        if !objectives.iter().any(LocalObjective::strictly_convex) {
            return Err(ProblemError::NotStrictlyConvex);
        }
        Ok(Self {
            n,
            objectives,
            constraints,
            domain,
            known_optimum: None,
        })
    }

    /// Attaches a known optimum after checking it against every agent's constraint.
    pub fn with_known_optimum(
        mut self,
        x: DecisionVector,
        value: f64,
        llp: &LlpOracle,
    ) -> Result<Self, ProblemError> {
        for (i, con) in self.constraints.iter().enumerate() {
            let sol = llp.solve(con, x.as_slice())?;
            if sol.g_max > 1e-9 {
                return Err(ProblemError::InfeasibleOptimum {
                    agent: i + 1,
                    g_max: sol.g_max,
                });
            }
        }
        self.known_optimum = Some((x, value));
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.objectives.len()
    }

    pub fn objectives(&self) -> &[LocalObjective] {
        &self.objectives
    }

    pub fn constraints(&self) -> &[SemiInfiniteConstraint] {
        &self.constraints
    }

    pub fn domain(&self) -> &Hyperbox {
        &self.domain
    }

    pub fn known_optimum(&self) -> Option<&(DecisionVector, f64)> {
        self.known_optimum.as_ref()
    }

    /// Global objective `Σ f_i(x)`.
    pub fn total_objective(&self, x: &[f64]) -> f64 {
        self.objectives.iter().map(|f| f.value(x)).sum()
    }
}

/// Objective centers `u_i` of the six-agent case study.
pub const CASE_STUDY_CENTERS: [[f64; 2]; 6] = [
    [0.0, 6.0],
    [0.0, 0.0],
    [1.0, 1.0],
    [-1.0, -1.0],
    [1.0, -1.0],
    [-1.0, 1.0],
];

/// Constraint offsets `v_i` of the six-agent case study.
pub const CASE_STUDY_OFFSETS: [f64; 6] = [-0.75, -0.5, -0.25, 0.25, 0.5, 0.75];

/// Optimal value of the case study, `38 + 6(1 − √7/4)²`.
pub fn case_study_optimal_value() -> f64 {
    let d = 1.0 - 7f64.sqrt() / 4.0;
    38.0 + 6.0 * d * d
}

/// The six-agent case study over `[−2, 2] × [−1, 1]`.
pub fn case_study_instance() -> ProblemInstance {
    let objectives = CASE_STUDY_CENTERS
        .iter()
        .map(|c| LocalObjective::quadratic(c.to_vec()))
        .collect();
    let constraints = CASE_STUDY_OFFSETS
        .iter()
        .map(|&v| SemiInfiniteConstraint::offset_quadratic(v))
        .collect();
    let domain = Hyperbox::new(vec![Interval::new(-2.0, 2.0), Interval::new(-1.0, 1.0)]);
    let mut inst = ProblemInstance::new(objectives, constraints, domain)
        .expect("case study instance is well formed");
    inst.known_optimum = Some((
        DecisionVector::new(vec![0.0, 7f64.sqrt() / 4.0]),
        case_study_optimal_value(),
    ));
    inst
}

/// The exponential fixture constraint with `Y = [0, 2]`.
pub fn exponential_constraint() -> SemiInfiniteConstraint {
    SemiInfiniteConstraint::exponential(0.0, 2.0)
}

/// Decision box the exponential fixture is drawn over.
pub fn exponential_domain() -> Hyperbox {
    Hyperbox::new(vec![Interval::new(0.0, 2.0), Interval::new(0.0, 1.0)])
}

/// Returns `min_i −g_i^max(x0)`; a positive value certifies `x0` as an
/// interior point and bounds every admissible initial restriction.
pub fn check_interior_point(
    instance: &ProblemInstance,
    x0: &DecisionVector,
    llp: &LlpOracle,
) -> Result<f64, ProblemError> {
    if !instance.domain.contains(x0.as_slice()) {
        return Err(ProblemError::OutsideBox);
    }
    let mut slack = f64::INFINITY;
    for con in &instance.constraints {
        let sol = llp.solve(con, x0.as_slice())?;
        slack = slack.min(-sol.g_max);
    }
    if slack > 0.0 {
        Ok(slack)
    } else {
        Err(ProblemError::NonPositiveSlack { slack })
    }
}
