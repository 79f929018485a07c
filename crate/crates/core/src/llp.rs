//! Lower-level problem: global maximization of `g(x, ·)` over an agent's
//! uncertainty box, used to certify or refute feasibility of a query point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{Scenario, SemiInfiniteConstraint};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Error, PartialEq)]
pub enum LlpError {
    #[error("numeric maximization supports one uncertain coordinate, got {0}")]
    UnsupportedDimension(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlpSettings {
    /// Uniform grid size for the numeric path.
    pub grid_points: usize,
    /// Interval width at which golden-section refinement stops.
    pub refine_tol: f64,
    /// `g_max` above this is a violation.
    pub feasibility_tol: f64,
}

impl Default for LlpSettings {
    fn default() -> Self {
        Self {
            grid_points: 2001,
            refine_tol: 1e-10,
            feasibility_tol: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlpSolution {
    pub g_max: f64,
    pub y_star: Scenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Feasible,
    Violated,
}

/// Strict test: only `g_max > tol` is a violation.
pub fn feasibility_verdict(g_max: f64, tol: f64) -> Verdict {
    if g_max > tol {
        Verdict::Violated
    } else {
        Verdict::Feasible
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LlpOracle {
    pub settings: LlpSettings,
    numeric_only: bool,
}

impl LlpOracle {
    pub fn new(settings: LlpSettings) -> Self {
        Self {
            settings,
            numeric_only: false,
        }
    }

    /// Oracle that ignores closed-form maximizers and always searches.
    pub fn numeric_only(settings: LlpSettings) -> Self {
        Self {
            settings,
            numeric_only: true,
        }
    }

    pub fn solve(&self, con: &SemiInfiniteConstraint, x: &[f64]) -> Result<LlpSolution, LlpError> {
        if !self.numeric_only {
            if let Some(y) = con.analytic_argmax(x) {
                return Ok(LlpSolution {
                    g_max: con.value(x, y.as_slice()),
                    y_star: y,
                });
            }
        }
        self.solve_numeric(con, x)
    }

    pub fn verdict(&self, g_max: f64) -> Verdict {
        feasibility_verdict(g_max, self.settings.feasibility_tol)
    }

    fn solve_numeric(&self, con: &SemiInfiniteConstraint, x: &[f64]) -> Result<LlpSolution, LlpError> {
        if con.y_dim() != 1 {
            return Err(LlpError::UnsupportedDimension(con.y_dim()));
        }
        let iv = con.uncertainty.0[0];
        let g = |y: f64| con.value(x, &[y]);
        let points = self.settings.grid_points.max(2);
        if iv.width() == 0.0 {
            return Ok(LlpSolution {
                g_max: g(iv.lo),
                y_star: Scenario::scalar(iv.lo),
            });
        }
        let step = iv.width() / (points - 1) as f64;
        let grid_y = |k: usize| {
            if k == points - 1 {
                iv.hi
            } else {
                iv.lo + step * k as f64
            }
        };
        let values: Vec<f64> = (0..points).map(|k| g(grid_y(k))).collect();

        // candidate cells, best first; ties resolved toward smaller index
        let mut order: Vec<usize> = (0..points).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let candidates = if con.concave_in_y { 1 } else { 5.min(points) };

        let (mut best_y, mut best_g) = (grid_y(order[0]), values[order[0]]);
        for &k in &order[..candidates] {
            let lo = grid_y(k.saturating_sub(1));
            let hi = grid_y((k + 1).min(points - 1));
            let (y, v) = golden_section_max(&g, lo, hi, self.settings.refine_tol);
            if v > best_g {
                best_g = v;
                best_y = y;
            }
        }
        Ok(LlpSolution {
            g_max: best_g,
            y_star: Scenario::scalar(best_y),
        })
    }
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`; returns the
/// best point seen, including the endpoints.
pub fn golden_section_max(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while (b - a) > tol && iterations < 200 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    let mid = 0.5 * (a + b);
    [(lo, f(lo)), (hi, f(hi)), (c, fc), (d, fd), (mid, f(mid))]
        .into_iter()
        .fold((mid, f64::NEG_INFINITY), |best, cand| {
            if cand.1 > best.1 {
                cand
            } else {
                best
            }
        })
}
