//! A-priori accuracy guarantees of the two stopping methods.

use std::io;

use serde::{Deserialize, Serialize};

use crate::graph::{self, GraphError, GraphSchedule, Topology};

/// Accuracy of the per-agent criterion: `m · ε_f`.
pub fn method1_accuracy(m: usize, eps_f: f64) -> f64 {
    m as f64 * eps_f
}

/// Weight of each agent's gap in the aggregated neighborhood constraint:
/// `w_j = Σ_{t<T} (1 + outdeg_j(t))`, counting how often `e_j` appears across
/// all closed in-neighborhoods of the first window.
pub fn aggregate_weights(schedule: &GraphSchedule) -> Vec<f64> {
    let m = schedule.m();
    let mut w = vec![0.0; m];
    for t in 0..schedule.window() {
        for (j, wj) in w.iter_mut().enumerate() {
            *wj += 1.0 + schedule.out_neighbors(j + 1, t).len() as f64;
        }
    }
    w
}

/// Maximizes `Σ e_j` subject to `Σ w_j e_j ≤ capacity`, `0 ≤ e_j ≤ cap`
/// (fractional knapsack with unit profits: fill cheapest weights first).
pub fn greedy_box_knapsack(weights: &[f64], capacity: f64, cap: f64) -> f64 {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(a.cmp(&b)));
    let mut remaining = capacity;
    let mut total = 0.0;
    for j in order {
        if remaining <= 0.0 {
            break;
        }
        let take = cap.min(remaining / weights[j]);
        total += take;
        remaining -= take * weights[j];
    }
    total
}

/// Accuracy of the neighborhood-sum criterion: optimum of the single
/// aggregated constraint LP with capacity `m·T·ε_f`.
pub fn method2_accuracy(schedule: &GraphSchedule, eps_f: f64) -> f64 {
    let capacity = (schedule.m() * schedule.window()) as f64 * eps_f;
    greedy_box_knapsack(&aggregate_weights(schedule), capacity, eps_f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub topology: String,
    pub m: usize,
    #[serde(rename = "T")]
    pub window: usize,
    pub method1_bound: f64,
    pub method2_bound: f64,
}

impl SweepRow {
    /// The centralized accuracy equals `ε_f` regardless of the network.
    pub fn centralized(eps_f: f64) -> f64 {
        eps_f
    }
}

/// Both guarantees for every topology and agent count.
pub fn accuracy_sweep(
    topologies: &[Topology],
    m_range: std::ops::RangeInclusive<usize>,
    eps_f: f64,
) -> Result<Vec<SweepRow>, GraphError> {
    let mut rows = Vec::new();
    for &topology in topologies {
        for m in m_range.clone() {
            let schedule = graph::generate(topology, m)?;
            rows.push(SweepRow {
                topology: topology.name().to_string(),
                m,
                window: schedule.window(),
                method1_bound: method1_accuracy(m, eps_f),
                method2_bound: method2_accuracy(&schedule, eps_f),
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: io::Write>(rows: &[SweepRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, customized, directed_cycle, singleton};

    #[test]
    fn method1_examples() {
        assert!((method1_accuracy(6, 0.01) - 0.06).abs() < 1e-15);
        assert_eq!(method1_accuracy(1, 0.01), 0.01);
        assert!((method1_accuracy(50, 0.01) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn method2_closed_forms() {
        for m in 2..=50 {
            let c = method2_accuracy(&complete(m).unwrap(), 0.01);
            assert!((c - 0.01).abs() < 1e-12, "complete({m}) = {c}");
            let y = method2_accuracy(&directed_cycle(m).unwrap(), 0.01);
            assert!((y - 0.01 * m as f64 / 2.0).abs() < 1e-12, "cycle({m}) = {y}");
        }
        assert_eq!(method2_accuracy(&singleton(), 0.01), 0.01);
    }

    #[test]
    fn customized_lies_between() {
        for m in 3..=50 {
            let c = method2_accuracy(&complete(m).unwrap(), 0.01);
            let b = method2_accuracy(&customized(m).unwrap(), 0.01);
            let a = method2_accuracy(&directed_cycle(m).unwrap(), 0.01);
            assert!(c <= b + 1e-12 && b <= a + 1e-12, "m={m}: {c} {b} {a}");
        }
    }

    #[test]
    fn weights_of_generators() {
        assert_eq!(aggregate_weights(&directed_cycle(5).unwrap()), vec![2.0; 5]);
        assert_eq!(aggregate_weights(&complete(4).unwrap()), vec![4.0; 4]);
        let w = aggregate_weights(&customized(5).unwrap());
        assert_eq!(w, vec![4.0, 4.0, 4.0, 5.0, 2.0]);
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = accuracy_sweep(&[Topology::Cycle], 2..=3, 0.01).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("topology,m,T,method1_bound,method2_bound"));
        assert_eq!(lines.next(), Some("cycle,2,1,0.02,0.01"));
        assert_eq!(lines.next(), Some("cycle,3,1,0.03,0.015"));
    }
}
