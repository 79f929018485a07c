//! Finite-time distributed stopping via min-consensus counters.
//!
//! Each agent keeps `(h, c)`. `c` counts consecutive slots in which the local
//! criterion held over the agent's closed in-neighborhood; `h` tracks the
//! smallest such streak seen anywhere upstream. A value of `h` that reaches
//! `T·(m − 1) + 1` certifies the criterion network-wide.

use serde::{Deserialize, Serialize};

use crate::graph::GraphSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Every agent's own gap is at most `ε_f`.
    #[serde(rename = "I")]
    I,
    /// Every closed in-neighborhood's gap sum is at most `ε_f`.
    #[serde(rename = "II")]
    II,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" | "1" | "i" => Ok(Method::I),
            "II" | "2" | "ii" => Ok(Method::II),
            other => Err(format!("unknown termination method `{other}` (expected I or II)")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::I => "I",
            Method::II => "II",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counter {
    pub h: u64,
    pub c: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Stop,
    Continue,
}

/// Closed in-neighborhood of `node` (1-based) at slot `t`, ascending.
fn closed_neighborhood(schedule: &GraphSchedule, node: usize, t: usize) -> Vec<usize> {
    let mut nb = schedule.in_neighbors(node, t);
    let pos = nb.partition_point(|&j| j < node);
    nb.insert(pos, node);
    nb
}

/// Whether agent `node`'s local criterion holds at slot `t`.
pub fn local_criterion(method: Method, gaps: &[f64], schedule: &GraphSchedule, node: usize, t: usize, eps_f: f64) -> bool {
    let nb = closed_neighborhood(schedule, node, t);
    match method {
        Method::I => nb.iter().all(|&j| gaps[j - 1] <= eps_f),
        Method::II => nb.iter().map(|&j| gaps[j - 1]).sum::<f64>() <= eps_f,
    }
}

fn step(method: Method, counters: &[Counter], gaps: &[f64], schedule: &GraphSchedule, t: usize, eps_f: f64) -> Vec<Counter> {
    (1..=counters.len())
        .map(|i| {
            let nb = closed_neighborhood(schedule, i, t);
            let floor = nb
                .iter()
                .map(|&j| counters[j - 1].h.min(counters[j - 1].c))
                .min()
                .expect("closed neighborhood contains the node itself");
            let c = if local_criterion(method, gaps, schedule, i, t, eps_f) {
                counters[i - 1].c + 1
            } else {
                0
            };
            Counter { h: floor + 1, c }
        })
        .collect()
}

/// One synchronous update of the per-agent criterion recursion.
pub fn step_method1(counters: &[Counter], gaps: &[f64], schedule: &GraphSchedule, t: usize, eps_f: f64) -> Vec<Counter> {
    step(Method::I, counters, gaps, schedule, t, eps_f)
}

/// One synchronous update of the neighborhood-sum recursion; the gaps play
/// the role of the values received alongside `(h, c)`.
pub fn step_method2(counters: &[Counter], gaps: &[f64], schedule: &GraphSchedule, t: usize, eps_f: f64) -> Vec<Counter> {
    step(Method::II, counters, gaps, schedule, t, eps_f)
}

/// Slots per stopping round and the certifying threshold on `h`.
///
/// A single agent has nobody to wait for, so it still runs one counting slot
/// before the check; otherwise `h(1) = 1` would certify vacuously.
pub fn round_length(schedule: &GraphSchedule) -> u64 {
    let hops = (schedule.m() - 1).max(1);
    (schedule.window() * hops + 1) as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub decision: Decision,
    pub slots_used: usize,
    pub threshold: u64,
    pub counters: Vec<Counter>,
    /// Every agent reached the threshold at the check slot.
    pub simultaneous: bool,
}

/// Resets the counters, runs one full round from `start_slot` and checks
/// whether any agent reached the threshold.
pub fn run_stopping_round(
    gaps: &[f64],
    schedule: &GraphSchedule,
    start_slot: usize,
    method: Method,
    eps_f: f64,
) -> RoundOutcome {
    let threshold = round_length(schedule);
    let mut counters = vec![Counter::default(); schedule.m()];
    for k in 0..threshold as usize {
        counters = step(method, &counters, gaps, schedule, start_slot + k, eps_f);
    }
    let reached = counters.iter().filter(|c| c.h >= threshold).count();
    let decision = if reached > 0 { Decision::Stop } else { Decision::Continue };
    RoundOutcome {
        decision,
        slots_used: threshold as usize,
        threshold,
        counters,
        simultaneous: reached == schedule.m(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, directed_cycle, singleton, GraphSchedule};

    fn pair() -> GraphSchedule {
        GraphSchedule::new(2, vec![vec![(1, 2), (2, 1)]]).unwrap()
    }

    #[test]
    fn method1_counts_up_when_all_gaps_small() {
        let g = pair();
        let gaps = [0.005, 0.01];
        let mut cs = vec![Counter::default(); 2];
        for t in 0..3 {
            cs = step_method1(&cs, &gaps, &g, t, 0.01);
            assert!(cs.iter().all(|c| c.h == t as u64 + 1 && c.c == t as u64 + 1));
        }
        let out = run_stopping_round(&gaps, &g, 0, Method::I, 0.01);
        assert_eq!(out.slots_used, 2);
        assert_eq!(out.decision, Decision::Stop);
        assert!(out.counters.iter().all(|c| c.h == 2));

        let zero = run_stopping_round(&[0.0, 0.0], &g, 0, Method::I, 0.01);
        assert_eq!(zero, out);
    }

    #[test]
    fn method1_blocked_by_infinite_gap() {
        let g = pair();
        let gaps = [f64::INFINITY, 0.0];
        let mut cs = vec![Counter::default(); 2];
        for t in 0..20 {
            cs = step_method1(&cs, &gaps, &g, t, 0.01);
            assert_eq!(cs[0].c, 0);
            assert!(cs[0].h <= 1);
            assert!(cs[1].h <= 2);
        }
        assert_eq!(run_stopping_round(&gaps, &g, 0, Method::I, 0.01).decision, Decision::Continue);
    }

    #[test]
    fn method2_on_complete_graph() {
        // eps_f / 6 and eps_f / 3 chosen exactly representable
        let g = complete(6).unwrap();
        let eps_f = 0.75;
        let out = run_stopping_round(&[eps_f / 6.0; 6], &g, 0, Method::II, eps_f);
        assert_eq!(out.decision, Decision::Stop);
        assert_eq!(out.slots_used, 6);
        assert!(out.simultaneous);

        let gaps = [eps_f / 3.0; 6];
        let mut cs = vec![Counter::default(); 6];
        for t in 0..10 {
            cs = step_method2(&cs, &gaps, &g, t, eps_f);
            assert!(cs.iter().all(|c| c.c == 0));
        }
        assert_eq!(run_stopping_round(&gaps, &g, 0, Method::II, eps_f).decision, Decision::Continue);
    }

    #[test]
    fn single_agent_reduces_to_own_gap() {
        let g = singleton();
        assert_eq!(run_stopping_round(&[0.005], &g, 0, Method::II, 0.01).decision, Decision::Stop);
        assert_eq!(run_stopping_round(&[0.02], &g, 0, Method::II, 0.01).decision, Decision::Continue);
        assert_eq!(run_stopping_round(&[0.02], &g, 0, Method::I, 0.01).decision, Decision::Continue);
        let cs = step_method2(&[Counter::default()], &[0.005], &g, 0, 0.01);
        assert_eq!(cs[0].c, 1);
    }

    #[test]
    fn cycle_round_method1() {
        let g = directed_cycle(6).unwrap();
        let out = run_stopping_round(&[0.001; 6], &g, 0, Method::I, 0.01);
        assert_eq!(out.decision, Decision::Stop);
        assert_eq!(out.slots_used, 6);
        assert!(out.counters.iter().all(|c| c.h == 6));
        let mut gaps = [0.001; 6];
        gaps[3] = 0.02;
        assert_eq!(run_stopping_round(&gaps, &g, 0, Method::I, 0.01).decision, Decision::Continue);
    }

    #[test]
    fn method2_round_can_miss_a_late_violation() {
        // agent 1's neighborhood sum fails only on even slots
        let g = GraphSchedule::new(3, vec![vec![(1, 2), (1, 3), (2, 1), (3, 1)], vec![(1, 3), (2, 1), (3, 2)]]).unwrap();
        let gaps = [0.005, 0.003, 0.003];
        assert!(!local_criterion(Method::II, &gaps, &g, 1, 0, 0.01));
        assert!((0..3).all(|i| local_criterion(Method::II, &gaps, &g, i + 1, 1, 0.01)));
        assert_eq!(run_stopping_round(&gaps, &g, 0, Method::II, 0.01).decision, Decision::Continue);
        // starting one slot later the failing slot is the last one, too late to reach agent 2
        let out = run_stopping_round(&gaps, &g, 1, Method::II, 0.01);
        assert_eq!(out.decision, Decision::Stop);
        assert!(!local_criterion(Method::II, &gaps, &g, 1, 2, 0.01));
        assert_eq!(out.counters[1].h, 3);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("I".parse::<Method>().unwrap(), Method::I);
        assert_eq!("II".parse::<Method>().unwrap(), Method::II);
        assert!("III".parse::<Method>().is_err());
        assert_eq!(serde_json::to_string(&Method::II).unwrap(), "\"II\"");
    }
}
