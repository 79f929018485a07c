//! Periodic time-varying directed communication graphs.
//!
//! Nodes are numbered `1..=m`. An edge `(j, i)` means node `i` receives from
//! node `j` during that slot. Self-loops are implicit and never stored.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("topology needs at least {min} nodes, got {got}")]
    InvalidSize { min: usize, got: usize },
    #[error("schedule needs at least one slot")]
    EmptySchedule,
    #[error("edge ({0}, {1}) has an endpoint outside 1..={2}")]
    BadEdge(usize, usize, usize),
    #[error("no window length up to {bound} is strongly connected")]
    NotUniformlyConnected { bound: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Cycle,
    Customized,
    Complete,
    Explicit,
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::Cycle => "cycle",
            Topology::Customized => "customized",
            Topology::Complete => "complete",
            Topology::Explicit => "explicit",
        }
    }
}

impl std::str::FromStr for Topology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cycle" => Ok(Topology::Cycle),
            "customized" => Ok(Topology::Customized),
            "complete" => Ok(Topology::Complete),
            "explicit" => Ok(Topology::Explicit),
            other => Err(format!("unknown topology `{other}`")),
        }
    }
}

/// Periodic sequence of directed edge sets with its connectivity window.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSchedule {
    m: usize,
    topology: Topology,
    slots: Vec<BTreeSet<(usize, usize)>>,
    window: usize,
}

impl GraphSchedule {
    /// Builds a schedule and computes its connectivity window.
    pub fn new(m: usize, slots: Vec<Vec<(usize, usize)>>) -> Result<Self, GraphError> {
        Self::with_topology(m, Topology::Explicit, slots)
    }

    fn with_topology(
        m: usize,
        topology: Topology,
        slots: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self, GraphError> {
        if m == 0 {
            return Err(GraphError::InvalidSize { min: 1, got: 0 });
        }
        if slots.is_empty() {
            return Err(GraphError::EmptySchedule);
        }
        let mut sets = Vec::with_capacity(slots.len());
        for slot in slots {
            let mut set = BTreeSet::new();
            for (j, i) in slot {
                if j == 0 || i == 0 || j > m || i > m {
                    return Err(GraphError::BadEdge(j, i, m));
                }
                if j != i {
                    set.insert((j, i));
                }
            }
            sets.push(set);
        }
        let mut sched = Self {
            m,
            topology,
            slots: sets,
            window: 0,
        };
        sched.window = connectivity_window(&sched)?;
        Ok(sched)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn period(&self) -> usize {
        self.slots.len()
    }

    /// Smallest `T` such that every `T` consecutive slots form a strongly
    /// connected union.
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn edges(&self, t: usize) -> &BTreeSet<(usize, usize)> {
        &self.slots[t % self.slots.len()]
    }

    pub fn slots(&self) -> &[BTreeSet<(usize, usize)>] {
        &self.slots
    }

    /// In-neighbors of `node` at slot `t`, excluding `node`, ascending.
    pub fn in_neighbors(&self, node: usize, t: usize) -> Vec<usize> {
        self.edges(t)
            .iter()
            .filter(|&&(_, i)| i == node)
            .map(|&(j, _)| j)
            .collect()
    }

    /// Out-neighbors of `node` at slot `t`, excluding `node`, ascending.
    pub fn out_neighbors(&self, node: usize, t: usize) -> Vec<usize> {
        self.edges(t)
            .iter()
            .filter(|&&(j, _)| j == node)
            .map(|&(_, i)| i)
            .collect()
    }

    /// Slots needed to flood one value from every node to every other:
    /// `T·(m − 1)`.
    pub fn flood_bound(&self) -> usize {
        self.window * (self.m - 1)
    }
}

/// Directed cycle `1 → 2 → … → m → 1`.
pub fn directed_cycle(m: usize) -> Result<GraphSchedule, GraphError> {
    if m < 2 {
        return Err(GraphError::InvalidSize { min: 2, got: m });
    }
    let edges = (1..=m).map(|i| (i, i % m + 1)).collect();
    GraphSchedule::with_topology(m, Topology::Cycle, vec![edges])
}

/// Complete graph on `1..m−1` plus a bidirectional link `m−1 ↔ m`.
pub fn customized(m: usize) -> Result<GraphSchedule, GraphError> {
    if m < 3 {
        return Err(GraphError::InvalidSize { min: 3, got: m });
    }
    let mut edges = Vec::new();
    for j in 1..m {
        for i in 1..m {
            if i != j {
                edges.push((j, i));
            }
        }
    }
    edges.push((m - 1, m));
    edges.push((m, m - 1));
    GraphSchedule::with_topology(m, Topology::Customized, vec![edges])
}

/// All `m(m−1)` ordered pairs.
pub fn complete(m: usize) -> Result<GraphSchedule, GraphError> {
    if m < 2 {
        return Err(GraphError::InvalidSize { min: 2, got: m });
    }
    let mut edges = Vec::with_capacity(m * (m - 1));
    for j in 1..=m {
        for i in 1..=m {
            if i != j {
                edges.push((j, i));
            }
        }
    }
    GraphSchedule::with_topology(m, Topology::Complete, vec![edges])
}

/// Single-node schedule with no edges.
pub fn singleton() -> GraphSchedule {
    GraphSchedule::with_topology(1, Topology::Explicit, vec![vec![]]).expect("one node is connected")
}

/// Builds one of the named generators.
pub fn generate(topology: Topology, m: usize) -> Result<GraphSchedule, GraphError> {
    match topology {
        Topology::Cycle => directed_cycle(m),
        Topology::Customized => customized(m),
        Topology::Complete => complete(m),
        Topology::Explicit => Err(GraphError::EmptySchedule),
    }
}

/// Computes the connectivity window, checking every start offset within one
/// period for each candidate length up to `P·m`.
pub fn connectivity_window(schedule: &GraphSchedule) -> Result<usize, GraphError> {
    let m = schedule.m;
    let p = schedule.slots.len();
    let bound = p * m;
    if m == 1 {
        return Ok(1);
    }
    for len in 1..=bound {
        let all_ok = (0..p).all(|start| {
            let mut adj = vec![vec![false; m]; m];
            for t in start..start + len {
                for &(j, i) in schedule.edges(t) {
                    adj[j - 1][i - 1] = true;
                }
            }
            strongly_connected(&adj)
        });
        if all_ok {
            return Ok(len);
        }
    }
    Err(GraphError::NotUniformlyConnected { bound })
}

/// Strong connectivity by forward and backward closure from node 0.
pub fn strongly_connected(adj: &[Vec<bool>]) -> bool {
    let m = adj.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; m];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(u) = stack.pop() {
            for v in 0..m {
                let e = if forward { adj[u][v] } else { adj[v][u] };
                if e && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    m <= 1 || (reach(true) && reach(false))
}
