//! Batch front end: configured runs, the six-run case-study table, bound
//! trajectories and accuracy sweeps.

pub mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use drco_core::bounds::{accuracy_sweep, write_sweep_csv};
use drco_core::config::ConfigError;
use drco_core::llp::LlpOracle;
use drco_core::sim::{self, trace, write_trace_csv, DEFAULT_PLOT_CEILING};
use drco_core::{Method, RunConfig, RunResult, SimError, SweepRow, Topology, UpperBound};

use svg::{Chart, Series};

pub const CASE_TOPOLOGIES: [Topology; 3] = [Topology::Cycle, Topology::Customized, Topology::Complete];
pub const METHODS: [Method; 2] = [Method::I, Method::II];

/// Command-line overrides applied on top of a loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<Method>,
    pub topology: Option<Topology>,
    pub eps_f: Option<f64>,
    pub eps0: Option<f64>,
    pub r: Option<f64>,
    pub max_iter: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(t) = self.topology {
            cfg.topology.topology = t;
            cfg.topology.slots = None;
        }
        if let Some(v) = self.eps_f {
            cfg.eps_f = v;
        }
        if let Some(v) = self.eps0 {
            cfg.eps0 = v;
        }
        if let Some(v) = self.r {
            cfg.r = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
    }
}

/// Why a command failed; the binary maps this to its exit status.
#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

/// Runs one configured experiment and writes `results.json`, `trace.csv`
/// and optionally `trace.svg` into `out`.
pub fn cmd_run(config_path: &Path, overrides: &Overrides, out: &Path, plot: bool) -> Result<RunResult, CommandError> {
    let mut cfg = RunConfig::load(config_path)?;
    overrides.apply(&mut cfg);
    let resolved = cfg.resolve()?;
    let result = sim::run(&resolved.instance, &resolved.schedule, &resolved.params)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let llp = LlpOracle::new(resolved.params.llp);
    let feasibility: Vec<f64> = result
        .solutions
        .iter()
        .zip(resolved.instance.constraints())
        .map(|(x, c)| llp.solve(c, x.as_slice()).map(|s| s.g_max))
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow::anyhow!(e))?;
    let last = result.last();
    let summary = serde_json::json!({
        "terminated": result.terminated,
        "iterations": result.iterations,
        "method": result.method,
        "topology": resolved.schedule.topology(),
        "m": resolved.instance.m(),
        "accuracy_bound": result.accuracy_bound,
        "final_lower": last.map(|r| r.lower),
        "final_upper": last.and_then(|r| r.upper.finite()),
        "solutions": result.solutions,
        "g_max": feasibility,
        "total_slots": result.total_slots,
        "records": result.records,
    });
    let json = serde_json::to_string_pretty(&summary).context("serializing results")?;
    fs::write(out.join("results.json"), json + "\n").context("writing results.json")?;
    let points = trace(&result, DEFAULT_PLOT_CEILING);
    let file = fs::File::create(out.join("trace.csv")).context("creating trace.csv")?;
    write_trace_csv(&points, file).context("writing trace.csv")?;
    if plot {
        let chart = Chart::new(
            format!("Bounds, method {}", result.method),
            "iteration",
            "objective sum",
        )
        .with(Series::new("lower", points.iter().map(|p| (p.k as f64, p.lower)).collect(), "black"))
        .with(Series::new("upper", points.iter().map(|p| (p.k as f64, p.upper)).collect(), "black").dashed("6 3"));
        fs::write(out.join("trace.svg"), chart.render()).context("writing trace.svg")?;
    }
    Ok(result)
}

/// One of the six case-study runs.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub topology: Topology,
    pub method: Method,
    pub result: RunResult,
    /// `g_max` of each agent's final point from the analytic oracle.
    pub g_max: Vec<f64>,
}

impl CaseRun {
    pub fn lower(&self) -> f64 {
        self.result.last().map_or(f64::NAN, |r| r.lower)
    }

    pub fn upper(&self) -> UpperBound {
        self.result.last().map_or(UpperBound::Infinite, |r| r.upper)
    }

    pub fn feasible(&self, i: usize) -> bool {
        self.g_max[i] <= 1e-9
    }
}

pub fn run_case(topology: Topology, method: Method) -> Result<CaseRun> {
    let resolved = RunConfig::case_study(topology, method).resolve()?;
    let result = sim::run(&resolved.instance, &resolved.schedule, &resolved.params)?;
    let llp = LlpOracle::new(resolved.params.llp);
    let g_max = result
        .solutions
        .iter()
        .zip(resolved.instance.constraints())
        .map(|(x, c)| llp.solve(c, x.as_slice()).map(|s| s.g_max))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CaseRun {
        topology,
        method,
        result,
        g_max,
    })
}

pub fn case_runs() -> Result<Vec<CaseRun>> {
    let mut runs = Vec::new();
    for topology in CASE_TOPOLOGIES {
        for method in METHODS {
            runs.push(run_case(topology, method)?);
        }
    }
    Ok(runs)
}

fn fmt_upper(u: UpperBound, digits: usize) -> String {
    match u {
        UpperBound::Finite(v) => format!("{v:.digits$}"),
        UpperBound::Infinite => "inf".into(),
    }
}

pub fn table2_csv(runs: &[CaseRun]) -> String {
    let m = runs.first().map_or(0, |r| r.g_max.len());
    let mut s = String::from("topology,method,iterations,lower,upper,gap,accuracy_bound");
    for i in 1..=m {
        let _ = write!(s, ",x1_{i},x2_{i},g_max_{i},feasible_{i}");
    }
    s.push('\n');
    for run in runs {
        let gap = run.upper().finite().map(|u| u - run.lower());
        let _ = write!(
            s,
            "{},{},{},{:.6},{},{},{:.6}",
            run.topology.name(),
            run.method,
            run.result.iterations,
            run.lower(),
            fmt_upper(run.upper(), 6),
            gap.map_or("inf".into(), |g| format!("{g:.6}")),
            run.result.accuracy_bound
        );
        for (i, g) in run.g_max.iter().enumerate() {
            let x = &run.result.solutions[i].0;
            let _ = write!(s, ",{:.6},{:.6},{:.3e},{}", x[0], x[1], g, run.feasible(i));
        }
        s.push('\n');
    }
    s
}

pub fn table2_text(runs: &[CaseRun]) -> String {
    let mut s = String::new();
    for run in runs {
        let _ = writeln!(
            s,
            "{} graph, method {}: {} iterations, lower {:.4}, upper {}",
            run.topology.name(),
            run.method,
            run.result.iterations,
            run.lower(),
            fmt_upper(run.upper(), 4)
        );
        let _ = writeln!(s, "  {:<6} {:>9} {:>9} {:>11}  feasible", "agent", "x1", "x2", "g_max");
        for (i, g) in run.g_max.iter().enumerate() {
            let x = &run.result.solutions[i].0;
            let mark = if run.feasible(i) { "\u{2713}" } else { "\u{2717}" };
            let _ = writeln!(s, "  {:<6} {:>9.4} {:>9.4} {:>11.3e}  {}", i + 1, x[0], x[1], g, mark);
        }
        s.push('\n');
    }
    s
}

/// Writes the table CSV plus per-run traces and one bound plot per method.
pub fn write_table2_artifacts(runs: &[CaseRun], out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("table2.csv"), table2_csv(runs)).context("writing table2.csv")?;
    let style = |t: Topology| match t {
        Topology::Cycle => ("black", None),
        Topology::Customized => ("blue", Some("2 3")),
        _ => ("green", Some("8 3 2 3")),
    };
    for method in METHODS {
        let mut chart = Chart::new(format!("Bounds, method {method}"), "iteration", "objective sum");
        for run in runs.iter().filter(|r| r.method == method) {
            let points = trace(&run.result, DEFAULT_PLOT_CEILING);
            let name = format!("trace_{}_{}.csv", run.topology.name(), method);
            write_trace_csv(&points, fs::File::create(out.join(&name))?).with_context(|| format!("writing {name}"))?;
            let (color, dash) = style(run.topology);
            for (label, pts) in [
                ("lower", points.iter().map(|p| (p.k as f64, p.lower)).collect::<Vec<_>>()),
                ("upper", points.iter().map(|p| (p.k as f64, p.upper)).collect()),
            ] {
                let mut series = Series::new(format!("{} {label}", run.topology.name()), pts, color);
                series.dash = dash;
                chart = chart.with(series);
            }
        }
        fs::write(out.join(format!("bounds_method_{method}.svg")), chart.render())?;
    }
    Ok(())
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_sweep_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}

/// Accuracy guarantees versus agent count for the three generated graphs.
pub fn fig3(m_max: usize, eps_f: f64) -> Result<(Vec<SweepRow>, String)> {
    anyhow::ensure!(m_max >= 3, "--m-max must be at least 3, got {m_max}");
    let rows = accuracy_sweep(&CASE_TOPOLOGIES, 3..=m_max, eps_f)?;
    let pick = |t: Topology, f: fn(&SweepRow) -> f64| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.topology == t.name())
            .map(|r| (r.m as f64, f(r)))
            .collect()
    };
    let ms: Vec<f64> = (3..=m_max).map(|m| m as f64).collect();
    let chart = Chart::new("Accuracy guarantee vs. number of agents", "agents m", "accuracy bound")
        .with(Series::new("centralized", ms.iter().map(|&m| (m, SweepRow::centralized(eps_f))).collect(), "red").dashed("2 2"))
        .with(Series::new("method I", pick(Topology::Cycle, |r| r.method1_bound), "orange"))
        .with(Series::new("method II cycle", pick(Topology::Cycle, |r| r.method2_bound), "black"))
        .with(Series::new("method II customized", pick(Topology::Customized, |r| r.method2_bound), "blue").dashed("6 3"))
        .with(Series::new("method II complete", pick(Topology::Complete, |r| r.method2_bound), "grey"));
    Ok((rows, chart.render()))
}
