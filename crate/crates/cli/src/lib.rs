//! Command implementations behind the `trackassign` binary.
//!
//! Each command takes a resolved [`RunConfig`], returns its in-memory rows,
//! and optionally writes them; the binary only maps errors to exit codes.

pub mod config;
pub mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use trackassign::baselines::count_combinations;
use trackassign::sim::{generate_scenario, run_comparison, run_tracking, summarize};

pub use config::{emit_config, parse_config, Format, RunConfig, TargetRange};
use output::{compare_rows, summary_rows, track_rows, CompareRow, SummaryRow, TrackRow};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("budget refusal: {0}")]
    Budget(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Io(_) => 5,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<trackassign::Error> for CliError {
    fn from(e: trackassign::Error) -> Self {
        use trackassign::Error as E;
        match e {
            E::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            E::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            E::InvalidConfig(_) | E::NonFinite(_) => CliError::Config(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

fn with_output(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    match out {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)
        }
    }
}

/// Closed-loop rollout, one row per (step, target) plus a mean row.
pub fn cmd_track(cfg: &RunConfig) -> Result<Vec<TrackRow>, CliError> {
    let spec = cfg.scenario_spec()?;
    let scenario = generate_scenario(&spec)?;
    let run = run_tracking(&scenario, cfg.solver.into(), cfg.steps, cfg.budget as u128).map_err(|e| match e {
        trackassign::Error::CountOverflow => CliError::Budget(format!("exhaustive search refused: {e}")),
        e => e.into(),
    })?;
    if !run.idle_robots.is_empty() {
        log::info!("robots without a target hold their idle action: {:?}", run.idle_robots);
    }
    Ok(track_rows(&run))
}

pub fn write_track_output(cfg: &RunConfig, rows: &[TrackRow]) -> Result<(), CliError> {
    with_output(cfg.out.as_deref(), |w| output::write_track(rows, cfg.format, w))
}

pub struct CompareOutput {
    pub rows: Vec<CompareRow>,
    pub summary: Vec<SummaryRow>,
}

/// Single-epoch solver comparison over the configured target range.
pub fn cmd_compare(cfg: &RunConfig) -> Result<CompareOutput, CliError> {
    let spec = cfg.comparison_spec()?;
    let records = run_comparison(&spec)?;
    Ok(CompareOutput {
        rows: compare_rows(&records, cfg.timings),
        summary: summary_rows(&summarize(&records)),
    })
}

/// `results.csv` -> `results_summary.csv`.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_summary.{}", ext.to_string_lossy()),
        None => format!("{stem}_summary"),
    };
    out.with_file_name(name)
}

/// Records go to `out` (or stdout); the per-M summary goes to stdout after
/// them and, when writing a file, to a sibling `_summary` file as well.
pub fn write_compare_output(cfg: &RunConfig, out: &CompareOutput) -> Result<(), CliError> {
    with_output(cfg.out.as_deref(), |w| output::write_compare(&out.rows, cfg.format, w))?;
    if let Some(p) = &cfg.out {
        let sp = summary_path(p);
        with_output(Some(&sp), |w| output::write_summary(&out.summary, cfg.format, w))?;
    } else {
        println!();
    }
    with_output(None, |w| output::write_summary(&out.summary, cfg.format, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountOutput {
    pub count: u128,
    pub budget: u128,
}

impl CountOutput {
    pub fn exceeds_budget(&self) -> bool {
        self.count > self.budget
    }
}

/// Exact number of complete feasible assignments for `n`, `N = robots`,
/// `M = targets`, `A = actions`.
pub fn cmd_count(cfg: &RunConfig) -> Result<CountOutput, CliError> {
    if !cfg.targets.is_single() {
        return Err(CliError::Config(format!(
            "count needs a single target count, got {}",
            cfg.targets
        )));
    }
    let m = cfg.targets.lo;
    let robots = cfg.robots.unwrap_or(cfg.n * m);
    let count = count_combinations(cfg.n, robots, m, cfg.actions)?;
    Ok(CountOutput {
        count,
        budget: cfg.budget as u128,
    })
}

pub fn write_count_output(c: &CountOutput) -> Result<(), CliError> {
    with_output(None, |w| {
        writeln!(w, "{}", c.count)?;
        writeln!(w, "exceeds_budget={} (budget {})", c.exceeds_budget(), c.budget)?;
        Ok(())
    })
}
