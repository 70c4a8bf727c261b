//! Row schemas and their CSV / JSON Lines encodings.
//!
//! Floats are written with 17 significant digits so a re-parse recovers the
//! exact bits.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use trackassign::sim::{ComparisonRecord, SizeSummary, TrackingRun};

use crate::config::Format;
use crate::CliError;

pub const TRACK_HEADER: [&str; 8] = [
    "step",
    "target_id",
    "trace",
    "err",
    "mean_err",
    "total_quality",
    "assigned_robots",
    "assigned_actions",
];

pub const COMPARE_HEADER: [&str; 13] = [
    "n",
    "N",
    "M",
    "A",
    "seed",
    "q_greedy",
    "q_opt",
    "q_bound",
    "ratio_opt",
    "ratio_bound",
    "t_greedy_s",
    "t_opt_s",
    "t_bound_s",
];

pub const SUMMARY_HEADER: [&str; 6] = [
    "M",
    "trials",
    "mean_ratio_opt",
    "min_ratio_opt",
    "mean_ratio_bound",
    "min_ratio_bound",
];

/// One line of the tracking log; `target_id = -1` marks the per-step mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub step: usize,
    pub target_id: i64,
    pub trace: f64,
    pub err: f64,
    pub mean_err: f64,
    pub total_quality: f64,
    pub assigned_robots: Vec<usize>,
    pub assigned_actions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub n: usize,
    #[serde(rename = "N")]
    pub robots: usize,
    #[serde(rename = "M")]
    pub targets: usize,
    #[serde(rename = "A")]
    pub actions: usize,
    pub seed: u64,
    pub q_greedy: f64,
    pub q_opt: Option<f64>,
    pub q_bound: f64,
    pub ratio_opt: Option<f64>,
    pub ratio_bound: f64,
    /// Wall-clock columns are empty when timings are disabled.
    pub t_greedy_s: Option<f64>,
    pub t_opt_s: Option<f64>,
    pub t_bound_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "M")]
    pub targets: usize,
    pub trials: usize,
    pub mean_ratio_opt: Option<f64>,
    pub min_ratio_opt: Option<f64>,
    pub mean_ratio_bound: f64,
    pub min_ratio_bound: f64,
}

pub fn track_rows(run: &TrackingRun) -> Vec<TrackRow> {
    let mut rows = Vec::new();
    for rec in &run.steps {
        for tm in &rec.metrics.per_target {
            let tuple = rec.assignment.iter().find(|t| t.target == tm.id);
            rows.push(TrackRow {
                step: rec.t,
                target_id: tm.id as i64,
                trace: tm.trace,
                err: tm.err,
                mean_err: rec.metrics.err_t,
                total_quality: rec.total_quality,
                assigned_robots: tuple.map(|t| t.robots.clone()).unwrap_or_default(),
                assigned_actions: tuple.map(|t| t.actions.clone()).unwrap_or_default(),
            });
        }
        rows.push(TrackRow {
            step: rec.t,
            target_id: -1,
            trace: rec.metrics.mean_trace,
            err: rec.metrics.err_t,
            mean_err: rec.metrics.err_t,
            total_quality: rec.total_quality,
            assigned_robots: Vec::new(),
            assigned_actions: Vec::new(),
        });
    }
    rows
}

pub fn compare_rows(records: &[ComparisonRecord], timings: bool) -> Vec<CompareRow> {
    records
        .iter()
        .map(|r| CompareRow {
            n: r.n,
            robots: r.robots,
            targets: r.targets,
            actions: r.actions,
            seed: r.seed,
            q_greedy: r.q_greedy,
            q_opt: r.q_opt,
            q_bound: r.q_bound,
            ratio_opt: r.ratio_opt(),
            ratio_bound: r.ratio_bound(),
            t_greedy_s: timings.then_some(r.t_greedy_s),
            t_opt_s: r.t_opt_s.filter(|_| timings),
            t_bound_s: timings.then_some(r.t_bound_s),
        })
        .collect()
}

pub fn summary_rows(summary: &[SizeSummary]) -> Vec<SummaryRow> {
    summary
        .iter()
        .map(|s| SummaryRow {
            targets: s.targets,
            trials: s.trials,
            mean_ratio_opt: s.mean_ratio_opt,
            min_ratio_opt: s.min_ratio_opt,
            mean_ratio_bound: s.mean_ratio_bound,
            min_ratio_bound: s.min_ratio_bound,
        })
        .collect()
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn join_ids(ids: &[usize]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

trait CsvRow {
    fn fields(&self) -> Vec<String>;
}

impl CsvRow for TrackRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.step.to_string(),
            self.target_id.to_string(),
            fmt_f64(self.trace),
            fmt_f64(self.err),
            fmt_f64(self.mean_err),
            fmt_f64(self.total_quality),
            join_ids(&self.assigned_robots),
            join_ids(&self.assigned_actions),
        ]
    }
}

impl CsvRow for CompareRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.robots.to_string(),
            self.targets.to_string(),
            self.actions.to_string(),
            self.seed.to_string(),
            fmt_f64(self.q_greedy),
            fmt_opt(self.q_opt),
            fmt_f64(self.q_bound),
            fmt_opt(self.ratio_opt),
            fmt_f64(self.ratio_bound),
            fmt_opt(self.t_greedy_s),
            fmt_opt(self.t_opt_s),
            fmt_opt(self.t_bound_s),
        ]
    }
}

impl CsvRow for SummaryRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.targets.to_string(),
            self.trials.to_string(),
            fmt_opt(self.mean_ratio_opt),
            fmt_opt(self.min_ratio_opt),
            fmt_f64(self.mean_ratio_bound),
            fmt_f64(self.min_ratio_bound),
        ]
    }
}

fn write_csv<R: CsvRow, W: Write>(header: &[&str], rows: &[R], w: W) -> Result<(), CliError> {
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    wr.write_record(header).map_err(csv_io)?;
    for r in rows {
        wr.write_record(r.fields()).map_err(csv_io)?;
    }
    wr.flush()?;
    Ok(())
}

fn write_json<R: Serialize, W: Write>(rows: &[R], mut w: W) -> Result<(), CliError> {
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|e| CliError::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

pub fn write_track<W: Write>(rows: &[TrackRow], format: Format, w: W) -> Result<(), CliError> {
    match format {
        Format::Csv => write_csv(&TRACK_HEADER, rows, w),
        Format::Json => write_json(rows, w),
    }
}

pub fn write_compare<W: Write>(rows: &[CompareRow], format: Format, w: W) -> Result<(), CliError> {
    match format {
        Format::Csv => write_csv(&COMPARE_HEADER, rows, w),
        Format::Json => write_json(rows, w),
    }
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], format: Format, w: W) -> Result<(), CliError> {
    match format {
        Format::Csv => write_csv(&SUMMARY_HEADER, rows, w),
        Format::Json => write_json(rows, w),
    }
}

/// Errors from re-reading emitted tables.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
    #[error("line {line}: expected {expected} fields, found {found}")]
    Width { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: cannot parse {value:?}")]
    Field {
        line: usize,
        column: &'static str,
        value: String,
    },
}

struct Fields<'a> {
    rec: &'a csv::StringRecord,
    header: &'static [&'static str],
    line: usize,
}

impl Fields<'_> {
    fn raw(&self, i: usize) -> &str {
        &self.rec[i]
    }

    fn err(&self, i: usize) -> ParseError {
        ParseError::Field {
            line: self.line,
            column: self.header[i],
            value: self.raw(i).to_string(),
        }
    }

    fn parse<T: std::str::FromStr>(&self, i: usize) -> Result<T, ParseError> {
        self.raw(i).parse().map_err(|_| self.err(i))
    }

    fn opt_f64(&self, i: usize) -> Result<Option<f64>, ParseError> {
        if self.raw(i).is_empty() {
            Ok(None)
        } else {
            self.parse(i).map(Some)
        }
    }

    fn ids(&self, i: usize) -> Result<Vec<usize>, ParseError> {
        if self.raw(i).is_empty() {
            return Ok(Vec::new());
        }
        self.raw(i)
            .split(';')
            .map(|s| s.parse().map_err(|_| self.err(i)))
            .collect()
    }
}

fn read_csv<T, R: Read>(
    header: &'static [&'static str],
    r: R,
    mut row: impl FnMut(&Fields<'_>) -> Result<T, ParseError>,
) -> Result<Vec<T>, ParseError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut out = Vec::new();
    let mut seen_header = false;
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| ParseError::Csv(e.to_string()))?;
        if !seen_header {
            if rec.iter().ne(header.iter().copied()) {
                return Err(ParseError::Header(rec.iter().map(String::from).collect()));
            }
            seen_header = true;
            continue;
        }
        if rec.len() != header.len() {
            return Err(ParseError::Width {
                line: i + 1,
                expected: header.len(),
                found: rec.len(),
            });
        }
        out.push(row(&Fields {
            rec: &rec,
            header,
            line: i + 1,
        })?);
    }
    if !seen_header {
        return Err(ParseError::Header(Vec::new()));
    }
    Ok(out)
}

pub fn read_track_csv<R: Read>(r: R) -> Result<Vec<TrackRow>, ParseError> {
    read_csv(&TRACK_HEADER, r, |f| {
        Ok(TrackRow {
            step: f.parse(0)?,
            target_id: f.parse(1)?,
            trace: f.parse(2)?,
            err: f.parse(3)?,
            mean_err: f.parse(4)?,
            total_quality: f.parse(5)?,
            assigned_robots: f.ids(6)?,
            assigned_actions: f.ids(7)?,
        })
    })
}

pub fn read_compare_csv<R: Read>(r: R) -> Result<Vec<CompareRow>, ParseError> {
    read_csv(&COMPARE_HEADER, r, |f| {
        Ok(CompareRow {
            n: f.parse(0)?,
            robots: f.parse(1)?,
            targets: f.parse(2)?,
            actions: f.parse(3)?,
            seed: f.parse(4)?,
            q_greedy: f.parse(5)?,
            q_opt: f.opt_f64(6)?,
            q_bound: f.parse(7)?,
            ratio_opt: f.opt_f64(8)?,
            ratio_bound: f.parse(9)?,
            t_greedy_s: f.opt_f64(10)?,
            t_opt_s: f.opt_f64(11)?,
            t_bound_s: f.opt_f64(12)?,
        })
    })
}
