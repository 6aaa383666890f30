//! Run reports: checks with recomputable verdicts, tabular series, and
//! their JSON, CSV and SVG renderings.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use geomlab_core::volume::{RatioReport, VolumeSeries};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Scenario;
use crate::svg;

/// Version tag of the report layout.
pub const SCHEMA: &str = "geomlab.report/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::Lt => value < threshold,
            Relation::Le => value <= threshold,
            Relation::Gt => value > threshold,
            Relation::Ge => value >= threshold,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
        }
    }
}

/// A verdict `value relation threshold`; `margin` is signed so that
/// positive means pass with room to spare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub margin: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let value = finite_or_sentinel(value);
        let margin = match relation {
            Relation::Lt | Relation::Le => threshold - value,
            Relation::Gt | Relation::Ge => value - threshold,
        };
        Check {
            name: name.into(),
            value,
            relation,
            threshold,
            margin,
            pass: relation.holds(value, threshold),
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// Whether the stored verdict follows from the stored numbers.
    pub fn is_consistent(&self) -> bool {
        self.pass == self.relation.holds(self.value, self.threshold)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {:.6e} {} {:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.relation.symbol(),
            self.threshold
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// JSON has no infinities or NaN; map them to the largest finite values so
/// verdicts stay recomputable from the payload.
fn finite_or_sentinel(v: f64) -> f64 {
    if v.is_nan() || v == f64::INFINITY {
        f64::MAX
    } else if v == f64::NEG_INFINITY {
        f64::MIN
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Volume,
    Ratio,
    Table,
}

/// A named table; ratio series carry their monotonicity verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub kind: SeriesKind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl Series {
    pub fn table(name: impl Into<String>, columns: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Series {
            name: name.into(),
            kind: SeriesKind::Table,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().map(finite_or_sentinel).collect())
                .collect(),
            verdict: None,
            flags: Vec::new(),
        }
    }

    pub fn volume(name: impl Into<String>, s: &VolumeSeries) -> Self {
        let rows = (0..s.grid.len())
            .map(|i| vec![s.grid[i], s.values[i], s.errors[i]])
            .collect();
        Series {
            kind: SeriesKind::Volume,
            flags: s.flags.clone(),
            ..Series::table(name, &["parameter", "volume", "error"], rows)
        }
    }

    pub fn ratio(name: impl Into<String>, r: &RatioReport) -> Self {
        let mut rows = Vec::with_capacity(r.grid.len());
        for (i, t) in r.grid.iter().enumerate() {
            let k = r.numerator.grid.iter().position(|g| g == t).unwrap_or(i);
            rows.push(vec![*t, r.numerator.values[k], r.denominator.values[k], r.ratios[i]]);
        }
        let verdict = format!(
            "{} (worst adjacent increase {:.3e} at {}, tolerance {:.1e})",
            if r.nonincreasing {
                "nonincreasing"
            } else {
                "NOT nonincreasing"
            },
            r.worst_violation,
            r.worst_at.map_or("-".to_string(), |t| format!("{t:.4}")),
            r.tol_mono
        );
        let mut flags = r.numerator.flags.clone();
        flags.extend(
            r.dropped
                .iter()
                .map(|t| format!("dropped parameter {t}: denominator not positive")),
        );
        Series {
            kind: SeriesKind::Ratio,
            verdict: Some(verdict),
            flags,
            ..Series::table(name, &["parameter", "numerator", "denominator", "ratio"], rows)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub scenario: Scenario,
    pub seed: u64,
    /// Echo of the configuration as run.
    pub config: Value,
    pub checks: Vec<Check>,
    pub series: Vec<Series>,
    /// Preconditions assumed rather than verified, and other remarks.
    pub notes: Vec<String>,
    pub pass: bool,
    /// Wall time in seconds; written to `timing.json`, not to the report,
    /// so that reports are byte-identical across runs.
    #[serde(skip)]
    pub wall_time: f64,
}

impl RunReport {
    pub fn new(scenario: Scenario, seed: u64, config: Value) -> Self {
        RunReport {
            schema: SCHEMA.to_string(),
            scenario,
            seed,
            config,
            checks: Vec::new(),
            series: Vec::new(),
            notes: Vec::new(),
            pass: true,
            wall_time: 0.0,
        }
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
        self.pass = self.checks.iter().all(|c| c.pass);
    }

    pub fn failing(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(format!("unknown format `{other}` (valid: json, csv, svg)")),
        }
    }
}

pub fn parse_formats(list: &str) -> std::result::Result<BTreeSet<Format>, String> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

fn file_stem(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

/// Write the report in the requested formats and return the files written.
/// `json` also writes `timing.json` with the wall time.
pub fn emit_report(report: &RunReport, formats: &BTreeSet<Format>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut files = Vec::new();
    let mut write = |name: String, content: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        files.push(path);
        Ok(())
    };
    if formats.contains(&Format::Json) {
        write("report.json".to_string(), report.to_json())?;
        let timing = serde_json::json!({ "scenario": report.scenario, "wall_time_seconds": report.wall_time });
        write(
            "timing.json".to_string(),
            format!("{}\n", serde_json::to_string_pretty(&timing)?),
        )?;
    }
    if formats.contains(&Format::Csv) {
        for (i, s) in report.series.iter().enumerate() {
            write(format!("{i:02}_{}.csv", file_stem(&s.name)), s.to_csv())?;
        }
    }
    if formats.contains(&Format::Svg) {
        let ratios: Vec<&Series> = report.series.iter().filter(|s| s.kind == SeriesKind::Ratio).collect();
        if !ratios.is_empty() {
            write(
                format!("{}_ratios.svg", report.scenario),
                svg::ratio_plot(&report.scenario.to_string(), &ratios),
            )?;
        }
    }
    Ok(files)
}
