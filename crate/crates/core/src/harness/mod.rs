//! Seeded experiment campaigns with reproducible CSV and JSON output.
//!
//! Every command takes a [`Config`] (a JSON file merged with command-line
//! overrides), runs its (n, seed) cells in parallel, and renders rows in
//! (n, seed) order. Output depends only on the config unless timing is
//! requested or a time limit cuts a search short.

mod scans;
mod single;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use scans::{gap_scan, nodes_scan, structure_scan};
pub use single::{solve, witness, Method};

use crate::assignment::AnalysisParams;
use crate::bnb::BnbOptions;
use crate::error::{Error, Result};
use crate::instance::{format_real, CostMatrix, GENERATOR_UNIFORM};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Directory for outputs when `--out` is not given.
pub const OUT_DIR_ENV: &str = "ATSP_LAB_OUT_DIR";
pub const DEFAULT_EPSILON: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Instance sizes; empty means the command's default.
    pub n: Vec<usize>,
    /// Seeds per size; `None` means the command's default.
    pub seeds: Option<usize>,
    pub seed_start: u64,
    pub epsilon: f64,
    pub generator: String,
    pub zeta: Option<usize>,
    pub d: Option<usize>,
    pub depth: usize,
    pub method: Method,
    pub input: Option<PathBuf>,
    pub bnb: BnbOptions,
    /// Include wall-clock columns; makes output nondeterministic.
    pub timing: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            n: Vec::new(),
            seeds: None,
            seed_start: 0,
            epsilon: DEFAULT_EPSILON,
            generator: GENERATOR_UNIFORM.to_string(),
            zeta: None,
            d: None,
            depth: 2,
            method: Method::Bnb,
            input: None,
            bnb: BnbOptions::default(),
            timing: false,
        }
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    /// Fills command defaults so the embedded config is the effective one.
    fn resolved(&self, n: &[usize], seeds: usize) -> Self {
        let mut c = self.clone();
        if c.n.is_empty() {
            c.n = n.to_vec();
        }
        c.seeds.get_or_insert(seeds);
        c
    }

    fn seed_count(&self) -> usize {
        self.seeds.unwrap_or(1)
    }

    fn cells(&self) -> Vec<(usize, u64)> {
        let seeds = self.seed_count() as u64;
        self.n
            .iter()
            .flat_map(|&n| (self.seed_start..self.seed_start + seeds).map(move |s| (n, s)))
            .collect()
    }

    fn instance(&self, n: usize, seed: u64) -> Result<CostMatrix> {
        CostMatrix::regenerate(n, seed, &self.generator)
    }

    fn params(&self, n: usize) -> Result<AnalysisParams> {
        let p = AnalysisParams::new(n, self.epsilon)?;
        Ok(match self.d {
            Some(d) => p.with_d(d),
            None => p,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidOptions(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.seeds == Some(0) {
            return Err(Error::InvalidOptions("seeds must be positive".into()));
        }
        if self.zeta == Some(0) {
            return Err(Error::InvalidOptions("zeta must be positive".into()));
        }
        if self.d == Some(0) {
            return Err(Error::InvalidOptions("d must be positive".into()));
        }
        if self.seed_start.checked_add(self.seed_count() as u64).is_none() {
            return Err(Error::InvalidOptions("seed range overflows".into()));
        }
        Ok(())
    }
}

/// A rendered command result.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub extension: &'static str,
    pub text: String,
    /// Soft checks that did not hold.
    pub soft_failures: Vec<String>,
    /// Rows hit a size guard or a time limit.
    pub guard_hits: usize,
}

impl Report {
    pub fn default_file_name(&self) -> String {
        format!("{}.{}", self.command, self.extension)
    }

    /// 0 clean, 1 soft-check failure, 3 guard or time limit.
    pub fn exit_code(&self) -> u8 {
        if self.guard_hits > 0 {
            3
        } else if !self.soft_failures.is_empty() {
            1
        } else {
            0
        }
    }
}

/// Exit code for an error that prevented a command from running.
pub fn error_exit_code(e: &Error) -> u8 {
    match e {
        Error::SizeGuard { .. } => 3,
        _ => 2,
    }
}

/// Where a report goes: `out` if given, else a file in `$ATSP_LAB_OUT_DIR`,
/// else standard output (`None`).
pub fn output_path(out: Option<&Path>, report: &Report) -> Option<PathBuf> {
    if let Some(p) = out {
        return Some(p.to_path_buf());
    }
    std::env::var_os(OUT_DIR_ENV)
        .filter(|d| !d.is_empty())
        .map(|d| PathBuf::from(d).join(report.default_file_name()))
}

pub fn write_report(path: &Path, report: &Report) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, &report.text)?;
    Ok(())
}

/// CSV table with `#` comment lines before and after.
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    fn render(&self, command: &str, config: &Config, summary: &[String]) -> Result<String> {
        let mut out = header_line(command, config)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_error)?;
        for row in &self.rows {
            debug_assert_eq!(row.len(), self.columns.len());
            w.write_record(row).map_err(csv_error)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        for line in summary {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        Ok(out)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn header_line(command: &str, config: &Config) -> Result<String> {
    let json = serde_json::to_string(config).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(format!(
        "# atsp-lab {command} schema={SCHEMA_VERSION} version={TOOL_VERSION} config={json}\n"
    ))
}

fn real(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format_real(x)
    }
}

fn opt_real(x: Option<f64>) -> String {
    x.map_or_else(String::new, real)
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Median of a nonempty sample; the mean of the two middle values when the
/// count is even.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}

/// Linearly interpolated quantile, `q` in [0, 1].
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Least-squares line `y = a + b x`; `None` with fewer than two distinct x.
pub fn fit_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let k = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}
