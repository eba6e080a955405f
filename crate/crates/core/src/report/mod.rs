//! Command dispatch, configuration and report files.
//!
//! Every run produces `report.json` (a pure function of the configuration),
//! `metadata.json` (wall-clock and version information), CSV tables and SVG
//! charts in the output directory.

mod commands;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use commands::{list_commands, CommandInfo};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "LIPSUB_OUT";
/// Output directory when neither the configuration nor [`OUT_ENV`] names one.
pub const DEFAULT_OUT: &str = "lipsub-out";

/// Everything a run depends on. Unset fields take per-command defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "cli", derive(clap::Args))]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Command name, e.g. `szlenk` or `embed circle`.
    #[cfg_attr(feature = "cli", arg(skip))]
    pub command: String,
    /// Model generator, e.g. `fan:8`, `cantor:4`, `lq:2:3:1000:7`.
    #[cfg_attr(feature = "cli", arg(long))]
    pub model: Option<String>,
    /// Model JSON document (overrides `model`).
    #[cfg_attr(feature = "cli", arg(long))]
    pub model_file: Option<PathBuf>,
    /// Norm preset: `l1:n`, `linf:n`, `hexagon`.
    #[cfg_attr(feature = "cli", arg(long))]
    pub norm: Option<String>,
    /// Norm JSON document `{dim, v_rep|h_rep, name?}` (overrides `norm`).
    #[cfg_attr(feature = "cli", arg(long))]
    pub norm_file: Option<PathBuf>,
    /// Embedding JSON document, as written by the embed commands.
    #[cfg_attr(feature = "cli", arg(long))]
    pub embedding_file: Option<PathBuf>,
    #[cfg_attr(feature = "cli", arg(long))]
    pub eps: Option<f64>,
    #[cfg_attr(feature = "cli", arg(long))]
    pub delta: Option<f64>,
    #[cfg_attr(feature = "cli", arg(long))]
    pub depth: Option<usize>,
    #[cfg_attr(feature = "cli", arg(long, value_delimiter = ','))]
    pub coeffs: Option<Vec<f64>>,
    /// Target size (`embed linf`) or sphere dimension (`sphere-grid`, `sphere-cover`, `embed cover`).
    #[cfg_attr(feature = "cli", arg(long))]
    pub n: Option<usize>,
    #[cfg_attr(feature = "cli", arg(long))]
    pub grid: Option<usize>,
    #[cfg_attr(feature = "cli", arg(long))]
    pub dim: Option<usize>,
    #[cfg_attr(feature = "cli", arg(long))]
    pub samples: Option<usize>,
    #[cfg_attr(feature = "cli", arg(long))]
    pub q: Option<f64>,
    #[cfg_attr(feature = "cli", arg(long))]
    pub q2: Option<f64>,
    #[cfg_attr(feature = "cli", arg(long, value_delimiter = ','))]
    pub q_list: Option<Vec<f64>>,
    #[cfg_attr(feature = "cli", arg(long, value_delimiter = ','))]
    pub dims: Option<Vec<usize>>,
    #[cfg_attr(feature = "cli", arg(long, value_delimiter = ','))]
    pub eps_grid: Option<Vec<f64>>,
    #[cfg_attr(feature = "cli", arg(long, value_delimiter = ','))]
    pub levels: Option<Vec<u32>>,
    /// Point indices (subset `H`, derivation start set).
    #[cfg_attr(feature = "cli", arg(long, value_delimiter = ','))]
    pub subset: Option<Vec<usize>>,
    #[cfg_attr(feature = "cli", arg(long, value_delimiter = ','))]
    pub values: Option<Vec<f64>>,
    #[cfg_attr(feature = "cli", arg(long, value_delimiter = ','))]
    pub sites: Option<Vec<usize>>,
    /// A vector argument (`norm`, `mazur`).
    #[cfg_attr(feature = "cli", arg(long, value_delimiter = ','))]
    pub x: Option<Vec<f64>>,
    #[cfg_attr(feature = "cli", arg(long))]
    pub lip: Option<f64>,
    #[cfg_attr(feature = "cli", arg(long, value_delimiter = ','))]
    pub range: Option<Vec<f64>>,
    #[cfg_attr(feature = "cli", arg(long))]
    pub radius: Option<f64>,
    /// `fine` or `coarse`.
    #[cfg_attr(feature = "cli", arg(long))]
    pub metric: Option<String>,
    /// Uniform shrink applied to an embedding before verification.
    #[cfg_attr(feature = "cli", arg(long))]
    pub scale: Option<f64>,
    /// Number of test vectors or random trials.
    #[cfg_attr(feature = "cli", arg(long))]
    pub tests: Option<usize>,
    #[cfg_attr(feature = "cli", arg(long))]
    pub seed: Option<u64>,
    /// Overrides the tolerance of the command's main check.
    #[cfg_attr(feature = "cli", arg(long))]
    pub tolerance: Option<f64>,
    #[cfg_attr(feature = "cli", arg(long))]
    pub out: Option<PathBuf>,
    /// Run scans without rayon.
    #[cfg_attr(feature = "cli", arg(long))]
    pub sequential: bool,
}

macro_rules! overlay_fields {
    ($top:ident, $base:ident; $($f:ident),*) => {
        RunConfig {
            command: if $top.command.is_empty() { $base.command } else { $top.command },
            sequential: $top.sequential || $base.sequential,
            $($f: $top.$f.or($base.$f),)*
        }
    };
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        RunConfig { command: command.to_string(), ..Default::default() }
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        let top = self;
        overlay_fields!(top, base; model, model_file, norm, norm_file, embedding_file, eps, delta, depth,
            coeffs, n, grid, dim, samples, q, q2, q_list, dims, eps_grid, levels, subset, values, sites, x,
            lip, range, radius, metric, scale, tests, seed, tolerance, out)
    }

    pub fn from_json(s: &str) -> Result<Self, RunError> {
        serde_json::from_str(s).map_err(|e| RunError::Usage(format!("bad config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let s = fs::read_to_string(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    /// Output directory: the configured one, else `$LIPSUB_OUT`, else
    /// [`DEFAULT_OUT`].
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("unknown command '{0}' (see `lipsub list`)")]
    UnknownCommand(String),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// One asserted invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.to_string(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Table { name: name.into(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    /// RFC 4180 text.
    pub fn to_csv(&self) -> Result<String, RunError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        let io = |e: csv::Error| RunError::Io(e.to_string());
        w.write_record(&self.headers).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| RunError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| RunError::Io(e.to_string()))
    }
}

/// Result of one command, before anything is written.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub command: String,
    pub config: RunConfig,
    pub result: Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub charts: Vec<(String, svg::Chart)>,
    /// Additional JSON files, e.g. a generated model.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn report_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            command: &'a str,
            config: &'a RunConfig,
            result: &'a Value,
            checks: &'a [Check],
            passed: bool,
        }
        let r = Report {
            command: &self.command,
            config: &self.config,
            result: &self.result,
            checks: &self.checks,
            passed: self.passed(),
        };
        let mut s = serde_json::to_string_pretty(&r).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes all artifacts into `dir` and returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
        let io = |p: &Path, e: std::io::Error| RunError::Io(format!("{}: {e}", p.display()));
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: &str, body: &str| -> Result<(), RunError> {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| io(&p, e))?;
            written.push(p);
            Ok(())
        };
        put("report.json", &self.report_json())?;
        let stamp =
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta = serde_json::json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "unix_time": stamp,
            "parallel": cfg!(feature = "parallel") && !self.config.sequential,
        });
        put("metadata.json", &format!("{}\n", serde_json::to_string_pretty(&meta).expect("json")))?;
        for t in &self.tables {
            put(&format!("{}.csv", t.name), &t.to_csv()?)?;
        }
        for (name, chart) in &self.charts {
            put(&format!("{name}.svg"), &chart.render())?;
        }
        for (name, body) in &self.files {
            put(name, body)?;
        }
        Ok(written)
    }
}

/// Runs the configured command without touching the output directory.
pub fn execute(config: &RunConfig) -> Result<Outcome, RunError> {
    commands::dispatch(config)
}

/// Runs the configured command and writes its artifacts. Returns the exit
/// status: 0 when all checks pass, 1 when one fails.
pub fn run(config: &RunConfig) -> Result<(Outcome, i32), RunError> {
    let outcome = execute(config)?;
    outcome.write(&config.out_dir())?;
    let code = outcome.exit_code();
    Ok((outcome, code))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file =
            RunConfig::from_json(r#"{"command": "szlenk", "model": "fan:8", "eps": 2.0, "delta": 0.05}"#).unwrap();
        let flags = RunConfig { eps: Some(1.0), ..Default::default() };
        let merged = flags.over(file);
        assert_eq!(merged.command, "szlenk");
        assert_eq!(merged.eps, Some(1.0));
        assert_eq!(merged.delta, Some(0.05));
        assert_eq!(merged.model.as_deref(), Some("fan:8"));
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::from_json(r#"{"command": "x", "bogus": 1}"#).is_err());
    }

    #[test]
    fn csv_quotes_and_crlf() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(["1".to_string(), "x,y".to_string()]);
        assert_eq!(t.to_csv().unwrap(), "a,b\r\n1,\"x,y\"\r\n");
    }
}
