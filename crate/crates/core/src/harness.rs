//! Config-driven experiment runner: generates one trace per seed, runs every
//! policy over it, and writes per-frame diagnostics plus a summary table.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::FilterConfig;
use crate::diagnostics::{gain_window_summary_from, timeline_from_scores, PERCENTILE_METHOD};
use crate::error::{Error, Result};
use crate::io::write_trace;
use crate::policy::UpdatePolicy;
use crate::sim::{cumulative_rmse, evaluate_with, generate, StreamScenario, StreamTrace};

pub const OUTPUT_DIR_ENV: &str = "FILT3R_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "filt3r-output";
pub const FRAMES_SCHEMA: u32 = 1;
pub const SUMMARY_SCHEMA: u32 = 1;
pub const FRAMES_HEADER: &str = "frame,mean_gain,mean_q,mean_p,rho,transition_score,rmse";
pub const SUMMARY_HEADER: &str =
    "policy,seed,frames,final_rmse,prefix_rmse,early_mean_gain,late_mean_gain,transition_threshold,windows";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Jsonl,
    BinaryTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: StreamScenario,
    pub policies: Vec<UpdatePolicy>,
    #[serde(default)]
    pub filter: FilterConfig,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub output_formats: Vec<OutputFormat>,
    /// Prefix lengths at which cumulative RMSE is reported.
    #[serde(default)]
    pub prefix_lengths: Vec<usize>,
    #[serde(default = "default_window_fraction")]
    pub window_fraction: f64,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv]
}

fn default_window_fraction() -> f64 {
    0.2
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |span| line_column(text, span.start));
            Error::Parse {
                path: origin.to_path_buf(),
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::config("policies", "must list at least one policy"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must list at least one seed"));
        }
        if self.output_formats.is_empty() {
            return Err(Error::config("output_formats", "must name at least one format"));
        }
        if !(self.window_fraction > 0.0 && self.window_fraction <= 1.0) {
            return Err(Error::config("window_fraction", "must lie in (0, 1]"));
        }
        self.scenario.validate()?;
        self.filter.validate()?;
        for policy in &self.policies {
            policy.validate()?;
            if policy.needs_attention() && self.scenario.attention.is_none() {
                return Err(Error::config(
                    "attention",
                    format!("policy {policy} needs scenario.attention to be set"),
                ));
            }
        }
        Ok(())
    }

    /// Config value, then the environment, then the built-in default.
    pub fn resolve_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    fn wants(&self, format: OutputFormat) -> bool {
        self.output_formats.contains(&format)
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Per-cell results as written to the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub policy: String,
    pub seed: u64,
    pub frames: usize,
    pub final_rmse: f64,
    pub prefix_rmse: Vec<(usize, f64)>,
    pub early_mean_gain: Option<f64>,
    pub late_mean_gain: Option<f64>,
    pub transition_threshold: Option<f64>,
    pub windows: Vec<(u64, u64)>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub output_dir: PathBuf,
    pub cells: Vec<CellSummary>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct FrameRow<'a> {
    policy: &'a str,
    seed: u64,
    frame: u64,
    mean_gain: f64,
    mean_q: f64,
    mean_p: f64,
    rho: f64,
    transition_score: f64,
    rmse: f64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".filt3r-write-probe");
    File::create(&probe).map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

/// Validates, then executes every (policy, seed) cell.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let dir = config.resolve_output_dir();
    ensure_writable(&dir)?;

    let traces: Vec<(u64, StreamTrace)> = config
        .seeds
        .par_iter()
        .map(|&seed| generate(&config.scenario.with_seed(seed)).map(|t| (seed, t)))
        .collect::<Result<_>>()?;

    let mut files = Vec::new();
    if config.wants(OutputFormat::BinaryTrace) {
        for (seed, trace) in &traces {
            let path = dir.join(format!("trace_seed{seed}.bin"));
            let mut out = create(&path)?;
            write_trace(trace, &mut out)
                .and_then(|_| out.flush())
                .map_err(|e| Error::io(&path, e))?;
            files.push(path);
        }
    }

    let cells: Vec<(&UpdatePolicy, &(u64, StreamTrace))> = config
        .policies
        .iter()
        .flat_map(|p| traces.iter().map(move |t| (p, t)))
        .collect();
    let results: Vec<(CellSummary, Vec<PathBuf>)> = cells
        .par_iter()
        .map(|(policy, (seed, trace))| run_cell(config, &dir, policy, *seed, trace))
        .collect::<Result<_>>()?;

    let mut summaries = Vec::with_capacity(results.len());
    for (summary, cell_files) in results {
        files.extend(cell_files);
        summaries.push(summary);
    }
    files.extend(write_summary(config, &dir, &summaries)?);
    Ok(RunOutput {
        output_dir: dir,
        cells: summaries,
        files,
    })
}

fn run_cell(
    config: &RunConfig,
    dir: &Path,
    policy: &UpdatePolicy,
    seed: u64,
    trace: &StreamTrace,
) -> Result<(CellSummary, Vec<PathBuf>)> {
    let label = policy.label();
    let stem = format!("{label}_seed{seed}");
    let csv_path = dir.join(format!("{stem}.frames.csv"));
    let jsonl_path = dir.join(format!("{stem}.frames.jsonl"));
    let mut csv = config.wants(OutputFormat::Csv).then(|| create(&csv_path)).transpose()?;
    let mut jsonl = config.wants(OutputFormat::Jsonl).then(|| create(&jsonl_path)).transpose()?;
    if let Some(out) = csv.as_mut() {
        write!(
            out,
            "# filt3r-frames schema={FRAMES_SCHEMA} policy={label} seed={seed}\n{FRAMES_HEADER}\n"
        )
        .map_err(|e| Error::io(&csv_path, e))?;
    }

    // only scalar columns are retained; per-token vectors are dropped per frame
    let mut rmse = Vec::with_capacity(trace.len());
    let mut frames = Vec::with_capacity(trace.len());
    let mut scores = Vec::with_capacity(trace.len());
    let mut gains = Vec::with_capacity(trace.len());
    let p0 = config.filter.p0;

    evaluate_with(trace, policy, &config.filter, |rec| {
        let row = match rec.diagnostics {
            Some(d) => {
                frames.push(d.frame);
                scores.push(d.mean_drift_score);
                gains.push(d.mean_gain);
                FrameRow {
                    policy: &label,
                    seed,
                    frame: rec.frame,
                    mean_gain: d.mean_gain,
                    mean_q: d.mean_process_noise,
                    mean_p: d.mean_posterior_variance,
                    rho: d.update_ratio,
                    transition_score: d.mean_drift_score,
                    rmse: rec.rmse,
                }
            }
            // the first frame is a direct overwrite with no process noise
            None => FrameRow {
                policy: &label,
                seed,
                frame: rec.frame,
                mean_gain: 1.0,
                mean_q: 0.0,
                mean_p: p0,
                rho: 1.0,
                transition_score: 0.0,
                rmse: rec.rmse,
            },
        };
        rmse.push(rec.rmse);
        if let Some(out) = csv.as_mut() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.frame, row.mean_gain, row.mean_q, row.mean_p, row.rho, row.transition_score, row.rmse
            )
            .map_err(|e| Error::io(&csv_path, e))?;
        }
        if let Some(out) = jsonl.as_mut() {
            serde_json::to_writer(&mut *out, &row)
                .map_err(std::io::Error::from)
                .and_then(|_| out.write_all(b"\n"))
                .map_err(|e| Error::io(&jsonl_path, e))?;
        }
        Ok(())
    })?;

    let mut written = Vec::new();
    if let Some(mut out) = csv {
        out.flush().map_err(|e| Error::io(&csv_path, e))?;
        written.push(csv_path);
    }
    if let Some(mut out) = jsonl {
        out.flush().map_err(|e| Error::io(&jsonl_path, e))?;
        written.push(jsonl_path);
    }

    let windows = gain_window_summary_from(&gains, config.window_fraction).ok();
    let timeline = timeline_from_scores(&frames, &scores).ok();
    let summary = CellSummary {
        policy: label,
        seed,
        frames: rmse.len(),
        final_rmse: *rmse.last().expect("trace is non-empty"),
        prefix_rmse: config
            .prefix_lengths
            .iter()
            .filter_map(|&len| cumulative_rmse(&rmse, len).map(|v| (len, v)))
            .collect(),
        early_mean_gain: windows.map(|w| w.early_mean_gain),
        late_mean_gain: windows.map(|w| w.late_mean_gain),
        transition_threshold: timeline.as_ref().map(|t| t.threshold),
        windows: timeline.map(|t| t.windows).unwrap_or_default(),
    };
    Ok((summary, written))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One CSV line per cell, in the same column order as [`SUMMARY_HEADER`].
pub fn summary_csv_row(cell: &CellSummary) -> String {
    let prefix = cell
        .prefix_rmse
        .iter()
        .map(|(len, v)| format!("{len}:{v}"))
        .collect::<Vec<_>>()
        .join(";");
    let windows = cell
        .windows
        .iter()
        .map(|(a, b)| format!("{a}-{b}"))
        .collect::<Vec<_>>()
        .join(";");
    format!(
        "{},{},{},{},{},{},{},{},{}",
        cell.policy,
        cell.seed,
        cell.frames,
        cell.final_rmse,
        prefix,
        opt(cell.early_mean_gain),
        opt(cell.late_mean_gain),
        opt(cell.transition_threshold),
        windows
    )
}

fn write_summary(config: &RunConfig, dir: &Path, cells: &[CellSummary]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if config.wants(OutputFormat::Csv) {
        let path = dir.join("summary.csv");
        let mut out = create(&path)?;
        let mut body = format!(
            "# filt3r-summary schema={SUMMARY_SCHEMA} percentile_method={PERCENTILE_METHOD}\n{SUMMARY_HEADER}\n"
        );
        for cell in cells {
            body.push_str(&summary_csv_row(cell));
            body.push('\n');
        }
        out.write_all(body.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    if config.wants(OutputFormat::Jsonl) {
        let path = dir.join("summary.jsonl");
        let mut out = create(&path)?;
        for cell in cells {
            serde_json::to_writer(&mut out, cell)
                .map_err(std::io::Error::from)
                .and_then(|_| out.write_all(b"\n"))
                .map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
