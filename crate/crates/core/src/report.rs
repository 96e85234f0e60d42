//! Config files, batch execution and result files.
//!
//! A config is one JSON document `{"studies": [StudyPlan, ...]}`. Each study
//! writes `<name>.csv` (`p,level,error,ci_lo,ci_hi`), `<name>.fit.csv`
//! (`p,order,stderr`) and one `<name>_p<p>.dat` plot file per `p`; the run
//! writes `manifest.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{run_study, Axis, OrderReport, StudyOutcome, StudyPlan};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    studies: Vec<StudyPlan>,
}

pub fn parse_config(path: &Path) -> Result<Vec<StudyPlan>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses and validates a config document.
pub fn parse_config_str(text: &str) -> Result<Vec<StudyPlan>> {
    if text.trim().is_empty() {
        return Err(Error::Config("no studies defined (empty file)".into()));
    }
    // serde_json's messages carry the line and column
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if file.studies.is_empty() {
        return Err(Error::Config("no studies defined".into()));
    }
    for (i, plan) in file.studies.iter().enumerate() {
        plan.validate().map_err(|e| {
            let msg = match e {
                Error::Config(m) => m,
                other => other.to_string(),
            };
            Error::Config(format!("studies[{i}] ({}): {msg}", plan.name))
        })?;
        if file.studies[..i].iter().any(|p| p.name == plan.name) {
            return Err(Error::Config(format!("studies[{i}]: duplicate name {:?}", plan.name)));
        }
    }
    Ok(file.studies)
}

/// Config document for `plans`, in the form `parse_config_str` reads.
pub fn serialize_config(plans: &[StudyPlan]) -> String {
    let file = ConfigFile {
        studies: plans.to_vec(),
    };
    serde_json::to_string_pretty(&file).expect("plans serialize") + "\n"
}

/// SHA-256 of the compact serialization of the parsed plans, so layout and
/// whitespace in the source file do not matter.
pub fn config_digest(plans: &[StudyPlan]) -> String {
    let file = ConfigFile {
        studies: plans.to_vec(),
    };
    let canonical = serde_json::to_string(&file).expect("plans serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyStatus {
    Completed,
    /// Finished, but some samples were aborted.
    Partial,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub p: f64,
    pub order: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub name: String,
    pub axis: Axis,
    pub seed: u64,
    pub status: StudyStatus,
    pub files: Vec<String>,
    pub samples: usize,
    pub m_effective: usize,
    pub aborted: Vec<u64>,
    pub truncation_residual: Option<f64>,
    pub outside_hypotheses: bool,
    pub fits: Vec<FitRecord>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config_digest: String,
    /// Seed override applied to every study, if any.
    pub seed: Option<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    pub studies: Vec<StudyRecord>,
}

impl RunManifest {
    /// Every study completed with no aborted samples.
    pub fn success(&self) -> bool {
        self.studies
            .iter()
            .all(|s| s.status == StudyStatus::Completed && s.aborted.is_empty())
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExecuteOptions {
    pub threads: Option<usize>,
    /// Recorded in the manifest; callers apply it to the plans themselves.
    pub seed_override: Option<u64>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Fails early if `dir` cannot be created or written to.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    let fail = |e: std::io::Error| Error::InvalidArgument(format!("output directory {} is not writable: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(fail)?;
    let probe = dir.join(".levy-spde-write-probe");
    fs::write(&probe, b"").map_err(fail)?;
    fs::remove_file(&probe).map_err(fail)?;
    Ok(())
}

/// Runs every plan and writes result files plus the manifest into `out_dir`.
/// Study failures are recorded in the manifest rather than returned.
pub fn execute(plans: &[StudyPlan], out_dir: &Path, opts: &ExecuteOptions) -> Result<RunManifest> {
    ensure_writable(out_dir)?;
    let started_unix = unix_now();
    let clock = Instant::now();
    let mut studies = Vec::with_capacity(plans.len());
    for plan in plans {
        log::info!("study {}: {:?} axis, {} samples", plan.name, plan.axis, plan.samples);
        let record = match run_study(plan, opts.threads) {
            Ok(outcome) => {
                let mut files = Vec::new();
                let written = write_outcome(&outcome, out_dir, &mut files);
                let status = if outcome.aborted.is_empty() {
                    StudyStatus::Completed
                } else {
                    StudyStatus::Partial
                };
                StudyRecord {
                    name: plan.name.clone(),
                    axis: plan.axis,
                    seed: plan.seed,
                    status: if written.is_ok() { status } else { StudyStatus::Failed },
                    files,
                    samples: outcome.samples,
                    m_effective: outcome.m_effective,
                    aborted: outcome.aborted.clone(),
                    truncation_residual: outcome.truncation_residual,
                    outside_hypotheses: outcome.outside_hypotheses,
                    fits: fits_of(&outcome),
                    error: written.err().map(|e| e.to_string()),
                }
            }
            Err(e) => {
                log::error!("study {} failed: {e}", plan.name);
                StudyRecord {
                    name: plan.name.clone(),
                    axis: plan.axis,
                    seed: plan.seed,
                    status: StudyStatus::Failed,
                    files: Vec::new(),
                    samples: plan.samples,
                    m_effective: 0,
                    aborted: Vec::new(),
                    truncation_residual: None,
                    outside_hypotheses: false,
                    fits: Vec::new(),
                    error: Some(e.to_string()),
                }
            }
        };
        studies.push(record);
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_digest: config_digest(plans),
        seed: opts.seed_override,
        started_unix,
        finished_unix: unix_now(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        studies,
    };
    let json = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(out_dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

fn fits_of(outcome: &StudyOutcome) -> Vec<FitRecord> {
    outcome
        .reports
        .iter()
        .filter_map(|r| {
            r.fit.map(|f| FitRecord {
                p: r.p,
                order: f.order,
                stderr: f.stderr,
            })
        })
        .collect()
}

fn write_outcome(outcome: &StudyOutcome, dir: &Path, files: &mut Vec<String>) -> Result<()> {
    let mut levels = String::from("p,level,error,ci_lo,ci_hi\n");
    let mut fits = String::from("p,order,stderr\n");
    for r in &outcome.reports {
        for l in &r.levels {
            writeln!(levels, "{},{},{},{},{}", r.p, l.level, l.error, l.ci_lo, l.ci_hi).unwrap();
        }
        if let Some(f) = r.fit {
            writeln!(fits, "{},{},{}", r.p, f.order, f.stderr).unwrap();
        }
    }
    let mut put = |name: String, body: &str| -> Result<()> {
        fs::write(dir.join(&name), body)?;
        files.push(name);
        Ok(())
    };
    put(format!("{}.csv", outcome.name), &levels)?;
    put(format!("{}.fit.csv", outcome.name), &fits)?;
    for r in &outcome.reports {
        let name = plot_file_name(&outcome.name, r.p);
        emit_plot_data(r, &dir.join(&name))?;
        files.push(name);
    }
    Ok(())
}

pub fn plot_file_name(study: &str, p: f64) -> String {
    format!("{study}_p{p}.dat")
}

/// Writes `ln(level) ln(error)` rows and, when a fit exists, a trailing
/// `# fit <slope> <intercept>` row for the regression line in the same axes.
pub fn emit_plot_data(report: &OrderReport, path: &Path) -> Result<()> {
    if report.levels.is_empty() {
        return Err(Error::InvalidArgument("report has no levels".into()));
    }
    let mut out = format!("# p = {}\n# ln(level) ln(error)\n", report.p);
    for l in &report.levels {
        writeln!(out, "{} {}", l.level.ln(), l.error.ln()).unwrap();
    }
    if let Some(f) = report.fit {
        writeln!(out, "# fit {} {}", f.slope, f.intercept).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a plot file back as `(data rows, fit row)`.
pub fn read_plot_data(path: &Path) -> Result<(Vec<(f64, f64)>, Option<(f64, f64)>)> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    let mut fit = None;
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("{s}: {e}")));
    for line in text.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["#", "fit", s, i] => fit = Some((num(s)?, num(i)?)),
            [first, ..] if first.starts_with('#') => {}
            [x, y] => rows.push((num(x)?, num(y)?)),
            [] => {}
            _ => return Err(Error::InvalidArgument(format!("bad plot row {line:?}"))),
        }
    }
    Ok((rows, fit))
}

pub fn output_paths(dir: &Path, manifest: &RunManifest) -> Vec<PathBuf> {
    manifest
        .studies
        .iter()
        .flat_map(|s| s.files.iter().map(|f| dir.join(f)))
        .collect()
}
