//! Runs one experiment and writes its artifacts.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use kpp_core::harness::{
    homogeneous_control, liminf_probe, run_theorem1, simulate, verify_all_bounds, write_artifacts, write_atomic,
    write_json, ProbeReport,
};
use kpp_core::media::{preview, GrowthRate, MediaProfile};
use kpp_core::Error as CoreError;
use serde::Serialize;

use crate::config::{Experiment, RunConfig};

/// Options that only some commands read.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandArgs {
    /// Sample spacing of `media-preview`.
    pub step: Option<f64>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    /// Probe speed of `liminf-probe`, in units of `sqrt(mu_minus)`.
    pub sigma: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),

    #[error("{0}")]
    Core(#[from] CoreError),

    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Outcome of a command: whether it passed and the files it wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatched {
    pub passed: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = dir.join(name);
    write_atomic(&path, bytes).map_err(io_at(&path))?;
    files.push(path);
    Ok(())
}

fn write_report<T: Serialize>(dir: &Path, name: &str, value: &T, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = dir.join(name);
    write_json(&path, value).map_err(io_at(&path))?;
    files.push(path);
    Ok(())
}

#[derive(Serialize)]
struct ProbePair {
    media: ProbeReport,
    homogeneous_control: ProbeReport,
}

/// Echoes the configuration into the output directory and runs the
/// experiment it names.
pub fn dispatch(run: &RunConfig, args: &CommandArgs) -> Result<Dispatched, CliError> {
    let dir = run.output_dir.as_path();
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let mut files = Vec::new();
    let echo = serde_json::to_vec_pretty(&run.to_json()).expect("JSON values serialise");
    write_file(dir, "config.echo.json", &echo, &mut files)?;

    let cfg = &run.config;
    let (passed, summary) = match run.experiment {
        Experiment::Simulate => {
            let (outcome, field) = simulate(cfg)?;
            files.extend(write_artifacts(dir, "simulate", &outcome).map_err(io_at(dir))?);
            let mut csv = b"t,x,u\n".to_vec();
            field.write_csv_rows(&mut csv, 1).expect("write to Vec");
            write_file(dir, "simulate_field.csv", &csv, &mut files)?;
            (true, format!("simulated to t = {}", field.t))
        }
        Experiment::MediaPreview => {
            let rows = media_preview(run, args)?;
            let mut csv = b"x,mu\n".to_vec();
            for (x, mu) in &rows {
                writeln!(csv, "{x},{mu}").expect("write to Vec");
            }
            write_file(dir, "media_preview.csv", &csv, &mut files)?;
            (true, format!("{} samples", rows.len()))
        }
        Experiment::Theorem1 => {
            let outcome = run_theorem1(cfg)?;
            files.extend(write_artifacts(dir, "theorem1", &outcome).map_err(io_at(dir))?);
            let gated = outcome.report.records.iter().filter(|r| r.gated).count();
            let mut summary = format!("{gated} gated index(es)");
            for note in &outcome.report.notes {
                summary.push_str("; ");
                summary.push_str(note);
            }
            (outcome.report.passed, summary)
        }
        Experiment::LiminfProbe => {
            let sigma = args.sigma.unwrap_or(cfg.sigma);
            let pair = ProbePair {
                media: liminf_probe(cfg, sigma, false)?,
                homogeneous_control: liminf_probe(cfg, sigma, true)?,
            };
            write_report(dir, "liminf_probe.json", &pair, &mut files)?;
            let passed = pair.media.passed;
            (passed, format!("sigma = {sigma} sqrt(mu_minus)"))
        }
        Experiment::VerifyBounds => {
            let reports = verify_all_bounds(cfg)?;
            write_report(dir, "verify_bounds.json", &reports, &mut files)?;
            let failed = reports.iter().filter(|r| !r.passed()).count();
            (
                failed == 0,
                format!("{} comparisons, {failed} with violations", reports.len()),
            )
        }
        Experiment::Speed => {
            let outcome = homogeneous_control(cfg, &cfg.levels, cfg.horizon)?;
            files.extend(write_artifacts(dir, "speed", &outcome).map_err(io_at(dir))?);
            let slopes: Vec<String> = outcome
                .report
                .speed_fits
                .iter()
                .map(|f| format!("gamma {}: slope {:.4}", f.gamma, f.slope))
                .collect();
            (outcome.report.passed, slopes.join(", "))
        }
        Experiment::Zlatos => {
            let outcome = kpp_core::harness::zlatos(cfg)?;
            files.extend(write_artifacts(dir, "zlatos", &outcome).map_err(io_at(dir))?);
            (outcome.report.passed, outcome.report.notes.join("; "))
        }
    };
    Ok(Dispatched {
        passed,
        summary: format!("{}: {summary}", run.experiment.name()),
        files,
    })
}

/// `(x, mu)` samples. Growth rates with `mu_plus < 2 mu_minus` are built
/// with the bounded-regime constructor.
fn media_preview(run: &RunConfig, args: &CommandArgs) -> Result<Vec<(f64, f64)>, CliError> {
    let media_cfg = &run.config.media;
    let (mm, mp) = (media_cfg.mu_minus, media_cfg.mu_plus);
    let profile = match media_cfg.profile() {
        Err(CoreError::RegimeError(_)) if mm < mp && mp < 2.0 * mm => {
            MediaProfile::zlatos(mm, mp, media_cfg.sequence_pair()?, media_cfg.transition)?
        }
        other => other?,
    };
    let from = args.from.unwrap_or(run.config.domain[0]);
    let to = args.to.or(profile.construction_end()).unwrap_or(run.config.domain[1]);
    let step = args.step.unwrap_or(0.5);
    if !(step > 0.0 && from < to) {
        return Err(CliError::Argument(format!(
            "need step > 0 and from < to, got step {step} on [{from}, {to}]"
        )));
    }
    let points = ((to - from) / step).floor() as usize + 1;
    Ok(preview(&profile, from, from + (points - 1) as f64 * step, points))
}
