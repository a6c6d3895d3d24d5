//! End-to-end experiments: the instrumented diverging-interface run with
//! per-index gate bookkeeping, homogeneous and bounded-regime controls,
//! probes, speed fits, and report/trace artifacts.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    bump_schedule, calibrate_theta, tau_prime, theorem_rates, width_line, xminus_window, Bound, BoundCheck,
    BoundParams, BoundReport, BumpSchedule, Calibration, Region, XMinusWindow, HARNACK_FLOOR,
};
use crate::error::{Error, Result};
use crate::levelset::{level_positions, ratio_extrema, LevelTrace, LevelTracer, TRACE_CSV_HEADER};
use crate::media::{generate_sequences, GrowthRate, Homogeneous, MediaProfile, SequencePair, SequenceSpec, Transition};
use crate::solver::{evolve, Field, Observer, Representation, RunStats, SolverConfig};

/// Cap on the measured Harnack constant, which must stay below 1.
pub const HARNACK_CAP: f64 = 0.999;

/// Width slack allowed against the finite-index line.
pub const WIDTH_SLACK: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaConfig {
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub sequence: SequenceSpec,
    /// Number of `(x_n, y_n)` pairs to build.
    pub n_max: usize,
    #[serde(default)]
    pub transition: Transition,
}

impl MediaConfig {
    pub fn sequence_pair(&self) -> Result<SequencePair> {
        generate_sequences(&self.sequence, self.n_max)
    }

    pub fn profile(&self) -> Result<MediaProfile> {
        MediaProfile::new(self.mu_minus, self.mu_plus, self.sequence_pair()?, self.transition)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub media: MediaConfig,
    pub solver: SolverConfig,
    /// Extra levels traced besides the bound level `gamma`.
    pub levels: Vec<f64>,
    pub horizon: f64,
    /// Time between trace samples.
    pub trace_interval: f64,
    pub tolerance: f64,
    /// Overrides `eps0 / 2`.
    pub eps: Option<f64>,
    /// Overrides `Gamma / 2`.
    pub gamma: Option<f64>,
    pub calibration_hold: f64,
    pub calibration_budget: f64,
    /// Probe speed of the liminf experiment, in units of `sqrt(mu_minus)`.
    pub sigma: f64,
    /// `mu_plus / mu_minus` of the bounded-regime control.
    pub zlatos_ratio: f64,
    pub speed_window: [f64; 2],
    /// Initial window `[a, b]`; the right end grows with the front.
    pub domain: [f64; 2],
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        preset("ci").expect("ci preset is valid")
    }
}

/// `ci` (fast, one bump) and `desk` (one long slow block after a fast one).
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = |xs: Vec<f64>, ys: Vec<f64>, horizon: f64| ExperimentConfig {
        media: MediaConfig {
            mu_minus: 1.0,
            mu_plus: 4.0,
            n_max: xs.len(),
            sequence: SequenceSpec::Explicit { xs, ys },
            transition: Transition::SmoothExp,
        },
        solver: SolverConfig::default(),
        levels: vec![0.5],
        horizon,
        trace_interval: 0.5,
        tolerance: 1e-3,
        eps: None,
        gamma: None,
        calibration_hold: 20.0,
        calibration_budget: 400.0,
        sigma: 8.0,
        zlatos_ratio: 1.5,
        speed_window: [40.0, 80.0],
        domain: [-20.0, 40.0],
    };
    match name {
        "ci" => Ok(base(vec![20.0, 300.0], vec![100.0, 900.0], 350.0)),
        "desk" => {
            let mut cfg = base(vec![20.0, 500.0, 12500.0], vec![100.0, 2500.0, 62500.0], DESK_HORIZON);
            // the bump at x_2 grows from values near e^-6000
            cfg.solver = SolverConfig {
                dx: 0.25,
                dt: 0.05,
                bound_check_stride: 20,
                representation: Representation::Log,
                ..SolverConfig::default()
            };
            Ok(cfg)
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown preset {other:?} (known: ci, desk)"
        ))),
    }
}

/// Long enough to reach `t_(1,gamma) + tau_1` on the desk sequences.
pub const DESK_HORIZON: f64 = 5600.0;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        self.solver.validate(self.media.mu_plus)?;
        if !(self.horizon > 0.0) {
            return bad(format!("horizon must be > 0, got {}", self.horizon));
        }
        if let Some(g) = self.levels.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
            return bad(format!("level {g} outside (0, 1)"));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return bad(format!("gamma {g} outside (0, 1)"));
            }
        }
        if !(self.trace_interval >= self.solver.dt) {
            return bad("trace_interval must be at least one time step".into());
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be >= 0".into());
        }
        if !(self.speed_window[0] < self.speed_window[1]) {
            return bad("speed_window must be increasing".into());
        }
        if !(self.domain[0] < 0.0 && 0.0 < self.domain[1]) {
            return bad("domain must contain 0".into());
        }
        self.media.sequence_pair()?;
        Ok(())
    }

    fn trace_stride(&self) -> usize {
        ((self.trace_interval / self.solver.dt).round() as usize).max(1)
    }

    fn bound_params(&self) -> Result<BoundParams> {
        let mut p = BoundParams::new(self.media.mu_minus, self.media.mu_plus)?;
        if let Some(eps) = self.eps {
            p = p.with_eps(eps)?;
        }
        if let Some(g) = self.gamma {
            p = p.with_gamma(g)?;
        }
        Ok(p)
    }

    fn traced_levels(&self, gamma: Option<f64>) -> Vec<f64> {
        let mut levels: Vec<f64> = gamma.into_iter().collect();
        for &g in &self.levels {
            if !levels.contains(&g) {
                levels.push(g);
            }
        }
        levels
    }
}

/// Explicit booleans for every largeness condition at one index.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Gates {
    pub crossed: bool,
    pub tau_prime: bool,
    pub plateau: bool,
    pub alpha: bool,
    pub ell_m: bool,
    pub window: bool,
    pub horizon: bool,
}

impl Gates {
    pub fn all(&self) -> bool {
        self.crossed && self.tau_prime && self.plateau && self.alpha && self.ell_m && self.window && self.horizon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexRecord {
    pub n: usize,
    pub y_n: f64,
    pub x_next: f64,
    pub s_n: f64,
    pub t_cross: Option<f64>,
    /// `t_cross < y_n / sqrt(mu_minus)`.
    pub crossing_speed_ok: Option<bool>,
    pub harnack: Option<f64>,
    pub schedule: Option<BumpSchedule>,
    pub schedule_error: Option<String>,
    pub window: Option<XMinusWindow>,
    pub gates: Gates,
    pub gated: bool,
    /// `t_cross + tau_n`.
    pub t_eval: Option<f64>,
    pub x_minus_eval: Option<f64>,
    pub x_plus_eval: Option<f64>,
    pub width_eval: Option<f64>,
    /// `P(n)`, the proof's lower line for the width at `t_eval`.
    pub p_line: Option<f64>,
    /// `width_eval - p_line`.
    pub width_margin: Option<f64>,
    /// `X+(t_eval) >= x_(n+1) + 1 + R`.
    pub x_plus_reached: Option<bool>,
    /// Trace samples in the window where `X-` exceeded its line.
    pub x_minus_excursions: Option<u64>,
    pub bump_check: Option<BoundReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSummary {
    pub gamma: f64,
    pub max: f64,
    pub t_max: f64,
    /// Minimum over the final third of the run.
    pub late_min: f64,
    pub t_late_min: f64,
    pub lower_target: f64,
    pub upper_target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedFit {
    pub gamma: f64,
    pub side: Side,
    pub window: [f64; 2],
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation from the fitted line.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares line through `(t, X)` over `window`.
pub fn speed_fit(trace: &LevelTrace, window: [f64; 2], side: Side) -> Result<SpeedFit> {
    let points: Vec<(f64, f64)> = trace
        .samples
        .iter()
        .filter(|s| s.t >= window[0] && s.t <= window[1])
        .map(|s| {
            (
                s.t,
                match side {
                    Side::Plus => s.x_plus,
                    Side::Minus => s.x_minus,
                },
            )
        })
        .collect();
    if points.len() < 10 {
        return Err(Error::EmptyWindow);
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = points.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stx: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
    let slope = stx / stt;
    let intercept = mx - slope * mt;
    let residual = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).abs())
        .fold(0.0, f64::max);
    Ok(SpeedFit {
        gamma: trace.gamma,
        side,
        window,
        slope,
        intercept,
        residual,
        samples: points.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub params: Option<BoundParams>,
    pub calibration: Option<Calibration>,
    pub records: Vec<IndexRecord>,
    pub ratios: Vec<RatioSummary>,
    pub speed_fits: Vec<SpeedFit>,
    pub bounds: Vec<BoundReport>,
    pub stats: RunStats,
    pub passed: bool,
    pub notes: Vec<String>,
    pub wall_seconds: f64,
}

/// A report with the traces it was computed from.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: ExperimentReport,
    pub traces: Vec<LevelTrace>,
}

struct IndexState {
    n: usize,
    y: f64,
    last: Option<(f64, f64)>,
    t_cross: Option<f64>,
    harnack: Option<f64>,
    schedule: Option<std::result::Result<BumpSchedule, Error>>,
    eval: Option<(f64, f64, f64)>,
    bump: Option<BoundCheck>,
}

/// Per-index state machine: crossing at `y_n`, Harnack measurement one
/// time unit later, bump schedule, bump comparison, and width capture at
/// `t_cross + tau_n`.
struct Theorem1Monitor {
    params: BoundParams,
    seq: SequencePair,
    states: Vec<IndexState>,
    tolerance: f64,
    bound_stride: usize,
    stride: usize,
    step: usize,
}

impl Theorem1Monitor {
    /// Snapshots are taken about every 0.1 time units, on a divisor of the
    /// bound stride.
    fn new(params: BoundParams, seq: SequencePair, tolerance: f64, solver: &SolverConfig) -> Self {
        let bound_stride = solver.bound_check_stride;
        let mut stride = ((0.1 / solver.dt).round() as usize).clamp(1, bound_stride);
        while !bound_stride.is_multiple_of(stride) {
            stride -= 1;
        }
        let states = (0..seq.len())
            .map(|n| IndexState {
                n,
                y: seq.ys()[n],
                last: None,
                t_cross: None,
                harnack: None,
                schedule: None,
                eval: None,
                bump: None,
            })
            .collect();
        Self {
            params,
            seq,
            states,
            tolerance,
            bound_stride,
            stride,
            step: 0,
        }
    }
}

impl Observer for Theorem1Monitor {
    fn stride(&self) -> usize {
        self.stride
    }

    fn observe(&mut self, field: &Field) -> Result<()> {
        let gamma = self.params.gamma;
        let t = field.t;
        let check_now = (self.step * self.stride).is_multiple_of(self.bound_stride);
        self.step += 1;
        for st in &mut self.states {
            if st.t_cross.is_none() {
                let u = field.value_at(st.y);
                if u >= gamma {
                    st.t_cross = Some(match st.last {
                        None => t,
                        Some((t0, u0)) => t0 + (gamma - u0) / (u - u0) * (t - t0),
                    });
                }
                st.last = Some((t, u));
                continue;
            }
            let t_cross = st.t_cross.unwrap_or(0.0);
            if st.harnack.is_none() && t >= t_cross + 1.0 {
                let range = field.index_range(st.y - 1.0, st.y);
                let min = range.map(|i| field.values[i]).fold(f64::INFINITY, f64::min);
                let c = (min / gamma).clamp(HARNACK_FLOOR, HARNACK_CAP);
                st.harnack = Some(c);
                if st.n + 1 < self.seq.len() {
                    let params = self.params.clone().with_harnack(c);
                    let schedule = bump_schedule(st.n, &self.seq, &params);
                    if let Ok(s) = &schedule {
                        let start = t_cross + 1.0 + s.tau_prime;
                        let region = Region {
                            t_lo: start,
                            t_hi: start + s.tau_dprime,
                            x_lo: s.support_left,
                            x_hi: s.support_left + 2.0 * params.r,
                        };
                        let bound = Bound::Bump {
                            schedule: s.clone(),
                            params,
                            start,
                        };
                        st.bump = Some(BoundCheck::new(bound, region, self.tolerance, 1));
                    }
                    st.schedule = Some(schedule);
                }
            }
            if let Some(check) = st.bump.as_mut() {
                if check_now {
                    check.observe(field)?;
                }
            }
            if st.eval.is_none() {
                if let Some(Ok(s)) = &st.schedule {
                    if t >= t_cross + s.tau {
                        let (xm, xp) = level_positions(field, gamma)?;
                        st.eval = Some((t, xm, xp));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Writes through a temporary sibling that is renamed into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Trace rows for every level, in level order then time order.
pub fn traces_csv(traces: &[LevelTrace]) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "{TRACE_CSV_HEADER}").expect("write to Vec");
    for trace in traces {
        trace.write_csv_rows(&mut out).expect("write to Vec");
    }
    out
}

/// `t,I/t,lower_target,upper_target` for the first trace.
pub fn plot_csv(traces: &[LevelTrace], mu_minus: f64, mu_plus: f64) -> Vec<u8> {
    let (lower, upper) = theorem_rates(mu_minus, mu_plus);
    let mut out = Vec::new();
    writeln!(out, "t,I/t,lower_target,upper_target").expect("write to Vec");
    if let Some(trace) = traces.first() {
        for s in trace.samples.iter().filter(|s| s.t > 0.0) {
            writeln!(out, "{},{},{},{}", s.t, s.width / s.t, lower, upper).expect("write to Vec");
        }
    }
    out
}

/// Writes `<name>.json`, `<name>_trace.csv` and `<name>_plot.csv` into `dir`.
pub fn write_artifacts(dir: &Path, name: &str, outcome: &Outcome) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let media = &outcome.report.config.media;
    let json = serde_json::to_vec_pretty(&outcome.report).map_err(io::Error::other)?;
    let files = [
        (format!("{name}.json"), json),
        (format!("{name}_trace.csv"), traces_csv(&outcome.traces)),
        (
            format!("{name}_plot.csv"),
            plot_csv(&outcome.traces, media.mu_minus, media.mu_plus),
        ),
    ];
    let mut written = Vec::new();
    for (file, bytes) in files {
        let path = dir.join(file);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let json = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    write_atomic(path, &json)
}

fn ratio_summary(trace: &LevelTrace, horizon: f64, mu_minus: f64, mu_plus: f64) -> Result<RatioSummary> {
    let all = ratio_extrema(trace, 0.0)?;
    let late = ratio_extrema(trace, horizon * 2.0 / 3.0)?;
    let (lower, upper) = theorem_rates(mu_minus, mu_plus);
    Ok(RatioSummary {
        gamma: trace.gamma,
        max: all.max,
        t_max: all.t_max,
        late_min: late.min,
        t_late_min: late.t_min,
        lower_target: lower,
        upper_target: upper,
    })
}

fn global_bounds(cfg: &ExperimentConfig, params: &BoundParams, seq: &SequencePair) -> Vec<BoundCheck> {
    let stride = cfg.solver.bound_check_stride;
    let tol = cfg.tolerance;
    let (mm, mp) = (params.mu_minus, params.mu_plus);
    let everywhere = Region {
        t_lo: 0.0,
        t_hi: cfg.horizon,
        x_lo: f64::NEG_INFINITY,
        x_hi: f64::INFINITY,
    };
    let mut checks = vec![
        BoundCheck::new(Bound::ExpUpper { mu_plus: mp }, everywhere, tol, stride),
        BoundCheck::new(
            Bound::GaussianLower { params: params.clone() },
            Region {
                t_lo: f64::MIN_POSITIVE,
                ..everywhere
            },
            tol,
            stride,
        ),
    ];
    for n in 0..seq.len().saturating_sub(1) {
        let (y, x1) = (seq.ys()[n], seq.xs()[n + 1]);
        let s = crate::bounds::s_n(n, seq, mp);
        let vbar = Bound::Vbar {
            n,
            seq: seq.clone(),
            mu_minus: mm,
            mu_plus: mp,
        };
        let ubar = Bound::Ubar {
            n,
            seq: seq.clone(),
            mu_minus: mm,
            mu_plus: mp,
        };
        let late = |x_hi: f64| Region {
            t_lo: s,
            t_hi: cfg.horizon,
            x_lo: y,
            x_hi,
        };
        checks.push(BoundCheck::new(vbar, late(x1), tol, stride));
        checks.push(BoundCheck::new(ubar, late(f64::INFINITY), tol, stride));
    }
    checks
}

/// Bound sweep of one run of `media` against the formulas built from `cfg`.
///
/// `media` normally is `cfg.media.profile()`; other landscapes serve as
/// falsification controls.
pub fn verify_bounds_on<M: GrowthRate + ?Sized>(cfg: &ExperimentConfig, media: &M) -> Result<Vec<BoundReport>> {
    cfg.validate()?;
    let seq = cfg.media.sequence_pair()?;
    let params = calibrated_params(cfg)?.0;
    let mut checks = global_bounds(cfg, &params, &seq);
    let mut observers: Vec<&mut dyn Observer> = checks.iter_mut().map(|c| c as &mut dyn Observer).collect();
    evolve(&cfg.solver, media, cfg.domain, cfg.horizon, &mut observers)?;
    Ok(checks.iter().map(BoundCheck::report).collect())
}

pub fn verify_all_bounds(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let media = cfg.media.profile()?;
    verify_bounds_on(cfg, &media)
}

fn calibrated_params(cfg: &ExperimentConfig) -> Result<(BoundParams, Calibration)> {
    let params = cfg.bound_params()?;
    let cal = calibrate_theta(
        params.eps,
        params.gamma_cap,
        params.mu_minus,
        &cfg.solver,
        cfg.calibration_hold,
        cfg.calibration_budget,
    )?;
    Ok((params.with_calibration(cal.t_cal), cal))
}

/// Trace samples inside the window with `X-` above its line.
fn x_minus_excursions(trace: &LevelTrace, window: &XMinusWindow) -> u64 {
    trace
        .samples
        .iter()
        .filter(|s| s.t >= window.t_lo && s.t <= window.t_hi && s.x_minus > window.line(s.t))
        .count() as u64
}

/// The diverging-interface experiment with every bound checked on the way.
pub fn run_theorem1(cfg: &ExperimentConfig) -> Result<Outcome> {
    let started = Instant::now();
    cfg.validate()?;
    let media = cfg.media.profile()?;
    let seq = cfg.media.sequence_pair()?;
    let (params, cal) = calibrated_params(cfg)?;
    let gamma = params.gamma;

    let levels = cfg.traced_levels(Some(gamma));
    let mut tracer = LevelTracer::new(&levels, cfg.trace_stride());
    let mut monitor = Theorem1Monitor::new(params.clone(), seq.clone(), cfg.tolerance, &cfg.solver);
    let mut checks = global_bounds(cfg, &params, &seq);
    let stats = {
        let mut observers: Vec<&mut dyn Observer> = vec![&mut tracer, &mut monitor];
        observers.extend(checks.iter_mut().map(|c| c as &mut dyn Observer));
        evolve(&cfg.solver, &media, cfg.domain, cfg.horizon, &mut observers)?.1
    };

    let primary = tracer.traces[0].clone();
    let mut records = Vec::new();
    for st in &monitor.states {
        records.push(index_record(st, &params, &seq, &primary, cfg.horizon));
    }

    let mut ratios = Vec::new();
    for trace in &tracer.traces {
        ratios.push(ratio_summary(trace, cfg.horizon, params.mu_minus, params.mu_plus)?);
    }
    let mut speed_fits = Vec::new();
    for r in records.iter() {
        // X- while the front crosses the slow block [y_n, x_(n+1)]
        let inside: Vec<f64> = primary
            .samples
            .iter()
            .filter(|s| {
                let gap = r.x_next - r.y_n;
                s.x_minus >= r.y_n + 0.1 * gap && s.x_minus <= r.y_n + 0.6 * gap
            })
            .map(|s| s.t)
            .collect();
        if let (Some(&a), Some(&b)) = (inside.first(), inside.last()) {
            if let Ok(fit) = speed_fit(&primary, [a, b], Side::Minus) {
                speed_fits.push(fit);
            }
        }
    }
    let mut bounds: Vec<BoundReport> = checks.iter().map(BoundCheck::report).collect();
    bounds.extend(records.iter().filter_map(|r| r.bump_check.clone()));

    let upper = theorem_rates(params.mu_minus, params.mu_plus).1;
    let mut notes = Vec::new();
    let gated: Vec<&IndexRecord> = records.iter().filter(|r| r.gated).collect();
    if gated.is_empty() {
        notes.push("no index passed every gate".to_string());
    }
    let widths_ok = gated
        .iter()
        .all(|r| matches!((r.width_eval, r.p_line), (Some(w), Some(p)) if w >= p - WIDTH_SLACK));
    let positive_line = gated.iter().any(|r| r.p_line.is_some_and(|p| p > 0.0));
    let crossings_ok = records.iter().all(|r| r.crossing_speed_ok != Some(false));
    let upper_ok = ratios.iter().all(|r| r.max <= upper);
    let bounds_ok = bounds.iter().all(BoundReport::passed);
    let any_gated = !gated.is_empty();
    for (ok, what) in [
        (widths_ok, "a gated width fell below its line"),
        (positive_line, "no gated index has a positive line"),
        (crossings_ok, "a crossing came later than y_n / sqrt(mu_minus)"),
        (upper_ok, "I/t exceeded 2(sqrt(mu_plus) - sqrt(mu_minus))"),
        (bounds_ok, "a bound comparison failed"),
    ] {
        if !ok {
            notes.push(what.to_string());
        }
    }
    let report = ExperimentReport {
        experiment: "theorem1".into(),
        config: cfg.clone(),
        params: Some(params),
        calibration: Some(cal),
        records,
        ratios,
        speed_fits,
        bounds,
        stats,
        passed: any_gated && widths_ok && positive_line && crossings_ok && upper_ok && bounds_ok,
        notes,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(Outcome {
        report,
        traces: tracer.traces,
    })
}

fn index_record(
    st: &IndexState,
    params: &BoundParams,
    seq: &SequencePair,
    trace: &LevelTrace,
    horizon: f64,
) -> IndexRecord {
    let n = st.n;
    let has_next = n + 1 < seq.len();
    let x_next = if has_next { seq.xs()[n + 1] } else { f64::INFINITY };
    let s_n = crate::bounds::s_n(n, seq, params.mu_plus);
    let mut gates = Gates {
        crossed: st.t_cross.is_some(),
        ..Gates::default()
    };
    let window = if has_next {
        xminus_window(n, seq, params).ok()
    } else {
        None
    };
    if has_next {
        let gap = x_next - st.y;
        let tp = tau_prime(gap, params.r, params.mu_minus, params.mu_plus);
        gates.tau_prime = gap >= 2.0 * (params.mu_minus - params.eps).sqrt() * tp;
        gates.plateau = seq
            .ys()
            .get(n + 1)
            .is_none_or(|&y1| x_next + 2.0 * params.r + 1.0 <= y1 - 1.0);
        gates.ell_m = window.as_ref().is_some_and(|w| w.valid);
    }
    let schedule = match &st.schedule {
        Some(Ok(s)) => Some(s.clone()),
        _ => None,
    };
    let schedule_error = match &st.schedule {
        Some(Err(e)) => Some(e.to_string()),
        _ => None,
    };
    gates.alpha = schedule.as_ref().is_some_and(|s| s.ln_alpha < params.gamma.ln());
    let t_eval = match (st.t_cross, &schedule) {
        (Some(t), Some(s)) => Some(t + s.tau),
        _ => None,
    };
    if let (Some(te), Some(w)) = (t_eval, &window) {
        gates.window = s_n <= te && te <= w.t_hi;
    }
    gates.horizon = t_eval.is_some_and(|te| te <= horizon);
    let p_line = match (st.t_cross, &schedule) {
        (Some(t), Some(s)) => {
            let p = params.clone().with_harnack(st.harnack.unwrap_or(HARNACK_FLOOR));
            Some(width_line(&p, s, t))
        }
        _ => None,
    };
    let (x_minus_eval, x_plus_eval, width_eval) = match st.eval {
        Some((_, xm, xp)) => (Some(xm), Some(xp), Some((xp - xm).max(0.0))),
        None => (None, None, None),
    };
    IndexRecord {
        n,
        y_n: st.y,
        x_next,
        s_n,
        t_cross: st.t_cross,
        crossing_speed_ok: st.t_cross.map(|t| t < st.y / params.mu_minus.sqrt()),
        harnack: st.harnack,
        gated: gates.all(),
        gates,
        t_eval,
        x_minus_eval,
        x_plus_eval,
        width_eval,
        width_margin: width_eval.zip(p_line).map(|(w, p)| w - p),
        p_line,
        x_plus_reached: x_plus_eval.map(|xp| xp >= x_next + 1.0 + params.r),
        x_minus_excursions: window.as_ref().map(|w| x_minus_excursions(trace, w)),
        bump_check: st.bump.as_ref().map(BoundCheck::report),
        schedule,
        schedule_error,
        window,
    }
}

/// Homogeneous run `mu = mu_minus` from the indicator over `horizon`.
pub fn homogeneous_control(cfg: &ExperimentConfig, levels: &[f64], horizon: f64) -> Result<Outcome> {
    let started = Instant::now();
    cfg.validate()?;
    let media = Homogeneous::new(cfg.media.mu_minus);
    let mut tracer = LevelTracer::new(levels, cfg.trace_stride());
    let stats = evolve(&cfg.solver, &media, cfg.domain, horizon, &mut [&mut tracer])?.1;
    let mut speed_fits = Vec::new();
    for trace in &tracer.traces {
        if let Ok(fit) = speed_fit(trace, cfg.speed_window, Side::Plus) {
            speed_fits.push(fit);
        }
    }
    let mut ratios = Vec::new();
    for trace in &tracer.traces {
        ratios.push(ratio_summary(trace, horizon, cfg.media.mu_minus, cfg.media.mu_plus)?);
    }
    let target = 2.0 * cfg.media.mu_minus.sqrt();
    let passed = speed_fits.iter().all(|f| (f.slope / target - 1.0).abs() <= 0.03);
    let report = ExperimentReport {
        experiment: "speed".into(),
        config: cfg.clone(),
        params: None,
        calibration: None,
        records: Vec::new(),
        ratios,
        speed_fits,
        bounds: Vec::new(),
        stats,
        passed,
        notes: Vec::new(),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(Outcome {
        report,
        traces: tracer.traces,
    })
}

/// Interface widths on the same sequences with `mu_plus = ratio mu_minus`.
pub fn zlatos(cfg: &ExperimentConfig) -> Result<Outcome> {
    let started = Instant::now();
    cfg.validate()?;
    let mm = cfg.media.mu_minus;
    let media = MediaProfile::zlatos(
        mm,
        cfg.zlatos_ratio * mm,
        cfg.media.sequence_pair()?,
        cfg.media.transition,
    )?;
    // same levels as the Theorem-1 run on these sequences
    let levels = cfg.traced_levels(Some(cfg.bound_params()?.gamma));
    let mut tracer = LevelTracer::new(&levels, cfg.trace_stride());
    let stats = evolve(&cfg.solver, &media, cfg.domain, cfg.horizon, &mut [&mut tracer])?.1;
    let mut notes = Vec::new();
    let mut passed = true;
    for trace in &tracer.traces {
        let (first, second) = half_maxima(trace, cfg.horizon);
        let ok = second <= first + cfg.solver.dx;
        passed &= ok;
        notes.push(format!(
            "gamma {}: max width {first} on the first half, {second} on the second",
            trace.gamma
        ));
    }
    let report = ExperimentReport {
        experiment: "zlatos".into(),
        config: cfg.clone(),
        params: None,
        calibration: None,
        records: Vec::new(),
        ratios: Vec::new(),
        speed_fits: Vec::new(),
        bounds: Vec::new(),
        stats,
        passed,
        notes,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(Outcome {
        report,
        traces: tracer.traces,
    })
}

/// Largest width over `(0, horizon/2]` and over `(horizon/2, horizon]`.
pub fn half_maxima(trace: &LevelTrace, horizon: f64) -> (f64, f64) {
    let mid = horizon / 2.0;
    let max_over = |keep: &dyn Fn(f64) -> bool| {
        trace
            .samples
            .iter()
            .filter(|s| keep(s.t))
            .map(|s| s.width)
            .fold(0.0, f64::max)
    };
    (max_over(&|t| t <= mid), max_over(&|t| t > mid))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub n: usize,
    pub position: f64,
    pub t_probe: f64,
    pub t_cross: Option<f64>,
    /// Why the probe was skipped, if it was.
    pub rejected: Option<String>,
    pub x_plus: Option<f64>,
    pub max_u_right: Option<f64>,
    pub below: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub sigma: f64,
    pub gamma: f64,
    pub homogeneous: bool,
    pub records: Vec<ProbeRecord>,
    pub passed: bool,
}

struct ProbeMonitor {
    gamma: f64,
    records: Vec<ProbeRecord>,
    ys: Vec<f64>,
    last: Vec<Option<(f64, f64)>>,
}

impl Observer for ProbeMonitor {
    fn observe(&mut self, field: &Field) -> Result<()> {
        let t = field.t;
        for (k, rec) in self.records.iter_mut().enumerate() {
            if rec.t_cross.is_none() {
                let u = field.value_at(self.ys[k]);
                if u >= self.gamma {
                    rec.t_cross = Some(match self.last[k] {
                        None => t,
                        Some((t0, u0)) => t0 + (self.gamma - u0) / (u - u0) * (t - t0),
                    });
                }
                self.last[k] = Some((t, u));
            }
            if rec.rejected.is_some() || rec.x_plus.is_some() || t < rec.t_probe {
                continue;
            }
            if rec.t_cross.is_none_or(|tc| tc > rec.t_probe) {
                rec.rejected = Some("probe time precedes the crossing at y_n".into());
                continue;
            }
            let (_, xp) = level_positions(field, self.gamma)?;
            let max_u = field
                .index_range(rec.position, f64::INFINITY)
                .map(|i| field.values[i])
                .fold(0.0, f64::max);
            rec.x_plus = Some(xp);
            rec.max_u_right = Some(max_u);
            rec.below = Some(xp < rec.position);
        }
        Ok(())
    }
}

/// Evaluates `X+` at `t = s_n + sqrt(y_n x_(n+1)) / sigma` for each index.
///
/// `sigma` is in units of `sqrt(mu_minus)`. With `homogeneous` the same
/// probes run on `mu = mu_minus` as a control.
pub fn liminf_probe(cfg: &ExperimentConfig, sigma: f64, homogeneous: bool) -> Result<ProbeReport> {
    cfg.validate()?;
    let mm = cfg.media.mu_minus;
    if !(sigma > 2.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must exceed 2 sqrt(mu_minus), got {sigma} sqrt(mu_minus)"
        )));
    }
    let speed = sigma * mm.sqrt();
    let seq = cfg.media.sequence_pair()?;
    let profile = cfg.media.profile()?;
    let params = cfg.bound_params()?;
    let end = profile.construction_end().unwrap_or(f64::INFINITY);
    let mut records = Vec::new();
    let mut ys = Vec::new();
    for n in 0..seq.len().saturating_sub(1) {
        let position = (seq.ys()[n] * seq.xs()[n + 1]).sqrt();
        let t_probe = crate::bounds::s_n(n, &seq, cfg.media.mu_plus) + position / speed;
        let rejected = if position > end {
            Some(
                Error::GateFailed {
                    n,
                    reason: format!("probe {position} beyond the constructed media (end {end})"),
                }
                .to_string(),
            )
        } else if t_probe > cfg.horizon {
            Some(format!("probe time {t_probe} beyond the horizon"))
        } else {
            None
        };
        records.push(ProbeRecord {
            n,
            position,
            t_probe,
            t_cross: None,
            rejected,
            x_plus: None,
            max_u_right: None,
            below: None,
        });
        ys.push(seq.ys()[n]);
    }
    let last_probe = records
        .iter()
        .filter(|r| r.rejected.is_none())
        .map(|r| r.t_probe)
        .fold(0.0, f64::max);
    let mut monitor = ProbeMonitor {
        gamma: params.gamma,
        last: vec![None; records.len()],
        records,
        ys,
    };
    let t_end = last_probe + cfg.solver.dt;
    if homogeneous {
        let media = Homogeneous::new(mm);
        evolve(&cfg.solver, &media, cfg.domain, t_end, &mut [&mut monitor])?;
    } else {
        evolve(&cfg.solver, &profile, cfg.domain, t_end, &mut [&mut monitor])?;
    }
    let evaluated: Vec<&ProbeRecord> = monitor.records.iter().filter(|r| r.below.is_some()).collect();
    let passed = !evaluated.is_empty() && evaluated.iter().all(|r| r.below == Some(true));
    Ok(ProbeReport {
        sigma,
        gamma: params.gamma,
        homogeneous,
        records: monitor.records,
        passed,
    })
}

/// Plain run to the horizon with level traces only.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(Outcome, Field)> {
    let started = Instant::now();
    cfg.validate()?;
    let media = cfg.media.profile()?;
    let levels = cfg.traced_levels(cfg.gamma);
    let mut tracer = LevelTracer::new(&levels, cfg.trace_stride());
    let (field, stats) = evolve(&cfg.solver, &media, cfg.domain, cfg.horizon, &mut [&mut tracer])?;
    let report = ExperimentReport {
        experiment: "simulate".into(),
        config: cfg.clone(),
        params: None,
        calibration: None,
        records: Vec::new(),
        ratios: Vec::new(),
        speed_fits: Vec::new(),
        bounds: Vec::new(),
        stats,
        passed: true,
        notes: Vec::new(),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    Ok((
        Outcome {
            report,
            traces: tracer.traces,
        },
        field,
    ))
}
