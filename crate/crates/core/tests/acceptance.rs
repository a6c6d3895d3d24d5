//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the preset simulations are shared between the
//! criteria that read them and the lines are printed without capture.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use common::{dense_density_step, heat_band_by_quadrature, heat_operator_ratio, random_field};
use kpp_core::bounds::{bump_schedule, bump_subsolution, heat_band_integral, s_n, supersolution_vbar, BoundParams};
use kpp_core::harness::{
    homogeneous_control, plot_csv, preset, run_theorem1, speed_fit, traces_csv, zlatos, ExperimentConfig, IndexRecord,
    Outcome, Side, WIDTH_SLACK,
};
use kpp_core::media::{GrowthRate, SequencePair};
use kpp_core::solver::{step, Scheme, SolverConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Runs {
    ci: Outcome,
    ci_again: Outcome,
    desk: Outcome,
}

fn theorem1(name: &str) -> Result<Outcome, String> {
    let cfg = preset(name).map_err(|e| e.to_string())?;
    run_theorem1(&cfg).map_err(|e| format!("{name}: {e}"))
}

fn homogeneous_speed() -> Verdict {
    let mut cfg = preset("ci").map_err(|e| e.to_string())?;
    cfg.media.mu_minus = 1.0;
    cfg.solver = SolverConfig::default();
    let started = Instant::now();
    let out = homogeneous_control(&cfg, &[0.5], 80.0).map_err(|e| e.to_string())?;
    let seconds = started.elapsed().as_secs_f64();
    let fit = speed_fit(&out.traces[0], [40.0, 80.0], Side::Plus).map_err(|e| e.to_string())?;
    let rel = (fit.slope / 2.0 - 1.0).abs();
    check(
        rel <= 0.03 && seconds < 30.0,
        format!("slope {:.4} (off by {:.2}%), {seconds:.1} s", fit.slope, 100.0 * rel),
    )
}

fn zero_width() -> Verdict {
    let mut cfg = preset("ci").map_err(|e| e.to_string())?;
    cfg.solver = SolverConfig::default();
    let out = homogeneous_control(&cfg, &[0.1, 0.5, 0.9], 80.0).map_err(|e| e.to_string())?;
    let dx = cfg.solver.dx;
    let mut samples = 0;
    let mut widest: f64 = 0.0;
    for trace in &out.traces {
        samples += trace.samples.len();
        widest = trace.samples.iter().map(|s| s.width).fold(widest, f64::max);
    }
    check(
        samples > 0 && widest <= dx,
        format!("widest {widest} over {samples} samples, dx {dx}"),
    )
}

fn bound_reports(out: &Outcome, name: &str) -> Vec<(u64, u64)> {
    out.report
        .bounds
        .iter()
        .filter(|b| b.bound == name)
        .map(|b| (b.points_checked, b.violations))
        .collect()
}

fn zero_violations(runs: &[(&str, &Outcome)], bound: &str) -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for (preset, out) in runs {
        let reports = bound_reports(out, bound);
        let points: u64 = reports.iter().map(|r| r.0).sum();
        let violations: u64 = reports.iter().map(|r| r.1).sum();
        ok &= !reports.is_empty() && points > 0 && violations == 0;
        parts.push(format!("{preset}: {violations} violations in {points} points"));
    }
    check(ok, parts.join(", "))
}

fn gated(out: &Outcome) -> Vec<&IndexRecord> {
    out.report.records.iter().filter(|r| r.gated).collect()
}

fn supersolutions(ci: &Outcome) -> Verdict {
    let gated_count = gated(ci).len();
    // ci has no gated index, so every index with a report is held to the bound
    let mut parts = Vec::new();
    let mut ok = true;
    for bound in ["vbar", "ubar"] {
        let reports = bound_reports(ci, bound);
        let points: u64 = reports.iter().map(|r| r.0).sum();
        let violations: u64 = reports.iter().map(|r| r.1).sum();
        ok &= !reports.is_empty() && points > 0 && violations == 0;
        parts.push(format!("{bound}: {violations}/{points} over {} indices", reports.len()));
    }
    parts.push(format!("{gated_count} gated"));
    check(ok, parts.join(", "))
}

/// The width line rebuilt from the record and parameter fields.
fn p_line_from_fields(out: &Outcome, r: &IndexRecord) -> Option<f64> {
    let p = out.report.params.as_ref()?;
    let t_eval = r.t_eval?;
    Some(1.0 + p.r - p.ell + (r.x_next - r.y_n) - 2.0 * p.mu_minus.sqrt() * (t_eval - r.s_n))
}

fn width_line(runs: &[(&str, &Outcome)]) -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut counted = false;
    for (preset, out) in runs {
        let records = gated(out);
        let mut positive = false;
        for r in &records {
            let (Some(w), Some(p)) = (r.width_eval, r.p_line) else {
                ok = false;
                continue;
            };
            let rebuilt = p_line_from_fields(out, r).unwrap_or(f64::NAN);
            ok &= (rebuilt - p).abs() <= 1e-12 * p.abs().max(1.0);
            ok &= w >= p - WIDTH_SLACK;
            positive |= p > 0.0;
            parts.push(format!("{preset} n={}: width {w:.2} vs P {p:.2}", r.n));
        }
        if records.is_empty() {
            parts.push(format!("{preset}: no gated index"));
        }
        counted |= positive;
    }
    check(ok && counted, parts.join(", "))
}

fn ratio_dichotomy(desk: &Outcome) -> Verdict {
    let primary = desk.report.ratios.first().ok_or("no ratio summary")?;
    let params = desk.report.params.as_ref().ok_or("no parameters")?;
    let lower = 0.5 * (params.mu_plus / (params.mu_plus - params.mu_minus).sqrt() - 2.0 * params.mu_minus.sqrt());
    let upper = 2.0 * (params.mu_plus.sqrt() - params.mu_minus.sqrt());
    let upper_ok = desk.report.ratios.iter().all(|r| r.max <= upper);
    check(
        primary.max >= lower && primary.late_min <= 0.05 && upper_ok,
        format!(
            "gamma {:.4}: max {:.4} >= {lower:.4}, late min {:.4} <= 0.05, upper {upper} {}",
            primary.gamma,
            primary.max,
            primary.late_min,
            if upper_ok { "respected" } else { "violated" }
        ),
    )
}

fn zlatos_control() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["ci", "desk"] {
        let cfg: ExperimentConfig = preset(name).map_err(|e| e.to_string())?;
        let out = zlatos(&cfg).map_err(|e| format!("{name}: {e}"))?;
        ok &= out.report.passed;
        parts.push(format!("{name}: {}", out.report.notes.join("; ")));
    }
    check(ok, parts.join(" | "))
}

fn closed_forms() -> Verdict {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut band: f64 = 0.0;
    for _ in 0..1000 {
        let t = rng.random_range(0.01..100.0);
        let x = rng.random_range(-50.0..200.0);
        let closed = heat_band_integral(t, x).map_err(|e| e.to_string())?;
        band = band.max((closed - heat_band_by_quadrature(t, x)).abs());
    }
    let cfg = preset("desk").map_err(|e| e.to_string())?;
    let seq: SequencePair = cfg.media.sequence_pair().map_err(|e| e.to_string())?;
    let params = BoundParams::new(1.0, 4.0).map_err(|e| e.to_string())?;
    let (mm, mp) = (params.mu_minus, params.mu_plus);
    let s = s_n(0, &seq, mp);
    let mut vbar: f64 = 0.0;
    for _ in 0..1000 {
        let t = s + rng.random_range(0.05..20.0);
        let x = rng.random_range(100.05..160.0);
        let v = |t: f64, x: f64| supersolution_vbar(0, &seq, mm, mp, t, x).unwrap();
        vbar = vbar.max((heat_operator_ratio(v, t, x, 1e-2) - mm).abs());
    }
    let schedule = bump_schedule(0, &seq, &params).map_err(|e| e.to_string())?;
    let rate = mp - 2.0 * params.eps + PI * PI / (4.0 * params.r * params.r);
    let mut bump: f64 = 0.0;
    for _ in 0..1000 {
        let t = rng.random_range(0.01..schedule.tau_dprime - 0.01);
        let x = schedule.support_left + rng.random_range(0.05..0.95) * 2.0 * params.r;
        let f = |t: f64, x: f64| bump_subsolution(&schedule, &params, t, x).unwrap();
        bump = bump.max((heat_operator_ratio(f, t, x, 1e-2) - rate).abs());
    }
    check(
        band < 1e-10 && vbar < 1e-6 && bump < 1e-6,
        format!("heat band {band:.1e}, vbar residual {vbar:.1e}, bump residual {bump:.1e}"),
    )
}

fn crossing_gate(runs: &[(&str, &Outcome)]) -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for (preset, out) in runs {
        let mm = out.report.config.media.mu_minus;
        let mut crossed = 0;
        for r in out.report.records.iter().filter(|r| r.t_cross.is_some()) {
            let t = r.t_cross.unwrap_or(f64::INFINITY);
            let limit = r.y_n / mm.sqrt();
            crossed += 1;
            ok &= t < limit;
            parts.push(format!("{preset} n={}: {t:.2} < {limit}", r.n));
        }
        ok &= crossed > 0;
    }
    check(ok, parts.join(", "))
}

fn dense_oracle() -> Verdict {
    let cfg = preset("ci").map_err(|e| e.to_string())?;
    let media = cfg.media.profile().map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (scheme, theta) in [(Scheme::ImexBe, 1.0), (Scheme::ImexCn, 0.5)] {
        let field = random_field(3, 200, 0.0, 0.25);
        let solver = SolverConfig {
            dx: 0.25,
            dt: 0.1,
            scheme,
            ..SolverConfig::default()
        };
        let mu: Vec<f64> = (0..200).map(|i| media.mu(field.x(i))).collect();
        let expected = dense_density_step(&field, &mu, solver.dt, theta);
        let got = step(&field, &solver, &media).map_err(|e| e.to_string())?;
        worst = got
            .values
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).abs())
            .fold(worst, f64::max);
    }
    check(worst <= 1e-12, format!("largest difference {worst:.1e} over 200 cells"))
}

fn determinism(runs: &Runs) -> Verdict {
    let mm = runs.ci.report.config.media.mu_minus;
    let mp = runs.ci.report.config.media.mu_plus;
    let traces_same = traces_csv(&runs.ci.traces) == traces_csv(&runs.ci_again.traces);
    let plot_same = plot_csv(&runs.ci.traces, mm, mp) == plot_csv(&runs.ci_again.traces, mm, mp);
    let bytes = traces_csv(&runs.ci.traces).len();
    check(
        traces_same && plot_same && bytes > 0,
        format!(
            "two ci runs, {bytes} bytes of traces, identical: {}",
            traces_same && plot_same
        ),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut failures = 0;
    let mut emit = |k: usize, what: &str, verdict: Verdict| {
        let (tag, detail) = match verdict {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {k:>2} {tag} {what}: {detail}");
    };

    emit(1, "homogeneous spreading speed", homogeneous_speed());
    emit(2, "zero-width invariant", zero_width());
    let runs = match (theorem1("ci"), theorem1("ci"), theorem1("desk")) {
        (Ok(ci), Ok(ci_again), Ok(desk)) => Some(Runs { ci, ci_again, desk }),
        (a, b, c) => {
            let err = [a.err(), b.err(), c.err()]
                .into_iter()
                .flatten()
                .collect::<Vec<_>>()
                .join("; ");
            for (k, what) in [
                (3, "global exponential bound"),
                (4, "Gaussian lower bound"),
                (5, "supersolution sweep"),
                (6, "finite-n width line"),
                (7, "ratio dichotomy"),
            ] {
                emit(k, what, Err(err.clone()));
            }
            None
        }
    };
    if let Some(runs) = &runs {
        let both = [("ci", &runs.ci), ("desk", &runs.desk)];
        emit(3, "global exponential bound", zero_violations(&both, "exp-upper"));
        emit(4, "Gaussian lower bound", zero_violations(&both[..1], "gaussian-lower"));
        emit(5, "supersolution sweep", supersolutions(&runs.ci));
        emit(6, "finite-n width line", width_line(&both));
        emit(7, "ratio dichotomy", ratio_dichotomy(&runs.desk));
    }
    emit(8, "Zlatos-regime control", zlatos_control());
    emit(9, "closed-form integrity", closed_forms());
    match &runs {
        Some(runs) => emit(
            10,
            "crossing-time gate",
            crossing_gate(&[("ci", &runs.ci), ("desk", &runs.desk)]),
        ),
        None => emit(10, "crossing-time gate", Err("preset runs failed".into())),
    }
    emit(11, "oracle equivalence", dense_oracle());
    match &runs {
        Some(runs) => emit(12, "determinism", determinism(runs)),
        None => emit(12, "determinism", Err("preset runs failed".into())),
    }
    println!(
        "acceptance: {failures} failed, {:.1} s",
        started.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
