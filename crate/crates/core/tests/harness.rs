use kpp_core::harness::{
    homogeneous_control, liminf_probe, preset, run_theorem1, verify_all_bounds, verify_bounds_on, Side,
};
use kpp_core::media::Homogeneous;
use kpp_core::solver::SolverConfig;

#[test]
fn bounds_hold_on_the_media_and_fail_on_a_corrupted_one() {
    let mut cfg = preset("ci").unwrap();
    cfg.horizon = 120.0;
    let honest = verify_all_bounds(&cfg).unwrap();
    assert!(honest.iter().all(|r| r.passed() && r.points_checked > 0), "{honest:?}");
    // a uniformly fast landscape outruns the slow-block supersolution
    let corrupted = verify_bounds_on(&cfg, &Homogeneous::new(4.0)).unwrap();
    let vbar = corrupted.iter().find(|r| r.bound == "vbar").unwrap();
    assert!(vbar.violations > 0, "{vbar:?}");
}

#[test]
fn refining_dx_moves_level_sets_by_at_most_dx() {
    let mut coarse = preset("ci").unwrap();
    coarse.solver = SolverConfig {
        dx: 0.1,
        ..SolverConfig::default()
    };
    let mut fine = coarse.clone();
    fine.solver.dx = 0.05;
    let levels = [0.1, 0.5, 0.9];
    let a = homogeneous_control(&coarse, &levels, 40.0).unwrap();
    let b = homogeneous_control(&fine, &levels, 40.0).unwrap();
    for (ta, tb) in a.traces.iter().zip(&b.traces) {
        let mut compared = 0;
        for s in ta.samples.iter().filter(|s| s.t >= 1.0) {
            let r = tb.at_or_after(s.t - 1e-9).unwrap();
            assert!((r.t - s.t).abs() < 1e-9);
            assert!((r.x_plus - s.x_plus).abs() <= 0.1, "gamma {} at t {}", ta.gamma, s.t);
            compared += 1;
        }
        assert!(compared > 50);
    }
}

#[test]
fn ci_run_crosses_both_blocks_without_a_gated_index() {
    let out = run_theorem1(&preset("ci").unwrap()).unwrap();
    let r = &out.report;
    assert_eq!(r.records.len(), 2);
    assert!(r
        .records
        .iter()
        .all(|rec| rec.t_cross.is_some() && rec.crossing_speed_ok == Some(true)));
    assert!(r.records.iter().all(|rec| !rec.gated));
    assert!(r.notes.iter().any(|n| n.contains("no index passed every gate")));
    assert!(!r.passed);
    // X- moves through the slow block at the slow speed
    let fits: Vec<_> = r.speed_fits.iter().filter(|f| f.side == Side::Minus).collect();
    assert!(!fits.is_empty());
    for f in fits {
        assert!((f.slope / 2.0 - 1.0).abs() < 0.05, "{f:?}");
    }
}

#[test]
fn liminf_probe_passes_on_ci_and_gates_its_control() {
    let cfg = preset("ci").unwrap();
    let media = liminf_probe(&cfg, cfg.sigma, false).unwrap();
    let control = liminf_probe(&cfg, cfg.sigma, true).unwrap();
    assert!(media.passed, "{media:?}");
    assert!(media.records.iter().any(|r| r.below == Some(true)));
    // the slower homogeneous front has not reached y_0 by the probe time
    assert!(control.homogeneous && !control.passed);
    let reason = control.records[0].rejected.as_deref().unwrap();
    assert!(reason.contains("precedes the crossing"), "{reason}");
}
