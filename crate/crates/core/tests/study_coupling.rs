//! Checks on how the study couples schemes to the reference.

mod common;

use setdm::harness::{run_study, ProblemKind, StudyConfig};
use setdm::integrators::SchemeKind;

/// SETDM1 at the path's finest step reproduces the finest reference bit for
/// bit, which only happens when both consume the same increments.
#[test]
fn finest_level_matches_reference_exactly() {
    for heterogeneous in [false, true] {
        let mut cfg = StudyConfig::advection(8, 2, heterogeneous);
        cfg.noise.n1 = Some(10);
        cfg.noise.n2 = Some(10);
        cfg.study.t_end = 0.25;
        cfg.study.finest_dt = Some(1.0 / 64.0);
        cfg.study.dt_list = vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
        let rep = run_study(&cfg).unwrap();
        let rows: Vec<_> = rep.rows_for(SchemeKind::Setdm1).collect();
        assert_eq!(rows.last().unwrap().rms_error, 0.0);
        assert!(rows[..3].iter().all(|r| r.rms_error > 0.0));
        let setdm0 = rep.rows_for(SchemeKind::Setdm0).last().unwrap().rms_error;
        assert!(setdm0 > 0.0);
    }
}

/// Sampled RMS errors of the linear study agree with the mean-square
/// recursion of the continuum problem.
#[test]
fn additive_errors_match_mean_square_recursion() {
    let mut cfg = StudyConfig::linear_additive(16, 40);
    cfg.study.dt_list = vec![0.1, 0.05, 0.025];
    cfg.noise.n1 = Some(24);
    cfg.noise.n2 = Some(24);
    let rep = run_study(&cfg).unwrap();
    assert_eq!(rep.metadata.problem, ProblemKind::LinearAdditive);
    let spec = cfg.noise.build(&cfg.grid().unwrap()).unwrap();
    for s in SchemeKind::ALL {
        let expected = common::rms_errors(&spec, 1.0, s, &cfg.study.dt_list, 1.0);
        for (row, e) in rep.rows_for(s).zip(&expected) {
            let rel = (row.rms_error - e).abs() / e;
            assert!(rel < 0.15, "{s:?} dt={}: sampled {} vs {e}", row.dt, row.rms_error);
        }
    }
}

/// Errors shrink under refinement for the additive problem.
#[test]
fn additive_errors_decrease() {
    let mut cfg = StudyConfig::linear_additive(12, 10);
    cfg.noise.n1 = Some(16);
    cfg.noise.n2 = Some(16);
    let rep = run_study(&cfg).unwrap();
    for s in SchemeKind::ALL {
        let e: Vec<f64> = rep.rows_for(s).map(|r| r.rms_error).collect();
        let inversions = e.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(inversions <= 1, "{s:?}: {e:?}");
        assert!(e[4] < e[0]);
    }
}
