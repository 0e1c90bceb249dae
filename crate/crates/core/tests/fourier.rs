use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use tdhelm::driver::{solve_helmholtz_with, RunOptions, SolverConfig};
use tdhelm::problem::{CaseTag, ProblemSpec};

/// `max |U_h - naive| / max |naive|` over the fine grid.
fn mismatch(case: CaseTag, omega: f64, tweak: impl FnOnce(&mut SolverConfig)) -> (f64, usize) {
    let spec = ProblemSpec::named(case, omega).unwrap();
    let mut cfg = SolverConfig::for_case(case, omega);
    tweak(&mut cfg);
    let sol = solve_helmholtz_with(&spec, &cfg, RunOptions { record_naive: true }).unwrap();
    let naive = sol.naive.unwrap();
    let scale = naive.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    assert!(scale > 0.0);
    let worst = sol
        .field
        .values
        .iter()
        .zip(&naive)
        .fold(0.0f64, |m, (a, b): (&Complex64, &Complex64)| m.max((a - b).norm()));
    let remeshes = sol.report.dofs.windows(2).filter(|w| w[0] != w[1]).count();
    println!("{case}: j_stop {} remeshes {remeshes} mismatch {:.2e}", sol.report.j_stop, worst / scale);
    (worst / scale, remeshes)
}

#[test]
fn adaptive_transform_matches_direct_sum_1d() {
    let (rel, remeshes) = mismatch(CaseTag::Bump1d, 10.0 * PI, |_| {});
    assert!(remeshes > 3);
    assert!(rel <= 1e-12, "relative mismatch {rel:e}");
}

#[test]
fn adaptive_transform_matches_direct_sum_2d() {
    let (rel, remeshes) = mismatch(CaseTag::Bump2d, 4.0 * PI, |c| c.levels = vec![0.25, 0.05]);
    assert!(remeshes > 3);
    assert!(rel <= 1e-12, "relative mismatch {rel:e}");
}

#[test]
fn adaptive_transform_matches_direct_sum_with_obstacle() {
    let (rel, remeshes) = mismatch(CaseTag::Trap2d, 5.0 * PI, |c| c.levels = vec![0.1, 0.05]);
    assert!(remeshes > 3);
    assert!(rel <= 1e-12, "relative mismatch {rel:e}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn any_thresholds_keep_the_transform_exact(eta_scale in 0.1f64..10.0, t_up_scale in 0.5f64..2.0) {
        let omega = 10.0 * PI;
        let (rel, _) = mismatch(CaseTag::Bump1d, omega, |c| {
            c.eta0 *= eta_scale;
            c.t_up *= t_up_scale;
        });
        prop_assert!(rel <= 1e-12, "relative mismatch {:e}", rel);
    }
}
