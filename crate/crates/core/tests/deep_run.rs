//! A deeper minimal-scheduler run than the unit tests use. The support
//! estimate at threshold 1/2 reads zero until some sample crosses 1/2,
//! which first happens at stage 5 — only then does the gap between the
//! estimated measure and the mass start to close.

use thinspec::construction::{run, support_estimate};
use thinspec::{RunConfig, SchedulerPolicy};

#[test]
fn support_measure_gap_starts_closing_at_stage_five() {
    let config = RunConfig {
        iters: 5,
        ..RunConfig::default()
    };
    let state = run(&config, &SchedulerPolicy::default()).unwrap();

    let mut f = state.f0().clone();
    let mut diffs = Vec::new();
    for g in state.g_history().unwrap() {
        f = f.add(g).unwrap();
        let estimate = support_estimate(&f, 0.5).unwrap();
        diffs.push((estimate.measure - f.integral()).abs());
    }

    assert_eq!(diffs.len(), 5);
    // Stages 1-4 stay below 1/2 everywhere, so the estimate is empty and
    // the gap equals the (conserved) mass.
    for &d in &diffs[..4] {
        assert!((d - 1.0 / 3.0).abs() < 1e-3, "early gap was {d}");
    }
    // Mass conservation keeps the early gaps equal up to quadrature noise.
    for w in diffs.windows(2) {
        assert!(w[1] <= w[0] + 1e-8, "gap increased: {diffs:?}");
    }
    // Stage 5 crosses 1/2 and the gap strictly drops.
    assert!(state.f_final().min_max().1 > 0.5);
    assert!(
        (diffs[4] - 0.3175).abs() < 5e-4,
        "final gap was {}",
        diffs[4]
    );
    assert!(diffs[4] < diffs[0] - 0.01);
}
