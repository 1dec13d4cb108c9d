//! The iterative construction: a smooth bump seed plus cosine-modulated
//! correction terms whose spectra are kept provably separated.
//!
//! Stage `n` replaces `F` by `F + F(1-F)·cos(k_n t)`. Because the spectrum
//! of `F(1-F)` lives inside the doubled hull of the spectrum of `F`, the
//! correction's spectrum occupies two mirror intervals around `±k_n`; picking
//! `k_n` large enough keeps those pieces disjoint from everything already
//! used, and (in slow-density mode) makes the accumulated spectrum an
//! asymptotically vanishing fraction of each new frequency window.
//!
//! All frequency bookkeeping is exact integer arithmetic from
//! [`crate::intervals`]; samples only ever see `cos(k t)` with integer `k`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intervals::{next_hull, spectrum_pieces, FreqInterval, FreqIntervalSet, IntervalError};
use crate::signal::{Grid, SampledSignal, SignalError};

/// Slack allowed around `[0, 1]` for sampled values of `F`.
pub const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("scheduler margin must be at least 1, got {0}")]
    BadMargin(i64),
    #[error("growth index must evaluate to at least 1 at stage {stage}")]
    BadGrowth { stage: usize },
    #[error("oversampling factor must be finite and at least 2, got {0}")]
    BadOversample(f64),
    #[error("frequency arithmetic overflowed at stage {stage}; lower the stage count")]
    Overflow { stage: usize },
    #[error("stage {stage} spectrum pieces collide with the accumulated spectrum")]
    DisjointnessViolation { stage: usize },
    #[error(
        "stage {stage} needs frequencies up to {required} but the grid resolves only {available}"
    )]
    NyquistExceeded {
        stage: usize,
        required: f64,
        available: f64,
    },
    #[error("stage {stage} left the unit range: samples span [{min}, {max}]")]
    RangeViolation { stage: usize, min: f64, max: f64 },
    #[error("threshold must be finite and positive, got {0}")]
    BadThreshold(f64),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

fn at_stage(err: IntervalError, stage: usize) -> ConstructionError {
    match err {
        IntervalError::Overflow => ConstructionError::Overflow { stage },
        other => ConstructionError::Interval(other),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerMode {
    /// Smallest admissible frequency each stage: `k_n = 3r_{n-1} + margin`.
    Minimal,
    /// Additionally force `k_n` so large that the accumulated spectrum fills
    /// at most a `1/g(n)` fraction of `(-r_n, r_n)`.
    SlowDensity,
}

/// The target sparsity index `g(n)` used by [`SchedulerMode::SlowDensity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthIndex {
    Linear { scale: i64 },
    Constant { value: i64 },
}

impl GrowthIndex {
    pub fn eval(&self, stage: usize) -> Result<i64, ConstructionError> {
        let value = match self {
            GrowthIndex::Linear { scale } => scale.checked_mul(stage as i64),
            GrowthIndex::Constant { value } => Some(*value),
        };
        value
            .filter(|v| *v >= 1)
            .ok_or(ConstructionError::BadGrowth { stage })
    }
}

impl Default for GrowthIndex {
    fn default() -> Self {
        GrowthIndex::Linear { scale: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerPolicy {
    pub mode: SchedulerMode,
    pub margin: i64,
    #[serde(default)]
    pub growth: GrowthIndex,
}

impl Default for SchedulerPolicy {
    fn default() -> Self {
        Self {
            mode: SchedulerMode::Minimal,
            margin: 1,
            growth: GrowthIndex::default(),
        }
    }
}

impl SchedulerPolicy {
    pub fn slow_density() -> Self {
        Self {
            mode: SchedulerMode::SlowDensity,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConstructionError> {
        if self.margin < 1 {
            return Err(ConstructionError::BadMargin(self.margin));
        }
        // catches nonpositive scale/value up front
        self.growth.eval(1)?;
        Ok(())
    }
}

/// Pick the modulation frequency for `stage` given the previous hull radius
/// and the measure of the spectrum accumulated so far.
///
/// The floor `3r + margin` certifies every identity the verifier checks:
/// the new pieces `±[k-2r, k+2r]` avoid the old hull `[-r, r]` and each
/// other, `spec(F(1-F)) ⊆ [-2r, 2r]` misses `±k` (so `∫G = 0`), and
/// `spec(F²(1-F)) ⊆ [-3r, 3r]` misses `±k` (so `∫F·G = 0` and the
/// half-energy identity holds exactly).
///
/// Slow-density mode also enforces `k >= g(n)·(m + 8r)`: the stage adds
/// exactly `8r` of new measure, so the ratio at the next checkpoint
/// `R = k + 2r` is `(m + 8r)/(k + 2r) <= 1/g(n)`.
pub fn choose_k(
    stage: usize,
    r_prev: i64,
    accumulated_measure: i128,
    policy: &SchedulerPolicy,
) -> Result<i64, ConstructionError> {
    policy.validate()?;
    let overflow = ConstructionError::Overflow { stage };
    let base = r_prev
        .checked_mul(3)
        .and_then(|v| v.checked_add(policy.margin))
        .ok_or(ConstructionError::Overflow { stage })?;
    match policy.mode {
        SchedulerMode::Minimal => Ok(base),
        SchedulerMode::SlowDensity => {
            let g = policy.growth.eval(stage)? as i128;
            let next_measure = accumulated_measure
                .checked_add(8 * r_prev as i128)
                .ok_or(ConstructionError::Overflow { stage })?;
            let target = g.checked_mul(next_measure).ok_or(overflow)?;
            let target: i64 = target
                .try_into()
                .map_err(|_| ConstructionError::Overflow { stage })?;
            Ok(base.max(target))
        }
    }
}

/// Frequency schedule computed symbolically — no samples involved, so it
/// works even where the grid a full run would need is out of reach.
#[derive(Debug, Clone)]
pub struct SchedulePlan {
    pub k_seq: Vec<i64>,
    /// `hulls[n]` bounds the spectrum of `F_n`; `hulls[0] = [-1, 1]`.
    pub hulls: Vec<FreqInterval>,
    /// Pieces introduced by each stage, so `pieces_by_stage.len() == k_seq.len()`.
    pub pieces_by_stage: Vec<FreqIntervalSet>,
    /// Union of the seed interval and every stage's pieces.
    pub q_pieces: FreqIntervalSet,
}

impl SchedulePlan {
    pub fn stages(&self) -> usize {
        self.k_seq.len()
    }

    pub fn final_radius(&self) -> i64 {
        self.hulls.last().map(|h| h.hi()).unwrap_or(1)
    }
}

pub fn plan_schedule(
    iters: usize,
    policy: &SchedulerPolicy,
) -> Result<SchedulePlan, ConstructionError> {
    policy.validate()?;
    let seed = FreqInterval::symmetric(1).expect("seed interval is valid");
    let mut hulls = vec![seed];
    let mut q_pieces = FreqIntervalSet::singleton(seed);
    let mut k_seq = Vec::with_capacity(iters);
    let mut pieces_by_stage = Vec::with_capacity(iters);
    for stage in 1..=iters {
        let prev = *hulls.last().expect("hulls is never empty");
        let k = choose_k(stage, prev.hi(), q_pieces.measure(), policy)?;
        let pieces = spectrum_pieces(prev, k).map_err(|e| at_stage(e, stage))?;
        if !pieces.are_disjoint(&q_pieces) {
            return Err(ConstructionError::DisjointnessViolation { stage });
        }
        q_pieces = q_pieces.union(&pieces);
        hulls.push(next_hull(prev, k).map_err(|e| at_stage(e, stage))?);
        k_seq.push(k);
        pieces_by_stage.push(pieces);
    }
    Ok(SchedulePlan {
        k_seq,
        hulls,
        pieces_by_stage,
        q_pieces,
    })
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Sample the seed `(1/8π)·sinc⁴(t/4)`: nonnegative, peak `1/8π` at `t = 0`,
/// mass `1/3` over the whole line, spectrum exactly `[-1, 1]`, and `t^{-4}`
/// tails (the mass beyond `|t| = T` is `64/(3πT³)`).
pub fn make_f0(grid: Grid) -> Result<SampledSignal, ConstructionError> {
    if grid.nyquist() < 1.0 {
        return Err(ConstructionError::NyquistExceeded {
            stage: 0,
            required: 1.0,
            available: grid.nyquist(),
        });
    }
    let amp = 1.0 / (8.0 * PI);
    Ok(SampledSignal::from_fn(grid, |t| {
        let s = sinc(0.25 * t);
        let s2 = s * s;
        amp * s2 * s2
    })?)
}

/// One correction step at frequency `k`: `G = F(1-F)·cos(kt)`, `F_next = F + G`.
pub fn modulation_step(
    f: &SampledSignal,
    k: f64,
) -> Result<(SampledSignal, SampledSignal), SignalError> {
    let p = f.pointwise_product(&f.one_minus())?;
    let g = p.cosine_modulate(k)?;
    let f_next = f.add(&g)?;
    Ok((g, f_next))
}

/// Trapezoid quadrature of `min(f, 1-f)²` — squared distance of `f` from the
/// nearer of the two indicator levels.
pub fn indicator_distance_sq(f: &SampledSignal) -> f64 {
    f.map(|v| {
        let d = v.min(1.0 - v);
        d * d
    })
    .integral()
}

/// Full state of a run: grid, schedule, accumulated spectrum, per-stage
/// scalar records, and the samples themselves.
#[derive(Debug, Clone)]
pub struct ConstructionState {
    grid: Grid,
    policy: SchedulerPolicy,
    k_seq: Vec<i64>,
    q_hulls: Vec<FreqInterval>,
    q_pieces: FreqIntervalSet,
    /// Measured mass of the seed, `∫F_0 ≈ 1/3`; every stage must preserve it.
    c: f64,
    /// `I_n = ∫F_n(1-F_n)`, `n = 0..N`.
    i_seq: Vec<f64>,
    /// `∫G_n²`, `n = 1..N` (index 0 is stage 1).
    g_energy: Vec<f64>,
    /// `∫F_n`, `n = 0..N`.
    f_int_seq: Vec<f64>,
    /// `∫[F_n(1-F_n)]²`, `n = 0..N`.
    p_energy: Vec<f64>,
    /// `D_n = ∫min(F_n, 1-F_n)²`, `n = 0..N`.
    d_seq: Vec<f64>,
    f0: SampledSignal,
    f: SampledSignal,
    g_history: Option<Vec<SampledSignal>>,
}

impl ConstructionState {
    /// Stage-0 state: the seed alone, nothing scheduled yet.
    pub fn initial(
        grid: Grid,
        policy: &SchedulerPolicy,
        retain_g: bool,
    ) -> Result<Self, ConstructionError> {
        policy.validate()?;
        let f0 = make_f0(grid)?;
        let c = f0.integral();
        let p = f0.pointwise_product(&f0.one_minus())?;
        let seed = FreqInterval::symmetric(1).expect("seed interval is valid");
        Ok(Self {
            grid,
            policy: policy.clone(),
            k_seq: Vec::new(),
            q_hulls: vec![seed],
            q_pieces: FreqIntervalSet::singleton(seed),
            c,
            i_seq: vec![p.integral()],
            g_energy: Vec::new(),
            f_int_seq: vec![c],
            p_energy: vec![p.l2_norm_sq()],
            d_seq: vec![indicator_distance_sq(&f0)],
            f: f0.clone(),
            f0,
            g_history: retain_g.then(Vec::new),
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_raw_parts(
        grid: Grid,
        policy: SchedulerPolicy,
        k_seq: Vec<i64>,
        q_hulls: Vec<FreqInterval>,
        q_pieces: FreqIntervalSet,
        c: f64,
        i_seq: Vec<f64>,
        g_energy: Vec<f64>,
        f_int_seq: Vec<f64>,
        p_energy: Vec<f64>,
        d_seq: Vec<f64>,
        f0: SampledSignal,
        f: SampledSignal,
        g_history: Option<Vec<SampledSignal>>,
    ) -> Self {
        Self {
            grid,
            policy,
            k_seq,
            q_hulls,
            q_pieces,
            c,
            i_seq,
            g_energy,
            f_int_seq,
            p_energy,
            d_seq,
            f0,
            f,
            g_history,
        }
    }

    pub fn stages(&self) -> usize {
        self.k_seq.len()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn policy(&self) -> &SchedulerPolicy {
        &self.policy
    }

    pub fn k_seq(&self) -> &[i64] {
        &self.k_seq
    }

    pub fn q_hulls(&self) -> &[FreqInterval] {
        &self.q_hulls
    }

    pub fn q_pieces(&self) -> &FreqIntervalSet {
        &self.q_pieces
    }

    /// Reference mass `∫F_0`.
    pub fn mass(&self) -> f64 {
        self.c
    }

    pub fn i_seq(&self) -> &[f64] {
        &self.i_seq
    }

    pub fn g_energy(&self) -> &[f64] {
        &self.g_energy
    }

    pub fn f_int_seq(&self) -> &[f64] {
        &self.f_int_seq
    }

    pub fn p_energy(&self) -> &[f64] {
        &self.p_energy
    }

    pub fn d_seq(&self) -> &[f64] {
        &self.d_seq
    }

    pub fn f0(&self) -> &SampledSignal {
        &self.f0
    }

    /// The current (final) iterate's samples.
    pub fn f_final(&self) -> &SampledSignal {
        &self.f
    }

    /// Per-stage correction signals, if the run retained them.
    pub fn g_history(&self) -> Option<&[SampledSignal]> {
        self.g_history.as_deref()
    }

    pub(crate) fn f_int_seq_mut(&mut self) -> &mut [f64] {
        &mut self.f_int_seq
    }

    pub(crate) fn i_seq_mut(&mut self) -> &mut [f64] {
        &mut self.i_seq
    }

    pub(crate) fn p_energy_mut(&mut self) -> &mut [f64] {
        &mut self.p_energy
    }
}

/// Advance the construction by one stage under `policy`.
pub fn iterate(
    mut state: ConstructionState,
    policy: &SchedulerPolicy,
) -> Result<ConstructionState, ConstructionError> {
    let stage = state.k_seq.len() + 1;
    let prev_hull = *state.q_hulls.last().expect("hull history is never empty");
    let k = choose_k(stage, prev_hull.hi(), state.q_pieces.measure(), policy)?;
    let pieces = spectrum_pieces(prev_hull, k).map_err(|e| at_stage(e, stage))?;
    if !pieces.are_disjoint(&state.q_pieces) {
        return Err(ConstructionError::DisjointnessViolation { stage });
    }
    let new_hull = next_hull(prev_hull, k).map_err(|e| at_stage(e, stage))?;
    let required = new_hull.hi() as f64;
    let available = state.grid.nyquist();
    if required > available {
        return Err(ConstructionError::NyquistExceeded {
            stage,
            required,
            available,
        });
    }
    let (g, f_next) = modulation_step(&state.f, k as f64)?;
    let (min, max) = f_next.min_max();
    if min < -RANGE_SLACK || max > 1.0 + RANGE_SLACK {
        return Err(ConstructionError::RangeViolation { stage, min, max });
    }
    let p_next = f_next.pointwise_product(&f_next.one_minus())?;
    state.k_seq.push(k);
    state.q_hulls.push(new_hull);
    state.q_pieces = state.q_pieces.union(&pieces);
    state.g_energy.push(g.l2_norm_sq());
    state.i_seq.push(p_next.integral());
    state.f_int_seq.push(f_next.integral());
    state.p_energy.push(p_next.l2_norm_sq());
    state.d_seq.push(indicator_distance_sq(&f_next));
    if let Some(history) = state.g_history.as_mut() {
        history.push(g);
    }
    state.f = f_next;
    state.policy = policy.clone();
    Ok(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub iters: usize,
    /// Window half-width `T`; powers of two keep sample times exact.
    pub half_width: f64,
    /// Grid Nyquist target as a multiple of the final hull radius.
    pub oversample: f64,
    /// Refuse grids larger than this many samples.
    pub sample_cap: usize,
    /// Keep every stage's correction signal in memory (needed by the
    /// sample-level verifier checks).
    pub retain_g: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iters: 4,
            half_width: 128.0,
            oversample: 4.0,
            sample_cap: 1 << 24,
            retain_g: true,
        }
    }
}

/// Plan the schedule symbolically, size the grid once so its Nyquist
/// frequency covers `oversample ×` the final hull radius, then run every
/// stage.
pub fn run(
    config: &RunConfig,
    policy: &SchedulerPolicy,
) -> Result<ConstructionState, ConstructionError> {
    if !(config.oversample.is_finite() && config.oversample >= 2.0) {
        return Err(ConstructionError::BadOversample(config.oversample));
    }
    let plan = plan_schedule(config.iters, policy)?;
    let nu_max = config.oversample * plan.final_radius() as f64;
    let grid = Grid::with_nyquist(config.half_width, nu_max, config.sample_cap)?;
    let mut state = ConstructionState::initial(grid, policy, config.retain_g)?;
    for _ in 0..config.iters {
        state = iterate(state, policy)?;
    }
    debug_assert_eq!(state.k_seq, plan.k_seq);
    Ok(state)
}

/// Region where the signal exceeds `threshold`, as maximal sample runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    /// Half-open time intervals `[start, end)` covering the runs.
    pub intervals: Vec<(f64, f64)>,
    /// Total length, `Δ ×` number of samples above the threshold.
    pub measure: f64,
}

/// Estimate where `f > threshold`, reading each sample as owning one grid
/// cell of width `Δ`.
pub fn support_estimate(
    f: &SampledSignal,
    threshold: f64,
) -> Result<SupportEstimate, ConstructionError> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(ConstructionError::BadThreshold(threshold));
    }
    let grid = f.grid();
    let step = grid.step();
    let mut intervals = Vec::new();
    let mut count = 0usize;
    let mut run_start: Option<usize> = None;
    for (m, &v) in f.values().iter().enumerate() {
        if v > threshold {
            count += 1;
            if run_start.is_none() {
                run_start = Some(m);
            }
        } else if let Some(start) = run_start.take() {
            intervals.push((grid.time(start), grid.time(m)));
        }
    }
    if let Some(start) = run_start {
        intervals.push((grid.time(start), grid.time(grid.len() - 1) + step));
    }
    Ok(SupportEstimate {
        intervals,
        measure: step * count as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn seed_has_exact_peak_and_expected_mass() {
        let grid = Grid::new(128.0, 1 << 14).unwrap();
        let f0 = make_f0(grid).unwrap();
        // t = 0 is the sample at index M/2; the peak there is exactly 1/8π
        assert_eq!(f0.values()[grid.len() / 2], 1.0 / (8.0 * PI));
        assert!(f0.values().iter().all(|&v| v >= 0.0));
        // window truncation leaves 64/(3πT³) ≈ 3.2e-6 of the mass outside
        assert_relative_eq!(f0.integral(), 1.0 / 3.0, max_relative = 1e-5);
        assert!((f0.integral() - 0.333332058).abs() < 1e-8);
    }

    #[test]
    fn seed_spectrum_stays_inside_unit_interval() {
        let grid = Grid::new(128.0, 1 << 14).unwrap();
        let f0 = make_f0(grid).unwrap();
        let band = FreqIntervalSet::singleton(FreqInterval::symmetric(1).unwrap());
        let leak = f0.out_of_band_energy(&band, 4).unwrap();
        assert!(leak < 1e-8, "leak {leak}");
    }

    #[test]
    fn make_f0_requires_resolving_the_unit_band() {
        let grid = Grid::new(128.0, 64).unwrap(); // Nyquist ≈ 0.79
        assert!(matches!(
            make_f0(grid),
            Err(ConstructionError::NyquistExceeded { stage: 0, .. })
        ));
    }

    #[test]
    fn minimal_schedule_matches_hand_computation() {
        let plan = plan_schedule(4, &SchedulerPolicy::default()).unwrap();
        assert_eq!(plan.k_seq, vec![4, 19, 94, 469]);
        let radii: Vec<i64> = plan.hulls.iter().map(|h| h.hi()).collect();
        assert_eq!(radii, vec![1, 6, 31, 156, 781]);
        for h in &plan.hulls {
            assert_eq!(h.lo(), -h.hi());
        }
    }

    #[test]
    fn slow_density_schedule_matches_hand_computation() {
        let plan = plan_schedule(4, &SchedulerPolicy::slow_density()).unwrap();
        assert_eq!(plan.k_seq, vec![10, 212, 5982, 214504]);
        let radii: Vec<i64> = plan.hulls.iter().map(|h| h.hi()).collect();
        assert_eq!(radii, vec![1, 12, 236, 6454, 227412]);
        // accumulated measure: seed 2, then +8·r_prev per stage
        // = 2 + 8·(1 + 12 + 236 + 6454) = 53626
        assert_eq!(plan.q_pieces.measure(), 53626);
    }

    #[test]
    fn slow_density_ratio_bound_holds_at_checkpoints() {
        use crate::intervals::Rational;
        let plan = plan_schedule(4, &SchedulerPolicy::slow_density()).unwrap();
        let mut q = FreqIntervalSet::singleton(plan.hulls[0]);
        let mut stage_readings = Vec::new();
        for (n, pieces) in plan.pieces_by_stage.iter().enumerate() {
            q = q.union(pieces);
            let r = Rational::from_integer(plan.hulls[n + 1].hi() as i128);
            let h = q.density(r).unwrap();
            stage_readings.push(h);
            let bound = Rational::new(1, (n + 1) as i128);
            assert!(
                h / r <= bound,
                "stage {}: ratio {} exceeds 1/{}",
                n + 1,
                h / r,
                n + 1
            );
        }
        assert_eq!(
            stage_readings,
            vec![
                Rational::from_integer(10),
                Rational::from_integer(106),
                Rational::from_integer(1994),
                Rational::from_integer(53626),
            ]
        );
        // the final accumulated set gives the same checkpoint readings,
        // because later pieces always land beyond earlier radii
        for (n, hull) in plan.hulls.iter().enumerate().skip(1) {
            let r = Rational::from_integer(hull.hi() as i128);
            assert_eq!(plan.q_pieces.density(r).unwrap(), stage_readings[n - 1]);
        }
    }

    #[test]
    fn margin_shifts_the_minimal_frequency() {
        let policy = SchedulerPolicy {
            margin: 5,
            ..SchedulerPolicy::default()
        };
        let plan = plan_schedule(2, &policy).unwrap();
        assert_eq!(plan.k_seq[0], 8);
        assert_eq!(plan.hulls[1].hi(), 10);
        assert_eq!(plan.k_seq[1], 35);
    }

    #[test]
    fn policy_validation_rejects_bad_parameters() {
        let bad_margin = SchedulerPolicy {
            margin: 0,
            ..SchedulerPolicy::default()
        };
        assert!(matches!(
            plan_schedule(1, &bad_margin),
            Err(ConstructionError::BadMargin(0))
        ));
        let bad_growth = SchedulerPolicy {
            mode: SchedulerMode::SlowDensity,
            margin: 1,
            growth: GrowthIndex::Constant { value: 0 },
        };
        assert!(matches!(
            plan_schedule(1, &bad_growth),
            Err(ConstructionError::BadGrowth { .. })
        ));
    }

    #[test]
    fn oversized_schedules_overflow_cleanly() {
        let err = plan_schedule(80, &SchedulerPolicy::default()).unwrap_err();
        assert!(matches!(err, ConstructionError::Overflow { .. }), "{err}");
        let err = plan_schedule(40, &SchedulerPolicy::slow_density()).unwrap_err();
        assert!(matches!(err, ConstructionError::Overflow { .. }), "{err}");
    }

    #[test]
    fn iterate_rejects_grids_that_cannot_hold_the_next_stage() {
        // Nyquist ≈ 12.6 resolves stage 1 (radius 6) but not stage 2 (31)
        let grid = Grid::new(128.0, 1 << 10).unwrap();
        let policy = SchedulerPolicy::default();
        let state = ConstructionState::initial(grid, &policy, false).unwrap();
        let state = iterate(state, &policy).unwrap();
        assert_eq!(state.k_seq(), &[4]);
        let err = iterate(state, &policy).unwrap_err();
        assert!(matches!(
            err,
            ConstructionError::NyquistExceeded { stage: 2, .. }
        ));
    }

    #[test]
    fn modulation_step_fixes_both_indicator_levels() {
        let grid = Grid::new(16.0, 1 << 8).unwrap();
        for level in [0.0, 1.0] {
            let f = SampledSignal::from_fn(grid, |_| level).unwrap();
            let (g, f_next) = modulation_step(&f, 7.0).unwrap();
            assert!(g.values().iter().all(|&v| v == 0.0));
            assert_eq!(f_next.values(), f.values());
        }
    }

    #[test]
    fn modulation_step_preserves_unit_range() {
        let grid = Grid::new(16.0, 1 << 10).unwrap();
        // x + x(1-x)cos(θ) ∈ [0,1] for x ∈ [0,1] and any θ
        let f = SampledSignal::from_fn(grid, |t| 0.5 + 0.5 * (t * 0.3).sin()).unwrap();
        let (_, f_next) = modulation_step(&f, 11.0).unwrap();
        let (min, max) = f_next.min_max();
        assert!(min >= 0.0 && max <= 1.0, "range [{min}, {max}]");
    }

    #[test]
    fn default_run_reproduces_frozen_scalars() {
        let config = RunConfig {
            iters: 2,
            ..RunConfig::default()
        };
        let state = run(&config, &SchedulerPolicy::default()).unwrap();
        assert_eq!(state.k_seq(), &[4, 19]);
        // Nyquist must reach 4·31 = 124: M = 2^14 gives π/Δ ≈ 201
        assert_eq!(state.grid().len(), 1 << 14);
        assert!(state.grid().nyquist() >= 124.0);
        assert_relative_eq!(state.mass(), 1.0 / 3.0, max_relative = 1e-4);
        assert_eq!(state.i_seq().len(), 3);
        assert_eq!(state.g_energy().len(), 2);
        assert_eq!(state.f_int_seq().len(), 3);
        assert!(state.g_history().is_some_and(|h| h.len() == 2));
        // energy telescopes: I_{n-1} - I_n = ∫G_n²
        for n in 1..=2 {
            let drop = state.i_seq()[n - 1] - state.i_seq()[n];
            assert_relative_eq!(drop, state.g_energy()[n - 1], max_relative = 1e-6);
        }
    }

    #[test]
    fn support_estimate_reads_threshold_crossings() {
        let grid = Grid::new(16.0, 1 << 10).unwrap();
        let f = SampledSignal::from_fn(grid, |t| if t.abs() < 2.0 { 1.0 } else { 0.0 }).unwrap();
        let est = support_estimate(&f, 0.5).unwrap();
        assert_eq!(est.intervals.len(), 1);
        let (a, b) = est.intervals[0];
        assert!((a + 2.0).abs() <= grid.step());
        assert!((b - 2.0).abs() <= grid.step());
        assert_relative_eq!(est.measure, 4.0, epsilon = 2.0 * grid.step());
        // nothing exceeds a threshold above the peak
        let empty = support_estimate(&f, 1.5).unwrap();
        assert!(empty.intervals.is_empty());
        assert_eq!(empty.measure, 0.0);
        assert!(matches!(
            support_estimate(&f, 0.0),
            Err(ConstructionError::BadThreshold(_))
        ));
    }
}
