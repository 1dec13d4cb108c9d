//! Construction of finite-measure functions that behave like indicators on
//! most of the line while their Fourier spectra stay confined to sparse sets
//! of intervals.
//!
//! The crate is organized around four layers:
//!
//! - [`intervals`]: exact integer interval calculus — the spectral
//!   bookkeeping that certifies disjointness and sparsity with no floating
//!   point involved.
//! - [`signal`]: sampled signals on a symmetric window, quadrature, FFT-based
//!   spectra, and band-leakage measurement.
//! - [`construction`]: the iterative scheme itself — a bump seed plus
//!   cosine-modulated correction terms, with a frequency scheduler that keeps
//!   every stage's spectrum provably separated.
//! - [`verify`]: recomputes the identities each stage is supposed to satisfy
//!   (mass, energy telescoping, orthogonality, spectral containment, density)
//!   and reports per-check residuals against configured tolerances.
//!
//! File formats live in [`io`]: a JSON state document plus CSV sidecars for
//! samples and spectra.

pub mod construction;
pub mod intervals;
pub mod io;
pub mod signal;
pub mod verify;

pub use construction::{
    ConstructionError, ConstructionState, GrowthIndex, RunConfig, SchedulePlan, SchedulerMode,
    SchedulerPolicy,
};
pub use intervals::{FreqInterval, FreqIntervalSet, IntervalError, Rational};
pub use signal::{Grid, SampledSignal, SignalError, SpectrumEstimate};
pub use verify::{CheckRecord, Fault, ToleranceConfig, VerificationReport, VerifyError};
