//! Sampled signals on a symmetric window, with quadrature and FFT spectra.
//!
//! A [`Grid`] fixes the window `[-T, T]`, a power-of-two sample count `M`,
//! and the step `Δ = 2T/M`; samples live at `t_m = -T + mΔ`. With `T` a
//! power of two all sample times are exact binary floats, which keeps
//! independently recomputed signals bit-identical.
//!
//! The discrete transform here approximates the continuum integral
//! `∫ f(t) e^{-iξt} dt` on the frequency grid `ξ_j = jπ/T`,
//! `j ∈ [-M/2, M/2)`. For signals whose spectrum dies out well below the
//! Nyquist frequency `π/Δ`, trapezoid quadrature and this transform are
//! accurate to window truncation, not to `O(Δ²)` — that is what makes the
//! residual checks downstream meaningful at `1e-9` scales.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::intervals::FreqIntervalSet;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("sample count must be a power of two and at least 2, got {0}")]
    LenNotPowerOfTwo(usize),
    #[error("window half-width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("resolved-frequency target must be positive and finite, got {0}")]
    BadNyquistTarget(f64),
    #[error("grid would need {needed} samples, above the cap of {cap}")]
    GridCapExceeded { needed: u64, cap: usize },
    #[error("signals live on different grids")]
    GridMismatch,
    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },
    #[error("modulation frequency must be nonnegative and finite, got {0}")]
    BadModulationFrequency(f64),
    #[error("grid Nyquist {available} cannot resolve frequencies up to {required}")]
    NyquistTooLow { required: f64, available: f64 },
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("malformed CSV: {0}")]
    CsvFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform sampling grid on `[-T, T]` with `M` samples, `M` a power of two.
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    half_width: f64,
    step: f64,
    len: usize,
    /// Largest frequency the grid was built to resolve; at most `π/Δ`.
    nu_max: f64,
}

impl Grid {
    pub fn new(half_width: f64, len: usize) -> Result<Self, SignalError> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(SignalError::BadHalfWidth(half_width));
        }
        if len < 2 || !len.is_power_of_two() {
            return Err(SignalError::LenNotPowerOfTwo(len));
        }
        let step = 2.0 * half_width / len as f64;
        Ok(Self {
            half_width,
            step,
            len,
            nu_max: PI / step,
        })
    }

    /// Smallest power-of-two grid whose Nyquist frequency `π/Δ` reaches
    /// `nu_max`, refusing to exceed `cap` samples.
    pub fn with_nyquist(half_width: f64, nu_max: f64, cap: usize) -> Result<Self, SignalError> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(SignalError::BadHalfWidth(half_width));
        }
        if !(nu_max.is_finite() && nu_max > 0.0) {
            return Err(SignalError::BadNyquistTarget(nu_max));
        }
        // π/Δ >= nu_max  ⇔  M >= 2T·nu_max/π
        let needed = (2.0 * half_width * nu_max / PI).ceil().max(2.0) as u64;
        let len = needed.next_power_of_two();
        if len > cap as u64 {
            return Err(SignalError::GridCapExceeded { needed: len, cap });
        }
        let mut grid = Self::new(half_width, len as usize)?;
        grid.nu_max = nu_max;
        Ok(grid)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Highest frequency representable on the grid, `π/Δ`.
    pub fn nyquist(&self) -> f64 {
        PI / self.step
    }

    pub fn nu_max(&self) -> f64 {
        self.nu_max
    }

    /// Spacing of the discrete frequency grid, `π/T`.
    pub fn freq_step(&self) -> f64 {
        PI / self.half_width
    }

    pub fn time(&self, index: usize) -> f64 {
        -self.half_width + index as f64 * self.step
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|m| self.time(m))
    }
}

/// Two grids interoperate iff they share the same window and sample count.
impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.half_width == other.half_width && self.len == other.len
    }
}

#[derive(Serialize, Deserialize)]
struct GridDoc {
    #[serde(rename = "T")]
    t: f64,
    delta: f64,
    #[serde(rename = "M")]
    m: usize,
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GridDoc {
            t: self.half_width,
            delta: self.step,
            m: self.len,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = GridDoc::deserialize(deserializer)?;
        let grid = Grid::new(doc.t, doc.m).map_err(D::Error::custom)?;
        if !(doc.delta.is_finite() && (doc.delta - grid.step).abs() <= 1e-12 * grid.step) {
            return Err(D::Error::custom(format!(
                "grid step {} inconsistent with 2T/M = {}",
                doc.delta, grid.step
            )));
        }
        Ok(grid)
    }
}

/// Real-valued signal sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledSignal {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, SignalError> {
        if values.len() != grid.len() {
            return Err(SignalError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFiniteSample { index });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: FnMut(f64) -> f64>(grid: Grid, mut f: F) -> Result<Self, SignalError> {
        let values: Vec<f64> = grid.times().map(&mut f).collect();
        Self::from_values(grid, values)
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise transform. The result is not re-validated; callers that can
    /// produce non-finite values should check the output themselves.
    pub fn map<F: FnMut(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().copied().map(f).collect(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    fn check_same_grid(&self, other: &Self) -> Result<(), SignalError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(SignalError::GridMismatch)
        }
    }

    /// Trapezoid quadrature of the signal over the window.
    pub fn integral(&self) -> f64 {
        trapezoid(self.grid.step, self.values.iter().copied())
    }

    /// Trapezoid quadrature of `|f|`.
    pub fn l1_norm(&self) -> f64 {
        trapezoid(self.grid.step, self.values.iter().map(|v| v.abs()))
    }

    /// Trapezoid quadrature of the pointwise product `fg`.
    pub fn inner_product(&self, other: &Self) -> Result<f64, SignalError> {
        self.check_same_grid(other)?;
        Ok(trapezoid(
            self.grid.step,
            self.values.iter().zip(&other.values).map(|(&a, &b)| a * b),
        ))
    }

    /// Trapezoid quadrature of `f²`.
    pub fn l2_norm_sq(&self) -> f64 {
        trapezoid(self.grid.step, self.values.iter().map(|v| v * v))
    }

    pub fn add(&self, other: &Self) -> Result<Self, SignalError> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }

    pub fn pointwise_product(&self, other: &Self) -> Result<Self, SignalError> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a * b)
                .collect(),
        })
    }

    /// `1 - f`, pointwise.
    pub fn one_minus(&self) -> Self {
        self.map(|v| 1.0 - v)
    }

    /// `f(t)·cos(k t)` with `k >= 0`; `k = 0` leaves the signal unchanged.
    pub fn cosine_modulate(&self, k: f64) -> Result<Self, SignalError> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(SignalError::BadModulationFrequency(k));
        }
        let grid = self.grid;
        Ok(Self {
            grid,
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(m, &v)| v * (k * grid.time(m)).cos())
                .collect(),
        })
    }

    /// Discrete approximation of `∫ f(t) e^{-iξt} dt` on the frequency grid
    /// `ξ_j = jπ/T`, `j ∈ [-M/2, M/2)`, in ascending frequency order.
    pub fn dft_spectrum(&self) -> SpectrumEstimate {
        let m = self.grid.len;
        let half = m / 2;
        let mut buf: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        rustfft::FftPlanner::new()
            .plan_fft_forward(m)
            .process(&mut buf);
        let dxi = self.grid.freq_step();
        let step = self.grid.step;
        let mut freqs = Vec::with_capacity(m);
        let mut amps = Vec::with_capacity(m);
        for idx in 0..m {
            let j = idx as i64 - half as i64;
            // the (-1)^j factor is the e^{-iξ·(-T)} phase of the window start
            let sign = if j & 1 == 0 { step } else { -step };
            freqs.push(j as f64 * dxi);
            amps.push(buf[(idx + half) % m] * sign);
        }
        SpectrumEstimate {
            grid: self.grid,
            freqs,
            amps,
        }
    }

    /// Fraction of spectral energy outside `allowed`, with each allowed part
    /// widened by `guard_bins` frequency bins. Zero signal reports zero.
    pub fn out_of_band_energy(
        &self,
        allowed: &FreqIntervalSet,
        guard_bins: u32,
    ) -> Result<f64, SignalError> {
        if let Ok(hull) = allowed.hull() {
            let required = (hull.lo().unsigned_abs().max(hull.hi().unsigned_abs())) as f64;
            let available = self.grid.nyquist();
            if required > available {
                return Err(SignalError::NyquistTooLow {
                    required,
                    available,
                });
            }
        }
        let spectrum = self.dft_spectrum();
        let guard = guard_bins as f64 * self.grid.freq_step();
        // widened parts stay sorted; widening can make them overlap, so merge
        let mut bands: Vec<(f64, f64)> = Vec::with_capacity(allowed.parts().len());
        for part in allowed.parts() {
            let lo = part.lo() as f64 - guard;
            let hi = part.hi() as f64 + guard;
            match bands.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => bands.push((lo, hi)),
            }
        }
        let mut total = 0.0;
        let mut out = 0.0;
        let mut b = 0usize;
        for (idx, &xi) in spectrum.freqs.iter().enumerate() {
            let e = spectrum.amps[idx].norm_sqr();
            total += e;
            while b < bands.len() && xi > bands[b].1 {
                b += 1;
            }
            let in_band = b < bands.len() && xi >= bands[b].0;
            if !in_band {
                out += e;
            }
        }
        if total == 0.0 {
            return Ok(0.0);
        }
        Ok(out / total)
    }

    /// Write `t,value` rows with `sig_digits` significant digits
    /// (17 round-trips `f64` exactly).
    pub fn write_csv<W: Write>(&self, w: &mut W, sig_digits: usize) -> Result<(), SignalError> {
        let prec = sig_digits.clamp(1, 17) - 1;
        writeln!(w, "t,value")?;
        for (m, &v) in self.values.iter().enumerate() {
            writeln!(w, "{:.prec$e},{:.prec$e}", self.grid.time(m), v)?;
        }
        Ok(())
    }

    /// Read a `t,value` CSV produced by [`Self::write_csv`] back onto `grid`,
    /// checking the sample count and the time column.
    pub fn read_csv<R: BufRead>(grid: Grid, reader: R) -> Result<Self, SignalError> {
        let mut values = Vec::with_capacity(grid.len());
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| SignalError::CsvFormat("empty file".into()))??;
        if header.trim() != "t,value" {
            return Err(SignalError::CsvFormat(format!(
                "expected header 't,value', got '{header}'"
            )));
        }
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (t_str, v_str) = line.split_once(',').ok_or_else(|| {
                SignalError::CsvFormat(format!("row {}: expected 2 columns", row + 1))
            })?;
            let t: f64 = t_str
                .trim()
                .parse()
                .map_err(|e| SignalError::CsvFormat(format!("row {}: bad time: {e}", row + 1)))?;
            let v: f64 = v_str
                .trim()
                .parse()
                .map_err(|e| SignalError::CsvFormat(format!("row {}: bad value: {e}", row + 1)))?;
            let expected = grid.time(values.len());
            if (t - expected).abs() > 1e-9 * expected.abs().max(1.0) {
                return Err(SignalError::CsvFormat(format!(
                    "row {}: time {t} does not lie on the grid (expected {expected})",
                    row + 1
                )));
            }
            values.push(v);
        }
        Self::from_values(grid, values)
    }
}

/// Discrete spectrum on the frequency grid `ξ_j = jπ/T`, ascending.
#[derive(Debug, Clone)]
pub struct SpectrumEstimate {
    grid: Grid,
    freqs: Vec<f64>,
    amps: Vec<Complex64>,
}

impl SpectrumEstimate {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    /// Amplitude at the bin closest to frequency `xi`.
    pub fn amp_at(&self, xi: f64) -> Complex64 {
        let dxi = self.grid.freq_step();
        let half = (self.grid.len() / 2) as i64;
        let j = (xi / dxi).round() as i64;
        let idx = (j + half).clamp(0, self.grid.len() as i64 - 1) as usize;
        self.amps[idx]
    }

    /// Spectral energy `(1/2π)·Σ|amp|²·(π/T)`; Parseval partner of
    /// [`SampledSignal::l2_norm_sq`].
    pub fn energy(&self) -> f64 {
        let dxi = self.grid.freq_step();
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * dxi / (2.0 * PI)
    }

    /// Invert the transform back to samples. Together with
    /// [`SampledSignal::dft_spectrum`] this is exact up to rounding.
    pub fn inverse(&self) -> SampledSignal {
        let m = self.grid.len();
        let half = m / 2;
        let step = self.grid.step();
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for idx in 0..m {
            let j = idx as i64 - half as i64;
            let sign = if j & 1 == 0 { 1.0 } else { -1.0 };
            buf[(idx + half) % m] = self.amps[idx] * (sign / step);
        }
        rustfft::FftPlanner::new()
            .plan_fft_inverse(m)
            .process(&mut buf);
        let scale = 1.0 / m as f64;
        SampledSignal {
            grid: self.grid,
            values: buf.iter().map(|c| c.re * scale).collect(),
        }
    }

    /// Write `xi,re,im,abs` rows with `sig_digits` significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W, sig_digits: usize) -> Result<(), SignalError> {
        let prec = sig_digits.clamp(1, 17) - 1;
        writeln!(w, "xi,re,im,abs")?;
        for (idx, a) in self.amps.iter().enumerate() {
            writeln!(
                w,
                "{:.prec$e},{:.prec$e},{:.prec$e},{:.prec$e}",
                self.freqs[idx],
                a.re,
                a.im,
                a.norm()
            )?;
        }
        Ok(())
    }
}

fn trapezoid<I: Iterator<Item = f64>>(step: f64, values: I) -> f64 {
    let mut sum = 0.0;
    let mut first = None;
    let mut last = 0.0;
    for v in values {
        if first.is_none() {
            first = Some(v);
        }
        sum += v;
        last = v;
    }
    let first = first.unwrap_or(0.0);
    step * (sum - 0.5 * (first + last))
}
