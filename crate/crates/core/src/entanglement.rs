//! Reduced states, linear entropy and the time-series analysis built on it.

use std::f64::consts::PI;

use faer::{Mat, MatRef};
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::kicked_top::PairReducer;
use crate::spectral::{parse_field, Propagator};
use crate::{Error, Result, C64};

/// Reduced state of `|a⟩⟨b|` on a `d₁ ⊗ d₂` space (index `i₁·d₂ + i₂`),
/// keeping subsystem `keep` (0 or 1).
pub fn partial_trace_outer(a: &[C64], b: &[C64], dims: (usize, usize), keep: usize) -> Result<Mat<C64>> {
    let (d1, d2) = dims;
    for v in [a, b] {
        if v.len() != d1 * d2 {
            return Err(Error::DimensionMismatch { expected: d1 * d2, found: v.len() });
        }
    }
    match keep {
        0 => Ok(Mat::from_fn(d1, d1, |r, c| {
            let (ra, cb) = (&a[r * d2..(r + 1) * d2], &b[c * d2..(c + 1) * d2]);
            ra.iter().zip(cb).map(|(x, y)| x * y.conj()).sum()
        })),
        1 => {
            let mut out = Mat::<C64>::zeros(d2, d2);
            for k in 0..d1 {
                let (ra, cb) = (&a[k * d2..(k + 1) * d2], &b[k * d2..(k + 1) * d2]);
                for c in 0..d2 {
                    let y = cb[c].conj();
                    for r in 0..d2 {
                        out[(r, c)] += ra[r] * y;
                    }
                }
            }
            Ok(out)
        }
        _ => Err(Error::param("keep", format!("subsystem index must be 0 or 1, got {keep}"))),
    }
}

/// Reduced density matrix of a pure state.
pub fn partial_trace(state: &[C64], dims: (usize, usize), keep: usize) -> Result<Mat<C64>> {
    partial_trace_outer(state, state, dims, keep)
}

/// Reduced density matrix of a density matrix.
pub fn partial_trace_density(rho: MatRef<'_, C64>, dims: (usize, usize), keep: usize) -> Result<Mat<C64>> {
    let (d1, d2) = dims;
    let n = d1 * d2;
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho.nrows() });
    }
    match keep {
        0 => Ok(Mat::from_fn(d1, d1, |r, c| (0..d2).map(|k| rho[(r * d2 + k, c * d2 + k)]).sum())),
        1 => Ok(Mat::from_fn(d2, d2, |r, c| (0..d1).map(|k| rho[(k * d2 + r, k * d2 + c)]).sum())),
        _ => Err(Error::param("keep", format!("subsystem index must be 0 or 1, got {keep}"))),
    }
}

/// `Tr ρ²` for a Hermitian `ρ`.
pub fn purity(rho: MatRef<'_, C64>) -> Result<f64> {
    if rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch { expected: rho.nrows(), found: rho.ncols() });
    }
    let mut acc = 0.0;
    for c in 0..rho.ncols() {
        for r in 0..rho.nrows() {
            acc += rho[(r, c)].norm_sqr();
        }
    }
    Ok(acc)
}

/// `S = 1 − Tr ρ²`, clamped to `[0, 1 − 1/d]`.
pub fn linear_entropy(rho: MatRef<'_, C64>) -> Result<f64> {
    let d = rho.nrows() as f64;
    let s = 1.0 - purity(rho)?;
    let max = 1.0 - 1.0 / d;
    if s < -1e-9 || s > max + 1e-9 {
        log::warn!("linear entropy {s:.3e} outside [0, {max:.6}] by more than 1e-9; clamping");
    }
    Ok(s.clamp(0.0, max))
}

/// Which reduced state the entropy is taken of.
#[derive(Debug, Clone)]
pub enum Bipartition {
    /// Tensor product `d₁ ⊗ d₂`; keep subsystem 0 or 1.
    Tensor { dims: (usize, usize), keep: usize },
    /// Two qubits out of the symmetric `N`-qubit register.
    QubitPair(PairReducer),
}

impl Bipartition {
    pub fn reduce(&self, state: &[C64]) -> Result<Mat<C64>> {
        match self {
            Bipartition::Tensor { dims, keep } => partial_trace(state, *dims, *keep),
            Bipartition::QubitPair(reducer) => reducer.reduce(state),
        }
    }

    /// Dimensions of the two parts.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Bipartition::Tensor { dims, .. } => *dims,
            Bipartition::QubitPair(reducer) => (4, 1usize << (reducer.n_qubits() - 2).min(63)),
        }
    }

    /// `1 − 1/d` for the smaller side.
    pub fn max_entropy(&self) -> f64 {
        let (a, b) = self.dims();
        1.0 - 1.0 / a.min(b) as f64
    }

    pub fn entropy(&self, state: &[C64]) -> Result<f64> {
        linear_entropy(self.reduce(state)?.as_ref())
    }
}

/// Descriptive fields carried with a series into its CSV header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesMetadata {
    pub time_units: String,
    pub model: String,
    pub initial_state: String,
    pub dims: (usize, usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntropySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub metadata: SeriesMetadata,
}

/// Time unit label for the lattice model.
pub const TIME_UNITS_RECOIL: &str = "E_R*t/hbar";
/// Time unit label for kicked systems.
pub const TIME_UNITS_KICKS: &str = "kicks";

impl EntropySeries {
    pub fn to_csv(&self) -> String {
        let m = &self.metadata;
        let mut out = format!("# time_units={}\n", m.time_units);
        if !m.model.is_empty() {
            out.push_str(&format!("# model={}\n", m.model));
        }
        if !m.initial_state.is_empty() {
            out.push_str(&format!("# initial_state={}\n", m.initial_state));
        }
        out.push_str(&format!("# dims={}x{}\n", m.dims.0, m.dims.1));
        out.push_str("time,entropy\n");
        for (t, s) in self.times.iter().zip(&self.values) {
            out.push_str(&format!("{t:.12e},{s:.12e}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut series = EntropySeries::default();
        let mut header_seen = false;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.trim().split_once('=') {
                    let value = value.trim().to_string();
                    match key.trim() {
                        "time_units" => series.metadata.time_units = value,
                        "model" => series.metadata.model = value,
                        "initial_state" => series.metadata.initial_state = value,
                        "dims" => {
                            let (a, b) = value.split_once('x').ok_or_else(|| Error::param("dims", value.clone()))?;
                            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::param("dims", value.clone()));
                            series.metadata.dims = (parse(a)?, parse(b)?);
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !header_seen {
                if line != "time,entropy" {
                    return Err(Error::param("header", format!("expected `time,entropy`, got `{line}`")));
                }
                header_seen = true;
                continue;
            }
            let (t, s) = line.split_once(',').ok_or_else(|| Error::param("row", format!("malformed row `{line}`")))?;
            series.times.push(parse_field(t)?);
            series.values.push(parse_field(s)?);
        }
        if series.metadata.time_units.is_empty() {
            return Err(Error::param("time_units", "missing unit header comment"));
        }
        Ok(series)
    }
}

const SERIES_CHUNK: usize = 64;

/// `S(tᵢ)` at every requested time. Chunks of times are propagated in
/// parallel; each value depends only on its own time, so results are
/// independent of the thread count.
pub fn entropy_series(
    propagator: &dyn Propagator,
    times: &[f64],
    bipartition: &Bipartition,
    metadata: SeriesMetadata,
) -> Result<EntropySeries> {
    let (a, b) = bipartition.dims();
    if let Bipartition::Tensor { .. } = bipartition {
        if a * b != propagator.dim() {
            return Err(Error::DimensionMismatch { expected: propagator.dim(), found: a * b });
        }
    }
    let chunks: Vec<Result<Vec<f64>>> = times
        .par_chunks(SERIES_CHUNK)
        .map(|chunk| {
            propagator.propagate_batch(chunk)?.iter().map(|psi| bipartition.entropy(psi)).collect::<Result<Vec<f64>>>()
        })
        .collect();
    let mut values = Vec::with_capacity(times.len());
    for c in chunks {
        values.extend(c?);
    }
    Ok(EntropySeries { times: times.to_vec(), values, metadata })
}

/// Normalized autocorrelation `r(k)` of the mean-subtracted signal, `r(0) = 1`.
pub fn autocorrelation(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let r0: f64 = x.iter().map(|v| v * v).sum();
    (0..n)
        .map(|k| if r0 == 0.0 { 0.0 } else { x[..n - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / r0 })
        .collect()
}

/// Highest local maximum of an autocorrelation after its first local minimum.
pub fn secondary_peak(ac: &[f64]) -> Option<(usize, f64)> {
    let first_min = (1..ac.len().saturating_sub(1)).find(|&k| ac[k] <= ac[k - 1] && ac[k] < ac[k + 1])?;
    (first_min + 1..ac.len() - 1)
        .filter(|&k| ac[k] >= ac[k - 1] && ac[k] > ac[k + 1])
        .map(|k| (k, ac[k]))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    None,
    #[default]
    Hann,
}

impl Window {
    pub fn name(&self) -> &'static str {
        match self {
            Window::None => "none",
            Window::Hann => "hann",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "none" => Ok(Window::None),
            "hann" => Ok(Window::Hann),
            other => Err(Error::param("window", format!("unknown window `{other}` (hann, none)"))),
        }
    }
}

/// One-sided magnitude spectrum on an angular-frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    /// Angular frequencies `2πk / (N_pad Δt)`.
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub window: Window,
    pub zero_pad: usize,
    /// `|Σ|x_w|² − Σ|X|²/N_pad|` relative to `Σ|x_w|²`.
    pub parseval_residual: f64,
    pub frequency_units: String,
}

impl PowerSpectrum {
    pub fn to_csv(&self) -> String {
        let mut out = format!("# frequency_units={}\n", self.frequency_units);
        out.push_str(&format!("# window={}\n# zero_pad={}\n", self.window.name(), self.zero_pad));
        out.push_str("frequency,magnitude\n");
        for (f, m) in self.frequencies.iter().zip(&self.magnitudes) {
            out.push_str(&format!("{f:.12e},{m:.12e}\n"));
        }
        out
    }

    /// Reads [`PowerSpectrum::to_csv`] output. The Parseval residual is not
    /// stored and reads back as zero.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut spec = PowerSpectrum {
            frequencies: Vec::new(),
            magnitudes: Vec::new(),
            window: Window::Hann,
            zero_pad: 1,
            parseval_residual: 0.0,
            frequency_units: String::new(),
        };
        let mut header_seen = false;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.trim().split_once('=') {
                    let value = value.trim();
                    match key.trim() {
                        "frequency_units" => spec.frequency_units = value.to_string(),
                        "window" => spec.window = Window::from_name(value)?,
                        "zero_pad" => spec.zero_pad = value.parse().map_err(|_| Error::param("zero_pad", value.to_string()))?,
                        _ => {}
                    }
                }
                continue;
            }
            if !header_seen {
                if line != "frequency,magnitude" {
                    return Err(Error::param("header", format!("expected `frequency,magnitude`, got `{line}`")));
                }
                header_seen = true;
                continue;
            }
            let (f, m) = line.split_once(',').ok_or_else(|| Error::param("row", format!("malformed row `{line}`")))?;
            spec.frequencies.push(parse_field(f)?);
            spec.magnitudes.push(parse_field(m)?);
        }
        if spec.frequency_units.is_empty() {
            return Err(Error::param("frequency_units", "missing unit header comment"));
        }
        Ok(spec)
    }

    /// Bin with the largest magnitude, excluding the zero-frequency bin.
    pub fn peak(&self) -> Option<(f64, f64)> {
        (1..self.magnitudes.len()).map(|k| (self.frequencies[k], self.magnitudes[k])).max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Angular frequency spacing between bins.
    pub fn resolution(&self) -> f64 {
        if self.frequencies.len() > 1 {
            self.frequencies[1] - self.frequencies[0]
        } else {
            0.0
        }
    }
}

/// Frequency unit label matching a time unit label.
pub fn frequency_units_for(time_units: &str) -> String {
    match time_units {
        TIME_UNITS_RECOIL => "E_R/hbar (angular)".to_string(),
        TIME_UNITS_KICKS => "rad/kick".to_string(),
        other => format!("rad per {other}"),
    }
}

/// Magnitude spectrum of the mean-subtracted, optionally windowed, zero-padded signal.
pub fn power_spectrum(series: &EntropySeries, window: Window, zero_pad: usize) -> Result<PowerSpectrum> {
    let n = series.values.len();
    if n < 2 || series.times.len() != n {
        return Err(Error::param("series", "need at least two uniformly spaced samples"));
    }
    let dt = (series.times[n - 1] - series.times[0]) / (n - 1) as f64;
    if !(dt > 0.0) || series.times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::NonUniformSampling);
    }
    let pad = zero_pad.max(1);
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let n_pad = n * pad;
    let mut buf = vec![C64::new(0.0, 0.0); n_pad];
    for (k, v) in series.values.iter().enumerate() {
        let w = match window {
            Window::None => 1.0,
            Window::Hann => 0.5 * (1.0 - (2.0 * PI * k as f64 / (n - 1) as f64).cos()),
        };
        buf[k] = C64::new((v - mean) * w, 0.0);
    }
    let energy: f64 = buf.iter().map(|z| z.norm_sqr()).sum();
    FftPlanner::new().plan_fft_forward(n_pad).process(&mut buf);
    let spectral_energy: f64 = buf.iter().map(|z| z.norm_sqr()).sum::<f64>() / n_pad as f64;
    let parseval_residual = if energy > 0.0 { (energy - spectral_energy).abs() / energy } else { spectral_energy };
    let half = n_pad / 2 + 1;
    Ok(PowerSpectrum {
        frequencies: (0..half).map(|k| 2.0 * PI * k as f64 / (n_pad as f64 * dt)).collect(),
        magnitudes: buf[..half].iter().map(|z| z.norm()).collect(),
        window,
        zero_pad: pad,
        parseval_residual,
        frequency_units: frequency_units_for(&series.metadata.time_units),
    })
}

/// Geometric over arithmetic mean of the magnitudes, excluding the zero bin.
/// Zero magnitudes are floored at the smallest positive double.
pub fn spectral_flatness(spectrum: &PowerSpectrum) -> Result<f64> {
    let mags = spectrum.magnitudes.get(1..).unwrap_or(&[]);
    if mags.is_empty() {
        return Err(Error::param("spectrum", "needs at least one non-zero-frequency bin"));
    }
    let n = mags.len() as f64;
    let am = mags.iter().sum::<f64>() / n;
    if am == 0.0 {
        return Ok(0.0);
    }
    let log_gm = mags.iter().map(|m| m.max(f64::MIN_POSITIVE).ln()).sum::<f64>() / n;
    Ok((log_gm.exp() / am).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiseModel {
    /// `S = (t/t₀)²`.
    Quadratic,
    /// `S = A e^{γt}`.
    Exponential,
}

impl RiseModel {
    pub fn name(&self) -> &'static str {
        match self {
            RiseModel::Quadratic => "quadratic",
            RiseModel::Exponential => "exponential",
        }
    }

    fn n_params(&self) -> usize {
        match self {
            RiseModel::Quadratic => 1,
            RiseModel::Exponential => 2,
        }
    }
}

/// Least-squares fit of one rise model on `ln S`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiseFit {
    pub model: RiseModel,
    /// `[("t0", ·)]` or `[("rate", ·), ("prefactor", ·)]`.
    pub params: Vec<(&'static str, f64)>,
    /// Root-mean-square residual of `ln S`.
    pub residual: f64,
    /// Akaike information criterion on the log residuals.
    pub aic: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

impl RiseFit {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.0 == name).map(|p| p.1)
    }
}

/// Both fits on the same window and the model with the lower AIC.
#[derive(Debug, Clone, PartialEq)]
pub struct RiseComparison {
    pub quadratic: RiseFit,
    pub exponential: RiseFit,
    pub preferred: RiseModel,
}

impl RiseComparison {
    pub fn preferred_fit(&self) -> &RiseFit {
        match self.preferred {
            RiseModel::Quadratic => &self.quadratic,
            RiseModel::Exponential => &self.exponential,
        }
    }
}

/// Default fit window: from the start of the series until `S` first reaches
/// `fraction` of its first local maximum.
pub fn default_rise_window(series: &EntropySeries, fraction: f64) -> Option<(f64, f64)> {
    let v = &series.values;
    let first_max = (1..v.len().saturating_sub(1)).find(|&k| v[k] >= v[k - 1] && v[k] > v[k + 1]).map(|k| v[k])?;
    let target = fraction * first_max;
    let end = v.iter().position(|&s| s >= target)?;
    Some((series.times[0], series.times[end]))
}

fn window_points(series: &EntropySeries, window: (f64, f64)) -> Vec<(f64, f64)> {
    series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(t, s)| **t > 0.0 && **t >= window.0 && **t <= window.1 && **s > 0.0)
        .map(|(t, s)| (*t, *s))
        .collect()
}

pub fn fit_initial_rise(series: &EntropySeries, model: RiseModel, window: (f64, f64)) -> Result<RiseFit> {
    let pts = window_points(series, window);
    let n = pts.len();
    if n < 5 {
        return Err(Error::DegenerateWindow { points: n });
    }
    let (params, residuals): (Vec<(&'static str, f64)>, Vec<f64>) = match model {
        RiseModel::Quadratic => {
            // ln S = 2 ln t − 2 ln t₀.
            let ln_t0 = pts.iter().map(|(t, s)| t.ln() - 0.5 * s.ln()).sum::<f64>() / n as f64;
            let res = pts.iter().map(|(t, s)| s.ln() - 2.0 * (t.ln() - ln_t0)).collect();
            (vec![("t0", ln_t0.exp())], res)
        }
        RiseModel::Exponential => {
            // ln S = ln A + γ t.
            let mt = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
            let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n as f64;
            let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1.ln() - my)).sum();
            if sxx == 0.0 {
                return Err(Error::DegenerateWindow { points: n });
            }
            let rate = sxy / sxx;
            let intercept = my - rate * mt;
            let res = pts.iter().map(|(t, s)| s.ln() - (intercept + rate * t)).collect();
            (vec![("rate", rate), ("prefactor", intercept.exp())], res)
        }
    };
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let k = model.n_params() as f64;
    let aic = n as f64 * (rss / n as f64).max(1e-300).ln() + 2.0 * k;
    Ok(RiseFit {
        model,
        params,
        residual: (rss / n as f64).sqrt(),
        aic,
        window: (pts[0].0, pts[n - 1].0),
        n_points: n,
    })
}

pub fn compare_rise_models(series: &EntropySeries, window: (f64, f64)) -> Result<RiseComparison> {
    let quadratic = fit_initial_rise(series, RiseModel::Quadratic, window)?;
    let exponential = fit_initial_rise(series, RiseModel::Exponential, window)?;
    let preferred = if quadratic.aic <= exponential.aic { RiseModel::Quadratic } else { RiseModel::Exponential };
    Ok(RiseComparison { quadratic, exponential, preferred })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn series(times: Vec<f64>, values: Vec<f64>) -> EntropySeries {
        EntropySeries {
            times,
            values,
            metadata: SeriesMetadata { time_units: TIME_UNITS_RECOIL.into(), ..Default::default() },
        }
    }

    #[test]
    fn bell_state_is_half_entangled() {
        let s = 1.0 / 2f64.sqrt();
        let bell = [c(s), c(0.0), c(0.0), c(s)];
        let rho = partial_trace(&bell, (2, 2), 0).unwrap();
        assert!((rho[(0, 0)].re - 0.5).abs() < 1e-15 && rho[(0, 1)].norm() < 1e-15);
        assert!((linear_entropy(rho.as_ref()).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_state_has_zero_entropy() {
        let a = [c(0.6), C64::new(0.0, 0.8)];
        let b = [c(0.5), c(0.5), C64::new(0.5, 0.5)];
        let prod: Vec<C64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
        for keep in 0..2 {
            assert!(linear_entropy(partial_trace(&prod, (2, 3), keep).unwrap().as_ref()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn closed_form_entropies() {
        let mixed = Mat::from_fn(9, 9, |r, k| if r == k { c(1.0 / 9.0) } else { c(0.0) });
        assert!((linear_entropy(mixed.as_ref()).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        let rank2 = Mat::from_fn(3, 3, |r, k| if r == k && r < 2 { c(0.5) } else { c(0.0) });
        assert!((linear_entropy(rank2.as_ref()).unwrap() - 0.5).abs() < 1e-15);
        assert!(linear_entropy(Mat::<C64>::zeros(2, 3).as_ref()).is_err());
    }

    #[test]
    fn density_and_pure_partial_traces_agree() {
        let psi: Vec<C64> = (0..6).map(|k| C64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let mut psi = psi;
        linalg::normalize(&mut psi);
        let rho = Mat::from_fn(6, 6, |r, k| psi[r] * psi[k].conj());
        for keep in 0..2 {
            let a = partial_trace(&psi, (2, 3), keep).unwrap();
            let b = partial_trace_density(rho.as_ref(), (2, 3), keep).unwrap();
            assert!(linalg::max_abs((&a - &b).as_ref()) < 1e-15);
        }
        assert!(partial_trace(&psi, (2, 2), 0).is_err());
        assert!(partial_trace(&psi, (2, 3), 2).is_err());
    }

    #[test]
    fn power_spectrum_csv_round_trips() {
        let times: Vec<f64> = (0..64).map(|k| k as f64 * 0.1).collect();
        let values = times.iter().map(|t| 0.3 + 0.1 * (2.0 * t).cos()).collect();
        let mut spec = power_spectrum(&series(times, values), Window::Hann, 4).unwrap();
        spec.parseval_residual = 0.0;
        let back = PowerSpectrum::from_csv(&spec.to_csv()).unwrap();
        assert_eq!(back.window, Window::Hann);
        assert_eq!(back.zero_pad, 4);
        assert_eq!(back.frequency_units, spec.frequency_units);
        assert_eq!(back.frequencies.len(), spec.frequencies.len());
        for (a, b) in back.magnitudes.iter().zip(&spec.magnitudes) {
            assert!((a - b).abs() <= 1e-11 * b.abs().max(1e-300));
        }
        assert!(PowerSpectrum::from_csv("frequency,magnitude\n0,1\n").is_err());
        assert!(PowerSpectrum::from_csv("# frequency_units=x\nfreq,mag\n").is_err());
    }

    #[test]
    fn pure_tone_has_one_dominant_bin() {
        let n = 256;
        let dt = 0.05;
        let k0 = 20.0;
        let w0 = 2.0 * PI * k0 / (n as f64 * dt);
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let values = times.iter().map(|t| 0.1 * (w0 * t).sin()).collect();
        let spec = power_spectrum(&series(times, values), Window::None, 1).unwrap();
        let (f, m) = spec.peak().unwrap();
        assert!((f - w0).abs() < 1e-12);
        let second = spec.magnitudes.iter().copied().filter(|&x| x < m).fold(0.0, f64::max);
        assert!(m >= 10.0 * second);
        assert!(spec.parseval_residual < 1e-8);
        assert!(spectral_flatness(&spec).unwrap() < 0.1);
    }

    #[test]
    fn two_tones_have_no_sum_frequency_peak() {
        let n = 512;
        let dt = 0.1;
        let bin = 2.0 * PI / (n as f64 * dt);
        let (w1, w2) = (30.0 * bin, 47.0 * bin);
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let values = times.iter().map(|t| (w1 * t).cos() + 0.5 * (w2 * t).sin()).collect();
        let spec = power_spectrum(&series(times, values), Window::Hann, 4).unwrap();
        let at = |w: f64| {
            let k = (w / spec.resolution()).round() as usize;
            spec.magnitudes[k]
        };
        assert!(at(w1) > 100.0 * at(w1 + w2));
        assert!(at(w2) > 100.0 * at(w1 + w2));
        assert!(spec.parseval_residual < 1e-8);
    }

    #[test]
    fn constant_series_has_zero_spectrum() {
        let times: Vec<f64> = (0..64).map(|k| k as f64).collect();
        let spec = power_spectrum(&series(times, vec![0.3; 64]), Window::Hann, 4).unwrap();
        assert!(spec.magnitudes.iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn white_noise_is_flat() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let times: Vec<f64> = (0..4096).map(|k| k as f64).collect();
        let values = (0..4096).map(|_| rng.gen::<f64>()).collect();
        let spec = power_spectrum(&series(times, values), Window::None, 1).unwrap();
        assert!(spectral_flatness(&spec).unwrap() > 0.5);
    }

    #[test]
    fn non_uniform_sampling_rejected() {
        let s = series(vec![0.0, 1.0, 2.5, 3.0], vec![0.0, 0.1, 0.2, 0.3]);
        assert!(matches!(power_spectrum(&s, Window::None, 1), Err(Error::NonUniformSampling)));
    }

    #[test]
    fn quadratic_rise_recovered_exactly() {
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 1e-4).collect();
        let values = times.iter().map(|t| (t / 0.01).powi(2)).collect();
        let s = series(times, values);
        let cmp = compare_rise_models(&s, (0.0, 0.01)).unwrap();
        assert!((cmp.quadratic.param("t0").unwrap() - 0.01).abs() < 1e-6 * 0.01);
        assert_eq!(cmp.preferred, RiseModel::Quadratic);
    }

    #[test]
    fn exponential_rise_preferred_for_exponential_data() {
        let times: Vec<f64> = (0..40).map(|k| k as f64).collect();
        let values = times.iter().map(|t| 1e-4 * (0.3 * t).exp()).collect();
        let cmp = compare_rise_models(&series(times, values), (1.0, 30.0)).unwrap();
        assert_eq!(cmp.preferred, RiseModel::Exponential);
        assert!((cmp.exponential.param("rate").unwrap() - 0.3).abs() < 1e-10);
        assert!((cmp.exponential.param("prefactor").unwrap() - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn short_window_is_degenerate() {
        let s = series(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.1, 0.2, 0.3]);
        assert!(matches!(fit_initial_rise(&s, RiseModel::Quadratic, (0.0, 3.0)), Err(Error::DegenerateWindow { points: 3 })));
    }

    #[test]
    fn default_window_stops_at_fraction_of_first_maximum() {
        let times: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| (t * 0.5).sin().powi(2)).collect();
        let (a, b) = default_rise_window(&series(times, values), 0.2).unwrap();
        assert_eq!(a, 0.0);
        // sin²(t/2) = 0.2 at t = 2 asin(√0.2) ≈ 0.927.
        assert!((b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn autocorrelation_of_periodic_signal() {
        let values: Vec<f64> = (0..400).map(|k| (k as f64 * 2.0 * PI / 50.0).cos()).collect();
        let ac = autocorrelation(&values);
        assert!((ac[0] - 1.0).abs() < 1e-12);
        let (lag, peak) = secondary_peak(&ac).unwrap();
        assert_eq!(lag, 50);
        assert!(peak > 0.8);
    }

    #[test]
    fn csv_round_trip() {
        let mut s = series(vec![0.0, 0.5], vec![0.0, 0.125]);
        s.metadata.model = "amol".into();
        s.metadata.dims = (256, 9);
        let text = s.to_csv();
        assert!(text.starts_with("# time_units=E_R*t/hbar\n"));
        assert_eq!(EntropySeries::from_csv(&text).unwrap(), s);
        assert!(EntropySeries::from_csv("time,entropy\n0,0\n").is_err());
        assert!(EntropySeries::from_csv("# time_units=kicks\nt,s\n").is_err());
    }

    fn random_state(seed: &[f64]) -> Vec<C64> {
        let mut v: Vec<C64> = seed.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
        if linalg::norm(&v) == 0.0 {
            v[0] = c(1.0);
        }
        linalg::normalize(&mut v);
        v
    }

    fn random_unitary(seed: &[f64], d: usize) -> Mat<C64> {
        let h = Mat::from_fn(d, d, |r, k| {
            let (a, b) = (seed[(r * d + k) % seed.len()], seed[(k * d + r) % seed.len()]);
            if r == k {
                c(a)
            } else if r < k {
                C64::new(a, b)
            } else {
                C64::new(seed[(k * d + r) % seed.len()], -seed[(r * d + k) % seed.len()])
            }
        });
        linalg::expm_hermitian(h.as_ref(), 1.0).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn schmidt_symmetry_and_bounds(seed in prop::collection::vec(-1.0f64..1.0, 288)) {
            let psi = random_state(&seed);
            let p1 = purity(partial_trace(&psi, (9, 16), 0).unwrap().as_ref()).unwrap();
            let p2 = purity(partial_trace(&psi, (9, 16), 1).unwrap().as_ref()).unwrap();
            prop_assert!((p1 - p2).abs() < 1e-12);
            let s = linear_entropy(partial_trace(&psi, (9, 16), 0).unwrap().as_ref()).unwrap();
            prop_assert!((0.0..=1.0 - 1.0 / 9.0 + 1e-9).contains(&s));
        }

        #[test]
        fn reduced_state_is_a_density_matrix(seed in prop::collection::vec(-1.0f64..1.0, 24)) {
            let psi = random_state(&seed);
            for keep in 0..2 {
                let rho = partial_trace(&psi, (3, 4), keep).unwrap();
                prop_assert!(linalg::hermiticity_residual(rho.as_ref()) < 1e-14);
                let trace: f64 = (0..rho.nrows()).map(|i| rho[(i, i)].re).sum();
                prop_assert!((trace - 1.0).abs() < 1e-10);
                let ev = linalg::hermitian_eigenvalues(rho.as_ref()).unwrap();
                prop_assert!(ev.iter().all(|&e| e > -1e-10));
            }
        }

        #[test]
        fn local_unitaries_leave_entropy_unchanged(
            seed in prop::collection::vec(-1.0f64..1.0, 24),
            u_seed in prop::collection::vec(-1.0f64..1.0, 16),
        ) {
            let psi = random_state(&seed);
            let (u1, u2) = (random_unitary(&u_seed, 3), random_unitary(&u_seed[3..], 4));
            let u = linalg::kron(u1.as_ref(), u2.as_ref());
            let phi = linalg::mat_vec(u.as_ref(), &psi);
            let before = linear_entropy(partial_trace(&psi, (3, 4), 0).unwrap().as_ref()).unwrap();
            let after = linear_entropy(partial_trace(&phi, (3, 4), 0).unwrap().as_ref()).unwrap();
            prop_assert!((before - after).abs() < 1e-12);
        }
    }
}
