//! Frequency distributions and the decoherence functions they induce.
//!
//! A decoherence function is the Fourier transform of a frequency
//! distribution, `κ(t) = ∫ P(ω) e^{-iΔn ω t} dω`. Gaussian and Lorentzian
//! families have closed forms (with analytic derivatives); tabulated
//! distributions are summed over their sample nodes; amplitude spectra with a
//! frequency-dependent phase go through adaptive Gauss–Kronrod quadrature.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadOptions};

/// Half-width of the truncated Gaussian support, in standard deviations.
pub const GAUSSIAN_SUPPORT: f64 = 8.0;

/// Parameters shared by the single- and double-peak bivariate Gaussians.
///
/// `omega0` is the sum of the local means, `delta_omega` their difference,
/// `sigma` the common marginal standard deviation and `k` the correlation
/// coefficient of each peak.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPairParams {
    pub omega0: f64,
    pub delta_omega: f64,
    pub sigma: f64,
    pub k: f64,
}

impl GaussianPairParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(-1.0..=1.0).contains(&self.k) {
            return Err(Error::InvalidSpec(format!("correlation K must lie in [-1, 1], got {}", self.k)));
        }
        if !self.omega0.is_finite() || !self.delta_omega.is_finite() {
            return Err(Error::InvalidSpec("peak positions must be finite".into()));
        }
        Ok(())
    }
}

fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = 0.5 * (x[i + 1] - x[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

fn check_grid(x: &[f64], name: &str) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::InvalidSpec(format!("{name} grid needs at least two nodes")));
    }
    if !x.windows(2).all(|w| w[0] < w[1]) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec(format!("{name} grid must be finite and strictly increasing")));
    }
    Ok(())
}

fn check_density(p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidSpec("tabulated probabilities must be finite and non-negative".into()));
    }
    Ok(())
}

fn read_rows<R: Read>(reader: R, columns: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != columns {
            return Err(Error::InvalidSpec(format!("row {} has {} columns, expected {columns}", i + 1, rec.len())));
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            // a header line
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::InvalidSpec(format!("row {}: {e}", i + 1))),
        }
    }
    Ok(rows)
}

/// Univariate distribution sampled on a grid, `(ω_k, P(ω_k))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tabulated1d {
    omega: Vec<f64>,
    p: Vec<f64>,
}

impl Tabulated1d {
    /// Requires the trapezoidal integral to equal 1 within `tol`.
    pub fn new(omega: Vec<f64>, p: Vec<f64>, tol: f64) -> Result<Self> {
        let t = Self::normalized_unchecked(omega, p)?;
        let total: f64 = trapezoid_weights(&t.omega).iter().zip(&t.p).map(|(w, p)| w * p).sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::NotNormalized { total });
        }
        Ok(t)
    }

    /// Rescales the samples so the trapezoidal integral is exactly 1.
    pub fn normalized(omega: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let mut t = Self::normalized_unchecked(omega, p)?;
        let total: f64 = trapezoid_weights(&t.omega).iter().zip(&t.p).map(|(w, p)| w * p).sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::NotNormalized { total });
        }
        t.p.iter_mut().for_each(|v| *v /= total);
        Ok(t)
    }

    fn normalized_unchecked(omega: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if omega.len() != p.len() {
            return Err(Error::LengthMismatch { expected: omega.len(), found: p.len() });
        }
        check_grid(&omega, "frequency")?;
        check_density(&p)?;
        Ok(Self { omega, p })
    }

    /// Columns `omega, p`; an optional header line is skipped.
    pub fn from_csv_reader<R: Read>(reader: R, tol: f64) -> Result<Self> {
        let rows = read_rows(reader, 2)?;
        let (omega, p) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
        Self::new(omega, p, tol)
    }

    pub fn from_csv(path: impl AsRef<Path>, tol: f64) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?, tol)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Trapezoid weights multiplied into the samples.
    pub fn weighted(&self) -> Vec<f64> {
        trapezoid_weights(&self.omega).iter().zip(&self.p).map(|(w, p)| w * p).collect()
    }

    /// Linear interpolation, zero outside the grid.
    pub fn density(&self, w: f64) -> f64 {
        interp(&self.omega, &self.p, w).unwrap_or(0.0)
    }

    pub fn mean_and_sd(&self) -> (f64, f64) {
        let wp = self.weighted();
        let mean: f64 = wp.iter().zip(&self.omega).map(|(a, w)| a * w).sum();
        let var: f64 = wp.iter().zip(&self.omega).map(|(a, w)| a * (w - mean).powi(2)).sum();
        (mean, var.sqrt())
    }

    fn max_step(&self) -> f64 {
        self.omega.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

fn interp(x: &[f64], y: &[f64], at: f64) -> Option<f64> {
    if at < x[0] || at > x[x.len() - 1] {
        return None;
    }
    let i = x.partition_point(|&v| v <= at).clamp(1, x.len() - 1);
    let (x0, x1) = (x[i - 1], x[i]);
    let s = (at - x0) / (x1 - x0);
    Some(y[i - 1] * (1.0 - s) + y[i] * s)
}

/// Bivariate distribution on a rectangular grid, stored row-major with
/// `omega_a` as the slow index.
#[derive(Clone, Debug, PartialEq)]
pub struct Tabulated2d {
    omega_a: Vec<f64>,
    omega_b: Vec<f64>,
    p: Vec<f64>,
}

impl Tabulated2d {
    pub fn new(omega_a: Vec<f64>, omega_b: Vec<f64>, p: Vec<f64>, tol: f64) -> Result<Self> {
        let t = Self::unchecked(omega_a, omega_b, p)?;
        let total = t.weighted().iter().sum::<f64>();
        if (total - 1.0).abs() > tol {
            return Err(Error::NotNormalized { total });
        }
        Ok(t)
    }

    pub fn normalized(omega_a: Vec<f64>, omega_b: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let mut t = Self::unchecked(omega_a, omega_b, p)?;
        let total = t.weighted().iter().sum::<f64>();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::NotNormalized { total });
        }
        t.p.iter_mut().for_each(|v| *v /= total);
        Ok(t)
    }

    fn unchecked(omega_a: Vec<f64>, omega_b: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        check_grid(&omega_a, "omega_a")?;
        check_grid(&omega_b, "omega_b")?;
        let expected = omega_a.len() * omega_b.len();
        if p.len() != expected {
            return Err(Error::LengthMismatch { expected, found: p.len() });
        }
        check_density(&p)?;
        Ok(Self { omega_a, omega_b, p })
    }

    /// Columns `omega_a, omega_b, p` in row-major order (`omega_a` outer).
    pub fn from_csv_reader<R: Read>(reader: R, tol: f64) -> Result<Self> {
        let rows = read_rows(reader, 3)?;
        let mut omega_a: Vec<f64> = Vec::new();
        let mut omega_b: Vec<f64> = Vec::new();
        for r in &rows {
            if omega_a.last() != Some(&r[0]) {
                omega_a.push(r[0]);
            }
            if omega_a.len() == 1 {
                omega_b.push(r[1]);
            }
        }
        let nb = omega_b.len();
        for (i, r) in rows.iter().enumerate() {
            if r[0] != omega_a[i / nb.max(1)] || r[1] != omega_b[i % nb.max(1)] {
                return Err(Error::InvalidSpec(format!("row {} breaks the rectangular row-major grid", i + 1)));
            }
        }
        let p = rows.iter().map(|r| r[2]).collect();
        Self::new(omega_a, omega_b, p, tol)
    }

    pub fn from_csv(path: impl AsRef<Path>, tol: f64) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?, tol)
    }

    pub fn omega_a(&self) -> &[f64] {
        &self.omega_a
    }

    pub fn omega_b(&self) -> &[f64] {
        &self.omega_b
    }

    fn weighted(&self) -> Vec<f64> {
        let wa = trapezoid_weights(&self.omega_a);
        let wb = trapezoid_weights(&self.omega_b);
        let nb = self.omega_b.len();
        self.p.iter().enumerate().map(|(idx, p)| p * wa[idx / nb] * wb[idx % nb]).collect()
    }

    /// Sampled transform of `P` with phase `Δn (ca ω_a + cb ω_b) t`.
    fn transform(&self, ca: f64, cb: f64, dn: f64) -> SampledTransform {
        let w = self.weighted();
        let nb = self.omega_b.len();
        let mut freqs = Vec::with_capacity(w.len());
        let mut weights = Vec::with_capacity(w.len());
        for (idx, wk) in w.into_iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            freqs.push(dn * (ca * self.omega_a[idx / nb] + cb * self.omega_b[idx % nb]));
            weights.push(wk);
        }
        let step_a = self.omega_a.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let step_b = self.omega_b.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let max_step = dn.abs() * (ca.abs() * step_a).max(cb.abs() * step_b);
        SampledTransform { freqs, weights, max_step }
    }

    fn sd(&self) -> f64 {
        let w = self.weighted();
        let nb = self.omega_b.len();
        let mut m = [0.0; 2];
        for (idx, wk) in w.iter().enumerate() {
            m[0] += wk * self.omega_a[idx / nb];
            m[1] += wk * self.omega_b[idx % nb];
        }
        let mut v = [0.0; 2];
        for (idx, wk) in w.iter().enumerate() {
            v[0] += wk * (self.omega_a[idx / nb] - m[0]).powi(2);
            v[1] += wk * (self.omega_b[idx % nb] - m[1]).powi(2);
        }
        (0.5 * (v[0] + v[1])).sqrt()
    }
}

/// Initial frequency distribution of one photon or of a photon pair.
#[derive(Clone, Debug, PartialEq)]
pub enum FrequencySpec {
    UniGaussian { mean: f64, sd: f64 },
    UniLorentzian { center: f64, width: f64 },
    UniTabulated(Tabulated1d),
    BiGaussianSingle(GaussianPairParams),
    BiGaussianDouble(GaussianPairParams),
    BiTabulated(Tabulated2d),
}

impl FrequencySpec {
    pub fn is_bivariate(&self) -> bool {
        matches!(self, Self::BiGaussianSingle(_) | Self::BiGaussianDouble(_) | Self::BiTabulated(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::UniGaussian { mean, sd } => {
                if !(*sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                    return Err(Error::InvalidSpec(format!("Gaussian sd must be positive, got {sd}")));
                }
            }
            Self::UniLorentzian { center, width } => {
                if !(*width > 0.0 && width.is_finite() && center.is_finite()) {
                    return Err(Error::InvalidSpec(format!("Lorentzian width must be positive, got {width}")));
                }
            }
            Self::BiGaussianSingle(p) | Self::BiGaussianDouble(p) => p.validate()?,
            Self::UniTabulated(_) | Self::BiTabulated(_) => {}
        }
        Ok(())
    }
}

/// Univariate `|g(ω)|²` used for phase-weighted transforms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spectrum {
    /// Weighted sum of normalized Gaussians; weights must sum to 1.
    GaussianMixture { peaks: Vec<GaussianPeak> },
    #[serde(skip)]
    Tabulated(Tabulated1d),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPeak {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

impl Spectrum {
    pub fn gaussian(mean: f64, sd: f64) -> Self {
        Self::GaussianMixture { peaks: vec![GaussianPeak { weight: 1.0, mean, sd }] }
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if let Self::GaussianMixture { peaks } = self {
            if peaks.is_empty() {
                return Err(Error::InvalidSpec("mixture needs at least one peak".into()));
            }
            if peaks.iter().any(|p| !(p.sd > 0.0 && p.weight >= 0.0 && p.mean.is_finite())) {
                return Err(Error::InvalidSpec("mixture peaks need sd > 0 and weight >= 0".into()));
            }
            let total: f64 = peaks.iter().map(|p| p.weight).sum();
            if (total - 1.0).abs() > tol {
                return Err(Error::NotNormalized { total });
            }
        }
        Ok(())
    }

    pub fn density(&self, w: f64) -> f64 {
        match self {
            Self::GaussianMixture { peaks } => peaks
                .iter()
                .map(|p| p.weight * (-0.5 * ((w - p.mean) / p.sd).powi(2)).exp() / ((2.0 * PI).sqrt() * p.sd))
                .sum(),
            Self::Tabulated(t) => t.density(w),
        }
    }

    /// Intervals carrying the probability mass (merged per-peak supports).
    pub fn support(&self) -> Vec<(f64, f64)> {
        match self {
            Self::GaussianMixture { peaks } => {
                let mut iv: Vec<(f64, f64)> = peaks
                    .iter()
                    .filter(|p| p.weight > 0.0)
                    .map(|p| (p.mean - GAUSSIAN_SUPPORT * p.sd, p.mean + GAUSSIAN_SUPPORT * p.sd))
                    .collect();
                iv.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut merged: Vec<(f64, f64)> = Vec::new();
                for (lo, hi) in iv {
                    match merged.last_mut() {
                        Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                        _ => merged.push((lo, hi)),
                    }
                }
                merged
            }
            Self::Tabulated(t) => vec![(t.omega[0], t.omega[t.omega.len() - 1])],
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::GaussianMixture { peaks } => peaks
                .iter()
                .flat_map(|p| [p.mean - GAUSSIAN_SUPPORT * p.sd, p.mean, p.mean + GAUSSIAN_SUPPORT * p.sd])
                .collect(),
            Self::Tabulated(_) => Vec::new(),
        }
    }
}

/// Frequency-dependent initial phase `θ(ω)` in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseProfile {
    Constant { value: f64 },
    /// `θ(ω) = slope · (ω - center)`
    Linear { slope: f64, center: f64 },
    Step { at: f64, below: f64, above: f64 },
    /// `values[i]` applies on `[edges[i-1], edges[i])`; `values.len() == edges.len() + 1`.
    Piecewise { edges: Vec<f64>, values: Vec<f64> },
    /// Linear interpolation, constant beyond the end nodes.
    Tabulated { omega: Vec<f64>, theta: Vec<f64> },
}

impl PhaseProfile {
    pub fn zero() -> Self {
        Self::Constant { value: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Piecewise { edges, values } => {
                if values.len() != edges.len() + 1 {
                    return Err(Error::LengthMismatch { expected: edges.len() + 1, found: values.len() });
                }
                if !edges.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::InvalidSpec("phase edges must increase".into()));
                }
            }
            Self::Tabulated { omega, theta } => {
                if omega.len() != theta.len() {
                    return Err(Error::LengthMismatch { expected: omega.len(), found: theta.len() });
                }
                check_grid(omega, "phase")?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn eval(&self, w: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Linear { slope, center } => slope * (w - center),
            Self::Step { at, below, above } => {
                if w < *at {
                    *below
                } else {
                    *above
                }
            }
            Self::Piecewise { edges, values } => values[edges.partition_point(|&e| e <= w)],
            Self::Tabulated { omega, theta } => interp(omega, theta, w)
                .unwrap_or(if w < omega[0] { theta[0] } else { theta[theta.len() - 1] }),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Self::Constant { value } => Some(*value),
            _ => None,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Step { at, .. } => vec![*at],
            Self::Piecewise { edges, .. } => edges.clone(),
            Self::Tabulated { omega, .. } => omega.clone(),
            _ => Vec::new(),
        }
    }
}

/// `∫ P(ω) m(ω) e^{-iτω} dω` for a modulation `m`.
///
/// Gaussian mixtures use adaptive Gauss–Kronrod on the merged supports with
/// every panel spanning at most half an oscillation period; tabulated
/// spectra are summed over their nodes with trapezoid weights.
pub fn spectral_transform<M>(spectrum: &Spectrum, modulation: M, breaks: &[f64], tau: f64, abs_tol: f64) -> Result<Complex64>
where
    M: Fn(f64) -> Complex64,
{
    match spectrum {
        Spectrum::Tabulated(t) => Ok(t
            .weighted()
            .iter()
            .zip(&t.omega)
            .map(|(wp, &w)| modulation(w) * Complex64::from_polar(*wp, -tau * w))
            .sum()),
        Spectrum::GaussianMixture { .. } => {
            let max_panel = if tau == 0.0 { f64::INFINITY } else { PI / tau.abs() };
            let opts = QuadOptions { abs_tol, max_panel, ..QuadOptions::default() };
            let mut all_breaks = spectrum.breakpoints();
            all_breaks.extend_from_slice(breaks);
            let integrand = |w: f64| modulation(w) * Complex64::from_polar(spectrum.density(w), -tau * w);
            let mut total = Complex64::new(0.0, 0.0);
            for (lo, hi) in spectrum.support() {
                total += quadrature::integrate(integrand, lo, hi, &all_breaks, &opts)?.value;
            }
            Ok(total)
        }
    }
}

/// `κ(t) = ∫ |g(ω)|² e^{iθ(ω)} e^{-iΔn ω t} dω`.
pub fn kappa_correlated(spectrum: &Spectrum, theta: &PhaseProfile, dn: f64, t: f64, abs_tol: f64) -> Result<Complex64> {
    spectral_transform(spectrum, |w| Complex64::from_polar(1.0, theta.eval(w)), &theta.breakpoints(), dn * t, abs_tol)
}

/// Precomputed node sum `Σ_k w_k e^{-i f_k t}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledTransform {
    freqs: Vec<f64>,
    weights: Vec<f64>,
    /// Largest phase increment per unit time between neighbouring nodes.
    max_step: f64,
}

impl SampledTransform {
    fn from_1d(t: &Tabulated1d, dn: f64) -> Self {
        Self {
            freqs: t.omega.iter().map(|w| dn * w).collect(),
            weights: t.weighted(),
            max_step: dn.abs() * t.max_step(),
        }
    }

    fn value(&self, t: f64) -> Complex64 {
        self.freqs.iter().zip(&self.weights).map(|(f, w)| Complex64::from_polar(*w, -f * t)).sum()
    }

    fn derivative(&self, t: f64) -> Complex64 {
        self.freqs
            .iter()
            .zip(&self.weights)
            .map(|(f, w)| Complex64::new(0.0, -f) * Complex64::from_polar(*w, -f * t))
            .sum()
    }

    /// Beyond this time neighbouring nodes are more than half a period apart.
    pub fn resolved_until(&self) -> f64 {
        if self.max_step == 0.0 {
            f64::INFINITY
        } else {
            PI / self.max_step
        }
    }
}

/// One complex decoherence function of time together with its derivative.
#[derive(Clone, Debug, PartialEq)]
pub enum DecoherenceFunction {
    /// `exp(-decay·t² - i·freq·t) · cos(beat·t)`
    Gaussian { decay: f64, freq: f64, beat: f64 },
    /// `exp(-rate·|t| - i·freq·t)`
    Lorentzian { rate: f64, freq: f64 },
    Sampled(Arc<SampledTransform>),
}

impl DecoherenceFunction {
    pub fn value(&self, t: f64) -> Complex64 {
        match self {
            Self::Gaussian { decay, freq, beat } => {
                Complex64::from_polar((-decay * t * t).exp(), -freq * t) * (beat * t).cos()
            }
            Self::Lorentzian { rate, freq } => Complex64::from_polar((-rate * t.abs()).exp(), -freq * t),
            Self::Sampled(s) => s.value(t),
        }
    }

    /// Analytic time derivative. For the Lorentzian the right derivative is used at `t = 0`.
    pub fn derivative(&self, t: f64) -> Complex64 {
        match self {
            Self::Gaussian { decay, freq, beat } => {
                let env = Complex64::from_polar((-decay * t * t).exp(), -freq * t);
                env * (Complex64::new(-2.0 * decay * t, -freq) * (beat * t).cos() - beat * (beat * t).sin())
            }
            Self::Lorentzian { rate, freq } => {
                let sign = if t < 0.0 { -1.0 } else { 1.0 };
                self.value(t) * Complex64::new(-rate * sign, -freq)
            }
            Self::Sampled(s) => s.derivative(t),
        }
    }

    /// `κ'(t)/κ(t)`.
    pub fn log_derivative(&self, t: f64, which: &'static str) -> Result<Complex64> {
        if let Self::Gaussian { decay, freq, beat } = self {
            let c = (beat * t).cos();
            if c == 0.0 {
                return Err(Error::LogDerivative { t, which });
            }
            return Ok(Complex64::new(-2.0 * decay * t - beat * (beat * t).sin() / c, -freq));
        }
        let k = self.value(t);
        if k.norm() < 1e-300 {
            return Err(Error::LogDerivative { t, which });
        }
        Ok(self.derivative(t) / k)
    }

    /// Exact zeros in `[t0, t1]` for closed forms; empty when none are known.
    pub fn zeros_in(&self, t0: f64, t1: f64) -> Vec<f64> {
        match self {
            Self::Gaussian { beat, .. } if *beat != 0.0 => {
                let b = beat.abs();
                let first = ((t0 * b - PI / 2.0) / PI).ceil().max(0.0) as u64;
                (first..)
                    .map(|k| (PI / 2.0 + k as f64 * PI) / b)
                    .take_while(|&z| z <= t1)
                    .filter(|&z| z >= t0)
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    fn resolved_until(&self) -> f64 {
        match self {
            Self::Sampled(s) => s.resolved_until(),
            _ => f64::INFINITY,
        }
    }
}

/// Names of the two-photon functions in table order.
pub const PAIR_NAMES: [&str; 4] = ["kappa_a", "kappa_b", "kappa_ab", "lambda_ab"];

/// The decoherence functions of one photon (`κ`) or of a photon pair
/// (`κ_a, κ_b, κ_ab, Λ_ab`).
#[derive(Clone, Debug, PartialEq)]
pub enum DecoherenceSet {
    Single { kappa: DecoherenceFunction, dn: f64, scale: f64 },
    Pair { functions: [DecoherenceFunction; 4], dn: f64, scale: f64 },
}

impl DecoherenceSet {
    /// Builds the set for either arity.
    pub fn from_spec(spec: &FrequencySpec, dn: f64) -> Result<Self> {
        if spec.is_bivariate() {
            decoherence_set(spec, dn)
        } else {
            single_set(spec, dn)
        }
    }

    /// Hilbert-space dimension of the polarization system (2 or 4).
    pub fn dim(&self) -> usize {
        match self {
            Self::Single { .. } => 2,
            Self::Pair { .. } => 4,
        }
    }

    pub fn dn(&self) -> f64 {
        match self {
            Self::Single { dn, .. } | Self::Pair { dn, .. } => *dn,
        }
    }

    /// Characteristic inverse time `σ·Δn` (or `λ·Δn`) used to scale thresholds.
    pub fn rate_scale(&self) -> f64 {
        match self {
            Self::Single { scale, .. } | Self::Pair { scale, .. } => *scale,
        }
    }

    pub fn functions(&self) -> &[DecoherenceFunction] {
        match self {
            Self::Single { kappa, .. } => std::slice::from_ref(kappa),
            Self::Pair { functions, .. } => functions,
        }
    }

    /// Times in `[t0, t1]` where some function vanishes (closed forms only), sorted.
    pub fn singular_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut z: Vec<f64> = self.functions().iter().flat_map(|f| f.zeros_in(t0, t1)).collect();
        z.sort_by(f64::total_cmp);
        z.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        z
    }

    /// Largest time at which sampled transforms are still resolved by their grid.
    pub fn resolved_until(&self) -> f64 {
        self.functions().iter().map(DecoherenceFunction::resolved_until).fold(f64::INFINITY, f64::min)
    }
}

fn single_set(spec: &FrequencySpec, dn: f64) -> Result<DecoherenceSet> {
    spec.validate()?;
    let (kappa, scale) = match spec {
        FrequencySpec::UniGaussian { mean, sd } => {
            (DecoherenceFunction::Gaussian { decay: 0.5 * sd * sd * dn * dn, freq: dn * mean, beat: 0.0 }, sd * dn.abs())
        }
        FrequencySpec::UniLorentzian { center, width } => {
            (DecoherenceFunction::Lorentzian { rate: width * dn.abs(), freq: dn * center }, width * dn.abs())
        }
        FrequencySpec::UniTabulated(t) => {
            let (_, sd) = t.mean_and_sd();
            (DecoherenceFunction::Sampled(Arc::new(SampledTransform::from_1d(t, dn))), sd * dn.abs())
        }
        _ => return Err(Error::WrongArity { expected: "univariate" }),
    };
    Ok(DecoherenceSet::Single { kappa, dn, scale })
}

/// Single-photon decoherence function `κ(t)`.
pub fn kappa_single(spec: &FrequencySpec, dn: f64, t: f64) -> Result<Complex64> {
    match single_set(spec, dn)? {
        DecoherenceSet::Single { kappa, .. } => Ok(kappa.value(t)),
        DecoherenceSet::Pair { .. } => unreachable!(),
    }
}

/// Two-photon decoherence functions `κ_a, κ_b, κ_ab, Λ_ab`.
pub fn decoherence_set(spec: &FrequencySpec, dn: f64) -> Result<DecoherenceSet> {
    spec.validate()?;
    let g = |decay: f64, freq: f64, beat: f64| DecoherenceFunction::Gaussian { decay, freq, beat };
    let (functions, scale) = match spec {
        FrequencySpec::BiGaussianSingle(p) => {
            let s2 = p.sigma * p.sigma * dn * dn;
            (
                [
                    g(0.5 * s2, 0.5 * dn * (p.omega0 + p.delta_omega), 0.0),
                    g(0.5 * s2, 0.5 * dn * (p.omega0 - p.delta_omega), 0.0),
                    g(s2 * (1.0 + p.k), dn * p.omega0, 0.0),
                    g(s2 * (1.0 - p.k), dn * p.delta_omega, 0.0),
                ],
                p.sigma * dn.abs(),
            )
        }
        FrequencySpec::BiGaussianDouble(p) => {
            let s2 = p.sigma * p.sigma * dn * dn;
            let local = g(0.5 * s2, 0.5 * dn * p.omega0, 0.5 * dn * p.delta_omega);
            (
                [local.clone(), local, g(s2 * (1.0 + p.k), dn * p.omega0, 0.0), g(s2 * (1.0 - p.k), 0.0, dn * p.delta_omega)],
                p.sigma * dn.abs(),
            )
        }
        FrequencySpec::BiTabulated(t) => {
            let s = |ca, cb| DecoherenceFunction::Sampled(Arc::new(t.transform(ca, cb, dn)));
            ([s(1.0, 0.0), s(0.0, 1.0), s(1.0, 1.0), s(1.0, -1.0)], t.sd() * dn.abs())
        }
        _ => return Err(Error::WrongArity { expected: "bivariate" }),
    };
    Ok(DecoherenceSet::Pair { functions, dn, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian_table(mean: f64, sd: f64, h: f64) -> Tabulated1d {
        let n = (2.0 * 10.0 * sd / h).round() as usize;
        let omega: Vec<f64> = (0..=n).map(|i| mean - 10.0 * sd + i as f64 * h).collect();
        let p = omega.iter().map(|w| (-0.5 * ((w - mean) / sd).powi(2)).exp() / ((2.0 * PI).sqrt() * sd)).collect();
        Tabulated1d::normalized(omega, p).unwrap()
    }

    #[test]
    fn unity_at_zero() {
        let specs = [
            FrequencySpec::UniGaussian { mean: 1.3, sd: 0.7 },
            FrequencySpec::UniLorentzian { center: -2.0, width: 0.4 },
            FrequencySpec::UniTabulated(gaussian_table(0.5, 1.0, 0.05)),
        ];
        for s in &specs {
            let k = kappa_single(s, 1.7, 0.0).unwrap();
            assert!((k - Complex64::from(1.0)).norm() < 1e-12, "{s:?}");
        }
        let k = kappa_single(&specs[0], 1.7, 0.0).unwrap();
        assert_eq!(k, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn gaussian_closed_form_and_rate() {
        let s = FrequencySpec::UniGaussian { mean: 0.0, sd: 1.0 };
        for t in [0.1, 0.5, 2.0] {
            let k = kappa_single(&s, 1.0, t).unwrap();
            assert!((k.norm() - (-t * t / 2.0).exp()).abs() < 1e-15);
        }
        let set = DecoherenceSet::from_spec(&s, 1.0).unwrap();
        let gamma = -set.functions()[0].log_derivative(0.5, "kappa").unwrap().re;
        assert!((gamma - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lorentzian_rate_is_constant() {
        let s = FrequencySpec::UniLorentzian { center: 3.0, width: 0.25 };
        let set = DecoherenceSet::from_spec(&s, 2.0).unwrap();
        for t in [0.01, 0.7, 5.0] {
            let r = -set.functions()[0].log_derivative(t, "kappa").unwrap().re;
            assert!((r - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn tabulated_gaussian_matches_closed_form() {
        let tab = FrequencySpec::UniTabulated(gaussian_table(0.3, 1.0, 0.02));
        let exact = FrequencySpec::UniGaussian { mean: 0.3, sd: 1.0 };
        for i in 0..=30 {
            let t = 0.1 * i as f64;
            let a = kappa_single(&tab, 1.0, t).unwrap();
            let b = kappa_single(&exact, 1.0, t).unwrap();
            assert!((a - b).norm() < 1e-8, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn unnormalized_table_is_rejected() {
        let omega = vec![0.0, 1.0, 2.0];
        let err = Tabulated1d::new(omega, vec![1.0, 1.0, 1.0], 1e-8).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { total } if (total - 2.0).abs() < 1e-12));
        assert!(Tabulated1d::new(vec![0.0, 1.0], vec![1.0, -0.5], 1e-8).is_err());
    }

    #[test]
    fn csv_loading() {
        let text = "omega,p\n0,0.25\n1,0.75\n2,0.25\n";
        let t = Tabulated1d::from_csv_reader(text.as_bytes(), 1e-8).unwrap();
        assert_eq!(t.omega(), &[0.0, 1.0, 2.0]);
        let text2 = "omega_a,omega_b,p\n0,0,1\n0,1,1\n1,0,1\n1,1,1\n";
        let t2 = Tabulated2d::from_csv_reader(text2.as_bytes(), 1e-8).unwrap();
        assert_eq!(t2.omega_b(), &[0.0, 1.0]);
        let bad = "0,0,1\n0,1,1\n1,1,1\n1,0,1\n";
        assert!(Tabulated2d::from_csv_reader(bad.as_bytes(), 1e-8).is_err());
    }

    #[test]
    fn arity_and_parameter_errors() {
        let uni = FrequencySpec::UniGaussian { mean: 0.0, sd: 1.0 };
        assert!(matches!(decoherence_set(&uni, 1.0), Err(Error::WrongArity { .. })));
        let bi = FrequencySpec::BiGaussianSingle(GaussianPairParams { omega0: 0.0, delta_omega: 0.0, sigma: 1.0, k: 0.2 });
        assert!(matches!(kappa_single(&bi, 1.0, 0.1), Err(Error::WrongArity { .. })));
        let bad = FrequencySpec::BiGaussianSingle(GaussianPairParams { omega0: 0.0, delta_omega: 0.0, sigma: 1.0, k: 1.5 });
        assert!(matches!(decoherence_set(&bad, 1.0), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn uncorrelated_pair_factorizes() {
        let p = GaussianPairParams { omega0: 2.0, delta_omega: 0.4, sigma: 1.1, k: 0.0 };
        let set = decoherence_set(&FrequencySpec::BiGaussianSingle(p), 0.8).unwrap();
        let f = set.functions();
        for i in 0..20 {
            let t = 0.17 * i as f64;
            let (ka, kb) = (f[0].value(t), f[1].value(t));
            assert!((f[2].value(t) - ka * kb).norm() < 1e-15);
            assert!((f[3].value(t) - ka * kb.conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn fully_anticorrelated_sum_frequency_never_decays() {
        let p = GaussianPairParams { omega0: 1.0, delta_omega: 0.3, sigma: 1.0, k: -1.0 };
        let set = decoherence_set(&FrequencySpec::BiGaussianSingle(p), 1.0).unwrap();
        for i in 0..20 {
            assert!((set.functions()[2].value(0.4 * i as f64).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn double_peak_local_functions_coincide_and_reduce_to_single_peak() {
        let p = GaussianPairParams { omega0: 1.5, delta_omega: 2.0, sigma: 1.0, k: 0.3 };
        let set = decoherence_set(&FrequencySpec::BiGaussianDouble(p), 1.0).unwrap();
        assert_eq!(set.functions()[0], set.functions()[1]);

        let p0 = GaussianPairParams { delta_omega: 0.0, ..p };
        let tiny = GaussianPairParams { delta_omega: 1e-11, ..p };
        let single = decoherence_set(&FrequencySpec::BiGaussianSingle(p0), 1.0).unwrap();
        let double = decoherence_set(&FrequencySpec::BiGaussianDouble(tiny), 1.0).unwrap();
        for i in 0..30 {
            let t = 0.1 * i as f64;
            for (a, b) in single.functions().iter().zip(double.functions()) {
                assert!((a.value(t) - b.value(t)).norm() < 1e-10);
                assert!((a.derivative(t) - b.derivative(t)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn double_peak_zeros_are_exact() {
        let p = GaussianPairParams { omega0: 0.0, delta_omega: 2.0, sigma: 1.0, k: 0.0 };
        let set = decoherence_set(&FrequencySpec::BiGaussianDouble(p), 1.0).unwrap();
        let z = set.singular_times(0.0, 3.0);
        // Λ zeros at 2t = π/2 + kπ, κ_a zeros at t = π/2 + kπ
        let expect = [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];
        assert_eq!(z.len(), expect.len());
        for (a, b) in z.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        for (f, zs) in set.functions().iter().zip([PI / 2.0, PI / 2.0, 0.0, PI / 4.0]) {
            if zs > 0.0 {
                assert!(f.value(zs).norm() < 1e-15);
            }
        }
    }

    fn fd4(f: &DecoherenceFunction, t: f64) -> Complex64 {
        let h = 1e-3 * (1.0 + t.abs());
        (-f.value(t + 2.0 * h) + f.value(t + h) * 8.0 - f.value(t - h) * 8.0 + f.value(t - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let p = GaussianPairParams { omega0: 1.2, delta_omega: 2.0, sigma: 0.9, k: -0.4 };
        let mut fns: Vec<DecoherenceFunction> = Vec::new();
        fns.extend_from_slice(decoherence_set(&FrequencySpec::BiGaussianSingle(p), 1.1).unwrap().functions());
        fns.extend_from_slice(decoherence_set(&FrequencySpec::BiGaussianDouble(p), 1.1).unwrap().functions());
        fns.extend_from_slice(DecoherenceSet::from_spec(&FrequencySpec::UniTabulated(gaussian_table(0.2, 1.0, 0.05)), 1.0).unwrap().functions());
        for f in &fns {
            for _ in 0..50 {
                let t: f64 = rng.random_range(0.05..3.0);
                let (a, b) = (f.derivative(t), fd4(f, t));
                let scale = f.value(t).norm().max(1e-3);
                assert!((a - b).norm() / scale < 1e-6, "{f:?} at t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn correlated_kappa_constant_phase_factors_out() {
        let g = Spectrum::gaussian(0.4, 1.0);
        let exact = FrequencySpec::UniGaussian { mean: 0.4, sd: 1.0 };
        for t in [0.0, 0.3, 1.0, 2.5, 6.0] {
            let k0 = kappa_correlated(&g, &PhaseProfile::zero(), 1.3, t, 1e-12).unwrap();
            let closed = kappa_single(&exact, 1.3, t).unwrap();
            assert!((k0 - closed).norm() < 1e-10);
            let th = PI / 3.0;
            let k = kappa_correlated(&g, &PhaseProfile::Constant { value: th }, 1.3, t, 1e-12).unwrap();
            assert!((k - Complex64::from_polar(1.0, th) * closed).norm() < 1e-10);
        }
    }

    #[test]
    fn step_phase_makes_coherence_non_monotonic() {
        let g = Spectrum::gaussian(0.0, 1.0);
        let theta = PhaseProfile::Step { at: 0.0, below: 0.0, above: PI };
        let mags: Vec<f64> = (0..40)
            .map(|i| kappa_correlated(&g, &theta, 1.0, 0.1 * i as f64, 1e-11).unwrap().norm())
            .collect();
        assert!(mags[0] < 1e-10);
        assert!(mags.iter().cloned().fold(0.0, f64::max) > mags[1] + 0.3);
    }

    #[test]
    fn phase_profiles_evaluate() {
        let p = PhaseProfile::Piecewise { edges: vec![-1.0, 1.0], values: vec![0.0, 1.0, 2.0] };
        assert_eq!(p.eval(-2.0), 0.0);
        assert_eq!(p.eval(0.0), 1.0);
        assert_eq!(p.eval(1.0), 2.0);
        let t = PhaseProfile::Tabulated { omega: vec![0.0, 2.0], theta: vec![0.0, 1.0] };
        assert_eq!(t.eval(1.0), 0.5);
        assert_eq!(t.eval(5.0), 1.0);
        assert_eq!(PhaseProfile::Linear { slope: 2.0, center: 1.0 }.eval(3.0), 4.0);
    }

    proptest! {
        #[test]
        fn bounded_and_conjugate_symmetric(mean in -3.0..3.0f64, sd in 0.1..3.0f64, dn in 0.1..2.0f64, t in 0.0..10.0f64) {
            let s = FrequencySpec::UniGaussian { mean, sd };
            let k = kappa_single(&s, dn, t).unwrap();
            prop_assert!(k.norm() <= 1.0 + 1e-12);
            let km = kappa_single(&s, dn, -t).unwrap();
            prop_assert!((km - k.conj()).norm() < 1e-14);
        }

        #[test]
        fn pair_functions_bounded(omega0 in -2.0..2.0f64, dw in 0.0..3.0f64, sigma in 0.2..2.0f64, k in -1.0..1.0f64, t in 0.0..6.0f64) {
            let p = GaussianPairParams { omega0, delta_omega: dw, sigma, k };
            for spec in [FrequencySpec::BiGaussianSingle(p), FrequencySpec::BiGaussianDouble(p)] {
                let set = decoherence_set(&spec, 1.0).unwrap();
                for f in set.functions() {
                    prop_assert!(f.value(t).norm() <= 1.0 + 1e-12);
                    prop_assert!((f.value(-t) - f.value(t).conj()).norm() < 1e-14);
                }
            }
        }
    }
}
