//! Bath-positive decomposition of a single photon whose polarization is
//! initially correlated with its frequency.
//!
//! The initial state is `C_v|v⟩⊗|g⟩ + C_h|h⟩⊗|g e^{iθ}⟩`. The reduced
//! polarization state is rebuilt from three decoherence functions `κ₀`, `κ_x`
//! and `κ_y`, each the transform of a valid environment state.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::decoherence::{kappa_correlated, spectral_transform, GaussianPeak, GAUSSIAN_SUPPORT, PhaseProfile, Spectrum};
use crate::states::pauli;
use crate::{CMatrix, Error, Result, Tolerances};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Minimum number of frequency nodes for [`environment_terms_on_grid`].
pub const MIN_GRID: usize = 64;

/// Largest tolerated deviation of the discretized environment trace from 1.
pub const GRID_TRACE_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatedPFState {
    pub c_h: Complex64,
    pub c_v: Complex64,
    /// `|g(ω)|²`
    pub spectrum: Spectrum,
    pub theta: PhaseProfile,
}

impl CorrelatedPFState {
    pub fn new(c_h: Complex64, c_v: Complex64, spectrum: Spectrum, theta: PhaseProfile) -> Result<Self> {
        let s = Self { c_h, c_v, spectrum, theta };
        s.validate(&Tolerances::default())?;
        Ok(s)
    }

    /// Equal amplitudes `C_h = C_v = 1/√2`.
    pub fn balanced(spectrum: Spectrum, theta: PhaseProfile) -> Self {
        let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { c_h: c, c_v: c, spectrum, theta }
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let total = self.c_h.norm_sqr() + self.c_v.norm_sqr();
        if (total - 1.0).abs() > tol.algebraic.max(1e-12) {
            return Err(Error::NotNormalized { total });
        }
        self.spectrum.validate(tol.normalization)?;
        self.theta.validate()
    }

    /// `C_v C_h*`
    fn cross(&self) -> Complex64 {
        self.c_v * self.c_h.conj()
    }

    fn modulation(&self, w: f64, imaginary: bool) -> f64 {
        let z = self.cross() * Complex64::from_polar(1.0, -self.theta.eval(w));
        1.0 + 2.0 * if imaginary { z.im } else { z.re }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Weights {
    pub w_x: f64,
    pub w_y: f64,
    pub w_z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kappas {
    pub k0: Complex64,
    pub kx: Complex64,
    pub ky: Complex64,
}

pub fn weights(state: &CorrelatedPFState, tol: &Tolerances) -> Result<Weights> {
    let breaks = state.theta.breakpoints();
    let w = |imaginary| {
        spectral_transform(&state.spectrum, |w| state.modulation(w, imaginary).into(), &breaks, 0.0, tol.quadrature)
            .map(|v| v.re)
    };
    Ok(Weights { w_x: w(false)?, w_y: w(true)?, w_z: 2.0 * state.c_h.norm_sqr() })
}

/// A state together with its weights, ready for repeated evaluation in time.
#[derive(Clone, Debug)]
pub struct BPlusTerms {
    pub state: CorrelatedPFState,
    pub weights: Weights,
    pub dn: f64,
    tol: Tolerances,
}

impl BPlusTerms {
    pub fn new(state: CorrelatedPFState, dn: f64, tol: &Tolerances) -> Result<Self> {
        state.validate(tol)?;
        let weights = weights(&state, tol)?;
        Ok(Self { state, weights, dn, tol: *tol })
    }

    /// `κ₀` never reads `θ`.
    pub fn kappa0(&self, t: f64) -> Result<Complex64> {
        spectral_transform(&self.state.spectrum, |_| Complex64::new(1.0, 0.0), &[], self.dn * t, self.tol.quadrature)
    }

    fn weighted(&self, t: f64, imaginary: bool, weight: f64, which: &'static str) -> Result<Complex64> {
        if weight.abs() < self.tol.degenerate_weight {
            return Err(Error::DegenerateWeight { which, value: weight });
        }
        let num = spectral_transform(
            &self.state.spectrum,
            |w| self.state.modulation(w, imaginary).into(),
            &self.state.theta.breakpoints(),
            self.dn * t,
            self.tol.quadrature,
        )?;
        Ok(num / weight)
    }

    pub fn kappa_x(&self, t: f64) -> Result<Complex64> {
        self.weighted(t, false, self.weights.w_x, "w_x")
    }

    pub fn kappa_y(&self, t: f64) -> Result<Complex64> {
        self.weighted(t, true, self.weights.w_y, "w_y")
    }

    pub fn kappas(&self, t: f64) -> Result<Kappas> {
        Ok(Kappas { k0: self.kappa0(t)?, kx: self.kappa_x(t)?, ky: self.kappa_y(t)? })
    }

    /// `κ(t) = ∫|g|² e^{iθ} e^{-iΔnωt} dω`
    pub fn kappa(&self, t: f64) -> Result<Complex64> {
        kappa_correlated(&self.state.spectrum, &self.state.theta, self.dn, t, self.tol.quadrature)
    }

    /// Three-term reconstruction of the reduced polarization state.
    pub fn reconstruct(&self, t: f64) -> Result<CMatrix> {
        Ok(three_term_state(&self.weights, &self.kappas(t)?))
    }

    pub fn direct(&self, t: f64) -> Result<CMatrix> {
        Ok(reduced_from_kappa(&self.state, self.kappa(t)?))
    }
}

/// `ρ = ½[w_z, κ₀(i−1); κ₀*(−i−1), 2−w_z] + ½w_x[0, κ_x; κ_x*, 0] + ½w_y[0, −iκ_y; iκ_y*, 0]`
pub fn three_term_state(w: &Weights, k: &Kappas) -> CMatrix {
    let one = Complex64::new(1.0, 0.0);
    let hv = (k.k0 * (I - one) + w.w_x * k.kx - I * w.w_y * k.ky) * 0.5;
    let vh = (k.k0.conj() * (-I - one) + w.w_x * k.kx.conj() + I * w.w_y * k.ky.conj()) * 0.5;
    DMatrix::from_row_slice(2, 2, &[(0.5 * w.w_z).into(), hv, vh, (1.0 - 0.5 * w.w_z).into()])
}

fn reduced_from_kappa(state: &CorrelatedPFState, kappa: Complex64) -> CMatrix {
    let hv = kappa * state.c_h * state.c_v.conj();
    DMatrix::from_row_slice(2, 2, &[state.c_h.norm_sqr().into(), hv, hv.conj(), state.c_v.norm_sqr().into()])
}

pub fn bplus_kappas(state: &CorrelatedPFState, dn: f64, t: f64, tol: &Tolerances) -> Result<Kappas> {
    BPlusTerms::new(state.clone(), dn, tol)?.kappas(t)
}

pub fn reconstruct_reduced_state(state: &CorrelatedPFState, dn: f64, t: f64, tol: &Tolerances) -> Result<CMatrix> {
    BPlusTerms::new(state.clone(), dn, tol)?.reconstruct(t)
}

pub fn direct_reduced_state(state: &CorrelatedPFState, dn: f64, t: f64, tol: &Tolerances) -> Result<CMatrix> {
    Ok(reduced_from_kappa(state, kappa_correlated(&state.spectrum, &state.theta, dn, t, tol.quadrature)?))
}

/// System operators `Q₀ = ½(I − σx − σy − σz)` and `Q_α = ½σ_α`.
pub fn q_operators() -> [CMatrix; 4] {
    let [id, x, y, z] = pauli();
    let half = Complex64::new(0.5, 0.0);
    [(&id - &x - &y - &z) * half, x * half, y * half, z * half]
}

pub const TERM_LABELS: [&str; 4] = ["0", "x", "y", "z"];

/// Environment states `ρ_0, ρ_x, ρ_y, ρ_z` discretized on a frequency grid.
///
/// Kernels are expressed in the trapezoid-weighted node basis, so each
/// matrix is Hermitian with the discrete trace as its trace and the
/// eigenvalues of the continuum operator as its spectrum.
#[derive(Clone, Debug)]
pub struct EnvironmentTerms {
    pub grid: Vec<f64>,
    /// Discrete weights `w_0 = 1, w_x, w_y, w_z`.
    pub weights: [f64; 4],
    /// Trace-normalized kernels; `None` where the weight is degenerate.
    pub kernels: [Option<CMatrix>; 4],
    /// Discrete `∫|g|²` before normalization.
    pub raw_trace: f64,
    amp: Vec<Complex64>,
    amp_theta: Vec<Complex64>,
    c_h: Complex64,
    c_v: Complex64,
}

impl EnvironmentTerms {
    /// The correlated system-environment state `|ψ⟩⟨ψ|`, polarization outer.
    pub fn joint_state(&self) -> CMatrix {
        let n = self.grid.len();
        let psi = CMatrix::from_fn(2 * n, 1, |i, _| {
            if i < n {
                self.c_h * self.amp_theta[i]
            } else {
                self.c_v * self.amp[i - n]
            }
        });
        (&psi * psi.adjoint()).unscale(self.raw_trace)
    }

    /// `Σ_α w_α Q_α ⊗ ρ_α`
    pub fn recombine(&self) -> CMatrix {
        let n = self.grid.len();
        let mut out = CMatrix::zeros(2 * n, 2 * n);
        for ((q, w), rho) in q_operators().iter().zip(self.weights).zip(&self.kernels) {
            if let Some(rho) = rho {
                out += q.kronecker(rho) * Complex64::new(w, 0.0);
            }
        }
        out
    }
}

/// Discretizes the four environment kernels. A validation oracle only; the
/// decoherence functions never go through it.
pub fn environment_terms_on_grid(state: &CorrelatedPFState, grid: &[f64], tol: &Tolerances) -> Result<EnvironmentTerms> {
    if grid.len() < MIN_GRID {
        return Err(Error::InvalidSpec(format!("environment grid needs at least {MIN_GRID} nodes")));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidSpec("environment grid must increase".into()));
    }
    let n = grid.len();
    let quad: Vec<f64> = (0..n)
        .map(|i| {
            let lo = if i > 0 { grid[i] - grid[i - 1] } else { 0.0 };
            let hi = if i + 1 < n { grid[i + 1] - grid[i] } else { 0.0 };
            0.5 * (lo + hi)
        })
        .collect();
    let amp: Vec<Complex64> =
        grid.iter().zip(&quad).map(|(&w, &q)| Complex64::new((q * state.spectrum.density(w)).sqrt(), 0.0)).collect();
    let raw_trace: f64 = amp.iter().map(|a| a.norm_sqr()).sum();
    if (raw_trace - 1.0).abs() > GRID_TRACE_TOL {
        return Err(Error::GridResolution { trace: raw_trace });
    }
    let amp_theta: Vec<Complex64> =
        grid.iter().zip(&amp).map(|(&w, a)| a * Complex64::from_polar(1.0, state.theta.eval(w))).collect();

    let vec = |f: &dyn Fn(usize) -> Complex64| CMatrix::from_fn(n, 1, |i, _| f(i));
    let outer = |v: &CMatrix| v * v.adjoint();
    let u = vec(&|i| amp[i]);
    let u_theta = vec(&|i| amp_theta[i]);
    let unnormalized = [
        outer(&u_theta) * Complex64::from(state.c_h.norm_sqr()) + outer(&u) * Complex64::from(state.c_v.norm_sqr()),
        outer(&vec(&|i| state.c_v * amp[i] + state.c_h * amp_theta[i])),
        outer(&vec(&|i| state.c_h * amp_theta[i] - I * state.c_v * amp[i])),
        outer(&u_theta) * Complex64::from(2.0 * state.c_h.norm_sqr()),
    ];
    let weights = unnormalized.each_ref().map(|m| m.trace().re / raw_trace);
    let kernels: [Option<CMatrix>; 4] = std::array::from_fn(|a| {
        let w = weights[a];
        (w >= tol.degenerate_weight).then(|| unnormalized[a].unscale(w * raw_trace))
    });
    Ok(EnvironmentTerms { grid: grid.to_vec(), weights, kernels, raw_trace, amp, amp_theta, c_h: state.c_h, c_v: state.c_v })
}

/// Grid covering the effective support of `|g|²`.
///
/// Gaussian mixtures get `n` uniform nodes per peak over its support, merged,
/// so narrow components stay resolved next to broad ones.
pub fn support_grid(spectrum: &Spectrum, n: usize) -> Vec<f64> {
    let uniform = |lo: f64, hi: f64| (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64);
    let mut grid: Vec<f64> = match spectrum {
        Spectrum::GaussianMixture { peaks } => peaks
            .iter()
            .filter(|p| p.weight > 0.0)
            .flat_map(|p| uniform(p.mean - GAUSSIAN_SUPPORT * p.sd, p.mean + GAUSSIAN_SUPPORT * p.sd))
            .collect(),
        Spectrum::Tabulated(_) => spectrum.support().into_iter().flat_map(|(lo, hi)| uniform(lo, hi)).collect(),
    };
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + b.abs()));
    grid
}

pub const PRESET_NAMES: [&str; 4] = ["np_map", "markovian", "non_markovian", "coherence_trapping"];

/// Named scenario with equal polarization amplitudes and `Δn = 1`.
#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub state: CorrelatedPFState,
    /// Time span over which the regime is visible.
    pub horizon: f64,
}

/// Scenario profiles of our own design realizing four dephasing regimes.
///
/// - `np_map`: unit Gaussian, `θ` jumps from 0 to π at the mean, so
///   `κ(0) = 0` and coherence first grows.
/// - `markovian`: unit Gaussian, `θ ≡ 0`.
/// - `non_markovian`: two Gaussians at ±2 (sd 0.5), `θ ≡ 0`; `|κ|` vanishes
///   at `t = π/4` and revives.
/// - `coherence_trapping`: a narrow component (weight 0.8, sd 0.02) on top
///   of a broad one, `θ ≡ 0`; `|κ|` settles near 0.8.
pub fn preset(name: &str) -> Option<Preset> {
    let peak = |weight, mean, sd| GaussianPeak { weight, mean, sd };
    let (spectrum, theta, horizon) = match name {
        "np_map" => (Spectrum::gaussian(0.0, 1.0), PhaseProfile::Step { at: 0.0, below: 0.0, above: std::f64::consts::PI }, 4.0),
        "markovian" => (Spectrum::gaussian(0.0, 1.0), PhaseProfile::zero(), 4.0),
        "non_markovian" => (
            Spectrum::GaussianMixture { peaks: vec![peak(0.5, -2.0, 0.5), peak(0.5, 2.0, 0.5)] },
            PhaseProfile::zero(),
            4.0,
        ),
        "coherence_trapping" => (
            Spectrum::GaussianMixture { peaks: vec![peak(0.8, 0.0, 0.02), peak(0.2, 0.0, 1.0)] },
            PhaseProfile::zero(),
            10.0,
        ),
        _ => return None,
    };
    let name = PRESET_NAMES.into_iter().find(|n| *n == name)?;
    Some(Preset { name, state: CorrelatedPFState::balanced(spectrum, theta), horizon })
}
