//! Structural invariant suite with a JSON-serializable report.
//!
//! Every check draws its random inputs from its own generator seeded from
//! the suite seed and the check index, so reports do not depend on the
//! execution mode.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basis::{build_basis, hermiticity_residual, HermitianBasis};
use crate::bplus::{self, BPlusTerms, PRESET_NAMES};
use crate::channel::{analytic_bloch_double_peak, build_map_matrix, evolve_exact, product_map};
use crate::decoherence::{decoherence_set, spectral_transform, DecoherenceSet, FrequencySpec, GaussianPairParams, Spectrum};
use crate::generator::{
    align_rates, analytic_jumps, phase_distance, rate_matrix_closed_form, rates_at, rates_single_peak_analytic, DephasingMap, DtMode,
    MapProvider,
};
use crate::integrator::{cp_divisibility_report, integrate, regular_grid, IntegratorOptions};
use crate::states::{min_eigenvalue, random_density_matrix};
use crate::{Execution, Result, Tolerances};

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    pub tolerances: Tolerances,
    pub exec: Execution,
    /// Random states per randomized check.
    pub samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, tolerances: Tolerances::default(), exec: Execution::default(), samples: 20 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Observed figure of merit; `null` when the check errored.
    pub value: Option<f64>,
    pub threshold: f64,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub tolerances: Tolerances,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub seconds: f64,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Metric {
    value: f64,
    threshold: f64,
    passed: bool,
    detail: String,
}

/// `value ≤ threshold`
fn at_most(value: f64, threshold: f64, detail: impl Into<String>) -> Metric {
    Metric { value, threshold, passed: value <= threshold, detail: detail.into() }
}

/// `value ≥ threshold`
fn at_least(value: f64, threshold: f64, detail: impl Into<String>) -> Metric {
    Metric { value, threshold, passed: value >= threshold, detail: detail.into() }
}

struct Ctx {
    tol: Tolerances,
    samples: usize,
    rng: ChaCha8Rng,
}

type Check = fn(&mut Ctx) -> Result<Metric>;

const CHECKS: [(&str, Check); 15] = [
    ("basis_orthonormality", basis_orthonormality),
    ("trace_preservation", trace_preservation),
    ("hermiticity", hermiticity),
    ("positivity", positivity),
    ("decoherence_bounds", decoherence_bounds),
    ("quadrature_gaussian", quadrature_gaussian),
    ("factorization_k0", factorization_k0),
    ("single_peak_rates", single_peak_rates),
    ("jump_identity", jump_identity),
    ("closed_form_eigenvalues", closed_form_eigenvalues),
    ("cp_divisibility_verdicts", cp_verdicts),
    ("integrator_vs_exact", integrator_vs_exact),
    ("bplus_reconstruction", bplus_reconstruction),
    ("bplus_theta_independence", bplus_theta_independence),
    ("bath_positivity", bath_positivity),
];

pub fn check_names() -> impl Iterator<Item = &'static str> {
    CHECKS.iter().map(|c| c.0)
}

pub fn run_verify(opts: &VerifyOptions) -> VerifyReport {
    let start = Instant::now();
    let checks = opts.exec.map(&CHECKS.iter().enumerate().collect::<Vec<_>>(), |&(i, &(name, f))| {
        let mut ctx = Ctx {
            tol: opts.tolerances,
            samples: opts.samples.max(1),
            rng: ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)),
        };
        let t0 = Instant::now();
        let outcome = f(&mut ctx);
        let seconds = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(m) => CheckResult { name, passed: m.passed, value: Some(m.value), threshold: m.threshold, detail: m.detail, seconds },
            Err(e) => CheckResult { name, passed: false, value: None, threshold: f64::NAN, detail: e.to_string(), seconds },
        }
    });
    VerifyReport {
        seed: opts.seed,
        tolerances: opts.tolerances,
        passed: checks.iter().all(|c| c.passed),
        checks,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn single(k: f64) -> GaussianPairParams {
    GaussianPairParams { omega0: 1.0, delta_omega: 0.4, sigma: 1.0, k }
}

fn double(k: f64) -> GaussianPairParams {
    GaussianPairParams { omega0: 0.5, delta_omega: 2.0, sigma: 1.0, k }
}

fn pair_map(spec: FrequencySpec) -> Result<DephasingMap> {
    DephasingMap::new(decoherence_set(&spec, 1.0)?)
}

fn test_sets() -> Result<Vec<DecoherenceSet>> {
    [
        FrequencySpec::BiGaussianSingle(single(-0.4)),
        FrequencySpec::BiGaussianSingle(single(1.0)),
        FrequencySpec::BiGaussianDouble(double(0.3)),
        FrequencySpec::UniGaussian { mean: 0.2, sd: 1.0 },
        FrequencySpec::UniLorentzian { center: 0.5, width: 0.3 },
    ]
    .iter()
    .map(|s| DecoherenceSet::from_spec(s, 1.0))
    .collect()
}

/// Evolves random states through the test families and folds `f` over the outputs.
fn evolved_fold(ctx: &mut Ctx, init: f64, f: impl Fn(f64, &crate::CMatrix) -> f64) -> Result<f64> {
    let mut acc = init;
    for ds in test_sets()? {
        for _ in 0..ctx.samples {
            let rho = random_density_matrix(ds.dim(), &mut ctx.rng);
            for i in 0..=6 {
                acc = f(acc, &evolve_exact(&rho, &ds, 0.5 * i as f64)?);
            }
        }
    }
    Ok(acc)
}

fn basis_orthonormality(ctx: &mut Ctx) -> Result<Metric> {
    let defect = [2, 4].iter().map(|&d| build_basis(d).map(|b| b.orthonormality_defect())).collect::<Result<Vec<_>>>()?;
    let worst = defect.into_iter().fold(0.0, f64::max);
    Ok(at_most(worst, ctx.tol.algebraic, "max |Tr(F_a F_b) - δ_ab| for d = 2, 4"))
}

fn trace_preservation(ctx: &mut Ctx) -> Result<Metric> {
    let worst = evolved_fold(ctx, 0.0, |a, rho| a.max((rho.trace() - Complex64::new(1.0, 0.0)).norm()))?;
    let bases = [build_basis(2)?, build_basis(4)?];
    let row = test_sets()?
        .iter()
        .map(|ds| {
            let b = &bases[usize::from(ds.dim() == 4)];
            build_map_matrix(ds, 1.3, b).map(|m| {
                let mut e = (m.m[(0, 0)] - 1.0).abs();
                for j in 1..b.len() {
                    e = e.max(m.m[(0, j)].abs());
                }
                e
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(at_most(worst.max(row), ctx.tol.algebraic, "max |Tr ρ(t) - 1| and first-row defect of M(t)"))
}

fn hermiticity(ctx: &mut Ctx) -> Result<Metric> {
    let worst = evolved_fold(ctx, 0.0, |a, rho| a.max(hermiticity_residual(rho)))?;
    Ok(at_most(worst, ctx.tol.hermiticity, "max |ρ(t) - ρ(t)†|"))
}

fn positivity(ctx: &mut Ctx) -> Result<Metric> {
    let lowest = evolved_fold(ctx, f64::INFINITY, |a, rho| a.min(min_eigenvalue(rho)))?;
    Ok(at_least(lowest, -ctx.tol.hermiticity, "min eigenvalue of evolved random states"))
}

fn decoherence_bounds(ctx: &mut Ctx) -> Result<Metric> {
    let mut worst = 0.0_f64;
    for ds in test_sets()? {
        for f in ds.functions() {
            worst = worst.max((f.value(0.0) - Complex64::new(1.0, 0.0)).norm());
            for i in 0..=40 {
                worst = worst.max(f.value(0.1 * i as f64).norm() - 1.0);
            }
        }
    }
    Ok(at_most(worst, ctx.tol.algebraic, "κ(0) = 1 and |κ(t)| ≤ 1"))
}

fn quadrature_gaussian(ctx: &mut Ctx) -> Result<Metric> {
    let (mean, sd) = (0.7, 1.3);
    let spectrum = Spectrum::gaussian(mean, sd);
    let mut worst = 0.0_f64;
    for i in 0..=20 {
        let tau = 0.25 * i as f64;
        let q = spectral_transform(&spectrum, |_| Complex64::new(1.0, 0.0), &[], tau, ctx.tol.quadrature)?;
        let exact = Complex64::from_polar((-0.5 * (sd * tau).powi(2)).exp(), -mean * tau);
        worst = worst.max((q - exact).norm());
    }
    Ok(at_most(worst, ctx.tol.quadrature, "Gaussian transform vs closed form"))
}

fn factorization_k0(_: &mut Ctx) -> Result<Metric> {
    let p = GaussianPairParams { omega0: 2.0, delta_omega: 0.4, sigma: 1.0, k: 0.0 };
    let pair = decoherence_set(&FrequencySpec::BiGaussianSingle(p), 1.0)?;
    let qa = DecoherenceSet::from_spec(&FrequencySpec::UniGaussian { mean: 1.2, sd: 1.0 }, 1.0)?;
    let qb = DecoherenceSet::from_spec(&FrequencySpec::UniGaussian { mean: 0.8, sd: 1.0 }, 1.0)?;
    let (b2, b4) = (build_basis(2)?, build_basis(4)?);
    let mut worst = 0.0_f64;
    for i in 0..30 {
        let t = 0.1 * i as f64;
        let joint = build_map_matrix(&pair, t, &b4)?.m;
        let prod = product_map(&build_map_matrix(&qa, t, &b2)?.m, &build_map_matrix(&qb, t, &b2)?.m, &b4);
        worst = worst.max((joint - prod).amax());
    }
    Ok(at_most(worst, 1e-10, "max |M_joint - M_a ⊗ M_b| over 30 times at K = 0"))
}

fn single_peak_rates(ctx: &mut Ctx) -> Result<Metric> {
    let mut worst = 0.0_f64;
    for k in [-1.0, 0.0, 1.0] {
        let map = pair_map(FrequencySpec::BiGaussianSingle(single(k)))?;
        let seed = analytic_jumps(4)?;
        for i in 1..=20 {
            let t = 0.15 * i as f64;
            let dec = align_rates(&rates_at(&map, t, DtMode::Analytic, &ctx.tol)?, &map.basis, &seed, &seed, 1e-9);
            let expect = rates_single_peak_analytic(&single(k), 1.0, t);
            for (a, b) in dec.rates.iter().zip(expect) {
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
        }
    }
    Ok(at_most(worst, 1e-6, "extracted vs closed-form single-peak rates, K ∈ {-1, 0, 1}"))
}

fn jump_identity(ctx: &mut Ctx) -> Result<Metric> {
    let map = pair_map(FrequencySpec::BiGaussianSingle(single(0.5)))?;
    let seed = analytic_jumps(4)?;
    let mut worst = 0.0_f64;
    for i in 1..=10 {
        let t = 0.3 * i as f64;
        let dec = align_rates(&rates_at(&map, t, DtMode::Analytic, &ctx.tol)?, &map.basis, &seed, &seed, 1e-9);
        for (j, s) in dec.jumps.iter().zip(&seed) {
            worst = worst.max(phase_distance(j, s));
        }
    }
    Ok(at_most(worst, 1e-6, "Frobenius distance of extracted jumps to the analytic ones, up to phase"))
}

fn closed_form_eigenvalues(ctx: &mut Ctx) -> Result<Metric> {
    let mut worst = 0.0_f64;
    for spec in [
        FrequencySpec::BiGaussianSingle(single(0.5)),
        FrequencySpec::BiGaussianSingle(single(-1.0)),
        FrequencySpec::BiGaussianDouble(double(0.0)),
        FrequencySpec::BiGaussianDouble(double(-0.6)),
    ] {
        let map = pair_map(spec)?;
        for _ in 0..ctx.samples {
            let t = ctx.rng.random_range(0.05..0.7);
            let cf = rate_matrix_closed_form(&map.ds, t)?;
            let cf = nalgebra::DMatrix::from_fn(3, 3, |i, j| cf[(i, j)]);
            let mut ev: Vec<f64> = hermitian_eigenvalues(&cf);
            let mut rates = rates_at(&map, t, DtMode::Analytic, &ctx.tol)?.rates;
            ev.sort_by(f64::total_cmp);
            rates.sort_by(f64::total_cmp);
            for (a, b) in ev.iter().zip(&rates) {
                worst = worst.max((a - b).abs() / b.abs().max(1.0));
            }
        }
    }
    Ok(at_most(worst, 1e-8, "eigenvalues of the closed-form rate matrix vs extracted rates"))
}

fn hermitian_eigenvalues(m: &crate::CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().cloned().collect()
}

fn cp_verdicts(ctx: &mut Ctx) -> Result<Metric> {
    let seq = Execution::Sequential;
    let single_map = pair_map(FrequencySpec::BiGaussianSingle(single(0.2)))?;
    let grid = regular_grid(&single_map, 0.0, 3.0, 40, ctx.tol.pole_epsilon);
    let s = cp_divisibility_report(&single_map, &grid, DtMode::Analytic, &ctx.tol, seq)?;

    let double_map = pair_map(FrequencySpec::BiGaussianDouble(double(0.0)))?;
    let grid = regular_grid(&double_map, 0.0, 3.0, 60, ctx.tol.pole_epsilon);
    let d = cp_divisibility_report(&double_map, &grid, DtMode::Analytic, &ctx.tol, seq)?;

    let lor = DephasingMap::new(DecoherenceSet::from_spec(&FrequencySpec::UniLorentzian { center: 0.5, width: 0.2 }, 1.0)?)?;
    let grid: Vec<f64> = (0..20).map(|i| 0.25 * i as f64).collect();
    let l = cp_divisibility_report(&lor, &grid, DtMode::Analytic, &ctx.tol, seq)?;

    let verdicts = [s.cp_divisible, !d.cp_divisible && !d.negative_intervals.is_empty(), l.cp_divisible && l.semigroup];
    let wrong = verdicts.iter().filter(|v| !**v).count();
    Ok(at_most(
        wrong as f64,
        0.0,
        format!(
            "single-peak CP-divisible: {}, double-peak CP-divisible: {}, Lorentzian semigroup: {}",
            s.cp_divisible, d.cp_divisible, l.semigroup
        ),
    ))
}

fn random_bloch(basis: &HermitianBasis, rng: &mut ChaCha8Rng) -> crate::basis::BlochVector {
    basis.to_bloch_unchecked(&random_density_matrix(basis.dim(), rng))
}

fn integrator_vs_exact(ctx: &mut Ctx) -> Result<Metric> {
    let opts = IntegratorOptions::from_tolerances(&ctx.tol);
    let single_map = pair_map(FrequencySpec::BiGaussianSingle(single(0.5)))?;
    let dp = double(0.0);
    let double_map = pair_map(FrequencySpec::BiGaussianDouble(dp))?;
    let n = ctx.samples.min(4);
    let mut worst = 0.0_f64;
    let mut bridges = 0;
    for _ in 0..n {
        let r0 = random_bloch(&single_map.basis, &mut ctx.rng);
        let tr = integrate(&r0, &single_map, 3.0, &opts)?;
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let e = single_map.map_matrix(*t)?.apply(&r0)?;
            worst = worst.max((&s.r - e.r).amax());
        }
        let r0 = random_bloch(&double_map.basis, &mut ctx.rng);
        let tr = integrate(&r0, &double_map, 3.0, &opts)?;
        bridges += tr.bridges.len();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let e = analytic_bloch_double_peak(&r0, &dp, 1.0, *t)?;
            worst = worst.max((&s.r - e.r).amax());
        }
    }
    let mut m = at_most(worst, 1e-6, format!("sup trajectory error, {bridges} singular times crossed"));
    m.passed &= bridges > 0;
    Ok(m)
}

fn random_amplitudes(base: bplus::CorrelatedPFState, rng: &mut ChaCha8Rng) -> bplus::CorrelatedPFState {
    let a: f64 = rng.random_range(0.05..0.95);
    let (ph, pv): (f64, f64) = (rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.0..std::f64::consts::TAU));
    bplus::CorrelatedPFState { c_h: Complex64::from_polar(a.sqrt(), ph), c_v: Complex64::from_polar((1.0 - a).sqrt(), pv), ..base }
}

fn bplus_reconstruction(ctx: &mut Ctx) -> Result<Metric> {
    let mut worst = 0.0_f64;
    let mut trace = 0.0_f64;
    for i in 0..ctx.samples {
        let preset = bplus::preset(PRESET_NAMES[i % PRESET_NAMES.len()]).expect("known preset");
        let terms = BPlusTerms::new(random_amplitudes(preset.state, &mut ctx.rng), 1.0, &ctx.tol)?;
        for j in 0..20 {
            let t = preset.horizon * j as f64 / 19.0;
            let rec = terms.reconstruct(t)?;
            worst = worst.max((&rec - terms.direct(t)?).camax());
            trace = trace.max((rec.trace() - Complex64::new(1.0, 0.0)).norm());
        }
    }
    let mut m = at_most(worst, 1e-8, format!("three-term vs direct reduced state; trace defect {trace:e}"));
    m.passed &= trace < 1e-12;
    Ok(m)
}

fn bplus_theta_independence(ctx: &mut Ctx) -> Result<Metric> {
    let base = bplus::preset("markovian").expect("known preset").state;
    let np = bplus::preset("np_map").expect("known preset").state;
    let a = BPlusTerms::new(base, 1.0, &ctx.tol)?;
    let b = BPlusTerms::new(np, 1.0, &ctx.tol)?;
    let mut differ = 0;
    for i in 0..20 {
        let t = 0.2 * i as f64;
        if a.kappa0(t)? != b.kappa0(t)? {
            differ += 1;
        }
    }
    Ok(at_most(differ as f64, 0.0, "κ₀ bit-identical under a change of θ"))
}

fn bath_positivity(ctx: &mut Ctx) -> Result<Metric> {
    let mut lowest = f64::INFINITY;
    for name in PRESET_NAMES {
        let state = bplus::preset(name).expect("known preset").state;
        let env = bplus::environment_terms_on_grid(&state, &bplus::support_grid(&state.spectrum, 128), &ctx.tol)?;
        for k in env.kernels.iter().flatten() {
            lowest = lowest.min(min_eigenvalue(k));
        }
    }
    Ok(at_least(lowest, -1e-8, "min eigenvalue of discretized environment kernels, all presets"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let report = run_verify(&VerifyOptions { samples: 4, ..VerifyOptions::default() });
        for c in &report.checks {
            assert!(c.passed, "{}: {:?} > {} ({})", c.name, c.value, c.threshold, c.detail);
        }
        assert_eq!(report.checks.len(), check_names().count());
    }

    #[test]
    fn strict_profile_passes() {
        let tolerances = Tolerances::profile("strict").unwrap();
        assert!(run_verify(&VerifyOptions { tolerances, samples: 2, ..VerifyOptions::default() }).passed);
    }

    #[test]
    fn tolerance_below_floor_is_reported() {
        let tolerances = Tolerances { quadrature: 1e-17, ..Tolerances::default() };
        let report = run_verify(&VerifyOptions { tolerances, samples: 2, ..VerifyOptions::default() });
        assert!(!report.passed);
        assert!(report.failures().any(|c| c.name == "quadrature_gaussian"));
    }

    #[test]
    fn report_is_mode_independent() {
        let run = |exec| {
            let r = run_verify(&VerifyOptions { exec, samples: 2, seed: 11, ..VerifyOptions::default() });
            r.checks.into_iter().map(|c| (c.name, c.passed, c.value.map(f64::to_bits))).collect::<Vec<_>>()
        };
        assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
    }
}
