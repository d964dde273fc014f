//! Time-local generators, their rate matrices and canonical decay rates.
//!
//! The generator on Bloch vectors is `[L_t] = d[Φ_t]/dt · [Φ_t]⁻¹`. Its
//! superoperator `L(X) = Σ F_α L_αβ Tr[F_β X]` is written in the form
//! `Σ_ab c_ab F_a X F_b` by projecting its Choi matrix onto the vectorized
//! basis. The block `a, b ≥ 1` is the rate matrix; the column `c_a0` gives
//! the Hamiltonian. For a dephasing map only the diagonal generators carry
//! rates, and diagonalizing that block yields the canonical rates and jump
//! operators.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix3};
use num_complex::Complex64;

use crate::basis::HermitianBasis;
use crate::channel::{build_map_matrix, map_derivative, MapMatrix};
use crate::decoherence::{DecoherenceFunction, DecoherenceSet, GaussianPairParams, PAIR_NAMES};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::tolerance::Tolerances;
use crate::{CMatrix, RMatrix};

/// How `d[Φ_t]/dt` is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DtMode {
    #[default]
    Analytic,
    /// Fourth-order central differences with `h = max(1e-6, 1e-6·t)`.
    FiniteDifference,
}

/// Source of map matrices (and optionally their derivatives) in time.
pub trait MapProvider: Sync {
    fn basis(&self) -> &HermitianBasis;
    fn map_matrix(&self, t: f64) -> Result<MapMatrix>;
    fn map_derivative(&self, _t: f64) -> Result<RMatrix> {
        Err(Error::Unsupported("analytic map derivative".into()))
    }
    /// Characteristic inverse time used to scale tolerances.
    fn rate_scale(&self) -> f64;
    /// Known times in `[t0, t1]` where the map is not invertible.
    fn singular_times(&self, _t0: f64, _t1: f64) -> Vec<f64> {
        Vec::new()
    }
}

/// The exact dephasing map of a decoherence set.
#[derive(Clone, Debug)]
pub struct DephasingMap {
    pub ds: DecoherenceSet,
    pub basis: HermitianBasis,
}

impl DephasingMap {
    pub fn new(ds: DecoherenceSet) -> Result<Self> {
        let basis = HermitianBasis::new(ds.dim())?;
        Ok(Self { ds, basis })
    }
}

impl MapProvider for DephasingMap {
    fn basis(&self) -> &HermitianBasis {
        &self.basis
    }

    fn map_matrix(&self, t: f64) -> Result<MapMatrix> {
        build_map_matrix(&self.ds, t, &self.basis)
    }

    fn map_derivative(&self, t: f64) -> Result<RMatrix> {
        map_derivative(&self.ds, t, &self.basis)
    }

    fn rate_scale(&self) -> f64 {
        self.ds.rate_scale()
    }

    fn singular_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.ds.singular_times(t0, t1)
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorEval {
    pub t: f64,
    pub l: RMatrix,
    pub det: f64,
    /// Reciprocal condition number of `[Φ_t]`.
    pub rcond: f64,
}

pub fn fd_step(t: f64) -> f64 {
    (1e-6 * t.abs()).max(1e-6)
}

fn fd_derivative<P: MapProvider + ?Sized>(p: &P, t: f64) -> Result<RMatrix> {
    let h = fd_step(t);
    let m = |s: f64| p.map_matrix(s).map(|mm| mm.m);
    if t - 2.0 * h >= 0.0 {
        Ok((m(t - 2.0 * h)? - m(t + 2.0 * h)? + (m(t + h)? - m(t - h)?) * 8.0) / (12.0 * h))
    } else {
        // one-sided near the origin, where some closed forms have a kink
        let f = [m(t)?, m(t + h)?, m(t + 2.0 * h)?, m(t + 3.0 * h)?, m(t + 4.0 * h)?];
        Ok((&f[0] * -25.0 + &f[1] * 48.0 - &f[2] * 36.0 + &f[3] * 16.0 - &f[4] * 3.0) / (12.0 * h))
    }
}

/// `[L_t] = d[Φ_t]/dt · [Φ_t]⁻¹` via LU with partial pivoting.
pub fn generator_matrix<P: MapProvider + ?Sized>(p: &P, t: f64, mode: DtMode, tol: &Tolerances) -> Result<GeneratorEval> {
    let map = p.map_matrix(t)?;
    if map.is_singular(tol.singular_det) {
        return Err(Error::SingularMap { t, det: map.det });
    }
    let dm = match mode {
        DtMode::Analytic => p.map_derivative(t)?,
        DtMode::FiniteDifference => fd_derivative(p, t)?,
    };
    // L M = dM  ⇔  Mᵀ Lᵀ = dMᵀ
    let lu = map.m.transpose().lu();
    let lt = lu.solve(&dm.transpose()).ok_or(Error::SingularMap { t, det: map.det })?;
    Ok(GeneratorEval { t, l: lt.transpose(), det: map.det, rcond: map.rcond })
}

/// Rate-matrix view of a generator.
#[derive(Clone, Debug)]
pub struct RateDecomposition {
    pub t: f64,
    pub h: CMatrix,
    /// Coefficients `c_ab` for `a, b ≥ 1`.
    pub r15: CMatrix,
    /// Restriction of `r15` to the diagonal generators.
    pub r3: CMatrix,
    pub rates: Vec<f64>,
    pub jumps: Vec<CMatrix>,
    /// Coefficient vectors of `jumps` over the diagonal generators.
    pub vectors: Vec<DVector<Complex64>>,
    /// Largest `|c_ab|` outside the diagonal block.
    pub off_block: f64,
}

impl RateDecomposition {
    pub fn min_rate(&self) -> f64 {
        self.rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Applies the Bloch generator `l` to an operator.
pub fn superoperator_apply(l: &RMatrix, basis: &HermitianBasis, x: &CMatrix) -> CMatrix {
    let b = DVector::from_vec(basis.coefficients(x));
    let a = l.map(Complex64::from) * b;
    basis.combine(a.as_slice())
}

/// Coefficients `c_ab` with `L(X) = Σ_ab c_ab F_a X F_b`.
pub fn process_coefficients(l: &RMatrix, basis: &HermitianBasis) -> CMatrix {
    let d = basis.dim();
    let n = basis.len();
    let mut choi = CMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            let mut e = CMatrix::zeros(d, d);
            e[(i, j)] = Complex64::new(1.0, 0.0);
            let y = superoperator_apply(l, basis, &e);
            for k in 0..d {
                for m in 0..d {
                    choi[(i * d + k, j * d + m)] = y[(k, m)];
                }
            }
        }
    }
    let v = CMatrix::from_fn(n, n, |row, alpha| basis.op(alpha)[(row % d, row / d)]);
    v.adjoint() * choi * v
}

fn max_abs(m: &RMatrix) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (m + m.adjoint()) * Complex64::from(0.5);
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors)
}

/// Rotates `v` so its largest component is real and positive.
fn fix_phase(v: &mut DVector<Complex64>) {
    if let Some(big) = v.iter().cloned().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
        if big.norm() > 0.0 {
            let ph = big.conj() / big.norm();
            v.iter_mut().for_each(|x| *x *= ph);
        }
    }
}

fn jump_from(vec: &DVector<Complex64>, basis: &HermitianBasis) -> CMatrix {
    let d = basis.dim();
    basis
        .diagonal_indices()
        .iter()
        .zip(vec.iter())
        .fold(CMatrix::zeros(d, d), |acc, (&i, c)| acc + basis.op(i) * *c)
}

/// Splits a Bloch generator into Hamiltonian, rate matrix, canonical rates
/// and jump operators. `scale` is a characteristic rate; weight outside the
/// dephasing block above `tol.structure · max(scale, max|L|)` is an error.
pub fn extract_rates(l: &RMatrix, basis: &HermitianBasis, t: f64, scale: f64, tol: &Tolerances) -> Result<RateDecomposition> {
    let n = basis.len();
    if l.nrows() != n || l.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: l.nrows() });
    }
    let thresh = tol.structure * scale.max(max_abs(l));
    let trace_row = l.row(0).iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    if trace_row > thresh {
        return Err(Error::Structure { weight: trace_row });
    }
    let c = process_coefficients(l, basis);
    let diag = basis.diagonal_indices();
    let mut off_block = 0.0_f64;
    for a in 1..n {
        for b in 1..n {
            if !(diag.contains(&a) && diag.contains(&b)) {
                off_block = off_block.max(c[(a, b)].norm());
            }
        }
    }
    if off_block > thresh {
        return Err(Error::Structure { weight: off_block });
    }
    let r15 = c.view((1, 1), (n - 1, n - 1)).into_owned();
    let r3 = CMatrix::from_fn(diag.len(), diag.len(), |i, j| c[(diag[i], diag[j])]);

    let d = basis.dim();
    let sqrt_d = (d as f64).sqrt();
    let a = (1..n).fold(CMatrix::zeros(d, d), |acc, k| acc + basis.op(k) * (c[(k, 0)] / sqrt_d));
    let h = (&a - a.adjoint()) * Complex64::new(0.0, 0.5);

    let (vals, vecs) = hermitian_eigen(&r3);
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let mut rates = Vec::with_capacity(order.len());
    let mut vectors = Vec::with_capacity(order.len());
    for &k in &order {
        let mut v: DVector<Complex64> = vecs.column(k).into_owned();
        fix_phase(&mut v);
        rates.push(vals[k]);
        vectors.push(v);
    }
    let jumps = vectors.iter().map(|v| jump_from(v, basis)).collect();
    Ok(RateDecomposition { t, h, r15, r3, rates, jumps, vectors, off_block })
}

/// Generator evaluation followed by rate extraction.
pub fn rates_at<P: MapProvider + ?Sized>(p: &P, t: f64, mode: DtMode, tol: &Tolerances) -> Result<RateDecomposition> {
    let g = generator_matrix(p, t, mode, tol)?;
    extract_rates(&g.l, p.basis(), t, p.rate_scale(), tol)
}

/// Rate decompositions on a grid; per-time work runs under `exec`.
pub fn rate_grid<P: MapProvider + ?Sized>(
    p: &P,
    times: &[f64],
    mode: DtMode,
    tol: &Tolerances,
    exec: Execution,
) -> Vec<Result<RateDecomposition>> {
    exec.map(times, |&t| rates_at(p, t, mode, tol))
}

/// Jump operators in the order of the analytic rates `(γ₁, γ₂, γ₃)`:
/// `(I⊗σz − σz⊗I)/(2√2)`, `(I⊗σz + σz⊗I)/(2√2)` and `σz⊗σz/2`, or `σ_z/√2`
/// for a single photon.
///
/// `γ₁ = 2(1−K)σ²Δn²t` is the decay rate of the `hv–vh` coherence `Λ_ab`,
/// which only the antisymmetric operator damps; `γ₂` belongs to the
/// `hh–vv` coherence `κ_ab` and the symmetric operator.
pub fn analytic_jumps(dim: usize) -> Result<Vec<CMatrix>> {
    let diag = |v: &[f64]| CMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::from(x))));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match dim {
        2 => Ok(vec![diag(&[s, -s])]),
        4 => Ok(vec![diag(&[0.0, -s, s, 0.0]), diag(&[s, 0.0, 0.0, -s]), diag(&[0.5, -0.5, -0.5, 0.5])]),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// `(γ₁, γ₂, γ₃)` for the single-peak Gaussian.
pub fn rates_single_peak_analytic(p: &GaussianPairParams, dn: f64, t: f64) -> [f64; 3] {
    let s = p.sigma * p.sigma * dn * dn * t;
    [2.0 * (1.0 - p.k) * s, 2.0 * (1.0 + p.k) * s, 0.0]
}

/// Times in `[t0, t1]` where the double-peak rates diverge, i.e.
/// `tΔnΔω = mπ/2` with `m mod 4 ∈ {1, 2, 3}`.
pub fn double_peak_poles(p: &GaussianPairParams, dn: f64, t0: f64, t1: f64) -> Vec<f64> {
    let w = (dn * p.delta_omega).abs();
    if w == 0.0 {
        return Vec::new();
    }
    let first = ((t0 * w) / (PI / 2.0)).ceil().max(1.0) as u64;
    (first..)
        .map(|m| (m, m as f64 * PI / 2.0 / w))
        .take_while(|&(_, z)| z <= t1)
        .filter(|&(m, z)| m % 4 != 0 && z >= t0)
        .map(|(_, z)| z)
        .collect()
}

/// `(γ₁, γ₂, γ₃)` for the double-peak Gaussian. Within `eps` (in units of
/// the pole spacing `π/(2ΔnΔω)`) of a pole the call fails.
pub fn rates_double_peak_analytic(p: &GaussianPairParams, dn: f64, t: f64, eps: f64) -> Result<[f64; 3]> {
    let w = dn * p.delta_omega;
    let spacing = PI / 2.0 / w.abs();
    if w != 0.0 {
        for pole in double_peak_poles(p, dn, (t - spacing).max(0.0), t + spacing) {
            if (t - pole).abs() < eps * spacing {
                return Err(Error::PoleProximity { t, pole });
            }
        }
    }
    let [g1, g2, _] = rates_single_peak_analytic(p, dn, t);
    let x = t * w;
    let g3 = if w == 0.0 { 0.0 } else { 0.5 * (x / 2.0).tan() * (1.0 - 1.0 / x.cos()) * w };
    Ok([g1 + x.tan() * w, g2, g3])
}

/// Whether `t` lies within `eps` pole spacings of a double-peak pole.
pub fn near_double_peak_pole(p: &GaussianPairParams, dn: f64, t: f64, eps: f64) -> bool {
    matches!(rates_double_peak_analytic(p, dn, t, eps), Err(Error::PoleProximity { .. }))
}

/// Closed-form rate matrix on the diagonal generators, written in terms of
/// the logarithmic derivatives `k = κ'/κ` of the four pair functions.
pub fn rate_matrix_closed_form(ds: &DecoherenceSet, t: f64) -> Result<Matrix3<Complex64>> {
    let DecoherenceSet::Pair { functions, .. } = ds else {
        return Err(Error::WrongArity { expected: "bivariate" });
    };
    let k = |i: usize| functions[i].log_derivative(t, PAIR_NAMES[i]);
    let (ka, kb, kab, g) = (k(0)?, k(1)?, k(2)?, k(3)?);
    let i = Complex64::i();
    let s3 = 3f64.sqrt();
    let s6 = 6f64.sqrt();
    let s2 = 2f64.sqrt();

    let r11 = Complex64::from(-kb.re);
    let r12 = (i * (kb.im - ka.im + g.im) + g.re - ka.re) / s3;
    let r13 = (i * (4.0 * ka.im + 2.0 * kb.im - 3.0 * kab.im - g.im) + 4.0 * ka.re - 3.0 * kab.re - g.re) / (2.0 * s6);
    let r22 = Complex64::from((-2.0 * ka.re + kb.re - 2.0 * g.re) / 3.0);
    let r23 = (i * (-3.0 * kab.im + 6.0 * kb.im + 3.0 * g.im) - 4.0 * ka.re - 3.0 * kab.re + 8.0 * kb.re - g.re) / (6.0 * s2);
    let r33 = Complex64::from((-2.0 * ka.re - 3.0 * kab.re - 2.0 * kb.re + g.re) / 6.0);
    Ok(Matrix3::new(r11, r12, r13, r12.conj(), r22, r23, r13.conj(), r23.conj(), r33))
}

/// `(γ, ν) = (−Re κ'/κ, −Im κ'/κ)` for a single photon.
pub fn qubit_rates(kappa: &DecoherenceFunction, t: f64) -> Result<(f64, f64)> {
    let k = kappa.log_derivative(t, "kappa")?;
    Ok((-k.re, -k.im))
}

fn inv_sqrt_psd(m: &CMatrix) -> Option<CMatrix> {
    let (vals, vecs) = hermitian_eigen(m);
    if vals.iter().any(|&v| v <= 1e-14) {
        return None;
    }
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|v| Complex64::from(1.0 / v.sqrt())));
    Some(&vecs * CMatrix::from_diagonal(&d) * vecs.adjoint())
}

/// Reorders (and within degenerate clusters recombines) the eigenpairs of
/// `dec` so that entry `k` continues reference jump `prev[k]`.
///
/// Eigenvalues closer than `cluster_tol` form one cluster. Each reference
/// is assigned to the cluster holding most of its weight; inside a cluster
/// of size one the eigenvector is phase-aligned to `prev`, inside larger
/// clusters the projections of `seed` are orthonormalized symmetrically,
/// which gives the orthonormal set closest to `seed` in Frobenius norm.
pub fn align_rates(dec: &RateDecomposition, basis: &HermitianBasis, prev: &[CMatrix], seed: &[CMatrix], cluster_tol: f64) -> RateDecomposition {
    let m = dec.vectors.len();
    let coeffs = |j: &CMatrix| -> DVector<Complex64> {
        DVector::from_iterator(m, basis.diagonal_indices().iter().map(|&i| crate::basis::trace_product(basis.op(i), j)))
    };
    let prev_v: Vec<_> = prev.iter().map(coeffs).collect();
    let seed_v: Vec<_> = seed.iter().map(coeffs).collect();

    // extract_rates sorts descending, so clusters are contiguous runs
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for j in 0..m {
        match clusters.last_mut() {
            Some(c) if (dec.rates[*c.last().unwrap()] - dec.rates[j]).abs() <= cluster_tol => c.push(j),
            _ => clusters.push(vec![j]),
        }
    }
    let weight = |k: usize, c: &[usize]| c.iter().map(|&j| dec.vectors[j].dotc(&prev_v[k]).norm_sqr()).sum::<f64>();
    let mut pairs: Vec<(f64, usize, usize)> =
        (0..m).flat_map(|k| clusters.iter().enumerate().map(move |(ci, _)| (k, ci))).map(|(k, ci)| (weight(k, &clusters[ci]), k, ci)).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); clusters.len()];
    let mut taken = vec![false; m];
    for (_, k, ci) in pairs {
        if !taken[k] && assigned[ci].len() < clusters[ci].len() {
            taken[k] = true;
            assigned[ci].push(k);
        }
    }

    let mut vectors: Vec<DVector<Complex64>> = vec![DVector::zeros(m); m];
    for (ci, c) in clusters.iter().enumerate() {
        let q = CMatrix::from_columns(&c.iter().map(|&j| dec.vectors[j].clone()).collect::<Vec<_>>());
        let refs = &assigned[ci];
        if c.len() == 1 {
            let mut v = q.column(0).into_owned();
            let ov = v.dotc(&prev_v[refs[0]]);
            if ov.norm() > 0.0 {
                v *= ov / ov.norm();
            }
            vectors[refs[0]] = v;
            continue;
        }
        let r = CMatrix::from_columns(&refs.iter().map(|&k| seed_v[k].clone()).collect::<Vec<_>>());
        let x = &q * (q.adjoint() * r);
        match inv_sqrt_psd(&(x.adjoint() * &x)) {
            Some(s) => {
                let w = x * s;
                for (col, &k) in refs.iter().enumerate() {
                    vectors[k] = w.column(col).into_owned();
                }
            }
            None => {
                for (col, &k) in refs.iter().enumerate() {
                    vectors[k] = q.column(col).into_owned();
                }
            }
        }
    }
    let r3 = &dec.r3;
    let rates = vectors.iter().map(|v| v.dotc(&(r3 * v)).re).collect();
    let jumps = vectors.iter().map(|v| jump_from(v, basis)).collect();
    RateDecomposition { rates, jumps, vectors, ..dec.clone() }
}

/// Sequential continuity pass over per-time results, seeded with `seed`.
pub fn track_rates(decs: &[RateDecomposition], basis: &HermitianBasis, seed: &[CMatrix], cluster_tol: f64) -> Vec<RateDecomposition> {
    let mut prev = seed.to_vec();
    let mut out = Vec::with_capacity(decs.len());
    for d in decs {
        let aligned = align_rates(d, basis, &prev, seed, cluster_tol);
        prev.clone_from(&aligned.jumps);
        out.push(aligned);
    }
    out
}

/// Frobenius distance between two operators up to a global phase.
pub fn phase_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let ov = crate::basis::trace_product(&a.adjoint(), b);
    let ph = if ov.norm() > 0.0 { ov.conj() / ov.norm() } else { Complex64::from(1.0) };
    (a - b * ph).norm()
}

/// `max_ij |A_ij|` for complex matrices.
pub fn cmax(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.norm()))
}

/// `Σ_k γ_k (J_k ρ J_k† − ½{J_k†J_k, ρ}) − i[H, ρ]`.
pub fn lindblad_apply(dec: &RateDecomposition, rho: &CMatrix) -> CMatrix {
    let i = Complex64::i();
    let mut out = (&dec.h * rho - rho * &dec.h) * -i;
    for (g, j) in dec.rates.iter().zip(&dec.jumps) {
        let jd = j.adjoint();
        let jj = &jd * j;
        out += (j * rho * &jd - (&jj * rho + rho * &jj) * Complex64::from(0.5)) * Complex64::from(*g);
    }
    out
}
