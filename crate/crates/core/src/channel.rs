//! The exact dephasing channel and its matrix on generalized Bloch vectors.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::basis::{BlochVector, HermitianBasis};
use crate::decoherence::{DecoherenceSet, GaussianPairParams};
use crate::error::{Error, Result};
use crate::states::pauli;
use crate::{CMatrix, RMatrix};

/// Multiplier of one density-matrix entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    One,
    /// `functions()[i]`
    F(usize),
    /// complex conjugate of `functions()[i]`
    Conj(usize),
}

use Factor::{Conj, One, F};

const QUBIT_TABLE: [[Factor; 2]; 2] = [[One, F(0)], [Conj(0), One]];

// Levels hh, hv, vh, vv; functions κ_a, κ_b, κ_ab, Λ_ab.
const PAIR_TABLE: [[Factor; 4]; 4] = [
    [One, F(1), F(0), F(2)],
    [Conj(1), One, F(3), F(0)],
    [Conj(0), Conj(3), One, F(1)],
    [Conj(2), Conj(0), Conj(1), One],
];

/// Entry-wise multiplier table for a `dim`-level system.
pub fn channel_table(dim: usize) -> Result<Vec<Vec<Factor>>> {
    match dim {
        2 => Ok(QUBIT_TABLE.iter().map(|r| r.to_vec()).collect()),
        4 => Ok(PAIR_TABLE.iter().map(|r| r.to_vec()).collect()),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Matrix of entry-wise multipliers at time `t`, or of their time
/// derivatives when `derivative` is set.
pub fn factor_matrix(ds: &DecoherenceSet, t: f64, derivative: bool) -> CMatrix {
    let dim = ds.dim();
    let fns = ds.functions();
    let vals: Vec<Complex64> =
        fns.iter().map(|f| if derivative { f.derivative(t) } else { f.value(t) }).collect();
    let one = if derivative { Complex64::new(0.0, 0.0) } else { Complex64::new(1.0, 0.0) };
    let table = channel_table(dim).expect("decoherence sets have dimension 2 or 4");
    CMatrix::from_fn(dim, dim, |i, j| match table[i][j] {
        One => one,
        F(k) => vals[k],
        Conj(k) => vals[k].conj(),
    })
}

/// Orthogonal change of coordinates from the product basis
/// `(σ_i/√2) ⊗ (σ_j/√2)` (column `4i + j`) to the two-qubit basis `basis`.
pub fn product_basis_transform(basis: &HermitianBasis) -> RMatrix {
    let pl = pauli();
    let mut tmat = RMatrix::zeros(16, 16);
    for i in 0..4 {
        for j in 0..4 {
            let prod = pl[i].kronecker(&pl[j]) * Complex64::from(0.5);
            for (a, c) in basis.coefficients(&prod).into_iter().enumerate() {
                tmat[(a, 4 * i + j)] = c.re;
            }
        }
    }
    tmat
}

/// Bloch matrix of `M_a ⊗ M_b` expressed in the two-qubit basis `basis`.
pub fn product_map(ma: &RMatrix, mb: &RMatrix, basis: &HermitianBasis) -> RMatrix {
    let tmat = product_basis_transform(basis);
    &tmat * ma.kronecker(mb) * tmat.transpose()
}

/// Applies the channel to `rho0`.
pub fn evolve_exact(rho0: &CMatrix, ds: &DecoherenceSet, t: f64) -> Result<CMatrix> {
    let dim = ds.dim();
    if rho0.nrows() != dim || rho0.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rho0.nrows() });
    }
    Ok(rho0.component_mul(&factor_matrix(ds, t, false)))
}

/// Real matrix of the channel on Bloch vectors, `r(t) = M(t) r(0)`.
#[derive(Clone, Debug)]
pub struct MapMatrix {
    pub dim: usize,
    pub t: f64,
    pub m: RMatrix,
    pub det: f64,
    /// Reciprocal 1-norm condition number, `1 / (‖M‖₁ ‖M⁻¹‖₁)`; zero when LU fails.
    pub rcond: f64,
}

impl MapMatrix {
    pub fn apply(&self, r: &BlochVector) -> Result<BlochVector> {
        if r.len() != self.m.ncols() {
            return Err(Error::LengthMismatch { expected: self.m.ncols(), found: r.len() });
        }
        Ok(BlochVector::new(self.dim, &self.m * &r.r))
    }

    /// The raw determinant is a product of twelve coherence amplitudes and
    /// underflows under ordinary Gaussian decay, so the probe uses `rcond`,
    /// which tracks the smallest amplitude.
    pub fn is_singular(&self, threshold: f64) -> bool {
        self.rcond < threshold
    }
}

fn check_basis(ds: &DecoherenceSet, basis: &HermitianBasis) -> Result<()> {
    if basis.dim() != ds.dim() {
        return Err(Error::DimensionMismatch { expected: ds.dim(), found: basis.dim() });
    }
    Ok(())
}

/// Column `β` is the Bloch vector of the channel (multiplier matrix
/// `factors`) applied to `F_β`.
pub fn bloch_matrix(factors: &CMatrix, basis: &HermitianBasis) -> RMatrix {
    let n = basis.len();
    let mut m = RMatrix::zeros(n, n);
    for (beta, f) in basis.ops().iter().enumerate() {
        let image = f.component_mul(factors);
        for (alpha, c) in basis.coefficients(&image).into_iter().enumerate() {
            m[(alpha, beta)] = c.re;
        }
    }
    m
}

pub fn build_map_matrix(ds: &DecoherenceSet, t: f64, basis: &HermitianBasis) -> Result<MapMatrix> {
    check_basis(ds, basis)?;
    let m = bloch_matrix(&factor_matrix(ds, t, false), basis);
    Ok(map_from_matrix(ds.dim(), t, m))
}

pub fn norm1(m: &RMatrix) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub(crate) fn map_from_matrix(dim: usize, t: f64, m: RMatrix) -> MapMatrix {
    let lu = m.clone().lu();
    let det = lu.determinant();
    let rcond = match lu.try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) => 1.0 / (norm1(&m) * norm1(&inv)),
        _ => 0.0,
    };
    MapMatrix { dim, t, m, det, rcond }
}

/// `dM/dt` from the analytic derivatives of the decoherence functions.
pub fn map_derivative(ds: &DecoherenceSet, t: f64, basis: &HermitianBasis) -> Result<RMatrix> {
    check_basis(ds, basis)?;
    Ok(bloch_matrix(&factor_matrix(ds, t, true), basis))
}

/// Closed-form Bloch evolution under the double-peak Gaussian, written
/// directly in the nested basis ordering (components are 0-based here).
pub fn analytic_bloch_double_peak(r0: &BlochVector, params: &GaussianPairParams, dn: f64, t: f64) -> Result<BlochVector> {
    if r0.len() != 16 {
        return Err(Error::LengthMismatch { expected: 16, found: r0.len() });
    }
    let s2 = params.sigma * params.sigma * dn * dn * t * t;
    let g0 = (-s2 / 2.0).exp();
    let gp = (-s2 * (1.0 + params.k)).exp();
    let gm = (-s2 * (1.0 - params.k)).exp();
    let big_dw = dn * params.delta_omega;
    let big_w0 = dn * params.omega0;
    let r = r0.as_slice();
    let mut out = r.to_vec();

    let rotate = |out: &mut [f64], i: usize, amp: f64, phase: f64| {
        let (s, c) = phase.sin_cos();
        out[i] = amp * (c * r[i] - s * r[i + 1]);
        out[i + 1] = amp * (c * r[i + 1] + s * r[i]);
    };
    let local = g0 * (t * big_dw / 2.0).cos();
    for i in [1, 4, 11, 13] {
        rotate(&mut out, i, local, t * big_w0 / 2.0);
    }
    rotate(&mut out, 9, gp, t * big_w0);
    let cross = gm * (t * big_dw).cos();
    out[6] = cross * r[6];
    out[7] = cross * r[7];
    Ok(BlochVector::new(4, DVector::from_vec(out)))
}
