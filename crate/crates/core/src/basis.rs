//! Orthonormal Hermitian operator bases and generalized Bloch vectors.
//!
//! For `dim = 2` the basis is `{I, σx, σy, σz} / √2`.
//!
//! For `dim = 4` the basis is the identity `I/2` followed by the fifteen
//! generalized Gell-Mann generators of SU(4), normalized to
//! `Tr[F_i F_j] = δ_ij` and ordered level by level: for each `k = 1, 2, 3`
//! the symmetric and antisymmetric pairs `(j, k)` with `j < k`, interleaved
//! as `sym(0,k), asym(0,k), sym(1,k), asym(1,k), …`, then the diagonal
//! generator of level `k`. With levels `|hh>, |hv>, |vh>, |vv>` this gives
//!
//! | index | operator     | index | operator     |
//! |-------|--------------|-------|--------------|
//! | 0     | I/2          | 8     | diag level 2 |
//! | 1, 2  | sym/asym(0,1)| 9, 10 | (0,3)        |
//! | 3     | diag level 1 | 11, 12| (1,3)        |
//! | 4, 5  | (0,2)        | 13, 14| (2,3)        |
//! | 6, 7  | (1,2)        | 15    | diag level 3 |
//!
//! so the population-only (diagonal) generators sit at indices 3, 8 and 15.
//! Their span equals that of `I⊗σz`, `σz⊗I` and `σz⊗σz`. Code that needs
//! the dephasing subspace asks [`HermitianBasis::diagonal_indices`] instead
//! of hard-coding these numbers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::CMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug)]
pub struct HermitianBasis {
    dim: usize,
    ops: Vec<CMatrix>,
    diagonal: Vec<usize>,
}

/// Real coordinates `r_α = Tr[F_α ρ]` of an operator in a [`HermitianBasis`].
#[derive(Clone, Debug, PartialEq)]
pub struct BlochVector {
    pub dim: usize,
    pub r: DVector<f64>,
}

impl BlochVector {
    pub fn new(dim: usize, r: DVector<f64>) -> Self {
        Self { dim, r }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.r.as_slice()
    }
}

pub fn build_basis(dim: usize) -> Result<HermitianBasis> {
    HermitianBasis::new(dim)
}

fn unit(dim: usize, i: usize, j: usize) -> CMatrix {
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    m[(i, j)] = ONE;
    m
}

impl HermitianBasis {
    pub fn new(dim: usize) -> Result<Self> {
        if dim != 2 && dim != 4 {
            return Err(Error::UnsupportedDimension(dim));
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut ops = vec![CMatrix::identity(dim, dim) / Complex64::from((dim as f64).sqrt())];
        let mut diagonal = Vec::with_capacity(dim - 1);
        for k in 1..dim {
            for j in 0..k {
                let (ejk, ekj) = (unit(dim, j, k), unit(dim, k, j));
                ops.push((&ejk + &ekj) * Complex64::from(s));
                ops.push((ejk * -I + ekj * I) * Complex64::from(s));
            }
            let kf = k as f64;
            let norm = 1.0 / (kf * (kf + 1.0)).sqrt();
            let mut d = DMatrix::from_element(dim, dim, ZERO);
            for j in 0..k {
                d[(j, j)] = Complex64::from(norm);
            }
            d[(k, k)] = Complex64::from(-kf * norm);
            diagonal.push(ops.len());
            ops.push(d);
        }
        Ok(Self { dim, ops, diagonal })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis operators, `dim²`.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn op(&self, i: usize) -> &CMatrix {
        &self.ops[i]
    }

    /// Indices of the non-identity diagonal elements (the dephasing subspace).
    pub fn diagonal_indices(&self) -> &[usize] {
        &self.diagonal
    }

    /// `Tr[F_α X]` for every basis element. Valid for any (also non-Hermitian) `X`.
    pub fn coefficients(&self, x: &CMatrix) -> Vec<Complex64> {
        self.ops.iter().map(|f| trace_product(f, x)).collect()
    }

    /// `Σ_α c_α F_α`.
    pub fn combine(&self, coeffs: &[Complex64]) -> CMatrix {
        let mut out = DMatrix::from_element(self.dim, self.dim, ZERO);
        for (c, f) in coeffs.iter().zip(&self.ops) {
            if *c != ZERO {
                out += f * *c;
            }
        }
        out
    }

    pub fn to_bloch(&self, rho: &CMatrix, hermiticity_tol: f64) -> Result<BlochVector> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: rho.nrows() });
        }
        let residual = hermiticity_residual(rho);
        if residual > hermiticity_tol {
            return Err(Error::NotHermitian { residual });
        }
        Ok(self.to_bloch_unchecked(rho))
    }

    /// Skips the Hermiticity check; imaginary parts of the traces are discarded.
    pub fn to_bloch_unchecked(&self, rho: &CMatrix) -> BlochVector {
        let r = DVector::from_iterator(self.ops.len(), self.ops.iter().map(|f| trace_product(f, rho).re));
        BlochVector::new(self.dim, r)
    }

    pub fn from_bloch(&self, r: &BlochVector) -> Result<CMatrix> {
        if r.len() != self.ops.len() {
            return Err(Error::LengthMismatch { expected: self.ops.len(), found: r.len() });
        }
        let coeffs: Vec<Complex64> = r.r.iter().map(|&x| Complex64::from(x)).collect();
        Ok(self.combine(&coeffs))
    }

    /// `max_{i,j} |Tr[F_i† F_j] - δ_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.ops.iter().enumerate() {
            let a_dag = a.adjoint();
            for (j, b) in self.ops.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((trace_product(&a_dag, b) - target).norm());
            }
        }
        worst
    }
}

/// `Tr[A B]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{pauli, random_density_matrix};
    use nalgebra::{Matrix3, Vector3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.kronecker(b)
    }

    #[test]
    fn rejects_unsupported_dimension() {
        let err = HermitianBasis::new(3).unwrap_err();
        assert!(err.to_string().contains('3'));
    }

    #[test]
    fn qubit_basis_is_normalized_pauli_set() {
        let b = HermitianBasis::new(2).unwrap();
        let s = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
        let [id, x, y, z] = pauli();
        for (op, expect) in b.ops().iter().zip([id, x, y, z]) {
            assert!((op - expect * s).norm() < 1e-15);
        }
        assert_eq!(b.diagonal_indices(), &[3]);
    }

    #[test]
    fn orthonormal_and_hermitian() {
        for dim in [2, 4] {
            let b = HermitianBasis::new(dim).unwrap();
            assert!(b.orthonormality_defect() < 1e-12);
            for op in b.ops() {
                assert!(hermiticity_residual(op) < 1e-15);
            }
            let id = CMatrix::identity(dim, dim) / Complex64::from((dim as f64).sqrt());
            assert!((b.op(0) - id).norm() < 1e-15);
        }
    }

    #[test]
    fn diagonal_generators_reconstruct_sigma_z_products() {
        let b = HermitianBasis::new(4).unwrap();
        assert_eq!(b.diagonal_indices(), &[3, 8, 15]);
        let [id, _, _, z] = pauli();
        let targets = [kron(&z, &id), kron(&id, &z), kron(&z, &z)];
        // Solve the 3x3 system of diagonal entries (rows hv, vh, vv) and check the residual
        // on all four diagonal entries.
        let diag = b.diagonal_indices();
        let mut a = Matrix3::zeros();
        for (c, &k) in diag.iter().enumerate() {
            for r in 0..3 {
                a[(r, c)] = b.op(k)[(r + 1, r + 1)].re;
            }
        }
        let lu = a.lu();
        for target in &targets {
            let rhs = Vector3::new(target[(1, 1)].re, target[(2, 2)].re, target[(3, 3)].re);
            let x = lu.solve(&rhs).unwrap();
            let mut rebuilt = DMatrix::from_element(4, 4, ZERO);
            for (c, &k) in diag.iter().enumerate() {
                rebuilt += b.op(k) * Complex64::from(x[c]);
            }
            assert!((rebuilt - target).camax() < 1e-12);
        }
    }

    #[test]
    fn maximally_mixed_state() {
        let b = HermitianBasis::new(4).unwrap();
        let rho = CMatrix::identity(4, 4) / Complex64::from(4.0);
        let r = b.to_bloch(&rho, 1e-10).unwrap();
        assert!((r.r[0] - 0.5).abs() < 1e-15);
        assert!(r.r.iter().skip(1).all(|x| x.abs() < 1e-15));
        let back = b.from_bloch(&r).unwrap();
        assert!((back - rho).camax() < 1e-15);
    }

    #[test]
    fn population_state_lives_on_diagonal_generators() {
        let b = HermitianBasis::new(4).unwrap();
        let rho = unit(4, 0, 0);
        let r = b.to_bloch(&rho, 1e-10).unwrap();
        assert!((r.r[0] - 0.5).abs() < 1e-15);
        for (i, x) in r.r.iter().enumerate() {
            if i != 0 && !b.diagonal_indices().contains(&i) {
                assert_eq!(*x, 0.0);
            }
        }
        // |hh><hh| = I/4 + (d1/√2 + d2/√6 + d3/√12), see the diagonal generator formula
        assert!((r.r[3] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((r.r[8] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((r.r[15] - 1.0 / 12f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn round_trip_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in [2, 4] {
            let b = HermitianBasis::new(dim).unwrap();
            for _ in 0..100 {
                let rho = random_density_matrix(dim, &mut rng);
                let r = b.to_bloch(&rho, 1e-10).unwrap();
                assert!((r.r[0] - 1.0 / (dim as f64).sqrt()).abs() < 1e-12);
                let imag = b.coefficients(&rho).iter().map(|c| c.im.abs()).fold(0.0, f64::max);
                assert!(imag < 1e-12);
                let back = b.from_bloch(&r).unwrap();
                assert!((back - &rho).camax() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_hermitian_and_wrong_length() {
        let b = HermitianBasis::new(2).unwrap();
        let m = unit(2, 0, 1);
        assert!(matches!(b.to_bloch(&m, 1e-10), Err(Error::NotHermitian { .. })));
        let short = BlochVector::new(2, DVector::zeros(3));
        assert!(matches!(b.from_bloch(&short), Err(Error::LengthMismatch { expected: 4, found: 3 })));
    }
}
