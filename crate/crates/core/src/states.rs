//! Named polarization states and random density matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::CMatrix;

/// `[I, σx, σy, σz]` in the `{|h>, |v>}` basis.
pub fn pauli() -> [CMatrix; 4] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    [
        DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]),
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
    ]
}

pub fn projector(psi: &[Complex64]) -> CMatrix {
    let n = psi.len();
    DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj())
}

/// Looks up a named pure state. Two-photon states use the order `hh, hv, vh, vv`.
pub fn preset(name: &str) -> Result<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = |x: f64| Complex64::new(x, 0.0);
    let psi: Vec<Complex64> = match name {
        "h" => vec![c(1.0), c(0.0)],
        "v" => vec![c(0.0), c(1.0)],
        "plus_state" => vec![c(s), c(s)],
        "bell_phi_plus" => vec![c(s), c(0.0), c(0.0), c(s)],
        "bell_phi_minus" => vec![c(s), c(0.0), c(0.0), c(-s)],
        "bell_psi_plus" => vec![c(0.0), c(s), c(s), c(0.0)],
        "bell_psi_minus" => vec![c(0.0), c(s), c(-s), c(0.0)],
        "plus_plus" => vec![c(0.5); 4],
        "hh" => vec![c(1.0), c(0.0), c(0.0), c(0.0)],
        _ => return Err(Error::InvalidSpec(format!("unknown state preset `{name}`"))),
    };
    Ok(projector(&psi))
}

pub const PRESET_NAMES: &[&str] = &[
    "h",
    "v",
    "plus_state",
    "bell_phi_plus",
    "bell_phi_minus",
    "bell_psi_plus",
    "bell_psi_minus",
    "plus_plus",
    "hh",
];

/// Random full-rank density matrix `G G† / Tr[G G†]` with a complex Gaussian-like `G`.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_states_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in [2, 4] {
            for _ in 0..20 {
                let rho = random_density_matrix(dim, &mut rng);
                assert!((rho.trace() - Complex64::from(1.0)).norm() < 1e-14);
                assert!(min_eigenvalue(&rho) > -1e-14);
            }
        }
    }

    #[test]
    fn presets_are_pure() {
        for name in PRESET_NAMES {
            let rho = preset(name).unwrap();
            assert!(((&rho * &rho) - &rho).camax() < 1e-15, "{name}");
        }
        assert!(preset("nope").is_err());
    }
}
