use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Algebraic identities (orthonormality, trace preservation, round trips).
    pub algebraic: f64,
    /// Accepted deviation from Hermiticity on inputs.
    pub hermiticity: f64,
    /// Absolute target of the adaptive quadrature.
    pub quadrature: f64,
    /// Accepted normalization defect of tabulated distributions.
    pub normalization: f64,
    /// Reciprocal condition number of `M(t)` below this flags a non-invertible map.
    pub singular_det: f64,
    /// Half-width of the excluded window around rate poles, in units of the pole spacing.
    pub pole_epsilon: f64,
    /// Rates above `-rate_sign` count as non-negative.
    pub rate_sign: f64,
    /// Relative weight allowed outside the dephasing block of the rate matrix.
    pub structure: f64,
    /// B+ weights below this are treated as vanishing.
    pub degenerate_weight: f64,
    pub rk_rtol: f64,
    pub rk_atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebraic: 1e-12,
            hermiticity: 1e-10,
            quadrature: 1e-10,
            normalization: 1e-8,
            singular_det: 1e-12,
            pole_epsilon: 1e-3,
            rate_sign: 1e-9,
            structure: 1e-9,
            degenerate_weight: 1e-12,
            rk_rtol: 1e-8,
            rk_atol: 1e-10,
        }
    }
}

impl Tolerances {
    /// Looks up a named profile: `default`, `strict` or `loose`.
    pub fn profile(name: &str) -> Option<Self> {
        let base = Self::default();
        match name {
            "default" => Some(base),
            "strict" => Some(Self {
                algebraic: 1e-14,
                quadrature: 1e-13,
                normalization: 1e-12,
                ..base
            }),
            "loose" => Some(Self {
                algebraic: 1e-9,
                hermiticity: 1e-8,
                quadrature: 1e-8,
                normalization: 1e-6,
                ..base
            }),
            _ => None,
        }
    }
}
