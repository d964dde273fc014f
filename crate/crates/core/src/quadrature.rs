//! Globally adaptive Gauss–Kronrod (7/15) quadrature for complex integrands.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

// QUADPACK qk15 abscissae (descending) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Initial panels are no wider than this.
    pub max_panel: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-12, max_panel: f64::INFINITY, max_panels: 20_000 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    Panel { a, b, value, error }
}

/// Integrates `f` over `[a, b]`. `breaks` are forced panel boundaries (points
/// outside `(a, b)` are ignored).
pub fn integrate<F>(f: F, a: f64, b: f64, breaks: &[f64], opts: &QuadOptions) -> Result<Estimate>
where
    F: Fn(f64) -> Complex64,
{
    if b <= a {
        return Ok(Estimate { value: Complex64::new(0.0, 0.0), error: 0.0, panels: 0 });
    }
    let mut edges: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut heap = BinaryHeap::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let n = ((hi - lo) / opts.max_panel).ceil().max(1.0) as usize;
        let h = (hi - lo) / n as f64;
        for k in 0..n {
            let p_lo = lo + k as f64 * h;
            let p_hi = if k + 1 == n { hi } else { lo + (k + 1) as f64 * h };
            heap.push(gk15(&f, p_lo, p_hi));
        }
    }
    if heap.len() > opts.max_panels {
        return Err(Error::Quadrature { a, b, error: f64::INFINITY });
    }

    let total = |heap: &BinaryHeap<Panel>| {
        heap.iter().fold((Complex64::new(0.0, 0.0), 0.0), |(v, e), p| (v + p.value, e + p.error))
    };
    let (mut value, mut error) = total(&heap);
    while error > opts.abs_tol.max(opts.rel_tol * value.norm()) {
        if heap.len() >= opts.max_panels {
            return Err(Error::Quadrature { a, b, error });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(Panel { error: 0.0, ..worst });
        } else {
            let left = gk15(&f, worst.a, mid);
            let right = gk15(&f, mid, worst.b);
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
        }
        // resum periodically to keep the running totals from drifting
        if heap.len() % 64 == 0 {
            (value, error) = total(&heap);
        }
    }
    let (value, error) = total(&heap);
    Ok(Estimate { value, error, panels: heap.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x| Complex64::new(x.powi(5) - 3.0 * x * x, x), 0.0, 2.0, &[], &QuadOptions::default())
            .unwrap();
        assert!((est.value - Complex64::new(64.0 / 6.0 - 8.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn oscillatory_gaussian_transform() {
        // ∫ e^{-x²/2}/√(2π) e^{-i τ x} dx = e^{-τ²/2}
        let tau = 7.0;
        let opts = QuadOptions { max_panel: std::f64::consts::PI / tau, ..QuadOptions::default() };
        let f = |x: f64| {
            let p = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            Complex64::from_polar(p, -tau * x)
        };
        let est = integrate(f, -8.0, 8.0, &[], &opts).unwrap();
        assert!((est.value - Complex64::from((-0.5 * tau * tau).exp())).norm() < 1e-12);
    }

    #[test]
    fn breakpoints_handle_discontinuity() {
        let est = integrate(
            |x| Complex64::from(if x < 0.3 { 1.0 } else { -2.0 }),
            0.0,
            1.0,
            &[0.3, 5.0],
            &QuadOptions::default(),
        )
        .unwrap();
        assert!((est.value.re - (0.3 - 1.4)).abs() < 1e-14);
    }

    #[test]
    fn empty_interval() {
        let est = integrate(|_| Complex64::from(1.0), 1.0, 1.0, &[], &QuadOptions::default()).unwrap();
        assert_eq!(est.value, Complex64::new(0.0, 0.0));
    }
}
