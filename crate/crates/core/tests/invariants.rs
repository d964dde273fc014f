use dephasing_core::basis::build_basis;
use dephasing_core::bplus::{BPlusTerms, CorrelatedPFState};
use dephasing_core::channel::{build_map_matrix, evolve_exact};
use dephasing_core::decoherence::{DecoherenceSet, FrequencySpec, GaussianPairParams, PhaseProfile, Spectrum};
use dephasing_core::generator::{align_rates, analytic_jumps, rates_at, rates_single_peak_analytic, DephasingMap, DtMode};
use dephasing_core::states::{min_eigenvalue, random_density_matrix};
use dephasing_core::Tolerances;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair() -> impl Strategy<Value = (GaussianPairParams, bool)> {
    (-2.0..2.0f64, -3.0..3.0f64, 0.2..2.0f64, -1.0..=1.0f64, any::<bool>())
        .prop_map(|(omega0, delta_omega, sigma, k, double)| (GaussianPairParams { omega0, delta_omega, sigma, k }, double))
}

fn spec((p, double): (GaussianPairParams, bool)) -> FrequencySpec {
    if double {
        FrequencySpec::BiGaussianDouble(p)
    } else {
        FrequencySpec::BiGaussianSingle(p)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bloch_round_trip(seed in any::<u64>(), dim in prop::sample::select(vec![2usize, 4])) {
        let basis = build_basis(dim).unwrap();
        let rho = random_density_matrix(dim, &mut ChaCha8Rng::seed_from_u64(seed));
        let back = basis.from_bloch(&basis.to_bloch(&rho, 1e-10).unwrap()).unwrap();
        prop_assert!((back - rho).camax() < 1e-13);
    }

    #[test]
    fn evolution_is_a_channel(p in pair(), seed in any::<u64>(), t in 0.0..5.0f64) {
        let ds = DecoherenceSet::from_spec(&spec(p), 1.0).unwrap();
        let rho = random_density_matrix(4, &mut ChaCha8Rng::seed_from_u64(seed));
        let out = evolve_exact(&rho, &ds, t).unwrap();
        prop_assert!((out.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!((&out - out.adjoint()).camax() < 1e-12);
        prop_assert!(min_eigenvalue(&out) > -1e-12);
        for i in 0..4 {
            prop_assert!((out[(i, i)] - rho[(i, i)]).norm() < 1e-14);
        }
    }

    #[test]
    fn map_matches_direct_evolution(p in pair(), seed in any::<u64>(), t in 0.0..5.0f64) {
        let ds = DecoherenceSet::from_spec(&spec(p), 1.0).unwrap();
        let basis = build_basis(4).unwrap();
        let rho = random_density_matrix(4, &mut ChaCha8Rng::seed_from_u64(seed));
        let r = build_map_matrix(&ds, t, &basis).unwrap().apply(&basis.to_bloch_unchecked(&rho)).unwrap();
        let direct = basis.to_bloch_unchecked(&evolve_exact(&rho, &ds, t).unwrap());
        prop_assert!((r.r - direct.r).amax() < 1e-12);
    }

    #[test]
    fn single_peak_rates_follow_closed_form(omega0 in -2.0..2.0f64, sigma in 0.3..2.0f64, k in -1.0..=1.0f64, tn in 0.05..3.0f64) {
        let t = tn / sigma;
        let p = GaussianPairParams { omega0, delta_omega: 0.5, sigma, k };
        let map = DephasingMap::new(DecoherenceSet::from_spec(&FrequencySpec::BiGaussianSingle(p), 1.0).unwrap()).unwrap();
        let seed = analytic_jumps(4).unwrap();
        let dec = rates_at(&map, t, DtMode::Analytic, &Tolerances::default()).unwrap();
        let dec = align_rates(&dec, &map.basis, &seed, &seed, 1e-9);
        for (n, a) in dec.rates.iter().zip(rates_single_peak_analytic(&p, 1.0, t)) {
            prop_assert!((n - a).abs() <= 1e-8 * a.abs().max(1.0), "{n} vs {a}");
        }
    }

    #[test]
    fn bplus_reconstruction_is_exact(a in 0.05..0.95f64, ph in 0.0..std::f64::consts::TAU, slope in -2.0..2.0f64, mean in -1.0..1.0f64, t in 0.0..5.0f64) {
        let c_h = Complex64::from_polar(a.sqrt(), ph);
        let c_v = Complex64::new((1.0 - a).sqrt(), 0.0);
        let state = CorrelatedPFState::new(c_h, c_v, Spectrum::gaussian(mean, 1.0), PhaseProfile::Linear { slope, center: 0.0 }).unwrap();
        let terms = BPlusTerms::new(state, 1.0, &Tolerances::default()).unwrap();
        prop_assume!(terms.weights.w_x.abs() > 1e-6 && terms.weights.w_y.abs() > 1e-6);
        let rec = terms.reconstruct(t).unwrap();
        prop_assert!((&rec - terms.direct(t).unwrap()).camax() < 1e-8);
        prop_assert!((rec.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }
}
