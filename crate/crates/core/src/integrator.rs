//! Master-equation integration in Bloch space, `dr/dt = [L_t] r`.
//!
//! Stepping uses the Dormand–Prince 5(4) pair. Where the map is not
//! invertible the generator diverges, so a window of half-width
//! `ε · spacing` around every such time is crossed with the exact map
//! instead: `r(t₊) = M(t₊) r(0)`. For families without closed-form zeros a
//! bridge is opened on the fly when the map becomes singular or the
//! generator exceeds `rate_limit · σΔn`.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::basis::BlochVector;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::export::{csv_string, write_atomic, write_json};
use crate::generator::{extract_rates, generator_matrix, DtMode, MapProvider};
use crate::tolerance::Tolerances;
use crate::RMatrix;

#[derive(Clone, Debug)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub mode: DtMode,
    /// Bridge half-width in units of the singular-time spacing.
    pub pole_epsilon: f64,
    /// Generator entries above `rate_limit · rate_scale` trigger a bridge.
    pub rate_limit: f64,
    pub max_steps: usize,
    /// Record only these times (sorted, within `(0, t_end]`); every
    /// accepted step is recorded when `None`.
    pub output_times: Option<Vec<f64>>,
    pub tolerances: Tolerances,
}

impl IntegratorOptions {
    pub fn from_tolerances(tol: &Tolerances) -> Self {
        Self {
            rtol: tol.rk_rtol,
            atol: tol.rk_atol,
            mode: DtMode::Analytic,
            pole_epsilon: tol.pole_epsilon,
            rate_limit: 1e6,
            max_steps: 200_000,
            output_times: None,
            tolerances: *tol,
        }
    }
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self::from_tolerances(&Tolerances::default())
    }
}

/// One crossing of a singular window with the exact map.
#[derive(Clone, Debug, Serialize)]
pub struct BridgeEvent {
    /// Singular time, or the window centre for detected singularities.
    pub pole: f64,
    pub t_enter: f64,
    pub t_exit: f64,
    /// `max |r(t_enter) − M(t_enter) r(0)|` before the bridge.
    pub mismatch: f64,
    pub detected: bool,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<BlochVector>,
    /// Weighted error estimate of the step that produced each record (0 for
    /// the initial state and bridged records).
    pub errors: Vec<f64>,
    /// Whether a record came from the exact map inside a bridge window.
    pub bridged: Vec<bool>,
    pub bridges: Vec<BridgeEvent>,
    pub accepted: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn last(&self) -> &BlochVector {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn csv(&self) -> String {
        let n = self.states.first().map_or(0, |s| s.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("r{i}")));
        let rows: Vec<Vec<Option<f64>>> = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(t, s)| std::iter::once(Some(*t)).chain(s.as_slice().iter().map(|v| Some(*v))).collect())
            .collect();
        csv_string(&header, &rows)
    }

    pub fn metadata(&self, parameters: serde_json::Value, tol: &Tolerances) -> serde_json::Value {
        json!({
            "dim": self.dim,
            "points": self.times.len(),
            "accepted_steps": self.accepted,
            "rejected_steps": self.rejected,
            "parameters": parameters,
            "tolerances": tol,
            "bridges": self.bridges,
        })
    }

    pub fn write(&self, csv_path: impl AsRef<Path>, json_path: impl AsRef<Path>, parameters: serde_json::Value, tol: &Tolerances) -> Result<()> {
        write_atomic(csv_path, self.csv().as_bytes())?;
        write_json(json_path, &self.metadata(parameters, tol))
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

type Vector = nalgebra::DVector<f64>;

struct Stepper<'a, P: MapProvider + ?Sized> {
    p: &'a P,
    opts: &'a IntegratorOptions,
    limit: f64,
}

enum Eval {
    Ok(RMatrix),
    Singular,
}

impl<P: MapProvider + ?Sized> Stepper<'_, P> {
    fn generator(&self, t: f64) -> Result<Eval> {
        match generator_matrix(self.p, t, self.opts.mode, &self.opts.tolerances) {
            Ok(g) if g.l.iter().all(|v| v.is_finite() && v.abs() <= self.limit) => Ok(Eval::Ok(g.l)),
            Ok(_) | Err(Error::SingularMap { .. }) => Ok(Eval::Singular),
            Err(e) => Err(e),
        }
    }

    /// One DP5(4) attempt; `None` if a stage hit a singular generator.
    fn attempt(&self, t: f64, y: &Vector, k1: &Vector, h: f64) -> Result<Option<(Vector, Vector, f64)>> {
        let mut k: Vec<Vector> = vec![k1.clone()];
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    ys.axpy(h * A[s][j], kj, 1.0);
                }
            }
            match self.generator(t + C[s] * h)? {
                Eval::Ok(l) => k.push(l * ys),
                Eval::Singular => return Ok(None),
            }
        }
        let mut y5 = y.clone();
        let mut err = Vector::zeros(y.len());
        for s in 0..7 {
            y5.axpy(h * B5[s], &k[s], 1.0);
            err.axpy(h * (B5[s] - B4[s]), &k[s], 1.0);
        }
        let n = y.len() as f64;
        let norm = (err
            .iter()
            .zip(y.iter().zip(y5.iter()))
            .map(|(e, (a, b))| (e / (self.opts.atol + self.opts.rtol * a.abs().max(b.abs()))).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let k7 = k.pop().expect("seven stages");
        Ok(Some((y5, k7, norm)))
    }
}

fn spacing_of(times: &[f64]) -> Option<f64> {
    let first = *times.first()?;
    Some(times.windows(2).map(|w| w[1] - w[0]).fold(first, f64::min))
}

/// Integrates from `r0` at `t = 0` to `t_end`.
pub fn integrate<P: MapProvider + ?Sized>(r0: &BlochVector, p: &P, t_end: f64, opts: &IntegratorOptions) -> Result<Trajectory> {
    let n = p.basis().len();
    if r0.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: r0.len() });
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Integration { t: 0.0, reason: format!("t_end must be positive, got {t_end}") });
    }
    let scale = p.rate_scale().max(f64::MIN_POSITIVE);
    let stepper = Stepper { p, opts, limit: opts.rate_limit * scale };

    let lookahead = p.singular_times(0.0, 2.0 * t_end + 1.0 / scale);
    let spacing = spacing_of(&lookahead).unwrap_or(1.0 / scale);
    let half = opts.pole_epsilon * spacing;
    let windows: Vec<(f64, f64, f64)> = lookahead
        .iter()
        .filter(|&&z| z - half < t_end)
        .map(|&z| (z, (z - half).max(0.0), z + half))
        .collect();

    let outputs: Vec<f64> = opts.output_times.clone().unwrap_or_default().into_iter().filter(|&x| x > 0.0 && x <= t_end).collect();
    let record_steps = opts.output_times.is_none();
    let exact = |t: f64| -> Result<Vector> { Ok(p.map_matrix(t)?.m * &r0.r) };
    let sup = |a: &Vector, b: &Vector| (a - b).amax();

    let mut traj = Trajectory {
        dim: p.basis().dim(),
        times: vec![0.0],
        states: vec![r0.clone()],
        errors: vec![0.0],
        bridged: vec![false],
        bridges: Vec::new(),
        accepted: 0,
        rejected: 0,
    };
    let push = |traj: &mut Trajectory, t: f64, y: &Vector, err: f64, bridged: bool| {
        traj.times.push(t);
        traj.states.push(BlochVector::new(traj.dim, y.clone()));
        traj.errors.push(err);
        traj.bridged.push(bridged);
    };

    let mut t = 0.0;
    let mut y = r0.r.clone();
    let mut out_i = 0;
    let mut win_i = 0;
    let mut h = 1e-3 * t_end.min(1.0 / scale);
    let mut k1: Option<Vector> = None;

    let bridge = |traj: &mut Trajectory, t: &mut f64, y: &mut Vector, out_i: &mut usize, pole: f64, exit: f64, detected: bool| -> Result<()> {
        let exit = exit.min(t_end);
        let mismatch = sup(y, &exact(*t)?);
        while *out_i < outputs.len() && outputs[*out_i] <= exit {
            let to = outputs[*out_i];
            push(traj, to, &exact(to)?, 0.0, true);
            *out_i += 1;
        }
        *y = exact(exit)?;
        if record_steps {
            push(traj, exit, y, 0.0, true);
        }
        traj.bridges.push(BridgeEvent { pole, t_enter: *t, t_exit: exit, mismatch, detected });
        *t = exit;
        Ok(())
    };

    while t < t_end {
        while win_i < windows.len() && windows[win_i].2 <= t {
            win_i += 1;
        }
        if let Some(&(pole, start, end)) = windows.get(win_i) {
            if start <= t {
                bridge(&mut traj, &mut t, &mut y, &mut out_i, pole, end, false)?;
                k1 = None;
                win_i += 1;
                continue;
            }
        }
        let mut target = t_end;
        if let Some(&(_, start, _)) = windows.get(win_i) {
            target = target.min(start);
        }
        if let Some(&o) = outputs.get(out_i) {
            target = target.min(o);
        }

        while t < target {
            if traj.accepted + traj.rejected >= opts.max_steps {
                return Err(Error::Integration { t, reason: "step budget exhausted".into() });
            }
            let k_now = match k1.take() {
                Some(k) => k,
                None => match stepper.generator(t)? {
                    Eval::Ok(l) => l * &y,
                    Eval::Singular => {
                        let (w, t_now) = (opts.pole_epsilon * spacing, t);
                        bridge(&mut traj, &mut t, &mut y, &mut out_i, t_now + w, t_now + 2.0 * w, true)?;
                        break;
                    }
                },
            };
            let step = h.min(target - t);
            let last = step >= target - t;
            match stepper.attempt(t, &y, &k_now, step)? {
                Some((y5, k7, err)) if err <= 1.0 => {
                    t = if last { target } else { t + step };
                    y = y5;
                    k1 = Some(k7);
                    traj.accepted += 1;
                    if record_steps {
                        push(&mut traj, t, &y, err, false);
                    }
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if !last || fac < 1.0 {
                        h = step * fac;
                    }
                }
                Some((_, _, err)) => {
                    traj.rejected += 1;
                    k1 = Some(k_now);
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                }
                None => {
                    traj.rejected += 1;
                    let (w, t_now) = (opts.pole_epsilon * spacing, t);
                    if step <= 4.0 * w {
                        let exit = t_now + step.max(2.0 * w);
                        bridge(&mut traj, &mut t, &mut y, &mut out_i, 0.5 * (t_now + exit), exit, true)?;
                        break;
                    }
                    k1 = Some(k_now);
                    h = 0.25 * step;
                }
            }
            if h < 1e-14 * t.abs().max(1.0 / scale) {
                return Err(Error::Integration { t, reason: format!("step size underflow (h = {h:e})") });
            }
        }
        if let Some(&o) = outputs.get(out_i) {
            if t == o {
                let err = *traj.errors.last().unwrap_or(&0.0);
                push(&mut traj, t, &y, err, false);
                out_i += 1;
            }
        }
    }
    Ok(traj)
}

/// Independent trajectories (one per initial state) run under `exec`.
pub fn integrate_many<P: MapProvider + ?Sized>(r0s: &[BlochVector], p: &P, t_end: f64, opts: &IntegratorOptions, exec: Execution) -> Vec<Result<Trajectory>> {
    exec.map(r0s, |r0| integrate(r0, p, t_end, opts))
}

#[derive(Clone, Debug, Serialize)]
pub struct CpReport {
    pub times: Vec<f64>,
    /// Canonical rates per time, `None` where extraction was skipped.
    pub rates: Vec<Option<Vec<f64>>>,
    pub skipped: Vec<f64>,
    pub min_rate: f64,
    pub cp_divisible: bool,
    /// Generator constant over the sampled times.
    pub semigroup: bool,
    /// Maximal runs of sampled times with a negative rate.
    pub negative_intervals: Vec<(f64, f64)>,
}

/// Rate signs on `t_grid`. Times where the map is singular are skipped.
pub fn cp_divisibility_report<P: MapProvider + ?Sized>(p: &P, t_grid: &[f64], mode: DtMode, tol: &Tolerances, exec: Execution) -> Result<CpReport> {
    let scale = p.rate_scale();
    let evals = exec.map(t_grid, |&t| match generator_matrix(p, t, mode, tol) {
        Ok(g) => extract_rates(&g.l, p.basis(), t, scale, tol).map(|d| Some((g.l, d.rates))),
        Err(Error::SingularMap { .. }) => Ok(None),
        Err(e) => Err(e),
    });
    let thresh = tol.rate_sign * scale.max(1.0);
    let mut rates = Vec::with_capacity(t_grid.len());
    let mut skipped = Vec::new();
    let mut gens: Vec<RMatrix> = Vec::new();
    let mut negative_intervals: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    let mut min_rate = f64::INFINITY;
    for (&t, e) in t_grid.iter().zip(evals) {
        match e? {
            Some((l, r)) => {
                let m = r.iter().cloned().fold(f64::INFINITY, f64::min);
                min_rate = min_rate.min(m);
                if m < -thresh {
                    open = Some(open.map_or((t, t), |(a, _)| (a, t)));
                } else if let Some(iv) = open.take() {
                    negative_intervals.push(iv);
                }
                gens.push(l);
                rates.push(Some(r));
            }
            None => {
                skipped.push(t);
                rates.push(None);
            }
        }
    }
    negative_intervals.extend(open);
    let semigroup = match gens.first() {
        Some(l0) => {
            let s = l0.amax().max(f64::MIN_POSITIVE);
            gens.len() > 1 && gens.iter().all(|l| (l - l0).amax() <= 1e-9 * s)
        }
        None => false,
    };
    Ok(CpReport {
        times: t_grid.to_vec(),
        rates,
        skipped,
        min_rate,
        cp_divisible: min_rate >= -thresh,
        semigroup,
        negative_intervals,
    })
}

/// Uniform grid of `n` points that drops every point within
/// `eps · spacing` of a singular time of `p`.
pub fn regular_grid<P: MapProvider + ?Sized>(p: &P, t0: f64, t1: f64, n: usize, eps: f64) -> Vec<f64> {
    let sing = p.singular_times(0.0, 2.0 * t1 + 1.0);
    let spacing = spacing_of(&sing).unwrap_or(f64::INFINITY);
    (0..n)
        .map(|i| if n == 1 { t0 } else { t0 + (t1 - t0) * i as f64 / (n - 1) as f64 })
        .filter(|t| sing.iter().all(|z| (t - z).abs() >= eps * spacing))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::HermitianBasis;
    use crate::channel::analytic_bloch_double_peak;
    use crate::decoherence::{decoherence_set, DecoherenceSet, FrequencySpec, GaussianPairParams};
    use crate::generator::DephasingMap;
    use crate::states::{preset, random_density_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(spec: FrequencySpec) -> DephasingMap {
        DephasingMap::new(decoherence_set(&spec, 1.0).unwrap()).unwrap()
    }

    fn random_bloch(basis: &HermitianBasis, rng: &mut ChaCha8Rng) -> BlochVector {
        basis.to_bloch(&random_density_matrix(basis.dim(), rng), 1e-12).unwrap()
    }

    #[test]
    fn single_peak_matches_exact_map() {
        let p = GaussianPairParams { omega0: 2.0, delta_omega: 0.4, sigma: 1.0, k: 0.5 };
        let map = pair(FrequencySpec::BiGaussianSingle(p));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r0 = random_bloch(&map.basis, &mut rng);
        let traj = integrate(&r0, &map, 3.0, &IntegratorOptions::default()).unwrap();
        assert!(traj.bridges.is_empty());
        let exact = map.map_matrix(3.0).unwrap().apply(&r0).unwrap();
        assert!((traj.last().r.clone() - exact.r).amax() < 1e-6);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert_eq!(s.r[0], 0.5, "t={t}");
        }
    }

    #[test]
    fn diagonal_state_is_stationary() {
        let p = GaussianPairParams { omega0: 1.0, delta_omega: 0.0, sigma: 1.0, k: 0.0 };
        let map = pair(FrequencySpec::BiGaussianSingle(p));
        let r0 = map.basis.to_bloch(&preset("hh").unwrap(), 1e-12).unwrap();
        let traj = integrate(&r0, &map, 2.0, &IntegratorOptions::default()).unwrap();
        for s in &traj.states {
            assert!((s.r.clone() - &r0.r).amax() < 1e-14);
        }
    }

    #[test]
    fn double_peak_crosses_singular_times() {
        let p = GaussianPairParams { omega0: 0.8, delta_omega: 2.0, sigma: 1.0, k: 0.0 };
        let map = pair(FrequencySpec::BiGaussianDouble(p));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r0 = random_bloch(&map.basis, &mut rng);
        let traj = integrate(&r0, &map, 3.0, &IntegratorOptions::default()).unwrap();
        assert_eq!(traj.bridges.len(), 3);
        for b in &traj.bridges {
            assert!(b.mismatch < 1e-6, "{b:?}");
        }
        let expect = analytic_bloch_double_peak(&r0, &p, 1.0, 3.0).unwrap();
        assert!((traj.last().r.clone() - expect.r).amax() < 1e-6);
    }

    #[test]
    fn output_grid_is_honoured() {
        let p = GaussianPairParams { omega0: 0.0, delta_omega: 2.0, sigma: 1.0, k: 0.3 };
        let map = pair(FrequencySpec::BiGaussianDouble(p));
        let grid: Vec<f64> = (1..=12).map(|i| 0.25 * i as f64).collect();
        let opts = IntegratorOptions { output_times: Some(grid.clone()), ..IntegratorOptions::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r0 = random_bloch(&map.basis, &mut rng);
        let traj = integrate(&r0, &map, 3.0, &opts).unwrap();
        assert_eq!(&traj.times[1..], &grid[..]);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let e = analytic_bloch_double_peak(&r0, &p, 1.0, *t).unwrap();
            assert!((s.r.clone() - e.r).amax() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn detected_bridge_for_families_without_closed_form_zeros() {
        // sampled double-peak distribution: zeros are not known in closed form
        let n = 401;
        let omega: Vec<f64> = (0..n).map(|i| -8.0 + 16.0 * i as f64 / (n - 1) as f64).collect();
        let dens: Vec<f64> = omega.iter().map(|w| (-(w - 1.0).powi(2) / 0.02).exp() + (-(w + 1.0).powi(2) / 0.02).exp()).collect();
        let tab = crate::decoherence::Tabulated1d::normalized(omega, dens).unwrap();
        let ds = DecoherenceSet::from_spec(&FrequencySpec::UniTabulated(tab), 1.0).unwrap();
        let map = DephasingMap::new(ds).unwrap();
        let r0 = map.basis.to_bloch(&preset("plus_state").unwrap(), 1e-12).unwrap();
        let opts = IntegratorOptions { rate_limit: 1e2, ..IntegratorOptions::default() };
        let traj = integrate(&r0, &map, 2.0, &opts).unwrap();
        assert!(traj.bridges.iter().any(|b| b.detected && (b.pole - std::f64::consts::FRAC_PI_2).abs() < 0.01));
        let exact = map.map_matrix(2.0).unwrap().apply(&r0).unwrap();
        assert!((traj.last().r.clone() - exact.r).amax() < 1e-6);
    }

    #[test]
    fn cp_report_verdicts() {
        let tol = Tolerances::default();
        let single = pair(FrequencySpec::BiGaussianSingle(GaussianPairParams { omega0: 1.0, delta_omega: 0.3, sigma: 1.0, k: 0.2 }));
        let grid = regular_grid(&single, 0.0, 3.0, 40, 1e-3);
        let rep = cp_divisibility_report(&single, &grid, DtMode::Analytic, &tol, Execution::Sequential).unwrap();
        assert!(rep.cp_divisible && !rep.semigroup && rep.negative_intervals.is_empty());

        let double = pair(FrequencySpec::BiGaussianDouble(GaussianPairParams { omega0: 0.0, delta_omega: 2.0, sigma: 1.0, k: 0.0 }));
        let grid = regular_grid(&double, 0.0, 3.0, 60, 1e-3);
        let rep = cp_divisibility_report(&double, &grid, DtMode::Analytic, &tol, Execution::Parallel).unwrap();
        assert!(!rep.cp_divisible && !rep.negative_intervals.is_empty());

        let lor = DephasingMap::new(DecoherenceSet::from_spec(&FrequencySpec::UniLorentzian { center: 0.5, width: 0.2 }, 1.0).unwrap()).unwrap();
        let grid: Vec<f64> = (0..20).map(|i| 0.25 * i as f64).collect();
        let rep = cp_divisibility_report(&lor, &grid, DtMode::Analytic, &tol, Execution::Sequential).unwrap();
        assert!(rep.cp_divisible && rep.semigroup);
    }

    #[test]
    fn trajectory_export() {
        let map = DephasingMap::new(DecoherenceSet::from_spec(&FrequencySpec::UniGaussian { mean: 0.0, sd: 1.0 }, 1.0).unwrap()).unwrap();
        let r0 = map.basis.to_bloch(&preset("plus_state").unwrap(), 1e-12).unwrap();
        let opts = IntegratorOptions { output_times: Some(vec![0.5, 1.0]), ..IntegratorOptions::default() };
        let traj = integrate(&r0, &map, 1.0, &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        traj.write(dir.path().join("t.csv"), dir.path().join("t.json"), json!({"family": "gaussian"}), &Tolerances::default()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert!(text.starts_with("t,r1,r2,r3,r4\n"));
        assert_eq!(text.lines().count(), 4);
        let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
        assert_eq!(meta["points"], 3);
    }
}
