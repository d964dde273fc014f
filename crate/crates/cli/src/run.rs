//! Mode runners. Each writes its CSV/JSON files into the output directory.

use std::path::{Path, PathBuf};

use anyhow::Context;
use dephasing_core::basis::BlochVector;
use dephasing_core::bplus::{three_term_state, BPlusTerms, Kappas};
use dephasing_core::decoherence::{DecoherenceSet, FrequencySpec};
use dephasing_core::export::{csv_string, write_atomic, write_json};
use dephasing_core::generator::{
    align_rates, analytic_jumps, double_peak_poles, near_double_peak_pole, qubit_rates, rate_grid, rates_double_peak_analytic,
    rates_single_peak_analytic, DephasingMap, MapProvider,
};
use dephasing_core::integrator::{cp_divisibility_report, integrate, IntegratorOptions};
use dephasing_core::verify::{run_verify, VerifyOptions};
use dephasing_core::{Error, Execution, Tolerances};
use num_complex::Complex64;
use serde_json::json;

use crate::config::{Mode, ScenarioConfig};

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Invalid or inconsistent configuration (exit 2).
    Config(anyhow::Error),
    /// A check or computation did not pass (exit 1).
    Failed(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub tolerance_profile: Option<String>,
    pub exec: Execution,
}

/// Files written by a run.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
}

pub fn run(mode: Mode, cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Outcome, Failure> {
    cfg.validate(mode).map_err(Failure::Config)?;
    let tol = cfg.tolerances(opts.tolerance_profile.as_deref()).map_err(Failure::Config)?;
    let seed = opts.seed.or(cfg.seed).unwrap_or(0);
    let stem = cfg.output.as_ref().and_then(|o| o.stem.clone()).unwrap_or_else(|| mode.name().to_string());
    let ctx = Ctx { cfg, tol, seed, exec: opts.exec, csv: opts.out.join(format!("{stem}.csv")), json: opts.out.join(format!("{stem}.json")) };
    let result = match mode {
        Mode::Rates => run_rates(&ctx),
        Mode::Evolve => run_evolve(&ctx),
        Mode::Bplus => run_bplus(&ctx),
        Mode::Verify => return run_verify_mode(&ctx),
    };
    result.map_err(|e| match e.downcast_ref::<Error>() {
        Some(Error::InvalidSpec(_) | Error::NotNormalized { .. } | Error::LengthMismatch { .. }) => Failure::Config(e),
        _ => Failure::Failed(e),
    })?;
    Ok(Outcome { files: vec![ctx.csv, ctx.json] })
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    tol: Tolerances,
    seed: u64,
    exec: Execution,
    csv: PathBuf,
    json: PathBuf,
}

impl Ctx<'_> {
    fn header(&self, mode: Mode) -> serde_json::Value {
        json!({
            "mode": mode.name(),
            "seed": self.seed,
            "dn": self.cfg.dn(),
            "tolerances": self.tol,
            "config": self.cfg,
        })
    }

    fn write(&self, header: &[String], rows: &[Vec<Option<f64>>], mut meta: serde_json::Value, extra: serde_json::Value) -> anyhow::Result<()> {
        write_atomic(&self.csv, csv_string(header, rows).as_bytes()).with_context(|| format!("writing {}", self.csv.display()))?;
        if let (Some(m), serde_json::Value::Object(e)) = (meta.as_object_mut(), extra) {
            m.extend(e);
        }
        write_json(&self.json, &meta).with_context(|| format!("writing {}", self.json.display()))?;
        Ok(())
    }
}

fn names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn run_rates(ctx: &Ctx) -> anyhow::Result<()> {
    let spec = ctx.cfg.frequency_spec()?;
    let dn = ctx.cfg.dn();
    let map = DephasingMap::new(DecoherenceSet::from_spec(&spec, dn)?)?;
    let grid = ctx.cfg.time.expect("validated").points();
    let dim = map.basis.dim();
    let n_rates = if dim == 4 { 3 } else { 1 };
    let scale = map.rate_scale();
    let eps = ctx.tol.pole_epsilon;
    let mode = ctx.cfg.derivative();

    let seed = analytic_jumps(dim)?;
    let mut prev = seed.clone();
    let mut numeric: Vec<Option<Vec<f64>>> = Vec::with_capacity(grid.len());
    let mut skipped = Vec::new();
    for (t, dec) in grid.iter().zip(rate_grid(&map, &grid, mode, &ctx.tol, ctx.exec)) {
        match dec {
            Ok(d) => {
                let aligned = align_rates(&d, &map.basis, &prev, &seed, 1e-9 * scale.max(1.0));
                prev = aligned.jumps.clone();
                numeric.push(Some(aligned.rates));
            }
            Err(Error::SingularMap { .. }) => {
                skipped.push(*t);
                numeric.push(None);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let near_pole = |t: f64| match &spec {
        FrequencySpec::BiGaussianDouble(p) => near_double_peak_pole(p, dn, t, eps),
        _ => false,
    };
    let analytic = |t: f64| -> Option<Vec<f64>> {
        match &spec {
            FrequencySpec::BiGaussianSingle(p) => Some(rates_single_peak_analytic(p, dn, t).to_vec()),
            FrequencySpec::BiGaussianDouble(p) => rates_double_peak_analytic(p, dn, t, eps).ok().map(|r| r.to_vec()),
            FrequencySpec::UniGaussian { .. } | FrequencySpec::UniLorentzian { .. } => {
                qubit_rates(&map.ds.functions()[0], t).ok().map(|(g, _)| vec![g])
            }
            _ => None,
        }
    };

    let mut header = vec!["t".to_string(), "t_norm".to_string()];
    header.extend(names("analytic_gamma", n_rates));
    header.extend(names("numeric_gamma", n_rates));
    header.push("near_pole".into());
    let mut rows = Vec::with_capacity(grid.len());
    let (mut max_abs, mut max_rel) = (0.0_f64, 0.0_f64);
    let mut compared = 0usize;
    for (&t, num) in grid.iter().zip(&numeric) {
        let near = near_pole(t) || num.is_none();
        let ana = analytic(t);
        let mut row = vec![Some(t), Some(scale * t)];
        row.extend((0..n_rates).map(|k| ana.as_ref().map(|a| a[k])));
        row.extend((0..n_rates).map(|k| num.as_ref().map(|a| a[k])));
        row.push(Some(if near { 1.0 } else { 0.0 }));
        rows.push(row);
        if let (false, Some(a), Some(n)) = (near, &ana, num) {
            compared += 1;
            for (x, y) in a.iter().zip(n) {
                max_abs = max_abs.max((x - y).abs());
                max_rel = max_rel.max((x - y).abs() / x.abs().max(scale));
            }
        }
    }

    let cp_grid: Vec<f64> = grid.iter().copied().filter(|&t| !near_pole(t)).collect();
    let cp = cp_divisibility_report(&map, &cp_grid, mode, &ctx.tol, ctx.exec)?;
    let (t0, t1) = (grid[0], grid[grid.len() - 1]);
    let poles = match &spec {
        FrequencySpec::BiGaussianDouble(p) => double_peak_poles(p, dn, t0, t1),
        _ => map.singular_times(t0, t1),
    };
    let summary = json!({
        "rate_scale": scale,
        "points": grid.len(),
        "compared_points": compared,
        "max_abs_deviation": if compared > 0 { Some(max_abs) } else { None },
        "max_rel_deviation": if compared > 0 { Some(max_rel) } else { None },
        "cp_divisible": cp.cp_divisible,
        "semigroup": cp.semigroup,
        "min_rate": cp.min_rate,
        "negative_intervals": cp.negative_intervals,
        "poles": poles,
        "poles_normalized": poles.iter().map(|p| p * scale).collect::<Vec<_>>(),
        "skipped_singular": skipped,
    });
    ctx.write(&header, &rows, ctx.header(Mode::Rates), summary)
}

fn run_evolve(ctx: &Ctx) -> anyhow::Result<()> {
    let spec = ctx.cfg.frequency_spec()?;
    let map = DephasingMap::new(DecoherenceSet::from_spec(&spec, ctx.cfg.dn())?)?;
    let dim = map.basis.dim();
    let rho0 = ctx.cfg.initial_state(dim, &ctx.tol, ctx.seed)?;
    let r0 = map.basis.to_bloch(&rho0, ctx.tol.hermiticity)?;
    let grid = ctx.cfg.time.expect("validated").points();
    let gen = ctx.cfg.generator.clone().unwrap_or_default();
    let outputs: Vec<f64> = grid.iter().copied().filter(|&t| t > 0.0).collect();
    let t_end = grid[grid.len() - 1];
    let opts = IntegratorOptions {
        mode: ctx.cfg.derivative(),
        rate_limit: gen.rate_limit.unwrap_or(1e6),
        output_times: Some(outputs),
        ..IntegratorOptions::from_tolerances(&ctx.tol)
    };
    let traj = integrate(&r0, &map, t_end, &opts)?;
    let exact = gen.exact.unwrap_or(true);
    let n = map.basis.len();
    let coherence = if dim == 4 { "abs_rho_hh_vv" } else { "abs_rho_h_v" };

    let mut header = vec!["t".to_string()];
    header.extend(names("r", n));
    header.push(coherence.into());
    if exact {
        header.extend(names("exact_r", n));
        header.push("error".into());
    }
    let mut rows = Vec::new();
    let mut sup_error = 0.0_f64;
    for (&t, s) in traj.times.iter().zip(&traj.states) {
        if t < grid[0] {
            continue;
        }
        let rho = map.basis.from_bloch(s)?;
        let mut row: Vec<Option<f64>> = std::iter::once(t).chain(s.as_slice().iter().copied()).map(Some).collect();
        row.push(Some(rho[(0, dim - 1)].norm()));
        if exact {
            let e: BlochVector = map.map_matrix(t)?.apply(&r0)?;
            let err = (&s.r - &e.r).amax();
            sup_error = sup_error.max(err);
            row.extend(e.as_slice().iter().map(|v| Some(*v)));
            row.push(Some(err));
        }
        rows.push(row);
    }
    let diag = traj.metadata(json!({ "initial_bloch": r0.as_slice() }), &ctx.tol);
    let extra = json!({
        "trajectory": diag,
        "sup_error": if exact { Some(sup_error) } else { None },
    });
    ctx.write(&header, &rows, ctx.header(Mode::Evolve), extra)
}

fn run_bplus(ctx: &Ctx) -> anyhow::Result<()> {
    let (label, state) = ctx.cfg.bplus_state()?;
    let horizon = dephasing_core::bplus::preset(&label).map_or(4.0, |p| p.horizon);
    let grid = ctx.cfg.time.map(|t| t.points()).unwrap_or_else(|| (0..201).map(|i| horizon * i as f64 / 200.0).collect());
    let terms = BPlusTerms::new(state, ctx.cfg.dn(), &ctx.tol)?;
    let mut warnings: Vec<String> = Vec::new();
    for (which, w) in [("w_x", terms.weights.w_x), ("w_y", terms.weights.w_y)] {
        if w.abs() < ctx.tol.degenerate_weight {
            warnings.push(format!("{which} = {w:e} is degenerate; that term carries no weight and its decoherence function is omitted"));
        }
    }
    let header: Vec<String> = ["t", "abs_kappa", "re_kappa", "im_kappa", "abs_kappa0", "abs_kappa_x", "abs_kappa_y", "residual"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = ctx.exec.try_map_range(grid.len(), |i| -> dephasing_core::Result<Vec<Option<f64>>> {
        let t = grid[i];
        let kappa = terms.kappa(t)?;
        let k0 = terms.kappa0(t)?;
        let kx = optional(terms.kappa_x(t))?;
        let ky = optional(terms.kappa_y(t))?;
        let residual = match (kx, ky) {
            (Some(kx), Some(ky)) => {
                let rec = three_term_state(&terms.weights, &Kappas { k0, kx, ky });
                Some((rec - terms.direct(t)?).camax())
            }
            _ => None,
        };
        Ok(vec![
            Some(t),
            Some(kappa.norm()),
            Some(kappa.re),
            Some(kappa.im),
            Some(k0.norm()),
            kx.map(|k| k.norm()),
            ky.map(|k| k.norm()),
            residual,
        ])
    })?;
    let max_residual = rows.iter().filter_map(|r| r[7]).fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))));
    let c = |z: Complex64| [z.re, z.im];
    let extra = json!({
        "scenario": label,
        "c_h": c(terms.state.c_h),
        "c_v": c(terms.state.c_v),
        "weights": terms.weights,
        "max_residual": max_residual,
        "warnings": warnings,
    });
    ctx.write(&header, &rows, ctx.header(Mode::Bplus), extra)
}

fn optional(r: dephasing_core::Result<Complex64>) -> dephasing_core::Result<Option<Complex64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::DegenerateWeight { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn run_verify_mode(ctx: &Ctx) -> Result<Outcome, Failure> {
    let samples = ctx.cfg.verify.as_ref().and_then(|v| v.samples).unwrap_or(20);
    let report = run_verify(&VerifyOptions { seed: ctx.seed, tolerances: ctx.tol, exec: ctx.exec, samples });
    let value = serde_json::to_value(&report).map_err(|e| Failure::Failed(e.into()))?;
    write_json(&ctx.json, &value).map_err(|e| Failure::Failed(e.into()))?;
    if report.passed {
        Ok(Outcome { files: vec![ctx.json.clone()] })
    } else {
        let names: Vec<&str> = report.failures().map(|c| c.name).collect();
        Err(Failure::Failed(anyhow::anyhow!("verification failed: {}", names.join(", "))))
    }
}

/// Loads the config at `path`, or an empty config for modes that need none.
pub fn load_config(path: Option<&Path>, mode: Mode) -> Result<ScenarioConfig, Failure> {
    match path {
        Some(p) => ScenarioConfig::load(p).map_err(Failure::Config),
        None if mode == Mode::Verify => Ok(ScenarioConfig::default()),
        None => Err(Failure::Config(anyhow::anyhow!("--config is required for `{}`", mode.name()))),
    }
}
