//! The numerical experiments: single trajectories, correlated-state
//! ensembles, environment-size sweeps, band-kernel diagnostics and time
//! reversal.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{InitialKind, RunConfig, Scenario, SweepScaling};
use crate::dynamics::{
    build_propagator, initial_state_excited, initial_state_subspace_random, initial_state_superposition, PureState,
    SpectralPropagator,
};
use crate::ham::{self, HamRates};
use crate::metrics::{self, Bin, DeviationReport, ExpFit, ScalingFit};
use crate::model::{
    build_model, check_conditions, homogeneity_diagnostic, ConditionReport, FiniteBathModel, HomogeneityReport,
    ModelParams,
};
use crate::observables::{band_kernel, Trajectory};
use crate::random::derive_seed;
use crate::{Error, Result};

/// One CSV cell; integers stay exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

/// Data series destined for a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub enum DataFile {
    /// A reduced-state trajectory with HAM overlays (NaN where undefined).
    Trajectory {
        name: String,
        trajectory: Trajectory,
        ham_rho11: Vec<f64>,
        ham_coherence: Vec<f64>,
    },
    Table {
        name: String,
        header: Vec<&'static str>,
        rows: Vec<Vec<Cell>>,
    },
}

impl DataFile {
    pub fn name(&self) -> &str {
        match self {
            DataFile::Trajectory { name, .. } | DataFile::Table { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub files: Vec<DataFile>,
    pub report: Report,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub seeds: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibria {
    /// Late-window mean of the exact ρ₁₁.
    pub exact: f64,
    /// Rate equation with source ρ₁₁(0).
    pub ham_literal: f64,
    /// Rate equation with source P_c(0).
    pub ham_generalized: f64,
    pub born_approximation: f64,
    pub k_t_bath: f64,
    /// exact / born_approximation.
    pub ba_discrepancy_factor: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceFit {
    pub initial: f64,
    pub fitted_rate: f64,
    pub r01: f64,
    pub relative_error: f64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub rho11_initial: f64,
    pub p_coupled_initial: f64,
    pub coherence_initial: f64,
    pub entropy_equilibrium: f64,
    pub entropy_max: f64,
    pub min_eigenvalue: f64,
    pub max_trace_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleMember {
    pub index: usize,
    pub seed: u64,
    pub d: f64,
    pub d_squared: f64,
    pub d_literal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub size: usize,
    pub p_excited: f64,
    pub tau: f64,
    pub median_d: f64,
    pub mean_d: f64,
    pub fraction_d_le_0_05: f64,
    pub mode_bin: Option<Bin>,
    pub histogram: Vec<Bin>,
    pub ham_equilibrium_generalized: f64,
    pub ham_equilibrium_literal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n: usize,
    pub band_width: f64,
    pub d_squared: f64,
    pub d: f64,
    pub equilibrium_exact: f64,
    pub conditions: ConditionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub scaling: SweepScaling,
    pub points: Vec<SweepPoint>,
    pub fit: Option<ScalingFit>,
    pub fit_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSummary {
    pub t_max: f64,
    pub analytic_first_zero: f64,
    pub half_width: Option<f64>,
    pub one_over_e_width: Option<f64>,
    pub decay_threshold: f64,
    /// Earliest grid time after which |f| stays below the threshold up to half a period.
    pub settle_time: Option<f64>,
    pub recurrence_period: f64,
    pub abs_f_at_period: f64,
    pub probe_window: Option<(f64, f64)>,
    pub probe_max_rho11: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroWidthVariant {
    pub band_width: f64,
    pub lambda: f64,
    pub conditions: ConditionReport,
    pub exp_fit: ExpFit,
    pub d_vs_exp_fit: f64,
    pub late_mean: f64,
    pub late_window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReverseSummary {
    pub forward_equilibrium: f64,
    pub backward_equilibrium: f64,
    pub forward_window: (f64, f64),
    pub backward_window: (f64, f64),
    pub zero_width_variant: Option<ZeroWidthVariant>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: Scenario,
    pub provenance: Provenance,
    pub conditions: ConditionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homogeneity: Option<HomogeneityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homogeneity_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<HamRates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates_error: Option<String>,
    pub born_equilibrium: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibria: Option<Equilibria>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation: Option<DeviationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deviation_literal: Option<DeviationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coherence_fit: Option<CoherenceFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble_members: Option<Vec<EnsembleMember>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reverse: Option<ReverseSummary>,
}

/// Uniform grid t₀, t₀+h, …, t₁ built from integer multiples of the step.
pub fn time_grid(t0: f64, t1: f64, step: f64) -> Vec<f64> {
    let n = ((t1 - t0) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| t0 + k as f64 * step).collect()
}

/// HAM overlay evaluated at |t| so backward branches mirror the forward one.
struct HamOverlay {
    rho11: Vec<f64>,
    rho11_literal: Vec<f64>,
    coherence: Vec<f64>,
}

fn ham_overlay(rates: Option<&HamRates>, model: &FiniteBathModel, traj: &Trajectory) -> Result<HamOverlay> {
    let n = traj.len();
    let Some(rates) = rates else {
        return Ok(HamOverlay {
            rho11: vec![f64::NAN; n],
            rho11_literal: vec![f64::NAN; n],
            coherence: vec![f64::NAN; n],
        });
    };
    let first = initial_sample(traj);
    let abs_t: Vec<f64> = traj.samples.iter().map(|s| s.t.abs()).collect();
    let rho11_0 = first.rho.rho11.clamp(0.0, 1.0);
    let p_c0 = first.p_coupled.clamp(rho11_0, 1.0);
    let rho11 = ham::predict_rho11(rates, rho11_0, p_c0, &abs_t)?;
    let rho11_literal = ham::predict_rho11(rates, rho11_0, rho11_0, &abs_t)?;
    let rho01_0 = clamp_half(first.rho.rho01);
    let coherence = ham::predict_rho01(rates, rho01_0, model.delta_e(), &abs_t)?.iter().map(|z| z.norm_sqr()).collect();
    Ok(HamOverlay { rho11, rho11_literal, coherence })
}

fn clamp_half(z: C64) -> C64 {
    if z.norm() > 0.5 {
        z * (0.5 / z.norm())
    } else {
        z
    }
}

/// Sample at t = 0 (or the first one when the grid does not contain 0).
fn initial_sample(traj: &Trajectory) -> &crate::observables::Sample {
    traj.samples.iter().find(|s| s.t == 0.0).unwrap_or(&traj.samples[0])
}

fn prepare_state(model: &FiniteBathModel, cfg: &RunConfig) -> Result<PureState> {
    let init = &cfg.initial_state;
    Ok(match init.kind {
        InitialKind::Excited => initial_state_excited(model, init.seed),
        InitialKind::Superposition => initial_state_superposition(model, init.seed),
        InitialKind::SubspaceRandom => initial_state_subspace_random(model, init.p_excited, init.seed)?,
    })
}

fn build(params: &ModelParams) -> Result<(FiniteBathModel, SpectralPropagator)> {
    let model = build_model(params.clone())?;
    let prop = build_propagator(&model).map_err(|e| {
        Error::from(e).context(format!("n1 = {}, n2 = {}, seed = {}", params.n1, params.n2, params.seed_coupling))
    })?;
    Ok((model, prop))
}

fn base_report(cfg: &RunConfig) -> Result<Report> {
    let (rates, rates_error) = match ham::rates(&cfg.model) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut seeds = BTreeMap::new();
    seeds.insert("coupling".to_string(), cfg.model.seed_coupling);
    seeds.insert("initial_state".to_string(), cfg.initial_state.seed);
    if cfg.scenario == Scenario::Ensemble {
        seeds.insert("ensemble".to_string(), cfg.ensemble.seed);
    }
    Ok(Report {
        scenario: cfg.scenario,
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: cfg.clone(),
            seeds,
        },
        conditions: check_conditions(&cfg.model),
        homogeneity: None,
        homogeneity_error: None,
        rates,
        rates_error,
        born_equilibrium: ham::ba_equilibrium(cfg.model.delta_e, cfg.k_t_bath)?,
        equilibria: None,
        deviation: None,
        deviation_literal: None,
        coherence_fit: None,
        trajectory: None,
        ensemble: None,
        ensemble_members: None,
        sweep: None,
        kernel: None,
        reverse: None,
    })
}

fn summarize(traj: &Trajectory, window: (f64, f64)) -> TrajectorySummary {
    let first = initial_sample(traj);
    let min_eigenvalue = traj.samples.iter().map(|s| s.rho.eigenvalues()[0]).fold(f64::INFINITY, f64::min);
    let max_trace_error = traj.samples.iter().map(|s| (s.rho.trace() - 1.0).abs()).fold(0.0, f64::max);
    TrajectorySummary {
        rho11_initial: first.rho.rho11,
        p_coupled_initial: first.p_coupled,
        coherence_initial: first.coherence,
        entropy_equilibrium: traj.window_mean(window.0, window.1, |s| s.entropy).unwrap_or(f64::NAN),
        entropy_max: std::f64::consts::LN_2,
        min_eigenvalue,
        max_trace_error,
    }
}

/// Indices of samples with 0 ≤ t ≤ tau, as (times, values) slices starting at 0.
fn nonnegative_window<'a>(times: &'a [f64], values: &'a [f64], tau: f64) -> (&'a [f64], &'a [f64]) {
    let start = times.iter().position(|&t| t >= -1e-12).unwrap_or(times.len());
    let end = times.iter().rposition(|&t| t <= tau + 1e-9).map_or(start, |i| i + 1);
    (&times[start..end], &values[start..end])
}

pub fn run_scenario(cfg: &RunConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().map_err(|e| Error::Pool(e.to_string()))?;
    pool.install(|| match cfg.scenario {
        Scenario::Check => run_check(cfg),
        Scenario::Evolve => run_evolve(cfg),
        Scenario::Ensemble => run_ensemble(cfg),
        Scenario::Sweep => run_sweep(cfg),
        Scenario::Kernel => run_kernel(cfg),
        Scenario::Reverse => run_reverse(cfg),
    })
}

fn run_check(cfg: &RunConfig) -> Result<ScenarioResult> {
    let mut report = base_report(cfg)?;
    let model = build_model(cfg.model.clone())?;
    match homogeneity_diagnostic(&model, cfg.model.band_width / 10.0) {
        Ok(h) => report.homogeneity = Some(h),
        Err(e) => report.homogeneity_error = Some(e.to_string()),
    }
    Ok(ScenarioResult { files: Vec::new(), report })
}

fn run_evolve(cfg: &RunConfig) -> Result<ScenarioResult> {
    let mut report = base_report(cfg)?;
    let (model, prop) = build(&cfg.model)?;
    let state0 = prepare_state(&model, cfg)?;
    let grid = time_grid(0.0, cfg.t_max, cfg.sample_step);
    let traj = Trajectory::simulate(&prop, &state0, &grid)?;
    let overlay = ham_overlay(report.rates.as_ref(), &model, &traj)?;

    let window = (cfg.t_max - cfg.equilibrium_window, cfg.t_max);
    let exact_eq = traj.window_mean(window.0, window.1, |s| s.rho.rho11).unwrap_or(f64::NAN);
    if let Some(rates) = report.rates {
        let rho11 = traj.rho11();
        report.deviation = Some(metrics::deviation_d2(&rho11, &overlay.rho11, &grid, cfg.tau)?);
        report.deviation_literal = Some(metrics::deviation_d2(&rho11, &overlay.rho11_literal, &grid, cfg.tau)?);
        let first = initial_sample(&traj);
        report.equilibria = Some(Equilibria {
            exact: exact_eq,
            ham_literal: rates.equilibrium(first.rho.rho11),
            ham_generalized: rates.equilibrium(first.p_coupled),
            born_approximation: report.born_equilibrium,
            k_t_bath: cfg.k_t_bath,
            ba_discrepancy_factor: exact_eq / report.born_equilibrium,
            window,
        });
        if first.coherence > 1e-6 {
            let coh = traj.coherence();
            let (t, y) = nonnegative_window(&grid, &coh, cfg.tau);
            let fit = metrics::fit_exponential(t, y, false, 1e-7, 1.0);
            report.coherence_fit = Some(CoherenceFit {
                initial: first.coherence,
                fitted_rate: fit.rate,
                r01: rates.r01,
                relative_error: (fit.rate - rates.r01).abs() / rates.r01,
                window: (0.0, cfg.tau),
            });
        }
    }
    report.trajectory = Some(summarize(&traj, window));
    let file = DataFile::Trajectory {
        name: "trajectory.csv".into(),
        trajectory: traj,
        ham_rho11: overlay.rho11,
        ham_coherence: overlay.coherence,
    };
    Ok(ScenarioResult { files: vec![file], report })
}

fn run_ensemble(cfg: &RunConfig) -> Result<ScenarioResult> {
    let mut report = base_report(cfg)?;
    let ens = &cfg.ensemble;
    let rates = ham::rates(&cfg.model)?;
    let (model, prop) = build(&cfg.model)?;
    let grid = time_grid(0.0, cfg.tau, cfg.sample_step);

    let members: Vec<(EnsembleMember, Option<DataFile>)> = (0..ens.size)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(ens.seed, index as u64);
            let state0 = initial_state_subspace_random(&model, ens.p_excited, seed)?;
            let traj = Trajectory::simulate(&prop, &state0, &grid)
                .map_err(|e| Error::from(e).context(format!("ensemble member {index} (seed {seed})")))?;
            let overlay = ham_overlay(Some(&rates), &model, &traj)?;
            let rho11 = traj.rho11();
            let dev = metrics::deviation_d2(&rho11, &overlay.rho11, &grid, cfg.tau)?;
            let lit = metrics::deviation_d2(&rho11, &overlay.rho11_literal, &grid, cfg.tau)?;
            let member = EnsembleMember { index, seed, d: dev.d, d_squared: dev.d_squared, d_literal: lit.d };
            let file = ens.write_trajectories.then(|| DataFile::Trajectory {
                name: format!("ensemble_{index:04}.csv"),
                trajectory: traj,
                ham_rho11: overlay.rho11,
                ham_coherence: overlay.coherence,
            });
            Ok((member, file))
        })
        .collect::<Result<_>>()?;

    let ds: Vec<f64> = members.iter().map(|(m, _)| m.d).collect();
    let histogram = metrics::histogram(&ds, ens.bin_width)?;
    report.ensemble = Some(EnsembleSummary {
        size: ens.size,
        p_excited: ens.p_excited,
        tau: cfg.tau,
        median_d: metrics::median(&ds).unwrap_or(f64::NAN),
        mean_d: ds.iter().sum::<f64>() / ds.len() as f64,
        fraction_d_le_0_05: ds.iter().filter(|&&d| d <= 0.05).count() as f64 / ds.len() as f64,
        mode_bin: metrics::histogram_mode(&histogram),
        histogram: histogram.clone(),
        ham_equilibrium_generalized: rates.equilibrium(1.0),
        ham_equilibrium_literal: rates.equilibrium(ens.p_excited),
    });

    let mut files = vec![
        DataFile::Table {
            name: "ensemble.csv".into(),
            header: vec!["index", "seed", "d", "d_squared", "d_literal"],
            rows: members
                .iter()
                .map(|(m, _)| vec![m.index.into(), m.seed.into(), m.d.into(), m.d_squared.into(), m.d_literal.into()])
                .collect(),
        },
        DataFile::Table {
            name: "histogram.csv".into(),
            header: vec!["lo", "hi", "count"],
            rows: histogram.iter().map(|b| vec![b.lo.into(), b.hi.into(), b.count.into()]).collect(),
        },
    ];
    let (members, trajs): (Vec<_>, Vec<_>) = members.into_iter().unzip();
    files.extend(trajs.into_iter().flatten());
    report.ensemble_members = Some(members);
    Ok(ScenarioResult { files, report })
}

/// Parameters of the sweep point with N₁ = N₂ = n.
pub fn sweep_params(base: &ModelParams, n: usize, scaling: SweepScaling) -> ModelParams {
    let band_width = match scaling {
        SweepScaling::FixedWidth => base.band_width,
        SweepScaling::ConstantDensity => base.band_width * n as f64 / base.n1 as f64,
    };
    ModelParams { n1: n, n2: n, band_width, ..base.clone() }
}

fn run_sweep(cfg: &RunConfig) -> Result<ScenarioResult> {
    let mut report = base_report(cfg)?;
    let sweep = &cfg.sweep;
    let grid = time_grid(0.0, cfg.t_max.max(cfg.tau), cfg.sample_step);
    let window = (grid[grid.len() - 1] - cfg.equilibrium_window, grid[grid.len() - 1]);

    let results: Vec<(SweepPoint, DataFile)> = sweep
        .n_values
        .par_iter()
        .map(|&n| {
            let params = sweep_params(&cfg.model, n, sweep.scaling);
            let ctx = |e: Error| e.context(format!("sweep point N = {n}"));
            let rates = ham::rates(&params).map_err(|e| ctx(e.into()))?;
            let (model, prop) = build(&params).map_err(ctx)?;
            let state0 = initial_state_excited(&model, cfg.initial_state.seed);
            let traj = Trajectory::simulate(&prop, &state0, &grid).map_err(|e| ctx(e.into()))?;
            let overlay = ham_overlay(Some(&rates), &model, &traj)?;
            let dev = metrics::deviation_d2(&traj.rho11(), &overlay.rho11, &grid, cfg.tau)?;
            let point = SweepPoint {
                n,
                band_width: params.band_width,
                d_squared: dev.d_squared,
                d: dev.d,
                equilibrium_exact: traj.window_mean(window.0, window.1, |s| s.rho.rho11).unwrap_or(f64::NAN),
                conditions: check_conditions(&params),
            };
            let file = DataFile::Trajectory {
                name: format!("sweep_n{n:04}.csv"),
                trajectory: traj,
                ham_rho11: overlay.rho11,
                ham_coherence: overlay.coherence,
            };
            Ok((point, file))
        })
        .collect::<Result<_>>()?;

    let (points, mut files): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.n as f64, p.d_squared)).collect();
    let (fit, fit_error) = match metrics::scaling_fit(&pairs) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    files.push(DataFile::Table {
        name: "sweep.csv".into(),
        header: vec!["n", "band_width", "d_squared", "d", "equilibrium_exact", "criterion_one", "criterion_two"],
        rows: points
            .iter()
            .map(|p| {
                vec![
                    p.n.into(),
                    p.band_width.into(),
                    p.d_squared.into(),
                    p.d.into(),
                    p.equilibrium_exact.into(),
                    p.conditions.criterion_one.into(),
                    p.conditions.criterion_two.into(),
                ]
            })
            .collect(),
    });
    report.sweep = Some(SweepSummary { scaling: sweep.scaling, points, fit, fit_error });
    Ok(ScenarioResult { files, report })
}

fn first_time(times: &[f64], abs: &[f64], below: f64) -> Option<f64> {
    times.iter().zip(abs).find(|(_, &a)| a <= below).map(|(&t, _)| t)
}

fn run_kernel(cfg: &RunConfig) -> Result<ScenarioResult> {
    let mut report = base_report(cfg)?;
    let kc = &cfg.kernel;
    let model = build_model(cfg.model.clone())?;
    let grid = time_grid(0.0, kc.t_max, cfg.sample_step);
    let f = band_kernel(&model, &grid);
    let abs: Vec<f64> = f.iter().map(|z| z.norm()).collect();

    let width = cfg.model.band_width;
    let period = if width > 0.0 { std::f64::consts::TAU * cfg.model.n1 as f64 / width } else { f64::INFINITY };
    let abs_f_at_period = if period.is_finite() { band_kernel(&model, &[period])[0].norm() } else { 1.0 };
    let half_period = 0.5 * period;
    let settle_time = {
        let last_above = grid
            .iter()
            .zip(&abs)
            .filter(|(&t, &a)| t <= half_period && a > kc.decay_threshold)
            .map(|(&t, _)| t)
            .next_back();
        match last_above {
            Some(t) if t + cfg.sample_step <= half_period.min(kc.t_max) => Some(t + cfg.sample_step),
            Some(_) => None,
            None => Some(0.0),
        }
    };

    let mut files = vec![DataFile::Table {
        name: "kernel.csv".into(),
        header: vec!["t", "re_f", "im_f", "abs_f"],
        rows: grid.iter().zip(&f).map(|(&t, z)| vec![t.into(), z.re.into(), z.im.into(), z.norm().into()]).collect(),
    }];

    let (mut probe_window, mut probe_max_rho11) = (None, None);
    if kc.recurrence_probe && kc.t_max > 0.0 {
        let (model, prop) = build(&cfg.model)?;
        let state0 = initial_state_excited(&model, cfg.initial_state.seed);
        let traj = Trajectory::simulate(&prop, &state0, &grid)?;
        let overlay = ham_overlay(report.rates.as_ref(), &model, &traj)?;
        probe_window = Some((kc.probe_from, kc.t_max));
        probe_max_rho11 = traj
            .samples
            .iter()
            .filter(|s| s.t >= kc.probe_from)
            .map(|s| s.rho.rho11)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        files.push(DataFile::Trajectory {
            name: "recurrence_probe.csv".into(),
            trajectory: traj,
            ham_rho11: overlay.rho11,
            ham_coherence: overlay.coherence,
        });
    }

    report.kernel = Some(KernelSummary {
        t_max: kc.t_max,
        analytic_first_zero: if width > 0.0 { std::f64::consts::TAU / width } else { f64::INFINITY },
        half_width: first_time(&grid, &abs, 0.5),
        one_over_e_width: first_time(&grid, &abs, (-1.0f64).exp()),
        decay_threshold: kc.decay_threshold,
        settle_time,
        recurrence_period: period,
        abs_f_at_period,
        probe_window,
        probe_max_rho11,
    });
    Ok(ScenarioResult { files, report })
}

fn run_reverse(cfg: &RunConfig) -> Result<ScenarioResult> {
    let mut report = base_report(cfg)?;
    let grid = time_grid(-cfg.t_max, cfg.t_max, cfg.sample_step);
    let (model, prop) = build(&cfg.model)?;
    let state0 = initial_state_excited(&model, cfg.initial_state.seed);
    let traj = Trajectory::simulate(&prop, &state0, &grid)?;
    let overlay = ham_overlay(report.rates.as_ref(), &model, &traj)?;

    let w = cfg.equilibrium_window;
    let forward_window = (cfg.t_max - w, cfg.t_max);
    let backward_window = (-cfg.t_max, -cfg.t_max + w);
    let forward_equilibrium = traj.window_mean(forward_window.0, forward_window.1, |s| s.rho.rho11).unwrap_or(f64::NAN);
    let backward_equilibrium =
        traj.window_mean(backward_window.0, backward_window.1, |s| s.rho.rho11).unwrap_or(f64::NAN);
    report.trajectory = Some(summarize(&traj, forward_window));

    let mut files = vec![DataFile::Trajectory {
        name: "reverse.csv".into(),
        trajectory: traj,
        ham_rho11: overlay.rho11,
        ham_coherence: overlay.coherence,
    }];

    let mut variant = None;
    if cfg.reverse.zero_width_variant {
        let params = ModelParams {
            band_width: cfg.reverse.variant_band_width,
            lambda: cfg.reverse.variant_lambda,
            ..cfg.model.clone()
        };
        let (vmodel, vprop) = build(&params)?;
        let vstate = initial_state_excited(&vmodel, cfg.initial_state.seed);
        let vtraj = Trajectory::simulate(&vprop, &vstate, &grid)?;
        let rho11 = vtraj.rho11();
        let (t, y) = nonnegative_window(&grid, &rho11, cfg.tau);
        let fit = metrics::fit_exponential(t, y, true, 1e-7, 1.0);
        let fitted: Vec<f64> = t.iter().map(|&ti| fit.eval(ti)).collect();
        let dev = metrics::deviation_d2(y, &fitted, t, cfg.tau)?;
        let late_window = (cfg.tau - w, cfg.tau);
        variant = Some(ZeroWidthVariant {
            band_width: params.band_width,
            lambda: params.lambda,
            conditions: check_conditions(&params),
            exp_fit: fit,
            d_vs_exp_fit: dev.d,
            late_mean: vtraj.window_mean(late_window.0, late_window.1, |s| s.rho.rho11).unwrap_or(f64::NAN),
            late_window,
        });
        let voverlay = ham_overlay(ham::rates(&params).ok().as_ref(), &vmodel, &vtraj)?;
        files.push(DataFile::Trajectory {
            name: "reverse_zero_width.csv".into(),
            trajectory: vtraj,
            ham_rho11: voverlay.rho11,
            ham_coherence: voverlay.coherence,
        });
    }

    report.reverse = Some(ReverseSummary {
        forward_equilibrium,
        backward_equilibrium,
        forward_window,
        backward_window,
        zero_width_variant: variant,
    });
    Ok(ScenarioResult { files, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_exact_multiples() {
        let g = time_grid(-3.0, 3.0, 0.5);
        assert_eq!(g.len(), 13);
        assert_eq!(g[0], -3.0);
        assert_eq!(g[12], 3.0);
        assert_eq!(time_grid(0.0, 0.0, 1.0), vec![0.0]);
    }

    #[test]
    fn sweep_scaling_modes() {
        let base = ModelParams::paper();
        let p = sweep_params(&base, 100, SweepScaling::ConstantDensity);
        assert!((p.band_width - 0.1).abs() < 1e-15);
        assert_eq!((p.n1, p.n2), (100, 100));
        let q = sweep_params(&base, 100, SweepScaling::FixedWidth);
        assert_eq!(q.band_width, 0.5);
        assert_eq!(sweep_params(&base, 500, SweepScaling::ConstantDensity), base);
    }

    #[test]
    fn nonnegative_window_slices() {
        let t = time_grid(-2.0, 5.0, 1.0);
        let v: Vec<f64> = t.iter().map(|x| x * 10.0).collect();
        let (ts, vs) = nonnegative_window(&t, &v, 3.0);
        assert_eq!(ts, &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(vs, &[0.0, 10.0, 20.0, 30.0]);
    }
}
