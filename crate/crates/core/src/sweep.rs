//! ε-sweeps: distances between relaxed and limit trajectories, rate fits
//! and trajectory-level identity checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::energetics::{energy_report, modulated_internal, modulated_internal_rate, norm, NormKind};
use crate::error::{config_err, RelaxError, Result};
use crate::euler_riesz::{run_er, StepPolicy};
use crate::fpme::{limit_velocity, run_fpme};
use crate::grid::{Field, PeriodicGrid, VectorField};
use crate::metrics::{
    bounded_lipschitz_vector, wasserstein2_1d, wasserstein2_entropic, wasserstein2_torus_1d, Geometry,
    GridMeasure, Support,
};
use crate::report::CsvRow;
use crate::state::{FluidState, LimitState, Params, Regime};
use crate::trajectory::{OutputSchedule, Trajectory};

/// Least-squares fit of `log error = slope·log ε + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    /// Some error was zero and replaced by machine epsilon.
    pub floored: bool,
}

pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 3 {
        return Err(RelaxError::Insufficient(format!(
            "{} points; a rate fit needs at least 3",
            pairs.len()
        )));
    }
    let mut floored = false;
    let mut pts = Vec::with_capacity(pairs.len());
    for &(eps, err) in pairs {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(RelaxError::Range {
                what: "epsilon",
                value: eps,
                range: "(0, ∞)".into(),
            });
        }
        if !(err >= 0.0 && err.is_finite()) {
            return Err(RelaxError::Range {
                what: "error",
                value: err,
                range: "[0, ∞)".into(),
            });
        }
        let e = if err == 0.0 {
            floored = true;
            f64::EPSILON
        } else {
            err
        };
        pts.push((eps.ln(), e.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(RelaxError::Insufficient("all ε values coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        residual,
        floored,
    })
}

/// Which distances [`theorem_lhs`] evaluates.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MetricOptions {
    pub geometry: Geometry,
    pub bounded_lipschitz: bool,
}

fn squared_w2(a: &Field, b: &Field, geometry: Geometry) -> Result<Option<f64>> {
    let grid = a.grid();
    let mu = GridMeasure::from_field(a, geometry);
    let nu = GridMeasure::from_field(b, geometry);
    if grid.dim() == 1 {
        let w = match geometry {
            Geometry::Torus => wasserstein2_torus_1d(&mu, &nu, Support::Cells)?,
            Geometry::LineSegment => wasserstein2_1d(&mu, &nu, Support::Cells)?,
        };
        return Ok(Some(w * w));
    }
    if grid.n() <= 64 {
        let h = grid.spacing();
        return Ok(Some(wasserstein2_entropic(&mu, &nu, 2.0 * h * h)?.w2_sq.max(0.0)));
    }
    Ok(None)
}

/// One CSV row per shared output time: energies of the relaxed state,
/// modulated energies against the limit, and the distances entering the
/// convergence statements.
pub fn theorem_lhs(
    er: &Trajectory<FluidState>,
    fpme: &Trajectory<LimitState>,
    params: &Params,
    opts: MetricOptions,
) -> Result<Vec<CsvRow>> {
    let pairs = crate::metrics::matched_pairs(er, fpme)?;
    pairs
        .par_iter()
        .map(|(s, l)| {
            let u = limit_velocity(&l.rho, params)?;
            let report = energy_report(s, Some((&l.rho, &u)), params)?;
            let mut row = CsvRow::from(&report);
            let diff = &s.rho - &l.rho;
            row.lgamma_err_sq = Some(norm(&diff, NormKind::Lp(params.gamma()))?.powi(2));
            let mbar = u.scale_by(&l.rho);
            let dm = s.m.zip_comps(&mbar, |a, b| a - b);
            row.l1_momentum_err_sq = Some(dm.norm_sq().map(f64::sqrt).integral().powi(2));
            row.d2_sq = squared_w2(&s.rho, &l.rho, opts.geometry)?;
            if opts.bounded_lipschitz {
                row.dbl_momentum_sq = Some(bounded_lipschitz_vector(&s.m, &mbar, opts.geometry)?.powi(2));
            }
            Ok(row)
        })
        .collect()
}

fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2)
        .zip(f.windows(2))
        .map(|(t, f)| 0.5 * (f[0] + f[1]) * (t[1] - t[0]))
        .sum()
}

fn sup(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    v.fold(None, |acc, x| match (acc, x) {
        (a, None) => a,
        (None, Some(x)) => Some(x),
        (Some(a), Some(x)) => Some(a.max(x)),
    })
}

fn integral(rows: &[CsvRow], f: impl Fn(&CsvRow) -> Option<f64>) -> Option<f64> {
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let v: Option<Vec<f64>> = rows.iter().map(f).collect();
    v.map(|v| trapezoid(&t, &v))
}

/// Sup-in-time and time-integrated aggregates of one ε run.
#[derive(Clone, Debug, Serialize)]
pub struct Aggregates {
    pub sup_d2_sq: Option<f64>,
    pub sup_neg_sobolev_sq: f64,
    /// `√(sup d₂² + sup ‖ρ^ε − ρ‖²_{Ḣ^{−(d−α)/2}})`.
    pub res2: Option<f64>,
    /// `√(∫ d_BL(m^ε, ρu)² dt)`.
    pub dbl_integral: Option<f64>,
    /// `sup ‖ρ^ε − ρ‖_{L^γ}`.
    pub res3: f64,
    /// `√(∫ ‖m^ε − ρu‖²_{L¹} dt)`.
    pub l1_integral: f64,
}

pub fn aggregates(rows: &[CsvRow]) -> Aggregates {
    let sup_d2_sq = sup(rows.iter().map(|r| r.d2_sq));
    let sup_neg = sup(rows.iter().map(|r| r.neg_sobolev_sq)).unwrap_or(0.0);
    Aggregates {
        sup_d2_sq,
        sup_neg_sobolev_sq: sup_neg,
        res2: sup_d2_sq.map(|d| (d + sup_neg).sqrt()),
        dbl_integral: integral(rows, |r| r.dbl_momentum_sq).map(f64::sqrt),
        res3: sup(rows.iter().map(|r| r.lgamma_err_sq)).unwrap_or(0.0).sqrt(),
        l1_integral: integral(rows, |r| r.l1_momentum_err_sq).unwrap_or(0.0).sqrt(),
    }
}

/// Modulated free energy coercivity at every row: the internal part
/// dominates the (non-positive) attractive interaction part.
pub fn coercive(rows: &[CsvRow], params: &Params) -> bool {
    if params.c_k() <= 0.0 {
        return true;
    }
    rows.iter().all(|r| {
        let int = r.mod_internal.unwrap_or(0.0);
        let inter = r.mod_interaction.unwrap_or(0.0).abs();
        int + 1e-14 * (int + inter) >= inter
    })
}

/// Largest empirical constant in the modulated energy inequality
///
/// `d/dt[K + F/ε] + K/ε ≤ C·((γ−1)/ε·c_P∫𝒰(ρ^ε|ρ) + |c_K|/ε·‖ρ^ε−ρ‖²_{Ḣ^{−(d−α)/2}} + ε)`,
///
/// with `K = ½∫ρ^ε|u^ε − u|²` and `F` the modulated free energy; the time
/// derivative is a centered difference of the stored series.
pub fn est_mod_constant(rows: &[CsvRow], params: &Params) -> Result<f64> {
    if rows.len() < 3 {
        return Err(RelaxError::Insufficient("est_mod needs at least 3 snapshots".into()));
    }
    let eps = params.epsilon();
    let get = |r: &CsvRow| -> Result<(f64, f64, f64, f64)> {
        match (r.mod_kinetic, r.mod_internal, r.mod_interaction, r.neg_sobolev_sq) {
            (Some(k), Some(i), Some(j), Some(n)) => Ok((k, i, j, n)),
            _ => Err(RelaxError::Insufficient("rows lack modulated energies".into())),
        }
    };
    let vals: Vec<(f64, f64, f64, f64)> = rows.iter().map(get).collect::<Result<_>>()?;
    let q: Vec<f64> = vals.iter().map(|(k, i, j, _)| k + (i + j) / eps).collect();
    let mut worst: f64 = 0.0;
    for k in 1..rows.len() - 1 {
        let dq = (q[k + 1] - q[k - 1]) / (rows[k + 1].t - rows[k - 1].t);
        let (kin, int, _, neg) = vals[k];
        let lhs = dq + kin / eps;
        let bound = (params.gamma() - 1.0) / eps * int + params.c_k().abs() / eps * neg + eps;
        worst = worst.max(lhs.max(0.0) / bound);
    }
    Ok(worst)
}

/// Restriction of a field on the `2n` grid to the nodes of the `n` grid.
fn restrict(fine: &Field, coarse: &PeriodicGrid) -> Result<Field> {
    let n = coarse.n();
    let nf = fine.grid().n();
    let v = fine.values();
    let vals: Vec<f64> = if coarse.dim() == 1 {
        (0..n).map(|i| v[2 * i]).collect()
    } else {
        (0..n * n).map(|i| v[(2 * (i / n)) * nf + 2 * (i % n)]).collect()
    };
    Field::from_values(coarse, vals)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    /// `√(sup d₂² + sup neg-Sobolev²)`.
    Res2,
    /// `sup ‖ρ^ε − ρ‖_{L^γ}`.
    Res3,
}

impl ErrorMetric {
    pub fn for_regime(regime: Regime) -> Self {
        if regime.has_pressure() {
            ErrorMetric::Res3
        } else {
            ErrorMetric::Res2
        }
    }

    fn primary(self, a: &Aggregates) -> Option<f64> {
        match self {
            ErrorMetric::Res2 => a.res2,
            ErrorMetric::Res3 => Some(a.res3),
        }
    }

    fn secondary(self, a: &Aggregates) -> Option<f64> {
        match self {
            ErrorMetric::Res2 => a.dbl_integral,
            ErrorMetric::Res3 => Some(a.l1_integral),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonResult {
    pub epsilon: f64,
    pub aggregates: Aggregates,
    pub primary_error: Option<f64>,
    pub secondary_error: Option<f64>,
    /// Admitted by the resolution gate.
    pub resolved: bool,
    pub coercive: bool,
    pub est_mod_constant: f64,
    pub steps: usize,
    pub mass_drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepMetadata {
    pub config_hash: String,
    pub seed: u64,
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub geometry: Geometry,
    pub regime: Regime,
    pub w2_convention: &'static str,
    pub neg_sobolev_convention: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub epsilons: Vec<f64>,
    pub metric: ErrorMetric,
    pub per_epsilon: Vec<EpsilonResult>,
    /// Primary metric between limit runs at `n` and `2n`.
    pub truncation_estimate: f64,
    pub fit: Option<RateFit>,
    pub secondary_fit: Option<RateFit>,
    /// Why a fit is missing, if it is.
    pub fit_note: Option<String>,
    /// Primary error strictly decreases with ε over the resolved points.
    pub monotone: bool,
    pub health_green: bool,
    /// max/min of the est_mod constants over ε.
    pub est_mod_ratio: f64,
    pub metadata: SweepMetadata,
}

pub struct SweepOutput {
    pub result: SweepResult,
    /// Per-ε CSV rows, ordered as `result.epsilons`.
    pub rows: Vec<Vec<CsvRow>>,
}

fn limit_run(
    cfg: &Config,
    params: &Params,
    grid: &PeriodicGrid,
    schedule: &OutputSchedule,
    dt_max: f64,
) -> Result<Trajectory<LimitState>> {
    let mut local = cfg.clone();
    local.grid.n = grid.n();
    let rho0 = local.initial_state(params)?.rho;
    run_fpme(&rho0, params, dt_max, schedule, &mut [])
}

fn truncation_estimate(
    metric: ErrorMetric,
    coarse: &Trajectory<LimitState>,
    fine: &Trajectory<LimitState>,
    params: &Params,
    geometry: Geometry,
) -> Result<f64> {
    let grid = coarse.grid().clone();
    let mut d2: f64 = 0.0;
    let mut neg: f64 = 0.0;
    let mut lg: f64 = 0.0;
    for (c, f) in coarse.snapshots.iter().zip(&fine.snapshots) {
        let f = restrict(&f.rho, &grid)?;
        let f = f.scale(1.0 / f.integral());
        let diff = &c.rho - &f;
        match metric {
            ErrorMetric::Res2 => {
                d2 = d2.max(squared_w2(&c.rho, &f, geometry)?.unwrap_or(0.0));
                neg = neg.max(crate::energetics::neg_sobolev_sq(&c.rho, &f, params.alpha())?);
            }
            ErrorMetric::Res3 => lg = lg.max(norm(&diff, NormKind::Lp(params.gamma()))?),
        }
    }
    Ok(match metric {
        ErrorMetric::Res2 => (d2 + neg).sqrt(),
        ErrorMetric::Res3 => lg,
    })
}

/// Runs the limit flow at `n` and `2n` and the relaxed flow for every ε of
/// the config, then fits the convergence rate of the regime's error metric.
pub fn run_sweep(cfg: &Config, seed: u64) -> Result<SweepOutput> {
    let epsilons = cfg.epsilons();
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(config_err("params.epsilon", "the sweep needs a strictly decreasing list"));
    }
    if !cfg.initial.well_prepared {
        return Err(config_err("initial.well_prepared", "the sweep needs well-prepared data"));
    }
    let grid = cfg.grid()?;
    let schedule = cfg.schedule()?;
    let policy: StepPolicy = cfg.step_policy()?;
    let base = cfg.params_for(epsilons[0])?;
    let metric = ErrorMetric::for_regime(base.regime());
    let opts = MetricOptions {
        geometry: cfg.run.geometry,
        bounded_lipschitz: cfg.run.bounded_lipschitz,
    };
    let fine_grid = PeriodicGrid::new(grid.dim(), 2 * grid.n(), grid.length())?;
    let (fpme, fpme_fine) = rayon::join(
        || limit_run(cfg, &base, &grid, &schedule, policy.dt_max),
        || limit_run(cfg, &base, &fine_grid, &schedule, policy.dt_max),
    );
    let (fpme, fpme_fine) = (fpme?, fpme_fine?);
    let trunc = truncation_estimate(metric, &fpme, &fpme_fine, &base, opts.geometry)?;

    let runs: Vec<(EpsilonResult, Vec<CsvRow>)> = epsilons
        .par_iter()
        .map(|&eps| {
            let params = cfg.params_for(eps)?;
            let init = cfg.initial_state(&params)?;
            let er = run_er(&init, &params, &policy, &schedule, &mut [])?;
            let rows = theorem_lhs(&er, &fpme, &params, opts)?;
            let agg = aggregates(&rows);
            let primary = metric.primary(&agg);
            let mass0 = init.mass();
            let mass_drift = er.snapshots.iter().map(|s| (s.mass() - mass0).abs()).fold(0.0, f64::max);
            let res = EpsilonResult {
                epsilon: eps,
                primary_error: primary,
                secondary_error: metric.secondary(&agg),
                resolved: primary.is_some_and(|p| p >= 10.0 * trunc),
                coercive: coercive(&rows, &params),
                est_mod_constant: est_mod_constant(&rows, &params)?,
                steps: er.steps.len(),
                mass_drift,
                aggregates: agg,
            };
            Ok((res, rows))
        })
        .collect::<Result<_>>()?;
    let (per_epsilon, rows): (Vec<_>, Vec<_>) = runs.into_iter().unzip();

    let resolved: Vec<&EpsilonResult> = per_epsilon.iter().filter(|r| r.resolved).collect();
    let primary_pts: Vec<(f64, f64)> = resolved
        .iter()
        .filter_map(|r| r.primary_error.map(|e| (r.epsilon, e)))
        .collect();
    let secondary_pts: Vec<(f64, f64)> = resolved
        .iter()
        .filter_map(|r| r.secondary_error.map(|e| (r.epsilon, e)))
        .collect();
    let (fit, fit_note) = match fit_rate(&primary_pts) {
        Ok(f) => (Some(f), None),
        Err(e) => {
            let dropped = per_epsilon.len() - resolved.len();
            let note = if dropped > 0 {
                format!("{e} ({dropped} ε excluded by the resolution gate)")
            } else {
                e.to_string()
            };
            (None, Some(note))
        }
    };
    let secondary_fit = fit_rate(&secondary_pts).ok();
    let monotone = primary_pts.windows(2).all(|w| w[1].1 < w[0].1);
    let consts: Vec<f64> = per_epsilon.iter().map(|r| r.est_mod_constant).collect();
    let cmax = consts.iter().cloned().fold(0.0, f64::max);
    let cmin = consts.iter().cloned().fold(f64::INFINITY, f64::min);
    let est_mod_ratio = if cmax == 0.0 { 1.0 } else { cmax / cmin };
    let result = SweepResult {
        epsilons,
        metric,
        health_green: per_epsilon.iter().all(|r| r.coercive),
        per_epsilon,
        truncation_estimate: trunc,
        fit,
        secondary_fit,
        fit_note,
        monotone,
        est_mod_ratio,
        metadata: SweepMetadata {
            config_hash: cfg.hash(),
            seed,
            dim: grid.dim(),
            n: grid.n(),
            length: grid.length(),
            geometry: opts.geometry,
            regime: base.regime(),
            w2_convention: "cell histograms; geodesic distance on the torus",
            neg_sobolev_convention: "sum over nonzero modes of |ξ|^(α−d)|ĉ|² times the box volume",
        },
    };
    Ok(SweepOutput { result, rows })
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityStudy {
    pub epsilon: f64,
    pub cadences: Vec<f64>,
    /// Largest `|centered difference − right-hand side|` per cadence.
    pub residuals: Vec<f64>,
    pub orders: Vec<f64>,
    pub pass: bool,
}

/// Time derivative of `∫𝒰(ρ^ε|ρ)` by centered differences of stored
/// snapshots against the spectral right-hand side, at the interior output
/// times of the coarsest cadence, for each cadence. Both solvers take at
/// most a quarter of the cadence per step, so time steps and output
/// spacing are refined together.
pub fn modulated_internal_identity_study(cfg: &Config, epsilon: f64, cadences: &[f64]) -> Result<IdentityStudy> {
    if cadences.len() < 2 || cadences.windows(2).any(|w| w[1] >= w[0]) {
        return Err(RelaxError::Insufficient("need at least two decreasing cadences".into()));
    }
    let params = cfg.params_for(epsilon)?;
    let grid = cfg.grid()?;
    let policy = cfg.step_policy()?;
    let t_end = cfg.run.t_end;
    let gamma = params.gamma();
    let init = cfg.initial_state(&params)?;
    let coarse = OutputSchedule::every(t_end, cadences[0])?;
    let probe: Vec<f64> = coarse.times()[1..coarse.times().len() - 1].to_vec();
    let residuals: Vec<f64> = cadences
        .par_iter()
        .map(|&c| {
            let schedule = OutputSchedule::every(t_end, c)?;
            let dt_max = policy.dt_max.min(0.25 * c);
            let local = StepPolicy::new(policy.cfl, policy.epsilon_fraction, policy.dt_min.min(dt_max), dt_max)?;
            let er = run_er(&init, &params, &local, &schedule, &mut [])?;
            let fp = limit_run(cfg, &params, &grid, &schedule, dt_max)?;
            let times = schedule.times();
            let value = |k: usize| modulated_internal(&er.snapshots[k].rho, &fp.snapshots[k].rho, gamma, 1.0);
            let mut worst: f64 = 0.0;
            for &t in &probe {
                let k = times
                    .iter()
                    .position(|s| (s - t).abs() < 1e-9)
                    .ok_or_else(|| RelaxError::Boundary(format!("t = {t} is not an output time")))?;
                let fd = (value(k + 1)? - value(k - 1)?) / (times[k + 1] - times[k - 1]);
                let u: VectorField = limit_velocity(&fp.snapshots[k].rho, &params)?;
                let rhs = modulated_internal_rate(&er.snapshots[k], &fp.snapshots[k].rho, &u, gamma)?;
                worst = worst.max((fd - rhs).abs());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let orders: Vec<f64> = residuals
        .windows(2)
        .zip(cadences.windows(2))
        .map(|(r, c)| (r[0] / r[1]).ln() / (c[0] / c[1]).ln())
        .collect();
    let pass = orders.iter().all(|o| *o >= 2.0 - 0.05);
    Ok(IdentityStudy {
        epsilon,
        cadences: cadences.to_vec(),
        residuals,
        orders,
        pass,
    })
}
