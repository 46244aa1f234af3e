//! Seeded lemma studies with a uniform JSON report.

use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{RelaxError, Result};
use crate::grid::PeriodicGrid;
use crate::inequality::{
    commutator_ratio_study, extension_energy, gaussian_difference, hls_probe, lgamma_chain_study,
    pointwise_lower_bound_study, trial_rng, ExtensionProblem, HlsConfig,
};
use crate::metrics::{
    bounded_lipschitz, exact_transport_cost, ground_distance_sq, wasserstein2_1d, wasserstein2_torus_1d,
    Geometry, GridMeasure, Support,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Study {
    Commutator,
    Hls,
    Extension,
    LowerBounds,
    MetricSanity,
}

impl Study {
    pub const ALL: [Study; 5] = [
        Study::Commutator,
        Study::Hls,
        Study::Extension,
        Study::LowerBounds,
        Study::MetricSanity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Study::Commutator => "commutator",
            Study::Hls => "hls",
            Study::Extension => "extension",
            Study::LowerBounds => "lower_bounds",
            Study::MetricSanity => "metric_sanity",
        }
    }
}

impl FromStr for Study {
    type Err = RelaxError;

    fn from_str(s: &str) -> Result<Self> {
        Study::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| RelaxError::Config {
            key: "study".into(),
            message: format!(
                "unknown study `{s}`; expected one of {}",
                Study::ALL.map(Study::name).join(", ")
            ),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyReport {
    pub lemma: &'static str,
    pub parameters: Value,
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_ratio: Option<f64>,
    pub pass: bool,
    pub details: Value,
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

pub fn run_study(study: Study, seed: u64) -> Result<StudyReport> {
    match study {
        Study::Commutator => commutator(seed),
        Study::Hls => hls(seed),
        Study::Extension => extension(),
        Study::LowerBounds => lower_bounds(seed),
        Study::MetricSanity => metric_sanity(seed),
    }
}

fn commutator(seed: u64) -> Result<StudyReport> {
    let (trials, sizes, b, s) = (100, [64, 128, 256], 0.25, 2.0);
    let st = commutator_ratio_study(trials, &sizes, 1, b, s, seed)?;
    Ok(StudyReport {
        lemma: "fractional_commutator",
        parameters: json!({ "dim": 1, "b": b, "s": s, "sizes": sizes, "seed": seed }),
        trials,
        max_ratio: Some(st.reports.iter().map(|r| r.max_ratio).fold(0.0, f64::max)),
        energy_ratio: None,
        pass: st.pass,
        details: to_value(&st),
    })
}

fn hls(seed: u64) -> Result<StudyReport> {
    let p = 4.0 / 3.0;
    let cfg = HlsConfig::new(0.5, 1, p, p, 50, seed);
    let r = hls_probe(&cfg)?;
    Ok(StudyReport {
        lemma: "hardy_littlewood_sobolev",
        parameters: to_value(&cfg),
        trials: cfg.trials,
        max_ratio: Some(r.levels.iter().map(|l| l.max_ratio).fold(0.0, f64::max)),
        energy_ratio: None,
        pass: r.pass,
        details: to_value(&r),
    })
}

/// `(α, separation, width)` of the Gaussian-difference family.
pub const EXTENSION_FAMILY: [(f64, f64, f64); 4] = [(0.5, 1.0, 0.4), (0.5, 2.0, 0.7), (0.3, 1.5, 0.5), (0.8, 0.8, 0.3)];

fn extension() -> Result<StudyReport> {
    let grid = PeriodicGrid::new(1, 256, 40.0)?;
    let results = EXTENSION_FAMILY
        .par_iter()
        .map(|&(alpha, sep, width)| extension_energy(&ExtensionProblem::new(gaussian_difference(&grid, sep, width), alpha)))
        .collect::<Result<Vec<_>>>()?;
    let worst = results
        .iter()
        .map(|r| r.energy_ratio)
        .fold(1.0f64, |w, r| if (r - 1.0).abs() > (w - 1.0).abs() { r } else { w });
    let pass = results
        .iter()
        .all(|r| (0.98..=1.02).contains(&r.energy_ratio) && r.relative_change < 0.005);
    Ok(StudyReport {
        lemma: "riesz_extension_identity",
        parameters: json!({ "dim": 1, "n": grid.n(), "length": grid.length(), "family": EXTENSION_FAMILY }),
        trials: results.len(),
        max_ratio: None,
        energy_ratio: Some(worst),
        pass,
        details: to_value(&results),
    })
}

fn lower_bounds(seed: u64) -> Result<StudyReport> {
    let gammas = [1.0, 1.5, 2.0, 3.0];
    let pairs = 100_000;
    let chain_pairs = 1000;
    let point = pointwise_lower_bound_study(pairs, &gammas, seed);
    let chain = lgamma_chain_study(chain_pairs, seed)?;
    Ok(StudyReport {
        lemma: "relative_internal_energy_lower_bounds",
        parameters: json!({ "gammas": gammas, "pairs_per_gamma": pairs, "chain_pairs": chain_pairs, "seed": seed }),
        trials: pairs * gammas.len() + chain_pairs,
        max_ratio: Some(chain.max_ratio),
        energy_ratio: None,
        pass: point.pass && chain.pass,
        details: json!({ "pointwise": point, "chain": chain }),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricSanity {
    pub bl_pairs: usize,
    /// Largest `d_BL / W₂`.
    pub max_bl_over_w2: f64,
    pub bl_violations: usize,
    pub lp_cases: usize,
    pub max_lp_error: f64,
    pub lp_failures: usize,
}

fn random_weights<R: Rng>(rng: &mut R, len: usize, max_points: usize) -> Vec<f64> {
    let k = rng.gen_range(1..=max_points);
    let mut w = vec![0.0; len];
    for _ in 0..k {
        w[rng.gen_range(0..len)] += rng.gen_range(0.05..1.0);
    }
    w
}

fn normalized(grid: &PeriodicGrid, w: Vec<f64>, geometry: Geometry) -> Result<GridMeasure> {
    let s = w.iter().sum::<f64>() * grid.cell_volume();
    GridMeasure::new(grid, w.into_iter().map(|v| v / s).collect(), geometry)
}

/// `d_BL ≤ W₂` on dense random pairs and quantile W₂ against the dense
/// transport LP on sparse instances with at most 16 atoms.
pub fn metric_sanity_study(bl_pairs: usize, lp_cases: usize, seed: u64) -> Result<MetricSanity> {
    let bl_grid = PeriodicGrid::new(1, 32, 3.0)?;
    let bl: Vec<f64> = (0..bl_pairs)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut mk = || {
                let w = (0..bl_grid.len()).map(|_| rng.gen_range(0.0..1.0f64).powi(3)).collect();
                normalized(&bl_grid, w, Geometry::LineSegment)
            };
            let (a, b) = (mk()?, mk()?);
            let d = bounded_lipschitz(&a, &b)?.value;
            let w2 = wasserstein2_1d(&a, &b, Support::Atoms)?;
            Ok(if w2 > 0.0 { d / w2 } else { 0.0 })
        })
        .collect::<Result<_>>()?;

    let lp_grid = PeriodicGrid::new(1, 16, 5.0)?;
    let lp: Vec<f64> = (0..lp_cases)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, bl_pairs + t);
            let geometry = if t % 2 == 0 { Geometry::LineSegment } else { Geometry::Torus };
            let a = normalized(&lp_grid, random_weights(&mut rng, 16, 16), geometry)?;
            let b = normalized(&lp_grid, random_weights(&mut rng, 16, 16), geometry)?;
            let quantile = match geometry {
                Geometry::LineSegment => wasserstein2_1d(&a, &b, Support::Atoms)?,
                Geometry::Torus => wasserstein2_torus_1d(&a, &b, Support::Atoms)?,
            };
            let (pa, pb) = (a.probability_masses()?, b.probability_masses()?);
            let exact = exact_transport_cost(&pa, &pb, |i, j| ground_distance_sq(&lp_grid, geometry, i, j))?
                .max(0.0)
                .sqrt();
            Ok((quantile - exact).abs())
        })
        .collect::<Result<_>>()?;

    Ok(MetricSanity {
        bl_pairs,
        max_bl_over_w2: bl.iter().cloned().fold(0.0, f64::max),
        bl_violations: bl.iter().filter(|r| **r > 1.0 + 1e-10).count(),
        lp_cases,
        max_lp_error: lp.iter().cloned().fold(0.0, f64::max),
        lp_failures: lp.iter().filter(|e| **e > 1e-8).count(),
    })
}

fn metric_sanity(seed: u64) -> Result<StudyReport> {
    let m = metric_sanity_study(100, 500, seed)?;
    Ok(StudyReport {
        lemma: "metric_sanity",
        parameters: json!({ "bl_grid": [32, 3.0], "lp_grid": [16, 5.0], "max_points": 16, "lp_tolerance": 1e-8, "seed": seed }),
        trials: m.bl_pairs + m.lp_cases,
        max_ratio: Some(m.max_bl_over_w2),
        energy_ratio: None,
        pass: m.bl_violations == 0 && m.lp_failures == 0,
        details: to_value(&m),
    })
}
