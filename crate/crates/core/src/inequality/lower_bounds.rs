//! Lower bounds of the relative internal energy.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::commutator::band_limited;
use super::trial_rng;
use crate::energetics::modulated_internal;
use crate::error::Result;
use crate::grid::{Field, PeriodicGrid};
use crate::state::relative_internal_density;

const REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    pub gammas: Vec<f64>,
    pub pairs_per_gamma: usize,
    pub seed: u64,
    pub violations: usize,
    /// Largest `(bound − integrand)/bound` seen; negative when all hold.
    pub max_ratio: f64,
    pub pass: bool,
}

/// Pointwise check `𝒰(a|b) ≥ (γ/2)·min(a^{γ−2}, b^{γ−2})·|a − b|²` on
/// log-uniform pairs in `[e^{−6}, e^{3}]`.
pub fn pointwise_lower_bound_study(pairs: usize, gammas: &[f64], seed: u64) -> LowerBoundReport {
    let per_gamma: Vec<(usize, f64)> = gammas
        .par_iter()
        .enumerate()
        .map(|(k, &gamma)| {
            let mut rng = trial_rng(seed, k);
            let mut bad = 0;
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..pairs {
                let a: f64 = rng.gen_range(-6.0f64..3.0).exp();
                let b: f64 = rng.gen_range(-6.0f64..3.0).exp();
                let lhs = relative_internal_density(a, b, gamma);
                let rhs = 0.5 * gamma * a.powf(gamma - 2.0).min(b.powf(gamma - 2.0)) * (a - b).powi(2);
                if rhs > 0.0 {
                    let gap = (rhs - lhs) / rhs;
                    worst = worst.max(gap);
                    if gap > REL_TOL {
                        bad += 1;
                    }
                }
            }
            (bad, worst)
        })
        .collect();
    let violations = per_gamma.iter().map(|p| p.0).sum();
    LowerBoundReport {
        gammas: gammas.to_vec(),
        pairs_per_gamma: pairs,
        seed,
        violations,
        max_ratio: per_gamma.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
        pass: violations == 0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub pairs: usize,
    pub seed: u64,
    /// Violations of each link of the chain, in order.
    pub step_violations: [usize; 4],
    /// Largest `‖ρ − ρ̄‖²_{L^γ} / (C^{2/γ}∫𝒰(ρ|ρ̄))` (≤ 1 when the chain holds).
    pub max_ratio: f64,
    pub pass: bool,
}

fn lp_pow(f: &Field, p: f64) -> f64 {
    f.map(|v| v.abs().powf(p)).integral()
}

/// Links of the interpolation chain for one pair; each entry is
/// `(smaller side, larger side)`.
fn chain(rho: &Field, rb: &Field, gamma: f64) -> Result<([(f64, f64); 4], f64)> {
    let diff = rho - rb;
    let w = rho.zip_map(rb, |a, b| 0.5 * gamma * a.powf(gamma - 2.0).min(b.powf(gamma - 2.0)));
    let weighted = (&w * &diff.map(|v| v * v)).integral();
    let rel = modulated_internal(rho, rb, gamma, 1.0)?;
    let big = rho.zip_map(rb, |a, b| a.powf(gamma).max(b.powf(gamma))).integral();
    let sum_norms = lp_pow(rho, gamma) + lp_pow(rb, gamma);
    let h = 0.5 * (2.0 - gamma);
    let holder = (0.5 * gamma).powf(-0.5 * gamma) * weighted.powf(0.5 * gamma) * big.powf(h);
    let c = (0.5 * gamma).powf(-0.5 * gamma) * sum_norms.powf(h);
    let lg_sq = lp_pow(&diff, gamma).powf(2.0 / gamma);
    let bound = c.powf(2.0 / gamma) * rel;
    let links = [
        (weighted, rel),
        (lp_pow(&diff, gamma), holder),
        (big, sum_norms),
        (lg_sq, bound),
    ];
    Ok((links, if bound > 0.0 { lg_sq / bound } else { 0.0 }))
}

fn random_density<R: Rng>(grid: &PeriodicGrid, rng: &mut R) -> Field {
    let amp = rng.gen_range(0.2..2.5);
    let f = band_limited(grid, rng, 8, 1.0);
    let scale = amp / f.max_abs().max(f64::MIN_POSITIVE);
    let e = f.map(|v| (scale * v).exp());
    e.scale(1.0 / e.integral())
}

/// The `L^γ` interpolation chain on random positive unit-mass pairs, with
/// `γ` uniform in `[1, 2]` (the endpoints are always included).
pub fn lgamma_chain_study(pairs: usize, seed: u64) -> Result<ChainReport> {
    let grid = PeriodicGrid::standard(1, 64)?;
    let out: Vec<([bool; 4], f64)> = (0..pairs)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let gamma = match t {
                0 => 1.0,
                1 => 2.0,
                _ => rng.gen_range(1.0..=2.0),
            };
            let rho = random_density(&grid, &mut rng);
            let rb = random_density(&grid, &mut rng);
            let (links, ratio) = chain(&rho, &rb, gamma)?;
            let bad = links.map(|(lo, hi)| lo > hi * (1.0 + REL_TOL) + 1e-300);
            Ok((bad, ratio))
        })
        .collect::<Result<_>>()?;
    let mut step_violations = [0; 4];
    for (bad, _) in &out {
        for (k, b) in bad.iter().enumerate() {
            step_violations[k] += *b as usize;
        }
    }
    Ok(ChainReport {
        pairs,
        seed,
        step_violations,
        max_ratio: out.iter().map(|o| o.1).fold(0.0, f64::max),
        pass: step_violations.iter().all(|v| *v == 0),
    })
}
