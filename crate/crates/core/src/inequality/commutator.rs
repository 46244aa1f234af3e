//! The commutator `H = Λ^{−b}∇·(ug) − (u·∇)Λ^{−b}g` on the torus.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::trial_rng;
use crate::energetics::{norm, NormKind};
use crate::error::{RelaxError, Result};
use crate::grid::{
    dealiased_product, fractional_laplacian, partial, spectral_divergence, spectral_gradient,
    Field, PeriodicGrid, VectorField,
};

fn check_mean_zero(f: &Field, what: &str) -> Result<()> {
    let tol = 1e-12 * f.max_abs().max(1.0);
    if f.mean().abs() > tol {
        return Err(RelaxError::MeanZero(format!("{what} has mean {:e}", f.mean())));
    }
    Ok(())
}

/// Nodal values of `H` for mean-zero `u` and `g`; products are dealiased.
pub fn commutator_field(u: &VectorField, g: &Field, b: f64) -> Result<Field> {
    if u.grid() != g.grid() || u.comps().len() != g.grid().dim() {
        return Err(RelaxError::GridMismatch("u and g live on different grids".into()));
    }
    if !(0.0..1.0).contains(&b) {
        return Err(RelaxError::Range {
            what: "b",
            value: b,
            range: "[0, 1)".into(),
        });
    }
    check_mean_zero(g, "g")?;
    for c in u.comps() {
        check_mean_zero(c, "u")?;
    }
    let lg = fractional_laplacian(g, -b)?;
    let flux = u.map_comps(|c| dealiased_product(c, g));
    let first = fractional_laplacian(&spectral_divergence(&flux), -b)?;
    let mut second = Field::zeros(g.grid());
    for (a, c) in u.comps().iter().enumerate() {
        second = &second + &dealiased_product(c, &partial(&lg, a));
    }
    Ok(&first - &second)
}

/// `‖H‖ / (‖u‖_{H^s}‖Λ^{−b}g‖)` and `|∫H| / (‖∇u‖‖Λ^{−b}g‖)`.
pub fn commutator_ratio(u: &VectorField, g: &Field, b: f64, s: f64) -> Result<(f64, f64)> {
    let h = commutator_field(u, g, b)?;
    let lg = fractional_laplacian(g, -b)?;
    let lg_norm = lg.inner(&lg).sqrt();
    let mut hs = 0.0;
    let mut grad = 0.0;
    for c in u.comps() {
        hs += norm(c, NormKind::Hs(s))?.powi(2);
        grad += spectral_gradient(c).norm_sq().integral();
    }
    let denom = hs.sqrt() * lg_norm;
    if denom == 0.0 {
        return Ok((0.0, 0.0));
    }
    Ok((h.inner(&h).sqrt() / denom, h.integral().abs() / (grad.sqrt() * lg_norm)))
}

/// Sum of random Fourier modes with `|k_axis| ≤ cutoff` and amplitude
/// `(1 + |k|)^{−decay}`. Modes are drawn in a fixed order so that the
/// low-frequency content does not depend on the grid size.
pub(crate) fn band_limited<R: Rng>(grid: &PeriodicGrid, rng: &mut R, cutoff: i64, decay: f64) -> Field {
    let base = std::f64::consts::TAU / grid.length();
    let mut modes = Vec::new();
    if grid.dim() == 1 {
        modes.extend((1..=cutoff).map(|k| [k, 0]));
    } else {
        for r in 1..=cutoff {
            for k0 in -r..=r {
                for k1 in -r..=r {
                    let upper = k0 > 0 || (k0 == 0 && k1 > 0);
                    if upper && k0.abs().max(k1.abs()) == r {
                        modes.push([k0, k1]);
                    }
                }
            }
        }
    }
    let coeffs: Vec<(f64, f64, [f64; 2])> = modes
        .iter()
        .map(|k| {
            let kv = [base * k[0] as f64, base * k[1] as f64];
            let amp = (1.0 + ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt()).powf(-decay);
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (amp * a, amp * b, kv)
        })
        .collect();
    let f = Field::from_fn(grid, |x| {
        coeffs
            .iter()
            .map(|(a, b, k)| {
                let ph = k[0] * x[0] + k[1] * x[1];
                a * ph.cos() + b * ph.sin()
            })
            .sum()
    });
    let m = f.mean();
    f.map(|v| v - m)
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutatorReport {
    pub b: f64,
    pub s: f64,
    pub n: usize,
    pub dim: usize,
    pub trials: usize,
    pub seed: u64,
    pub max_ratio: f64,
    /// Largest `|∫H| / (‖∇u‖‖Λ^{−b}g‖)`; 1 is the bound in this normalization.
    pub max_zero_mode_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutatorStudy {
    pub reports: Vec<CommutatorReport>,
    /// Largest ratio of consecutive `max_ratio` values (≥ 1).
    pub drift: f64,
    /// `max |H − g∇·u|` at `b = 0`, relative to `max |g∇·u|`.
    pub identity_error: f64,
    pub pass: bool,
}

/// Random band-limited trials at each grid size (`2π`-periodic box).
///
/// Inputs are band-limited to `n/6` per axis so that the dealiased
/// products are exact.
pub fn commutator_ratio_study(
    trials: usize,
    sizes: &[usize],
    dim: usize,
    b: f64,
    s: f64,
    seed: u64,
) -> Result<CommutatorStudy> {
    if s <= dim as f64 / 2.0 + 1.0 {
        return Err(RelaxError::Range {
            what: "s",
            value: s,
            range: format!("({}, ∞)", dim as f64 / 2.0 + 1.0),
        });
    }
    let mut reports = Vec::new();
    let mut identity_error: f64 = 0.0;
    for (level, &n) in sizes.iter().enumerate() {
        let grid = PeriodicGrid::standard(dim, n)?;
        let cutoff = (n / 6) as i64;
        let draw = |t: usize| {
            let mut rng = trial_rng(seed, t);
            let u = VectorField::new(
                (0..dim).map(|_| band_limited(&grid, &mut rng, cutoff, s + 1.0)).collect(),
            )
            .expect("components share a grid");
            let g = band_limited(&grid, &mut rng, cutoff, 1.0);
            (u, g)
        };
        let out: Vec<(f64, f64, f64)> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let (u, g) = draw(t);
                let (r, z) = commutator_ratio(&u, &g, b, s)?;
                let id = if level == 0 {
                    let h0 = commutator_field(&u, &g, 0.0)?;
                    let exact = &g * &spectral_divergence(&u);
                    (&h0 - &exact).max_abs() / exact.max_abs().max(f64::MIN_POSITIVE)
                } else {
                    0.0
                };
                Ok((r, z, id))
            })
            .collect::<Result<_>>()?;
        identity_error = out.iter().map(|o| o.2).fold(identity_error, f64::max);
        reports.push(CommutatorReport {
            b,
            s,
            n,
            dim,
            trials,
            seed,
            max_ratio: out.iter().map(|o| o.0).fold(0.0, f64::max),
            max_zero_mode_ratio: out.iter().map(|o| o.1).fold(0.0, f64::max),
        });
    }
    let drift = reports
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].max_ratio, w[1].max_ratio);
            a.max(b) / a.min(b)
        })
        .fold(1.0, f64::max);
    let pass = drift < 2.0
        && identity_error <= 1e-12
        && reports.iter().all(|r| r.max_zero_mode_ratio <= 2.0 && r.max_ratio.is_finite());
    Ok(CommutatorStudy {
        reports,
        drift,
        identity_error,
        pass,
    })
}
