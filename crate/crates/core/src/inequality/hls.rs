//! Empirical Hardy–Littlewood–Sobolev constants on a large torus.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::trial_rng;
use crate::energetics::{interaction_energy, norm, NormKind};
use crate::error::{RelaxError, Result};
use crate::grid::{check_alpha, Field, PeriodicGrid};

/// Riemann zeta for real `s > 0`, `s ≠ 1`, by Euler–Maclaurin summation.
pub fn riemann_zeta(s: f64) -> f64 {
    const N: usize = 20;
    // B_{2j} / (2j)!
    const B: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let nf = N as f64;
    let mut sum: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    // Rising factorial s(s+1)…(s+2j−2) times N^{−s−2j+1}.
    let mut rising = s;
    let mut power = nf.powf(-s - 1.0);
    for (j, b) in B.iter().enumerate() {
        if j > 0 {
            let a = s + (2 * j - 1) as f64;
            rising *= a * (a + 1.0);
        }
        sum += b * rising * power;
        power /= nf * nf;
    }
    sum
}

#[derive(Clone, Debug, Serialize)]
pub struct HlsConfig {
    pub alpha: f64,
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub trials: usize,
    pub seed: u64,
    /// `(box length, nodes per axis)` for each refinement level.
    pub levels: Vec<(f64, usize)>,
}

impl HlsConfig {
    /// Default levels double the period and halve the spacing together.
    pub fn new(alpha: f64, dim: usize, p: f64, q: f64, trials: usize, seed: u64) -> Self {
        let levels = if dim == 1 {
            vec![(40.0, 256), (80.0, 1024), (160.0, 4096)]
        } else {
            vec![(16.0, 32), (32.0, 128)]
        };
        Self {
            alpha,
            dim,
            p,
            q,
            trials,
            seed,
            levels,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HlsLevel {
    pub length: f64,
    pub n: usize,
    pub max_ratio: f64,
    pub skipped: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct HlsReport {
    pub config: HlsConfig,
    pub levels: Vec<HlsLevel>,
    /// max/min of the per-level maxima.
    pub drift: f64,
    pub pass: bool,
}

/// A sum of Gaussian bumps `(amplitude, center, width)`.
#[derive(Clone, Debug)]
struct Bumps(Vec<(f64, [f64; 2], f64)>);

impl Bumps {
    fn random<R: Rng>(rng: &mut R) -> Self {
        let k = rng.gen_range(1..=3);
        Bumps(
            (0..k)
                .map(|_| {
                    let a = rng.gen_range(0.2..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    let c = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                    (a, c, rng.gen_range(0.3..1.0))
                })
                .collect(),
        )
    }

    fn sample(&self, grid: &PeriodicGrid) -> Field {
        let d = grid.dim();
        Field::from_fn(grid, |x| {
            self.0
                .iter()
                .map(|(a, c, w)| {
                    let r2: f64 = (0..d).map(|i| (x[i] - c[i]).powi(2)).sum();
                    a * (-r2 / (2.0 * w * w)).exp()
                })
                .sum()
        })
    }
}

fn check_exponents(alpha: f64, dim: usize, p: f64, q: f64) -> Result<()> {
    check_alpha(alpha, dim)?;
    for (name, v) in [("p", p), ("q", q)] {
        if !(v.is_finite() && v > 1.0) {
            return Err(RelaxError::Exponent(format!("{name} = {v} is not in (1, ∞)")));
        }
    }
    let gap = 1.0 / p + 1.0 / q + alpha / dim as f64 - 2.0;
    if gap.abs() > 1e-12 {
        return Err(RelaxError::Exponent(format!(
            "1/p + 1/q + α/d − 2 = {gap:e} for p = {p}, q = {q}, α = {alpha}, d = {dim}"
        )));
    }
    Ok(())
}

/// `∫ f Λ^{α−d} g` with, for d = 1, the leading finite-period correction
/// `ζ(σ)/π·(2π/L)^{1−σ}(∫f)(∫g)`, σ = d − α, removed. For d = 2 the torus
/// value is used as is.
fn whole_space_pairing(f: &Field, g: &Field, alpha: f64) -> Result<f64> {
    let grid = f.grid();
    let torus = interaction_energy(f, g, alpha)?;
    if grid.dim() != 1 {
        return Ok(torus);
    }
    let sigma = 1.0 - alpha;
    let h = std::f64::consts::TAU / grid.length();
    let corr = riemann_zeta(sigma) / std::f64::consts::PI * h.powf(1.0 - sigma) * f.integral() * g.integral();
    Ok(torus - corr)
}

/// `|∫ f Λ^{α−d} g| / (‖f‖_p ‖g‖_q)`, or `None` when either norm vanishes.
pub(crate) fn hls_ratio(f: &Field, g: &Field, alpha: f64, p: f64, q: f64) -> Result<Option<f64>> {
    let nf = norm(f, NormKind::Lp(p))?;
    let ng = norm(g, NormKind::Lp(q))?;
    if nf == 0.0 || ng == 0.0 {
        return Ok(None);
    }
    Ok(Some(whole_space_pairing(f, g, alpha)?.abs() / (nf * ng)))
}

/// Largest ratio over seeded random bump pairs at every level.
pub fn hls_probe(config: &HlsConfig) -> Result<HlsReport> {
    check_exponents(config.alpha, config.dim, config.p, config.q)?;
    if config.levels.is_empty() {
        return Err(RelaxError::Insufficient("no refinement levels".into()));
    }
    let mut levels = Vec::new();
    for &(length, n) in &config.levels {
        let grid = PeriodicGrid::new(config.dim, n, length)?;
        let ratios: Vec<Option<f64>> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(config.seed, t);
                let f = Bumps::random(&mut rng).sample(&grid);
                let g = Bumps::random(&mut rng).sample(&grid);
                hls_ratio(&f, &g, config.alpha, config.p, config.q)
            })
            .collect::<Result<_>>()?;
        levels.push(HlsLevel {
            length,
            n,
            max_ratio: ratios.iter().flatten().fold(0.0, |a, b| a.max(*b)),
            skipped: ratios.iter().filter(|r| r.is_none()).count(),
        });
    }
    let hi = levels.iter().map(|l| l.max_ratio).fold(0.0, f64::max);
    let lo = levels.iter().map(|l| l.max_ratio).fold(f64::INFINITY, f64::min);
    let drift = hi / lo;
    Ok(HlsReport {
        config: config.clone(),
        levels,
        drift,
        pass: drift.is_finite() && drift < 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zeta_values() {
        assert!((riemann_zeta(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((riemann_zeta(0.5) + 1.460_354_508_809_586_8).abs() < 1e-13);
        assert!((riemann_zeta(0.25) + 0.813_278_405_261_891_8).abs() < 1e-13);
        assert!((riemann_zeta(3.0) - 1.202_056_903_159_594_3).abs() < 1e-14);
    }

    #[test]
    fn exponent_relation_enforced() {
        let bad = HlsConfig::new(0.5, 1, 1.5, 1.5, 1, 0);
        assert!(matches!(hls_probe(&bad), Err(RelaxError::Exponent(_))));
        let below = HlsConfig::new(0.5, 1, 1.0, 2.0, 1, 0);
        assert!(matches!(hls_probe(&below), Err(RelaxError::Exponent(_))));
    }

    #[test]
    fn zero_input_is_skipped() {
        let g = PeriodicGrid::new(1, 128, 20.0).unwrap();
        let f = Bumps(vec![(1.0, [0.0, 0.0], 0.5)]).sample(&g);
        assert!(hls_ratio(&f, &Field::zeros(&g), 0.5, 4.0 / 3.0, 4.0 / 3.0).unwrap().is_none());
    }

    #[test]
    fn bilinear_homogeneity() {
        let g = PeriodicGrid::new(1, 256, 40.0).unwrap();
        let mut rng = trial_rng(3, 0);
        let f = Bumps::random(&mut rng).sample(&g);
        let h = Bumps::random(&mut rng).sample(&g);
        let p = 4.0 / 3.0;
        let r = hls_ratio(&f, &h, 0.5, p, p).unwrap().unwrap();
        let r2 = hls_ratio(&f.scale(7.5), &h.scale(0.02), 0.5, p, p).unwrap().unwrap();
        assert!((r - r2).abs() <= 1e-12 * r);
    }

    #[test]
    fn single_bump_is_translation_invariant() {
        let g = PeriodicGrid::new(1, 512, 40.0).unwrap();
        let p = 4.0 / 3.0;
        let ratio = |c: f64| {
            let f = Bumps(vec![(1.0, [c, 0.0], 0.5)]).sample(&g);
            hls_ratio(&f, &f, 0.5, p, p).unwrap().unwrap()
        };
        let r0 = ratio(0.0);
        let mut rng = trial_rng(11, 0);
        for _ in 0..5 {
            let r = ratio(rng.gen_range(-2.0..2.0));
            assert!((r - r0).abs() < 5e-4 * r0, "{r} vs {r0}");
        }
    }

    #[test]
    fn period_doubling_is_stable() {
        let bumps = Bumps(vec![(1.0, [-0.7, 0.0], 0.4), (0.6, [1.1, 0.0], 0.8)]);
        let other = Bumps(vec![(0.8, [0.3, 0.0], 0.6)]);
        let p = 4.0 / 3.0;
        let ratio = |l: f64, n: usize| {
            let g = PeriodicGrid::new(1, n, l).unwrap();
            hls_ratio(&bumps.sample(&g), &other.sample(&g), 0.5, p, p).unwrap().unwrap()
        };
        let (a, b) = (ratio(40.0, 256), ratio(80.0, 512));
        assert!((a - b).abs() < 0.01 * a, "{a} vs {b}");
    }

    #[test]
    fn probe_is_stable_and_reproducible() {
        let mut cfg = HlsConfig::new(0.5, 1, 4.0 / 3.0, 4.0 / 3.0, 30, 5);
        cfg.levels.truncate(2);
        let r = hls_probe(&cfg).unwrap();
        assert!(r.pass, "{r:?}");
        let again = hls_probe(&cfg).unwrap();
        assert_eq!(r.levels[1].max_ratio, again.levels[1].max_ratio);
    }
}
