//! Debiased entropic W₂ (log-domain Sinkhorn with a separable kernel).

use serde::Serialize;

use super::{check_pair, Geometry, GridMeasure};
use crate::error::{RelaxError, Result};

const MAX_ITER: usize = 20_000;
const TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EntropicW2 {
    /// Sinkhorn divergence `S = OT_r(μ,ν) − ½OT_r(μ,μ) − ½OT_r(ν,ν)`.
    pub w2_sq: f64,
    /// `|S − d₂²| ≤ r·ln N`, with `N` the node count.
    pub bias_bound: f64,
    pub iterations: usize,
    pub violation: f64,
}

/// Per-axis squared distances between axis coordinates.
struct Kernel {
    n: usize,
    dim: usize,
    /// `C1[i*n + j] / reg`.
    c: Vec<f64>,
}

impl Kernel {
    fn new(m: &GridMeasure, reg: f64) -> Self {
        let grid = m.grid();
        let n = grid.n();
        let xs = grid.axis_coords();
        let l = grid.length();
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut d = (xs[i] - xs[j]).abs();
                if m.geometry() == Geometry::Torus {
                    d = d.min(l - d);
                }
                c[i * n + j] = d * d / reg;
            }
        }
        Self { n, dim: grid.dim(), c }
    }

    /// `out_i = LSE_j (v_j − C_ij/reg)`.
    fn lse(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let line = |vals: &dyn Fn(usize) -> f64, i: usize| -> f64 {
            let row = &self.c[i * n..(i + 1) * n];
            let mx = (0..n).map(|j| vals(j) - row[j]).fold(f64::NEG_INFINITY, f64::max);
            if mx == f64::NEG_INFINITY {
                return mx;
            }
            mx + (0..n).map(|j| (vals(j) - row[j] - mx).exp()).sum::<f64>().ln()
        };
        if self.dim == 1 {
            return (0..n).map(|i| line(&|j| v[j], i)).collect();
        }
        // Stage 1 over the second axis, stage 2 over the first.
        let mut t = vec![0.0; n * n];
        for j1 in 0..n {
            for i2 in 0..n {
                t[j1 * n + i2] = line(&|j2| v[j1 * n + j2], i2);
            }
        }
        let mut out = vec![0.0; n * n];
        for i1 in 0..n {
            for i2 in 0..n {
                out[i1 * n + i2] = line(&|j1| t[j1 * n + i2], i1);
            }
        }
        out
    }
}

fn ln_masses(p: &[f64]) -> Vec<f64> {
    p.iter().map(|v| if *v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect()
}

/// `c-transform`: `−reg·LSE(g/reg + ln b)`.
fn transform(k: &Kernel, g: &[f64], ln_b: &[f64], reg: f64) -> Vec<f64> {
    let v: Vec<f64> = g.iter().zip(ln_b).map(|(g, lb)| g / reg + lb).collect();
    k.lse(&v).into_iter().map(|x| -reg * x).collect()
}

fn violation(a: &[f64], f: &[f64], f_new: &[f64], reg: f64) -> f64 {
    a.iter()
        .zip(f.iter().zip(f_new))
        .filter(|(ai, _)| **ai > 0.0)
        .map(|(ai, (x, y))| ai * ((x - y) / reg).exp_m1().abs())
        .sum()
}

fn dot(a: &[f64], f: &[f64]) -> f64 {
    a.iter().zip(f).filter(|(ai, _)| **ai > 0.0).map(|(ai, fi)| ai * fi).sum()
}

fn ot(k: &Kernel, a: &[f64], b: &[f64], reg: f64) -> Result<(f64, usize, f64)> {
    let (ln_a, ln_b) = (ln_masses(a), ln_masses(b));
    let mut f = vec![0.0; a.len()];
    let mut g = transform(k, &f, &ln_a, reg);
    for it in 1..=MAX_ITER {
        let f_new = transform(k, &g, &ln_b, reg);
        let viol = violation(a, &f, &f_new, reg);
        f = f_new;
        g = transform(k, &f, &ln_a, reg);
        if viol < TOL {
            return Ok((dot(a, &f) + dot(b, &g), it, viol));
        }
        if it == MAX_ITER {
            return Err(RelaxError::NonConvergence(format!(
                "Sinkhorn marginal violation {viol:e} after {MAX_ITER} iterations"
            )));
        }
    }
    unreachable!()
}

fn ot_self(k: &Kernel, a: &[f64], reg: f64) -> Result<(f64, usize, f64)> {
    let ln_a = ln_masses(a);
    let mut f = vec![0.0; a.len()];
    for it in 1..=MAX_ITER {
        let t = transform(k, &f, &ln_a, reg);
        let viol = violation(a, &f, &t, reg);
        if viol < TOL {
            return Ok((2.0 * dot(a, &f), it, viol));
        }
        f = f.iter().zip(&t).map(|(x, y)| 0.5 * (x + y)).collect();
    }
    Err(RelaxError::NonConvergence(format!(
        "symmetric Sinkhorn did not converge in {MAX_ITER} iterations"
    )))
}

/// Debiased entropic approximation of `d₂²(μ, ν)` with regularization `reg`.
pub fn wasserstein2_entropic(mu: &GridMeasure, nu: &GridMeasure, reg: f64) -> Result<EntropicW2> {
    check_pair(mu, nu)?;
    if !(reg.is_finite() && reg > 0.0) {
        return Err(RelaxError::Range {
            what: "reg",
            value: reg,
            range: "(0, ∞)".into(),
        });
    }
    if mu.grid().n() > 64 {
        return Err(RelaxError::Grid("entropic W₂ supports at most 64 nodes per axis".into()));
    }
    let a = mu.probability_masses()?;
    let b = nu.probability_masses()?;
    let k = Kernel::new(mu, reg);
    let (ab, it, viol) = ot(&k, &a, &b, reg)?;
    let (aa, it_a, _) = ot_self(&k, &a, reg)?;
    let (bb, it_b, _) = ot_self(&k, &b, reg)?;
    Ok(EntropicW2 {
        w2_sq: ab - 0.5 * (aa + bb),
        bias_bound: reg * (a.len() as f64).ln(),
        iterations: it.max(it_a).max(it_b),
        violation: viol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Field, PeriodicGrid};
    use crate::metrics::{exact_transport_cost, ground_distance_sq, wasserstein2_torus_1d, Support};

    fn gaussian(g: &PeriodicGrid, c: [f64; 2], sigma: f64) -> GridMeasure {
        let f = Field::from_fn(g, |x| {
            (0..g.dim())
                .map(|a| (-(x[a] - c[a]).powi(2) / (2.0 * sigma * sigma)).exp())
                .product::<f64>()
        });
        GridMeasure::from_field(&f.scale(1.0 / f.integral()), Geometry::Torus)
    }

    #[test]
    fn identical_is_within_bias() {
        let g = PeriodicGrid::new(2, 16, 8.0).unwrap();
        let m = gaussian(&g, [0.0, 0.0], 1.0);
        let r = wasserstein2_entropic(&m, &m, 0.2).unwrap();
        assert!(r.w2_sq.abs() <= r.bias_bound);
        assert!(r.w2_sq.abs() < 1e-8);
    }

    #[test]
    fn translated_gaussians() {
        let g = PeriodicGrid::new(2, 32, 16.0).unwrap();
        let a = gaussian(&g, [0.0, 0.0], 1.0);
        let b = gaussian(&g, [1.0, 0.5], 1.0);
        let r = wasserstein2_entropic(&a, &b, 0.1).unwrap();
        assert!((r.w2_sq - 1.25).abs() <= r.bias_bound);
        assert!((r.w2_sq - 1.25).abs() < 0.05, "{}", r.w2_sq);
    }

    #[test]
    fn reg_halving_converges_monotonically() {
        let g = PeriodicGrid::new(1, 64, 2.0).unwrap();
        let a = gaussian(&g, [-0.3, 0.0], 0.2);
        let b = gaussian(&g, [0.4, 0.0], 0.3);
        let exact = {
            let p = a.probability_masses().unwrap();
            let q = b.probability_masses().unwrap();
            exact_transport_cost(&p, &q, |i, j| ground_distance_sq(&g, Geometry::Torus, i, j)).unwrap()
        };
        let q = wasserstein2_torus_1d(&a, &b, Support::Atoms).unwrap();
        assert!((q * q - exact).abs() < 1e-8);
        let vals: Vec<f64> = [0.16, 0.08, 0.04, 0.02, 0.01]
            .iter()
            .map(|&r| wasserstein2_entropic(&a, &b, r).unwrap().w2_sq)
            .collect();
        let steps: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for w in steps.windows(2) {
            assert!(w[1] <= w[0], "{vals:?}");
        }
        assert!((vals[4] - exact).abs() < 2e-3, "{vals:?} vs {exact}");
    }

    #[test]
    fn rejects_bad_reg() {
        let g = PeriodicGrid::new(1, 16, 1.0).unwrap();
        let a = gaussian(&g, [0.0, 0.0], 0.1);
        assert!(wasserstein2_entropic(&a, &a, 0.0).is_err());
    }
}
