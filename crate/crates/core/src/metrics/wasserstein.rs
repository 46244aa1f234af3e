//! One-dimensional W₂ through quantile functions, on the segment and on the
//! circle.

use serde::Serialize;

use super::{check_pair, Geometry, GridMeasure, Support};
use crate::error::{RelaxError, Result};
use crate::fpme::limit_velocity;
use crate::grid::{partial, Field};
use crate::state::{velocity, FluidState, LimitState, Params};
use crate::trajectory::Trajectory;

/// Quantile function restricted to `[s0, s1)`, linear in `s`.
#[derive(Clone, Copy, Debug)]
struct Seg {
    s0: f64,
    s1: f64,
    q0: f64,
    q1: f64,
}

impl Seg {
    fn at(&self, s: f64) -> f64 {
        if self.s1 > self.s0 {
            self.q0 + (self.q1 - self.q0) * (s - self.s0) / (self.s1 - self.s0)
        } else {
            self.q0
        }
    }
}

fn quantile_segments(m: &GridMeasure, support: Support) -> Result<Vec<Seg>> {
    let p = m.probability_masses()?;
    let grid = m.grid();
    let half = match support {
        Support::Atoms => 0.0,
        Support::Cells => 0.5 * grid.spacing(),
    };
    let mut segs = Vec::new();
    let mut s = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            let x = grid.node(i)[0];
            let s1 = (s + pi).min(1.0);
            segs.push(Seg {
                s0: s,
                s1,
                q0: x - half,
                q1: x + half,
            });
            s = s1;
        }
    }
    if let Some(last) = segs.last_mut() {
        last.s1 = 1.0;
    }
    Ok(segs)
}

/// `∫₀¹ |A(s) − B(s)|² ds` for two piecewise-linear quantile functions.
fn quantile_cost(a: &[Seg], b: &[Seg]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut lo = 0.0f64;
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        let hi = a[i].s1.min(b[j].s1);
        if hi > lo {
            let d0 = a[i].at(lo) - b[j].at(lo);
            let d1 = a[i].at(hi) - b[j].at(hi);
            acc += (hi - lo) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
            lo = hi;
        }
        if a[i].s1 <= hi {
            i += 1;
        }
        if b[j].s1 <= hi {
            j += 1;
        }
    }
    acc
}

fn check_1d(mu: &GridMeasure, nu: &GridMeasure, geometry: Geometry) -> Result<()> {
    check_pair(mu, nu)?;
    if mu.grid().dim() != 1 {
        return Err(RelaxError::Geometry("quantile W₂ needs d = 1".into()));
    }
    if mu.geometry() != geometry {
        return Err(RelaxError::Geometry(format!(
            "expected {geometry:?} measures, got {:?}",
            mu.geometry()
        )));
    }
    Ok(())
}

/// `d₂(μ, ν)` on the segment via the monotone (quantile) coupling.
pub fn wasserstein2_1d(mu: &GridMeasure, nu: &GridMeasure, support: Support) -> Result<f64> {
    check_1d(mu, nu, Geometry::LineSegment)?;
    let a = quantile_segments(mu, support)?;
    let b = quantile_segments(nu, support)?;
    Ok(quantile_cost(&a, &b).max(0.0).sqrt())
}

/// Quantile of μ shifted by `θ` in mass, `s ↦ Q_μ(s + θ)` on `[0, 1)`, using
/// the periodic extension `Q(s + 1) = Q(s) + L`.
fn shifted(a: &[Seg], theta: f64, length: f64) -> Vec<Seg> {
    let k0 = theta.floor() as i64;
    let mut out = Vec::with_capacity(2 * a.len());
    for k in k0..k0 + 2 {
        let kf = k as f64;
        for seg in a {
            let s0 = seg.s0 + kf - theta;
            let s1 = seg.s1 + kf - theta;
            let lo = s0.max(0.0);
            let hi = s1.min(1.0);
            if hi > lo {
                let lift = |s: f64| seg.at(s + theta - kf) + kf * length;
                out.push(Seg {
                    s0: lo,
                    s1: hi,
                    q0: lift(lo),
                    q1: lift(hi),
                });
            }
        }
    }
    if let Some(last) = out.last_mut() {
        last.s1 = 1.0;
    }
    out
}

/// `d₂(μ, ν)` on the circle with geodesic cost: the quantile cost minimized
/// over the mass offset θ (convex in θ), by golden-section search.
pub fn wasserstein2_torus_1d(mu: &GridMeasure, nu: &GridMeasure, support: Support) -> Result<f64> {
    check_1d(mu, nu, Geometry::Torus)?;
    let a = quantile_segments(mu, support)?;
    let b = quantile_segments(nu, support)?;
    let length = mu.grid().length();
    let cost = |theta: f64| quantile_cost(&shifted(&a, theta, length), &b);
    let (_, value) = golden_section(cost, -1.0, 1.0, 1e-10);
    Ok(value.max(0.0).sqrt())
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let candidates = [(x1, f1), (x2, f2), (mid, f(mid))];
    candidates
        .into_iter()
        .fold((mid, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

/// Both sides of the Grönwall bound for `d₂²(ρ^ε(t), ρ(t))`.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaD2Report {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `sup_t ‖∇u(t)‖_∞` of the limit velocity.
    pub lipschitz: f64,
    pub max_ratio: f64,
}

/// Evaluates `d₂²(t) ≤ max(2, 4t)·e^{2√2 L t}(d₂²(0) + ∫₀ᵗ∫ρ^ε|u^ε − u|²)`,
/// where `L = sup ‖∇u‖_∞`, on the common output times of two 1-D runs.
///
/// The constant comes from `|d/dt d₂| ≤ √(2A) + √2 L d₂` with
/// `A = ∫ρ^ε|u^ε − u|²`, followed by Grönwall and Cauchy–Schwarz in time.
pub fn lemma_d2_check(
    er: &Trajectory<FluidState>,
    fpme: &Trajectory<LimitState>,
    params: &Params,
) -> Result<LemmaD2Report> {
    let pairs = matched_pairs(er, fpme)?;
    if er.snapshots[0].grid().dim() != 1 {
        return Err(RelaxError::Geometry("lemma_d2_check needs d = 1".into()));
    }
    let mut times = Vec::new();
    let mut d2 = Vec::new();
    let mut a = Vec::new();
    let mut lip: f64 = 0.0;
    for (s, l) in pairs {
        let mu = GridMeasure::from_field(&s.rho, Geometry::Torus);
        let nu = GridMeasure::from_field(&l.rho, Geometry::Torus);
        let w = wasserstein2_torus_1d(&mu, &nu, Support::Cells)?;
        let u = limit_velocity(&l.rho, params)?;
        let du = velocity(s).zip_comps(&u, |x, y| x - y);
        times.push(s.time);
        d2.push(w * w);
        a.push(s.rho.inner(&du.norm_sq()));
        lip = lip.max(grad_sup(u.comp(0)));
    }
    let t0 = times[0];
    let mut integral = 0.0;
    let mut rhs = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        if k > 0 {
            integral += 0.5 * (a[k] + a[k - 1]) * (times[k] - times[k - 1]);
        }
        let t = times[k] - t0;
        let c = (4.0 * t).max(2.0) * (2.0 * 2f64.sqrt() * lip * t).exp();
        rhs.push(c * (d2[0] + integral));
    }
    let max_ratio = d2
        .iter()
        .zip(&rhs)
        .map(|(l, r)| {
            if *l == 0.0 {
                0.0
            } else if *r > 0.0 {
                l / r
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok(LemmaD2Report {
        times,
        lhs: d2,
        rhs,
        lipschitz: lip,
        max_ratio,
    })
}

fn grad_sup(u: &Field) -> f64 {
    partial(u, 0).max_abs()
}

/// Snapshot pairs at shared output times (to 1e−12).
pub(crate) fn matched_pairs<'a>(
    er: &'a Trajectory<FluidState>,
    fpme: &'a Trajectory<LimitState>,
) -> Result<Vec<(&'a FluidState, &'a LimitState)>> {
    if er.snapshots.is_empty() || er.snapshots.len() != fpme.snapshots.len() {
        return Err(RelaxError::GridMismatch(format!(
            "{} fluid vs {} limit snapshots",
            er.snapshots.len(),
            fpme.snapshots.len()
        )));
    }
    if er.snapshots[0].grid() != fpme.snapshots[0].rho.grid() {
        return Err(RelaxError::GridMismatch("trajectories use different grids".into()));
    }
    er.snapshots
        .iter()
        .zip(&fpme.snapshots)
        .map(|(s, l)| {
            if (s.time - l.time).abs() > 1e-12 * s.time.abs().max(1.0) {
                Err(RelaxError::GridMismatch(format!(
                    "output times differ: {} vs {}",
                    s.time, l.time
                )))
            } else {
                Ok((s, l))
            }
        })
        .collect()
}
