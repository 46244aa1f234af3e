//! Degenerate elliptic extension of the Riesz energy on the line.
//!
//! For a mean-zero source `g` on a long periodic interval, `V(x, ξ)` solves
//! `−∇·(κ|ξ|^ζ ∇V) = g(x) δ₀(ξ)` with even reflection in `ξ`. Each Fourier
//! mode in `x` reduces to a weighted two-point problem on `(0, Ξ)`, solved by
//! piecewise-linear finite elements on a graded mesh. The extension energy
//! `∬ κ|ξ|^ζ |∇V|²` equals `∫ g V(·, 0)`.

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::energetics::interaction_energy;
use crate::error::{RelaxError, Result};
use crate::grid::{Field, PeriodicGrid};

/// `e^{−(x−a)²/2w²} − e^{−(x+a)²/2w²}` on a 1-D grid, with the residual
/// mean removed.
pub fn gaussian_difference(grid: &PeriodicGrid, sep: f64, width: f64) -> Field {
    let bump = |x: f64| (-x * x / (2.0 * width * width)).exp();
    let f = Field::from_fn(grid, |x| bump(x[0] - sep) - bump(x[0] + sep));
    let m = f.mean();
    f.map(|v| v - m)
}

/// Smallest admissible `k_min·Ξ`; `e^{−20}` bounds the boundary layer.
const MIN_DECAY: f64 = 20.0;

#[derive(Clone, Debug)]
pub struct ExtensionProblem {
    pub zeta: f64,
    /// Half-height Ξ of the strip.
    pub xi_max: f64,
    /// Elements on `(0, Ξ)` at the coarsest level.
    pub nodes: usize,
    /// Number of (nodes × 2, Ξ × 2) refinements after the coarsest level.
    pub refinements: usize,
    pub g: Field,
}

impl ExtensionProblem {
    /// Ξ = 30/k_min, 400 elements, two refinements.
    pub fn new(g: Field, zeta: f64) -> Self {
        let kmin = std::f64::consts::TAU / g.grid().length();
        Self {
            zeta,
            xi_max: 30.0 / kmin,
            nodes: 400,
            refinements: 2,
            g,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionResult {
    /// Energy at the finest level with weight `κ|ξ|^ζ`.
    pub energy: f64,
    /// Same with the bare weight `|ξ|^ζ`.
    pub raw_energy: f64,
    /// `∫ g Λ^{α−d} g`, α = ζ for d = 1.
    pub reference: f64,
    pub energy_ratio: f64,
    pub raw_ratio: f64,
    /// Energies along the refinement sequence.
    pub sequence: Vec<f64>,
    pub relative_change: f64,
}

/// `κ = 4^s Γ(s) / (4 Γ(1 − s))`, s = (1 − ζ)/2: the trace value at the
/// origin of the unit-frequency solution with unit weight and flux ½.
pub fn extension_normalization(zeta: f64) -> f64 {
    let s = 0.5 * (1.0 - zeta);
    4f64.powf(s) * gamma(s) / (4.0 * gamma(1.0 - s))
}

/// `∫_a^b y^p dy`.
fn moment(a: f64, b: f64, p: f64) -> f64 {
    (b.powf(p + 1.0) - a.powf(p + 1.0)) / (p + 1.0)
}

const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Element integrals `(∫w, ∫wN₀², ∫wN₀N₁, ∫wN₁²)` for `w = y^ζ` on `[a, b]`.
fn element(a: f64, b: f64, zeta: f64) -> [f64; 4] {
    let h = b - a;
    if a < 4.0 * h {
        let m0 = moment(a, b, zeta);
        let m1 = moment(a, b, zeta + 1.0);
        let m2 = moment(a, b, zeta + 2.0);
        let n0n0 = (b * b * m0 - 2.0 * b * m1 + m2) / (h * h);
        let n0n1 = (-a * b * m0 + (a + b) * m1 - m2) / (h * h);
        let n1n1 = (a * a * m0 - 2.0 * a * m1 + m2) / (h * h);
        return [m0, n0n0, n0n1, n1n1];
    }
    let mut out = [0.0; 4];
    for (x, w) in GAUSS8 {
        let t = 0.5 * (1.0 + x);
        let y = a + h * t;
        let wt = 0.5 * h * w * y.powf(zeta);
        out[0] += wt;
        out[1] += wt * (1.0 - t) * (1.0 - t);
        out[2] += wt * (1.0 - t) * t;
        out[3] += wt * t * t;
    }
    out
}

/// Graded mesh `y_j = Ξ (j/J)^{2/(1−ζ)}` and its element integrals.
struct Mesh {
    stiff: Vec<f64>,
    mass: Vec<[f64; 3]>,
}

impl Mesh {
    fn new(xi_max: f64, elements: usize, zeta: f64) -> Self {
        let p = 2.0 / (1.0 - zeta);
        let y: Vec<f64> = (0..=elements)
            .map(|j| xi_max * (j as f64 / elements as f64).powf(p))
            .collect();
        let mut stiff = Vec::with_capacity(elements);
        let mut mass = Vec::with_capacity(elements);
        for w in y.windows(2) {
            let e = element(w[0], w[1], zeta);
            let h = w[1] - w[0];
            stiff.push(e[0] / (h * h));
            mass.push([e[1], e[2], e[3]]);
        }
        Self { stiff, mass }
    }

    /// Trace at `ξ = 0` for wavenumber `k`, unit weight and flux ½, with
    /// `V(Ξ) = 0`.
    fn trace(&self, k: f64) -> f64 {
        let ne = self.stiff.len();
        let k2 = k * k;
        // Unknowns 0..ne−1; node ne carries the Dirichlet condition.
        let mut diag = vec![0.0; ne];
        let mut off = vec![0.0; ne.saturating_sub(1)];
        for e in 0..ne {
            let s = self.stiff[e];
            let m = self.mass[e];
            diag[e] += s + k2 * m[0];
            if e + 1 < ne {
                diag[e + 1] += s + k2 * m[2];
                off[e] = -s + k2 * m[1];
            }
        }
        let mut rhs = vec![0.0; ne];
        rhs[0] = 0.5;
        // Thomas algorithm.
        for i in 1..ne {
            let f = off[i - 1] / diag[i - 1];
            diag[i] -= f * off[i - 1];
            rhs[i] -= f * rhs[i - 1];
        }
        let mut x = vec![0.0; ne];
        x[ne - 1] = rhs[ne - 1] / diag[ne - 1];
        for i in (0..ne - 1).rev() {
            x[i] = (rhs[i] - off[i] * x[i + 1]) / diag[i];
        }
        x[0]
    }
}

fn level_energy(problem: &ExtensionProblem, xi_max: f64, elements: usize, kappa: f64) -> f64 {
    let g = &problem.g;
    let grid = g.grid();
    let mesh = Mesh::new(xi_max, elements, problem.zeta);
    let c = g.spectrum();
    let peak = c.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let mut sum = 0.0;
    for (i, ci) in c.iter().enumerate() {
        let k = grid.wavenumber_norm(i);
        let a = ci.norm_sqr();
        if k == 0.0 || a <= 1e-30 * peak {
            continue;
        }
        sum += a * mesh.trace(k) / kappa;
    }
    grid.length() * sum
}

/// Extension energy with its refinement history; errors if the sequence is
/// not monotonically increasing.
pub fn extension_energy(problem: &ExtensionProblem) -> Result<ExtensionResult> {
    let g = &problem.g;
    let grid = g.grid();
    if grid.dim() != 1 {
        return Err(RelaxError::Grid("the extension solver is one-dimensional".into()));
    }
    let zeta = problem.zeta;
    if !(zeta > -1.0 && zeta < 1.0) {
        return Err(RelaxError::Range {
            what: "zeta",
            value: zeta,
            range: "(−1, 1)".into(),
        });
    }
    if g.mean().abs() > 1e-12 * g.max_abs().max(f64::MIN_POSITIVE) {
        return Err(RelaxError::MeanZero(format!("source has mean {:e}", g.mean())));
    }
    let kmin = std::f64::consts::TAU / grid.length();
    if problem.xi_max * kmin < MIN_DECAY {
        return Err(RelaxError::Range {
            what: "xi_max",
            value: problem.xi_max,
            range: format!("[{}, ∞)", MIN_DECAY / kmin),
        });
    }
    if problem.nodes < 8 {
        return Err(RelaxError::Discretization("need at least 8 extension elements".into()));
    }
    let alpha = zeta + grid.dim() as f64 - 1.0;
    let reference = if g.max_abs() == 0.0 { 0.0 } else { interaction_energy(g, g, alpha)? };
    let kappa = extension_normalization(zeta);
    let sequence: Vec<f64> = (0..=problem.refinements)
        .map(|r| {
            let f = (1usize << r) as f64;
            level_energy(problem, problem.xi_max * f, problem.nodes << r, kappa)
        })
        .collect();
    for w in sequence.windows(2) {
        if w[1] < w[0] * (1.0 - 1e-13) {
            return Err(RelaxError::Discretization(format!(
                "extension energy decreased under refinement: {:e} → {:e}",
                w[0], w[1]
            )));
        }
    }
    let energy = *sequence.last().expect("at least one level");
    let relative_change = match sequence.len() {
        0 | 1 => 0.0,
        m => {
            let prev = sequence[m - 2];
            if energy == 0.0 { 0.0 } else { (energy - prev).abs() / energy }
        }
    };
    let ratio = if reference == 0.0 { f64::NAN } else { energy / reference };
    Ok(ExtensionResult {
        energy,
        raw_energy: energy * kappa,
        reference,
        energy_ratio: ratio,
        raw_ratio: ratio * kappa,
        sequence,
        relative_change,
    })
}
