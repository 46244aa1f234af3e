//! Distances between grid measures.

mod bounded_lipschitz;
mod sinkhorn;
mod wasserstein;

pub use bounded_lipschitz::{bounded_lipschitz, bounded_lipschitz_vector, BoundedLipschitz};
pub use sinkhorn::{wasserstein2_entropic, EntropicW2};
pub use wasserstein::{
    lemma_d2_check, wasserstein2_1d, wasserstein2_torus_1d, LemmaD2Report,
};

pub(crate) use wasserstein::matched_pairs;

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{RelaxError, Result};
use crate::grid::{Field, PeriodicGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// `[−L/2, L/2)` with the Euclidean distance.
    LineSegment,
    /// The periodic box with the geodesic distance.
    Torus,
}

/// How nodal weights are turned into a measure for quantile-based W₂.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    /// Point masses `w_i h^d δ_{x_i}`.
    Atoms,
    /// Uniform density `w_i` on the cell `[x_i − h/2, x_i + h/2)`.
    Cells,
}

/// Nodal densities on a grid; the mass of node `i` is `w_i h^d`.
#[derive(Clone, Debug)]
pub struct GridMeasure {
    grid: PeriodicGrid,
    weights: Vec<f64>,
    geometry: Geometry,
}

impl GridMeasure {
    pub fn new(grid: &PeriodicGrid, weights: Vec<f64>, geometry: Geometry) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(RelaxError::Grid(format!(
                "{} weights for {} nodes",
                weights.len(),
                grid.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(RelaxError::Grid("non-finite weight".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            weights,
            geometry,
        })
    }

    pub fn from_field(f: &Field, geometry: Geometry) -> Self {
        Self {
            grid: f.grid().clone(),
            weights: f.values().to_vec(),
            geometry,
        }
    }

    /// Point masses `(node index, mass)`.
    pub fn point_masses(grid: &PeriodicGrid, masses: &[(usize, f64)], geometry: Geometry) -> Result<Self> {
        let mut w = vec![0.0; grid.len()];
        for &(i, m) in masses {
            if i >= grid.len() {
                return Err(RelaxError::Grid(format!("node {i} out of range")));
            }
            w[i] += m / grid.cell_volume();
        }
        Self::new(grid, w, geometry)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Node masses of a probability measure, clipped at zero and summing
    /// exactly to one.
    pub(crate) fn probability_masses(&self) -> Result<Vec<f64>> {
        let hd = self.grid.cell_volume();
        if let Some(w) = self.weights.iter().find(|w| **w < -1e-14) {
            return Err(RelaxError::Range {
                what: "measure weight",
                value: *w,
                range: "[−1e−14, ∞)".into(),
            });
        }
        let masses: Vec<f64> = self.weights.iter().map(|w| w.max(0.0) * hd).collect();
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(RelaxError::MassMismatch(total - 1.0));
        }
        Ok(masses.into_iter().map(|m| m / total).collect())
    }
}

fn check_pair(mu: &GridMeasure, nu: &GridMeasure) -> Result<()> {
    if mu.grid != nu.grid {
        return Err(RelaxError::GridMismatch("measures live on different grids".into()));
    }
    if mu.geometry != nu.geometry {
        return Err(RelaxError::Geometry("measures carry different geometry tags".into()));
    }
    Ok(())
}

/// Squared ground distance between nodes `i` and `j`.
pub fn ground_distance_sq(grid: &PeriodicGrid, geometry: Geometry, i: usize, j: usize) -> f64 {
    let (a, b) = (grid.node(i), grid.node(j));
    let l = grid.length();
    (0..grid.dim())
        .map(|k| {
            let mut d = (a[k] - b[k]).abs();
            if geometry == Geometry::Torus {
                d = d.min(l - d);
            }
            d * d
        })
        .sum()
}

/// Exact discrete optimal transport cost between two atomic measures with
/// cost `c(i, j)`, by dense linear programming. Intended for small inputs.
pub fn exact_transport_cost(a: &[f64], b: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<f64> {
    let src: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
    let dst: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0.0).collect();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = src
        .iter()
        .map(|&i| dst.iter().map(|&j| lp.add_var(cost(i, j), (0.0, f64::INFINITY))).collect())
        .collect();
    for (r, &i) in src.iter().enumerate() {
        lp.add_constraint(vars[r].iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, a[i]);
    }
    for (c, &j) in dst.iter().enumerate() {
        lp.add_constraint(vars.iter().map(|row| (row[c], 1.0)), ComparisonOp::Eq, b[j]);
    }
    let sol = lp
        .solve()
        .map_err(|e| RelaxError::NonConvergence(format!("transport LP: {e}")))?;
    Ok(sol.objective())
}
