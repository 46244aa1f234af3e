//! Physical parameters, fluid and limit states, and initial data.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{RelaxError, Result};
use crate::grid::{check_alpha, riesz_force, spectral_gradient, Field, PeriodicGrid, VectorField};

/// Sign pattern of the pressure and interaction coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    PressurelessRepulsive,
    PressureAttractive,
    PressureRepulsive,
    /// `c_P > 0`, `c_K = 0`: damped isentropic Euler, limit is the porous
    /// medium (or heat) equation.
    PressureOnly,
}

impl Regime {
    pub fn classify(c_p: f64, c_k: f64) -> Result<Self> {
        match (c_p > 0.0, c_k) {
            (false, k) if k < 0.0 => Ok(Regime::PressurelessRepulsive),
            (false, k) if k > 0.0 => Err(RelaxError::IllPosed(
                "pressureless attractive case (c_P = 0, c_K > 0) is excluded".into(),
            )),
            (false, _) => Err(RelaxError::IllPosed(
                "c_P = 0 and c_K = 0 leaves no restoring force".into(),
            )),
            (true, k) if k > 0.0 => Ok(Regime::PressureAttractive),
            (true, k) if k < 0.0 => Ok(Regime::PressureRepulsive),
            (true, _) => Ok(Regime::PressureOnly),
        }
    }

    pub fn has_pressure(self) -> bool {
        !matches!(self, Regime::PressurelessRepulsive)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::PressurelessRepulsive => "pressureless_repulsive",
            Regime::PressureAttractive => "pressure_attractive",
            Regime::PressureRepulsive => "pressure_repulsive",
            Regime::PressureOnly => "pressure_only",
        };
        f.write_str(s)
    }
}

/// Validated physical constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    epsilon: f64,
    c_p: f64,
    c_k: f64,
    gamma: f64,
    alpha: f64,
    dim: usize,
    regime: Regime,
}

impl Params {
    pub fn new(epsilon: f64, c_p: f64, c_k: f64, gamma: f64, alpha: f64, dim: usize) -> Result<Self> {
        let range = |what, value: f64, range: &str| RelaxError::Range {
            what,
            value,
            range: range.into(),
        };
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(range("epsilon", epsilon, "(0, ∞)"));
        }
        if !(c_p.is_finite() && c_p >= 0.0) {
            return Err(range("c_p", c_p, "[0, ∞)"));
        }
        if !c_k.is_finite() {
            return Err(range("c_k", c_k, "(-∞, ∞)"));
        }
        if !(gamma.is_finite() && gamma >= 1.0) {
            return Err(range("gamma", gamma, "[1, ∞)"));
        }
        if dim != 1 && dim != 2 {
            return Err(range("d", dim as f64, "{1, 2}"));
        }
        check_alpha(alpha, dim)?;
        let regime = Regime::classify(c_p, c_k)?;
        Ok(Self {
            epsilon,
            c_p,
            c_k,
            gamma,
            alpha,
            dim,
            regime,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn c_p(&self) -> f64 {
        self.c_p
    }
    pub fn c_k(&self) -> f64 {
        self.c_k
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Order of the interaction operator, `α − d ∈ (−2, 0)`.
    pub fn riesz_order(&self) -> f64 {
        self.alpha - self.dim as f64
    }

    /// HLS exponent `θ = 2d / (2d − α)`.
    pub fn theta(&self) -> f64 {
        let d = self.dim as f64;
        2.0 * d / (2.0 * d - self.alpha)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(epsilon, self.c_p, self.c_k, self.gamma, self.alpha, self.dim)
    }
}

/// Density floor used only when dividing by ρ.
pub fn rho_floor(grid: &PeriodicGrid) -> f64 {
    1e-10 / grid.volume()
}

/// Internal energy density `𝒰(ρ)`: `ρ ln ρ` for γ = 1, `ρ^γ/(γ−1)` otherwise.
pub fn internal_density(rho: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        if rho <= 0.0 {
            0.0
        } else {
            rho * rho.ln()
        }
    } else {
        rho.max(0.0).powf(gamma) / (gamma - 1.0)
    }
}

/// `𝒰'(ρ)`: `1 + ln ρ` for γ = 1, `γ ρ^{γ−1}/(γ−1)` otherwise.
pub fn internal_derivative(rho: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        1.0 + rho.ln()
    } else {
        gamma * rho.max(0.0).powf(gamma - 1.0) / (gamma - 1.0)
    }
}

/// `𝒰''(ρ) = γ ρ^{γ−2}`.
pub fn internal_second_derivative(rho: f64, gamma: f64) -> f64 {
    gamma * rho.powf(gamma - 2.0)
}

/// Pointwise relative internal energy `𝒰(ρ|ρ̄) = 𝒰(ρ) − 𝒰(ρ̄) − 𝒰'(ρ̄)(ρ − ρ̄)`,
/// evaluated in a cancellation-free form. Both arguments must be positive.
pub fn relative_internal_density(rho: f64, rho_bar: f64, gamma: f64) -> f64 {
    let r = (rho - rho_bar) / rho_bar;
    let phi = if r.abs() < 0.1 {
        relative_series(r, gamma)
    } else if gamma == 1.0 {
        // (1+r) ln(1+r) − r
        (1.0 + r) * r.ln_1p() - r
    } else {
        // ((1+r)^γ − 1 − γ r)/(γ − 1)
        ((gamma * r.ln_1p()).exp_m1() - gamma * r) / (gamma - 1.0)
    };
    let scale = if gamma == 1.0 { rho_bar } else { rho_bar.powf(gamma) };
    (scale * phi).max(0.0)
}

/// Taylor series of the scaled relative energy about `r = 0`, summed to
/// round-off. Coefficients are `γ(γ−1)···(γ−k+1)/(k!(γ−1))`, which for
/// γ = 1 reduce to `(−1)^k/(k(k−1))`.
fn relative_series(r: f64, gamma: f64) -> f64 {
    let mut c = if gamma == 1.0 { 0.5 } else { 0.5 * gamma };
    let mut pow = r * r;
    let mut sum = c * pow;
    for k in 3..80 {
        c *= if gamma == 1.0 {
            -((k - 2) as f64) / k as f64
        } else {
            (gamma - (k - 1) as f64) / k as f64
        };
        pow *= r;
        let term = c * pow;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Momentum-form fluid state `(ρ, m = ρu)` of the Euler–Riesz system.
#[derive(Clone, Debug)]
pub struct FluidState {
    pub rho: Field,
    pub m: VectorField,
    pub time: f64,
}

impl FluidState {
    pub fn new(rho: Field, m: VectorField, time: f64) -> Result<Self> {
        if rho.grid() != m.grid() {
            return Err(RelaxError::GridMismatch("ρ and m live on different grids".into()));
        }
        Ok(Self { rho, m, time })
    }

    /// Build from a density and a velocity, `m = ρ u`.
    pub fn from_velocity(rho: Field, u: &VectorField, time: f64) -> Result<Self> {
        let m = u.scale_by(&rho);
        Self::new(rho, m, time)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.rho.grid()
    }

    pub fn mass(&self) -> f64 {
        self.rho.integral()
    }

    pub fn total_momentum(&self) -> Vec<f64> {
        self.m.integral()
    }
}

/// Density of the limit (fractional porous medium) equation.
#[derive(Clone, Debug)]
pub struct LimitState {
    pub rho: Field,
    pub time: f64,
}

/// Mass and positivity invariants shared by both state types.
pub fn check_density(rho: &Field) -> Result<()> {
    let mass = rho.integral();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(RelaxError::MassMismatch(mass - 1.0));
    }
    let floor = rho_floor(rho.grid());
    if rho.min() < floor {
        return Err(RelaxError::Vacuum(format!(
            "min ρ = {:e} below floor {:e}",
            rho.min(),
            floor
        )));
    }
    Ok(())
}

/// `u = m / max(ρ, ρ_min)`.
pub fn velocity(state: &FluidState) -> VectorField {
    let floor = rho_floor(state.grid());
    let inv = state.rho.map(|r| 1.0 / r.max(floor));
    state.m.scale_by(&inv)
}

/// Limit constitutive velocity `u = −c_P ∇𝒰'(ρ) + c_K ∇Λ^{α−d} ρ`.
///
/// Substituting into the continuity equation reproduces
/// `∂_t ρ + c_K ∇·(ρ ∇Λ^{α−d}ρ) = c_P Δρ^γ`.
pub fn well_prepared_velocity(rho0: &Field, params: &Params) -> Result<VectorField> {
    let grid = rho0.grid();
    let mut u = VectorField::zeros(grid);
    if params.c_p() > 0.0 {
        let gamma = params.gamma();
        if gamma == 1.0 && rho0.min() < 10.0 * rho_floor(grid) {
            return Err(RelaxError::Vacuum(
                "γ = 1 needs ρ away from vacuum to differentiate ln ρ".into(),
            ));
        }
        let uprime = rho0.map(|r| internal_derivative(r, gamma));
        u = spectral_gradient(&uprime).scale(-params.c_p());
    }
    if params.c_k() != 0.0 {
        let force = riesz_force(rho0, params.alpha())?;
        u = u.zip_comps(&force, |a, b| a.axpy(params.c_k(), b));
    }
    Ok(u)
}

/// Analytic initial density profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Uniform,
    /// `Π_axes (1 + a cos(k x_axis)) / volume`.
    Bump { amplitude: f64, mode: u32 },
    /// `((1 − a) + a · volume · G_σ) / volume` with a periodized Gaussian of
    /// width `σ = L / (8 k)` centred at the origin.
    Gaussian { amplitude: f64, mode: u32 },
    /// Nodal values read from a file, rescaled to unit mass.
    Nodal(Vec<f64>),
}

impl Profile {
    pub fn check_amplitude(a: f64) -> Result<()> {
        if (0.0..=0.9).contains(&a) {
            Ok(())
        } else {
            Err(RelaxError::Range {
                what: "amplitude",
                value: a,
                range: "[0, 0.9]".into(),
            })
        }
    }

    /// Sample the profile as a unit-mass density on `grid`.
    pub fn density(&self, grid: &PeriodicGrid) -> Result<Field> {
        let vol = grid.volume();
        let dim = grid.dim();
        let field = match self {
            Profile::Uniform => Field::constant(grid, 1.0 / vol),
            Profile::Bump { amplitude, mode } => {
                Self::check_amplitude(*amplitude)?;
                let k = *mode as f64 * 2.0 * PI / grid.length();
                Field::from_fn(grid, |x| {
                    (0..dim).map(|a| 1.0 + amplitude * (k * x[a]).cos()).product::<f64>() / vol
                })
            }
            Profile::Gaussian { amplitude, mode } => {
                Self::check_amplitude(*amplitude)?;
                let len = grid.length();
                let sigma = len / (8.0 * (*mode).max(1) as f64);
                let g1 = |x: f64| -> f64 {
                    (-4..=4)
                        .map(|img| {
                            let y = x + img as f64 * len;
                            (-0.5 * y * y / (sigma * sigma)).exp()
                        })
                        .sum::<f64>()
                        / (sigma * (2.0 * PI).sqrt())
                };
                let raw = Field::from_fn(grid, |x| (0..dim).map(|a| g1(x[a])).product::<f64>());
                let norm = raw.integral();
                raw.map(|g| ((1.0 - amplitude) + amplitude * vol * g / norm) / vol)
            }
            Profile::Nodal(values) => {
                let f = Field::from_values(grid, values.clone())?;
                let mass = f.integral();
                if !(mass > 0.0) {
                    return Err(RelaxError::Vacuum("nodal profile has no mass".into()));
                }
                f.scale(1.0 / mass)
            }
        };
        // Renormalize quadrature mass to exactly one.
        let mass = field.integral();
        let field = field.scale(1.0 / mass);
        check_density(&field)?;
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = 2.0 * PI;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::standard(1, n).unwrap()
    }

    #[test]
    fn regimes() {
        assert_eq!(Regime::classify(0.0, -1.0).unwrap(), Regime::PressurelessRepulsive);
        assert_eq!(Regime::classify(1.0, 0.1).unwrap(), Regime::PressureAttractive);
        assert_eq!(Regime::classify(1.0, -0.1).unwrap(), Regime::PressureRepulsive);
        assert_eq!(Regime::classify(1.0, 0.0).unwrap(), Regime::PressureOnly);
        assert!(matches!(Regime::classify(0.0, 1.0), Err(RelaxError::IllPosed(_))));
        assert!(Regime::classify(0.0, 0.0).is_err());
    }

    #[test]
    fn params_boundaries() {
        assert!(Params::new(0.1, 0.0, -1.0, 1.0, 0.5, 1).is_ok());
        assert!(Params::new(0.1, 0.0, -1.0, 1.0, 1.0, 1).is_err());
        assert!(Params::new(0.1, 0.0, -1.0, 1.0, 0.0, 1).is_err());
        assert!(Params::new(0.1, 0.0, -1.0, 1.0, 1.5, 2).is_ok());
        assert!(Params::new(0.0, 0.0, -1.0, 1.0, 0.5, 1).is_err());
        assert!(Params::new(0.1, 1.0, 1.0, 0.9, 0.5, 1).is_err());
        assert!(Params::new(0.1, -1.0, 1.0, 2.0, 0.5, 1).is_err());
    }

    #[test]
    fn velocity_examples() {
        let g = grid(32);
        let rho = Field::constant(&g, 1.0 / TAU);
        let still = FluidState::new(rho.clone(), VectorField::zeros(&g), 0.0).unwrap();
        assert!(velocity(&still).comp(0).max_abs() == 0.0);

        let m = VectorField::constant(&g, [0.1 / TAU, 0.0]);
        let moving = FluidState::new(rho, m, 0.0).unwrap();
        for v in velocity(&moving).comp(0).values() {
            assert!((v - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn well_prepared_examples() {
        let g = grid(64);
        let rho = Field::from_fn(&g, |x| (1.0 + 0.5 * x[0].cos()) / TAU);

        let heat = Params::new(0.1, 1.0, 0.0, 1.0, 0.5, 1).unwrap();
        let u = well_prepared_velocity(&rho, &heat).unwrap();
        for (i, v) in u.comp(0).values().iter().enumerate() {
            let x = g.node(i)[0];
            let want = 0.5 * x.sin() / (1.0 + 0.5 * x.cos());
            assert!((v - want).abs() < 1e-10, "{v} vs {want}");
        }

        let riesz = Params::new(0.1, 0.0, -1.0, 1.0, 0.5, 1).unwrap();
        let u = well_prepared_velocity(&rho, &riesz).unwrap();
        for (i, v) in u.comp(0).values().iter().enumerate() {
            let want = 0.5 * g.node(i)[0].sin() / TAU;
            assert!((v - want).abs() < 1e-14);
        }

        let flat = Field::constant(&g, 1.0 / TAU);
        let attractive = Params::new(0.1, 1.0, 0.3, 2.0, 0.5, 1).unwrap();
        assert!(well_prepared_velocity(&flat, &attractive).unwrap().max_norm() < 1e-14);
    }

    #[test]
    fn vacuum_guard_for_log_pressure() {
        let g = grid(32);
        let mut v = vec![1.0 / TAU; 32];
        v[3] = 1e-13;
        let rho = Field::from_values(&g, v).unwrap();
        let p = Params::new(0.1, 1.0, 0.0, 1.0, 0.5, 1).unwrap();
        assert!(matches!(well_prepared_velocity(&rho, &p), Err(RelaxError::Vacuum(_))));
    }

    #[test]
    fn relative_internal_matches_definition() {
        for gamma in [1.0, 1.5, 2.0, 3.0] {
            for (r, rb) in [(0.3, 0.7), (1.2, 0.4), (0.5, 0.5000001), (2.0, 2.0)] {
                let direct = internal_density(r, gamma)
                    - internal_density(rb, gamma)
                    - internal_derivative(rb, gamma) * (r - rb);
                let stable = relative_internal_density(r, rb, gamma);
                assert!((direct - stable).abs() < 1e-12, "γ={gamma} {r} {rb}: {direct} {stable}");
                assert!(stable >= 0.0);
            }
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        // Both branches agree where they meet; the closed form loses about
        // one digit to cancellation at |r| = 0.1.
        for gamma in [1.0, 1.3, 2.0, 3.5] {
            for r in [-0.1, 0.1] {
                let series = relative_series(r, gamma);
                let closed = if gamma == 1.0 {
                    (1.0 + r) * f64::ln_1p(r) - r
                } else {
                    ((gamma * f64::ln_1p(r)).exp_m1() - gamma * r) / (gamma - 1.0)
                };
                assert!((series - closed).abs() < 1e-14 * closed, "γ={gamma} r={r}: {series} {closed}");
            }
        }
        // Leading term γ r²/2.
        let r = 1e-6;
        assert!((relative_series(r, 2.5) / (1.25 * r * r) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn profiles_have_unit_mass() {
        let g = PeriodicGrid::standard(2, 32).unwrap();
        for p in [
            Profile::Uniform,
            Profile::Bump { amplitude: 0.5, mode: 2 },
            Profile::Gaussian { amplitude: 0.9, mode: 1 },
        ] {
            let rho = p.density(&g).unwrap();
            assert!((rho.integral() - 1.0).abs() < 1e-12);
            assert!(rho.min() > 0.0);
        }
        assert!(Profile::Bump { amplitude: 0.95, mode: 1 }.density(&g).is_err());
    }
}
