//! Energies, modulated energies, norms and identity residuals.

use serde::Serialize;

use crate::error::{RelaxError, Result};
use crate::grid::{
    check_alpha, frac_multiplier, spectral_divergence, spectral_gradient,
    Field, PeriodicGrid, VectorField,
};
use crate::state::{
    internal_density, internal_derivative, relative_internal_density, rho_floor, velocity,
    FluidState, Params, Regime,
};

/// `∫𝒰(ρ)` by grid quadrature, with `0 ln 0 = 0`.
pub fn internal_energy(rho: &Field, gamma: f64) -> f64 {
    rho.map(|r| internal_density(r, gamma)).integral()
}

/// Raw bilinear form `∫ f Λ^{α−d} g`, zero mode excluded.
pub fn interaction_energy(f: &Field, g: &Field, alpha: f64) -> Result<f64> {
    same_grid(f.grid(), g.grid())?;
    let grid = f.grid();
    check_alpha(alpha, grid.dim())?;
    let s = alpha - grid.dim() as f64;
    let (cf, cg) = (f.spectrum(), g.spectrum());
    let sum: f64 = (0..grid.len())
        .map(|i| frac_multiplier(grid, i, s) * (cf[i] * cg[i].conj()).re)
        .sum();
    Ok(sum * grid.volume())
}

/// `F(ρ) = c_P ∫𝒰(ρ) − (c_K/2) ∫ρΛ^{α−d}ρ`.
pub fn free_energy(rho: &Field, params: &Params) -> f64 {
    let internal = if params.c_p() != 0.0 {
        internal_energy(rho, params.gamma())
    } else {
        0.0
    };
    let interaction = if params.c_k() != 0.0 {
        interaction_energy(rho, rho, params.alpha()).expect("α validated by Params")
    } else {
        0.0
    };
    params.c_p() * internal - 0.5 * params.c_k() * interaction
}

/// `∫|m|²/(2ρ)`.
pub fn kinetic_energy(state: &FluidState) -> f64 {
    let floor = rho_floor(state.grid());
    state
        .m
        .norm_sq()
        .zip_map(&state.rho, |m2, r| 0.5 * m2 / r.max(floor))
        .integral()
}

/// `½∫ρ|u − ū|²`.
pub fn modulated_kinetic(state: &FluidState, u_bar: &VectorField) -> f64 {
    let du = velocity(state).zip_comps(u_bar, |a, b| a - b);
    0.5 * state.rho.inner(&du.norm_sq())
}

/// `(1/ε)∫ρ|u|²`, the damping dissipation rate of the total energy.
pub fn dissipation_rate(state: &FluidState, params: &Params) -> f64 {
    2.0 * kinetic_energy(state) / params.epsilon()
}

/// `𝒦 + F/ε`.
pub fn total_energy(state: &FluidState, params: &Params) -> f64 {
    kinetic_energy(state) + free_energy(&state.rho, params) / params.epsilon()
}

/// `c_P ∫𝒰(ρ|ρ̄)`.
pub fn modulated_internal(rho: &Field, rho_bar: &Field, gamma: f64, c_p: f64) -> Result<f64> {
    same_grid(rho.grid(), rho_bar.grid())?;
    let floor = rho_floor(rho.grid());
    if rho.min() < 0.0 || rho_bar.min() <= 0.0 || (gamma == 1.0 && rho.min().min(rho_bar.min()) < floor) {
        return Err(RelaxError::Vacuum(
            "relative internal energy needs positive densities".into(),
        ));
    }
    Ok(c_p * rho.zip_map(rho_bar, |a, b| relative_internal_density(a, b, gamma)).integral())
}

/// `−(c_K/2)∫(ρ−ρ̄)Λ^{α−d}(ρ−ρ̄)`.
pub fn modulated_interaction(rho: &Field, rho_bar: &Field, params: &Params) -> Result<f64> {
    same_grid(rho.grid(), rho_bar.grid())?;
    let diff = rho - rho_bar;
    let mismatch = diff.integral();
    if mismatch.abs() > 1e-8 {
        return Err(RelaxError::MassMismatch(mismatch));
    }
    if params.c_k() == 0.0 {
        return Ok(0.0);
    }
    Ok(-0.5 * params.c_k() * interaction_energy(&diff, &diff, params.alpha())?)
}

/// `F(ρ|ρ̄)`: modulated internal plus modulated interaction energy.
pub fn modulated_free(rho: &Field, rho_bar: &Field, params: &Params) -> Result<f64> {
    let internal = if params.c_p() > 0.0 {
        modulated_internal(rho, rho_bar, params.gamma(), params.c_p())?
    } else {
        0.0
    };
    Ok(internal + modulated_interaction(rho, rho_bar, params)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    L1,
    L2,
    Lp(f64),
    /// `‖f‖_{Ḣ^{(α−d)/2}}` for mean-zero f.
    NegSobolev { alpha: f64 },
    /// `∫|x|² f` in centred coordinates.
    SecondMoment,
    /// `‖Λ^s f‖_{L²} + ‖f‖_{L²}`.
    Hs(f64),
}

pub fn norm(f: &Field, kind: NormKind) -> Result<f64> {
    Ok(match kind {
        NormKind::L1 => f.map(f64::abs).integral(),
        NormKind::L2 => f.inner(f).sqrt(),
        NormKind::Lp(p) => {
            if !(p >= 1.0 && p.is_finite()) {
                return Err(RelaxError::Range {
                    what: "p",
                    value: p,
                    range: "[1, ∞)".into(),
                });
            }
            f.map(|v| v.abs().powf(p)).integral().powf(1.0 / p)
        }
        NormKind::NegSobolev { alpha } => {
            let scale = f.max_abs().max(f64::MIN_POSITIVE);
            let mean = f.integral();
            if mean.abs() > 1e-8 * scale.max(1.0) {
                return Err(RelaxError::MeanZero(format!("∫f = {mean:e}")));
            }
            interaction_energy(f, f, alpha)?.max(0.0).sqrt()
        }
        NormKind::SecondMoment => {
            let grid = f.grid();
            let w: f64 = f
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let x = grid.node(i);
                    v * (x[0] * x[0] + x[1] * x[1])
                })
                .sum();
            w * grid.cell_volume()
        }
        NormKind::Hs(s) => {
            let grid = f.grid();
            let c = f.spectrum();
            let lam: f64 = (0..grid.len())
                .map(|i| frac_multiplier(grid, i, 2.0 * s) * c[i].norm_sqr())
                .sum();
            (lam * grid.volume()).sqrt() + f.inner(f).sqrt()
        }
    })
}

/// `‖ρ̃ − ρ‖²` in `Ḣ^{(α−d)/2}`, i.e. `∫(ρ̃−ρ)Λ^{α−d}(ρ̃−ρ)`.
pub fn neg_sobolev_sq(rho: &Field, rho_bar: &Field, alpha: f64) -> Result<f64> {
    let diff = rho - rho_bar;
    interaction_energy(&diff, &diff, alpha)
}

/// Scalar diagnostics of one fluid snapshot, optionally against a limit
/// reference density `ρ̄` with velocity `ū`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub time: f64,
    pub mass: f64,
    pub total_momentum: Vec<f64>,
    pub kinetic: f64,
    pub internal: f64,
    pub interaction: f64,
    pub free: f64,
    pub total: f64,
    pub dissipation_rate: f64,
    pub mod_kinetic: Option<f64>,
    pub mod_internal: Option<f64>,
    pub mod_interaction: Option<f64>,
    pub neg_sobolev_sq: Option<f64>,
    /// `‖ρ‖_{L^θ}`, reported in the pressure-attractive regime.
    pub theta_norm: Option<f64>,
    pub second_moment: f64,
}

pub fn energy_report(
    state: &FluidState,
    reference: Option<(&Field, &VectorField)>,
    params: &Params,
) -> Result<EnergyReport> {
    let rho = &state.rho;
    let internal = internal_energy(rho, params.gamma());
    let interaction = interaction_energy(rho, rho, params.alpha())?;
    let free = params.c_p() * internal - 0.5 * params.c_k() * interaction;
    let kinetic = kinetic_energy(state);
    let theta_norm = (params.regime() == Regime::PressureAttractive)
        .then(|| norm(rho, NormKind::Lp(params.theta())))
        .transpose()?;
    let mut report = EnergyReport {
        time: state.time,
        mass: state.mass(),
        total_momentum: state.total_momentum(),
        kinetic,
        internal,
        interaction,
        free,
        total: kinetic + free / params.epsilon(),
        dissipation_rate: 2.0 * kinetic / params.epsilon(),
        mod_kinetic: None,
        mod_internal: None,
        mod_interaction: None,
        neg_sobolev_sq: None,
        theta_norm,
        second_moment: norm(rho, NormKind::SecondMoment)?,
    };
    if let Some((rho_bar, u_bar)) = reference {
        report.mod_kinetic = Some(modulated_kinetic(state, u_bar));
        report.mod_internal = Some(if params.c_p() > 0.0 {
            modulated_internal(rho, rho_bar, params.gamma(), params.c_p())?
        } else {
            0.0
        });
        report.mod_interaction = Some(modulated_interaction(rho, rho_bar, params)?);
        report.neg_sobolev_sq = Some(neg_sobolev_sq(rho, rho_bar, params.alpha())?);
    }
    Ok(report)
}

/// Right-hand side of the modulated internal energy identity,
/// `∫ρ̃(ũ−u)·∇(𝒰'(ρ̃)−𝒰'(ρ)) − (γ−1)∫𝒰(ρ̃|ρ)∇·u`, without the `c_P` factor.
pub fn modulated_internal_rate(
    state: &FluidState,
    rho_bar: &Field,
    u_bar: &VectorField,
    gamma: f64,
) -> Result<f64> {
    same_grid(state.grid(), rho_bar.grid())?;
    let rho = &state.rho;
    let du = velocity(state).zip_comps(u_bar, |a, b| a - b);
    let dprime = rho.zip_map(rho_bar, |a, b| internal_derivative(a, gamma) - internal_derivative(b, gamma));
    let transport = rho.inner(&du.dot(&spectral_gradient(&dprime)));
    let relative = rho.zip_map(rho_bar, |a, b| relative_internal_density(a, b, gamma));
    let compression = relative.inner(&spectral_divergence(u_bar));
    Ok(transport - (gamma - 1.0) * compression)
}

/// Per-step residual of the total energy identity
/// `dE/dt + (1/ε)∫ρ|u|² = 0`, from the integrator's step records.
pub fn energy_identity_residual(steps: &[crate::trajectory::StepRecord]) -> Vec<f64> {
    steps
        .iter()
        .map(|s| (s.energy_after - s.energy_before) / s.dt + s.dissipation)
        .collect()
}

pub(crate) fn same_grid(a: &PeriodicGrid, b: &PeriodicGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(RelaxError::GridMismatch(format!("{a:?} vs {b:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fractional_laplacian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const TAU: f64 = 2.0 * PI;

    fn g1(n: usize) -> PeriodicGrid {
        PeriodicGrid::standard(1, n).unwrap()
    }

    fn smooth_random(grid: &PeriodicGrid, rng: &mut ChaCha8Rng, modes: i32) -> Field {
        let coeffs: Vec<(f64, f64, f64)> = (1..=modes)
            .map(|k| (k as f64, rng.gen_range(-1.0..1.0) / k as f64, rng.gen_range(0.0..TAU)))
            .collect();
        Field::from_fn(grid, |x| {
            coeffs.iter().map(|(k, a, ph)| a * (k * x[0] + ph).cos()).sum::<f64>()
        })
    }

    fn density(f: &Field) -> Field {
        let shift = f.map(|v| 1.0 + 0.4 * v.tanh());
        shift.scale(1.0 / shift.integral())
    }

    fn params(c_p: f64, c_k: f64, gamma: f64) -> Params {
        Params::new(0.1, c_p, c_k, gamma, 0.5, 1).unwrap()
    }

    #[test]
    fn internal_energy_examples() {
        let g = g1(64);
        let rho = Field::constant(&g, 1.0 / TAU);
        assert!((internal_energy(&rho, 2.0) - 1.0 / TAU).abs() < 1e-14);
        assert!((internal_energy(&rho, 1.0) - (1.0 / TAU).ln()).abs() < 1e-13);
        assert_eq!(internal_energy(&Field::zeros(&g), 1.0), 0.0);
    }

    #[test]
    fn internal_energy_matches_fine_quadrature() {
        // Composite Simpson on 2^16 panels of the analytic bump profile.
        let a = 0.3;
        let rho = |x: f64| (1.0 + a * x.cos()) / TAU;
        let m = 1 << 16;
        let h = TAU / m as f64;
        let simpson: f64 = (0..=m)
            .map(|j| {
                let x = -PI + j as f64 * h;
                let w = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
                let r = rho(x);
                w * r * r.ln()
            })
            .sum::<f64>()
            * h
            / 3.0;
        let g = g1(128);
        let field = Field::from_fn(&g, |x| rho(x[0]));
        assert!((internal_energy(&field, 1.0) - simpson).abs() < 1e-8);
    }

    #[test]
    fn interaction_examples() {
        let g = g1(64);
        let f = Field::from_fn(&g, |x| x[0].cos() / TAU);
        assert!((interaction_energy(&f, &f, 0.5).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-14);
        let c = Field::constant(&g, 3.0);
        assert_eq!(interaction_energy(&c, &f, 0.5).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let f = smooth_random(&g, &mut rng, 10);
            let h = fractional_laplacian(&f, -0.25).unwrap();
            let lhs = interaction_energy(&f, &f, 0.5).unwrap();
            assert!((lhs - h.inner(&h)).abs() < 1e-12 * lhs.max(1.0));
            let k = smooth_random(&g, &mut rng, 10);
            let ab = interaction_energy(&f, &k, 0.5).unwrap();
            let ba = interaction_energy(&k, &f, 0.5).unwrap();
            assert!((ab - ba).abs() < 1e-13);
        }
    }

    #[test]
    fn free_energy_examples() {
        let g = g1(64);
        let rho = Field::constant(&g, 1.0 / TAU);
        assert!((free_energy(&rho, &params(1.0, -1.0, 2.0)) - 1.0 / TAU).abs() < 1e-14);
        let bump = Field::from_fn(&g, |x| (1.0 + x[0].cos()) / TAU);
        let f = free_energy(&bump, &params(0.0, -1.0, 2.0));
        assert!((f - 0.5 / (4.0 * PI)).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = density(&smooth_random(&g, &mut rng, 6));
        let sum = free_energy(&rho, &params(0.7, -0.3, 1.5));
        let split = free_energy(&rho, &params(0.7, 0.0, 1.5)) + free_energy(&rho, &params(0.0, -0.3, 1.5));
        assert!((sum - split).abs() < 1e-13);
    }

    #[test]
    fn kinetic_examples() {
        let g = g1(64);
        let rho = Field::constant(&g, 1.0 / TAU);
        let zero = FluidState::new(rho.clone(), VectorField::zeros(&g), 0.0).unwrap();
        assert_eq!(kinetic_energy(&zero), 0.0);
        assert_eq!(modulated_kinetic(&zero, &VectorField::zeros(&g)), 0.0);
        let moving = FluidState::from_velocity(rho, &VectorField::constant(&g, [1.0, 0.0]), 0.0).unwrap();
        assert!((modulated_kinetic(&moving, &VectorField::zeros(&g)) - 0.5).abs() < 1e-14);
        assert!(modulated_kinetic(&moving, &velocity(&moving)).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let rho = density(&smooth_random(&g, &mut rng, 5));
            let u = VectorField::raw(vec![smooth_random(&g, &mut rng, 5)]);
            let ub = VectorField::raw(vec![smooth_random(&g, &mut rng, 5)]);
            let s = FluidState::from_velocity(rho.clone(), &u, 0.0).unwrap();
            let expand = kinetic_energy(&s) - s.m.comp(0).inner(ub.comp(0))
                + 0.5 * rho.inner(&ub.norm_sq());
            assert!((modulated_kinetic(&s, &ub) - expand).abs() < 1e-10);
        }
    }

    #[test]
    fn modulated_internal_examples() {
        let g = g1(64);
        let rb = Field::constant(&g, 1.0 / TAU);
        assert_eq!(modulated_internal(&rb, &rb, 1.5, 1.0).unwrap(), 0.0);
        let r = Field::from_fn(&g, |x| (1.0 + 0.5 * x[0].cos()) / TAU);
        let v = modulated_internal(&r, &rb, 2.0, 3.0).unwrap();
        assert!((v - 3.0 / (16.0 * PI)).abs() < 1e-14);
        let vac = Field::zeros(&g);
        assert!(matches!(modulated_internal(&vac, &rb, 1.0, 1.0), Err(RelaxError::Vacuum(_))));
    }

    #[test]
    fn modulated_internal_lower_bound_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &gamma in &[1.0, 1.5, 2.0, 3.0] {
            for _ in 0..100_000 {
                let a: f64 = (rng.gen_range(-6.0f64..3.0)).exp();
                let b: f64 = (rng.gen_range(-6.0f64..3.0)).exp();
                let lhs = relative_internal_density(a, b, gamma);
                let w = 0.5 * gamma * a.powf(gamma - 2.0).min(b.powf(gamma - 2.0));
                let rhs = w * (a - b) * (a - b);
                assert!(lhs >= rhs * (1.0 - 1e-10) - 1e-300, "γ={gamma} ρ={a} ρ̄={b}");
            }
        }
    }

    #[test]
    fn modulated_interaction_examples() {
        let g = g1(64);
        let rb = Field::constant(&g, 1.0 / TAU);
        let r = Field::from_fn(&g, |x| (1.0 + x[0].cos()) / TAU);
        let p = params(0.0, -1.0, 2.0);
        assert_eq!(modulated_interaction(&rb, &rb, &p).unwrap(), 0.0);
        assert!((modulated_interaction(&r, &rb, &p).unwrap() - 0.5 / (4.0 * PI)).abs() < 1e-14);
        let heavy = rb.scale(1.1);
        assert!(matches!(modulated_interaction(&heavy, &rb, &p), Err(RelaxError::MassMismatch(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = density(&smooth_random(&g, &mut rng, 8));
            let b = density(&smooth_random(&g, &mut rng, 8));
            assert!(modulated_interaction(&a, &b, &params(1.0, -0.5, 2.0)).unwrap() >= 0.0);
            assert!(modulated_interaction(&a, &b, &params(1.0, 0.5, 2.0)).unwrap() <= 0.0);
        }
    }

    #[test]
    fn norm_examples() {
        let g = g1(128);
        let c = Field::from_fn(&g, |x| x[0].cos());
        assert!((norm(&c, NormKind::L2).unwrap() - PI.sqrt()).abs() < 1e-13);
        let u = Field::constant(&g, 1.0 / TAU);
        assert!((norm(&u, NormKind::SecondMoment).unwrap() - PI * PI / 3.0).abs() < 1e-3);
        let neg = norm(&c, NormKind::NegSobolev { alpha: 0.5 }).unwrap();
        assert!((neg * neg - PI).abs() < 1e-13);
        assert!(matches!(
            norm(&u, NormKind::NegSobolev { alpha: 0.5 }),
            Err(RelaxError::MeanZero(_))
        ));
        assert!((norm(&c, NormKind::L1).unwrap() - 4.0).abs() < 1e-3);
        assert!((norm(&c, NormKind::Lp(2.0)).unwrap() - PI.sqrt()).abs() < 1e-13);
        let c3 = Field::from_fn(&g, |x| (3.0 * x[0]).cos());
        assert!((norm(&c3, NormKind::Hs(2.0)).unwrap() - 10.0 * PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn second_moment_uniform_converges() {
        // Midpoint-free node quadrature of x² on [−π, π) has an O(h²) error.
        let mut prev = f64::INFINITY;
        for n in [64, 128, 256, 512] {
            let u = Field::constant(&g1(n), 1.0 / TAU);
            let err = (norm(&u, NormKind::SecondMoment).unwrap() - PI * PI / 3.0).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn report_decomposition() {
        let g = g1(64);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = density(&smooth_random(&g, &mut rng, 6));
        let rb = density(&smooth_random(&g, &mut rng, 6));
        let p = Params::new(0.1, 1.0, 0.2, 2.0, 0.5, 1).unwrap();
        let s = FluidState::from_velocity(rho, &VectorField::zeros(&g), 0.3).unwrap();
        let r = energy_report(&s, Some((&rb, &VectorField::zeros(&g))), &p).unwrap();
        assert!((r.free - (r.internal - 0.1 * r.interaction)).abs() < 1e-14);
        assert!(r.mod_internal.unwrap() >= 0.0);
        assert!(r.theta_norm.is_some());
        let diff = &s.rho - &rb;
        assert!((r.neg_sobolev_sq.unwrap() - interaction_energy(&diff, &diff, 0.5).unwrap()).abs() < 1e-15);
    }
}
