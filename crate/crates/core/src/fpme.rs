//! Fractional porous medium limit: `∂_t ρ + c_K∇·(ρ∇Λ^{α−d}ρ) = c_P Δρ^γ`.

use crate::error::{RelaxError, Result};
use crate::euler_riesz::BLOWUP;
use crate::grid::{
    dealias, dealiased_product, laplacian, partial, riesz_force, spectral_divergence, Field,
    VectorField,
};
use crate::state::{check_density, well_prepared_velocity, LimitState, Params};
use crate::trajectory::{Observer, OutputSchedule, Trajectory};

/// Step budget `dt·(spectral radius)`; RK4 is stable up to about 2.78 on
/// the negative real axis and 2.83 on the imaginary axis.
pub const STABILITY_BUDGET: f64 = 2.0;

/// `−c_K∇·(ρ∇Λ^{α−d}ρ) + c_P Δρ^γ`.
pub fn rhs_fpme(rho: &Field, params: &Params) -> Field {
    let mut out = Field::zeros(rho.grid());
    if params.c_p() > 0.0 {
        let p = if params.gamma() == 1.0 {
            rho.clone()
        } else {
            let g = params.gamma();
            dealias(&rho.map(|r| r.max(0.0).powf(g)))
        };
        out = laplacian(&p).scale(params.c_p());
    }
    if params.c_k() != 0.0 {
        let force = riesz_force(rho, params.alpha()).expect("α validated by Params");
        let flux = force.map_comps(|f| dealiased_product(rho, f));
        out = out.axpy(-params.c_k(), &spectral_divergence(&flux));
    }
    out
}

/// Largest stable step, `STABILITY_BUDGET / λ` with the frozen-coefficient
/// bound `λ = c_P γ max ρ^{γ−1}|k|² + |c_K|(max ρ |k|^{2+α−d} + max|∇Λ^{α−d}ρ| |k|)`
/// at the largest grid wavenumber `|k| = √d π/h`.
pub fn max_dt(rho: &Field, params: &Params) -> f64 {
    let grid = rho.grid();
    let k = (grid.dim() as f64).sqrt() * std::f64::consts::PI / grid.spacing();
    let rho_max = rho.max().max(0.0);
    let mut rate = 0.0;
    if params.c_p() > 0.0 {
        rate += params.c_p() * params.gamma() * rho_max.powf(params.gamma() - 1.0) * k * k;
    }
    if params.c_k() != 0.0 {
        let force = riesz_force(rho, params.alpha()).expect("α validated").max_norm();
        rate += params.c_k().abs() * (rho_max * k.powf(2.0 + params.riesz_order()) + force * k);
    }
    if rate > 0.0 {
        STABILITY_BUDGET / rate
    } else {
        f64::INFINITY
    }
}

/// Classical four-stage Runge–Kutta step.
pub fn step_fpme(rho: &Field, dt: f64, params: &Params) -> Field {
    let k1 = rhs_fpme(rho, params);
    let k2 = rhs_fpme(&rho.axpy(0.5 * dt, &k1), params);
    let k3 = rhs_fpme(&rho.axpy(0.5 * dt, &k2), params);
    let k4 = rhs_fpme(&rho.axpy(dt, &k3), params);
    let values = (0..rho.values().len())
        .map(|i| {
            rho.values()[i]
                + dt / 6.0
                    * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i])
        })
        .collect();
    Field::raw(rho.grid(), values)
}

fn guard(rho: &Field, time: f64) -> Result<()> {
    if !rho.values().iter().all(|v| v.is_finite()) || rho.max() > BLOWUP {
        return Err(RelaxError::Instability {
            time,
            message: format!("max ρ = {:e}", rho.max()),
        });
    }
    Ok(())
}

/// Integrate with `dt = min(max_dt, dt_max)`, landing exactly on outputs.
pub fn run_fpme(
    initial: &Field,
    params: &Params,
    dt_max: f64,
    schedule: &OutputSchedule,
    observers: &mut [&mut dyn Observer<LimitState>],
) -> Result<Trajectory<LimitState>> {
    check_density(initial)?;
    let times = schedule.times();
    let mut state = LimitState {
        rho: initial.clone(),
        time: times[0],
    };
    for obs in observers.iter_mut() {
        obs.observe(&state);
    }
    let mut snapshots = vec![state.clone()];
    for &target in &times[1..] {
        while state.time < target {
            let t = state.time;
            let mut dt = max_dt(&state.rho, params).min(dt_max);
            let land = t + dt >= target - 1e-12 * target.abs().max(1.0);
            if land {
                dt = target - t;
            }
            let rho = step_fpme(&state.rho, dt, params);
            let time = if land { target } else { t + dt };
            guard(&rho, time)?;
            state = LimitState { rho, time };
        }
        for obs in observers.iter_mut() {
            obs.observe(&state);
        }
        snapshots.push(state.clone());
    }
    Ok(Trajectory {
        snapshots,
        steps: Vec::new(),
    })
}

/// `u(ρ) = −c_P∇𝒰'(ρ) + c_K∇Λ^{α−d}ρ`.
pub fn limit_velocity(rho: &Field, params: &Params) -> Result<VectorField> {
    well_prepared_velocity(rho, params)
}

/// Limit acceleration `e = ∂_t u + (u·∇)u` at a stored snapshot.
#[derive(Clone, Debug)]
pub struct Acceleration {
    pub field: VectorField,
    /// True when a first-order one-sided difference was used.
    pub one_sided: bool,
}

fn advective(u: &VectorField) -> VectorField {
    let dim = u.grid().dim();
    u.map_comps(|ua| {
        let mut acc = dealiased_product(u.comp(0), &partial(ua, 0));
        for b in 1..dim {
            acc = &acc + &dealiased_product(u.comp(b), &partial(ua, b));
        }
        acc
    })
}

/// Centered-difference acceleration at interior snapshot `k`.
pub fn limit_acceleration(
    traj: &Trajectory<LimitState>,
    k: usize,
    params: &Params,
) -> Result<VectorField> {
    let n = traj.snapshots.len();
    if k == 0 || k + 1 >= n {
        return Err(RelaxError::Boundary(format!(
            "snapshot {k} of {n} has no centered neighbours"
        )));
    }
    accel(traj, k - 1, k, k + 1, params)
}

/// As [`limit_acceleration`], falling back to a flagged one-sided
/// difference at the trajectory ends.
pub fn limit_acceleration_or_one_sided(
    traj: &Trajectory<LimitState>,
    k: usize,
    params: &Params,
) -> Result<Acceleration> {
    let n = traj.snapshots.len();
    if n < 2 || k >= n {
        return Err(RelaxError::Boundary(format!("snapshot {k} of {n}")));
    }
    let (lo, hi, one_sided) = match k {
        0 => (0, 1, true),
        _ if k + 1 == n => (k - 1, k, true),
        _ => (k - 1, k + 1, false),
    };
    Ok(Acceleration {
        field: accel(traj, lo, k, hi, params)?,
        one_sided,
    })
}

fn accel(
    traj: &Trajectory<LimitState>,
    lo: usize,
    mid: usize,
    hi: usize,
    params: &Params,
) -> Result<VectorField> {
    let s = &traj.snapshots;
    let u_lo = limit_velocity(&s[lo].rho, params)?;
    let u_hi = limit_velocity(&s[hi].rho, params)?;
    let u_mid = limit_velocity(&s[mid].rho, params)?;
    let dt = s[hi].time - s[lo].time;
    let dudt = u_hi.zip_comps(&u_lo, |a, b| (a - b).scale(1.0 / dt));
    Ok(dudt.zip_comps(&advective(&u_mid), |a, b| a + b))
}
