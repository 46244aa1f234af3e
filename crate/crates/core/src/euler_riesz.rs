//! Pseudo-spectral damped Euler–Riesz solver.
//!
//! The damping `−m/ε` is integrated exactly by an integrating factor; the
//! remaining terms use the three-stage SSP Runge–Kutta scheme in the
//! transformed variable `e^{t/ε} m`.

use crate::energetics::{dissipation_rate, total_energy};
use crate::error::{RelaxError, Result};
use crate::grid::{dealias, dealiased_product, partial, riesz_force, Field, VectorField};
use crate::state::{velocity, FluidState, Params};
use crate::trajectory::{Observer, OutputSchedule, StepRecord, Trajectory};

/// Blow-up threshold for `max|u|` and `max ρ`.
pub const BLOWUP: f64 = 1e6;

/// Adaptive time-step controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPolicy {
    pub cfl: f64,
    pub epsilon_fraction: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            epsilon_fraction: 0.25,
            dt_min: 1e-12,
            dt_max: 0.05,
        }
    }
}

impl StepPolicy {
    pub fn new(cfl: f64, epsilon_fraction: f64, dt_min: f64, dt_max: f64) -> Result<Self> {
        for (what, v) in [
            ("cfl", cfl),
            ("epsilon_fraction", epsilon_fraction),
            ("dt_min", dt_min),
            ("dt_max", dt_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(RelaxError::Range {
                    what,
                    value: v,
                    range: "(0, ∞)".into(),
                });
            }
        }
        if dt_min > dt_max {
            return Err(RelaxError::Range {
                what: "dt_min",
                value: dt_min,
                range: format!("(0, dt_max = {dt_max}]"),
            });
        }
        Ok(Self {
            cfl,
            epsilon_fraction,
            dt_min,
            dt_max,
        })
    }

    /// `min(cfl·h/(max|u| + c_s + c_R), epsilon_fraction·ε, dt_max)`.
    ///
    /// `c_s = √(c_P γ max ρ^{γ−1}/ε)` is the acoustic speed. `c_R` is the
    /// phase speed of the linearized interaction waves at the grid scale,
    /// `√(|c_K| max ρ/ε)·k_max^{(α−d)/2}`.
    pub fn dt(&self, state: &FluidState, params: &Params) -> f64 {
        let grid = state.grid();
        let h = grid.spacing();
        let eps = params.epsilon();
        let rho_max = state.rho.max().max(0.0);
        let umax = velocity(state).max_norm();
        let acoustic = if params.c_p() > 0.0 {
            (params.c_p() * params.gamma() * rho_max.powf(params.gamma() - 1.0) / eps).sqrt()
        } else {
            0.0
        };
        let k_max = std::f64::consts::PI / h;
        let riesz = (params.c_k().abs() * rho_max / eps).sqrt() * k_max.powf(0.5 * params.riesz_order());
        let speed = umax + acoustic + riesz;
        let cfl = if speed > 0.0 { self.cfl * h / speed } else { f64::INFINITY };
        cfl.min(self.epsilon_fraction * eps).min(self.dt_max)
    }
}

/// Split tendencies of the momentum-form system.
#[derive(Clone, Debug)]
pub struct Tendency {
    pub drho: Field,
    /// Everything except the linear damping.
    pub dm: VectorField,
    /// Rate of the exactly integrated damping, `1/ε`.
    pub damping: f64,
}

/// `∂_t ρ = −∇·m`, `∂_t m = −∇·(m⊗u) − (c_P/ε)∇ρ^γ + (c_K/ε)ρ∇Λ^{α−d}ρ − m/ε`.
pub fn rhs_euler_riesz(state: &FluidState, params: &Params) -> Tendency {
    let grid = state.grid();
    let dim = grid.dim();
    let eps = params.epsilon();
    let u = velocity(state);
    let drho = -&crate::grid::spectral_divergence(&state.m);

    let pressure_grad = (params.c_p() > 0.0).then(|| {
        let p = if params.gamma() == 1.0 {
            state.rho.clone()
        } else {
            let g = params.gamma();
            dealias(&state.rho.map(|r| r.max(0.0).powf(g)))
        };
        crate::grid::spectral_gradient(&p)
    });
    let force = (params.c_k() != 0.0)
        .then(|| riesz_force(&state.rho, params.alpha()).expect("α validated by Params"));

    let comps = (0..dim)
        .map(|a| {
            let ma = state.m.comp(a);
            let mut flux = partial(&dealiased_product(ma, u.comp(0)), 0);
            for b in 1..dim {
                flux = &flux + &partial(&dealiased_product(ma, u.comp(b)), b);
            }
            let mut out = -&flux;
            if let Some(gp) = &pressure_grad {
                out = out.axpy(-params.c_p() / eps, gp.comp(a));
            }
            if let Some(f) = &force {
                out = out.axpy(params.c_k() / eps, &dealiased_product(&state.rho, f.comp(a)));
            }
            out
        })
        .collect();
    Tendency {
        drho,
        dm: VectorField::raw(comps),
        damping: 1.0 / eps,
    }
}

fn combine(a: f64, x: &Field, b: f64, y: &Field) -> Field {
    x.zip_map(y, |p, q| a * p + b * q)
}

fn combine_vec(a: f64, x: &VectorField, b: f64, y: &VectorField) -> VectorField {
    x.zip_comps(y, |p, q| combine(a, p, b, q))
}

/// `(ρ + dt·Rρ, ef·(m + dt·Rm))`.
fn euler_stage(s: &FluidState, t: &Tendency, dt: f64, ef: f64) -> FluidState {
    FluidState {
        rho: s.rho.axpy(dt, &t.drho),
        m: s.m.zip_comps(&t.dm, |m, r| m.axpy(dt, r).scale(ef)),
        time: s.time,
    }
}

/// One third-order step and the embedded second-order (Heun) solution.
fn step_pair(state: &FluidState, dt: f64, params: &Params) -> (FluidState, FluidState) {
    let eps = params.epsilon();
    let e = |tau: f64| (-tau / eps).exp();

    let t0 = rhs_euler_riesz(state, params);
    let s1 = euler_stage(state, &t0, dt, e(dt));

    let t1 = rhs_euler_riesz(&s1, params);
    let a1 = euler_stage(&s1, &t1, dt, 1.0);
    let heun = FluidState {
        rho: combine(0.5, &state.rho, 0.5, &a1.rho),
        m: combine_vec(0.5 * e(dt), &state.m, 0.5, &a1.m),
        time: state.time + dt,
    };
    let s2 = FluidState {
        rho: combine(0.75, &state.rho, 0.25, &a1.rho),
        m: combine_vec(0.75 * e(0.5 * dt), &state.m, 0.25 * e(-0.5 * dt), &a1.m),
        time: state.time,
    };

    let t2 = rhs_euler_riesz(&s2, params);
    let a2 = euler_stage(&s2, &t2, dt, 1.0);
    let next = FluidState {
        rho: combine(1.0 / 3.0, &state.rho, 2.0 / 3.0, &a2.rho),
        m: combine_vec(e(dt) / 3.0, &state.m, 2.0 * e(0.5 * dt) / 3.0, &a2.m),
        time: state.time + dt,
    };
    (next, heun)
}

fn guard(state: &FluidState) -> Result<()> {
    let rho_max = state.rho.max();
    let umax = velocity(state).max_norm();
    let finite = state.rho.values().iter().all(|v| v.is_finite())
        && state.m.comps().iter().all(|c| c.values().iter().all(|v| v.is_finite()));
    if !finite || rho_max > BLOWUP || umax > BLOWUP {
        return Err(RelaxError::Instability {
            time: state.time,
            message: format!("max ρ = {rho_max:e}, max|u| = {umax:e}"),
        });
    }
    Ok(())
}

/// Advance by `dt` (integrating-factor SSPRK3).
pub fn step(state: &FluidState, dt: f64, params: &Params) -> Result<FluidState> {
    let (next, _) = step_pair(state, dt, params);
    guard(&next)?;
    Ok(next)
}

/// Integrate from `initial` over the output schedule, landing exactly on
/// every output time.
pub fn run_er(
    initial: &FluidState,
    params: &Params,
    policy: &StepPolicy,
    schedule: &OutputSchedule,
    observers: &mut [&mut dyn Observer<FluidState>],
) -> Result<Trajectory<FluidState>> {
    crate::state::check_density(&initial.rho)?;
    let times = schedule.times();
    let mut state = initial.clone();
    state.time = times[0];
    guard(&state)?;
    for obs in observers.iter_mut() {
        obs.observe(&state);
    }
    let mut snapshots = vec![state.clone()];
    let mut steps = Vec::new();
    let mut energy = total_energy(&state, params);
    let mut dissipation = dissipation_rate(&state, params);
    for &target in &times[1..] {
        while state.time < target {
            let t = state.time;
            let mut dt = policy.dt(&state, params);
            let land = t + dt >= target - 1e-12 * target.abs().max(1.0);
            if land {
                dt = target - t;
            } else if dt < policy.dt_min {
                return Err(RelaxError::Instability {
                    time: t,
                    message: format!("time step {dt:e} below dt_min"),
                });
            }
            let (mut next, heun) = step_pair(&state, dt, params);
            next.time = if land { target } else { t + dt };
            guard(&next)?;
            let e_next = total_energy(&next, params);
            let d_next = dissipation_rate(&next, params);
            steps.push(StepRecord {
                time: t,
                dt,
                energy_before: energy,
                energy_after: e_next,
                truncation: (e_next - total_energy(&heun, params)).abs(),
                dissipation: 0.5 * (dissipation + d_next),
            });
            energy = e_next;
            dissipation = d_next;
            state = next;
        }
        for obs in observers.iter_mut() {
            obs.observe(&state);
        }
        snapshots.push(state.clone());
    }
    Ok(Trajectory { snapshots, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicGrid;
    use crate::state::{well_prepared_velocity, Profile};
    use std::f64::consts::PI;

    const TAU: f64 = 2.0 * PI;

    fn bump_state(n: usize, params: &Params) -> FluidState {
        let g = PeriodicGrid::standard(1, n).unwrap();
        let rho = Profile::Bump { amplitude: 0.3, mode: 1 }.density(&g).unwrap();
        let u = well_prepared_velocity(&rho, params).unwrap();
        FluidState::from_velocity(rho, &u, 0.0).unwrap()
    }

    #[test]
    fn uniform_equilibrium_is_fixed() {
        let g = PeriodicGrid::standard(1, 64).unwrap();
        let p = Params::new(0.1, 1.0, -1.0, 2.0, 0.5, 1).unwrap();
        let s = FluidState::new(Field::constant(&g, 1.0 / TAU), VectorField::zeros(&g), 0.0).unwrap();
        let t = rhs_euler_riesz(&s, &p);
        assert!(t.drho.max_abs() < 1e-15 && t.dm.max_norm() < 1e-15);
        let next = step(&s, 0.01, &p).unwrap();
        for (a, b) in next.rho.values().iter().zip(s.rho.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        let sched = OutputSchedule::uniform(1.0, 10).unwrap();
        let traj = run_er(&s, &p, &StepPolicy::default(), &sched, &mut []).unwrap();
        assert_eq!(traj.snapshots.len(), 11);
        assert!(traj.snapshots.iter().all(|x| x.rho.values().iter().all(|v| (v - 1.0 / TAU).abs() < 1e-13)));
    }

    #[test]
    fn linear_pressure_tendency() {
        let g = PeriodicGrid::standard(1, 64).unwrap();
        let p = Params::new(1.0, 1.0, 0.0, 1.0, 0.5, 1).unwrap();
        let rho = Field::from_fn(&g, |x| (1.0 + 0.1 * x[0].cos()) / TAU);
        let s = FluidState::new(rho, VectorField::zeros(&g), 0.0).unwrap();
        let t = rhs_euler_riesz(&s, &p);
        for (i, v) in t.dm.comp(0).values().iter().enumerate() {
            let x = g.node(i)[0];
            assert!((v - 0.1 * x.sin() / TAU).abs() < 1e-14);
        }
        assert_eq!(t.damping, 1.0);
    }

    #[test]
    fn uniform_momentum_decays_exactly() {
        let g = PeriodicGrid::standard(2, 16).unwrap();
        let p = Params::new(0.05, 1.0, -1.0, 1.5, 1.3, 2).unwrap();
        let rho = Field::constant(&g, 1.0 / g.volume());
        let m = VectorField::constant(&g, [0.3, -0.2]);
        let s = FluidState::new(rho, m, 0.0).unwrap();
        let dt = 0.01;
        let next = step(&s, dt, &p).unwrap();
        let f = (-dt / 0.05f64).exp();
        for (a, m0) in [0.3, -0.2].iter().enumerate() {
            assert!(next.m.comp(a).values().iter().all(|v| (v - m0 * f).abs() < 1e-12));
        }
    }

    #[test]
    fn t_end_zero_gives_initial_only() {
        let p = Params::new(0.1, 1.0, -1.0, 2.0, 0.5, 1).unwrap();
        let s = bump_state(32, &p);
        let sched = OutputSchedule::uniform(0.0, 10).unwrap();
        let traj = run_er(&s, &p, &StepPolicy::default(), &sched, &mut []).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert!(traj.steps.is_empty());
    }

    #[test]
    fn mass_and_landing() {
        let p = Params::new(0.1, 1.0, -1.0, 2.0, 0.5, 1).unwrap();
        let s = bump_state(64, &p);
        let sched = OutputSchedule::uniform(0.5, 7).unwrap();
        let mut seen = Vec::new();
        let mut obs = |x: &FluidState| seen.push(x.time);
        let traj = run_er(&s, &p, &StepPolicy::default(), &sched, &mut [&mut obs]).unwrap();
        assert_eq!(traj.times(), sched.times());
        assert_eq!(seen, sched.times());
        for snap in &traj.snapshots {
            assert!((snap.mass() - 1.0).abs() < 1e-12);
        }
        for st in &traj.steps {
            assert!(st.energy_after - st.energy_before <= 10.0 * st.truncation + 1e-14);
        }
    }

    #[test]
    fn momentum_offset_decays_with_damping() {
        let p = Params::new(0.1, 1.0, -1.0, 2.0, 0.5, 1).unwrap();
        let base = bump_state(64, &p);
        let g = base.grid().clone();
        let u = velocity(&base).zip_comps(&VectorField::constant(&g, [0.1, 0.0]), |a, b| a + b);
        let s = FluidState::from_velocity(base.rho.clone(), &u, 0.0).unwrap();
        let p0 = s.total_momentum()[0];
        assert!((p0 - 0.1).abs() < 1e-12);
        let sched = OutputSchedule::uniform(0.5, 10).unwrap();
        let traj = run_er(&s, &p, &StepPolicy::default(), &sched, &mut []).unwrap();
        for snap in &traj.snapshots {
            let exact = p0 * (-snap.time / 0.1f64).exp();
            assert!((snap.total_momentum()[0] - exact).abs() <= 1e-6 * p0.abs());
        }
        let at = traj.snapshots.iter().find(|x| (x.time - 0.2).abs() < 1e-12).unwrap();
        assert!((at.total_momentum()[0] - 0.0135335).abs() < 1e-6);
    }

    fn fixed_dt_run(s: &FluidState, p: &Params, t_end: f64, nsteps: usize) -> FluidState {
        let dt = t_end / nsteps as f64;
        let mut x = s.clone();
        for _ in 0..nsteps {
            x = step(&x, dt, p).unwrap();
        }
        x
    }

    fn dist(a: &FluidState, b: &FluidState) -> f64 {
        let d = &a.rho - &b.rho;
        let dm = a.m.zip_comps(&b.m, |x, y| x - y);
        d.max_abs().max(dm.max_norm())
    }

    #[test]
    fn self_convergence_order() {
        let p = Params::new(0.2, 1.0, -0.5, 2.0, 0.5, 1).unwrap();
        let s = bump_state(32, &p);
        let t_end = 0.4;
        let r: Vec<FluidState> = [20, 40, 80, 160].iter().map(|&k| fixed_dt_run(&s, &p, t_end, k)).collect();
        let e1 = dist(&r[0], &r[1]);
        let e2 = dist(&r[1], &r[2]);
        let e3 = dist(&r[2], &r[3]);
        let o1 = (e1 / e2).log2();
        let o2 = (e2 / e3).log2();
        assert!(o1 >= 2.5 && o2 >= 2.5, "orders {o1} {o2}");
    }
}
