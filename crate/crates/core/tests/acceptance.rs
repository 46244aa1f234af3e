//! Acceptance criteria at reference scale. One PASS/FAIL line per
//! criterion; the whole suite takes tens of minutes, so it is ignored by
//! default:
//!
//! ```text
//! cargo test --release -p relax-core --test acceptance -- --ignored --nocapture
//! ```
//!
//! `ACCEPTANCE_ONLY=1,6,7` restricts the run to the listed criteria.

use std::time::{Duration, Instant};

use relax_core::config::Config;
use relax_core::euler_riesz::run_er;
use relax_core::sweep::{modulated_internal_identity_study, run_sweep, SweepOutput};
use relax_core::verify::{run_study, Study};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn limit_ok(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() <= budget_s
}

const CONSERVATION: &str = r#"
[params]
epsilon = 0.1
c_k = -1.0
alpha = 0.5

[grid]
n = 256

[initial]
profile = "bump"
amplitude = 0.5
velocity_offset = [0.3]

[run]
t_end = 1.0
"#;

/// Same protocol for every sweep: well-prepared bump, four ε values.
fn sweep_config(params: &str) -> Config {
    let text = format!(
        r#"
[params]
epsilon = [0.2, 0.1, 0.05, 0.025]
alpha = 0.5
{params}

[grid]
n = 512

[initial]
profile = "bump"
amplitude = 0.5

[run]
t_end = 1.0
"#
    );
    Config::from_toml_str(&text).unwrap()
}

const PRESSURELESS: &str = "c_k = -1.0";
const ATTRACTIVE: &str = "c_p = 1.0\nc_k = 0.1\ngamma = 2.0";
const REPULSIVE: &str = "c_p = 1.0\nc_k = -0.1\ngamma = 2.0";

fn conservation() -> Outcome {
    let start = Instant::now();
    let base = Config::from_toml_str(CONSERVATION).unwrap();
    let params = base.params_for(0.1).unwrap();
    let init = base.initial_state(&params).unwrap();
    let m0 = init.m.integral()[0];
    let mass0 = init.mass();

    // Adaptive reference run: mass and energy.
    let traj = run_er(&init, &params, &base.step_policy().unwrap(), &base.schedule().unwrap(), &mut []).unwrap();
    let mass_drift = traj.snapshots.iter().map(|s| (s.mass() - mass0).abs()).fold(0.0, f64::max);
    let energy_bad = traj
        .steps
        .iter()
        .filter(|s| s.energy_after - s.energy_before > 10.0 * s.truncation)
        .count();
    let elapsed = start.elapsed();

    // Momentum law at dt_ref and dt_ref/2 (fixed steps below the CFL bound).
    let momentum_err = |dt: f64| {
        let mut cfg = base.clone();
        cfg.run.dt_policy = relax_core::config::DtPolicy::Max(dt);
        let t = run_er(&init, &params, &cfg.step_policy().unwrap(), &cfg.schedule().unwrap(), &mut []).unwrap();
        t.snapshots
            .iter()
            .map(|s| {
                let exact = m0 * (-s.time / params.epsilon()).exp();
                (s.m.integral()[0] - exact).abs() / m0.abs()
            })
            .fold(0.0, f64::max)
    };
    let dt_ref = 0.004;
    let (e1, e2) = (momentum_err(dt_ref), momentum_err(dt_ref / 2.0));
    let floor = 1e-12;
    let order = if e1 > floor && e2 > floor { Some((e1 / e2).log2()) } else { None };
    let momentum_ok = e1 <= 1e-5 && order.is_none_or(|o| o >= 2.0);
    let order_text = order.map_or("n/a (round-off floor)".to_string(), |o| format!("{o:.2}"));
    outcome(
        mass_drift <= 1e-10 && momentum_ok && energy_bad == 0 && limit_ok(elapsed, 30.0),
        format!(
            "mass drift {mass_drift:.2e}; momentum rel err {e1:.2e} / {e2:.2e}, order {order_text}; \
             energy violations {energy_bad}/{}; {:.1}s",
            traj.steps.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn describe(out: &SweepOutput) -> String {
    let r = &out.result;
    let errs: Vec<String> = r
        .per_epsilon
        .iter()
        .map(|e| format!("{}:{:.3e}{}", e.epsilon, e.primary_error.unwrap_or(f64::NAN), if e.resolved { "" } else { "*" }))
        .collect();
    let fit = r
        .fit
        .as_ref()
        .map_or(format!("no fit ({})", r.fit_note.clone().unwrap_or_default()), |f| {
            format!("slope {:.3} residual {:.3}", f.slope, f.residual)
        });
    format!("errors [{}]; {fit}; trunc {:.1e}", errs.join(" "), r.truncation_estimate)
}

fn slope(out: &SweepOutput) -> f64 {
    out.result.fit.as_ref().map_or(f64::NAN, |f| f.slope)
}

fn rate_pressureless(store: &mut Option<SweepOutput>) -> Outcome {
    let start = Instant::now();
    let out = run_sweep(&sweep_config(PRESSURELESS), 0).unwrap();
    let elapsed = start.elapsed();
    let fit_ok = out.result.fit.as_ref().is_some_and(|f| f.slope >= 0.8 && f.residual <= 0.15);
    let dbl = out.result.secondary_fit.as_ref().map_or(f64::NAN, |f| f.slope);
    let detail = format!("{}; d_BL slope {dbl:.3}; {:.0}s", describe(&out), elapsed.as_secs_f64());
    let pass = fit_ok && dbl >= 0.8 && limit_ok(elapsed, 900.0);
    *store = Some(out);
    outcome(pass, detail)
}

fn rate_pressure(params: &str, store: &mut Option<SweepOutput>, need_health: bool) -> Outcome {
    let start = Instant::now();
    let out = run_sweep(&sweep_config(params), 0).unwrap();
    let elapsed = start.elapsed();
    let s = slope(&out);
    let health = out.result.health_green;
    let detail = format!("{}; health {}; {:.0}s", describe(&out), if health { "green" } else { "red" }, elapsed.as_secs_f64());
    let pass = s >= 0.8 && (!need_health || health) && limit_ok(elapsed, 900.0);
    *store = Some(out);
    outcome(pass, detail)
}

fn modulated_identities(sweeps: &[Option<SweepOutput>]) -> Outcome {
    let start = Instant::now();
    let mut cfg = sweep_config(ATTRACTIVE);
    cfg.grid.n = 128;
    cfg.run.t_end = 0.4;
    let st = modulated_internal_identity_study(&cfg, 0.1, &[0.02, 0.01, 0.005]).unwrap();
    let ratios: Vec<f64> = sweeps.iter().flatten().map(|s| s.result.est_mod_ratio).collect();
    let ratio_ok = !ratios.is_empty() && ratios.iter().all(|r| *r < 5.0);
    let orders: Vec<String> = st.orders.iter().map(|o| format!("{o:.3}")).collect();
    let ratio_text: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    outcome(
        st.pass && ratio_ok,
        format!(
            "identity orders [{}]; est_mod max/min constant [{}]; {:.1}s",
            orders.join(", "),
            ratio_text.join(", "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn lemma_suites() -> Outcome {
    let start = Instant::now();
    let lb = run_study(Study::LowerBounds, 0).unwrap();
    let ms = run_study(Study::MetricSanity, 0).unwrap();
    let elapsed = start.elapsed();
    outcome(
        lb.pass && ms.pass && limit_ok(elapsed, 120.0),
        format!(
            "lower bounds {} ({}); metric sanity {} ({}); {:.1}s",
            lb.pass,
            lb.details,
            ms.pass,
            ms.details,
            elapsed.as_secs_f64()
        ),
    )
}

fn extension() -> Outcome {
    let start = Instant::now();
    let r = run_study(Study::Extension, 0).unwrap();
    let elapsed = start.elapsed();
    outcome(
        r.pass && limit_ok(elapsed, 60.0),
        format!("worst energy ratio {:.5}; {:.1}s", r.energy_ratio.unwrap(), elapsed.as_secs_f64()),
    )
}

fn commutator() -> Outcome {
    let start = Instant::now();
    let r = run_study(Study::Commutator, 0).unwrap();
    let elapsed = start.elapsed();
    outcome(
        r.pass && limit_ok(elapsed, 60.0),
        format!(
            "drift {:.3}, identity error {:.1e}, max ratio {:.3}; {:.1}s",
            r.details["drift"].as_f64().unwrap(),
            r.details["identity_error"].as_f64().unwrap(),
            r.max_ratio.unwrap(),
            elapsed.as_secs_f64()
        ),
    )
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let mut mismatched = Vec::new();
    for st in Study::ALL {
        let a = serde_json::to_string(&run_study(st, 3).unwrap()).unwrap();
        let b = serde_json::to_string(&run_study(st, 3).unwrap()).unwrap();
        if a != b {
            mismatched.push(st.name().to_string());
        }
    }
    let mut small = sweep_config(ATTRACTIVE);
    small.grid.n = 64;
    small.run.bounded_lipschitz = false;
    let bytes = |cfg: &Config| {
        let out = run_sweep(cfg, 3).unwrap();
        let mut buf = serde_json::to_vec(&out.result).unwrap();
        for rows in &out.rows {
            relax_core::report::write_csv(&mut buf, 1, rows).unwrap();
        }
        buf
    };
    if bytes(&small) != bytes(&small) {
        mismatched.push("sweep".into());
    }
    outcome(
        mismatched.is_empty(),
        format!("mismatches {:?}; {:.1}s", mismatched, start.elapsed().as_secs_f64()),
    )
}

#[test]
#[ignore = "reference-scale runs; see module docs"]
fn acceptance_suite() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |k: u32| only.as_ref().is_none_or(|v| v.contains(&k));

    let mut sweeps: [Option<SweepOutput>; 3] = [None, None, None];
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |k: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        if wanted(k) {
            let o = f();
            println!("[{}] {k}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            results.push((k, name, o));
        }
    };
    record(1, "conservation and decay laws", &mut conservation);
    let [s2, s3, s4] = &mut sweeps;
    record(2, "pressureless rate", &mut || rate_pressureless(s2));
    record(3, "pressure-attractive rate", &mut || rate_pressure(ATTRACTIVE, s3, true));
    record(4, "pressure-repulsive rate", &mut || rate_pressure(REPULSIVE, s4, false));
    record(5, "modulated-energy identities", &mut || modulated_identities(&sweeps));
    record(6, "lemma suites", &mut lemma_suites);
    record(7, "extension identity", &mut extension);
    record(8, "commutator study", &mut commutator);
    record(9, "determinism", &mut determinism);

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
