//! Experiment configuration (TOML).
//!
//! ```toml
//! [params]
//! epsilon = [0.2, 0.1, 0.05, 0.025]   # or a single number
//! c_p = 0.0
//! c_k = -1.0
//! gamma = 2.0
//! alpha = 0.5
//!
//! [grid]
//! dim = 1
//! n = 512
//! length = 6.283185307179586
//!
//! [initial]
//! profile = "bump"          # uniform | bump | gaussian | nodal
//! amplitude = 0.5
//! mode = 1
//! well_prepared = true
//!
//! [run]
//! t_end = 1.0
//! output_every = 0.02
//! dt_policy = "adaptive"    # or a number, the largest allowed step
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, RelaxError, Result};
use crate::euler_riesz::StepPolicy;
use crate::grid::{PeriodicGrid, VectorField};
use crate::metrics::Geometry;
use crate::state::{well_prepared_velocity, FluidState, Params, Profile};
use crate::trajectory::OutputSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub epsilon: Epsilon,
    #[serde(default)]
    pub c_p: f64,
    #[serde(default)]
    pub c_k: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_gamma() -> f64 {
    2.0
}
fn default_alpha() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub n: usize,
    #[serde(default = "default_length")]
    pub length: f64,
}

fn default_dim() -> usize {
    1
}
fn default_length() -> f64 {
    std::f64::consts::TAU
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Uniform,
    Bump,
    Gaussian,
    Nodal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub profile: ProfileKind,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_mode")]
    pub mode: u32,
    /// Nodal density values for `profile = "nodal"`.
    #[serde(default)]
    pub values: Vec<f64>,
    /// Start from the limit velocity of the initial density.
    #[serde(default = "default_true")]
    pub well_prepared: bool,
    /// Uniform velocity added to the initial velocity.
    #[serde(default)]
    pub velocity_offset: Vec<f64>,
}

fn default_mode() -> u32 {
    1
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtPolicy {
    Named(String),
    Max(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Output cadence; `t_end / 50` when absent.
    pub output_every: Option<f64>,
    #[serde(default = "default_dt_policy")]
    pub dt_policy: DtPolicy,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_geometry")]
    pub geometry: Geometry,
    /// Compute the bounded-Lipschitz momentum distance (an LP per snapshot).
    #[serde(default = "default_true")]
    pub bounded_lipschitz: bool,
}

fn default_t_end() -> f64 {
    1.0
}
fn default_dt_policy() -> DtPolicy {
    DtPolicy::Named("adaptive".into())
}
fn default_cfl() -> f64 {
    0.4
}
fn default_geometry() -> Geometry {
    Geometry::Torus
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            output_every: None,
            dt_policy: default_dt_policy(),
            cfl: default_cfl(),
            geometry: default_geometry(),
            bounded_lipschitz: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub params: ParamsSection,
    pub grid: GridSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Map a range error from a constructor onto the config key it came from.
fn keyed(section: &str, e: RelaxError) -> RelaxError {
    match e {
        RelaxError::Range { what, .. } => {
            let key = match what {
                "d" => "grid.dim".to_string(),
                "n" | "length" => format!("grid.{what}"),
                "amplitude" => "initial.amplitude".to_string(),
                w => format!("{section}.{w}"),
            };
            config_err(key, e.to_string())
        }
        RelaxError::IllPosed(m) => config_err("params.c_k", m),
        RelaxError::Grid(m) => config_err("grid.n", m),
        other => other,
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let msg = e.inner().message().to_string();
            let named = msg.split('`').nth(1);
            let key = match (key.as_str(), named) {
                ("." | "", Some(f)) => f.to_string(),
                ("." | "", None) => "<root>".to_string(),
                (k, Some(f)) if msg.starts_with("missing field") => format!("{k}.{f}"),
                _ => key,
            };
            config_err(key, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        let eps = self.epsilons();
        if eps.is_empty() {
            return Err(config_err("params.epsilon", "empty epsilon list"));
        }
        for e in &eps {
            self.params_for(*e)?;
        }
        let grid = self.grid()?;
        self.profile()?.density(&grid).map_err(|e| keyed("initial", e))?;
        let off = &self.initial.velocity_offset;
        if !(off.is_empty() || off.len() == self.grid.dim) || off.iter().any(|v| !v.is_finite()) {
            return Err(config_err(
                "initial.velocity_offset",
                format!("expected {} finite components", self.grid.dim),
            ));
        }
        let run = &self.run;
        if !(run.t_end.is_finite() && run.t_end >= 0.0) {
            return Err(config_err("run.t_end", "must be finite and non-negative"));
        }
        if let Some(c) = run.output_every {
            if !(c.is_finite() && c > 0.0) {
                return Err(config_err("run.output_every", "must be positive"));
            }
        }
        self.step_policy()?;
        Ok(())
    }

    pub fn epsilons(&self) -> Vec<f64> {
        match &self.params.epsilon {
            Epsilon::One(e) => vec![*e],
            Epsilon::Many(v) => v.clone(),
        }
    }

    /// The single ε of a simulation config.
    pub fn single_epsilon(&self) -> Result<f64> {
        match &self.params.epsilon {
            Epsilon::One(e) => Ok(*e),
            Epsilon::Many(v) if v.len() == 1 => Ok(v[0]),
            Epsilon::Many(_) => Err(config_err("params.epsilon", "a simulation needs a single value")),
        }
    }

    pub fn params_for(&self, epsilon: f64) -> Result<Params> {
        let p = &self.params;
        Params::new(epsilon, p.c_p, p.c_k, p.gamma, p.alpha, self.grid.dim).map_err(|e| keyed("params", e))
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.grid.dim, self.grid.n, self.grid.length).map_err(|e| keyed("grid", e))
    }

    pub fn profile(&self) -> Result<Profile> {
        let i = &self.initial;
        Ok(match i.profile {
            ProfileKind::Uniform => Profile::Uniform,
            ProfileKind::Bump => Profile::Bump {
                amplitude: i.amplitude,
                mode: i.mode,
            },
            ProfileKind::Gaussian => Profile::Gaussian {
                amplitude: i.amplitude,
                mode: i.mode,
            },
            ProfileKind::Nodal => {
                if i.values.is_empty() {
                    return Err(config_err("initial.values", "nodal profile needs values"));
                }
                Profile::Nodal(i.values.clone())
            }
        })
    }

    /// Initial density and momentum for the given parameters.
    pub fn initial_state(&self, params: &Params) -> Result<FluidState> {
        let grid = self.grid()?;
        let rho = self.profile()?.density(&grid).map_err(|e| keyed("initial", e))?;
        let mut u = if self.initial.well_prepared {
            well_prepared_velocity(&rho, params)?
        } else {
            VectorField::zeros(&grid)
        };
        if !self.initial.velocity_offset.is_empty() {
            let mut c = [0.0; 2];
            c[..grid.dim()].copy_from_slice(&self.initial.velocity_offset);
            u = u.zip_comps(&VectorField::constant(&grid, c), |a, b| a + b);
        }
        FluidState::from_velocity(rho, &u, 0.0)
    }

    pub fn schedule(&self) -> Result<OutputSchedule> {
        let every = self.run.output_every.unwrap_or(self.run.t_end / 50.0);
        if self.run.t_end == 0.0 {
            return OutputSchedule::uniform(0.0, 1);
        }
        OutputSchedule::every(self.run.t_end, every).map_err(|e| keyed("run", e))
    }

    pub fn step_policy(&self) -> Result<StepPolicy> {
        let d = StepPolicy::default();
        let dt_max = match &self.run.dt_policy {
            DtPolicy::Named(s) if s == "adaptive" => d.dt_max,
            DtPolicy::Named(s) => {
                return Err(config_err("run.dt_policy", format!("unknown policy `{s}`")));
            }
            DtPolicy::Max(v) => *v,
        };
        StepPolicy::new(self.run.cfl, d.epsilon_fraction, d.dt_min.min(dt_max), dt_max).map_err(|e| match e {
            RelaxError::Range { what: "dt_max", .. } => config_err("run.dt_policy", e.to_string()),
            RelaxError::Range { what: "cfl", .. } => config_err("run.cfl", e.to_string()),
            other => other,
        })
    }

    /// SHA-256 of the canonical JSON form of the parsed config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[params]
epsilon = 0.1
c_k = -1.0

[grid]
n = 64

[initial]
profile = "bump"
amplitude = 0.5
"#;

    fn key_of(text: &str) -> String {
        match Config::from_toml_str(text) {
            Err(RelaxError::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_defaults() {
        let c = Config::from_toml_str(BASE).unwrap();
        assert_eq!(c.epsilons(), vec![0.1]);
        assert_eq!(c.grid.dim, 1);
        assert_eq!(c.schedule().unwrap().times().len(), 51);
        assert_eq!(c.step_policy().unwrap(), StepPolicy::default());
        let p = c.params_for(0.1).unwrap();
        let s = c.initial_state(&p).unwrap();
        assert!((s.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_lists_and_dt_numbers() {
        let text = BASE.replace("epsilon = 0.1", "epsilon = [0.2, 0.1]")
            + "\n[run]\ndt_policy = 0.01\noutput_every = 0.1\n";
        let c = Config::from_toml_str(&text).unwrap();
        assert_eq!(c.epsilons(), vec![0.2, 0.1]);
        assert!(c.single_epsilon().is_err());
        assert_eq!(c.step_policy().unwrap().dt_max, 0.01);
        assert_eq!(c.schedule().unwrap().times().len(), 11);
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(&BASE.replace("c_k = -1.0", "c_k = -1.0\nfoo = 1")), "params.foo");
        assert_eq!(key_of(&BASE.replace("c_k = -1.0", "c_k = \"x\"")), "params.c_k");
        assert_eq!(key_of(&BASE.replace("epsilon = 0.1", "epsilon = -0.1")), "params.epsilon");
        assert_eq!(key_of(&BASE.replace("n = 64", "n = 63")), "grid.n");
        assert_eq!(key_of(&BASE.replace("amplitude = 0.5", "amplitude = 1.5")), "initial.amplitude");
        assert_eq!(key_of(&(BASE.to_string() + "\n[run]\ndt_policy = \"fast\"\n")), "run.dt_policy");
        assert_eq!(key_of(&BASE.replace("c_k = -1.0", "c_k = 1.0")), "params.c_k");
        assert_eq!(key_of(&BASE.replace("[grid]\nn = 64", "[grid]")), "grid.n");
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = Config::from_toml_str(BASE).unwrap();
        let b = Config::from_toml_str(&BASE.replace("c_k = -1.0", "c_k   =   -1.00")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = Config::from_toml_str(&BASE.replace("n = 64", "n = 128")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn velocity_offset_sets_momentum() {
        let text = BASE.to_string().replace("amplitude = 0.5", "amplitude = 0.5\nvelocity_offset = [0.3]");
        let c = Config::from_toml_str(&text).unwrap();
        let s = c.initial_state(&c.params_for(0.1).unwrap()).unwrap();
        assert!((s.total_momentum()[0] - 0.3).abs() < 1e-12);
    }
}
