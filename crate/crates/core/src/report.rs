//! Scalar time series in the fixed CSV layout.

use std::io::Write;

use crate::energetics::{interaction_energy, internal_energy, EnergyReport};
use crate::error::Result;
use crate::fpme::limit_velocity;
use crate::state::{LimitState, Params};

/// One CSV line. Quantities that do not apply stay `None` and are written
/// as empty fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub kinetic: Option<f64>,
    pub internal: Option<f64>,
    pub interaction: Option<f64>,
    pub free: Option<f64>,
    pub total: Option<f64>,
    pub mod_kinetic: Option<f64>,
    pub mod_internal: Option<f64>,
    pub mod_interaction: Option<f64>,
    pub neg_sobolev_sq: Option<f64>,
    pub lgamma_err_sq: Option<f64>,
    pub l1_momentum_err_sq: Option<f64>,
    pub d2_sq: Option<f64>,
    pub dbl_momentum_sq: Option<f64>,
}

impl From<&EnergyReport> for CsvRow {
    fn from(r: &EnergyReport) -> Self {
        Self {
            t: r.time,
            mass: r.mass,
            momentum: r.total_momentum.clone(),
            kinetic: Some(r.kinetic),
            internal: Some(r.internal),
            interaction: Some(r.interaction),
            free: Some(r.free),
            total: Some(r.total),
            mod_kinetic: r.mod_kinetic,
            mod_internal: r.mod_internal,
            mod_interaction: r.mod_interaction,
            neg_sobolev_sq: r.neg_sobolev_sq,
            ..Default::default()
        }
    }
}

/// Row for a limit-equation snapshot: momentum is `∫ρu` with the limit
/// velocity and the total is the free energy.
pub fn limit_row(state: &LimitState, params: &Params) -> Result<CsvRow> {
    let rho = &state.rho;
    let internal = internal_energy(rho, params.gamma());
    let interaction = interaction_energy(rho, rho, params.alpha())?;
    let free = params.c_p() * internal - 0.5 * params.c_k() * interaction;
    let u = limit_velocity(rho, params)?;
    Ok(CsvRow {
        t: state.time,
        mass: rho.integral(),
        momentum: u.scale_by(rho).integral(),
        internal: Some(internal),
        interaction: Some(interaction),
        free: Some(free),
        total: Some(free),
        ..Default::default()
    })
}

pub fn csv_header(dim: usize) -> String {
    let momentum = if dim == 2 { "momentum_x,momentum_y" } else { "momentum_x" };
    format!(
        "t,mass,{momentum},kinetic,internal,interaction,free,total,mod_kinetic,mod_internal,\
         mod_interaction,neg_sobolev_sq,lgamma_err_sq,l1_momentum_err_sq,d2_sq,dbl_momentum_sq"
    )
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv(w: &mut impl Write, dim: usize, rows: &[CsvRow]) -> Result<()> {
    writeln!(w, "{}", csv_header(dim))?;
    for r in rows {
        let mut fields = vec![r.t.to_string(), r.mass.to_string()];
        fields.extend((0..dim).map(|k| r.momentum.get(k).map(|v| v.to_string()).unwrap_or_default()));
        fields.extend(
            [
                r.kinetic,
                r.internal,
                r.interaction,
                r.free,
                r.total,
                r.mod_kinetic,
                r.mod_internal,
                r.mod_interaction,
                r.neg_sobolev_sq,
                r.lgamma_err_sq,
                r.l1_momentum_err_sq,
                r.d2_sq,
                r.dbl_momentum_sq,
            ]
            .into_iter()
            .map(opt),
        );
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}
