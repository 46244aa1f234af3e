//! Output schedules, stored trajectories and their binary serialization.
//!
//! Binary layout (little endian):
//!
//! ```text
//! b"RLXT" | u32 version | u32 d | u32 n | f64 length | u32 n_fields
//! n_fields × (u32 byte_len, utf-8 name) | u32 n_snapshots
//! n_snapshots × (f64 time, n_fields × n^d f64 nodal values)
//! ```

use std::io::{Read, Write};

use crate::error::{RelaxError, Result};
use crate::grid::{Field, PeriodicGrid, VectorField};
use crate::state::{FluidState, LimitState};

const MAGIC: &[u8; 4] = b"RLXT";
const VERSION: u32 = 1;

/// Explicit output instants `0 = t_0 < t_1 < … < t_N = t_end`.
///
/// Solvers shorten the step that would cross an output instant so that
/// snapshots are taken exactly at these times.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputSchedule {
    times: Vec<f64>,
}

impl OutputSchedule {
    pub fn uniform(t_end: f64, count: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(RelaxError::Range {
                what: "t_end",
                value: t_end,
                range: "[0, ∞)".into(),
            });
        }
        if t_end == 0.0 {
            return Ok(Self { times: vec![0.0] });
        }
        let count = count.max(1);
        let times = (0..=count)
            .map(|k| if k == count { t_end } else { t_end * k as f64 / count as f64 })
            .collect();
        Ok(Self { times })
    }

    /// Outputs every `cadence` time units (rounded to an integer count).
    pub fn every(t_end: f64, cadence: f64) -> Result<Self> {
        if !(cadence.is_finite() && cadence > 0.0) {
            return Err(RelaxError::Range {
                what: "output_every",
                value: cadence,
                range: "(0, ∞)".into(),
            });
        }
        let count = (t_end / cadence).round().max(1.0) as usize;
        Self::uniform(t_end, count)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("schedule is never empty")
    }
}

/// Per-step diagnostics recorded by the Euler–Riesz integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub dt: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `|E(third-order) − E(embedded second-order)|` for this step.
    pub truncation: f64,
    /// Mean dissipation `(1/ε)∫ρ|u|²` over the step (trapezoid).
    pub dissipation: f64,
}

/// Anything stored in a trajectory.
pub trait Snapshot {
    fn time(&self) -> f64;
    fn grid(&self) -> &PeriodicGrid;
    fn field_names(&self) -> Vec<String>;
    fn fields(&self) -> Vec<&Field>;
}

impl Snapshot for FluidState {
    fn time(&self) -> f64 {
        self.time
    }
    fn grid(&self) -> &PeriodicGrid {
        self.rho.grid()
    }
    fn field_names(&self) -> Vec<String> {
        let mut names = vec!["rho".to_string()];
        names.extend(["m_x", "m_y"].iter().take(self.rho.grid().dim()).map(|s| s.to_string()));
        names
    }
    fn fields(&self) -> Vec<&Field> {
        let mut out = vec![&self.rho];
        out.extend(self.m.comps());
        out
    }
}

impl Snapshot for LimitState {
    fn time(&self) -> f64 {
        self.time
    }
    fn grid(&self) -> &PeriodicGrid {
        self.rho.grid()
    }
    fn field_names(&self) -> Vec<String> {
        vec!["rho".into()]
    }
    fn fields(&self) -> Vec<&Field> {
        vec![&self.rho]
    }
}

/// Receives every stored snapshot as it is produced.
pub trait Observer<S> {
    fn observe(&mut self, snapshot: &S);
}

impl<S, F: FnMut(&S)> Observer<S> for F {
    fn observe(&mut self, snapshot: &S) {
        self(snapshot)
    }
}

/// Stored snapshots plus per-step records.
#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub snapshots: Vec<S>,
    pub steps: Vec<StepRecord>,
}

impl<S: Snapshot> Trajectory<S> {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(Snapshot::time).collect()
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.snapshots[0].grid()
    }

    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        let first = self
            .snapshots
            .first()
            .ok_or_else(|| RelaxError::Format("empty trajectory".into()))?;
        write_header(w, first.grid(), &first.field_names(), self.snapshots.len())?;
        for s in &self.snapshots {
            w.write_all(&s.time().to_le_bytes())?;
            for f in s.fields() {
                for v in f.values() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }
}

fn write_header(w: &mut impl Write, grid: &PeriodicGrid, names: &[String], count: usize) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    w.write_all(&grid.length().to_le_bytes())?;
    w.write_all(&(names.len() as u32).to_le_bytes())?;
    for name in names {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
    }
    w.write_all(&(count as u32).to_le_bytes())?;
    Ok(())
}

/// A trajectory file read back as raw named fields.
#[derive(Clone, Debug)]
pub struct StoredTrajectory {
    pub grid: PeriodicGrid,
    pub field_names: Vec<String>,
    /// `(time, fields in header order)`.
    pub snapshots: Vec<(f64, Vec<Field>)>,
}

impl StoredTrajectory {
    pub fn read(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(RelaxError::Format("not a trajectory file".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(RelaxError::Format(format!("unsupported version {version}")));
        }
        let dim = read_u32(r)? as usize;
        let n = read_u32(r)? as usize;
        let length = read_f64(r)?;
        let grid = PeriodicGrid::new(dim, n, length)?;
        let nf = read_u32(r)? as usize;
        let mut field_names = Vec::with_capacity(nf);
        for _ in 0..nf {
            let len = read_u32(r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            field_names.push(
                String::from_utf8(buf).map_err(|_| RelaxError::Format("bad field name".into()))?,
            );
        }
        let count = read_u32(r)? as usize;
        let mut snapshots = Vec::with_capacity(count);
        for _ in 0..count {
            let t = read_f64(r)?;
            let mut fields = Vec::with_capacity(nf);
            for _ in 0..nf {
                let mut values = vec![0.0; grid.len()];
                for v in values.iter_mut() {
                    *v = read_f64(r)?;
                }
                fields.push(Field::raw(&grid, values));
            }
            snapshots.push((t, fields));
        }
        Ok(Self {
            grid,
            field_names,
            snapshots,
        })
    }

    pub fn field(&self, snapshot: usize, name: &str) -> Option<&Field> {
        let idx = self.field_names.iter().position(|n| n == name)?;
        self.snapshots.get(snapshot).map(|(_, f)| &f[idx])
    }

    /// Momentum of snapshot `k`, when the file carries one.
    pub fn momentum(&self, snapshot: usize) -> Option<VectorField> {
        let comps: Option<Vec<Field>> = ["m_x", "m_y"]
            .iter()
            .take(self.grid.dim())
            .map(|n| self.field(snapshot, n).cloned())
            .collect();
        comps.map(VectorField::raw)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
