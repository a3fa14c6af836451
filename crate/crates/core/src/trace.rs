//! Plot-ready CSV traces. Every file starts with a `# se5nav <name> schema vN`
//! comment line followed by a column header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::Result;
use crate::observer::{min_eigenvalue, ErrorReport, ObserverState};
use crate::truth::TruthState;

pub const SCHEMA_VERSION: u32 = 1;

pub const TRUTH_COLUMNS: &str = "t,px,py,pz,vx,vy,vz,r00,r01,r02,r10,r11,r12,r20,r21,r22";
pub const ESTIMATE_COLUMNS: &str =
    "t,px,py,pz,vx,vy,vz,r00,r01,r02,r10,r11,r12,r20,r21,r22,e1x,e1y,e1z,e2x,e2y,e2z,e3x,e3y,e3z,p_trace,p_min_eig";
pub const ERROR_COLUMNS: &str = "t,attitude_rad,position_m,velocity_mps,e1_err,e2_err,e3_err,xb_norm";
pub const MEASUREMENT_COLUMNS: &str = "t,channel,kind,yx,yy,yz";

fn open(dir: &Path, name: &str, columns: &str) -> Result<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(dir.join(format!("{name}.csv")))?);
    writeln!(w, "# se5nav {name} schema v{SCHEMA_VERSION}")?;
    writeln!(w, "{columns}")?;
    Ok(w)
}

fn push_all(line: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        line.push(',');
        line.push_str(&v.to_string());
    }
}

fn rows_of(m: &nalgebra::Matrix3<f64>) -> [f64; 9] {
    [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]]
}

pub struct TraceWriter {
    truth: BufWriter<File>,
    estimate: BufWriter<File>,
    errors: BufWriter<File>,
    measurements: BufWriter<File>,
}

impl TraceWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(TraceWriter {
            truth: open(dir, "truth", TRUTH_COLUMNS)?,
            estimate: open(dir, "estimate", ESTIMATE_COLUMNS)?,
            errors: open(dir, "errors", ERROR_COLUMNS)?,
            measurements: open(dir, "measurements", MEASUREMENT_COLUMNS)?,
        })
    }

    pub fn record(&mut self, truth: &TruthState, state: &ObserverState, errors: &ErrorReport) -> Result<()> {
        let t = truth.t.to_string();
        let mut line = t.clone();
        push_all(&mut line, truth.p.iter().chain(truth.v.iter()).copied());
        push_all(&mut line, rows_of(truth.rotation.matrix()));
        writeln!(self.truth, "{line}")?;

        let mut line = t.clone();
        let z = state.xhat.translation();
        push_all(&mut line, z.iter().take(6).copied());
        push_all(&mut line, rows_of(state.xhat.rotation().matrix()));
        push_all(&mut line, z.iter().skip(6).copied());
        push_all(&mut line, [state.p.trace(), min_eigenvalue(&state.p)]);
        writeln!(self.estimate, "{line}")?;

        let mut line = t;
        push_all(
            &mut line,
            [
                errors.attitude_angle,
                errors.position_error,
                errors.velocity_error,
                errors.column_norms[2],
                errors.column_norms[3],
                errors.column_norms[4],
                errors.x_body.norm(),
            ],
        );
        writeln!(self.errors, "{line}")?;
        Ok(())
    }

    pub fn record_measurement(&mut self, t: f64, channel: usize, kind: &str, y: &Vector3<f64>) -> Result<()> {
        let mut line = format!("{t},{channel},{kind}");
        push_all(&mut line, y.iter().copied());
        writeln!(self.measurements, "{line}")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.truth.flush()?;
        self.estimate.flush()?;
        self.errors.flush()?;
        self.measurements.flush()?;
        Ok(())
    }
}
