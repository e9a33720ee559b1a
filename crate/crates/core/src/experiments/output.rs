//! CSV and JSON emission. Numbers carry 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model_based::IterationRecord;
use crate::system::Trajectory;

use super::runner::RunOutput;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let (n, m) = (traj.state_dim(), traj.input_dim());
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",x{i}");
    }
    for j in 1..=m {
        let _ = write!(out, ",u{j}");
    }
    out.push('\n');
    for ((t, x), u) in traj.times().iter().zip(traj.states()).zip(traj.inputs()) {
        out.push_str(&num(*t));
        for v in x.iter().chain(u.iter()) {
            out.push(',');
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    out
}

/// One row per evaluated gain `K_k`, `k` from 0; `dP` is empty on the first row.
pub fn convergence_csv(history: &[IterationRecord], final_gain: &DMatrix<f64>) -> String {
    let mut out = String::from("k,dP,dK_final\n");
    for rec in history {
        let dp = rec.delta.map(num).unwrap_or_default();
        let dk = (&rec.gain - final_gain).norm();
        let _ = writeln!(out, "{},{},{}", rec.iteration - 1, dp, num(dk));
    }
    out
}

pub fn gains_csv(gains: &[(String, DMatrix<f64>)]) -> String {
    let cols = gains.first().map_or(0, |(_, k)| k.ncols());
    let mut out = String::from("gain,row");
    for j in 1..=cols {
        let _ = write!(out, ",k{j}");
    }
    out.push('\n');
    for (label, k) in gains {
        for i in 0..k.nrows() {
            let _ = write!(out, "{label},{}", i + 1);
            for j in 0..k.ncols() {
                out.push(',');
                out.push_str(&num(k[(i, j)]));
            }
            out.push('\n');
        }
    }
    out
}

pub fn report_json(output: &RunOutput) -> Result<String> {
    serde_json::to_string_pretty(&output.report).map_err(|e| Error::Scenario(format!("report: {e}")))
}

/// Writes `trajectory.csv` (when present), `convergence.csv`, `gains.csv` and `report.json`.
pub fn write_outputs(dir: &Path, output: &RunOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        files.push(path);
        Ok(())
    };
    if let Some(traj) = &output.trajectory {
        put("trajectory.csv", trajectory_csv(traj))?;
    }
    put("convergence.csv", convergence_csv(&output.history, &output.gain))?;
    put("gains.csv", gains_csv(&output.gains))?;
    put("report.json", report_json(output)? + "\n")?;
    Ok(files)
}
