//! Trajectory CSV: fixed column order, 17 significant digits, locale-free.

use crate::error::CliError;
use lpke::liegroup::PoseSE3;
use lpke::sim::Sample;
use nalgebra::{DVector, Matrix3, Vector3, Vector6};
use std::path::Path;

/// Column names for an `n`-joint chain.
pub fn header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "theta".to_string()];
    h.extend((1..=n).map(|i| format!("q{i}")));
    h.extend((1..=n).map(|i| format!("qd{i}")));
    h.extend((1..=6).map(|i| format!("P0_{i}")));
    h.extend((1..=6).map(|i| format!("V0_{i}")));
    for r in 1..=3 {
        h.extend((1..=3).map(|c| format!("R{r}{c}")));
    }
    h.extend((1..=3).map(|i| format!("p{i}")));
    h.push("KE".to_string());
    h.extend((1..=6).map(|i| format!("momentum_invariant_{i}")));
    h.push("cond_M0".to_string());
    h
}

/// Joint count implied by a header, if it matches the fixed layout.
pub fn joints_of(header: &[String]) -> Option<usize> {
    let fixed = 2 + 6 + 6 + 9 + 3 + 1 + 6 + 1;
    let extra = header.len().checked_sub(fixed)?;
    if extra % 2 != 0 {
        return None;
    }
    let n = extra / 2;
    (self::header(n) == header).then_some(n)
}

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn row(s: &Sample<f64>) -> Vec<f64> {
    let mut r = vec![s.t, s.theta];
    r.extend(s.q.iter());
    r.extend(s.qdot.iter());
    r.extend(s.p0.iter());
    r.extend(s.v0.iter());
    for i in 0..3 {
        r.extend((0..3).map(|j| s.g_base.rotation[(i, j)]));
    }
    r.extend(s.g_base.translation.iter());
    r.push(s.kinetic_energy);
    r.extend(s.momentum.iter());
    r.push(s.cond_m0);
    r
}

pub fn sample_from_row(r: &[f64], n: usize) -> Sample<f64> {
    let mut k = 0;
    let mut take = |m: usize| {
        let s = &r[k..k + m];
        k += m;
        s
    };
    let t = take(1)[0];
    let theta = take(1)[0];
    let q = DVector::from_column_slice(take(n));
    let qdot = DVector::from_column_slice(take(n));
    let p0 = Vector6::from_column_slice(take(6));
    let v0 = Vector6::from_column_slice(take(6));
    let rotation = Matrix3::from_row_slice(take(9));
    let translation = Vector3::from_column_slice(take(3));
    let kinetic_energy = take(1)[0];
    let momentum = Vector6::from_column_slice(take(6));
    let cond_m0 = take(1)[0];
    Sample { t, theta, q, qdot, p0, v0, g_base: PoseSE3::new(rotation, translation), kinetic_energy, momentum, cond_m0 }
}

pub fn to_string(samples: &[Sample<f64>], n: usize) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Other(format!("csv: {e}"));
    w.write_record(header(n)).map_err(err)?;
    for s in samples {
        w.write_record(row(s).into_iter().map(fmt_f64)).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Other(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Other(e.to_string()))
}

pub fn write(path: &Path, samples: &[Sample<f64>], n: usize) -> Result<(), CliError> {
    crate::write_atomic(path, to_string(samples, n)?.as_bytes())
}

/// Parsed trajectory table.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub joints: usize,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn samples(&self) -> Vec<Sample<f64>> {
        self.rows.iter().map(|r| sample_from_row(r, self.joints)).collect()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn parse(text: &str, origin: &str) -> Result<Trajectory, CliError> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let bad = |msg: String| CliError::Other(format!("{origin}: {msg}"));
    let header: Vec<String> = rd.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    let joints = joints_of(&header).ok_or_else(|| bad("unrecognized trajectory header".into()))?;
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let r = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        if r.len() != header.len() {
            return Err(bad(format!("row {} has {} fields", i + 1, r.len())));
        }
        rows.push(r);
    }
    Ok(Trajectory { joints, header, rows })
}

pub fn read(path: &Path) -> Result<Trajectory, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, &path.display().to_string())
}
