//! On-disk formats: trajectories and sample batches as CSV with JSON metadata,
//! or as single JSON documents. All writes go through a temporary file in the
//! target directory followed by a rename.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coulomb::Configuration;
use crate::error::{Error, Result};
use crate::gibbs::{ChainMeta, SampleBatch};
use crate::sde::{SimulationMeta, TrajectoryRecord};

pub const TRAJECTORY_SCHEMA: &str = "curvegas.trajectory/1";
pub const SAMPLES_SCHEMA: &str = "curvegas.samples/1";

/// Writes `bytes` to `path` via a temporary sibling and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn csv_bytes(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn particle_header(first: &str, n: usize) -> Vec<String> {
    std::iter::once(first.to_string()).chain((1..=n).map(|i| format!("x{i}"))).collect()
}

/// `t,x1,…,xN`, one row per recorded frame. Floats use the shortest
/// representation that parses back to the same value.
pub fn trajectory_csv(record: &TrajectoryRecord) -> Result<Vec<u8>> {
    let n = record.states.first().map_or(0, Configuration::len);
    let rows = record.times.iter().zip(&record.states).map(|(t, s)| {
        std::iter::once(t.to_string()).chain(s.positions().iter().map(f64::to_string)).collect()
    });
    csv_bytes(particle_header("t", n), rows)
}

/// Metadata sidecar of a CSV trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetaFile {
    pub schema: String,
    pub version: String,
    pub frames: usize,
    pub particles: usize,
    pub meta: SimulationMeta,
}

pub fn trajectory_meta(record: &TrajectoryRecord) -> TrajectoryMetaFile {
    TrajectoryMetaFile {
        schema: TRAJECTORY_SCHEMA.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        frames: record.times.len(),
        particles: record.states.first().map_or(0, Configuration::len),
        meta: record.meta.clone(),
    }
}

/// Self-contained JSON form of a trajectory, curve points as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryJson {
    pub schema: String,
    pub version: String,
    pub meta: SimulationMeta,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub curve_points: Option<Vec<Vec<[f64; 2]>>>,
}

pub fn trajectory_json(record: &TrajectoryRecord) -> TrajectoryJson {
    let pairs = |v: &Vec<Complex64>| v.iter().map(|z| [z.re, z.im]).collect();
    TrajectoryJson {
        schema: TRAJECTORY_SCHEMA.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        meta: record.meta.clone(),
        times: record.times.clone(),
        states: record.states.iter().map(|s| s.positions().to_vec()).collect(),
        curve_points: record.curve_points.as_ref().map(|frames| frames.iter().map(pairs).collect()),
    }
}

/// A numeric table read back from a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn particles(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }
}

/// Parses the `t,x1,…,xN` format written by [`trajectory_csv`]. The header must
/// match exactly; every value must be a finite float.
pub fn read_trajectory_csv(bytes: &[u8]) -> Result<TrajectoryTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut records = reader.records();
    let parse_err = |line: u64, message: String| Error::Parse { position: line as usize, message };
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(parse_err(1, e.to_string())),
        None => return Err(parse_err(1, "missing header".into())),
    };
    let n = header.len().saturating_sub(1);
    let expected = particle_header("t", n);
    if n == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(parse_err(1, format!("header must be {}", expected.join(","))));
    }
    let mut table = TrajectoryTable { times: Vec::new(), states: Vec::new() };
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != n + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", n + 1, rec.len())));
        }
        let mut values = rec.iter().map(|f| match f.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(parse_err(line, format!("invalid number '{f}'"))),
        });
        let t = values.next().unwrap_or(Ok(0.0))?;
        if table.times.last().is_some_and(|&prev| t < prev) {
            return Err(parse_err(line, "times must be non-decreasing".into()));
        }
        table.times.push(t);
        table.states.push(values.collect::<Result<_>>()?);
    }
    Ok(table)
}

/// `sample,x1,…,xN`, one row per retained configuration.
pub fn samples_csv(batch: &SampleBatch) -> Result<Vec<u8>> {
    let n = batch.samples.first().map_or(0, Configuration::len);
    let rows = batch.samples.iter().enumerate().map(|(k, s)| {
        std::iter::once(k.to_string()).chain(s.positions().iter().map(f64::to_string)).collect()
    });
    csv_bytes(particle_header("sample", n), rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesMetaFile {
    pub schema: String,
    pub version: String,
    pub beta: f64,
    pub particles: usize,
    pub count: usize,
    pub period: f64,
    pub acceptance_rate: f64,
    pub chains: Vec<ChainMeta>,
}

pub fn samples_meta(batch: &SampleBatch) -> SamplesMetaFile {
    SamplesMetaFile {
        schema: SAMPLES_SCHEMA.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        beta: batch.beta,
        particles: batch.samples.first().map_or(0, Configuration::len),
        count: batch.len(),
        period: batch.samples.first().map_or(0.0, Configuration::period),
        acceptance_rate: batch.acceptance_rate(),
        chains: batch.chains.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesJson {
    #[serde(flatten)]
    pub meta: SamplesMetaFile,
    pub samples: Vec<Vec<f64>>,
}

pub fn samples_json(batch: &SampleBatch) -> SamplesJson {
    SamplesJson {
        meta: samples_meta(batch),
        samples: batch.samples.iter().map(|s| s.positions().to_vec()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coulomb::InverseTemperature;
    use crate::curve::unit_circle;
    use crate::sde::{simulate, Mode, SimulationConfig};
    use std::f64::consts::TAU;

    fn record() -> TrajectoryRecord {
        let c = unit_circle();
        let mut cfg = SimulationConfig::new(
            &c,
            InverseTemperature::from_beta(2.0).unwrap(),
            Mode::BetaForm,
            1e-3,
            0.05,
            9,
            Configuration::equidistant(3, TAU, 0.1).unwrap(),
        );
        cfg.n_frames = 10;
        cfg.record_curve_points = true;
        simulate(&cfg).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let r = record();
        let bytes = trajectory_csv(&r).unwrap();
        assert!(bytes.starts_with(b"t,x1,x2,x3\n"));
        let table = read_trajectory_csv(&bytes).unwrap();
        assert_eq!(table.times, r.times);
        for (a, b) in table.states.iter().zip(&r.states) {
            assert_eq!(a.as_slice(), b.positions());
        }
    }

    #[test]
    fn csv_reader_rejects_bad_input() {
        for bad in [
            &b""[..],
            b"t,x2\n0,1\n",
            b"t,x1\n0,1,2\n",
            b"t,x1\n0,abc\n",
            b"t,x1\n1,0.5\n0,0.5\n",
            b"t,x1\n0,NaN\n",
        ] {
            assert!(matches!(read_trajectory_csv(bad), Err(Error::Parse { .. })), "{:?}", String::from_utf8_lossy(bad));
        }
    }

    #[test]
    fn json_forms_serialize() {
        let r = record();
        let j = trajectory_json(&r);
        let text = to_json(&j).unwrap();
        let back: TrajectoryJson = serde_json::from_slice(&text).unwrap();
        assert_eq!(back, j);
        assert_eq!(back.curve_points.unwrap().len(), r.times.len());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
