//! Parameter sweeps with independent replications.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use crate::engine::{run, RunOptions, RunResult};
use crate::error::{Error, Result};
use crate::mac::LatencyRecord;
use crate::output::{ccdf_csv, write_file};
use crate::rng::replication_seed;
use crate::scenario::Scenario;
use crate::stats::{ccdf, quantile_sorted};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    /// `key=v1,v2,...`
    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::Parse { line: 0, message: format!("axis `{s}`: {m}") };
        let (key, vals) = s.split_once('=').ok_or_else(|| bad("expected key=v1,v2,..."))?;
        let values: Vec<String> = vals
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(String::from)
            .collect();
        if key.trim().is_empty() {
            return Err(bad("empty key"));
        }
        if values.is_empty() {
            return Err(Error::validation("axis", "no values given"));
        }
        Ok(SweepAxis { key: key.trim().to_string(), values })
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: String,
    pub scenario: Scenario,
    /// Latency records of all successful replications, in replication order.
    pub records: Vec<LatencyRecord>,
    pub dropped: u64,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub replications: usize,
    pub points: Vec<SweepPoint>,
}

/// Runs every axis value `reps` times on the rayon pool. Replication seeds
/// derive from the base seed, point index and replication index. Results
/// are merged in point and replication order, so the outcome does not
/// depend on the thread count.
pub fn sweep(base: &Scenario, axis: &SweepAxis, reps: usize) -> Result<SweepResult> {
    if axis.values.is_empty() {
        return Err(Error::validation("axis", "no values given"));
    }
    if reps == 0 {
        return Err(Error::validation("reps", "must be at least 1"));
    }
    let scenarios: Vec<Result<Scenario>> = axis
        .values
        .iter()
        .map(|v| {
            let mut s = base.clone();
            s.set(&axis.key, v)?;
            s.validate()?;
            Ok(s)
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..axis.values.len())
        .flat_map(|p| (0..reps).map(move |r| (p, r)))
        .filter(|&(p, _)| scenarios[p].is_ok())
        .collect();
    let runs: Vec<((usize, usize), Result<RunResult>)> = jobs
        .par_iter()
        .map(|&(p, r)| {
            let mut s = scenarios[p].as_ref().expect("filtered").clone();
            s.seed = replication_seed(base.seed, p as u64, r as u64);
            ((p, r), run(&s, RunOptions::default()))
        })
        .collect();

    let mut points: Vec<SweepPoint> = axis
        .values
        .iter()
        .zip(&scenarios)
        .map(|(v, s)| SweepPoint {
            value: v.clone(),
            scenario: s.as_ref().map_or_else(|_| base.clone(), Clone::clone),
            records: Vec::new(),
            dropped: 0,
            errors: s.as_ref().err().map(|e| vec![e.to_string()]).unwrap_or_default(),
        })
        .collect();
    for ((p, r), res) in runs {
        match res {
            Ok(rr) => {
                points[p].records.extend(rr.records);
                points[p].dropped += rr.dropped;
            }
            Err(e) => points[p].errors.push(format!("replication {r}: {e}")),
        }
    }
    Ok(SweepResult {
        axis: axis.clone(),
        replications: reps,
        points,
    })
}

/// Writes `sweep.json` plus `point_<i>_ccdf.csv` per point.
pub fn write_sweep(dir: &Path, res: &SweepResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    let mut points = Vec::new();
    for (i, p) in res.points.iter().enumerate() {
        let lat: Vec<f64> = p.records.iter().map(|r| r.total_ms).collect();
        let c = ccdf(&lat);
        write_file(&dir.join(format!("point_{i}_ccdf.csv")), &ccdf_csv(&c))?;
        let quantiles: Vec<_> = p
            .scenario
            .quantile_targets
            .iter()
            .filter_map(|&q| quantile_sorted(c.sorted(), q).ok())
            .collect();
        points.push(json!({
            "index": i,
            "value": p.value,
            "samples": lat.len(),
            "dropped": p.dropped,
            "quantiles": quantiles,
            "errors": p.errors,
        }));
    }
    let doc = json!({
        "axis": res.axis.key,
        "replications": res.replications,
        "points": points,
    });
    write_file(&dir.join("sweep.json"), &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))
}
