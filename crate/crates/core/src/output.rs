//! Result documents of a run or a sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::engine::RunResult;
use crate::error::{Error, Result};
use crate::frame::Direction;
use crate::stats::{ccdf, quantile_sorted, Ccdf};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

pub fn latency_csv(r: &RunResult) -> String {
    let mut out = String::from("packet_id,direction,cell,arrival_ms,total_ms,queuing_ms,transmission_ms,harq_ms,processing_ms\n");
    for l in &r.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            l.packet_id,
            l.direction,
            l.cell,
            l.arrival_ms,
            l.total_ms,
            l.queuing_ms,
            l.transmission_ms,
            l.harq_ms,
            l.processing_ms
        );
    }
    out
}

pub fn ccdf_csv(c: &Ccdf) -> String {
    let mut out = String::from("latency_ms,exceedance\n");
    for (x, p) in &c.points {
        let _ = writeln!(out, "{x},{p}");
    }
    out
}

pub fn trace_csv(r: &RunResult) -> String {
    let cells = r.scenario.cell_count;
    let mut out = String::from("period,time_ms,theta");
    for c in 0..cells {
        let _ = write!(out, ",ratio_{c}");
    }
    for c in 0..cells {
        let _ = write!(out, ",rfc_{c}");
    }
    out.push('\n');
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for row in &r.trace {
        let _ = write!(out, "{},{},{}", row.period, row.time_ms, opt(row.theta));
        for v in &row.ratios {
            let _ = write!(out, ",{}", opt(*v));
        }
        for l in &row.labels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
    }
    out
}

pub fn sinr_csv(r: &RunResult) -> String {
    let mut out = String::from("time_ms,cell,ue,direction,flexible,sinr_db,mcs,attempt,success\n");
    for s in &r.sinr {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.time_ms, s.cell, s.ue, s.direction, s.flexible, s.sinr_db, s.mcs, s.attempt, s.success
        );
    }
    out
}

fn quantiles_json(sorted: &[f64], targets: &[f64], warnings: &mut Vec<String>, label: &str) -> Value {
    let list: Vec<Value> = targets
        .iter()
        .filter_map(|&q| quantile_sorted(sorted, q).ok())
        .map(|e| {
            if !e.sufficient_support {
                warnings.push(format!(
                    "{label}: tail {} has only {:.1} expected samples beyond the estimate",
                    e.tail,
                    e.samples as f64 * e.tail
                ));
            }
            serde_json::to_value(e).expect("plain struct")
        })
        .collect();
    Value::Array(list)
}

/// Structured summary of a run.
pub fn summary(r: &RunResult) -> Value {
    let mut warnings = Vec::new();
    let all = ccdf(&r.latencies());
    let dl = ccdf(&r.latencies_for(Direction::Dl));
    let ul = ccdf(&r.latencies_for(Direction::Ul));
    let targets = &r.scenario.quantile_targets;
    let mean = |c: &Ccdf| {
        if c.is_empty() {
            Value::Null
        } else {
            json!(c.sorted().iter().sum::<f64>() / c.len() as f64)
        }
    };
    let quantiles = quantiles_json(all.sorted(), targets, &mut warnings, "combined");
    let q_dl = quantiles_json(dl.sorted(), targets, &mut warnings, "dl");
    let q_ul = quantiles_json(ul.sorted(), targets, &mut warnings, "ul");
    let duration_s = r.scenario.sim_duration_ms / 1000.0;
    json!({
        "policy": r.scenario.tdd_policy.as_str(),
        "seed": r.scenario.seed,
        "samples": { "combined": all.len(), "dl": dl.len(), "ul": ul.len() },
        "mean_latency_ms": { "combined": mean(&all), "dl": mean(&dl), "ul": mean(&ul) },
        "quantiles": { "combined": quantiles, "dl": q_dl, "ul": q_ul },
        "dropped": r.dropped,
        "drop_rate": r.drop_rate(),
        "offered_load_mbps": {
            "dl": r.offered_bits[0] as f64 / duration_s / 1e6,
            "ul": r.offered_bits[1] as f64 / duration_s / 1e6,
        },
        "carried_load_mbps": {
            "dl": r.carried_bits[0] as f64 / duration_s / 1e6,
            "ul": r.carried_bits[1] as f64 / duration_s / 1e6,
        },
        "conservation": {
            "generated": r.conservation.generated,
            "completed": r.conservation.completed,
            "dropped": r.conservation.dropped,
            "residual": r.conservation.residual,
            "holds": r.conservation.holds(),
        },
        "counters": r.counters,
        "rfc_usage": r.rfc_usage.iter().map(|(l, n)| json!({ "rfc": l, "cell_periods": n })).collect::<Vec<_>>(),
        "warnings": warnings,
    })
}

/// Writes `scenario.resolved`, `latency.csv`, `ccdf.csv`, `summary.json`
/// and, when recorded, `trace.csv` and `sinr.csv`.
pub fn write_run(dir: &Path, r: &RunResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join("scenario.resolved"), &r.scenario.to_document())?;
    write_file(&dir.join("latency.csv"), &latency_csv(r))?;
    write_file(&dir.join("ccdf.csv"), &ccdf_csv(&ccdf(&r.latencies())))?;
    let text = serde_json::to_string_pretty(&summary(r)).expect("json value");
    write_file(&dir.join("summary.json"), &(text + "\n"))?;
    if !r.trace.is_empty() {
        write_file(&dir.join("trace.csv"), &trace_csv(r))?;
    }
    if !r.sinr.is_empty() {
        write_file(&dir.join("sinr.csv"), &sinr_csv(r))?;
    }
    Ok(())
}
