//! Quick built-in consistency checks for the command-line `selftest`.

use rand::Rng;

use crate::coordination::{bessel_i0, decide_common_rfc, kaiser_weights, CoordinationConfig, TddPolicy};
use crate::engine::{run, RunOptions};
use crate::frame::{build_slot_pattern, default_labels, quantize_theta, RatioLabel, RfcSet};
use crate::output::latency_csv;
use crate::phy::{chase_combine, complex_gaussian, effective_sinr, post_sinr, CVector, Interferer, InterferenceClass, ReceiverMode};
use crate::rng::{Purpose, StreamFactory};
use crate::scenario::Scenario;
use crate::stats::ccdf;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: impl Into<String>) -> Check {
    Check { name, passed, detail: detail.into() }
}

fn series_i0(x: f64) -> f64 {
    // Direct sum of the first 400 series terms.
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 0..400 {
        if k > 0 {
            term *= (x / 2.0) * (x / 2.0) / (k as f64 * k as f64);
        }
        sum += term;
    }
    sum
}

pub fn run_all() -> Vec<Check> {
    let mut out = Vec::new();

    let worst = [0.0, 1.0, 12.5, 45.0, 90.0]
        .iter()
        .map(|&x| ((bessel_i0(x) - series_i0(x)) / series_i0(x)).abs())
        .fold(0.0, f64::max);
    out.push(check("bessel_i0", worst < 1e-12, format!("max relative error {worst:e}")));

    let w = kaiser_weights(100, 90.0);
    out.push(check("kaiser_selective", (w[30] - 0.016).abs() < 0.001, format!("w[30] = {:.5}", w[30])));
    out.push(check("kaiser_flat", kaiser_weights(20, 0.0).iter().all(|&x| x == 1.0), "beta 0"));

    let slot = build_slot_pattern(2, 1).map(|s| s.to_string()).unwrap_or_default();
    out.push(check("slot_2_1", slot == "[DDDDFUUUUDDDDF]", slot));

    match RfcSet::new(&default_labels(), 20) {
        Ok(set) => {
            let l = quantize_theta(0.2, &set).label;
            out.push(check("quantize_0.2", l == RatioLabel { dl: 1, ul: 4 }, l.to_string()));
            let cfg = CoordinationConfig::new(21, 0.9, 100.0);
            let d = decide_common_rfc(&[Some(0.2); 21], &TddPolicy::Proposed, &set, &cfg, 0.5);
            let ok = d.is_ok_and(|d| d.per_cell.iter().all(|&i| set.get(i).label == RatioLabel { dl: 1, ul: 4 }));
            out.push(check("common_rfc", ok, "all cells at 0.2"));
        }
        Err(e) => out.push(check("rfc_set", false, e.to_string())),
    }

    let e = effective_sinr(&[3.3; 4], 1.0).unwrap_or(f64::NAN);
    out.push(check("eesm_fixed_point", e == 3.3, format!("{e}")));
    out.push(check("chase", chase_combine(chase_combine(0.0, 2.0), 2.0) == 4.0, "2 + 2"));

    let mut rng = StreamFactory::new(1).stream(Purpose::Test, 0);
    let mut mmse_ok = true;
    for _ in 0..50 {
        let h = CVector::from_fn(2, |_, _| complex_gaussian(&mut rng));
        let ints: Vec<Interferer> = (0..2)
            .map(|_| Interferer {
                vector: CVector::from_fn(2, |_, _| complex_gaussian(&mut rng)),
                class: InterferenceClass::SameLink,
            })
            .collect();
        let Ok(out) = post_sinr(&h, &ints, ReceiverMode::Aligned, 0.1) else {
            mmse_ok = false;
            break;
        };
        for _ in 0..200 {
            let u = CVector::from_fn(2, |_, _| complex_gaussian(&mut rng));
            let s = u.dotc(&h).norm_sqr();
            let i: f64 = ints.iter().map(|g| u.dotc(&g.vector).norm_sqr()).sum::<f64>() + 0.1 * u.norm_squared();
            mmse_ok &= out.sinr >= s / i * (1.0 - 1e-9);
        }
    }
    out.push(check("mmse_optimal", mmse_ok, "50 instances x 200 combiners"));

    let samples: Vec<f64> = (0..500).map(|_| rng.random::<f64>() * 10.0).collect();
    let c = ccdf(&samples);
    let mono = c.points.windows(2).all(|p| p[0].1 >= p[1].1);
    out.push(check("ccdf_monotone", mono, format!("{} points", c.points.len())));

    let mut s = Scenario::default();
    s.cell_count = 3;
    s.ue_per_cell_dl = 2;
    s.ue_per_cell_ul = 2;
    s.sim_duration_ms = 100.0;
    s.warmup_ms = 10.0;
    match (run(&s, RunOptions::default()), run(&s, RunOptions::default())) {
        (Ok(a), Ok(b)) => {
            out.push(check("determinism", latency_csv(&a) == latency_csv(&b), format!("{} records", a.records.len())));
            out.push(check("conservation", a.conservation.holds(), format!("{:?}", a.conservation)));
        }
        (Err(e), _) | (_, Err(e)) => out.push(check("small_run", false, e.to_string())),
    }
    out
}
