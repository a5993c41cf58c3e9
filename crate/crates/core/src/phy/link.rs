use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Implementation loss added to the Shannon threshold of every MCS.
pub const SHANNON_GAP_DB: f64 = 2.0;

/// Spectral efficiencies (bit/s/Hz) from QPSK 1/8 to 256QAM 0.9.
const EFFICIENCIES: [f64; 15] = [
    0.25, 0.5, 2.0 / 3.0, 1.0, 4.0 / 3.0, 1.5, 2.0, 8.0 / 3.0, 3.0, 4.0, 4.5, 5.0, 6.0, 20.0 / 3.0, 7.2,
];

const SUBCARRIERS_PER_PRB: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsEntry {
    pub efficiency: f64,
    pub threshold_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
    symbols_per_tti: f64,
    dmrs_overhead: f64,
}

impl McsTable {
    pub fn new(symbols_per_tti: usize, dmrs_overhead: f64) -> Self {
        let entries = EFFICIENCIES
            .iter()
            .map(|&efficiency| McsEntry {
                efficiency,
                threshold_db: 10.0 * (2f64.powf(efficiency) - 1.0).log10() + SHANNON_GAP_DB,
            })
            .collect();
        McsTable {
            entries,
            symbols_per_tti: symbols_per_tti as f64,
            dmrs_overhead,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, mcs: usize) -> McsEntry {
        self.entries[mcs]
    }

    pub fn threshold_db(&self, mcs: usize) -> f64 {
        self.entries[mcs].threshold_db
    }

    /// Payload bits one PRB carries over one TTI.
    pub fn bits_per_prb(&self, mcs: usize) -> u32 {
        let re = SUBCARRIERS_PER_PRB * self.symbols_per_tti * (1.0 - self.dmrs_overhead);
        (re * self.entries[mcs].efficiency).floor() as u32
    }

    /// Highest MCS whose threshold does not exceed `sinr_db`; the lowest
    /// one when none qualifies.
    pub fn select(&self, sinr_db: f64) -> usize {
        self.entries
            .iter()
            .rposition(|e| e.threshold_db <= sinr_db)
            .unwrap_or(0)
    }
}

/// Exponential effective SINR: `-β ln(mean exp(-γ/β))`.
///
/// Evaluated relative to the smallest input so large SINRs neither
/// underflow nor lose the fixed point for equal inputs.
pub fn effective_sinr(sinrs: &[f64], beta: f64) -> Result<f64> {
    if sinrs.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(beta > 0.0) {
        return Err(Error::validation("eesm_beta", "must be positive"));
    }
    let min = sinrs.iter().cloned().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Ok(min);
    }
    let mean = sinrs.iter().map(|g| (-(g - min) / beta).exp()).sum::<f64>() / sinrs.len() as f64;
    Ok(min - beta * mean.ln())
}

/// Chase combining: copies add in linear SINR.
pub fn chase_combine(accumulated: f64, attempt: f64) -> f64 {
    accumulated + attempt
}

/// Block decoded iff the combined SINR clears the MCS threshold plus a
/// Gaussian margin of `sigma_db`.
pub fn decode<R: Rng + ?Sized>(sinr_sum: f64, threshold_db: f64, sigma_db: f64, rng: &mut R) -> bool {
    let z: f64 = rng.sample(StandardNormal);
    10.0 * sinr_sum.log10() >= threshold_db + sigma_db * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamFactory};
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn eesm_examples() {
        assert_eq!(effective_sinr(&[7.3; 5], 1.0).unwrap(), 7.3);
        let direct = -((-10f64).exp() + (-1f64).exp()).ln() + 2f64.ln();
        let got = effective_sinr(&[10.0, 1.0], 1.0).unwrap();
        assert!((got - direct).abs() < 1e-12);
        assert!((got - 1.693).abs() < 1e-3);
        assert!(effective_sinr(&[4.0, 0.0], 1.0).unwrap() < 2.0);
        assert!(matches!(effective_sinr(&[], 1.0), Err(Error::EmptySamples)));
    }

    #[test]
    fn chase_doubles() {
        let g = 3.7;
        let sum = chase_combine(chase_combine(0.0, g), g);
        assert_eq!(sum, 2.0 * g);
        assert!((10.0 * sum.log10() - 10.0 * g.log10() - 10.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn table_shape() {
        let t = McsTable::new(4, 0.25);
        assert_eq!(t.len(), 15);
        assert!((0..14).all(|i| t.threshold_db(i) < t.threshold_db(i + 1)));
        assert_eq!(t.bits_per_prb(0), 9);
        assert_eq!(t.bits_per_prb(6), 72);
        assert_eq!(t.select(-50.0), 0);
        assert_eq!(t.select(t.threshold_db(6)), 6);
        assert_eq!(t.select(t.threshold_db(6) - 1e-9), 5);
        assert_eq!(t.select(100.0), 14);
    }

    #[test]
    fn decode_far_above_threshold() {
        let tail = Normal::new(0.0, 1.0).unwrap().sf(10.0);
        assert!(tail < 1e-9);
        let mut rng = StreamFactory::new(2).stream(Purpose::Test, 0);
        let thr = 5.0;
        let g = 10f64.powf((thr + 10.0) / 10.0);
        assert!((0..100_000).all(|_| decode(g, thr, 1.0, &mut rng)));
    }

    #[test]
    fn decode_at_threshold_is_a_coin_flip() {
        let thr = 3.0;
        let g = 10f64.powf(thr / 10.0);
        let f = StreamFactory::new(4);
        let trials = 20_000;
        let ok = (0..trials)
            .filter(|&i| decode(g, thr, 1.0, &mut f.stream(Purpose::Decoding, i)))
            .count();
        let p = ok as f64 / trials as f64;
        assert!((p - 0.5).abs() < 0.02, "{p}");
    }

    proptest! {
        #[test]
        fn eesm_between_min_and_mean(v in proptest::collection::vec(0.0f64..1e3, 1..30), beta in 0.1f64..10.0) {
            let e = effective_sinr(&v, beta).unwrap();
            let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            prop_assert!(e >= min - 1e-9 && e <= mean + 1e-9);
        }
    }
}
