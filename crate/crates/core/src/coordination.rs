//! Cluster-wide frame configuration selection.
//!
//! Every update period each cell reduces its buffered traffic to a DL share
//! `μ = Z_dl / (Z_dl + Z_ul)` per slot and averages it over the period.
//! The cells exchange these averages, order them by distance from the
//! balance point (0.5), weight them with the descending half of a Kaiser
//! window, and quantize the weighted mean `Θ` to a member of the frame set.
//! Every cell runs the same pure pipeline on the same reports, so the whole
//! cluster adopts one configuration and no symbol ever carries opposite
//! directions in neighbouring cells.
//!
//! The static and dynamic TDD baselines live here as well.

use crate::error::{Error, Result};
use crate::frame::{Direction, RatioLabel, RfcSet};

pub const BALANCE_POINT: f64 = 0.5;

/// DL share of the buffered volume; `None` when both buffers are empty.
pub fn traffic_ratio(z_dl: u64, z_ul: u64) -> Option<f64> {
    let total = z_dl + z_ul;
    (total > 0).then(|| z_dl as f64 / total as f64)
}

/// Mean of the slots that carried traffic; `None` if none did.
pub fn frame_average(samples: &[Option<f64>]) -> Option<f64> {
    let (sum, n) = samples
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), &x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Zeroth-order modified Bessel function of the first kind.
///
/// Power series `Σ ((x/2)^k / k!)^2`; every term is positive so the sum is
/// accurate to a few ulps, and it converges for all finite `x` (about
/// `1.5|x| + 30` terms to reach double precision).
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term <= sum * 1e-17 || k > 2000.0 {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Descending-half ("mirrored") Kaiser window of length `len_minus_one + 1`:
/// `w[l] = I0(β·sqrt(1 - (l/L)^2)) / I0(β)`. `w[0] = 1` and the weights
/// fall off towards `l = L`; `β = 0` gives all ones.
pub fn kaiser_weights(len_minus_one: usize, beta: f64) -> Vec<f64> {
    if len_minus_one == 0 {
        return vec![1.0];
    }
    let denom = bessel_i0(beta);
    let l_max = len_minus_one as f64;
    (0..=len_minus_one)
        .map(|l| {
            if l == 0 {
                return 1.0;
            }
            let r = l as f64 / l_max;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

/// Textbook symmetric Kaiser window, peaking at `l = L/2`.
pub fn kaiser_weights_symmetric(len_minus_one: usize, beta: f64) -> Vec<f64> {
    if len_minus_one == 0 {
        return vec![1.0];
    }
    let denom = bessel_i0(beta);
    let l_max = len_minus_one as f64;
    (0..=len_minus_one)
        .map(|l| {
            let r = 2.0 * l as f64 / l_max - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KaiserWindow {
    pub len_minus_one: usize,
    pub beta: f64,
    pub weights: Vec<f64>,
}

impl KaiserWindow {
    /// Window for a cluster of `cells` with `β = beta_hat · beta_max`.
    pub fn for_cluster(cells: usize, beta_hat: f64, beta_max: f64, symmetric: bool) -> Self {
        let len_minus_one = cells.saturating_sub(1);
        let beta = beta_hat * beta_max;
        let weights = if symmetric {
            kaiser_weights_symmetric(len_minus_one, beta)
        } else {
            kaiser_weights(len_minus_one, beta)
        };
        KaiserWindow {
            len_minus_one,
            beta,
            weights,
        }
    }
}

/// A cell's averaged DL share as exchanged between base stations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioReport {
    pub cell: usize,
    pub mean_ratio: Option<f64>,
    /// Update period the samples were taken in.
    pub frame: u64,
    pub delivery_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SortedRatio {
    pub cell: usize,
    pub ratio: f64,
    pub distance: f64,
}

/// Orders reports by descending `|μ̄ - d|`, ties by ascending cell id.
/// Cells without traffic vote `d` and therefore sort last.
pub fn sort_reports(reports: &[(usize, Option<f64>)], balance: f64) -> Vec<SortedRatio> {
    let mut out: Vec<SortedRatio> = reports
        .iter()
        .map(|&(cell, r)| {
            let ratio = r.unwrap_or(balance);
            SortedRatio {
                cell,
                ratio,
                distance: (ratio - balance).abs(),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.distance
            .total_cmp(&a.distance)
            .then(a.cell.cmp(&b.cell))
    });
    out
}

/// Weighted mean `Σ ψ_l w[l] / Σ w[l]` over the sorted ratios.
pub fn filter_theta(sorted: &[f64], weights: &[f64]) -> Result<f64> {
    if sorted.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len(),
            actual: sorted.len(),
        });
    }
    if sorted.is_empty() {
        return Err(Error::EmptySamples);
    }
    let num: f64 = sorted.iter().zip(weights).map(|(p, w)| p * w).sum();
    let den: f64 = weights.iter().sum();
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TddPolicy {
    /// Common configuration from the filtered cluster ratio.
    Proposed,
    /// One configuration for the whole run, matched to the long-run offered
    /// load and then shifted by `alpha · 0.5` towards `bias`. `fixed`
    /// bypasses the matching.
    StaticTdd {
        alpha: f64,
        bias: Direction,
        fixed: Option<RatioLabel>,
    },
    /// Every cell follows its own traffic. With `cli_free` the cross-link
    /// interference is assumed perfectly cancelled.
    DynamicTdd { cli_free: bool },
}

impl TddPolicy {
    pub fn validate(&self) -> Result<()> {
        if let TddPolicy::StaticTdd { alpha, .. } = self {
            if !(0.0..=1.0).contains(alpha) {
                return Err(Error::validation("stdd_alpha", "must be in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Whether every cell is guaranteed to use the same configuration.
    pub fn is_cluster_aligned(&self) -> bool {
        !matches!(self, TddPolicy::DynamicTdd { .. })
    }

    pub fn suppresses_cross_link(&self) -> bool {
        matches!(self, TddPolicy::DynamicTdd { cli_free: true })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationConfig {
    pub window: KaiserWindow,
    /// Use the empirical mean of the reports as the balance point instead
    /// of 0.5.
    pub empirical_balance_point: bool,
}

impl CoordinationConfig {
    pub fn new(cells: usize, beta_hat: f64, beta_max: f64) -> Self {
        CoordinationConfig {
            window: KaiserWindow::for_cluster(cells, beta_hat, beta_max, false),
            empirical_balance_point: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Index into the frame set, one entry per cell.
    pub per_cell: Vec<usize>,
    /// Filtered cluster ratio, when the policy computes one.
    pub theta: Option<f64>,
}

/// Filtered cluster ratio `Θ` over one report per cell, or `None` when no
/// cell saw any traffic.
pub fn cluster_theta(reports: &[(usize, Option<f64>)], cfg: &CoordinationConfig) -> Result<Option<f64>> {
    if reports.iter().all(|r| r.1.is_none()) {
        return Ok(None);
    }
    let balance = if cfg.empirical_balance_point {
        frame_average(&reports.iter().map(|r| r.1).collect::<Vec<_>>()).unwrap_or(BALANCE_POINT)
    } else {
        BALANCE_POINT
    };
    let sorted: Vec<f64> = sort_reports(reports, balance)
        .into_iter()
        .map(|s| s.ratio)
        .collect();
    filter_theta(&sorted, &cfg.window.weights).map(Some)
}

/// Index of the static configuration: offered DL fraction shifted by
/// `alpha · 0.5` towards `bias`, then quantized.
pub fn static_rfc_index(
    alpha: f64,
    bias: Direction,
    fixed: Option<RatioLabel>,
    offered_dl_fraction: f64,
    set: &RfcSet,
) -> Result<usize> {
    if let Some(label) = fixed {
        return set.index_of(label);
    }
    let shift = alpha * 0.5;
    let target = match bias {
        Direction::Dl => offered_dl_fraction + shift,
        Direction::Ul => offered_dl_fraction - shift,
    };
    Ok(set.quantize_index(target.clamp(0.0, 1.0)))
}

/// Chooses each cell's configuration for the next update period.
///
/// `reports` carries one entry per cell, indexed by cell id.
pub fn decide_common_rfc(
    reports: &[Option<f64>],
    policy: &TddPolicy,
    set: &RfcSet,
    cfg: &CoordinationConfig,
    offered_dl_fraction: f64,
) -> Result<Decision> {
    let cells = reports.len();
    match *policy {
        TddPolicy::Proposed => {
            let tagged: Vec<(usize, Option<f64>)> = reports.iter().copied().enumerate().collect();
            let theta = cluster_theta(&tagged, cfg)?;
            let idx = theta.map_or(set.default_index(), |t| set.quantize_index(t));
            Ok(Decision {
                per_cell: vec![idx; cells],
                theta,
            })
        }
        TddPolicy::StaticTdd { alpha, bias, fixed } => {
            let idx = static_rfc_index(alpha, bias, fixed, offered_dl_fraction, set)?;
            Ok(Decision {
                per_cell: vec![idx; cells],
                theta: None,
            })
        }
        TddPolicy::DynamicTdd { .. } => Ok(Decision {
            per_cell: reports
                .iter()
                .map(|r| r.map_or(set.default_index(), |m| set.quantize_index(m)))
                .collect(),
            theta: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::default_labels;
    use proptest::prelude::*;

    /// Independent I0: terms from log-gamma, summed smallest-last.
    fn i0_oracle(x: f64) -> f64 {
        let half = (x / 2.0).abs();
        let mut terms = Vec::new();
        for k in 0..600u32 {
            let log_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
            let lt = if half == 0.0 {
                if k == 0 { 0.0 } else { f64::NEG_INFINITY }
            } else {
                2.0 * k as f64 * half.ln() - 2.0 * log_fact
            };
            terms.push(lt.exp());
        }
        terms.iter().rev().sum()
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(traffic_ratio(900, 100), Some(0.9));
        assert_eq!(traffic_ratio(500, 500), Some(0.5));
        assert_eq!(traffic_ratio(0, 0), None);
        // A ratio of 0.9 means nine times more DL than UL.
        let mu = traffic_ratio(900, 100).unwrap();
        assert!((mu / (1.0 - mu) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn frame_average_examples() {
        assert!((frame_average(&[Some(0.7); 20]).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(
            frame_average(&[Some(0.2), Some(0.4), Some(0.6), Some(0.8)]),
            Some(0.5)
        );
        assert_eq!(frame_average(&[None; 20]), None);
        assert_eq!(frame_average(&[None, Some(0.3), None]), Some(0.3));
    }

    #[test]
    fn bessel_matches_oracle() {
        for &x in &[0.0, 1e-3, 0.5, 1.0, 3.7, 10.0, 25.0, 50.0, 85.0, 90.0, 100.0] {
            let a = bessel_i0(x);
            let b = i0_oracle(x);
            assert!(((a - b) / b).abs() < 1e-12, "x={x}: {a} vs {b}");
        }
        assert_eq!(bessel_i0(0.0), 1.0);
    }

    #[test]
    fn zero_beta_gives_uniform_weights() {
        assert!(kaiser_weights(20, 0.0).iter().all(|&w| w == 1.0));
        assert_eq!(kaiser_weights(0, 50.0), vec![1.0]);
    }

    #[test]
    fn selective_window_value() {
        // beta_hat = 0.9 with beta_max = 100 and L = 100, at l/L = 0.3.
        let w = kaiser_weights(100, 90.0);
        let expected = i0_oracle(90.0 * (1.0f64 - 0.09).sqrt()) / i0_oracle(90.0);
        assert!(((w[30] - expected) / expected).abs() < 1e-10);
        assert!((w[30] - 0.016).abs() < 0.001, "{}", w[30]);
    }

    #[test]
    fn window_shape() {
        for beta in [0.5, 20.0, 90.0] {
            let w = kaiser_weights(20, beta);
            assert_eq!(w[0], 1.0);
            assert!(w.windows(2).all(|p| p[0] > p[1]));
            assert!(w.iter().all(|&x| x > 0.0 && x <= 1.0));
        }
        let sym = kaiser_weights_symmetric(20, 9.0);
        assert!((sym[10] - 1.0).abs() < 1e-15);
        assert!((sym[3] - sym[17]).abs() < 1e-12);
    }

    #[test]
    fn sort_example() {
        let r = sort_reports(&[(1, Some(0.5)), (2, Some(0.9)), (3, Some(0.1)), (4, Some(0.6))], 0.5);
        let cells: Vec<_> = r.iter().map(|s| s.cell).collect();
        assert_eq!(cells, vec![2, 3, 4, 1]);
        let d: Vec<_> = r.iter().map(|s| s.distance).collect();
        assert!((d[0] - 0.4).abs() < 1e-12 && (d[1] - 0.4).abs() < 1e-12);
        assert!((d[2] - 0.1).abs() < 1e-12 && d[3] == 0.0);
    }

    #[test]
    fn sort_degenerate_cases() {
        let r = sort_reports(&[(2, Some(0.5)), (0, Some(0.5)), (1, None)], 0.5);
        assert_eq!(r.iter().map(|s| s.cell).collect::<Vec<_>>(), vec![0, 1, 2]);
        let one = sort_reports(&[(7, Some(0.3))], 0.5);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].cell, 7);
    }

    #[test]
    fn filter_examples() {
        let w = kaiser_weights(2, 0.0);
        assert!((filter_theta(&[0.1, 0.2, 0.3], &w).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(
            filter_theta(&[0.1, 0.2], &w),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn extreme_cell_dominates_selective_window() {
        let w = kaiser_weights(21, 90.0);
        let mut psi = vec![0.5; 22];
        psi[0] = 0.9;
        let theta = filter_theta(&psi, &w).unwrap();
        let brute = psi.iter().zip(&w).map(|(p, w)| p * w).sum::<f64>() / w.iter().sum::<f64>();
        assert!((theta - brute).abs() < 0.02);
        assert!(theta > 0.5);
    }

    #[test]
    fn proposed_uniform_low_ratio_selects_one_to_four() {
        let set = RfcSet::new(&default_labels(), 20).unwrap();
        for beta_hat in [0.0, 0.2, 0.5, 0.9] {
            let cfg = CoordinationConfig::new(21, beta_hat, 100.0);
            let d = decide_common_rfc(&[Some(0.2); 21], &TddPolicy::Proposed, &set, &cfg, 0.5).unwrap();
            assert!(d.per_cell.iter().all(|&i| set.get(i).label == RatioLabel { dl: 1, ul: 4 }));
        }
    }

    #[test]
    fn proposed_all_idle_falls_back_to_default() {
        let set = RfcSet::new(&default_labels(), 20).unwrap();
        let cfg = CoordinationConfig::new(5, 0.9, 100.0);
        let d = decide_common_rfc(&[None; 5], &TddPolicy::Proposed, &set, &cfg, 0.5).unwrap();
        assert_eq!(d.theta, None);
        assert!(d.per_cell.iter().all(|&i| i == set.default_index()));
    }

    #[test]
    fn static_policy() {
        let set = RfcSet::new(&default_labels(), 20).unwrap();
        let cfg = CoordinationConfig::new(3, 0.9, 100.0);
        let perfect = TddPolicy::StaticTdd { alpha: 0.0, bias: Direction::Dl, fixed: None };
        let d = decide_common_rfc(&[Some(0.9), Some(0.1), None], &perfect, &set, &cfg, 0.5).unwrap();
        assert!(d.per_cell.iter().all(|&i| set.get(i).label == RatioLabel::BALANCED));
        let skewed = TddPolicy::StaticTdd { alpha: 0.35, bias: Direction::Dl, fixed: None };
        let d = decide_common_rfc(&[None; 3], &skewed, &set, &cfg, 0.5).unwrap();
        assert_eq!(set.get(d.per_cell[0]).label, RatioLabel { dl: 2, ul: 1 });
        let skewed_ul = TddPolicy::StaticTdd { alpha: 0.35, bias: Direction::Ul, fixed: None };
        let d = decide_common_rfc(&[None; 3], &skewed_ul, &set, &cfg, 0.5).unwrap();
        assert_eq!(set.get(d.per_cell[0]).label, RatioLabel { dl: 1, ul: 2 });
        let fixed = TddPolicy::StaticTdd { alpha: 0.0, bias: Direction::Dl, fixed: Some(RatioLabel::BALANCED) };
        let d = decide_common_rfc(&[None; 3], &fixed, &set, &cfg, 0.75).unwrap();
        assert_eq!(set.get(d.per_cell[0]).label, RatioLabel::BALANCED);
    }

    #[test]
    fn dynamic_policy_per_cell() {
        let set = RfcSet::new(&default_labels(), 20).unwrap();
        let cfg = CoordinationConfig::new(3, 0.9, 100.0);
        let d = decide_common_rfc(
            &[Some(0.8), Some(0.25), None],
            &TddPolicy::DynamicTdd { cli_free: false },
            &set,
            &cfg,
            0.5,
        )
        .unwrap();
        let labels: Vec<_> = d.per_cell.iter().map(|&i| set.get(i).label).collect();
        assert_eq!(labels[0], RatioLabel { dl: 4, ul: 1 });
        assert_eq!(labels[1], RatioLabel { dl: 1, ul: 3 });
        assert_eq!(labels[2], RatioLabel::BALANCED);
    }

    #[test]
    fn swapping_extreme_and_mild_cells_matters_only_with_shaping() {
        // Same values, different positions: the pipeline re-sorts, so the
        // result is permutation invariant; feeding an unsorted Ψ directly
        // to the filter is not.
        let sorted = [0.95, 0.7, 0.55, 0.5];
        let unsorted = [0.55, 0.7, 0.95, 0.5];
        let shaped = kaiser_weights(3, 9.0);
        let flat = kaiser_weights(3, 0.0);
        assert_ne!(filter_theta(&sorted, &shaped).unwrap(), filter_theta(&unsorted, &shaped).unwrap());
        assert!((filter_theta(&sorted, &flat).unwrap() - filter_theta(&unsorted, &flat).unwrap()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn theta_is_a_convex_combination(
            psi in proptest::collection::vec(0.0f64..=1.0, 1..30),
            beta in 0.0f64..100.0,
        ) {
            let w = kaiser_weights(psi.len() - 1, beta);
            let theta = filter_theta(&psi, &w).unwrap();
            let lo = psi.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(theta >= lo - 1e-12 && theta <= hi + 1e-12);
        }

        #[test]
        fn pipeline_is_scale_invariant(
            z in proptest::collection::vec((0u64..5000, 0u64..5000), 3..22),
            scale in 1u64..50,
            beta_hat in 0.0f64..=1.0,
        ) {
            let set = RfcSet::new(&default_labels(), 20).unwrap();
            let cfg = CoordinationConfig::new(z.len(), beta_hat, 100.0);
            let r1: Vec<_> = z.iter().map(|&(d, u)| traffic_ratio(d, u)).collect();
            let r2: Vec<_> = z.iter().map(|&(d, u)| traffic_ratio(d * scale, u * scale)).collect();
            prop_assert_eq!(&r1, &r2);
            let d1 = decide_common_rfc(&r1, &TddPolicy::Proposed, &set, &cfg, 0.5).unwrap();
            let d2 = decide_common_rfc(&r2, &TddPolicy::Proposed, &set, &cfg, 0.5).unwrap();
            prop_assert_eq!(d1, d2);
        }

        #[test]
        fn proposed_is_cluster_consistent(
            r in proptest::collection::vec(proptest::option::of(0.0f64..=1.0), 1..25),
            beta_hat in 0.0f64..=1.0,
        ) {
            let set = RfcSet::new(&default_labels(), 20).unwrap();
            let cfg = CoordinationConfig::new(r.len(), beta_hat, 100.0);
            let d = decide_common_rfc(&r, &TddPolicy::Proposed, &set, &cfg, 0.5).unwrap();
            prop_assert!(d.per_cell.iter().all(|&i| i == d.per_cell[0]));
        }
    }
}
