//! Declarative run description.
//!
//! The scenario document is a flat `key = value` text file, one key per
//! line. `#` starts a comment. Absent keys keep their defaults, which
//! reproduce the reference macro cluster: 21 cells, 8 BS and 2 UE antennas,
//! 10 DL and 10 UL UEs per cell, 400-bit FTP3 payloads, 10 MHz at 30 kHz
//! SCS on 3.5 GHz, and a 10 ms frame-configuration update period.
//!
//! Offered load can be given either directly as per-UE arrival rates
//! (`arrival_rate_dl`, `arrival_rate_ul`) or as a per-cell total
//! (`offered_load_mbps`) split by `dl_share`; `cell_dl_shares` assigns a
//! different DL share to each cell, cycling through the list.

use std::fmt::Write as _;

use crate::coordination::TddPolicy;
use crate::error::{Error, Result};
use crate::frame::{default_labels, Direction, RatioLabel, SYMBOLS_PER_SLOT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Proposed,
    StaticTdd,
    DynamicTddCli,
    DynamicTddCliFree,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Proposed => "proposed",
            PolicyKind::StaticTdd => "stdd",
            PolicyKind::DynamicTddCli => "dtdd-cli",
            PolicyKind::DynamicTddCliFree => "dtdd-cli-free",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "proposed" => Some(PolicyKind::Proposed),
            "stdd" | "static" => Some(PolicyKind::StaticTdd),
            "dtdd-cli" | "dtdd" => Some(PolicyKind::DynamicTddCli),
            "dtdd-cli-free" => Some(PolicyKind::DynamicTddCliFree),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    // Layout
    pub cell_count: usize,
    pub inter_site_distance_m: f64,
    pub sectors_per_site: usize,
    pub ue_per_cell_dl: usize,
    pub ue_per_cell_ul: usize,
    pub bs_antennas: usize,
    pub ue_antennas: usize,

    // Carrier
    pub bandwidth_hz: f64,
    pub scs_hz: f64,
    pub carrier_freq_hz: f64,
    pub prb_count: usize,
    pub fading_subbands: usize,
    pub dmrs_overhead: f64,

    // Traffic
    pub payload_dl_bits: u32,
    pub payload_ul_bits: u32,
    pub arrival_rate_dl: f64,
    pub arrival_rate_ul: f64,
    pub offered_load_mbps: Option<f64>,
    pub dl_share: Option<f64>,
    pub cell_dl_shares: Vec<f64>,
    pub ul_report_delay_ms: f64,

    // Frame coordination
    pub tdd_policy: PolicyKind,
    pub stdd_alpha: f64,
    pub stdd_bias: Direction,
    pub stdd_fixed_ratio: Option<RatioLabel>,
    pub beta_hat: f64,
    pub beta_max: f64,
    pub symmetric_window: bool,
    pub empirical_balance_point: bool,
    pub rfc_set: Vec<RatioLabel>,
    pub rfc_update_period_ms: f64,
    pub xn_delay_ms: f64,

    // Propagation and radio
    pub pathloss_exponent: f64,
    pub pathloss_ref_m: f64,
    pub bs_bs_pathloss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub bs_tx_power_dbm: f64,
    pub ue_tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub pure_sir: bool,

    // Link adaptation and HARQ
    pub eesm_beta: f64,
    pub bler_target: f64,
    pub olla_step_db: f64,
    pub decode_margin_sigma_db: f64,
    pub harq_max_attempts: u32,
    pub pf_window_tti: f64,

    // Processing delays, in OFDM symbols
    pub prep_symbols: f64,
    pub pdsch_decode_symbols: f64,
    pub pusch_decode_symbols: f64,

    // Run control
    pub sim_duration_ms: f64,
    pub warmup_ms: f64,
    pub drain_ms: f64,
    pub seed: u64,
    pub quantile_targets: Vec<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            cell_count: 21,
            inter_site_distance_m: 500.0,
            sectors_per_site: 3,
            ue_per_cell_dl: 10,
            ue_per_cell_ul: 10,
            bs_antennas: 8,
            ue_antennas: 2,

            bandwidth_hz: 10e6,
            scs_hz: 30e3,
            carrier_freq_hz: 3.5e9,
            prb_count: 24,
            fading_subbands: 4,
            dmrs_overhead: 0.25,

            payload_dl_bits: 400,
            payload_ul_bits: 400,
            arrival_rate_dl: 125.0,
            arrival_rate_ul: 125.0,
            offered_load_mbps: None,
            dl_share: None,
            cell_dl_shares: Vec::new(),
            ul_report_delay_ms: 0.0,

            tdd_policy: PolicyKind::Proposed,
            stdd_alpha: 0.0,
            stdd_bias: Direction::Dl,
            stdd_fixed_ratio: None,
            beta_hat: 0.9,
            beta_max: 100.0,
            symmetric_window: false,
            empirical_balance_point: false,
            rfc_set: default_labels(),
            rfc_update_period_ms: 10.0,
            xn_delay_ms: 0.0,

            pathloss_exponent: 3.76,
            pathloss_ref_m: 35.0,
            bs_bs_pathloss_exponent: 2.5,
            shadowing_sigma_db: 8.0,
            bs_tx_power_dbm: 46.0,
            ue_tx_power_dbm: 23.0,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 9.0,
            pure_sir: false,

            eesm_beta: 1.0,
            bler_target: 0.1,
            olla_step_db: 0.05,
            decode_margin_sigma_db: 1.0,
            harq_max_attempts: 4,
            pf_window_tti: 100.0,

            prep_symbols: 3.0,
            pdsch_decode_symbols: 4.5,
            pusch_decode_symbols: 5.5,

            sim_duration_ms: 1000.0,
            warmup_ms: 100.0,
            drain_ms: 50.0,
            seed: 1,
            quantile_targets: vec![1e-2, 1e-3, 1e-5],
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::validation(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::validation(key, format!("expected a boolean, got `{value}`"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let value = value.trim().trim_start_matches('[').trim_end_matches(']');
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| parse_num(key, v.trim()))
        .collect()
}

fn parse_optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" || value == "auto" || value.is_empty() {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl Scenario {
    /// Applies a single `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        match key {
            "cell_count" => self.cell_count = parse_num(key, value)?,
            "inter_site_distance_m" => self.inter_site_distance_m = parse_num(key, value)?,
            "sectors_per_site" => self.sectors_per_site = parse_num(key, value)?,
            "ue_per_cell_dl" => self.ue_per_cell_dl = parse_num(key, value)?,
            "ue_per_cell_ul" => self.ue_per_cell_ul = parse_num(key, value)?,
            "bs_antennas" => self.bs_antennas = parse_num(key, value)?,
            "ue_antennas" => self.ue_antennas = parse_num(key, value)?,
            "bandwidth_hz" => self.bandwidth_hz = parse_num(key, value)?,
            "scs_hz" => self.scs_hz = parse_num(key, value)?,
            "carrier_freq_hz" => self.carrier_freq_hz = parse_num(key, value)?,
            "prb_count" => self.prb_count = parse_num(key, value)?,
            "fading_subbands" => self.fading_subbands = parse_num(key, value)?,
            "dmrs_overhead" => self.dmrs_overhead = parse_num(key, value)?,
            "payload_dl_bits" => self.payload_dl_bits = parse_num(key, value)?,
            "payload_ul_bits" => self.payload_ul_bits = parse_num(key, value)?,
            "arrival_rate_dl" => self.arrival_rate_dl = parse_num(key, value)?,
            "arrival_rate_ul" => self.arrival_rate_ul = parse_num(key, value)?,
            "offered_load_mbps" => self.offered_load_mbps = parse_optional(key, value)?,
            "dl_share" => self.dl_share = parse_optional(key, value)?,
            "cell_dl_shares" => self.cell_dl_shares = parse_list(key, value)?,
            "ul_report_delay_ms" => self.ul_report_delay_ms = parse_num(key, value)?,
            "tdd_policy" => {
                self.tdd_policy = PolicyKind::parse(value).ok_or_else(|| {
                    Error::validation(
                        key,
                        format!("`{value}` is not one of proposed, stdd, dtdd-cli, dtdd-cli-free"),
                    )
                })?
            }
            "stdd_alpha" => self.stdd_alpha = parse_num(key, value)?,
            "stdd_bias" => {
                self.stdd_bias = match value.to_ascii_lowercase().as_str() {
                    "dl" => Direction::Dl,
                    "ul" => Direction::Ul,
                    _ => return Err(Error::validation(key, "expected `dl` or `ul`")),
                }
            }
            "stdd_fixed_ratio" => self.stdd_fixed_ratio = parse_optional(key, value)?,
            "beta_hat" => self.beta_hat = parse_num(key, value)?,
            "beta_max" => self.beta_max = parse_num(key, value)?,
            "symmetric_window" => self.symmetric_window = parse_bool(key, value)?,
            "empirical_balance_point" => self.empirical_balance_point = parse_bool(key, value)?,
            "rfc_set" => self.rfc_set = parse_list(key, value)?,
            "rfc_update_period_ms" => self.rfc_update_period_ms = parse_num(key, value)?,
            "xn_delay_ms" => self.xn_delay_ms = parse_num(key, value)?,
            "pathloss_exponent" => self.pathloss_exponent = parse_num(key, value)?,
            "pathloss_ref_m" => self.pathloss_ref_m = parse_num(key, value)?,
            "bs_bs_pathloss_exponent" => self.bs_bs_pathloss_exponent = parse_num(key, value)?,
            "shadowing_sigma_db" => self.shadowing_sigma_db = parse_num(key, value)?,
            "bs_tx_power_dbm" => self.bs_tx_power_dbm = parse_num(key, value)?,
            "ue_tx_power_dbm" => self.ue_tx_power_dbm = parse_num(key, value)?,
            "noise_psd_dbm_hz" => self.noise_psd_dbm_hz = parse_num(key, value)?,
            "noise_figure_db" => self.noise_figure_db = parse_num(key, value)?,
            "pure_sir" => self.pure_sir = parse_bool(key, value)?,
            "eesm_beta" => self.eesm_beta = parse_num(key, value)?,
            "bler_target" => self.bler_target = parse_num(key, value)?,
            "olla_step_db" => self.olla_step_db = parse_num(key, value)?,
            "decode_margin_sigma_db" => self.decode_margin_sigma_db = parse_num(key, value)?,
            "harq_max_attempts" => self.harq_max_attempts = parse_num(key, value)?,
            "pf_window_tti" => self.pf_window_tti = parse_num(key, value)?,
            "prep_symbols" => self.prep_symbols = parse_num(key, value)?,
            "pdsch_decode_symbols" => self.pdsch_decode_symbols = parse_num(key, value)?,
            "pusch_decode_symbols" => self.pusch_decode_symbols = parse_num(key, value)?,
            "sim_duration_ms" => self.sim_duration_ms = parse_num(key, value)?,
            "warmup_ms" => self.warmup_ms = parse_num(key, value)?,
            "drain_ms" => self.drain_ms = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "quantile_targets" => self.quantile_targets = parse_list(key, value)?,
            _ => {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("unknown key `{key}`"),
                })
            }
        }
        Ok(())
    }

    /// Applies a `key=value` override string, as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("override `{assignment}` is not of the form key=value"),
        })?;
        self.set(k, v)
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, field: &str, msg: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::validation(field, msg))
            }
        }
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        let unit = |x: f64| (0.0..=1.0).contains(&x);

        check(self.cell_count >= 1, "cell_count", "must be at least 1")?;
        check(pos(self.inter_site_distance_m), "inter_site_distance_m", "must be positive")?;
        check(
            matches!(self.sectors_per_site, 1 | 3),
            "sectors_per_site",
            "must be 1 or 3",
        )?;
        check(self.bs_antennas >= 1, "bs_antennas", "must be at least 1")?;
        check(self.ue_antennas >= 1, "ue_antennas", "must be at least 1")?;
        check(pos(self.bandwidth_hz), "bandwidth_hz", "must be positive")?;
        check(pos(self.scs_hz), "scs_hz", "must be positive")?;
        let mu = self.scs_hz / 15e3;
        check(
            [1.0, 2.0, 4.0, 8.0].contains(&mu),
            "scs_hz",
            "must be 15, 30, 60 or 120 kHz",
        )?;
        check(pos(self.carrier_freq_hz), "carrier_freq_hz", "must be positive")?;
        check(self.prb_count >= 1, "prb_count", "must be at least 1")?;
        check(
            (self.prb_count as f64) * 12.0 * self.scs_hz <= self.bandwidth_hz,
            "prb_count",
            "PRBs do not fit in the channel bandwidth",
        )?;
        check(
            self.fading_subbands >= 1 && self.fading_subbands <= self.prb_count,
            "fading_subbands",
            "must be between 1 and prb_count",
        )?;
        check(
            (0.0..1.0).contains(&self.dmrs_overhead),
            "dmrs_overhead",
            "must be in [0, 1)",
        )?;
        check(self.payload_dl_bits > 0, "payload_dl_bits", "must be positive")?;
        check(self.payload_ul_bits > 0, "payload_ul_bits", "must be positive")?;
        check(nonneg(self.arrival_rate_dl), "arrival_rate_dl", "must be non-negative")?;
        check(nonneg(self.arrival_rate_ul), "arrival_rate_ul", "must be non-negative")?;
        if let Some(o) = self.offered_load_mbps {
            check(nonneg(o), "offered_load_mbps", "must be non-negative")?;
        }
        if let Some(s) = self.dl_share {
            check(unit(s), "dl_share", "must be in [0, 1]")?;
        }
        check(
            self.cell_dl_shares.iter().all(|&s| unit(s)),
            "cell_dl_shares",
            "every share must be in [0, 1]",
        )?;
        check(nonneg(self.ul_report_delay_ms), "ul_report_delay_ms", "must be non-negative")?;
        check(unit(self.stdd_alpha), "stdd_alpha", "must be in [0, 1]")?;
        check(unit(self.beta_hat), "beta_hat", "must be in [0, 1]")?;
        check(
            nonneg(self.beta_max) && self.beta_max <= 500.0,
            "beta_max",
            "must be in [0, 500]",
        )?;
        check(!self.rfc_set.is_empty(), "rfc_set", "must not be empty")?;
        let frame_ms = 10.0;
        let periods = self.rfc_update_period_ms / frame_ms;
        check(
            periods >= 1.0 && periods.fract() == 0.0,
            "rfc_update_period_ms",
            "must be a positive multiple of the 10 ms frame",
        )?;
        check(nonneg(self.xn_delay_ms), "xn_delay_ms", "must be non-negative")?;
        check(pos(self.pathloss_exponent), "pathloss_exponent", "must be positive")?;
        check(pos(self.pathloss_ref_m), "pathloss_ref_m", "must be positive")?;
        check(pos(self.bs_bs_pathloss_exponent), "bs_bs_pathloss_exponent", "must be positive")?;
        check(nonneg(self.shadowing_sigma_db), "shadowing_sigma_db", "must be non-negative")?;
        check(pos(self.eesm_beta), "eesm_beta", "must be positive")?;
        check(
            self.bler_target > 0.0 && self.bler_target < 1.0,
            "bler_target",
            "must be in (0, 1)",
        )?;
        check(nonneg(self.olla_step_db), "olla_step_db", "must be non-negative")?;
        check(
            nonneg(self.decode_margin_sigma_db),
            "decode_margin_sigma_db",
            "must be non-negative",
        )?;
        check(self.harq_max_attempts >= 1, "harq_max_attempts", "must be at least 1")?;
        check(self.pf_window_tti >= 1.0, "pf_window_tti", "must be at least 1")?;
        check(nonneg(self.prep_symbols), "prep_symbols", "must be non-negative")?;
        check(nonneg(self.pdsch_decode_symbols), "pdsch_decode_symbols", "must be non-negative")?;
        check(nonneg(self.pusch_decode_symbols), "pusch_decode_symbols", "must be non-negative")?;
        check(pos(self.sim_duration_ms), "sim_duration_ms", "must be positive")?;
        check(nonneg(self.warmup_ms), "warmup_ms", "must be non-negative")?;
        check(nonneg(self.drain_ms), "drain_ms", "must be non-negative")?;
        check(
            self.quantile_targets.iter().all(|&q| q > 0.0 && q < 1.0),
            "quantile_targets",
            "every target must be in (0, 1)",
        )?;
        Ok(())
    }

    pub fn slot_ms(&self) -> f64 {
        15e3 / self.scs_hz
    }

    pub fn symbol_ms(&self) -> f64 {
        self.slot_ms() / SYMBOLS_PER_SLOT as f64
    }

    pub fn slots_per_frame(&self) -> usize {
        (10.0 / self.slot_ms()).round() as usize
    }

    pub fn slots_per_update(&self) -> usize {
        (self.rfc_update_period_ms / self.slot_ms()).round() as usize
    }

    pub fn ue_count_per_cell(&self) -> usize {
        self.ue_per_cell_dl + self.ue_per_cell_ul
    }

    /// Per-UE arrival rates (packets/s) for UEs served by `cell`.
    pub fn cell_arrival_rates(&self, cell: usize) -> (f64, f64) {
        let share = if self.cell_dl_shares.is_empty() {
            self.dl_share
        } else {
            Some(self.cell_dl_shares[cell % self.cell_dl_shares.len()])
        };
        if self.offered_load_mbps.is_none() && share.is_none() {
            return (self.arrival_rate_dl, self.arrival_rate_ul);
        }
        let (base_dl, base_ul) = self.offered_load_bps_from_rates();
        let total = self
            .offered_load_mbps
            .map_or(base_dl + base_ul, |mbps| mbps * 1e6);
        let share = share.unwrap_or(if base_dl + base_ul > 0.0 {
            base_dl / (base_dl + base_ul)
        } else {
            0.5
        });
        let rate = |bps: f64, k: usize, f: u32| {
            if k == 0 {
                0.0
            } else {
                bps / (k as f64 * f as f64)
            }
        };
        (
            rate(total * share, self.ue_per_cell_dl, self.payload_dl_bits),
            rate(total * (1.0 - share), self.ue_per_cell_ul, self.payload_ul_bits),
        )
    }

    fn offered_load_bps_from_rates(&self) -> (f64, f64) {
        (
            self.ue_per_cell_dl as f64 * self.payload_dl_bits as f64 * self.arrival_rate_dl,
            self.ue_per_cell_ul as f64 * self.payload_ul_bits as f64 * self.arrival_rate_ul,
        )
    }

    /// Nominal per-cell offered load (bits/s) for `cell` as (DL, UL).
    pub fn nominal_offered_load(&self, cell: usize) -> (f64, f64) {
        let (l_dl, l_ul) = self.cell_arrival_rates(cell);
        (
            self.ue_per_cell_dl as f64 * self.payload_dl_bits as f64 * l_dl,
            self.ue_per_cell_ul as f64 * self.payload_ul_bits as f64 * l_ul,
        )
    }

    /// Long-run DL share of the cluster's nominal offered load.
    pub fn cluster_offered_dl_fraction(&self) -> f64 {
        let (mut dl, mut ul) = (0.0, 0.0);
        for c in 0..self.cell_count {
            let (d, u) = self.nominal_offered_load(c);
            dl += d;
            ul += u;
        }
        if dl + ul > 0.0 {
            dl / (dl + ul)
        } else {
            0.5
        }
    }

    pub fn policy(&self) -> TddPolicy {
        match self.tdd_policy {
            PolicyKind::Proposed => TddPolicy::Proposed,
            PolicyKind::StaticTdd => TddPolicy::StaticTdd {
                alpha: self.stdd_alpha,
                bias: self.stdd_bias,
                fixed: self.stdd_fixed_ratio,
            },
            PolicyKind::DynamicTddCli => TddPolicy::DynamicTdd { cli_free: false },
            PolicyKind::DynamicTddCliFree => TddPolicy::DynamicTdd { cli_free: true },
        }
    }

    /// Resolved configuration as a scenario document. Loading it back yields
    /// an identical scenario.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("cell_count", self.cell_count.to_string());
        kv("inter_site_distance_m", self.inter_site_distance_m.to_string());
        kv("sectors_per_site", self.sectors_per_site.to_string());
        kv("ue_per_cell_dl", self.ue_per_cell_dl.to_string());
        kv("ue_per_cell_ul", self.ue_per_cell_ul.to_string());
        kv("bs_antennas", self.bs_antennas.to_string());
        kv("ue_antennas", self.ue_antennas.to_string());
        kv("bandwidth_hz", self.bandwidth_hz.to_string());
        kv("scs_hz", self.scs_hz.to_string());
        kv("carrier_freq_hz", self.carrier_freq_hz.to_string());
        kv("prb_count", self.prb_count.to_string());
        kv("fading_subbands", self.fading_subbands.to_string());
        kv("dmrs_overhead", self.dmrs_overhead.to_string());
        kv("payload_dl_bits", self.payload_dl_bits.to_string());
        kv("payload_ul_bits", self.payload_ul_bits.to_string());
        kv("arrival_rate_dl", self.arrival_rate_dl.to_string());
        kv("arrival_rate_ul", self.arrival_rate_ul.to_string());
        kv("offered_load_mbps", opt(&self.offered_load_mbps));
        kv("dl_share", opt(&self.dl_share));
        kv("cell_dl_shares", join(&self.cell_dl_shares));
        kv("ul_report_delay_ms", self.ul_report_delay_ms.to_string());
        kv("tdd_policy", self.tdd_policy.as_str().to_string());
        kv("stdd_alpha", self.stdd_alpha.to_string());
        kv("stdd_bias", self.stdd_bias.as_str().to_ascii_lowercase());
        kv("stdd_fixed_ratio", opt(&self.stdd_fixed_ratio));
        kv("beta_hat", self.beta_hat.to_string());
        kv("beta_max", self.beta_max.to_string());
        kv("symmetric_window", self.symmetric_window.to_string());
        kv("empirical_balance_point", self.empirical_balance_point.to_string());
        kv("rfc_set", join(&self.rfc_set));
        kv("rfc_update_period_ms", self.rfc_update_period_ms.to_string());
        kv("xn_delay_ms", self.xn_delay_ms.to_string());
        kv("pathloss_exponent", self.pathloss_exponent.to_string());
        kv("pathloss_ref_m", self.pathloss_ref_m.to_string());
        kv("bs_bs_pathloss_exponent", self.bs_bs_pathloss_exponent.to_string());
        kv("shadowing_sigma_db", self.shadowing_sigma_db.to_string());
        kv("bs_tx_power_dbm", self.bs_tx_power_dbm.to_string());
        kv("ue_tx_power_dbm", self.ue_tx_power_dbm.to_string());
        kv("noise_psd_dbm_hz", self.noise_psd_dbm_hz.to_string());
        kv("noise_figure_db", self.noise_figure_db.to_string());
        kv("pure_sir", self.pure_sir.to_string());
        kv("eesm_beta", self.eesm_beta.to_string());
        kv("bler_target", self.bler_target.to_string());
        kv("olla_step_db", self.olla_step_db.to_string());
        kv("decode_margin_sigma_db", self.decode_margin_sigma_db.to_string());
        kv("harq_max_attempts", self.harq_max_attempts.to_string());
        kv("pf_window_tti", self.pf_window_tti.to_string());
        kv("prep_symbols", self.prep_symbols.to_string());
        kv("pdsch_decode_symbols", self.pdsch_decode_symbols.to_string());
        kv("pusch_decode_symbols", self.pusch_decode_symbols.to_string());
        kv("sim_duration_ms", self.sim_duration_ms.to_string());
        kv("warmup_ms", self.warmup_ms.to_string());
        kv("drain_ms", self.drain_ms.to_string());
        kv("seed", self.seed.to_string());
        kv("quantile_targets", join(&self.quantile_targets));
        out
    }
}

/// Parses a scenario document, applying defaults for absent keys.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let mut s = Scenario::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':').filter(|(k, _)| !k.contains(' ')))
            .ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
        s.set(k, v).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                line: idx + 1,
                message,
            },
            other => other,
        })?;
    }
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_gives_reference_defaults() {
        let s = load_scenario("").unwrap();
        assert_eq!(s, Scenario::default());
        assert_eq!(s.cell_count, 21);
        assert_eq!((s.bs_antennas, s.ue_antennas), (8, 2));
        assert_eq!((s.ue_per_cell_dl, s.ue_per_cell_ul), (10, 10));
        assert_eq!((s.payload_dl_bits, s.payload_ul_bits), (400, 400));
        assert_eq!(s.bandwidth_hz, 10e6);
        assert_eq!(s.scs_hz, 30e3);
        assert_eq!(s.carrier_freq_hz, 3.5e9);
        assert_eq!(s.rfc_update_period_ms, 10.0);
        assert_eq!(
            (s.prep_symbols, s.pdsch_decode_symbols, s.pusch_decode_symbols),
            (3.0, 4.5, 5.5)
        );
        assert_eq!(s.slots_per_frame(), 20);
    }

    #[test]
    fn out_of_range_beta_hat_is_rejected() {
        let err = load_scenario("beta_hat = 1.5").unwrap_err();
        match err {
            Error::Validation { field, .. } => assert_eq!(field, "beta_hat"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn overrides_keep_other_defaults() {
        let s = load_scenario("# small cluster\ncell_count = 7\nseed: 42\n").unwrap();
        assert_eq!(s.cell_count, 7);
        assert_eq!(s.seed, 42);
        let mut expected = Scenario::default();
        expected.cell_count = 7;
        expected.seed = 42;
        assert_eq!(s, expected);
    }

    #[test]
    fn malformed_line_is_a_parse_error() {
        assert!(matches!(
            load_scenario("cell_count = 3\nthis is not a pair\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            load_scenario("no_such_key = 3"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn policy_keys() {
        let s = load_scenario("tdd_policy = stdd\nstdd_alpha = 0.35\nstdd_fixed_ratio = 1:1").unwrap();
        assert_eq!(
            s.policy(),
            TddPolicy::StaticTdd {
                alpha: 0.35,
                bias: Direction::Dl,
                fixed: Some(RatioLabel::BALANCED)
            }
        );
        assert!(load_scenario("tdd_policy = chaos").is_err());
    }

    #[test]
    fn offered_load_matches_reference_example() {
        // K=10, f=400 bits, 125 packets/s per direction.
        let s = Scenario::default();
        let (dl, ul) = s.nominal_offered_load(0);
        assert_eq!(dl, 0.5e6);
        assert_eq!(dl + ul, 1e6);
    }

    #[test]
    fn offered_load_and_shares() {
        let s = load_scenario("offered_load_mbps = 3\ncell_dl_shares = 0.75, 0.25").unwrap();
        let (dl0, ul0) = s.nominal_offered_load(0);
        let (dl1, ul1) = s.nominal_offered_load(1);
        assert!((dl0 - 2.25e6).abs() < 1e-6 && (ul0 - 0.75e6).abs() < 1e-6);
        assert!((dl1 - 0.75e6).abs() < 1e-6 && (ul1 - 2.25e6).abs() < 1e-6);
        let (l_dl, _) = s.cell_arrival_rates(2);
        assert!((l_dl - 562.5).abs() < 1e-9);
    }

    #[test]
    fn update_period_must_be_whole_frames() {
        assert!(load_scenario("rfc_update_period_ms = 15").is_err());
        assert_eq!(load_scenario("rfc_update_period_ms = 20").unwrap().slots_per_update(), 40);
    }

    proptest! {
        #[test]
        fn resolved_document_round_trips(
            cells in 1usize..40,
            beta in 0.0f64..=1.0,
            seed in any::<u64>(),
            alpha in 0.0f64..=1.0,
            shares in proptest::collection::vec(0.0f64..=1.0, 0..4),
            policy in 0usize..4,
        ) {
            let mut s = Scenario::default();
            s.cell_count = cells;
            s.beta_hat = beta;
            s.seed = seed;
            s.stdd_alpha = alpha;
            s.cell_dl_shares = shares;
            s.tdd_policy = [PolicyKind::Proposed, PolicyKind::StaticTdd, PolicyKind::DynamicTddCli, PolicyKind::DynamicTddCliFree][policy];
            let back = load_scenario(&s.to_document()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
