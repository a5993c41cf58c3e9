//! Slot-clocked simulation of one cluster under one TDD policy.
//!
//! Per slot: period-boundary coordination, arrival admission, buffer
//! sampling, scheduling of every TTI block of every cell, then evaluation
//! of all transmissions of the slot against each other. Retransmissions
//! become eligible no earlier than 11.5 symbols after the start of the
//! block that failed, so nothing decoded in a slot can be scheduled again
//! within that slot.

use std::collections::VecDeque;
use std::rc::Rc;

use serde::Serialize;

use crate::coordination::{decide_common_rfc, frame_average, traffic_ratio, CoordinationConfig, KaiserWindow, TddPolicy};
use crate::error::{Error, Result};
use crate::frame::{Direction, RfcSet, SlotFormat, Symbol, BLOCK_LEN, SYMBOLS_PER_SLOT};
use crate::mac::{
    account_latency, harq_step, schedule_tti, HarqOutcome, HarqProcess, LatencyRecord, MacConfig,
    NewDataRequest, RetxRequest, SchedulerState, Timing, TtiRequest,
};
use crate::phy::{
    chase_combine, decode, effective_interferer, effective_sinr, fading_matrix, post_sinr, precode, CVector,
    Interferer, InterferenceClass, McsTable, ReceiverMode,
};
use crate::rng::{Purpose, SimRng, StreamFactory};
use crate::scenario::Scenario;
use crate::topology::{build_topology, db_to_linear, linear_to_db, Topology};
use crate::traffic::{ArrivalProcess, Conservation, PacketState, TrafficState};

const EPS_MS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep one coordination row per update period.
    pub coordination_trace: bool,
    /// Keep one SINR row per transmission.
    pub sinr_trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinationRow {
    pub period: u64,
    pub time_ms: f64,
    pub ratios: Vec<Option<f64>>,
    pub theta: Option<f64>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinrRow {
    pub time_ms: f64,
    pub cell: usize,
    pub ue: usize,
    pub direction: &'static str,
    pub flexible: bool,
    pub sinr_db: f64,
    pub mcs: usize,
    pub attempt: u32,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub transmissions: u64,
    pub retransmissions: u64,
    pub first_tx_failures: u64,
    /// Receptions evaluated with cross-link terms in the covariance model.
    pub flexible_invocations: u64,
    /// Symbols on which some cells were set to D and others to U.
    pub mixed_symbols: u64,
    pub regularized: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub scenario: Scenario,
    /// Packets that arrived after warm-up, in id order.
    pub records: Vec<LatencyRecord>,
    /// Packets that arrived after warm-up and were dropped.
    pub dropped: u64,
    pub conservation: Conservation,
    pub counters: Counters,
    /// Delivered payload over the whole run, `[dl, ul]`.
    pub carried_bits: [u64; 2],
    /// Admitted payload over the whole run, `[dl, ul]`.
    pub offered_bits: [u64; 2],
    /// Cell-periods spent in each frame configuration, in set order.
    pub rfc_usage: Vec<(String, u64)>,
    pub trace: Vec<CoordinationRow>,
    pub sinr: Vec<SinrRow>,
}

impl RunResult {
    pub fn latencies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.total_ms).collect()
    }

    pub fn latencies_for(&self, dir: Direction) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.direction == dir)
            .map(|r| r.total_ms)
            .collect()
    }

    pub fn drop_rate(&self) -> f64 {
        let n = self.records.len() as u64 + self.dropped;
        if n == 0 {
            0.0
        } else {
            self.dropped as f64 / n as f64
        }
    }
}

/// Serving link of one UE for one TTI, per fading subband.
struct ServingChannel {
    vectors: Vec<CVector>,
    power: Vec<f64>,
}

struct Tx {
    cell: usize,
    ue: usize,
    dir: Direction,
    start_sym: usize,
    tti_start: f64,
    prb_start: usize,
    n_prb: usize,
    mcs: usize,
    bits: u32,
    packet: u64,
    channel: Rc<ServingChannel>,
}

impl Tx {
    fn prb_end(&self) -> usize {
        self.prb_start + self.n_prb
    }

    fn overlaps_in_time(&self, other: &Tx) -> bool {
        self.start_sym < other.start_sym + BLOCK_LEN && other.start_sym < self.start_sym + BLOCK_LEN
    }

    fn overlaps_in_freq(&self, other: &Tx) -> bool {
        self.prb_start < other.prb_end() && other.prb_start < self.prb_end()
    }
}

struct Radio {
    bs_prb_mw: f64,
    ue_prb_mw: f64,
    noise_mw: f64,
    bs_antennas: usize,
    ue_antennas: usize,
    subbands: usize,
    prbs: usize,
}

impl Radio {
    fn new(s: &Scenario) -> Self {
        let prb_hz = 12.0 * s.scs_hz;
        let noise_dbm = s.noise_psd_dbm_hz + 10.0 * prb_hz.log10() + s.noise_figure_db;
        Radio {
            bs_prb_mw: db_to_linear(s.bs_tx_power_dbm) / s.prb_count as f64,
            ue_prb_mw: db_to_linear(s.ue_tx_power_dbm) / s.prb_count as f64,
            noise_mw: if s.pure_sir { 0.0 } else { db_to_linear(noise_dbm) },
            bs_antennas: s.bs_antennas,
            ue_antennas: s.ue_antennas,
            subbands: s.fading_subbands,
            prbs: s.prb_count,
        }
    }

    fn tx_power(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Dl => self.bs_prb_mw,
            Direction::Ul => self.ue_prb_mw,
        }
    }

    fn rx_antennas(&self, dir: Direction) -> usize {
        match dir {
            Direction::Dl => self.ue_antennas,
            Direction::Ul => self.bs_antennas,
        }
    }

    fn subband(&self, prb: usize) -> usize {
        prb * self.subbands / self.prbs
    }

    fn draw_serving(&self, topo: &Topology, cell: usize, ue: usize, dir: Direction, rng: &mut SimRng) -> Result<ServingChannel> {
        let g = topo.gain_bs_ue(cell, ue) * self.tx_power(dir);
        let (rx, tx) = match dir {
            Direction::Dl => (self.ue_antennas, self.bs_antennas),
            Direction::Ul => (self.bs_antennas, self.ue_antennas),
        };
        let mut vectors = Vec::with_capacity(self.subbands);
        let mut power = Vec::with_capacity(self.subbands);
        for _ in 0..self.subbands {
            let h = fading_matrix(rx, tx, g, rng);
            let v = precode(&h)?;
            let eff = h * v;
            power.push(eff.norm_squared());
            vectors.push(eff);
        }
        Ok(ServingChannel { vectors, power })
    }

    /// Received power scale and class of `intf` as seen by `victim`'s receiver.
    fn coupling(&self, topo: &Topology, victim: &Tx, intf: &Tx) -> (f64, InterferenceClass) {
        use Direction::*;
        match (victim.dir, intf.dir) {
            (Dl, Dl) => (topo.gain_bs_ue(intf.cell, victim.ue) * self.bs_prb_mw, InterferenceClass::SameLink),
            (Dl, Ul) => (topo.gain_ue_ue(intf.ue, victim.ue) * self.ue_prb_mw, InterferenceClass::CrossLink),
            (Ul, Ul) => (topo.gain_bs_ue(victim.cell, intf.ue) * self.ue_prb_mw, InterferenceClass::SameLink),
            (Ul, Dl) => (topo.gain_bs_bs(intf.cell, victim.cell) * self.bs_prb_mw, InterferenceClass::CrossLink),
        }
    }
}

struct Evaluation {
    sinr: f64,
    interference_db: f64,
    flexible: bool,
    regularized: bool,
}

fn evaluate(
    i: usize,
    txs: &[Tx],
    formats: &[&SlotFormat],
    aligned: bool,
    cli_free: bool,
    radio: &Radio,
    topo: &Topology,
    eesm_beta: f64,
    rng: &mut SimRng,
) -> Result<Evaluation> {
    let v = &txs[i];
    let opposite = match v.dir.opposite() {
        Direction::Dl => Symbol::D,
        Direction::Ul => Symbol::U,
    };
    let flexible = !aligned
        && formats.iter().enumerate().any(|(c, f)| {
            c != v.cell && f.symbols()[v.start_sym..v.start_sym + BLOCK_LEN].contains(&opposite)
        });
    let mode = if flexible { ReceiverMode::Flexible } else { ReceiverMode::Aligned };

    let mut ints: Vec<(usize, f64, InterferenceClass)> = Vec::new();
    for (j, t) in txs.iter().enumerate() {
        if t.cell == v.cell || !v.overlaps_in_time(t) || !v.overlaps_in_freq(t) {
            continue;
        }
        let (g, class) = radio.coupling(topo, v, t);
        if cli_free && class == InterferenceClass::CrossLink {
            continue;
        }
        ints.push((j, g, class));
    }

    let rx = radio.rx_antennas(v.dir);
    let mut cache: Vec<Option<CVector>> = vec![None; ints.len() * radio.subbands];
    let mut gammas = Vec::with_capacity(v.n_prb);
    let mut inr = 0.0;
    let mut regularized = false;
    let mut prev: Option<(usize, Vec<usize>, f64)> = None;
    for prb in v.prb_start..v.prb_end() {
        let sb = radio.subband(prb);
        let active: Vec<usize> = ints
            .iter()
            .enumerate()
            .filter(|(_, (j, _, _))| txs[*j].prb_start <= prb && prb < txs[*j].prb_end())
            .map(|(k, _)| k)
            .collect();
        let gamma = match &prev {
            Some((psb, pact, g)) if *psb == sb && *pact == active => *g,
            _ => {
                let list: Vec<Interferer> = active
                    .iter()
                    .map(|&k| {
                        let slot = &mut cache[k * radio.subbands + sb];
                        let vector = slot
                            .get_or_insert_with(|| effective_interferer(rx, ints[k].1, rng))
                            .clone();
                        Interferer { vector, class: ints[k].2 }
                    })
                    .collect();
                let out = post_sinr(&v.channel.vectors[sb], &list, mode, radio.noise_mw)?;
                regularized |= out.regularized;
                out.sinr
            }
        };
        prev = Some((sb, active, gamma));
        inr += v.channel.power[sb] / gamma;
        gammas.push(gamma);
    }
    Ok(Evaluation {
        sinr: effective_sinr(&gammas, eesm_beta)?,
        interference_db: linear_to_db(inr / gammas.len() as f64),
        flexible,
        regularized,
    })
}

fn with_context(e: Error, slot: u64, rho: usize, cell: usize) -> Error {
    Error::Run {
        frame: slot / rho as u64,
        slot: slot % rho as u64,
        cell,
        source: Box::new(e),
    }
}

/// Runs one scenario to completion. Deterministic in `s.seed`.
pub fn run(s: &Scenario, opts: RunOptions) -> Result<RunResult> {
    s.validate()?;
    let rho = s.slots_per_frame();
    let set = RfcSet::new(&s.rfc_set, rho)?;
    let streams = StreamFactory::new(s.seed);
    let topo = build_topology(s, &mut streams.stream(Purpose::Topology, 0));
    let cells = topo.cell_count();
    let radio = Radio::new(s);
    let table = McsTable::new(BLOCK_LEN, s.dmrs_overhead);
    let timing = Timing::new(s.symbol_ms(), s.prep_symbols, s.pdsch_decode_symbols, s.pusch_decode_symbols);
    let slot_ms = s.slot_ms();
    let sym_ms = s.symbol_ms();
    let policy = s.policy();
    policy.validate()?;
    let cli_free = policy.suppresses_cross_link();
    let coord = CoordinationConfig {
        window: KaiserWindow::for_cluster(cells, s.beta_hat, s.beta_max, s.symmetric_window),
        empirical_balance_point: s.empirical_balance_point,
    };
    let offered_fraction = s.cluster_offered_dl_fraction();

    let ue_specs: Vec<(usize, Direction)> = topo.ues.iter().map(|u| (u.serving_cell, u.direction)).collect();
    let mut traffic = TrafficState::new(cells, &ue_specs);
    let mut arrival_rngs: Vec<SimRng> = (0..topo.ue_count())
        .map(|u| streams.stream(Purpose::Arrivals, u as u64))
        .collect();
    let mut arrivals: Vec<ArrivalProcess> = topo
        .ues
        .iter()
        .zip(arrival_rngs.iter_mut())
        .map(|(u, r)| {
            let (dl, ul) = s.cell_arrival_rates(u.serving_cell);
            let rate = match u.direction {
                Direction::Dl => dl,
                Direction::Ul => ul,
            };
            ArrivalProcess::new(rate, 0.0, r)
        })
        .collect();
    let payload = |d: Direction| match d {
        Direction::Dl => s.payload_dl_bits,
        Direction::Ul => s.payload_ul_bits,
    };

    let mac_cfg = MacConfig {
        prb_count: s.prb_count,
        pf_window_tti: s.pf_window_tti,
        olla_step_db: s.olla_step_db,
        bler_target: s.bler_target,
        harq_max_attempts: s.harq_max_attempts,
        eesm_beta: s.eesm_beta,
    };
    let initial_inr_db = if s.pure_sir { -130.0 } else { linear_to_db(radio.noise_mw) };
    let mut sched = SchedulerState::new(topo.ue_count(), mac_cfg, initial_inr_db);

    let no_reports = vec![None; cells];
    let mut current = match policy {
        TddPolicy::StaticTdd { .. } => decide_common_rfc(&no_reports, &policy, &set, &coord, offered_fraction)?.per_cell,
        _ => vec![set.default_index(); cells],
    };
    let spu = s.slots_per_update();
    let mut samples: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(spu); cells];
    let mut in_transit: VecDeque<(f64, Vec<Option<f64>>)> = VecDeque::new();
    let mut usage = vec![0u64; set.configs().len()];

    let mut result = RunResult {
        scenario: s.clone(),
        records: Vec::new(),
        dropped: 0,
        conservation: Conservation::default(),
        counters: Counters::default(),
        carried_bits: [0, 0],
        offered_bits: [0, 0],
        rfc_usage: Vec::new(),
        trace: Vec::new(),
        sinr: Vec::new(),
    };
    let mut record_period = |period: u64, t: f64, ratios: Vec<Option<f64>>, theta: Option<f64>, cur: &[usize], res: &mut RunResult| {
        for &i in cur {
            usage[i] += 1;
        }
        if opts.coordination_trace {
            res.trace.push(CoordinationRow {
                period,
                time_ms: t,
                ratios,
                theta,
                labels: cur.iter().map(|&i| set.get(i).label.to_string()).collect(),
            });
        }
    };
    record_period(0, 0.0, no_reports.clone(), None, &current, &mut result);

    let end_ms = s.sim_duration_ms + s.drain_ms;
    let total_slots = (end_ms / slot_ms).ceil() as u64;
    let di = |d: Direction| match d {
        Direction::Dl => 0,
        Direction::Ul => 1,
    };

    for slot in 0..total_slots {
        let t0 = slot as f64 * slot_ms;

        if slot > 0 && slot % spu as u64 == 0 {
            let period = slot / spu as u64;
            let reports: Vec<Option<f64>> = samples.iter().map(|v| frame_average(v)).collect();
            samples.iter_mut().for_each(Vec::clear);
            in_transit.push_back((t0 + s.xn_delay_ms, reports));
            let mut latest = None;
            while in_transit.front().is_some_and(|(t, _)| *t <= t0 + EPS_MS) {
                latest = in_transit.pop_front().map(|r| r.1);
            }
            let mut theta = None;
            let mut shown = no_reports.clone();
            if let Some(rep) = latest {
                if !matches!(policy, TddPolicy::StaticTdd { .. }) {
                    let d = decide_common_rfc(&rep, &policy, &set, &coord, offered_fraction)
                        .map_err(|e| with_context(e, slot, rho, 0))?;
                    current = d.per_cell;
                    theta = d.theta;
                }
                shown = rep;
            }
            record_period(period, t0, shown, theta, &current, &mut result);
        }

        let admit_until = (t0 + slot_ms).min(s.sim_duration_ms);
        for (u, proc) in arrivals.iter_mut().enumerate() {
            while let Some(t) = proc.next_before(admit_until, &mut arrival_rngs[u]) {
                let d = topo.ues[u].direction;
                traffic.push_arrival(u, t, payload(d), timing.prep_ms);
                result.offered_bits[di(d)] += payload(d) as u64;
            }
        }

        for (c, buf) in samples.iter_mut().enumerate() {
            let (z_dl, z_ul) = traffic.sample_buffered(c, t0, s.ul_report_delay_ms);
            buf.push(traffic_ratio(z_dl, z_ul));
        }

        let slot_in_frame = (slot % rho as u64) as usize;
        let formats: Vec<&SlotFormat> = current.iter().map(|&i| set.get(i).slot(slot_in_frame)).collect();
        let aligned = formats.iter().all(|f| *f == formats[0]);
        if !aligned {
            result.counters.mixed_symbols += (0..SYMBOLS_PER_SLOT)
                .filter(|&k| {
                    let has = |x: Symbol| formats.iter().any(|f| f.symbols()[k] == x);
                    has(Symbol::D) && has(Symbol::U)
                })
                .count() as u64;
        }

        let mut fading = streams.stream(Purpose::Fading, slot);
        let mut txs: Vec<Tx> = Vec::new();
        for (c, fmt) in formats.iter().enumerate() {
            for block in fmt.blocks() {
                let tti_start = t0 + block.start as f64 * sym_ms;
                let dir = block.direction;
                let members = topo.served_ues(c, dir);
                let mut retx = Vec::new();
                let mut new_data = Vec::new();
                let mut channels: Vec<(usize, Rc<ServingChannel>)> = Vec::new();
                for &ue in members {
                    let mut fresh = Vec::new();
                    let mut has_retx = false;
                    for p in traffic.queue(ue) {
                        match &p.state {
                            PacketState::AwaitingRetx(h) if h.eligible_ms <= tti_start + EPS_MS => {
                                retx.push((h.eligible_ms, RetxRequest { ue, packet: p.id, n_prb: h.n_prb, mcs: h.mcs, bits: h.bits }));
                                has_retx = true;
                            }
                            PacketState::Waiting if p.ready_ms <= tti_start + EPS_MS => {
                                fresh.push((p.id, p.remaining_bits));
                            }
                            _ => {}
                        }
                    }
                    if fresh.is_empty() && !has_retx {
                        continue;
                    }
                    let ch = Rc::new(
                        radio
                            .draw_serving(&topo, c, ue, dir, &mut fading)
                            .map_err(|e| with_context(e, slot, rho, c))?,
                    );
                    if !fresh.is_empty() {
                        let mcs = sched.estimate_mcs(ue, &ch.power, &table);
                        new_data.push(NewDataRequest { ue, mcs, packets: fresh });
                    }
                    channels.push((ue, ch));
                }
                if channels.is_empty() && members.is_empty() {
                    continue;
                }
                retx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.packet.cmp(&b.1.packet)));
                let req = TtiRequest {
                    members,
                    retx: retx.into_iter().map(|r| r.1).collect(),
                    new_data,
                };
                for a in schedule_tti(&mut sched, &req, &table) {
                    let p = traffic
                        .packet_mut(a.ue, a.packet)
                        .ok_or_else(|| with_context(Error::Contract("scheduled packet vanished".into()), slot, rho, c))?;
                    let process = match &p.state {
                        PacketState::AwaitingRetx(h) => HarqProcess { attempts: h.attempts + 1, ..h.clone() },
                        _ => HarqProcess {
                            attempts: 1,
                            sinr_sum: 0.0,
                            mcs: a.mcs,
                            n_prb: a.n_prb,
                            bits: a.bits,
                            eligible_ms: tti_start,
                        },
                    };
                    p.first_tx_ms.get_or_insert(tti_start);
                    p.harq_attempts = process.attempts;
                    p.state = PacketState::InFlight(process);
                    let channel = channels
                        .iter()
                        .find(|(u, _)| *u == a.ue)
                        .map(|(_, ch)| Rc::clone(ch))
                        .expect("channel drawn for every candidate");
                    result.counters.transmissions += 1;
                    if a.retransmission {
                        result.counters.retransmissions += 1;
                    }
                    txs.push(Tx {
                        cell: c,
                        ue: a.ue,
                        dir,
                        start_sym: block.start,
                        tti_start,
                        prb_start: a.prb_start,
                        n_prb: a.n_prb,
                        mcs: a.mcs,
                        bits: a.bits,
                        packet: a.packet,
                        channel,
                    });
                }
            }
        }

        let mut evals = Vec::with_capacity(txs.len());
        for i in 0..txs.len() {
            let e = evaluate(i, &txs, &formats, aligned, cli_free, &radio, &topo, s.eesm_beta, &mut fading)
                .map_err(|e| with_context(e, slot, rho, txs[i].cell))?;
            if e.flexible {
                result.counters.flexible_invocations += 1;
            }
            if e.regularized {
                result.counters.regularized += 1;
            }
            evals.push(e);
        }

        let mut decoding = streams.stream(Purpose::Decoding, slot);
        for (tx, ev) in txs.iter().zip(&evals) {
            let ctx = |e| with_context(e, slot, rho, tx.cell);
            let tx_end = tx.tti_start + timing.tti_ms();
            let p = traffic
                .packet_mut(tx.ue, tx.packet)
                .ok_or_else(|| ctx(Error::Contract("transmitted packet vanished".into())))?;
            let PacketState::InFlight(mut process) = p.state.clone() else {
                return Err(ctx(Error::Contract("decoded packet was not in flight".into())));
            };
            process.sinr_sum = chase_combine(process.sinr_sum, ev.sinr);
            let ok = decode(process.sinr_sum, table.threshold_db(process.mcs), s.decode_margin_sigma_db, &mut decoding);
            p.last_tx_end_ms = Some(tx_end);
            if process.attempts == 1 {
                sched.record_first_tx(tx.ue, ok);
                if !ok {
                    result.counters.first_tx_failures += 1;
                }
            }
            sched.record_interference(tx.ue, ev.interference_db);
            if opts.sinr_trace {
                result.sinr.push(SinrRow {
                    time_ms: tx.tti_start,
                    cell: tx.cell,
                    ue: tx.ue,
                    direction: tx.dir.as_str(),
                    flexible: ev.flexible,
                    sinr_db: linear_to_db(ev.sinr),
                    mcs: tx.mcs,
                    attempt: process.attempts,
                    success: ok,
                });
            }
            match harq_step(&process, ok, tx_end, tx.dir, &timing, s.harq_max_attempts) {
                HarqOutcome::Delivered { completion_ms } => {
                    result.carried_bits[di(tx.dir)] += tx.bits as u64;
                    match traffic.deliver(tx.ue, tx.packet, tx.bits, completion_ms) {
                        Some(done) => {
                            if done.arrival_ms >= s.warmup_ms {
                                result.records.push(account_latency(&done, &timing).map_err(ctx)?);
                            }
                        }
                        None => {
                            let p = traffic
                                .packet_mut(tx.ue, tx.packet)
                                .ok_or_else(|| ctx(Error::Contract("segmented packet vanished".into())))?;
                            p.state = PacketState::Waiting;
                            p.ready_ms = completion_ms + timing.prep_ms;
                            p.harq_attempts = 0;
                        }
                    }
                }
                HarqOutcome::Retransmit(next) => p.state = PacketState::AwaitingRetx(next),
                HarqOutcome::Dropped => {
                    if let Some(lost) = traffic.drop_packet(tx.ue, tx.packet) {
                        if lost.arrival_ms >= s.warmup_ms {
                            result.dropped += 1;
                        }
                    }
                }
            }
        }
    }

    result.conservation = traffic.conservation();
    if !result.conservation.holds() {
        return Err(Error::Contract(format!("packet conservation violated: {:?}", result.conservation)));
    }
    result.records.sort_by_key(|r| r.packet_id);
    result.rfc_usage = set
        .configs()
        .iter()
        .zip(usage)
        .map(|(c, n)| (c.label.to_string(), n))
        .collect();
    Ok(result)
}
