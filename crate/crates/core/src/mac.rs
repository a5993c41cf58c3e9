//! Proportional-fair OFDMA scheduling, asynchronous HARQ and latency
//! accounting.

use crate::error::{Error, Result};
use crate::frame::{Direction, BLOCK_LEN};
use crate::phy::{effective_sinr, McsTable};
use crate::topology::linear_to_db;
use crate::traffic::Packet;

const PF_FLOOR: f64 = 1e-6;
const INTERFERENCE_SMOOTHING: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacConfig {
    pub prb_count: usize,
    pub pf_window_tti: f64,
    pub olla_step_db: f64,
    pub bler_target: f64,
    pub harq_max_attempts: u32,
    pub eesm_beta: f64,
}

/// Processing delays converted to milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub symbol_ms: f64,
    pub prep_ms: f64,
    pub pdsch_decode_ms: f64,
    pub pusch_decode_ms: f64,
}

impl Timing {
    pub fn new(symbol_ms: f64, prep: f64, pdsch: f64, pusch: f64) -> Self {
        Timing {
            symbol_ms,
            prep_ms: prep * symbol_ms,
            pdsch_decode_ms: pdsch * symbol_ms,
            pusch_decode_ms: pusch * symbol_ms,
        }
    }

    pub fn decode_ms(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Dl => self.pdsch_decode_ms,
            Direction::Ul => self.pusch_decode_ms,
        }
    }

    pub fn tti_ms(&self) -> f64 {
        BLOCK_LEN as f64 * self.symbol_ms
    }
}

/// One transport block's HARQ state.
#[derive(Debug, Clone, PartialEq)]
pub struct HarqProcess {
    /// Transmissions so far, including the one on air.
    pub attempts: u32,
    pub sinr_sum: f64,
    pub mcs: usize,
    pub n_prb: usize,
    pub bits: u32,
    /// Earliest retransmission grant time.
    pub eligible_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HarqOutcome {
    Delivered { completion_ms: f64 },
    Retransmit(HarqProcess),
    Dropped,
}

/// Advances a process after decoding the transmission that ended at
/// `tx_end_ms`.
pub fn harq_step(
    process: &HarqProcess,
    success: bool,
    tx_end_ms: f64,
    dir: Direction,
    timing: &Timing,
    max_attempts: u32,
) -> HarqOutcome {
    let decoded_ms = tx_end_ms + timing.decode_ms(dir);
    if success {
        HarqOutcome::Delivered {
            completion_ms: decoded_ms,
        }
    } else if process.attempts >= max_attempts {
        HarqOutcome::Dropped
    } else {
        HarqOutcome::Retransmit(HarqProcess {
            eligible_ms: decoded_ms + timing.prep_ms,
            ..process.clone()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyRecord {
    pub packet_id: u64,
    pub direction: Direction,
    pub cell: usize,
    pub arrival_ms: f64,
    pub total_ms: f64,
    pub queuing_ms: f64,
    pub transmission_ms: f64,
    pub harq_ms: f64,
    pub processing_ms: f64,
}

pub fn account_latency(packet: &Packet, timing: &Timing) -> Result<LatencyRecord> {
    let (Some(first), Some(last_end), Some(done)) =
        (packet.first_tx_ms, packet.last_tx_end_ms, packet.completion_ms)
    else {
        return Err(Error::Contract(format!("packet {} is not complete", packet.id)));
    };
    let air = timing.tti_ms();
    let decode = timing.decode_ms(packet.direction);
    Ok(LatencyRecord {
        packet_id: packet.id,
        direction: packet.direction,
        cell: packet.cell,
        arrival_ms: packet.arrival_ms,
        total_ms: done - packet.arrival_ms,
        queuing_ms: first - packet.arrival_ms - timing.prep_ms,
        transmission_ms: air,
        harq_ms: last_end - (first + air),
        processing_ms: timing.prep_ms + decode,
    })
}

/// Per-UE scheduler memory.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    cfg: MacConfig,
    pf_avg: Vec<f64>,
    olla_db: Vec<f64>,
    interference_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetxRequest {
    pub ue: usize,
    pub packet: u64,
    pub n_prb: usize,
    pub mcs: usize,
    pub bits: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewDataRequest {
    pub ue: usize,
    pub mcs: usize,
    /// Eligible packets in FIFO order with their remaining bits.
    pub packets: Vec<(u64, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtiRequest<'a> {
    /// Every UE of this cell and direction; their PF averages decay.
    pub members: &'a [usize],
    pub retx: Vec<RetxRequest>,
    pub new_data: Vec<NewDataRequest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub ue: usize,
    pub packet: u64,
    pub prb_start: usize,
    pub n_prb: usize,
    pub mcs: usize,
    pub bits: u32,
    pub retransmission: bool,
}

impl SchedulerState {
    pub fn new(ues: usize, cfg: MacConfig, initial_interference_db: f64) -> Self {
        SchedulerState {
            cfg,
            pf_avg: vec![PF_FLOOR; ues],
            olla_db: vec![0.0; ues],
            interference_db: vec![initial_interference_db; ues],
        }
    }

    pub fn config(&self) -> &MacConfig {
        &self.cfg
    }

    pub fn pf_average(&self, ue: usize) -> f64 {
        self.pf_avg[ue]
    }

    pub fn olla_offset_db(&self, ue: usize) -> f64 {
        self.olla_db[ue]
    }

    pub fn interference_db(&self, ue: usize) -> f64 {
        self.interference_db[ue]
    }

    /// MCS for a new transmission given the per-subband received signal
    /// power of the current channel.
    pub fn estimate_mcs(&self, ue: usize, signal_power: &[f64], table: &McsTable) -> usize {
        let inr = crate::topology::db_to_linear(self.interference_db[ue]);
        let est: Vec<f64> = signal_power.iter().map(|s| s / inr).collect();
        let eff = effective_sinr(&est, self.cfg.eesm_beta).unwrap_or(0.0);
        table.select(linear_to_db(eff) - self.olla_db[ue])
    }

    /// Outer-loop update from a first-transmission outcome.
    pub fn record_first_tx(&mut self, ue: usize, ack: bool) {
        let step = self.cfg.olla_step_db;
        let t = self.cfg.bler_target;
        if ack {
            self.olla_db[ue] -= step;
        } else {
            self.olla_db[ue] += step * (1.0 - t) / t;
        }
    }

    /// Smooths the interference-plus-noise level seen by `ue`.
    pub fn record_interference(&mut self, ue: usize, measured_db: f64) {
        if measured_db.is_finite() {
            let cur = &mut self.interference_db[ue];
            *cur += INTERFERENCE_SMOOTHING * (measured_db - *cur);
        }
    }
}

/// Allocates one TTI of one cell in one direction.
///
/// Pending retransmissions go first with their original size. The
/// remaining PRBs go to UEs in decreasing PF metric order, each UE's
/// packets served FIFO; a packet that does not fit is segmented into the
/// PRBs left.
pub fn schedule_tti(state: &mut SchedulerState, req: &TtiRequest, table: &McsTable) -> Vec<Allocation> {
    let prbs = state.cfg.prb_count;
    let mut next_free = 0;
    let mut out = Vec::new();

    for r in &req.retx {
        if next_free + r.n_prb <= prbs {
            out.push(Allocation {
                ue: r.ue,
                packet: r.packet,
                prb_start: next_free,
                n_prb: r.n_prb,
                mcs: r.mcs,
                bits: r.bits,
                retransmission: true,
            });
            next_free += r.n_prb;
        }
    }

    let mut order: Vec<(f64, &NewDataRequest)> = req
        .new_data
        .iter()
        .filter(|n| !n.packets.is_empty())
        .map(|n| (table.bits_per_prb(n.mcs) as f64 / state.pf_avg[n.ue], n))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.ue.cmp(&b.1.ue)));

    'ues: for (_, n) in order {
        let bpp = table.bits_per_prb(n.mcs).max(1);
        for &(packet, remaining) in &n.packets {
            let free = prbs - next_free;
            if free == 0 {
                break 'ues;
            }
            let need = remaining.div_ceil(bpp) as usize;
            let n_prb = need.min(free);
            out.push(Allocation {
                ue: n.ue,
                packet,
                prb_start: next_free,
                n_prb,
                mcs: n.mcs,
                bits: remaining.min(n_prb as u32 * bpp),
                retransmission: false,
            });
            next_free += n_prb;
        }
    }

    let alpha = 1.0 / state.cfg.pf_window_tti;
    for &ue in req.members {
        let served: u32 = out.iter().filter(|a| a.ue == ue).map(|a| a.bits).sum();
        let avg = &mut state.pf_avg[ue];
        *avg = ((1.0 - alpha) * *avg + alpha * served as f64).max(PF_FLOOR);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::PacketState;

    fn cfg() -> MacConfig {
        MacConfig {
            prb_count: 24,
            pf_window_tti: 100.0,
            olla_step_db: 0.05,
            bler_target: 0.1,
            harq_max_attempts: 4,
            eesm_beta: 1.0,
        }
    }

    fn timing() -> Timing {
        Timing::new(0.5 / 14.0, 3.0, 4.5, 5.5)
    }

    fn table() -> McsTable {
        McsTable::new(4, 0.25)
    }

    fn packet(dir: Direction, arrival: f64) -> Packet {
        Packet {
            id: 7,
            direction: dir,
            ue: 0,
            cell: 0,
            size_bits: 400,
            remaining_bits: 0,
            arrival_ms: arrival,
            ready_ms: arrival + timing().prep_ms,
            first_tx_ms: None,
            last_tx_end_ms: None,
            completion_ms: None,
            harq_attempts: 0,
            state: PacketState::Waiting,
        }
    }

    #[test]
    fn single_ue_gets_exactly_what_it_needs() {
        let mut st = SchedulerState::new(1, cfg(), -100.0);
        let req = TtiRequest {
            members: &[0],
            retx: vec![],
            new_data: vec![NewDataRequest { ue: 0, mcs: 6, packets: vec![(1, 400)] }],
        };
        let a = schedule_tti(&mut st, &req, &table());
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].n_prb, 6);
        assert_eq!(a[0].bits, 400);
        assert_eq!(a[0].prb_start, 0);
    }

    #[test]
    fn empty_request_yields_nothing() {
        let mut st = SchedulerState::new(2, cfg(), -100.0);
        let req = TtiRequest { members: &[0, 1], retx: vec![], new_data: vec![] };
        assert!(schedule_tti(&mut st, &req, &table()).is_empty());
    }

    #[test]
    fn segmentation_when_prbs_run_short() {
        let mut st = SchedulerState::new(1, cfg(), -100.0);
        let req = TtiRequest {
            members: &[0],
            retx: vec![],
            new_data: vec![NewDataRequest { ue: 0, mcs: 0, packets: vec![(1, 400)] }],
        };
        let a = schedule_tti(&mut st, &req, &table());
        assert_eq!(a[0].n_prb, 24);
        assert_eq!(a[0].bits, 24 * 9);
    }

    #[test]
    fn pf_shares_evenly() {
        let mut st = SchedulerState::new(2, cfg(), -100.0);
        let mut prbs = [0usize; 2];
        for _ in 0..10_000 {
            let req = TtiRequest {
                members: &[0, 1],
                retx: vec![],
                new_data: (0..2)
                    .map(|ue| NewDataRequest { ue, mcs: 8, packets: vec![(ue as u64, 1_000_000)] })
                    .collect(),
            };
            for a in schedule_tti(&mut st, &req, &table()) {
                prbs[a.ue] += a.n_prb;
            }
        }
        let share = prbs[0] as f64 / (prbs[0] + prbs[1]) as f64;
        assert!((share - 0.5).abs() < 0.03, "{share}");
    }

    #[test]
    fn retransmission_has_priority() {
        let mut st = SchedulerState::new(2, cfg(), -100.0);
        let req = TtiRequest {
            members: &[0, 1],
            retx: vec![RetxRequest { ue: 1, packet: 9, n_prb: 24, mcs: 0, bits: 216 }],
            new_data: vec![NewDataRequest { ue: 0, mcs: 0, packets: vec![(3, 400)] }],
        };
        let a = schedule_tti(&mut st, &req, &table());
        assert_eq!(a.len(), 1);
        assert!(a[0].retransmission && a[0].packet == 9);
    }

    #[test]
    fn olla_converges_to_target() {
        let mut st = SchedulerState::new(1, cfg(), 0.0);
        st.record_first_tx(0, false);
        assert!((st.olla_offset_db(0) - 0.45).abs() < 1e-12);
        for _ in 0..9 {
            st.record_first_tx(0, true);
        }
        assert!(st.olla_offset_db(0).abs() < 1e-12);
    }

    #[test]
    fn immediate_success_latency() {
        let t = timing();
        let mut p = packet(Direction::Dl, 1.0);
        // Arrives so that preparation ends exactly at a block start.
        let start = p.ready_ms;
        p.first_tx_ms = Some(start);
        p.last_tx_end_ms = Some(start + t.tti_ms());
        let proc = HarqProcess { attempts: 1, sinr_sum: 10.0, mcs: 6, n_prb: 6, bits: 400, eligible_ms: 0.0 };
        let HarqOutcome::Delivered { completion_ms } =
            harq_step(&proc, true, start + t.tti_ms(), Direction::Dl, &t, 4)
        else {
            panic!("expected delivery")
        };
        p.completion_ms = Some(completion_ms);
        let r = account_latency(&p, &t).unwrap();
        let expected = 11.5 * 0.5 / 14.0;
        assert!((r.total_ms - expected).abs() < 1e-12);
        assert!((r.total_ms - 0.41).abs() < 0.005);
        assert_eq!(r.harq_ms, 0.0);
        assert!(r.queuing_ms.abs() < 1e-12);
        let sum = r.queuing_ms + r.transmission_ms + r.harq_ms + r.processing_ms;
        assert!((sum - r.total_ms).abs() < 1e-9);
    }

    fn block_starts(label: crate::frame::RatioLabel, dir: Direction) -> Vec<usize> {
        let rfc = crate::frame::build_rfc(label, 20).unwrap();
        rfc.slots
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                s.blocks()
                    .iter()
                    .filter(|b| b.direction == dir)
                    .map(move |b| i * 14 + b.start)
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn failure_then_success_timeline() {
        // First DL block of a balanced frame fails; the retransmission goes
        // out in the first DL block starting at or after tx end + decode +
        // preparation.
        let t = timing();
        let sym = t.symbol_ms;
        let dl = block_starts(crate::frame::RatioLabel::BALANCED, Direction::Dl);
        let first = dl[0] as f64 * sym;
        let proc = HarqProcess { attempts: 1, sinr_sum: 0.1, mcs: 6, n_prb: 6, bits: 400, eligible_ms: 0.0 };
        let HarqOutcome::Retransmit(p2) = harq_step(&proc, false, first + 4.0 * sym, Direction::Dl, &t, 4) else {
            panic!("expected retransmission")
        };
        assert!((p2.eligible_ms - first - 11.5 * sym).abs() < 1e-12);
        let retx_sym = *dl.iter().find(|&&s| s as f64 * sym >= p2.eligible_ms - 1e-12).unwrap();
        let retx_start = retx_sym as f64 * sym;
        let retx_end = retx_start + 4.0 * sym;
        let HarqOutcome::Delivered { completion_ms } = harq_step(
            &HarqProcess { attempts: 2, ..p2 },
            true,
            retx_end,
            Direction::Dl,
            &t,
            4,
        ) else {
            panic!("expected delivery")
        };
        let mut p = packet(Direction::Dl, first - t.prep_ms);
        p.first_tx_ms = Some(first);
        p.last_tx_end_ms = Some(retx_end);
        p.completion_ms = Some(completion_ms);
        let r = account_latency(&p, &t).unwrap();
        assert!((r.harq_ms - (retx_sym - dl[0]) as f64 * sym).abs() < 1e-12);
        assert!(r.harq_ms >= 4.0 * sym + t.pdsch_decode_ms + t.prep_ms);
        let sum = r.queuing_ms + r.transmission_ms + r.harq_ms + r.processing_ms;
        assert!((sum - r.total_ms).abs() < 1e-9);
    }

    #[test]
    fn drop_after_max_attempts() {
        let t = timing();
        let proc = HarqProcess { attempts: 4, sinr_sum: 0.1, mcs: 0, n_prb: 1, bits: 9, eligible_ms: 0.0 };
        assert_eq!(harq_step(&proc, false, 1.0, Direction::Ul, &t, 4), HarqOutcome::Dropped);
        let p = packet(Direction::Ul, 0.0);
        assert!(matches!(account_latency(&p, &t), Err(Error::Contract(_))));
    }

    #[test]
    fn ul_wait_for_next_uplink_block() {
        // Under 4:1 the frame has 48 DL and 12 UL blocks. A UL packet that
        // becomes ready just after the last UL block start waits for the
        // first UL block of the next frame; the pattern walk gives the
        // exact queuing delay.
        let t = timing();
        let ul_starts = block_starts(crate::frame::RatioLabel { dl: 4, ul: 1 }, Direction::Ul);
        let last = *ul_starts.last().unwrap();
        let ready = (last as f64 + 0.5) * t.symbol_ms;
        let next = (ul_starts[0] + 280) as f64 * t.symbol_ms;
        let mut p = packet(Direction::Ul, ready - t.prep_ms);
        p.first_tx_ms = Some(next);
        p.last_tx_end_ms = Some(next + t.tti_ms());
        p.completion_ms = Some(next + t.tti_ms() + t.pusch_decode_ms);
        let r = account_latency(&p, &t).unwrap();
        assert!((r.queuing_ms - (next - ready)).abs() < 1e-12);
        assert!(r.queuing_ms > 0.0);
    }
}
