//! FTP3 packet arrivals and per-UE buffers.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::frame::Direction;
use crate::mac::HarqProcess;
use crate::rng::SimRng;

/// Poisson arrival times (ms) over `[0, horizon_ms)`.
pub fn generate_arrivals(rng: &mut SimRng, rate_per_s: f64, horizon_ms: f64) -> Vec<f64> {
    let mut proc = ArrivalProcess::new(rate_per_s, 0.0, rng);
    let mut out = Vec::new();
    while let Some(t) = proc.next_before(horizon_ms, rng) {
        out.push(t);
    }
    out
}

/// Lazily generated Poisson process.
#[derive(Debug, Clone)]
pub struct ArrivalProcess {
    exp: Option<Exp<f64>>,
    next_ms: f64,
}

impl ArrivalProcess {
    pub fn new(rate_per_s: f64, start_ms: f64, rng: &mut SimRng) -> Self {
        let exp = (rate_per_s > 0.0).then(|| Exp::new(rate_per_s / 1000.0).expect("positive rate"));
        let next_ms = match &exp {
            Some(e) => start_ms + e.sample(rng),
            None => f64::INFINITY,
        };
        ArrivalProcess { exp, next_ms }
    }

    pub fn peek(&self) -> f64 {
        self.next_ms
    }

    /// Pops the next arrival if it falls before `limit_ms`.
    pub fn next_before(&mut self, limit_ms: f64, rng: &mut impl Rng) -> Option<f64> {
        if self.next_ms >= limit_ms {
            return None;
        }
        let t = self.next_ms;
        self.next_ms += self.exp.as_ref().map_or(f64::INFINITY, |e| e.sample(rng));
        Some(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PacketState {
    /// New data (or the next segment) waiting for a grant.
    Waiting,
    /// A transport block is on air or being decoded.
    InFlight(HarqProcess),
    /// Decoding failed; waiting for a retransmission opportunity.
    AwaitingRetx(HarqProcess),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub direction: Direction,
    pub ue: usize,
    pub cell: usize,
    pub size_bits: u32,
    pub remaining_bits: u32,
    /// PDCP arrival time.
    pub arrival_ms: f64,
    /// Earliest time the packet (or its next segment) may be granted.
    pub ready_ms: f64,
    pub first_tx_ms: Option<f64>,
    pub last_tx_end_ms: Option<f64>,
    pub completion_ms: Option<f64>,
    /// Attempts spent on the current transport block.
    pub harq_attempts: u32,
    pub state: PacketState,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Conservation {
    pub generated: u64,
    pub generated_bits: u64,
    pub completed: u64,
    pub completed_bits: u64,
    pub dropped: u64,
    pub dropped_bits: u64,
    pub residual: u64,
    pub residual_bits: u64,
}

impl Conservation {
    pub fn holds(&self) -> bool {
        self.generated == self.completed + self.dropped + self.residual
            && self.generated_bits == self.completed_bits + self.dropped_bits + self.residual_bits
    }
}

/// Per-UE queues plus per-cell running totals of buffered bits.
#[derive(Debug, Clone)]
pub struct TrafficState {
    queues: Vec<VecDeque<Packet>>,
    ue_cell: Vec<usize>,
    ue_dir: Vec<Direction>,
    cell_ues: Vec<Vec<usize>>,
    /// Unacknowledged bits admitted per cell, `[dl, ul]`.
    totals: Vec<[u64; 2]>,
    next_id: u64,
    generated: u64,
    generated_bits: u64,
    completed: u64,
    completed_bits: u64,
    dropped: u64,
    dropped_bits: u64,
}

fn di(d: Direction) -> usize {
    match d {
        Direction::Dl => 0,
        Direction::Ul => 1,
    }
}

impl TrafficState {
    /// `ues` lists each UE's (serving cell, direction).
    pub fn new(cells: usize, ues: &[(usize, Direction)]) -> Self {
        let mut cell_ues = vec![Vec::new(); cells];
        for (id, &(c, _)) in ues.iter().enumerate() {
            cell_ues[c].push(id);
        }
        TrafficState {
            queues: vec![VecDeque::new(); ues.len()],
            ue_cell: ues.iter().map(|u| u.0).collect(),
            ue_dir: ues.iter().map(|u| u.1).collect(),
            cell_ues,
            totals: vec![[0, 0]; cells],
            next_id: 0,
            generated: 0,
            generated_bits: 0,
            completed: 0,
            completed_bits: 0,
            dropped: 0,
            dropped_bits: 0,
        }
    }

    pub fn push_arrival(&mut self, ue: usize, arrival_ms: f64, size_bits: u32, prep_ms: f64) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let cell = self.ue_cell[ue];
        let direction = self.ue_dir[ue];
        self.queues[ue].push_back(Packet {
            id,
            direction,
            ue,
            cell,
            size_bits,
            remaining_bits: size_bits,
            arrival_ms,
            ready_ms: arrival_ms + prep_ms,
            first_tx_ms: None,
            last_tx_end_ms: None,
            completion_ms: None,
            harq_attempts: 0,
            state: PacketState::Waiting,
        });
        self.totals[cell][di(direction)] += size_bits as u64;
        self.generated += 1;
        self.generated_bits += size_bits as u64;
        id
    }

    pub fn queue(&self, ue: usize) -> &VecDeque<Packet> {
        &self.queues[ue]
    }

    pub fn packet_mut(&mut self, ue: usize, id: u64) -> Option<&mut Packet> {
        self.queues[ue].iter_mut().find(|p| p.id == id)
    }

    /// Records a successfully decoded segment of `bits` bits. Returns the
    /// finished packet once nothing remains.
    pub fn deliver(&mut self, ue: usize, id: u64, bits: u32, completion_ms: f64) -> Option<Packet> {
        let q = &mut self.queues[ue];
        let pos = q.iter().position(|p| p.id == id)?;
        let p = &mut q[pos];
        let bits = bits.min(p.remaining_bits);
        p.remaining_bits -= bits;
        self.totals[p.cell][di(p.direction)] -= bits as u64;
        if p.remaining_bits > 0 {
            return None;
        }
        let mut done = q.remove(pos).expect("position is valid");
        done.completion_ms = Some(completion_ms);
        self.completed += 1;
        self.completed_bits += done.size_bits as u64;
        Some(done)
    }

    pub fn drop_packet(&mut self, ue: usize, id: u64) -> Option<Packet> {
        let q = &mut self.queues[ue];
        let pos = q.iter().position(|p| p.id == id)?;
        let p = q.remove(pos).expect("position is valid");
        self.totals[p.cell][di(p.direction)] -= p.remaining_bits as u64;
        self.dropped += 1;
        // Delivered segments of a dropped packet count as dropped bits too.
        self.dropped_bits += p.size_bits as u64;
        Some(p)
    }

    /// Buffered (unacknowledged) bits of `cell` at `at_ms`, as (DL, UL).
    ///
    /// UL volume is what the cell has learned from buffer status reports:
    /// only packets that arrived at least `ul_report_delay_ms` ago count.
    pub fn sample_buffered(&self, cell: usize, at_ms: f64, ul_report_delay_ms: f64) -> (u64, u64) {
        let (mut dl, mut ul) = (0u64, 0u64);
        for &ue in &self.cell_ues[cell] {
            for p in &self.queues[ue] {
                match p.direction {
                    Direction::Dl if p.arrival_ms <= at_ms => dl += p.remaining_bits as u64,
                    Direction::Ul if p.arrival_ms <= at_ms - ul_report_delay_ms => {
                        ul += p.remaining_bits as u64
                    }
                    _ => {}
                }
            }
        }
        (dl, ul)
    }

    /// Running totals over every admitted packet regardless of arrival time.
    pub fn totals(&self, cell: usize) -> (u64, u64) {
        (self.totals[cell][0], self.totals[cell][1])
    }

    pub fn conservation(&self) -> Conservation {
        let residual = self.queues.iter().map(|q| q.len() as u64).sum();
        let residual_bits = self
            .queues
            .iter()
            .flat_map(|q| q.iter())
            .map(|p| p.size_bits as u64)
            .sum();
        Conservation {
            generated: self.generated,
            generated_bits: self.generated_bits,
            completed: self.completed,
            completed_bits: self.completed_bits,
            dropped: self.dropped,
            dropped_bits: self.dropped_bits,
            residual,
            residual_bits,
        }
    }
}
