//! Slot formats and radio frame configurations.
//!
//! A slot holds 14 OFDM symbols. Downlink and uplink symbols are placed in
//! 4-symbol blocks, each block being one TTI. A flexible (guard) symbol is
//! required wherever a downlink run is followed by an uplink run; uplink to
//! downlink switches need no guard. Unused symbols at the end of a slot are
//! flexible.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const SYMBOLS_PER_SLOT: usize = 14;
pub const BLOCK_LEN: usize = 4;
/// Three 4-symbol blocks plus at most one guard fill a slot.
pub const MAX_BLOCKS_PER_SLOT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Dl,
    Ul,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::Dl => Direction::Ul,
            Direction::Ul => Direction::Dl,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Dl => "DL",
            Direction::Ul => "UL",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    D,
    U,
    F,
}

impl Symbol {
    fn as_char(self) -> char {
        match self {
            Symbol::D => 'D',
            Symbol::U => 'U',
            Symbol::F => 'F',
        }
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            Symbol::D => Some(Direction::Dl),
            Symbol::U => Some(Direction::Ul),
            Symbol::F => None,
        }
    }
}

/// One TTI opportunity inside a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TtiBlock {
    /// First symbol of the block, relative to the slot start.
    pub start: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotFormat {
    symbols: [Symbol; SYMBOLS_PER_SLOT],
    blocks: Vec<TtiBlock>,
}

impl SlotFormat {
    /// Validates the block and guard rules and derives the TTI blocks.
    pub fn from_symbols(symbols: &[Symbol]) -> Result<Self> {
        if symbols.len() != SYMBOLS_PER_SLOT {
            return Err(Error::LengthMismatch {
                expected: SYMBOLS_PER_SLOT,
                actual: symbols.len(),
            });
        }
        let mut arr = [Symbol::F; SYMBOLS_PER_SLOT];
        arr.copy_from_slice(symbols);

        let mut blocks = Vec::new();
        let mut i = 0;
        while i < SYMBOLS_PER_SLOT {
            let sym = arr[i];
            let mut j = i;
            while j < SYMBOLS_PER_SLOT && arr[j] == sym {
                j += 1;
            }
            if let Some(direction) = sym.direction() {
                let run = j - i;
                if run % BLOCK_LEN != 0 {
                    return Err(Error::Contract(format!(
                        "{} run of length {run} at symbol {i} is not a whole number of blocks",
                        direction
                    )));
                }
                for k in 0..run / BLOCK_LEN {
                    blocks.push(TtiBlock {
                        start: i + k * BLOCK_LEN,
                        direction,
                    });
                }
            }
            i = j;
        }
        for w in arr.windows(2) {
            if w[0] == Symbol::D && w[1] == Symbol::U {
                return Err(Error::Contract(
                    "downlink-to-uplink switch without a guard symbol".into(),
                ));
            }
        }
        Ok(SlotFormat {
            symbols: arr,
            blocks,
        })
    }

    pub fn symbols(&self) -> &[Symbol; SYMBOLS_PER_SLOT] {
        &self.symbols
    }

    pub fn blocks(&self) -> &[TtiBlock] {
        &self.blocks
    }

    pub fn count(&self, sym: Symbol) -> usize {
        self.symbols.iter().filter(|&&s| s == sym).count()
    }
}

impl fmt::Display for SlotFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for s in &self.symbols {
            write!(f, "{}", s.as_char())?;
        }
        f.write_str("]")
    }
}

impl FromStr for SlotFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches('[').trim_end_matches(']');
        let symbols = body
            .chars()
            .map(|c| match c {
                'D' => Ok(Symbol::D),
                'U' => Ok(Symbol::U),
                'F' => Ok(Symbol::F),
                other => Err(Error::Parse {
                    line: 0,
                    message: format!("unknown slot symbol {other:?}"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        SlotFormat::from_symbols(&symbols)
    }
}

/// Lays out `dl_blocks` and `ul_blocks` 4-symbol blocks in one slot.
///
/// Blocks alternate, starting with the majority direction (downlink on a
/// tie). A guard symbol follows every downlink block that precedes an
/// uplink block; the slot is padded with flexible symbols.
pub fn build_slot_pattern(dl_blocks: usize, ul_blocks: usize) -> Result<SlotFormat> {
    let total = dl_blocks + ul_blocks;
    if total == 0 || total > MAX_BLOCKS_PER_SLOT {
        return Err(Error::SlotCapacity {
            dl_blocks,
            ul_blocks,
        });
    }
    let (mut first_left, mut second_left, first, second) = if dl_blocks >= ul_blocks {
        (dl_blocks, ul_blocks, Direction::Dl, Direction::Ul)
    } else {
        (ul_blocks, dl_blocks, Direction::Ul, Direction::Dl)
    };

    let mut order = Vec::with_capacity(total);
    let mut turn = first;
    while first_left + second_left > 0 {
        let take_first = if turn == first {
            first_left > 0
        } else {
            second_left == 0
        };
        if take_first {
            order.push(first);
            first_left -= 1;
        } else {
            order.push(second);
            second_left -= 1;
        }
        turn = if order.last() == Some(&first) { second } else { first };
    }

    let mut symbols = Vec::with_capacity(SYMBOLS_PER_SLOT);
    for (i, dir) in order.iter().enumerate() {
        let sym = match dir {
            Direction::Dl => Symbol::D,
            Direction::Ul => Symbol::U,
        };
        symbols.extend(std::iter::repeat_n(sym, BLOCK_LEN));
        if *dir == Direction::Dl && order.get(i + 1) == Some(&Direction::Ul) {
            symbols.push(Symbol::F);
        }
    }
    if symbols.len() > SYMBOLS_PER_SLOT {
        return Err(Error::SlotCapacity {
            dl_blocks,
            ul_blocks,
        });
    }
    symbols.resize(SYMBOLS_PER_SLOT, Symbol::F);
    SlotFormat::from_symbols(&symbols)
}

/// A DL:UL ratio label such as `1:4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RatioLabel {
    pub dl: u32,
    pub ul: u32,
}

impl RatioLabel {
    pub const BALANCED: RatioLabel = RatioLabel { dl: 1, ul: 1 };

    pub fn new(dl: u32, ul: u32) -> Result<Self> {
        if dl == 0 || ul == 0 {
            return Err(Error::validation(
                "ratio",
                format!("{dl}:{ul} must give both directions a nonzero share"),
            ));
        }
        Ok(RatioLabel { dl, ul })
    }

    pub fn dl_fraction(self) -> f64 {
        self.dl as f64 / (self.dl + self.ul) as f64
    }

    fn reduced(self) -> (u32, u32) {
        let g = gcd(self.dl, self.ul);
        (self.dl / g, self.ul / g)
    }

    pub fn same_ratio(self, other: RatioLabel) -> bool {
        self.reduced() == other.reduced()
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for RatioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.dl, self.ul)
    }
}

impl FromStr for RatioLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (d, u) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::validation("ratio", format!("`{s}` is not of the form d:u")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<u32>()
                .map_err(|_| Error::validation("ratio", format!("`{s}` is not of the form d:u")))
        };
        RatioLabel::new(parse(d)?, parse(u)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadioFrameConfig {
    pub label: RatioLabel,
    pub slots: Vec<SlotFormat>,
    /// Downlink symbols per frame.
    pub d_c: usize,
    /// Uplink symbols per frame.
    pub u_c: usize,
}

impl RadioFrameConfig {
    pub fn f_c(&self) -> usize {
        self.slots.len() * SYMBOLS_PER_SLOT - self.d_c - self.u_c
    }

    pub fn dl_fraction(&self) -> f64 {
        self.d_c as f64 / (self.d_c + self.u_c) as f64
    }

    pub fn slot(&self, index: usize) -> &SlotFormat {
        &self.slots[index % self.slots.len()]
    }

    /// Symbol direction at a frame-relative symbol index.
    pub fn symbol_at(&self, frame_symbol: usize) -> Symbol {
        let slot = (frame_symbol / SYMBOLS_PER_SLOT) % self.slots.len();
        self.slots[slot].symbols[frame_symbol % SYMBOLS_PER_SLOT]
    }
}

impl fmt::Display for RadioFrameConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.slots {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Builds a frame of `slots_per_frame` full slots whose aggregate block
/// ratio is the closest achievable to `label`.
///
/// Downlink blocks are spread with a cumulative largest-remainder rule, so
/// slot `i` receives `floor((i+1)T/ρ) - floor(iT/ρ)` of the `T` downlink
/// blocks. Each 5 ms half-frame must contain both directions.
pub fn build_rfc(label: RatioLabel, slots_per_frame: usize) -> Result<RadioFrameConfig> {
    if slots_per_frame == 0 {
        return Err(Error::validation("slots_per_frame", "must be at least 1"));
    }
    let total_blocks = MAX_BLOCKS_PER_SLOT * slots_per_frame;
    let target = total_blocks as f64 * label.dl_fraction();
    let dl_total = (target.round() as usize).clamp(1, total_blocks - 1);

    let mut slots = Vec::with_capacity(slots_per_frame);
    let (mut d_c, mut u_c) = (0, 0);
    for i in 0..slots_per_frame {
        let dl = (i + 1) * dl_total / slots_per_frame - i * dl_total / slots_per_frame;
        let slot = build_slot_pattern(dl, MAX_BLOCKS_PER_SLOT - dl)?;
        d_c += slot.count(Symbol::D);
        u_c += slot.count(Symbol::U);
        slots.push(slot);
    }

    if slots_per_frame >= 2 {
        let half = slots_per_frame / 2;
        for part in [&slots[..half], &slots[half..]] {
            let has = |sym| part.iter().any(|s: &SlotFormat| s.count(sym) > 0);
            if !has(Symbol::D) || !has(Symbol::U) {
                return Err(Error::validation(
                    "ratio",
                    format!("{label} leaves a half-frame without one of the directions"),
                ));
            }
        }
    }

    Ok(RadioFrameConfig {
        label,
        slots,
        d_c,
        u_c,
    })
}

pub fn default_labels() -> Vec<RatioLabel> {
    [(1, 4), (1, 3), (1, 2), (1, 1), (2, 1), (3, 1), (4, 1)]
        .into_iter()
        .map(|(dl, ul)| RatioLabel { dl, ul })
        .collect()
}

/// The ordered set of selectable frame configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct RfcSet {
    configs: Vec<RadioFrameConfig>,
    default_index: usize,
}

impl RfcSet {
    pub fn new(labels: &[RatioLabel], slots_per_frame: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("rfc_set", "must not be empty"));
        }
        let configs = labels
            .iter()
            .map(|&l| build_rfc(l, slots_per_frame))
            .collect::<Result<Vec<_>>>()?;
        for w in configs.windows(2) {
            if w[0].dl_fraction() >= w[1].dl_fraction() {
                return Err(Error::validation(
                    "rfc_set",
                    format!(
                        "DL fractions must increase strictly ({} then {})",
                        w[0].label, w[1].label
                    ),
                ));
            }
        }
        let default_index = configs
            .iter()
            .position(|c| c.label.same_ratio(RatioLabel::BALANCED))
            .ok_or_else(|| Error::validation("rfc_set", "must contain the balanced 1:1 member"))?;
        Ok(RfcSet {
            configs,
            default_index,
        })
    }

    pub fn configs(&self) -> &[RadioFrameConfig] {
        &self.configs
    }

    pub fn default_config(&self) -> &RadioFrameConfig {
        &self.configs[self.default_index]
    }

    pub fn default_index(&self) -> usize {
        self.default_index
    }

    pub fn get(&self, index: usize) -> &RadioFrameConfig {
        &self.configs[index]
    }

    pub fn index_of(&self, label: RatioLabel) -> Result<usize> {
        self.configs
            .iter()
            .position(|c| c.label.same_ratio(label))
            .ok_or_else(|| Error::UnknownRatio(label.to_string()))
    }

    pub fn config(&self, label: RatioLabel) -> Result<&RadioFrameConfig> {
        self.index_of(label).map(|i| &self.configs[i])
    }

    /// Index of the member whose DL fraction is nearest to `theta`; exact
    /// ties go to the larger DL fraction.
    pub fn quantize_index(&self, theta: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, c) in self.configs.iter().enumerate() {
            let dist = (c.dl_fraction() - theta).abs();
            // Fractions increase along the list, so `<=` prefers the later one on ties.
            if dist <= best_dist {
                best = i;
                best_dist = dist;
            }
        }
        best
    }
}

pub fn quantize_theta(theta: f64, set: &RfcSet) -> &RadioFrameConfig {
    set.get(set.quantize_index(theta))
}
