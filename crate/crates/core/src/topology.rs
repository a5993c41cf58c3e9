//! Cell and UE layout with frozen large-scale gains.
//!
//! Sites sit on a hexagonal grid (spiral order from the centre). With three
//! sectors per site each sector becomes an omnidirectional cell placed at
//! the sector centroid, `ISD/3` from the site towards the sector azimuth.
//! UEs are dropped uniformly in each cell's hexagon and attach to the cell
//! with the strongest gain.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::frame::Direction;
use crate::rng::SimRng;
use crate::scenario::Scenario;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Ue {
    pub id: usize,
    pub position: Point,
    pub direction: Direction,
    /// Cell whose area the UE was dropped in.
    pub home_cell: usize,
    pub serving_cell: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub cell_positions: Vec<Point>,
    pub ues: Vec<Ue>,
    cells: usize,
    /// Linear power gain, cell-major: `[cell * ues + ue]`. Reciprocal.
    gain_bs_ue: Vec<f64>,
    /// `[a * cells + b]`, symmetric, diagonal unused.
    gain_bs_bs: Vec<f64>,
    /// `[a * ues + b]`, symmetric, diagonal unused.
    gain_ue_ue: Vec<f64>,
    /// UE ids served by each cell, split by direction.
    served: Vec<[Vec<usize>; 2]>,
}

fn dir_index(d: Direction) -> usize {
    match d {
        Direction::Dl => 0,
        Direction::Ul => 1,
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Log-distance pathloss in dB, anchored at the free-space loss at the
/// reference distance. Distances below the reference are clamped to it.
pub fn pathloss_db(distance_m: f64, exponent: f64, ref_m: f64, carrier_hz: f64) -> f64 {
    let fspl_ref = 20.0 * (4.0 * std::f64::consts::PI * ref_m * carrier_hz / SPEED_OF_LIGHT).log10();
    fspl_ref + 10.0 * exponent * (distance_m.max(ref_m) / ref_m).log10()
}

fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Axial hex coordinates in spiral order: centre, then ring by ring.
fn hex_spiral(count: usize) -> Vec<(i64, i64)> {
    const DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
    let mut out = vec![(0, 0)];
    let mut ring = 1;
    while out.len() < count {
        // Start at direction 4 scaled by the ring radius and walk the ring.
        let (mut q, mut r) = (DIRS[4].0 * ring, DIRS[4].1 * ring);
        for d in DIRS {
            for _ in 0..ring {
                out.push((q, r));
                q += d.0;
                r += d.1;
            }
        }
        ring += 1;
    }
    out.truncate(count);
    out
}

/// Cell positions and the circumradius of each cell's hexagonal area.
pub fn cell_layout(cells: usize, isd: f64, sectors: usize) -> (Vec<Point>, f64) {
    let sites = cells.div_ceil(sectors);
    let site_pos: Vec<Point> = hex_spiral(sites)
        .into_iter()
        .map(|(q, r)| {
            [
                isd * (q as f64 + r as f64 / 2.0),
                isd * (3f64.sqrt() / 2.0) * r as f64,
            ]
        })
        .collect();
    if sectors == 1 {
        return (site_pos.into_iter().take(cells).collect(), isd / 3f64.sqrt());
    }
    let radius = isd / 3.0;
    let mut cells_pos = Vec::with_capacity(cells);
    'outer: for site in &site_pos {
        for s in 0..sectors {
            if cells_pos.len() == cells {
                break 'outer;
            }
            let az = (30.0 + 360.0 / sectors as f64 * s as f64).to_radians();
            cells_pos.push([site[0] + radius * az.cos(), site[1] + radius * az.sin()]);
        }
    }
    (cells_pos, radius)
}

fn in_hexagon(p: Point, centre: Point, radius: f64) -> bool {
    // Pointy-top hexagon with circumradius `radius`.
    let x = (p[0] - centre[0]).abs();
    let y = (p[1] - centre[1]).abs();
    let h = radius * 3f64.sqrt() / 2.0;
    x <= h && y <= radius && (radius * h - radius / 2.0 * x - h * y) >= 0.0
}

fn drop_in_hexagon(rng: &mut SimRng, centre: Point, radius: f64) -> Point {
    loop {
        let p = [
            centre[0] + rng.random_range(-radius..=radius),
            centre[1] + rng.random_range(-radius..=radius),
        ];
        if in_hexagon(p, centre, radius) {
            return p;
        }
    }
}

impl Topology {
    pub fn cell_count(&self) -> usize {
        self.cells
    }

    pub fn ue_count(&self) -> usize {
        self.ues.len()
    }

    pub fn gain_bs_ue(&self, cell: usize, ue: usize) -> f64 {
        self.gain_bs_ue[cell * self.ues.len() + ue]
    }

    pub fn gain_bs_bs(&self, a: usize, b: usize) -> f64 {
        self.gain_bs_bs[a * self.cells + b]
    }

    pub fn gain_ue_ue(&self, a: usize, b: usize) -> f64 {
        self.gain_ue_ue[a * self.ues.len() + b]
    }

    pub fn gain_db_bs_ue(&self, cell: usize, ue: usize) -> f64 {
        linear_to_db(self.gain_bs_ue(cell, ue))
    }

    pub fn served_ues(&self, cell: usize, direction: Direction) -> &[usize] {
        &self.served[cell][dir_index(direction)]
    }
}

/// Builds the layout and large-scale gain tables. Deterministic in `rng`.
pub fn build_topology(s: &Scenario, rng: &mut SimRng) -> Topology {
    let (cell_positions, radius) = cell_layout(s.cell_count, s.inter_site_distance_m, s.sectors_per_site);
    let cells = cell_positions.len();

    let mut ues = Vec::new();
    for (cell, &centre) in cell_positions.iter().enumerate() {
        let dirs = std::iter::repeat_n(Direction::Dl, s.ue_per_cell_dl)
            .chain(std::iter::repeat_n(Direction::Ul, s.ue_per_cell_ul));
        for direction in dirs {
            ues.push(Ue {
                id: ues.len(),
                position: drop_in_hexagon(rng, centre, radius),
                direction,
                home_cell: cell,
                serving_cell: cell,
            });
        }
    }
    let n_ue = ues.len();
    let shadow = Normal::new(0.0, s.shadowing_sigma_db).expect("validated sigma");
    let draw_shadow = |rng: &mut SimRng| {
        if s.shadowing_sigma_db > 0.0 {
            shadow.sample(rng)
        } else {
            0.0
        }
    };
    let pl = |d: f64, n: f64| pathloss_db(d, n, s.pathloss_ref_m, s.carrier_freq_hz);

    let mut gain_bs_ue = vec![0.0; cells * n_ue];
    for c in 0..cells {
        for u in 0..n_ue {
            let d = distance(cell_positions[c], ues[u].position);
            gain_bs_ue[c * n_ue + u] =
                db_to_linear(-pl(d, s.pathloss_exponent) + draw_shadow(rng));
        }
    }
    let mut gain_bs_bs = vec![0.0; cells * cells];
    for a in 0..cells {
        for b in (a + 1)..cells {
            let d = distance(cell_positions[a], cell_positions[b]);
            let g = db_to_linear(-pl(d, s.bs_bs_pathloss_exponent) + draw_shadow(rng));
            gain_bs_bs[a * cells + b] = g;
            gain_bs_bs[b * cells + a] = g;
        }
    }
    let mut gain_ue_ue = vec![0.0; n_ue * n_ue];
    for a in 0..n_ue {
        for b in (a + 1)..n_ue {
            let d = distance(ues[a].position, ues[b].position);
            let g = db_to_linear(-pl(d, s.pathloss_exponent) + draw_shadow(rng));
            gain_ue_ue[a * n_ue + b] = g;
            gain_ue_ue[b * n_ue + a] = g;
        }
    }

    let mut served = vec![[Vec::new(), Vec::new()]; cells];
    for ue in ues.iter_mut() {
        let mut best = 0;
        for c in 1..cells {
            // Strict comparison keeps the lowest id on exact ties.
            if gain_bs_ue[c * n_ue + ue.id] > gain_bs_ue[best * n_ue + ue.id] {
                best = c;
            }
        }
        ue.serving_cell = best;
        served[best][dir_index(ue.direction)].push(ue.id);
    }

    Topology {
        cell_positions,
        ues,
        cells,
        gain_bs_ue,
        gain_bs_bs,
        gain_ue_ue,
        served,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, StreamFactory};

    fn topo(s: &Scenario) -> Topology {
        build_topology(s, &mut StreamFactory::new(s.seed).stream(Purpose::Topology, 0))
    }

    #[test]
    fn single_cell_single_ue() {
        let mut s = Scenario::default();
        s.cell_count = 1;
        s.ue_per_cell_dl = 1;
        s.ue_per_cell_ul = 0;
        let t = topo(&s);
        assert_eq!(t.cell_count(), 1);
        assert_eq!(t.ue_count(), 1);
        assert_eq!(t.ues[0].serving_cell, 0);
        assert_eq!(t.served_ues(0, Direction::Dl), &[0]);
    }

    #[test]
    fn same_seed_same_topology() {
        let s = Scenario::default();
        assert_eq!(topo(&s), topo(&s));
        let mut other = s.clone();
        other.seed += 1;
        assert_ne!(topo(&s).ues[0].position, topo(&other).ues[0].position);
    }

    #[test]
    fn default_cluster_attaches_to_strongest_cell() {
        let s = Scenario::default();
        let t = topo(&s);
        assert_eq!(t.cell_count(), 21);
        assert_eq!(t.ue_count(), 21 * 20);
        for ue in &t.ues {
            let serving = t.gain_bs_ue(ue.serving_cell, ue.id);
            for c in 0..t.cell_count() {
                let g = t.gain_bs_ue(c, ue.id);
                assert!(serving >= g);
                if g == serving {
                    assert!(ue.serving_cell <= c);
                }
            }
        }
        let total: usize = (0..21)
            .map(|c| t.served_ues(c, Direction::Dl).len() + t.served_ues(c, Direction::Ul).len())
            .sum();
        assert_eq!(total, t.ue_count());
    }

    #[test]
    fn gain_tables_are_complete() {
        let s = Scenario::default();
        let t = topo(&s);
        for c in 0..t.cell_count() {
            for u in 0..t.ue_count() {
                assert!(t.gain_bs_ue(c, u) > 0.0 && t.gain_bs_ue(c, u).is_finite());
            }
            for b in 0..t.cell_count() {
                if b != c {
                    assert!(t.gain_bs_bs(c, b) > 0.0);
                    assert_eq!(t.gain_bs_bs(c, b), t.gain_bs_bs(b, c));
                }
            }
        }
        for a in 0..t.ue_count() {
            for b in 0..t.ue_count() {
                if a != b {
                    assert!(t.gain_ue_ue(a, b) > 0.0);
                }
            }
        }
    }

    #[test]
    fn sector_layout_geometry() {
        let (pos, r) = cell_layout(21, 500.0, 3);
        assert_eq!(pos.len(), 21);
        assert!((r - 500.0 / 3.0).abs() < 1e-12);
        // Sector centroids of the centre site sit ISD/3 from the origin.
        for p in &pos[..3] {
            assert!((distance(*p, [0.0, 0.0]) - 500.0 / 3.0).abs() < 1e-9);
        }
        // Neighbouring site centres are one ISD from the origin.
        let sites = hex_spiral(7);
        assert_eq!(sites.len(), 7);
        let mut uniq = sites.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 7);
    }

    #[test]
    fn pathloss_reference_and_slope() {
        let at_ref = pathloss_db(35.0, 3.76, 35.0, 3.5e9);
        assert!((at_ref - 74.2).abs() < 0.1, "{at_ref}");
        let at_350 = pathloss_db(350.0, 3.76, 35.0, 3.5e9);
        assert!((at_350 - at_ref - 37.6).abs() < 1e-9);
        assert_eq!(pathloss_db(1.0, 3.76, 35.0, 3.5e9), at_ref);
    }
}
