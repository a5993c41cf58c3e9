use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::C64;
use crate::topology::Topology;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Unit-variance circularly symmetric complex Gaussian.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `rows × cols` Rayleigh matrix with per-entry power `gain`.
pub fn fading_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> CMatrix {
    let amp = gain.sqrt();
    // Column-major fill order keeps draws reproducible across shapes.
    DMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng) * amp)
}

/// Receive-side vector of an interferer whose unit-norm precoder is
/// independent of its channel to the victim: `G·v ~ CN(0, gain·I)`.
pub fn effective_interferer<R: Rng + ?Sized>(rx_antennas: usize, gain: f64, rng: &mut R) -> CVector {
    let amp = gain.sqrt();
    DVector::from_fn(rx_antennas, |_, _| complex_gaussian(rng) * amp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AntennaConfig {
    pub bs: usize,
    pub ue: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Downlink { cell: usize, ue: usize },
    Uplink { ue: usize, cell: usize },
    UeToUe { from: usize, to: usize },
    BsToBs { from: usize, to: usize },
}

impl LinkKind {
    /// (receive antennas, transmit antennas).
    pub fn shape(self, ant: AntennaConfig) -> (usize, usize) {
        match self {
            LinkKind::Downlink { .. } => (ant.ue, ant.bs),
            LinkKind::Uplink { .. } => (ant.bs, ant.ue),
            LinkKind::UeToUe { .. } => (ant.ue, ant.ue),
            LinkKind::BsToBs { .. } => (ant.bs, ant.bs),
        }
    }

    pub fn gain(self, topo: &Topology) -> f64 {
        match self {
            LinkKind::Downlink { cell, ue } | LinkKind::Uplink { ue, cell } => topo.gain_bs_ue(cell, ue),
            LinkKind::UeToUe { from, to } => topo.gain_ue_ue(from, to),
            LinkKind::BsToBs { from, to } => topo.gain_bs_bs(from, to),
        }
    }
}

/// One link's channel for one TTI, receive antennas by transmit antennas,
/// scaled by the pair's large-scale amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRealization {
    pub kind: LinkKind,
    pub matrix: CMatrix,
}

pub fn draw_channels<R: Rng + ?Sized>(
    topo: &Topology,
    links: &[LinkKind],
    ant: AntennaConfig,
    rng: &mut R,
) -> Vec<LinkRealization> {
    links
        .iter()
        .map(|&kind| {
            let (r, c) = kind.shape(ant);
            LinkRealization {
                kind,
                matrix: fading_matrix(r, c, kind.gain(topo), rng),
            }
        })
        .collect()
}
