//! Per-TTI link abstraction: fading, precoding, IRC combining, effective
//! SINR and block-error decisions.

pub mod channel;
pub mod link;
pub mod receiver;

pub use channel::{
    complex_gaussian, draw_channels, effective_interferer, fading_matrix, AntennaConfig, CMatrix,
    CVector, LinkKind, LinkRealization,
};
pub use link::{chase_combine, decode, effective_sinr, McsEntry, McsTable};
pub use receiver::{post_sinr, precode, Interferer, InterferenceClass, ReceiverMode, ReceiverOutput};

pub type C64 = num_complex::Complex64;
