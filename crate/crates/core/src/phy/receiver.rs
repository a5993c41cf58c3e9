use nalgebra::DMatrix;

use super::channel::{CMatrix, CVector};
use super::C64;
use crate::error::{Error, Result};

/// Cap on the SINR reported when interference and noise both vanish.
pub const MAX_SINR: f64 = 1e12;

/// Dominant right singular vector of `h`, unit norm.
pub fn precode(h: &CMatrix) -> Result<CVector> {
    if h.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::DegenerateChannel);
    }
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let best = svd
        .singular_values
        .iter()
        .enumerate()
        .fold(0, |b, (i, &s)| if s > svd.singular_values[b] { i } else { b });
    let v: CVector = v_t.row(best).adjoint();
    let norm = v.norm();
    Ok(v / C64::new(norm, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterferenceClass {
    /// DL-to-DL or UL-to-UL.
    SameLink,
    /// UL-to-DL (UE to UE) or DL-to-UL (BS to BS).
    CrossLink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interferer {
    /// Receive-side vector, channel times precoder times amplitude.
    pub vector: CVector,
    pub class: InterferenceClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverMode {
    /// Every cell transmits in the same direction on these symbols.
    Aligned,
    /// Opposite directions coexist; cross-link terms enter the covariance.
    Flexible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverOutput {
    pub sinr: f64,
    pub combiner: CVector,
    /// Post-combining power of same-direction interferers.
    pub same_link_power: f64,
    /// Post-combining power of opposite-direction interferers.
    pub cross_link_power: f64,
    pub noise_power: f64,
    /// Diagonal loading was needed because the covariance had no noise.
    pub regularized: bool,
}

impl ReceiverOutput {
    pub fn interference_power(&self) -> f64 {
        self.same_link_power + self.cross_link_power
    }
}

/// MMSE-IRC combining of `signal` (effective serving vector) against
/// `interferers` plus white noise of power `noise` per antenna.
///
/// `noise == 0` is the pure-SIR mode: the covariance is diagonally loaded
/// with `1e-12` of its trace so the inverse exists.
pub fn post_sinr(
    signal: &CVector,
    interferers: &[Interferer],
    mode: ReceiverMode,
    noise: f64,
) -> Result<ReceiverOutput> {
    if mode == ReceiverMode::Aligned
        && interferers.iter().any(|i| i.class == InterferenceClass::CrossLink)
    {
        return Err(Error::Contract(
            "cross-link interferers passed to the aligned receiver".into(),
        ));
    }
    let n = signal.len();
    if let Some(bad) = interferers.iter().find(|i| i.vector.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: bad.vector.len(),
        });
    }
    let mut r: CMatrix = DMatrix::from_diagonal_element(n, n, C64::new(noise, 0.0));
    for i in interferers {
        r.ger(C64::new(1.0, 0.0), &i.vector, &i.vector.conjugate(), C64::new(1.0, 0.0));
    }
    let regularized = noise == 0.0;
    if regularized {
        let trace: f64 = (0..n).map(|k| r[(k, k)].re).sum();
        let base = if trace > 0.0 { trace } else { signal.norm_squared() };
        let load = 1e-12 * base.max(f64::MIN_POSITIVE);
        for k in 0..n {
            r[(k, k)] += C64::new(load, 0.0);
        }
    }
    let chol = r
        .cholesky()
        .ok_or_else(|| Error::Contract("interference covariance is not positive definite".into()))?;
    let u = chol.solve(signal);

    let gain = u.dotc(signal).norm_sqr();
    let (mut same, mut cross) = (0.0, 0.0);
    for i in interferers {
        let p = u.dotc(&i.vector).norm_sqr();
        match i.class {
            InterferenceClass::SameLink => same += p,
            InterferenceClass::CrossLink => cross += p,
        }
    }
    let noise_out = noise * u.norm_squared();
    let denom = same + cross + noise_out;
    let sinr = if denom > 0.0 {
        (gain / denom).min(MAX_SINR)
    } else {
        MAX_SINR
    };
    Ok(ReceiverOutput {
        sinr,
        combiner: u,
        same_link_power: same,
        cross_link_power: cross,
        noise_power: noise_out,
        regularized,
    })
}
