//! Closed-form excitation of a two-level atom by one photon.

use crate::envelope::Envelope;
use crate::error::Result;
use crate::operator::C64;
use crate::quadrature::integrate_with_breaks;

/// P_e(t) = γ |∫ ξ(t') e^{−Γ(t−t')/2} dt'|², evaluated on increasing `times`,
/// for an atom initially in its ground state.
pub fn analytic_single_photon_pe(envelope: &Envelope, gamma: f64, big_gamma: f64, times: &[f64]) -> Result<Vec<f64>> {
    let (lo, _) = envelope.support();
    let mut breaks = envelope.breakpoints().to_vec();
    if let crate::envelope::EnvelopeKind::Gaussian { arrival, .. } = envelope.kind() {
        breaks.push(*arrival);
    }
    let mut out = Vec::with_capacity(times.len());
    let mut acc = C64::new(0.0, 0.0);
    let mut prev = lo.min(times.first().copied().unwrap_or(lo));
    for &t in times {
        // amplitude carried from `prev` to `t`, plus the new piece
        let decay = (-big_gamma * (t - prev) / 2.0).exp();
        let piece = if t > prev {
            integrate_with_breaks(|s| envelope.value(s) * (-big_gamma * (t - s) / 2.0).exp(), prev, t, &breaks, 1e-13)?
        } else {
            C64::new(0.0, 0.0)
        };
        acc = acc * decay + piece;
        prev = t;
        out.push(gamma * acc.norm_sqr());
    }
    Ok(out)
}
