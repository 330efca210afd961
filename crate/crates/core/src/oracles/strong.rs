//! Simple closed-form benchmarks: strong-coupling indicators and the
//! small-bandwidth photon-number recursion.

use crate::envelope::Envelope;
use crate::error::Result;
use crate::quadrature::integrate_real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrongCoupling {
    /// (√(Nγ)/(τΓ)) ∫_{t_s−τ/2}^{t_s+τ/2} |ξ| dt; above one means strong coupling.
    pub parameter: f64,
    /// ω_R = 2 |ξ(t_s)| √(γN)
    pub rabi_frequency: f64,
}

pub fn strong_coupling_metrics(envelope: &Envelope, n: u32, gamma: f64, big_gamma: f64, tau: f64, t_s: f64) -> Result<StrongCoupling> {
    let (a, b) = (t_s - tau / 2.0, t_s + tau / 2.0);
    let integral = integrate_real(|t| envelope.value(t).norm(), a, b, envelope.breakpoints(), 1e-12)?;
    let ng = (n as f64 * gamma).sqrt();
    Ok(StrongCoupling { parameter: ng * integral / (tau * big_gamma), rabi_frequency: 2.0 * envelope.value(t_s).norm() * ng })
}

/// P_N = N P₁ (1 − 2 P_{N−1}) for N = 1..=n_max, with P₀ = 0.
pub fn small_bandwidth_recursion(p1: f64, n_max: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max as usize);
    let mut prev = 0.0;
    for n in 1..=n_max {
        let p = n as f64 * p1 * (1.0 - 2.0 * prev);
        out.push(p);
        prev = p;
    }
    out
}

/// P₁ = 4 max|ξ|² for a long pulse on a two-level atom with γ = Γ = 1.
pub fn small_bandwidth_p1(envelope: &Envelope) -> f64 {
    4.0 * envelope.peak_abs().powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{make_envelope, EnvelopeKind};

    #[test]
    fn gaussian_width_four_is_weak() {
        let e = make_envelope(EnvelopeKind::Gaussian { bandwidth: 4.0, arrival: 0.0 }).unwrap();
        let m = strong_coupling_metrics(&e, 1, 1.0, 1.0, 1.0, 0.0).unwrap();
        let want = (16.0 / (2.0 * std::f64::consts::PI)).powf(0.25) * std::f64::consts::PI.sqrt() / 2.0 * statrs::function::erf::erf(1.0);
        assert!((m.parameter - want).abs() < 1e-10);
        assert!(m.parameter < 1.0);
    }

    #[test]
    fn rectangular_rabi_frequency() {
        let e = make_envelope(EnvelopeKind::Rectangular { duration: 0.02, start: 0.0 }).unwrap();
        let m = strong_coupling_metrics(&e, 50, 1.0, 1.0, 0.01, 0.01).unwrap();
        assert!((m.rabi_frequency - 100.0).abs() < 1e-9);
    }

    #[test]
    fn recursion_first_terms() {
        let p = small_bandwidth_recursion(0.1, 3);
        assert!((p[0] - 0.1).abs() < 1e-15);
        assert!((p[1] - 0.16).abs() < 1e-15);
        assert!((p[2] - 0.3 * (1.0 - 0.32)).abs() < 1e-15);
    }
}
