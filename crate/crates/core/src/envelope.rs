//! Normalized temporal envelopes ξ(t) of propagating photon wave packets.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{FockError, Result};
use crate::operator::C64;
use crate::quadrature::{integrate_with_breaks, DEFAULT_TOL};

/// Half-width of the Gaussian support in units of 1/Δω.
pub const GAUSSIAN_SUPPORT: f64 = 10.0;
/// Length of the rising-exponential support in units of 1/Δω.
pub const RISING_SUPPORT: f64 = 40.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeKind {
    Gaussian {
        bandwidth: f64,
        #[serde(default)]
        arrival: f64,
    },
    RisingExponential {
        bandwidth: f64,
        #[serde(default)]
        arrival: f64,
    },
    Rectangular {
        duration: f64,
        #[serde(default)]
        start: f64,
    },
    /// Uniform samples starting at `t0`, cubic interpolation in between.
    Sampled { t0: f64, dt: f64, values: Vec<C64> },
    /// Linear combination of other envelopes, renormalized.
    Combination { terms: Vec<(C64, EnvelopeKind)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvelopeKind", into = "EnvelopeKind")]
pub struct Envelope {
    kind: EnvelopeKind,
    norm: f64,
    support: (f64, f64),
    breaks: Vec<f64>,
    parts: Vec<(C64, Envelope)>,
}

impl TryFrom<EnvelopeKind> for Envelope {
    type Error = FockError;
    fn try_from(k: EnvelopeKind) -> Result<Self> {
        make_envelope(k)
    }
}

impl From<Envelope> for EnvelopeKind {
    fn from(e: Envelope) -> Self {
        e.kind
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(FockError::InvalidEnvelope(format!("{name} must be positive and finite, got {x}")))
    }
}

/// Build a normalized envelope.
pub fn make_envelope(kind: EnvelopeKind) -> Result<Envelope> {
    let mut env = match &kind {
        EnvelopeKind::Gaussian { bandwidth, arrival } => {
            positive("bandwidth", *bandwidth)?;
            let h = GAUSSIAN_SUPPORT / bandwidth;
            Envelope { kind: kind.clone(), norm: 1.0, support: (arrival - h, arrival + h), breaks: vec![], parts: vec![] }
        }
        EnvelopeKind::RisingExponential { bandwidth, arrival } => {
            positive("bandwidth", *bandwidth)?;
            let support = (arrival - RISING_SUPPORT / bandwidth, *arrival);
            Envelope { kind: kind.clone(), norm: 1.0, support, breaks: vec![*arrival], parts: vec![] }
        }
        EnvelopeKind::Rectangular { duration, start } => {
            positive("duration", *duration)?;
            let support = (*start, start + duration);
            Envelope { kind: kind.clone(), norm: 1.0, support, breaks: vec![support.0, support.1], parts: vec![] }
        }
        EnvelopeKind::Sampled { t0, dt, values } => {
            positive("sample spacing", *dt)?;
            if values.len() < 2 {
                return Err(FockError::InvalidEnvelope("sampled envelope needs at least two samples".into()));
            }
            if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(FockError::InvalidEnvelope("sampled envelope has non-finite values".into()));
            }
            let end = t0 + dt * (values.len() - 1) as f64;
            Envelope { kind: kind.clone(), norm: 1.0, support: (*t0, end), breaks: vec![*t0, end], parts: vec![] }
        }
        EnvelopeKind::Combination { terms } => {
            if terms.is_empty() {
                return Err(FockError::InvalidEnvelope("combination needs at least one term".into()));
            }
            let parts = terms
                .iter()
                .map(|(c, k)| make_envelope(k.clone()).map(|e| (*c, e)))
                .collect::<Result<Vec<_>>>()?;
            let lo = parts.iter().map(|(_, e)| e.support.0).fold(f64::INFINITY, f64::min);
            let hi = parts.iter().map(|(_, e)| e.support.1).fold(f64::NEG_INFINITY, f64::max);
            let mut breaks: Vec<f64> = parts.iter().flat_map(|(_, e)| e.breaks.clone()).collect();
            breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            breaks.dedup();
            Envelope { kind: kind.clone(), norm: 1.0, support: (lo, hi), breaks, parts }
        }
    };
    if matches!(kind, EnvelopeKind::Sampled { .. } | EnvelopeKind::Combination { .. }) {
        let n2 = env.norm_squared()?;
        if !(n2 > 1e-300) {
            return Err(FockError::InvalidEnvelope("envelope is not normalizable".into()));
        }
        env.norm = 1.0 / n2.sqrt();
    }
    Ok(env)
}

/// ⟨a|b⟩ = ∫ a*(t) b(t) dt
pub fn overlap(a: &Envelope, b: &Envelope) -> Result<C64> {
    let lo = a.support.0.max(b.support.0);
    let hi = a.support.1.min(b.support.1);
    if lo >= hi {
        return Ok(C64::new(0.0, 0.0));
    }
    let mut breaks = a.breaks.clone();
    breaks.extend(b.breaks.iter().copied());
    breaks.extend(a.centres());
    breaks.extend(b.centres());
    integrate_with_breaks(|t| a.value(t).conj() * b.value(t), lo, hi, &breaks, 1e-12)
}

impl Envelope {
    pub fn kind(&self) -> &EnvelopeKind {
        &self.kind
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Points where ξ or its derivative is discontinuous.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    /// Points worth splitting quadrature at (peak locations).
    fn centres(&self) -> Vec<f64> {
        match &self.kind {
            EnvelopeKind::Gaussian { arrival, .. } => vec![*arrival],
            _ => self.parts.iter().flat_map(|(_, e)| e.centres()).collect(),
        }
    }

    pub fn value(&self, t: f64) -> C64 {
        match &self.kind {
            EnvelopeKind::Gaussian { bandwidth: w, arrival } => {
                let x = t - arrival;
                C64::new((w * w / (2.0 * std::f64::consts::PI)).powf(0.25) * (-w * w * x * x / 4.0).exp(), 0.0)
            }
            EnvelopeKind::RisingExponential { bandwidth: w, arrival } => {
                if t <= *arrival {
                    C64::new(w.sqrt() * (w * (t - arrival) / 2.0).exp(), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            EnvelopeKind::Rectangular { duration, start } => {
                if t >= *start && t <= start + duration {
                    C64::new(1.0 / duration.sqrt(), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            EnvelopeKind::Sampled { t0, dt, values } => self.norm * cubic(values, (t - t0) / dt),
            EnvelopeKind::Combination { .. } => {
                self.norm * self.parts.iter().map(|(c, e)| c * e.value(t)).sum::<C64>()
            }
        }
    }

    /// w(t) = ∫_t^∞ |ξ|²
    pub fn tail_mass(&self, t: f64) -> f64 {
        match &self.kind {
            EnvelopeKind::Gaussian { bandwidth, arrival } => 0.5 * erfc(bandwidth * (t - arrival) / std::f64::consts::SQRT_2),
            EnvelopeKind::RisingExponential { bandwidth, arrival } => {
                if t >= *arrival {
                    0.0
                } else {
                    -(bandwidth * (t - arrival)).exp_m1()
                }
            }
            EnvelopeKind::Rectangular { duration, start } => ((start + duration - t) / duration).clamp(0.0, 1.0),
            _ => {
                let (lo, hi) = self.support;
                let a = t.max(lo);
                if a >= hi {
                    return 0.0;
                }
                integrate_with_breaks(|s| C64::new(self.value(s).norm_sqr(), 0.0), a, hi, &self.breaks, 1e-13)
                    .map(|z| z.re.max(0.0))
                    .unwrap_or(0.0)
            }
        }
    }

    /// ∫|ξ|² over the support.
    pub fn norm_squared(&self) -> Result<f64> {
        let (lo, hi) = self.support;
        let mut breaks = self.breaks.clone();
        breaks.extend(self.centres());
        integrate_with_breaks(|t| C64::new(self.value(t).norm_sqr(), 0.0), lo, hi, &breaks, DEFAULT_TOL * 1e-2)
            .map(|z| z.re)
    }

    /// Maximum of |ξ| over the support, located on a fine grid.
    pub fn peak_abs(&self) -> f64 {
        match &self.kind {
            EnvelopeKind::Gaussian { arrival, .. } | EnvelopeKind::RisingExponential { arrival, .. } => {
                self.value(*arrival).norm()
            }
            EnvelopeKind::Rectangular { duration, .. } => 1.0 / duration.sqrt(),
            _ => {
                let (lo, hi) = self.support;
                (0..=4000).map(|k| self.value(lo + (hi - lo) * k as f64 / 4000.0).norm()).fold(0.0, f64::max)
            }
        }
    }

    /// Characteristic time scale of the envelope.
    pub fn width(&self) -> f64 {
        match &self.kind {
            EnvelopeKind::Gaussian { bandwidth, .. } | EnvelopeKind::RisingExponential { bandwidth, .. } => 1.0 / bandwidth,
            EnvelopeKind::Rectangular { duration, .. } => *duration,
            _ => (self.support.1 - self.support.0) / 20.0,
        }
    }
}

// Catmull–Rom interpolation at fractional sample position x.
fn cubic(v: &[C64], x: f64) -> C64 {
    let n = v.len();
    if x < 0.0 || x > (n - 1) as f64 {
        return C64::new(0.0, 0.0);
    }
    let i = (x.floor() as usize).min(n - 2);
    let u = x - i as f64;
    let p1 = v[i];
    let p2 = v[i + 1];
    let p0 = if i == 0 { p1 * 2.0 - p2 } else { v[i - 1] };
    let p3 = if i + 2 >= n { p2 * 2.0 - p1 } else { v[i + 2] };
    let u2 = u * u;
    let u3 = u2 * u;
    (p1 * 2.0 + (p2 - p0) * u + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * u2 + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * u3) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(w: f64, ta: f64) -> Envelope {
        make_envelope(EnvelopeKind::Gaussian { bandwidth: w, arrival: ta }).unwrap()
    }

    #[test]
    fn builtin_kinds_are_normalized() {
        let kinds = [
            EnvelopeKind::Gaussian { bandwidth: 1.46, arrival: 0.3 },
            EnvelopeKind::RisingExponential { bandwidth: 1.0, arrival: 0.0 },
            EnvelopeKind::Rectangular { duration: 0.02, start: 0.0 },
        ];
        for k in kinds {
            let e = make_envelope(k).unwrap();
            assert!((e.norm_squared().unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_support_is_ten_over_bandwidth() {
        let e = gauss(2.0, 1.0);
        assert_eq!(e.support(), (-4.0, 6.0));
    }

    #[test]
    fn shifted_gaussian_overlap() {
        let (w, tau) = (1.3, 0.8);
        let o = overlap(&gauss(w, 0.0), &gauss(w, tau)).unwrap();
        assert!((o.re - (-w * w * tau * tau / 8.0).exp()).abs() < 1e-10);
        assert!(o.im.abs() < 1e-12);
    }

    #[test]
    fn sampled_envelope_is_renormalized() {
        let values: Vec<C64> = (0..50).map(|k| C64::new(3.0, 1.0) * (-(k as f64 - 25.0).powi(2) / 40.0).exp()).collect();
        let e = make_envelope(EnvelopeKind::Sampled { t0: -5.0, dt: 0.2, values }).unwrap();
        assert!((e.norm_squared().unwrap() - 1.0).abs() < 1e-9);
        assert!(e.value(0.0).im > 0.0);
    }

    #[test]
    fn zero_samples_rejected() {
        let values = vec![C64::new(0.0, 0.0); 10];
        assert!(make_envelope(EnvelopeKind::Sampled { t0: 0.0, dt: 0.1, values }).is_err());
    }

    #[test]
    fn bad_bandwidth_rejected() {
        assert!(make_envelope(EnvelopeKind::Gaussian { bandwidth: -1.0, arrival: 0.0 }).is_err());
        assert!(make_envelope(EnvelopeKind::Rectangular { duration: 0.0, start: 0.0 }).is_err());
    }

    #[test]
    fn tail_mass_matches_quadrature() {
        let e = gauss(1.46, 0.0);
        let direct = crate::quadrature::integrate_real(|t| e.value(t).norm_sqr(), 0.4, 10.0, &[], 1e-13).unwrap();
        assert!((e.tail_mass(0.4) - direct).abs() < 1e-12);
        let r = make_envelope(EnvelopeKind::RisingExponential { bandwidth: 2.0, arrival: 1.0 }).unwrap();
        assert!((r.tail_mass(0.5) - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn combination_orthogonal_to_first_part() {
        let a = gauss(1.0, 0.0);
        let b = gauss(1.0, 1.0);
        let s = overlap(&a, &b).unwrap();
        let k = EnvelopeKind::Combination {
            terms: vec![(C64::new(1.0, 0.0), b.kind().clone()), (-s, a.kind().clone())],
        };
        let c = make_envelope(k).unwrap();
        assert!(overlap(&a, &c).unwrap().norm() < 1e-10);
        assert!((overlap(&c, &c).unwrap().re - 1.0).abs() < 1e-10);
    }
}
