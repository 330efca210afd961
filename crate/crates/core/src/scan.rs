//! Excitation curves, peak extraction and bandwidth optimization for the
//! benchmark problem of a two-level atom driven by N-photon pulses.

use rayon::prelude::*;

use crate::envelope::{make_envelope, Envelope, EnvelopeKind};
use crate::error::{FockError, Result};
use crate::field::FieldSpec;
use crate::hierarchy::initial_hierarchy;
use crate::integrator::{integrate, TimeGrid};
use crate::models;
use crate::observables::expect;
use crate::operator::{Operator, SLHModel, C64};
use crate::rhs::{Channel, Dynamics};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub t: f64,
    pub value: f64,
}

/// Maximum of sampled data, refined by a parabola through the largest sample
/// and its neighbours.
pub fn peak_quadratic(times: &[f64], values: &[f64]) -> Peak {
    let k = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(k, _)| k)
        .unwrap_or(0);
    if k == 0 || k + 1 >= values.len() {
        return Peak { t: times[k], value: values[k] };
    }
    let (x0, x1, x2) = (times[k - 1], times[k], times[k + 1]);
    let (y0, y1, y2) = (values[k - 1], values[k], values[k + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a >= 0.0 {
        return Peak { t: x1, value: y1 };
    }
    let b = d01 - a * (x0 + x1);
    let t = (-b / (2.0 * a)).clamp(x0, x2);
    let p = y0 + d01 * (t - x0) + a * (t - x0) * (t - x1);
    Peak { t, value: p.max(y1) }
}

/// Sampled expectation value of `x` and channel values for any model and field.
#[derive(Clone, Debug)]
pub struct Curve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub channels: Vec<Vec<f64>>,
}

pub fn expectation_curve(
    model: &SLHModel,
    spec: &FieldSpec,
    rho0: &Operator,
    x: &Operator,
    channels: &[Channel],
    grid: &TimeGrid,
) -> Result<Curve> {
    let dynamics = Dynamics::new(model, spec, channels)?;
    let h0 = initial_hierarchy(rho0, spec)?;
    let y0 = dynamics.initial_state(&h0)?;
    let mut curve = Curve { times: vec![], values: vec![], channels: vec![vec![]; channels.len()] };
    integrate(&dynamics, &y0, grid, |t, y| {
        curve.times.push(t);
        curve.values.push(expect(&dynamics.physical_from_state(y), x).re);
        for (c, v) in curve.channels.iter_mut().zip(dynamics.channel_values(y)) {
            c.push(v.re);
        }
    })?;
    Ok(curve)
}

pub fn gaussian(bandwidth: f64) -> Result<Envelope> {
    make_envelope(EnvelopeKind::Gaussian { bandwidth, arrival: 0.0 })
}

/// Number of samples used on the pulse window when locating a maximum.
pub const PEAK_SAMPLES: usize = 801;

/// max_t P_e for a ground-state two-level atom (γ = Γ = 1) and N photons in `envelope`.
pub fn max_excitation(envelope: &Envelope, n: u32, rtol: f64) -> Result<Peak> {
    let model = models::two_level(1.0, 0.0)?;
    let spec = FieldSpec::fock(envelope.clone(), n);
    let (t0, tf) = envelope.support();
    let grid = TimeGrid::sampled(t0, tf, PEAK_SAMPLES).with_tolerances(rtol, rtol * 1e-2);
    let pe = Operator::ket_bra(2, models::EXCITED, models::EXCITED);
    let c = expectation_curve(&model, &spec, &models::basis_state(2, models::GROUND), &pe, &[], &grid)?;
    Ok(peak_quadratic(&c.times, &c.values))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Optimum {
    pub photons: u32,
    pub bandwidth: f64,
    pub pe_max: f64,
}

/// Gaussian bandwidth maximizing max_t P_e, by golden-section search on ln Δω.
pub fn optimal_bandwidth(n: u32, lo: f64, hi: f64, rel_tol: f64, rtol: f64) -> Result<Optimum> {
    if !(lo > 0.0 && hi > lo) {
        return Err(FockError::InvalidEnvelope("bandwidth bracket must satisfy 0 < lo < hi".into()));
    }
    let f = |lw: f64| -> Result<f64> { Ok(max_excitation(&gaussian(lw.exp())?, n, rtol)?.value) };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a) > rel_tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let (x, v) = if fc > fd { (c, fc) } else { (d, fd) };
    Ok(Optimum { photons: n, bandwidth: x.exp(), pe_max: v })
}

/// Optimal bandwidth for each photon number, in parallel. The bracket for
/// N is [lo·N, hi·N].
pub fn optimal_bandwidth_sweep(ns: &[u32], lo: f64, hi: f64, rel_tol: f64, rtol: f64) -> Vec<Result<Optimum>> {
    ns.par_iter().map(|&n| optimal_bandwidth(n, lo * n as f64, hi * n as f64, rel_tol, rtol)).collect()
}

/// Angular frequency ω of the best least-squares fit P(t) ≈ sin²(ω(t − t0)/2).
/// The coarse scan covers [ω_lo, ω_hi] before a golden-section refinement.
pub fn rabi_frequency_fit(times: &[f64], pe: &[f64], omega_lo: f64, omega_hi: f64) -> f64 {
    let t0 = times.first().copied().unwrap_or(0.0);
    let cost = |w: f64| -> f64 {
        times.iter().zip(pe).map(|(t, p)| (p - (w * (t - t0) / 2.0).sin().powi(2)).powi(2)).sum()
    };
    let n = 400;
    let step = (omega_hi / omega_lo).ln() / n as f64;
    let grid: Vec<f64> = (0..=n).map(|k| omega_lo * (step * k as f64).exp()).collect();
    let k = (0..=n).min_by(|&a, &b| cost(grid[a]).total_cmp(&cost(grid[b]))).unwrap();
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// max over shifts s of |∫ u*(t) ξ(t − s) dt|² for a sampled amplitude u on a
/// uniform grid (normalized here) and a reference envelope ξ.
pub fn best_shift_overlap(times: &[f64], amp: &[C64], reference: &Envelope, shift_range: (f64, f64)) -> (f64, f64) {
    let h = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
    let trap = |f: &dyn Fn(usize) -> C64| -> C64 {
        let n = times.len();
        (0..n).map(|k| f(k) * if k == 0 || k + 1 == n { 0.5 } else { 1.0 }).sum::<C64>() * h
    };
    let norm = trap(&|k| C64::new(amp[k].norm_sqr(), 0.0)).re.sqrt();
    let ov = |s: f64| -> f64 { (trap(&|k| amp[k].conj() * reference.value(times[k] - s)) / norm).norm_sqr() };
    let n = 200;
    let (lo, hi) = shift_range;
    let grid: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let k = (0..=n).max_by(|&a, &b| ov(grid[a]).total_cmp(&ov(grid[b]))).unwrap();
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if ov(c) > ov(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let s = 0.5 * (a + b);
    (s, ov(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola_peak_recovered() {
        let times: Vec<f64> = (0..21).map(|k| k as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| 2.0 - 3.0 * (t - 1.234f64).powi(2)).collect();
        let p = peak_quadratic(&times, &values);
        assert!((p.t - 1.234).abs() < 1e-12);
        assert!((p.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn edge_maximum_returned_as_is() {
        let p = peak_quadratic(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]);
        assert_eq!(p, Peak { t: 2.0, value: 3.0 });
    }

    #[test]
    fn rabi_fit_recovers_frequency() {
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 1e-4).collect();
        let pe: Vec<f64> = times.iter().map(|t| (37.0 * t / 2.0f64).sin().powi(2)).collect();
        assert!((rabi_frequency_fit(&times, &pe, 1.0, 1000.0) - 37.0).abs() < 1e-6);
    }

    #[test]
    fn shifted_gaussian_overlap_is_one() {
        let e = gaussian(1.0).unwrap();
        let times: Vec<f64> = (0..2001).map(|k| -15.0 + k as f64 * 0.015).collect();
        let amp: Vec<C64> = times.iter().map(|t| e.value(t - 1.3) * 2.0).collect();
        let (s, o) = best_shift_overlap(&times, &amp, &e, (-5.0, 5.0));
        assert!((s - 1.3).abs() < 1e-5 && (o - 1.0).abs() < 1e-8, "{s} {o}");
    }
}
