//! Single photon emitted by a virtual cascaded source.
//!
//! The photon is an excitation of a fictitious two-level source whose
//! time-dependent decay rate |ξ|²/w reproduces the envelope, with
//! w(t) = ∫_t^∞ |ξ|². The joint state is tracked in source blocks
//! ρ_ee, ρ_ge, ρ_gg (and ρ_eg = ρ_ge†) acting on the system.

use crate::envelope::Envelope;
use crate::error::{FockError, Result};
use crate::field::FieldSpec;
use crate::integrator::{integrate, OdeSystem, TimeGrid};
use crate::operator::{Operator, SLHModel, C64};

/// Once w falls below this, the source is considered empty.
pub const TAIL_CUTOFF: f64 = 1e-12;

struct Cascade<'a> {
    envelope: &'a Envelope,
    h: Operator,
    l: Operator,
    t_stop: f64,
}

impl Cascade<'_> {
    fn lambda(&self, t: f64) -> C64 {
        if t >= self.t_stop {
            return C64::new(0.0, 0.0);
        }
        let w = self.envelope.tail_mass(t);
        if w < TAIL_CUTOFF {
            C64::new(0.0, 0.0)
        } else {
            self.envelope.value(t) / w.sqrt()
        }
    }

    fn liouvillian(&self, rho: &Operator) -> Operator {
        let c = &self.h.matmul(rho) - &rho.matmul(&self.h);
        &crate::operator::lindblad(&self.l, rho) + &c.scale(C64::new(0.0, -1.0))
    }
}

fn unpack(y: &[C64], d: usize) -> [Operator; 3] {
    let d2 = d * d;
    let block = |k: usize| Operator::from_vec(d, y[k * d2..(k + 1) * d2].to_vec()).unwrap();
    [block(0), block(1), block(2)]
}

impl OdeSystem for Cascade<'_> {
    fn len(&self) -> usize {
        3 * self.h.dim() * self.h.dim()
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let d = self.h.dim();
        let d2 = d * d;
        let [ee, ge, gg] = unpack(y, d);
        let lam = self.lambda(t);
        let lam2 = lam.norm_sqr();
        let ld = self.l.dagger();
        let eg = ge.dagger();
        let dee = &self.liouvillian(&ee) - &ee.scale_re(lam2);
        let mut dge = &self.liouvillian(&ge) - &ge.scale_re(0.5 * lam2);
        dge += &ee.commutator(&ld).scale(lam);
        let mut dgg = self.liouvillian(&gg);
        dgg += &eg.commutator(&ld).scale(lam);
        dgg += &self.l.commutator(&ge).scale(lam.conj());
        dgg += &ee.scale_re(lam2);
        dy[..d2].copy_from_slice(dee.as_slice());
        dy[d2..2 * d2].copy_from_slice(dge.as_slice());
        dy[2 * d2..].copy_from_slice(dgg.as_slice());
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.envelope.breakpoints().to_vec();
        b.push(self.t_stop);
        b
    }
}

#[derive(Clone, Debug)]
pub struct CascadedTrajectory {
    pub times: Vec<f64>,
    pub rho_ee: Vec<Operator>,
    pub rho_ge: Vec<Operator>,
    pub rho_gg: Vec<Operator>,
    pub tail: Vec<f64>,
}

impl CascadedTrajectory {
    /// Reduced system state ρ_ee + ρ_gg.
    pub fn system_states(&self) -> Vec<Operator> {
        self.rho_ee.iter().zip(&self.rho_gg).map(|(a, b)| a + b).collect()
    }

    /// (ϱ_{1,1}, ϱ_{1,0}, ϱ_{0,0}) at snapshot k, or None where w is too small
    /// for the division to be meaningful.
    pub fn fock_entries(&self, k: usize, min_tail: f64) -> Option<(Operator, Operator, Operator)> {
        let w = self.tail[k];
        if w < min_tail {
            return None;
        }
        Some((&self.rho_ee[k] + &self.rho_gg[k], self.rho_ge[k].scale_re(1.0 / w.sqrt()), self.rho_ee[k].scale_re(1.0 / w)))
    }
}

/// Time at which the remaining envelope mass drops below [`TAIL_CUTOFF`].
pub fn source_exhausted_at(envelope: &Envelope) -> f64 {
    let (mut lo, mut hi) = envelope.support();
    if envelope.tail_mass(hi) >= TAIL_CUTOFF {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if envelope.tail_mass(mid) < TAIL_CUTOFF {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// One photon in `spec`'s single slot scattering on a single-mode model with S = I.
pub fn cascaded_single_photon(model: &SLHModel, spec: &FieldSpec, rho_sys: &Operator, grid: &TimeGrid) -> Result<CascadedTrajectory> {
    if model.modes() != 1 || !model.scattering_is_identity() || !model.schedule.is_empty() {
        return Err(FockError::Unsupported("cascaded oracle needs one mode, S = I and a constant H".into()));
    }
    if spec.slots.len() != 1 || spec.slots[0].max_photons != 1 || spec.displacement.is_some() {
        return Err(FockError::Unsupported("cascaded oracle needs exactly one photon in one slot".into()));
    }
    let top = crate::hierarchy::HierarchyIndex::single(1, 1);
    let coef = spec.coefficient_map();
    if coef.len() != 1 || !coef.contains_key(&top) {
        return Err(FockError::Unsupported("cascaded oracle needs the pure one-photon state".into()));
    }
    let envelope = &spec.slots[0].envelope;
    let d = model.dim();
    let sys = Cascade { envelope, h: model.h.clone(), l: model.l[0].clone(), t_stop: source_exhausted_at(envelope) };
    // ϱ11 = ρ, ϱ10 = 0, ϱ00 = ρ at t0
    let w0 = envelope.tail_mass(grid.t0);
    let mut y0 = rho_sys.scale_re(w0).into_vec();
    y0.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(d * d));
    y0.extend(rho_sys.scale_re(1.0 - w0).into_vec());
    let mut out = CascadedTrajectory { times: vec![], rho_ee: vec![], rho_ge: vec![], rho_gg: vec![], tail: vec![] };
    integrate(&sys, &y0, grid, |t, y| {
        let [ee, ge, gg] = unpack(y, d);
        out.times.push(t);
        out.rho_ee.push(ee);
        out.rho_ge.push(ge);
        out.rho_gg.push(gg);
        out.tail.push(envelope.tail_mass(t));
    })?;
    Ok(out)
}
