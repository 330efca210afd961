//! Physical states and expectation values assembled from a hierarchy.

use crate::error::Result;
use crate::field::FieldSpec;
use crate::hierarchy::Hierarchy;
use crate::operator::{Operator, SLHModel, C64, ZERO};
use crate::rhs::{Channel, Dynamics};

/// ρ = Σ c_{m|n} ϱ_{m|n}
pub fn physical_state(h: &Hierarchy, spec: &FieldSpec) -> Operator {
    let mut rho = Operator::zeros(h.dim());
    for (idx, c) in spec.coefficient_map() {
        if let Some(op) = h.get(&idx) {
            rho += &op.scale(c);
        }
    }
    rho
}

/// ⟨X⟩ = Σ c*_{m|n} Tr[ϱ_{m|n}† X]
pub fn expect_system(h: &Hierarchy, spec: &FieldSpec, x: &Operator) -> C64 {
    spec.coefficient_map()
        .iter()
        .filter_map(|(idx, c)| h.get(idx).map(|op| c.conj() * op.inner(x)))
        .sum()
}

/// d/dt of the physical output photon flux ⟨b_i,out† b_j,out⟩ integral.
pub fn flux_rhs(h: &Hierarchy, t: f64, model: &SLHModel, spec: &FieldSpec, i: usize, j: usize) -> Result<C64> {
    let dynamics = Dynamics::new(model, spec, &[])?;
    Ok(dynamics.channel_derivative(Channel::Flux { i, j }, t, h))
}

/// d/dt of the integrated field quadrature ⟨e^{iφ} b_out + h.c.⟩ on `mode`.
pub fn quadrature_rhs(h: &Hierarchy, t: f64, model: &SLHModel, spec: &FieldSpec, mode: usize, phase: f64) -> Result<f64> {
    let dynamics = Dynamics::new(model, spec, &[])?;
    Ok(dynamics.channel_derivative(Channel::Quadrature { mode, phase }, t, h).re)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateSummary {
    pub purity: f64,
    /// von Neumann entropy in nats
    pub entropy: f64,
    /// (⟨σx⟩, ⟨σy⟩, ⟨σz⟩) for two-level systems, basis order (g, e)
    pub bloch: Option<[f64; 3]>,
}

/// Purity, entropy and Bloch vector. Eigenvalues in [−1e-10, 0) are treated
/// as zero; anything more negative gives a NaN entropy.
pub fn purity_entropy_bloch(rho: &Operator) -> StateSummary {
    let purity = rho.matmul(rho).trace().re;
    let mut entropy = 0.0;
    for p in rho.hermitian_eigenvalues() {
        if p < -1e-10 {
            entropy = f64::NAN;
            break;
        }
        if p > 0.0 {
            entropy -= p * p.ln();
        }
    }
    let bloch = (rho.dim() == 2).then(|| {
        let ge = rho[(0, 1)];
        [2.0 * ge.re, 2.0 * ge.im, (rho[(1, 1)] - rho[(0, 0)]).re]
    });
    StateSummary { purity, entropy, bloch }
}

/// Population of basis state `k`.
pub fn population(rho: &Operator, k: usize) -> f64 {
    rho[(k, k)].re
}

/// ⟨X⟩ = Tr[ρX]
pub fn expect(rho: &Operator, x: &Operator) -> C64 {
    let d = rho.dim();
    let mut acc = ZERO;
    for a in 0..d {
        for b in 0..d {
            acc += rho[(a, b)] * x[(b, a)];
        }
    }
    acc
}
