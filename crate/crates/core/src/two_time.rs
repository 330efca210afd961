//! Two-time correlations ⟨A(t) B(t+τ)⟩ by quantum regression on the hierarchy.
//!
//! Each 𝒜_{m|n}(t, t') starts as ϱ_{m|n}(t)·A and then obeys the same
//! equations as the hierarchy itself, with the envelope read at t'. Since
//! 𝒜 is not Hermitian, every (m, n) pair is stored.

use crate::error::{FockError, Result};
use crate::field::FieldSpec;
use crate::hierarchy::Hierarchy;
use crate::integrator::{integrate, TimeGrid, Trajectory};
use crate::observables::expect;
use crate::operator::{Operator, SLHModel, C64};
use crate::rhs::Dynamics;

#[derive(Clone, Debug)]
pub struct RegressionState {
    /// Anchor time t.
    pub t: f64,
    /// Current second time t'.
    pub t_prime: f64,
    pub entries: Hierarchy,
}

/// Snapshot index of `base` at time `t`.
fn snapshot_at(base: &Trajectory, t: f64) -> Result<usize> {
    let (Some(&first), Some(&last)) = (base.times.first(), base.times.last()) else {
        return Err(FockError::InvalidField("empty base trajectory".into()));
    };
    let tol = 1e-12 * t.abs().max(1.0);
    if t < first - tol || t > last + tol {
        return Err(FockError::InvalidField(format!("t = {t} outside the trajectory [{first}, {last}]")));
    }
    base.times
        .iter()
        .position(|&s| (s - t).abs() <= tol)
        .ok_or_else(|| FockError::InvalidField(format!("no snapshot at t = {t}")))
}

/// 𝒜_{m|n}(t, t) = ϱ_{m|n}(t)·A on full storage.
pub fn seed(a: &Operator, t: f64, dynamics: &Dynamics, base: &Trajectory) -> Result<RegressionState> {
    let src = &base.snapshots[snapshot_at(base, t)?];
    if a.dim() != dynamics.dim() || src.dim() != dynamics.dim() {
        return Err(FockError::Dimension("operator dimension does not match the system".into()));
    }
    let mut entries = Hierarchy::zeros(dynamics.layout().clone(), dynamics.dim());
    for idx in dynamics.layout().stored().to_vec() {
        let rho = src
            .get(&idx)
            .ok_or_else(|| FockError::Dimension(format!("base trajectory lacks entry {idx:?}")))?;
        entries.set(&idx, &rho.matmul(a))?;
    }
    Ok(RegressionState { t, t_prime: t, entries })
}

/// ⟨A(t) B(t+τ)⟩ for each τ in `taus` (non-negative, ascending).
#[allow(clippy::too_many_arguments)]
pub fn correlate(
    a: &Operator,
    b: &Operator,
    t: f64,
    taus: &[f64],
    model: &SLHModel,
    spec: &FieldSpec,
    base: &Trajectory,
    grid: &TimeGrid,
) -> Result<Vec<C64>> {
    if taus.iter().any(|&s| !(s >= 0.0)) || taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(FockError::InvalidField("τ values must be non-negative and ascending".into()));
    }
    let dynamics = Dynamics::new_full(model, spec)?;
    let state = seed(a, t, &dynamics, base)?;
    let mut y = dynamics.initial_state(&state.entries)?;
    let mut now = t;
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        let target = t + tau;
        if target > now {
            let mut g = grid.clone();
            g.t0 = now;
            g.tf = target;
            g.sample_dt = None;
            g.keep_every = usize::MAX;
            let mut last = None;
            integrate(&dynamics, &y, &g, |_, yy| last = Some(yy.to_vec()))?;
            y = last.expect("integrator reports the final state");
            now = target;
        }
        out.push(expect(&dynamics.physical_from_state(&y), b));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::initial_hierarchy;
    use crate::models;
    use crate::propagate;

    fn sp() -> Operator {
        Operator::ket_bra(2, models::EXCITED, models::GROUND)
    }

    #[test]
    fn vacuum_regression_closed_form() {
        let model = models::two_level(1.0, 0.0).unwrap();
        let spec = FieldSpec::vacuum();
        let rho0 = models::basis_state(2, models::EXCITED);
        let dynamics = Dynamics::new(&model, &spec, &[]).unwrap();
        let grid = TimeGrid::sampled(0.0, 2.0, 5);
        let base = propagate(&initial_hierarchy(&rho0, &spec).unwrap(), &dynamics, &grid).unwrap();
        let t = 1.0;
        let taus = [0.0, 0.3, 1.0, 2.5];
        let got = correlate(&sp(), &sp().dagger(), t, &taus, &model, &spec, &base, &TimeGrid::new(0.0, 1.0)).unwrap();
        for (tau, g) in taus.iter().zip(got) {
            let want = (-t).exp() * (-tau / 2.0f64).exp();
            assert!((g - want).norm() < 1e-8, "τ = {tau}: {g} vs {want}");
        }
    }

    #[test]
    fn missing_snapshot_rejected() {
        let model = models::two_level(1.0, 0.0).unwrap();
        let spec = FieldSpec::vacuum();
        let dynamics = Dynamics::new(&model, &spec, &[]).unwrap();
        let grid = TimeGrid::sampled(0.0, 1.0, 3);
        let base = propagate(&initial_hierarchy(&models::basis_state(2, 1), &spec).unwrap(), &dynamics, &grid).unwrap();
        let id = Operator::identity(2);
        let g = TimeGrid::new(0.0, 1.0);
        assert!(correlate(&id, &id, 0.3, &[0.0], &model, &spec, &base, &g).is_err());
        assert!(correlate(&id, &id, 4.0, &[0.0], &model, &spec, &base, &g).is_err());
        assert!(correlate(&id, &id, 0.5, &[1.0, 0.5], &model, &spec, &base, &g).is_err());
    }
}
