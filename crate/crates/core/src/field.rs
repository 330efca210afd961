//! Description of the incoming field: temporal slots, their photon caps,
//! and the coefficients that combine hierarchy entries into physical quantities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::envelope::{overlap, Envelope};
use crate::error::{FockError, Result};
use crate::hierarchy::{HierarchyIndex, IndexLayout};
use crate::operator::{Operator, SLHModel, C64, ONE, ZERO};

/// Largest total photon number accepted for non-orthogonal slots.
pub const NONORTHOGONAL_CAP: u32 = 4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Slot {
    pub envelope: Envelope,
    #[serde(default)]
    pub mode: usize,
    pub max_photons: u32,
}

/// Coherent displacement α(t) = amplitude · ξ(t) on one physical mode.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Displacement {
    #[serde(default)]
    pub mode: usize,
    pub amplitude: C64,
    pub envelope: Envelope,
}

impl Displacement {
    pub fn value(&self, t: f64) -> C64 {
        self.amplitude * self.envelope.value(t)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldSpec {
    pub slots: Vec<Slot>,
    pub coefficients: Vec<(HierarchyIndex, C64)>,
    #[serde(default)]
    pub displacement: Option<Displacement>,
    #[serde(default = "yes")]
    pub orthogonal: bool,
}

fn yes() -> bool {
    true
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl FieldSpec {
    /// No photons: the hierarchy reduces to the ordinary master equation.
    pub fn vacuum() -> Self {
        FieldSpec { slots: vec![], coefficients: vec![(HierarchyIndex::new(vec![], vec![]), ONE)], displacement: None, orthogonal: true }
    }

    /// N photons in a single temporal mode.
    pub fn fock(envelope: Envelope, n: u32) -> Self {
        FieldSpec {
            slots: vec![Slot { envelope, mode: 0, max_photons: n }],
            coefficients: vec![(HierarchyIndex::single(n, n), ONE)],
            displacement: None,
            orthogonal: true,
        }
    }

    /// Pure superposition Σ a_n |n⟩ in one temporal mode.
    pub fn superposition(envelope: Envelope, amplitudes: &[(u32, C64)]) -> Self {
        let cap = amplitudes.iter().map(|a| a.0).max().unwrap_or(0);
        let mut coefficients = Vec::new();
        for &(m, am) in amplitudes {
            for &(n, an) in amplitudes {
                coefficients.push((HierarchyIndex::single(m, n), am * an.conj()));
            }
        }
        FieldSpec { slots: vec![Slot { envelope, mode: 0, max_photons: cap }], coefficients, displacement: None, orthogonal: true }
    }

    /// Incoherent mixture Σ p_n |n⟩⟨n| in one temporal mode.
    pub fn mixture(envelope: Envelope, probabilities: &[(u32, f64)]) -> Self {
        let cap = probabilities.iter().map(|a| a.0).max().unwrap_or(0);
        let coefficients = probabilities.iter().map(|&(n, p)| (HierarchyIndex::single(n, n), C64::new(p, 0.0))).collect();
        FieldSpec { slots: vec![Slot { envelope, mode: 0, max_photons: cap }], coefficients, displacement: None, orthogonal: true }
    }

    /// Coherent state |α⟩ truncated at `n_trunc` photons and renormalized.
    pub fn coherent_truncated(envelope: Envelope, alpha: C64, n_trunc: u32) -> Self {
        let amp = |n: u32| alpha.powu(n) / factorial(n).sqrt();
        let kept: f64 = (0..=n_trunc).map(|n| amp(n).norm_sqr()).sum();
        let amplitudes: Vec<(u32, C64)> = (0..=n_trunc).map(|n| (n, amp(n) / kept.sqrt())).collect();
        Self::superposition(envelope, &amplitudes)
    }

    /// Product of Fock states in separate slots, possibly on different modes.
    pub fn product(slots: Vec<Slot>, orthogonal: bool) -> Self {
        let top: Vec<u32> = slots.iter().map(|s| s.max_photons).collect();
        FieldSpec { coefficients: vec![(HierarchyIndex::new(top.clone(), top), ONE)], slots, displacement: None, orthogonal }
    }

    pub fn with_displacement(mut self, d: Displacement) -> Self {
        self.displacement = Some(d);
        self
    }

    pub fn caps(&self) -> Vec<u32> {
        self.slots.iter().map(|s| s.max_photons).collect()
    }

    pub fn total_cap(&self) -> u32 {
        self.slots.iter().map(|s| s.max_photons).sum()
    }

    pub fn coefficient_map(&self) -> BTreeMap<HierarchyIndex, C64> {
        let mut map = BTreeMap::new();
        for (idx, c) in &self.coefficients {
            *map.entry(idx.clone()).or_insert(ZERO) += c;
        }
        map.retain(|_, c| *c != ZERO);
        map
    }

    /// ⟨ξ_a|ξ_b⟩ for all slot pairs.
    pub fn slot_overlaps(&self) -> Result<Vec<Vec<C64>>> {
        let k = self.slots.len();
        let mut ov = vec![vec![ZERO; k]; k];
        for a in 0..k {
            ov[a][a] = ONE;
            for b in a + 1..k {
                let o = if self.slots[a].mode == self.slots[b].mode {
                    overlap(&self.slots[a].envelope, &self.slots[b].envelope)?
                } else {
                    ZERO
                };
                ov[a][b] = o;
                ov[b][a] = o.conj();
            }
        }
        Ok(ov)
    }

    /// Inner products ⟨ψ_bra|ψ_ket⟩ of the unnormalized product states
    /// Π_s (B_s†)^{k_s}|0⟩, by pairing creators with annihilators.
    pub fn gram(&self) -> Result<impl Fn(&[u32], &[u32]) -> C64> {
        let ov = self.slot_overlaps()?;
        let orthogonal = self.orthogonal;
        Ok(move |bra: &[u32], ket: &[u32]| {
            if orthogonal {
                return if bra == ket { ONE } else { ZERO };
            }
            let rows: Vec<usize> = expand(bra);
            let cols: Vec<usize> = expand(ket);
            if rows.len() != cols.len() {
                return ZERO;
            }
            let m: Vec<Vec<C64>> = rows.iter().map(|&a| cols.iter().map(|&b| ov[a][b]).collect()).collect();
            permanent(&m)
        })
    }

    /// 𝒩 = Σ c_{m|n} ⟨ψ_n|ψ_m⟩
    pub fn normalization(&self) -> Result<C64> {
        let g = self.gram()?;
        Ok(self.coefficient_map().iter().map(|(i, c)| c * g(&i.n, &i.m)).sum())
    }

    /// Field density matrix in the slot-number basis (Gram-corrected for
    /// non-orthogonal slots), normalized to unit trace.
    pub fn field_density(&self) -> Result<Operator> {
        let layout = IndexLayout::new(&self.caps(), true);
        let side = (layout.len() as f64).sqrt().round() as usize;
        let kets: Vec<Vec<u32>> = layout.stored()[..side].iter().map(|i| i.n.clone()).collect();
        let coef = self.coefficient_map();
        let c = Operator::from_fn(side, |a, b| {
            coef.get(&HierarchyIndex::new(kets[a].clone(), kets[b].clone())).copied().unwrap_or(ZERO)
        });
        if self.orthogonal {
            return Ok(c);
        }
        let g = self.gram()?;
        let gm = Operator::from_fn(side, |a, b| g(&kets[a], &kets[b]));
        let (vals, vecs) = gm.hermitian_eigen();
        let root = Operator::from_fn(side, |a, b| {
            (0..side).map(|k| vecs[k][a] * vals[k].max(0.0).sqrt() * vecs[k][b].conj()).sum()
        });
        let norm = self.normalization()?;
        Ok(root.matmul(&c).matmul(&root).scale(ONE / norm))
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.slots.len();
        for (idx, _) in &self.coefficients {
            if idx.m.len() != k || idx.n.len() != k {
                return Err(FockError::InvalidField(format!("coefficient index {idx:?} does not match {k} slots")));
            }
            if idx.m.iter().chain(&idx.n).zip(self.slots.iter().chain(&self.slots)).any(|(x, s)| *x > s.max_photons) {
                return Err(FockError::InvalidField(format!("coefficient index {idx:?} exceeds a slot cap")));
            }
        }
        let coef = self.coefficient_map();
        if coef.is_empty() {
            return Err(FockError::InvalidField("no non-zero coefficients".into()));
        }
        for (idx, c) in &coef {
            let p = coef.get(&idx.partner()).copied().unwrap_or(ZERO);
            if (p - c.conj()).norm() > 1e-10 {
                return Err(FockError::InvalidField(format!("coefficients are not Hermitian at {idx:?}")));
            }
        }
        if self.orthogonal {
            let ov = self.slot_overlaps()?;
            for a in 0..k {
                for b in a + 1..k {
                    if ov[a][b].norm() > 1e-6 {
                        return Err(FockError::InvalidField(format!(
                            "slots {a} and {b} share a mode but overlap by {:.3e}; mark the field non-orthogonal",
                            ov[a][b].norm()
                        )));
                    }
                }
            }
        } else {
            if self.total_cap() > NONORTHOGONAL_CAP {
                return Err(FockError::Unsupported(format!(
                    "non-orthogonal fields are limited to {NONORTHOGONAL_CAP} photons in total"
                )));
            }
            if self.normalization()?.re <= 1e-12 {
                return Err(FockError::InvalidField("field state has zero norm".into()));
            }
        }
        let rho = self.field_density()?;
        if (rho.trace().re - 1.0).abs() > 1e-8 {
            return Err(FockError::InvalidField(format!("field trace is {:.10}, expected 1", rho.trace().re)));
        }
        if rho.hermitian_eigenvalues()[0] < -1e-10 {
            return Err(FockError::InvalidField("field density is not positive semidefinite".into()));
        }
        Ok(())
    }

    /// Checks that depend on the system model.
    pub fn validate_for(&self, model: &SLHModel) -> Result<()> {
        self.validate()?;
        let modes = model.modes();
        if let Some(s) = self.slots.iter().find(|s| s.mode >= modes) {
            return Err(FockError::InvalidField(format!("slot on mode {} but the model has {modes} mode(s)", s.mode)));
        }
        if let Some(d) = &self.displacement {
            if modes != 1 || d.mode != 0 {
                return Err(FockError::Unsupported("displacement is implemented for single-mode models".into()));
            }
        }
        Ok(())
    }
}

fn expand(k: &[u32]) -> Vec<usize> {
    k.iter().enumerate().flat_map(|(s, &c)| std::iter::repeat(s).take(c as usize)).collect()
}

/// Permanent by expansion over permutations (small matrices only).
pub fn permanent(m: &[Vec<C64>]) -> C64 {
    fn rec(m: &[Vec<C64>], row: usize, used: &mut Vec<bool>) -> C64 {
        if row == m.len() {
            return ONE;
        }
        let mut acc = ZERO;
        for c in 0..m.len() {
            if !used[c] && m[row][c] != ZERO {
                used[c] = true;
                acc += m[row][c] * rec(m, row + 1, used);
                used[c] = false;
            }
        }
        acc
    }
    rec(m, 0, &mut vec![false; m.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{make_envelope, EnvelopeKind};

    fn gauss(ta: f64) -> Envelope {
        make_envelope(EnvelopeKind::Gaussian { bandwidth: 1.0, arrival: ta }).unwrap()
    }

    #[test]
    fn permanent_of_ones() {
        let m = vec![vec![ONE; 3]; 3];
        assert!((permanent(&m).re - 6.0).abs() < 1e-14);
    }

    #[test]
    fn two_nonorthogonal_photons_norm() {
        let slots = vec![
            Slot { envelope: gauss(0.0), mode: 0, max_photons: 1 },
            Slot { envelope: gauss(1.0), mode: 0, max_photons: 1 },
        ];
        let spec = FieldSpec::product(slots, false);
        let s = overlap(&gauss(0.0), &gauss(1.0)).unwrap().norm_sqr();
        assert!((spec.normalization().unwrap().re - (1.0 + s)).abs() < 1e-10);
        spec.validate().unwrap();
    }

    #[test]
    fn overlapping_slots_must_be_marked() {
        let slots = vec![
            Slot { envelope: gauss(0.0), mode: 0, max_photons: 1 },
            Slot { envelope: gauss(1.0), mode: 0, max_photons: 1 },
        ];
        assert!(FieldSpec::product(slots, true).validate().is_err());
    }

    #[test]
    fn superposition_is_valid_mixture_is_valid() {
        let h = C64::new(0.5f64.sqrt(), 0.0);
        FieldSpec::superposition(gauss(0.0), &[(1, h), (2, h)]).validate().unwrap();
        FieldSpec::mixture(gauss(0.0), &[(1, 0.5), (2, 0.5)]).validate().unwrap();
    }

    #[test]
    fn unnormalized_coefficients_rejected() {
        assert!(FieldSpec::mixture(gauss(0.0), &[(1, 0.5), (2, 0.6)]).validate().is_err());
    }

    #[test]
    fn non_psd_coefficients_rejected() {
        let mut spec = FieldSpec::mixture(gauss(0.0), &[(0, 0.5), (1, 0.5)]);
        spec.coefficients.push((HierarchyIndex::single(0, 1), C64::new(0.8, 0.0)));
        spec.coefficients.push((HierarchyIndex::single(1, 0), C64::new(0.8, 0.0)));
        assert!(spec.validate().is_err());
    }

    #[test]
    fn coherent_truncation_keeps_unit_trace() {
        let spec = FieldSpec::coherent_truncated(gauss(0.0), C64::new(4.0, 0.0), 30);
        spec.validate().unwrap();
    }

    #[test]
    fn nonorthogonal_cap_enforced() {
        let slots = (0..5).map(|k| Slot { envelope: gauss(k as f64), mode: 0, max_photons: 1 }).collect();
        assert!(matches!(FieldSpec::product(slots, false).validate(), Err(FockError::Unsupported(_))));
    }
}
