//! Occupation-number decomposition of an N-photon temporal function over an
//! orthonormal set of temporal modes.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::envelope::{make_envelope, overlap, Envelope, EnvelopeKind};
use crate::error::{FockError, Result};
use crate::field::{FieldSpec, Slot};
use crate::hierarchy::HierarchyIndex;
use crate::operator::{C64, ONE, ZERO};
use crate::quadrature::integrate_with_breaks;

/// Largest photon number handled by the decomposition.
pub const MAX_PHOTONS: usize = 3;

#[derive(Clone, Debug)]
pub struct TemporalBasis {
    pub modes: Vec<Envelope>,
    pub gram_tolerance: f64,
}

impl TemporalBasis {
    pub fn new(modes: Vec<Envelope>, gram_tolerance: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(FockError::InvalidField("temporal basis needs at least one mode".into()));
        }
        for a in 0..modes.len() {
            for b in a..modes.len() {
                let o = overlap(&modes[a], &modes[b])?;
                let want = if a == b { ONE } else { ZERO };
                if (o - want).norm() > gram_tolerance {
                    return Err(FockError::InvalidField(format!("basis modes {a}, {b} have overlap {o}")));
                }
            }
        }
        Ok(TemporalBasis { modes, gram_tolerance })
    }

    /// Gram–Schmidt on `envelopes`, in order. Each mode is a combination of the
    /// original envelope kinds; nearly dependent inputs are dropped.
    pub fn gram_schmidt(envelopes: &[Envelope]) -> Result<Self> {
        let k = envelopes.len();
        let mut g = vec![vec![ZERO; k]; k];
        for a in 0..k {
            for b in 0..k {
                g[a][b] = if a == b { ONE } else { overlap(&envelopes[a], &envelopes[b])? };
            }
        }
        let inner = |x: &[C64], y: &[C64]| -> C64 {
            let mut s = ZERO;
            for a in 0..k {
                for b in 0..k {
                    s += x[a].conj() * g[a][b] * y[b];
                }
            }
            s
        };
        let mut rows: Vec<Vec<C64>> = Vec::new();
        for j in 0..k {
            let mut v = vec![ZERO; k];
            v[j] = ONE;
            for r in &rows {
                let p = inner(r, &v);
                v.iter_mut().zip(r).for_each(|(x, y)| *x -= p * y);
            }
            let n = inner(&v, &v).re;
            if n < 1e-10 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= n.sqrt());
            rows.push(v);
        }
        let modes = rows
            .iter()
            .map(|r| {
                let terms: Vec<(C64, EnvelopeKind)> =
                    r.iter().zip(envelopes).filter(|(c, _)| c.norm() > 0.0).map(|(c, e)| (*c, e.kind().clone())).collect();
                if terms.len() == 1 && (terms[0].0 - ONE).norm() < 1e-15 {
                    Ok(envelopes[r.iter().position(|c| c.norm() > 0.0).unwrap()].clone())
                } else {
                    make_envelope(EnvelopeKind::Combination { terms })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        TemporalBasis::new(modes, 1e-8)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

pub type PsiFn = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;

/// ψ(t₁, …, t_N), not necessarily symmetric.
#[derive(Clone)]
pub enum TemporalFunction {
    /// ψ = f₁(t₁) f₂(t₂) ⋯
    Product(Vec<Envelope>),
    General { photons: usize, support: (f64, f64), breaks: Vec<f64>, f: PsiFn },
}

impl TemporalFunction {
    pub fn photons(&self) -> usize {
        match self {
            TemporalFunction::Product(v) => v.len(),
            TemporalFunction::General { photons, .. } => *photons,
        }
    }
}

/// λ'_{α₁…α_N} = ∫ ξ*_{α₁}(t₁) ⋯ ξ*_{α_N}(t_N) ψ(t₁, …, t_N), row-major in the α's.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaTensor {
    pub photons: usize,
    pub modes: usize,
    pub data: Vec<C64>,
}

impl LambdaTensor {
    pub fn get(&self, alpha: &[usize]) -> C64 {
        self.data[alpha.iter().fold(0, |acc, &a| acc * self.modes + a)]
    }
}

fn multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out.into_iter().flat_map(|v| (0..k).map(move |a| [v.clone(), vec![a]].concat())).collect();
    }
    out
}

pub fn project_lambda(psi: &TemporalFunction, basis: &TemporalBasis, n: usize) -> Result<LambdaTensor> {
    if n == 0 || n > MAX_PHOTONS {
        return Err(FockError::Unsupported(format!("decomposition handles 1..={MAX_PHOTONS} photons, got {n}")));
    }
    if psi.photons() != n {
        return Err(FockError::InvalidField(format!("ψ has {} arguments, expected {n}", psi.photons())));
    }
    let k = basis.len();
    let data = match psi {
        TemporalFunction::Product(fs) => {
            let ov: Vec<Vec<C64>> = basis
                .modes
                .iter()
                .map(|m| fs.iter().map(|f| overlap(m, f)).collect::<Result<Vec<_>>>())
                .collect::<Result<_>>()?;
            multi_indices(n, k).iter().map(|al| al.iter().enumerate().map(|(j, &a)| ov[a][j]).product()).collect()
        }
        TemporalFunction::General { support, breaks, f, .. } => multi_indices(n, k)
            .iter()
            .map(|al| nested(al, basis, *support, breaks, f.as_ref(), &[]))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(LambdaTensor { photons: n, modes: k, data })
}

fn nested(
    alpha: &[usize],
    basis: &TemporalBasis,
    support: (f64, f64),
    breaks: &[f64],
    f: &(dyn Fn(&[f64]) -> C64 + Send + Sync),
    prefix: &[f64],
) -> Result<C64> {
    let depth = prefix.len();
    let mode = &basis.modes[alpha[depth]];
    let lo = support.0.max(mode.support().0);
    let hi = support.1.min(mode.support().1);
    if lo >= hi {
        return Ok(ZERO);
    }
    let mut bk = breaks.to_vec();
    bk.extend_from_slice(mode.breakpoints());
    let failure = RefCell::new(None);
    let v = integrate_with_breaks(
        |t| {
            let mut ts = prefix.to_vec();
            ts.push(t);
            let inner = if depth + 1 == alpha.len() {
                f(&ts)
            } else {
                nested(alpha, basis, support, breaks, f, &ts).unwrap_or_else(|e| {
                    failure.borrow_mut().get_or_insert(e);
                    ZERO
                })
            };
            mode.value(t).conj() * inner
        },
        lo,
        hi,
        &bk,
        1e-9,
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupationCoeffs {
    pub photons: usize,
    pub modes: usize,
    pub coeffs: BTreeMap<Vec<u32>, C64>,
}

/// Occupations of the multiset of mode labels in `alpha`.
fn occupation(alpha: &[usize], k: usize) -> Vec<u32> {
    let mut occ = vec![0u32; k];
    alpha.iter().for_each(|&a| occ[a] += 1);
    occ
}

/// c_n ∝ √(Π n_i!) Σ λ'_α over the distinct label sequences α with occupations n,
/// normalized so that Σ |c|² = 1.
pub fn occupation_coeffs(lambda: &LambdaTensor) -> Result<OccupationCoeffs> {
    let mut raw: BTreeMap<Vec<u32>, C64> = BTreeMap::new();
    for al in multi_indices(lambda.photons, lambda.modes) {
        *raw.entry(occupation(&al, lambda.modes)).or_insert(ZERO) += lambda.get(&al);
    }
    for (occ, c) in raw.iter_mut() {
        *c *= occ.iter().map(|&x| (1..=x).map(f64::from).product::<f64>()).product::<f64>().sqrt();
    }
    let norm: f64 = raw.values().map(|c| c.norm_sqr()).sum();
    if !(norm > 1e-24) {
        return Err(FockError::InvalidField("ψ has no weight in the span of the basis".into()));
    }
    raw.values_mut().for_each(|c| *c /= norm.sqrt());
    raw.retain(|_, c| c.norm() > 1e-15);
    Ok(OccupationCoeffs { photons: lambda.photons, modes: lambda.modes, coeffs: raw })
}

/// Field with one slot per basis mode on physical `mode` and coefficients c_m c_n*.
pub fn to_field_spec(coeffs: &OccupationCoeffs, basis: &TemporalBasis, mode: usize) -> Result<FieldSpec> {
    if basis.len() != coeffs.modes {
        return Err(FockError::Dimension("basis size does not match the occupation coefficients".into()));
    }
    let caps: Vec<u32> = (0..coeffs.modes).map(|s| coeffs.coeffs.keys().map(|o| o[s]).max().unwrap_or(0)).collect();
    let slots = basis
        .modes
        .iter()
        .zip(&caps)
        .map(|(e, &c)| Slot { envelope: e.clone(), mode, max_photons: c })
        .collect();
    let mut coefficients = Vec::new();
    for (m, cm) in &coeffs.coeffs {
        for (n, cn) in &coeffs.coeffs {
            coefficients.push((HierarchyIndex::new(m.clone(), n.clone()), cm * cn.conj()));
        }
    }
    let spec = FieldSpec { slots, coefficients, displacement: None, orthogonal: true };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(arrival: f64) -> Envelope {
        make_envelope(EnvelopeKind::Gaussian { bandwidth: 1.0, arrival }).unwrap()
    }

    fn pair_basis(d: f64) -> TemporalBasis {
        TemporalBasis::gram_schmidt(&[g(0.0), g(d)]).unwrap()
    }

    #[test]
    fn basis_aligned_products() {
        let b = pair_basis(2.0);
        let x1 = b.modes[0].clone();
        let x2 = b.modes[1].clone();
        let l = project_lambda(&TemporalFunction::Product(vec![x1.clone(), x1.clone()]), &b, 2).unwrap();
        assert!((l.get(&[0, 0]) - 1.0).norm() < 1e-9);
        assert!(l.get(&[0, 1]).norm() < 1e-9 && l.get(&[1, 1]).norm() < 1e-9);
        let l = project_lambda(&TemporalFunction::Product(vec![x1, x2]), &b, 2).unwrap();
        assert!((l.get(&[0, 1]) - 1.0).norm() < 1e-9);
        assert!(l.get(&[1, 0]).norm() < 1e-9);
    }

    #[test]
    fn gaussian_pair_in_closed_form() {
        // ⟨g(0)|g(d)⟩ = exp(−Δω²d²/8); φ₂ = (g(d) − s g(0))/√(1 − s²)
        let d = 1.5;
        let s = (-d * d / 8.0f64).exp();
        let b = pair_basis(d);
        let l = project_lambda(&TemporalFunction::Product(vec![g(0.0), g(d)]), &b, 2).unwrap();
        let r = (1.0 - s * s).sqrt();
        assert!((l.get(&[0, 0]) - s).norm() < 1e-9);
        assert!((l.get(&[0, 1]) - r).norm() < 1e-9);
        assert!(l.get(&[1, 0]).norm() < 1e-9);
        assert!(l.get(&[1, 1]).norm() < 1e-9);
        let general = TemporalFunction::General {
            photons: 2,
            support: (-12.0, 14.0),
            breaks: vec![0.0, d],
            f: Arc::new(move |t: &[f64]| g(0.0).value(t[0]) * g(d).value(t[1])),
        };
        let lg = project_lambda(&general, &b, 2).unwrap();
        for (a, b) in lg.data.iter().zip(&l.data) {
            assert!((a - b).norm() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn identical_photons_give_two_in_one_mode() {
        let b = pair_basis(2.0);
        let l = project_lambda(&TemporalFunction::Product(vec![g(0.0), g(0.0)]), &b, 2).unwrap();
        let c = occupation_coeffs(&l).unwrap();
        assert_eq!(c.coeffs.len(), 1);
        assert!((c.coeffs[&vec![2, 0]] - 1.0).norm() < 1e-9);
    }

    #[test]
    fn orthogonal_photons_give_one_each() {
        let b = pair_basis(2.0);
        let l = project_lambda(&TemporalFunction::Product(b.modes.clone()), &b, 2).unwrap();
        let c = occupation_coeffs(&l).unwrap();
        assert!((c.coeffs[&vec![1, 1]].norm() - 1.0).abs() < 1e-9);
        assert!(c.coeffs.get(&vec![2, 0]).map_or(0.0, |z| z.norm()) < 1e-8);
    }

    #[test]
    fn partial_overlap_is_normalized() {
        let d = 1.0;
        let s: f64 = (-d * d / 8.0f64).exp();
        let b = pair_basis(d);
        let l = project_lambda(&TemporalFunction::Product(vec![g(0.0), g(d)]), &b, 2).unwrap();
        let c = occupation_coeffs(&l).unwrap();
        let total: f64 = c.coeffs.values().map(|z| z.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // |c_20|² = 2s²/(1 + s²) for a product of two unit modes with overlap s
        assert!((c.coeffs[&vec![2, 0]].norm_sqr() - 2.0 * s * s / (1.0 + s * s)).abs() < 1e-8);
    }

    #[test]
    fn field_spec_outer_products() {
        let b = pair_basis(2.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let coeffs = OccupationCoeffs {
            photons: 2,
            modes: 2,
            coeffs: [(vec![2, 0], C64::new(h, 0.0)), (vec![0, 2], C64::new(-h, 0.0))].into_iter().collect(),
        };
        let spec = to_field_spec(&coeffs, &b, 0).unwrap();
        let map = spec.coefficient_map();
        assert_eq!(map.len(), 4);
        assert!((map[&HierarchyIndex::new(vec![2, 0], vec![0, 2])] + 0.5).norm() < 1e-15);
        assert!((map[&HierarchyIndex::new(vec![0, 2], vec![0, 2])] - 0.5).norm() < 1e-15);

        let pure = OccupationCoeffs { photons: 2, modes: 2, coeffs: [(vec![1, 1], ONE)].into_iter().collect() };
        let spec = to_field_spec(&pure, &b, 0).unwrap();
        assert_eq!(spec.coefficient_map().len(), 1);
    }

    #[test]
    fn too_many_photons_refused() {
        let b = pair_basis(2.0);
        let psi = TemporalFunction::Product(vec![g(0.0); 4]);
        assert!(matches!(project_lambda(&psi, &b, 4), Err(FockError::Unsupported(_))));
    }
}
