//! Index sets and storage for the generalized density operators ϱ_{m|n}.
//!
//! Only the canonical half (m ≤ n lexicographically) is stored by default;
//! the partner is recovered as ϱ_{n|m} = ϱ_{m|n}†. Operators that do not
//! obey that symmetry (two-time quantities) use full storage.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};
use crate::field::FieldSpec;
use crate::operator::{Operator, C64, ZERO};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HierarchyIndex {
    pub m: Vec<u32>,
    pub n: Vec<u32>,
}

impl HierarchyIndex {
    pub fn new(m: Vec<u32>, n: Vec<u32>) -> Self {
        HierarchyIndex { m, n }
    }

    /// Single-slot index (m, n).
    pub fn single(m: u32, n: u32) -> Self {
        HierarchyIndex { m: vec![m], n: vec![n] }
    }

    pub fn partner(&self) -> Self {
        HierarchyIndex { m: self.n.clone(), n: self.m.clone() }
    }

    pub fn is_canonical(&self) -> bool {
        self.m <= self.n
    }

    pub fn is_diagonal(&self) -> bool {
        self.m == self.n
    }

    pub fn total_m(&self) -> u32 {
        self.m.iter().sum()
    }

    pub fn total_n(&self) -> u32 {
        self.n.iter().sum()
    }
}

/// Where a (possibly non-stored) index lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ref {
    pub pos: usize,
    pub dag: bool,
}

/// Mixed-radix enumeration of the photon-number box with slot 0 most
/// significant, so integer order is lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexLayout {
    caps: Vec<u32>,
    strides: Vec<usize>,
    side: usize,
    full: bool,
    stored: Vec<HierarchyIndex>,
    pos: Vec<usize>,
}

const MISSING: usize = usize::MAX;

impl IndexLayout {
    pub fn new(caps: &[u32], full: bool) -> Self {
        let k = caps.len();
        let mut strides = vec![1usize; k];
        for s in (0..k.saturating_sub(1)).rev() {
            strides[s] = strides[s + 1] * (caps[s + 1] as usize + 1);
        }
        let side = if k == 0 { 1 } else { strides[0] * (caps[0] as usize + 1) };
        let mut stored = Vec::new();
        let mut pos = vec![MISSING; side * side];
        for cm in 0..side {
            for cn in 0..side {
                if full || cm <= cn {
                    pos[cm * side + cn] = stored.len();
                    stored.push(HierarchyIndex { m: decode(cm, caps, &strides), n: decode(cn, caps, &strides) });
                }
            }
        }
        IndexLayout { caps: caps.to_vec(), strides, side, full, stored, pos }
    }

    pub fn caps(&self) -> &[u32] {
        &self.caps
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    pub fn len(&self) -> usize {
        self.stored.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stored.is_empty()
    }

    pub fn stored(&self) -> &[HierarchyIndex] {
        &self.stored
    }

    pub fn code(&self, v: &[u32]) -> Option<usize> {
        if v.len() != self.caps.len() || v.iter().zip(&self.caps).any(|(x, c)| x > c) {
            return None;
        }
        Some(v.iter().zip(&self.strides).map(|(&x, &s)| x as usize * s).sum())
    }

    pub fn locate_codes(&self, cm: usize, cn: usize) -> Ref {
        let p = self.pos[cm * self.side + cn];
        if p != MISSING {
            Ref { pos: p, dag: false }
        } else {
            Ref { pos: self.pos[cn * self.side + cm], dag: true }
        }
    }

    pub fn locate(&self, idx: &HierarchyIndex) -> Option<Ref> {
        Some(self.locate_codes(self.code(&idx.m)?, self.code(&idx.n)?))
    }

    pub fn position(&self, idx: &HierarchyIndex) -> Option<usize> {
        match self.locate(idx)? {
            Ref { pos, dag: false } => Some(pos),
            _ => None,
        }
    }
}

fn decode(mut c: usize, caps: &[u32], strides: &[usize]) -> Vec<u32> {
    let mut v = vec![0; caps.len()];
    for s in 0..caps.len() {
        v[s] = (c / strides[s]) as u32;
        c %= strides[s];
    }
    v
}

/// Canonical index set for a field specification.
pub fn build_index_set(spec: &FieldSpec) -> Vec<HierarchyIndex> {
    IndexLayout::new(&spec.caps(), false).stored
}

#[derive(Clone, Debug)]
pub struct Hierarchy {
    layout: Arc<IndexLayout>,
    dim: usize,
    data: Vec<C64>,
}

impl Hierarchy {
    pub fn zeros(layout: Arc<IndexLayout>, dim: usize) -> Self {
        let data = vec![ZERO; layout.len() * dim * dim];
        Hierarchy { layout, dim, data }
    }

    pub fn from_data(layout: Arc<IndexLayout>, dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != layout.len() * dim * dim {
            return Err(FockError::Dimension("hierarchy data length does not match layout".into()));
        }
        Ok(Hierarchy { layout, dim, data })
    }

    pub fn layout(&self) -> &Arc<IndexLayout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn block(&self, pos: usize) -> &[C64] {
        let d2 = self.dim * self.dim;
        &self.data[pos * d2..(pos + 1) * d2]
    }

    pub fn block_mut(&mut self, pos: usize) -> &mut [C64] {
        let d2 = self.dim * self.dim;
        &mut self.data[pos * d2..(pos + 1) * d2]
    }

    /// ϱ_{m|n}, reconstructed from the partner when not stored.
    pub fn get(&self, idx: &HierarchyIndex) -> Option<Operator> {
        let r = self.layout.locate(idx)?;
        let op = Operator::from_vec(self.dim, self.block(r.pos).to_vec()).ok()?;
        Some(if r.dag { op.dagger() } else { op })
    }

    pub fn set(&mut self, idx: &HierarchyIndex, op: &Operator) -> Result<()> {
        let pos = self
            .layout
            .position(idx)
            .ok_or_else(|| FockError::Dimension(format!("index {idx:?} is not stored")))?;
        self.block_mut(pos).copy_from_slice(op.as_slice());
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HierarchyIndex, Operator)> + '_ {
        self.layout
            .stored()
            .iter()
            .enumerate()
            .map(move |(p, idx)| (idx, Operator::from_vec(self.dim, self.block(p).to_vec()).unwrap()))
    }

    pub fn max_abs_diff(&self, other: &Hierarchy) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn snapshot(&self, t: f64) -> Snapshot {
        Snapshot {
            t,
            dim: self.dim,
            caps: self.layout.caps().to_vec(),
            full: self.layout.is_full(),
            entries: self.iter().map(|(i, op)| (i.clone(), op)).collect(),
        }
    }
}

/// Serializable hierarchy state, used for checkpoints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub dim: usize,
    pub caps: Vec<u32>,
    pub full: bool,
    pub entries: Vec<(HierarchyIndex, Operator)>,
}

impl Snapshot {
    pub fn to_hierarchy(&self) -> Result<Hierarchy> {
        let layout = Arc::new(IndexLayout::new(&self.caps, self.full));
        let mut h = Hierarchy::zeros(layout, self.dim);
        if self.entries.len() != h.layout().len() {
            return Err(FockError::Dimension("snapshot does not cover the index set".into()));
        }
        for (idx, op) in &self.entries {
            if op.dim() != self.dim {
                return Err(FockError::Dimension("snapshot operator dimension mismatch".into()));
            }
            h.set(idx, op)?;
        }
        Ok(h)
    }
}

/// ϱ_{m|n}(0): ρ_sys·δ for orthogonal slots, ρ_sys·⟨ψ_n|ψ_m⟩/𝒩 otherwise.
pub fn initial_hierarchy(rho_sys: &Operator, spec: &FieldSpec) -> Result<Hierarchy> {
    if !rho_sys.is_hermitian(1e-10) || (rho_sys.trace().re - 1.0).abs() > 1e-8 {
        return Err(FockError::InvalidField("system state must be Hermitian with unit trace".into()));
    }
    let layout = Arc::new(IndexLayout::new(&spec.caps(), false));
    let mut h = Hierarchy::zeros(layout.clone(), rho_sys.dim());
    if spec.orthogonal {
        for (p, idx) in layout.stored().iter().enumerate() {
            if idx.is_diagonal() {
                h.block_mut(p).copy_from_slice(rho_sys.as_slice());
            }
        }
    } else {
        let gram = spec.gram()?;
        let norm = spec.normalization()?;
        for (p, idx) in layout.stored().iter().enumerate() {
            let g = gram(&idx.n, &idx.m) / norm;
            if g != ZERO {
                h.block_mut(p).copy_from_slice(rho_sys.scale(g).as_slice());
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_count_single_slot() {
        let l = IndexLayout::new(&[3], false);
        assert_eq!(l.len(), 10);
        assert!(l.stored().iter().all(|i| i.is_canonical()));
    }

    #[test]
    fn partner_found_by_dagger() {
        let l = IndexLayout::new(&[2, 1], false);
        let idx = HierarchyIndex::new(vec![1, 1], vec![0, 1]);
        let r = l.locate(&idx).unwrap();
        assert!(r.dag);
        assert_eq!(l.stored()[r.pos], idx.partner());
    }

    #[test]
    fn full_layout_stores_everything() {
        let l = IndexLayout::new(&[2], true);
        assert_eq!(l.len(), 9);
        assert!(l.stored().iter().all(|i| !l.locate(i).unwrap().dag));
    }

    #[test]
    fn out_of_box_index_is_none() {
        let l = IndexLayout::new(&[1], false);
        assert!(l.locate(&HierarchyIndex::single(2, 0)).is_none());
    }

    #[test]
    fn snapshot_roundtrip() {
        let l = Arc::new(IndexLayout::new(&[2], false));
        let mut h = Hierarchy::zeros(l, 2);
        for (k, z) in h.data_mut().iter_mut().enumerate() {
            *z = C64::new(k as f64, -(k as f64));
        }
        let back = h.snapshot(0.5).to_hierarchy().unwrap();
        assert_eq!(back.max_abs_diff(&h), 0.0);
    }
}
