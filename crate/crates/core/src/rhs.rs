//! Right-hand side of the Fock-state master-equation hierarchy.
//!
//! One engine covers every variant. Each slot carries an envelope and the
//! physical mode it travels in; several slots on one mode describe
//! orthogonal temporal modes. Orthogonal slots use √m prefactors, the
//! non-orthogonal formulation uses m. A coherent displacement adds the
//! α-terms on a single-mode model.

use std::sync::Arc;

use crate::error::{FockError, Result};
use crate::field::FieldSpec;
use crate::hierarchy::{Hierarchy, HierarchyIndex, IndexLayout, Ref};
use crate::integrator::OdeSystem;
use crate::operator::{axpy, dagger_into, gemm_acc, inner_slice, Operator, SLHModel, C64, I, ONE, ZERO};

/// Output-field quantity co-integrated with the hierarchy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Channel {
    /// ∫ ⟨b_i,out† b_j,out⟩ dt
    Flux { i: usize, j: usize },
    /// ∫ ⟨e^{iφ} b_out + e^{-iφ} b_out†⟩ dt on `mode`
    Quadrature { mode: usize, phase: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Prefactor {
    Sqrt,
    Linear,
}

#[derive(Clone, Debug)]
struct Lower {
    slot: usize,
    coef: f64,
    at: Ref,
}

#[derive(Clone, Debug)]
struct LowerBoth {
    s: usize,
    s2: usize,
    coef: f64,
    at: Ref,
}

#[derive(Clone, Debug, Default)]
struct Stencil {
    m_low: Vec<Lower>,
    n_low: Vec<Lower>,
    mn_low: Vec<LowerBoth>,
}

#[derive(Clone, Debug)]
struct Accumulator {
    channel: usize,
    at: Ref,
    weight: C64,
    stencil: Stencil,
}

type Block = Vec<C64>;

#[derive(Clone, Debug)]
struct Segment {
    start: f64,
    // K = −iH − ½ Σ L†L and its adjoint
    k: Block,
    kd: Block,
}

/// Prepared dynamics for a model and field specification.
#[derive(Clone, Debug)]
pub struct Dynamics {
    model: SLHModel,
    spec: FieldSpec,
    layout: Arc<IndexLayout>,
    dim: usize,
    prefactor: Prefactor,
    slot_mode: Vec<usize>,
    segments: Vec<Segment>,
    l: Vec<Block>,
    ld: Vec<Block>,
    // s[i][j], None when the block vanishes; sd = S_ij†
    s: Vec<Vec<Option<Block>>>,
    sd: Vec<Vec<Option<Block>>>,
    s_identity: bool,
    stencils: Vec<Stencil>,
    channels: Vec<Channel>,
    accumulators: Vec<Accumulator>,
}

fn block(op: &Operator) -> Block {
    op.as_slice().to_vec()
}

impl Dynamics {
    /// Dynamics on the canonical half, co-integrating `channels`.
    pub fn new(model: &SLHModel, spec: &FieldSpec, channels: &[Channel]) -> Result<Self> {
        Self::build(model, spec, channels, false)
    }

    /// Dynamics on full (non-Hermitian) storage, used for two-time quantities.
    pub fn new_full(model: &SLHModel, spec: &FieldSpec) -> Result<Self> {
        Self::build(model, spec, &[], true)
    }

    fn build(model: &SLHModel, spec: &FieldSpec, channels: &[Channel], full: bool) -> Result<Self> {
        model.validate()?;
        spec.validate_for(model)?;
        let d = model.dim();
        let m = model.modes();
        for c in channels {
            match *c {
                Channel::Flux { i, j } if i >= m || j >= m => {
                    return Err(FockError::InvalidField(format!("flux channel ({i},{j}) outside {m} mode(s)")))
                }
                Channel::Quadrature { mode, .. } if mode >= m => {
                    return Err(FockError::InvalidField(format!("quadrature on mode {mode} outside {m} mode(s)")))
                }
                _ => {}
            }
        }
        let layout = Arc::new(IndexLayout::new(&spec.caps(), full));
        let prefactor = if spec.orthogonal { Prefactor::Sqrt } else { Prefactor::Linear };
        let ldl = model.l.iter().fold(Operator::zeros(d), |acc, l| &acc + &l.dagger().matmul(l));
        let mut hs = vec![(f64::NEG_INFINITY, model.h.clone())];
        hs.extend(model.schedule.iter().cloned());
        let segments = hs
            .into_iter()
            .map(|(start, h)| {
                let k = &h.scale(-I) - &ldl.scale_re(0.5);
                Segment { start, kd: block(&k.dagger()), k: block(&k) }
            })
            .collect();
        let nz = |op: &Operator| if op.is_zero() { None } else { Some(block(op)) };
        let s = model.s.iter().map(|row| row.iter().map(nz).collect()).collect();
        let sd = model.s.iter().map(|row| row.iter().map(|x| nz(&x.dagger())).collect()).collect();

        let mut dynamics = Dynamics {
            model: model.clone(),
            spec: spec.clone(),
            layout: layout.clone(),
            dim: d,
            prefactor,
            slot_mode: spec.slots.iter().map(|s| s.mode).collect(),
            segments,
            l: model.l.iter().map(block).collect(),
            ld: model.l.iter().map(|l| block(&l.dagger())).collect(),
            s,
            sd,
            s_identity: model.scattering_is_identity(),
            stencils: Vec::new(),
            channels: channels.to_vec(),
            accumulators: Vec::new(),
        };
        dynamics.stencils = layout.stored().iter().map(|idx| dynamics.stencil(idx)).collect();
        let coef = spec.coefficient_map();
        for (ch, _) in channels.iter().enumerate() {
            for (idx, c) in &coef {
                let at = layout.locate(idx).expect("coefficient index inside the box");
                dynamics.accumulators.push(Accumulator { channel: ch, at, weight: c.conj(), stencil: dynamics.stencil(idx) });
            }
        }
        Ok(dynamics)
    }

    fn factor(&self, k: u32) -> f64 {
        match self.prefactor {
            Prefactor::Sqrt => (k as f64).sqrt(),
            Prefactor::Linear => k as f64,
        }
    }

    fn stencil(&self, idx: &HierarchyIndex) -> Stencil {
        let lay = &self.layout;
        let cm = lay.code(&idx.m).unwrap();
        let cn = lay.code(&idx.n).unwrap();
        let k = idx.m.len();
        let stride = |s: usize| lay.code(&unit(k, s)).unwrap();
        let mut st = Stencil::default();
        for s in 0..k {
            if idx.m[s] > 0 {
                st.m_low.push(Lower { slot: s, coef: self.factor(idx.m[s]), at: lay.locate_codes(cm - stride(s), cn) });
            }
            if idx.n[s] > 0 {
                st.n_low.push(Lower { slot: s, coef: self.factor(idx.n[s]), at: lay.locate_codes(cm, cn - stride(s)) });
            }
        }
        for s in 0..k {
            for s2 in 0..k {
                if idx.m[s] > 0 && idx.n[s2] > 0 {
                    let coef = self.factor(idx.m[s]) * self.factor(idx.n[s2]);
                    st.mn_low.push(LowerBoth { s, s2, coef, at: lay.locate_codes(cm - stride(s), cn - stride(s2)) });
                }
            }
        }
        st
    }

    pub fn model(&self) -> &SLHModel {
        &self.model
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Arc<IndexLayout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn hierarchy_len(&self) -> usize {
        self.layout.len() * self.dim * self.dim
    }

    /// Indices read when evaluating the derivative of `idx`.
    pub fn dependencies(&self, idx: &HierarchyIndex) -> Vec<HierarchyIndex> {
        let st = self.stencil(idx);
        let name = |r: &Ref| {
            let i = self.layout.stored()[r.pos].clone();
            if r.dag {
                i.partner()
            } else {
                i
            }
        };
        let mut out = vec![idx.clone()];
        out.extend(st.m_low.iter().map(|l| name(&l.at)));
        out.extend(st.n_low.iter().map(|l| name(&l.at)));
        out.extend(st.mn_low.iter().map(|l| name(&l.at)));
        out
    }

    /// Breakpoints of the envelopes and of the Hamiltonian schedule.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.spec.slots.iter().flat_map(|s| s.envelope.breakpoints().to_vec()).collect();
        if let Some(d) = &self.spec.displacement {
            b.extend(d.envelope.breakpoints());
        }
        b.extend(self.model.switch_times());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup();
        b
    }

    fn segment(&self, t: f64) -> &Segment {
        self.segments.iter().rev().find(|s| t >= s.start).unwrap_or(&self.segments[0])
    }

    fn fetch<'a>(&self, y: &'a [C64], r: Ref, scratch: &'a mut Block) -> &'a [C64] {
        let d2 = self.dim * self.dim;
        let src = &y[r.pos * d2..(r.pos + 1) * d2];
        if r.dag {
            dagger_into(scratch, src, self.dim);
            scratch
        } else {
            src
        }
    }

    fn xi(&self, t: f64) -> Vec<C64> {
        self.spec.slots.iter().map(|s| s.envelope.value(t)).collect()
    }

    /// Derivative of the hierarchy part of the state vector.
    fn hierarchy_rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let d = self.dim;
        let d2 = d * d;
        let xi = self.xi(t);
        let alpha = self.spec.displacement.as_ref().map(|a| a.value(t)).unwrap_or(ZERO);
        let seg = self.segment(t);
        let mut sx = vec![ZERO; d2];
        let mut y1 = vec![ZERO; d2];
        let mut y2 = vec![ZERO; d2];
        for (p, st) in self.stencils.iter().enumerate() {
            let rho = &y[p * d2..(p + 1) * d2];
            let out = &mut dy[p * d2..(p + 1) * d2];
            out.iter_mut().for_each(|z| *z = ZERO);
            gemm_acc(out, ONE, &seg.k, rho, d);
            gemm_acc(out, ONE, rho, &seg.kd, d);
            for (l, ld) in self.l.iter().zip(&self.ld) {
                y1.iter_mut().for_each(|z| *z = ZERO);
                gemm_acc(&mut y1, ONE, l, rho, d);
                gemm_acc(out, ONE, &y1, ld, d);
            }
            if alpha != ZERO {
                self.displacement_terms(out, rho, alpha, &mut y1);
            }
            for lo in &st.m_low {
                let x = self.fetch(y, lo.at, &mut sx);
                let a = xi[lo.slot] * lo.coef;
                if a == ZERO {
                    continue;
                }
                let j = self.slot_mode[lo.slot];
                for i in 0..self.l.len() {
                    // a [S_ij X, L_i†]
                    let Some(sij) = &self.s[i][j] else { continue };
                    let yx: &[C64] = if self.s_identity {
                        x
                    } else {
                        y2.iter_mut().for_each(|z| *z = ZERO);
                        gemm_acc(&mut y2, ONE, sij, x, d);
                        &y2
                    };
                    gemm_acc(out, a, yx, &self.ld[i], d);
                    gemm_acc(out, -a, &self.ld[i], yx, d);
                }
                if alpha != ZERO && !self.s_identity {
                    // α* a (S X S† − X)
                    self.sandwich_minus(out, x, alpha.conj() * a, &mut y1);
                }
            }
            for lo in &st.n_low {
                let x = self.fetch(y, lo.at, &mut sx);
                let b = xi[lo.slot].conj() * lo.coef;
                if b == ZERO {
                    continue;
                }
                let j = self.slot_mode[lo.slot];
                for i in 0..self.l.len() {
                    // b [L_i, X S_ij†]
                    let Some(sdij) = &self.sd[i][j] else { continue };
                    let xs: &[C64] = if self.s_identity {
                        x
                    } else {
                        y2.iter_mut().for_each(|z| *z = ZERO);
                        gemm_acc(&mut y2, ONE, x, sdij, d);
                        &y2
                    };
                    gemm_acc(out, b, &self.l[i], xs, d);
                    gemm_acc(out, -b, xs, &self.l[i], d);
                }
                if alpha != ZERO && !self.s_identity {
                    self.sandwich_minus(out, x, alpha * b, &mut y1);
                }
            }
            if !self.s_identity {
                for lo in &st.mn_low {
                    let e = xi[lo.s] * xi[lo.s2].conj() * lo.coef;
                    if e == ZERO {
                        continue;
                    }
                    let x = self.fetch(y, lo.at, &mut sx);
                    let (i, j) = (self.slot_mode[lo.s], self.slot_mode[lo.s2]);
                    // e (Σ_k S_ki X S_kj† − δ_ij X)
                    for k in 0..self.l.len() {
                        let (Some(ski), Some(sdkj)) = (&self.s[k][i], &self.sd[k][j]) else { continue };
                        y1.iter_mut().for_each(|z| *z = ZERO);
                        gemm_acc(&mut y1, ONE, ski, x, d);
                        gemm_acc(out, e, &y1, sdkj, d);
                    }
                    if i == j {
                        axpy(out, -e, x);
                    }
                }
            }
        }
    }

    // α[Sρ, L†] + α*[L, ρS†] + |α|²(SρS† − ρ) on a single-mode model
    fn displacement_terms(&self, out: &mut [C64], rho: &[C64], alpha: C64, tmp: &mut Block) {
        let d = self.dim;
        let s = self.s[0][0].as_ref().expect("single-mode scattering is unitary");
        let sd = self.sd[0][0].as_ref().unwrap();
        tmp.iter_mut().for_each(|z| *z = ZERO);
        gemm_acc(tmp, ONE, s, rho, d);
        gemm_acc(out, alpha, tmp, &self.ld[0], d);
        gemm_acc(out, -alpha, &self.ld[0], tmp, d);
        tmp.iter_mut().for_each(|z| *z = ZERO);
        gemm_acc(tmp, ONE, rho, sd, d);
        gemm_acc(out, alpha.conj(), &self.l[0], tmp, d);
        gemm_acc(out, -alpha.conj(), tmp, &self.l[0], d);
        if !self.s_identity {
            self.sandwich_minus(out, rho, C64::new(alpha.norm_sqr(), 0.0), tmp);
        }
    }

    // out += c (S X S† − X), single mode
    fn sandwich_minus(&self, out: &mut [C64], x: &[C64], c: C64, tmp: &mut Block) {
        let d = self.dim;
        let s = self.s[0][0].as_ref().unwrap();
        let sd = self.sd[0][0].as_ref().unwrap();
        tmp.iter_mut().for_each(|z| *z = ZERO);
        gemm_acc(tmp, ONE, s, x, d);
        gemm_acc(out, c, tmp, sd, d);
        axpy(out, -c, x);
    }

    /// E_r[X] = Tr[ϱ† X] for a located entry.
    fn expect_at(&self, y: &[C64], r: Ref, x: &[C64]) -> C64 {
        let d = self.dim;
        let d2 = d * d;
        let src = &y[r.pos * d2..(r.pos + 1) * d2];
        if r.dag {
            // ϱ = Y†, Tr[Y X]
            let mut acc = ZERO;
            for a in 0..d {
                for b in 0..d {
                    acc += src[a * d + b] * x[b * d + a];
                }
            }
            acc
        } else {
            inner_slice(src, x)
        }
    }

    fn op_product(&self, a: Option<&Block>, b: Option<&Block>) -> Option<Block> {
        let (a, b) = (a?, b?);
        let mut out = vec![ZERO; self.dim * self.dim];
        gemm_acc(&mut out, ONE, a, b, self.dim);
        Some(out)
    }

    fn identity_block(&self) -> Block {
        block(&Operator::identity(self.dim))
    }

    /// Derivative of E_{m|n} for one channel and one hierarchy index.
    fn channel_rate(&self, channel: Channel, acc_at: Ref, st: &Stencil, t: f64, y: &[C64]) -> C64 {
        let xi = self.xi(t);
        let alpha = self.spec.displacement.as_ref().map(|a| a.value(t)).unwrap_or(ZERO);
        let idb = self.identity_block();
        match channel {
            Channel::Flux { i, j } => {
                let ldl = self.op_product(Some(&self.ld[i]), Some(&self.l[j])).unwrap();
                let mut rate = self.expect_at(y, acc_at, &ldl);
                for lo in &st.m_low {
                    let mu = self.slot_mode[lo.slot];
                    if let Some(x) = self.op_product(self.sd[i][mu].as_ref(), Some(&self.l[j])) {
                        rate += xi[lo.slot].conj() * lo.coef * self.expect_at(y, lo.at, &x);
                    }
                }
                for lo in &st.n_low {
                    let mu = self.slot_mode[lo.slot];
                    if let Some(x) = self.op_product(Some(&self.ld[i]), self.s[j][mu].as_ref()) {
                        rate += xi[lo.slot] * lo.coef * self.expect_at(y, lo.at, &x);
                    }
                }
                for lo in &st.mn_low {
                    let (mu, nu) = (self.slot_mode[lo.s], self.slot_mode[lo.s2]);
                    if let Some(x) = self.op_product(self.sd[i][mu].as_ref(), self.s[j][nu].as_ref()) {
                        rate += xi[lo.s].conj() * xi[lo.s2] * lo.coef * self.expect_at(y, lo.at, &x);
                    }
                }
                if alpha != ZERO {
                    // b_out = L + S(b_in + α) on a single mode
                    let sdl = self.op_product(self.sd[0][0].as_ref(), Some(&self.l[0])).unwrap();
                    let lds = self.op_product(Some(&self.ld[0]), self.s[0][0].as_ref()).unwrap();
                    rate += alpha.conj() * self.expect_at(y, acc_at, &sdl);
                    rate += alpha * self.expect_at(y, acc_at, &lds);
                    rate += alpha.norm_sqr() * self.expect_at(y, acc_at, &idb);
                    for lo in &st.n_low {
                        rate += alpha.conj() * xi[lo.slot] * lo.coef * self.expect_at(y, lo.at, &idb);
                    }
                    for lo in &st.m_low {
                        rate += alpha * xi[lo.slot].conj() * lo.coef * self.expect_at(y, lo.at, &idb);
                    }
                }
                rate
            }
            Channel::Quadrature { mode: i, phase } => {
                let e = C64::from_polar(1.0, phase);
                let mut z = vec![ZERO; self.dim * self.dim];
                axpy(&mut z, e, &self.l[i]);
                axpy(&mut z, e.conj(), &self.ld[i]);
                if alpha != ZERO {
                    let s = self.s[0][0].as_ref().unwrap();
                    let sd = self.sd[0][0].as_ref().unwrap();
                    axpy(&mut z, e * alpha, s);
                    axpy(&mut z, (e * alpha).conj(), sd);
                }
                let mut rate = self.expect_at(y, acc_at, &z);
                for lo in &st.n_low {
                    let mu = self.slot_mode[lo.slot];
                    if let Some(s) = &self.s[i][mu] {
                        rate += e * xi[lo.slot] * lo.coef * self.expect_at(y, lo.at, s);
                    }
                }
                for lo in &st.m_low {
                    let mu = self.slot_mode[lo.slot];
                    if let Some(sd) = &self.sd[i][mu] {
                        rate += e.conj() * xi[lo.slot].conj() * lo.coef * self.expect_at(y, lo.at, sd);
                    }
                }
                rate
            }
        }
    }

    /// Derivative of one channel's physical value, Σ c* dE_{m|n}/dt.
    pub fn channel_derivative(&self, channel: Channel, t: f64, h: &Hierarchy) -> C64 {
        let y = h.data();
        self.spec
            .coefficient_map()
            .iter()
            .map(|(idx, c)| {
                let at = self.layout.locate(idx).unwrap();
                c.conj() * self.channel_rate(channel, at, &self.stencil(idx), t, y)
            })
            .sum()
    }

    /// dϱ/dt for a hierarchy laid out like this dynamics.
    pub fn derivative(&self, h: &Hierarchy, t: f64) -> Result<Hierarchy> {
        if h.layout().as_ref() != self.layout.as_ref() || h.dim() != self.dim {
            return Err(FockError::Dimension("hierarchy layout does not match the dynamics".into()));
        }
        let mut out = Hierarchy::zeros(self.layout.clone(), self.dim);
        self.hierarchy_rhs(t, h.data(), out.data_mut());
        Ok(out)
    }

    /// Full ODE state for an initial hierarchy: entries followed by zeroed accumulators.
    pub fn initial_state(&self, h0: &Hierarchy) -> Result<Vec<C64>> {
        if h0.layout().as_ref() != self.layout.as_ref() || h0.dim() != self.dim {
            return Err(FockError::Dimension("initial hierarchy layout does not match the dynamics".into()));
        }
        let mut y = h0.data().to_vec();
        y.resize(y.len() + self.accumulators.len(), ZERO);
        Ok(y)
    }

    pub fn hierarchy_from_state(&self, y: &[C64]) -> Hierarchy {
        Hierarchy::from_data(self.layout.clone(), self.dim, y[..self.hierarchy_len()].to_vec()).unwrap()
    }

    /// Physical channel values Σ c* E_{m|n} from a full state vector.
    pub fn channel_values(&self, y: &[C64]) -> Vec<C64> {
        let base = self.hierarchy_len();
        let mut out = vec![ZERO; self.channels.len()];
        for (k, a) in self.accumulators.iter().enumerate() {
            out[a.channel] += a.weight * y[base + k];
        }
        out
    }

    /// Σ c_{m|n} ϱ_{m|n} from a full state vector.
    pub fn physical_from_state(&self, y: &[C64]) -> Operator {
        let d2 = self.dim * self.dim;
        let mut acc = vec![ZERO; d2];
        let mut tmp = vec![ZERO; d2];
        for (idx, c) in self.spec.coefficient_map() {
            let r = self.layout.locate(&idx).unwrap();
            let x = self.fetch(y, r, &mut tmp);
            axpy(&mut acc, c, x);
        }
        Operator::from_vec(self.dim, acc).unwrap()
    }
}

fn unit(k: usize, s: usize) -> Vec<u32> {
    let mut v = vec![0; k];
    v[s] = 1;
    v
}

impl OdeSystem for Dynamics {
    fn len(&self) -> usize {
        self.hierarchy_len() + self.accumulators.len()
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let base = self.hierarchy_len();
        let (dh, da) = dy.split_at_mut(base);
        self.hierarchy_rhs(t, &y[..base], dh);
        for (k, a) in self.accumulators.iter().enumerate() {
            da[k] = self.channel_rate(self.channels[a.channel], a.at, &a.stencil, t, &y[..base]);
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        Dynamics::breakpoints(self)
    }
}

fn check(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(FockError::Unsupported(what.into()))
    }
}

/// dϱ/dt for N photons in one temporal mode of a single-mode model.
pub fn rhs_single_mode(h: &Hierarchy, t: f64, model: &SLHModel, spec: &FieldSpec) -> Result<Hierarchy> {
    check(model.modes() == 1, "single-mode equations need one coupling operator")?;
    check(spec.slots.len() <= 1 && spec.orthogonal && spec.displacement.is_none(), "single-mode equations need one orthogonal slot and no displacement")?;
    Dynamics::new(model, spec, &[])?.derivative(h, t)
}

/// dϱ/dt with an added coherent displacement α(t).
pub fn rhs_displaced(h: &Hierarchy, t: f64, model: &SLHModel, spec: &FieldSpec) -> Result<Hierarchy> {
    check(model.modes() == 1, "displaced equations need one coupling operator")?;
    check(spec.displacement.is_some() && spec.orthogonal, "displaced equations need a displacement and orthogonal slots")?;
    Dynamics::new(model, spec, &[])?.derivative(h, t)
}

/// dϱ/dt for several orthogonal slots over one or more physical modes.
pub fn rhs_multimode(h: &Hierarchy, t: f64, model: &SLHModel, spec: &FieldSpec) -> Result<Hierarchy> {
    check(spec.orthogonal && spec.displacement.is_none(), "multimode equations need orthogonal slots")?;
    Dynamics::new(model, spec, &[])?.derivative(h, t)
}

/// dϱ/dt for a product of non-orthogonal single-mode wave packets.
pub fn rhs_nonorthogonal(h: &Hierarchy, t: f64, model: &SLHModel, spec: &FieldSpec) -> Result<Hierarchy> {
    check(!spec.orthogonal && spec.displacement.is_none(), "non-orthogonal equations need orthogonal = false")?;
    Dynamics::new(model, spec, &[])?.derivative(h, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{make_envelope, EnvelopeKind};
    use crate::hierarchy::initial_hierarchy;
    use crate::operator::lindblad;

    fn atom(gamma: f64) -> SLHModel {
        SLHModel::new(vec![Operator::ket_bra(2, 0, 1).scale_re(gamma.sqrt())], Operator::zeros(2)).unwrap()
    }

    fn gauss() -> crate::envelope::Envelope {
        make_envelope(EnvelopeKind::Gaussian { bandwidth: 1.46, arrival: 0.0 }).unwrap()
    }

    fn random_hierarchy(dynamics: &Dynamics, seed: u64) -> Hierarchy {
        let mut h = Hierarchy::zeros(dynamics.layout().clone(), dynamics.dim());
        let mut x = seed;
        for z in h.data_mut() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            *z = C64::new(a, b);
        }
        h
    }

    #[test]
    fn one_photon_top_entry_matches_hand_expansion() {
        let model = atom(1.0);
        let spec = FieldSpec::fock(gauss(), 1);
        let dynamics = Dynamics::new(&model, &spec, &[]).unwrap();
        let h = random_hierarchy(&dynamics, 7);
        let t = 0.3;
        let xi = gauss().value(t);
        let d = dynamics.derivative(&h, t).unwrap();
        let l = Operator::ket_bra(2, 0, 1);
        let ld = l.dagger();
        let r11 = h.get(&HierarchyIndex::single(1, 1)).unwrap();
        let r01 = h.get(&HierarchyIndex::single(0, 1)).unwrap();
        let r10 = r01.dagger();
        let mut want = lindblad(&l, &r11);
        want += &r01.commutator(&ld).scale(xi);
        want += &l.commutator(&r10).scale(xi.conj());
        let got = d.get(&HierarchyIndex::single(1, 1)).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn scattering_phase_enters_through_s_terms() {
        let s = vec![vec![Operator::identity(2).scale(C64::from_polar(1.0, 0.7))]];
        let model = SLHModel::with_scattering(s.clone(), vec![Operator::ket_bra(2, 0, 1)], Operator::zeros(2)).unwrap();
        let spec = FieldSpec::fock(gauss(), 1);
        let dynamics = Dynamics::new(&model, &spec, &[]).unwrap();
        let h = random_hierarchy(&dynamics, 3);
        let t = -0.2;
        let xi = gauss().value(t);
        let got = dynamics.derivative(&h, t).unwrap().get(&HierarchyIndex::single(1, 1)).unwrap();
        let l = Operator::ket_bra(2, 0, 1);
        let sm = &s[0][0];
        let r11 = h.get(&HierarchyIndex::single(1, 1)).unwrap();
        let r01 = h.get(&HierarchyIndex::single(0, 1)).unwrap();
        let r10 = h.get(&HierarchyIndex::single(1, 0)).unwrap();
        let r00 = h.get(&HierarchyIndex::single(0, 0)).unwrap();
        let mut want = lindblad(&l, &r11);
        want += &sm.matmul(&r01).commutator(&l.dagger()).scale(xi);
        want += &l.commutator(&r10.matmul(&sm.dagger())).scale(xi.conj());
        want += &(&sm.matmul(&r00).matmul(&sm.dagger()) - &r00).scale(C64::new(xi.norm_sqr(), 0.0));
        assert!(got.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn coupling_is_downward_only() {
        let model = atom(1.0);
        let spec = FieldSpec::fock(gauss(), 3);
        let dynamics = Dynamics::new(&model, &spec, &[]).unwrap();
        for idx in dynamics.layout().stored() {
            for dep in dynamics.dependencies(idx) {
                assert!(dep.total_m() <= idx.total_m() && dep.total_n() <= idx.total_n());
            }
        }
    }

    #[test]
    fn initial_state_derivative_is_traceless_on_diagonal() {
        let model = atom(1.0);
        let spec = FieldSpec::fock(gauss(), 2);
        let h = initial_hierarchy(&Operator::ket_bra(2, 0, 0), &spec).unwrap();
        let d = rhs_single_mode(&h, 0.1, &model, &spec).unwrap();
        for (idx, op) in d.iter() {
            if idx.is_diagonal() {
                assert!(op.trace().norm() < 1e-15);
            }
        }
    }

    #[test]
    fn wrong_variant_is_refused() {
        let model = atom(1.0);
        let spec = FieldSpec::fock(gauss(), 1);
        let h = initial_hierarchy(&Operator::ket_bra(2, 0, 0), &spec).unwrap();
        assert!(rhs_nonorthogonal(&h, 0.0, &model, &spec).is_err());
        assert!(rhs_displaced(&h, 0.0, &model, &spec).is_err());
    }
}
