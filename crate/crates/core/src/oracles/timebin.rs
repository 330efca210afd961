//! Brute-force time-bin (collision) model of the full system ⊗ field state.
//!
//! The field is cut into bins of width dt. Bin k meets the system during
//! [t_k, t_k + dt] through U = exp(−iH dt + √dt (L b_k† − L† b_k)). The
//! field state is kept in the occupation basis of all bins, truncated at a
//! total photon number, with one amplitude vector on the system per
//! configuration.

use crate::error::{FockError, Result};
use crate::field::FieldSpec;
use crate::operator::{Operator, SLHModel, C64, ZERO};
use crate::quadrature::integrate_with_breaks;

#[derive(Clone, Debug)]
pub struct TimeBinResult {
    /// Bin boundaries t0, t0 + dt, …, tf.
    pub times: Vec<f64>,
    pub states: Vec<Operator>,
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Rank of a sorted multiset of bins within its layer.
fn rank(sorted: &[usize]) -> usize {
    sorted.iter().enumerate().map(|(i, &k)| binom(k + i, i + 1)).sum()
}

fn layer_size(nbins: usize, s: usize) -> usize {
    binom(nbins + s - 1, s)
}

/// Visit every sorted multiset of size `s` over `0..nbins`, skipping bin `skip`.
fn for_each_multiset(nbins: usize, s: usize, skip: Option<usize>, f: &mut impl FnMut(&[usize])) {
    fn rec(nbins: usize, s: usize, skip: Option<usize>, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == s {
            f(cur);
            return;
        }
        for k in start..nbins {
            if Some(k) == skip {
                continue;
            }
            cur.push(k);
            rec(nbins, s, skip, k, cur, f);
            cur.pop();
        }
    }
    rec(nbins, s, skip, 0, &mut Vec::with_capacity(s), f);
}

/// Local generator on bin ⊗ system with bin occupancies 0..=cap; index o·d + a.
fn bin_propagator(h: &Operator, l: &Operator, dt: f64, cap: usize) -> Operator {
    let d = h.dim();
    let ld = l.dagger();
    let sq = dt.sqrt();
    let n = d * (cap + 1);
    let mut g = Operator::zeros(n);
    for o in 0..=cap {
        for a in 0..d {
            for b in 0..d {
                g[(o * d + a, o * d + b)] += h[(a, b)] * C64::new(0.0, -dt);
                if o >= 1 {
                    // ⟨o|b†|o−1⟩ = √o
                    g[(o * d + a, (o - 1) * d + b)] += l[(a, b)] * (sq * (o as f64).sqrt());
                }
                if o < cap {
                    // ⟨o|b|o+1⟩ = √(o+1)
                    g[(o * d + a, (o + 1) * d + b)] -= ld[(a, b)] * (sq * ((o + 1) as f64).sqrt());
                }
            }
        }
    }
    g.expm()
}

/// Reduced system states from a brute-force time-bin simulation on [t0, tf].
///
/// The field may hold at most two photons (in one slot); `extra` bounds how
/// many further photons the system can add to the field.
pub fn timebin_brute_force(
    model: &SLHModel,
    spec: &FieldSpec,
    rho_sys: &Operator,
    t0: f64,
    tf: f64,
    nbins: usize,
    extra: usize,
) -> Result<TimeBinResult> {
    if model.modes() != 1 || !model.scattering_is_identity() || !model.schedule.is_empty() {
        return Err(FockError::Unsupported("time-bin oracle needs one mode, S = I and a constant H".into()));
    }
    if spec.slots.len() > 1 || spec.total_cap() > 2 || spec.displacement.is_some() || !spec.orthogonal {
        return Err(FockError::Unsupported("time-bin oracle handles at most two photons in one slot".into()));
    }
    if nbins < 2 || !(tf > t0) {
        return Err(FockError::Unsupported("time-bin oracle needs at least two bins on t0 < tf".into()));
    }
    let d = model.dim();
    let n_in = spec.total_cap() as usize;
    let cap = n_in + extra;
    let dt = (tf - t0) / nbins as f64;

    // bin amplitudes of the mode function
    let mut u = vec![ZERO; nbins];
    if let Some(slot) = spec.slots.first() {
        let env = &slot.envelope;
        for (k, uk) in u.iter_mut().enumerate() {
            let a = t0 + k as f64 * dt;
            *uk = integrate_with_breaks(|t| env.value(t), a, a + dt, env.breakpoints(), 1e-14)? / dt.sqrt();
        }
        let norm: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(FockError::InvalidField("envelope has no weight inside the time window".into()));
        }
        u.iter_mut().for_each(|z| *z /= norm);
    }

    let props: Vec<Operator> = (0..=cap).map(|c| bin_propagator(&model.h, &model.l[0], dt, c)).collect();
    let field = spec.field_density()?;
    let (fvals, fvecs) = field.hermitian_eigen();
    let (svals, svecs) = rho_sys.hermitian_eigen();

    let times: Vec<f64> = (0..=nbins).map(|k| t0 + k as f64 * dt).collect();
    let mut states = vec![Operator::zeros(d); nbins + 1];
    for (pf, fv) in fvals.iter().zip(&fvecs) {
        for (ps, sv) in svals.iter().zip(&svecs) {
            let w = pf * ps;
            if w < 1e-14 {
                continue;
            }
            let run = run_pure(fv, sv, &u, &props, nbins, cap, d);
            for (acc, rho) in states.iter_mut().zip(run) {
                *acc += &rho.scale_re(w);
            }
        }
    }
    Ok(TimeBinResult { times, states })
}

fn partial_trace(layers: &[Vec<C64>], d: usize) -> Operator {
    let mut rho = Operator::zeros(d);
    for layer in layers {
        for v in layer.chunks(d) {
            for a in 0..d {
                if v[a] == ZERO {
                    continue;
                }
                for b in 0..d {
                    rho[(a, b)] += v[a] * v[b].conj();
                }
            }
        }
    }
    rho
}

fn run_pure(field: &[C64], sys: &[C64], u: &[C64], props: &[Operator], nbins: usize, cap: usize, d: usize) -> Vec<Operator> {
    let mut layers: Vec<Vec<C64>> = (0..=cap).map(|s| vec![ZERO; layer_size(nbins, s) * d]).collect();
    // |n⟩ = (B†)^n/√n! |0⟩ in bin occupations: √(n!/Π n_k!) Π u_k^{n_k}
    for (n, &an) in field.iter().enumerate() {
        if an == ZERO {
            continue;
        }
        let nf: f64 = (1..=n).map(|x| x as f64).product();
        for_each_multiset(nbins, n, None, &mut |cfg| {
            let mut amp = an * nf.sqrt();
            let mut i = 0;
            while i < cfg.len() {
                let mut j = i;
                while j < cfg.len() && cfg[j] == cfg[i] {
                    j += 1;
                }
                let occ = j - i;
                let of: f64 = (1..=occ).map(|x| x as f64).product();
                amp *= u[cfg[i]].powu(occ as u32) / of.sqrt();
                i = j;
            }
            let r = rank(cfg) * d;
            for a in 0..d {
                layers[n][r + a] += amp * sys[a];
            }
        });
    }

    let mut out = Vec::with_capacity(nbins + 1);
    out.push(partial_trace(&layers, d));
    let mut v = Vec::new();
    let mut w = Vec::new();
    let mut slots: Vec<usize> = Vec::new();
    let mut cfg: Vec<usize> = Vec::new();
    for k in 0..nbins {
        let live: Vec<bool> = layers.iter().map(|l| l.iter().any(|z| *z != ZERO)).collect();
        for s in 0..=cap {
            let local = cap - s;
            if !live[s..=cap].iter().any(|&x| x) {
                continue;
            }
            let prop = &props[local];
            let n = d * (local + 1);
            for_each_multiset(nbins, s, Some(k), &mut |rest| {
                // gather amplitudes for occupancies 0..=local of bin k
                v.clear();
                slots.clear();
                let mut any = false;
                let at = rest.partition_point(|&x| x < k);
                for o in 0..=local {
                    cfg.clear();
                    cfg.extend_from_slice(&rest[..at]);
                    cfg.extend(std::iter::repeat(k).take(o));
                    cfg.extend_from_slice(&rest[at..]);
                    let p = rank(&cfg) * d;
                    slots.push(p);
                    let layer = &layers[s + o];
                    for a in 0..d {
                        let z = layer[p + a];
                        any |= z != ZERO;
                        v.push(z);
                    }
                }
                if !any {
                    return;
                }
                w.clear();
                w.resize(n, ZERO);
                for i in 0..n {
                    let mut acc = ZERO;
                    for j in 0..n {
                        acc += prop[(i, j)] * v[j];
                    }
                    w[i] = acc;
                }
                for o in 0..=local {
                    let p = slots[o];
                    layers[s + o][p..p + d].copy_from_slice(&w[o * d..(o + 1) * d]);
                }
            });
        }
        out.push(partial_trace(&layers, d));
    }
    out
}
