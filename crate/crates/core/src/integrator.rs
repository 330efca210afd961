//! Explicit Runge–Kutta propagation: adaptive Dormand–Prince 5(4) or fixed-step RK4.

use crate::error::{FockError, Result};
use crate::field::FieldSpec;
use crate::hierarchy::Hierarchy;
use crate::operator::{Operator, C64, ZERO};
use crate::rhs::{Channel, Dynamics};

pub trait OdeSystem {
    fn len(&self) -> usize;
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]);
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Clone, Debug)]
pub struct TimeGrid {
    pub t0: f64,
    pub tf: f64,
    pub dt_max: f64,
    pub adaptive: bool,
    /// Step for the fixed-step mode.
    pub dt: f64,
    pub rtol: f64,
    pub atol: f64,
    pub breakpoints: Vec<f64>,
    /// Snapshot on a uniform lattice with this spacing; otherwise on accepted steps.
    pub sample_dt: Option<f64>,
    /// Keep every k-th accepted step when not sampling on a lattice.
    pub keep_every: usize,
    pub max_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64) -> Self {
        TimeGrid {
            t0,
            tf,
            dt_max: f64::INFINITY,
            adaptive: true,
            dt: (tf - t0) / 1000.0,
            rtol: 1e-9,
            atol: 1e-11,
            breakpoints: Vec::new(),
            sample_dt: None,
            keep_every: 1,
            max_steps: 20_000_000,
        }
    }

    pub fn sampled(t0: f64, tf: f64, samples: usize) -> Self {
        let mut g = Self::new(t0, tf);
        g.sample_dt = Some((tf - t0) / (samples.max(2) - 1) as f64);
        g
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn fixed(mut self, dt: f64) -> Self {
        self.adaptive = false;
        self.dt = dt;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |r: &str| Err(FockError::Integration { t: self.t0, reason: r.into() });
        if !(self.tf > self.t0) || !self.t0.is_finite() || !self.tf.is_finite() {
            return bad("time grid needs finite t0 < tf");
        }
        if self.adaptive && !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !self.adaptive && !(self.dt > 0.0) {
            return bad("fixed step must be positive");
        }
        if let Some(h) = self.sample_dt {
            if !(h > 0.0) {
                return bad("sample spacing must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn nudge_up(t: f64) -> f64 {
    t + t.abs().max(1.0) * 4.0 * f64::EPSILON
}

fn nudge_down(t: f64) -> f64 {
    t - t.abs().max(1.0) * 4.0 * f64::EPSILON
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn stage_time(t: f64, h: f64, c: f64) -> f64 {
    if c == 0.0 {
        nudge_up(t)
    } else if c == 1.0 {
        nudge_down(t + h)
    } else {
        t + c * h
    }
}

/// Integrate `sys` from `y0` over `grid`, calling `observe(t, y)` at t0, at
/// every snapshot and at tf.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[C64],
    grid: &TimeGrid,
    mut observe: impl FnMut(f64, &[C64]),
) -> Result<StepStats> {
    grid.validate()?;
    let n = sys.len();
    if y0.len() != n {
        return Err(FockError::Dimension(format!("state has {} entries, system expects {n}", y0.len())));
    }
    // hard stops: breakpoints and tf; soft stops: sample lattice
    let mut stops: Vec<f64> = sys.breakpoints();
    stops.extend(grid.breakpoints.iter().copied());
    stops.retain(|&b| b > grid.t0 && b < grid.tf);
    stops.push(grid.tf);
    stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stops.dedup();
    let tol_t = |x: f64| 1e-12 * x.abs().max(1.0);

    let mut t = grid.t0;
    let mut y = y0.to_vec();
    observe(t, &y);
    let mut stats = StepStats::default();
    let mut k: Vec<Vec<C64>> = vec![vec![ZERO; n]; 7];
    let mut tmp = vec![ZERO; n];
    let mut ynew = vec![ZERO; n];
    let span = grid.tf - grid.t0;
    let mut h = if grid.adaptive { (span * 1e-4).min(grid.dt_max) } else { grid.dt };
    let mut next_sample = grid.sample_dt.map(|s| grid.t0 + s);
    let mut sample_k = 1usize;
    let mut fresh = true;
    let mut since_kept = 0usize;
    let mut stop_idx = 0;

    while t < grid.tf - tol_t(grid.tf) {
        while stops[stop_idx] <= t + tol_t(t) {
            stop_idx += 1;
        }
        let mut target = stops[stop_idx];
        let mut at_sample = false;
        if let Some(ts) = next_sample {
            if ts < target - tol_t(target) {
                target = ts;
                at_sample = true;
            } else if (ts - target).abs() <= tol_t(target) {
                at_sample = true;
            }
        }
        let hard = !at_sample || (target - stops[stop_idx]).abs() <= tol_t(target);
        let mut step = if grid.adaptive { h.min(grid.dt_max) } else { grid.dt };
        let mut lands = false;
        if t + step >= target - tol_t(target) {
            step = target - t;
            lands = true;
        }
        if stats.accepted + stats.rejected > grid.max_steps {
            return Err(FockError::Integration { t, reason: "maximum number of steps exceeded".into() });
        }
        if !(step > tol_t(t) * 1e-2) {
            return Err(FockError::Integration { t, reason: format!("step size underflow (h = {step:.3e})") });
        }

        if grid.adaptive {
            if fresh {
                sys.rhs(stage_time(t, step, 0.0), &y, &mut k[0]);
                stats.evaluations += 1;
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, a) in A[s][..s].iter().enumerate() {
                        if *a != 0.0 {
                            acc += k[j][i] * (step * a);
                        }
                    }
                    tmp[i] = acc;
                }
                sys.rhs(stage_time(t, step, C[s]), &tmp, &mut k[s]);
                stats.evaluations += 1;
            }
            let mut err = 0.0f64;
            for i in 0..n {
                let mut y5 = y[i];
                let mut e = C64::new(0.0, 0.0);
                for s in 0..7 {
                    y5 += k[s][i] * (step * B5[s]);
                    e += k[s][i] * (step * (B5[s] - B4[s]));
                }
                ynew[i] = y5;
                let sc = grid.atol + grid.rtol * y[i].norm().max(y5.norm());
                err = err.max(e.norm() / sc);
            }
            if !err.is_finite() || ynew.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                if step < tol_t(t) {
                    return Err(FockError::Integration { t, reason: "non-finite state".into() });
                }
                h = step * 0.1;
                stats.rejected += 1;
                fresh = false;
                continue;
            }
            if err > 1.0 {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                stats.rejected += 1;
                fresh = false;
                continue;
            }
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !lands || step >= h {
                h = step * grow;
            }
            std::mem::swap(&mut y, &mut ynew);
            let (first, rest) = k.split_at_mut(1);
            std::mem::swap(&mut first[0], &mut rest[5]);
            fresh = lands && hard;
        } else {
            rk4_step(sys, t, step, &mut y, &mut k, &mut tmp);
            stats.evaluations += 4;
            if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(FockError::Integration { t, reason: "non-finite state".into() });
            }
        }
        stats.accepted += 1;
        t = if lands { target } else { t + step };
        since_kept += 1;

        let done = t >= grid.tf - tol_t(grid.tf);
        if lands && at_sample {
            sample_k += 1;
            next_sample = grid.sample_dt.map(|s| grid.t0 + s * sample_k as f64);
            observe(t, &y);
        } else if done {
            observe(t, &y);
        } else if grid.sample_dt.is_none() && since_kept >= grid.keep_every.max(1) {
            since_kept = 0;
            observe(t, &y);
        }
    }
    Ok(stats)
}

fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, h: f64, y: &mut [C64], k: &mut [Vec<C64>], tmp: &mut [C64]) {
    let n = y.len();
    sys.rhs(nudge_up(t), y, &mut k[0]);
    for i in 0..n {
        tmp[i] = y[i] + k[0][i] * (0.5 * h);
    }
    sys.rhs(t + 0.5 * h, tmp, &mut k[1]);
    for i in 0..n {
        tmp[i] = y[i] + k[1][i] * (0.5 * h);
    }
    sys.rhs(t + 0.5 * h, tmp, &mut k[2]);
    for i in 0..n {
        tmp[i] = y[i] + k[2][i] * h;
    }
    sys.rhs(nudge_down(t + h), tmp, &mut k[3]);
    for i in 0..n {
        y[i] += (k[0][i] + k[1][i] * 2.0 + k[2][i] * 2.0 + k[3][i]) * (h / 6.0);
    }
}

/// Hierarchy snapshots with co-integrated channel values.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Hierarchy>,
    /// Physical channel values (Σ c* E) per snapshot.
    pub channels: Vec<Vec<C64>>,
    pub channel_specs: Vec<Channel>,
    pub field: FieldSpec,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn physical_states(&self) -> Vec<Operator> {
        self.snapshots.iter().map(|h| crate::observables::physical_state(h, &self.field)).collect()
    }
}

pub fn propagate(h0: &Hierarchy, dynamics: &Dynamics, grid: &TimeGrid) -> Result<Trajectory> {
    let y0 = dynamics.initial_state(h0)?;
    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    let mut channels = Vec::new();
    let stats = integrate(dynamics, &y0, grid, |t, y| {
        times.push(t);
        snapshots.push(dynamics.hierarchy_from_state(y));
        channels.push(dynamics.channel_values(y));
    })?;
    Ok(Trajectory {
        times,
        snapshots,
        channels,
        channel_specs: dynamics.channels().to_vec(),
        field: dynamics.spec().clone(),
        stats,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvariantReport {
    /// max |Tr ϱ_{n|n}(t) − Tr ϱ_{n|n}(0)|
    pub diag_trace: f64,
    /// max |Tr ϱ_{m|n}(t) − Tr ϱ_{m|n}(0)|, m ≠ n
    pub offdiag_trace: f64,
    /// max ‖ρ − ρ†‖ of the physical state
    pub hermiticity: f64,
    /// smallest eigenvalue of the physical state
    pub min_eigenvalue: f64,
    /// max |Tr ρ − 1| of the physical state
    pub physical_trace: f64,
}

impl InvariantReport {
    pub fn within(&self, tol: f64) -> bool {
        self.diag_trace <= tol
            && self.offdiag_trace <= tol
            && self.hermiticity <= tol
            && self.min_eigenvalue >= -tol
            && self.physical_trace <= tol
    }
}

pub fn monitor_invariants(traj: &Trajectory) -> InvariantReport {
    let mut rep = InvariantReport { min_eigenvalue: f64::INFINITY, ..Default::default() };
    let Some(first) = traj.snapshots.first() else { return rep };
    let t0: Vec<C64> = first.iter().map(|(_, op)| op.trace()).collect();
    for h in &traj.snapshots {
        for (k, (idx, op)) in h.iter().enumerate() {
            let dev = (op.trace() - t0[k]).norm();
            if idx.is_diagonal() {
                rep.diag_trace = rep.diag_trace.max(dev);
            } else {
                rep.offdiag_trace = rep.offdiag_trace.max(dev);
            }
        }
        let rho = crate::observables::physical_state(h, &traj.field);
        rep.hermiticity = rep.hermiticity.max(rho.max_abs_diff(&rho.dagger()));
        rep.physical_trace = rep.physical_trace.max((rho.trace() - 1.0).norm());
        rep.min_eigenvalue = rep.min_eigenvalue.min(rho.hermitian_eigenvalues()[0]);
    }
    rep
}
