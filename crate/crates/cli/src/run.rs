//! A single scenario run: observables sampled on the time grid plus an
//! inline invariant monitor.

use fockflow::integrator::integrate;
use fockflow::observables::{expect, purity_entropy_bloch};
use fockflow::{initial_hierarchy, models, Channel, Dynamics, Operator};
use serde::Serialize;

use crate::config::{Built, Overrides, ScenarioConfig};
use crate::CliError;

enum Obs {
    Expect(Operator),
    Population(usize),
    Bloch(usize),
    Purity,
    Entropy,
    /// Index into the co-integrated channel list.
    Cumulative(usize),
    Rate(Channel),
}

fn parse_obs(s: &str, built: &Built, channels: &mut Vec<Channel>) -> Result<Obs, CliError> {
    let d = built.model.dim();
    let modes = built.model.modes();
    let bad = || CliError::Parse(format!("unknown observable '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    let index = |p: &str, n: usize| -> Result<usize, CliError> {
        let k: usize = p.parse().map_err(|_| bad())?;
        if k >= n {
            return Err(CliError::Parse(format!("observable '{s}': index {k} out of range")));
        }
        Ok(k)
    };
    let mut channel = |c: Channel| {
        let k = channels.iter().position(|x| *x == c).unwrap_or_else(|| {
            channels.push(c);
            channels.len() - 1
        });
        Obs::Cumulative(k)
    };
    Ok(match parts.as_slice() {
        ["pe"] => match built.n_max {
            Some(n) => Obs::Expect(models::jc_excited_projector(n)),
            None if d == 2 => Obs::Population(models::EXCITED),
            None => return Err(CliError::Parse("'pe' needs a two-level or cavity model".into())),
        },
        ["cavity"] => {
            let n = built.n_max.ok_or_else(|| CliError::Parse("'cavity' needs a cavity model".into()))?;
            let a = models::cavity_lowering(n);
            Obs::Expect(a.dagger().matmul(&a))
        }
        ["population", k] => Obs::Population(index(k, d)?),
        ["bloch_x"] | ["bloch_y"] | ["bloch_z"] if d == 2 => Obs::Bloch(["bloch_x", "bloch_y", "bloch_z"].iter().position(|b| *b == s).unwrap()),
        ["purity"] => Obs::Purity,
        ["entropy"] => Obs::Entropy,
        ["flux", i, j] => channel(Channel::Flux { i: index(i, modes)?, j: index(j, modes)? }),
        ["flux_rate", i, j] => Obs::Rate(Channel::Flux { i: index(i, modes)?, j: index(j, modes)? }),
        ["quadrature", m, phase] => {
            let phase: f64 = phase.parse().map_err(|_| bad())?;
            channel(Channel::Quadrature { mode: index(m, modes)?, phase })
        }
        _ => return Err(bad()),
    })
}

/// Column name for an observable string.
pub fn column_name(obs: &str) -> String {
    obs.replace(':', "_")
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Invariants {
    pub diag_trace: f64,
    pub offdiag_trace: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
    pub physical_trace: f64,
    pub tolerance: f64,
    pub within: bool,
}

impl Invariants {
    fn check(&mut self) {
        let tol = self.tolerance;
        self.within = self.diag_trace <= tol
            && self.offdiag_trace <= tol
            && self.hermiticity <= tol
            && self.min_eigenvalue >= -tol
            && self.physical_trace <= tol;
    }
}

pub struct RunOutput {
    pub columns: Vec<String>,
    pub times: Vec<f64>,
    /// One vector per observable column.
    pub values: Vec<Vec<f64>>,
    pub invariants: Invariants,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl RunOutput {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|k| self.values[k].as_slice())
    }
}

fn trace_of(block: &[fockflow::C64], d: usize) -> fockflow::C64 {
    (0..d).map(|k| block[k * d + k]).sum()
}

pub fn run(cfg: &ScenarioConfig, ov: Overrides) -> Result<RunOutput, CliError> {
    let built = cfg.build(ov)?;
    let mut channels = Vec::new();
    let obs: Vec<Obs> = cfg.observables.iter().map(|s| parse_obs(s, &built, &mut channels)).collect::<Result<_, _>>()?;
    built.spec.validate_for(&built.model).map_err(CliError::Model)?;
    let dynamics = Dynamics::new(&built.model, &built.spec, &channels).map_err(CliError::Model)?;
    let h0 = initial_hierarchy(&built.rho0, &built.spec).map_err(CliError::Model)?;
    let y0 = dynamics.initial_state(&h0).map_err(CliError::Model)?;
    let d = dynamics.dim();
    let stored: Vec<bool> = h0.layout().stored().iter().map(|i| i.is_diagonal()).collect();
    let trace0: Vec<_> = (0..stored.len()).map(|p| trace_of(h0.block(p), d)).collect();

    let mut out = RunOutput {
        columns: cfg.observables.iter().map(|s| column_name(s)).collect(),
        times: vec![],
        values: vec![vec![]; obs.len()],
        invariants: Invariants { min_eigenvalue: f64::INFINITY, tolerance: cfg.invariant_tolerance, ..Default::default() },
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let inv = &mut out.invariants;
    let stats = integrate(&dynamics, &y0, &built.grid, |t, y| {
        let h = dynamics.hierarchy_from_state(y);
        for (p, diag) in stored.iter().enumerate() {
            let dev = (trace_of(h.block(p), d) - trace0[p]).norm();
            if *diag {
                inv.diag_trace = inv.diag_trace.max(dev);
            } else {
                inv.offdiag_trace = inv.offdiag_trace.max(dev);
            }
        }
        let rho = dynamics.physical_from_state(y);
        inv.hermiticity = inv.hermiticity.max(rho.max_abs_diff(&rho.dagger()));
        inv.physical_trace = inv.physical_trace.max((rho.trace() - 1.0).norm());
        inv.min_eigenvalue = inv.min_eigenvalue.min(rho.hermitian_eigenvalues()[0]);
        let summary = purity_entropy_bloch(&rho);
        let chans = dynamics.channel_values(y);
        out.times.push(t);
        for (col, o) in out.values.iter_mut().zip(&obs) {
            col.push(match o {
                Obs::Expect(x) => expect(&rho, x).re,
                Obs::Population(k) => rho[(*k, *k)].re,
                Obs::Bloch(k) => summary.bloch.map_or(f64::NAN, |b| b[*k]),
                Obs::Purity => summary.purity,
                Obs::Entropy => summary.entropy,
                Obs::Cumulative(k) => chans[*k].re,
                Obs::Rate(c) => dynamics.channel_derivative(*c, t, &h).re,
            });
        }
    })
    .map_err(CliError::Model)?;
    out.invariants.check();
    out.accepted_steps = stats.accepted;
    out.rejected_steps = stats.rejected;
    Ok(out)
}

/// Scalar summaries of a run: `max:OBS`, `min:OBS`, `t_max:OBS`, `final:OBS`.
pub fn scalar(out: &RunOutput, spec: &str) -> Result<f64, CliError> {
    let (op, obs) = spec.split_once(':').ok_or_else(|| CliError::Parse(format!("scalar '{spec}' needs the form op:observable")))?;
    let col = out.column(&column_name(obs)).ok_or_else(|| CliError::Parse(format!("scalar '{spec}': '{obs}' is not among the observables")))?;
    Ok(match op {
        "max" => fockflow::scan::peak_quadratic(&out.times, col).value,
        "t_max" => fockflow::scan::peak_quadratic(&out.times, col).t,
        "min" => {
            let neg: Vec<f64> = col.iter().map(|v| -v).collect();
            -fockflow::scan::peak_quadratic(&out.times, &neg).value
        }
        "final" => *col.last().unwrap_or(&f64::NAN),
        _ => return Err(CliError::Parse(format!("unknown scalar operation '{op}'"))),
    })
}

pub fn scalar_column(spec: &str) -> String {
    column_name(spec)
}
