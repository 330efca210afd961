//! Two-parameter least-squares fits of scaling laws, by Levenberg–Marquardt.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{FockError, Result};

pub const MAX_ITERATIONS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// y = 1 − a·x^(−b)
    PowerLawOneMinus,
    /// y = a·x^b
    PowerLaw,
    /// y = a + b·x
    Linear,
}

impl FromStr for Family {
    type Err = FockError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power_law_one_minus" | "one_minus_power" | "one-minus" => Ok(Family::PowerLawOneMinus),
            "power_law" | "power" => Ok(Family::PowerLaw),
            "linear" => Ok(Family::Linear),
            _ => Err(FockError::Fit(format!("unknown fit family '{s}'"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::PowerLawOneMinus => "power_law_one_minus",
            Family::PowerLaw => "power_law",
            Family::Linear => "linear",
        })
    }
}

impl Family {
    pub fn eval(self, a: f64, b: f64, x: f64) -> f64 {
        match self {
            Family::PowerLawOneMinus => 1.0 - a * x.powf(-b),
            Family::PowerLaw => a * x.powf(b),
            Family::Linear => a + b * x,
        }
    }

    /// (∂y/∂a, ∂y/∂b)
    fn gradient(self, a: f64, b: f64, x: f64) -> [f64; 2] {
        match self {
            Family::PowerLawOneMinus => {
                let p = x.powf(-b);
                [-p, a * p * x.ln()]
            }
            Family::PowerLaw => {
                let p = x.powf(b);
                [p, a * p * x.ln()]
            }
            Family::Linear => [1.0, x],
        }
    }

    /// Starting point from the log-linearized (or plain linear) problem.
    fn initial_guess(self, xs: &[f64], ys: &[f64]) -> Result<[f64; 2]> {
        let (u, v): (Vec<f64>, Vec<f64>) = match self {
            Family::Linear => (xs.to_vec(), ys.to_vec()),
            Family::PowerLaw => xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).unzip(),
            Family::PowerLawOneMinus => {
                xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y < 1.0).map(|(x, y)| (x.ln(), (1.0 - y).ln())).unzip()
            }
        };
        if u.len() < 2 {
            return Err(FockError::Fit("too few usable points for the initial guess".into()));
        }
        let (c, m) = line(&u, &v);
        Ok(match self {
            Family::Linear => [c, m],
            Family::PowerLaw => [c.exp(), m],
            Family::PowerLawOneMinus => [c.exp(), -m],
        })
    }
}

/// Intercept and slope of the ordinary least-squares line.
fn line(u: &[f64], v: &[f64]) -> (f64, f64) {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let sxy: f64 = u.iter().zip(v).map(|(x, y)| (x - mu) * (y - mv)).sum();
    let sxx: f64 = u.iter().map(|x| (x - mu).powi(2)).sum();
    let m = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (mv - m * mu, m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    /// 95% confidence half-widths of a and b.
    pub a_half_width: f64,
    pub b_half_width: f64,
    pub points: usize,
    pub iterations: usize,
}

fn sse(family: Family, p: [f64; 2], xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter().zip(ys).map(|(x, y)| (y - family.eval(p[0], p[1], *x)).powi(2)).sum()
}

/// J^T J and J^T r at `p`.
fn normal_equations(family: Family, p: [f64; 2], xs: &[f64], ys: &[f64]) -> ([[f64; 2]; 2], [f64; 2]) {
    let mut jtj = [[0.0; 2]; 2];
    let mut jtr = [0.0; 2];
    for (x, y) in xs.iter().zip(ys) {
        let g = family.gradient(p[0], p[1], *x);
        let r = y - family.eval(p[0], p[1], *x);
        for i in 0..2 {
            jtr[i] += g[i] * r;
            for j in 0..2 {
                jtj[i][j] += g[i] * g[j];
            }
        }
    }
    (jtj, jtr)
}

fn solve2(m: [[f64; 2]; 2], r: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([(r[0] * m[1][1] - r[1] * m[0][1]) / det, (m[0][0] * r[1] - m[1][0] * r[0]) / det])
}

pub fn fit(family: Family, xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(FockError::Fit("x and y have different lengths".into()));
    }
    let n = xs.len();
    if n < 4 {
        return Err(FockError::Fit(format!("need at least 4 points, got {n}")));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(FockError::Fit("non-finite data".into()));
    }
    if family != Family::Linear && xs.iter().any(|&x| x <= 0.0) {
        return Err(FockError::Fit("power laws need positive x".into()));
    }

    let mut p = family.initial_guess(xs, ys)?;
    let mut cost = sse(family, p, xs, ys);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal_equations(family, p, xs, ys);
        let mut accepted = false;
        let mut small_step = false;
        while lambda < 1e16 {
            let mut m = jtj;
            m[0][0] += lambda * jtj[0][0].max(1e-300);
            m[1][1] += lambda * jtj[1][1].max(1e-300);
            let Some(d) = solve2(m, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let q = [p[0] + d[0], p[1] + d[1]];
            let c = sse(family, q, xs, ys);
            small_step = d.iter().zip(&p).all(|(d, p)| d.abs() <= 1e-13 * (p.abs() + 1e-13));
            if c.is_finite() && c <= cost {
                let drop = cost - c;
                p = q;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if drop <= 1e-16 * cost.max(f64::MIN_POSITIVE) || cost < 1e-30 {
                    small_step = true;
                }
                break;
            }
            if small_step {
                break;
            }
            lambda *= 10.0;
        }
        if small_step || !accepted {
            converged = small_step || cost < 1e-30;
            break;
        }
    }
    if !converged {
        return Err(FockError::Fit(format!("no convergence after {iterations} iterations")));
    }

    let mean = ys.iter().sum::<f64>() / n as f64;
    let sst: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { (1.0 - cost / sst).clamp(0.0, 1.0) } else { 1.0 };

    let dof = (n - 2) as f64;
    let (jtj, _) = normal_equations(family, p, xs, ys);
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let s2 = cost / dof;
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| FockError::Fit(e.to_string()))?.inverse_cdf(0.975);
    let (ha, hb) = if det.abs() > 0.0 {
        (t * (s2 * jtj[1][1] / det).sqrt(), t * (s2 * jtj[0][0] / det).sqrt())
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(FitResult { family, a: p[0], b: p[1], r_squared, a_half_width: ha, b_half_width: hb, points: n, iterations })
}

/// Fit using only the points with lo ≤ x ≤ hi.
pub fn fit_range(family: Family, xs: &[f64], ys: &[f64], lo: f64, hi: f64) -> Result<FitResult> {
    let (x, y): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).filter(|(x, _)| **x >= lo && **x <= hi).map(|(x, y)| (*x, *y)).unzip();
    fit(family, &x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_one_minus_power() {
        let xs: Vec<f64> = (1..=12).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 0.25 / x).collect();
        let f = fit(Family::PowerLawOneMinus, &xs, &ys).unwrap();
        assert!((f.a - 0.25).abs() < 1e-8 && (f.b - 1.0).abs() < 1e-8, "{f:?}");
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law_and_intervals() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().enumerate().map(|(k, x)| 1.45 * x.powf(0.99) * (1.0 + 0.003 * ((k * 7 % 5) as f64 - 2.0))).collect();
        let f = fit(Family::PowerLaw, &xs, &ys).unwrap();
        assert!((f.a - 1.45).abs() < 3.0 * f.a_half_width.max(1e-3));
        assert!((f.b - 0.99).abs() < 3.0 * f.b_half_width.max(1e-3));
        assert!(f.a_half_width > 0.0 && f.a_half_width < 0.05);
        assert!(f.r_squared > 0.999);
    }

    #[test]
    fn linear_family() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 3.0, 5.0, 7.0, 9.0];
        let f = fit(Family::Linear, &xs, &ys).unwrap();
        assert!((f.a - 1.0).abs() < 1e-10 && (f.b - 2.0).abs() < 1e-10);
    }

    #[test]
    fn too_few_points() {
        assert!(fit(Family::PowerLaw, &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
        let f = fit_range(Family::Linear, &[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 3.0, 4.0, 5.0], 2.0, 5.0).unwrap();
        assert_eq!(f.points, 4);
    }

    #[test]
    fn family_names_round_trip() {
        for f in [Family::PowerLawOneMinus, Family::PowerLaw, Family::Linear] {
            assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
        }
        assert!("cubic".parse::<Family>().is_err());
    }
}
