//! Adaptive Gauss–Kronrod (7/15) quadrature for complex integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{FockError, Result};
use crate::operator::C64;

pub const DEFAULT_TOL: f64 = 1e-10;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod(f: &impl Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

struct Panel {
    a: f64,
    b: f64,
    val: C64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.partial_cmp(&o.err).unwrap_or(Ordering::Equal)
    }
}

/// ∫_a^b f with absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> C64, a: f64, b: f64, tol: f64) -> Result<C64> {
    integrate_with_breaks(f, a, b, &[], tol)
}

/// As [`integrate`], with the interval split at the given interior points first.
pub fn integrate_with_breaks(f: impl Fn(f64) -> C64, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<C64> {
    if a == b {
        return Ok(C64::new(0.0, 0.0));
    }
    if a > b {
        return integrate_with_breaks(f, b, a, breaks, tol).map(|v| -v);
    }
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.extend(inner);
    pts.push(b);

    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (C64::new(0.0, 0.0), 0.0);
    for w in pts.windows(2) {
        let (val, e) = kronrod(&f, w[0], w[1]);
        total += val;
        err += e;
        heap.push(Panel { a: w[0], b: w[1], val, err: e });
    }
    let mut iter = 0;
    while err > tol {
        iter += 1;
        if iter > 20_000 {
            return Err(FockError::Quadrature(format!("error estimate {err:.3e} above {tol:.1e} on [{a}, {b}]")));
        }
        let p = heap.pop().expect("non-empty panel heap");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(FockError::Quadrature(format!("interval collapsed near t = {m}")));
        }
        let (v1, e1) = kronrod(&f, p.a, m);
        let (v2, e2) = kronrod(&f, m, p.b);
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Panel { a: p.a, b: m, val: v1, err: e1 });
        heap.push(Panel { a: m, b: p.b, val: v2, err: e2 });
        if heap.len() % 64 == 0 {
            // refresh the running sums against drift
            total = heap.iter().map(|p| p.val).sum();
            err = heap.iter().map(|p| p.err).sum();
        }
    }
    Ok(total)
}

pub fn integrate_real(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<f64> {
    integrate_with_breaks(|t| C64::new(f(t), 0.0), a, b, breaks, tol).map(|z| z.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| C64::new(x * x * x - x, 2.0 * x), 0.0, 2.0, 1e-12).unwrap();
        assert!((v.re - 2.0).abs() < 1e-13);
        assert!((v.im - 4.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_integral() {
        let v = integrate_real(|x| (-x * x).exp(), -12.0, 12.0, &[], 1e-12).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn kink_handled_with_break() {
        let v = integrate_real(|x| x.abs(), -1.0, 3.0, &[0.0], 1e-12).unwrap();
        assert!((v - 5.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_negate() {
        let v = integrate_real(|x| x.cos(), 1.0, 0.0, &[], 1e-12).unwrap();
        assert!((v + 1f64.sin()).abs() < 1e-12);
    }
}
