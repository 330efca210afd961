//! Dense complex operators and the SLH description of a system.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Operator { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Operator { dim, data }
    }

    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(FockError::Dimension(format!(
                "expected {} entries for a {dim}x{dim} operator, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Operator { dim, data })
    }

    /// Real row-major entries.
    pub fn from_real(dim: usize, rows: &[f64]) -> Result<Self> {
        Self::from_vec(dim, rows.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// |i⟩⟨j|
    pub fn ket_bra(dim: usize, i: usize, j: usize) -> Self {
        let mut op = Self::zeros(dim);
        op[(i, j)] = ONE;
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn dagger(&self) -> Self {
        let d = self.dim;
        Self::from_fn(d, |i, j| self.data[j * d + i].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn scale(&self, c: C64) -> Self {
        Operator { dim: self.dim, data: self.data.iter().map(|&x| x * c).collect() }
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn matmul(&self, rhs: &Operator) -> Self {
        assert_eq!(self.dim, rhs.dim, "operator dimensions differ");
        let mut out = Self::zeros(self.dim);
        gemm_acc(&mut out.data, ONE, &self.data, &rhs.data, self.dim);
        out
    }

    pub fn commutator(&self, rhs: &Operator) -> Self {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    pub fn kron(&self, rhs: &Operator) -> Self {
        let (a, b) = (self.dim, rhs.dim);
        Self::from_fn(a * b, |i, j| self[(i / b, j / b)] * rhs[(i % b, j % b)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.dagger()) <= tol
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| *z == ZERO)
    }

    /// Tr[A† B]
    pub fn inner(&self, other: &Operator) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        let d = m.nrows();
        Self::from_fn(d, |i, j| m[(i, j)])
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (self + &self.dagger()).scale_re(0.5);
        let mut ev: Vec<f64> = h.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Eigen-decomposition of the Hermitian part: (eigenvalues, eigenvectors as columns).
    pub fn hermitian_eigen(&self) -> (Vec<f64>, Vec<Vec<C64>>) {
        let h = (self + &self.dagger()).scale_re(0.5);
        let eig = h.to_nalgebra().symmetric_eigen();
        let d = self.dim;
        let vals = eig.eigenvalues.iter().copied().collect();
        let vecs = (0..d).map(|k| (0..d).map(|i| eig.eigenvectors[(i, k)]).collect()).collect();
        (vals, vecs)
    }

    pub fn expm(&self) -> Self {
        Self::from_nalgebra(&self.to_nalgebra().exp())
    }
}

/// Trace distance ½‖A − B‖₁ for Hermitian arguments.
pub fn trace_distance(a: &Operator, b: &Operator) -> f64 {
    0.5 * (a - b).hermitian_eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
}

pub fn dagger(a: &Operator) -> Operator {
    a.dagger()
}

/// 𝓛_L[ρ] = LρL† − ½(L†Lρ + ρL†L)
pub fn lindblad(l: &Operator, rho: &Operator) -> Operator {
    let ld = l.dagger();
    let ldl = ld.matmul(l);
    &l.matmul(rho).matmul(&ld) - &(&ldl.matmul(rho) + &rho.matmul(&ldl)).scale_re(0.5)
}

impl Index<(usize, usize)> for Operator {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Operator {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimensions differ");
        Operator { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "operator dimensions differ");
        Operator { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_re(-1.0)
    }
}

// Kernels on raw row-major d×d slices, used by the hierarchy right-hand side.

/// out += alpha · a · b
#[inline]
pub fn gemm_acc(out: &mut [C64], alpha: C64, a: &[C64], b: &[C64], d: usize) {
    for i in 0..d {
        let row = &a[i * d..(i + 1) * d];
        let o = &mut out[i * d..(i + 1) * d];
        for (k, &aik) in row.iter().enumerate() {
            if aik == ZERO {
                continue;
            }
            let s = alpha * aik;
            let brow = &b[k * d..(k + 1) * d];
            for (oj, bkj) in o.iter_mut().zip(brow) {
                *oj += s * bkj;
            }
        }
    }
}

/// out = a†
#[inline]
pub fn dagger_into(out: &mut [C64], a: &[C64], d: usize) {
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = a[j * d + i].conj();
        }
    }
}

/// out += alpha · a
#[inline]
pub fn axpy(out: &mut [C64], alpha: C64, a: &[C64]) {
    for (o, x) in out.iter_mut().zip(a) {
        *o += alpha * x;
    }
}

/// Tr[a† x]
#[inline]
pub fn inner_slice(a: &[C64], x: &[C64]) -> C64 {
    a.iter().zip(x).map(|(p, q)| p.conj() * q).sum()
}

/// SLH triple: scattering matrix `s[i][j]`, coupling operators `l[i]`, Hamiltonian `h`.
///
/// `schedule` optionally replaces `h` piecewise in time: from each listed
/// time onward the paired Hamiltonian applies.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SLHModel {
    pub s: Vec<Vec<Operator>>,
    pub l: Vec<Operator>,
    pub h: Operator,
    #[serde(default)]
    pub schedule: Vec<(f64, Operator)>,
}

impl SLHModel {
    /// Model with identity scattering.
    pub fn new(l: Vec<Operator>, h: Operator) -> Result<Self> {
        let d = h.dim();
        let m = l.len();
        let s = (0..m)
            .map(|i| (0..m).map(|j| if i == j { Operator::identity(d) } else { Operator::zeros(d) }).collect())
            .collect();
        let model = SLHModel { s, l, h, schedule: Vec::new() };
        model.validate()?;
        Ok(model)
    }

    pub fn with_scattering(s: Vec<Vec<Operator>>, l: Vec<Operator>, h: Operator) -> Result<Self> {
        let model = SLHModel { s, l, h, schedule: Vec::new() };
        model.validate()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn modes(&self) -> usize {
        self.l.len()
    }

    /// Hamiltonian in force at time `t`.
    pub fn hamiltonian_at(&self, t: f64) -> &Operator {
        let mut h = &self.h;
        for (ts, hs) in &self.schedule {
            if t >= *ts {
                h = hs;
            }
        }
        h
    }

    pub fn switch_times(&self) -> Vec<f64> {
        self.schedule.iter().map(|(t, _)| *t).collect()
    }

    pub fn scattering_is_identity(&self) -> bool {
        let d = self.dim();
        let id = Operator::identity(d);
        self.s.iter().enumerate().all(|(i, row)| {
            row.iter().enumerate().all(|(j, s)| if i == j { *s == id } else { s.is_zero() })
        })
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.h.dim();
        let m = self.l.len();
        if m == 0 {
            return Err(FockError::InvalidModel("at least one coupling operator is required".into()));
        }
        if self.l.iter().any(|l| l.dim() != d) {
            return Err(FockError::InvalidModel("coupling operator dimension differs from H".into()));
        }
        if self.s.len() != m || self.s.iter().any(|row| row.len() != m || row.iter().any(|x| x.dim() != d)) {
            return Err(FockError::InvalidModel(format!("scattering matrix must be {m}x{m} operators of dimension {d}")));
        }
        for h in std::iter::once(&self.h).chain(self.schedule.iter().map(|(_, h)| h)) {
            if h.dim() != d {
                return Err(FockError::InvalidModel("scheduled Hamiltonian dimension differs".into()));
            }
            if !h.is_hermitian(1e-12) {
                return Err(FockError::InvalidModel("Hamiltonian is not Hermitian".into()));
            }
        }
        // S†S = I on the (M·d)-dimensional block space
        let big = m * d;
        let mut tot = vec![ZERO; big * big];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let prod = self.s[k][i].dagger().matmul(&self.s[k][j]);
                    for a in 0..d {
                        for b in 0..d {
                            tot[(i * d + a) * big + j * d + b] += prod[(a, b)];
                        }
                    }
                }
            }
        }
        for r in 0..big {
            for c in 0..big {
                let want = if r == c { ONE } else { ZERO };
                if (tot[r * big + c] - want).norm() > 1e-10 {
                    return Err(FockError::InvalidModel("scattering matrix is not unitary".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_minus() -> Operator {
        Operator::ket_bra(2, 0, 1)
    }

    #[test]
    fn dagger_of_lowering_is_raising() {
        assert_eq!(sigma_minus().dagger(), Operator::ket_bra(2, 1, 0));
    }

    #[test]
    fn lindblad_decays_excited_state() {
        let rho = Operator::ket_bra(2, 1, 1);
        let d = lindblad(&sigma_minus(), &rho);
        assert!((d[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((d[(1, 1)].re + 1.0).abs() < 1e-15);
        assert!(d.trace().norm() < 1e-15);
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let a = Operator::from_real(2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Operator::identity(3);
        let k = a.kron(&b);
        assert_eq!(k.dim(), 6);
        assert_eq!(k[(4, 1)], C64::new(3.0, 0.0));
        assert_eq!(k[(4, 2)], ZERO);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let gen = Operator::from_real(2, &[0.0, -1.0, 1.0, 0.0]).unwrap().scale_re(0.3);
        let u = gen.expm();
        assert!((u[(0, 0)].re - 0.3f64.cos()).abs() < 1e-13);
        assert!((u[(1, 0)].re - 0.3f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn non_hermitian_hamiltonian_rejected() {
        let h = Operator::ket_bra(2, 0, 1);
        assert!(matches!(SLHModel::new(vec![sigma_minus()], h), Err(FockError::InvalidModel(_))));
    }

    #[test]
    fn non_unitary_scattering_rejected() {
        let s = vec![vec![Operator::identity(2).scale_re(2.0)]];
        let r = SLHModel::with_scattering(s, vec![sigma_minus()], Operator::zeros(2));
        assert!(r.is_err());
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states() {
        let a = Operator::ket_bra(2, 0, 0);
        let b = Operator::ket_bra(2, 1, 1);
        assert!((trace_distance(&a, &b) - 1.0).abs() < 1e-12);
    }
}
