//! Small library of system models. Basis order for two-level atoms is (g, e).

use crate::error::{FockError, Result};
use crate::operator::{Operator, SLHModel};

pub const GROUND: usize = 0;
pub const EXCITED: usize = 1;

pub fn sigma_minus() -> Operator {
    Operator::ket_bra(2, GROUND, EXCITED)
}

fn check_rate(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(FockError::InvalidModel(format!("{name} must be non-negative, got {x}")))
    }
}

/// H = −(Δ₀/2)(|e⟩⟨e| − |g⟩⟨g|), L = √γ σ₋, S = I
pub fn two_level(gamma: f64, detuning: f64) -> Result<SLHModel> {
    check_rate("gamma", gamma)?;
    let h = Operator::from_real(2, &[detuning / 2.0, 0.0, 0.0, -detuning / 2.0])?;
    SLHModel::new(vec![sigma_minus().scale_re(gamma.sqrt())], h)
}

/// Two-level atom coupled to two waveguide modes, L_i = √γ_i σ₋, H = 0.
pub fn two_mode_two_level(gamma1: f64, gamma2: f64) -> Result<SLHModel> {
    check_rate("gamma1", gamma1)?;
    check_rate("gamma2", gamma2)?;
    let sm = sigma_minus();
    SLHModel::new(vec![sm.scale_re(gamma1.sqrt()), sm.scale_re(gamma2.sqrt())], Operator::zeros(2))
}

/// Index of |atom, n⟩ in the atom ⊗ cavity basis.
pub fn jc_index(atom: usize, n: usize, n_max: usize) -> usize {
    atom * (n_max + 1) + n
}

pub fn jc_hamiltonian(g: f64, delta_atom: f64, delta_cav: f64, n_max: usize) -> Operator {
    let c = n_max + 1;
    let dim = 2 * c;
    let mut h = Operator::zeros(dim);
    for n in 0..c {
        h[(jc_index(EXCITED, n, n_max), jc_index(EXCITED, n, n_max))] += -delta_atom;
        for a in 0..2 {
            h[(jc_index(a, n, n_max), jc_index(a, n, n_max))] += -delta_cav * n as f64;
        }
        if n + 1 < c {
            // g (a σ₊ + a† σ₋): |e,n⟩ ↔ |g,n+1⟩
            let amp = g * ((n + 1) as f64).sqrt();
            let (e, gn) = (jc_index(EXCITED, n, n_max), jc_index(GROUND, n + 1, n_max));
            h[(e, gn)] += amp;
            h[(gn, e)] += amp;
        }
    }
    h
}

/// Cavity annihilation operator on the atom ⊗ cavity space.
pub fn cavity_lowering(n_max: usize) -> Operator {
    let c = n_max + 1;
    let mut a = Operator::zeros(2 * c);
    for atom in 0..2 {
        for n in 1..c {
            a[(jc_index(atom, n - 1, n_max), jc_index(atom, n, n_max))] = (n as f64).sqrt().into();
        }
    }
    a
}

/// Projector on the excited atomic state in the atom ⊗ cavity space.
pub fn jc_excited_projector(n_max: usize) -> Operator {
    let c = n_max + 1;
    let mut p = Operator::zeros(2 * c);
    for n in 0..c {
        let k = jc_index(EXCITED, n, n_max);
        p[(k, k)] = 1.0.into();
    }
    p
}

/// Atom in a leaky cavity: H = −Δ₀|e⟩⟨e| − Δ_c a†a + g(a σ₊ + a† σ₋), L = √γ a.
///
/// `schedule` lists (time, Δ₀) switches of the atomic detuning.
pub fn jaynes_cummings(g: f64, gamma: f64, delta_atom: f64, delta_cav: f64, n_max: usize, schedule: &[(f64, f64)]) -> Result<SLHModel> {
    check_rate("gamma", gamma)?;
    if !g.is_finite() {
        return Err(FockError::InvalidModel("coupling g must be finite".into()));
    }
    let h = jc_hamiltonian(g, delta_atom, delta_cav, n_max);
    let mut model = SLHModel::new(vec![cavity_lowering(n_max).scale_re(gamma.sqrt())], h)?;
    model.schedule = schedule.iter().map(|&(t, d)| (t, jc_hamiltonian(g, d, delta_cav, n_max))).collect();
    model.schedule.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    model.validate()?;
    Ok(model)
}

/// Pure state |k⟩⟨k| of dimension `dim`.
pub fn basis_state(dim: usize, k: usize) -> Operator {
    Operator::ket_bra(dim, k, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_shape() {
        let m = two_level(1.0, 0.4).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.modes(), 1);
        assert!((m.h[(1, 1)].re + 0.2).abs() < 1e-15);
    }

    #[test]
    fn jc_dimension_and_hermiticity() {
        let m = jaynes_cummings(0.36, 1.0, 0.0, 0.0, 3, &[(5.0, 20.0)]).unwrap();
        assert_eq!(m.dim(), 8);
        assert!(m.h.is_hermitian(1e-15));
        assert_eq!(m.switch_times(), vec![5.0]);
        assert!((m.hamiltonian_at(6.0)[(4, 4)].re + 20.0).abs() < 1e-15);
    }

    #[test]
    fn cavity_ladder() {
        let a = cavity_lowering(2);
        let n = a.dagger().matmul(&a);
        assert!((n[(2, 2)].re - 2.0).abs() < 1e-14);
        assert!((n[(4, 4)].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn negative_rate_rejected() {
        assert!(two_level(-1.0, 0.0).is_err());
        assert!(two_mode_two_level(0.5, -0.5).is_err());
    }
}
