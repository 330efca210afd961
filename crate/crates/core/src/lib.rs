//! Fock-state master equations for a quantum system driven by
//! propagating pulses in definite photon-number states.
//!
//! The system is described by an SLH triple (scattering, coupling,
//! Hamiltonian). A field with at most `N` photons in a temporal mode
//! turns the single master equation into a finite hierarchy of generalized
//! density operators `ϱ_{m,n}` that couple only downward in photon number.

pub mod envelope;
pub mod error;
pub mod field;
pub mod fit;
pub mod hierarchy;
pub mod integrator;
pub mod models;
pub mod nphoton;
pub mod observables;
pub mod operator;
pub mod oracles;
pub mod quadrature;
pub mod rhs;
pub mod scan;
pub mod two_time;

pub use envelope::{make_envelope, overlap, Envelope, EnvelopeKind};
pub use error::{FockError, Result};
pub use field::{Displacement, FieldSpec, Slot};
pub use hierarchy::{build_index_set, initial_hierarchy, Hierarchy, HierarchyIndex, IndexLayout};
pub use integrator::{monitor_invariants, propagate, InvariantReport, TimeGrid, Trajectory};
pub use operator::{dagger, lindblad, Operator, SLHModel, C64};
pub use rhs::{Channel, Dynamics};
