//! Cluster-Gutzwiller variational solver for the square-lattice J1-J2
//! Heisenberg antiferromagnet.
//!
//! The cluster wave function is produced by a U(1)-preserving parameterized
//! circuit (REAL-XY, ZZ and Z rotations) simulated in the zero-magnetization
//! sector, and optimized against the mean-field-embedded energy per spin.
//! A classical exact-diagonalization reference with self-consistent boundary
//! fields lives in [`ed_oracle`].
//!
//! Module map:
//!
//! - [`lattice`]: L×L cluster geometry with folded boundary bonds.
//! - [`statevector`]: fixed-Hamming-weight state, gate kernels, observables.
//! - [`circuit`]: macro-layer circuit construction and application.
//! - [`objective`]: embedded energy, adjoint/finite-difference gradients,
//!   order parameters.
//! - [`optimizer`]: L-BFGS with strong Wolfe line search, multi-start and
//!   warm-start chains.
//! - [`ed_oracle`]: sector Hamiltonian, Lanczos, self-consistent mean fields.
//! - [`sweep`]: phase-diagram sweeps, transition detection, gradient variance.
//! - [`validate`]: built-in invariant suite.

pub mod circuit;
pub mod ed_oracle;
pub mod error;
pub mod lattice;
pub mod objective;
pub mod optimizer;
pub mod reference;
pub mod rng;
pub mod statevector;
pub mod sweep;
pub mod validate;

pub use circuit::{CircuitSpec, GateFamily, GateSlot};
pub use error::{Error, Result};
pub use lattice::{Bond, BondKind, BondRange, ClusterGeometry};
pub use objective::{EnergyReport, ModelParams, Objective, OrderParameters};
pub use statevector::{SectorBasis, SectorState};

pub(crate) fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}
