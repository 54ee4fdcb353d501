//! Geometric phases of paths on projective Hilbert space and their role as
//! the building blocks of the consistent-histories decoherence functional.
//!
//! The crate works entirely in finite dimension with dense complex matrices.
//! `hilbert` holds the state and operator types, `geometry` the discrete
//! Pancharatnam phase machinery, `dynamics` Schrödinger propagation and the
//! geometric/dynamical phase split, `histories` class operators over
//! time-ordered projector sequences, `decoherence` the decoherence functional
//! in its operator, kinematic and action forms, and `scenario` the runnable
//! end-to-end scenarios behind the `histphase` binary.

// time-grid checks use `!(a > b)` so that NaN counts as a violation; the
// positive rewrite `a <= b` would let NaN through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoherence;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod hilbert;
pub mod histories;
pub mod random;
pub mod scenario;

pub use error::{Error, Result};

/// Numerical tolerances used by constructors and identity checks.
///
/// Construction tolerances sit a few decades above machine epsilon so that
/// exactly-representable inputs always pass while genuinely defective inputs
/// are rejected rather than repaired. Identity tolerances are looser where
/// they must absorb roundoff accumulated over long products.
pub mod tol {
    /// Max |norm − 1| for a stored state vector.
    pub const UNIT_NORM: f64 = 1e-12;
    /// Two rays are equal when |⟨ψ|φ⟩| ≥ 1 − RAY_EQUALITY.
    pub const RAY_EQUALITY: f64 = 1e-10;
    /// Max elementwise |M − M†| accepted as Hermitian.
    pub const HERMITIAN: f64 = 1e-12;
    /// Max elementwise |P² − P| accepted as idempotent.
    pub const IDEMPOTENT: f64 = 1e-10;
    /// Max |tr P − rank| (and |Im tr P|) for a projector.
    pub const TRACE_RANK: f64 = 1e-10;
    /// Max |tr ρ − 1| for a density matrix.
    pub const DENSITY_TRACE: f64 = 1e-12;
    /// Eigenvalue floor for positive-semidefiniteness checks.
    pub const PSD_FLOOR: f64 = -1e-10;
    /// Max elementwise |U†U − I| for a unitary.
    pub const UNITARY: f64 = 1e-10;
    /// Looser unitarity bound for propagator-table entries, which accumulate
    /// roundoff over many steps.
    pub const PROPAGATOR_UNITARY: f64 = 1e-9;
    /// Overlap magnitude at or below which two rays count as orthogonal.
    pub const ORTHOGONAL_OVERLAP: f64 = 1e-12;
    /// Norm below which a vector counts as null and cannot be normalized.
    pub const NULL_VECTOR: f64 = 1e-150;
    /// Exhaustiveness defect bound: max elementwise |Σ_α α − I| per time slot.
    pub const EXHAUSTIVE: f64 = 1e-10;
    /// Exclusivity defect bound: max elementwise |αβ| for distinct
    /// alternatives at one time slot.
    pub const EXCLUSIVE: f64 = 1e-10;
    /// Hard cap on enumerated fine-grained tuples (per history set and per
    /// side of a coarse-graining sum).
    pub const TUPLE_CAP: usize = 4096;
    /// Allowed drift of the all-entries sum of a decoherence matrix from 1.
    pub const GRAND_SUM: f64 = 1e-9;
    /// Most negative real part tolerated on a decoherence-matrix diagonal.
    pub const DIAG_FLOOR: f64 = -1e-12;
}
