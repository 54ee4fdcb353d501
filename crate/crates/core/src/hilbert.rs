//! State vectors, rays, and the operator types on finite-dimensional
//! Hilbert space.
//!
//! Dimensions in this crate are desk-scale (2 to a few dozen), so everything
//! is dense: operators are `DMatrix<Complex64>` wrapped in newtypes whose
//! constructors enforce the defining algebraic identities and reject
//! defective inputs instead of repairing them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{tol, Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Largest elementwise modulus of `m`.
pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Largest elementwise modulus of `m − m†`.
pub(crate) fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

fn check_square(m: &CMatrix) -> Result<usize> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows < 2 {
        return Err(Error::DimensionTooSmall { dim: rows });
    }
    Ok(rows)
}

/// Unit-norm vector in C^d, d ≥ 2.
#[derive(Debug, Clone)]
pub struct StateVector {
    amplitudes: CVector,
}

impl StateVector {
    /// Normalizes `amplitudes` to unit norm. The null vector has no direction
    /// and is rejected.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::DimensionTooSmall {
                dim: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if norm < tol::NULL_VECTOR {
            return Err(Error::ZeroNorm { norm });
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub fn from_slice(amplitudes: &[Complex64]) -> Result<Self> {
        Self::normalized(CVector::from_column_slice(amplitudes))
    }

    /// k-th computational basis vector of C^dim.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall { dim });
        }
        if k >= dim {
            return Err(Error::IndexOutOfRange { index: k, len: dim });
        }
        let mut v = CVector::zeros(dim);
        v[k] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    /// Spin-1/2 coherent state at colatitude `theta`, azimuth `phi` on the
    /// Bloch sphere: (cos θ/2, e^{iφ} sin θ/2).
    pub fn bloch(theta: f64, phi: f64) -> Self {
        let half = 0.5 * theta;
        let amplitudes = CVector::from_vec(vec![
            Complex64::new(half.cos(), 0.0),
            Complex64::from_polar(half.sin(), phi),
        ]);
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Same vector with an extra global phase e^{iφ}.
    pub fn with_phase(&self, phi: f64) -> Self {
        Self {
            amplitudes: &self.amplitudes * Complex64::from_polar(1.0, phi),
        }
    }

    pub fn ray(&self) -> Ray {
        Ray::new(self.clone())
    }
}

/// Equivalence class of unit vectors under global phase, carried by an
/// arbitrary representative. No canonical representative is chosen; every
/// phase-sensitive quantity in this crate is built so representatives cancel.
#[derive(Debug, Clone)]
pub struct Ray {
    representative: StateVector,
}

impl Ray {
    pub fn new(representative: StateVector) -> Self {
        Self { representative }
    }

    pub fn representative(&self) -> &StateVector {
        &self.representative
    }

    pub fn dim(&self) -> usize {
        self.representative.dim()
    }

    /// Ray equality: |⟨ψ|φ⟩| = 1 within tolerance. Different dimensions are
    /// simply different rays.
    pub fn same_ray(&self, other: &Self) -> bool {
        match self.representative.inner(&other.representative) {
            Ok(ov) => ov.norm() >= 1.0 - tol::RAY_EQUALITY,
            Err(_) => false,
        }
    }

    /// Same ray, representative rotated by e^{iφ}.
    pub fn with_phase(&self, phi: f64) -> Self {
        Self {
            representative: self.representative.with_phase(phi),
        }
    }
}

/// Hermitian idempotent with integer rank recovered from the trace.
#[derive(Debug, Clone)]
pub struct Projector {
    matrix: CMatrix,
    rank: usize,
}

impl Projector {
    pub fn try_new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let herm = hermiticity_defect(&matrix);
        if herm > tol::HERMITIAN {
            return Err(Error::NotHermitian { defect: herm });
        }
        let idem = max_abs(&(&matrix * &matrix - &matrix));
        if idem > tol::IDEMPOTENT {
            return Err(Error::NotIdempotent { defect: idem });
        }
        let trace = matrix.trace();
        let rank = trace.re.round();
        if (trace.re - rank).abs() > tol::TRACE_RANK || trace.im.abs() > tol::TRACE_RANK {
            return Err(Error::TraceRankMismatch { trace: trace.re });
        }
        Ok(Self {
            matrix,
            rank: rank as usize,
        })
    }

    /// |ψ⟩⟨ψ| for any representative ψ of the ray; the global phase cancels
    /// in the outer product.
    pub fn from_ray(ray: &Ray) -> Self {
        let v = ray.representative().amplitudes();
        Self {
            matrix: v * v.adjoint(),
            rank: 1,
        }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall { dim });
        }
        Ok(Self {
            matrix: CMatrix::identity(dim, dim),
            rank: dim,
        })
    }

    /// I − P, the projector onto the orthogonal complement.
    pub fn complement(&self) -> Self {
        Self {
            matrix: CMatrix::identity(self.dim(), self.dim()) - &self.matrix,
            rank: self.dim() - self.rank,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn try_new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let herm = hermiticity_defect(&matrix);
        if herm > tol::HERMITIAN {
            return Err(Error::NotHermitian { defect: herm });
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > tol::DENSITY_TRACE || trace.im.abs() > tol::DENSITY_TRACE {
            return Err(Error::TraceNotOne { trace: trace.re });
        }
        let eig = matrix.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < tol::PSD_FLOOR {
            return Err(Error::NotPositive { eigenvalue: min });
        }
        Ok(Self { matrix })
    }

    /// |ψ⟩⟨ψ| as a density matrix.
    pub fn pure(state: &StateVector) -> Self {
        let v = state.amplitudes();
        Self { matrix: v * v.adjoint() }
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall { dim });
        }
        Ok(Self {
            matrix: CMatrix::identity(dim, dim).unscale(dim as f64),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Matrix with U†U = I within tolerance.
#[derive(Debug, Clone)]
pub struct UnitaryMatrix {
    matrix: CMatrix,
}

impl UnitaryMatrix {
    pub fn try_new(matrix: CMatrix) -> Result<Self> {
        let dim = check_square(&matrix)?;
        let defect = max_abs(&(matrix.adjoint() * &matrix - CMatrix::identity(dim, dim)));
        if defect > tol::UNITARY {
            return Err(Error::NotUnitary { defect });
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall { dim });
        }
        Ok(Self {
            matrix: CMatrix::identity(dim, dim),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    /// U|ψ⟩, renormalized against roundoff drift.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if self.dim() != state.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: state.dim(),
            });
        }
        StateVector::normalized(&self.matrix * state.amplitudes())
    }
}

/// Fubini–Study distance arccos |⟨a|b⟩| ∈ [0, π/2].
pub fn fs_distance(a: &Ray, b: &Ray) -> Result<f64> {
    let ov = a.representative().inner(b.representative())?;
    Ok(ov.norm().min(1.0).acos())
}

/// Point at parameter `s` ∈ [0, 1] along the Fubini–Study geodesic from `a`
/// to `b`.
///
/// The representative of `b` is rotated in phase so ⟨a|b⟩ is real and
/// positive; spherical linear interpolation between the two lifted vectors
/// then projects onto the geodesic of rays. Endpoints are returned exactly.
/// Orthogonal endpoints are rejected: every great circle through a pair of
/// antipodal rays is a geodesic, so none is THE geodesic.
pub fn geodesic_interpolate(a: &Ray, b: &Ray, s: f64) -> Result<Ray> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InterpolantOutOfRange { s });
    }
    let ov = a.representative().inner(b.representative())?;
    let mag = ov.norm();
    if mag <= tol::ORTHOGONAL_OVERLAP {
        return Err(Error::GeodesicUndefined { overlap: mag });
    }
    if s == 0.0 {
        return Ok(a.clone());
    }
    if s == 1.0 {
        return Ok(b.clone());
    }
    let va = a.representative().amplitudes();
    // in-phase lift of b: ⟨a|vb⟩ = |⟨a|b⟩| > 0
    let vb = b.representative().amplitudes() * (ov / mag).conj();
    let delta = mag.min(1.0).acos();
    let mixed = if delta < 1e-9 {
        // coincident rays up to roundoff: slerp denominator degenerates,
        // chord interpolation is exact to machine precision here
        va.scale(1.0 - s) + vb.scale(s)
    } else {
        let c0 = ((1.0 - s) * delta).sin() / delta.sin();
        let c1 = (s * delta).sin() / delta.sin();
        va.scale(c0) + vb.scale(c1)
    };
    Ok(Ray::new(StateVector::normalized(mixed)?))
}

/// 2×2 Pauli matrices in the computational basis.
pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
    )
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
        ],
    )
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ],
    )
}

/// Orthonormal vectors spanning the range of `p`, extracted from the
/// Hermitian eigendecomposition (eigenvectors with eigenvalue near 1).
/// Returns exactly `p.rank()` vectors; empty for the zero projector.
pub fn orthonormal_basis_of(p: &Projector) -> Vec<StateVector> {
    let eig = p.matrix().clone().symmetric_eigen();
    let mut basis = Vec::with_capacity(p.rank());
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        if *lambda > 0.5 {
            let col = eig.eigenvectors.column(k).into_owned();
            basis.push(StateVector::normalized(col).expect("projector eigenvector is unit-norm"));
        }
    }
    assert_eq!(
        basis.len(),
        p.rank(),
        "eigenvalue count near 1 must match the trace rank of a validated projector"
    );
    basis
}
