//! Unitary time evolution and the geometric/dynamical split of the phase.
//!
//! Propagators are built step by step from the Hermitian eigendecomposition
//! of the Hamiltonian sampled at each step midpoint (ħ = 1 throughout):
//!
//! ```text
//!   U(t_k) = exp(−i H(t_{k−1/2}) Δt) · U(t_{k−1}),   U(t_0) = I
//! ```
//!
//! Each factor is exactly unitary up to rounding, so the scheme never leaks
//! norm; its time-discretization error is second order, and for a constant
//! Hamiltonian a single step is already exact.

use num_complex::Complex64;

use crate::geometry::{
    circle_distance, geometric_phase_open, grid_time, principal_angle, DiscretePath,
};
use crate::hilbert::{CMatrix, Projector, StateVector};
use crate::{tol, Error, Result};

/// Hamiltonian given as a sampler t ↦ H(t). Every sample is validated:
/// square, of the declared dimension, Hermitian within `tol::HERMITIAN`.
pub struct TimeDependentHamiltonian {
    dim: usize,
    sampler: Box<dyn Fn(f64) -> CMatrix + Send + Sync>,
}

impl TimeDependentHamiltonian {
    pub fn new<F>(dim: usize, sampler: F) -> Result<Self>
    where
        F: Fn(f64) -> CMatrix + Send + Sync + 'static,
    {
        if dim < 2 {
            return Err(Error::DimensionTooSmall { dim });
        }
        Ok(Self {
            dim,
            sampler: Box::new(sampler),
        })
    }

    /// Time-independent Hamiltonian; the matrix is validated once up front.
    pub fn constant(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let dim = matrix.nrows();
        if dim < 2 {
            return Err(Error::DimensionTooSmall { dim });
        }
        let defect = crate::hilbert::hermiticity_defect(&matrix);
        if defect > tol::HERMITIAN {
            return Err(Error::NotHermitian { defect });
        }
        Self::new(dim, move |_| matrix.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// H(t), checked square / dimension / Hermitian on every call.
    pub fn sample(&self, t: f64) -> Result<CMatrix> {
        let m = (self.sampler)(t);
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: m.nrows(),
            });
        }
        let defect = crate::hilbert::hermiticity_defect(&m);
        if defect > tol::HERMITIAN {
            return Err(Error::NotHermitian { defect });
        }
        Ok(m)
    }

    /// ⟨ψ|H(t)|ψ⟩, real for a valid sample.
    pub fn expectation(&self, t: f64, state: &StateVector) -> Result<f64> {
        let h = self.sample(t)?;
        if state.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: state.dim(),
            });
        }
        Ok(state.amplitudes().dotc(&(&h * state.amplitudes())).re)
    }
}

/// exp(−i h dt) through the Hermitian eigendecomposition of `h`.
fn step_unitary(h: &CMatrix, dt: f64) -> CMatrix {
    let dim = h.nrows();
    let eig = h.clone().symmetric_eigen();
    let mut diag = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        diag[(k, k)] = Complex64::from_polar(1.0, -eig.eigenvalues[k] * dt);
    }
    &eig.eigenvectors * diag * eig.eigenvectors.adjoint()
}

/// Cumulative propagators U(t_k) on a uniform grid, with U(t_0) = I exactly.
pub struct PropagatorTable {
    times: Vec<f64>,
    unitaries: Vec<CMatrix>,
    dim: usize,
}

/// Build the propagator table for `h` over [t0, t1] in `n_steps` midpoint
/// steps. Fails if any cumulative product drifts from unitarity by more
/// than `tol::PROPAGATOR_UNITARY`.
pub fn propagate(
    h: &TimeDependentHamiltonian,
    t0: f64,
    t1: f64,
    n_steps: usize,
) -> Result<PropagatorTable> {
    if n_steps == 0 {
        return Err(Error::StepsOutOfRange { n: 0 });
    }
    if !(t1 > t0) {
        return Err(Error::NonIncreasingTimes { index: 1 });
    }
    let dim = h.dim();
    let dt = (t1 - t0) / (n_steps as f64);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut unitaries = Vec::with_capacity(n_steps + 1);
    times.push(t0);
    unitaries.push(CMatrix::identity(dim, dim));
    for k in 1..=n_steps {
        let midpoint = t0 + ((k as f64) - 0.5) * dt;
        let sample = h.sample(midpoint)?;
        let cumulative = step_unitary(&sample, dt) * &unitaries[k - 1];
        let defect = crate::hilbert::max_abs(
            &(cumulative.adjoint() * &cumulative - CMatrix::identity(dim, dim)),
        );
        if defect > tol::PROPAGATOR_UNITARY {
            return Err(Error::NotUnitary { defect });
        }
        times.push(grid_time(t0, t1, n_steps, k));
        unitaries.push(cumulative);
    }
    Ok(PropagatorTable {
        times,
        unitaries,
        dim,
    })
}

impl PropagatorTable {
    /// Identity propagators at the given times: the kinematic limit H = 0,
    /// exact by construction rather than integrated.
    pub fn trivial(dim: usize, times: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall { dim });
        }
        if times.is_empty() {
            return Err(Error::PathTooShort { len: 0 });
        }
        for i in 1..times.len() {
            if !(times[i] > times[i - 1]) {
                return Err(Error::NonIncreasingTimes { index: i });
            }
        }
        let unitaries = times
            .iter()
            .map(|_| CMatrix::identity(dim, dim))
            .collect();
        Ok(Self {
            times,
            unitaries,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn unitary_at_index(&self, i: usize) -> Result<&CMatrix> {
        self.unitaries.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.unitaries.len(),
        })
    }

    /// Exact lookup: `t` must be one of the stored grid times, bit for bit.
    /// Off-grid queries are refused rather than interpolated.
    pub fn unitary_at_time(&self, t: f64) -> Result<&CMatrix> {
        Ok(&self.unitaries[self.index_of(t)?])
    }

    pub(crate) fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&x| x == t)
            .ok_or(Error::TimeNotOnGrid { time: t })
    }

    pub fn final_unitary(&self) -> &CMatrix {
        self.unitaries.last().expect("table holds at least U(t_0)")
    }
}

/// A Schrödinger trajectory: states pinned to strictly increasing times.
/// Doubles as an explicit lift of its own ray path.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateVector>,
}

impl Trajectory {
    pub fn try_new(times: Vec<f64>, states: Vec<StateVector>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::LiftLengthMismatch {
                expected: times.len(),
                got: states.len(),
            });
        }
        if states.len() < 2 {
            return Err(Error::PathTooShort { len: states.len() });
        }
        let dim = states[0].dim();
        for (i, s) in states.iter().enumerate() {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: s.dim(),
                });
            }
            if i > 0 && !(times[i] > times[i - 1]) {
                return Err(Error::NonIncreasingTimes { index: i });
            }
        }
        Ok(Self { times, states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &StateVector {
        &self.states[i]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    /// The trajectory's ray path, sample for sample.
    pub fn path(&self) -> DiscretePath {
        let samples = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| (t, s.ray()))
            .collect();
        DiscretePath::try_new(samples).expect("trajectory invariants imply a valid path")
    }
}

/// Apply every propagator in the table to `initial`. Norm drift beyond
/// `tol::PROPAGATOR_UNITARY` is refused; the surviving drift is renormalized
/// away so downstream overlaps see unit vectors.
pub fn evolve_state(table: &PropagatorTable, initial: &StateVector) -> Result<Trajectory> {
    if initial.dim() != table.dim() {
        return Err(Error::DimensionMismatch {
            left: table.dim(),
            right: initial.dim(),
        });
    }
    let mut states = Vec::with_capacity(table.len());
    for u in &table.unitaries {
        let v = u * initial.amplitudes();
        let defect = (v.norm() - 1.0).abs();
        if defect > tol::PROPAGATOR_UNITARY {
            return Err(Error::NotUnitary { defect });
        }
        states.push(StateVector::normalized(v)?);
    }
    Trajectory::try_new(table.times.clone(), states)
}

/// Conjugate `p` into the Heisenberg picture at grid time `t`:
/// U†(t) P U(t). Rank is preserved; the result is re-validated as a
/// projector rather than trusted.
pub fn heisenberg_projector(table: &PropagatorTable, t: f64, p: &Projector) -> Result<Projector> {
    if p.dim() != table.dim() {
        return Err(Error::DimensionMismatch {
            left: table.dim(),
            right: p.dim(),
        });
    }
    let u = table.unitary_at_time(t)?;
    Projector::try_new(u.adjoint() * p.matrix() * u)
}

/// Discrete Schrödinger action of a lift φ,
///
/// ```text
///   S[φ] ≈ i Σ_k ⟨φ_{k−1}|φ_k − φ_{k−1}⟩ − Σ_k Δt_k (E_{k−1} + E_k)/2,
///   E_k = ⟨φ_k|H(t_k)|φ_k⟩
/// ```
///
/// left-endpoint in the kinetic term, trapezoid in the energy term. The
/// value is complex: the imaginary part is pure discretization residue
/// (first order in the step) and vanishes under refinement; e^{iS} of a
/// solution trajectory reproduces its total phase factor.
pub fn action_functional(
    trajectory: &Trajectory,
    h: &TimeDependentHamiltonian,
) -> Result<Complex64> {
    if trajectory.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            left: h.dim(),
            right: trajectory.dim(),
        });
    }
    let n = trajectory.len() - 1;
    let mut kinetic = Complex64::new(0.0, 0.0);
    for k in 1..=n {
        // ⟨φ_{k−1}|φ_k − φ_{k−1}⟩ = ⟨φ_{k−1}|φ_k⟩ − 1 for unit vectors
        kinetic += trajectory.state(k - 1).inner(trajectory.state(k))? - 1.0;
    }
    let energies: Vec<f64> = (0..=n)
        .map(|k| h.expectation(trajectory.time(k), trajectory.state(k)))
        .collect::<Result<_>>()?;
    let mut potential = 0.0;
    for k in 1..=n {
        let dt = trajectory.time(k) - trajectory.time(k - 1);
        potential += 0.5 * (energies[k - 1] + energies[k]) * dt;
    }
    Ok(Complex64::new(0.0, 1.0) * kinetic - potential)
}

/// Total, geometric, and dynamical phases of a trajectory.
///
/// `total` and `geometric` are principal angles; `dynamical` is the raw
/// energy integral −∫⟨H⟩dt, deliberately unwrapped so that long evolutions
/// keep their winding. The three are tied by total ≡ geometric + dynamical
/// (mod 2π) up to discretization error.
#[derive(Debug, Clone, Copy)]
pub struct PhaseSplit {
    pub total: f64,
    pub geometric: f64,
    pub dynamical: f64,
}

impl PhaseSplit {
    /// Circle distance between `total` and `geometric + dynamical`.
    pub fn identity_defect(&self) -> f64 {
        circle_distance(self.total, self.geometric + self.dynamical)
    }
}

/// Split the phase accumulated along a trajectory. The endpoints must not
/// be orthogonal, since both the total and the open-path geometric phase
/// are undefined there.
pub fn phase_split(trajectory: &Trajectory, h: &TimeDependentHamiltonian) -> Result<PhaseSplit> {
    let path = trajectory.path();
    let open = geometric_phase_open(&path)?;
    let geometric = open
        .angle
        .expect("non-orthogonal endpoints imply a nonzero product");
    let total = trajectory
        .state(0)
        .inner(trajectory.state(trajectory.len() - 1))?
        .arg();
    let n = trajectory.len() - 1;
    let energies: Vec<f64> = (0..=n)
        .map(|k| h.expectation(trajectory.time(k), trajectory.state(k)))
        .collect::<Result<_>>()?;
    let mut dynamical = 0.0;
    for k in 1..=n {
        let dt = trajectory.time(k) - trajectory.time(k - 1);
        dynamical -= 0.5 * (energies[k - 1] + energies[k]) * dt;
    }
    Ok(PhaseSplit {
        total: principal_angle(total),
        geometric,
        dynamical,
    })
}

/// Convenience used across scenarios: evolve `initial` under `h` and split
/// the phase in one call.
pub fn evolve_and_split(
    h: &TimeDependentHamiltonian,
    initial: &StateVector,
    t0: f64,
    t1: f64,
    n_steps: usize,
) -> Result<PhaseSplit> {
    let table = propagate(h, t0, t1, n_steps)?;
    let trajectory = evolve_state(&table, initial)?;
    phase_split(&trajectory, h)
}
