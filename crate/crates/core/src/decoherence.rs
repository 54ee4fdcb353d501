//! The decoherence functional over history pairs and its consistency checks.
//!
//! The functional is always the operator sandwich
//!
//! ```text
//!   d(a, b) = Tr(C_a ρ₀ C_b†)          (optionally Tr(ρ̃_f C_a ρ₀ C_b†))
//! ```
//!
//! but for fine-grained histories it collapses to a product of overlaps: two
//! Pancharatnam chains, one per argument, tied by the initial density matrix
//! and the final overlap. Its diagonal entries are candidate probabilities;
//! off-diagonal moduli measure interference between coarse-grained
//! alternatives, and both the geometric phase of a path pair and the failure
//! of probability additivity are read out of the same numbers.

use num_complex::Complex64;

use crate::dynamics::{action_functional, PropagatorTable, TimeDependentHamiltonian, Trajectory};
use crate::geometry::DiscretePath;
use crate::hilbert::{hermiticity_defect, CMatrix, CVector, DensityMatrix};
use crate::histories::{class_operator, heisenberg_bases, History, HistorySet};
use crate::{tol, Error, Result};

fn sandwich(x: &CVector, m: &CMatrix, y: &CVector) -> Complex64 {
    x.dotc(&(m * y))
}

fn check_final_condition(rho_f: &CMatrix, dim: usize) -> Result<()> {
    if rho_f.nrows() != rho_f.ncols() {
        return Err(Error::NotSquare {
            rows: rho_f.nrows(),
            cols: rho_f.ncols(),
        });
    }
    if rho_f.nrows() != dim {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: rho_f.nrows(),
        });
    }
    let defect = hermiticity_defect(rho_f);
    if defect > tol::HERMITIAN {
        return Err(Error::NotHermitian { defect });
    }
    Ok(())
}

fn check_same_grid(left: &[f64], right: &[f64]) -> Result<()> {
    if left.len() != right.len() || left.iter().zip(right).any(|(a, b)| a != b) {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// d(a, b) for two histories on the same event grid, through their class
/// operators. `rho_f` is an optional Hermitian final condition, conjugated
/// to the last event time; `None` means the usual open future (identity).
pub fn decoherence_functional(
    a: &History,
    b: &History,
    table: &PropagatorTable,
    rho0: &DensityMatrix,
    rho_f: Option<&CMatrix>,
) -> Result<Complex64> {
    check_same_grid(&a.times(), &b.times()) ?;
    if rho0.dim() != table.dim() {
        return Err(Error::DimensionMismatch {
            left: table.dim(),
            right: rho0.dim(),
        });
    }
    let ca = class_operator(a, table)?;
    let cb = class_operator(b, table)?;
    let core = &ca * rho0.matrix() * cb.adjoint();
    match rho_f {
        None => Ok(core.trace()),
        Some(rf) => {
            check_final_condition(rf, table.dim())?;
            let t_last = *a.times().last().expect("history is nonempty");
            let u = table.unitary_at_time(t_last)?;
            let moved = u.adjoint() * rf * u;
            Ok((moved * core).trace())
        }
    }
}

/// Fine-grained functional without dynamics, evaluated as the overlap chain
///
/// ```text
///   ⟨ψ_0|ρ₀|φ_0⟩ ⟨φ_n|ψ_n⟩ Π_k ⟨ψ_k|ψ_{k−1}⟩ Π_k ⟨φ_{k−1}|φ_k⟩
/// ```
///
/// rather than through matrices. For a pure ρ₀ on the shared initial ray its
/// argument is exactly the Pancharatnam holonomy of the closed circuit made
/// of ψ traversed forward and φ traversed backward.
pub fn df_kinematic_finegrained(
    psi: &DiscretePath,
    phi: &DiscretePath,
    rho0: &DensityMatrix,
) -> Result<Complex64> {
    check_same_grid(&psi.times(), &phi.times())?;
    if rho0.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            left: psi.dim(),
            right: rho0.dim(),
        });
    }
    if psi.dim() != phi.dim() {
        return Err(Error::DimensionMismatch {
            left: psi.dim(),
            right: phi.dim(),
        });
    }
    let n = psi.len() - 1;
    let rep = |path: &DiscretePath, k: usize| path.ray(k).representative().amplitudes().clone();
    let mut d = sandwich(&rep(psi, 0), rho0.matrix(), &rep(phi, 0));
    d *= rep(phi, n).dotc(&rep(psi, n));
    for k in 1..=n {
        d *= rep(psi, k).dotc(&rep(psi, k - 1));
        d *= rep(phi, k - 1).dotc(&rep(phi, k));
    }
    Ok(d)
}

/// Fine-grained functional with dynamics, evaluated through the discrete
/// action of each branch:
///
/// ```text
///   d(ψ, φ) ≈ ⟨ψ_0|ρ₀|φ_0⟩ ⟨φ_n|ρ_f|ψ_n⟩ e^{iS[ψ]} (e^{iS[φ]})*
/// ```
///
/// The action exponentials carry the whole propagation, so this agrees with
/// the operator functional only up to first order in the step; the
/// discrepancy is a measured quantity in the tests, not something patched
/// over here. With H = 0 and constant branches the reduction to
/// `df_kinematic_finegrained` is exact.
pub fn df_dynamical_finegrained(
    psi: &Trajectory,
    phi: &Trajectory,
    h: &TimeDependentHamiltonian,
    rho0: &DensityMatrix,
    rho_f: Option<&CMatrix>,
) -> Result<Complex64> {
    check_same_grid(psi.times(), phi.times())?;
    if rho0.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            left: psi.dim(),
            right: rho0.dim(),
        });
    }
    let n = psi.len() - 1;
    let front = sandwich(
        psi.state(0).amplitudes(),
        rho0.matrix(),
        phi.state(0).amplitudes(),
    );
    let back = match rho_f {
        None => phi.state(n).inner(psi.state(n))?,
        Some(rf) => {
            check_final_condition(rf, psi.dim())?;
            sandwich(phi.state(n).amplitudes(), rf, psi.state(n).amplitudes())
        }
    };
    let s_psi = action_functional(psi, h)?;
    let s_phi = action_functional(phi, h)?;
    let i = Complex64::new(0.0, 1.0);
    Ok(front * back * (i * s_psi).exp() * (i * s_phi).exp().conj())
}

/// The functional restricted to one exhaustive, exclusive history set:
/// entries d(a, b) over the full set, all computed independently and then
/// cross-checked (Hermitian, near-real non-negative diagonal, grand sum 1).
#[derive(Debug, Clone)]
pub struct DecoherenceMatrix {
    entries: CMatrix,
    class_operators: Vec<CMatrix>,
    index_tuples: Vec<Vec<usize>>,
    rho0: DensityMatrix,
}

pub fn build_decoherence_matrix(
    set: &HistorySet,
    table: &PropagatorTable,
    rho0: &DensityMatrix,
) -> Result<DecoherenceMatrix> {
    if set.dim() != table.dim() {
        return Err(Error::DimensionMismatch {
            left: table.dim(),
            right: set.dim(),
        });
    }
    if rho0.dim() != table.dim() {
        return Err(Error::DimensionMismatch {
            left: table.dim(),
            right: rho0.dim(),
        });
    }
    let n = set.len();
    let mut class_operators = Vec::with_capacity(n);
    for i in 0..n {
        class_operators.push(class_operator(&set.history(i)?, table)?);
    }
    let mut entries = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            entries[(a, b)] = (&class_operators[a] * rho0.matrix() * class_operators[b].adjoint())
                .trace();
        }
    }
    let defect = hermiticity_defect(&entries);
    if defect > tol::HERMITIAN {
        return Err(Error::NotHermitian { defect });
    }
    for a in 0..n {
        let p = entries[(a, a)];
        if p.re < tol::DIAG_FLOOR {
            return Err(Error::NotPositive { eigenvalue: p.re });
        }
    }
    let grand = entries.sum();
    if (grand.re - 1.0).abs() > tol::GRAND_SUM || grand.im.abs() > tol::GRAND_SUM {
        return Err(Error::TraceNotOne { trace: grand.re });
    }
    Ok(DecoherenceMatrix {
        entries,
        class_operators,
        index_tuples: set.index_tuples().to_vec(),
        rho0: rho0.clone(),
    })
}

impl DecoherenceMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn entry(&self, a: usize, b: usize) -> Result<Complex64> {
        let n = self.len();
        if a >= n {
            return Err(Error::IndexOutOfRange { index: a, len: n });
        }
        if b >= n {
            return Err(Error::IndexOutOfRange { index: b, len: n });
        }
        Ok(self.entries[(a, b)])
    }

    /// Diagonal entry: the candidate probability of history `a`.
    pub fn probability(&self, a: usize) -> Result<f64> {
        Ok(self.entry(a, a)?.re)
    }

    pub fn class_operator(&self, a: usize) -> Result<&CMatrix> {
        self.class_operators.get(a).ok_or(Error::IndexOutOfRange {
            index: a,
            len: self.class_operators.len(),
        })
    }

    pub fn index_tuples(&self) -> &[Vec<usize>] {
        &self.index_tuples
    }

    pub fn rho0(&self) -> &DensityMatrix {
        &self.rho0
    }
}

/// Additivity defect p(a ∨ b) − p(a) − p(b) for two histories that differ
/// in exactly one slot, computed from the joined class operator C_a + C_b.
/// In exact arithmetic this equals 2 Re d(a, b); the function goes through
/// the join so that identity stays a checkable statement.
pub fn interference(dm: &DecoherenceMatrix, a: usize, b: usize) -> Result<f64> {
    let n = dm.len();
    if a >= n {
        return Err(Error::IndexOutOfRange { index: a, len: n });
    }
    if b >= n {
        return Err(Error::IndexOutOfRange { index: b, len: n });
    }
    let differing = dm.index_tuples[a]
        .iter()
        .zip(&dm.index_tuples[b])
        .filter(|(x, y)| x != y)
        .count();
    if differing != 1 {
        return Err(Error::JoinUndefined { left: a, right: b });
    }
    let joined = &dm.class_operators[a] + &dm.class_operators[b];
    let p_join = (&joined * dm.rho0.matrix() * joined.adjoint()).trace().re;
    Ok(p_join - dm.entries[(a, a)].re - dm.entries[(b, b)].re)
}

/// Verdict on whether the set decoheres at threshold `epsilon`: every
/// off-diagonal modulus must be at most `epsilon`. Probabilities are
/// reported only when the verdict is positive; without decoherence the
/// diagonal numbers do not obey the probability calculus and handing them
/// out would invite misuse.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub epsilon: f64,
    pub max_offdiag_modulus: f64,
    pub is_consistent: bool,
    pub probabilities: Option<Vec<f64>>,
}

pub fn consistency_check(dm: &DecoherenceMatrix, epsilon: f64) -> ConsistencyReport {
    let n = dm.len();
    let mut max_offdiag = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            if a != b {
                max_offdiag = max_offdiag.max(dm.entries[(a, b)].norm());
            }
        }
    }
    let is_consistent = max_offdiag <= epsilon;
    let probabilities = if is_consistent {
        Some((0..n).map(|a| dm.entries[(a, a)].re.max(0.0)).collect())
    } else {
        None
    };
    ConsistencyReport {
        epsilon,
        max_offdiag_modulus: max_offdiag,
        is_consistent,
        probabilities,
    }
}

/// d(a, b) for two coarse histories, re-derived as the double sum of
/// fine-grained overlap chains over every tuple pair (capped per side).
/// Exactness against `decoherence_functional` is the bilinearity of the
/// functional in its two class operators.
pub fn df_coarse_sum(
    a: &History,
    b: &History,
    table: &PropagatorTable,
    rho0: &DensityMatrix,
    rho_f: Option<&CMatrix>,
) -> Result<Complex64> {
    check_same_grid(&a.times(), &b.times())?;
    if a.dim() != table.dim() || b.dim() != table.dim() {
        return Err(Error::DimensionMismatch {
            left: table.dim(),
            right: a.dim().max(b.dim()),
        });
    }
    if rho0.dim() != table.dim() {
        return Err(Error::DimensionMismatch {
            left: table.dim(),
            right: rho0.dim(),
        });
    }
    let tuple_count = |h: &History| {
        h.events()
            .iter()
            .map(|(_, p)| p.rank())
            .try_fold(1usize, |acc, r| acc.checked_mul(r))
            .unwrap_or(usize::MAX)
    };
    let count_a = tuple_count(a);
    let count_b = tuple_count(b);
    for count in [count_a, count_b] {
        if count > tol::TUPLE_CAP {
            return Err(Error::TupleCapExceeded {
                count,
                cap: tol::TUPLE_CAP,
            });
        }
    }
    let bases_a = heisenberg_bases(a, table)?;
    let bases_b = heisenberg_bases(b, table)?;
    let m = bases_a.len();
    let ranks_a: Vec<usize> = bases_a.iter().map(Vec::len).collect();
    let ranks_b: Vec<usize> = bases_b.iter().map(Vec::len).collect();

    // per-branch chain factors over each enumerated tuple, plus the tuple's
    // first and last basis indices for the boundary factors
    let decode = |flat: usize, ranks: &[usize]| {
        let mut rem = flat;
        let mut tuple = vec![0usize; m];
        for k in (0..m).rev() {
            tuple[k] = rem % ranks[k];
            rem /= ranks[k];
        }
        tuple
    };
    let mut chains_a = Vec::with_capacity(count_a);
    for flat in 0..count_a {
        let u = decode(flat, &ranks_a);
        let mut chain = Complex64::new(1.0, 0.0);
        for k in 1..m {
            chain *= bases_a[k][u[k]].dotc(&bases_a[k - 1][u[k - 1]]);
        }
        chains_a.push((chain, u[0], u[m - 1]));
    }
    let mut chains_b = Vec::with_capacity(count_b);
    for flat in 0..count_b {
        let v = decode(flat, &ranks_b);
        let mut chain = Complex64::new(1.0, 0.0);
        for k in 1..m {
            chain *= bases_b[k - 1][v[k - 1]].dotc(&bases_b[k][v[k]]);
        }
        chains_b.push((chain, v[0], v[m - 1]));
    }

    // boundary factor tables: front[i][j] = ⟨ã_1[i]|ρ₀|b̃_1[j]⟩ and
    // back[j][i] = ⟨b̃_m[j]|ρ̃_f|ã_m[i]⟩ with ρ̃_f conjugated to the last
    // event time (plain overlap when no final condition is given)
    let front: Vec<Vec<Complex64>> = bases_a[0]
        .iter()
        .map(|x| {
            bases_b[0]
                .iter()
                .map(|y| sandwich(x, rho0.matrix(), y))
                .collect()
        })
        .collect();
    let back: Vec<Vec<Complex64>> = match rho_f {
        None => bases_b[m - 1]
            .iter()
            .map(|y| bases_a[m - 1].iter().map(|x| y.dotc(x)).collect())
            .collect(),
        Some(rf) => {
            check_final_condition(rf, table.dim())?;
            let t_last = *a.times().last().expect("history is nonempty");
            let u = table.unitary_at_time(t_last)?;
            let moved = u.adjoint() * rf * u;
            bases_b[m - 1]
                .iter()
                .map(|y| {
                    bases_a[m - 1]
                        .iter()
                        .map(|x| sandwich(y, &moved, x))
                        .collect()
                })
                .collect()
        }
    };

    let mut sum = Complex64::new(0.0, 0.0);
    for (ca, a0, am) in &chains_a {
        for (cb, b0, bm) in &chains_b {
            sum += ca * cb * front[*a0][*b0] * back[*bm][*am];
        }
    }
    Ok(sum)
}
