//! Histories as time-ordered projector sequences and their class operators.
//!
//! A history assigns one projector to each of a finite set of times. Its
//! class operator is the time-ordered product of the projectors conjugated
//! into the Heisenberg picture,
//!
//! ```text
//!   C = U†(t_n) P_n U(t_n) ··· U†(t_1) P_1 U(t_1)
//! ```
//!
//! with the latest event leftmost. For a fine-grained history (all rank 1)
//! the trace of C collapses to a product of state overlaps: the Pancharatnam
//! product of the Heisenberg-moved path. Coarse grainings are sums of class
//! operators, and `coarse_phase_sum` verifies that additivity tuple by tuple.

use num_complex::Complex64;

use crate::dynamics::PropagatorTable;
use crate::geometry::DiscretePath;
use crate::hilbert::{max_abs, orthonormal_basis_of, CMatrix, CVector, Projector};
use crate::{tol, Error, Result};

/// Projector-valued events at strictly increasing times.
#[derive(Debug, Clone)]
pub struct History {
    events: Vec<(f64, Projector)>,
}

impl History {
    pub fn try_new(events: Vec<(f64, Projector)>) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::EmptyHistory);
        }
        let dim = events[0].1.dim();
        for (i, (t, p)) in events.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: p.dim(),
                });
            }
            if i > 0 && !(*t > events[i - 1].0) {
                return Err(Error::NonIncreasingTimes { index: i });
            }
        }
        Ok(Self { events })
    }

    /// One rank-1 event per path sample: the finest graining that follows
    /// the given path.
    pub fn fine_grained_from_path(path: &DiscretePath) -> Self {
        let events = path
            .samples()
            .iter()
            .map(|(t, ray)| (*t, Projector::from_ray(ray)))
            .collect();
        Self { events }
    }

    pub fn events(&self) -> &[(f64, Projector)] {
        &self.events
    }

    pub fn event(&self, i: usize) -> &(f64, Projector) {
        &self.events[i]
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.events[0].1.dim()
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|(t, _)| *t).collect()
    }

    /// True when every event is a rank-1 projector.
    pub fn is_fine_grained(&self) -> bool {
        self.events.iter().all(|(_, p)| p.rank() == 1)
    }
}

/// The class operator of `history` under the dynamics in `table`. Every
/// event time must sit exactly on the table's grid; off-grid events are
/// refused, never interpolated.
pub fn class_operator(history: &History, table: &PropagatorTable) -> Result<CMatrix> {
    if history.dim() != table.dim() {
        return Err(Error::DimensionMismatch {
            left: table.dim(),
            right: history.dim(),
        });
    }
    let mut acc: Option<CMatrix> = None;
    for (t, p) in history.events() {
        let u = table.unitary_at_time(*t)?;
        let moved = u.adjoint() * p.matrix() * u;
        acc = Some(match acc {
            None => moved,
            Some(earlier) => moved * earlier,
        });
    }
    Ok(acc.expect("history is nonempty"))
}

/// Tr C, the complex amplitude a history contributes to interference sums.
/// Fine-grained histories give |Tr C| ≤ 1 with the Pancharatnam phase of
/// their Heisenberg path as argument; coarse ones can exceed unit modulus.
pub fn trace_class_operator(history: &History, table: &PropagatorTable) -> Result<Complex64> {
    Ok(class_operator(history, table)?.trace())
}

/// Heisenberg-moved orthonormal bases of each event's range, one basis per
/// time slot: b_k[i] = U†(t_k) v_{k,i}.
pub(crate) fn heisenberg_bases(
    history: &History,
    table: &PropagatorTable,
) -> Result<Vec<Vec<CVector>>> {
    history
        .events()
        .iter()
        .map(|(t, p)| {
            let u = table.unitary_at_time(*t)?;
            Ok(orthonormal_basis_of(p)
                .iter()
                .map(|v| u.adjoint() * v.amplitudes())
                .collect())
        })
        .collect()
}

/// Tr C re-derived the long way: decompose every event into rank-1 pieces
/// and sum the overlap product of each fine-grained selection,
///
/// ```text
///   Σ_{i_1..i_n} ⟨b_1[i_1]|b_n[i_n]⟩ · Π_k ⟨b_k[i_k]|b_{k−1}[i_{k−1}]⟩
/// ```
///
/// over at most `tol::TUPLE_CAP` tuples. Agreement with
/// `trace_class_operator` is exactly the additivity of coarse graining.
pub fn coarse_phase_sum(history: &History, table: &PropagatorTable) -> Result<Complex64> {
    if history.dim() != table.dim() {
        return Err(Error::DimensionMismatch {
            left: table.dim(),
            right: history.dim(),
        });
    }
    let ranks: Vec<usize> = history.events().iter().map(|(_, p)| p.rank()).collect();
    let count = ranks
        .iter()
        .try_fold(1usize, |acc, &r| acc.checked_mul(r))
        .unwrap_or(usize::MAX);
    if count > tol::TUPLE_CAP {
        return Err(Error::TupleCapExceeded {
            count,
            cap: tol::TUPLE_CAP,
        });
    }
    let bases = heisenberg_bases(history, table)?;
    let m = bases.len();
    // step[k][i][j] = ⟨b_k[i]|b_{k−1}[j]⟩; closing[i][j] = ⟨b_0[i]|b_last[j]⟩
    let step: Vec<Vec<Vec<Complex64>>> = (1..m)
        .map(|k| {
            bases[k]
                .iter()
                .map(|bi| bases[k - 1].iter().map(|bj| bi.dotc(bj)).collect())
                .collect()
        })
        .collect();
    let closing: Vec<Vec<Complex64>> = bases[0]
        .iter()
        .map(|bi| bases[m - 1].iter().map(|bj| bi.dotc(bj)).collect())
        .collect();

    let mut sum = Complex64::new(0.0, 0.0);
    for flat in 0..count {
        let mut rem = flat;
        let mut tuple = vec![0usize; m];
        for k in (0..m).rev() {
            tuple[k] = rem % ranks[k];
            rem /= ranks[k];
        }
        let mut term = closing[tuple[0]][tuple[m - 1]];
        for k in 1..m {
            term *= step[k - 1][tuple[k]][tuple[k - 1]];
        }
        sum += term;
    }
    Ok(sum)
}

/// The full Cartesian family of histories built from one projector
/// decomposition of the identity per time slot.
#[derive(Debug, Clone)]
pub struct HistorySet {
    slots: Vec<(f64, Vec<Projector>)>,
    index_tuples: Vec<Vec<usize>>,
    dim: usize,
}

/// Validate per-slot exclusivity (P_i P_j ≈ 0) and exhaustiveness
/// (Σ P_i ≈ I), then enumerate every combination in row-major order (last
/// slot fastest). Exclusivity is checked first: a family summing to the
/// identity within tolerance is automatically near-orthogonal, so checking
/// in the other order would shadow the more specific error.
pub fn build_history_set(slots: Vec<(f64, Vec<Projector>)>) -> Result<HistorySet> {
    if slots.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let dim = slots[0]
        .1
        .first()
        .map(|p| p.dim())
        .ok_or(Error::NotExhaustive {
            slot: 0,
            defect: 1.0,
        })?;
    for (s, (t, alternatives)) in slots.iter().enumerate() {
        if s > 0 && !(*t > slots[s - 1].0) {
            return Err(Error::NonIncreasingTimes { index: s });
        }
        for p in alternatives {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: p.dim(),
                });
            }
        }
        for i in 0..alternatives.len() {
            for j in (i + 1)..alternatives.len() {
                let defect = max_abs(&(alternatives[i].matrix() * alternatives[j].matrix()));
                if defect > tol::EXCLUSIVE {
                    return Err(Error::NotExclusive {
                        slot: s,
                        left: i,
                        right: j,
                        defect,
                    });
                }
            }
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for p in alternatives {
            sum += p.matrix();
        }
        let defect = max_abs(&(sum - CMatrix::identity(dim, dim)));
        if defect > tol::EXHAUSTIVE {
            return Err(Error::NotExhaustive { slot: s, defect });
        }
    }
    let lens: Vec<usize> = slots.iter().map(|(_, a)| a.len()).collect();
    let count = lens
        .iter()
        .try_fold(1usize, |acc, &l| acc.checked_mul(l))
        .unwrap_or(usize::MAX);
    if count > tol::TUPLE_CAP {
        return Err(Error::TupleCapExceeded {
            count,
            cap: tol::TUPLE_CAP,
        });
    }
    let m = slots.len();
    let mut index_tuples = Vec::with_capacity(count);
    for flat in 0..count {
        let mut rem = flat;
        let mut tuple = vec![0usize; m];
        for k in (0..m).rev() {
            tuple[k] = rem % lens[k];
            rem /= lens[k];
        }
        index_tuples.push(tuple);
    }
    Ok(HistorySet {
        slots,
        index_tuples,
        dim,
    })
}

impl HistorySet {
    pub fn len(&self) -> usize {
        self.index_tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_tuples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slots(&self) -> &[(f64, Vec<Projector>)] {
        &self.slots
    }

    pub fn times(&self) -> Vec<f64> {
        self.slots.iter().map(|(t, _)| *t).collect()
    }

    pub fn index_tuples(&self) -> &[Vec<usize>] {
        &self.index_tuples
    }

    pub fn tuple(&self, i: usize) -> Result<&[usize]> {
        self.index_tuples
            .get(i)
            .map(|t| t.as_slice())
            .ok_or(Error::IndexOutOfRange {
                index: i,
                len: self.index_tuples.len(),
            })
    }

    /// Materialize the i-th history of the enumeration.
    pub fn history(&self, i: usize) -> Result<History> {
        let tuple = self.tuple(i)?;
        let events = self
            .slots
            .iter()
            .zip(tuple)
            .map(|((t, alternatives), &a)| (*t, alternatives[a].clone()))
            .collect();
        History::try_new(events)
    }
}
