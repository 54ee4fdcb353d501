//! Seeded random generators for states, operators, and projector families.
//!
//! Everything here is driven by a caller-supplied [`rand::Rng`] so that runs
//! are reproducible from a single seed; the crate's own entry points use
//! ChaCha8 streams for that. Gaussian entries make the resulting ensembles
//! basis-independent.

use nalgebra::Complex;
use num_complex::Complex64;
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use crate::hilbert::{CMatrix, CVector, DensityMatrix, Projector, StateVector};

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with independent standard complex Gaussian entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian_complex(rng))
}

/// Haar-like random unit vector.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> StateVector {
    loop {
        let v = CVector::from_fn(dim, |_, _| gaussian_complex(rng));
        if let Ok(state) = StateVector::normalized(v) {
            return state;
        }
    }
}

/// Random Hermitian matrix (G + G†)/2, scaled entrywise by `scale`.
pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> CMatrix {
    let g = gaussian_matrix(rng, dim, dim);
    ((&g + g.adjoint()) * Complex64::new(0.5 * scale, 0.0)).clone_owned()
}

/// Random full-rank density matrix G G† / Tr(G G†).
pub fn density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    loop {
        let g = gaussian_matrix(rng, dim, dim);
        let m = &g * g.adjoint();
        let trace = m.trace().re;
        if trace > 1e-6 {
            let normalized = m.unscale(trace);
            // symmetrize away the last rounding bits so validation is clean
            let sym = (&normalized + normalized.adjoint()).unscale(2.0);
            if let Ok(rho) = DensityMatrix::try_new(sym) {
                return rho;
            }
        }
    }
}

/// Random unitary from the QR decomposition of a Gaussian matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let q = gaussian_matrix(rng, dim, dim).qr().q();
    q.columns(0, dim).into_owned()
}

/// Columns of a random unitary: an orthonormal frame.
pub fn orthonormal_frame<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<CVector> {
    let q = unitary(rng, dim);
    (0..dim).map(|k| q.column(k).into_owned()).collect()
}

/// Random resolution of the identity: a frame partitioned into consecutive
/// blocks of random sizes, one projector per block. Exhaustive and exclusive
/// by construction, with at least two blocks whenever `dim` ≥ 2.
pub fn projector_partition<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<Projector> {
    let frame = orthonormal_frame(rng, dim);
    let mut sizes = Vec::new();
    let mut remaining = dim;
    while remaining > 0 {
        let cap = if sizes.is_empty() { remaining - 1 } else { remaining };
        let size = if cap <= 1 { 1 } else { rng.random_range(1..=cap) };
        sizes.push(size);
        remaining -= size;
    }
    let mut offset = 0;
    sizes
        .into_iter()
        .map(|size| {
            let mut m = CMatrix::zeros(dim, dim);
            for v in &frame[offset..offset + size] {
                m += v * v.adjoint();
            }
            offset += size;
            Projector::try_new(m).expect("frame blocks form exact projectors")
        })
        .collect()
}
