//! Discrete geometric phases of paths on projective Hilbert space.
//!
//! The central object is the Pancharatnam product over a sampled path,
//!
//! ```text
//!   ⟨ψ_0|ψ_n⟩ · Π_{i=1..n} ⟨ψ_i|ψ_{i−1}⟩
//! ```
//!
//! whose argument is the geometric phase of the path closed by the implicit
//! geodesic between its endpoints. The product is invariant under a change of
//! representative at any sample (each appears once as a bra and once as a
//! ket), so it is a function of the ray path alone. The product IS the
//! finite-n definition here; continuum statements are its limits, and angles
//! are always extracted as the principal argument of the accumulated complex
//! product, never by summing per-step arguments.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::hilbert::{geodesic_interpolate, Ray, StateVector};
use crate::{tol, Error, Result};

/// Uniform grid point k of n over [t0, t1]. Every module that lays out a
/// uniform grid goes through this so that times compare bit-for-bit equal
/// across paths, propagator tables, and history event lists.
pub(crate) fn grid_time(t0: f64, t1: f64, n: usize, k: usize) -> f64 {
    t0 + (t1 - t0) * (k as f64) / (n as f64)
}

/// Wrap an angle to the principal branch (−π, π].
pub fn principal_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x % two_pi;
    if y <= -PI {
        y += two_pi;
    } else if y > PI {
        y -= two_pi;
    }
    y
}

/// Distance between two angles on the circle, in [0, π].
pub fn circle_distance(a: f64, b: f64) -> f64 {
    principal_angle(a - b).abs()
}

/// Time-stamped ray samples with strictly increasing times.
#[derive(Debug, Clone)]
pub struct DiscretePath {
    samples: Vec<(f64, Ray)>,
}

impl DiscretePath {
    pub fn try_new(samples: Vec<(f64, Ray)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::PathTooShort { len: samples.len() });
        }
        let dim = samples[0].1.dim();
        for (i, (_, ray)) in samples.iter().enumerate() {
            if ray.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: ray.dim(),
                });
            }
            if i > 0 && !(samples[i].0 > samples[i - 1].0) {
                return Err(Error::NonIncreasingTimes { index: i });
            }
        }
        Ok(Self { samples })
    }

    /// Uniform time grid over [t0, t1].
    pub fn from_rays(rays: Vec<Ray>, t0: f64, t1: f64) -> Result<Self> {
        if rays.len() < 2 {
            return Err(Error::PathTooShort { len: rays.len() });
        }
        if !(t1 > t0) {
            return Err(Error::NonIncreasingTimes { index: 1 });
        }
        let n = rays.len() - 1;
        let samples = rays
            .into_iter()
            .enumerate()
            .map(|(k, r)| (grid_time(t0, t1, n, k), r))
            .collect();
        Self::try_new(samples)
    }

    pub fn samples(&self) -> &[(f64, Ray)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.samples[0].1.dim()
    }

    pub fn ray(&self, i: usize) -> &Ray {
        &self.samples[i].1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.samples[i].0
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|(t, _)| *t).collect()
    }
}

/// Accumulated phase factor of a path, with its principal argument.
///
/// `magnitude` = 0 flags a vanishing overlap somewhere in the product; the
/// angle carries no information then and is `None`. A vanishing overlap is
/// data, not an error: orthogonal consecutive samples are a legitimate
/// degenerate configuration.
#[derive(Debug, Clone, Copy)]
pub struct PhaseResult {
    pub phase_factor: Complex64,
    pub magnitude: f64,
    pub angle: Option<f64>,
}

impl PhaseResult {
    fn from_factor(z: Complex64) -> Self {
        let magnitude = z.norm().min(1.0);
        let angle = if magnitude == 0.0 {
            None
        } else {
            Some(principal_angle(z.arg()))
        };
        Self {
            phase_factor: z,
            magnitude,
            angle,
        }
    }
}

/// One row of a convergence study at a fixed sample count.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub n_steps: usize,
    pub angle: f64,
    /// |phase_factor − reference phase_factor|, reference being the
    /// finest-n row of the same study. Measured on the complex factor so
    /// that families whose discrete angle is exact at every n (the Bloch
    /// equator) still expose their magnitude convergence.
    pub abs_error_vs_reference: f64,
}

fn overlap(a: &Ray, b: &Ray) -> Complex64 {
    a.representative()
        .inner(b.representative())
        .expect("path samples share dimension")
}

/// Pancharatnam product ⟨ψ_0|ψ_n⟩ · Π ⟨ψ_i|ψ_{i−1}⟩ over the path samples.
pub fn pancharatnam_product(path: &DiscretePath) -> PhaseResult {
    let n = path.len() - 1;
    let mut acc = overlap(path.ray(0), path.ray(n));
    for i in 1..=n {
        acc *= overlap(path.ray(i), path.ray(i - 1));
    }
    PhaseResult::from_factor(acc)
}

/// Geometric phase of an open path, i.e. the Pancharatnam product with the
/// closure ⟨ψ_0|ψ_n⟩ made explicit in the contract: endpoints must not be
/// orthogonal, otherwise the closing geodesic (and the phase) is undefined.
pub fn geometric_phase_open(path: &DiscretePath) -> Result<PhaseResult> {
    let closing = overlap(path.ray(0), path.ray(path.len() - 1)).norm();
    if closing <= tol::ORTHOGONAL_OVERLAP {
        return Err(Error::OrthogonalEndpoints { overlap: closing });
    }
    Ok(pancharatnam_product(path))
}

/// Holonomy of a closed path: the Pancharatnam product of a path whose first
/// and last samples are the same ray (any representatives).
pub fn loop_holonomy(path: &DiscretePath) -> Result<PhaseResult> {
    let closing = overlap(path.ray(0), path.ray(path.len() - 1)).norm();
    if closing < 1.0 - tol::RAY_EQUALITY {
        return Err(Error::NotALoop { overlap: closing });
    }
    Ok(pancharatnam_product(path))
}

/// Discrete line integral of the Berry connection A = i⟨ψ|dψ⟩ along a given
/// lift of the path, with the left-endpoint rule:
///
/// ```text
///   ∫_γ A ≈ −Σ_i Im ⟨ψ_{i−1}|ψ_i − ψ_{i−1}⟩
/// ```
///
/// Gauge-dependent by design: it is a functional of the lift, and together
/// with the argument of the closing overlap it reassembles the (gauge
/// invariant) Pancharatnam angle. A lift whose consecutive representatives
/// are in phase makes this vanish, pushing the whole phase into the closure.
pub fn connection_integral(path: &DiscretePath, lift: &[StateVector]) -> Result<f64> {
    if lift.len() != path.len() {
        return Err(Error::LiftLengthMismatch {
            expected: path.len(),
            got: lift.len(),
        });
    }
    for (i, v) in lift.iter().enumerate() {
        if v.dim() != path.dim() {
            return Err(Error::DimensionMismatch {
                left: path.dim(),
                right: v.dim(),
            });
        }
        if !v.ray().same_ray(path.ray(i)) {
            return Err(Error::LiftOffRay { index: i });
        }
    }
    let mut acc = 0.0;
    for i in 1..lift.len() {
        let ov = lift[i - 1].inner(&lift[i])?;
        if ov.norm() <= tol::ORTHOGONAL_OVERLAP {
            return Err(Error::VanishingOverlap {
                left: i - 1,
                right: i,
            });
        }
        // Im⟨ψ_{i−1}|ψ_i − ψ_{i−1}⟩ = Im⟨ψ_{i−1}|ψ_i⟩ since ⟨ψ|ψ⟩ is real
        acc -= ov.im;
    }
    Ok(acc)
}

/// Insert `factor − 1` geodesic points into every segment. Original samples
/// are preserved exactly (same representatives, same times); inserted times
/// interpolate linearly.
pub fn refine_path(path: &DiscretePath, factor: usize) -> Result<DiscretePath> {
    if factor < 2 {
        return Err(Error::RefineFactorTooSmall { factor });
    }
    let mut samples = Vec::with_capacity((path.len() - 1) * factor + 1);
    for i in 1..path.len() {
        let (t0, r0) = &path.samples()[i - 1];
        let (t1, r1) = &path.samples()[i];
        samples.push((*t0, r0.clone()));
        for j in 1..factor {
            let s = (j as f64) / (factor as f64);
            samples.push((t0 + (t1 - t0) * s, geodesic_interpolate(r0, r1, s)?));
        }
    }
    let last = path.samples().last().expect("path is nonempty");
    samples.push(last.clone());
    DiscretePath::try_new(samples)
}

/// Loop holonomy at each sample count in `n_values`, with errors measured
/// against the finest-n row. The generator parameterizes the loop over
/// s ∈ [0, 1] and must close: generator(0) and generator(1) are the same ray.
pub fn convergence_study<F>(generator: F, n_values: &[usize]) -> Result<Vec<ConvergenceRow>>
where
    F: Fn(f64) -> Ray,
{
    if n_values.is_empty() {
        return Err(Error::PathTooShort { len: 0 });
    }
    for (i, &n) in n_values.iter().enumerate() {
        if n < 2 {
            return Err(Error::PathTooShort { len: n });
        }
        if i > 0 && n <= n_values[i - 1] {
            return Err(Error::NonIncreasingTimes { index: i });
        }
    }
    let mut results = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let rays: Vec<Ray> = (0..=n).map(|k| generator((k as f64) / (n as f64))).collect();
        let path = DiscretePath::from_rays(rays, 0.0, 1.0)?;
        let holonomy = loop_holonomy(&path)?;
        let angle = holonomy.angle.ok_or(Error::VanishingOverlap { left: 0, right: n })?;
        results.push((n, angle, holonomy.phase_factor));
    }
    let reference = results.last().expect("n_values is nonempty").2;
    Ok(results
        .into_iter()
        .map(|(n, angle, factor)| ConvergenceRow {
            n_steps: n,
            angle,
            abs_error_vs_reference: (factor - reference).norm(),
        })
        .collect())
}

/// Error floor below which convergence rows are treated as exact.
pub const CONVERGENCE_NOISE_FLOOR: f64 = 1e-13;

/// Least-squares order p of error ≈ C·n^{−p} from study rows, ignoring rows
/// at or below the noise floor (the self-referenced finest row is always
/// ignored: its error is identically zero). `None` when fewer than two rows
/// carry signal, i.e. the study converged at machine precision everywhere.
pub fn fitted_order(rows: &[ConvergenceRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.abs_error_vs_reference > CONVERGENCE_NOISE_FLOOR)
        .map(|r| ((r.n_steps as f64).log2(), r.abs_error_vs_reference.log2()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (sxx, sxy): (f64, f64) = pts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0 * p.0, a.1 + p.0 * p.1));
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Some(-slope)
}

/// Circle at colatitude `theta` on the Bloch sphere, traversed once in
/// azimuth: the standard closed-loop family for holonomy checks.
pub fn bloch_circle(theta: f64) -> impl Fn(f64) -> Ray {
    move |s: f64| StateVector::bloch(theta, 2.0 * PI * s).ray()
}
