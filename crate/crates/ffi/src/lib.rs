//! C ABI over the discrete geometric-phase core: build a path of rays
//! sample by sample, then ask for its Pancharatnam product, open-path
//! phase, or loop holonomy.
//!
//! Conventions, mirrored in the generated header:
//! - Complex amplitude arrays are interleaved doubles
//!   `[re0, im0, re1, im1, ...]` of length `2 * dim`.
//! - Every fallible call returns an `HpStatus`; outputs are written through
//!   pointers only on `HP_STATUS_OK`.
//! - Handles come from `hp_path_new` and must be released exactly once with
//!   `hp_path_free`. All functions tolerate null pointers by reporting
//!   `HP_STATUS_NULL_POINTER` rather than crashing.
//! - Inputs are normalized on entry, so callers may hand in any nonzero
//!   vector; angles come back in (-pi, pi] and radians.

use std::ffi::{c_char, CStr};
use std::slice;

use histphase::geometry::{
    geometric_phase_open, loop_holonomy, pancharatnam_product, principal_angle, DiscretePath,
    PhaseResult,
};
use histphase::hilbert::{fs_distance, CVector, Ray, StateVector};
use histphase::Error;
use num_complex::Complex64;

/// Outcome of a library call. Zero is success; everything else names the
/// first contract the inputs broke.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of contract (non-finite entries, zero vector,
    /// dimension below 2, ...).
    InvalidArgument = 2,
    /// Two objects live in spaces of different dimension.
    DimensionMismatch = 3,
    /// The operation needs at least two path samples.
    PathTooShort = 4,
    /// Open-path phase is undefined for orthogonal endpoints.
    OrthogonalEndpoints = 5,
    /// Loop holonomy needs the first and last samples on the same ray.
    NotALoop = 6,
    /// An overlap in the product chain vanished, so the angle is undefined
    /// (the phase factor itself is still the zero it should be).
    VanishingOverlap = 7,
}

fn status_of(err: &Error) -> HpStatus {
    match err {
        Error::DimensionMismatch { .. } => HpStatus::DimensionMismatch,
        Error::PathTooShort { .. } => HpStatus::PathTooShort,
        Error::OrthogonalEndpoints { .. } => HpStatus::OrthogonalEndpoints,
        Error::NotALoop { .. } => HpStatus::NotALoop,
        Error::VanishingOverlap { .. } => HpStatus::VanishingOverlap,
        _ => HpStatus::InvalidArgument,
    }
}

/// Growable sequence of rays; the C-side stand-in for `DiscretePath`.
/// Opaque on purpose: layout is free to change.
pub struct HpPath {
    dim: usize,
    rays: Vec<Ray>,
}

impl HpPath {
    fn as_discrete_path(&self) -> Result<DiscretePath, Error> {
        DiscretePath::from_rays(self.rays.clone(), 0.0, 1.0)
    }
}

/// Version of this library as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hp_version() -> *const c_char {
    const VERSION: &CStr = match CStr::from_bytes_with_nul(
        concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes(),
    ) {
        Ok(v) => v,
        Err(_) => unreachable!(),
    };
    VERSION.as_ptr()
}

/// Static human-readable description of a status code.
#[no_mangle]
pub extern "C" fn hp_status_message(status: HpStatus) -> *const c_char {
    let message: &CStr = match status {
        HpStatus::Ok => c"ok",
        HpStatus::NullPointer => c"a required pointer argument was null",
        HpStatus::InvalidArgument => c"an argument was out of contract",
        HpStatus::DimensionMismatch => c"objects live in different dimensions",
        HpStatus::PathTooShort => c"the path needs at least two samples",
        HpStatus::OrthogonalEndpoints => c"open-path phase is undefined for orthogonal endpoints",
        HpStatus::NotALoop => c"the first and last samples are not the same ray",
        HpStatus::VanishingOverlap => c"an overlap in the product chain vanished",
    };
    message.as_ptr()
}

/// Wrap `x` into the principal branch (-pi, pi].
#[no_mangle]
pub extern "C" fn hp_principal_angle(x: f64) -> f64 {
    principal_angle(x)
}

/// Allocate an empty path over C^dim. Returns null when `dim` < 2.
#[no_mangle]
pub extern "C" fn hp_path_new(dim: usize) -> *mut HpPath {
    if dim < 2 {
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(HpPath {
        dim,
        rays: Vec::new(),
    }))
}

/// Release a path. Null is a no-op.
///
/// # Safety
/// `path` must be a pointer from `hp_path_new` not freed before.
#[no_mangle]
pub unsafe extern "C" fn hp_path_free(path: *mut HpPath) {
    if !path.is_null() {
        drop(unsafe { Box::from_raw(path) });
    }
}

/// Number of samples pushed so far; 0 for a null handle.
///
/// # Safety
/// `path` must be null or a live pointer from `hp_path_new`.
#[no_mangle]
pub unsafe extern "C" fn hp_path_len(path: *const HpPath) -> usize {
    if path.is_null() {
        return 0;
    }
    unsafe { &*path }.rays.len()
}

/// Append one sample from `2 * dim` interleaved doubles. The amplitudes are
/// normalized on entry; the zero vector and non-finite entries are rejected.
///
/// # Safety
/// `amplitudes` must point to `2 * dim` readable doubles for the `dim` the
/// path was created with.
#[no_mangle]
pub unsafe extern "C" fn hp_path_push(path: *mut HpPath, amplitudes: *const f64) -> HpStatus {
    if path.is_null() || amplitudes.is_null() {
        return HpStatus::NullPointer;
    }
    let path = unsafe { &mut *path };
    let raw = unsafe { slice::from_raw_parts(amplitudes, 2 * path.dim) };
    if raw.iter().any(|x| !x.is_finite()) {
        return HpStatus::InvalidArgument;
    }
    let vector = CVector::from_fn(path.dim, |k, _| Complex64::new(raw[2 * k], raw[2 * k + 1]));
    match StateVector::normalized(vector) {
        Ok(state) => {
            path.rays.push(state.ray());
            HpStatus::Ok
        }
        Err(err) => status_of(&err),
    }
}

/// Append the spin-1/2 coherent state at colatitude `theta`, azimuth `phi`.
/// The path must live over C^2.
///
/// # Safety
/// `path` must be null or a live pointer from `hp_path_new`.
#[no_mangle]
pub unsafe extern "C" fn hp_path_push_bloch(path: *mut HpPath, theta: f64, phi: f64) -> HpStatus {
    if path.is_null() {
        return HpStatus::NullPointer;
    }
    let path = unsafe { &mut *path };
    if path.dim != 2 {
        return HpStatus::DimensionMismatch;
    }
    if !theta.is_finite() || !phi.is_finite() {
        return HpStatus::InvalidArgument;
    }
    path.rays.push(StateVector::bloch(theta, phi).ray());
    HpStatus::Ok
}

/// Remove all samples, keeping the dimension.
///
/// # Safety
/// `path` must be null or a live pointer from `hp_path_new`.
#[no_mangle]
pub unsafe extern "C" fn hp_path_clear(path: *mut HpPath) -> HpStatus {
    if path.is_null() {
        return HpStatus::NullPointer;
    }
    unsafe { &mut *path }.rays.clear();
    HpStatus::Ok
}

fn run_phase<F>(path: *const HpPath, compute: F) -> Result<PhaseResult, HpStatus>
where
    F: FnOnce(&DiscretePath) -> Result<PhaseResult, Error>,
{
    if path.is_null() {
        return Err(HpStatus::NullPointer);
    }
    let path = unsafe { &*path };
    if path.rays.len() < 2 {
        return Err(HpStatus::PathTooShort);
    }
    let discrete = path.as_discrete_path().map_err(|e| status_of(&e))?;
    compute(&discrete).map_err(|e| status_of(&e))
}

/// Pancharatnam product of the path: the closing overlap times the chain of
/// successive overlaps. Writes the complex factor; its modulus is at most 1
/// and may be 0, in which case no angle exists.
///
/// # Safety
/// `out_re` and `out_im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_path_pancharatnam(
    path: *const HpPath,
    out_re: *mut f64,
    out_im: *mut f64,
) -> HpStatus {
    if out_re.is_null() || out_im.is_null() {
        return HpStatus::NullPointer;
    }
    match run_phase(path, |p| Ok(pancharatnam_product(p))) {
        Ok(result) => {
            unsafe {
                *out_re = result.phase_factor.re;
                *out_im = result.phase_factor.im;
            }
            HpStatus::Ok
        }
        Err(status) => status,
    }
}

/// Geometric phase of an open path, i.e. the principal argument of the
/// Pancharatnam product, with the endpoints closed by a geodesic. Fails on
/// orthogonal endpoints and on a vanishing interior overlap.
///
/// # Safety
/// `out_angle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_path_open_phase(
    path: *const HpPath,
    out_angle: *mut f64,
) -> HpStatus {
    if out_angle.is_null() {
        return HpStatus::NullPointer;
    }
    match run_phase(path, geometric_phase_open) {
        Ok(result) => match result.angle {
            Some(angle) => {
                unsafe { *out_angle = angle };
                HpStatus::Ok
            }
            None => HpStatus::VanishingOverlap,
        },
        Err(status) => status,
    }
}

/// Holonomy angle of a closed path. The first and last samples must lie on
/// the same ray; representatives are free.
///
/// # Safety
/// `out_angle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_path_loop_holonomy(
    path: *const HpPath,
    out_angle: *mut f64,
) -> HpStatus {
    if out_angle.is_null() {
        return HpStatus::NullPointer;
    }
    match run_phase(path, loop_holonomy) {
        Ok(result) => match result.angle {
            Some(angle) => {
                unsafe { *out_angle = angle };
                HpStatus::Ok
            }
            None => HpStatus::VanishingOverlap,
        },
        Err(status) => status,
    }
}

/// Fubini-Study distance arccos |<a|b>| between the rays of two states,
/// each given as `2 * dim` interleaved doubles.
///
/// # Safety
/// `a` and `b` must point to `2 * dim` readable doubles; `out_distance`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn hp_fs_distance(
    dim: usize,
    a: *const f64,
    b: *const f64,
    out_distance: *mut f64,
) -> HpStatus {
    if a.is_null() || b.is_null() || out_distance.is_null() {
        return HpStatus::NullPointer;
    }
    if dim < 2 {
        return HpStatus::InvalidArgument;
    }
    let read = |ptr: *const f64| -> Result<Ray, HpStatus> {
        let raw = unsafe { slice::from_raw_parts(ptr, 2 * dim) };
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(HpStatus::InvalidArgument);
        }
        let vector = CVector::from_fn(dim, |k, _| Complex64::new(raw[2 * k], raw[2 * k + 1]));
        StateVector::normalized(vector)
            .map(|s| s.ray())
            .map_err(|e| status_of(&e))
    };
    let left = match read(a) {
        Ok(ray) => ray,
        Err(status) => return status,
    };
    let right = match read(b) {
        Ok(ray) => ray,
        Err(status) => return status,
    };
    match fs_distance(&left, &right) {
        Ok(distance) => {
            unsafe { *out_distance = distance };
            HpStatus::Ok
        }
        Err(err) => status_of(&err),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses_cover_the_error_surface() {
        let cases = [
            (
                Error::DimensionMismatch { left: 2, right: 3 },
                HpStatus::DimensionMismatch,
            ),
            (Error::PathTooShort { len: 1 }, HpStatus::PathTooShort),
            (
                Error::OrthogonalEndpoints { overlap: 0.0 },
                HpStatus::OrthogonalEndpoints,
            ),
            (Error::NotALoop { overlap: 0.4 }, HpStatus::NotALoop),
            (
                Error::VanishingOverlap { left: 0, right: 1 },
                HpStatus::VanishingOverlap,
            ),
            // everything else degrades to the generic argument error
            (Error::ZeroNorm { norm: 0.0 }, HpStatus::InvalidArgument),
            (
                Error::DimensionTooSmall { dim: 1 },
                HpStatus::InvalidArgument,
            ),
        ];
        for (err, status) in cases {
            assert_eq!(status_of(&err), status, "{err}");
        }
    }
}
