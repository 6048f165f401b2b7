//! C ABI over the core library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_sample`/`*_load`
//! and released with the matching `*_free`. Every fallible call returns a
//! [`BtStatus`]; the message of the last failure on the calling thread is
//! available through [`bt_last_error`]. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bethe_transport::bounds::ballistic_certificate;
use bethe_transport::green::resolvent_column;
use bethe_transport::population::snapshot;
use bethe_transport::{
    sample_field, Boundary, ComplexEnergy, Error, GreenPool, PotentialDistribution, PotentialField, TreeGeometry,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BtStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Numeric = 3,
    Io = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BtDistKind {
    /// Uniform on `[-param/2, param/2]`.
    Uniform = 0,
    /// Centred normal law with standard deviation `param`.
    Gaussian = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BtDistribution {
    pub kind: BtDistKind,
    pub param: f64,
}

/// Potential sampled on a truncated tree.
pub struct BtField {
    field: PotentialField,
    geometry: TreeGeometry,
}

/// Population of forward Green functions.
pub struct BtPool {
    pool: GreenPool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> BtStatus {
    match e {
        Error::Io(_) | Error::Format(_) | Error::Json(_) => BtStatus::Io,
        e if e.is_numeric() => BtStatus::Numeric,
        _ => BtStatus::InvalidArgument,
    }
}

struct Failure(BtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BtStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BtStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            BtStatus::Panic
        }
    }
}

fn distribution(d: *const BtDistribution) -> Result<PotentialDistribution, Failure> {
    // SAFETY: checked for null; the caller guarantees a valid struct otherwise.
    let d = unsafe { d.as_ref() }.ok_or_else(|| null("distribution"))?;
    Ok(match d.kind {
        BtDistKind::Uniform => PotentialDistribution::uniform(d.param)?,
        BtDistKind::Gaussian => PotentialDistribution::gaussian(d.param)?,
    })
}

fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    // SAFETY: non-null, NUL-terminated by contract.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(BtStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
    Ok(Path::new(s))
}

fn out_slice<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller provides `len` writable doubles.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
/// `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bt_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `n + 1 <= len` bytes are writable.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Samples an i.i.d. potential on the `K`-regular tree of depth `depth`.
///
/// # Safety
/// `dist` must be null or valid; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn bt_field_sample(
    dist: *const BtDistribution,
    branching: usize,
    depth: usize,
    seed: u64,
    out: *mut *mut BtField,
) -> BtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dist = distribution(dist)?;
        let geometry = TreeGeometry::new(branching, depth)?;
        let field = sample_field(&dist, &geometry, seed)?;
        // SAFETY: checked above.
        unsafe { *out = Box::into_raw(Box::new(BtField { field, geometry })) };
        Ok(())
    })
}

/// Number of vertices of the tree carrying `field`, or 0 for null.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bt_field_vertex_count(field: *const BtField) -> usize {
    // SAFETY: null or live by contract.
    unsafe { field.as_ref() }.map_or(0, |f| f.geometry.vertex_count())
}

/// # Safety
/// `field` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bt_field_free(field: *mut BtField) {
    if !field.is_null() {
        // SAFETY: created by `Box::into_raw` in `bt_field_sample`.
        drop(unsafe { Box::from_raw(field) });
    }
}

/// Writes `G(0,x;E+i eta)` for every vertex `x` (heap order) with Dirichlet truncation.
/// `len` must equal [`bt_field_vertex_count`].
///
/// # Safety
/// `re` and `im` must each hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bt_resolvent_column(
    field: *const BtField,
    energy: f64,
    eta: f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> BtStatus {
    guard(|| {
        // SAFETY: null or live by contract.
        let f = unsafe { field.as_ref() }.ok_or_else(|| null("field"))?;
        if len != f.geometry.vertex_count() {
            return Err(Failure(
                BtStatus::InvalidArgument,
                format!("buffer length {len} differs from the vertex count {}", f.geometry.vertex_count()),
            ));
        }
        let z = ComplexEnergy::new(energy, eta)?;
        let col = resolvent_column(&f.field, &f.geometry, z, Boundary::Zero)?;
        let (re, im) = (out_slice(re, len, "re")?, out_slice(im, len, "im")?);
        for (i, g) in col.g0x.iter().enumerate() {
            re[i] = g.re;
            im[i] = g.im;
        }
        Ok(())
    })
}

/// Builds a pool at `E + i eta` and runs `burn_in` sweeps.
///
/// # Safety
/// `dist` must be null or valid; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn bt_pool_new(
    dist: *const BtDistribution,
    branching: usize,
    energy: f64,
    eta: f64,
    size: usize,
    burn_in: usize,
    seed: u64,
    out: *mut *mut BtPool,
) -> BtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dist = distribution(dist)?;
        let z = ComplexEnergy::new(energy, eta)?;
        let pool = GreenPool::equilibrated(dist, branching, z, size, burn_in, seed)?;
        // SAFETY: checked above.
        unsafe { *out = Box::into_raw(Box::new(BtPool { pool })) };
        Ok(())
    })
}

/// Runs `sweeps` further sweeps.
///
/// # Safety
/// `pool` must be null or a live handle used by one thread at a time.
#[no_mangle]
pub unsafe extern "C" fn bt_pool_evolve(pool: *mut BtPool, sweeps: usize) -> BtStatus {
    guard(|| {
        // SAFETY: null or live by contract.
        let p = unsafe { pool.as_mut() }.ok_or_else(|| null("pool"))?;
        p.pool.evolve(sweeps)?;
        Ok(())
    })
}

/// Sweeps completed so far, or 0 for null.
///
/// # Safety
/// `pool` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bt_pool_sweeps_done(pool: *const BtPool) -> usize {
    // SAFETY: null or live by contract.
    unsafe { pool.as_ref() }.map_or(0, |p| p.pool.sweeps_done())
}

/// Draws `n` samples of `G(0,0)`; the same `(pool, stream)` pair gives the same draws.
///
/// # Safety
/// `re` and `im` must each hold `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bt_pool_root_samples(
    pool: *const BtPool,
    n: usize,
    stream: u64,
    re: *mut f64,
    im: *mut f64,
) -> BtStatus {
    guard(|| {
        // SAFETY: null or live by contract.
        let p = unsafe { pool.as_ref() }.ok_or_else(|| null("pool"))?;
        let (re, im) = (out_slice(re, n, "re")?, out_slice(im, n, "im")?);
        for (i, g) in p.pool.root_samples(n, stream)?.iter().enumerate() {
            re[i] = g.re;
            im[i] = g.im;
        }
        Ok(())
    })
}

/// Writes a binary snapshot and its JSON sidecar (`<path>.json`).
///
/// # Safety
/// `pool` must be null or live; `path` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bt_pool_save(pool: *const BtPool, path: *const c_char) -> BtStatus {
    guard(|| {
        // SAFETY: null or live by contract.
        let p = unsafe { pool.as_ref() }.ok_or_else(|| null("pool"))?;
        snapshot::save(&p.pool, path_arg(path)?)?;
        Ok(())
    })
}

/// Loads a snapshot. Sampling from the loaded pool requires at least the
/// default burn-in of 100 recorded sweeps.
///
/// # Safety
/// `path` must be null or NUL-terminated; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bt_pool_load(path: *const c_char, out: *mut *mut BtPool) -> BtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let pool = snapshot::load(path_arg(path)?)?;
        // SAFETY: checked above.
        unsafe { *out = Box::into_raw(Box::new(BtPool { pool })) };
        Ok(())
    })
}

/// # Safety
/// `pool` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bt_pool_free(pool: *mut BtPool) {
    if !pool.is_null() {
        // SAFETY: created by `Box::into_raw`.
        drop(unsafe { Box::from_raw(pool) });
    }
}

/// Front speed `v_hat` and rate `mu` of the ballistic tail bound for branching `K`.
///
/// # Safety
/// `v_hat` and `mu` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn bt_ballistic_certificate(branching: usize, v_hat: *mut f64, mu: *mut f64) -> BtStatus {
    guard(|| {
        if v_hat.is_null() || mu.is_null() {
            return Err(null("output"));
        }
        let c = ballistic_certificate(branching)?;
        // SAFETY: checked above.
        unsafe {
            *v_hat = c.v_hat;
            *mu = c.mu;
        }
        Ok(())
    })
}
