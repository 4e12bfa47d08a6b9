//! C ABI for `ionshuttle`.
//!
//! Objects are opaque handles created by `*_new`/constructor functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`IonshuttleStatus`]; on failure the message is kept per thread and can be
//! copied out with [`ionshuttle_last_error`]. Output pointers are written only
//! on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ionshuttle::design::{self, ComFamily};
use ionshuttle::{chain, dynamics, ChainConfig, Error, IntegratorOptions, NormalModeBasis, Species, Trajectory};

/// Result codes of the C API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IonshuttleStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    SingularConfiguration = 4,
    IonCrossing = 5,
    Convergence = 6,
    Integration = 7,
    DesignFailure = 8,
    Config = 9,
    Panic = 10,
}

/// Analytic centre-of-mass trajectory families.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IonshuttleFamily {
    Nonic = 0,
    Cosine = 1,
}

/// An ion chain in a harmonic trap together with its normal modes.
pub struct IonshuttleChain {
    config: ChainConfig,
    basis: NormalModeBasis,
}

/// A trap trajectory `Q0(t)`.
pub struct IonshuttleTrajectory {
    traj: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> IonshuttleStatus {
    match err {
        Error::InvalidParameter(_) => IonshuttleStatus::InvalidArgument,
        Error::SingularConfiguration(..) => IonshuttleStatus::SingularConfiguration,
        Error::IonCrossing(..) => IonshuttleStatus::IonCrossing,
        Error::Convergence { .. } => IonshuttleStatus::Convergence,
        Error::Integration { .. } => IonshuttleStatus::Integration,
        Error::DesignFailure(_) => IonshuttleStatus::DesignFailure,
        Error::Config(_) | Error::Io(_) | Error::Json(_) => IonshuttleStatus::Config,
    }
}

struct Failure(IonshuttleStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: IonshuttleStatus, msg: &str) -> Result<T, Failure> {
    Err(Failure(status, msg.to_string()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IonshuttleStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            IonshuttleStatus::Ok
        }
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
            IonshuttleStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().map_or_else(|| fail(IonshuttleStatus::NullPointer, "null handle"), Ok)
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return fail(IonshuttleStatus::NullPointer, "null output buffer");
    }
    if len < needed {
        return Err(Failure(
            IonshuttleStatus::BufferTooSmall,
            format!("buffer holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return fail(IonshuttleStatus::NullPointer, "null output pointer");
    }
    out.write(value);
    Ok(())
}

/// Library version as a NUL-terminated string with static lifetime.
#[no_mangle]
pub extern "C" fn ionshuttle_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a chain from ion masses (u, ion 1 first) and the axial frequency of
/// ion 1 alone in the trap (Hz).
///
/// # Safety
/// `masses_amu` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_chain_new(
    masses_amu: *const f64,
    n: usize,
    trap_frequency_hz: f64,
    out: *mut *mut IonshuttleChain,
) -> IonshuttleStatus {
    guard(|| {
        if masses_amu.is_null() {
            return fail(IonshuttleStatus::NullPointer, "null mass array");
        }
        if n == 0 {
            return fail(IonshuttleStatus::InvalidArgument, "chain needs at least one ion");
        }
        let species = std::slice::from_raw_parts(masses_amu, n)
            .iter()
            .map(|&m| Species::from_amu(m))
            .collect::<Result<Vec<_>, _>>()?;
        let omega1 = 2.0 * std::f64::consts::PI * trap_frequency_hz;
        let config = ChainConfig::from_trap_frequency(species, omega1, 0.0)?;
        let basis = chain::normal_modes(&config)?;
        write_out(out, Box::into_raw(Box::new(IonshuttleChain { config, basis })))
    })
}

/// Releases a chain. Null is ignored.
///
/// # Safety
/// `chain` must come from [`ionshuttle_chain_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_chain_free(chain: *mut IonshuttleChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Number of ions, or 0 for a null handle.
///
/// # Safety
/// `chain` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_chain_num_ions(chain: *const IonshuttleChain) -> usize {
    chain.as_ref().map_or(0, |c| c.config.num_ions())
}

/// Normal modes in ascending frequency. Each buffer holds `len` doubles:
/// `omega` (rad/s) and `gamma` (kg^1/2) need N, `offsets` (m) needs N and
/// `vectors` needs N*N (row k is mode k). Any buffer may be null to skip it.
///
/// # Safety
/// Non-null buffers must have `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_chain_modes(
    chain: *const IonshuttleChain,
    omega: *mut f64,
    gamma: *mut f64,
    offsets: *mut f64,
    vectors: *mut f64,
    len: usize,
) -> IonshuttleStatus {
    guard(|| {
        let c = deref(chain)?;
        let n = c.config.num_ions();
        let b = &c.basis;
        if !omega.is_null() {
            out_slice(omega, len, n)?.copy_from_slice(&b.omega);
        }
        if !gamma.is_null() {
            out_slice(gamma, len, n)?.copy_from_slice(&b.gamma);
        }
        if !offsets.is_null() {
            out_slice(offsets, len, n)?.copy_from_slice(&b.offsets);
        }
        if !vectors.is_null() {
            let v = out_slice(vectors, len, n * n)?;
            for (k, row) in b.modes.iter().enumerate() {
                v[k * n..(k + 1) * n].copy_from_slice(row);
            }
        }
        Ok(())
    })
}

unsafe fn new_trajectory(
    out: *mut *mut IonshuttleTrajectory,
    make: impl FnOnce() -> Result<Trajectory, Failure>,
) -> IonshuttleStatus {
    guard(|| {
        if out.is_null() {
            return fail(IonshuttleStatus::NullPointer, "null output pointer");
        }
        let traj = make()?;
        write_out(out, Box::into_raw(Box::new(IonshuttleTrajectory { traj })))
    })
}

/// Constant-velocity ramp over `d` metres in `tf` seconds.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_trajectory_linear(
    tf: f64,
    d: f64,
    out: *mut *mut IonshuttleTrajectory,
) -> IonshuttleStatus {
    new_trajectory(out, || Ok(Trajectory::linear(tf, d)?))
}

/// Error-function ramp with Gaussian velocity of width `sigma` (s).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_trajectory_erf(
    tf: f64,
    d: f64,
    sigma: f64,
    out: *mut *mut IonshuttleTrajectory,
) -> IonshuttleStatus {
    new_trajectory(out, || Ok(Trajectory::erf(tf, d, sigma)?))
}

/// Analytic trajectory leaving the centre of mass at rest, using the chain's
/// centre-of-mass frequency times `omega_scale`.
///
/// # Safety
/// `chain` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_trajectory_analytic(
    chain: *const IonshuttleChain,
    family: IonshuttleFamily,
    tf: f64,
    d: f64,
    omega_scale: f64,
    out: *mut *mut IonshuttleTrajectory,
) -> IonshuttleStatus {
    new_trajectory(out, || {
        let c = deref(chain)?;
        let family = match family {
            IonshuttleFamily::Nonic => ComFamily::Nonic,
            IonshuttleFamily::Cosine => ComFamily::Cosine,
        };
        Ok(design::design_com_analytic(family, c.config.com_omega(), d, tf, omega_scale)?)
    })
}

/// Numerically designed nonic for a two-ion chain. `residual`, if non-null,
/// receives the largest end residual relative to `max |gamma| d`.
///
/// # Safety
/// `chain` must be a live handle; `out` must be writable; `residual` may be null.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_trajectory_design(
    chain: *const IonshuttleChain,
    tf: f64,
    d: f64,
    out: *mut *mut IonshuttleTrajectory,
    residual: *mut f64,
) -> IonshuttleStatus {
    new_trajectory(out, || {
        let c = deref(chain)?;
        let res = design::design_nonic(&c.config, &c.basis, d, tf)?;
        if !residual.is_null() {
            *residual = res.max_residual() / res.tolerance * design::DESIGN_TOLERANCE;
        }
        Ok(res.trajectory()?)
    })
}

/// Parses a trajectory (or a saved design result) from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_trajectory_from_json(
    json: *const c_char,
    out: *mut *mut IonshuttleTrajectory,
) -> IonshuttleStatus {
    new_trajectory(out, || {
        if json.is_null() {
            return fail(IonshuttleStatus::NullPointer, "null string");
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Failure(IonshuttleStatus::InvalidArgument, "string is not UTF-8".into()))?;
        let file: ionshuttle::sweep::TrajectoryFile = serde_json::from_str(text)
            .map_err(|e| Failure(IonshuttleStatus::Config, format!("not a trajectory: {e}")))?;
        Ok(file.trajectory()?)
    })
}

/// Writes the trajectory as JSON into `buf` (NUL-terminated). `needed`, if
/// non-null, receives the length without the NUL; a short buffer gives
/// `BUFFER_TOO_SMALL` and leaves `buf` untouched.
///
/// # Safety
/// `traj` must be a live handle; `buf` must have `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_trajectory_to_json(
    traj: *const IonshuttleTrajectory,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> IonshuttleStatus {
    guard(|| {
        let t = deref(traj)?;
        let spec = ionshuttle::trajectory::TrajectorySpec::from(&t.traj);
        let text = serde_json::to_string(&spec).map_err(|e| Failure(IonshuttleStatus::Config, e.to_string()))?;
        if !needed.is_null() {
            *needed = text.len();
        }
        if buf.is_null() {
            return fail(IonshuttleStatus::NullPointer, "null output buffer");
        }
        if len <= text.len() {
            return Err(Failure(
                IonshuttleStatus::BufferTooSmall,
                format!("buffer holds {len} bytes, {} needed", text.len() + 1),
            ));
        }
        ptr::copy_nonoverlapping(text.as_ptr(), buf.cast(), text.len());
        *buf.add(text.len()) = 0;
        Ok(())
    })
}

/// Releases a trajectory. Null is ignored.
///
/// # Safety
/// `traj` must come from a trajectory constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_trajectory_free(traj: *mut IonshuttleTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Trap position (m), velocity and acceleration at time `t` (s). Outside the
/// transport window the trap rests at its end points. Outputs may be null.
///
/// # Safety
/// `traj` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_trajectory_evaluate(
    traj: *const IonshuttleTrajectory,
    t: f64,
    q0: *mut f64,
    dq0: *mut f64,
    ddq0: *mut f64,
) -> IonshuttleStatus {
    guard(|| {
        let s = deref(traj)?.traj.evaluate(t);
        for (p, v) in [(q0, s.q0), (dq0, s.dq0), (ddq0, s.ddq0)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Largest boundary-condition residual, each scaled by `d`, `d/tf` or `d/tf^2`.
///
/// # Safety
/// `traj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_trajectory_boundary_residual(
    traj: *const IonshuttleTrajectory,
    out: *mut f64,
) -> IonshuttleStatus {
    guard(|| write_out(out, deref(traj)?.traj.verify_boundaries().max_scaled()))
}

unsafe fn report(
    rep: ionshuttle::ExcitationReport,
    quanta: *mut f64,
    len: usize,
    total_quanta_omega1: *mut f64,
) -> Result<(), Failure> {
    if !quanta.is_null() {
        let q = rep.quanta();
        out_slice(quanta, len, q.len())?.copy_from_slice(&q);
    }
    if !total_quanta_omega1.is_null() {
        *total_quanta_omega1 = rep.total_quanta_omega1;
    }
    Ok(())
}

/// Full classical transport from rest at equilibrium. Writes per-mode quanta
/// (N values) and the total energy in quanta of ion 1. `rel_tol <= 0` selects
/// the default tolerance.
///
/// # Safety
/// Handles must be live; `quanta` must be null or hold `len` doubles;
/// `total_quanta_omega1` may be null.
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_simulate(
    chain: *const IonshuttleChain,
    traj: *const IonshuttleTrajectory,
    rel_tol: f64,
    quanta: *mut f64,
    len: usize,
    total_quanta_omega1: *mut f64,
) -> IonshuttleStatus {
    guard(|| {
        let c = deref(chain)?;
        let t = deref(traj)?;
        let opts = if rel_tol > 0.0 {
            IntegratorOptions::with_rel_tol(rel_tol)
        } else {
            IntegratorOptions::default()
        };
        let rep = dynamics::simulate_transport(&c.config, &c.basis, &t.traj, &opts)?;
        report(rep, quanta, len, total_quanta_omega1)
    })
}

/// Excitation predicted by the uncoupled normal-mode model.
///
/// # Safety
/// As for [`ionshuttle_simulate`].
#[no_mangle]
pub unsafe extern "C" fn ionshuttle_uncoupled_excitation(
    chain: *const IonshuttleChain,
    traj: *const IonshuttleTrajectory,
    quanta: *mut f64,
    len: usize,
    total_quanta_omega1: *mut f64,
) -> IonshuttleStatus {
    guard(|| {
        let c = deref(chain)?;
        let t = deref(traj)?;
        let rep = design::uncoupled_excitation(&c.config, &c.basis, &t.traj)?;
        report(rep, quanta, len, total_quanta_omega1)
    })
}
