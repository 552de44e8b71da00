//! C ABI for the aggdef simulator.
//!
//! Every function returns an [`AggdefStatus`]. On failure a human-readable
//! message is kept per thread and can be copied out with
//! [`aggdef_last_error_message`]. Simulations are opaque handles created by
//! `aggdef_simulation_new_*` and released with [`aggdef_simulation_free`].
//! Panics never cross the boundary; they surface as `AGGDEF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use aggdef_core::constraints::{project, FeasibleBox};
use aggdef_core::harness::{RunConfig, Simulation};
use aggdef_core::network::{build_proximity_graph, metropolis_weights};
use aggdef_core::{Error, Vec3};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggdefStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Numerical = 4,
    Protocol = 5,
    Io = 6,
    Panic = 7,
    BufferTooSmall = 8,
}

/// Opaque simulation handle.
pub struct AggdefSimulation {
    inner: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> AggdefStatus {
    match e {
        Error::Input(_) => AggdefStatus::InvalidInput,
        Error::Numerical(_) => AggdefStatus::Numerical,
        Error::Config(_) => AggdefStatus::Config,
        Error::Protocol(_) => AggdefStatus::Protocol,
        Error::Io { .. } | Error::Parse { .. } => AggdefStatus::Io,
    }
}

struct Failure(AggdefStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AggdefStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error or panic, and maps it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AggdefStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AggdefStatus::Ok
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
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            AggdefStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller passes a NUL-terminated string that outlives the call.
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| Failure(AggdefStatus::InvalidInput, format!("{what} is not valid UTF-8")))
}

unsafe fn sim_ref<'a>(sim: *const AggdefSimulation) -> Result<&'a AggdefSimulation, Failure> {
    // SAFETY: non-null handles come from `aggdef_simulation_new_*` and are not yet freed.
    unsafe { sim.as_ref() }.ok_or_else(|| null("simulation"))
}

unsafe fn sim_mut<'a>(sim: *mut AggdefSimulation) -> Result<&'a mut AggdefSimulation, Failure> {
    // SAFETY: as for `sim_ref`, and the caller does not share the handle across threads.
    unsafe { sim.as_mut() }.ok_or_else(|| null("simulation"))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: checked non-null; caller provides a writable location.
    unsafe { out.write(value) };
    Ok(())
}

fn new_handle(cfg: RunConfig, out: *mut *mut AggdefSimulation) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let inner = Simulation::new(cfg.resolve()?)?;
    let handle = Box::into_raw(Box::new(AggdefSimulation { inner }));
    // SAFETY: checked non-null above.
    unsafe { out.write(handle) };
    Ok(())
}

/// Creates a simulation from a built-in preset.
///
/// `horizon < 0` keeps the preset horizon.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn aggdef_simulation_new_preset(
    name: *const c_char,
    seed: u64,
    horizon: i64,
    out: *mut *mut AggdefSimulation,
) -> AggdefStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let name = unsafe { str_arg(name, "name") }?;
        let cfg = RunConfig {
            seed: Some(seed),
            horizon: usize::try_from(horizon).ok(),
            ..RunConfig::from_preset(name)
        };
        new_handle(cfg, out)
    })
}

/// Creates a simulation from the text of a run configuration (TOML).
///
/// Trajectory CSV references are not supported here; inline the waypoints.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn aggdef_simulation_new_from_toml(
    config: *const c_char,
    out: *mut *mut AggdefSimulation,
) -> AggdefStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let text = unsafe { str_arg(config, "config") }?;
        new_handle(RunConfig::from_toml_str(text)?, out)
    })
}

/// Releases a simulation. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn aggdef_simulation_free(sim: *mut AggdefSimulation) {
    if !sim.is_null() {
        // SAFETY: handle was created by `Box::into_raw` in `new_handle`.
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Advances one tick. `advanced` receives false once the horizon is reached.
///
/// # Safety
/// `sim` must be a live handle; `advanced` may be null.
#[no_mangle]
pub unsafe extern "C" fn aggdef_simulation_step(sim: *mut AggdefSimulation, advanced: *mut bool) -> AggdefStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let sim = unsafe { sim_mut(sim) }?;
        let moved = sim.inner.step()?;
        if !advanced.is_null() {
            // SAFETY: checked non-null.
            unsafe { advanced.write(moved) };
        }
        Ok(())
    })
}

/// Runs to the horizon.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn aggdef_simulation_run(sim: *mut AggdefSimulation) -> AggdefStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let sim = unsafe { sim_mut(sim) }?;
        while sim.inner.step()? {}
        Ok(())
    })
}

/// Current tick and simulated time in seconds.
///
/// # Safety
/// `sim` must be a live handle; `tick` and `time` writable.
#[no_mangle]
pub unsafe extern "C" fn aggdef_simulation_time(
    sim: *const AggdefSimulation,
    tick: *mut u64,
    time: *mut f64,
) -> AggdefStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let sim = unsafe { sim_ref(sim) }?;
        // SAFETY: forwarded caller contract.
        unsafe {
            write_out(tick, sim.inner.t() as u64, "tick")?;
            write_out(time, sim.inner.time(), "time")
        }
    })
}

/// Number of defenders.
///
/// # Safety
/// `sim` must be a live handle and `n` writable.
#[no_mangle]
pub unsafe extern "C" fn aggdef_simulation_num_agents(sim: *const AggdefSimulation, n: *mut usize) -> AggdefStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let sim = unsafe { sim_ref(sim) }?;
        // SAFETY: forwarded caller contract.
        unsafe { write_out(n, sim.inner.agents().len(), "n") }
    })
}

/// Copies defender positions as `x0 y0 z0 x1 y1 z1 ...` into `buf`.
///
/// `len` is the capacity in doubles; fewer than `3 N` gives
/// `AGGDEF_STATUS_BUFFER_TOO_SMALL` and leaves `buf` untouched.
///
/// # Safety
/// `sim` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aggdef_simulation_positions(
    sim: *const AggdefSimulation,
    buf: *mut f64,
    len: usize,
) -> AggdefStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let sim = unsafe { sim_ref(sim) }?;
        let xs = sim.inner.positions();
        if len < 3 * xs.len() {
            return Err(Failure(
                AggdefStatus::BufferTooSmall,
                format!("need {} doubles, got {len}", 3 * xs.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        // SAFETY: caller guarantees `len` writable doubles.
        let out = unsafe { std::slice::from_raw_parts_mut(buf, len) };
        for (chunk, x) in out.chunks_mut(3).zip(&xs) {
            chunk.copy_from_slice(x.as_slice());
        }
        Ok(())
    })
}

/// Dynamic regret accumulated so far (NaN when the oracle is off).
///
/// # Safety
/// `sim` must be a live handle and `regret` writable.
#[no_mangle]
pub unsafe extern "C" fn aggdef_simulation_regret(sim: *const AggdefSimulation, regret: *mut f64) -> AggdefStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let sim = unsafe { sim_ref(sim) }?;
        // SAFETY: forwarded caller contract.
        unsafe { write_out(regret, sim.inner.regret(), "regret") }
    })
}

/// Writes trace, metrics, summary and run file into `dir`.
///
/// # Safety
/// `sim` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn aggdef_simulation_write_outputs(
    sim: *const AggdefSimulation,
    dir: *const c_char,
) -> AggdefStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let (sim, dir) = unsafe { (sim_ref(sim)?, str_arg(dir, "dir")?) };
        sim.inner.write_outputs(Path::new(dir))?;
        Ok(())
    })
}

/// Metropolis mixing matrix of the proximity graph of `n` points
/// (`positions` holds `3 n` doubles), written row-major into `weights`
/// (`n * n` doubles).
///
/// # Safety
/// `positions` must hold `3 n` doubles and `weights` `weights_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aggdef_metropolis_weights(
    n: usize,
    positions: *const f64,
    radius: f64,
    weights: *mut f64,
    weights_len: usize,
) -> AggdefStatus {
    guard(|| {
        if positions.is_null() || weights.is_null() {
            return Err(null("positions or weights"));
        }
        if weights_len < n * n {
            return Err(Failure(AggdefStatus::BufferTooSmall, format!("need {} doubles", n * n)));
        }
        // SAFETY: caller guarantees the sizes.
        let (pos, out) = unsafe {
            (
                std::slice::from_raw_parts(positions, 3 * n),
                std::slice::from_raw_parts_mut(weights, weights_len),
            )
        };
        let xs: Vec<Vec3> = pos.chunks(3).map(Vec3::from_column_slice).collect();
        let g = metropolis_weights(build_proximity_graph(&xs, radius)?);
        let w = g.weights().expect("metropolis graph carries weights");
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = w[(i, j)];
            }
        }
        Ok(())
    })
}

/// Euclidean projection of `x` onto the box `[lower, upper]`; all arrays hold 3 doubles.
///
/// # Safety
/// Each pointer must reference 3 valid doubles.
#[no_mangle]
pub unsafe extern "C" fn aggdef_project_box(
    x: *const f64,
    lower: *const f64,
    upper: *const f64,
    out: *mut f64,
) -> AggdefStatus {
    guard(|| {
        if x.is_null() || lower.is_null() || upper.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        // SAFETY: caller guarantees three doubles per pointer.
        let read = |p: *const f64| Vec3::from_column_slice(unsafe { std::slice::from_raw_parts(p, 3) });
        let (lo, hi) = (read(lower), read(upper));
        if (0..3).any(|c| lo[c].is_nan() || hi[c].is_nan() || lo[c] > hi[c]) {
            return Err(Failure(AggdefStatus::InvalidInput, "lower bound exceeds upper bound".into()));
        }
        let b = FeasibleBox {
            lower: lo,
            upper: hi,
            repaired: [false; 3],
        };
        let p = project(&read(x), &b);
        // SAFETY: caller guarantees three writable doubles.
        unsafe { std::slice::from_raw_parts_mut(out, 3) }.copy_from_slice(p.as_slice());
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length plus one, so a caller
/// can size the buffer; 1 means no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn aggdef_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: caller guarantees `len` writable bytes.
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                buf.add(n).write(0);
            }
        }
        bytes.len() + 1
    })
}
