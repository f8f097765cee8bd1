//! C ABI over `focus-diffusion`.
//!
//! Every fallible call returns an [`FdStatus`]; results go through out
//! pointers. Handles are opaque and must be released with the matching
//! `*_free` function. The message behind the last non-OK status on the
//! calling thread is available from [`fd_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use focus_diffusion::coefficients;
use focus_diffusion::eidf::{canonical_focusing_eidf, named_scripts, run_script};
use focus_diffusion::mc::{self, EnsembleRun, SimConfig};
use focus_diffusion::models::{self, ScatteringSetup};
use focus_diffusion::moments::compare;
use focus_diffusion::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Setup = 3,
    Numerical = 4,
    Algebra = 5,
    Model = 6,
    Config = 7,
    Invariant = 8,
    Io = 9,
    Panic = 10,
}

/// Scattering setup handle.
pub struct FdSetup(ScatteringSetup);

/// Finished Monte Carlo ensemble.
pub struct FdEnsemble {
    config: SimConfig,
    run: EnsembleRun,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> FdStatus {
    match e {
        Error::Domain(_) => FdStatus::Domain,
        Error::Setup(_) => FdStatus::Setup,
        Error::Numerical(_) => FdStatus::Numerical,
        Error::Algebra(_) => FdStatus::Algebra,
        Error::Model(_) => FdStatus::Model,
        Error::Config(_) => FdStatus::Config,
        Error::Invariant(_) => FdStatus::Invariant,
        Error::Io { .. } => FdStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), FdStatus>) -> FdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FdStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            FdStatus::Panic
        }
    }
}

fn check<T>(r: focus_diffusion::Result<T>) -> Result<T, FdStatus> {
    r.map_err(|e| {
        set_error(&e.to_string());
        status_of(&e)
    })
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, FdStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null pointer argument");
        FdStatus::NullPointer
    })
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), FdStatus> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(FdStatus::NullPointer);
    }
    out.write(value);
    Ok(())
}

/// Message for the last failure on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create a setup from speed, pitch-angle diffusion constant and ξ.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn fd_setup_new(v: f64, d: f64, xi: f64, out: *mut *mut FdSetup) -> FdStatus {
    guard(|| {
        let s = check(ScatteringSetup::with_xi(v, d, xi))?;
        write(out, Box::into_raw(Box::new(FdSetup(s))))
    })
}

/// Create a setup from the focusing length L (infinite for none).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn fd_setup_from_length(
    v: f64,
    d: f64,
    focusing_length: f64,
    out: *mut *mut FdSetup,
) -> FdStatus {
    guard(|| {
        let s = check(ScatteringSetup::with_focusing_length(v, d, focusing_length))?;
        write(out, Box::into_raw(Box::new(FdSetup(s))))
    })
}

/// # Safety
/// `setup` must come from `fd_setup_new`/`fd_setup_from_length` or be null.
#[no_mangle]
pub unsafe extern "C" fn fd_setup_free(setup: *mut FdSetup) {
    if !setup.is_null() {
        drop(Box::from_raw(setup));
    }
}

/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_setup_xi(setup: *const FdSetup, out: *mut f64) -> FdStatus {
    guard(|| write(out, deref(setup)?.0.xi))
}

unsafe fn scalar(
    setup: *const FdSetup,
    out: *mut f64,
    f: impl FnOnce(&ScatteringSetup) -> focus_diffusion::Result<f64>,
) -> FdStatus {
    guard(|| {
        let v = check(f(&deref(setup)?.0))?;
        write(out, v)
    })
}

/// κ_z = v(coth ξ − 1/ξ).
///
/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_kappa_z(setup: *const FdSetup, out: *mut f64) -> FdStatus {
    scalar(setup, out, coefficients::kappa_z)
}

/// Bieber–Walter parallel diffusion coefficient.
///
/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_kappa_zz_bw(setup: *const FdSetup, out: *mut f64) -> FdStatus {
    scalar(setup, out, coefficients::kappa_zz_bw)
}

/// κ_tz.
///
/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_kappa_tz(setup: *const FdSetup, out: *mut f64) -> FdStatus {
    scalar(setup, out, coefficients::kappa_tz)
}

/// κ_tzz.
///
/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_kappa_tzz(setup: *const FdSetup, out: *mut f64) -> FdStatus {
    scalar(setup, out, coefficients::kappa_tzz)
}

/// κ_zz − κ_z κ_tz.
///
/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_kappa_dv_formula(setup: *const FdSetup, out: *mut f64) -> FdStatus {
    scalar(setup, out, coefficients::kappa_dv_formula)
}

/// Late-time displacement-variance coefficient from the exact integral.
///
/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_kappa_dv_exact(setup: *const FdSetup, out: *mut f64) -> FdStatus {
    scalar(setup, out, coefficients::kappa_dv_exact)
}

/// Closed-form TGK coefficient.
///
/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_kappa_tgk_closed_form(
    setup: *const FdSetup,
    out: *mut f64,
) -> FdStatus {
    scalar(setup, out, |s| Ok(coefficients::kappa_tgk_closed_form(s)))
}

/// κ_ntz for n ≥ 2.
///
/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_kappa_ntz(setup: *const FdSetup, n: usize, out: *mut f64) -> FdStatus {
    guard(|| {
        let v = check(coefficients::kappa_ntz(n, &deref(setup)?.0))?;
        write(out, v)
    })
}

/// M(μ) for the setup.
///
/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_mu_potential(
    setup: *const FdSetup,
    mu: f64,
    out: *mut f64,
) -> FdStatus {
    guard(|| {
        let v = check(models::mu_potential(&deref(setup)?.0, mu))?;
        write(out, v)
    })
}

/// Monte Carlo run parameters; start from `fd_mc_params_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FdMcParams {
    pub n_particles: usize,
    pub dt: f64,
    pub t_max: f64,
    pub n_snapshots: usize,
    pub seed: u64,
    pub fit_window: f64,
    pub vacf_cutoff: f64,
    pub n_batches: usize,
    /// Worker threads; 0 uses the global pool. Results do not depend on it.
    pub threads: usize,
}

/// Default run parameters for `setup`.
///
/// # Safety
/// `setup` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_mc_params_default(
    setup: *const FdSetup,
    out: *mut FdMcParams,
) -> FdStatus {
    guard(|| {
        let c = SimConfig::new(deref(setup)?.0);
        write(
            out,
            FdMcParams {
                n_particles: c.n_particles,
                dt: c.dt,
                t_max: c.t_max,
                n_snapshots: c.n_snapshots,
                seed: c.seed,
                fit_window: c.fit_window,
                vacf_cutoff: c.vacf_cutoff,
                n_batches: c.n_batches,
                threads: 0,
            },
        )
    })
}

/// Run an ensemble.
///
/// # Safety
/// `setup` and `params` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_mc_run(
    setup: *const FdSetup,
    params: *const FdMcParams,
    out: *mut *mut FdEnsemble,
) -> FdStatus {
    guard(|| {
        let s = deref(setup)?.0;
        let p = *deref(params)?;
        let config = SimConfig {
            n_particles: p.n_particles,
            dt: p.dt,
            t_max: p.t_max,
            n_snapshots: p.n_snapshots,
            seed: p.seed,
            fit_window: p.fit_window,
            vacf_cutoff: p.vacf_cutoff,
            n_batches: p.n_batches,
            ..SimConfig::new(s)
        };
        let run = if p.threads == 0 {
            check(mc::run_ensemble_full(&config))?
        } else {
            check(mc::run_ensemble_with_threads(&config, p.threads))?
        };
        write(out, Box::into_raw(Box::new(FdEnsemble { config, run })))
    })
}

/// # Safety
/// `ens` must come from `fd_mc_run` or be null.
#[no_mangle]
pub unsafe extern "C" fn fd_ensemble_free(ens: *mut FdEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// Number of snapshots, including t = 0; 0 for a null handle.
///
/// # Safety
/// `ens` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fd_ensemble_len(ens: *const FdEnsemble) -> usize {
    ens.as_ref().map_or(0, |e| e.run.stats.len())
}

/// Time, mean displacement and variance at snapshot `k`.
///
/// # Safety
/// `ens` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_ensemble_snapshot(
    ens: *const FdEnsemble,
    k: usize,
    t: *mut f64,
    mean_dz: *mut f64,
    variance: *mut f64,
) -> FdStatus {
    guard(|| {
        let st = &deref(ens)?.run.stats;
        if k >= st.len() {
            set_error("snapshot index out of range");
            return Err(FdStatus::Domain);
        }
        write(t, st.times[k])?;
        write(mean_dz, st.mean_dz[k])?;
        write(variance, st.variance[k])
    })
}

/// κ_DV from the late-time variance slope.
///
/// # Safety
/// `ens` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_ensemble_kappa_dv(
    ens: *const FdEnsemble,
    value: *mut f64,
    std_error: *mut f64,
) -> FdStatus {
    guard(|| {
        let e = deref(ens)?;
        let est = check(mc::estimate_kappa_dv(&e.run.stats, &e.config))?;
        write(value, est.value)?;
        write(std_error, est.std_error)
    })
}

/// κ_TGK from the velocity autocorrelation integral.
///
/// # Safety
/// `ens` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_ensemble_kappa_tgk(
    ens: *const FdEnsemble,
    value: *mut f64,
    std_error: *mut f64,
) -> FdStatus {
    guard(|| {
        let e = deref(ens)?;
        let est = check(mc::kappa_tgk_from_record(&e.run.vacf, &e.config))?;
        write(value, est.value)?;
        write(std_error, est.std_error)
    })
}

/// Run a built-in DIO script on the canonical equation and report whether
/// the Fick coefficient changed and the displacement-variance one held.
///
/// # Safety
/// `name` must be a NUL-terminated string; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_dio_check(
    name: *const c_char,
    fick_changed: *mut bool,
    dv_invariant: *mut bool,
) -> FdStatus {
    guard(|| {
        if name.is_null() {
            set_error("null script name");
            return Err(FdStatus::NullPointer);
        }
        let name = CStr::from_ptr(name).to_str().map_err(|_| {
            set_error("script name is not UTF-8");
            FdStatus::Config
        })?;
        let (script, w, _) = named_scripts()
            .into_iter()
            .find(|(s, _, _)| s.name == name)
            .ok_or_else(|| {
                set_error(&format!("unknown script {name:?}"));
                FdStatus::Config
            })?;
        let start = check(canonical_focusing_eidf(w))?;
        let chain = check(run_script(&start, &script.steps))?;
        let rep = check(compare(name, &start, chain.last().unwrap_or(&start)))?;
        write(fick_changed, rep.fick_changed)?;
        write(dv_invariant, rep.dv_invariant)
    })
}

/// Number of built-in DIO scripts.
#[no_mangle]
pub extern "C" fn fd_dio_script_count() -> usize {
    named_scripts().len()
}

/// Copy the name of built-in script `index` into `buf` (NUL-terminated,
/// truncated to `len`). Writes the full name length to `needed`.
///
/// # Safety
/// `buf` must hold `len` bytes (or be null with `len` 0); `needed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_dio_script_name(
    index: usize,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> FdStatus {
    guard(|| {
        let scripts = named_scripts();
        let name = &scripts
            .get(index)
            .ok_or_else(|| {
                set_error("script index out of range");
                FdStatus::Domain
            })?
            .0
            .name;
        write(needed, name.len())?;
        if len > 0 {
            if buf.is_null() {
                set_error("null buffer");
                return Err(FdStatus::NullPointer);
            }
            let n = name.len().min(len - 1);
            ptr::copy_nonoverlapping(name.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        Ok(())
    })
}
