//! C ABI over the analytic transport layer: flow environments as opaque
//! handles, vectorized channel-response evaluation and the thresholding
//! approximations. Every entry point returns an `McStatus`; the last error
//! message is kept per thread and can be fetched with
//! `mc_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mclink::threshold::{self, QuadratureConfig};
use mclink::transport;
use mclink::types::{ChannelGeometry, FlowEnv, GaussPulse, ReactionSpec, RectPulse};
use mclink::Error;

/// Result codes of every FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Parameters outside their physical or configured domain.
    InvalidArgument = 2,
    /// The threshold never crosses the pulse (no output window).
    NoCrossing = 3,
    /// The requested accuracy could not be reached.
    Accuracy = 4,
    /// Search/stability/internal failures.
    InternalError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_for(err: &Error) -> McStatus {
    match err {
        Error::Domain(_) | Error::Config(_) | Error::Parse(_) => McStatus::InvalidArgument,
        Error::NoCrossing { .. } => McStatus::NoCrossing,
        Error::Accuracy { .. } => McStatus::Accuracy,
        _ => McStatus::InternalError,
    }
}

fn fail(err: &Error) -> McStatus {
    set_error(&err.to_string());
    status_for(err)
}

/// Wraps a fallible body, translating panics and errors into status codes.
fn guarded(body: impl FnOnce() -> Result<(), McStatus>) -> McStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => McStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            McStatus::InternalError
        }
    }
}

/// Opaque flow environment handle.
pub struct McEnv {
    env: FlowEnv,
}

/// Last error message of the current thread; valid until the next failing
/// call on this thread. Never null.
#[no_mangle]
pub extern "C" fn mc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a flow environment from an explicit effective diffusivity.
/// The handle must be released with `mc_env_free`.
#[no_mangle]
pub extern "C" fn mc_env_new(
    v_eff: f64,
    d: f64,
    d_eff: f64,
    out_env: *mut *mut McEnv,
) -> McStatus {
    guarded(|| {
        if out_env.is_null() {
            set_error("out_env is null");
            return Err(McStatus::NullPointer);
        }
        let env = FlowEnv::new(v_eff, d, d_eff).map_err(|e| fail(&e))?;
        unsafe { *out_env = Box::into_raw(Box::new(McEnv { env })) };
        Ok(())
    })
}

/// Creates a flow environment with the effective diffusivity computed from
/// the Taylor-Aris dispersion of a rectangular channel (dimensions in m).
#[no_mangle]
pub extern "C" fn mc_env_new_taylor_aris(
    v_eff: f64,
    d: f64,
    length: f64,
    width: f64,
    height: f64,
    out_env: *mut *mut McEnv,
) -> McStatus {
    guarded(|| {
        if out_env.is_null() {
            set_error("out_env is null");
            return Err(McStatus::NullPointer);
        }
        let geom = ChannelGeometry::new(length, width, height).map_err(|e| fail(&e))?;
        let env = mclink::fluidics::env_with_taylor_aris(v_eff, d, &geom).map_err(|e| fail(&e))?;
        unsafe { *out_env = Box::into_raw(Box::new(McEnv { env })) };
        Ok(())
    })
}

/// Releases an environment handle. Null is accepted and ignored.
#[no_mangle]
pub extern "C" fn mc_env_free(env: *mut McEnv) {
    if !env.is_null() {
        drop(unsafe { Box::from_raw(env) });
    }
}

unsafe fn slices<'a>(
    times: *const f64,
    out: *mut f64,
    len: usize,
) -> Result<(&'a [f64], &'a mut [f64]), McStatus> {
    if times.is_null() || out.is_null() {
        set_error("times/out is null");
        return Err(McStatus::NullPointer);
    }
    Ok((
        std::slice::from_raw_parts(times, len),
        std::slice::from_raw_parts_mut(out, len),
    ))
}

fn env_ref<'a>(env: *const McEnv) -> Result<&'a FlowEnv, McStatus> {
    if env.is_null() {
        set_error("env is null");
        return Err(McStatus::NullPointer);
    }
    Ok(unsafe { &(*env).env })
}

/// Pure convection-diffusion response to a rectangular inlet pulse,
/// evaluated at station `x` for `len` time points.
#[no_mangle]
pub extern "C" fn mc_convdiff_rect(
    env: *const McEnv,
    c0: f64,
    t_on: f64,
    t0: f64,
    x: f64,
    times: *const f64,
    out: *mut f64,
    len: usize,
) -> McStatus {
    guarded(|| {
        let env = env_ref(env)?;
        let rect = RectPulse::new(c0, t_on, t0).map_err(|e| fail(&e))?;
        let (t, o) = unsafe { slices(times, out, len) }?;
        for (ti, oi) in t.iter().zip(o.iter_mut()) {
            *oi = transport::convdiff_rect(x, *ti, env, &rect);
        }
        Ok(())
    })
}

fn theorem1(
    env: *const McEnv,
    c0: f64,
    t_on: f64,
    t0: f64,
    k: f64,
    c_b0: f64,
    x: f64,
    times: *const f64,
    out: *mut f64,
    len: usize,
    f: impl Fn(f64, f64, &FlowEnv, &RectPulse, &ReactionSpec) -> f64,
) -> McStatus {
    guarded(|| {
        let env = env_ref(env)?;
        let rect = RectPulse::new(c0, t_on, t0).map_err(|e| fail(&e))?;
        let rx = ReactionSpec::new(k, c_b0).map_err(|e| fail(&e))?;
        let (t, o) = unsafe { slices(times, out, len) }?;
        for (ti, oi) in t.iter().zip(o.iter_mut()) {
            *oi = f(x, *ti, env, &rect, &rx);
        }
        Ok(())
    })
}

/// Surviving reactant concentration of the reacting channel (A + B -> AB).
#[no_mangle]
pub extern "C" fn mc_theorem1_reactant(
    env: *const McEnv,
    c0: f64,
    t_on: f64,
    t0: f64,
    k: f64,
    c_b0: f64,
    x: f64,
    times: *const f64,
    out: *mut f64,
    len: usize,
) -> McStatus {
    theorem1(env, c0, t_on, t0, k, c_b0, x, times, out, len, transport::theorem1_reactant)
}

/// Product concentration of the reacting channel (A + B -> AB).
#[no_mangle]
pub extern "C" fn mc_theorem1_product(
    env: *const McEnv,
    c0: f64,
    t_on: f64,
    t0: f64,
    k: f64,
    c_b0: f64,
    x: f64,
    times: *const f64,
    out: *mut f64,
    len: usize,
) -> McStatus {
    theorem1(env, c0, t_on, t0, k, c_b0, x, times, out, len, transport::theorem1_product)
}

/// Times at which a Gaussian pulse crosses the threshold supply level.
#[no_mangle]
pub extern "C" fn mc_gauss_crossing_times(
    c0: f64,
    mu: f64,
    sigma2: f64,
    c_b0: f64,
    out_t1: *mut f64,
    out_t2: *mut f64,
) -> McStatus {
    guarded(|| {
        if out_t1.is_null() || out_t2.is_null() {
            set_error("out_t1/out_t2 is null");
            return Err(McStatus::NullPointer);
        }
        let g = GaussPulse::new(c0, mu, sigma2).map_err(|e| fail(&e))?;
        let (t1, t2) = threshold::gauss_crossing_times(&g, c_b0).map_err(|e| fail(&e))?;
        unsafe {
            *out_t1 = t1;
            *out_t2 = t2;
        }
        Ok(())
    })
}

/// Clipped-Gaussian approximation of the thresholded residual.
#[no_mangle]
pub extern "C" fn mc_theorem2_appro1(
    env: *const McEnv,
    c0: f64,
    mu: f64,
    sigma2: f64,
    c_b0: f64,
    x: f64,
    times: *const f64,
    out: *mut f64,
    len: usize,
) -> McStatus {
    guarded(|| {
        let env = env_ref(env)?;
        let g = GaussPulse::new(c0, mu, sigma2).map_err(|e| fail(&e))?;
        let (t, o) = unsafe { slices(times, out, len) }?;
        for (ti, oi) in t.iter().zip(o.iter_mut()) {
            *oi = threshold::theorem2_appro1(x, *ti, env, &g, c_b0);
        }
        Ok(())
    })
}

/// Laplace-inversion approximation of the thresholded residual, evaluated on
/// the whole time grid at once (the quadrature nodes are shared).
#[no_mangle]
pub extern "C" fn mc_theorem2_appro2(
    env: *const McEnv,
    c0: f64,
    mu: f64,
    sigma2: f64,
    c_b0: f64,
    x: f64,
    times: *const f64,
    out: *mut f64,
    len: usize,
) -> McStatus {
    guarded(|| {
        let env = env_ref(env)?;
        let g = GaussPulse::new(c0, mu, sigma2).map_err(|e| fail(&e))?;
        let (t, o) = unsafe { slices(times, out, len) }?;
        let result = threshold::theorem2_appro2(x, t, env, &g, c_b0, &QuadratureConfig::default())
            .map_err(|e| fail(&e))?;
        o.copy_from_slice(result.series.c());
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn make_env() -> *mut McEnv {
        let mut env: *mut McEnv = std::ptr::null_mut();
        assert_eq!(mc_env_new(0.002, 1e-9, 1e-8, &mut env), McStatus::Ok);
        assert!(!env.is_null());
        env
    }

    #[test]
    fn env_roundtrip_and_errors() {
        let env = make_env();
        mc_env_free(env);
        mc_env_free(std::ptr::null_mut());

        let mut out: *mut McEnv = std::ptr::null_mut();
        assert_eq!(
            mc_env_new(0.002, -1.0, 1e-8, &mut out),
            McStatus::InvalidArgument
        );
        let msg = unsafe { std::ffi::CStr::from_ptr(mc_last_error_message()) };
        assert!(!msg.to_str().unwrap().is_empty());
        assert_eq!(
            mc_env_new(0.002, 1e-9, 1e-8, std::ptr::null_mut()),
            McStatus::NullPointer
        );
    }

    #[test]
    fn taylor_aris_env_matches_library() {
        let mut env: *mut McEnv = std::ptr::null_mut();
        assert_eq!(
            mc_env_new_taylor_aris(0.002, 1e-9, 540e-6, 10e-6, 10e-6, &mut env),
            McStatus::Ok
        );
        let d_eff = unsafe { (*env).env.d_eff };
        assert!(d_eff > 1e-9);
        mc_env_free(env);
    }

    #[test]
    fn vectorized_theorem1_matches_library() {
        let env = make_env();
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.02).collect();
        let mut out = vec![0.0; times.len()];
        assert_eq!(
            mc_theorem1_product(
                env,
                1.5,
                2.0,
                0.0,
                400.0,
                1.5,
                540e-6,
                times.as_ptr(),
                out.as_mut_ptr(),
                times.len()
            ),
            McStatus::Ok
        );
        let lib_env = FlowEnv::new(0.002, 1e-9, 1e-8).unwrap();
        let rect = RectPulse::new(1.5, 2.0, 0.0).unwrap();
        let rx = ReactionSpec::new(400.0, 1.5).unwrap();
        for (&t, &v) in times.iter().zip(&out) {
            assert_eq!(v, transport::theorem1_product(540e-6, t, &lib_env, &rect, &rx));
        }
        mc_env_free(env);
    }

    #[test]
    fn crossing_times_and_appro() {
        let mut t1 = 0.0;
        let mut t2 = 0.0;
        assert_eq!(
            mc_gauss_crossing_times(3.0, 2.0, 0.25, 0.5, &mut t1, &mut t2),
            McStatus::Ok
        );
        assert!(t1 < 2.0 && 2.0 < t2);
        assert_eq!(
            mc_gauss_crossing_times(3.0, 2.0, 0.25, 100.0, &mut t1, &mut t2),
            McStatus::NoCrossing
        );

        let env = make_env();
        let times: Vec<f64> = (0..300).map(|i| i as f64 * 0.02).collect();
        let mut a1 = vec![0.0; times.len()];
        let mut a2 = vec![0.0; times.len()];
        assert_eq!(
            mc_theorem2_appro1(
                env, 3.0, 2.0, 0.25, 0.5, 540e-6,
                times.as_ptr(), a1.as_mut_ptr(), times.len()
            ),
            McStatus::Ok
        );
        assert_eq!(
            mc_theorem2_appro2(
                env, 3.0, 2.0, 0.25, 0.5, 540e-6,
                times.as_ptr(), a2.as_mut_ptr(), times.len()
            ),
            McStatus::Ok
        );
        let p1 = a1.iter().cloned().fold(0.0f64, f64::max);
        let p2 = a2.iter().cloned().fold(0.0f64, f64::max);
        assert!(p1 > 0.0 && (p1 - p2).abs() / p1 < 0.05);
        mc_env_free(env);
    }

    #[test]
    fn header_is_generated() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("include")
            .join("mclink.h");
        let text = std::fs::read_to_string(header).unwrap();
        for symbol in [
            "mc_env_new",
            "mc_env_free",
            "mc_theorem1_product",
            "mc_theorem2_appro2",
            "mc_last_error_message",
            "McStatus",
        ] {
            assert!(text.contains(symbol), "header missing {symbol}");
        }
    }
}
