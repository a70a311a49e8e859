//! Closed-form concentration responses for a straight channel under
//! convection, diffusion and (optionally) a fast bimolecular reaction with a
//! continuously supplied co-reactant.
//!
//! The reacting step response is
//!
//! ```text
//! g(x,t) = C0/2 · [ exp((v−α)x/2D)·erfc((x−αt)/2√(Dt))
//!                 + exp((v+α)x/2D)·erfc((x+αt)/2√(Dt)) ],
//! α = sqrt(v² + 4·k·C0·D)
//! ```
//!
//! and the plain convection-diffusion step response `h` is the `k = 0`
//! (`α = v`) form. Rectangular pulses are evaluated with exact window
//! algebra: `f(τ)` for `0 ≤ τ ≤ T_on` and `f(τ) − f(τ−T_on)` afterwards.

use errorfunctions::RealErrorFunctions;

use crate::types::{FlowEnv, ReactionSpec, RectPulse};

/// Overflow-safe `exp(a)·erfc(b)`.
///
/// For `b ≥ 0` the product is evaluated as `erfcx(b)·exp(a − b²)`, which
/// stays finite even when `a` alone would overflow `exp`. For `b < 0` we use
/// `erfc(b) = 2 − erfc(−b)`; all call sites with negative `b` have `a ≤ 0`.
pub fn exp_erfc(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        b.erfcx() * (a - b * b).exp()
    } else {
        2.0 * a.exp() - (-b).erfcx() * (a - b * b).exp()
    }
}

/// Unit-step response `g(x,t)/C0` for decay parameter `alpha`; `alpha = v`
/// gives the pure convection-diffusion response `h/C0`.
fn step_response(x: f64, t: f64, v: f64, d: f64, alpha: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return 1.0;
    }
    let sq = 2.0 * (d * t).sqrt();
    let a1 = (v - alpha) * x / (2.0 * d);
    let b1 = (x - alpha * t) / sq;
    let a2 = (v + alpha) * x / (2.0 * d);
    let b2 = (x + alpha * t) / sq;
    // b2 > 0 always (x, alpha, t > 0), so the second term never hits the
    // subtractive branch; a1 <= 0 keeps the first term safe either way.
    0.5 * (exp_erfc(a1, b1) + exp_erfc(a2, b2))
}

/// Applies the rectangular window algebra to a step response.
fn windowed(rect: &RectPulse, t: f64, mut step: impl FnMut(f64) -> f64) -> f64 {
    let tau = t - rect.t0;
    if tau <= 0.0 {
        0.0
    } else if tau <= rect.t_on {
        step(tau)
    } else {
        step(tau) - step(tau - rect.t_on)
    }
}

/// Effective boundary amplitude: the reaction consumes A and B one-to-one,
/// so the surviving boundary amplitude is `min{C_A0, C_B0}` when `k > 0`.
pub fn effective_c0(rect: &RectPulse, rx: &ReactionSpec) -> f64 {
    if rx.k > 0.0 {
        rect.c0.min(rx.c_b0)
    } else {
        rect.c0
    }
}

fn alpha(env: &FlowEnv, c0: f64, k: f64) -> f64 {
    (env.v_eff * env.v_eff + 4.0 * k * c0 * env.d_eff).sqrt()
}

/// Reactant concentration `C_A(x,t)` for a rectangular inlet pulse feeding a
/// channel with reaction `A + B → AB`.
pub fn theorem1_reactant(x: f64, t: f64, env: &FlowEnv, rect: &RectPulse, rx: &ReactionSpec) -> f64 {
    let c0 = effective_c0(rect, rx);
    if c0 == 0.0 {
        return 0.0;
    }
    let a = alpha(env, c0, rx.k);
    c0 * windowed(rect, t, |tau| step_response(x, tau, env.v_eff, env.d_eff, a))
}

/// Product concentration `C_AB(x,t)`: the windowed difference between the
/// non-reacting and reacting step responses of the summed species.
pub fn theorem1_product(x: f64, t: f64, env: &FlowEnv, rect: &RectPulse, rx: &ReactionSpec) -> f64 {
    let c0 = effective_c0(rect, rx);
    if c0 == 0.0 || rx.k == 0.0 {
        return 0.0;
    }
    let a = alpha(env, c0, rx.k);
    let v = env.v_eff;
    let d = env.d_eff;
    c0 * windowed(rect, t, |tau| {
        step_response(x, tau, v, d, v) - step_response(x, tau, v, d, a)
    })
}

/// Pure convection-diffusion response to a rectangular inlet pulse.
pub fn convdiff_rect(x: f64, t: f64, env: &FlowEnv, rect: &RectPulse) -> f64 {
    if rect.c0 == 0.0 {
        return 0.0;
    }
    let v = env.v_eff;
    rect.c0 * windowed(rect, t, |tau| step_response(x, tau, v, env.d_eff, v))
}
