//! Basic channel fluidics: Reynolds number, Poiseuille profile and the
//! Taylor-Aris effective diffusivity used for the 1D reduction.

use crate::error::{Error, Result};
use crate::types::{ChannelGeometry, FlowEnv};

/// Reynolds number `ρ·v·D_H/μ`.
pub fn reynolds_number(rho: f64, v_eff: f64, d_h: f64, mu: f64) -> Result<f64> {
    if !(rho > 0.0 && v_eff > 0.0 && d_h > 0.0 && mu > 0.0) {
        return Err(Error::Domain(format!(
            "reynolds_number requires positive inputs, got rho={rho}, v_eff={v_eff}, D_H={d_h}, mu={mu}"
        )));
    }
    Ok(rho * v_eff * d_h / mu)
}

/// Local velocity of the parabolic (Poiseuille) profile at radial
/// coordinate `r` in a channel of effective radius `R`:
/// `v(r) = 2·v_eff·(1 − r²/R²)`.
pub fn poiseuille_velocity(r: f64, big_r: f64, v_eff: f64) -> Result<f64> {
    if !(big_r > 0.0) {
        return Err(Error::Domain(format!("R must be positive, got {big_r}")));
    }
    if !(0.0..=big_r).contains(&r) {
        return Err(Error::Domain(format!(
            "radial coordinate r={r} outside [0, {big_r}]"
        )));
    }
    Ok(2.0 * v_eff * (1.0 - r * r / (big_r * big_r)))
}

/// Taylor-Aris effective axial diffusivity for a rectangular cross-section:
///
/// `D_eff = D·(1 + 8.5·v²·h²·w² / (210·D²·(h² + 2.4·h·w + w²)))`
///
/// The leading `D` factor keeps the expression dimensionally consistent.
/// Callers may instead supply a measured `D_eff` directly via
/// [`FlowEnv::new`].
pub fn taylor_aris_deff(env: &FlowEnv, geom: &ChannelGeometry) -> f64 {
    let (h, w) = (geom.height, geom.width);
    let v = env.v_eff;
    let denom = 210.0 * env.d * env.d * (h * h + 2.4 * h * w + w * w);
    env.d * (1.0 + 8.5 * v * v * h * h * w * w / denom)
}

/// Convenience constructor: environment with `d_eff` filled in from the
/// Taylor-Aris formula.
pub fn env_with_taylor_aris(v_eff: f64, d: f64, geom: &ChannelGeometry) -> Result<FlowEnv> {
    let mut env = FlowEnv::new(v_eff, d, d)?;
    env.d_eff = taylor_aris_deff(&env, geom);
    env.validate()?;
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reynolds_matches_direct_arithmetic() {
        // h = 10 um, w = 20 um channel.
        let geom = ChannelGeometry::new(540e-6, 20e-6, 10e-6).unwrap();
        let d_h = geom.hydraulic_diameter();
        assert_relative_eq!(d_h, 13.333333333333334e-6, max_relative = 1e-12);
        let re = reynolds_number(1000.0, 0.002, d_h, 1e-3).unwrap();
        assert_relative_eq!(re, 0.02666666666666667, max_relative = 1e-12);
        assert!(re < 1.0, "flow must be laminar");
    }

    #[test]
    fn reynolds_identity_and_linearity() {
        assert_eq!(reynolds_number(1.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
        let re1 = reynolds_number(1000.0, 0.002, 13.33e-6, 1e-3).unwrap();
        let re2 = reynolds_number(1000.0, 0.004, 13.33e-6, 1e-3).unwrap();
        assert_relative_eq!(re2, 2.0 * re1, max_relative = 1e-12);
    }

    #[test]
    fn reynolds_rejects_non_positive() {
        assert!(reynolds_number(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(reynolds_number(1.0, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn poiseuille_centerline_wall_and_mean() {
        assert_eq!(poiseuille_velocity(0.0, 1e-5, 0.002).unwrap(), 0.004);
        assert_eq!(poiseuille_velocity(1e-5, 1e-5, 0.002).unwrap(), 0.0);
        // v(R/sqrt(2)) = v_eff.
        let r = 1e-5 / 2.0_f64.sqrt();
        assert_relative_eq!(
            poiseuille_velocity(r, 1e-5, 0.002).unwrap(),
            0.002,
            max_relative = 1e-12
        );
    }

    #[test]
    fn poiseuille_rejects_bad_radius() {
        assert!(poiseuille_velocity(2.0, 1.0, 1.0).is_err());
        assert!(poiseuille_velocity(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn taylor_aris_no_flow_is_molecular() {
        let env = FlowEnv::new(0.0, 1e-9, 1e-9).unwrap();
        let geom = ChannelGeometry::new(1e-3, 20e-6, 10e-6).unwrap();
        assert_eq!(taylor_aris_deff(&env, &geom), 1e-9);
    }

    #[test]
    fn taylor_aris_vanishing_channel() {
        let env = FlowEnv::new(0.002, 1e-9, 1e-9).unwrap();
        let geom = ChannelGeometry::new(1e-3, 20e-6, 1e-12).unwrap();
        assert_relative_eq!(taylor_aris_deff(&env, &geom), 1e-9, max_relative = 1e-6);
    }

    #[test]
    fn taylor_aris_direct_arithmetic_cross_check() {
        let env = FlowEnv::new(0.002, 1e-9, 1e-9).unwrap();
        let geom = ChannelGeometry::new(540e-6, 20e-6, 10e-6).unwrap();
        let got = taylor_aris_deff(&env, &geom);
        // Independent re-evaluation of the formula.
        let (h, w, v, d) = (10e-6_f64, 20e-6_f64, 0.002_f64, 1e-9_f64);
        let expected =
            d * (1.0 + 8.5 * v * v * h * h * w * w / (210.0 * d * d * (h * h + 2.4 * h * w + w * w)));
        assert_relative_eq!(got, expected, max_relative = 1e-14);
        assert!(got > d);
    }
}
