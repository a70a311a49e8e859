//! Receiver composition: a T junction dilutes the received Gaussian-like
//! pulse with the threshold supply, the thresholding channel (Reaction IV)
//! subtracts the concentration floor, and the catalytic amplifying channel
//! (Reaction V) converts any surviving residual into a rectangular output
//! whose plateau is set by the amplifier supply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::threshold::{theorem2_appro1, theorem2_appro2, QuadratureConfig};
use crate::types::{FlowEnv, GaussPulse, Source, TimeSeries};

/// Which Theorem-2 approximation evaluates the thresholding channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Appro1,
    Appro2,
}

/// Full geometric and chemical parameterization of the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverDesign {
    /// T-junction branch length (m).
    pub l_t: f64,
    /// Conjunction length (m).
    pub l_c: f64,
    /// Thresholding (Reaction IV) channel length (m).
    pub l_4: f64,
    /// Amplifying (Reaction V) channel length (m).
    pub l_5: f64,
    /// Threshold supply concentration (mol/m³).
    pub c_thl_vi: f64,
    /// Amplifier supply concentration (mol/m³).
    pub c_amp_vii: f64,
    /// Shared rate constant (m³/(mol·s)).
    pub k: f64,
    /// Residual-presence threshold for the output decision (mol/m³).
    pub presence_tau: f64,
    /// Output dilution divisor at the amplifier junction: the standalone
    /// receiver plateau is `C_Amp/3`; the end-to-end link dilutes the supply
    /// to one quarter instead.
    pub output_divisor: f64,
}

impl ReceiverDesign {
    pub fn validate(&self) -> Result<()> {
        if [self.l_t, self.l_c, self.l_4, self.l_5].iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("receiver lengths must be positive".into()));
        }
        if !(self.c_thl_vi >= 0.0 && self.c_amp_vii >= 0.0) {
            return Err(Error::Domain("supply concentrations must be non-negative".into()));
        }
        if !(self.presence_tau > 0.0) {
            return Err(Error::Domain("presence_tau must be positive".into()));
        }
        if !(self.output_divisor > 0.0) {
            return Err(Error::Domain("output_divisor must be positive".into()));
        }
        Ok(())
    }

    /// T-junction delay `(L_T + L_C) / v_eff`.
    pub fn t_t(&self, env: &FlowEnv) -> Result<f64> {
        Ok((self.l_t + self.l_c) / env.require_flow()?)
    }

    /// Amplifier-channel delay `(L_C + L_5) / v_eff`.
    pub fn t_5(&self, env: &FlowEnv) -> Result<f64> {
        Ok((self.l_c + self.l_5) / env.require_flow()?)
    }

    /// Output plateau `C_Amp / output_divisor`.
    pub fn plateau(&self) -> f64 {
        self.c_amp_vii / self.output_divisor
    }
}

/// T junction I: the received pulse is halved and delayed by `t_T`; the
/// threshold supply is likewise halved.
pub fn t_junction_outlet(
    design: &ReceiverDesign,
    env: &FlowEnv,
    pulse: &GaussPulse,
) -> Result<(GaussPulse, f64)> {
    design.validate()?;
    let t_t = design.t_t(env)?;
    let diluted = GaussPulse {
        c0: 0.5 * pulse.c0,
        mu: pulse.mu + t_t,
        sigma2: pulse.sigma2,
    };
    Ok((diluted, 0.5 * design.c_thl_vi))
}

/// Residual species-Y trace at the thresholding-channel outlet
/// (`L_T + L_C + L_4`): `½·appro(L_4, t − t_T)` with the full supply pair;
/// halving both streams commutes with the threshold subtraction.
///
/// A threshold above the pulse peak yields an identically zero residual.
pub fn reaction4_outlet(
    design: &ReceiverDesign,
    env: &FlowEnv,
    pulse: &GaussPulse,
    method: Method,
    t_grid: &[f64],
) -> Result<TimeSeries> {
    design.validate()?;
    let t_t = design.t_t(env)?;
    let station = design.l_t + design.l_c + design.l_4;
    match method {
        Method::Appro1 => {
            let t: Vec<f64> = t_grid.to_vec();
            let c: Vec<f64> = t
                .iter()
                .map(|&ti| {
                    0.5 * theorem2_appro1(design.l_4, ti - t_t, env, pulse, design.c_thl_vi)
                })
                .collect();
            TimeSeries::new(t, c, station, Source::Analytical)
        }
        Method::Appro2 => {
            let shifted: Vec<f64> = t_grid.iter().map(|&ti| ti - t_t).collect();
            let res = theorem2_appro2(
                design.l_4,
                &shifted,
                env,
                pulse,
                design.c_thl_vi,
                &QuadratureConfig::default(),
            )?;
            let c: Vec<f64> = res.series.c().iter().map(|&v| 0.5 * v).collect();
            TimeSeries::new(t_grid.to_vec(), c, station, Source::Analytical)
        }
    }
}

/// Amplifying channel: wherever the time-shifted residual exceeds
/// `presence_tau`, the catalytic reaction converts the (diluted) amplifier
/// supply into output; elsewhere the output is zero. The result is exactly
/// two-valued.
pub fn reaction5_output(design: &ReceiverDesign, env: &FlowEnv, residual: &TimeSeries) -> Result<TimeSeries> {
    design.validate()?;
    let t_5 = design.t_5(env)?;
    let plateau = design.plateau();
    let t: Vec<f64> = residual.t().iter().map(|&ti| ti + t_5).collect();
    let c: Vec<f64> = residual
        .c()
        .iter()
        .map(|&v| if v > design.presence_tau { plateau } else { 0.0 })
        .collect();
    TimeSeries::new(
        t,
        c,
        residual.station() + design.l_5,
        Source::Analytical,
    )
}

/// Full demodulation pipeline:
/// `t_junction_outlet ∘ reaction4_outlet ∘ reaction5_output`.
pub fn demodulate(
    design: &ReceiverDesign,
    env: &FlowEnv,
    pulse: &GaussPulse,
    method: Method,
    t_grid: &[f64],
) -> Result<TimeSeries> {
    let residual = reaction4_outlet(design, env, pulse, method, t_grid)?;
    reaction5_output(design, env, &residual)
}

/// Table-style reference receiver: `L_T = 80 μm`, `L_C = 20 μm`,
/// `L_4 = 520 μm`, `L_5 = 470 μm`.
pub fn reference_receiver() -> ReceiverDesign {
    ReceiverDesign {
        l_t: 80e-6,
        l_c: 20e-6,
        l_4: 520e-6,
        l_5: 470e-6,
        c_thl_vi: 0.5,
        c_amp_vii: 9.0,
        k: 400.0,
        presence_tau: 1e-3,
        output_divisor: 3.0,
    }
}
