use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flow/transport environment of a microfluidic link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowEnv {
    /// Mean flow velocity (m/s).
    pub v_eff: f64,
    /// Molecular diffusivity (m²/s).
    pub d: f64,
    /// Effective (Taylor-Aris) axial diffusivity (m²/s).
    pub d_eff: f64,
    /// Fluid density (kg/m³), when known.
    pub rho: Option<f64>,
    /// Dynamic viscosity (Pa·s), when known.
    pub mu: Option<f64>,
}

impl FlowEnv {
    /// Builds an environment with an explicitly supplied effective
    /// diffusivity.
    ///
    /// `v_eff` may be zero (quiescent fluid, pure diffusion); transport
    /// operations that divide by the velocity check for positivity
    /// themselves.
    pub fn new(v_eff: f64, d: f64, d_eff: f64) -> Result<Self> {
        let env = FlowEnv {
            v_eff,
            d,
            d_eff,
            rho: None,
            mu: None,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn with_fluid(mut self, rho: f64, mu: f64) -> Result<Self> {
        self.rho = Some(rho);
        self.mu = Some(mu);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_eff >= 0.0) || !self.v_eff.is_finite() {
            return Err(Error::Domain(format!(
                "v_eff must be finite and non-negative, got {}",
                self.v_eff
            )));
        }
        if !(self.d > 0.0) {
            return Err(Error::Domain(format!("D must be positive, got {}", self.d)));
        }
        if !(self.d_eff >= self.d) {
            return Err(Error::Domain(format!(
                "D_eff ({}) must be at least D ({})",
                self.d_eff, self.d
            )));
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0) {
                return Err(Error::Domain(format!("rho must be positive, got {rho}")));
            }
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0) {
                return Err(Error::Domain(format!("mu must be positive, got {mu}")));
            }
        }
        Ok(())
    }

    /// Velocity, or a domain error for operations that require flow.
    pub fn require_flow(&self) -> Result<f64> {
        if self.v_eff > 0.0 {
            Ok(self.v_eff)
        } else {
            Err(Error::Domain(
                "operation requires a positive mean velocity".into(),
            ))
        }
    }
}

/// One straight channel segment with rectangular cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGeometry {
    /// Axial length (m).
    pub length: f64,
    /// Cross-section width (m).
    pub width: f64,
    /// Cross-section height (m).
    pub height: f64,
}

impl ChannelGeometry {
    pub fn new(length: f64, width: f64, height: f64) -> Result<Self> {
        if !(length > 0.0 && width > 0.0 && height > 0.0) {
            return Err(Error::Domain(format!(
                "channel dimensions must be positive, got L={length}, w={width}, h={height}"
            )));
        }
        Ok(ChannelGeometry {
            length,
            width,
            height,
        })
    }

    /// Hydraulic diameter 2hw/(h+w) of the rectangular cross-section.
    pub fn hydraulic_diameter(&self) -> f64 {
        2.0 * self.height * self.width / (self.height + self.width)
    }
}

/// Rectangular inlet pulse: amplitude `c0` on `[t0, t0 + t_on]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectPulse {
    /// Amplitude (mol/m³).
    pub c0: f64,
    /// Duration (s).
    pub t_on: f64,
    /// Onset time (s).
    pub t0: f64,
}

impl RectPulse {
    pub fn new(c0: f64, t_on: f64, t0: f64) -> Result<Self> {
        if !(c0 >= 0.0) {
            return Err(Error::Domain(format!("C0 must be non-negative, got {c0}")));
        }
        if !(t_on > 0.0) {
            return Err(Error::Domain(format!("T_on must be positive, got {t_on}")));
        }
        if !(t0 >= 0.0) {
            return Err(Error::Domain(format!("t0 must be non-negative, got {t0}")));
        }
        Ok(RectPulse { c0, t_on, t0 })
    }

    /// Boundary value at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        if t > self.t0 && t <= self.t0 + self.t_on {
            self.c0
        } else {
            0.0
        }
    }

    /// Same pulse with the onset delayed by `dt`.
    pub fn delayed(&self, dt: f64) -> RectPulse {
        RectPulse {
            t0: self.t0 + dt,
            ..*self
        }
    }
}

/// Gaussian inlet pulse `c0 / sqrt(2π σ²) · exp(−(t−μ)²/(2σ²))`.
///
/// `c0` is the numerator scale (mol·s/m³); the time-domain peak is
/// `c0 / sqrt(2π σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussPulse {
    /// Amplitude scale (mol·s/m³).
    pub c0: f64,
    /// Mean time (s).
    pub mu: f64,
    /// Variance (s²).
    pub sigma2: f64,
}

impl GaussPulse {
    pub fn new(c0: f64, mu: f64, sigma2: f64) -> Result<Self> {
        if !(c0 > 0.0) {
            return Err(Error::Domain(format!("C0 must be positive, got {c0}")));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::Domain(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        Ok(GaussPulse { c0, mu, sigma2 })
    }

    /// Boundary concentration at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let z = t - self.mu;
        self.c0 / (2.0 * std::f64::consts::PI * self.sigma2).sqrt()
            * (-z * z / (2.0 * self.sigma2)).exp()
    }

    /// Time-domain peak concentration `c0 / sqrt(2π σ²)`.
    pub fn peak(&self) -> f64 {
        self.c0 / (2.0 * std::f64::consts::PI * self.sigma2).sqrt()
    }
}

/// Bimolecular reaction parameters shared by a channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionSpec {
    /// Rate constant (m³/(mol·s)); `k = 0` requests pure
    /// convection-diffusion behaviour.
    pub k: f64,
    /// Co-reactant supply concentration (mol/m³).
    pub c_b0: f64,
}

impl ReactionSpec {
    pub fn new(k: f64, c_b0: f64) -> Result<Self> {
        if !(k >= 0.0) {
            return Err(Error::Domain(format!("k must be non-negative, got {k}")));
        }
        if !(c_b0 >= 0.0) {
            return Err(Error::Domain(format!(
                "C_B0 must be non-negative, got {c_b0}"
            )));
        }
        Ok(ReactionSpec { k, c_b0 })
    }
}

/// Provenance of a concentration trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Analytical,
    Oracle,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Analytical => "analytical",
            Source::Oracle => "oracle",
        }
    }
}

/// Tiny negative overshoot permitted from oracle discretization before the
/// trace is considered invalid; such values are clamped on export.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Uniformly sampled concentration-vs-time trace at a fixed spatial station.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t: Vec<f64>,
    c: Vec<f64>,
    station: f64,
    source: Source,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, c: Vec<f64>, station: f64, source: Source) -> Result<Self> {
        if t.len() != c.len() || t.len() < 2 {
            return Err(Error::Domain(format!(
                "time series needs matching t/c of length >= 2, got {} and {}",
                t.len(),
                c.len()
            )));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(
                "time series sample times must be strictly increasing".into(),
            ));
        }
        let scale = c.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        if c.iter().any(|&v| !v.is_finite()) {
            return Err(Error::Domain("time series contains non-finite values".into()));
        }
        if source == Source::Analytical && c.iter().any(|&v| v < -1e-12 * scale) {
            return Err(Error::Domain(
                "analytical time series must be non-negative".into(),
            ));
        }
        if source == Source::Oracle && c.iter().any(|&v| v < -NEGATIVE_TOLERANCE * scale) {
            return Err(Error::Stability(
                "oracle time series has negative overshoot beyond tolerance".into(),
            ));
        }
        Ok(TimeSeries {
            t,
            c,
            station,
            source,
        })
    }

    /// Samples a function on a uniform grid `t0, t0+dt, ..` with `n` points.
    pub fn sample(
        mut f: impl FnMut(f64) -> f64,
        t0: f64,
        dt: f64,
        n: usize,
        station: f64,
        source: Source,
    ) -> Result<Self> {
        let t: Vec<f64> = (0..n).map(|i| t0 + i as f64 * dt).collect();
        let c: Vec<f64> = t.iter().map(|&ti| f(ti)).collect();
        TimeSeries::new(t, c, station, source)
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn station(&self) -> f64 {
        self.station
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Maximum concentration and its sample time.
    pub fn peak(&self) -> (f64, f64) {
        let mut idx = 0;
        for (i, &v) in self.c.iter().enumerate() {
            if v > self.c[idx] {
                idx = i;
            }
        }
        (self.c[idx], self.t[idx])
    }

    /// Linear interpolation; 0 outside the sampled range.
    pub fn interp(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t < self.t[0] || t > self.t[n - 1] {
            return 0.0;
        }
        let idx = match self
            .t
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => return self.c[i],
            Err(i) => i,
        };
        let (t0, t1) = (self.t[idx - 1], self.t[idx]);
        let (c0, c1) = (self.c[idx - 1], self.c[idx]);
        c0 + (c1 - c0) * (t - t0) / (t1 - t0)
    }

    /// Copy with negatives clamped to zero (export form).
    pub fn clamped(&self) -> TimeSeries {
        let mut out = self.clone();
        for v in &mut out.c {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        out
    }

    /// Duration of the support where the trace exceeds `threshold`,
    /// measured as (number of exceeding samples) × (sample spacing).
    pub fn support_width(&self, threshold: f64) -> f64 {
        if self.t.len() < 2 {
            return 0.0;
        }
        let dt = self.t[1] - self.t[0];
        dt * self.c.iter().filter(|&&v| v > threshold).count() as f64
    }
}
