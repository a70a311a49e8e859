//! End-to-end link composition: transmitter → straight propagation channel
//! → receiver, with a least-squares Gaussian fit bridging the oracle-shaped
//! received pulse to the receiver's analytic (Gaussian-input) model, and an
//! oracle-based receiver cross-check that avoids the Gaussian assumption
//! entirely.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::oracle::{self, Boundary, OracleGrid, Reaction, Species, SpeciesSystem};
use crate::receiver::{self, Method, ReceiverDesign};
use crate::transmitter::{self, TransmitterDesign};
use crate::types::{FlowEnv, GaussPulse, RectPulse, Source, TimeSeries};

/// Least-squares Gaussian fit of a pulse-shaped trace segment.
#[derive(Debug, Clone, Copy)]
pub struct GaussianFit {
    pub pulse: GaussPulse,
    /// Maximum absolute fit residual relative to the fitted peak.
    pub rel_residual: f64,
}

/// Fits `A·exp(−(t−μ)²/(2σ²))` to `(t, c)` by moment initialization and
/// damped Gauss-Newton iteration; returns the equivalent [`GaussPulse`].
pub fn fit_gaussian(t: &[f64], c: &[f64]) -> Result<GaussianFit> {
    if t.len() != c.len() || t.len() < 5 {
        return Err(Error::Domain("gaussian fit needs at least 5 samples".into()));
    }
    let total: f64 = c.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Search("gaussian fit on an all-zero segment".into()));
    }
    // Moment initialization, treating the trace as a density.
    let mean: f64 = t.iter().zip(c).map(|(&ti, &ci)| ti * ci).sum::<f64>() / total;
    let var: f64 = t
        .iter()
        .zip(c)
        .map(|(&ti, &ci)| (ti - mean) * (ti - mean) * ci)
        .sum::<f64>()
        / total;
    let mut a = c.iter().cloned().fold(0.0_f64, f64::max);
    let mut mu = mean;
    let mut sigma = var.max(1e-8).sqrt();

    let sse = |a: f64, mu: f64, sigma: f64| -> f64 {
        t.iter()
            .zip(c)
            .map(|(&ti, &ci)| {
                let m = a * (-(ti - mu) * (ti - mu) / (2.0 * sigma * sigma)).exp();
                (m - ci) * (m - ci)
            })
            .sum()
    };
    let mut best = sse(a, mu, sigma);
    for _ in 0..80 {
        // Normal equations for the 3-parameter Gauss-Newton step.
        let mut jtj = [[0.0_f64; 3]; 3];
        let mut jtr = [0.0_f64; 3];
        for (&ti, &ci) in t.iter().zip(c) {
            let z = (ti - mu) / sigma;
            let e = (-0.5 * z * z).exp();
            let m = a * e;
            let j = [e, m * z / sigma, m * z * z / sigma];
            let r = ci - m;
            for p in 0..3 {
                for q in 0..3 {
                    jtj[p][q] += j[p] * j[q];
                }
                jtr[p] += j[p] * r;
            }
        }
        let step = solve3(&mut jtj, &jtr)
            .ok_or_else(|| Error::Search("gaussian fit normal equations singular".into()))?;
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..8 {
            let (na, nmu, ns) = (a + scale * step[0], mu + scale * step[1], sigma + scale * step[2]);
            if ns > 0.0 && na > 0.0 {
                let s = sse(na, nmu, ns);
                if s < best {
                    a = na;
                    mu = nmu;
                    sigma = ns;
                    best = s;
                    improved = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let max_resid = t
        .iter()
        .zip(c)
        .map(|(&ti, &ci)| {
            (a * (-(ti - mu) * (ti - mu) / (2.0 * sigma * sigma)).exp() - ci).abs()
        })
        .fold(0.0_f64, f64::max);
    let sigma2 = sigma * sigma;
    Ok(GaussianFit {
        pulse: GaussPulse {
            c0: a * (2.0 * std::f64::consts::PI * sigma2).sqrt(),
            mu,
            sigma2,
        },
        rel_residual: max_resid / a,
    })
}

fn solve3(m: &mut [[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut aug = [[0.0_f64; 4]; 3];
    for i in 0..3 {
        aug[i][..3].copy_from_slice(&m[i]);
        aug[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        aug.swap(col, piv);
        if aug[col][col].abs() < 1e-300 {
            return None;
        }
        for row in 0..3 {
            if row != col {
                let f = aug[row][col] / aug[col][col];
                for k in col..4 {
                    aug[row][k] -= f * aug[col][k];
                }
            }
        }
    }
    Some([aug[0][3] / aug[0][0], aug[1][3] / aug[1][1], aug[2][3] / aug[2][2]])
}

/// Per-bit demodulation bookkeeping.
#[derive(Debug, Clone)]
pub struct BitResult {
    pub fit: GaussianFit,
    /// Set when the fit residual exceeds 20% of the fitted peak — the
    /// analytic receiver path is then unreliable (oracle path still runs).
    pub fit_warning: bool,
    /// Plateau present within the expected window.
    pub demodulated: bool,
    /// Output support width (s).
    pub output_width: f64,
}

/// All traces and metrics of one end-to-end run.
#[derive(Debug, Clone)]
pub struct LinkRun {
    /// C_TX at the transmitter (Reaction III) outlet.
    pub tx_out: TimeSeries,
    /// Pulse after the straight propagation channel.
    pub channel_out: TimeSeries,
    /// Analytic receiver output (union over bits).
    pub rx_out: TimeSeries,
    /// Oracle cross-check of the thresholding channel residual.
    pub rx_residual_oracle: TimeSeries,
    /// Oracle-based receiver output.
    pub rx_out_oracle: TimeSeries,
    pub bits: Vec<BitResult>,
}

/// Runs the full link. The transmitter output feeds the propagation channel
/// as boundary data (solved by the PDE oracle with k = 0); each received
/// pulse is least-squares-fitted to a Gaussian for the analytic receiver
/// path, while the raw trace drives the oracle-based receiver cross-check.
pub fn run_link(
    tx: &TransmitterDesign,
    channel_length: f64,
    rxd: &ReceiverDesign,
    env: &FlowEnv,
    bits: &[RectPulse],
) -> Result<LinkRun> {
    tx.validate()?;
    rxd.validate()?;
    if bits.is_empty() {
        // Nothing transmitted: every trace is identically zero.
        let zero = |station: f64| {
            TimeSeries::sample(|_| 0.0, 0.0, 0.1, 11, station, Source::Analytical)
        };
        return Ok(LinkRun {
            tx_out: zero(tx.l_3)?,
            channel_out: zero(channel_length)?,
            rx_out: zero(rxd.l_5)?,
            rx_residual_oracle: zero(rxd.l_4)?,
            rx_out_oracle: zero(rxd.l_5)?,
            bits: vec![],
        });
    }
    let v = env.require_flow()?;
    let tx_out = transmitter::generate_pulse(tx, env, None, bits)?;

    // Straight propagation channel (pure convection-diffusion).
    let channel_out = if channel_length > 0.0 {
        let t_max = tx_out.t().last().copied().unwrap() + channel_length / v + 1.0;
        let grid = OracleGrid::for_transport(env, channel_length, t_max)?;
        let src = tx_out.clone();
        let sys = SpeciesSystem {
            species: vec![Species::new(
                "Y",
                Boundary::Custom(Arc::new(move |t| src.interp(t))),
            )],
            reactions: vec![],
        };
        let sol = oracle::solve(&sys, env, &grid, &[channel_length])?;
        sol.series[0][0].clone()
    } else {
        tx_out.clone()
    };

    // Per-bit windows: split at midpoints between consecutive onsets,
    // shifted by the approximate pulse delay.
    let delay = tx.t_y(env)? + tx.t_c(env)? + channel_length / v + 0.5;
    let t_all = channel_out.t();
    let mut boundaries = vec![t_all[0]];
    for w in bits.windows(2) {
        boundaries.push(0.5 * (w[0].t0 + w[1].t0) + delay);
    }
    boundaries.push(*t_all.last().unwrap());

    let out_grid: Vec<f64> = t_all.to_vec();
    let mut rx_c = vec![0.0_f64; out_grid.len()];
    let mut bit_results = Vec::with_capacity(bits.len());
    let mut any_station = 0.0;
    for b in 0..bits.len() {
        let (lo, hi) = (boundaries[b], boundaries[b + 1]);
        let idx: Vec<usize> = (0..t_all.len())
            .filter(|&i| t_all[i] >= lo && t_all[i] < hi)
            .collect();
        let seg_t: Vec<f64> = idx.iter().map(|&i| t_all[i]).collect();
        let seg_c: Vec<f64> = idx.iter().map(|&i| channel_out.c()[i]).collect();
        let fit = fit_gaussian(&seg_t, &seg_c)?;
        let fit_warning = fit.rel_residual > 0.2;
        let out = receiver::demodulate(rxd, env, &fit.pulse, Method::Appro1, &out_grid)?;
        any_station = out.station();
        let plateau = rxd.plateau();
        let mut demodulated = false;
        for (i, &t) in out_grid.iter().enumerate() {
            if out.c()[i] == plateau {
                rx_c[i] = plateau;
                // Expected window: the output support belongs to this bit's
                // segment, shifted by the receiver travel time.
                let travel = rxd.t_t(env)? + rxd.l_4 / v + rxd.t_5(env)?;
                if t >= lo + travel && t < hi + travel {
                    demodulated = true;
                }
            }
        }
        let output_width = out.support_width(0.0);
        bit_results.push(BitResult {
            fit,
            fit_warning,
            demodulated,
            output_width,
        });
    }
    let rx_out = TimeSeries::new(out_grid, rx_c, any_station, Source::Analytical)?;

    // Oracle-based receiver: thresholding channel solved numerically with
    // the halved raw trace as boundary data, then the catalytic decision.
    let t_t = rxd.t_t(env)?;
    let ch = channel_out.clone();
    let thr_sys = SpeciesSystem {
        species: vec![
            Species::new("Y", Boundary::Custom(Arc::new(move |t| 0.5 * ch.interp(t - t_t)))),
            Species::new("ThL", Boundary::Const(0.5 * rxd.c_thl_vi)).with_init(0.5 * rxd.c_thl_vi),
        ],
        reactions: vec![Reaction {
            reactant_a: 0,
            reactant_b: 1,
            product: None,
            k: rxd.k,
            catalytic: false,
        }],
    };
    let t_max_rx = channel_out.t().last().unwrap() + t_t + rxd.l_4 / v + 0.5;
    let rx_grid = OracleGrid::for_transport(env, rxd.l_4, t_max_rx)?;
    let rx_sol = oracle::solve(&thr_sys, env, &rx_grid, &[rxd.l_4])?;
    let rx_residual_oracle = rx_sol.series[0][0].clone();
    let rx_out_oracle = receiver::reaction5_output(rxd, env, &rx_residual_oracle)?;

    Ok(LinkRun {
        tx_out,
        channel_out,
        rx_out,
        rx_residual_oracle,
        rx_out_oracle,
        bits: bit_results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_fit_recovers_exact_gaussian() {
        let g = GaussPulse::new(3.0, 2.0, 0.25).unwrap();
        let t: Vec<f64> = (0..400).map(|i| i as f64 * 0.01).collect();
        let c: Vec<f64> = t.iter().map(|&ti| g.eval(ti)).collect();
        let fit = fit_gaussian(&t, &c).unwrap();
        assert_relative_eq!(fit.pulse.c0, 3.0, max_relative = 1e-6);
        assert_relative_eq!(fit.pulse.mu, 2.0, max_relative = 1e-6);
        assert_relative_eq!(fit.pulse.sigma2, 0.25, max_relative = 1e-6);
        assert!(fit.rel_residual < 1e-6);
    }

    #[test]
    fn gaussian_fit_rejects_empty_segment() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let c = vec![0.0; 10];
        assert!(fit_gaussian(&t, &c).is_err());
    }
}
