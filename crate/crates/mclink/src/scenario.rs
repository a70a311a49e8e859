//! Scenario ingestion, execution and deterministic trace export.
//!
//! Scenarios are human-editable TOML documents with explicit units in every
//! field name. Each run produces one CSV per trace (schema-versioned) and a
//! structured-text summary with stable key ordering, so identical scenario
//! files reproduce byte-identical exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::link::{self};
use crate::oracle::{self, Boundary, OracleGrid, Reaction, Species, SpeciesSystem};
use crate::receiver::{self, Method, ReceiverDesign};
use crate::threshold::{self, QuadratureConfig};
use crate::transmitter::{self, OptimizerTolerances, SerpentineSpec, TransmitterDesign};
use crate::transport;
use crate::types::{FlowEnv, GaussPulse, ReactionSpec, RectPulse, Source, TimeSeries};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CSV_SCHEMA_LINE: &str = "# mclink-csv schema-version 1";
pub const SUMMARY_SCHEMA_LINE: &str = "# mclink-summary schema-version 1";
/// Environment variable overriding the default output directory.
pub const OUT_DIR_ENV: &str = "MCLINK_OUT_DIR";

const UM: f64 = 1e-6;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub env: EnvSpec,
    pub experiment: ExperimentSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    pub v_eff_m_per_s: f64,
    pub d_m2_per_s: f64,
    /// When absent, computed from `geometry` via Taylor-Aris.
    pub d_eff_m2_per_s: Option<f64>,
    pub geometry: Option<GeometrySpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub length_um: f64,
    pub width_um: f64,
    pub height_um: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// Rectangular pulse into a reacting channel; analytic reactant/product
    /// traces at each station, optionally paired with the oracle.
    ChannelRect {
        c_a0_mol_per_m3: f64,
        c_b0_mol_per_m3: f64,
        k_m3_per_mol_s: f64,
        t_on_s: f64,
        lengths_um: Vec<f64>,
        t_max_s: f64,
        sample_dt_s: f64,
        #[serde(default)]
        with_oracle: bool,
    },
    /// Gaussian pulse against a threshold supply; both approximation
    /// methods, optionally paired with the oracle.
    ChannelGauss {
        c_a0_mol_s_per_m3: f64,
        mu_s: f64,
        sigma2_s2: f64,
        c_b0_mol_per_m3: Vec<f64>,
        k_m3_per_mol_s: f64,
        length_um: f64,
        t_max_s: f64,
        sample_dt_s: f64,
        #[serde(default)]
        with_oracle: bool,
    },
    /// Transmitter composition, optional length optimization rows, time-gap
    /// constraint and oracle-generated pulses per bit stream.
    Transmitter {
        design: TxDesignSpec,
        #[serde(default)]
        tolerances: TolerancesSpec,
        #[serde(default)]
        optimize: Vec<OptimizeRowSpec>,
        #[serde(default)]
        report_time_gap: bool,
        #[serde(default)]
        bit_streams: Vec<Vec<BitSpec>>,
    },
    /// Standalone receiver demodulating a Gaussian pulse.
    Receiver {
        design: RxDesignSpec,
        pulse: GaussSpec,
        method: Method,
        t_max_s: f64,
        sample_dt_s: f64,
        #[serde(default)]
        with_oracle: bool,
    },
    /// Full transmitter → channel → receiver link.
    Link {
        tx: TxDesignSpec,
        channel_length_um: f64,
        rx: RxDesignSpec,
        bits: Vec<BitSpec>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxDesignSpec {
    pub l_y_um: f64,
    pub l_1_um: f64,
    pub l_3_um: f64,
    pub l_c_um: f64,
    pub c_sy0_i_mol_per_m3: f64,
    pub c_x0_ii_mol_per_m3: f64,
    pub c_x0_iii_mol_per_m3: f64,
    pub c_sp0_iv_mol_per_m3: f64,
    pub k_m3_per_mol_s: f64,
    pub t_on_s: f64,
    pub c_in_mol_per_m3: f64,
    pub serpentine: SerpentineSpecUm,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SerpentineSpecUm {
    pub l21_um: f64,
    pub l22_um: f64,
    pub l23_um: f64,
    pub ls_um: f64,
    pub hs_um: f64,
    pub delay_lines: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxDesignSpec {
    pub l_t_um: f64,
    pub l_c_um: f64,
    pub l_4_um: f64,
    pub l_5_um: f64,
    pub thl_mol_per_m3: f64,
    pub amp_mol_per_m3: f64,
    pub k_m3_per_mol_s: f64,
    #[serde(default = "default_presence_tau")]
    pub presence_tau_mol_per_m3: f64,
    #[serde(default = "default_output_divisor")]
    pub output_divisor: f64,
}

fn default_presence_tau() -> f64 {
    1e-3
}

fn default_output_divisor() -> f64 {
    3.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesSpec {
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_zeta() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.13
}
fn default_epsilon() -> f64 {
    1e-3
}
fn default_tau() -> f64 {
    1e-3
}

impl Default for TolerancesSpec {
    fn default() -> Self {
        TolerancesSpec {
            zeta: default_zeta(),
            delta: default_delta(),
            epsilon: default_epsilon(),
            tau: default_tau(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeRowSpec {
    pub zeta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitSpec {
    pub onset_s: f64,
    pub t_on_s: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussSpec {
    pub c0_mol_s_per_m3: f64,
    pub mu_s: f64,
    pub sigma2_s2: f64,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let sc: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if sc.schema_version != 1 {
            return Err(Error::Parse(format!(
                "unsupported schema_version {} (expected 1)",
                sc.schema_version
            )));
        }
        sc.resolve()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        let sc = Self::parse(&text)?;
        Ok((sc, text))
    }

    /// Builds and validates every domain object without running anything.
    pub fn resolve(&self) -> Result<Resolved> {
        let d_eff = match (self.env.d_eff_m2_per_s, &self.env.geometry) {
            (Some(d_eff), _) => d_eff,
            (None, Some(g)) => {
                let geom = crate::types::ChannelGeometry::new(
                    g.length_um * UM,
                    g.width_um * UM,
                    g.height_um * UM,
                )?;
                let base = FlowEnv::new(self.env.v_eff_m_per_s, self.env.d_m2_per_s, self.env.d_m2_per_s)?;
                crate::fluidics::taylor_aris_deff(&base, &geom)
            }
            (None, None) => {
                return Err(Error::Config(
                    "env needs either d_eff_m2_per_s or a geometry block".into(),
                ))
            }
        };
        let env = FlowEnv::new(self.env.v_eff_m_per_s, self.env.d_m2_per_s, d_eff)?;
        let experiment = match &self.experiment {
            ExperimentSpec::ChannelRect {
                c_a0_mol_per_m3,
                c_b0_mol_per_m3,
                k_m3_per_mol_s,
                t_on_s,
                lengths_um,
                t_max_s,
                sample_dt_s,
                with_oracle,
            } => {
                if lengths_um.is_empty() {
                    return Err(Error::Config("lengths_um must not be empty".into()));
                }
                if !(*t_max_s > 0.0 && *sample_dt_s > 0.0) {
                    return Err(Error::Config("t_max_s and sample_dt_s must be positive".into()));
                }
                ResolvedExperiment::ChannelRect {
                    rect: RectPulse::new(*c_a0_mol_per_m3, *t_on_s, 0.0)?,
                    rx: ReactionSpec::new(*k_m3_per_mol_s, *c_b0_mol_per_m3)?,
                    lengths: lengths_um.iter().map(|l| l * UM).collect(),
                    t_max: *t_max_s,
                    sample_dt: *sample_dt_s,
                    with_oracle: *with_oracle,
                }
            }
            ExperimentSpec::ChannelGauss {
                c_a0_mol_s_per_m3,
                mu_s,
                sigma2_s2,
                c_b0_mol_per_m3,
                k_m3_per_mol_s,
                length_um,
                t_max_s,
                sample_dt_s,
                with_oracle,
            } => {
                if c_b0_mol_per_m3.is_empty() {
                    return Err(Error::Config("c_b0_mol_per_m3 must not be empty".into()));
                }
                ResolvedExperiment::ChannelGauss {
                    pulse: GaussPulse::new(*c_a0_mol_s_per_m3, *mu_s, *sigma2_s2)?,
                    c_b0_list: c_b0_mol_per_m3.clone(),
                    k: *k_m3_per_mol_s,
                    length: length_um * UM,
                    t_max: *t_max_s,
                    sample_dt: *sample_dt_s,
                    with_oracle: *with_oracle,
                }
            }
            ExperimentSpec::Transmitter {
                design,
                tolerances,
                optimize,
                report_time_gap,
                bit_streams,
            } => {
                let d = design.build()?;
                d.validate()?;
                let tol = tolerances.build()?;
                for bits in bit_streams {
                    if bits.windows(2).any(|w| w[1].onset_s <= w[0].onset_s) {
                        return Err(Error::Config("bit onsets must be strictly increasing".into()));
                    }
                }
                ResolvedExperiment::Transmitter {
                    design: d,
                    tol,
                    optimize: optimize
                        .iter()
                        .map(|r| OptimizerTolerances {
                            zeta: r.zeta,
                            epsilon: r.epsilon,
                            ..tol
                        })
                        .collect(),
                    report_time_gap: *report_time_gap,
                    bit_streams: bit_streams
                        .iter()
                        .map(|bits| bits.iter().map(|b| b.build()).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()?,
                }
            }
            ExperimentSpec::Receiver {
                design,
                pulse,
                method,
                t_max_s,
                sample_dt_s,
                with_oracle,
            } => {
                let d = design.build()?;
                d.validate()?;
                ResolvedExperiment::Receiver {
                    design: d,
                    pulse: GaussPulse::new(pulse.c0_mol_s_per_m3, pulse.mu_s, pulse.sigma2_s2)?,
                    method: *method,
                    t_max: *t_max_s,
                    sample_dt: *sample_dt_s,
                    with_oracle: *with_oracle,
                }
            }
            ExperimentSpec::Link {
                tx,
                channel_length_um,
                rx,
                bits,
            } => {
                let txd = tx.build()?;
                txd.validate()?;
                let rxd = rx.build()?;
                rxd.validate()?;
                if bits.windows(2).any(|w| w[1].onset_s <= w[0].onset_s) {
                    return Err(Error::Config("bit onsets must be strictly increasing".into()));
                }
                ResolvedExperiment::Link {
                    tx: txd,
                    channel_length: channel_length_um * UM,
                    rx: rxd,
                    bits: bits.iter().map(|b| b.build()).collect::<Result<Vec<_>>>()?,
                }
            }
        };
        Ok(Resolved { env, experiment })
    }
}

impl TxDesignSpec {
    pub fn build(&self) -> Result<TransmitterDesign> {
        Ok(TransmitterDesign {
            l_y: self.l_y_um * UM,
            l_1: self.l_1_um * UM,
            l_3: self.l_3_um * UM,
            l_c: self.l_c_um * UM,
            serpentine: SerpentineSpec {
                l21: self.serpentine.l21_um * UM,
                l22: self.serpentine.l22_um * UM,
                l23: self.serpentine.l23_um * UM,
                ls: self.serpentine.ls_um * UM,
                hs: self.serpentine.hs_um * UM,
                delay_lines: self.serpentine.delay_lines,
            },
            c_sy0_i: self.c_sy0_i_mol_per_m3,
            c_x0_ii: self.c_x0_ii_mol_per_m3,
            c_x0_iii: self.c_x0_iii_mol_per_m3,
            c_sp0_iv: self.c_sp0_iv_mol_per_m3,
            k: self.k_m3_per_mol_s,
            input: RectPulse::new(self.c_in_mol_per_m3, self.t_on_s, 0.0)?,
        })
    }
}

impl RxDesignSpec {
    pub fn build(&self) -> Result<ReceiverDesign> {
        Ok(ReceiverDesign {
            l_t: self.l_t_um * UM,
            l_c: self.l_c_um * UM,
            l_4: self.l_4_um * UM,
            l_5: self.l_5_um * UM,
            c_thl_vi: self.thl_mol_per_m3,
            c_amp_vii: self.amp_mol_per_m3,
            k: self.k_m3_per_mol_s,
            presence_tau: self.presence_tau_mol_per_m3,
            output_divisor: self.output_divisor,
        })
    }
}

impl TolerancesSpec {
    pub fn build(&self) -> Result<OptimizerTolerances> {
        let tol = OptimizerTolerances {
            zeta: self.zeta,
            delta: self.delta,
            epsilon: self.epsilon,
            tau: self.tau,
        };
        tol.validate()?;
        Ok(tol)
    }
}

impl BitSpec {
    pub fn build(&self) -> Result<RectPulse> {
        RectPulse::new(1.0, self.t_on_s, self.onset_s)
    }
}

/// Fully validated scenario contents.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub env: FlowEnv,
    pub experiment: ResolvedExperiment,
}

#[derive(Debug, Clone)]
pub enum ResolvedExperiment {
    ChannelRect {
        rect: RectPulse,
        rx: ReactionSpec,
        lengths: Vec<f64>,
        t_max: f64,
        sample_dt: f64,
        with_oracle: bool,
    },
    ChannelGauss {
        pulse: GaussPulse,
        c_b0_list: Vec<f64>,
        k: f64,
        length: f64,
        t_max: f64,
        sample_dt: f64,
        with_oracle: bool,
    },
    Transmitter {
        design: TransmitterDesign,
        tol: OptimizerTolerances,
        optimize: Vec<OptimizerTolerances>,
        report_time_gap: bool,
        bit_streams: Vec<Vec<RectPulse>>,
    },
    Receiver {
        design: ReceiverDesign,
        pulse: GaussPulse,
        method: Method,
        t_max: f64,
        sample_dt: f64,
        with_oracle: bool,
    },
    Link {
        tx: TransmitterDesign,
        channel_length: f64,
        rx: ReceiverDesign,
        bits: Vec<RectPulse>,
    },
}

/// One exported trace: file stem, species label, data.
#[derive(Debug, Clone)]
pub struct NamedTrace {
    pub name: String,
    pub species: String,
    pub series: TimeSeries,
}

/// All results of one scenario run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub name: String,
    pub scenario_sha256: String,
    pub tool_version: String,
    pub metrics: BTreeMap<String, f64>,
    pub traces: Vec<NamedTrace>,
    pub warnings: Vec<String>,
}

fn linf_vs_analytic(oracle_trace: &TimeSeries, mut analytic: impl FnMut(f64) -> f64) -> f64 {
    oracle_trace
        .t()
        .iter()
        .zip(oracle_trace.c())
        .map(|(&t, &c)| (c - analytic(t)).abs())
        .fold(0.0_f64, f64::max)
}

fn max_abs_slope(ts: &TimeSeries) -> f64 {
    let t = ts.t();
    let c = ts.c();
    (1..t.len())
        .map(|i| ((c[i] - c[i - 1]) / (t[i] - t[i - 1])).abs())
        .fold(0.0_f64, f64::max)
}

fn sha256_hex(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let digest = h.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Executes a parsed scenario.
pub fn run(sc: &ScenarioFile, raw_text: &str) -> Result<RunRecord> {
    let resolved = sc.resolve()?;
    let env = resolved.env;
    let mut metrics = BTreeMap::new();
    let mut traces = Vec::new();
    let mut warnings = Vec::new();

    match &resolved.experiment {
        ResolvedExperiment::ChannelRect {
            rect,
            rx,
            lengths,
            t_max,
            sample_dt,
            with_oracle,
        } => {
            let n = (t_max / sample_dt).round() as usize + 1;
            for &x in lengths {
                let tag = format!("L{:.0}um", x / UM);
                let ca = TimeSeries::sample(
                    |t| transport::theorem1_reactant(x, t, &env, rect, rx),
                    0.0,
                    *sample_dt,
                    n,
                    x,
                    Source::Analytical,
                )?;
                let cab = TimeSeries::sample(
                    |t| transport::theorem1_product(x, t, &env, rect, rx),
                    0.0,
                    *sample_dt,
                    n,
                    x,
                    Source::Analytical,
                )?;
                metrics.insert(format!("{tag}.ca_peak_mol_per_m3"), ca.peak().0);
                metrics.insert(format!("{tag}.cab_peak_mol_per_m3"), cab.peak().0);
                traces.push(NamedTrace {
                    name: format!("analytic_{tag}"),
                    species: "C_A".into(),
                    series: ca,
                });
                traces.push(NamedTrace {
                    name: format!("analytic_{tag}"),
                    species: "C_AB".into(),
                    series: cab,
                });
            }
            if *with_oracle {
                let probe_max = lengths.iter().cloned().fold(0.0_f64, f64::max);
                let grid = OracleGrid::for_transport(&env, probe_max, *t_max)?;
                let sys = SpeciesSystem {
                    species: vec![
                        Species::new("A", Boundary::Rect(*rect)),
                        Species::new("B", Boundary::Const(rx.c_b0)).with_init(rx.c_b0),
                        Species::new("AB", Boundary::Zero),
                    ],
                    reactions: vec![Reaction {
                        reactant_a: 0,
                        reactant_b: 1,
                        product: Some(2),
                        k: rx.k,
                        catalytic: false,
                    }],
                };
                let sol = oracle::solve(&sys, &env, &grid, lengths)?;
                let plateau = transport::effective_c0(rect, rx).max(1e-300);
                for (p, &x) in lengths.iter().enumerate() {
                    let tag = format!("L{:.0}um", x / UM);
                    let err = linf_vs_analytic(&sol.series[p][2], |t| {
                        transport::theorem1_product(sol.probes[p], t, &env, rect, rx)
                    });
                    metrics.insert(
                        format!("{tag}.oracle_linf_frac_of_plateau"),
                        err / plateau,
                    );
                    metrics.insert(
                        format!("{tag}.oracle_cab_peak_mol_per_m3"),
                        sol.series[p][2].peak().0,
                    );
                    traces.push(NamedTrace {
                        name: format!("oracle_{tag}"),
                        species: "C_A".into(),
                        series: sol.series[p][0].clamped(),
                    });
                    traces.push(NamedTrace {
                        name: format!("oracle_{tag}"),
                        species: "C_AB".into(),
                        series: sol.series[p][2].clamped(),
                    });
                }
            }
        }
        ResolvedExperiment::ChannelGauss {
            pulse,
            c_b0_list,
            k,
            length,
            t_max,
            sample_dt,
            with_oracle,
        } => {
            let x = *length;
            let n = (t_max / sample_dt).round() as usize + 1;
            let t_grid: Vec<f64> = (0..n).map(|i| i as f64 * sample_dt).collect();
            for &c_b0 in c_b0_list {
                let tag = format!("cb{:.2}", c_b0);
                let a1 = TimeSeries::sample(
                    |t| threshold::theorem2_appro1(x, t, &env, pulse, c_b0),
                    0.0,
                    *sample_dt,
                    n,
                    x,
                    Source::Analytical,
                )?;
                let a2 = threshold::theorem2_appro2(
                    x,
                    &t_grid,
                    &env,
                    pulse,
                    c_b0,
                    &QuadratureConfig::default(),
                )?;
                metrics.insert(format!("{tag}.appro1_peak_mol_per_m3"), a1.peak().0);
                metrics.insert(format!("{tag}.appro2_peak_mol_per_m3"), a2.series.peak().0);
                metrics.insert(format!("{tag}.appro1_max_slope"), max_abs_slope(&a1));
                metrics.insert(format!("{tag}.appro2_max_slope"), max_abs_slope(&a2.series));
                metrics.insert(format!("{tag}.appro2_clipped_samples"), a2.clipped as f64);
                traces.push(NamedTrace {
                    name: format!("appro1_{tag}"),
                    species: "C_A".into(),
                    series: a1,
                });
                traces.push(NamedTrace {
                    name: format!("appro2_{tag}"),
                    species: "C_A".into(),
                    series: a2.series,
                });
            }
            if *with_oracle {
                for &c_b0 in c_b0_list {
                    let tag = format!("cb{:.2}", c_b0);
                    let grid = OracleGrid::for_transport(&env, x, *t_max)?;
                    let sys = SpeciesSystem {
                        species: vec![
                            Species::new("A", Boundary::Gauss(*pulse)),
                            Species::new("B", Boundary::Const(c_b0)).with_init(c_b0),
                        ],
                        reactions: vec![Reaction {
                            reactant_a: 0,
                            reactant_b: 1,
                            product: None,
                            k: *k,
                            catalytic: false,
                        }],
                    };
                    let sol = oracle::solve(&sys, &env, &grid, &[x])?;
                    let peak = (pulse.peak() - c_b0).max(1e-300);
                    let err1 = linf_vs_analytic(&sol.series[0][0], |t| {
                        threshold::theorem2_appro1(sol.probes[0], t, &env, pulse, c_b0)
                    });
                    metrics.insert(format!("{tag}.oracle_linf_appro1_frac_of_peak"), err1 / peak);
                    metrics.insert(
                        format!("{tag}.oracle_peak_mol_per_m3"),
                        sol.series[0][0].peak().0,
                    );
                    traces.push(NamedTrace {
                        name: format!("oracle_{tag}"),
                        species: "C_A".into(),
                        series: sol.series[0][0].clamped(),
                    });
                }
            }
        }
        ResolvedExperiment::Transmitter {
            design,
            tol,
            optimize,
            report_time_gap,
            bit_streams,
        } => {
            metrics.insert("design_l2_um".into(), design.l_2()? / UM);
            metrics.insert("t_y_s".into(), design.t_y(&env)?);
            let r1 = transmitter::reaction1_outlet(design, &env)?;
            let r2 = transmitter::reaction2_outlet(design, &env)?;
            let (cy, cp) = transmitter::reaction3_inlets(design, &env)?;
            metrics.insert("reaction1_peak_mol_per_m3".into(), r1.peak().0);
            metrics.insert("reaction2_peak_mol_per_m3".into(), r2.peak().0);
            metrics.insert("cy_inlet_peak_mol_per_m3".into(), cy.peak().0);
            metrics.insert(
                "t_y_max_s".into(),
                transmitter::pulse_peak_time(design, &env, tol)?,
            );
            traces.push(NamedTrace {
                name: "reaction1_outlet".into(),
                species: "C_Y".into(),
                series: r1,
            });
            traces.push(NamedTrace {
                name: "reaction2_outlet".into(),
                species: "C_P".into(),
                series: r2,
            });
            traces.push(NamedTrace {
                name: "reaction3_inlet".into(),
                species: "C_Y".into(),
                series: cy,
            });
            traces.push(NamedTrace {
                name: "reaction3_inlet".into(),
                species: "C_P".into(),
                series: cp,
            });
            for (i, row_tol) in optimize.iter().enumerate() {
                let report = transmitter::optimize_l2(design, &env, row_tol)?;
                metrics.insert(format!("optimize.{i}.zeta"), row_tol.zeta);
                metrics.insert(format!("optimize.{i}.l2_um"), report.l_2 / UM);
                metrics.insert(format!("optimize.{i}.t_max_tx_s"), report.t_max_tx);
                metrics.insert(format!("optimize.{i}.max_ctx_mol_per_m3"), report.max_ctx);
            }
            if *report_time_gap {
                metrics.insert(
                    "delta_t_min_s".into(),
                    transmitter::min_time_gap(design, &env, tol)?,
                );
            }
            for (si, bits) in bit_streams.iter().enumerate() {
                let pulse = transmitter::generate_pulse(design, &env, None, bits)?;
                // Peak per bit, split at onset midpoints.
                let mut bounds = vec![pulse.t()[0]];
                let delay = design.t_y(&env)? + design.t_c(&env)? + 0.5;
                for w in bits.windows(2) {
                    bounds.push(0.5 * (w[0].t0 + w[1].t0) + delay);
                }
                bounds.push(*pulse.t().last().unwrap() + 1.0);
                for b in 0..bits.len() {
                    let peak = pulse
                        .t()
                        .iter()
                        .zip(pulse.c())
                        .filter(|(&t, _)| t >= bounds[b] && t < bounds[b + 1])
                        .map(|(_, &c)| c)
                        .fold(0.0_f64, f64::max);
                    metrics.insert(
                        format!("stream.{si}.pulse.{b}.peak_mol_per_m3"),
                        peak,
                    );
                }
                traces.push(NamedTrace {
                    name: format!("pulse_stream{si}"),
                    species: "C_TX".into(),
                    series: pulse.clamped(),
                });
            }
        }
        ResolvedExperiment::Receiver {
            design,
            pulse,
            method,
            t_max,
            sample_dt,
            with_oracle,
        } => {
            let n = (t_max / sample_dt).round() as usize + 1;
            let t_grid: Vec<f64> = (0..n).map(|i| i as f64 * sample_dt).collect();
            let residual = receiver::reaction4_outlet(design, &env, pulse, *method, &t_grid)?;
            let out = receiver::reaction5_output(design, &env, &residual)?;
            metrics.insert("residual_peak_mol_per_m3".into(), residual.peak().0);
            metrics.insert("output_plateau_mol_per_m3".into(), out.peak().0);
            metrics.insert("output_width_s".into(), out.support_width(0.0));
            traces.push(NamedTrace {
                name: "reaction4_outlet".into(),
                species: "C_Y".into(),
                series: residual.clone(),
            });
            traces.push(NamedTrace {
                name: "output".into(),
                species: "C_O".into(),
                series: out,
            });
            if *with_oracle {
                let t_t = design.t_t(&env)?;
                let p = *pulse;
                let sys = SpeciesSystem {
                    species: vec![
                        Species::new(
                            "Y",
                            Boundary::Custom(Arc::new(move |t| 0.5 * p.eval(t - t_t))),
                        ),
                        Species::new("ThL", Boundary::Const(0.5 * design.c_thl_vi))
                            .with_init(0.5 * design.c_thl_vi),
                    ],
                    reactions: vec![Reaction {
                        reactant_a: 0,
                        reactant_b: 1,
                        product: None,
                        k: design.k,
                        catalytic: false,
                    }],
                };
                let grid = OracleGrid::for_transport(&env, design.l_4, *t_max)?;
                let sol = oracle::solve(&sys, &env, &grid, &[design.l_4])?;
                let peak = residual.peak().0.max(1e-300);
                let err = sol
                    .series[0][0]
                    .t()
                    .iter()
                    .zip(sol.series[0][0].c())
                    .map(|(&t, &c)| (c - residual.interp(t)).abs())
                    .fold(0.0_f64, f64::max);
                metrics.insert("oracle_linf_frac_of_peak".into(), err / peak);
                traces.push(NamedTrace {
                    name: "oracle_reaction4_outlet".into(),
                    species: "C_Y".into(),
                    series: sol.series[0][0].clamped(),
                });
            }
        }
        ResolvedExperiment::Link {
            tx,
            channel_length,
            rx,
            bits,
        } => {
            let run = link::run_link(tx, *channel_length, rx, &env, bits)?;
            metrics.insert("plateau_mol_per_m3".into(), rx.plateau());
            for (i, b) in run.bits.iter().enumerate() {
                metrics.insert(format!("bit.{i}.demodulated"), b.demodulated as u8 as f64);
                metrics.insert(format!("bit.{i}.fit_mu_s"), b.fit.pulse.mu);
                metrics.insert(format!("bit.{i}.fit_sigma2_s2"), b.fit.pulse.sigma2);
                metrics.insert(format!("bit.{i}.fit_rel_residual"), b.fit.rel_residual);
                metrics.insert(format!("bit.{i}.output_width_s"), b.output_width);
                if b.fit_warning {
                    warnings.push(format!(
                        "bit {i}: gaussian fit residual {:.1}% of peak exceeds 20%; analytic receiver path unreliable",
                        100.0 * b.fit.rel_residual
                    ));
                }
            }
            metrics.insert(
                "rx_oracle_output_width_s".into(),
                run.rx_out_oracle.support_width(0.0),
            );
            traces.push(NamedTrace {
                name: "tx_out".into(),
                species: "C_TX".into(),
                series: run.tx_out.clamped(),
            });
            traces.push(NamedTrace {
                name: "channel_out".into(),
                species: "C_Y".into(),
                series: run.channel_out.clamped(),
            });
            traces.push(NamedTrace {
                name: "rx_out".into(),
                species: "C_O".into(),
                series: run.rx_out,
            });
            traces.push(NamedTrace {
                name: "rx_out_oracle".into(),
                species: "C_O".into(),
                series: run.rx_out_oracle,
            });
        }
    }

    Ok(RunRecord {
        name: sc.name.clone(),
        scenario_sha256: sha256_hex(raw_text),
        tool_version: TOOL_VERSION.to_string(),
        metrics,
        traces,
        warnings,
    })
}

/// Loads, runs and exports a scenario file. Returns the record and the
/// directory written to.
pub fn run_scenario(path: &Path, out_root: Option<&Path>) -> Result<(RunRecord, PathBuf)> {
    let (sc, text) = ScenarioFile::load(path)?;
    let record = run(&sc, &text)?;
    let dir = output_dir(out_root, &record.name);
    export(&record, &dir)?;
    Ok((record, dir))
}

pub fn output_dir(out_root: Option<&Path>, name: &str) -> PathBuf {
    let root = out_root
        .map(PathBuf::from)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(name)
}

fn fmt_float(v: f64) -> String {
    format!("{v:.9e}")
}

/// Writes one CSV per trace and the summary record; deterministic bytes.
pub fn export(record: &RunRecord, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    // Group traces by file stem, preserving insertion order per file but
    // writing files in sorted order.
    let mut by_name: BTreeMap<&str, Vec<&NamedTrace>> = BTreeMap::new();
    for tr in &record.traces {
        by_name.entry(&tr.name).or_default().push(tr);
    }
    for (name, group) in &by_name {
        let mut csv = String::new();
        csv.push_str(CSV_SCHEMA_LINE);
        csv.push('\n');
        csv.push_str("t_seconds,species,concentration_mol_per_m3,source\n");
        for tr in group {
            for (&t, &c) in tr.series.t().iter().zip(tr.series.c()) {
                csv.push_str(&fmt_float(t));
                csv.push(',');
                csv.push_str(&tr.species);
                csv.push(',');
                csv.push_str(&fmt_float(c.max(0.0)));
                csv.push(',');
                csv.push_str(tr.series.source().as_str());
                csv.push('\n');
            }
        }
        std::fs::write(dir.join(format!("{name}.csv")), csv)?;
    }
    let mut summary = String::new();
    summary.push_str(SUMMARY_SCHEMA_LINE);
    summary.push('\n');
    summary.push_str(&format!("name = {}\n", record.name));
    summary.push_str(&format!("scenario_sha256 = {}\n", record.scenario_sha256));
    summary.push_str(&format!("tool_version = {}\n", record.tool_version));
    for (k, v) in &record.metrics {
        summary.push_str(&format!("metric.{k} = {}\n", fmt_float(*v)));
    }
    for (i, w) in record.warnings.iter().enumerate() {
        summary.push_str(&format!("warning.{i} = {w}\n"));
    }
    std::fs::write(dir.join("summary.txt"), summary)?;
    Ok(())
}

/// Runs a scenario once per value of a scalar parameter addressed by a
/// dotted path (e.g. `experiment.design.thl_mol_per_m3`), exporting each
/// run under `<name>/<path>=<value>/` plus a consolidated metrics CSV.
pub fn sweep(
    path: &Path,
    param: &str,
    values: &[f64],
    out_root: Option<&Path>,
) -> Result<(Vec<RunRecord>, PathBuf)> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let text = std::fs::read_to_string(path)?;
    let base: toml::Value = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let name = base
        .get("name")
        .and_then(|v| v.as_str())
        .unwrap_or("scenario")
        .to_string();
    let segments: Vec<&str> = param.split('.').collect();
    // The target must exist and be a scalar number.
    {
        let mut cur = &base;
        for seg in &segments {
            cur = cur.get(seg).ok_or_else(|| {
                Error::Config(format!("sweep parameter path `{param}` not found at `{seg}`"))
            })?;
        }
        if !matches!(cur, toml::Value::Float(_) | toml::Value::Integer(_)) {
            return Err(Error::Config(format!(
                "sweep target `{param}` is not a scalar number"
            )));
        }
    }
    let dir = output_dir(out_root, &name);
    std::fs::create_dir_all(&dir)?;
    let mut records = Vec::with_capacity(values.len());
    for &v in values {
        let mut doc = base.clone();
        let mut cur = &mut doc;
        for seg in &segments[..segments.len() - 1] {
            cur = cur.get_mut(seg).unwrap();
        }
        *cur.get_mut(segments[segments.len() - 1]).unwrap() = toml::Value::Float(v);
        let text_v = toml::to_string(&doc).map_err(|e| Error::Parse(e.to_string()))?;
        let sc = ScenarioFile::parse(&text_v)?;
        let record = run(&sc, &text_v)?;
        export(&record, &dir.join(format!("{param}={v}")))?;
        records.push(record);
    }
    // Consolidated metric table over the metric keys shared by all runs.
    let shared: Vec<String> = records[0]
        .metrics
        .keys()
        .filter(|k| records.iter().all(|r| r.metrics.contains_key(*k)))
        .cloned()
        .collect();
    let mut csv = String::new();
    csv.push_str(CSV_SCHEMA_LINE);
    csv.push('\n');
    csv.push_str(param);
    for k in &shared {
        csv.push(',');
        csv.push_str(k);
    }
    csv.push('\n');
    for (i, &v) in values.iter().enumerate() {
        csv.push_str(&fmt_float(v));
        for k in &shared {
            csv.push(',');
            csv.push_str(&fmt_float(records[i].metrics[k]));
        }
        csv.push('\n');
    }
    std::fs::write(dir.join("sweep.csv"), csv)?;
    Ok((records, dir))
}

/// Forces a paired analytic/oracle run and returns the error-norm metrics.
pub fn oracle_check(path: &Path, out_root: Option<&Path>) -> Result<(RunRecord, PathBuf)> {
    let (mut sc, text) = ScenarioFile::load(path)?;
    match &mut sc.experiment {
        ExperimentSpec::ChannelRect { with_oracle, .. }
        | ExperimentSpec::ChannelGauss { with_oracle, .. }
        | ExperimentSpec::Receiver { with_oracle, .. } => *with_oracle = true,
        _ => {
            return Err(Error::Config(
                "oracle-check supports channel_rect, channel_gauss and receiver scenarios".into(),
            ))
        }
    }
    let record = run(&sc, &text)?;
    let dir = output_dir(out_root, &record.name).join("oracle-check");
    export(&record, &dir)?;
    Ok((record, dir))
}
