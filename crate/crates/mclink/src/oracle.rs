//! Independent 1D finite-difference solver for coupled
//! convection-diffusion-reaction systems; ground truth for every analytical
//! operation in the crate.
//!
//! Time stepping is operator-split (IMEX): explicit first-order upwind
//! convection, implicit Crank-Nicolson diffusion via a tridiagonal
//! (Thomas) solve, and an explicit reaction substep that is sub-cycled
//! whenever `k·C_max·dt > 0.1`. The inlet is a Dirichlet boundary; the
//! outlet at `x_max` is zero-gradient and the domain is truncated far enough
//! that it never contaminates the probes.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::types::{FlowEnv, GaussPulse, RectPulse, Source, TimeSeries};

/// Inlet boundary concentration as a function of time.
#[derive(Clone)]
pub enum Boundary {
    Zero,
    Const(f64),
    Rect(RectPulse),
    Gauss(GaussPulse),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Boundary {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Boundary::Zero => 0.0,
            Boundary::Const(c) => *c,
            Boundary::Rect(r) => r.eval(t),
            Boundary::Gauss(g) => g.eval(t),
            Boundary::Custom(f) => f(t),
        }
    }
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Zero => write!(f, "Zero"),
            Boundary::Const(c) => write!(f, "Const({c})"),
            Boundary::Rect(r) => write!(f, "Rect({r:?})"),
            Boundary::Gauss(g) => write!(f, "Gauss({g:?})"),
            Boundary::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// One transported species.
#[derive(Clone)]
pub struct Species {
    pub name: String,
    /// Effective diffusivity override; `None` uses the environment's.
    pub d_eff: Option<f64>,
    pub boundary: Boundary,
    /// Uniform initial concentration (default 0).
    pub init: f64,
    /// Spatial initial profile overriding `init` when present.
    pub init_profile: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for Species {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Species")
            .field("name", &self.name)
            .field("d_eff", &self.d_eff)
            .field("boundary", &self.boundary)
            .field("init", &self.init)
            .field("init_profile", &self.init_profile.as_ref().map(|_| ".."))
            .finish()
    }
}

impl Species {
    pub fn new(name: &str, boundary: Boundary) -> Self {
        Species {
            name: name.to_string(),
            d_eff: None,
            boundary,
            init: 0.0,
            init_profile: None,
        }
    }

    pub fn with_init(mut self, init: f64) -> Self {
        self.init = init;
        self
    }

    pub fn with_init_profile(
        mut self,
        profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ) -> Self {
        self.init_profile = Some(profile);
        self
    }

    pub fn with_d_eff(mut self, d_eff: f64) -> Self {
        self.d_eff = Some(d_eff);
        self
    }
}

/// Bimolecular reaction `A + B → product` with rate `k·C_A·C_B`.
///
/// `catalytic` marks A as a catalyst: it drives the rate but is not
/// consumed (the amplifying-reaction pattern).
#[derive(Debug, Clone, Copy)]
pub struct Reaction {
    pub reactant_a: usize,
    pub reactant_b: usize,
    /// Index of the tracked product, if any.
    pub product: Option<usize>,
    pub k: f64,
    pub catalytic: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SpeciesSystem {
    pub species: Vec<Species>,
    pub reactions: Vec<Reaction>,
}

impl SpeciesSystem {
    pub fn validate(&self) -> Result<()> {
        for r in &self.reactions {
            if !(r.k >= 0.0) {
                return Err(Error::Config(format!(
                    "reaction rate must be non-negative, got {}",
                    r.k
                )));
            }
            let n = self.species.len();
            if r.reactant_a >= n || r.reactant_b >= n || r.product.map_or(false, |p| p >= n) {
                return Err(Error::Config("reaction references unknown species".into()));
            }
        }
        Ok(())
    }
}

/// Space/time discretization for one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    /// Domain length (m); node `i` sits at `i·dx` with `dx = x_max/(nx−1)`.
    pub x_max: f64,
    /// Number of spatial nodes.
    pub nx: usize,
    /// Time step (s).
    pub dt: f64,
    /// End time (s).
    pub t_max: f64,
    /// Record every n-th step in the probe traces.
    pub sample_every: usize,
}

/// Default spatial resolution target for acceptance runs.
pub const DEFAULT_DX: f64 = 2e-6;

impl OracleGrid {
    pub fn new(x_max: f64, nx: usize, dt: f64, t_max: f64) -> Result<Self> {
        let g = OracleGrid {
            x_max,
            nx,
            dt,
            t_max,
            sample_every: 1,
        };
        g.basic_checks()?;
        Ok(g)
    }

    /// Default grid for a transport run: `dx ≤ 2 μm`,
    /// `dt = 0.25·dx/v_eff`, domain truncated at
    /// `probe_max + 10·sqrt(D_eff·t_max)` so the zero-gradient outlet never
    /// contaminates the probes.
    pub fn for_transport(env: &FlowEnv, probe_max: f64, t_max: f64) -> Result<Self> {
        if !(probe_max > 0.0 && t_max > 0.0) {
            return Err(Error::Config(format!(
                "need positive probe_max and t_max, got {probe_max} and {t_max}"
            )));
        }
        let x_max = probe_max + 10.0 * (env.d_eff * t_max).sqrt();
        let nx = (x_max / DEFAULT_DX).ceil() as usize + 1;
        let dx = x_max / (nx - 1) as f64;
        let dt = if env.v_eff > 0.0 {
            0.25 * dx / env.v_eff
        } else {
            0.25 * dx * dx / env.d_eff
        };
        let mut g = OracleGrid {
            x_max,
            nx,
            dt,
            t_max,
            sample_every: 1,
        };
        g.sample_every = ((0.005 / dt).round() as usize).max(1);
        g.basic_checks()?;
        Ok(g)
    }

    pub fn dx(&self) -> f64 {
        self.x_max / (self.nx - 1) as f64
    }

    fn basic_checks(&self) -> Result<()> {
        if self.nx < 32 {
            return Err(Error::Config(format!("nx must be at least 32, got {}", self.nx)));
        }
        if !(self.x_max > 0.0 && self.dt > 0.0 && self.t_max > self.dt) {
            return Err(Error::Config(
                "grid needs positive x_max, dt and t_max > dt".into(),
            ));
        }
        Ok(())
    }

    /// Pre-step validation against the environment: CFL for the explicit
    /// upwind convection substep. (Diffusion is unconditionally stable here
    /// because it is always integrated implicitly; the classic diffusion-
    /// number limit would apply only to an explicit diffusion path.)
    pub fn validate(&self, env: &FlowEnv) -> Result<()> {
        self.basic_checks()?;
        let cfl = env.v_eff * self.dt / self.dx();
        if cfl > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "CFL number v_eff·dt/dx = {cfl:.3} exceeds 1"
            )));
        }
        Ok(())
    }

    /// Halves `dx` and `dt` (doubling `sample_every` keeps the recorded
    /// sample times identical across refinement levels).
    pub fn refined(&self) -> Self {
        OracleGrid {
            x_max: self.x_max,
            nx: (self.nx - 1) * 2 + 1,
            dt: self.dt / 2.0,
            t_max: self.t_max,
            sample_every: self.sample_every * 2,
        }
    }
}

/// Result of one solve: per-probe, per-species traces plus bookkeeping.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub probes: Vec<f64>,
    /// `series[p][s]`: trace of species `s` at probe `p`.
    pub series: Vec<Vec<TimeSeries>>,
    /// Relative mass-balance error per species (meaningful for k = 0 runs).
    pub mass_balance_rel_error: Vec<f64>,
}

impl OracleSolution {
    pub fn trace(&self, probe: usize, species: usize) -> &TimeSeries {
        &self.series[probe][species]
    }
}

fn thomas_solve(
    lower: f64,
    diag: &[f64],
    upper: f64,
    rhs: &mut [f64],
    scratch: &mut [f64],
) {
    // Tridiagonal system with constant off-diagonals except as encoded in
    // `diag`; overwrites `rhs` with the solution.
    let n = rhs.len();
    scratch[0] = upper / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - lower * scratch[i - 1];
        scratch[i] = upper / m;
        rhs[i] = (rhs[i] - lower * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

/// Solves the coupled system and records traces at the given probe
/// stations (snapped to the nearest grid node).
///
/// Deterministic: identical inputs produce bit-identical outputs.
pub fn solve(
    system: &SpeciesSystem,
    env: &FlowEnv,
    grid: &OracleGrid,
    probes: &[f64],
) -> Result<OracleSolution> {
    system.validate()?;
    grid.validate(env)?;
    if probes.is_empty() {
        return Err(Error::Config("at least one probe station required".into()));
    }
    let nx = grid.nx;
    let dx = grid.dx();
    let dt = grid.dt;
    let ns = system.species.len();
    let probe_idx: Vec<usize> = probes
        .iter()
        .map(|&x| ((x / dx).round() as usize).min(nx - 1))
        .collect();

    let mut fields: Vec<Vec<f64>> = system
        .species
        .iter()
        .map(|s| {
            let mut f = match &s.init_profile {
                Some(profile) => (0..nx).map(|i| profile(i as f64 * dx)).collect(),
                None => vec![s.init; nx],
            };
            f[0] = s.boundary.eval(0.0);
            f
        })
        .collect();

    let n_steps = (grid.t_max / dt).round() as usize;
    let n_rec = n_steps / grid.sample_every + 1;
    let mut rec_t: Vec<f64> = Vec::with_capacity(n_rec);
    let mut rec_c: Vec<Vec<Vec<f64>>> = vec![vec![Vec::with_capacity(n_rec); ns]; probes.len()];

    let record = |step: usize, fields: &[Vec<f64>], rec_t: &mut Vec<f64>,
                  rec_c: &mut Vec<Vec<Vec<f64>>>| {
        rec_t.push(step as f64 * dt);
        for (p, &pi) in probe_idx.iter().enumerate() {
            for s in 0..ns {
                rec_c[p][s].push(fields[s][pi]);
            }
        }
    };
    record(0, &fields, &mut rec_t, &mut rec_c);

    let lambda = env.v_eff * dt / dx;
    let betas: Vec<f64> = system
        .species
        .iter()
        .map(|s| s.d_eff.unwrap_or(env.d_eff) * dt / (dx * dx))
        .collect();
    let k_max = system.reactions.iter().map(|r| r.k).fold(0.0_f64, f64::max);

    // Flux bookkeeping for the mass-balance invariant.
    let mut mass_in = vec![0.0_f64; ns];
    let mut mass_out = vec![0.0_f64; ns];
    let mass0: Vec<f64> = fields.iter().map(|f| f[1..].iter().sum::<f64>() * dx).collect();

    let mut diag = vec![0.0_f64; nx - 1];
    let mut rhs = vec![0.0_f64; nx - 1];
    let mut scratch = vec![0.0_f64; nx - 1];

    for step in 0..n_steps {
        let t_new = (step + 1) as f64 * dt;

        for (s, field) in fields.iter_mut().enumerate() {
            // Explicit upwind convection (flow is left-to-right).
            if lambda > 0.0 {
                mass_in[s] += lambda * field[0] * dx;
                mass_out[s] += lambda * field[nx - 1] * dx;
                for i in (1..nx).rev() {
                    field[i] -= lambda * (field[i] - field[i - 1]);
                }
            }

            // Crank-Nicolson diffusion on nodes 1..nx−1; node 0 is the
            // Dirichlet inlet, node nx−1 has a zero-gradient ghost.
            let beta = betas[s];
            let b_new = system.species[s].boundary.eval(t_new);
            let half = 0.5 * beta;
            let pre_in = field[0] - field[1];
            for i in 1..nx - 1 {
                diag[i - 1] = 1.0 + beta;
                rhs[i - 1] = field[i] + half * (field[i + 1] - 2.0 * field[i] + field[i - 1]);
            }
            diag[nx - 2] = 1.0 + half;
            rhs[nx - 2] = field[nx - 1] + half * (field[nx - 2] - field[nx - 1]);
            rhs[0] += half * b_new;
            thomas_solve(-half, &diag, -half, &mut rhs, &mut scratch);
            field[1..].copy_from_slice(&rhs);
            field[0] = b_new;
            mass_in[s] += half * dx * (pre_in + (field[0] - field[1]));
        }

        // Explicit reaction substep, sub-cycled when stiff.
        if !system.reactions.is_empty() && k_max > 0.0 {
            let c_max = fields
                .iter()
                .flat_map(|f| f.iter())
                .fold(0.0_f64, |m, &v| m.max(v));
            let sub = ((k_max * c_max * dt / 0.1).ceil() as usize).max(1);
            let dtr = dt / sub as f64;
            for _ in 0..sub {
                for r in &system.reactions {
                    for i in 1..nx {
                        let delta = r.k * fields[r.reactant_a][i] * fields[r.reactant_b][i] * dtr;
                        if !r.catalytic {
                            fields[r.reactant_a][i] -= delta;
                        }
                        fields[r.reactant_b][i] -= delta;
                        if let Some(p) = r.product {
                            fields[p][i] += delta;
                        }
                    }
                }
            }
        }

        if (step + 1) % grid.sample_every == 0 {
            record(step + 1, &fields, &mut rec_t, &mut rec_c);
        }
        if (step + 1) % 200 == 0 || step + 1 == n_steps {
            for field in &fields {
                let c_max = field.iter().fold(0.0_f64, |m, &v| m.max(v));
                let c_min = field.iter().fold(0.0_f64, |m, &v| m.min(v));
                if c_min < -1e-9 * c_max.max(1e-300) {
                    return Err(Error::Stability(format!(
                        "negative concentration {c_min:.3e} at t = {t_new:.4}"
                    )));
                }
            }
        }
    }

    let mass_balance_rel_error: Vec<f64> = (0..ns)
        .map(|s| {
            let mass_end: f64 = fields[s][1..].iter().sum::<f64>() * dx;
            let expected = mass0[s] + mass_in[s] - mass_out[s];
            let scale = mass_in[s].abs().max(mass_end.abs()).max(1e-300);
            (mass_end - expected).abs() / scale
        })
        .collect();

    let mut series = Vec::with_capacity(probes.len());
    for (p, &pi) in probe_idx.iter().enumerate() {
        let mut per_species = Vec::with_capacity(ns);
        for s in 0..ns {
            per_species.push(TimeSeries::new(
                rec_t.clone(),
                rec_c[p][s].clone(),
                pi as f64 * dx,
                Source::Oracle,
            )?);
        }
        series.push(per_species);
    }
    Ok(OracleSolution {
        probes: probe_idx.iter().map(|&i| i as f64 * dx).collect(),
        series,
        mass_balance_rel_error,
    })
}

/// Grid-refinement study: solves on `levels` successively halved grids and
/// reports Richardson-style observed orders from the differences between
/// consecutive levels.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// L∞ differences between consecutive refinement levels.
    pub errors: Vec<f64>,
    /// `log2(e_l / e_{l+1})` for consecutive differences.
    pub orders: Vec<f64>,
    /// False when the error sequence is not monotonically decreasing.
    pub monotone: bool,
}

pub fn convergence_report(
    system: &SpeciesSystem,
    env: &FlowEnv,
    base: &OracleGrid,
    probe: f64,
    levels: usize,
) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::Config(format!(
            "convergence study needs at least 3 levels, got {levels}"
        )));
    }
    let mut grids = vec![*base];
    for _ in 1..levels {
        grids.push(grids.last().unwrap().refined());
    }
    let traces: Vec<TimeSeries> = grids
        .iter()
        .map(|g| solve(system, env, g, &[probe]).map(|sol| sol.series[0][0].clone()))
        .collect::<Result<_>>()?;
    let mut errors = Vec::new();
    for w in traces.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let n = a.len().min(b.len());
        let e = (0..n)
            .map(|i| (a.c()[i] - b.c()[i]).abs())
            .fold(0.0_f64, f64::max);
        errors.push(e);
    }
    let orders = errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect::<Vec<_>>();
    let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
    Ok(ConvergenceReport {
        errors,
        orders,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::convdiff_rect;
    use crate::types::{FlowEnv, RectPulse};

    fn env() -> FlowEnv {
        FlowEnv::new(0.002, 1e-9, 1e-8).unwrap()
    }

    #[test]
    fn zero_boundary_gives_zero_field() {
        let sys = SpeciesSystem {
            species: vec![Species::new("a", Boundary::Zero)],
            reactions: vec![],
        };
        let grid = OracleGrid::new(500e-6, 64, 0.001, 1.0).unwrap();
        let sol = solve(&sys, &env(), &grid, &[250e-6]).unwrap();
        assert!(sol.series[0][0].c().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn convdiff_matches_analytic() {
        let e = env();
        let rect = RectPulse::new(1.5, 2.0, 0.0).unwrap();
        let sys = SpeciesSystem {
            species: vec![Species::new("a", Boundary::Rect(rect))],
            reactions: vec![],
        };
        let grid = OracleGrid::for_transport(&e, 540e-6, 5.0).unwrap();
        let sol = solve(&sys, &e, &grid, &[540e-6]).unwrap();
        let trace = &sol.series[0][0];
        let peak = rect.c0;
        let mut max_err = 0.0_f64;
        for (i, &t) in trace.t().iter().enumerate() {
            let exact = convdiff_rect(sol.probes[0], t, &e, &rect);
            max_err = max_err.max((trace.c()[i] - exact).abs());
        }
        assert!(
            max_err < 0.02 * peak,
            "L-inf error {max_err} exceeds 2% of peak"
        );
    }

    #[test]
    fn mass_balance_closed() {
        let e = env();
        let rect = RectPulse::new(1.5, 2.0, 0.0).unwrap();
        let sys = SpeciesSystem {
            species: vec![Species::new("a", Boundary::Rect(rect))],
            reactions: vec![],
        };
        let grid = OracleGrid::for_transport(&e, 540e-6, 5.0).unwrap();
        let sol = solve(&sys, &e, &grid, &[540e-6]).unwrap();
        assert!(
            sol.mass_balance_rel_error[0] < 1e-3,
            "mass balance error {} exceeds 0.1%",
            sol.mass_balance_rel_error[0]
        );
    }

    #[test]
    fn determinism_bit_identical() {
        let e = env();
        let rect = RectPulse::new(1.5, 2.0, 0.0).unwrap();
        let sys = SpeciesSystem {
            species: vec![
                Species::new("a", Boundary::Rect(rect)),
                Species::new("b", Boundary::Const(1.5)),
                Species::new("ab", Boundary::Zero),
            ],
            reactions: vec![Reaction {
                reactant_a: 0,
                reactant_b: 1,
                product: Some(2),
                k: 400.0,
                catalytic: false,
            }],
        };
        let grid = OracleGrid::new(700e-6, 128, 0.002, 1.5).unwrap();
        let s1 = solve(&sys, &e, &grid, &[540e-6]).unwrap();
        let s2 = solve(&sys, &e, &grid, &[540e-6]).unwrap();
        for sp in 0..3 {
            assert_eq!(s1.series[0][sp].c(), s2.series[0][sp].c());
        }
    }

    #[test]
    fn catalyst_not_consumed() {
        let e = env();
        let rect = RectPulse::new(1.0, 1.0, 0.0).unwrap();
        let cat_sys = SpeciesSystem {
            species: vec![
                Species::new("y", Boundary::Rect(rect)),
                Species::new("amp", Boundary::Const(3.0)),
                Species::new("o", Boundary::Zero),
            ],
            reactions: vec![Reaction {
                reactant_a: 0,
                reactant_b: 1,
                product: Some(2),
                k: 400.0,
                catalytic: true,
            }],
        };
        let plain_sys = SpeciesSystem {
            species: vec![Species::new("y", Boundary::Rect(rect))],
            reactions: vec![],
        };
        let grid = OracleGrid::new(600e-6, 128, 0.002, 1.2).unwrap();
        let a = solve(&cat_sys, &e, &grid, &[400e-6]).unwrap();
        let b = solve(&plain_sys, &e, &grid, &[400e-6]).unwrap();
        // The catalyst trace must be bit-exact against a k = 0 solve of the
        // catalyst alone.
        assert_eq!(a.series[0][0].c(), b.series[0][0].c());
    }

    #[test]
    fn cfl_violation_rejected() {
        let e = env();
        let grid = OracleGrid::new(100e-6, 64, 10.0, 100.0).unwrap();
        let sys = SpeciesSystem {
            species: vec![Species::new("a", Boundary::Zero)],
            reactions: vec![],
        };
        assert!(matches!(
            solve(&sys, &e, &grid, &[50e-6]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn convergence_needs_three_levels() {
        let e = env();
        let sys = SpeciesSystem {
            species: vec![Species::new("a", Boundary::Zero)],
            reactions: vec![],
        };
        let grid = OracleGrid::new(500e-6, 64, 0.01, 1.0).unwrap();
        assert!(matches!(
            convergence_report(&sys, &e, &grid, 250e-6, 2),
            Err(Error::Config(_))
        ));
    }
}
