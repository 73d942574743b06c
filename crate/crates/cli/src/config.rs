//! JSON scenario files.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use egf_core::{
    double_twisted_state, fiber_vector_field, product_grid, twisted_state, EgfFlow, FdScheme,
    FlowConfig, FlowVariant, FourierSeries, FourierTerm, ProductGrid, CHECK_NAMES,
};
use serde::Deserialize;

use crate::Failure;

const DEFAULT_BASE_POINTS: usize = 8;
const DEFAULT_FIBER_POINTS: usize = 64;
const DEFAULT_SAMPLE_COUNT: usize = 11;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    TwistedTorus,
    DoubleTwisted,
    Codim1Fibration,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Plain,
    Normalized,
    Prescribed,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub mode: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// `constant + Σ cos·cos(k·z) + sin·sin(k·z)` over base then fiber axes.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<Term>,
}

impl Series {
    fn to_core(&self) -> FourierSeries<f64> {
        FourierSeries {
            constant: self.constant,
            terms: self
                .terms
                .iter()
                .map(|t| FourierTerm {
                    mode: t.mode.clone(),
                    cos: t.cos,
                    sin: t.sin,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    pub dt: f64,
    #[serde(default = "half")]
    pub theta: f64,
    #[serde(default = "fd_points")]
    pub grid_points: usize,
}

fn half() -> f64 {
    0.5
}

fn fd_points() -> usize {
    256
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            snapshots: true,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    pub base_sides: Option<Vec<f64>>,
    pub base_points: Option<Vec<usize>>,
    pub fiber_sides: Option<Vec<f64>>,
    pub fiber_points: Option<Vec<usize>>,
    pub phi0: Option<Series>,
    pub psi: Option<Series>,
    pub tau1: Option<Series>,
    pub x_field: Option<Vec<Series>>,
    #[serde(default)]
    pub variant: Variant,
    pub t_end: f64,
    pub samples: Option<Vec<f64>>,
    pub sample_count: Option<usize>,
    pub tol_converge: Option<f64>,
    #[serde(default)]
    pub oracle: bool,
    pub fd: Option<FdConfig>,
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub plot: bool,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Command-line settings that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub grid: Option<usize>,
    pub no_oracle: bool,
    pub plot: bool,
}

/// A validated scenario ready to run.
pub struct Prepared {
    pub flow: EgfFlow<f64>,
    pub checks: Vec<String>,
    pub out_dir: PathBuf,
    pub plot: bool,
    pub snapshots: bool,
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn axis_values<T: Copy>(given: &Option<Vec<T>>, dims: usize, default: T, what: &str) -> Result<Vec<T>, Failure> {
    match given {
        None => Ok(vec![default; dims]),
        Some(v) if v.len() == dims => Ok(v.clone()),
        Some(v) => Err(config_error(format!(
            "{what} needs {dims} entries, got {}",
            v.len()
        ))),
    }
}

fn check_modes(series: &Series, grid: &ProductGrid<f64>, what: &str) -> Result<(), Failure> {
    let points: Vec<usize> = grid
        .base()
        .points()
        .iter()
        .chain(grid.fiber().points())
        .copied()
        .collect();
    for t in &series.terms {
        if t.mode.len() != points.len() {
            return Err(config_error(format!(
                "{what}: mode {:?} needs {} entries (base axes then fiber axes)",
                t.mode,
                points.len()
            )));
        }
        for (&m, &pts) in t.mode.iter().zip(&points) {
            if 2 * m.unsigned_abs() as usize >= pts {
                return Err(config_error(format!(
                    "{what}: mode {:?} is not resolved by {pts} points",
                    t.mode
                )));
            }
        }
    }
    Ok(())
}

fn require<'a>(s: &'a Option<Series>, field: &str, scenario: &str) -> Result<&'a Series, Failure> {
    s.as_ref()
        .ok_or_else(|| config_error(format!("scenario {scenario} requires '{field}'")))
}

fn forbid<T>(s: &Option<T>, field: &str, scenario: &str) -> Result<(), Failure> {
    match s {
        Some(_) => Err(config_error(format!("'{field}' is not used by scenario {scenario}"))),
        None => Ok(()),
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    /// Builds the flow and resolves every setting without touching the disk.
    pub fn prepare(&self, config_dir: &Path, over: &Overrides) -> Result<Prepared, Failure> {
        let (n, p) = (self.n, self.p);
        if !(1..=2).contains(&n) || !(1..=2).contains(&p) {
            return Err(config_error(format!("n and p must be 1 or 2, got n = {n}, p = {p}")));
        }
        let base_sides = axis_values(&self.base_sides, n, TAU, "base_sides")?;
        let base_points = axis_values(&self.base_points, n, DEFAULT_BASE_POINTS, "base_points")?;
        let fiber_sides = axis_values(&self.fiber_sides, p, TAU, "fiber_sides")?;
        let mut fiber_points =
            axis_values(&self.fiber_points, p, DEFAULT_FIBER_POINTS, "fiber_points")?;
        if let Some(g) = over.grid {
            fiber_points = vec![g; p];
        }
        let grid = product_grid(&base_sides, &base_points, &fiber_sides, &fiber_points)?;

        let samples = match (&self.samples, self.sample_count) {
            (Some(_), Some(_)) => {
                return Err(config_error("give either 'samples' or 'sample_count', not both"))
            }
            (Some(s), None) => s.clone(),
            (None, c) => FlowConfig::uniform_samples(self.t_end, c.unwrap_or(DEFAULT_SAMPLE_COUNT)),
        };
        let variant = match self.variant {
            Variant::Plain => FlowVariant::Plain,
            Variant::Normalized => FlowVariant::Normalized,
            Variant::Prescribed => FlowVariant::Prescribed,
        };
        let mut flow_config = FlowConfig::new(variant, n, p, self.t_end, samples)?
            .with_oracle_check(self.oracle && !over.no_oracle);
        if let Some(tol) = self.tol_converge {
            flow_config = flow_config.with_tol_converge(tol);
        }
        if let Some(fd) = &self.fd {
            flow_config = flow_config.with_fd_scheme(FdScheme::new(fd.dt, fd.theta, fd.grid_points)?);
        }
        match (variant, &self.x_field) {
            (FlowVariant::Prescribed, Some(xs)) => {
                for x in xs {
                    check_modes(x, &grid, "x_field")?;
                }
                let comps: Vec<_> = xs.iter().map(Series::to_core).collect();
                flow_config = flow_config.with_x_field(fiber_vector_field(&grid, &comps)?);
            }
            (FlowVariant::Prescribed, None) => {
                return Err(config_error("the prescribed variant requires 'x_field'"))
            }
            (_, Some(_)) => {
                return Err(config_error("'x_field' is only used by the prescribed variant"))
            }
            (_, None) => {}
        }
        flow_config.validate()?;

        let flow = match self.scenario {
            Scenario::TwistedTorus => {
                let phi0 = require(&self.phi0, "phi0", "twisted_torus")?;
                forbid(&self.psi, "psi", "twisted_torus")?;
                forbid(&self.tau1, "tau1", "twisted_torus")?;
                check_modes(phi0, &grid, "phi0")?;
                EgfFlow::new(twisted_state(&grid, &phi0.to_core())?, flow_config)?
            }
            Scenario::DoubleTwisted => {
                let phi0 = require(&self.phi0, "phi0", "double_twisted")?;
                let psi = require(&self.psi, "psi", "double_twisted")?;
                forbid(&self.tau1, "tau1", "double_twisted")?;
                check_modes(phi0, &grid, "phi0")?;
                check_modes(psi, &grid, "psi")?;
                let state = double_twisted_state(&grid, &phi0.to_core(), &psi.to_core())?;
                EgfFlow::new(state, flow_config)?
            }
            Scenario::Codim1Fibration => {
                let tau1 = require(&self.tau1, "tau1", "codim1_fibration")?;
                forbid(&self.phi0, "phi0", "codim1_fibration")?;
                forbid(&self.psi, "psi", "codim1_fibration")?;
                check_modes(tau1, &grid, "tau1")?;
                EgfFlow::codim1(&tau1.to_core().evaluate(&grid)?, flow_config)?
            }
        };

        let mut checks = Vec::new();
        for name in &self.checks {
            let names: Vec<&str> = if name == "all" {
                CHECK_NAMES.to_vec()
            } else if CHECK_NAMES.contains(&name.as_str()) {
                vec![name.as_str()]
            } else {
                return Err(config_error(format!(
                    "unknown check '{name}'; known checks: all, {}",
                    CHECK_NAMES.join(", ")
                )));
            };
            for c in names {
                if !checks.iter().any(|k| k == c) {
                    checks.push(c.to_string());
                }
            }
        }

        let out_dir = match (&over.out, &self.output.dir) {
            (Some(d), _) => d.clone(),
            (None, Some(d)) => config_dir.join(d),
            (None, None) => PathBuf::from("egf-out"),
        };
        Ok(Prepared {
            flow,
            checks,
            out_dir,
            plot: self.plot || over.plot,
            snapshots: self.output.snapshots,
        })
    }
}
