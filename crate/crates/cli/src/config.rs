//! Scenario files: one TOML document per experiment.

use std::path::Path;
use std::sync::Arc;

use dyadic_core::linsys::{build_heat_plant, Basis, SemilinearPlant, StateSpace};
use dyadic_core::nehari::{self, NehariApproximant, NehariOptions};
use dyadic_core::riccati::{self, solve_care, RiccatiSolution};
use dyadic_core::sim::ObserverInit;
use dyadic_core::synthesis::{self, ControlLaw};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub plant: PlantSection,
    pub cost: CostSection,
    #[serde(default)]
    pub compensator: CompensatorSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    pub adaptation: Option<AdaptationSection>,
    #[serde(default)]
    pub small_gain: SmallGainSection,
    pub benchmark: Option<BenchmarkSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    Heat,
    Explicit,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub kind: PlantKind,
    pub grid_points: Option<usize>,
    pub length: Option<f64>,
    pub diffusion: Option<f64>,
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<Vec<f64>>>,
    pub c: Option<Vec<Vec<f64>>>,
    pub basis: Option<Basis>,
    pub alpha: Option<Vec<f64>>,
    pub nu_alpha: Option<f64>,
    #[serde(default = "one")]
    pub rho0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompensatorSection {
    #[serde(default = "yes")]
    pub constrained: bool,
    #[serde(default)]
    pub strictly_proper: bool,
    pub order: Option<usize>,
}

impl Default for CompensatorSection {
    fn default() -> Self {
        Self { constrained: true, strictly_proper: false, order: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
pub enum LawName {
    #[serde(rename = "LQR")]
    Lqr,
    #[serde(rename = "LQT")]
    Lqt,
    PureForm,
    #[serde(rename = "SDRE")]
    Sdre,
    Compensator,
}

impl LawName {
    pub fn label(self) -> &'static str {
        match self {
            LawName::Lqr => "LQR",
            LawName::Lqt => "LQT",
            LawName::PureForm => "PureForm",
            LawName::Sdre => "SDRE",
            LawName::Compensator => "Compensator",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitName {
    Zero,
    Homogeneous,
    Particular,
}

impl From<InitName> for ObserverInit {
    fn from(n: InitName) -> Self {
        match n {
            InitName::Zero => ObserverInit::Zero,
            InitName::Homogeneous => ObserverInit::Homogeneous,
            InitName::Particular => ObserverInit::Particular,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub horizon: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub reference: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
    #[serde(default = "zero_init")]
    pub observer_init: InitName,
    #[serde(default = "lqr")]
    pub law: LawName,
    pub tracking_threshold: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            horizon: None,
            dt: default_dt(),
            reference: None,
            v0: None,
            observer_init: InitName::Zero,
            law: LawName::Lqr,
            tracking_threshold: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationSection {
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallGainSection {
    pub rho_w: Option<f64>,
    #[serde(default)]
    pub epsilon_s: f64,
    pub r_inf: Option<f64>,
    #[serde(default = "default_samples")]
    pub lipschitz_samples: usize,
}

impl Default for SmallGainSection {
    fn default() -> Self {
        Self { rho_w: None, epsilon_s: 0.0, r_inf: None, lipschitz_samples: default_samples() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    pub laws: Vec<LawName>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_omega")]
    pub omega_max: f64,
    #[serde(default = "particular_init")]
    pub observer_init: InitName,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_dt() -> f64 {
    1e-3
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_samples() -> usize {
    256
}
fn default_draws() -> usize {
    20
}
fn default_omega() -> f64 {
    5.0
}
fn zero_init() -> InitName {
    InitName::Zero
}
fn particular_init() -> InitName {
    InitName::Particular
}
fn lqr() -> LawName {
    LawName::Lqr
}

pub fn load(path: &Path) -> Result<(Scenario, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let scenario = parse(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((scenario, bytes))
}

pub fn parse(text: &str) -> Result<Scenario, String> {
    toml::from_str::<Scenario>(text).map_err(|e| e.to_string())
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Config(format!("`{field}` must be a non-empty rectangular array of rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn vector(field: &str, xs: Option<&Vec<f64>>, len: usize) -> Result<DVector<f64>, CliError> {
    match xs {
        None => Ok(DVector::zeros(len)),
        Some(xs) if xs.len() == len => Ok(DVector::from_column_slice(xs)),
        Some(xs) => Err(CliError::Config(format!("`{field}` has length {}, expected {len}", xs.len()))),
    }
}

/// Everything derived from a scenario before any simulation.
pub struct Setup {
    pub scenario: Scenario,
    pub plant: Arc<SemilinearPlant>,
    pub solution: Arc<RiccatiSolution>,
    pub reference: DVector<f64>,
    pub v0: DVector<f64>,
}

impl Setup {
    pub fn new(scenario: Scenario) -> Result<Self, CliError> {
        let p = &scenario.plant;
        let linear = match p.kind {
            PlantKind::Heat => {
                let need = |name: &str| CliError::Config(format!("`plant.{name}` is required for a heat plant"));
                build_heat_plant(
                    p.grid_points.ok_or_else(|| need("grid_points"))?,
                    p.length.ok_or_else(|| need("length"))?,
                    p.diffusion.ok_or_else(|| need("diffusion"))?,
                )?
            }
            PlantKind::Explicit => {
                let need = |name: &str| CliError::Config(format!("`plant.{name}` is required for an explicit plant"));
                StateSpace::new(
                    matrix("plant.a", p.a.as_ref().ok_or_else(|| need("a"))?)?,
                    matrix("plant.b", p.b.as_ref().ok_or_else(|| need("b"))?)?,
                    matrix("plant.c", p.c.as_ref().ok_or_else(|| need("c"))?)?,
                )?
            }
        };
        let n = linear.n();
        let alpha = vector("plant.alpha", p.alpha.as_ref(), n)?;
        let nu_alpha = match p.nu_alpha {
            Some(x) => x,
            None if alpha.iter().all(|&x| x == 0.0) => 1.0,
            None => return Err(CliError::Config("`plant.nu_alpha` is required when `plant.alpha` is nonzero".into())),
        };
        let basis = p.basis.clone().unwrap_or(Basis::Zero);
        let plant = Arc::new(SemilinearPlant::new(linear.clone(), basis, alpha, nu_alpha, p.rho0)?);
        let r = matrix("cost.r", &scenario.cost.r)?;
        let solution = Arc::new(solve_care(&linear, &r)?);
        let reference = vector("simulation.reference", scenario.simulation.reference.as_ref(), linear.p())?;
        let v0 = vector("simulation.v0", scenario.simulation.v0.as_ref(), n)?;
        Ok(Self { scenario, plant, solution, reference, v0 })
    }

    pub fn nehari_options(&self) -> NehariOptions {
        NehariOptions {
            enforce_strictly_proper: self.scenario.compensator.strictly_proper,
            compensator_order: self.scenario.compensator.order,
        }
    }

    pub fn approximant(&self) -> Result<NehariApproximant, CliError> {
        let g = self.solution.closed_loop();
        let opts = self.nehari_options();
        Ok(if self.scenario.compensator.constrained {
            nehari::solve_constrained_nehari(&g, &self.solution.r, opts)?
        } else {
            nehari::solve_nehari(&g, &self.solution.r, opts)?
        })
    }

    pub fn law(&self, name: LawName) -> Result<ControlLaw, CliError> {
        let sol = &self.solution;
        let r = &self.reference;
        Ok(match name {
            LawName::Lqr => synthesis::lqr_law(sol),
            LawName::Lqt => synthesis::lqt_law(sol, r)?,
            LawName::PureForm => {
                let w = riccati::observability_gramian(&sol.a_m, sol.system.c())?;
                synthesis::pure_form_tracker(sol, &w, r)?
            }
            LawName::Sdre => synthesis::sdre_law(sol, &self.plant, r)?,
            LawName::Compensator => synthesis::compensator_law(sol, &Arc::new(self.approximant()?))?,
        })
    }

    pub fn horizon(&self) -> Result<f64, CliError> {
        match self.scenario.simulation.horizon {
            Some(t) => Ok(t),
            None => Ok(dyadic_core::sim::default_horizon(&self.solution)?),
        }
    }
}
