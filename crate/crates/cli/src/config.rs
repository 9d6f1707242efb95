//! Experiment configuration, read from JSON.
//!
//! Keys mirror the parameter names of the core modules. Everything an
//! experiment needs lives in the file; nothing is read from the environment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wmix::compactness::ProbeRecipe;
use wmix::grid::{CubeFamily, FamilyPolicy, SampledFunction, UniformGrid};
use wmix::operators::{smooth_cutoff, KernelSpec, OperatorSpec, SymbolSpec};
use wmix::weights::WeightSpec;

use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    ApConstants,
    OpennessRh,
    FeffermanStein,
    FkProfile,
    UniformSweep,
    CommutatorSteps,
    PseudoCompactness,
    ProofQuantities,
    ExtrapolationEnvelope,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::ApConstants => "ap-constants",
            Kind::OpennessRh => "openness-rh",
            Kind::FeffermanStein => "fefferman-stein",
            Kind::FkProfile => "fk-profile",
            Kind::UniformSweep => "uniform-sweep",
            Kind::CommutatorSteps => "commutator-steps",
            Kind::PseudoCompactness => "pseudo-compactness",
            Kind::ProofQuantities => "proof-quantities",
            Kind::ExtrapolationEnvelope => "extrapolation-envelope",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<UniformGrid<f64>, RunError> {
        UniformGrid::new(self.dim, self.half_width, self.points_per_axis).map_err(RunError::config)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    #[serde(rename = "exhaustive-1d")]
    Exhaustive1d,
    Dyadic,
    ShiftedDyadic,
    Stratified { max_count: usize, seed: u64 },
}

impl FamilyConfig {
    pub fn policy(&self) -> FamilyPolicy {
        match self {
            FamilyConfig::Exhaustive1d => FamilyPolicy::Exhaustive1d,
            FamilyConfig::Dyadic => FamilyPolicy::Dyadic,
            FamilyConfig::ShiftedDyadic => FamilyPolicy::ShiftedDyadic,
            FamilyConfig::Stratified { max_count, seed } => {
                FamilyPolicy::Stratified { max_count: *max_count, seed: *seed }
            }
        }
    }

    pub fn build(&self, grid: &UniformGrid<f64>) -> Result<CubeFamily<f64>, RunError> {
        CubeFamily::new(grid, self.policy()).map_err(RunError::config)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    Constant { value: f64 },
    Power { exponent: f64, #[serde(default)] center: Option<Vec<f64>> },
    ClippedPower { exponent: f64, #[serde(default)] center: Option<Vec<f64>> },
    /// `u(x) v(y)`; `u` takes the first `u_dim` axes.
    Product { u: Box<WeightConfig>, v: Box<WeightConfig>, u_dim: usize },
}

impl WeightConfig {
    pub fn build(&self, dim: usize) -> Result<WeightSpec<f64>, RunError> {
        let center = |c: &Option<Vec<f64>>| -> Result<Vec<f64>, RunError> {
            match c {
                None => Ok(vec![0.0; dim]),
                Some(c) if c.len() == dim => Ok(c.clone()),
                Some(c) => Err(RunError::Config(format!(
                    "weight center has {} coordinates, expected {dim}",
                    c.len()
                ))),
            }
        };
        Ok(match self {
            WeightConfig::Constant { value } => WeightSpec::Constant { value: *value, dim },
            WeightConfig::Power { exponent, center: c } => {
                WeightSpec::Power { exponent: *exponent, center: center(c)? }
            }
            WeightConfig::ClippedPower { exponent, center: c } => {
                WeightSpec::ClippedPower { exponent: *exponent, center: center(c)? }
            }
            WeightConfig::Product { u, v, u_dim } => {
                if *u_dim == 0 || *u_dim >= dim {
                    return Err(RunError::Config(format!("product split {u_dim} invalid in dimension {dim}")));
                }
                WeightSpec::product(u.build(*u_dim)?, v.build(dim - u_dim)?)
            }
        })
    }
}

/// Inline weight pair `(u, v)` for mixed norms; `u` lives on the first
/// `u_dim` axes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub u: WeightConfig,
    pub v: WeightConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogConfig {
    pub k_caps: Vec<f64>,
    pub count: usize,
    /// Family on the factor grids where `[u]_{A_p}` and `[v]_{A_q}` are certified.
    #[serde(default = "default_factor_family")]
    pub factor_family: FamilyConfig,
}

fn default_factor_family() -> FamilyConfig {
    FamilyConfig::Exhaustive1d
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionConfig {
    Constant { value: f64 },
    /// `1 - χ(|x| / radius)` with the smooth cutoff `χ`: one on the ball of
    /// radius `radius / 2`, zero outside radius `radius`.
    Bump { radius: f64 },
    Gaussian { width: f64, #[serde(default)] center: Option<Vec<f64>> },
}

impl FunctionConfig {
    pub fn build(&self, grid: &UniformGrid<f64>) -> Result<SampledFunction<f64>, RunError> {
        let d = grid.dim();
        let f = match self {
            FunctionConfig::Constant { value } => SampledFunction::constant(grid, *value, "const"),
            FunctionConfig::Bump { radius } => {
                if !(*radius > 0.0) {
                    return Err(RunError::Config(format!("bump radius {radius} must be positive")));
                }
                SampledFunction::sample(grid, format!("bump({radius})"), |x: &[f64]| {
                    1.0 - smooth_cutoff(x.iter().map(|c| c * c).sum::<f64>().sqrt() / radius)
                })
            }
            FunctionConfig::Gaussian { width, center } => {
                let c = center.clone().unwrap_or_else(|| vec![0.0; d]);
                if c.len() != d {
                    return Err(RunError::Config("gaussian center has the wrong dimension".into()));
                }
                SampledFunction::sample(grid, format!("gauss({width})"), |x: &[f64]| {
                    let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-r2 / (2.0 * width * width)).exp()
                })
            }
        };
        f.map_err(RunError::config)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Riesz { component: usize },
}

impl KernelConfig {
    pub fn build(&self, dim: usize) -> Result<KernelSpec<f64>, RunError> {
        match self {
            KernelConfig::Riesz { component } => {
                KernelSpec::riesz(dim, *component).map_err(RunError::config)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolConfig {
    Constant { value: f64 },
    CordesGaussian { scale: f64 },
}

impl SymbolConfig {
    pub fn build(&self, dim: usize) -> SymbolSpec<f64> {
        match self {
            SymbolConfig::Constant { value } => SymbolSpec::constant(*value, dim),
            SymbolConfig::CordesGaussian { scale } => SymbolSpec::cordes_gaussian(*scale, dim),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    Identity,
    Multiply { function: FunctionConfig },
    Cz { kernel: KernelConfig },
    TruncatedCz { kernel: KernelConfig, eta: f64 },
    Commutator { b: FunctionConfig, inner: Box<OperatorConfig> },
    Pseudo { symbol: SymbolConfig },
    Compose { outer: Box<OperatorConfig>, inner: Box<OperatorConfig> },
}

impl OperatorConfig {
    pub fn build(&self, grid: &UniformGrid<f64>) -> Result<OperatorSpec<f64>, RunError> {
        let d = grid.dim();
        Ok(match self {
            OperatorConfig::Identity => OperatorSpec::Identity,
            OperatorConfig::Multiply { function } => OperatorSpec::Multiply(function.build(grid)?),
            OperatorConfig::Cz { kernel } => OperatorSpec::Cz(kernel.build(d)?),
            OperatorConfig::TruncatedCz { kernel, eta } => {
                OperatorSpec::TruncatedCz { kernel: kernel.build(d)?, eta: *eta }
            }
            OperatorConfig::Commutator { b, inner } => {
                OperatorSpec::commutator(b.build(grid)?, inner.build(grid)?).map_err(RunError::config)?
            }
            OperatorConfig::Pseudo { symbol } => OperatorSpec::Pseudo(symbol.build(d)),
            OperatorConfig::Compose { outer, inner } => {
                OperatorSpec::compose(outer.build(grid)?, inner.build(grid)?)
            }
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub scales: Vec<i32>,
    #[serde(default)]
    pub centers: Vec<Vec<f64>>,
    #[serde(default)]
    pub random_centers: usize,
    /// `null` for an unmodulated probe, `m` for the `π / (2^m h)` modulation.
    #[serde(default = "default_modulations")]
    pub modulations: Vec<Option<u32>>,
}

fn default_modulations() -> Vec<Option<u32>> {
    vec![None]
}

impl ProbeConfig {
    pub fn recipe(&self, dim: usize, seed: u64) -> ProbeRecipe<f64> {
        let mut centers = self.centers.clone();
        if centers.is_empty() && self.random_centers == 0 {
            centers.push(vec![0.0; dim]);
        }
        ProbeRecipe {
            scales: self.scales.clone(),
            centers,
            random_centers: self.random_centers,
            modulations: self.modulations.clone(),
            seed,
        }
    }
}

/// One experiment. Optional sections are required by some kinds only;
/// [`ExperimentConfig::validate`] checks the combination.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub grid: GridConfig,
    #[serde(default = "default_family")]
    pub family: FamilyConfig,
    #[serde(default)]
    pub weights: Vec<WeightConfig>,
    #[serde(default)]
    pub pairs: Vec<PairConfig>,
    #[serde(default)]
    pub catalog: Option<CatalogConfig>,
    #[serde(default)]
    pub operator: Option<OperatorConfig>,
    #[serde(default)]
    pub probes: Option<ProbeConfig>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_p")]
    pub q: f64,
    #[serde(default)]
    pub p_list: Vec<f64>,
    #[serde(default)]
    pub delta_list: Vec<f64>,
    #[serde(default)]
    pub r_list: Vec<f64>,
    #[serde(default)]
    pub h_list: Vec<f64>,
    #[serde(default)]
    pub shifts: Vec<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub epsilon_list: Vec<f64>,
    #[serde(default)]
    pub eta_list: Vec<f64>,
    #[serde(default)]
    pub j_list: Vec<i32>,
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_family() -> FamilyConfig {
    FamilyConfig::Dyadic
}

fn default_p() -> f64 {
    2.0
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_tolerance() -> f64 {
    1e-6
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks that every section the kind needs is present and resolvable.
    pub fn validate(&self) -> Result<(), RunError> {
        let grid = self.grid.build()?;
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(RunError::Config(format!("kind {} requires {what}", self.kind.name())))
            }
        };
        for w in &self.weights {
            w.build(grid.dim())?;
        }
        if let Some(op) = &self.operator {
            op.build(&grid)?;
        }
        if !self.pairs.is_empty() || self.catalog.is_some() {
            need(grid.dim() >= 2, "a grid of dimension at least 2 for weight pairs")?;
        }
        for pair in &self.pairs {
            pair.u.build(self.u_dim())?;
            pair.v.build(grid.dim() - self.u_dim())?;
        }
        if let Some(c) = &self.catalog {
            need(!c.k_caps.is_empty() && c.count > 0, "a catalog with caps and a positive count")?;
        }
        match self.kind {
            Kind::ApConstants | Kind::OpennessRh => need(!self.weights.is_empty(), "weights")?,
            Kind::FeffermanStein => {
                need(!self.pairs.is_empty(), "pairs")?;
                need(self.probes.is_some(), "probes")?;
            }
            Kind::FkProfile => {
                need(self.operator.is_some(), "operator")?;
                need(!self.pairs.is_empty() || self.catalog.is_some(), "pairs or catalog")?;
                need(!self.r_list.is_empty() && !self.shifts.is_empty(), "r_list and shifts")?;
            }
            Kind::UniformSweep => {
                need(self.operator.is_some(), "operator")?;
                need(self.catalog.is_some(), "catalog")?;
                need(!self.r_list.is_empty() && !self.shifts.is_empty(), "r_list and shifts")?;
            }
            Kind::CommutatorSteps => {
                need(matches!(self.operator, Some(OperatorConfig::Commutator { .. })), "a commutator operator")?;
                need(self.catalog.is_some(), "catalog")?;
                need(self.eta_list.len() >= 2, "at least two eta_list levels")?;
            }
            Kind::PseudoCompactness => {
                need(self.catalog.is_some() || !self.pairs.is_empty(), "pairs or catalog")?;
                need(!self.r_list.is_empty() && !self.shifts.is_empty(), "r_list and shifts")?;
            }
            Kind::ProofQuantities => {
                need(!self.weights.is_empty(), "weights")?;
                need(self.r0.is_some(), "r0")?;
                need(self.h_list.len() >= 2 && self.r_list.len() >= 2, "h_list and r_list")?;
            }
            Kind::ExtrapolationEnvelope => {
                need(self.catalog.is_some(), "catalog")?;
                need(self.probes.is_some(), "probes")?;
            }
        }
        Ok(())
    }

    /// Number of leading axes carrying `u` in mixed norms.
    pub fn u_dim(&self) -> usize {
        (self.grid.dim / 2).max(1)
    }

    pub fn probe_config(&self) -> ProbeConfig {
        self.probes.clone().unwrap_or(ProbeConfig {
            scales: vec![0, 1, 2],
            centers: Vec::new(),
            random_centers: 2,
            modulations: vec![None, Some(0), Some(1), Some(2)],
        })
    }
}
