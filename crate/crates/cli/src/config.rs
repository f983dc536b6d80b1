//! Run configuration: TOML schema, validation, defaults resolution, and
//! dotted-path overrides. Unknown keys are rejected everywhere.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use mfg_core::catalog;
use mfg_core::grid::GridSpec;
use mfg_core::play::{BtlsParams, WeightSchedule};
use mfg_core::problem::{
    gaussian_pdf, CostSpec, Hamiltonian, MomentParams, ProblemSpec, SampledKernel,
    SpatialProfile, TerminalCost,
};

/// Named spatial profiles available to inline problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileConfig {
    Zero,
    Constant { value: f64 },
    /// coeff * sin(2 pi x)
    #[serde(rename = "sin-2pi")]
    Sin2Pi { coeff: f64 },
    /// coeff * exp(sin(2 pi x))
    #[serde(rename = "exp-sin-2pi")]
    ExpSin2Pi { coeff: f64 },
}

impl ProfileConfig {
    fn sample(&self, grid: &GridSpec) -> SpatialProfile {
        let tau = 2.0 * std::f64::consts::PI;
        match *self {
            ProfileConfig::Zero => SpatialProfile::from_values(vec![0.0; grid.n_space()]),
            ProfileConfig::Constant { value } => {
                SpatialProfile::from_values(vec![value; grid.n_space()])
            }
            ProfileConfig::Sin2Pi { coeff } => {
                SpatialProfile::sample(grid, |x| coeff * (tau * x[0]).sin())
            }
            ProfileConfig::ExpSin2Pi { coeff } => {
                SpatialProfile::sample(grid, |x| coeff * (tau * x[0]).sin().exp())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianConfig {
    Quadratic,
    Power { gamma: f64, h: ProfileConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl GaussianConfig {
    fn sample(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        if self.mean.len() != grid.dim() || self.std.len() != grid.dim() {
            bail!("gaussian mean/std must have one entry per dimension");
        }
        if self.std.iter().any(|&s| s <= 0.0) {
            bail!("gaussian std must be positive");
        }
        Ok((0..grid.n_space())
            .map(|s| {
                let c = grid.coords(s);
                (0..grid.dim())
                    .map(|j| gaussian_pdf(c[j], self.mean[j], self.std[j]))
                    .product()
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InteractionConfig {
    Zero,
    LocalAffine {
        a: f64,
        b: ProfileConfig,
    },
    /// coeff * (I - Lap)^{-2} rho
    Smoothed {
        coeff: f64,
    },
    /// coeff * (K * rho) with a Gaussian product kernel
    ConvolutionGaussian {
        coeff: f64,
        std: Vec<f64>,
    },
    MomentQuadratic {
        a: f64,
        b: f64,
        alpha: f64,
    },
    Obstacle {
        value: f64,
        radius_sq: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TerminalConfig {
    Zero,
    LocalAffine { a: f64 },
    DensityTracking { eta: f64, target: GaussianConfig },
    MomentQuadratic { a: f64, b: f64, alpha: f64 },
}

/// Inline problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    pub nu: f64,
    pub nu_n: f64,
    pub hamiltonian: HamiltonianConfig,
    pub interaction: InteractionConfig,
    pub terminal: TerminalConfig,
    pub rho0: GaussianConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemRef {
    Catalog(String),
    Inline(Box<InlineProblem>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_x: Vec<usize>,
    pub n_t: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Constant {
        delta: f64,
    },
    Diminishing {
        alpha: f64,
    },
    Btls {
        delta_init: f64,
        beta: f64,
        zeta: f64,
        n_max: usize,
    },
}

impl ScheduleConfig {
    pub fn to_schedule(&self) -> WeightSchedule {
        match *self {
            ScheduleConfig::Constant { delta } => WeightSchedule::Constant { delta },
            ScheduleConfig::Diminishing { alpha } => WeightSchedule::Diminishing { alpha },
            ScheduleConfig::Btls {
                delta_init,
                beta,
                zeta,
                n_max,
            } => WeightSchedule::Btls(BtlsParams {
                delta_init,
                beta,
                zeta,
                n_max,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    pub levels: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".to_string(),
            fields: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitConfig {
    /// Zero value function; the FP sweep produces the starting density.
    ZeroPhi,
    /// Initial density held constant in time, zero momentum.
    Rho0,
}

/// A run configuration as written by the user; optional fields fall back to
/// the catalog defaults of the named problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemRef,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<HierarchyConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

/// A fully-resolved configuration (every optional filled in). Serializing it
/// and re-parsing yields an equal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedConfig {
    pub problem: ProblemRef,
    pub grid: GridConfig,
    pub schedule: ScheduleConfig,
    pub epsilon: f64,
    pub k_max: usize,
    pub init: InitConfig,
    pub hierarchy: HierarchyConfig,
    pub newton_tol: f64,
    pub output: OutputConfig,
}

fn schedule_to_config(s: &WeightSchedule) -> ScheduleConfig {
    match *s {
        WeightSchedule::Constant { delta } => ScheduleConfig::Constant { delta },
        WeightSchedule::Diminishing { alpha } => ScheduleConfig::Diminishing { alpha },
        WeightSchedule::Btls(p) => ScheduleConfig::Btls {
            delta_init: p.delta_init,
            beta: p.beta,
            zeta: p.zeta,
            n_max: p.n_max,
        },
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).context("config does not match the schema")?;
        Ok(cfg)
    }

    /// Fill defaults (catalog defaults for catalog problems, schema defaults
    /// otherwise) and validate every numeric range.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let (grid_default, schedule_default, eps_default, kmax_default, levels_default, init_default) =
            match &self.problem {
                ProblemRef::Catalog(name) => {
                    let d = catalog::defaults(name)
                        .map_err(|e| anyhow!("{e}"))?;
                    let g = GridConfig {
                        n_x: (0..d.grid.dim()).map(|j| d.grid.axis(j).n_x).collect(),
                        n_t: d.grid.n_t(),
                        t_final: Some(d.grid.t_final()),
                    };
                    (
                        g,
                        schedule_to_config(&d.schedule),
                        d.epsilon,
                        d.k_max,
                        d.hierarchy_levels,
                        if d.init_zero_phi {
                            InitConfig::ZeroPhi
                        } else {
                            InitConfig::Rho0
                        },
                    )
                }
                ProblemRef::Inline(p) => {
                    if p.x_min.len() != p.x_max.len() || p.x_min.is_empty() || p.x_min.len() > 2 {
                        bail!("inline problem: domain must be 1- or 2-dimensional");
                    }
                    let dim = p.x_min.len();
                    let g = GridConfig {
                        n_x: vec![64; dim],
                        n_t: 16,
                        t_final: Some(1.0),
                    };
                    (
                        g,
                        ScheduleConfig::Constant { delta: 0.5 },
                        1e-8,
                        300,
                        0,
                        InitConfig::ZeroPhi,
                    )
                }
            };

        let resolved = ResolvedConfig {
            problem: self.problem.clone(),
            grid: self.grid.clone().unwrap_or(grid_default),
            schedule: self.schedule.clone().unwrap_or(schedule_default),
            epsilon: self.epsilon.unwrap_or(eps_default),
            k_max: self.k_max.unwrap_or(kmax_default),
            init: self.init.unwrap_or(init_default),
            hierarchy: self
                .hierarchy
                .clone()
                .unwrap_or(HierarchyConfig {
                    levels: levels_default,
                }),
            newton_tol: self.newton_tol.unwrap_or(1e-11),
            output: self.output.clone().unwrap_or_default(),
        };
        resolved.validate()?;
        Ok(resolved)
    }
}

impl ResolvedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            bail!("epsilon: must be positive, got {}", self.epsilon);
        }
        if self.k_max < 1 {
            bail!("k_max: must be at least 1");
        }
        if !(self.newton_tol > 0.0) {
            bail!("newton_tol: must be positive");
        }
        match &self.schedule {
            ScheduleConfig::Constant { delta } => {
                if !(*delta > 0.0 && *delta <= 1.0) {
                    bail!("schedule.delta: must be in (0, 1], got {delta}");
                }
            }
            ScheduleConfig::Diminishing { alpha } => {
                if !(*alpha > 0.0) {
                    bail!("schedule.alpha: must be positive, got {alpha}");
                }
            }
            ScheduleConfig::Btls {
                delta_init,
                beta,
                zeta,
                n_max,
            } => {
                if !(*delta_init > 0.0 && *delta_init <= 1.0) {
                    bail!("schedule.delta_init: must be in (0, 1], got {delta_init}");
                }
                if !(*beta > 0.0 && *beta < 1.0) {
                    bail!("schedule.beta: must be in (0, 1), got {beta}");
                }
                if !(*zeta > 0.0 && *zeta < 1.0) {
                    bail!("schedule.zeta: must be in (0, 1), got {zeta}");
                }
                if *n_max < 1 {
                    bail!("schedule.n_max: must be at least 1");
                }
            }
        }
        if self.grid.n_x.is_empty() || self.grid.n_x.len() > 2 {
            bail!("grid.n_x: one entry per dimension (1 or 2 supported)");
        }
        if self.grid.n_x.iter().any(|&n| n < 2) {
            bail!("grid.n_x: each entry must be at least 2");
        }
        if self.grid.n_t < 1 {
            bail!("grid.n_t: must be at least 1");
        }
        if let Some(t) = self.grid.t_final {
            if !(t > 0.0) {
                bail!("grid.t_final: must be positive");
            }
        }
        if let ProblemRef::Catalog(name) = &self.problem {
            if !catalog::CATALOG_NAMES.contains(&name.as_str()) {
                bail!(
                    "problem: unknown name '{name}'; valid names: {}",
                    catalog::CATALOG_NAMES.join(", ")
                );
            }
            let d = catalog::defaults(name).expect("known name");
            if d.grid.dim() != self.grid.n_x.len() {
                bail!(
                    "grid.n_x: {name} is {}-dimensional but n_x has {} entries",
                    d.grid.dim(),
                    self.grid.n_x.len()
                );
            }
        }
        if let ProblemRef::Inline(p) = &self.problem {
            if p.nu < 0.0 || p.nu_n < 0.0 {
                bail!("problem.nu / problem.nu_n: must be nonnegative");
            }
            if let HamiltonianConfig::Power { gamma, .. } = &p.hamiltonian {
                if !(*gamma > 1.0) {
                    bail!("problem.hamiltonian.gamma: must exceed 1, got {gamma}");
                }
            }
            if self.grid.n_x.len() != p.x_min.len() {
                bail!("grid.n_x: dimension mismatch with problem domain");
            }
        }
        Ok(())
    }

    /// Build the base grid (hierarchy level 0).
    pub fn base_grid(&self) -> Result<GridSpec> {
        let (x_min, x_max) = match &self.problem {
            ProblemRef::Catalog(name) => {
                let d = catalog::defaults(name).map_err(|e| anyhow!("{e}"))?;
                let mins: Vec<f64> = (0..d.grid.dim()).map(|j| d.grid.axis(j).x_min).collect();
                let maxs: Vec<f64> = (0..d.grid.dim()).map(|j| d.grid.axis(j).x_max).collect();
                (mins, maxs)
            }
            ProblemRef::Inline(p) => (p.x_min.clone(), p.x_max.clone()),
        };
        let t_final = self.grid.t_final.unwrap_or(1.0);
        let g = match self.grid.n_x.len() {
            1 => GridSpec::new_1d(x_min[0], x_max[0], self.grid.n_x[0], t_final, self.grid.n_t),
            2 => GridSpec::new_2d(
                [x_min[0], x_min[1]],
                [x_max[0], x_max[1]],
                [self.grid.n_x[0], self.grid.n_x[1]],
                t_final,
                self.grid.n_t,
            ),
            _ => bail!("unsupported dimension"),
        };
        Ok(g)
    }

    /// Instantiate the problem on a grid (re-samples costs; reads the grid
    /// level for level-dependent parameters).
    pub fn instantiate(&self, grid: &GridSpec) -> Result<ProblemSpec> {
        match &self.problem {
            ProblemRef::Catalog(name) => {
                catalog::instantiate(name, grid).map_err(|e| anyhow!("{e}"))
            }
            ProblemRef::Inline(p) => {
                let hamiltonian = match &p.hamiltonian {
                    HamiltonianConfig::Quadratic => Hamiltonian::Quadratic,
                    HamiltonianConfig::Power { gamma, h } => Hamiltonian::Power {
                        gamma: *gamma,
                        offset: h.sample(grid),
                    },
                };
                let interaction = match &p.interaction {
                    InteractionConfig::Zero => CostSpec::Zero,
                    InteractionConfig::LocalAffine { a, b } => CostSpec::LocalAffine {
                        a: *a,
                        b: b.sample(grid),
                    },
                    InteractionConfig::Smoothed { coeff } => CostSpec::Smoothed { coeff: *coeff },
                    InteractionConfig::ConvolutionGaussian { coeff, std } => {
                        if std.len() != grid.dim() || std.iter().any(|&s| s <= 0.0) {
                            bail!("problem.interaction.std: one positive entry per dimension");
                        }
                        let std = std.clone();
                        CostSpec::Convolution {
                            coeff: *coeff,
                            kernel: SampledKernel::sample(grid, move |x| {
                                (0..x.len())
                                    .map(|j| gaussian_pdf(x[j], 0.0, std[j]))
                                    .product()
                            }),
                        }
                    }
                    InteractionConfig::MomentQuadratic { a, b, alpha } => {
                        CostSpec::MomentQuadratic(MomentParams {
                            a: *a,
                            b: *b,
                            alpha: *alpha,
                        })
                    }
                    InteractionConfig::Obstacle { value, radius_sq } => CostSpec::Obstacle {
                        value: *value,
                        radius_sq: *radius_sq,
                    },
                };
                let terminal = match &p.terminal {
                    TerminalConfig::Zero => TerminalCost::Zero,
                    TerminalConfig::LocalAffine { a } => TerminalCost::LocalAffine { a: *a },
                    TerminalConfig::DensityTracking { eta, target } => {
                        TerminalCost::DensityTracking {
                            eta: *eta,
                            target: SpatialProfile::from_values(target.sample(grid)?),
                        }
                    }
                    TerminalConfig::MomentQuadratic { a, b, alpha } => {
                        TerminalCost::MomentQuadratic(MomentParams {
                            a: *a,
                            b: *b,
                            alpha: *alpha,
                        })
                    }
                };
                let rho0 = p.rho0.sample(grid)?;
                ProblemSpec::new(
                    grid.clone(),
                    hamiltonian,
                    interaction,
                    terminal,
                    rho0,
                    p.nu,
                    p.nu_n,
                    None,
                )
                .map_err(|e| anyhow!("{e}"))
            }
        }
    }

    pub fn echo_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing resolved config")
    }
}

/// Apply a `path.to.key=value` override onto a parsed TOML document.
pub fn apply_override(doc: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override '{spec}' is not of the form path=value"))?;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        bail!("override path '{path}' is empty or malformed");
    }
    let mut cur = doc;
    for part in &parts[..parts.len() - 1] {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| anyhow!("override path '{path}': '{part}' is not a table"))?;
        cur = table
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    let leaf = parts.last().unwrap();
    let value = if let Ok(b) = raw.parse::<bool>() {
        toml::Value::Boolean(b)
    } else if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else {
        toml::Value::String(raw.to_string())
    };
    cur.as_table_mut()
        .ok_or_else(|| anyhow!("override path '{path}' does not address a table"))?
        .insert(leaf.to_string(), value);
    Ok(())
}
