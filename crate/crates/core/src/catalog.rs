//! Built-in experiment catalog.
//!
//! Each entry is a problem family: it can be instantiated on any grid (costs
//! are re-sampled per grid, and level-dependent parameters read the grid's
//! hierarchy level). Names are stable CLI-facing identifiers.

use std::f64::consts::PI;

use crate::error::ProblemError;
use crate::grid::GridSpec;
use crate::play::{BtlsParams, WeightSchedule};
use crate::problem::{
    gaussian_pdf, AnalyticReference, CostSpec, Hamiltonian, MomentParams, ProblemSpec,
    SampledKernel, SpatialProfile, TerminalCost,
};

/// Stable catalog names.
pub const CATALOG_NAMES: [&str; 7] = [
    "fixpoint-div",
    "local-linear",
    "nonpot-2d",
    "power-nonlocal",
    "gauss-firstorder",
    "gauss-viscous",
    "planning-obstacle",
];

/// One-line description per catalog entry.
pub fn describe(name: &str) -> Option<&'static str> {
    match name {
        "fixpoint-div" => Some(
            "local cost rho + exp(sin 2 pi x) on [0,1]; shows fixed-point iteration oscillating",
        ),
        "local-linear" => Some(
            "quadratic Hamiltonian with local cost f = rho on [-5,5]; linear-rate baseline",
        ),
        "nonpot-2d" => Some(
            "2D anisotropic Gaussian convolution cost with density-tracking terminal on [-5,5]^2",
        ),
        "power-nonlocal" => Some(
            "power Hamiltonian (gamma 1.5) with smoothed cost 100 (I-Lap)^-2 rho on [-1,1]",
        ),
        "gauss-firstorder" => Some(
            "first-order moving-Gaussian problem (nu = 0) with closed-form solution; hierarchy stabilizes it",
        ),
        "gauss-viscous" => Some(
            "viscous moving-Gaussian problem (nu = 0.1) with closed-form solution; hierarchy accelerates it",
        ),
        "planning-obstacle" => Some(
            "2D planning between Gaussians around a disk obstacle via terminal penalization",
        ),
        _ => None,
    }
}

/// Default run controls for an experiment at desk scale.
#[derive(Debug, Clone)]
pub struct RunDefaults {
    pub grid: GridSpec,
    pub schedule: WeightSchedule,
    pub epsilon: f64,
    pub k_max: usize,
    /// Refinement levels above the base grid; 0 means single-grid.
    pub hierarchy_levels: u32,
    /// Initialize from a zero value function (otherwise from the initial
    /// density held constant in time).
    pub init_zero_phi: bool,
}

fn gaussian_profile_1d(grid: &GridSpec, mean: f64, std: f64) -> Vec<f64> {
    (0..grid.n_space())
        .map(|s| gaussian_pdf(grid.coords(s)[0], mean, std))
        .collect()
}

fn gaussian_profile_2d(grid: &GridSpec, mean: [f64; 2], std: [f64; 2]) -> Vec<f64> {
    (0..grid.n_space())
        .map(|s| {
            let c = grid.coords(s);
            gaussian_pdf(c[0], mean[0], std[0]) * gaussian_pdf(c[1], mean[1], std[1])
        })
        .collect()
}

fn unknown(name: &str) -> ProblemError {
    ProblemError::UnknownName {
        name: name.to_string(),
        valid: CATALOG_NAMES.join(", "),
    }
}

/// Instantiate a catalog problem on the given grid.
pub fn instantiate(name: &str, grid: &GridSpec) -> Result<ProblemSpec, ProblemError> {
    match name {
        "fixpoint-div" => ProblemSpec::new(
            grid.clone(),
            Hamiltonian::Quadratic,
            CostSpec::LocalAffine {
                a: 1.0,
                b: SpatialProfile::sample(grid, |x| (2.0 * PI * x[0]).sin().exp()),
            },
            TerminalCost::Zero,
            gaussian_profile_1d(grid, 0.5, 0.2),
            0.1,
            1.0,
            None,
        ),
        "local-linear" => ProblemSpec::new(
            grid.clone(),
            Hamiltonian::Quadratic,
            CostSpec::LocalAffine {
                a: 1.0,
                b: SpatialProfile::from_values(vec![0.0; grid.n_space()]),
            },
            TerminalCost::Zero,
            gaussian_profile_1d(grid, 0.0, 0.5),
            0.1,
            1.0,
            None,
        ),
        "nonpot-2d" => {
            let kernel = SampledKernel::sample(grid, |x| {
                gaussian_pdf(x[0], 0.0, 4.0) * gaussian_pdf(x[1], 0.0, 0.5)
            });
            let target = SpatialProfile::from_values(gaussian_profile_2d(
                grid,
                [2.0, 2.0],
                [1.0, 0.5],
            ));
            ProblemSpec::new(
                grid.clone(),
                Hamiltonian::Quadratic,
                CostSpec::Convolution {
                    coeff: 10.0,
                    kernel,
                },
                TerminalCost::DensityTracking {
                    eta: 150.0,
                    target,
                },
                gaussian_profile_2d(grid, [-2.0, -2.0], [1.0, 0.5]),
                1.0,
                0.0,
                None,
            )
        }
        "power-nonlocal" => ProblemSpec::new(
            grid.clone(),
            Hamiltonian::Power {
                gamma: 1.5,
                offset: SpatialProfile::sample(grid, |x| -(2.0 * PI * x[0]).sin()),
            },
            CostSpec::Smoothed { coeff: 100.0 },
            TerminalCost::LocalAffine { a: 1.0 },
            gaussian_profile_1d(grid, 0.0, 0.1),
            0.1,
            0.0,
            None,
        ),
        "gauss-firstorder" => {
            let p = MomentParams {
                a: 0.0,
                b: 0.5,
                alpha: -0.1,
            };
            let reference = AnalyticReference {
                a: p.a,
                b: p.b,
                c: -0.25,
                sigma0: 0.5,
                alpha: p.alpha,
                nu: 0.0,
            };
            ProblemSpec::new(
                grid.clone(),
                Hamiltonian::Quadratic,
                CostSpec::MomentQuadratic(p),
                TerminalCost::MomentQuadratic(p),
                gaussian_profile_1d(grid, reference.c, reference.sigma0),
                0.0,
                1.0,
                Some(reference),
            )
        }
        "gauss-viscous" => {
            let p = MomentParams {
                a: 6.0,
                b: -5.0,
                alpha: -0.5,
            };
            let reference = AnalyticReference {
                a: p.a,
                b: p.b,
                c: 0.0,
                sigma0: 1.0,
                alpha: p.alpha,
                nu: 0.1,
            };
            ProblemSpec::new(
                grid.clone(),
                Hamiltonian::Quadratic,
                CostSpec::MomentQuadratic(p),
                TerminalCost::MomentQuadratic(p),
                gaussian_profile_1d(grid, reference.c, reference.sigma0),
                0.1,
                0.0,
                Some(reference),
            )
        }
        "planning-obstacle" => {
            let eta = 50.0 * (grid.level() + 1) as f64;
            let target = SpatialProfile::from_values(gaussian_profile_2d(
                grid,
                [3.0, 3.0],
                [0.5, 0.5],
            ));
            ProblemSpec::new(
                grid.clone(),
                Hamiltonian::Quadratic,
                CostSpec::Obstacle {
                    value: 2.0 * eta,
                    radius_sq: 2.0,
                },
                TerminalCost::DensityTracking { eta, target },
                gaussian_profile_2d(grid, [-3.0, -3.0], [0.5, 0.5]),
                1.0,
                1.0,
                None,
            )
        }
        other => Err(unknown(other)),
    }
}

/// Desk-scale defaults per experiment: grid, schedule, tolerance, iteration
/// cap, hierarchy depth, and initialization kind.
pub fn defaults(name: &str) -> Result<RunDefaults, ProblemError> {
    let d = match name {
        "fixpoint-div" => RunDefaults {
            grid: GridSpec::new_1d(0.0, 1.0, 256, 1.0, 32),
            schedule: WeightSchedule::Constant { delta: 0.5 },
            epsilon: 1e-12,
            k_max: 300,
            hierarchy_levels: 0,
            init_zero_phi: true,
        },
        "local-linear" => RunDefaults {
            grid: GridSpec::new_1d(-5.0, 5.0, 1000, 1.0, 30),
            schedule: WeightSchedule::Constant { delta: 0.5 },
            epsilon: 1e-10,
            k_max: 300,
            hierarchy_levels: 0,
            init_zero_phi: true,
        },
        "nonpot-2d" => RunDefaults {
            grid: GridSpec::new_2d([-5.0, -5.0], [5.0, 5.0], [32, 32], 1.0, 4),
            schedule: WeightSchedule::Constant { delta: 0.1 },
            epsilon: 1e-6,
            k_max: 400,
            hierarchy_levels: 0,
            init_zero_phi: true,
        },
        "power-nonlocal" => RunDefaults {
            grid: GridSpec::new_1d(-1.0, 1.0, 500, 1.0, 100),
            schedule: WeightSchedule::Btls(BtlsParams {
                delta_init: 1.0,
                beta: 0.5,
                zeta: 0.8,
                n_max: 30,
            }),
            epsilon: 1e-8,
            k_max: 500,
            hierarchy_levels: 0,
            init_zero_phi: true,
        },
        "gauss-firstorder" => RunDefaults {
            grid: GridSpec::new_1d(-5.0, 5.0, 512, 1.0, 16),
            schedule: WeightSchedule::Constant { delta: 0.1 },
            epsilon: 1e-6,
            k_max: 1000,
            hierarchy_levels: 3,
            init_zero_phi: true,
        },
        "gauss-viscous" => RunDefaults {
            grid: GridSpec::new_1d(-5.0, 5.0, 1024, 1.0, 64),
            schedule: WeightSchedule::Constant { delta: 0.25 },
            epsilon: 1e-6,
            k_max: 600,
            hierarchy_levels: 0,
            init_zero_phi: false,
        },
        "planning-obstacle" => RunDefaults {
            grid: GridSpec::new_2d([-5.0, -5.0], [5.0, 5.0], [8, 8], 1.0, 2),
            schedule: WeightSchedule::Constant { delta: 0.1 },
            epsilon: 1e-6,
            k_max: 200,
            hierarchy_levels: 3,
            init_zero_phi: true,
        },
        other => return Err(unknown(other)),
    };
    Ok(d)
}
