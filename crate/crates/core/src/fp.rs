//! Discrete Fokker-Planck residual and the forward semi-implicit sweep.
//!
//! Each forward step solves
//! `[(1/dt) I - nu*Lap + D*∘(flux pair)] rho_{n+1} = rho_n / dt`
//! with the flux pair `(rho a+, rho a-)`, `a± = D_pH(D_x^c phi) ∓ nu_n`,
//! frozen at the previous time level of phi. The divergence columns sum to
//! zero, so the discrete mass `sum_i rho_{i,n}` is conserved exactly up to
//! solver tolerance.

use crate::error::{GridError, SolverError};
use crate::grid::{GridSpec, ScalarField, SidedPair};
use crate::hjb::solve_step_system;
use crate::ops;
use crate::problem::{lf_flux_velocities, ProblemSpec};

/// Per-dimension flux velocities `a± = D_pH(p̄) ∓ nu_n` on one phi slice.
fn flux_on_slice(
    phi_slice: &[f64],
    problem: &ProblemSpec,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, f64), GridError> {
    let grid = &problem.grid;
    let dim = grid.dim();
    let ns = grid.n_space();
    let pair = ops::one_sided_gradients(phi_slice, grid)?;
    let mut a_plus = vec![vec![0.0; ns]; dim];
    let mut a_minus = vec![vec![0.0; ns]; dim];
    let mut max_grad = 0.0_f64;
    let mut pr = [(0.0, 0.0); 2];
    let mut ap = [0.0; 2];
    let mut am = [0.0; 2];
    for s in 0..ns {
        for j in 0..dim {
            pr[j] = (pair.plus[j][s], pair.minus[j][s]);
        }
        lf_flux_velocities(
            &problem.hamiltonian,
            s,
            &pr[..dim],
            problem.nu_n,
            &mut ap[..dim],
            &mut am[..dim],
        );
        for j in 0..dim {
            a_plus[j][s] = ap[j];
            a_minus[j][s] = am[j];
            // a+ + a- = 2 D_pH_j
            max_grad = max_grad.max(0.5 * (ap[j] + am[j]).abs());
        }
    }
    Ok((a_plus, a_minus, max_grad))
}

/// Emit the implicit step matrix `(1/dt) I - nu*Lap + D*∘(a±)`.
fn for_each_step_entry(
    a_plus: &[Vec<f64>],
    a_minus: &[Vec<f64>],
    problem: &ProblemSpec,
    mut add: impl FnMut(usize, usize, f64),
) {
    let grid = &problem.grid;
    let dim = grid.dim();
    let ns = grid.n_space();
    let inv_dt = 1.0 / grid.dt();
    for s in 0..ns {
        add(s, s, inv_dt);
    }
    if problem.nu != 0.0 {
        for j in 0..dim {
            let stride = grid.stride(j);
            let points = grid.points(j);
            let c = problem.nu / (grid.dx(j) * grid.dx(j));
            for s in 0..ns {
                let i = (s / stride) % points;
                if i == 0 {
                    add(s, s, c);
                    add(s, s + stride, -c);
                } else if i + 1 == points {
                    add(s, s, c);
                    add(s, s - stride, -c);
                } else {
                    add(s, s, 2.0 * c);
                    add(s, s + stride, -c);
                    add(s, s - stride, -c);
                }
            }
        }
    }
    // Adjoint-divergence of the pair (rho a+, rho a-), acting on rho.
    for j in 0..dim {
        let stride = grid.stride(j);
        let points = grid.points(j);
        let half_inv_dx = 0.5 / grid.dx(j);
        let ap = &a_plus[j];
        let am = &a_minus[j];
        for s in 0..ns {
            let i = (s / stride) % points;
            if i == 0 {
                add(s, s, -ap[s] * half_inv_dx);
                add(s, s + stride, -am[s + stride] * half_inv_dx);
            } else if i + 1 == points {
                add(s, s, am[s] * half_inv_dx);
                add(s, s - stride, ap[s - stride] * half_inv_dx);
            } else {
                add(s, s - stride, ap[s - stride] * half_inv_dx);
                add(s, s, (am[s] - ap[s]) * half_inv_dx);
                add(s, s + stride, -am[s + stride] * half_inv_dx);
            }
        }
    }
}

/// Forward semi-implicit sweep: `rho_{.,0} = rho0`, each later slice solves
/// the implicit step system with the drift frozen at the previous phi slice.
pub fn fp_forward_sweep(phi: &ScalarField, problem: &ProblemSpec) -> Result<ScalarField, SolverError> {
    let grid = &problem.grid;
    if phi.grid() != grid {
        return Err(SolverError::Grid(GridError::GridMismatch));
    }
    let n_t = grid.n_t();
    let inv_dt = 1.0 / grid.dt();
    let mut rho = ScalarField::zeros(grid);
    rho.slice_mut(0).copy_from_slice(&problem.rho0);
    let mut nonneg_warned = false;
    for n in 0..n_t {
        let (a_plus, a_minus, max_grad) =
            flux_on_slice(phi.slice(n), problem).map_err(SolverError::Grid)?;
        let rhs: Vec<f64> = rho.slice(n).iter().map(|r| r * inv_dt).collect();
        let next = solve_step_system(grid, &rhs, |add| {
            for_each_step_entry(&a_plus, &a_minus, problem, |i, j, v| add(i, j, v))
        })
        .map_err(|source| SolverError::StepSolve {
            time_index: n,
            source,
        })?;
        // Monotone-regime nonnegativity monitor (warning only).
        if !nonneg_warned && problem.nu_n >= max_grad {
            let max = next.iter().fold(0.0_f64, |m, &v| m.max(v));
            let min = next.iter().fold(f64::INFINITY, |m, &v| m.min(v));
            if min < -1e-8 * max.max(1e-300) {
                log::warn!(
                    "density dipped to {min:.3e} at step {n} despite monotone dissipation"
                );
                nonneg_warned = true;
            }
        }
        rho.slice_mut(n + 1).copy_from_slice(&next);
    }
    if !rho.all_finite() {
        return Err(SolverError::StepSolve {
            time_index: n_t,
            source: crate::error::SolveError::IterativeFailure {
                residual: f64::NAN,
                iters: 0,
            },
        });
    }
    Ok(rho)
}

/// Full FP residual field. Slice 0 carries the initial row
/// `rho_{.,0} - rho0`; slice `n+1` carries the evolution row of step `n`.
pub fn fp_residual(
    rho: &ScalarField,
    phi: &ScalarField,
    problem: &ProblemSpec,
) -> Result<ScalarField, SolverError> {
    let grid = &problem.grid;
    if rho.grid() != grid || phi.grid() != grid {
        return Err(SolverError::Grid(GridError::GridMismatch));
    }
    let dim = grid.dim();
    let ns = grid.n_space();
    let n_t = grid.n_t();
    let inv_dt = 1.0 / grid.dt();
    let mut out = ScalarField::zeros(grid);
    {
        let r0 = out.slice_mut(0);
        for s in 0..ns {
            r0[s] = rho.slice(0)[s] - problem.rho0[s];
        }
    }
    for n in 0..n_t {
        let (a_plus, a_minus, _) = flux_on_slice(phi.slice(n), problem).map_err(SolverError::Grid)?;
        let cur = rho.slice(n);
        let next = rho.slice(n + 1);
        let lap = ops::laplacian(next, grid).map_err(SolverError::Grid)?;
        let mut pair = SidedPair::zeros(dim, ns);
        for j in 0..dim {
            for s in 0..ns {
                pair.plus[j][s] = next[s] * a_plus[j][s];
                pair.minus[j][s] = next[s] * a_minus[j][s];
            }
        }
        let div = ops::adjoint_divergence(&pair, grid).map_err(SolverError::Grid)?;
        let row = out.slice_mut(n + 1);
        for s in 0..ns {
            row[s] = (next[s] - cur[s]) * inv_dt - problem.nu * lap[s] + div[s];
        }
    }
    Ok(out)
}

/// Discrete mass of one slice with the per-axis dx weight.
pub fn slice_mass(rho_slice: &[f64], grid: &GridSpec) -> f64 {
    grid.cell_volume() * rho_slice.iter().sum::<f64>()
}
