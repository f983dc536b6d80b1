//! Discrete HJB residual and the backward-in-time Newton sweep.
//!
//! Each backward step solves the per-slice nonlinear system
//! `phi_n/dt - nu*Lap(phi_n) + H_LF(x, [D phi_n]) = phi_{n+1}/dt + f(x, rho_{n+1})`
//! with a damped Newton iteration; the Jacobian is the 3-point (1D) or
//! 5-point (2D) band `(1/dt) I - nu*Lap + dH/dp+ . D+ + dH/dp- . D-`.

use crate::error::{GridError, SolverError};
use crate::grid::{GridSpec, ScalarField};
use crate::linsolve::{solve_banded, solve_sparse, BandedMatrix, SparseMatrix, Triplets};
use crate::ops;
use crate::problem::{lf_hamiltonian, lf_partials, ProblemSpec};

/// Newton controls for the backward sweep.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Max-norm bound on the per-slice residual.
    pub tol_residual: f64,
    pub max_newton: usize,
    /// Smallest damping step before the iteration gives up.
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol_residual: 1e-11,
            max_newton: 50,
            min_step: 1.0 / (1 << 20) as f64,
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Residual of one backward step: unknown slice `phi_n` against `phi_next`
/// and the frozen cost slice.
pub fn step_residual(
    phi_n: &[f64],
    phi_next: &[f64],
    f_slice: &[f64],
    problem: &ProblemSpec,
) -> Result<Vec<f64>, GridError> {
    step_residual_dt(phi_n, phi_next, f_slice, problem, problem.grid.dt())
}

fn step_residual_dt(
    phi_n: &[f64],
    phi_next: &[f64],
    f_slice: &[f64],
    problem: &ProblemSpec,
    dt: f64,
) -> Result<Vec<f64>, GridError> {
    let grid = &problem.grid;
    let dim = grid.dim();
    let lap = ops::laplacian(phi_n, grid)?;
    let pair = ops::one_sided_gradients(phi_n, grid)?;
    let mut r = vec![0.0; grid.n_space()];
    let mut pr = [(0.0, 0.0); 2];
    for (s, out) in r.iter_mut().enumerate() {
        for j in 0..dim {
            pr[j] = (pair.plus[j][s], pair.minus[j][s]);
        }
        let hlf = lf_hamiltonian(&problem.hamiltonian, s, &pr[..dim], problem.nu_n);
        *out = (phi_n[s] - phi_next[s]) / dt - problem.nu * lap[s] + hlf - f_slice[s];
    }
    Ok(r)
}

/// Emit the Newton Jacobian entries at the current iterate.
fn for_each_jacobian_entry(
    phi_n: &[f64],
    problem: &ProblemSpec,
    mut add: impl FnMut(usize, usize, f64),
) -> Result<(), GridError> {
    for_each_jacobian_entry_dt(phi_n, problem, problem.grid.dt(), &mut add)
}

fn for_each_jacobian_entry_dt(
    phi_n: &[f64],
    problem: &ProblemSpec,
    dt: f64,
    add: &mut impl FnMut(usize, usize, f64),
) -> Result<(), GridError> {
    let grid = &problem.grid;
    let dim = grid.dim();
    let ns = grid.n_space();
    let inv_dt = 1.0 / dt;
    let pair = ops::one_sided_gradients(phi_n, grid)?;

    for s in 0..ns {
        add(s, s, inv_dt);
    }
    // -nu * Laplacian
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
    // LF advection: diag(dH/dp+_j) D_j^+ + diag(dH/dp-_j) D_j^-
    let mut pr = [(0.0, 0.0); 2];
    let mut dp = [0.0; 2];
    let mut dm = [0.0; 2];
    for s in 0..ns {
        for j in 0..dim {
            pr[j] = (pair.plus[j][s], pair.minus[j][s]);
        }
        lf_partials(
            &problem.hamiltonian,
            s,
            &pr[..dim],
            problem.nu_n,
            &mut dp[..dim],
            &mut dm[..dim],
        );
        for j in 0..dim {
            let stride = grid.stride(j);
            let points = grid.points(j);
            let i = (s / stride) % points;
            let inv_dx = 1.0 / grid.dx(j);
            if i + 1 < points {
                add(s, s, -dp[j] * inv_dx);
                add(s, s + stride, dp[j] * inv_dx);
            }
            if i > 0 {
                add(s, s, dm[j] * inv_dx);
                add(s, s - stride, -dm[j] * inv_dx);
            }
        }
    }
    Ok(())
}

/// Newton Jacobian of the per-slice residual map at `phi_n`, as summed
/// coordinate triplets.
pub fn newton_jacobian(
    phi_n: &[f64],
    problem: &ProblemSpec,
) -> Result<Vec<(usize, usize, f64)>, GridError> {
    let mut out = Vec::new();
    for_each_jacobian_entry(phi_n, problem, |i, j, v| out.push((i, j, v)))?;
    Ok(out)
}

/// Solve the linearized step system `J d = rhs`; banded in 1D, sparse in 2D.
pub(crate) fn solve_step_system(
    grid: &GridSpec,
    rhs: &[f64],
    emit: impl FnOnce(&mut dyn FnMut(usize, usize, f64)),
) -> Result<Vec<f64>, crate::error::SolveError> {
    let ns = grid.n_space();
    if grid.dim() == 1 {
        let mut m = BandedMatrix::zeros(ns, 1, 1);
        emit(&mut |i, j, v| m.add(i, j, v));
        solve_banded(&m, rhs)
    } else {
        let mut t = Triplets::new(ns);
        emit(&mut |i, j, v| t.push(i, j, v));
        let m = SparseMatrix::from_triplets(&t);
        solve_sparse(&m, rhs, 1e-12, 40 * ns)
    }
}

/// Damped Newton on one backward step of size `dt`, starting from `init`.
fn newton_attempt(
    init: Vec<f64>,
    phi_next: &[f64],
    f_slice: &[f64],
    problem: &ProblemSpec,
    dt: f64,
    tol: f64,
    opts: &NewtonOptions,
    time_index: usize,
) -> Result<Vec<f64>, SolverError> {
    let grid = &problem.grid;
    let mut phi = init;
    let mut r = step_residual_dt(&phi, phi_next, f_slice, problem, dt).map_err(SolverError::Grid)?;
    let mut rn = inf_norm(&r);
    for iter in 0..opts.max_newton {
        if rn <= tol {
            return Ok(phi);
        }
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let d = solve_step_system(grid, &neg_r, |add| {
            for_each_jacobian_entry_dt(&phi, problem, dt, &mut |i, j, v| add(i, j, v))
                .expect("checked shapes")
        })
        .map_err(|source| SolverError::StepSolve { time_index, source })?;

        // Halve the step while the max-norm residual does not decrease.
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = phi
                .iter()
                .zip(&d)
                .map(|(p, di)| p + step * di)
                .collect();
            let rt = step_residual_dt(&trial, phi_next, f_slice, problem, dt)
                .map_err(SolverError::Grid)?;
            let rtn = inf_norm(&rt);
            if rtn < rn {
                phi = trial;
                r = rt;
                rn = rtn;
                break;
            }
            step *= 0.5;
            if step < opts.min_step {
                return Err(SolverError::NewtonFailure {
                    time_index,
                    residual: rn,
                    iters: iter + 1,
                });
            }
        }
    }
    if rn <= tol {
        Ok(phi)
    } else {
        Err(SolverError::NewtonFailure {
            time_index,
            residual: rn,
            iters: opts.max_newton,
        })
    }
}

/// One backward step. Plain damped Newton from the adjacent-slice warm
/// start; if that stalls (stiff terminal data), the step is re-integrated in
/// substeps to build a better initial guess, and the full step is polished
/// from there so the returned slice satisfies the exact step residual.
fn newton_solve_slice(
    phi_next: &[f64],
    f_slice: &[f64],
    problem: &ProblemSpec,
    opts: &NewtonOptions,
    time_index: usize,
) -> Result<Vec<f64>, SolverError> {
    let dt = problem.grid.dt();
    let direct = newton_attempt(
        phi_next.to_vec(),
        phi_next,
        f_slice,
        problem,
        dt,
        opts.tol_residual,
        opts,
        time_index,
    );
    let first_err = match direct {
        Ok(phi) => return Ok(phi),
        Err(e @ SolverError::StepSolve { .. }) => return Err(e),
        Err(e) => e,
    };
    // Continuation: march the same step in substeps (a guess, solved
    // loosely), then solve the true step from the improved start.
    for m in [4usize, 16, 64] {
        let sub_dt = dt / m as f64;
        let sub_tol = (opts.tol_residual * 1e3).max(1e-9);
        let mut guess = phi_next.to_vec();
        let mut ok = true;
        for _ in 0..m {
            match newton_attempt(
                guess.clone(),
                &guess.clone(),
                f_slice,
                problem,
                sub_dt,
                sub_tol,
                opts,
                time_index,
            ) {
                Ok(next) => guess = next,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        if let Ok(phi) = newton_attempt(
            guess,
            phi_next,
            f_slice,
            problem,
            dt,
            opts.tol_residual,
            opts,
            time_index,
        ) {
            log::debug!("backward step {time_index} needed {m}-substep continuation");
            return Ok(phi);
        }
    }
    Err(first_err)
}

/// One backward step: solve for the slice preceding `phi_next`.
///
/// `rho_next` is the density slice driving the cost and `t_next` its time.
pub fn newton_time_step(
    phi_next: &[f64],
    rho_next: &[f64],
    t_next: f64,
    problem: &ProblemSpec,
    opts: &NewtonOptions,
) -> Result<Vec<f64>, SolverError> {
    let f_slice = problem.interaction_at(rho_next, t_next)?;
    newton_solve_slice(phi_next, &f_slice, problem, opts, 0)
}

/// Backward sweep against frozen cost slices (one interaction slice per time
/// level plus the terminal slice).
pub(crate) fn hjb_sweep_frozen(
    interaction: &ScalarField,
    terminal: &[f64],
    problem: &ProblemSpec,
    opts: &NewtonOptions,
) -> Result<ScalarField, SolverError> {
    let grid = &problem.grid;
    let n_t = grid.n_t();
    let mut phi = ScalarField::zeros(grid);
    phi.slice_mut(n_t).copy_from_slice(terminal);
    for n in (0..n_t).rev() {
        let next = phi.slice(n + 1).to_vec();
        let sol = newton_solve_slice(&next, interaction.slice(n + 1), problem, opts, n)?;
        phi.slice_mut(n).copy_from_slice(&sol);
    }
    if !phi.all_finite() {
        return Err(SolverError::NewtonFailure {
            time_index: 0,
            residual: f64::NAN,
            iters: 0,
        });
    }
    Ok(phi)
}

/// Solve the discretized HJB backward in time for the frozen density `rho`.
pub fn hjb_backward_sweep(
    rho: &ScalarField,
    problem: &ProblemSpec,
    opts: &NewtonOptions,
) -> Result<ScalarField, SolverError> {
    if rho.grid() != &problem.grid {
        return Err(SolverError::Grid(GridError::GridMismatch));
    }
    let interaction = problem.interaction_field(rho)?;
    let terminal = problem.terminal_at(rho.slice(problem.grid.n_t()))?;
    hjb_sweep_frozen(&interaction, &terminal, problem, opts)
}

/// Full HJB residual field: evolution rows at slices `n < n_t`, terminal row
/// `phi_{n_t} - f_T(rho_{n_t})` at the last slice.
pub fn hjb_residual(
    rho: &ScalarField,
    phi: &ScalarField,
    problem: &ProblemSpec,
) -> Result<ScalarField, SolverError> {
    let grid = &problem.grid;
    if rho.grid() != grid || phi.grid() != grid {
        return Err(SolverError::Grid(GridError::GridMismatch));
    }
    let n_t = grid.n_t();
    let mut out = ScalarField::zeros(grid);
    for n in 0..n_t {
        let f_slice = problem.interaction_at(rho.slice(n + 1), grid.time(n + 1))?;
        let r = step_residual(phi.slice(n), phi.slice(n + 1), &f_slice, problem)
            .map_err(SolverError::Grid)?;
        out.slice_mut(n).copy_from_slice(&r);
    }
    let ft = problem.terminal_at(rho.slice(n_t))?;
    let term: Vec<f64> = phi
        .slice(n_t)
        .iter()
        .zip(&ft)
        .map(|(p, f)| p - f)
        .collect();
    out.slice_mut(n_t).copy_from_slice(&term);
    Ok(out)
}

/// Max-norm of the residual field.
pub fn residual_max_norm(r: &ScalarField) -> f64 {
    r.max_abs()
}
