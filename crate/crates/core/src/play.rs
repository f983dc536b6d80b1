//! Fictitious-play driver: best responses, the discrete control cost and
//! gain, averaging, weight schedules (constant, diminishing, backtracking
//! line search), per-iteration diagnostics, and the hierarchical-grid outer
//! loop.

use std::time::Instant;

use crate::error::{GridError, ProblemError, SolverError};
use crate::fp::{fp_forward_sweep, fp_residual};
use crate::grid::{grid_distance, grid_norm, inner_product, prolongate, ScalarField};
use crate::hjb::{hjb_sweep_frozen, NewtonOptions};
use crate::problem::ProblemSpec;

/// Relative density floor for momentum-to-velocity division inside the cost.
const RHO_FLOOR_REL: f64 = 1e-13;

/// Vector-valued momentum, one scalar field per spatial dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumField {
    pub components: Vec<ScalarField>,
}

impl MomentumField {
    pub fn zeros(problem: &ProblemSpec) -> Self {
        MomentumField {
            components: (0..problem.grid.dim())
                .map(|_| ScalarField::zeros(&problem.grid))
                .collect(),
        }
    }

    pub fn blend(&mut self, other: &MomentumField, delta: f64) {
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            a.blend(b, delta);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.max_abs()))
    }
}

/// The averaged iterate `(rho, m)` of fictitious play.
#[derive(Debug, Clone)]
pub struct PlayState {
    pub rho: ScalarField,
    pub momentum: MomentumField,
    pub k: usize,
}

/// A best response: value function, induced density, momentum, and the
/// control cost it attains against the density it responded to.
#[derive(Debug, Clone)]
pub struct BestResponse {
    pub phi: ScalarField,
    pub rho: ScalarField,
    pub momentum: MomentumField,
    pub cost: f64,
}

/// Interaction and terminal cost slices frozen at one density evolution.
#[derive(Debug, Clone)]
pub struct FrozenCosts {
    pub interaction: ScalarField,
    pub terminal: Vec<f64>,
}

impl FrozenCosts {
    pub fn evaluate(problem: &ProblemSpec, rho: &ScalarField) -> Result<Self, ProblemError> {
        let interaction = problem.interaction_field(rho)?;
        let terminal = problem.terminal_at(rho.slice(problem.grid.n_t()))?;
        Ok(FrozenCosts {
            interaction,
            terminal,
        })
    }
}

/// Momentum induced by a value function: `m_{.,n+1} = rho_{.,n+1} * vtilde`
/// with `vtilde = -D_pH(x, D_x^c phi)_{.,n}`; the slice at t = 0 is zero.
pub fn momentum_from(
    problem: &ProblemSpec,
    rho: &ScalarField,
    phi: &ScalarField,
) -> Result<MomentumField, ProblemError> {
    let grid = &problem.grid;
    let dim = grid.dim();
    let ns = grid.n_space();
    let mut m = MomentumField::zeros(problem);
    for n in 0..grid.n_t() {
        let drift = problem.drift(phi.slice(n))?;
        let rho_next = rho.slice(n + 1).to_vec();
        for j in 0..dim {
            let slice = m.components[j].slice_mut(n + 1);
            for s in 0..ns {
                slice[s] = rho_next[s] * drift[j][s];
            }
        }
    }
    Ok(m)
}

/// Cost of `(rho, phi)` against frozen cost slices; velocities come from
/// `phi` directly, with no density division.
pub fn cost_from_phi(
    rho: &ScalarField,
    phi: &ScalarField,
    costs: &FrozenCosts,
    problem: &ProblemSpec,
) -> Result<f64, ProblemError> {
    let grid = &problem.grid;
    let dim = grid.dim();
    let ns = grid.n_space();
    let w_st = grid.cell_volume() * grid.dt();
    let mut dynamic = 0.0;
    let mut interaction = 0.0;
    let mut v = [0.0; 2];
    for n in 0..grid.n_t() {
        let drift = problem.drift(phi.slice(n))?;
        let r = rho.slice(n + 1);
        let f = costs.interaction.slice(n + 1);
        for s in 0..ns {
            for j in 0..dim {
                v[j] = drift[j][s];
            }
            dynamic += r[s] * problem.hamiltonian.lagrangian(s, &v[..dim]);
            interaction += f[s] * r[s];
        }
    }
    let terminal: f64 = costs
        .terminal
        .iter()
        .zip(rho.slice(grid.n_t()))
        .map(|(f, r)| f * r)
        .sum();
    Ok(w_st * (dynamic + interaction) + grid.cell_volume() * terminal)
}

/// Cost of `(rho, m)` against frozen cost slices, with the floored
/// momentum-to-velocity division.
pub struct MomentumCost {
    pub value: f64,
    pub floored_points: usize,
}

pub fn cost_from_momentum(
    rho: &ScalarField,
    m: &MomentumField,
    costs: &FrozenCosts,
    problem: &ProblemSpec,
) -> MomentumCost {
    let grid = &problem.grid;
    let dim = grid.dim();
    let ns = grid.n_space();
    let w_st = grid.cell_volume() * grid.dt();
    let rho_max = rho.data().iter().fold(0.0_f64, |a, &b| a.max(b));
    let rho_floor = RHO_FLOOR_REL * rho_max.max(0.0);
    let m_floor = RHO_FLOOR_REL * m.max_abs();
    let mut dynamic = 0.0;
    let mut interaction = 0.0;
    let mut floored = 0usize;
    let mut v = [0.0; 2];
    for n in 0..grid.n_t() {
        let r = rho.slice(n + 1);
        let f = costs.interaction.slice(n + 1);
        for s in 0..ns {
            interaction += f[s] * r[s];
            // The floor guards the division where the density has vanished
            // to rounding; negative overshoots of larger magnitude are still
            // divided through so that m = rho * v cancels exactly.
            if r[s].abs() <= rho_floor {
                let small = (0..dim).all(|j| m.components[j].slice(n + 1)[s].abs() <= m_floor);
                if small {
                    continue;
                }
                floored += 1;
                for (vj, c) in v[..dim].iter_mut().zip(&m.components) {
                    *vj = c.slice(n + 1)[s] / rho_floor.max(f64::MIN_POSITIVE);
                }
                dynamic += rho_floor * problem.hamiltonian.lagrangian(s, &v[..dim]);
            } else {
                for (vj, c) in v[..dim].iter_mut().zip(&m.components) {
                    *vj = c.slice(n + 1)[s] / r[s];
                }
                dynamic += r[s] * problem.hamiltonian.lagrangian(s, &v[..dim]);
            }
        }
    }
    let terminal: f64 = costs
        .terminal
        .iter()
        .zip(rho.slice(grid.n_t()))
        .map(|(f, r)| f * r)
        .sum();
    MomentumCost {
        value: w_st * (dynamic + interaction) + grid.cell_volume() * terminal,
        floored_points: floored,
    }
}

/// Velocity source for the public cost entry point.
pub enum VelocitySource<'a> {
    Phi(&'a ScalarField),
    Momentum(&'a MomentumField),
}

/// `J(rho_tilde, source; rho_ref)`: dynamic + interaction + terminal cost
/// with the population terms frozen at `rho_ref`.
pub fn cost_j(
    rho_tilde: &ScalarField,
    source: VelocitySource,
    rho_ref: &ScalarField,
    problem: &ProblemSpec,
) -> Result<f64, ProblemError> {
    let costs = FrozenCosts::evaluate(problem, rho_ref)?;
    match source {
        VelocitySource::Phi(phi) => cost_from_phi(rho_tilde, phi, &costs, problem),
        VelocitySource::Momentum(m) => Ok(cost_from_momentum(rho_tilde, m, &costs, problem).value),
    }
}

pub(crate) fn best_response_frozen(
    problem: &ProblemSpec,
    costs: &FrozenCosts,
    opts: &NewtonOptions,
) -> Result<BestResponse, SolverError> {
    let phi = hjb_sweep_frozen(&costs.interaction, &costs.terminal, problem, opts)?;
    let rho = fp_forward_sweep(&phi, problem)?;
    let momentum = momentum_from(problem, &rho, &phi)?;
    let cost = cost_from_phi(&rho, &phi, costs, problem)?;
    Ok(BestResponse {
        phi,
        rho,
        momentum,
        cost,
    })
}

/// Best response to a frozen density: backward HJB sweep, forward FP sweep,
/// induced momentum, and the attained cost.
pub fn best_response(
    problem: &ProblemSpec,
    rho: &ScalarField,
    opts: &NewtonOptions,
) -> Result<BestResponse, SolverError> {
    let costs = FrozenCosts::evaluate(problem, rho)?;
    best_response_frozen(problem, &costs, opts)
}

fn gain_frozen(
    state: &PlayState,
    br: &BestResponse,
    costs: &FrozenCosts,
    problem: &ProblemSpec,
) -> f64 {
    cost_from_momentum(&state.rho, &state.momentum, costs, problem).value - br.cost
}

/// Gain of the best response at `state` (`br` must be the best response to
/// `state.rho`): the cost gap between the state and its best response.
pub fn gain(
    state: &PlayState,
    br: &BestResponse,
    problem: &ProblemSpec,
) -> Result<f64, ProblemError> {
    let costs = FrozenCosts::evaluate(problem, &state.rho)?;
    Ok(gain_frozen(state, br, &costs, problem))
}

/// Convex averaging step `rho <- (1-delta) rho + delta rho_hat`, same for
/// the momentum; increments the iteration counter.
pub fn average_step(
    state: &PlayState,
    br: &BestResponse,
    delta: f64,
) -> Result<PlayState, SolverError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(SolverError::WeightRange { delta });
    }
    let mut rho = state.rho.clone();
    rho.blend(&br.rho, delta);
    let mut momentum = state.momentum.clone();
    momentum.blend(&br.momentum, delta);
    Ok(PlayState {
        rho,
        momentum,
        k: state.k + 1,
    })
}

/// Back-tracking line search parameters.
#[derive(Debug, Clone, Copy)]
pub struct BtlsParams {
    pub delta_init: f64,
    pub beta: f64,
    pub zeta: f64,
    pub n_max: usize,
}

/// Weight schedules for the averaging step.
#[derive(Debug, Clone, Copy)]
pub enum WeightSchedule {
    Constant { delta: f64 },
    Diminishing { alpha: f64 },
    Btls(BtlsParams),
}

impl WeightSchedule {
    pub fn validate(&self) -> Result<(), SolverError> {
        match *self {
            WeightSchedule::Constant { delta } => {
                if !(delta > 0.0 && delta <= 1.0) {
                    return Err(SolverError::WeightRange { delta });
                }
            }
            WeightSchedule::Diminishing { alpha } => {
                if !(alpha > 0.0) {
                    return Err(SolverError::WeightRange { delta: alpha });
                }
            }
            WeightSchedule::Btls(p) => {
                if !(p.delta_init > 0.0 && p.delta_init <= 1.0) {
                    return Err(SolverError::WeightRange {
                        delta: p.delta_init,
                    });
                }
                if !(p.beta > 0.0 && p.beta < 1.0 && p.zeta > 0.0 && p.zeta < 1.0 && p.n_max >= 1)
                {
                    return Err(SolverError::WeightRange { delta: p.beta });
                }
            }
        }
        Ok(())
    }
}

/// Weight for iteration `k >= 1` under the constant or diminishing schedule.
pub fn next_weight(schedule: &WeightSchedule, k: usize) -> Option<f64> {
    match *schedule {
        WeightSchedule::Constant { delta } => Some(delta),
        WeightSchedule::Diminishing { alpha } => Some(alpha / (k as f64 + alpha)),
        WeightSchedule::Btls(_) => None,
    }
}

/// Accepted outcome of the back-tracking line search at one outer iteration.
pub struct BtlsOutcome {
    pub delta: f64,
    pub state: PlayState,
    pub best: BestResponse,
    pub costs: FrozenCosts,
    pub d: f64,
    pub trials: usize,
    pub saturated: bool,
}

/// The improvement gap `D = -<f(rho_prev) - f(rho_trial), rho_hat_k -
/// rho_hat_trial>_G`, extended by the matching terminal term when the
/// terminal cost depends on the density.
fn btls_gap(
    problem: &ProblemSpec,
    costs_prev: &FrozenCosts,
    costs_trial: &FrozenCosts,
    rho_hat_k: &ScalarField,
    rho_hat_trial: &ScalarField,
) -> f64 {
    let grid = &problem.grid;
    let w_st = grid.cell_volume() * grid.dt();
    let mut d = 0.0;
    for (((fp, ft), rk), rt) in costs_prev
        .interaction
        .data()
        .iter()
        .zip(costs_trial.interaction.data())
        .zip(rho_hat_k.data())
        .zip(rho_hat_trial.data())
    {
        d -= w_st * (fp - ft) * (rk - rt);
    }
    if problem.terminal.density_dependent() {
        let n_t = grid.n_t();
        for (((fp, ft), rk), rt) in costs_prev
            .terminal
            .iter()
            .zip(&costs_trial.terminal)
            .zip(rho_hat_k.slice(n_t))
            .zip(rho_hat_trial.slice(n_t))
        {
            d -= grid.cell_volume() * (fp - ft) * (rk - rt);
        }
    }
    d
}

fn btls_select_frozen(
    state_prev: &PlayState,
    costs_prev: &FrozenCosts,
    br_k: &BestResponse,
    g_prev: f64,
    params: &BtlsParams,
    problem: &ProblemSpec,
    opts: &NewtonOptions,
) -> Result<BtlsOutcome, SolverError> {
    let mut delta = params.delta_init;
    let mut saved: Option<BtlsOutcome> = None;
    for trial in 1..=params.n_max {
        let state = average_step(state_prev, br_k, delta)?;
        let costs = FrozenCosts::evaluate(problem, &state.rho)?;
        let best = best_response_frozen(problem, &costs, opts)?;
        let d = btls_gap(problem, costs_prev, &costs, &br_k.rho, &best.rho);
        if d <= params.zeta * delta * g_prev {
            return Ok(BtlsOutcome {
                delta,
                state,
                best,
                costs,
                d,
                trials: trial,
                saturated: false,
            });
        }
        saved = Some(BtlsOutcome {
            delta,
            state,
            best,
            costs,
            d,
            trials: trial,
            saturated: true,
        });
        delta *= params.beta;
    }
    Ok(saved.expect("n_max >= 1"))
}

/// Back-tracking line search: tries `delta_init, delta_init*beta, ...` and
/// accepts the first weight whose improvement gap satisfies
/// `D <= zeta * delta * g_prev`. The best response computed at the accepted
/// trial is returned for reuse by the next outer iteration. When all `n_max`
/// trials fail the smallest tried weight is returned with `saturated` set.
pub fn btls_select(
    state_prev: &PlayState,
    br_k: &BestResponse,
    g_prev: f64,
    params: &BtlsParams,
    problem: &ProblemSpec,
    opts: &NewtonOptions,
) -> Result<BtlsOutcome, SolverError> {
    let costs_prev = FrozenCosts::evaluate(problem, &state_prev.rho)?;
    btls_select_frozen(state_prev, &costs_prev, br_k, g_prev, params, problem, opts)
}

/// One row of the convergence log.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub k: usize,
    pub level: u32,
    /// Weight applied to reach this iterate; absent on the initial row.
    pub delta: Option<f64>,
    pub gain: f64,
    /// `||rho_hat_k - rho_{k-1}||_G`: distance from the previous state to
    /// its best response.
    pub consec_residue: f64,
    /// `||R_FP(rho_k, phi_hat_{k+1})||_G` at the current state.
    pub fp_residue: f64,
    pub ref_error: Option<f64>,
    pub cosine: Option<f64>,
    pub btls_trials: usize,
    pub btls_d: Option<f64>,
    pub btls_saturated: bool,
    pub wall_s: f64,
}

impl IterationRecord {
    fn blank() -> Self {
        IterationRecord {
            k: 0,
            level: 0,
            delta: None,
            gain: f64::NAN,
            consec_residue: f64::NAN,
            fp_residue: f64::NAN,
            ref_error: None,
            cosine: None,
            btls_trials: 0,
            btls_d: None,
            btls_saturated: false,
            wall_s: 0.0,
        }
    }
}

fn diagnostics_frozen(
    state_prev: &PlayState,
    br_k: &BestResponse,
    state_k: &PlayState,
    br_next: &BestResponse,
    costs_k: &FrozenCosts,
    problem: &ProblemSpec,
    reference: Option<&ScalarField>,
) -> Result<IterationRecord, SolverError> {
    let mut rec = IterationRecord::blank();
    rec.gain = gain_frozen(state_k, br_next, costs_k, problem);
    rec.consec_residue = grid_distance(&br_k.rho, &state_prev.rho).map_err(SolverError::Grid)?;
    rec.fp_residue = grid_norm(&fp_residual(&state_k.rho, &br_next.phi, problem)?);
    if let Some(rho_star) = reference {
        let mut err = state_k.rho.clone();
        for (e, r) in err.data_mut().iter_mut().zip(rho_star.data()) {
            *e -= r;
        }
        let mut hat_err = br_next.rho.clone();
        for (e, r) in hat_err.data_mut().iter_mut().zip(rho_star.data()) {
            *e -= r;
        }
        let en = grid_norm(&err);
        let hn = grid_norm(&hat_err);
        rec.ref_error = Some(en);
        rec.cosine = if en == 0.0 || hn == 0.0 {
            None
        } else {
            Some(inner_product(&err, &hat_err).map_err(SolverError::Grid)? / (en * hn))
        };
    }
    Ok(rec)
}

/// Diagnostics spanning one averaging step: consecutive residue from the
/// previous state and its best response, gain / FP residue / reference
/// comparisons from the current state and the best response computed at it.
pub fn compute_diagnostics(
    state_prev: &PlayState,
    br_k: &BestResponse,
    state_k: &PlayState,
    br_next: &BestResponse,
    problem: &ProblemSpec,
    reference: Option<&ScalarField>,
) -> Result<IterationRecord, SolverError> {
    let costs_k = FrozenCosts::evaluate(problem, &state_k.rho)?;
    diagnostics_frozen(
        state_prev, br_k, state_k, br_next, &costs_k, problem, reference,
    )
}

/// Initialization of the outer loop: a value function (the FP sweep then
/// produces the starting density and momentum) or a density evolution with
/// zero momentum.
pub enum Init {
    Phi(ScalarField),
    Rho(ScalarField),
}

fn initial_state(problem: &ProblemSpec, init: Init) -> Result<PlayState, SolverError> {
    match init {
        Init::Phi(phi0) => {
            if phi0.grid() != &problem.grid {
                return Err(SolverError::Grid(GridError::GridMismatch));
            }
            let rho = fp_forward_sweep(&phi0, problem)?;
            let momentum = momentum_from(problem, &rho, &phi0)?;
            Ok(PlayState {
                rho,
                momentum,
                k: 0,
            })
        }
        Init::Rho(rho) => {
            if rho.grid() != &problem.grid {
                return Err(SolverError::Grid(GridError::GridMismatch));
            }
            let momentum = MomentumField::zeros(problem);
            Ok(PlayState {
                rho,
                momentum,
                k: 0,
            })
        }
    }
}

/// Result of a single-grid fictitious-play run.
pub struct RunResult {
    pub state: PlayState,
    /// Best response at the final state (its value function is what gets
    /// prolongated and reported).
    pub best: BestResponse,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

/// Fictitious play on one grid: repeat best response, gain check, averaging
/// until `|g| <= epsilon` or `k_max` best responses have been computed.
///
/// One record is emitted per best response; each row pairs a state with the
/// best response computed at it.
pub fn run_fictitious_play(
    problem: &ProblemSpec,
    schedule: &WeightSchedule,
    epsilon: f64,
    k_max: usize,
    init: Init,
    reference: Option<&ScalarField>,
    opts: &NewtonOptions,
) -> Result<RunResult, SolverError> {
    schedule.validate()?;
    assert!(epsilon > 0.0, "epsilon must be positive");
    assert!(k_max >= 1);
    let at = |k: usize| move |e: SolverError| SolverError::AtIteration {
        iteration: k,
        source: Box::new(e),
    };

    let t0 = Instant::now();
    let mut state = initial_state(problem, init).map_err(at(1))?;
    let mut costs = FrozenCosts::evaluate(problem, &state.rho).map_err(|e| at(1)(e.into()))?;
    let mut br = best_response_frozen(problem, &costs, opts).map_err(at(1))?;

    let mut rec = diagnostics_frozen(&state, &br, &state, &br, &costs, problem, reference)
        .map_err(at(1))?;
    rec.k = 1;
    rec.level = problem.grid.level();
    rec.wall_s = t0.elapsed().as_secs_f64();
    let mut g = rec.gain;
    let mut records = vec![rec];
    let mut converged = g.abs() <= epsilon;

    let mut k = 1usize;
    while !converged && k < k_max {
        k += 1;
        let it0 = Instant::now();
        let (delta, new_state, new_costs, new_br, trials, d, saturated) = match schedule {
            WeightSchedule::Btls(params) => {
                let out = btls_select_frozen(&state, &costs, &br, g, params, problem, opts)
                    .map_err(at(k))?;
                (
                    out.delta,
                    out.state,
                    out.costs,
                    out.best,
                    out.trials,
                    Some(out.d),
                    out.saturated,
                )
            }
            _ => {
                let delta = next_weight(schedule, state.k + 1).expect("non-btls schedule");
                let new_state = average_step(&state, &br, delta).map_err(at(k))?;
                let new_costs = FrozenCosts::evaluate(problem, &new_state.rho)
                    .map_err(|e| at(k)(e.into()))?;
                let new_br = best_response_frozen(problem, &new_costs, opts).map_err(at(k))?;
                (delta, new_state, new_costs, new_br, 0, None, false)
            }
        };
        let mut rec = diagnostics_frozen(
            &state, &br, &new_state, &new_br, &new_costs, problem, reference,
        )
        .map_err(at(k))?;
        rec.k = k;
        rec.level = problem.grid.level();
        rec.delta = Some(delta);
        rec.btls_trials = trials;
        rec.btls_d = d;
        rec.btls_saturated = saturated;
        rec.wall_s = it0.elapsed().as_secs_f64();
        g = rec.gain;
        records.push(rec);
        state = new_state;
        costs = new_costs;
        br = new_br;
        converged = g.abs() <= epsilon;
    }
    Ok(RunResult {
        state,
        best: br,
        records,
        converged,
    })
}

/// Hierarchy controls: `levels` refinements above the base grid, target
/// accuracy `epsilon` on the finest level, `10^(levels - l) * epsilon` on
/// level `l`.
#[derive(Debug, Clone)]
pub struct HierarchySpec {
    pub levels: u32,
    pub epsilon: f64,
    pub k_max: usize,
}

/// Records and final density of one hierarchy level.
pub struct LevelRun {
    pub level: u32,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub final_rho: ScalarField,
}

/// Result of the coarse-to-fine outer loop.
pub struct HierarchicalResult {
    pub state: PlayState,
    pub best: BestResponse,
    pub levels: Vec<LevelRun>,
    pub final_problem: ProblemSpec,
}

/// Coarse-to-fine fictitious play. The problem family instantiates the
/// costs on each level's grid; the converged value function of each level,
/// prolongated, initializes the next. A level that exhausts `k_max`
/// proceeds to the next level with a warning.
pub fn run_hierarchical(
    family: &dyn Fn(&crate::grid::GridSpec) -> Result<ProblemSpec, ProblemError>,
    base: &crate::grid::GridSpec,
    hierarchy: &HierarchySpec,
    schedule: &WeightSchedule,
    phi0: ScalarField,
    opts: &NewtonOptions,
) -> Result<HierarchicalResult, SolverError> {
    let mut grid = base.clone();
    let mut init_phi = phi0;
    let mut levels = Vec::new();
    let mut last: Option<(RunResult, ProblemSpec)> = None;
    for l in 0..=hierarchy.levels {
        if l > 0 {
            grid = grid.refined();
            let prev_phi = &last.as_ref().expect("previous level ran").0.best.phi;
            init_phi = prolongate(prev_phi, &grid).map_err(SolverError::Grid)?;
        }
        let problem = family(&grid)?;
        let tol = 10f64.powi((hierarchy.levels - l) as i32) * hierarchy.epsilon;
        let reference = problem.reference.as_ref().map(|r| r.rho_field(&grid));
        let res = run_fictitious_play(
            &problem,
            schedule,
            tol,
            hierarchy.k_max,
            Init::Phi(init_phi.clone()),
            reference.as_ref(),
            opts,
        )?;
        if !res.converged {
            log::warn!(
                "hierarchy level {l} stopped at the iteration cap (gain {:.3e})",
                res.records.last().map(|r| r.gain).unwrap_or(f64::NAN)
            );
        }
        levels.push(LevelRun {
            level: grid.level(),
            records: res.records.clone(),
            converged: res.converged,
            final_rho: res.state.rho.clone(),
        });
        last = Some((res, problem));
    }
    let (res, problem) = last.expect("at least one level");
    Ok(HierarchicalResult {
        state: res.state,
        best: res.best,
        levels,
        final_problem: problem,
    })
}

/// Sampled reference density for problems carrying a closed-form solution.
pub fn reference_field(problem: &ProblemSpec) -> Option<ScalarField> {
    problem
        .reference
        .as_ref()
        .map(|r| r.rho_field(&problem.grid))
}
