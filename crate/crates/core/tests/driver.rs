//! Fictitious-play driver tests: cost hand sums, gain cancellation,
//! averaging, weights, line-search behavior, equilibrium fixed-point
//! structure, and the convergence invariants on a desk-scale problem.

mod common;

use common::assert_close;
use mfg_core::grid::{grid_distance, grid_norm, GridSpec, ScalarField};
use mfg_core::hjb::NewtonOptions;
use mfg_core::play::{
    average_step, best_response, btls_select, compute_diagnostics, cost_j, gain, momentum_from,
    next_weight, run_fictitious_play, run_hierarchical, BtlsParams, HierarchySpec, Init,
    MomentumField, PlayState, VelocitySource, WeightSchedule,
};
use mfg_core::problem::{CostSpec, Hamiltonian, ProblemSpec, SpatialProfile, TerminalCost};
use mfg_core::{catalog, fp};

fn small_local_linear(n_x: usize, n_t: usize) -> ProblemSpec {
    let grid = GridSpec::new_1d(-5.0, 5.0, n_x, 1.0, n_t);
    catalog::instantiate("local-linear", &grid).unwrap()
}

#[test]
fn cost_hand_sum_tiny_instance() {
    // [0,1], n_x = 2 (dx = 0.5), n_t = 1 (dt = 1), quadratic H, f = rho,
    // f_T = rho. Explicit numbers summed by hand.
    let grid = GridSpec::new_1d(0.0, 1.0, 2, 1.0, 1);
    let problem = ProblemSpec::new(
        grid.clone(),
        Hamiltonian::Quadratic,
        CostSpec::LocalAffine {
            a: 1.0,
            b: SpatialProfile::from_values(vec![0.0; 3]),
        },
        TerminalCost::LocalAffine { a: 1.0 },
        vec![0.2, 0.5, 0.3],
        0.1,
        0.0,
        None,
    )
    .unwrap();
    let mut rho_tilde = ScalarField::zeros(&grid);
    rho_tilde.slice_mut(1).copy_from_slice(&[0.4, 0.8, 0.2]);
    let mut m = MomentumField::zeros(&problem);
    m.components[0]
        .slice_mut(1)
        .copy_from_slice(&[0.2, -0.4, 0.1]);
    let mut rho_ref = ScalarField::zeros(&grid);
    rho_ref.slice_mut(0).copy_from_slice(&[0.2, 0.5, 0.3]);
    rho_ref.slice_mut(1).copy_from_slice(&[0.3, 0.5, 0.1]);

    // v = m / rho = (0.5, -0.5, 0.5); L = v^2/2 = 0.125 each.
    // dynamic = 1 * 0.5 * (0.4 + 0.8 + 0.2) * 0.125 = 0.0875
    // interaction = 0.5 * (0.3*0.4 + 0.5*0.8 + 0.1*0.2) = 0.27
    // terminal = 0.5 * (0.3*0.4 + 0.5*0.8 + 0.1*0.2) = 0.27
    let want = 0.0875 + 0.27 + 0.27;
    let got = cost_j(
        &rho_tilde,
        VelocitySource::Momentum(&m),
        &rho_ref,
        &problem,
    )
    .unwrap();
    assert_close(got, want, 1e-13, "tiny cost hand sum");
}

#[test]
fn cost_of_zero_velocity_and_zero_costs_is_zero() {
    let problem = small_local_linear(16, 4);
    let zero_cost = ProblemSpec::new(
        problem.grid.clone(),
        Hamiltonian::Quadratic,
        CostSpec::Zero,
        TerminalCost::Zero,
        problem.rho0.clone(),
        0.1,
        0.0,
        None,
    )
    .unwrap();
    let rho = ScalarField::from_fn(&zero_cost.grid, |s, _| zero_cost.rho0[s]);
    let phi = ScalarField::constant(&zero_cost.grid, 1.0);
    let c = cost_j(&rho, VelocitySource::Phi(&phi), &rho, &zero_cost).unwrap();
    assert!(c.abs() < 1e-14);
}

#[test]
fn gain_cancels_exactly_when_state_is_the_best_response() {
    let problem = small_local_linear(64, 8);
    let rho_init = ScalarField::from_fn(&problem.grid, |s, _| problem.rho0[s]);
    let br = best_response(&problem, &rho_init, &NewtonOptions::default()).unwrap();
    // state := (rho_hat, m_hat); both cost routes must agree against the
    // same frozen reference.
    let state = PlayState {
        rho: br.rho.clone(),
        momentum: br.momentum.clone(),
        k: 1,
    };
    let via_m = cost_j(
        &state.rho,
        VelocitySource::Momentum(&state.momentum),
        &rho_init,
        &problem,
    )
    .unwrap();
    let via_phi = cost_j(&br.rho, VelocitySource::Phi(&br.phi), &rho_init, &problem).unwrap();
    assert!(
        (via_m - via_phi).abs() <= 1e-12 * via_phi.abs().max(1.0),
        "{via_m} vs {via_phi}"
    );
}

#[test]
fn momentum_is_consistent_with_phi_and_rho() {
    let problem = small_local_linear(48, 6);
    let rho_init = ScalarField::from_fn(&problem.grid, |s, _| problem.rho0[s]);
    let br = best_response(&problem, &rho_init, &NewtonOptions::default()).unwrap();
    let rebuilt = momentum_from(&problem, &br.rho, &br.phi).unwrap();
    for (a, b) in br.momentum.components[0]
        .data()
        .iter()
        .zip(rebuilt.components[0].data())
    {
        assert!((a - b).abs() < 1e-13);
    }
    // zero momentum wherever the density is (numerically) zero
    let rho_max = br.rho.max_abs();
    for (m, r) in br.momentum.components[0].data().iter().zip(br.rho.data()) {
        if r.abs() <= 1e-13 * rho_max {
            assert!(m.abs() <= 1e-9 * rho_max);
        }
    }
}

#[test]
fn average_step_hand_values_and_mass_linearity() {
    let problem = small_local_linear(8, 2);
    let grid = &problem.grid;
    let mk = |v: f64| ScalarField::constant(grid, v);
    let state = PlayState {
        rho: mk(1.0),
        momentum: MomentumField::zeros(&problem),
        k: 3,
    };
    let br = mfg_core::play::BestResponse {
        phi: mk(0.0),
        rho: mk(2.0),
        momentum: MomentumField::zeros(&problem),
        cost: 0.0,
    };
    let out = average_step(&state, &br, 0.5).unwrap();
    assert!(out.rho.data().iter().all(|&v| (v - 1.5).abs() < 1e-15));
    assert_eq!(out.k, 4);
    // delta = 1 replaces the state entirely
    let out1 = average_step(&state, &br, 1.0).unwrap();
    assert!(out1.rho.data().iter().all(|&v| (v - 2.0).abs() < 1e-15));
    // out-of-range weights rejected
    assert!(average_step(&state, &br, 0.0).is_err());
    assert!(average_step(&state, &br, 1.5).is_err());
    // mass after averaging is the convex combination of masses
    let m_state = fp::slice_mass(state.rho.slice(0), grid);
    let m_br = fp::slice_mass(br.rho.slice(0), grid);
    let m_out = fp::slice_mass(out.rho.slice(0), grid);
    assert_close(m_out, 0.5 * m_state + 0.5 * m_br, 1e-13, "mass average");
}

#[test]
fn weight_schedules() {
    let dim = WeightSchedule::Diminishing { alpha: 2.0 };
    assert_close(next_weight(&dim, 1).unwrap(), 2.0 / 3.0, 1e-15, "alpha 2, k 1");
    let mut prev = 1.0;
    let dim1 = WeightSchedule::Diminishing { alpha: 1.0 };
    for k in 1..200 {
        let w = next_weight(&dim1, k).unwrap();
        assert!(w < prev && w > 0.0);
        prev = w;
    }
    let cst = WeightSchedule::Constant { delta: 0.1 };
    for k in 1..10 {
        assert_eq!(next_weight(&cst, k), Some(0.1));
    }
    assert!(WeightSchedule::Constant { delta: 1.5 }.validate().is_err());
    assert!(WeightSchedule::Diminishing { alpha: -1.0 }.validate().is_err());
}

#[test]
fn btls_accepts_first_trial_when_cost_ignores_density() {
    // f independent of rho: D = 0 identically, so delta_init is accepted
    // after exactly one best-response solve, and best responses agree for
    // different inputs.
    let grid = GridSpec::new_1d(-1.0, 1.0, 48, 1.0, 8);
    let problem = ProblemSpec::new(
        grid.clone(),
        Hamiltonian::Quadratic,
        CostSpec::LocalAffine {
            a: 0.0,
            b: SpatialProfile::sample(&grid, |x| (x[0] * 3.0).sin()),
        },
        TerminalCost::Zero,
        (0..grid.n_space())
            .map(|s| mfg_core::problem::gaussian_pdf(grid.coords(s)[0], 0.0, 0.3))
            .collect(),
        0.1,
        0.5,
        None,
    )
    .unwrap();
    let opts = NewtonOptions::default();
    let rho_a = ScalarField::from_fn(&grid, |s, _| problem.rho0[s]);
    let rho_b = ScalarField::constant(&grid, 0.37);
    let br_a = best_response(&problem, &rho_a, &opts).unwrap();
    let br_b = best_response(&problem, &rho_b, &opts).unwrap();
    assert!(grid_distance(&br_a.rho, &br_b.rho).unwrap() < 1e-12);

    let state = PlayState {
        rho: rho_a,
        momentum: MomentumField::zeros(&problem),
        k: 0,
    };
    let g = gain(&state, &br_a, &problem).unwrap();
    assert!(g > 0.0, "gain should be positive away from equilibrium: {g}");
    let params = BtlsParams {
        delta_init: 1.0,
        beta: 0.5,
        zeta: 0.8,
        n_max: 10,
    };
    let out = btls_select(&state, &br_a, g, &params, &problem, &opts).unwrap();
    assert_eq!(out.trials, 1);
    assert_eq!(out.delta, 1.0);
    assert!(out.d.abs() < 1e-12);
    assert!(!out.saturated);
}

#[test]
fn run_converges_and_satisfies_invariants_on_local_linear() {
    // Desk-scale run with delta = 0.1: gain decays monotonically, stays
    // nonnegative to rounding, and the averaged mass never drifts.
    let problem = small_local_linear(200, 12);
    let schedule = WeightSchedule::Constant { delta: 0.1 };
    let res = run_fictitious_play(
        &problem,
        &schedule,
        1e-9,
        600,
        Init::Phi(ScalarField::zeros(&problem.grid)),
        None,
        &NewtonOptions::default(),
    )
    .unwrap();
    assert!(res.converged, "did not converge: {:?}", res.records.last().map(|r| r.gain));
    let cost_scale = 1.0_f64;
    for rec in &res.records {
        assert!(
            rec.gain >= -1e-8 * cost_scale.max(1.0),
            "negative gain at k = {}: {}",
            rec.k,
            rec.gain
        );
    }
    for pair in res.records.windows(2) {
        assert!(
            pair[1].gain <= pair[0].gain * (1.0 + 1e-10),
            "gain increased at k = {}: {} -> {}",
            pair[1].k,
            pair[0].gain,
            pair[1].gain
        );
    }
    let m0 = fp::slice_mass(&problem.rho0, &problem.grid);
    for n in 0..=problem.grid.n_t() {
        let m = fp::slice_mass(res.state.rho.slice(n), &problem.grid);
        assert!((m - m0).abs() <= 1e-9 * m0);
    }
    // the final record's residues are at the converged scale
    let last = res.records.last().unwrap();
    assert!(last.fp_residue < 1e-3);
    assert!(last.consec_residue < 1e-3);
}

#[test]
fn converged_state_is_a_fixed_point_of_the_best_response() {
    let problem = small_local_linear(200, 12);
    let res = run_fictitious_play(
        &problem,
        &WeightSchedule::Constant { delta: 0.5 },
        1e-12,
        400,
        Init::Phi(ScalarField::zeros(&problem.grid)),
        None,
        &NewtonOptions::default(),
    )
    .unwrap();
    assert!(res.converged);
    let br = best_response(&problem, &res.state.rho, &NewtonOptions::default()).unwrap();
    let dist = grid_distance(&br.rho, &res.state.rho).unwrap();
    let scale = grid_norm(&res.state.rho);
    assert!(
        dist <= 1e-4 * scale,
        "best response moved the equilibrium by {dist} (scale {scale})"
    );
}

#[test]
fn infinite_tolerance_stops_after_initial_diagnostics() {
    let problem = small_local_linear(32, 4);
    let res = run_fictitious_play(
        &problem,
        &WeightSchedule::Constant { delta: 0.5 },
        f64::INFINITY,
        100,
        Init::Phi(ScalarField::zeros(&problem.grid)),
        None,
        &NewtonOptions::default(),
    )
    .unwrap();
    assert!(res.converged);
    assert_eq!(res.records.len(), 1);
    assert!(res.records[0].delta.is_none());
}

#[test]
fn diagnostics_sentinel_on_degenerate_cosine() {
    let problem = small_local_linear(24, 3);
    let rho_init = ScalarField::from_fn(&problem.grid, |s, _| problem.rho0[s]);
    let br = best_response(&problem, &rho_init, &NewtonOptions::default()).unwrap();
    let state = PlayState {
        rho: rho_init.clone(),
        momentum: MomentumField::zeros(&problem),
        k: 0,
    };
    // reference equal to the state: zero denominator -> no cosine
    let rec = compute_diagnostics(&state, &br, &state, &br, &problem, Some(&rho_init)).unwrap();
    assert_eq!(rec.ref_error, Some(0.0));
    assert!(rec.cosine.is_none());
}

#[test]
fn hierarchy_with_zero_levels_matches_single_grid() {
    let base = GridSpec::new_1d(-5.0, 5.0, 128, 1.0, 8);
    let schedule = WeightSchedule::Constant { delta: 0.5 };
    let opts = NewtonOptions::default();
    let hier = run_hierarchical(
        &|g| catalog::instantiate("local-linear", g),
        &base,
        &HierarchySpec {
            levels: 0,
            epsilon: 1e-8,
            k_max: 200,
        },
        &schedule,
        ScalarField::zeros(&base),
        &opts,
    )
    .unwrap();
    let single = run_fictitious_play(
        &catalog::instantiate("local-linear", &base).unwrap(),
        &schedule,
        1e-8,
        200,
        Init::Phi(ScalarField::zeros(&base)),
        None,
        &opts,
    )
    .unwrap();
    assert_eq!(hier.levels.len(), 1);
    assert_eq!(hier.levels[0].records.len(), single.records.len());
    let d = grid_distance(&hier.state.rho, &single.state.rho).unwrap();
    assert!(d < 1e-14);
}
