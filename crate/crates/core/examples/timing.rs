// probe: planning hierarchy end to end
fn main() {
    use mfg_core::grid::GridSpec;
    use mfg_core::grid::ScalarField;
    use mfg_core::hjb::NewtonOptions;
    use mfg_core::play::*;
    use mfg_core::problem::TerminalCost;
    use mfg_core::catalog;
    let t0 = std::time::Instant::now();
    let base = GridSpec::new_2d([-5.0, -5.0], [5.0, 5.0], [8, 8], 1.0, 2);
    let hier = run_hierarchical(
        &|g| catalog::instantiate("planning-obstacle", g), &base,
        &HierarchySpec { levels: 3, epsilon: 1e-6, k_max: 200 },
        &WeightSchedule::Constant { delta: 0.1 },
        ScalarField::zeros(&base), &NewtonOptions::default(),
    ).expect("hier");
    println!("wall {:.1}s", t0.elapsed().as_secs_f64());
    let mut grid = base.clone();
    for (l, level) in hier.levels.iter().enumerate() {
        if l > 0 { grid = grid.refined(); }
        let problem = catalog::instantiate("planning-obstacle", &grid).unwrap();
        let target = match &problem.terminal {
            TerminalCost::DensityTracking { target, .. } => target.values().to_vec(),
            _ => unreachable!(),
        };
        let rho_t = level.final_rho.slice(grid.n_t());
        let diff: Vec<f64> = rho_t.iter().zip(&target).map(|(a, b)| a - b).collect();
        let track = mfg_core::grid::slice_norm(&diff, &grid);
        let mut inside = 0.0; let mut total = 0.0;
        for (s, &r) in rho_t.iter().enumerate() {
            let c = grid.coords(s);
            let w = r * grid.cell_volume();
            total += w;
            if c[0]*c[0] + c[1]*c[1] <= 2.0 { inside += w; }
        }
        println!("level {l}: iters {} conv {} tracking {:.4} in-disk {:.5}",
            level.records.len(), level.converged, track, inside/total);
    }
}
