//! Reconstruction and convergence machinery checks.

use std::sync::Arc;

use rte_core::{
    build_time_grid, build_uniform_grid, convergence_study, directional_solution, solve,
    ConvergenceConfig, MediumModel, SolverChoice, SolverOptions, SourceModel,
};

fn keep_all() -> SolverOptions {
    SolverOptions {
        keep_all_levels: true,
        ..Default::default()
    }
}

#[test]
fn directional_solution_vanishes_without_sources() {
    let grid = build_uniform_grid(1.0 / 8.0).unwrap();
    let tg = build_time_grid(1.0, 1.0 / 8.0).unwrap();
    let medium = MediumModel::constant(5.2, 5.0, &grid).unwrap();
    let out = solve(&grid, &tg, &medium, &SourceModel::Zero, &keep_all()).unwrap();
    for (x, v, t) in [
        ([0.3, 0.4], [1.0, 0.0], 0.7),
        ([0.8, 0.2], [0.0, -1.0], 1.0),
    ] {
        let u = directional_solution(t, x, v, &out.history, &grid, &medium, &SourceModel::Zero)
            .unwrap();
        assert_eq!(u, 0.0);
    }
}

#[test]
fn directional_solution_vanishes_at_the_initial_time() {
    let grid = build_uniform_grid(1.0 / 8.0).unwrap();
    let tg = build_time_grid(1.0, 1.0 / 8.0).unwrap();
    let medium = MediumModel::constant(5.2, 5.0, &grid).unwrap();
    let source = SourceModel::Benchmark;
    let out = solve(&grid, &tg, &medium, &source, &keep_all()).unwrap();
    let u = directional_solution(
        0.0,
        [0.5, 0.5],
        [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
        &out.history,
        &grid,
        &medium,
        &source,
    )
    .unwrap();
    assert_eq!(u, 0.0);
}

#[test]
fn directional_solution_matches_a_finer_quadrature_without_scattering() {
    // With sigma_s = 0 the reconstruction integrand is E(x, x - r v)
    // f(t - r, x - r v); compare the ell/2 trapezoid against a 10x finer
    // one evaluated independently.
    let grid = build_uniform_grid(1.0 / 16.0).unwrap();
    let tg = build_time_grid(1.0, 1.0 / 16.0).unwrap();
    let medium = MediumModel::constant(5.2, 0.0, &grid).unwrap();
    let center = [0.5, 0.5];
    let source_fn = move |t: f64, x: [f64; 2]| {
        if t <= 0.0 {
            0.0
        } else {
            let dx = x[0] - center[0];
            let dy = x[1] - center[1];
            4.0 * t * t * (-10.0 * (dx * dx + dy * dy)).exp()
        }
    };
    let source = SourceModel::Custom(Arc::new(source_fn));
    let out = solve(&grid, &tg, &medium, &source, &keep_all()).unwrap();

    // The backward ray runs straight through the Gaussian bump, so the
    // ell/2 trapezoid resolves the integrand.
    let t = 0.8;
    let x = [0.8, 0.5];
    let v = [1.0, 0.0];
    let coarse =
        directional_solution(t, x, v, &out.history, &grid, &medium, &source).unwrap();

    let tau = rte_core::ray_exit_distance(x, v).unwrap();
    let n_sub = ((tau / (grid.cell_size() / 20.0)).ceil() as usize).max(1);
    let dr = tau / n_sub as f64;
    let integrand = |r: f64| {
        let y = [x[0] - r * v[0], x[1] - r * v[1]];
        let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        (-5.2 * d).exp() * source_fn(t - r, y)
    };
    let mut fine = 0.5 * (integrand(0.0) + integrand(tau));
    for i in 1..n_sub {
        fine += integrand(i as f64 * dr);
    }
    fine *= dr;

    let rel = (coarse - fine).abs() / fine.abs();
    assert!(
        rel < 1e-3,
        "reconstruction {coarse:.6e} vs fine quadrature {fine:.6e} (rel {rel:.2e})"
    );
}

#[test]
fn angular_average_of_reconstructions_consistent_with_the_march() {
    // Averaging directional reconstructions over 64 equispaced directions
    // re-derives the angular average through the other integral route;
    // agreement is limited by the angular and radial quadrature and the
    // scheme's own resolution.
    let grid = build_uniform_grid(1.0 / 24.0).unwrap();
    let tg = build_time_grid(1.0, 1.0 / 24.0).unwrap();
    let medium = MediumModel::constant(5.2, 5.0, &grid).unwrap();
    let source = SourceModel::Benchmark;
    let out = solve(&grid, &tg, &medium, &source, &keep_all()).unwrap();

    let p = grid.index(12, 12);
    let x = grid.point(p);
    let t = 1.0;
    let directions = 64;
    let mut avg = 0.0;
    for k in 0..directions {
        let phi = std::f64::consts::TAU * k as f64 / directions as f64;
        avg += directional_solution(
            t,
            x,
            [phi.cos(), phi.sin()],
            &out.history,
            &grid,
            &medium,
            &source,
        )
        .unwrap();
    }
    avg /= directions as f64;
    let marched = out.history.w(tg.num_steps()).unwrap()[p];
    let rel = (avg - marched).abs() / marched.abs();
    println!("angular-average consistency: reconstructed {avg:.6e} vs marched {marched:.6e} (rel {rel:.3e})");
    assert!(rel < 0.05, "angular consistency broke: rel {rel:.3e}");
}

#[test]
fn small_scale_convergence_study_behaves() {
    let config = ConvergenceConfig {
        base_points_per_side: 8,
        levels: vec![1, 2, 3],
        solver: SolverChoice::Treecode,
        order: 3,
        theta: 0.3,
        ..Default::default()
    };
    let study = convergence_study(&config).unwrap();
    assert_eq!(study.reference_level, 3);
    assert_eq!(study.rows.len(), 2);
    assert!(study.rows[0].error_l2 > study.rows[1].error_l2);
    assert!(study.slope > 0.0, "slope {}", study.slope);
    for row in &study.rows {
        assert!(row.error_l2.is_finite() && row.error_l2 > 0.0);
    }
}
