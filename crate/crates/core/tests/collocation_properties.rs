use fracspline::analysis::{example1_problem, example2_problem};
use fracspline::collocation::{assemble, collocation_grid, collocation_residual, solve, StackedOperator};
use fracspline::{CollocationConfig, Error, FractionalOrder, SplineDegree};
use proptest::prelude::*;

fn deg(n: u32) -> SplineDegree {
    SplineDegree::new(n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn dimension_law(n in 1u32..=5, j in 0u32..=5, extra in 0u32..=2, horizon in 1i64..=3) {
        let s = j + extra;
        match CollocationConfig::new(deg(n), j, Some(s), horizon) {
            Ok(cfg) => {
                let t = horizon as u64;
                prop_assert!((1u64 << s) * t + 1 >= (1u64 << j) * t + n as u64);
                let (rows, cols) = cfg.system_shape(2);
                prop_assert_eq!(rows, 2 * ((1usize << s) * horizon as usize + 1));
                prop_assert_eq!(cols, 2 * ((1usize << j) * horizon as usize + n as usize));
            }
            Err(Error::Solvability { .. }) => {
                let t = horizon as u64;
                prop_assert!((1u64 << s) * t + 1 < (1u64 << j) * t + n as u64);
            }
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }

    #[test]
    fn grid_shape(s in 0u32..=10, horizon in 1u32..=4) {
        let g = collocation_grid(s, horizon);
        prop_assert_eq!(g.len(), (1usize << s) * horizon as usize + 1);
        prop_assert_eq!(g[0], 0.0);
        prop_assert_eq!(*g.last().unwrap(), horizon as f64);
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn assembled_system_shape_for_example2() {
    let problem = example2_problem(FractionalOrder::new(0.5).unwrap());
    let cfg = CollocationConfig::new(deg(3), 8, None, 1).unwrap();
    let mats = assemble(&problem, &cfg).unwrap();
    let op = StackedOperator { mats: &mats, a: problem.matrix(), ic_weight: 1.0 };
    assert_eq!(op.shape(), (1026, 518));
    assert_eq!(op.to_dense().shape(), (1026, 518));
}

#[test]
fn initial_condition_fidelity() {
    for &g in &[0.1, 0.5, 1.0] {
        let problem = example2_problem(FractionalOrder::new(g).unwrap());
        let cfg = CollocationConfig::new(deg(3), 4, None, 1).unwrap();
        let sol = solve(&problem, &cfg).unwrap();
        let x0 = sol.evaluate(0.0).unwrap();
        let dev = (x0 - problem.initial_state()).amax();
        assert!(dev <= sol.residual_norm() + 1e-12, "γ = {g}: {dev} vs {}", sol.residual_norm());
    }
}

#[test]
fn example1_residual_at_nodes() {
    let problem = example1_problem(FractionalOrder::new(0.5).unwrap());
    let cfg = CollocationConfig::new(deg(3), 5, None, 1).unwrap();
    let sol = solve(&problem, &cfg).unwrap();
    assert!(sol.evaluate(0.0).unwrap()[0].abs() <= 1e-12);
    for &t in &collocation_grid(cfg.colloc_level(), 1)[1..] {
        let r = collocation_residual(&sol, &problem, t).unwrap();
        assert!(r[0].abs() <= 1e-10, "t = {t}: {}", r[0]);
    }
    let mid = collocation_residual(&sol, &problem, 1.0 / 128.0).unwrap();
    assert!(mid[0].is_finite());
}

#[test]
fn repeated_solves_are_bit_identical() {
    let problem = example2_problem(FractionalOrder::new(0.3).unwrap());
    let cfg = CollocationConfig::new(deg(4), 5, None, 1).unwrap();
    let a = solve(&problem, &cfg).unwrap();
    let b = solve(&problem, &cfg).unwrap();
    assert_eq!(a.coefficients().as_slice(), b.coefficients().as_slice());
}

#[test]
fn stacked_systems_are_far_from_rank_deficient() {
    let mut worst = f64::INFINITY;
    for &g in &[0.1, 0.25, 0.5, 0.75, 1.0] {
        let order = FractionalOrder::new(g).unwrap();
        for n in [3, 4] {
            for j in 2..=7 {
                let cfg = CollocationConfig::new(deg(n), j, None, 1).unwrap();
                let sol = solve(&example2_problem(order), &cfg).unwrap();
                worst = worst.min(sol.diagonal_ratio());
            }
        }
        let cfg = CollocationConfig::new(deg(3), 7, None, 1).unwrap();
        worst = worst.min(solve(&example1_problem(order), &cfg).unwrap().diagonal_ratio());
    }
    println!("smallest |R_kk|/|R_00|: {worst:e}");
    assert!(worst > 1e-8, "{worst:e}");
}
