mod common;

use common::bundled;
use mfgkit_core::bsk::FixedPointOptions;
use mfgkit_core::hjb::{
    backward_hjb, exploitability, forward_kfe, hamiltonian_residual, policy_value,
    solve_mf_control_simplex_dp, solve_mfg_fixed_point, time_grid, PlannerProblem, SimplexGrid,
};
use mfgkit_core::{
    Error, Horizon, KernelMode, MeanFieldTrajectory, PairwisePayoff, PayoffSpec, PolicyTrajectory,
    Scenario, Simplex, StateSpace, TransitionKernelSpec,
};

/// Two states, actions "stay"/"move"; moving jumps at `rate`.
fn two_state(rate: f64, running: [[f64; 2]; 2], terminal: [f64; 2], end: f64) -> Scenario {
    let table = vec![vec![
        vec![vec![0.0, 0.0], vec![-rate, rate]],
        vec![vec![0.0, 0.0], vec![rate, -rate]],
    ]];
    Scenario::single_type(
        "two-state",
        StateSpace::simple(&["a", "b"], &["stay", "move"]).unwrap(),
        TransitionKernelSpec::from_table(KernelMode::ContinuousRate, table).unwrap(),
        PayoffSpec::from_tables(
            vec![running.iter().map(|r| r.to_vec()).collect()],
            vec![terminal.to_vec()],
        ),
        Horizon::Continuous { end, step: 1e-3 },
        Simplex::new(vec![0.7, 0.3]).unwrap(),
    )
    .unwrap()
}

fn constant(s: &Scenario, dt: f64) -> MeanFieldTrajectory<f64> {
    MeanFieldTrajectory::constant(time_grid(s, dt).unwrap(), s.m0.clone()).unwrap()
}

#[test]
fn no_dynamics_no_running_payoff_keeps_terminal() {
    let s = two_state(0.0, [[0.0; 2]; 2], [2.0, -1.0], 1.0);
    let (v, _) = backward_hjb(&s, &constant(&s, 1e-2), 1e-2).unwrap();
    for k in 0..v.len() {
        assert_eq!(v.at(k)[0], vec![2.0, -1.0]);
    }
}

#[test]
fn unit_running_payoff_integrates_time() {
    let s = two_state(0.0, [[1.0; 2]; 2], [2.0, -1.0], 1.0);
    let dt = 1e-2;
    let (v, _) = backward_hjb(&s, &constant(&s, dt), dt).unwrap();
    for k in 0..v.len() {
        let left = 1.0 - k as f64 * dt;
        assert!((v.get(k, 0, 0) - (2.0 + left)).abs() < 1e-12);
        assert!((v.get(k, 0, 1) - (-1.0 + left)).abs() < 1e-12);
    }
}

/// Independent oracle: explicit midpoint rule on a fine grid with per-substep maximization.
fn fine_grid_values(rate: f64, running: [[f64; 2]; 2], terminal: [f64; 2], end: f64, h: f64) -> [f64; 2] {
    let rhs = |v: [f64; 2]| -> [f64; 2] {
        let mut out = [0.0; 2];
        for x in 0..2 {
            let other = 1 - x;
            let stay = running[x][0];
            let mv = running[x][1] + rate * (v[other] - v[x]);
            out[x] = stay.max(mv);
        }
        out
    };
    let steps = (end / h).round() as usize;
    let mut v = terminal;
    for _ in 0..steps {
        let k1 = rhs(v);
        let mid = [v[0] + 0.5 * h * k1[0], v[1] + 0.5 * h * k1[1]];
        let k2 = rhs(mid);
        v = [v[0] + h * k2[0], v[1] + h * k2[1]];
    }
    v
}

#[test]
fn matches_fine_grid_oracle() {
    let running = [[0.0, -0.3], [0.5, 0.2]];
    let terminal = [0.0, 1.0];
    let s = two_state(1.0, running, terminal, 1.0);
    let dt = 1e-3;
    let (v, u) = backward_hjb(&s, &constant(&s, dt), dt).unwrap();
    let oracle = fine_grid_values(1.0, running, terminal, 1.0, 1e-5);
    for x in 0..2 {
        assert!((v.get(0, 0, x) - oracle[x]).abs() < 1e-6, "{} vs {}", v.get(0, 0, x), oracle[x]);
    }
    // near the horizon leaving a pays and leaving b does not
    assert_eq!(u.dist(u.len() - 1, 0, 0), &[0.0, 1.0]);
    assert_eq!(u.dist(u.len() - 1, 0, 1), &[1.0, 0.0]);
}

#[test]
fn forward_equation_closed_form() {
    let s = two_state(1.0, [[0.0; 2]; 2], [0.0; 2], 1.0);
    let dt = 1e-3;
    let grid = time_grid(&s, dt).unwrap();
    let n = grid.len() - 1;
    // always move from a, stay in b: one-way flow at unit rate
    let u = PolicyTrajectory::pure(&s.space, &vec![vec![vec![1, 0]]; n]);
    let m = forward_kfe(&s, &u, &s.m0, dt).unwrap();
    for (k, &t) in grid.iter().enumerate() {
        let exact = 0.7 * (-t).exp();
        assert!((m.profile(k, 0).get(0) - exact).abs() < 1e-9);
    }
    let frozen = two_state(0.0, [[0.0; 2]; 2], [0.0; 2], 1.0);
    let m = forward_kfe(&frozen, &u, &frozen.m0, dt).unwrap();
    assert_eq!(m.last()[0], frozen.m0[0]);
}

#[test]
fn forward_equation_conserves_mass_over_long_horizons() {
    let s = bundled("rps.toml");
    let dt = 1e-3;
    let n = time_grid(&s, dt).unwrap().len() - 1;
    let u = PolicyTrajectory::uniform(&s.space, n);
    let m = forward_kfe(&s, &u, &s.m0, dt).unwrap();
    for k in (0..m.len()).step_by(97) {
        let sum: f64 = m.profile(k, 0).as_slice().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn explicit_drift_is_used_and_checked() {
    let s = two_state(1.0, [[0.0; 2]; 2], [0.0; 2], 1.0);
    let generator = s.clone();
    let with = s
        .clone()
        .with_drift(move |t, ty, policy, m| generator.generator_drift(t, ty, policy, m))
        .unwrap();
    let dt = 1e-2;
    let u = PolicyTrajectory::uniform(&s.space, 100);
    assert_eq!(
        forward_kfe(&s, &u, &s.m0, dt).unwrap(),
        forward_kfe(&with, &u, &s.m0, dt).unwrap()
    );
    let bad = s.with_drift(|_, _, _, _| vec![0.1, -0.1]);
    assert!(matches!(bad, Err(Error::DriftGeneratorMismatch { .. })));
}

#[test]
fn mean_field_free_game_converges_immediately() {
    let s = two_state(1.0, [[0.0, -0.3], [0.5, 0.2]], [0.0, 1.0], 1.0);
    let dt = 1e-3;
    let sol = solve_mfg_fixed_point(&s, &FixedPointOptions::default(), dt).unwrap();
    assert!(sol.converged);
    assert_eq!(sol.iterations, 1);
    let (v, u) = backward_hjb(&s, &sol.mean_field, dt).unwrap();
    assert_eq!(u, sol.policy);
    assert_eq!(v, sol.values);
}

#[test]
fn mean_field_free_solution_is_unexploitable_without_switches() {
    // "move" dominates everywhere, so the optimal policy never switches
    let s = two_state(1.0, [[0.0, 0.1], [0.0, 0.1]], [0.0, 0.0], 1.0);
    let dt = 1e-3;
    let sol = solve_mfg_fixed_point(&s, &FixedPointOptions::default(), dt).unwrap();
    let e = exploitability(&s, &sol, dt).unwrap();
    assert!(e.max_gap.abs() <= 1e-9, "{e:?}");
}

#[test]
fn crowd_equilibrium_is_nearly_unexploitable_and_improves_with_step() {
    let s = bundled("crowd_ct.toml");
    let opts = FixedPointOptions::default();
    let coarse = solve_mfg_fixed_point(&s, &opts, 2e-3).unwrap();
    let fine = solve_mfg_fixed_point(&s, &opts, 1e-3).unwrap();
    assert!(coarse.converged && fine.converged);
    let ec = exploitability(&s, &coarse, 2e-3).unwrap();
    let ef = exploitability(&s, &fine, 1e-3).unwrap();
    assert!(ef.max_gap <= 1e-4, "{ef:?}");
    assert!(ef.max_gap >= -1e-9 && ec.max_gap >= -1e-9);
    assert!(ef.max_gap < ec.max_gap, "{} vs {}", ef.max_gap, ec.max_gap);
}

#[test]
fn random_policy_is_exploitable() {
    let s = bundled("crowd_ct.toml");
    let dt = 1e-3;
    let mut sol = solve_mfg_fixed_point(&s, &FixedPointOptions::default(), dt).unwrap();
    sol.policy = PolicyTrajectory::uniform(&s.space, sol.policy.len());
    let e = exploitability(&s, &sol, dt).unwrap();
    assert!(e.max_gap > 1e-2);
}

#[test]
fn exploitability_ignores_reward_shift() {
    let s = bundled("crowd_ct.toml");
    let dt = 2e-3;
    let mut sol = solve_mfg_fixed_point(&s, &FixedPointOptions::default(), dt).unwrap();
    sol.policy = PolicyTrajectory::uniform(&s.space, sol.policy.len());
    let shifted = s.with_payoff(s.payoff.shifted(3.0));
    let a = exploitability(&s, &sol, dt).unwrap();
    let b = exploitability(&shifted, &sol, dt).unwrap();
    assert!((a.max_gap - b.max_gap).abs() < 1e-9);
}

#[test]
fn backward_equation_residual_is_first_order() {
    let s = bundled("crowd_ct.toml");
    let mut last = None;
    for dt in [4e-3, 2e-3, 1e-3] {
        let sol = solve_mfg_fixed_point(&s, &FixedPointOptions::default(), dt).unwrap();
        let r = hamiltonian_residual(&s, &sol.values, &sol.mean_field, dt).unwrap();
        assert!(r <= 50.0 * dt, "residual {r} at dt={dt}");
        last = Some(r);
    }
    assert!(last.unwrap() < 0.05);
}

#[test]
fn trajectory_self_convergence_in_step() {
    let s = bundled("crowd_ct.toml");
    let opts = FixedPointOptions::default();
    let sols: Vec<_> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| solve_mfg_fixed_point(&s, &opts, dt).unwrap())
        .collect();
    // compare on the coarsest grid
    let gap = |a: &MeanFieldTrajectory<f64>, b: &MeanFieldTrajectory<f64>, stride: usize| {
        (0..a.len())
            .map(|k| {
                a.profile(k, 0)
                    .l1_distance(b.profile(k * stride, 0))
            })
            .fold(0.0, f64::max)
    };
    let d1 = gap(&sols[0].mean_field, &sols[1].mean_field, 2);
    let d2 = gap(&sols[1].mean_field, &sols[2].mean_field, 2);
    let coarse_on_fine = (0..sols[0].mean_field.len())
        .map(|k| {
            sols[0]
                .mean_field
                .profile(k, 0)
                .l1_distance(sols[2].mean_field.profile(4 * k, 0))
        })
        .fold(0.0, f64::max);
    assert!(coarse_on_fine <= 10.0 * 4e-3, "{coarse_on_fine}");
    let order = (d1 / d2).log2();
    assert!(order >= 1.0 - 0.2, "order {order} ({d1}, {d2})");
}

fn two_type() -> (Scenario, Scenario) {
    // types "x" and "y" with different move costs; payoff depends on the aggregate
    let build = |labels: [&str; 2], costs: [f64; 2], m0: [[f64; 2]; 2]| {
        let space = StateSpace::new(
            vec!["a".into(), "b".into()],
            labels.iter().map(|s| s.to_string()).collect(),
            vec![vec![vec!["stay".into(), "move".into()]; 2]; 2],
        )
        .unwrap();
        let table: Vec<Vec<Vec<Vec<f64>>>> = vec![
            vec![
                vec![vec![0.0, 0.0], vec![-1.0, 1.0]],
                vec![vec![0.0, 0.0], vec![1.0, -1.0]],
            ];
            2
        ];
        let running = costs
            .iter()
            .map(|&c| {
                vec![
                    vec![vec![-0.5, 0.0], vec![-0.5 - c, -c]],
                    vec![vec![1.0, 0.5], vec![1.0 - c, 0.5 - c]],
                ]
            })
            .collect();
        Scenario::new(
            "two-type",
            space,
            TransitionKernelSpec::from_table(KernelMode::ContinuousRate, table).unwrap(),
            PayoffSpec::from_pairwise(
                PairwisePayoff {
                    running,
                    terminal: None,
                },
                vec![0.5, 0.5],
            ),
            Horizon::Continuous { end: 1.0, step: 1e-2 },
            m0.iter().map(|p| Simplex::new(p.to_vec()).unwrap()).collect(),
            vec![0.5, 0.5],
        )
        .unwrap()
    };
    (
        build(["x", "y"], [0.1, 0.4], [[0.9, 0.1], [0.6, 0.4]]),
        build(["y", "x"], [0.4, 0.1], [[0.6, 0.4], [0.9, 0.1]]),
    )
}

#[test]
fn permuting_types_permutes_outputs() {
    let (s, p) = two_type();
    let dt = 1e-2;
    let a = solve_mfg_fixed_point(&s, &FixedPointOptions::default(), dt).unwrap();
    let b = solve_mfg_fixed_point(&p, &FixedPointOptions::default(), dt).unwrap();
    for k in 0..a.mean_field.len() {
        assert_eq!(a.mean_field.profile(k, 0), b.mean_field.profile(k, 1));
        assert_eq!(a.mean_field.profile(k, 1), b.mean_field.profile(k, 0));
        assert_eq!(a.values.at(k)[0], b.values.at(k)[1]);
    }
    for t in 0..a.policy.len() {
        assert_eq!(a.policy.stage(t)[0], b.policy.stage(t)[1]);
    }
}

#[test]
fn policy_value_of_optimal_policy_matches_backward_values() {
    let s = two_state(1.0, [[0.0, 0.1], [0.0, 0.1]], [0.0, 1.0], 1.0);
    let dt = 1e-3;
    let m = constant(&s, dt);
    let (v, u) = backward_hjb(&s, &m, dt).unwrap();
    let w = policy_value(&s, &u, &m, dt).unwrap();
    for x in 0..2 {
        assert!((v.get(0, 0, x) - w.get(0, 0, x)).abs() < 1e-9);
    }
}

fn static_planner(dt_rewards: [f64; 2]) -> PlannerProblem<f64> {
    // two controls, no motion; reward linear in m
    PlannerProblem::new(
        2,
        vec!["u0".into(), "u1".into()],
        1.0,
        move |_, u, m: &Simplex| dt_rewards[u] * m.get(0),
        |_, _, _| vec![0.0, 0.0],
        |m: &Simplex| m.get(1),
    )
}

#[test]
fn planner_without_motion_repeats_static_optimum() {
    let p = static_planner([1.0, 2.0]);
    let grid = SimplexGrid::new(2, 10).unwrap();
    let dt = 0.1;
    let sol = solve_mf_control_simplex_dp(&p, &grid, dt).unwrap();
    for (k, &t) in sol.times.iter().enumerate() {
        for i in 0..grid.len() {
            let m = grid.point::<f64>(i);
            let expected = m.get(1) + (1.0 - t) * 2.0 * m.get(0);
            assert!((sol.values[k][i] - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn planner_on_single_cell_matches_hand_computation() {
    // k = 1: only the two vertices. From (1, 0) control 1 moves mass toward b at rate 1
    // and pays 0.5 per unit time; the value at b is worth 1 at the end.
    let p = PlannerProblem::new(
        2,
        vec!["idle".into(), "push".into()],
        1.0,
        |_, u, m: &Simplex| if u == 1 { -0.5 * m.get(0) } else { 0.0 },
        |_, u, m: &Simplex| {
            if u == 1 {
                vec![-m.get(0), m.get(0)]
            } else {
                vec![0.0, 0.0]
            }
        },
        |m: &Simplex| m.get(1),
    );
    let grid = SimplexGrid::new(2, 1).unwrap();
    let dt = 0.5;
    let sol = solve_mf_control_simplex_dp(&p, &grid, dt).unwrap();
    let a = grid.index_of(&[1, 0]).unwrap();
    let b = grid.index_of(&[0, 1]).unwrap();
    // at t = 0.5: push gives -0.25 + interp at (0.5, 0.5) = 0.5 -> 0.25 > 0
    assert!((sol.values[1][a] - 0.25).abs() < 1e-15);
    // at t = 0: push gives -0.25 + 0.5·v(0.5, a) + 0.5·v(0.5, b) = -0.25 + 0.125 + 0.5 = 0.375
    assert!((sol.values[0][a] - 0.375).abs() < 1e-15);
    assert_eq!(sol.values[0][b], 1.0);
    assert_eq!(sol.policy[0][a], 1);
}

#[test]
fn planner_matches_mean_field_free_game_value() {
    // with m-independent data the planner value is linear in m and equals the
    // population average of the individual values
    let s = two_state(1.0, [[0.0, -0.3], [0.5, 0.2]], [0.0, 1.0], 1.0);
    let dt = 1e-3;
    let (v, _) = backward_hjb(&s, &constant(&s, dt), dt).unwrap();
    let planner = PlannerProblem::from_scenario(&s).unwrap();
    assert_eq!(planner.controls.len(), 4);
    let grid = SimplexGrid::new(2, 10).unwrap();
    let sol = solve_mf_control_simplex_dp(&planner, &grid, dt).unwrap();
    let m0 = s.m0[0].as_slice();
    let planner_value = sol.value_at(&grid, 0, m0);
    let game_value = s.m0[0].expectation(&v.at(0)[0]);
    assert!((planner_value - game_value).abs() < 5e-3, "{planner_value} vs {game_value}");
}

#[test]
fn planner_grid_self_convergence() {
    let s = bundled("crowd_ct.toml");
    let planner = PlannerProblem::from_scenario(&s).unwrap();
    let probes = [[0.9, 0.1], [0.55, 0.45], [0.23, 0.77]];
    let values: Vec<Vec<f64>> = [10usize, 20, 40]
        .iter()
        .map(|&k| {
            let grid = SimplexGrid::new(2, k).unwrap();
            let dt = 0.2 / k as f64;
            let sol = solve_mf_control_simplex_dp(&planner, &grid, dt).unwrap();
            probes.iter().map(|m| sol.value_at(&grid, 0, m)).collect()
        })
        .collect();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let d1 = diff(&values[0], &values[1]);
    let d2 = diff(&values[1], &values[2]);
    assert!(d1 <= 1.0 / 10.0, "{d1}");
    let order = (d1 / d2).log2();
    assert!(order >= 1.0 - 0.2, "order {order} ({d1}, {d2})");
}

#[test]
fn planner_rejects_large_state_spaces() {
    let p = PlannerProblem::new(
        5,
        vec!["only".into()],
        1.0,
        |_, _, _: &Simplex| 0.0,
        |_, _, _| vec![0.0; 5],
        |_: &Simplex| 0.0,
    );
    let grid = SimplexGrid::new(4, 2).unwrap();
    assert!(matches!(
        solve_mf_control_simplex_dp(&p, &grid, 0.1),
        Err(Error::StateTooLarge(5))
    ));
}

#[test]
fn planner_reports_steps_leaving_the_simplex() {
    let p = PlannerProblem::new(
        2,
        vec!["drain".into()],
        1.0,
        |_, _, _: &Simplex| 0.0,
        |_, _, _| vec![-1.0, 1.0],
        |_: &Simplex| 0.0,
    );
    let grid = SimplexGrid::new(2, 4).unwrap();
    assert!(matches!(
        solve_mf_control_simplex_dp(&p, &grid, 0.1),
        Err(Error::OffSimplexStep { .. })
    ));
}
