mod common;

use common::{bundled, FINITE_BUNDLED};
use mfgkit_core::dynamics::{
    find_rest_points, integrate_forward, integrate_forward_detailed, matrix_game_payoff,
    mean_field_drift, protocol_to_kernel, ConstantRates, IntegratorConfig, Method, ProtocolKind,
    RateKernel, RevisionProtocol,
};
use mfgkit_core::equilibrium::check_population_equilibrium;
use mfgkit_core::Simplex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn protocols() -> Vec<ProtocolKind<f64>> {
    ProtocolKind::<f64>::NAMES
        .iter()
        .map(|n| ProtocolKind::from_name(n, 0.1).unwrap())
        .collect()
}

fn rps_kernel(kind: ProtocolKind<f64>) -> impl RateKernel<f64> {
    let payoff = matrix_game_payoff(vec![
        vec![0.0, -1.0, 1.0],
        vec![1.0, 0.0, -1.0],
        vec![-1.0, 1.0, 0.0],
    ]);
    protocol_to_kernel(RevisionProtocol::new(kind, payoff, 3)).unwrap()
}

#[test]
fn every_protocol_stays_on_the_simplex_for_every_bundled_scenario() {
    for name in FINITE_BUNDLED {
        let s = bundled(name);
        let payoff = s.payoff.population_payoff(&s.space, 0);
        for kind in protocols() {
            let kernel =
                protocol_to_kernel(RevisionProtocol::new(kind, payoff.clone(), s.n_states())).unwrap();
            let run = integrate_forward_detailed(&kernel, &s.m0[0], &IntegratorConfig::rk4(1e-3, 100.0))
                .unwrap_or_else(|e| panic!("{name}/{}: {e}", kind.name()));
            assert!(run.max_sum_deviation <= 1e-9, "{name}/{}", kind.name());
            assert!(run.min_mass >= -1e-6, "{name}/{}: {}", kind.name(), run.min_mass);
        }
    }
}

#[test]
fn replicator_preserves_the_rps_product() {
    let kernel = rps_kernel(ProtocolKind::Replicator);
    let m0 = Simplex::new(vec![0.6, 0.25, 0.15]).unwrap();
    let traj = integrate_forward(&kernel, &m0, &IntegratorConfig::rk4(1e-3, 50.0)).unwrap();
    let product = |m: &Simplex| m.as_slice().iter().product::<f64>();
    let p0 = product(&m0);
    let worst = (0..traj.len())
        .map(|k| (product(traj.profile(k, 0)) - p0).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn replicator_drift_matches_closed_form() {
    let kernel = rps_kernel(ProtocolKind::Replicator);
    let payoff = matrix_game_payoff(vec![
        vec![0.0, -1.0, 1.0],
        vec![1.0, 0.0, -1.0],
        vec![-1.0, 1.0, 0.0],
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let m = Simplex::random(3, &mut rng);
        let r = payoff(&m);
        let avg = m.expectation(&r);
        let d = mean_field_drift(&kernel.rates(&m), &m).unwrap();
        for x in 0..3 {
            assert!((d[x] - m[x] * (r[x] - avg)).abs() <= 1e-10);
        }
    }
}

#[test]
fn constant_payoff_gives_zero_replicator_drift() {
    let payoff = matrix_game_payoff(vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
    let kernel = protocol_to_kernel(RevisionProtocol::new(ProtocolKind::Replicator, payoff, 2)).unwrap();
    let m0 = Simplex::new(vec![0.3, 0.7]).unwrap();
    let traj = integrate_forward(&kernel, &m0, &IntegratorConfig::rk4(1e-2, 5.0)).unwrap();
    assert_eq!(traj.last()[0], m0);
}

#[test]
fn hot_smoothed_best_response_is_nearly_uniform() {
    let kernel = rps_kernel(ProtocolKind::SmoothedBestResponse { temperature: 1e6 });
    let rates = kernel.rates(&Simplex::new(vec![0.7, 0.2, 0.1]).unwrap());
    for row in rates {
        for x in 0..3 {
            assert!((row[x] - 1.0 / 3.0).abs() < 1e-6);
        }
    }
}

#[test]
fn linear_one_way_flow_decays_exponentially() {
    let kernel = ConstantRates(vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
    let m0 = Simplex::new(vec![1.0, 0.0]).unwrap();
    let traj = integrate_forward(&kernel, &m0, &IntegratorConfig::rk4(1e-3, 1.0)).unwrap();
    assert!((traj.last()[0][0] - (-1.0f64).exp()).abs() <= 1e-6);
    assert!((traj.last()[0][0] - 0.367879).abs() <= 1e-6);
    let euler = IntegratorConfig {
        method: Method::ExplicitEuler,
        ..IntegratorConfig::rk4(1e-3, 1.0)
    };
    let traj = integrate_forward(&kernel, &m0, &euler).unwrap();
    assert!((traj.last()[0][0] - (-1.0f64).exp()).abs() <= 1e-3);
}

#[test]
fn integration_is_deterministic() {
    let kernel = rps_kernel(ProtocolKind::Smith);
    let m0 = Simplex::new(vec![0.5, 0.3, 0.2]).unwrap();
    let cfg = IntegratorConfig::rk4(1e-2, 10.0);
    assert_eq!(
        integrate_forward(&kernel, &m0, &cfg).unwrap(),
        integrate_forward(&kernel, &m0, &cfg).unwrap()
    );
}

#[test]
fn bnn_and_smith_rest_points_are_equilibria_on_bundled_games() {
    for name in ["rps.toml", "anticoord.toml", "oscillate.toml", "crowd_ct.toml", "herding.toml"] {
        let s = bundled(name);
        let payoff = s.payoff.population_payoff(&s.space, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seeds: Vec<Simplex> = (0..8).map(|_| Simplex::random(s.n_states(), &mut rng)).collect();
        for kind in [ProtocolKind::Bnn, ProtocolKind::Smith] {
            let kernel =
                protocol_to_kernel(RevisionProtocol::new(kind, payoff.clone(), s.n_states())).unwrap();
            // boundary rest points are approached quadratically, so the residual must be tight
            let report = find_rest_points(&kernel, &seeds, 1e-14);
            assert!(!report.points.is_empty(), "{name}/{}", kind.name());
            for p in &report.points {
                let eq = check_population_equilibrium(p, |m| payoff(m), 1e-6);
                assert!(eq.is_equilibrium, "{name}/{}: {p:?} {eq:?}", kind.name());
            }
        }
    }
}

#[test]
fn replicator_rest_point_of_rps_is_the_center() {
    let kernel = rps_kernel(ProtocolKind::Replicator);
    let seeds = vec![
        Simplex::new(vec![0.5, 0.3, 0.2]).unwrap(),
        Simplex::new(vec![0.2, 0.2, 0.6]).unwrap(),
    ];
    let report = find_rest_points(&kernel, &seeds, 1e-10);
    assert_eq!(report.points.len(), 1);
    for x in 0..3 {
        assert!((report.points[0][x] - 1.0 / 3.0).abs() < 1e-8);
    }
}

proptest! {
    #[test]
    fn drift_of_any_protocol_conserves_mass(
        w in proptest::collection::vec(0.01f64..1.0, 3),
        which in 0usize..4,
    ) {
        let m = Simplex::project(&w).unwrap();
        let kernel = rps_kernel(protocols()[which]);
        let d = mean_field_drift(&kernel.rates(&m), &m).unwrap();
        prop_assert!(d.iter().sum::<f64>().abs() <= 1e-12);
        for (x, row) in kernel.rates(&m).iter().enumerate() {
            for (y, &r) in row.iter().enumerate() {
                prop_assert!(x == y || r >= 0.0);
            }
        }
    }
}
