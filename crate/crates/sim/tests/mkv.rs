mod common;

use std::f64::consts::{PI, SQRT_2};

use common::scenario_path;
use mfgkit_sim::mkv::*;
use mfgkit_sim::SimError;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn gaussian(mean: f64, variance: f64) -> InitialLaw {
    InitialLaw::Gaussian { mean, variance }
}

fn ou(a: f64, b: f64, s: f64, initial: InitialLaw) -> MkvModel {
    MkvModel::ou(OuParams { a, b, s }, initial).unwrap()
}

#[test]
fn frozen_dynamics_keep_positions() {
    let model = MkvModel::pure_drift(0.0, gaussian(0.0, 1.0));
    let mut cfg = ParticleConfig::new(50, 0.01, 1.0, 3);
    cfg.snapshot_every = Some(10);
    let run = simulate_particles(&model, &cfg, 0).unwrap();
    assert_eq!(run.times.len(), 11);
    for snap in &run.positions {
        assert_eq!(snap, &run.positions[0]);
    }
}

#[test]
fn pure_drift_moves_every_particle_by_ct() {
    let model = MkvModel::pure_drift(0.7, gaussian(1.0, 4.0));
    let run = simulate_particles(&model, &ParticleConfig::new(40, 0.01, 2.0, 9), 0).unwrap();
    for (x0, xt) in run.positions[0].iter().zip(run.last()) {
        assert!((xt - (x0 + 1.4)).abs() < 1e-12, "{x0} -> {xt}");
    }
}

#[test]
fn bundled_ou_variance_matches_the_oracle() {
    let (raw, s) = load_mkv_scenario(scenario_path("ou.toml")).unwrap();
    assert_eq!(raw.model, "ou");
    assert_eq!((s.n, s.step, s.end), (2000, 1e-3, 5.0));
    let check = variance_check(&s.model, s.n, s.step, s.end, 20240).unwrap();
    assert!((check.oracle_variance - 1.0).abs() < 1e-3, "{}", check.oracle_variance);
    assert!(check.z.abs() <= 3.0, "{check:?}");
}

#[test]
fn ou_oracle_examples() {
    let m = ou_oracle(1.0, 0.0, SQRT_2, 2.0, 0.5, 3.0).unwrap();
    assert_eq!(m.mean, 2.0);
    let m = ou_oracle(1.0, 0.0, SQRT_2, 2.0, 0.5, 60.0).unwrap();
    assert!((m.variance - 1.0).abs() < 1e-12);
    let m = ou_oracle(0.7, 0.3, 1.1, -1.0, 0.25, 0.0).unwrap();
    assert_eq!((m.mean, m.variance), (-1.0, 0.25));
    let m = ou_oracle(0.5, 0.2, 1.0, 0.0, 0.0, 2.0).unwrap();
    assert!((m.mean - 0.4).abs() < 1e-15);
    assert!((m.variance - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    assert!(ou_oracle(0.0, 0.0, 1.0, 0.0, 1.0, 1.0).is_err());
}

#[test]
fn particle_mean_follows_the_oracle_drift() {
    let model = ou(2.0, 0.5, 1.0, gaussian(-1.0, 0.5));
    let run = simulate_particles(&model, &ParticleConfig::new(4000, 1e-3, 1.0, 4), 0).unwrap();
    let x = run.last();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let oracle = ou_oracle(2.0, 0.5, 1.0, -1.0, 0.5, 1.0).unwrap();
    // the empirical mean moves by exactly b·t; only its initial sampling error remains
    let x0 = &run.positions[0];
    let mean0 = x0.iter().sum::<f64>() / x0.len() as f64;
    let noise = 1.0 / (x.len() as f64).sqrt();
    assert!((mean - (mean0 + 0.5)).abs() < 4.0 * noise, "{mean} vs {}", mean0 + 0.5);
    assert!((mean - oracle.mean).abs() < 4.0 * noise * (1.0 + 0.5f64.sqrt()));
}

#[test]
fn empirical_cdf_examples() {
    let one = EmpiricalCdf::uniform(&[0.0]).unwrap();
    assert_eq!(one.eval(-1e-12), 0.0);
    assert_eq!(one.eval(0.0), 1.0);
    let two = EmpiricalCdf::uniform(&[1.0, 0.0]).unwrap();
    assert_eq!(two.eval(0.5), 0.5);
    assert_eq!(two.eval(1.0), 1.0);
    let weighted = EmpiricalCdf::weighted(&[0.0, 1.0], &[0.25, 0.75]).unwrap();
    assert_eq!(weighted.eval(0.5), 0.25);
    assert!(EmpiricalCdf::weighted(&[0.0, 1.0], &[0.5, 0.6]).is_err());
    assert!(EmpiricalCdf::uniform(&[]).is_err());
}

#[test]
fn w1_examples() {
    let at0 = EmpiricalCdf::uniform(&[0.0]).unwrap();
    let at1 = EmpiricalCdf::uniform(&[1.0]).unwrap();
    let both = EmpiricalCdf::uniform(&[0.0, 1.0]).unwrap();
    assert_eq!(at0.w1(&at0), 0.0);
    assert_eq!(at0.w1(&at1), 1.0);
    assert_eq!(both.w1(&at0), 0.5);
    assert_eq!(w1_distance(Cdf::Empirical(&at0), Cdf::Empirical(&both), 1e-8).unwrap(), 0.5);
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `E|X − c|` for `X ~ N(μ, σ²)`.
fn gaussian_abs_deviation(mean: f64, sd: f64, c: f64) -> f64 {
    let z = (c - mean) / sd;
    let big_phi = GaussianCdf::new(0.0, 1.0).unwrap().cdf(z);
    sd * (2.0 * std_normal_pdf(z) + z * (2.0 * big_phi - 1.0))
}

#[test]
fn w1_to_a_gaussian_has_a_closed_form() {
    let g = GaussianCdf::new(0.3, 2.25).unwrap();
    for c in [-4.0, 0.0, 0.3, 1.7, 9.0] {
        let f = EmpiricalCdf::uniform(&[c]).unwrap();
        let d = w1_distance(Cdf::Empirical(&f), Cdf::Analytic(&g), 1e-8).unwrap();
        let oracle = gaussian_abs_deviation(0.3, 1.5, c);
        assert!((d - oracle).abs() < 1e-7, "c={c}: {d} vs {oracle}");
    }
    // atoms at ±1 against N(0, 1), using ∫_{-∞}^c Φ = cΦ(c) + φ(c) on each piece
    let f = EmpiricalCdf::uniform(&[-1.0, 1.0]).unwrap();
    let g0 = GaussianCdf::new(0.0, 1.0).unwrap();
    let d = f.w1_analytic(&g0, 1e-10).unwrap();
    let (phi0, phi1, big1) = (std_normal_pdf(0.0), std_normal_pdf(1.0), g0.cdf(1.0));
    let tails = 2.0 * (phi1 - (1.0 - big1));
    let middle = 2.0 * (big1 + phi1 - phi0 - 0.5);
    assert!((d - (tails + middle)).abs() < 1e-8, "{d} vs {}", tails + middle);
}

struct Heavy;

impl AnalyticCdf for Heavy {
    fn cdf(&self, w: f64) -> f64 {
        0.5 + w.atan() / PI
    }

    fn effective_support(&self) -> Option<(f64, f64)> {
        None
    }
}

#[test]
fn heavy_tails_are_not_integrable() {
    let f = EmpiricalCdf::uniform(&[0.0]).unwrap();
    let err = w1_distance(Cdf::Empirical(&f), Cdf::Analytic(&Heavy), 1e-8).unwrap_err();
    assert!(matches!(err, SimError::NonIntegrable(_)), "{err}");
}

#[test]
fn deterministic_scheme_is_first_order() {
    let (_, s) = load_mkv_scenario(scenario_path("ou.toml")).unwrap();
    let params = s.model.ou.unwrap();
    let drift_only = ou(params.a, 0.5, 0.0, s.model.initial.clone());
    let study = deterministic_order(&drift_only, 200, &[0.04, 0.02, 0.01, 0.005], 0.005 / 64.0, 2.0, 1).unwrap();
    assert!(study.order >= 0.8, "{study:?}");

    let table = MkvModel::custom_table(
        vec![-2.0, 0.0, 2.0],
        vec![1.0, 0.0, -1.5],
        vec![0.5, 0.2, 0.5],
        vec![0.0, 0.0, 0.0],
        gaussian(0.0, 1.0),
    )
    .unwrap();
    let study = deterministic_order(&table, 100, &[0.04, 0.02, 0.01, 0.005], 0.005 / 64.0, 1.0, 2).unwrap();
    assert!(study.order >= 0.8, "{study:?}");
}

#[test]
fn frozen_point_mass_has_zero_rate_error() {
    let model = MkvModel::pure_drift(0.0, InitialLaw::Point { at: 0.3 });
    let cfg = RateStudyConfig {
        ns: vec![5, 10, 20],
        steps: vec![0.1, 0.05],
        end: 1.0,
        replications: 30,
        seed: 0,
    };
    let study = rate_study(&model, &cfg).unwrap();
    assert_eq!(study.reference, "fine-grid");
    assert!(study.n_rows.iter().chain(&study.step_rows).all(|r| r.error.mean == 0.0));
}

#[test]
fn rate_study_shape_and_worker_independence() {
    let model = ou(1.0, 0.0, 1.0, gaussian(0.0, 1.0));
    let cfg = RateStudyConfig {
        ns: vec![200, 50, 100],
        steps: vec![0.01, 0.05],
        end: 0.5,
        replications: 30,
        seed: 12,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| rate_study(&model, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one.reference, "ou-oracle");
    assert_eq!(one.n_rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![50, 100, 200]);
    assert!(one.n_rows.iter().all(|r| r.step == 0.01));
    assert_eq!(one.step_rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![0.05, 0.01]);
    assert!(one.n_order < 0.0);
}

#[test]
fn rate_study_needs_enough_replications() {
    let model = ou(1.0, 0.0, 1.0, gaussian(0.0, 1.0));
    let cfg = RateStudyConfig {
        ns: vec![10, 20],
        steps: vec![0.1, 0.05],
        end: 1.0,
        replications: 5,
        seed: 0,
    };
    assert!(matches!(
        rate_study(&model, &cfg),
        Err(SimError::InsufficientReplications { got: 5, needed: 30 })
    ));
}

#[test]
fn blowup_and_bad_steps_are_reported() {
    let model = MkvModel::pure_drift(1e15, InitialLaw::Point { at: 0.0 });
    let err = simulate_particles(&model, &ParticleConfig::new(3, 0.01, 1.0, 0), 0).unwrap_err();
    assert!(matches!(err, SimError::NumericalBlowup { .. }), "{err}");
    let model = MkvModel::pure_drift(1.0, InitialLaw::Point { at: 0.0 });
    for step in [0.0, -0.1, 0.3, f64::NAN] {
        let err = simulate_particles(&model, &ParticleConfig::new(3, step, 1.0, 0), 0).unwrap_err();
        assert!(matches!(err, SimError::StepInvalid(_)), "step {step}: {err}");
    }
}

#[test]
fn uniform_dense_weights_equal_the_default() {
    let n = 7;
    let model = ou(1.5, 0.1, 0.8, gaussian(0.0, 2.0));
    let dense = model.clone().with_weights(Weights::Dense(vec![vec![1.0 / n as f64; n]; n]));
    let cfg = ParticleConfig::new(n, 0.01, 1.0, 5);
    assert_eq!(
        simulate_particles(&model, &cfg, 0).unwrap(),
        simulate_particles(&dense, &cfg, 0).unwrap()
    );
    let bad = model.with_weights(Weights::Dense(vec![vec![0.5; n]; n]));
    assert!(simulate_particles(&bad, &cfg, 0).is_err());
}

#[test]
fn local_weights_decouple_disconnected_groups() {
    // particles {0, 1} and {2, 3} only see their own group
    let w = vec![
        vec![0.5, 0.5, 0.0, 0.0],
        vec![0.5, 0.5, 0.0, 0.0],
        vec![0.0, 0.0, 0.5, 0.5],
        vec![0.0, 0.0, 0.5, 0.5],
    ];
    let positions = vec![-1.0, 1.0, 10.0, 12.0];
    let model = ou(1.0, 0.0, 0.0, InitialLaw::Positions { values: positions }).with_weights(Weights::Dense(w));
    let run = simulate_particles(&model, &ParticleConfig::new(4, 0.01, 5.0, 0), 0).unwrap();
    let x = run.last();
    // each group's spread contracts by (1 − aδ) per step around a fixed group mean
    let spread = 0.99f64.powi(500);
    assert!((x[0] + spread).abs() < 1e-12 && (x[1] - spread).abs() < 1e-12, "{x:?}");
    assert!((x[2] - (11.0 - spread)).abs() < 1e-12 && (x[3] - (11.0 + spread)).abs() < 1e-12, "{x:?}");
}

#[test]
fn scenario_files_are_checked() {
    let text = std::fs::read_to_string(scenario_path("ou.toml")).unwrap();
    let err = parse_mkv_scenario(&text.replace("model = \"ou\"", "model = \"ou\"\nextra = 1"))
        .unwrap_err();
    assert!(err.to_string().contains("extra"), "{err}");
    let err = parse_mkv_scenario(&text.replace("model = \"ou\"", "model = \"levy\""))
        .unwrap()
        .build()
        .unwrap_err();
    assert!(err.to_string().contains("levy"), "{err}");
    let err = parse_mkv_scenario(&text.replace("step = 1e-3", "step = 3e-1"))
        .unwrap()
        .build()
        .unwrap_err();
    assert!(err.to_string().contains("simulation.step"), "{err}");
}

fn step_cdf() -> impl Strategy<Value = EmpiricalCdf> {
    prop::collection::vec((-5i32..5, 1u32..4), 1..6).prop_map(|atoms| {
        let total: u32 = atoms.iter().map(|a| a.1).sum();
        let xs: Vec<f64> = atoms.iter().map(|a| a.0 as f64 * 0.5).collect();
        let ws: Vec<f64> = atoms.iter().map(|a| a.1 as f64 / total as f64).collect();
        EmpiricalCdf::weighted(&xs, &ws).unwrap()
    })
}

proptest! {
    #[test]
    fn w1_is_symmetric(f in step_cdf(), g in step_cdf()) {
        prop_assert!((f.w1(&g) - g.w1(&f)).abs() <= 1e-12);
    }

    #[test]
    fn w1_satisfies_the_triangle_inequality(f in step_cdf(), g in step_cdf(), h in step_cdf()) {
        prop_assert!(f.w1(&h) <= f.w1(&g) + g.w1(&h) + 1e-12);
    }

    #[test]
    fn w1_vanishes_only_for_equal_laws(f in step_cdf(), g in step_cdf()) {
        prop_assert_eq!(f.w1(&f), 0.0);
        let same = f.points() == g.points()
            && f.cumulative().iter().zip(g.cumulative()).all(|(a, b)| (a - b).abs() < 1e-12);
        prop_assert_eq!(f.w1(&g) < 1e-12, same);
    }

    #[test]
    fn empirical_cdfs_are_valid(xs in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let f = EmpiricalCdf::uniform(&xs).unwrap();
        let c = f.cumulative();
        prop_assert!(c.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(*c.last().unwrap(), 1.0);
        prop_assert_eq!(f.eval(f.points()[0] - 1.0), 0.0);
        prop_assert!(f.points().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn permuting_particles_with_their_streams_permutes_paths(seed in any::<u64>(), n in 2usize..30) {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let model = ou(1.0, 0.2, 0.9, gaussian(0.5, 1.0));
        let base = ParticleConfig::new(n, 0.02, 1.0, seed);
        let moved = ParticleConfig { streams: Some(perm.clone()), ..base.clone() };
        let a = simulate_particles(&model, &base, 0).unwrap();
        let b = simulate_particles(&model, &moved, 0).unwrap();
        for (pa, pb) in a.positions.iter().zip(&b.positions) {
            for j in 0..n {
                prop_assert_eq!(pb[j], pa[perm[j]]);
            }
        }
    }
}
