use s2cd::data::{generate, GeneratorParams, LabelModel};
use s2cd::diagnostics::{audit_estimator, solve_reference};
use s2cd::solvers::{cd_nonuniform_observed, default_params, s2cd, s2cd_observed, InnerStep, RunOptions, SolverConfig};
use s2cd::{LossKind, Problem, RegMode};

fn instance(n: usize, d: usize, density: f64, loss: LossKind, mu: f64, seed: u64) -> Problem {
    let labels = match loss {
        LossKind::Squared => LabelModel::Regression,
        LossKind::Logistic => LabelModel::Classification,
    };
    let (ds, _) = generate(&GeneratorParams::new(n, d, density, 1.0, labels, seed)).unwrap();
    Problem::new(ds, loss, mu, RegMode::SupportDistributed).unwrap()
}

#[test]
fn collapsed_s2cd_is_nonuniform_cd() {
    let problem = instance(30, 8, 0.5, LossKind::Squared, 0.1, 1);
    let collapsed = problem.collapse().unwrap();
    let config = SolverConfig::new(0.4 / collapsed.l_hat(), 40, 5, 17);

    let mut s2cd_iterates = Vec::new();
    let mut worst = 0.0f64;
    s2cd_observed(&collapsed, &config, &RunOptions::default(), &mut |s: &InnerStep<'_>| {
        let exact = collapsed.full_gradient(s.y).unwrap()[s.coordinate];
        worst = worst.max((s.direction - exact).abs() / exact.abs().max(1.0));
        let mut next = s.y.to_vec();
        next[s.coordinate] += s.step;
        s2cd_iterates.push((s.coordinate, next));
    })
    .unwrap();
    assert!(worst <= 1e-12, "G differs from the partial derivative by {worst:e}");

    let mut cd_iterates = Vec::new();
    cd_nonuniform_observed(&problem, config.h, s2cd_iterates.len(), config.seed, &RunOptions::default(), |_, j, x| {
        cd_iterates.push((j, x.to_vec()))
    })
    .unwrap();
    assert_eq!(cd_iterates.len(), s2cd_iterates.len());
    for ((j_a, a), (j_b, b)) in s2cd_iterates.iter().zip(&cd_iterates) {
        assert_eq!(j_a, j_b);
        for (u, v) in a.iter().zip(b) {
            assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }
}

#[test]
fn estimator_is_unbiased_along_a_run() {
    let problem = instance(20, 15, 0.4, LossKind::Logistic, 0.1, 2);
    let opt = solve_reference(&problem, 1e-9).unwrap();
    let config = default_params(&problem, 1e-2, 5).unwrap();
    let mut points = Vec::new();
    s2cd_observed(&problem, &config, &RunOptions::default(), &mut |s: &InnerStep<'_>| {
        if s.t % 7 == 0 && points.len() < 40 {
            points.push((s.y.to_vec(), s.snapshot.to_vec()));
        }
    })
    .unwrap();
    assert!(!points.is_empty());
    for (y, x_k) in &points {
        let audit = audit_estimator(&problem, y, x_k, opt.f_star).unwrap();
        assert!(audit.unbiasedness_error() <= 1e-10);
        assert!(audit.chain_holds());
    }
}

#[test]
fn default_params_reach_target_accuracy_on_ridge() {
    let problem = instance(1000, 100, 0.05, LossKind::Squared, 0.1, 3);
    let opt = solve_reference(&problem, 1e-10).unwrap();
    let epsilon = 1e-2;
    let f0 = problem.value(&vec![0.0; problem.d()]).unwrap();
    let seeds = 20;
    let mut mean_ratio = 0.0;
    for seed in 0..seeds {
        let config = default_params(&problem, epsilon, seed).unwrap();
        let trace = s2cd(&problem, &config, &RunOptions::default()).unwrap();
        mean_ratio += (trace.last().f - opt.f_star) / (f0 - opt.f_star) / seeds as f64;
    }
    assert!(mean_ratio <= 3.0 * epsilon, "mean relative gap {mean_ratio:e}");
}

#[test]
fn budget_stops_early() {
    let problem = instance(50, 10, 0.3, LossKind::Squared, 0.5, 4);
    let config = SolverConfig { epochs: 100, ..default_params(&problem, 1e-3, 0).unwrap() };
    let options = RunOptions { max_passes: Some(3.0), ..Default::default() };
    let trace = s2cd(&problem, &config, &options).unwrap();
    assert!(trace.records.len() <= 4);
}
