use pinnforge_core::trainer::{
    evaluate_mse, initial_params, train, Init, Mlp, NetSpec, Problem, TrainConfig, TrainError, Workspace,
};
use pinnforge_core::{parse, BcKind, BoundaryCondition, CanonicalPde, Domain, ExprTree, PhysicsHints, Side};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dirichlet(axis: u32) -> BoundaryCondition {
    BoundaryCondition {
        kind: BcKind::Dirichlet,
        axis,
        side: Side::Both,
        value: ExprTree::num(0.0),
    }
}

fn poisson_1d() -> CanonicalPde {
    CanonicalPde::new(
        &parse("u_xx + pi^2*sin(pi*x)").unwrap(),
        vec![dirichlet(1)],
        None,
        Domain::unit_box(1),
        PhysicsHints::default(),
    )
    .unwrap()
}

fn heat_1d() -> CanonicalPde {
    CanonicalPde::new(
        &parse("u_t - 0.01*u_xx").unwrap(),
        vec![dirichlet(1)],
        Some(parse("sin(pi*x)").unwrap()),
        Domain::unit_box(1).with_time(0.0, 1.0),
        PhysicsHints::default(),
    )
    .unwrap()
}

fn sine(p: &[f64]) -> f64 {
    (std::f64::consts::PI * p[0]).sin()
}

#[test]
fn parameter_count_by_hand() {
    // 1 -> 4 -> 1: (1*4 + 4) + (4*1 + 1)
    assert_eq!(NetSpec::new(1, 1, 4).parameter_count(), 13);
    // 2 -> 32 -> 32 -> 32 -> 1
    assert_eq!(NetSpec::new(2, 3, 32).parameter_count(), (2 * 32 + 32) + 2 * (32 * 32 + 32) + (32 + 1));
}

#[test]
fn backprop_matches_central_differences() {
    let net = NetSpec::new(1, 1, 4);
    let mlp = Mlp::new(net);
    let cfg = TrainConfig::default();
    let problem = Problem::new(&poisson_1d(), &cfg.sampling()).unwrap();
    let mut ws = Workspace::new(&mlp, &problem);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-6;
    for point in 0..20 {
        let mut theta = initial_params(&net, point);
        for v in theta.iter_mut() {
            *v += (rng.next_u64() as f64 / u64::MAX as f64 - 0.5) * 0.5;
        }
        let mut grad = vec![0.0; theta.len()];
        problem.loss(&mlp, &theta, cfg.penalty, Some(&mut grad), &mut ws);
        let mut fd = vec![0.0; theta.len()];
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] = theta[i] + h;
            let up = problem.loss(&mlp, &t, cfg.penalty, None, &mut ws);
            t[i] = theta[i] - h;
            let down = problem.loss(&mlp, &t, cfg.penalty, None, &mut ws);
            fd[i] = (up - down) / (2.0 * h);
        }
        let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale = grad.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|a| a * a).sum::<f64>().sqrt());
        assert!(diff / scale <= 1e-4, "point {point}: relative error {:e}", diff / scale);
    }
}

#[test]
fn poisson_reaches_reference_accuracy_deterministically() {
    let cfg = TrainConfig::default();
    let problem = Problem::new(&poisson_1d(), &cfg.sampling()).unwrap();
    let net = NetSpec::new(1, 3, 32);
    let a = train(&problem, &net, &cfg).unwrap();
    let b = train(&problem, &net, &cfg).unwrap();
    assert_eq!(a.trace.records.len(), 2000);
    assert_eq!(a.trace, b.trace);
    let mse = evaluate_mse(&net, &a.params, &problem.lo, &problem.hi, cfg.grid, &sine);
    assert!(mse <= 1e-2, "mse {mse:e}");
}

#[test]
fn zero_output_net_misses_sine_by_one_half() {
    let mut net = NetSpec::new(1, 2, 8);
    net.init = Init::ZeroOutput;
    let theta = initial_params(&net, 0);
    let mse = evaluate_mse(&net, &theta, &[0.0], &[1.0], 256, &sine);
    // mean of sin^2(pi x) over [0, 1]
    assert!((mse - 0.5).abs() < 1e-4, "{mse}");
}

#[test]
fn untrained_heat_net_has_positive_loss() {
    let cfg = TrainConfig::default();
    let problem = Problem::new(&heat_1d(), &cfg.sampling()).unwrap();
    let net = NetSpec::new(2, 2, 16);
    let mlp = Mlp::new(net);
    let mut ws = Workspace::new(&mlp, &problem);
    let loss = problem.loss(&mlp, &initial_params(&net, 0), cfg.penalty, None, &mut ws);
    assert!(loss > 0.0 && loss.is_finite());
}

#[test]
fn huge_learning_rate_is_reported_as_divergence() {
    let burgers = CanonicalPde::new(
        &parse("u_t + u*u_x - 0.01*u_xx").unwrap(),
        vec![dirichlet(1)],
        Some(parse("-sin(pi*x)").unwrap()),
        Domain::unit_box(1).with_time(0.0, 1.0),
        PhysicsHints::default(),
    )
    .unwrap();
    let cfg = TrainConfig {
        lr: 1e3,
        steps: 500,
        blowup: 1e3,
        ..TrainConfig::default()
    };
    let problem = Problem::new(&burgers, &cfg.sampling()).unwrap();
    match train(&problem, &NetSpec::new(2, 3, 32), &cfg) {
        Err(TrainError::Diverged { step, trace, .. }) => {
            assert!((1..=500).contains(&step));
            assert!(trace.records.len() < step + 1);
        }
        other => panic!("expected divergence, got {:?}", other.map(|o| o.trace.records.last().cloned())),
    }
}

#[test]
fn input_width_must_match_the_problem() {
    let cfg = TrainConfig::default();
    let problem = Problem::new(&heat_1d(), &cfg.sampling()).unwrap();
    let err = train(&problem, &NetSpec::new(1, 2, 8), &cfg).unwrap_err();
    assert_eq!(err.to_string(), "shape mismatch: expected 2 inputs, got 1");
}
