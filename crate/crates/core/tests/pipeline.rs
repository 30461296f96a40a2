mod common;

use phnet::models::{
    poroelastic, two_mass, two_mass_split_identity, two_mass_split_scalar, PoroelasticParams, TwoMassParams,
};
use phnet::nalgebra::{DMatrix, DVector};
use phnet::{
    build_phdae, condense_general, condense_skew, dynamic_iteration, eliminate_ports, energy_report, implicit_midpoint,
    strang_split, validate_structure, CallbackPhSystem, Condensation, CouplingLaw, DynamicIteration, InnerSolver,
    IterationMode, LinearPortRelation, Method, Trajectory,
};

fn zero(m: usize) -> impl Fn(f64) -> DVector<f64> + Sync {
    move |_| DVector::zeros(m)
}

#[test]
fn three_condensation_routes_agree_for_skew_coupling() {
    let net = common::random_network(&mut common::rng(7));
    let CouplingLaw::Matrix(c) = net.law().clone() else { unreachable!() };
    let skew = condense_skew(&net).unwrap();
    let general = condense_general(&net, &c).unwrap().into_system().unwrap();
    let rel = LinearPortRelation::new(DMatrix::identity(c.nrows(), c.nrows()), c).unwrap();
    let eliminated = eliminate_ports(&build_phdae(&net, &rel).unwrap()).unwrap().into_system().unwrap();
    let mut rng = common::rng(8);
    let x0 = common::random_vector(&mut rng, net.state_dim());
    let m = net.external_dim();
    let u = move |t: f64| DVector::from_element(m, t.cos());
    let a = implicit_midpoint(&skew, &u, &x0, 0.0, 2.0, 0.01).unwrap();
    let b = implicit_midpoint(&general, &u, &x0, 0.0, 2.0, 0.01).unwrap();
    let c = implicit_midpoint(&eliminated, &u, &x0, 0.0, 2.0, 0.01).unwrap();
    assert!(a.max_deviation(&b).unwrap() <= 1e-8);
    assert!(a.max_deviation(&c).unwrap() <= 1e-8);
}

#[test]
fn explicit_euler_violates_the_discrete_balance() {
    let p = TwoMassParams::default();
    let sys = two_mass(&p).unwrap();
    let op = common::two_mass_operator(p.m1, p.m2, p.k, p.k1, p.k2, p.r1, p.r2);
    let x0 = DVector::from_vec(vec![1.0, 0.5, -0.3, 0.2, 0.1]);
    let mut ratios = Vec::new();
    for dt in [0.02, 0.01] {
        let mut states = vec![x0.clone()];
        for _ in 0..100 {
            let x = states.last().unwrap();
            states.push(x + &op * x * dt);
        }
        let times = (0..=100).map(|k| k as f64 * dt).collect();
        let euler = Trajectory::from_states(Method::External, &sys, times, states, &zero(0)).unwrap();
        let midpoint = implicit_midpoint(&sys, &zero(0), &x0, 0.0, 100.0 * dt, dt).unwrap();
        let e = energy_report(&euler, &sys).unwrap();
        let m = energy_report(&midpoint, &sys).unwrap();
        assert!(e.max_residual > 1e3 * m.max_residual.max(1e-16));
        ratios.push(e.max_residual / dt);
    }
    // Per-step defect of O(dt²), i.e. O(dt) relative to the step.
    let order = (ratios[0] / ratios[1]).log2();
    assert!((order - 1.0).abs() < 0.3, "observed defect order {order}");
}

#[test]
fn damped_two_mass_loses_energy_strictly() {
    let sys = two_mass(&TwoMassParams::default()).unwrap();
    let x0 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    let traj = implicit_midpoint(&sys, &zero(0), &x0, 0.0, 5.0, 0.01).unwrap();
    assert!(traj.energy().windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn poroelastic_dynamic_iteration_converges() {
    let p = PoroelasticParams::desk();
    let (sys, net) = poroelastic(&p).unwrap();
    let x0 = DVector::from_vec(vec![0.1, 0.0, -0.1, 0.2, 0.3, 0.1, 1.0, -0.5]);
    let u = |t: f64| DVector::from_vec(vec![t.sin(), 0.0, 0.0, 0.0, 0.5 * t.cos()]);
    let reference = implicit_midpoint(&sys, &u, &x0, 0.0, 1.0, 0.01).unwrap();
    let mut best = f64::INFINITY;
    for sweeps in 1..=10 {
        let cfg = DynamicIteration::new(IterationMode::GaussSeidel, 0.1, sweeps)
            .with_inner(vec![InnerSolver::Strang, InnerSolver::Midpoint]);
        let traj = dynamic_iteration(&net, &cfg, &u, &x0, 0.0, 1.0, 0.01).unwrap();
        best = best.min(traj.max_deviation(&reference).unwrap());
    }
    assert!(best <= 1e-6, "best error {best:.3e}");
}

#[test]
fn identity_and_scalar_splits_iterate_to_the_same_limit() {
    let p = TwoMassParams::default();
    let x0 = DVector::from_vec(vec![1.0, 0.5, -0.3, 0.2, 0.1]);
    let cfg = DynamicIteration::new(IterationMode::Jacobi, 0.1, 25);
    let a = dynamic_iteration(&two_mass_split_identity(&p).unwrap(), &cfg, &zero(0), &x0, 0.0, 1.0, 0.01).unwrap();
    let b = dynamic_iteration(&two_mass_split_scalar(&p).unwrap(), &cfg, &zero(0), &x0, 0.0, 1.0, 0.01).unwrap();
    assert!(a.max_deviation(&b).unwrap() <= 1e-12);
    assert_eq!(a.method(), Method::Jacobi);
}

#[test]
fn strang_is_second_order_from_a_displaced_start() {
    let p = TwoMassParams::default();
    let sys = two_mass(&p).unwrap();
    let x0 = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0, -1.0]);
    let fine = implicit_midpoint(&sys, &zero(0), &x0, 0.0, 1.0, 1e-4).unwrap();
    let err = |dt: f64| {
        let t = strang_split(&sys, &zero(0), &x0, 0.0, 1.0, dt).unwrap();
        (t.final_state().unwrap() - fine.final_state().unwrap()).amax()
    };
    let order = (err(0.02) / err(0.01)).log2();
    assert!((order - 2.0).abs() < 0.2, "order {order}");
}

#[test]
fn callback_pendulum_conserves_energy_closely() {
    // Pendulum with H = p²/2 + (1 − cos q), canonical structure.
    let sys = CallbackPhSystem::new(
        2,
        0,
        |x| 0.5 * x[1] * x[1] + 1.0 - x[0].cos(),
        |x| DVector::from_vec(vec![x[0].sin(), x[1]]),
    )
    .with_structure(|_| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
    let samples = [DVector::from_vec(vec![0.3, -0.2]), DVector::from_vec(vec![1.0, 0.5])];
    assert!(validate_structure(&sys, &samples, 1e-10).unwrap().passed());
    let x0 = DVector::from_vec(vec![1.0, 0.0]);
    let traj = implicit_midpoint(&sys, &zero(0), &x0, 0.0, 10.0, 0.01).unwrap();
    let h0 = traj.energy()[0];
    let drift = traj.energy().iter().map(|h| (h - h0).abs()).fold(0.0, f64::max);
    // Non-quadratic H: midpoint is symplectic but not exactly conservative.
    assert!(drift < 1e-4, "drift {drift:.3e}");
}

#[test]
fn general_condensation_reports_indefinite_dissipation() {
    let net = common::random_network(&mut common::rng(11));
    let n = net.internal_ports().iter().map(|p| p.ncols()).sum::<usize>();
    let c = -DMatrix::identity(n, n) * 50.0;
    match condense_general(&net, &c).unwrap() {
        Condensation::IndefiniteDissipation { min_eigenvalue } => assert!(min_eigenvalue < 0.0),
        Condensation::Monolithic(_) => panic!("negative definite symmetric coupling must fail"),
    }
}
