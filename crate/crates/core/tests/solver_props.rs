use std::sync::Arc;

use mrbv::contact::Dissipation;
use mrbv::energy::{prototype_2dof, InitialState, LoadCurve, QuadraticEnergy, ScalarCurve, State, System};
use mrbv::numeric::CubicSpline;
use mrbv::potentials::{Matrix, RatePotential, Vector, ViscousPotential};
use mrbv::rescale::{arclength, reparametrize};
use mrbv::viscous_solver::{
    apriori_stats, ed_balance_residual, incremental_functional, solve_viscous, SolverConfig, Splitting, Trajectory,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Instance {
    n: usize,
    m: usize,
    block: Vec<f64>,
    loads: Vec<(f64, f64, f64)>,
    kappa: Vec<f64>,
    weights: Vec<f64>,
    u0: Vec<f64>,
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=2, 1usize..=2).prop_flat_map(|(n, m)| {
        let k = n + m;
        (
            prop::collection::vec(-1.0..1.0f64, k * k),
            prop::collection::vec((-1.0..1.0f64, -2.0..2.0f64, 0.5..4.0f64), k),
            prop::collection::vec(0.1..1.0f64, m),
            prop::collection::vec(0.5..2.0f64, k),
            prop::collection::vec(-1.0..1.0f64, n),
        )
            .prop_map(move |(block, loads, kappa, weights, u0)| Instance { n, m, block, loads, kappa, weights, u0 })
    })
}

impl Instance {
    fn system(&self) -> System {
        let (n, m) = (self.n, self.m);
        let k = n + m;
        let r = Matrix::from_row_slice(k, k, &self.block);
        let full = &r * r.transpose() + Matrix::identity(k, k) * 0.2;
        let a = full.view((0, 0), (n, n)).into_owned();
        let b = full.view((n, 0), (m, n)).into_owned();
        let g = full.view((n, n), (m, m)).into_owned();
        let curve = |&(a0, b0, w): &(f64, f64, f64)| ScalarCurve::Sine { amp: b0, omega: w, phase: 0.0, offset: a0 };
        let f = LoadCurve::new(self.loads[..n].iter().map(curve).collect());
        let gl = LoadCurve::new(self.loads[n..].iter().map(curve).collect());
        let e = QuadraticEnergy::new(a, b, g, f, gl, 1.0).unwrap();
        let vu = ViscousPotential::weighted_quadratic(Matrix::from_diagonal(&Vector::from_column_slice(&self.weights[..n]))).unwrap();
        let vz = ViscousPotential::weighted_quadratic(Matrix::from_diagonal(&Vector::from_column_slice(&self.weights[n..]))).unwrap();
        let rate = RatePotential::new(self.kappa.clone(), self.kappa.iter().map(|x| 1.5 * x).collect()).unwrap();
        let d = Dissipation::new(vu, rate, vz).unwrap();
        let q0 = State::new(Vector::from_column_slice(&self.u0), Vector::zeros(m));
        System::new("random", Arc::new(e), d, InitialState::Fixed(q0)).unwrap()
    }
}

fn params() -> impl Strategy<Value = (f64, f64, f64)> {
    (prop_oneof![Just(0.5), Just(1.0), Just(2.0)], 0.05..1.0f64, 0.005..0.05f64)
}

fn solve(s: &System, alpha: f64, eps: f64, tau: f64) -> Trajectory {
    solve_viscous(&SolverConfig::new(eps, alpha, tau, 1.0), s, &s.initial_state(eps, alpha)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn steps_minimise_the_incremental_functional(inst in instance(), (alpha, eps, tau) in params(), dirs in prop::collection::vec(-1.0..1.0f64, 8)) {
        let s = inst.system();
        let tr = solve(&s, alpha, eps, tau);
        let e = s.energy.as_ref();
        for k in 1..tr.len() {
            let (prev, next) = (tr.state(k - 1), tr.state(k));
            let h = tr.step(k);
            let f = |q: &State| incremental_functional(&s.dissipation, e, eps, alpha, h, tr.t[k], &prev, q);
            let best = f(&next);
            let tol = 1e-10 * (1.0 + best.abs());
            prop_assert!(best <= f(&prev) + tol, "step {} does not decrease", k);
            let du = Vector::from_iterator(inst.n, dirs[..inst.n].iter().map(|x| 1e-4 * x));
            let dz = Vector::from_iterator(inst.m, dirs[4..4 + inst.m].iter().map(|x| 1e-4 * x));
            for sign in [1.0, -1.0] {
                let q = State::new(&next.u + &du * sign, &next.z + &dz * sign);
                prop_assert!(best <= f(&q) + tol, "perturbation beats step {}", k);
            }
        }
    }

    #[test]
    fn multipliers_are_dual_feasible(inst in instance(), (alpha, eps, tau) in params()) {
        let s = inst.system();
        let tr = solve(&s, alpha, eps, tau);
        let (e, d) = (s.energy.as_ref(), &s.dissipation);
        for k in 1..tr.len() {
            let h = tr.step(k);
            let zr = (&tr.z[k] - &tr.z[k - 1]) / h;
            let sigma = -&tr.zeta[k] - d.vz.grad(&(&zr * eps));
            prop_assert!(d.rate.subdiff_residual(&(&zr * h), &sigma, 1e-13) <= 1e-8, "z inclusion at step {}", k);
            let gu = e.grad_u(tr.t[k], &tr.u[k], &tr.z[k]);
            prop_assert!((&tr.mu[k] - &gu).amax() <= 1e-8 * (1.0 + gu.amax()), "u equation at step {}", k);
            prop_assert!(tr.ledger[k].iter().all(|&x| x >= 0.0), "ledger {:?}", tr.ledger[k]);
        }
    }

    #[test]
    fn balance_residual_is_an_upper_estimate(inst in instance(), (alpha, eps, tau) in params()) {
        let s = inst.system();
        let tr = solve(&s, alpha, eps, tau);
        let r = ed_balance_residual(&tr, s.energy.as_ref());
        prop_assert!(r.max_cumulative() <= 1e-8, "{}", r.max_cumulative());
    }

    #[test]
    fn splittings_agree_on_quadratic_instances(inst in instance(), (alpha, eps, tau) in params()) {
        let s = inst.system();
        let joint = solve(&s, alpha, eps, tau);
        let mut cfg = SolverConfig::new(eps, alpha, tau, 1.0);
        cfg.splitting = Some(Splitting::AlternatingUZ);
        let alt = solve_viscous(&cfg, &s, &s.initial_state(eps, alpha)).unwrap();
        for k in 0..joint.len() {
            prop_assert!(joint.state(k).dist(&alt.state(k)) <= 1e-6, "step {}", k);
        }
    }

    #[test]
    fn arclength_and_clock_are_monotone(inst in instance(), (alpha, eps, tau) in params()) {
        let s = inst.system();
        let tr = solve(&s, alpha, eps, tau);
        let arc = arclength(&tr);
        prop_assert!(arc.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(*arc.last().unwrap() >= tr.t.last().unwrap() - 1e-12);
        let c = reparametrize(&tr, &arc, 101, s.energy.as_ref(), &s.dissipation).unwrap();
        prop_assert!(c.t.windows(2).all(|w| w[1] >= w[0]));
        // non-degeneracy: the curve never stalls in (t, q)
        for k in 0..c.len() {
            prop_assert!(c.dt[k] + c.du[k].norm() + c.dz[k].norm() > 0.0);
        }
    }

    #[test]
    fn apriori_bounds_hold(inst in instance(), (alpha, eps, tau) in params()) {
        let s = inst.system();
        let tr = solve(&s, alpha, eps, tau);
        let st = apriori_stats(&tr, &s);
        prop_assert!(st.z_l1 <= st.z_bound, "{:?}", st);
        if let Some(b) = st.u_bound {
            prop_assert!(st.u_l1 <= b, "{:?}", st);
        }
    }
}

#[test]
fn arclength_excess_is_the_ledger_plus_u_variation() {
    let s = mrbv::energy::Builtin::Ode45Example.system();
    let tr = solve_viscous(&SolverConfig::new(1.0, 1.0, 1e-3, s.horizon()), &s, &s.initial_state(1.0, 1.0)).unwrap();
    let arc = arclength(&tr);
    let ledger: f64 = (1..tr.len()).map(|k| tr.step(k) * tr.ledger[k].iter().sum::<f64>()).sum();
    let u_l1 = apriori_stats(&tr, &s).u_l1;
    let excess = arc.last().unwrap() - tr.t.last().unwrap();
    assert!((excess - ledger - u_l1).abs() <= 1e-6, "{excess} vs {}", ledger + u_l1);
}

#[test]
fn reparametrisation_round_trip_on_a_smooth_run() {
    let s = mrbv::energy::Builtin::Ode45Example.system();
    let tr = solve_viscous(&SolverConfig::new(1.0, 1.0, 1e-3, s.horizon()), &s, &s.initial_state(1.0, 1.0)).unwrap();
    let c = reparametrize(&tr, &arclength(&tr), 3000, s.energy.as_ref(), &s.dissipation).unwrap();
    // q(t) from the trajectory by an independent spline, evaluated at t(s)
    for i in 0..2 {
        let spline = CubicSpline::new(tr.t.clone(), tr.u.iter().map(|v| v[i]).collect()).unwrap();
        for k in 0..c.len() {
            let t = c.t[k].clamp(0.0, s.horizon());
            assert!((spline.eval(t) - c.u[k][i]).abs() <= 1e-6, "node {k}");
        }
    }
}

#[test]
fn normalisation_residual_on_the_prototype() {
    let s = prototype_2dof();
    let tr = solve_viscous(&SolverConfig::new(1e-2, 1.0, 1e-4, s.horizon()), &s, &s.initial_state(1e-2, 1.0)).unwrap();
    let c = reparametrize(&tr, &arclength(&tr), 4000, s.energy.as_ref(), &s.dissipation).unwrap();
    assert!(c.max_norm_residual() <= 5e-3, "{}", c.max_norm_residual());
}

#[test]
fn prototype_length_and_trajectories_settle_along_the_sweep() {
    let s = prototype_2dof();
    let runs: Vec<Trajectory> = [1e-1, 5e-2, 2.5e-2, 1.25e-2]
        .iter()
        .map(|&eps| solve_viscous(&SolverConfig::new(eps, 1.0, 1e-3, s.horizon()), &s, &s.initial_state(eps, 1.0)).unwrap())
        .collect();
    let lengths: Vec<f64> = runs.iter().map(|tr| *arclength(tr).last().unwrap()).collect();
    assert!(lengths.iter().all(|&l| l < 2.0 * lengths[0]), "{lengths:?}");
    // same time grid: sup distance between consecutive eps shrinks
    let gaps: Vec<f64> = runs
        .windows(2)
        .map(|w| (0..w[0].len()).map(|k| w[0].state(k).dist(&w[1].state(k))).fold(0.0, f64::max))
        .collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
}
