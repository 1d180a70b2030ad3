//! Acceptance criteria 1-8. Runs without the libtest harness so that the
//! PASS/FAIL line of every criterion is always printed; exits nonzero when
//! any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use mrbv::bv_analysis::{regime_timeline, Tolerances};
use mrbv::contact::contact_numeric;
use mrbv::energy::{ode_system, prototype_2dof, Builtin, OdeParams};
use mrbv::pipeline::{run_eps, RunSettings};
use mrbv::potentials::{Custom2D, Matrix, ScalarProfile, Vector, ViscousPotential};
use mrbv::probes::{contact_properties, lower_bound_probes, mosco_probes, Family};
use mrbv::rescale::{arclength, reparametrize};
use mrbv::viscous_solver::{apriori_stats, ed_balance_residual, solve_viscous, SolverConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// 10 x 10 grid: rates `v(i)` against log-spaced sigma in [1e-2, 1e2].
fn grid(v: impl Fn(usize) -> Vector) -> Vec<(Vector, f64)> {
    (0..10).flat_map(|i| {
        let v = v(i);
        (0..10).map(move |j| (v.clone(), 10f64.powf(-2.0 + 4.0 * j as f64 / 9.0)))
    })
    .collect()
}

fn angle(i: usize, r: f64) -> Vector {
    let th = 0.37 + 2.0 * PI * i as f64 / 10.0;
    Vector::from_vec(vec![r * th.cos(), r * th.sin()])
}

fn worst(vp: &ViscousPotential, pts: &[(Vector, f64)], formula: impl Fn(&Vector, f64) -> f64) -> f64 {
    pts.iter().map(|(v, s)| rel(contact_numeric(vp, v, *s).0, formula(v, *s))).fold(0.0, f64::max)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut cases: Vec<(String, f64)> = Vec::new();
    // (A): c_p psi^{1/p} sigma^{1/p'}
    let w = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.7]);
    for p in [1.5, 3.0] {
        let vp = ViscousPotential::p_homogeneous(p, w.clone()).unwrap();
        let q = p / (p - 1.0);
        let pts = grid(|i| angle(i, 0.2 + 0.4 * i as f64));
        let e = worst(&vp, &pts, |v, s| {
            let psi = (v.dot(&(&w * v))).powf(p / 2.0) / p;
            p.powf(1.0 / p) * q.powf(1.0 / q) * psi.powf(1.0 / p) * s.powf(1.0 / q)
        });
        cases.push((format!("A(p={p})"), e));
    }
    // (B): sqrt(a v1^2 + b v2^2) sqrt(2 sigma)
    let (a, b) = (2.0, 0.5);
    let vp = ViscousPotential::weighted_quadratic(Matrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])).unwrap();
    let pts = grid(|i| angle(i, 0.3 + 0.5 * i as f64));
    cases.push(("B".into(), worst(&vp, &pts, |v, s| (a * v[0] * v[0] + b * v[1] * v[1]).sqrt() * (2.0 * s).sqrt())));
    // (C): two-branch formula
    let vp = ViscousPotential::custom2d(Custom2D::C);
    let pts = grid(|i| angle(i, 0.5 + 0.3 * i as f64));
    let e = worst(&vp, &pts, |v, s| {
        let (v1, v2) = (v[0], v[1]);
        if v1 * v1 >= (2.0 * s - 1.0) * v2 * v2 {
            (v1 * v1 + v2 * v2).sqrt() * (2.0 * s).sqrt()
        } else {
            0.5 * (2.0 * v1 * v1 + v2 * v2).sqrt() * (4.0 * s - 1.0).sqrt() + 0.5 * v2.abs()
        }
    });
    cases.push(("C".into(), e));
    // (D) on the axes
    let vp = ViscousPotential::custom2d(Custom2D::D);
    let axis = grid(|i| {
        let r = 0.25 + 0.5 * (i / 2) as f64;
        if i % 2 == 0 { Vector::from_vec(vec![r, 0.0]) } else { Vector::from_vec(vec![0.0, -r]) }
    });
    let e = worst(&vp, &axis, |v, s| if v[1] == 0.0 { v[0].abs() * (2.0 * s).sqrt() } else { v[1].abs() * (4.0 * s / 3.0).powf(0.75) });
    cases.push(("D axes".into(), e));
    // norm-based: |v| kappa(sigma), and b(v, psi*(xi)) = |v| max(zeta'(0), |xi|)
    let v3 = |i: usize| Vector::from_vec(vec![0.3 * i as f64 + 0.1, -0.5, 0.2 * (i as f64).sin()]);
    let (la, lb) = (0.5, 2.0);
    let lq = ViscousPotential::norm_based(3, ScalarProfile::LinearQuadratic { a: la, b: lb }).unwrap();
    cases.push(("norm lin-quad kappa".into(), worst(&lq, &grid(v3), |v, s| v.norm() * (la + (2.0 * lb * s).sqrt()))));
    let p = 3.0;
    let pw = ViscousPotential::norm_based(3, ScalarProfile::Power { p }).unwrap();
    let q = p / (p - 1.0);
    cases.push((
        "norm power kappa".into(),
        worst(&pw, &grid(v3), |v, s| v.norm() * p.powf(1.0 / p) * q.powf(1.0 / q) * (1.0 / p).powf(1.0 / p) * s.powf(1.0 / q)),
    ));
    for (name, vp, slope0) in [("lin-quad", &lq, la), ("power", &pw, 0.0)] {
        let mut e = 0.0f64;
        for i in 0..10 {
            for j in 0..10 {
                let v = v3(i);
                let xi = Vector::from_vec(vec![0.1 + 0.25 * j as f64, 0.2, -0.1]);
                let num = contact_numeric(vp, &v, vp.conj_value(&xi)).0;
                e = e.max(rel(num, v.norm() * slope0.max(xi.norm())));
            }
        }
        cases.push((format!("norm {name} conjugate"), e));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let max = cases.iter().map(|c| c.1).fold(0.0, f64::max);
    let list: Vec<String> = cases.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    verdict(max <= 1e-8 && elapsed < 5.0, format!("max rel err {max:.2e} over {} cases, {elapsed:.2}s [{}]", cases.len(), list.join(", ")))
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let reports: Vec<_> = Family::ALL.iter().map(|&f| contact_properties(f, 1000, 2)).collect();
    let elapsed = start.elapsed().as_secs_f64();
    let failures: usize = reports.iter().map(|r| r.failures).sum();
    let first = reports.iter().find_map(|r| r.first_failure.clone()).unwrap_or_default();
    verdict(
        failures == 0 && elapsed < 30.0,
        format!("{} families x 1000 draws, {failures} failures, {elapsed:.2}s {first}", reports.len()),
    )
}

fn criterion_3() -> Verdict {
    let r = mosco_probes(1000, 3);
    verdict(r.passed(), format!("{} random instances, {} non-monotone {}", r.trials, r.failures, r.first_failure.unwrap_or_default()))
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let s = Builtin::Ode45Example.system();
    let horizon = 2.0 * PI;
    let tr = solve_viscous(&SolverConfig::new(1.0, 1.0, 1e-3, horizon), &s, &s.initial_state(1.0, 1.0)).unwrap();
    let u_l1 = apriori_stats(&tr, &s).u_l1;
    // |a omega / (lambda + i omega r)| T with (lambda, omega, a, r) = (1, 1, 1, 1)
    let exact = 1.0 / (1.0f64 + 1.0).sqrt() * horizon;
    let err = rel(u_l1, exact);
    let growth: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&eps| {
            let s = ode_system(OdeParams::blow_up(eps), 1.0);
            let tr = solve_viscous(&SolverConfig::new(eps, 1.0, eps / 20.0, 1.0), &s, &s.initial_state(eps, 1.0)).unwrap();
            apriori_stats(&tr, &s).u_l1
        })
        .collect();
    let monotone = growth.windows(2).all(|w| w[1] > w[0]);
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        err <= 0.01 && monotone && elapsed < 60.0,
        format!("u_L1 {u_l1:.5} vs {exact:.5} (rel {err:.1e}); blow-up u_L1 {growth:.4?}; {elapsed:.2}s"),
    )
}

fn criterion_5() -> Verdict {
    let s = prototype_2dof();
    let mut ok = true;
    let mut detail = Vec::new();
    for alpha in [0.5, 1.0, 2.0] {
        let mut totals = Vec::new();
        let mut max_signed = f64::NEG_INFINITY;
        for k in 0..4 {
            let tau = 1e-3 / 2f64.powi(k);
            let tr = solve_viscous(&SolverConfig::new(0.1, alpha, tau, s.horizon()), &s, &s.initial_state(0.1, alpha)).unwrap();
            let r = ed_balance_residual(&tr, s.energy.as_ref());
            totals.push(r.total().abs());
            max_signed = max_signed.max(r.max_cumulative());
        }
        let ratios: Vec<f64> = totals.windows(2).map(|w| w[0] / w[1]).collect();
        ok &= ratios.iter().all(|r| (1.8..=2.2).contains(r)) && max_signed <= 1e-8;
        detail.push(format!("alpha {alpha}: ratios {ratios:.3?}, max signed {max_signed:.1e}"));
    }
    verdict(ok, detail.join("; "))
}

fn criterion_6() -> Verdict {
    let s = Builtin::DoubleWellJump.system();
    let settings = RunSettings { tau: Some(1e-5), n_nodes: 2000, finsler_nodes: 64, ..RunSettings::new(1.0) };
    let run = match run_eps(&s, &settings, 1e-3) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("pipeline error: {e}")),
    };
    let gaps: Vec<f64> = run.jumps.iter().map(|j| j.gap().unwrap_or(f64::INFINITY)).collect();
    let var_gap = rel(run.variation, run.m0_integral);
    let drops: Vec<String> = run
        .jumps
        .iter()
        .map(|j| format!("t*={:.4} drop {:.5} cost {:.5}", j.t_star, j.drop, j.finsler.as_ref().map_or(f64::NAN, |f| f.cost)))
        .collect();
    verdict(
        !gaps.is_empty() && gaps.iter().all(|&g| g <= 0.02) && var_gap <= 0.02,
        format!("{} jump(s) [{}], gaps {}; Var {:.5} vs M0 integral {:.5} (rel {var_gap:.1e})", gaps.len(), drops.join(", "), sci(&gaps), run.variation, run.m0_integral),
    )
}

fn criterion_7() -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for b in Builtin::ALL {
        let s = b.system();
        let e = s.energy.as_ref();
        for (alpha, eps) in [(0.5, 1e-3), (1.0, 1e-3), (2.0, 1e-2)] {
            // the double well needs a finer step to resolve its jump
            let tau = if b == Builtin::DoubleWellJump { 1e-5 } else { 0.1 * f64::min(eps, eps.powf(alpha)) };
            let tr = solve_viscous(&SolverConfig::new(eps, alpha, tau, s.horizon()), &s, &s.initial_state(eps, alpha)).unwrap();
            let c = reparametrize(&tr, &arclength(&tr), 2000, e, &s.dissipation).unwrap();
            let classes = regime_timeline(alpha, &c, e, &s.dissipation, &Tolerances::for_curve(&c, e));
            let classified = classes.iter().filter(|x| x.label != mrbv::bv_analysis::RegimeLabel::Unclassified).count();
            let bad = classes.iter().filter(|x| x.label.violates(alpha)).count();
            ok &= bad == 0;
            detail.push(format!("{}/{alpha}: {bad}/{classified}", b.name()));
        }
    }
    let s = prototype_2dof();
    let stat: Vec<f64> = [1e-1, 3e-2, 1e-2]
        .iter()
        .map(|&eps| {
            let settings = RunSettings { n_nodes: 2000, ..RunSettings::new(2.0) };
            run_eps(&s, &settings, eps).map_or(f64::INFINITY, |r| r.bv.stationarity_max)
        })
        .collect();
    let decreasing = stat.windows(2).all(|w| w[1] < w[0]);
    ok &= decreasing;
    verdict(ok, format!("violations/classified [{}]; prototype alpha 2 stationarity {}", detail.join(", "), sci(&stat)))
}

fn criterion_8(prerequisites: bool) -> Verdict {
    let r = lower_bound_probes(1000, 8);
    verdict(
        r.passed() && prerequisites,
        format!("lower-bound probes {} draws, {} failures; criteria 2, 3, 5 {}", r.trials, r.failures, if prerequisites { "pass" } else { "fail" }),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let crits: [Criterion; 7] = [
        ("contact closed forms", criterion_1),
        ("contact potential properties", criterion_2),
        ("Mosco recovery", criterion_3),
        ("analytic ODE oracle", criterion_4),
        ("energy-dissipation balance", criterion_5),
        ("jump condition", criterion_6),
        ("regime inclusions", criterion_7),
    ];
    let mut passed = Vec::new();
    for (i, (name, f)) in crits.iter().enumerate() {
        let v = f();
        println!("criterion {} ({name}): {} - {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        passed.push(v.pass);
    }
    let v = criterion_8(passed[1] && passed[2] && passed[4]);
    println!("criterion 8 (property-based coverage): {} - {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    passed.push(v.pass);
    let n = passed.iter().filter(|p| **p).count();
    println!("acceptance: {n}/{} criteria passed", passed.len());
    if n != passed.len() {
        std::process::exit(1);
    }
}
