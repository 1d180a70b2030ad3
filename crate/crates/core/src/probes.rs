//! Random-probe property suites for the contact potentials, the joint
//! B-function and the limit M-function. Each draw owns a ChaCha stream
//! seeded from (seed, index), so batches are reproducible and run through
//! [`crate::par::map`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contact::{
    b_function, contact_numeric, joint_b, lower_bound_check, mosco_recovery_error, viscous_contact, Dissipation, JointQuery, Psi,
};
use crate::numeric::log_scale_infimum;
use crate::potentials::{conj_w_z, Custom2D, Matrix, RatePotential, ScalarProfile, Vector, ViscousPotential};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// description of the first failing draw
    pub first_failure: Option<String>,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn collect(name: String, outcomes: Vec<Result<(), String>>) -> Self {
        let trials = outcomes.len();
        let failures = outcomes.iter().filter(|o| o.is_err()).count();
        let first_failure = outcomes.into_iter().find_map(|o| o.err());
        Self { name, trials, failures, first_failure }
    }
}

fn stream(seed: u64, i: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(i as u64);
    r
}

fn run(name: impl Into<String>, n: usize, seed: u64, f: impl Fn(&mut ChaCha8Rng) -> Result<(), String> + Sync + Send) -> ProbeReport {
    let idx: Vec<usize> = (0..n).collect();
    let out = crate::par::map(&idx, |&i| f(&mut stream(seed, i)));
    ProbeReport::collect(name.into(), out)
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.gen_range(-r..r)))
}

fn rand_spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let a = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() + Matrix::identity(n, n) * rng.gen_range(0.2..2.0)
}

/// The shipped viscous-potential families, with randomised parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Quadratic,
    WeightedQuadratic,
    PHomogeneous,
    NormPower,
    NormLinearQuadratic,
    CustomC,
    CustomD,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Quadratic,
        Family::WeightedQuadratic,
        Family::PHomogeneous,
        Family::NormPower,
        Family::NormLinearQuadratic,
        Family::CustomC,
        Family::CustomD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Quadratic => "quadratic",
            Family::WeightedQuadratic => "weighted-quadratic",
            Family::PHomogeneous => "p-homogeneous",
            Family::NormPower => "norm-power",
            Family::NormLinearQuadratic => "norm-linear-quadratic",
            Family::CustomC => "custom-C",
            Family::CustomD => "custom-D",
        }
    }

    pub fn sample(self, rng: &mut ChaCha8Rng) -> ViscousPotential {
        let dim = match self {
            Family::CustomC | Family::CustomD => 2,
            _ => rng.gen_range(1..=3),
        };
        match self {
            Family::Quadratic => ViscousPotential::quadratic(dim),
            Family::WeightedQuadratic => ViscousPotential::weighted_quadratic(rand_spd(rng, dim)).expect("spd"),
            Family::PHomogeneous => ViscousPotential::p_homogeneous(rng.gen_range(1.3..4.0), rand_spd(rng, dim)).expect("spd"),
            Family::NormPower => ViscousPotential::norm_based(dim, ScalarProfile::Power { p: rng.gen_range(1.3..4.0) }).expect("p > 1"),
            Family::NormLinearQuadratic => ViscousPotential::norm_based(
                dim,
                ScalarProfile::LinearQuadratic { a: rng.gen_range(0.0..1.5), b: rng.gen_range(0.2..3.0) },
            )
            .expect("valid profile"),
            Family::CustomC => ViscousPotential::custom2d(Custom2D::C),
            Family::CustomD => ViscousPotential::custom2d(Custom2D::D),
        }
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Structural properties of the contact potential on `n` random draws.
pub fn contact_properties(family: Family, n: usize, seed: u64) -> ProbeReport {
    const SLACK: f64 = 1e-9;
    run(format!("contact properties [{}]", family.name()), n, seed, move |rng| {
        let vp = family.sample(rng);
        let dim = vp.dim();
        let b = |v: &Vector, s: f64| viscous_contact(&vp, v, s);
        let v = rand_vec(rng, dim, 3.0);
        let w = rand_vec(rng, dim, 3.0);
        let sigma = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..5.0) };
        let fail = |what: &str, detail: String| Err(format!("{}: {what} ({detail}) v = {:?}, sigma = {sigma}", family.name(), v.as_slice()));
        // vanishes at zero rate, positive otherwise
        if b(&Vector::zeros(dim), sigma) != 0.0 {
            return fail("zero rate", String::new());
        }
        if sigma > 0.0 && v.norm() > 0.0 && b(&v, sigma) <= 0.0 {
            return fail("positivity", format!("{}", b(&v, sigma)));
        }
        // in sigma: monotone, midpoint concave, above the ri part, attained
        let s2 = sigma + rng.gen_range(0.0..3.0);
        let (b1v, b2v) = (b(&v, sigma), b(&v, s2));
        if b1v > b2v + SLACK * (1.0 + b2v) {
            return fail("sigma monotonicity", format!("{b1v} > {b2v}"));
        }
        let mid = b(&v, 0.5 * (sigma + s2));
        if mid < 0.5 * (b1v + b2v) - SLACK * (1.0 + mid) {
            return fail("sigma concavity", format!("{mid} < {}", 0.5 * (b1v + b2v)));
        }
        if (b(&v, 0.0) - vp.ri(&v)).abs() > SLACK * (1.0 + b(&v, 0.0)) {
            return fail("sigma value at sigma = 0", String::new());
        }
        if sigma > 0.0 && v.norm() > 1e-3 {
            if b1v <= vp.ri(&v) {
                return fail("sigma strict gain over ri part", String::new());
            }
            match contact_numeric(&vp, &v, sigma).1 {
                Some(t) if t > 0.0 && t.is_finite() => {}
                other => return fail("sigma attainment", format!("{other:?}")),
            }
        }
        // in v: 1-homogeneous and midpoint convex in v
        let lam = rng.gen_range(0.1..10.0);
        if rel_gap(b(&(&v * lam), sigma), lam * b1v) > 1e-9 {
            return fail("v homogeneity", format!("lambda = {lam}"));
        }
        let bm = b(&((&v + &w) * 0.5), sigma);
        if bm > 0.5 * (b1v + b(&w, sigma)) + SLACK * (1.0 + bm) {
            return fail("v convexity", format!("w = {:?}", w.as_slice()));
        }
        // R + V against a direct tau-infimum of the B-function
        let kp: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..2.0)).collect();
        let km: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..2.0)).collect();
        let rate = RatePotential::new(kp, km).expect("positive");
        if sigma > 0.0 && v.norm() > 0.0 {
            let psi = Psi::with_rate(&vp, &rate);
            let direct = log_scale_infimum(|t| b_function(psi, t, &v, sigma).unwrap_or(f64::INFINITY)).1;
            let split = rate.value(&v) + b1v;
            if rel_gap(direct, split) > 1e-8 {
                return fail("splitting", format!("{direct} vs {split}"));
            }
        }
        // Fenchel-type lower bound, for V and for R + V
        let eta = rand_vec(rng, dim, 3.0);
        let lhs = b(&v, vp.conj_value(&eta));
        if lhs < eta.dot(&v) - SLACK * (1.0 + lhs.abs()) {
            return fail("for V", format!("{lhs} < {}", eta.dot(&v)));
        }
        let wstar = conj_w_z(&vp, &rate, &eta).map_err(|e| e.to_string())?.0;
        let lhs = rate.value(&v) + b(&v, wstar);
        if lhs < eta.dot(&v) - SLACK * (1.0 + lhs.abs()) {
            return fail("for R + V", format!("{lhs} < {}", eta.dot(&v)));
        }
        Ok(())
    })
}

fn rand_quadratic_dissipation(rng: &mut ChaCha8Rng) -> Dissipation {
    let (nu, nz) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
    let vu = ViscousPotential::weighted_quadratic(rand_spd(rng, nu)).expect("spd");
    let vz = ViscousPotential::weighted_quadratic(rand_spd(rng, nz)).expect("spd");
    let rate = RatePotential::new((0..nz).map(|_| rng.gen_range(0.1..2.0)).collect(), (0..nz).map(|_| rng.gen_range(0.1..2.0)).collect())
        .expect("positive");
    Dissipation::new(vu, rate, vz).expect("dims")
}

/// Lower bounds of the joint B-function on random quadratic instances.
pub fn lower_bound_probes(n: usize, seed: u64) -> ProbeReport {
    run("joint-B lower bounds", n, seed, |rng| {
        let d = rand_quadratic_dissipation(rng);
        let alpha = *[0.5, 1.0, 2.0, rng.gen_range(0.2..3.0)].get(rng.gen_range(0..4)).unwrap();
        let eps = if rng.gen_bool(0.2) { 0.0 } else { 10f64.powf(rng.gen_range(-4.0..0.0)) };
        let tau = if rng.gen_bool(0.2) { 0.0 } else { 10f64.powf(rng.gen_range(-4.0..1.0)) };
        let zero_sigma = rng.gen_bool(0.2);
        let q = JointQuery {
            tau,
            u_rate: rand_vec(rng, d.vu.dim(), 3.0),
            z_rate: rand_vec(rng, d.vz.dim(), 3.0),
            sigma_u: if zero_sigma { 0.0 } else { rng.gen_range(0.0..4.0) },
            sigma_z: rng.gen_range(0.0..4.0),
            alpha,
            eps,
        };
        let rep = lower_bound_check(&q, &d, 1e-10).map_err(|e| e.to_string())?;
        if rep.holds() {
            Ok(())
        } else {
            Err(format!("{q:?}: {rep:?}"))
        }
    })
}

/// Recovery-sequence errors at eps = 10^-k, k = 2..=6, for alpha = 1:
/// nonincreasing in k up to roundoff, strictly decreasing where the limit
/// optimiser is not attained (zero slopes).
pub fn mosco_probes(n: usize, seed: u64) -> ProbeReport {
    run("Mosco recovery", n, seed, |rng| {
        let d = rand_quadratic_dissipation(rng);
        let u = rand_vec(rng, d.vu.dim(), 2.0);
        let z = rand_vec(rng, d.vz.dim(), 2.0);
        let attained = rng.gen_bool(0.5);
        let (su, sz) = if attained { (rng.gen_range(0.01..3.0), rng.gen_range(0.0..3.0)) } else { (0.0, 0.0) };
        let errs: Vec<f64> = (2..=6).map(|k| mosco_recovery_error(&d, &u, &z, su, sz, k)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let scale = 1e-12 * (1.0 + joint_b(&JointQuery { tau: 0.0, u_rate: u.clone(), z_rate: z.clone(), sigma_u: su, sigma_z: sz, alpha: 1.0, eps: 0.0 }, &d).map_err(|e| e.to_string())?.value());
        let ok = errs.windows(2).all(|w| if attained { w[1] <= w[0] + scale } else { w[1] < w[0] });
        if ok {
            Ok(())
        } else {
            Err(format!("errors {errs:?} (attained: {attained})"))
        }
    })
}

/// Every suite at its default size, as run by `selftest`.
pub fn all_suites(n: usize, seed: u64) -> Vec<ProbeReport> {
    let mut out: Vec<ProbeReport> = Family::ALL.iter().map(|&f| contact_properties(f, n, seed)).collect();
    out.push(lower_bound_probes(n, seed));
    out.push(mosco_probes(n, seed));
    out
}
