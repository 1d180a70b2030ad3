//! Time-incremental minimisation for the viscous system and the audit of its
//! energy-dissipation balance.

use std::io::{Read, Write};

use log::warn;
use nalgebra::Cholesky;
use thiserror::Error;

use crate::energy::{Energy, QuadraticEnergy, State, System};
use crate::potentials::{conj_w_z, Matrix, RatePotential, Vector, ViscousKind, ViscousPotential};
use crate::contact::Dissipation;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("inner iteration did not converge at step {step} (t = {t}): residual {residual:e}")]
    NonConvergence { step: usize, t: f64, residual: f64 },
    #[error("trajectory i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Splitting {
    /// Exact coupled minimisation (quadratic energy and quadratic viscosities).
    Joint,
    /// Alternate u- and z-minimisation until both blocks are stationary.
    AlternatingUZ,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub eps: f64,
    pub alpha: f64,
    pub tau: f64,
    pub horizon: f64,
    /// `None` picks Joint when available, AlternatingUZ otherwise.
    pub splitting: Option<Splitting>,
    pub tol: f64,
    pub max_iter: usize,
}

impl SolverConfig {
    pub fn new(eps: f64, alpha: f64, tau: f64, horizon: f64) -> Self {
        Self { eps, alpha, tau, horizon, splitting: None, tol: 1e-12, max_iter: 500 }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(SolverError::Config(format!("eps = {} must lie in (0, 1]", self.eps)));
        }
        if !(self.alpha > 0.0) {
            return Err(SolverError::Config("alpha must be positive".into()));
        }
        if !(self.tau > 0.0) || !(self.horizon > 0.0) {
            return Err(SolverError::Config("tau and the horizon must be positive".into()));
        }
        if self.tau >= self.eps.powf(self.alpha).min(self.eps) {
            warn!(
                "tau = {} is not below min(eps^alpha, eps) = {}; the scheme will under-resolve the viscous time scale",
                self.tau,
                self.eps.powf(self.alpha).min(self.eps)
            );
        }
        Ok(())
    }

    pub fn eps_alpha(&self) -> f64 {
        self.eps.powf(self.alpha)
    }
}

/// Output of one viscous solve. Index 0 is the initial node; ledger and
/// multipliers at node n > 0 belong to the step (t_{n-1}, t_n].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub eps: f64,
    pub alpha: f64,
    pub t: Vec<f64>,
    pub u: Vec<Vector>,
    pub z: Vec<Vector>,
    pub mu: Vec<Vector>,
    pub zeta: Vec<Vector>,
    /// V_u^{eps^a}(u'), R(z'), V_z^eps(z'), eps^-a V_u*(-mu), eps^-1 W_z*(-zeta)
    pub ledger: Vec<[f64; 5]>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn state(&self, n: usize) -> State {
        State::new(self.u[n].clone(), self.z[n].clone())
    }

    pub fn step(&self, n: usize) -> f64 {
        self.t[n] - self.t[n - 1]
    }

    pub fn dissipation_rate(&self, n: usize) -> f64 {
        self.ledger[n].iter().sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SolverError> {
        let (n, m) = (self.u[0].len(), self.z[0].len());
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("u_{i}")));
        header.extend((0..m).map(|i| format!("z_{i}")));
        header.extend((0..n).map(|i| format!("mu_{i}")));
        header.extend((0..m).map(|i| format!("zeta_{i}")));
        header.extend((0..5).map(|i| format!("ledger_{i}")));
        wr.write_record(&header).map_err(io_err)?;
        for k in 0..self.len() {
            let mut row = vec![fmt_num(self.t[k])];
            row.extend(self.u[k].iter().map(|x| fmt_num(*x)));
            row.extend(self.z[k].iter().map(|x| fmt_num(*x)));
            row.extend(self.mu[k].iter().map(|x| fmt_num(*x)));
            row.extend(self.zeta[k].iter().map(|x| fmt_num(*x)));
            row.extend(self.ledger[k].iter().map(|x| fmt_num(*x)));
            wr.write_record(&row).map_err(io_err)?;
        }
        wr.flush().map_err(|e| SolverError::Io(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R, eps: f64, alpha: f64) -> Result<Self, SolverError> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(io_err)?.clone();
        let count = |p: &str| header.iter().filter(|h| h.starts_with(p)).count();
        let (n, m) = (count("u_"), count("z_"));
        if header.len() != 1 + 2 * n + 2 * m + 5 {
            return Err(SolverError::Io("unexpected trajectory header".into()));
        }
        let mut tr = Trajectory { eps, alpha, t: vec![], u: vec![], z: vec![], mu: vec![], zeta: vec![], ledger: vec![] };
        for rec in rd.records() {
            let rec = rec.map_err(io_err)?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| SolverError::Io(e.to_string())))
                .collect::<Result<_, _>>()?;
            let mut off = 1;
            let mut take = |k: usize| {
                let v = Vector::from_column_slice(&vals[off..off + k]);
                off += k;
                v
            };
            tr.t.push(vals[0]);
            tr.u.push(take(n));
            tr.z.push(take(m));
            tr.mu.push(take(n));
            tr.zeta.push(take(m));
            let l = take(5);
            tr.ledger.push([l[0], l[1], l[2], l[3], l[4]]);
        }
        Ok(tr)
    }
}

/// Round-trip-exact decimal formatting used by every CSV writer.
pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

fn io_err(e: csv::Error) -> SolverError {
    SolverError::Io(e.to_string())
}

/// W when the potential is 1/2 v^T W v.
fn quadratic_weight(v: &ViscousPotential) -> Option<Matrix> {
    match v.kind() {
        ViscousKind::PHomogeneous { p, weight, .. } if *p == 2.0 => Some(weight.clone()),
        ViscousKind::NormBased { .. } if v.homogeneity() == Some(2.0) => Some(Matrix::identity(v.dim(), v.dim())),
        _ => None,
    }
}

/// Step-independent factorisations for the coupled quadratic solve.
struct JointCache {
    chol: Cholesky<f64, nalgebra::Dyn>,
    kinv_bt: Matrix,
    m: Matrix,
    s: Matrix,
    wu: Matrix,
}

impl JointCache {
    fn new(e: &QuadraticEnergy, wu: Matrix, wz: &Matrix, eps: f64, eps_alpha: f64, tau: f64) -> Option<Self> {
        let k = &wu * (eps_alpha / tau) + &e.a;
        let chol = k.cholesky()?;
        let kinv_bt = chol.solve(&e.b.transpose());
        let s = &e.g - &e.b * &kinv_bt;
        let m = &s + wz * (eps / tau);
        Some(Self { chol, kinv_bt, m, s, wu })
    }
}

/// The per-solve context of the incremental scheme.
pub struct Stepper<'a> {
    cfg: SolverConfig,
    energy: &'a dyn Energy,
    d: &'a Dissipation,
    tau: f64,
    joint: Option<JointCache>,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &SolverConfig, system: &'a System, tau: f64) -> Result<Self, SolverError> {
        cfg.validate()?;
        let energy = system.energy.as_ref();
        let d = &system.dissipation;
        let want_joint = cfg.splitting != Some(Splitting::AlternatingUZ);
        let joint = if want_joint {
            match (energy.as_quadratic(), quadratic_weight(&d.vu), quadratic_weight(&d.vz)) {
                (Some(q), Some(wu), Some(wz)) => JointCache::new(q, wu, &wz, cfg.eps, cfg.eps_alpha(), tau),
                _ => None,
            }
        } else {
            None
        };
        if cfg.splitting == Some(Splitting::Joint) && joint.is_none() {
            warn!("joint splitting needs quadratic energy and viscosities; alternating to convergence instead");
        }
        Ok(Self { cfg: cfg.clone(), energy, d, tau, joint })
    }

    pub fn splitting(&self) -> Splitting {
        if self.joint.is_some() {
            Splitting::Joint
        } else {
            Splitting::AlternatingUZ
        }
    }

    /// One minimisation step at time `t` from `prev`.
    pub fn step(&self, step: usize, t: f64, prev: &State) -> Result<State, SolverError> {
        match &self.joint {
            Some(c) => Ok(self.step_joint(c, t, prev)),
            None => self.step_alternating(step, t, prev),
        }
    }

    fn step_joint(&self, c: &JointCache, t: f64, prev: &State) -> State {
        let q = self.energy.as_quadratic().expect("joint cache implies quadratic energy");
        let ea = self.cfg.eps_alpha();
        let b = q.f_load.eval(t) + &c.wu * &prev.u * (ea / self.tau);
        let kinv_b = c.chol.solve(&b);
        let lin = &c.s * &prev.z + &q.b * &kinv_b - q.g_load.eval(t);
        let dz = cd_shrink(&c.m, &lin, &self.d.rate, self.cfg.tol);
        let z = &prev.z + dz;
        let u = kinv_b - &c.kinv_bt * &z;
        State::new(u, z)
    }

    fn step_alternating(&self, step: usize, t: f64, prev: &State) -> Result<State, SolverError> {
        let mut q = prev.clone();
        let mut change = f64::INFINITY;
        for _ in 0..self.cfg.max_iter {
            let u = self.solve_u(t, &prev.u, &q.u, &q.z);
            let z = self.solve_z(t, &prev.z, &u, &q.z);
            change = ((&u - &q.u).norm_squared() + (&z - &q.z).norm_squared()).sqrt();
            let scale = 1.0 + u.norm() + z.norm();
            q = State::new(u, z);
            if change <= self.cfg.tol * scale {
                return Ok(q);
            }
        }
        if change <= 1e3 * self.cfg.tol * (1.0 + q.u.norm() + q.z.norm()) {
            warn!("step {step}: alternating iteration stalled at change {change:e}");
            return Ok(q);
        }
        Err(SolverError::NonConvergence { step, t, residual: change })
    }

    /// argmin_u tau V_u^{eps^a}((u - u_prev)/tau) + E(t, u, z): damped Newton
    /// with a difference-quotient Hessian.
    fn solve_u(&self, t: f64, u_prev: &Vector, start: &Vector, z: &Vector) -> Vector {
        let vu = &self.d.vu;
        let c = self.cfg.eps_alpha() / self.tau;
        let phi = |u: &Vector| vu.value(&((u - u_prev) * c)) / c + self.energy.value(t, u, z);
        let grad = |u: &Vector| vu.grad(&((u - u_prev) * c)) + self.energy.grad_u(t, u, z);
        let mut u = start.clone();
        let mut g = grad(&u);
        for _ in 0..100 {
            let n = u.len();
            let mut h = Matrix::zeros(n, n);
            for j in 0..n {
                let dh = 1e-6 * (1.0 + u[j].abs());
                let mut up = u.clone();
                up[j] += dh;
                let mut um = u.clone();
                um[j] -= dh;
                h.set_column(j, &((grad(&up) - grad(&um)) / (2.0 * dh)));
            }
            let h = (&h + h.transpose()) * 0.5;
            let dir = match h.clone().cholesky() {
                Some(ch) => -ch.solve(&g),
                None => -&g / c,
            };
            let f0 = phi(&u);
            let gn = g.norm();
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand = &u + &dir * step;
                let gc = grad(&cand);
                if phi(&cand) <= f0 || gc.norm() < gn {
                    u = cand;
                    g = gc;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || dir.norm() * step <= 1e-15 * (1.0 + u.norm()) {
                break;
            }
        }
        u
    }

    /// argmin_z R(z - z_prev) + tau V_z^eps((z - z_prev)/tau) + E(t, u, z) by
    /// exact coordinate minimisation.
    fn solve_z(&self, t: f64, z_prev: &Vector, u: &Vector, start: &Vector) -> Vector {
        let vz = &self.d.vz;
        let rate = &self.d.rate;
        let c = self.cfg.eps / self.tau;
        let mut z = start.clone();
        let m = z.len();
        for _ in 0..200 {
            let mut change = 0.0f64;
            for i in 0..m {
                let partial = |x: f64, z: &Vector| {
                    let mut w = z.clone();
                    w[i] = z_prev[i] + x;
                    vz.grad(&((&w - z_prev) * c))[i] + self.energy.grad_z(t, u, &w)[i]
                };
                let g0 = partial(0.0, &z);
                let (kp, km) = (rate.kappa_plus()[i], rate.kappa_minus()[i]);
                let x = if -g0 <= kp && -g0 >= -km {
                    0.0
                } else if -g0 > kp {
                    monotone_root(|x| partial(x, &z) + kp, 0.0, (-g0 - kp) / c)
                } else {
                    -monotone_root(|x| -(partial(-x, &z) - km), 0.0, (g0 - km) / c)
                };
                let new = z_prev[i] + x;
                change = change.max((new - z[i]).abs());
                z[i] = new;
            }
            if change <= 1e-15 * (1.0 + z.norm()) {
                break;
            }
        }
        z
    }
}

/// Root of a nondecreasing `f` with `f(lo) < 0`, searched to the right of
/// `lo` starting with the trial width `guess`; safeguarded secant.
fn monotone_root(f: impl Fn(f64) -> f64, lo: f64, guess: f64) -> f64 {
    let mut a = lo;
    let mut fa = f(a);
    let mut b = lo + guess.abs().max(1e-300);
    let mut fb = f(b);
    let mut k = 0;
    while fb < 0.0 && k < 2000 {
        a = b;
        fa = fb;
        b = lo + 2.0 * (b - lo);
        fb = f(b);
        k += 1;
    }
    if fb == 0.0 {
        return b;
    }
    for it in 0..200 {
        let secant = a - fa * (b - a) / (fb - fa);
        let mid = 0.5 * (a + b);
        let x = if it % 3 == 2 || !(secant > a && secant < b) { mid } else { secant };
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if b - a <= 4.0 * f64::EPSILON * b.abs().max(1e-300) {
            break;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

/// Coordinate descent for min_d 1/2 d^T M d + <lin, d> + R(d), each
/// coordinate solved exactly by a shifted soft threshold.
fn cd_shrink(m: &Matrix, lin: &Vector, rate: &RatePotential, tol: f64) -> Vector {
    let n = lin.len();
    let mut d = Vector::zeros(n);
    for _ in 0..100_000 {
        let mut change = 0.0f64;
        for i in 0..n {
            let mut r = lin[i];
            for j in 0..n {
                if j != i {
                    r += m[(i, j)] * d[j];
                }
            }
            let (kp, km) = (rate.kappa_plus()[i], rate.kappa_minus()[i]);
            let new = if -r > kp {
                (-r - kp) / m[(i, i)]
            } else if -r < -km {
                (-r + km) / m[(i, i)]
            } else {
                0.0
            };
            change = change.max((new - d[i]).abs());
            d[i] = new;
        }
        if n == 1 || change <= tol * 1e-2 * (1.0 + d.amax()) {
            break;
        }
    }
    d
}

/// One step of the scheme from `prev` at time `t` (convenience wrapper).
pub fn incremental_step(cfg: &SolverConfig, system: &System, t: f64, prev: &State) -> Result<State, SolverError> {
    Stepper::new(cfg, system, cfg.tau)?.step(1, t, prev)
}

/// The five ledger terms and the multipliers for the step prev -> next.
#[allow(clippy::too_many_arguments)]
pub fn ledger_entry(
    d: &Dissipation,
    energy: &dyn Energy,
    eps: f64,
    alpha: f64,
    tau: f64,
    t: f64,
    prev: &State,
    next: &State,
) -> ([f64; 5], Vector, Vector) {
    let ea = eps.powf(alpha);
    let du = (&next.u - &prev.u) / tau;
    let dz = (&next.z - &prev.z) / tau;
    let mu = -d.vu.grad(&(&du * ea));
    let zeta = energy.grad_z(t, &next.u, &next.z);
    let l = [
        d.vu.value(&(&du * ea)) / ea,
        d.rate.value(&dz),
        d.vz.value(&(&dz * eps)) / eps,
        d.vu.conj_value(&(-&mu)) / ea,
        conj_w_z(&d.vz, &d.rate, &(-&zeta)).expect("dimensions checked").0 / eps,
    ];
    (l, mu, zeta)
}

/// Marches the scheme over [0, T] from `q0`.
pub fn solve_viscous(cfg: &SolverConfig, system: &System, q0: &State) -> Result<Trajectory, SolverError> {
    cfg.validate()?;
    let nsteps = ((cfg.horizon / cfg.tau) - 1e-9).ceil().max(1.0) as usize;
    let tau = cfg.horizon / nsteps as f64;
    let stepper = Stepper::new(cfg, system, tau)?;
    let e = system.energy.as_ref();
    let d = &system.dissipation;
    let mut tr = Trajectory {
        eps: cfg.eps,
        alpha: cfg.alpha,
        t: Vec::with_capacity(nsteps + 1),
        u: Vec::with_capacity(nsteps + 1),
        z: Vec::with_capacity(nsteps + 1),
        mu: Vec::with_capacity(nsteps + 1),
        zeta: Vec::with_capacity(nsteps + 1),
        ledger: Vec::with_capacity(nsteps + 1),
    };
    tr.t.push(0.0);
    tr.u.push(q0.u.clone());
    tr.z.push(q0.z.clone());
    tr.mu.push(e.grad_u(0.0, &q0.u, &q0.z));
    tr.zeta.push(e.grad_z(0.0, &q0.u, &q0.z));
    tr.ledger.push([0.0; 5]);
    let mut prev = q0.clone();
    for n in 1..=nsteps {
        let t = if n == nsteps { cfg.horizon } else { n as f64 * tau };
        let next = stepper.step(n, t, &prev)?;
        let (l, mu, zeta) = ledger_entry(d, e, cfg.eps, cfg.alpha, tau, t, &prev, &next);
        tr.t.push(t);
        tr.u.push(next.u.clone());
        tr.z.push(next.z.clone());
        tr.mu.push(mu);
        tr.zeta.push(zeta);
        tr.ledger.push(l);
        prev = next;
    }
    Ok(tr)
}

/// Per-step and cumulative residual of the discrete energy-dissipation
/// balance. The power over a step is integrated along the frozen left state,
/// exactly: E(t_n, q_{n-1}) - E(t_{n-1}, q_{n-1}).
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceResidual {
    pub per_step: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl BalanceResidual {
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Largest cumulative value (the upper-estimate direction is <= 0).
    pub fn max_cumulative(&self) -> f64 {
        self.cumulative.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn ed_balance_residual(tr: &Trajectory, e: &dyn Energy) -> BalanceResidual {
    let mut per_step = vec![0.0];
    let mut cumulative = vec![0.0];
    let mut acc = 0.0;
    for n in 1..tr.len() {
        let (t0, t1) = (tr.t[n - 1], tr.t[n]);
        let e_prev = e.value(t0, &tr.u[n - 1], &tr.z[n - 1]);
        let power = e.value(t1, &tr.u[n - 1], &tr.z[n - 1]) - e_prev;
        let e_next = e.value(t1, &tr.u[n], &tr.z[n]);
        let r = e_next - e_prev + (t1 - t0) * tr.dissipation_rate(n) - power;
        acc += r;
        per_step.push(r);
        cumulative.push(acc);
    }
    BalanceResidual { per_step, cumulative }
}

/// Discrete L1 norms, energy supremum and the a-priori bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriStats {
    /// sum R(z_n - z_{n-1})
    pub r_var: f64,
    pub u_l1: f64,
    pub z_l1: f64,
    pub sup_e: f64,
    /// estimated power-control constant: max |d_t E| / E over the nodes
    pub c_sharp: f64,
    /// e^{C# T} E(0, q0) / c_R
    pub z_bound: f64,
    /// (C_init + C_E T + C_E z_l1) / Lambda, quadratic energies with Lambda > 0 only
    pub u_bound: Option<f64>,
}

pub fn apriori_stats(tr: &Trajectory, system: &System) -> AprioriStats {
    let e = system.energy.as_ref();
    let d = &system.dissipation;
    let mut r_var = 0.0;
    let mut u_l1 = 0.0;
    let mut z_l1 = 0.0;
    let mut sup_e = f64::NEG_INFINITY;
    let mut c_sharp = 0.0f64;
    for n in 0..tr.len() {
        let en = e.value(tr.t[n], &tr.u[n], &tr.z[n]);
        sup_e = sup_e.max(en);
        c_sharp = c_sharp.max(e.power(tr.t[n], &tr.u[n], &tr.z[n]).abs() / en);
        if n > 0 {
            let dz = &tr.z[n] - &tr.z[n - 1];
            r_var += d.rate.value(&dz);
            z_l1 += dz.norm();
            u_l1 += (&tr.u[n] - &tr.u[n - 1]).norm();
        }
    }
    let horizon = tr.t.last().copied().unwrap_or(0.0);
    let e0 = e.value(0.0, &tr.u[0], &tr.z[0]);
    let z_bound = (c_sharp * horizon).exp() * e0 / d.rate.c_lower();
    let u_bound = e.as_quadratic().and_then(|q| {
        let lambda = q.lambda_a();
        if lambda <= 0.0 {
            return None;
        }
        let c_e = q.b.clone().svd(false, false).singular_values.max().max(q.f_load.max_rate(horizon));
        let c_init = e0 + tr.eps.powf(-tr.alpha) * e.grad_u(0.0, &tr.u[0], &tr.z[0]).norm();
        Some((c_init + c_e * horizon + c_e * z_l1) / lambda)
    });
    AprioriStats { r_var, u_l1, z_l1, sup_e, c_sharp, z_bound, u_bound }
}

/// Incremental functional value tau Psi((q - prev)/tau) + E(t, q).
#[allow(clippy::too_many_arguments)]
pub fn incremental_functional(d: &Dissipation, e: &dyn Energy, eps: f64, alpha: f64, tau: f64, t: f64, prev: &State, q: &State) -> f64 {
    let ea = eps.powf(alpha);
    let du = (&q.u - &prev.u) / tau;
    let dz = (&q.z - &prev.z) / tau;
    tau * (d.vu.value(&(&du * ea)) / ea + d.rate.value(&dz) + d.vz.value(&(&dz * eps)) / eps) + e.value(t, &q.u, &q.z)
}
