//! B-functions, vanishing-viscosity contact potentials, the rescaled joint
//! B-function and its limit as eps -> 0.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign};

use thiserror::Error;

use crate::numeric::log_scale_infimum;
use crate::potentials::{Custom2D, RatePotential, ScalarProfile, Vector, ViscousKind, ViscousPotential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContactError {
    #[error("tau = 0: the plain B-function is not defined there, use the joint limit object")]
    LimitRequired,
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

/// Nonnegative extended real: a finite value or `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PlusInfinity,
}

impl ExtReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// The value as an `f64` (`f64::INFINITY` for `+inf`).
    pub fn value(&self) -> f64 {
        match *self {
            ExtReal::Finite(x) => x,
            ExtReal::PlusInfinity => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::PlusInfinity => None,
        }
    }

    /// Multiplication by a nonnegative scalar with `0 * inf = 0`.
    pub fn scale(self, c: f64) -> ExtReal {
        match self {
            ExtReal::Finite(x) => ExtReal::Finite(c * x),
            ExtReal::PlusInfinity if c == 0.0 => ExtReal::Finite(0.0),
            ExtReal::PlusInfinity => ExtReal::PlusInfinity,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        if x.is_finite() {
            ExtReal::Finite(x)
        } else {
            ExtReal::PlusInfinity
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::from(a + b),
            _ => ExtReal::PlusInfinity,
        }
    }
}

impl Add<f64> for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: f64) -> ExtReal {
        self + ExtReal::from(rhs)
    }
}

impl AddAssign for ExtReal {
    fn add_assign(&mut self, rhs: ExtReal) {
        *self = *self + rhs;
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.total_cmp(b),
            (ExtReal::Finite(_), ExtReal::PlusInfinity) => Ordering::Less,
            (ExtReal::PlusInfinity, ExtReal::Finite(_)) => Ordering::Greater,
            (ExtReal::PlusInfinity, ExtReal::PlusInfinity) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PlusInfinity => write!(f, "inf"),
        }
    }
}

/// psi = (optional R) + V. The rate-independent part is R itself.
#[derive(Debug, Clone, Copy)]
pub struct Psi<'a> {
    pub viscous: &'a ViscousPotential,
    pub rate: Option<&'a RatePotential>,
}

impl<'a> Psi<'a> {
    pub fn viscous(v: &'a ViscousPotential) -> Self {
        Self { viscous: v, rate: None }
    }

    pub fn with_rate(v: &'a ViscousPotential, r: &'a RatePotential) -> Self {
        Self { viscous: v, rate: Some(r) }
    }

    pub fn value(&self, v: &Vector) -> f64 {
        self.ri(v) + self.viscous.value(v)
    }

    pub fn ri(&self, v: &Vector) -> f64 {
        self.rate.map_or(0.0, |r| r.value(v))
    }

    fn check(&self, v: &Vector) -> Result<(), ContactError> {
        let n = self.viscous.dim();
        if v.len() != n || self.rate.is_some_and(|r| r.dim() != n) {
            return Err(ContactError::InvalidQuery(format!("dimension mismatch (expected {n}, got {})", v.len())));
        }
        Ok(())
    }
}

/// The pair of dissipation potentials of the coupled system.
#[derive(Debug, Clone, PartialEq)]
pub struct Dissipation {
    pub vu: ViscousPotential,
    pub rate: RatePotential,
    pub vz: ViscousPotential,
}

impl Dissipation {
    pub fn new(vu: ViscousPotential, rate: RatePotential, vz: ViscousPotential) -> Result<Self, ContactError> {
        if rate.dim() != vz.dim() {
            return Err(ContactError::InvalidQuery("R and V_z dimensions differ".into()));
        }
        Ok(Self { vu, rate, vz })
    }

    /// 1/2|u'|^2, kappa |z'|_1, 1/2|z'|^2.
    pub fn quadratic(n_u: usize, n_z: usize, kappa: f64) -> Self {
        Self {
            vu: ViscousPotential::quadratic(n_u),
            rate: RatePotential::symmetric(n_z, kappa).expect("positive kappa"),
            vz: ViscousPotential::quadratic(n_z),
        }
    }

    pub fn psi_z(&self) -> Psi<'_> {
        Psi::with_rate(&self.vz, &self.rate)
    }

    pub fn psi_u(&self) -> Psi<'_> {
        Psi::viscous(&self.vu)
    }
}

/// tau psi(v/tau) + tau sigma for tau > 0.
pub fn b_function(psi: Psi<'_>, tau: f64, v: &Vector, sigma: f64) -> Result<f64, ContactError> {
    psi.check(v)?;
    if tau < 0.0 || sigma < 0.0 || tau.is_nan() || sigma.is_nan() {
        return Err(ContactError::InvalidQuery("tau and sigma must be nonnegative".into()));
    }
    if tau == 0.0 {
        return Err(ContactError::LimitRequired);
    }
    Ok(psi.ri(v) + tau * psi.viscous.value(&(v / tau)) + tau * sigma)
}

/// c_p = p^{1/p} (p')^{1/p'}.
pub fn c_hat(p: f64) -> f64 {
    let q = p / (p - 1.0);
    p.powf(1.0 / p) * q.powf(1.0 / q)
}

fn is_zero(v: &Vector) -> bool {
    v.iter().all(|&x| x == 0.0)
}

/// Contact potential inf_tau B(tau, v, sigma) of psi = (R) + V.
pub fn contact_potential(psi: Psi<'_>, v: &Vector, sigma: f64) -> f64 {
    psi.ri(v) + viscous_contact(psi.viscous, v, sigma)
}

/// Contact potential of a purely viscous potential (closed form when known).
pub fn viscous_contact(vp: &ViscousPotential, v: &Vector, sigma: f64) -> f64 {
    if is_zero(v) {
        return 0.0;
    }
    if sigma <= 0.0 {
        return vp.ri(v);
    }
    if let Some(p) = vp.homogeneity() {
        return c_hat(p) * vp.value(v).powf(1.0 / p) * sigma.powf(1.0 - 1.0 / p);
    }
    match vp.kind() {
        ViscousKind::NormBased { profile } => v.norm() * profile.kappa_closed(sigma),
        ViscousKind::Custom2D(Custom2D::C) => contact_c(v, sigma),
        _ => contact_numeric(vp, v, sigma).0,
    }
}

/// Two-branch closed form for the C potential.
fn contact_c(v: &Vector, sigma: f64) -> f64 {
    let (v1, v2) = (v[0], v[1]);
    if v1 * v1 >= (2.0 * sigma - 1.0) * v2 * v2 {
        (v1 * v1 + v2 * v2).sqrt() * (2.0 * sigma).sqrt()
    } else {
        0.5 * (2.0 * v1 * v1 + v2 * v2).sqrt() * (4.0 * sigma - 1.0).sqrt() + 0.5 * v2.abs()
    }
}

/// Numeric tau-infimum of the viscous B-function; returns the value and the
/// optimal tau (`None` when the infimum is not attained).
pub fn contact_numeric(vp: &ViscousPotential, v: &Vector, sigma: f64) -> (f64, Option<f64>) {
    if is_zero(v) {
        return (0.0, None);
    }
    if sigma <= 0.0 {
        return (vp.ri(v), None);
    }
    let (t, val) = log_scale_infimum(|t| t * vp.value(&(v / t)) + t * sigma);
    (val, Some(t))
}

/// Optimal tau of inf_tau [tau V_u(u'/tau) + tau V_z(z'/tau) + tau sigma].
///
/// `None` when the infimum is approached only as tau -> infinity or 0.
pub fn sum_contact_optimizer(vu: &ViscousPotential, vz: &ViscousPotential, u: &Vector, z: &Vector, sigma: f64) -> Option<f64> {
    if (is_zero(u) && is_zero(z)) || sigma <= 0.0 {
        return None;
    }
    match (vu.homogeneity(), vz.homogeneity()) {
        (Some(p), Some(q)) if p == q => {
            let s = vu.value(u) + vz.value(z);
            Some(((p - 1.0) * s / sigma).powf(1.0 / p))
        }
        _ => Some(log_scale_infimum(|t| t * vu.value(&(u / t)) + t * vz.value(&(z / t)) + t * sigma).0),
    }
}

/// Contact potential of the direct sum V_u (+) V_z at ((u', z'), sigma).
pub fn sum_contact(vu: &ViscousPotential, vz: &ViscousPotential, u: &Vector, z: &Vector, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return vu.ri(u) + vz.ri(z);
    }
    if is_zero(u) && is_zero(z) {
        return 0.0;
    }
    match (vu.homogeneity(), vz.homogeneity()) {
        (Some(p), Some(q)) if p == q => c_hat(p) * (vu.value(u) + vz.value(z)).powf(1.0 / p) * sigma.powf(1.0 - 1.0 / p),
        _ => log_scale_infimum(|t| t * vu.value(&(u / t)) + t * vz.value(&(z / t)) + t * sigma).1,
    }
}

/// kappa_zeta(sigma) = inf_tau tau zeta(1/tau) + tau sigma, numerically.
pub fn kappa_zeta(profile: &ScalarProfile, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return profile.slope_at_zero();
    }
    log_scale_infimum(|t| t * profile.eval(1.0 / t) + t * sigma).1
}

/// Arguments of the rescaled joint B-function.
#[derive(Debug, Clone, PartialEq)]
pub struct JointQuery {
    pub tau: f64,
    pub u_rate: Vector,
    pub z_rate: Vector,
    pub sigma_u: f64,
    pub sigma_z: f64,
    pub alpha: f64,
    /// `0` selects the eps -> 0 limit.
    pub eps: f64,
}

/// The rescaled joint B-function for eps > 0, or its limit for eps = 0.
pub fn joint_b(q: &JointQuery, d: &Dissipation) -> Result<ExtReal, ContactError> {
    if !(q.alpha > 0.0) || q.eps < 0.0 || q.tau < 0.0 || q.sigma_u < 0.0 || q.sigma_z < 0.0 {
        return Err(ContactError::InvalidQuery("alpha > 0 and nonnegative tau, eps, sigmas required".into()));
    }
    if q.u_rate.len() != d.vu.dim() || q.z_rate.len() != d.vz.dim() {
        return Err(ContactError::InvalidQuery("rate dimensions do not match the potentials".into()));
    }
    let rz = d.rate.value(&q.z_rate);
    if q.eps > 0.0 {
        if q.tau == 0.0 {
            return Ok(ExtReal::PlusInfinity);
        }
        let ea = q.eps.powf(q.alpha);
        let su = q.tau / ea;
        let sz = q.tau / q.eps;
        let val = su * d.vu.value(&(&q.u_rate / su)) + su * q.sigma_u + rz + sz * d.vz.value(&(&q.z_rate / sz)) + sz * q.sigma_z;
        return Ok(ExtReal::from(val));
    }
    Ok(joint_limit(q, d, rz))
}

fn joint_limit(q: &JointQuery, d: &Dissipation, rz: f64) -> ExtReal {
    if q.tau > 0.0 {
        return if q.sigma_u == 0.0 && q.sigma_z == 0.0 { ExtReal::Finite(rz) } else { ExtReal::PlusInfinity };
    }
    if q.alpha == 1.0 {
        return ExtReal::Finite(rz + sum_contact(&d.vu, &d.vz, &q.u_rate, &q.z_rate, q.sigma_u + q.sigma_z));
    }
    if q.alpha > 1.0 {
        if q.sigma_u == 0.0 {
            ExtReal::Finite(rz + viscous_contact(&d.vz, &q.z_rate, q.sigma_z))
        } else if is_zero(&q.z_rate) {
            ExtReal::Finite(viscous_contact(&d.vu, &q.u_rate, q.sigma_u))
        } else {
            ExtReal::PlusInfinity
        }
    } else if q.sigma_z == 0.0 {
        ExtReal::Finite(rz + viscous_contact(&d.vu, &q.u_rate, q.sigma_u))
    } else if is_zero(&q.u_rate) {
        ExtReal::Finite(rz + viscous_contact(&d.vz, &q.z_rate, q.sigma_z))
    } else {
        ExtReal::PlusInfinity
    }
}

/// One lower bound: its name, the bound value and whether it holds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: &'static str,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    pub lhs: ExtReal,
    pub checks: Vec<BoundCheck>,
}

impl LowerBoundReport {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// Checks the lower bounds of the joint B-function for quadratic potentials
/// (any SPD weights), with phi(r) = m r^2/2, m the smallest weight
/// eigenvalue, so kappa(sigma) = sqrt(2 m sigma). Requires eps <= 1.
pub fn lower_bound_check(q: &JointQuery, d: &Dissipation, slack: f64) -> Result<LowerBoundReport, ContactError> {
    if d.vu.homogeneity() != Some(2.0) || d.vz.homogeneity() != Some(2.0) {
        return Err(ContactError::InvalidQuery("lower bounds are implemented for quadratic potentials".into()));
    }
    if q.eps > 1.0 {
        return Err(ContactError::InvalidQuery("bounds are stated for eps <= 1".into()));
    }
    let m = d.vu.min_weight().min(d.vz.min_weight());
    let kappa = |s: f64| (2.0 * m * s.max(0.0)).sqrt();
    let lhs = joint_b(q, d)?;
    let (a, b) = (q.u_rate.norm(), q.z_rate.norm());
    let s = q.sigma_u + q.sigma_z;
    let mut bounds = vec![("separate", a * kappa(q.sigma_u) + b * kappa(q.sigma_z))];
    if q.alpha == 1.0 {
        bounds.push(("mean", (a + b) * kappa(0.5 * s)));
    }
    if q.alpha >= 1.0 {
        bounds.push(("slow_z", b * kappa(s)));
    }
    if q.alpha <= 1.0 {
        bounds.push(("slow_u", a * kappa(s)));
    }
    let checks = bounds
        .into_iter()
        .map(|(name, rhs)| BoundCheck { name, rhs, holds: lhs.value() >= rhs * (1.0 - slack) - slack })
        .collect();
    Ok(LowerBoundReport { lhs, checks })
}

/// Error of the recovery sequence tau_eps = eps * lambda_eps at eps = 10^-k,
/// alpha = 1, with lambda_eps = min(lambda*, eps^{-1/2}) and lambda* the
/// optimiser of the limit contact potential (infinite when not attained).
pub fn mosco_recovery_error(d: &Dissipation, u: &Vector, z: &Vector, sigma_u: f64, sigma_z: f64, k: i32) -> Result<f64, ContactError> {
    let eps = 10f64.powi(-k);
    let limit = joint_b(
        &JointQuery { tau: 0.0, u_rate: u.clone(), z_rate: z.clone(), sigma_u, sigma_z, alpha: 1.0, eps: 0.0 },
        d,
    )?;
    let star = sum_contact_optimizer(&d.vu, &d.vz, u, z, sigma_u + sigma_z).unwrap_or(f64::INFINITY);
    let lam = star.min(eps.powf(-0.5));
    let approx = joint_b(
        &JointQuery { tau: eps * lam, u_rate: u.clone(), z_rate: z.clone(), sigma_u, sigma_z, alpha: 1.0, eps },
        d,
    )?;
    Ok((approx.value() - limit.value()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Matrix;

    fn v(x: &[f64]) -> Vector {
        Vector::from_vec(x.to_vec())
    }

    #[test]
    fn ext_real_ordering_and_sum() {
        let a = ExtReal::Finite(2.0);
        assert!(a < ExtReal::PlusInfinity);
        assert_eq!(a + ExtReal::PlusInfinity, ExtReal::PlusInfinity);
        assert_eq!(a + 1.0, ExtReal::Finite(3.0));
        assert_eq!(ExtReal::PlusInfinity.scale(0.0), ExtReal::Finite(0.0));
        let mut xs = [ExtReal::PlusInfinity, ExtReal::Finite(1.0), ExtReal::Finite(-0.0)];
        xs.sort();
        assert_eq!(xs[2], ExtReal::PlusInfinity);
    }

    #[test]
    fn b_function_examples() {
        let q = ViscousPotential::quadratic(2);
        let psi = Psi::viscous(&q);
        assert_eq!(b_function(psi, 1.0, &v(&[1.0, 0.0]), 0.0).unwrap(), 0.5);
        assert_eq!(b_function(psi, 2.0, &v(&[2.0, 0.0]), 1.0).unwrap(), 3.0);
        assert_eq!(b_function(psi, 0.0, &v(&[2.0, 0.0]), 1.0), Err(ContactError::LimitRequired));
        let x = v(&[0.3, -1.1]);
        let lhs = b_function(psi, 0.7, &x, 0.4).unwrap();
        let rhs = b_function(psi, 2.1, &(&x * 3.0), 0.4).unwrap() / 3.0;
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn contact_examples() {
        let q = ViscousPotential::quadratic(2);
        assert!((viscous_contact(&q, &v(&[2.0, 0.0]), 2.0) - 4.0).abs() < 1e-14);
        assert_eq!(viscous_contact(&q, &v(&[0.0, 0.0]), 5.0), 0.0);
        let b = ViscousPotential::weighted_quadratic(Matrix::from_diagonal(&v(&[1.0, 4.0]))).unwrap();
        assert!((viscous_contact(&b, &v(&[1.0, 1.0]), 0.5) - 5f64.sqrt()).abs() < 1e-14);
        assert!((contact_numeric(&b, &v(&[1.0, 1.0]), 0.5).0 - 5f64.sqrt()).abs() < 1e-12);
        let d = ViscousPotential::custom2d(Custom2D::D);
        assert!((viscous_contact(&d, &v(&[0.0, 1.0]), 1.0) - (4.0f64 / 3.0).powf(0.75)).abs() < 1e-10);
        assert!((c_hat(2.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn kappa_examples() {
        let z = ScalarProfile::Power { p: 2.0 };
        assert!((kappa_zeta(&z, z.conj(3.0)) - 3.0).abs() < 1e-10);
        assert_eq!(kappa_zeta(&z, 0.0), 0.0);
        assert!((kappa_zeta(&z, 2.0) - 2.0).abs() < 1e-10);
        // oracle: fine tau grid
        let grid = (1..20000).map(|k| k as f64 * 1e-3).map(|t| t * z.eval(1.0 / t) + 2.0 * t).fold(f64::INFINITY, f64::min);
        assert!((grid - 2.0).abs() < 1e-6);
    }

    #[test]
    fn joint_examples() {
        let d = Dissipation::quadratic(1, 1, 1.0);
        let one = v(&[1.0]);
        let q = JointQuery { tau: 0.0, u_rate: one.clone(), z_rate: one.clone(), sigma_u: 0.5, sigma_z: 0.5, alpha: 1.0, eps: 0.0 };
        assert!((joint_b(&q, &d).unwrap().value() - 3.0).abs() < 1e-14);
        let q = JointQuery { tau: 1.0, sigma_u: 0.1, sigma_z: 0.0, ..q };
        assert_eq!(joint_b(&q, &d).unwrap(), ExtReal::PlusInfinity);
        let zero = v(&[0.0]);
        let q = JointQuery { tau: 1.0, u_rate: zero.clone(), z_rate: zero, sigma_u: 1.0, sigma_z: 1.0, alpha: 2.0, eps: 0.1 };
        assert!((joint_b(&q, &d).unwrap().value() - 110.0).abs() < 1e-9);
    }

    #[test]
    fn limit_branches_by_alpha() {
        let d = Dissipation::quadratic(1, 1, 0.5);
        let base = JointQuery { tau: 0.0, u_rate: v(&[1.0]), z_rate: v(&[2.0]), sigma_u: 0.0, sigma_z: 2.0, alpha: 2.0, eps: 0.0 };
        // alpha > 1, sigma_u = 0: R(z') + b_Vz(z', sigma_z) = 1 + 2*1*2
        assert!((joint_b(&base, &d).unwrap().value() - 5.0).abs() < 1e-13);
        let q = JointQuery { sigma_u: 0.5, ..base.clone() };
        assert_eq!(joint_b(&q, &d).unwrap(), ExtReal::PlusInfinity);
        let q = JointQuery { sigma_u: 0.5, z_rate: v(&[0.0]), ..base.clone() };
        assert!((joint_b(&q, &d).unwrap().value() - 1.0).abs() < 1e-13);
        // alpha < 1 mirror
        let q = JointQuery { alpha: 0.5, sigma_u: 2.0, sigma_z: 0.0, ..base.clone() };
        assert!((joint_b(&q, &d).unwrap().value() - (1.0 + 2.0)).abs() < 1e-13);
        let q = JointQuery { alpha: 0.5, sigma_u: 2.0, sigma_z: 1.0, ..base };
        assert_eq!(joint_b(&q, &d).unwrap(), ExtReal::PlusInfinity);
    }

    #[test]
    fn lower_bound_trivial_case() {
        let d = Dissipation::quadratic(2, 1, 1.0);
        let q = JointQuery { tau: 0.5, u_rate: Vector::zeros(2), z_rate: Vector::zeros(1), sigma_u: 0.0, sigma_z: 0.0, alpha: 1.0, eps: 0.5 };
        let r = lower_bound_check(&q, &d, 0.0).unwrap();
        assert!(r.holds());
        assert_eq!(r.lhs, ExtReal::Finite(0.0));
    }

    #[test]
    fn recovery_error_shrinks_without_attainment() {
        let d = Dissipation::quadratic(1, 1, 1.0);
        let e: Vec<f64> = (2..=6).map(|k| mosco_recovery_error(&d, &v(&[1.0]), &v(&[0.5]), 0.0, 0.0, k).unwrap()).collect();
        assert!(e.windows(2).all(|w| w[1] < w[0]));
    }
}
