//! Dissipation potentials: the rate-independent part R (weighted asymmetric
//! l1), the viscous potentials V_u, V_z, their conjugates, the stable set
//! and the proximal z-update of the incremental scheme.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::numeric::{bisect_increasing, golden_min};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weight matrix is not symmetric positive definite")]
    NotSpd,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn check_dim(expected: usize, got: usize) -> Result<(), PotentialError> {
    if expected == got {
        Ok(())
    } else {
        Err(PotentialError::DimensionMismatch { expected, got })
    }
}

/// The box `prod_i [lo_i, hi_i]`; for R this is the subdifferential at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StableSet {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl StableSet {
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol)
    }

    pub fn project(&self, x: &Vector) -> Vector {
        Vector::from_iterator(x.len(), x.iter().enumerate().map(|(i, &v)| v.clamp(self.lo[i], self.hi[i])))
    }

    /// Euclidean distance to the box.
    pub fn dist(&self, x: &Vector) -> f64 {
        (x - self.project(x)).norm()
    }
}

/// R(v) = sum_i kappa_plus_i max(v_i,0) + kappa_minus_i max(-v_i,0).
#[derive(Debug, Clone, PartialEq)]
pub struct RatePotential {
    kappa_plus: Vec<f64>,
    kappa_minus: Vec<f64>,
}

impl RatePotential {
    pub fn new(kappa_plus: Vec<f64>, kappa_minus: Vec<f64>) -> Result<Self, PotentialError> {
        if kappa_plus.is_empty() {
            return Err(PotentialError::InvalidParameter("rate potential needs dimension >= 1".into()));
        }
        check_dim(kappa_plus.len(), kappa_minus.len())?;
        if kappa_plus.iter().chain(&kappa_minus).any(|&k| !(k > 0.0) || !k.is_finite()) {
            return Err(PotentialError::InvalidParameter("rate weights must be positive and finite".into()));
        }
        Ok(Self { kappa_plus, kappa_minus })
    }

    pub fn symmetric(dim: usize, kappa: f64) -> Result<Self, PotentialError> {
        Self::new(vec![kappa; dim], vec![kappa; dim])
    }

    pub fn dim(&self) -> usize {
        self.kappa_plus.len()
    }

    pub fn kappa_plus(&self) -> &[f64] {
        &self.kappa_plus
    }

    pub fn kappa_minus(&self) -> &[f64] {
        &self.kappa_minus
    }

    /// Checked evaluation.
    pub fn eval(&self, v: &Vector) -> Result<f64, PotentialError> {
        check_dim(self.dim(), v.len())?;
        Ok(self.value(v))
    }

    pub fn value(&self, v: &Vector) -> f64 {
        debug_assert_eq!(v.len(), self.dim());
        v.iter()
            .enumerate()
            .map(|(i, &x)| self.component(i, x))
            .sum()
    }

    pub(crate) fn component(&self, i: usize, x: f64) -> f64 {
        if x > 0.0 {
            self.kappa_plus[i] * x
        } else {
            -self.kappa_minus[i] * x
        }
    }

    pub fn stable_set(&self) -> StableSet {
        StableSet {
            lo: self.kappa_minus.iter().map(|k| -k).collect(),
            hi: self.kappa_plus.clone(),
        }
    }

    /// Lower constant: R(v) >= c_lower ||v||_1.
    pub fn c_lower(&self) -> f64 {
        self.kappa_plus
            .iter()
            .zip(&self.kappa_minus)
            .map(|(a, b)| a.min(*b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Upper constant: R(v) <= c_upper ||v||_2.
    pub fn c_upper(&self) -> f64 {
        let m = self
            .kappa_plus
            .iter()
            .chain(&self.kappa_minus)
            .fold(0.0f64, |a, &b| a.max(b));
        m * (self.dim() as f64).sqrt()
    }

    /// Distance of `sigma` from the set dR(v), computed componentwise.
    pub fn subdiff_residual(&self, v: &Vector, sigma: &Vector, zero_tol: f64) -> f64 {
        let mut r2 = 0.0;
        for i in 0..self.dim() {
            let (lo, hi) = (-self.kappa_minus[i], self.kappa_plus[i]);
            let d = if v[i] > zero_tol {
                sigma[i] - hi
            } else if v[i] < -zero_tol {
                sigma[i] - lo
            } else if sigma[i] > hi {
                sigma[i] - hi
            } else if sigma[i] < lo {
                sigma[i] - lo
            } else {
                0.0
            };
            r2 += d * d;
        }
        r2.sqrt()
    }
}

/// Scalar profile zeta for norm-based potentials V(v) = zeta(||v||).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarProfile {
    /// zeta(h) = h^p / p
    Power { p: f64 },
    /// zeta(h) = a h + b h^2 / 2
    LinearQuadratic { a: f64, b: f64 },
}

impl ScalarProfile {
    pub fn eval(&self, h: f64) -> f64 {
        let h = h.abs();
        match *self {
            ScalarProfile::Power { p } => h.powf(p) / p,
            ScalarProfile::LinearQuadratic { a, b } => a * h + 0.5 * b * h * h,
        }
    }

    pub fn deriv(&self, h: f64) -> f64 {
        let s = h.signum();
        let h = h.abs();
        let d = match *self {
            ScalarProfile::Power { p } => h.powf(p - 1.0),
            ScalarProfile::LinearQuadratic { a, b } => a + b * h,
        };
        if h == 0.0 {
            0.0
        } else {
            s * d
        }
    }

    /// zeta'(0+).
    pub fn slope_at_zero(&self) -> f64 {
        match *self {
            ScalarProfile::Power { .. } => 0.0,
            ScalarProfile::LinearQuadratic { a, .. } => a,
        }
    }

    /// zeta*(r) = sup_{h>=0} (r h - zeta(h)).
    pub fn conj(&self, r: f64) -> f64 {
        let r = r.abs();
        match *self {
            ScalarProfile::Power { p } => {
                let q = p / (p - 1.0);
                r.powf(q) / q
            }
            ScalarProfile::LinearQuadratic { a, b } => {
                let e = (r - a).max(0.0);
                e * e / (2.0 * b)
            }
        }
    }

    /// Inverse of zeta' extended oddly, i.e. the derivative of zeta*.
    pub fn conj_deriv(&self, r: f64) -> f64 {
        let s = r.signum();
        let r = r.abs();
        let d = match *self {
            ScalarProfile::Power { p } => r.powf(1.0 / (p - 1.0)),
            ScalarProfile::LinearQuadratic { a, b } => (r - a).max(0.0) / b,
        };
        s * d
    }

    /// Closed form of inf_tau tau zeta(1/tau) + tau sigma.
    pub fn kappa_closed(&self, sigma: f64) -> f64 {
        match *self {
            ScalarProfile::Power { p } => {
                let q = p / (p - 1.0);
                (q * sigma).powf(1.0 / q)
            }
            ScalarProfile::LinearQuadratic { a, b } => a + (2.0 * b * sigma).sqrt(),
        }
    }

    pub(crate) fn validate(&self) -> Result<(), PotentialError> {
        let ok = match *self {
            ScalarProfile::Power { p } => p > 1.0 && p.is_finite(),
            ScalarProfile::LinearQuadratic { a, b } => a >= 0.0 && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(PotentialError::InvalidParameter(format!("bad profile {self:?}")))
        }
    }
}

/// The two hand-built planar potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Custom2D {
    /// 1/2 v1^2 + phi(v2), phi quadratic near 0 and with linear-growth slope beyond |s| = 1.
    C,
    /// 1/2 v1^2 + 1/4 v2^4.
    D,
}

/// phi of the C potential.
pub fn phi_c(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 {
        0.5 * a * a
    } else {
        0.25 * (a + 1.0) * (a + 1.0) - 0.5
    }
}

/// phi* of the C potential.
pub fn phi_c_conj(r: f64) -> f64 {
    let a = r.abs();
    if a <= 1.0 {
        0.5 * a * a
    } else {
        a * a - a + 0.5
    }
}

fn phi_c_deriv(s: f64) -> f64 {
    if s.abs() <= 1.0 {
        s
    } else {
        0.5 * (s.abs() + 1.0) * s.signum()
    }
}

fn phi_c_conj_deriv(r: f64) -> f64 {
    if r.abs() <= 1.0 {
        r
    } else {
        2.0 * r - r.signum()
    }
}

/// One coordinate of a separable viscous potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Component {
    /// w s^2 / 2
    Quad(f64),
    /// c |s|^p / p
    Power { c: f64, p: f64 },
    PhiC,
    Profile(ScalarProfile),
}

impl Component {
    #[cfg(test)]
    pub(crate) fn value(&self, s: f64) -> f64 {
        match *self {
            Component::Quad(w) => 0.5 * w * s * s,
            Component::Power { c, p } => c * s.abs().powf(p) / p,
            Component::PhiC => phi_c(s),
            Component::Profile(z) => z.eval(s),
        }
    }

    #[cfg(test)]
    pub(crate) fn deriv(&self, s: f64) -> f64 {
        match *self {
            Component::Quad(w) => w * s,
            Component::Power { c, p } => c * s.abs().powf(p - 1.0) * s.signum(),
            Component::PhiC => phi_c_deriv(s),
            Component::Profile(z) => z.deriv(s),
        }
    }

    #[cfg(test)]
    pub(crate) fn conj(&self, r: f64) -> f64 {
        match *self {
            Component::Quad(w) => 0.5 * r * r / w,
            Component::Power { c, p } => {
                let q = p / (p - 1.0);
                c.powf(1.0 - q) * r.abs().powf(q) / q
            }
            Component::PhiC => phi_c_conj(r),
            Component::Profile(z) => z.conj(r),
        }
    }

    /// (h')^{-1}(r), the derivative of the conjugate.
    pub(crate) fn conj_deriv(&self, r: f64) -> f64 {
        match *self {
            Component::Quad(w) => r / w,
            Component::Power { c, p } => (r.abs() / c).powf(1.0 / (p - 1.0)) * r.signum(),
            Component::PhiC => phi_c_conj_deriv(r),
            Component::Profile(z) => z.conj_deriv(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViscousKind {
    /// (1/p) (v^T W v)^{p/2}
    PHomogeneous { p: f64, weight: Matrix, weight_inv: Matrix },
    /// zeta(||v||_2)
    NormBased { profile: ScalarProfile },
    Custom2D(Custom2D),
}

/// A superlinear convex viscous potential with V(0) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ViscousPotential {
    kind: ViscousKind,
    dim: usize,
}

fn is_diagonal(m: &Matrix) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
}

impl ViscousPotential {
    /// 1/2 |v|^2 on R^dim.
    pub fn quadratic(dim: usize) -> Self {
        Self::p_homogeneous(2.0, Matrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn weighted_quadratic(weight: Matrix) -> Result<Self, PotentialError> {
        Self::p_homogeneous(2.0, weight)
    }

    pub fn p_homogeneous(p: f64, weight: Matrix) -> Result<Self, PotentialError> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(PotentialError::InvalidParameter(format!("homogeneity degree {p} must exceed 1")));
        }
        let n = weight.nrows();
        if n == 0 || weight.ncols() != n {
            return Err(PotentialError::NotSpd);
        }
        if (&weight - weight.transpose()).amax() > 1e-12 * (1.0 + weight.amax()) {
            return Err(PotentialError::NotSpd);
        }
        let chol = weight.clone().cholesky().ok_or(PotentialError::NotSpd)?;
        let weight_inv = chol.inverse();
        Ok(Self { kind: ViscousKind::PHomogeneous { p, weight, weight_inv }, dim: n })
    }

    pub fn norm_based(dim: usize, profile: ScalarProfile) -> Result<Self, PotentialError> {
        profile.validate()?;
        if dim == 0 {
            return Err(PotentialError::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Self { kind: ViscousKind::NormBased { profile }, dim })
    }

    pub fn custom2d(tag: Custom2D) -> Self {
        Self { kind: ViscousKind::Custom2D(tag), dim: 2 }
    }

    pub fn kind(&self) -> &ViscousKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rate-independent part lim V(g v)/g as g -> 0+.
    pub fn ri(&self, v: &Vector) -> f64 {
        match &self.kind {
            ViscousKind::NormBased { profile } => v.norm() * profile.slope_at_zero(),
            _ => 0.0,
        }
    }

    /// Degree p if the potential is positively p-homogeneous.
    pub fn homogeneity(&self) -> Option<f64> {
        match &self.kind {
            ViscousKind::PHomogeneous { p, .. } => Some(*p),
            ViscousKind::NormBased { profile: ScalarProfile::Power { p } } => Some(*p),
            _ => None,
        }
    }

    /// Diagonal weights when the potential is 1/2 v^T diag(w) v.
    pub fn diagonal_quadratic(&self) -> Option<Vec<f64>> {
        match &self.kind {
            ViscousKind::PHomogeneous { p, weight, .. } if *p == 2.0 && is_diagonal(weight) => {
                Some(weight.diagonal().iter().copied().collect())
            }
            ViscousKind::NormBased { profile: ScalarProfile::Power { p } } if *p == 2.0 => Some(vec![1.0; self.dim]),
            _ => None,
        }
    }

    /// Per-coordinate pieces when V(v) = sum_i h_i(v_i).
    pub(crate) fn components(&self) -> Option<Vec<Component>> {
        if let Some(w) = self.diagonal_quadratic() {
            return Some(w.into_iter().map(Component::Quad).collect());
        }
        match &self.kind {
            ViscousKind::PHomogeneous { p, weight, .. } if self.dim == 1 => {
                Some(vec![Component::Power { c: weight[(0, 0)].powf(p / 2.0), p: *p }])
            }
            ViscousKind::NormBased { profile } if self.dim == 1 => Some(vec![Component::Profile(*profile)]),
            ViscousKind::Custom2D(Custom2D::C) => Some(vec![Component::Quad(1.0), Component::PhiC]),
            ViscousKind::Custom2D(Custom2D::D) => {
                Some(vec![Component::Quad(1.0), Component::Power { c: 1.0, p: 4.0 }])
            }
            _ => None,
        }
    }

    /// Checked evaluation.
    pub fn eval(&self, v: &Vector) -> Result<f64, PotentialError> {
        check_dim(self.dim, v.len())?;
        Ok(self.value(v))
    }

    pub fn value(&self, v: &Vector) -> f64 {
        debug_assert_eq!(v.len(), self.dim);
        match &self.kind {
            ViscousKind::PHomogeneous { p, weight, .. } => {
                let q = (v.transpose() * weight * v)[(0, 0)].max(0.0);
                if *p == 2.0 {
                    0.5 * q
                } else {
                    q.powf(p / 2.0) / p
                }
            }
            ViscousKind::NormBased { profile } => profile.eval(v.norm()),
            ViscousKind::Custom2D(Custom2D::C) => 0.5 * v[0] * v[0] + phi_c(v[1]),
            ViscousKind::Custom2D(Custom2D::D) => 0.5 * v[0] * v[0] + 0.25 * v[1].powi(4),
        }
    }

    /// Gradient (all shipped potentials are C^1).
    pub fn grad(&self, v: &Vector) -> Vector {
        match &self.kind {
            ViscousKind::PHomogeneous { p, weight, .. } => {
                let wv = weight * v;
                let q = v.dot(&wv).max(0.0);
                if *p == 2.0 {
                    wv
                } else if q == 0.0 {
                    Vector::zeros(self.dim)
                } else {
                    wv * q.powf(p / 2.0 - 1.0)
                }
            }
            ViscousKind::NormBased { profile } => {
                let n = v.norm();
                if n == 0.0 {
                    Vector::zeros(self.dim)
                } else {
                    v * (profile.deriv(n) / n)
                }
            }
            ViscousKind::Custom2D(Custom2D::C) => Vector::from_vec(vec![v[0], phi_c_deriv(v[1])]),
            ViscousKind::Custom2D(Custom2D::D) => Vector::from_vec(vec![v[0], v[1].powi(3)]),
        }
    }

    /// Checked conjugate.
    pub fn conj(&self, xi: &Vector) -> Result<f64, PotentialError> {
        check_dim(self.dim, xi.len())?;
        Ok(self.conj_value(xi))
    }

    pub fn conj_value(&self, xi: &Vector) -> f64 {
        match &self.kind {
            ViscousKind::PHomogeneous { p, weight_inv, .. } => {
                let q = (xi.transpose() * weight_inv * xi)[(0, 0)].max(0.0);
                let pc = p / (p - 1.0);
                if *p == 2.0 {
                    0.5 * q
                } else {
                    q.powf(pc / 2.0) / pc
                }
            }
            ViscousKind::NormBased { profile } => profile.conj(xi.norm()),
            ViscousKind::Custom2D(Custom2D::C) => 0.5 * xi[0] * xi[0] + phi_c_conj(xi[1]),
            ViscousKind::Custom2D(Custom2D::D) => 0.5 * xi[0] * xi[0] + 0.75 * xi[1].abs().powf(4.0 / 3.0),
        }
    }

    /// Gradient of the conjugate, i.e. the unique v with xi = grad V(v).
    pub fn conj_grad(&self, xi: &Vector) -> Vector {
        if let Some(c) = self.components() {
            return Vector::from_iterator(self.dim, c.iter().enumerate().map(|(i, h)| h.conj_deriv(xi[i])));
        }
        match &self.kind {
            ViscousKind::PHomogeneous { p, weight_inv, .. } => {
                let wx = weight_inv * xi;
                let q = xi.dot(&wx).max(0.0);
                let pc = p / (p - 1.0);
                if q == 0.0 {
                    Vector::zeros(self.dim)
                } else {
                    wx * q.powf(pc / 2.0 - 1.0)
                }
            }
            ViscousKind::NormBased { profile } => {
                let n = xi.norm();
                if n == 0.0 {
                    Vector::zeros(self.dim)
                } else {
                    xi * (profile.conj_deriv(n) / n)
                }
            }
            ViscousKind::Custom2D(_) => unreachable!("planar potentials are separable"),
        }
    }

    /// Norm used to measure rates in this potential's geometry: (v^T W v)^{1/2}
    /// for weighted kinds, Euclidean otherwise.
    pub fn rate_norm(&self, v: &Vector) -> f64 {
        match &self.kind {
            ViscousKind::PHomogeneous { weight, .. } => v.dot(&(weight * v)).max(0.0).sqrt(),
            _ => v.norm(),
        }
    }

    /// Dual of [`Self::rate_norm`].
    pub fn dual_norm(&self, xi: &Vector) -> f64 {
        match &self.kind {
            ViscousKind::PHomogeneous { weight_inv, .. } => xi.dot(&(weight_inv * xi)).max(0.0).sqrt(),
            _ => xi.norm(),
        }
    }

    /// Smallest eigenvalue of the weight (1 for unweighted kinds).
    pub fn min_weight(&self) -> f64 {
        match &self.kind {
            ViscousKind::PHomogeneous { weight, .. } => weight.clone().symmetric_eigenvalues().min(),
            _ => 1.0,
        }
    }

    /// sup_v <xi,v> - V(v) by bounded concave maximisation.
    pub fn conj_numeric(&self, xi: &Vector) -> f64 {
        let ray = |d: &Vector| -> f64 {
            let s = xi.dot(d);
            if s <= 0.0 {
                return 0.0;
            }
            let g = |r: f64| -(r * s - self.value(&(d * r)));
            let mut hi = 1.0;
            while -g(2.0 * hi) > -g(hi) && hi < 1e12 {
                hi *= 2.0;
            }
            let (_, v) = golden_min(g, 0.0, 2.0 * hi, 1e-13 * hi);
            (-v).max(0.0)
        };
        match self.dim {
            1 => ray(&Vector::from_vec(vec![1.0])).max(ray(&Vector::from_vec(vec![-1.0]))),
            2 => {
                let dir = |th: f64| Vector::from_vec(vec![th.cos(), th.sin()]);
                let n = 720;
                let h = std::f64::consts::TAU / n as f64;
                let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
                for i in 0..n {
                    let v = ray(&dir(i as f64 * h));
                    if v > best {
                        best = v;
                        best_i = i;
                    }
                }
                let c = best_i as f64 * h;
                let (_, v) = golden_min(|th| -ray(&dir(th)), c - h, c + h, 1e-13);
                best.max(-v)
            }
            _ => {
                // Gradient ascent with Armijo backtracking.
                let f = |v: &Vector| xi.dot(v) - self.value(v);
                let mut v = Vector::zeros(self.dim);
                let mut fv = 0.0;
                let mut step = 1.0;
                for _ in 0..20000 {
                    let g = xi - self.grad(&v);
                    let gn2 = g.norm_squared();
                    if gn2 < 1e-26 {
                        break;
                    }
                    loop {
                        let cand = &v + &g * step;
                        let fc = f(&cand);
                        if fc >= fv + 0.25 * step * gn2 {
                            v = cand;
                            fv = fc;
                            step *= 2.0;
                            break;
                        }
                        step *= 0.5;
                        if step < 1e-20 {
                            return fv;
                        }
                    }
                }
                fv
            }
        }
    }
}

/// W*_z(zeta) = min over sigma in dR(0) of V_z*(zeta - sigma).
///
/// Returns the value and the minimising sigma.
pub fn conj_w_z(vz: &ViscousPotential, rate: &RatePotential, zeta: &Vector) -> Result<(f64, Vector), PotentialError> {
    check_dim(vz.dim(), rate.dim())?;
    check_dim(vz.dim(), zeta.len())?;
    let set = rate.stable_set();
    if vz.components().is_some() {
        // Each coordinate conjugate is even, convex and minimal at 0, so the
        // nearest point of the interval is optimal.
        let sigma = set.project(zeta);
        let val = vz.conj_value(&(zeta - &sigma));
        return Ok((val, sigma));
    }
    if matches!(vz.kind(), ViscousKind::NormBased { .. }) {
        // radial and nondecreasing in |xi|: the Euclidean projection is optimal
        let sigma = set.project(zeta);
        let val = vz.conj_value(&(zeta - &sigma));
        return Ok((val, sigma));
    }
    let mut sigma = set.project(zeta);
    let mut val = vz.conj_value(&(zeta - &sigma));
    for _ in 0..500 {
        let before = val;
        for i in 0..zeta.len() {
            let mut trial = sigma.clone();
            let (x, v) = golden_min(
                |s| {
                    trial[i] = s;
                    vz.conj_value(&(zeta - &trial))
                },
                set.lo[i],
                set.hi[i],
                1e-14,
            );
            if v < val {
                sigma[i] = x;
                val = v;
            }
        }
        if before - val <= 1e-15 * (1.0 + before) {
            break;
        }
    }
    Ok((val, sigma))
}

/// Local stability: zeta in dR(0) up to `tol`.
pub fn is_stable(rate: &RatePotential, zeta: &Vector, tol: f64) -> bool {
    rate.stable_set().contains(zeta, tol)
}

/// z-update of the incremental scheme: the minimiser over z of
/// `R(z - z_prev) + tau V_z^eps((z - z_prev)/tau) + <zeta_drive, z>`,
/// where `V^eps(v) = V(eps v)/eps`.
pub fn prox_z_step(
    rate: &RatePotential,
    vz: &ViscousPotential,
    z_prev: &Vector,
    zeta_drive: &Vector,
    tau: f64,
    eps: f64,
) -> Result<Vector, PotentialError> {
    check_dim(vz.dim(), rate.dim())?;
    check_dim(vz.dim(), z_prev.len())?;
    check_dim(vz.dim(), zeta_drive.len())?;
    if !(tau > 0.0) || !(eps > 0.0) {
        return Err(PotentialError::InvalidParameter("tau and eps must be positive".into()));
    }
    let n = z_prev.len();
    if let Some(comp) = vz.components() {
        let d = Vector::from_iterator(
            n,
            (0..n).map(|i| {
                let x = -zeta_drive[i];
                let (kp, km) = (rate.kappa_plus[i], rate.kappa_minus[i]);
                let r = if x > kp {
                    x - kp
                } else if x < -km {
                    x + km
                } else {
                    0.0
                };
                tau / eps * comp[i].conj_deriv(r)
            }),
        );
        return Ok(z_prev + d);
    }
    let scale = tau / eps;
    if matches!(vz.kind(), ViscousKind::NormBased { .. }) {
        // eps z' = grad V*(-zeta - sigma) with sigma the projection of -zeta
        // onto the box; coordinate descent can stall at the kink in 0 here.
        let xi = -zeta_drive;
        let xi = &xi - rate.stable_set().project(&xi);
        return Ok(z_prev + vz.conj_grad(&xi) * scale);
    }
    // Coordinate descent on the smooth + separable-nonsmooth convex objective.

    let mut d = Vector::zeros(n);
    for _ in 0..10000 {
        let mut change = 0.0f64;
        for i in 0..n {
            let partial = |di: f64, d: &Vector| {
                let mut e = d.clone();
                e[i] = di;
                vz.grad(&(e / scale))[i] + zeta_drive[i]
            };
            let g0 = partial(0.0, &d);
            let (kp, km) = (rate.kappa_plus[i], rate.kappa_minus[i]);
            let new = if -g0 <= kp && -g0 >= -km {
                0.0
            } else if -g0 > kp {
                let mut hi = 1.0;
                while partial(hi, &d) + kp < 0.0 {
                    hi *= 2.0;
                }
                bisect_increasing(|x| partial(x, &d) + kp, 0.0, hi, 1e-15)
            } else {
                let mut lo = -1.0;
                while partial(lo, &d) - km > 0.0 {
                    lo *= 2.0;
                }
                bisect_increasing(|x| partial(x, &d) - km, lo, 0.0, 1e-15)
            };
            change = change.max((new - d[i]).abs());
            d[i] = new;
        }
        if change <= 1e-14 * (1.0 + d.amax()) {
            break;
        }
    }
    Ok(z_prev + d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_vec(x.to_vec())
    }

    #[test]
    fn rate_examples() {
        let r = RatePotential::symmetric(2, 1.0).unwrap();
        assert_eq!(r.eval(&v(&[3.0, -2.0])).unwrap(), 5.0);
        assert_eq!(r.eval(&v(&[0.0, 0.0])).unwrap(), 0.0);
        let r = RatePotential::new(vec![2.0], vec![1.0]).unwrap();
        assert_eq!(r.value(&v(&[-4.0])), 4.0);
        assert_eq!(r.value(&v(&[4.0])), 8.0);
        assert!(r.eval(&v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn rate_matches_support_function_of_box() {
        // R(v) = max over sigma in the box of <sigma, v>; grid over the box.
        let r = RatePotential::new(vec![2.0, 0.5], vec![1.0, 3.0]).unwrap();
        let set = r.stable_set();
        for w in [[1.5, -0.7], [-2.0, 0.3], [0.0, 1.0]] {
            let w = v(&w);
            let mut best = f64::NEG_INFINITY;
            for i in 0..=40 {
                for j in 0..=40 {
                    let s0 = set.lo[0] + (set.hi[0] - set.lo[0]) * i as f64 / 40.0;
                    let s1 = set.lo[1] + (set.hi[1] - set.lo[1]) * j as f64 / 40.0;
                    best = best.max(s0 * w[0] + s1 * w[1]);
                }
            }
            assert!((best - r.value(&w)).abs() < 1e-12);
        }
    }

    #[test]
    fn viscous_examples() {
        let q = ViscousPotential::quadratic(2);
        assert_eq!(q.value(&v(&[3.0, 4.0])), 12.5);
        assert_eq!(q.conj_value(&v(&[3.0, 4.0])), 12.5);
        let d = ViscousPotential::custom2d(Custom2D::D);
        assert!((d.value(&v(&[1.0, 1.0])) - 0.75).abs() < 1e-15);
        let c = ViscousPotential::custom2d(Custom2D::C);
        assert!((c.value(&v(&[0.0, 2.0])) - 1.75).abs() < 1e-15);
        assert!((c.conj_value(&v(&[0.0, 2.0])) - 2.5).abs() < 1e-15);
        assert!(ViscousPotential::weighted_quadratic(Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }

    #[test]
    fn weighted_conjugate_against_grid_sup() {
        let w = ViscousPotential::weighted_quadratic(Matrix::from_diagonal(&v(&[2.0, 1.0]))).unwrap();
        let xi = v(&[2.0, 1.0]);
        assert!((w.conj_value(&xi) - 1.5).abs() < 1e-14);
        // Independent oracle: dense grid sup then local refinement on a finer grid.
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..=400 {
            for j in 0..=400 {
                let (a, b) = (-2.0 + i as f64 * 0.01, -2.0 + j as f64 * 0.01);
                let val = xi[0] * a + xi[1] * b - w.value(&v(&[a, b]));
                if val > best.0 {
                    best = (val, a, b);
                }
            }
        }
        assert!((best.0 - 1.5).abs() < 1e-8);
        assert!((w.conj_numeric(&xi) - 1.5).abs() < 1e-8);
    }

    #[test]
    fn conj_w_z_examples() {
        let r = RatePotential::symmetric(2, 1.0).unwrap();
        let vz = ViscousPotential::quadratic(2);
        assert_eq!(conj_w_z(&vz, &r, &v(&[0.5, -0.3])).unwrap().0, 0.0);
        assert!((conj_w_z(&vz, &r, &v(&[2.0, 0.5])).unwrap().0 - 0.5).abs() < 1e-15);
        let r1 = RatePotential::new(vec![2.0], vec![1.0]).unwrap();
        let (val, s) = conj_w_z(&ViscousPotential::quadratic(1), &r1, &v(&[-3.0])).unwrap();
        assert_eq!(val, 2.0);
        assert_eq!(s[0], -1.0);
        // 1D grid oracle
        let grid_min = (0..=3000)
            .map(|k| -1.0 + 3.0 * k as f64 / 3000.0)
            .map(|s| 0.5 * (-3.0 - s) * (-3.0 - s))
            .fold(f64::INFINITY, f64::min);
        assert!((grid_min - 2.0).abs() < 1e-12);
    }

    #[test]
    fn conj_w_z_non_separable_matches_grid() {
        let w = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let vz = ViscousPotential::weighted_quadratic(w).unwrap();
        let r = RatePotential::new(vec![1.0, 0.5], vec![0.5, 1.0]).unwrap();
        let zeta = v(&[2.0, -1.7]);
        let (val, _) = conj_w_z(&vz, &r, &zeta).unwrap();
        let mut best = f64::INFINITY;
        let n = 600;
        for i in 0..=n {
            for j in 0..=n {
                let s = v(&[-0.5 + 1.5 * i as f64 / n as f64, -1.0 + 1.5 * j as f64 / n as f64]);
                best = best.min(vz.conj_value(&(&zeta - s)));
            }
        }
        assert!(val <= best + 1e-12);
        assert!(best - val < 1e-4);
    }

    #[test]
    fn prox_examples() {
        let r = RatePotential::symmetric(1, 1.0).unwrap();
        let vz = ViscousPotential::quadratic(1);
        let z = prox_z_step(&r, &vz, &v(&[0.0]), &v(&[-3.0]), 1.0, 1.0).unwrap();
        assert!((z[0] - 2.0).abs() < 1e-15);
        let z2 = prox_z_step(&r, &vz, &v(&[0.0]), &v(&[-3.0]), 2.0, 1.0).unwrap();
        assert!((z2[0] - 4.0).abs() < 1e-15);
        let z3 = prox_z_step(&r, &vz, &v(&[0.7]), &v(&[0.4]), 1.0, 1.0).unwrap();
        assert_eq!(z3[0], 0.7);
        // fine grid minimisation of |z| + z^2/2 - 3z
        let g = |z: f64| z.abs() + 0.5 * z * z - 3.0 * z;
        let best = (0..=40000).map(|k| -1.0 + k as f64 * 1e-4).min_by(|a, b| g(*a).total_cmp(&g(*b))).unwrap();
        assert!((best - 2.0).abs() < 2e-4);
        let g2 = |z: f64| z.abs() + 0.25 * z * z - 3.0 * z;
        let best2 = (0..=60000).map(|k| -1.0 + k as f64 * 1e-4).min_by(|a, b| g2(*a).total_cmp(&g2(*b))).unwrap();
        assert!((best2 - 4.0).abs() < 2e-4);
    }

    #[test]
    fn prox_general_path_is_stationary() {
        // non-diagonal weight goes through the coordinate solver
        let r = RatePotential::new(vec![0.5, 1.0], vec![1.0, 0.3]).unwrap();
        let w = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let vz = ViscousPotential::weighted_quadratic(w.clone()).unwrap();
        let z_prev = v(&[0.1, -0.2]);
        let drive = v(&[-2.0, 1.5]);
        let (tau, eps) = (0.1, 0.5);
        let z = prox_z_step(&r, &vz, &z_prev, &drive, tau, eps).unwrap();
        // stationarity: -(drive + (eps/tau) W dz) in dR(dz)
        let dz = &z - &z_prev;
        let sigma = -(&drive + (&w * &dz) * (eps / tau));
        assert!(r.subdiff_residual(&dz, &sigma, 1e-13) < 1e-9);
    }

    #[test]
    fn components_agree_with_full_potential() {
        let pots = [
            ViscousPotential::weighted_quadratic(Matrix::from_diagonal(&v(&[1.0, 3.0]))).unwrap(),
            ViscousPotential::custom2d(Custom2D::C),
            ViscousPotential::custom2d(Custom2D::D),
        ];
        for p in &pots {
            let comp = p.components().unwrap();
            for x in [v(&[0.3, -1.2]), v(&[-2.0, 0.7])] {
                let val: f64 = comp.iter().enumerate().map(|(i, h)| h.value(x[i])).sum();
                let cv: f64 = comp.iter().enumerate().map(|(i, h)| h.conj(x[i])).sum();
                assert!((val - p.value(&x)).abs() < 1e-12);
                assert!((cv - p.conj_value(&x)).abs() < 1e-12);
                let g = p.grad(&x);
                for (i, h) in comp.iter().enumerate() {
                    assert!((h.deriv(x[i]) - g[i]).abs() < 1e-12);
                    assert!((h.conj_deriv(h.deriv(x[i])) - x[i]).abs() < 1e-9);
                }
            }
        }
    }
}
