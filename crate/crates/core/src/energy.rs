//! Driving energies E(t, u, z): the quadratic block energy with time-dependent
//! loads, a callback-based smooth energy, generalized slopes, and the bundled
//! example systems.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::contact::Dissipation;
use crate::numeric::CubicSpline;
use crate::potentials::{conj_w_z, Matrix, RatePotential, Vector, ViscousPotential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("block operator is not positive semidefinite (smallest eigenvalue {0})")]
    NotPsd(f64),
    #[error("invalid load curve: {0}")]
    Load(String),
}

/// A state q = (u, z).
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vector,
    pub z: Vector,
}

impl State {
    pub fn new(u: Vector, z: Vector) -> Self {
        Self { u, z }
    }

    pub fn from_slices(u: &[f64], z: &[f64]) -> Self {
        Self { u: Vector::from_column_slice(u), z: Vector::from_column_slice(z) }
    }

    pub fn dist(&self, other: &State) -> f64 {
        ((&self.u - &other.u).norm_squared() + (&self.z - &other.z).norm_squared()).sqrt()
    }

    /// (1-s) self + s other
    pub fn lerp(&self, other: &State, s: f64) -> State {
        State { u: &self.u * (1.0 - s) + &other.u * s, z: &self.z * (1.0 - s) + &other.z * s }
    }
}

/// One scalar load component.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarCurve {
    Zero,
    /// a + b t
    Affine { a: f64, b: f64 },
    /// offset + amp sin(omega t + phase)
    Sine { amp: f64, omega: f64, phase: f64, offset: f64 },
    Spline(CubicSpline),
}

impl ScalarCurve {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ScalarCurve::Zero => 0.0,
            ScalarCurve::Affine { a, b } => a + b * t,
            ScalarCurve::Sine { amp, omega, phase, offset } => offset + amp * (omega * t + phase).sin(),
            ScalarCurve::Spline(s) => s.eval(t),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            ScalarCurve::Zero => 0.0,
            ScalarCurve::Affine { b, .. } => *b,
            ScalarCurve::Sine { amp, omega, phase, .. } => amp * omega * (omega * t + phase).cos(),
            ScalarCurve::Spline(s) => s.deriv(t),
        }
    }
}

/// A vector-valued load t -> f(t).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadCurve {
    pub comps: Vec<ScalarCurve>,
}

impl LoadCurve {
    pub fn zero(dim: usize) -> Self {
        Self { comps: vec![ScalarCurve::Zero; dim] }
    }

    pub fn new(comps: Vec<ScalarCurve>) -> Self {
        Self { comps }
    }

    /// Natural cubic spline through sampled rows `values[k]` at `times[k]`.
    pub fn from_samples(times: &[f64], values: &[Vec<f64>]) -> Result<Self, EnergyError> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(EnergyError::Load("need at least two samples with matching rows".into()));
        }
        let dim = values[0].len();
        if values.iter().any(|r| r.len() != dim) {
            return Err(EnergyError::Load("ragged sample rows".into()));
        }
        let comps = (0..dim)
            .map(|i| {
                CubicSpline::new(times.to_vec(), values.iter().map(|r| r[i]).collect())
                    .map(ScalarCurve::Spline)
                    .ok_or_else(|| EnergyError::Load("sample times must be strictly increasing".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { comps })
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn eval(&self, t: f64) -> Vector {
        Vector::from_iterator(self.dim(), self.comps.iter().map(|c| c.eval(t)))
    }

    pub fn deriv(&self, t: f64) -> Vector {
        Vector::from_iterator(self.dim(), self.comps.iter().map(|c| c.deriv(t)))
    }

    /// sup over a grid of |f'(t)|.
    pub fn max_rate(&self, horizon: f64) -> f64 {
        (0..=400).map(|k| self.deriv(horizon * k as f64 / 400.0).norm()).fold(0.0, f64::max)
    }
}

/// A driving energy. All values include the constant positivity offset.
pub trait Energy: Send + Sync + fmt::Debug {
    fn n_u(&self) -> usize;
    fn n_z(&self) -> usize;
    fn horizon(&self) -> f64;
    fn value(&self, t: f64, u: &Vector, z: &Vector) -> f64;
    fn grad_u(&self, t: f64, u: &Vector, z: &Vector) -> Vector;
    fn grad_z(&self, t: f64, u: &Vector, z: &Vector) -> Vector;
    /// Partial time derivative.
    fn power(&self, t: f64, u: &Vector, z: &Vector) -> f64;
    fn offset(&self) -> f64;
    fn describe(&self) -> String;
    fn as_quadratic(&self) -> Option<&QuadraticEnergy> {
        None
    }
}

/// Checked evaluation of E at (t, q).
pub fn eval_energy(e: &dyn Energy, t: f64, q: &State) -> Result<f64, EnergyError> {
    check_args(e, t, q)?;
    Ok(e.value(t, &q.u, &q.z))
}

/// Full gradients (mu, zeta) at (t, q).
pub fn grads(e: &dyn Energy, t: f64, q: &State) -> Result<(Vector, Vector), EnergyError> {
    check_args(e, t, q)?;
    Ok((e.grad_u(t, &q.u, &q.z), e.grad_z(t, &q.u, &q.z)))
}

fn check_args(e: &dyn Energy, t: f64, q: &State) -> Result<(), EnergyError> {
    let h = e.horizon();
    if !(t >= -1e-12 * h.max(1.0) && t <= h * (1.0 + 1e-12) + 1e-12) {
        return Err(EnergyError::TimeOutOfRange { t, horizon: h });
    }
    if q.u.len() != e.n_u() || q.z.len() != e.n_z() {
        return Err(EnergyError::Dimension(format!(
            "state ({}, {}) vs energy ({}, {})",
            q.u.len(),
            q.z.len(),
            e.n_u(),
            e.n_z()
        )));
    }
    Ok(())
}

/// Picks the shift that lifts the sampled minimum to 1.
fn positivity_offset(raw: impl Fn(f64, &Vector, &Vector) -> f64, n_u: usize, n_z: usize, horizon: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut lo = f64::INFINITY;
    for k in 0..=16 {
        let t = horizon * k as f64 / 16.0;
        lo = lo.min(raw(t, &Vector::zeros(n_u), &Vector::zeros(n_z)));
        for _ in 0..64 {
            let u = Vector::from_fn(n_u, |_, _| rng.gen_range(-3.0..3.0));
            let z = Vector::from_fn(n_z, |_, _| rng.gen_range(-3.0..3.0));
            lo = lo.min(raw(t, &u, &z));
        }
    }
    (1.0 - lo).max(0.0)
}

/// E = 1/2<Au,u> + <Bu,z> + 1/2<Gz,z> - <f(t),u> - <g(t),z> (+ offset).
#[derive(Debug, Clone)]
pub struct QuadraticEnergy {
    pub a: Matrix,
    /// maps u to z-covectors (n_z x n_u)
    pub b: Matrix,
    pub g: Matrix,
    pub f_load: LoadCurve,
    pub g_load: LoadCurve,
    pub horizon: f64,
    offset: f64,
}

impl QuadraticEnergy {
    pub fn new(a: Matrix, b: Matrix, g: Matrix, f_load: LoadCurve, g_load: LoadCurve, horizon: f64) -> Result<Self, EnergyError> {
        let (n, m) = (a.nrows(), g.nrows());
        if a.ncols() != n || g.ncols() != m || b.nrows() != m || b.ncols() != n {
            return Err(EnergyError::Dimension("operator shapes".into()));
        }
        if f_load.dim() != n || g_load.dim() != m {
            return Err(EnergyError::Dimension("load dimensions".into()));
        }
        if !(horizon > 0.0) {
            return Err(EnergyError::Load("horizon must be positive".into()));
        }
        let sym = |x: &Matrix| (x - x.transpose()).amax() <= 1e-12 * (1.0 + x.amax());
        if !sym(&a) || !sym(&g) {
            return Err(EnergyError::NotPsd(f64::NAN));
        }
        let mut block = Matrix::zeros(n + m, n + m);
        block.view_mut((0, 0), (n, n)).copy_from(&a);
        block.view_mut((n, 0), (m, n)).copy_from(&b);
        block.view_mut((0, n), (n, m)).copy_from(&b.transpose());
        block.view_mut((n, n), (m, m)).copy_from(&g);
        let lmin = block.symmetric_eigenvalues().min();
        if lmin < -1e-10 {
            return Err(EnergyError::NotPsd(lmin));
        }
        let mut e = Self { a, b, g, f_load, g_load, horizon, offset: 0.0 };
        e.offset = positivity_offset(|t, u, z| e.raw(t, u, z), n, m, horizon);
        Ok(e)
    }

    fn raw(&self, t: f64, u: &Vector, z: &Vector) -> f64 {
        0.5 * u.dot(&(&self.a * u)) + z.dot(&(&self.b * u)) + 0.5 * z.dot(&(&self.g * z))
            - self.f_load.eval(t).dot(u)
            - self.g_load.eval(t).dot(z)
    }

    /// Smallest eigenvalue of A.
    pub fn lambda_a(&self) -> f64 {
        self.a.clone().symmetric_eigenvalues().min()
    }
}

impl Energy for QuadraticEnergy {
    fn n_u(&self) -> usize {
        self.a.nrows()
    }
    fn n_z(&self) -> usize {
        self.g.nrows()
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn value(&self, t: f64, u: &Vector, z: &Vector) -> f64 {
        self.raw(t, u, z) + self.offset
    }
    fn grad_u(&self, t: f64, u: &Vector, z: &Vector) -> Vector {
        &self.a * u + self.b.tr_mul(z) - self.f_load.eval(t)
    }
    fn grad_z(&self, t: f64, u: &Vector, z: &Vector) -> Vector {
        &self.b * u + &self.g * z - self.g_load.eval(t)
    }
    fn power(&self, t: f64, u: &Vector, z: &Vector) -> f64 {
        -self.f_load.deriv(t).dot(u) - self.g_load.deriv(t).dot(z)
    }
    fn offset(&self) -> f64 {
        self.offset
    }
    fn describe(&self) -> String {
        format!("quadratic energy (n_u = {}, n_z = {})", self.n_u(), self.n_z())
    }
    fn as_quadratic(&self) -> Option<&QuadraticEnergy> {
        Some(self)
    }
}

type ScalarFn = Arc<dyn Fn(f64, &Vector, &Vector) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(f64, &Vector, &Vector) -> Vector + Send + Sync>;

/// An energy given by callbacks.
#[derive(Clone)]
pub struct SmoothEnergy {
    n_u: usize,
    n_z: usize,
    horizon: f64,
    value: ScalarFn,
    grad_u: VectorFn,
    grad_z: VectorFn,
    power: ScalarFn,
    descriptor: String,
    offset: f64,
}

impl fmt::Debug for SmoothEnergy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothEnergy")
            .field("descriptor", &self.descriptor)
            .field("n_u", &self.n_u)
            .field("n_z", &self.n_z)
            .finish()
    }
}

impl SmoothEnergy {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_u: usize,
        n_z: usize,
        horizon: f64,
        value: impl Fn(f64, &Vector, &Vector) -> f64 + Send + Sync + 'static,
        grad_u: impl Fn(f64, &Vector, &Vector) -> Vector + Send + Sync + 'static,
        grad_z: impl Fn(f64, &Vector, &Vector) -> Vector + Send + Sync + 'static,
        power: impl Fn(f64, &Vector, &Vector) -> f64 + Send + Sync + 'static,
        descriptor: impl Into<String>,
    ) -> Self {
        let mut e = Self {
            n_u,
            n_z,
            horizon,
            value: Arc::new(value),
            grad_u: Arc::new(grad_u),
            grad_z: Arc::new(grad_z),
            power: Arc::new(power),
            descriptor: descriptor.into(),
            offset: 0.0,
        };
        let v = e.value.clone();
        e.offset = positivity_offset(|t, u, z| v(t, u, z), n_u, n_z, horizon);
        e
    }
}

impl Energy for SmoothEnergy {
    fn n_u(&self) -> usize {
        self.n_u
    }
    fn n_z(&self) -> usize {
        self.n_z
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn value(&self, t: f64, u: &Vector, z: &Vector) -> f64 {
        (self.value)(t, u, z) + self.offset
    }
    fn grad_u(&self, t: f64, u: &Vector, z: &Vector) -> Vector {
        (self.grad_u)(t, u, z)
    }
    fn grad_z(&self, t: f64, u: &Vector, z: &Vector) -> Vector {
        (self.grad_z)(t, u, z)
    }
    fn power(&self, t: f64, u: &Vector, z: &Vector) -> f64 {
        (self.power)(t, u, z)
    }
    fn offset(&self) -> f64 {
        self.offset
    }
    fn describe(&self) -> String {
        self.descriptor.clone()
    }
}

/// Generalized slopes and their attaining elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Slopes {
    pub s_u: f64,
    pub s_z: f64,
    pub mu: Vector,
    pub zeta: Vector,
    /// Minimiser sigma in dR(0) of V_z*(-zeta - sigma).
    pub sigma: Vector,
}

/// s_u = V_u*(-mu), s_z = W_z*(-zeta) at the gradients.
pub fn slopes(e: &dyn Energy, d: &Dissipation, t: f64, u: &Vector, z: &Vector) -> Slopes {
    let mu = e.grad_u(t, u, z);
    let zeta = e.grad_z(t, u, z);
    let s_u = d.vu.conj_value(&(-&mu));
    let (s_z, sigma) = conj_w_z(&d.vz, &d.rate, &(-&zeta)).expect("dimensions checked at system construction");
    Slopes { s_u, s_z, mu, zeta, sigma }
}

/// Parameters of the planar forced ODE with the radial penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeParams {
    pub lambda: f64,
    pub omega: f64,
    pub amp: f64,
}

impl OdeParams {
    /// The reference configuration (1, 1, 1).
    pub fn reference() -> Self {
        Self { lambda: 1.0, omega: 1.0, amp: 1.0 }
    }

    /// lambda = 0, omega = r^{-1/2}, amp = r^{1/2} with r = eps^alpha: the
    /// orbit touches |u| = 1 and its L1 rate grows like r^{-1/2}.
    pub fn blow_up(eps_alpha: f64) -> Self {
        Self { lambda: 0.0, omega: eps_alpha.powf(-0.5), amp: eps_alpha.sqrt() }
    }

    /// Periodic orbit U(t) = amp/(lambda + i omega r) e^{i omega t}, r = eps^alpha.
    pub fn orbit(&self, t: f64, eps_alpha: f64) -> Vector {
        let den = self.lambda * self.lambda + self.omega * self.omega * eps_alpha * eps_alpha;
        let (cr, ci) = (self.amp * self.lambda / den, -self.amp * self.omega * eps_alpha / den);
        let (c, s) = ((self.omega * t).cos(), (self.omega * t).sin());
        Vector::from_vec(vec![cr * c - ci * s, cr * s + ci * c])
    }

    /// True while the orbit stays in the linear region |u| <= 1.
    pub fn orbit_is_linear(&self, eps_alpha: f64) -> bool {
        self.amp * self.amp <= self.lambda * self.lambda + self.omega * self.omega * eps_alpha * eps_alpha + 1e-14
    }

    /// ||U'||_{L1(0,T)} = |amp omega/(lambda + i omega r)| T.
    pub fn orbit_l1(&self, eps_alpha: f64, horizon: f64) -> f64 {
        let den = (self.lambda * self.lambda + self.omega * self.omega * eps_alpha * eps_alpha).sqrt();
        self.amp * self.omega / den * horizon
    }
}

/// The planar ODE energy phi(u) - <amp(cos wt, sin wt), u>, with
/// phi(u) = lambda/2 |u|^2 + 1/2 max(|u|-1, 0)^2, plus a decoupled z with
/// energy z^2/2 that never leaves 0.
pub fn ode_energy(p: OdeParams, horizon: f64) -> SmoothEnergy {
    let force = move |t: f64| Vector::from_vec(vec![p.amp * (p.omega * t).cos(), p.amp * (p.omega * t).sin()]);
    let dforce = move |t: f64| Vector::from_vec(vec![-p.amp * p.omega * (p.omega * t).sin(), p.amp * p.omega * (p.omega * t).cos()]);
    let phi = move |u: &Vector| {
        let r = u.norm();
        0.5 * p.lambda * r * r + 0.5 * (r - 1.0).max(0.0).powi(2)
    };
    let dphi = move |u: &Vector| {
        let r = u.norm();
        let extra = if r > 1.0 { (r - 1.0) / r } else { 0.0 };
        u * (p.lambda + extra)
    };
    SmoothEnergy::new(
        2,
        1,
        horizon,
        move |t, u, z| phi(u) - force(t).dot(u) + 0.5 * z.dot(z),
        move |t, u, _| dphi(u) - force(t),
        move |_, _, z| z.clone(),
        move |t, u, _| -dforce(t).dot(u),
        format!("forced planar ODE (lambda = {}, omega = {}, amp = {})", p.lambda, p.omega, p.amp),
    )
}

/// Parameters of the double-well instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWellParams {
    /// coupling stiffness between u and z
    pub c: f64,
    /// hardening of z
    pub h: f64,
    /// yield threshold
    pub kappa: f64,
    /// load rate, f(t) = rate t
    pub rate: f64,
    pub horizon: f64,
}

impl Default for DoubleWellParams {
    fn default() -> Self {
        Self { c: 0.5, h: 0.5, kappa: 0.3, rate: 0.5, horizon: 1.0 }
    }
}

impl DoubleWellParams {
    /// Fold point of the left well for z frozen at z0 and the matching
    /// z0 that makes the z-force vanish there.
    fn fold(&self) -> (f64, f64) {
        let uf = -((1.0 - self.c) / 3.0).sqrt();
        (uf, self.c * uf / (self.c + self.h))
    }

    /// Load value at which the left branch folds.
    pub fn fold_load(&self) -> f64 {
        let (uf, z0) = self.fold();
        uf.powi(3) - (1.0 - self.c) * uf - self.c * z0
    }

    pub fn initial_state(&self) -> State {
        let (_, z0) = self.fold();
        let mut u = -1.0;
        for _ in 0..60 {
            let g = u * u * u - u + self.c * (u - z0);
            let h = 3.0 * u * u - 1.0 + self.c;
            u -= g / h;
        }
        State::from_slices(&[u], &[z0])
    }
}

/// E = (u^2-1)^2/4 + c/2 (u-z)^2 + h/2 z^2 - rate t u.
pub fn double_well_energy(p: DoubleWellParams) -> SmoothEnergy {
    SmoothEnergy::new(
        1,
        1,
        p.horizon,
        move |t, u, z| {
            let (u, z) = (u[0], z[0]);
            0.25 * (u * u - 1.0).powi(2) + 0.5 * p.c * (u - z).powi(2) + 0.5 * p.h * z * z - p.rate * t * u
        },
        move |t, u, z| {
            let (u, z) = (u[0], z[0]);
            Vector::from_element(1, u * u * u - u + p.c * (u - z) - p.rate * t)
        },
        move |_, u, z| {
            let (u, z) = (u[0], z[0]);
            Vector::from_element(1, -p.c * (u - z) + p.h * z)
        },
        move |_, u, _| -p.rate * u[0],
        "double-well with coupled hardening variable",
    )
}

/// How the initial state is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Fixed(State),
    /// Start on the periodic orbit of the planar ODE for the current eps^alpha.
    OdeOrbit(OdeParams),
}

/// An energy, its dissipation potentials and the initial state.
#[derive(Debug, Clone)]
pub struct System {
    pub name: String,
    pub energy: Arc<dyn Energy>,
    pub dissipation: Dissipation,
    pub initial: InitialState,
}

impl System {
    pub fn new(name: impl Into<String>, energy: Arc<dyn Energy>, dissipation: Dissipation, initial: InitialState) -> Result<Self, EnergyError> {
        if dissipation.vu.dim() != energy.n_u() || dissipation.vz.dim() != energy.n_z() {
            return Err(EnergyError::Dimension("potentials vs energy".into()));
        }
        if let InitialState::Fixed(q) = &initial {
            if q.u.len() != energy.n_u() || q.z.len() != energy.n_z() {
                return Err(EnergyError::Dimension("initial state".into()));
            }
        }
        Ok(Self { name: name.into(), energy, dissipation, initial })
    }

    pub fn initial_state(&self, eps: f64, alpha: f64) -> State {
        match &self.initial {
            InitialState::Fixed(q) => q.clone(),
            InitialState::OdeOrbit(p) => State::new(p.orbit(0.0, eps.powf(alpha)), Vector::zeros(1)),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.energy.horizon()
    }
}

/// The bundled example systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Prototype2dof,
    Elastoplastic1d,
    Ode45Example,
    DoubleWellJump,
}

impl Builtin {
    pub const ALL: [Builtin; 4] = [Builtin::Prototype2dof, Builtin::Elastoplastic1d, Builtin::Ode45Example, Builtin::DoubleWellJump];

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Prototype2dof => "Prototype2dof",
            Builtin::Elastoplastic1d => "Elastoplastic1d",
            Builtin::Ode45Example => "Ode45Example",
            Builtin::DoubleWellJump => "DoubleWellJump",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name().eq_ignore_ascii_case(s))
    }

    pub fn system(&self) -> System {
        match self {
            Builtin::Prototype2dof => prototype_2dof(),
            Builtin::Elastoplastic1d => elastoplastic_1d(),
            Builtin::Ode45Example => ode_system(OdeParams::reference(), 2.0 * PI),
            Builtin::DoubleWellJump => double_well_system(DoubleWellParams::default()),
        }
    }
}

/// Uniformly convex coupled pair: A = 2, B = -1, G = 3/2, cyclic load
/// f(t) = 2 sin(pi t) sampled and splined, kappa = 1/2, T = 2.
pub fn prototype_2dof() -> System {
    let horizon = 2.0;
    let times: Vec<f64> = (0..=80).map(|k| horizon * k as f64 / 80.0).collect();
    let rows: Vec<Vec<f64>> = times.iter().map(|t| vec![2.0 * (PI * t).sin()]).collect();
    let f = LoadCurve::from_samples(&times, &rows).expect("valid samples");
    let e = QuadraticEnergy::new(
        Matrix::from_element(1, 1, 2.0),
        Matrix::from_element(1, 1, -1.0),
        Matrix::from_element(1, 1, 1.5),
        f,
        LoadCurve::zero(1),
        horizon,
    )
    .expect("PSD block");
    System::new("Prototype2dof", Arc::new(e), Dissipation::quadratic(1, 1, 0.5), InitialState::Fixed(State::from_slices(&[0.0], &[0.0])))
        .expect("consistent dimensions")
}

/// 1/2 (u - z)^2 + 1/2 z^2 - t u with yield stress 1, T = 2.
pub fn elastoplastic_1d() -> System {
    let e = QuadraticEnergy::new(
        Matrix::from_element(1, 1, 1.0),
        Matrix::from_element(1, 1, -1.0),
        Matrix::from_element(1, 1, 2.0),
        LoadCurve::new(vec![ScalarCurve::Affine { a: 0.0, b: 1.0 }]),
        LoadCurve::zero(1),
        2.0,
    )
    .expect("PSD block");
    System::new("Elastoplastic1d", Arc::new(e), Dissipation::quadratic(1, 1, 1.0), InitialState::Fixed(State::from_slices(&[0.0], &[0.0])))
        .expect("consistent dimensions")
}

pub fn ode_system(p: OdeParams, horizon: f64) -> System {
    let d = Dissipation::new(ViscousPotential::quadratic(2), RatePotential::symmetric(1, 1.0).expect("kappa"), ViscousPotential::quadratic(1))
        .expect("dims");
    System::new("Ode45Example", Arc::new(ode_energy(p, horizon)), d, InitialState::OdeOrbit(p)).expect("consistent dimensions")
}

pub fn double_well_system(p: DoubleWellParams) -> System {
    System::new(
        "DoubleWellJump",
        Arc::new(double_well_energy(p)),
        Dissipation::quadratic(1, 1, p.kappa),
        InitialState::Fixed(p.initial_state()),
    )
    .expect("consistent dimensions")
}
