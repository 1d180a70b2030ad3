//! Limit M-function, evolution regimes, jumps and their Finsler costs, and
//! the BV-solution audit of a reparametrised curve.

use std::fmt;
use std::io::Write;

use log::warn;

use crate::contact::{joint_b, viscous_contact, ContactError, Dissipation, ExtReal, JointQuery};
use crate::energy::{slopes, Energy, State};
use crate::numeric::golden_min;
use crate::potentials::Vector;
use crate::rescale::ParamCurve;
use crate::viscous_solver::fmt_num;

/// M^alpha_eps(t, q, t', q'); `eps = 0` gives the limit functional.
#[allow(clippy::too_many_arguments)]
pub fn m_eps(
    alpha: f64,
    eps: f64,
    t: f64,
    q: &State,
    dt: f64,
    dq: &State,
    e: &dyn Energy,
    d: &Dissipation,
) -> Result<ExtReal, ContactError> {
    let sl = slopes(e, d, t, &q.u, &q.z);
    joint_b(
        &JointQuery {
            tau: dt,
            u_rate: dq.u.clone(),
            z_rate: dq.z.clone(),
            sigma_u: sl.s_u,
            sigma_z: sl.s_z,
            alpha,
            eps,
        },
        d,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeLabel {
    EuRz,
    EuVz,
    VuRz,
    Vuz,
    VuBz,
    BuVz,
    BuBz,
    Bz,
    Bu,
    Unclassified,
}

impl RegimeLabel {
    pub const ALL: [RegimeLabel; 10] = [
        RegimeLabel::EuRz,
        RegimeLabel::EuVz,
        RegimeLabel::VuRz,
        RegimeLabel::Vuz,
        RegimeLabel::VuBz,
        RegimeLabel::BuVz,
        RegimeLabel::BuBz,
        RegimeLabel::Bz,
        RegimeLabel::Bu,
        RegimeLabel::Unclassified,
    ];

    /// Labels admissible for the given alpha.
    pub fn admissible(alpha: f64) -> &'static [RegimeLabel] {
        use RegimeLabel::*;
        if alpha > 1.0 {
            &[EuRz, EuVz, Bz, VuBz, BuBz]
        } else if alpha == 1.0 {
            &[EuRz, Vuz, BuBz]
        } else {
            &[EuRz, VuRz, Bu, BuVz, BuBz]
        }
    }

    /// A classified label outside the admissible table.
    pub fn violates(self, alpha: f64) -> bool {
        self != RegimeLabel::Unclassified && !Self::admissible(alpha).contains(&self)
    }

    fn requirement(self) -> Option<(Need, Need)> {
        use Need::*;
        use RegimeLabel::*;
        Some(match self {
            EuRz => (Zero, Zero),
            EuVz => (Zero, Pos),
            VuRz => (Pos, Zero),
            Vuz => (Pos, Pos),
            VuBz => (Pos, Inf),
            BuVz => (Inf, Pos),
            BuBz => (Inf, Inf),
            Bz => (Zero, Inf),
            Bu => (Inf, Zero),
            Unclassified => return None,
        })
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Recovered multiplier: a value, blocked, or undetermined in [0, inf].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Value(f64),
    Infinite,
    Indeterminate,
}

impl Lambda {
    pub fn as_f64(self) -> f64 {
        match self {
            Lambda::Value(x) => x,
            Lambda::Infinite => f64::INFINITY,
            Lambda::Indeterminate => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Need {
    Zero,
    Pos,
    Inf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// plateau threshold on t'; `None` picks [`Tolerances::plateau`]
    pub tol_t: Option<f64>,
    /// slopes below this count as zero
    pub tol_s: f64,
    /// rates below this count as zero when recovering lambda
    pub tol_v: f64,
    pub lambda_zero: f64,
    pub lambda_inf: f64,
    /// relative mismatch allowed for lambda_u = lambda_z
    pub tol_class: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tol_t: None, tol_s: 1e-6, tol_v: 1e-3, lambda_zero: 5e-2, lambda_inf: 1e2, tol_class: 0.05 }
    }
}

impl Tolerances {
    /// Defaults scaled to a curve: tol_s = 1e-6 sup E.
    pub fn for_curve(curve: &ParamCurve, e: &dyn Energy) -> Self {
        let scale = (0..curve.len())
            .map(|k| e.value(curve.t[k].clamp(0.0, e.horizon()), &curve.u[k], &curve.z[k]))
            .fold(0.0f64, f64::max)
            .max(1.0);
        Self { tol_s: 1e-6 * scale, ..Self::default() }
    }

    /// The plateau threshold. At eps > 0 a jump only pushes t' down to
    /// O(eps^min(1, alpha)), so the automatic value is
    /// min(0.1, max(1e-3/S, 10 eps^min(1, alpha))).
    pub fn plateau(&self, curve: &ParamCurve) -> f64 {
        self.tol_t.unwrap_or_else(|| {
            let visc = 10.0 * curve.eps.powf(curve.alpha.min(1.0));
            (1e-3 / curve.length()).max(visc).min(0.1)
        })
    }

    fn meets(&self, l: Lambda, need: Need) -> bool {
        match (l, need) {
            (Lambda::Indeterminate, _) => true,
            (Lambda::Infinite, n) => n == Need::Inf,
            (Lambda::Value(x), Need::Zero) => x <= self.lambda_zero,
            (Lambda::Value(x), Need::Pos) => x > self.lambda_zero && x < self.lambda_inf,
            (Lambda::Value(x), Need::Inf) => x >= self.lambda_inf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeClass {
    pub label: RegimeLabel,
    pub lambda_u: Lambda,
    pub lambda_z: Lambda,
    /// 0 for a clean match; otherwise the size of the violated condition
    pub residual: f64,
}

/// lambda from -force in dV(lambda rate): force/rate when the rate is
/// measurable, blocked when only the force is, undetermined otherwise.
fn recover(rate: f64, force: f64, slope: f64, tol: &Tolerances) -> Lambda {
    if rate >= tol.tol_v {
        Lambda::Value(force / rate)
    } else if slope > tol.tol_s {
        Lambda::Infinite
    } else {
        Lambda::Indeterminate
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.max(b)
}

/// Labels whose switching conditions hold for the recovered multipliers.
/// With both multipliers determined at most one label matches.
pub fn matching_labels(lambda_u: Lambda, lambda_z: Lambda, tol: &Tolerances) -> Vec<RegimeLabel> {
    RegimeLabel::ALL
        .iter()
        .copied()
        .filter(|&l| {
            let Some((nu, nz)) = l.requirement() else { return false };
            if !tol.meets(lambda_u, nu) || !tol.meets(lambda_z, nz) {
                return false;
            }
            match (l, lambda_u, lambda_z) {
                (RegimeLabel::Vuz, Lambda::Value(a), Lambda::Value(b)) => rel_gap(a, b) <= tol.tol_class,
                _ => true,
            }
        })
        .collect()
}

/// Classifies node `k` of `curve` through the switching conditions.
pub fn classify_regime(alpha: f64, curve: &ParamCurve, k: usize, e: &dyn Energy, d: &Dissipation, tol: &Tolerances) -> NodeClass {
    let t = curve.t[k].clamp(0.0, e.horizon());
    let sl = slopes(e, d, t, &curve.u[k], &curve.z[k]);
    let un = d.vu.rate_norm(&curve.du[k]);
    let zn = d.vz.rate_norm(&curve.dz[k]);
    let lambda_u = recover(un, d.vu.dual_norm(&sl.mu), sl.s_u, tol);
    let resid_z = -&sl.zeta - &sl.sigma;
    let lambda_z = recover(zn, d.vz.dual_norm(&resid_z), sl.s_z, tol);
    let moving = curve.dt[k] > tol.plateau(curve);
    let found = matching_labels(lambda_u, lambda_z, tol);
    let adm = RegimeLabel::admissible(alpha);
    let pick = if moving {
        found.iter().copied().find(|&l| l == RegimeLabel::EuRz)
    } else {
        found.iter().copied().find(|l| adm.contains(l)).or_else(|| found.first().copied())
    };
    if let Some(label) = pick {
        let residual = match (label, lambda_u, lambda_z) {
            (RegimeLabel::Vuz, Lambda::Value(a), Lambda::Value(b)) => rel_gap(a, b),
            _ => 0.0,
        };
        return NodeClass { label, lambda_u, lambda_z, residual };
    }
    let residual = match (lambda_u, lambda_z) {
        (Lambda::Value(a), Lambda::Value(b)) if a.max(b) > 0.0 => rel_gap(a, b),
        _ => sl.s_u.max(sl.s_z),
    };
    NodeClass { label: RegimeLabel::Unclassified, lambda_u, lambda_z, residual }
}

/// Classifies every node.
pub fn regime_timeline(alpha: f64, curve: &ParamCurve, e: &dyn Energy, d: &Dissipation, tol: &Tolerances) -> Vec<NodeClass> {
    (0..curve.len()).map(|k| classify_regime(alpha, curve, k, e, d, tol)).collect()
}

pub fn write_timeline<W: Write>(w: W, curve: &ParamCurve, classes: &[NodeClass]) -> std::io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["s", "label", "lambda_u", "lambda_z", "residual"])?;
    for (k, c) in classes.iter().enumerate() {
        wr.write_record([
            fmt_num(curve.s[k]),
            c.label.to_string(),
            fmt_lambda(c.lambda_u),
            fmt_lambda(c.lambda_z),
            fmt_num(c.residual),
        ])?;
    }
    wr.flush()
}

fn fmt_lambda(l: Lambda) -> String {
    match l {
        Lambda::Value(x) => fmt_num(x),
        Lambda::Infinite => "inf".into(),
        Lambda::Indeterminate => "indeterminate".into(),
    }
}

/// Discrete transition curve with fixed end points.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCurve {
    pub nodes: Vec<State>,
}

impl TransitionCurve {
    pub fn straight(q0: &State, q1: &State, n_nodes: usize) -> Self {
        let n = n_nodes.max(2);
        Self { nodes: (0..n).map(|i| q0.lerp(q1, i as f64 / (n - 1) as f64)).collect() }
    }

    /// Piecewise-linear resampling to `n` nodes, uniform in the node index.
    pub fn resample(&self, n: usize) -> Self {
        let m = self.nodes.len();
        let nodes = (0..n)
            .map(|i| {
                let x = i as f64 * (m - 1) as f64 / (n - 1) as f64;
                let j = (x.floor() as usize).min(m - 2);
                self.nodes[j].lerp(&self.nodes[j + 1], x - j as f64)
            })
            .collect();
        Self { nodes }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let (n, m) = (self.nodes[0].u.len(), self.nodes[0].z.len());
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["r".to_string()];
        header.extend((0..n).map(|i| format!("u_{i}")));
        header.extend((0..m).map(|i| format!("z_{i}")));
        wr.write_record(&header)?;
        let last = (self.nodes.len() - 1) as f64;
        for (i, q) in self.nodes.iter().enumerate() {
            let mut row = vec![fmt_num(i as f64 / last)];
            row.extend(q.u.iter().chain(q.z.iter()).map(|x| fmt_num(*x)));
            wr.write_record(&row)?;
        }
        wr.flush()
    }
}

/// Segment integrand of the limit action, with the infinite branches of
/// alpha != 1 replaced by the barrier `m_pen * sqrt(sigma) * |blocked rate|`.
fn segment_cost(alpha: f64, t: f64, a: &State, b: &State, e: &dyn Energy, d: &Dissipation, m_pen: f64) -> (f64, f64) {
    let mid = a.lerp(b, 0.5);
    let du = &b.u - &a.u;
    let dz = &b.z - &a.z;
    let sl = slopes(e, d, t, &mid.u, &mid.z);
    if alpha == 1.0 {
        let v = joint_b(
            &JointQuery { tau: 0.0, u_rate: du, z_rate: dz, sigma_u: sl.s_u, sigma_z: sl.s_z, alpha, eps: 0.0 },
            d,
        )
        .map(|x| x.value())
        .unwrap_or(f64::INFINITY);
        return (v, 0.0);
    }
    let base = d.rate.value(&dz) + viscous_contact(&d.vu, &du, sl.s_u) + viscous_contact(&d.vz, &dz, sl.s_z);
    let pen = if alpha > 1.0 { sl.s_u.sqrt() * dz.norm() } else { sl.s_z.sqrt() * du.norm() };
    (base, m_pen * pen)
}

fn action(alpha: f64, t: f64, c: &TransitionCurve, e: &dyn Energy, d: &Dissipation, m_pen: f64) -> (f64, f64) {
    c.nodes.windows(2).fold((0.0, 0.0), |acc, w| {
        let (b, p) = segment_cost(alpha, t, &w[0], &w[1], e, d, m_pen);
        (acc.0 + b, acc.1 + p)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinslerResult {
    /// discrete action without the barrier
    pub cost: f64,
    /// barrier contribution at the final curve (zero for alpha = 1)
    pub penalty: f64,
    pub curve: TransitionCurve,
    pub converged: bool,
}

/// One pass of block coordinate descent: every interior node, one
/// coordinate at a time, by golden section within the local node spacing.
fn sweep(alpha: f64, t: f64, c: &mut TransitionCurve, e: &dyn Energy, d: &Dissipation, m_pen: f64) {
    let n = c.nodes.len();
    let (nu, nz) = (c.nodes[0].u.len(), c.nodes[0].z.len());
    let seg = |a: &State, b: &State| {
        let (x, p) = segment_cost(alpha, t, a, b, e, d, m_pen);
        x + p
    };
    for i in 1..n - 1 {
        let (prev, next) = (c.nodes[i - 1].clone(), c.nodes[i + 1].clone());
        let reach = 0.5 * (prev.dist(&c.nodes[i]) + c.nodes[i].dist(&next));
        for j in 0..nu + nz {
            let base = c.nodes[i].clone();
            let x0 = if j < nu { base.u[j] } else { base.z[j - nu] };
            let with = |x: f64| {
                let mut q = base.clone();
                if j < nu {
                    q.u[j] = x;
                } else {
                    q.z[j - nu] = x;
                }
                q
            };
            let local = |x: f64| {
                let q = with(x);
                seg(&prev, &q) + seg(&q, &next)
            };
            let f0 = local(x0);
            let delta = reach.max(1e-12);
            let (x, fx) = golden_min(&local, x0 - delta, x0 + delta, 1e-6 * delta);
            if fx < f0 {
                c.nodes[i] = with(x);
            }
        }
    }
}

/// Respaces the nodes equally in Euclidean arclength along the polyline.
fn equidistribute(c: &TransitionCurve) -> TransitionCurve {
    let n = c.nodes.len();
    let mut acc = vec![0.0];
    for w in c.nodes.windows(2) {
        let l = acc.last().unwrap() + w[0].dist(&w[1]);
        acc.push(l);
    }
    let total = *acc.last().unwrap();
    if total == 0.0 {
        return c.clone();
    }
    let mut j = 0;
    let nodes = (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                return c.nodes[i].clone();
            }
            let target = total * i as f64 / (n - 1) as f64;
            while j + 1 < n - 1 && acc[j + 1] < target {
                j += 1;
            }
            let len = acc[j + 1] - acc[j];
            let r = if len > 0.0 { (target - acc[j]) / len } else { 0.0 };
            c.nodes[j].lerp(&c.nodes[j + 1], r)
        })
        .collect();
    TransitionCurve { nodes }
}

/// Alternates coordinate sweeps with respacing until the action settles.
fn descend(alpha: f64, t: f64, c: &mut TransitionCurve, e: &dyn Energy, d: &Dissipation, m_pen: f64, max_sweeps: usize) -> bool {
    let total = |c: &TransitionCurve| {
        let (a, p) = action(alpha, t, c, e, d, m_pen);
        a + p
    };
    let mut last = total(c);
    for _ in 0..max_sweeps {
        sweep(alpha, t, c, e, d, m_pen);
        *c = equidistribute(c);
        let now = total(c);
        let done = (last - now).abs() <= 1e-9 * now.abs().max(1e-300);
        last = now;
        if done {
            return true;
        }
    }
    false
}

/// Minimal discrete limit action between `q0` and `q1` at frozen time `t`.
/// Starts from the straight segment, refined coarse-to-fine up to `n_nodes`;
/// extra start curves in `seeds` are polished too and the best is returned.
#[allow(clippy::too_many_arguments)]
pub fn finsler_cost(
    alpha: f64,
    t: f64,
    q0: &State,
    q1: &State,
    e: &dyn Energy,
    d: &Dissipation,
    n_nodes: usize,
    seeds: &[TransitionCurve],
) -> FinslerResult {
    let n_nodes = n_nodes.max(2);
    if q0 == q1 {
        return FinslerResult { cost: 0.0, penalty: 0.0, curve: TransitionCurve { nodes: vec![q0.clone(); n_nodes] }, converged: true };
    }
    let schedule: Vec<f64> = if alpha == 1.0 { vec![0.0] } else { (0..8).map(|k| 2f64.powi(k)).collect() };
    let run = |start: TransitionCurve, coarse_to_fine: bool| -> (TransitionCurve, bool) {
        let mut c = start;
        let mut ok = true;
        for (level, &m_pen) in schedule.iter().enumerate() {
            if coarse_to_fine && level == 0 {
                let mut m = 3;
                c = c.resample(m);
                while m < n_nodes {
                    descend(alpha, t, &mut c, e, d, m_pen, 200);
                    m = (2 * m - 1).min(n_nodes);
                    c = c.resample(m);
                }
            }
            ok = descend(alpha, t, &mut c, e, d, m_pen, if level == 0 { 1000 } else { 300 });
        }
        (c, ok)
    };
    let starts: Vec<(TransitionCurve, bool)> = std::iter::once((TransitionCurve::straight(q0, q1, n_nodes), true))
        .chain(seeds.iter().map(|s| (equidistribute(&s.resample(4 * n_nodes)).resample(n_nodes), false)))
        .collect();
    let m_final = schedule.last().copied().unwrap_or(0.0);
    let mut best: Option<FinslerResult> = None;
    for (c, ok) in crate::par::map(&starts, |(start, ctf)| run(start.clone(), *ctf)) {
        let (cost, penalty) = action(alpha, t, &c, e, d, m_final);
        if best.as_ref().is_none_or(|b| cost + penalty < b.cost + b.penalty) {
            best = Some(FinslerResult { cost, penalty, curve: c, converged: ok });
        }
    }
    let best = best.expect("at least the straight start");
    if !best.converged {
        warn!("transition-cost optimiser stopped before meeting its tolerance (cost {})", best.cost);
    }
    best
}

/// A plateau {t' <= tol_t} of the curve and its jump data.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub t_star: f64,
    /// first and last plateau node
    pub k_start: usize,
    pub k_end: usize,
    pub q_minus: State,
    pub q_plus: State,
    /// E(t*, q-) - E(t*, q+)
    pub drop: f64,
    pub finsler: Option<FinslerResult>,
}

impl JumpRecord {
    /// Nodes of the curve from q- to q+ (the viscous transition).
    pub fn viscous_path(&self, curve: &ParamCurve) -> TransitionCurve {
        let a = self.k_start.saturating_sub(1);
        let b = (self.k_end + 1).min(curve.len() - 1);
        TransitionCurve { nodes: (a..=b).map(|k| curve.state(k)).collect() }
    }

    pub fn gap(&self) -> Option<f64> {
        self.finsler.as_ref().map(|f| (f.cost - self.drop).abs() / self.drop.abs().max(f64::MIN_POSITIVE))
    }
}

/// Maximal runs of nodes with t' <= tol_t.
pub fn detect_jumps(curve: &ParamCurve, tol_t: f64, e: &dyn Energy) -> Vec<JumpRecord> {
    let n = curve.len();
    let mut out = Vec::new();
    let mut k = 0;
    while k < n {
        if curve.dt[k] > tol_t {
            k += 1;
            continue;
        }
        let start = k;
        while k + 1 < n && curve.dt[k + 1] <= tol_t {
            k += 1;
        }
        let end = k;
        let a = start.saturating_sub(1);
        let b = (end + 1).min(n - 1);
        let t_star = (0.5 * (curve.t[a] + curve.t[b])).clamp(0.0, e.horizon());
        let (qm, qp) = (curve.state(a), curve.state(b));
        let drop = e.value(t_star, &qm.u, &qm.z) - e.value(t_star, &qp.u, &qp.z);
        out.push(JumpRecord { t_star, k_start: start, k_end: end, q_minus: qm, q_plus: qp, drop, finsler: None });
        k += 1;
    }
    out
}

/// Fills in the Finsler cost of every jump (concurrently), seeding the
/// optimiser with the viscous transition as a second start.
pub fn cost_jumps(alpha: f64, curve: &ParamCurve, jumps: &mut [JumpRecord], e: &dyn Energy, d: &Dissipation, n_nodes: usize) {
    let results = crate::par::map(jumps, |j| {
        finsler_cost(alpha, j.t_star, &j.q_minus, &j.q_plus, e, d, n_nodes, &[j.viscous_path(curve)])
    });
    for (j, r) in jumps.iter_mut().zip(results) {
        j.finsler = Some(r);
    }
}

fn in_jump(k: usize, jumps: &[JumpRecord], n: usize) -> bool {
    jumps.iter().any(|j| k + 1 >= j.k_start && k <= (j.k_end + 1).min(n - 1))
}

/// Segment k -> k+1 lies inside a jump (from q- through the plateau to q+).
fn jump_segment(k: usize, jumps: &[JumpRecord]) -> bool {
    jumps.iter().any(|j| k + 1 >= j.k_start && k <= j.k_end)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("transition cost below the R-increment by {0:e} at jump {1}")]
pub struct IntegrityError(pub f64, pub usize);

/// Var_R over the grid off the jumps plus the Finsler costs of the jumps.
pub fn total_variation(curve: &ParamCurve, jumps: &[JumpRecord], d: &Dissipation) -> Result<f64, IntegrityError> {
    let mut var = 0.0;
    for k in 0..curve.len().saturating_sub(1) {
        if !jump_segment(k, jumps) {
            var += d.rate.value(&(&curve.z[k + 1] - &curve.z[k]));
        }
    }
    for (i, j) in jumps.iter().enumerate() {
        let rz = d.rate.value(&(&j.q_plus.z - &j.q_minus.z));
        let cost = j.finsler.as_ref().map_or(rz, |f| f.cost);
        if cost - rz < -1e-8 * (1.0 + rz) {
            return Err(IntegrityError(rz - cost, i));
        }
        var += rz + (cost - rz);
    }
    Ok(var)
}

/// Integral of the limit M-function along the curve: jump segments use the
/// t' = 0 branch, the rest contributes R(z').
pub fn m0_integral(alpha: f64, curve: &ParamCurve, jumps: &[JumpRecord], e: &dyn Energy, d: &Dissipation) -> f64 {
    let mut acc = 0.0;
    for k in 0..curve.len().saturating_sub(1) {
        let (a, b) = (curve.state(k), curve.state(k + 1));
        if let Some(j) = jumps.iter().find(|j| k + 1 >= j.k_start && k <= j.k_end) {
            acc += segment_cost(alpha, j.t_star, &a, &b, e, d, 0.0).0;
        } else {
            acc += d.rate.value(&(&b.z - &a.z));
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvReport {
    pub stationarity_max: f64,
    pub stability_max: f64,
    /// E(T) + Var - E(0) - int d_t E
    pub balance_residual: f64,
    /// |cost - drop| / drop per jump
    pub jump_gaps: Vec<f64>,
}

pub fn check_bv(curve: &ParamCurve, jumps: &[JumpRecord], e: &dyn Energy, d: &Dissipation) -> Result<BvReport, IntegrityError> {
    let n = curve.len();
    let mut stationarity_max = 0.0f64;
    let mut stability_max = 0.0f64;
    for k in 0..n {
        if !in_jump(k, jumps, n) {
            stationarity_max = stationarity_max.max(curve.slope_u[k]);
            stability_max = stability_max.max(curve.slope_z[k]);
        }
    }
    let var = total_variation(curve, jumps, d)?;
    let clamp = |t: f64| t.clamp(0.0, e.horizon());
    let power: Vec<f64> = (0..n).map(|k| e.power(clamp(curve.t[k]), &curve.u[k], &curve.z[k])).collect();
    let work: f64 = (0..n - 1).map(|k| 0.5 * (power[k] + power[k + 1]) * (curve.t[k + 1] - curve.t[k])).sum();
    let e0 = e.value(clamp(curve.t[0]), &curve.u[0], &curve.z[0]);
    let e1 = e.value(clamp(curve.t[n - 1]), &curve.u[n - 1], &curve.z[n - 1]);
    Ok(BvReport {
        stationarity_max,
        stability_max,
        balance_residual: e1 + var - e0 - work,
        jump_gaps: jumps.iter().filter_map(|j| j.gap()).collect(),
    })
}

/// Key-value jump report.
pub fn write_jump_report<W: Write>(mut w: W, jumps: &[JumpRecord]) -> std::io::Result<()> {
    writeln!(w, "jumps = {}", jumps.len())?;
    for (i, j) in jumps.iter().enumerate() {
        let vec = |v: &Vector| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ");
        writeln!(w, "jump.{i}.t_star = {}", fmt_num(j.t_star))?;
        writeln!(w, "jump.{i}.nodes = {} {}", j.k_start, j.k_end)?;
        writeln!(w, "jump.{i}.u_minus = {}", vec(&j.q_minus.u))?;
        writeln!(w, "jump.{i}.z_minus = {}", vec(&j.q_minus.z))?;
        writeln!(w, "jump.{i}.u_plus = {}", vec(&j.q_plus.u))?;
        writeln!(w, "jump.{i}.z_plus = {}", vec(&j.q_plus.z))?;
        writeln!(w, "jump.{i}.energy_drop = {}", fmt_num(j.drop))?;
        if let Some(f) = &j.finsler {
            writeln!(w, "jump.{i}.cost = {}", fmt_num(f.cost))?;
            writeln!(w, "jump.{i}.penalty = {}", fmt_num(f.penalty))?;
            writeln!(w, "jump.{i}.converged = {}", f.converged)?;
        }
    }
    Ok(())
}
