//! One viscous run per epsilon followed by the full analysis chain:
//! solve, balance audit, arclength reparametrisation, jump detection and
//! costing, regime timeline and BV check.

use thiserror::Error;

use crate::bv_analysis::{
    check_bv, cost_jumps, detect_jumps, m0_integral, regime_timeline, total_variation, BvReport, IntegrityError, JumpRecord, NodeClass,
    Tolerances,
};
use crate::energy::System;
use crate::rescale::{arclength, reparametrize, ParamCurve, RescaleError};
use crate::viscous_solver::{apriori_stats, ed_balance_residual, solve_viscous, AprioriStats, BalanceResidual, SolverConfig, SolverError, Trajectory};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Rescale(#[from] RescaleError),
    #[error(transparent)]
    Integrity(#[from] IntegrityError),
}

/// Per-field replacements for the curve-scaled [`Tolerances`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ToleranceOverrides {
    pub tol_t: Option<f64>,
    pub tol_s: Option<f64>,
    pub tol_v: Option<f64>,
    pub lambda_zero: Option<f64>,
    pub lambda_inf: Option<f64>,
    pub tol_class: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, mut t: Tolerances) -> Tolerances {
        if self.tol_t.is_some() {
            t.tol_t = self.tol_t;
        }
        t.tol_s = self.tol_s.unwrap_or(t.tol_s);
        t.tol_v = self.tol_v.unwrap_or(t.tol_v);
        t.lambda_zero = self.lambda_zero.unwrap_or(t.lambda_zero);
        t.lambda_inf = self.lambda_inf.unwrap_or(t.lambda_inf);
        t.tol_class = self.tol_class.unwrap_or(t.tol_class);
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub alpha: f64,
    /// fixed step; otherwise tau_ratio * min(eps, eps^alpha)
    pub tau: Option<f64>,
    pub tau_ratio: f64,
    /// horizon override; defaults to the system's
    pub horizon: Option<f64>,
    /// nodes of the reparametrised curve
    pub n_nodes: usize,
    /// nodes of each jump transition
    pub finsler_nodes: usize,
    pub tolerances: ToleranceOverrides,
}

impl RunSettings {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, tau: None, tau_ratio: 0.1, horizon: None, n_nodes: 2000, finsler_nodes: 64, tolerances: ToleranceOverrides::default() }
    }

    pub fn tau_for(&self, eps: f64) -> f64 {
        self.tau.unwrap_or_else(|| self.tau_ratio * eps.min(eps.powf(self.alpha)))
    }
}

#[derive(Debug, Clone)]
pub struct EpsRun {
    pub eps: f64,
    pub tau: f64,
    pub trajectory: Trajectory,
    pub balance: BalanceResidual,
    pub apriori: AprioriStats,
    pub curve: ParamCurve,
    pub tolerances: Tolerances,
    pub jumps: Vec<JumpRecord>,
    pub classes: Vec<NodeClass>,
    pub bv: BvReport,
    pub variation: f64,
    pub m0_integral: f64,
}

impl EpsRun {
    /// Classified nodes whose label is outside the alpha table.
    pub fn violations(&self) -> usize {
        self.classes.iter().filter(|c| c.label.violates(self.trajectory.alpha)).count()
    }
}

pub fn run_eps(system: &System, settings: &RunSettings, eps: f64) -> Result<EpsRun, PipelineError> {
    let alpha = settings.alpha;
    let tau = settings.tau_for(eps);
    let horizon = settings.horizon.unwrap_or_else(|| system.horizon());
    let cfg = SolverConfig::new(eps, alpha, tau, horizon);
    let trajectory = solve_viscous(&cfg, system, &system.initial_state(eps, alpha))?;
    let e = system.energy.as_ref();
    let d = &system.dissipation;
    let balance = ed_balance_residual(&trajectory, e);
    let apriori = apriori_stats(&trajectory, system);
    let curve = reparametrize(&trajectory, &arclength(&trajectory), settings.n_nodes, e, d)?;
    let CurveAnalysis { tolerances, jumps, classes, bv, variation, m0_integral } = analyze_curve(system, settings, &curve)?;
    Ok(EpsRun { eps, tau, trajectory, balance, apriori, curve, tolerances, jumps, classes, bv, variation, m0_integral })
}

/// Everything derived from a reparametrised curve alone.
#[derive(Debug, Clone)]
pub struct CurveAnalysis {
    pub tolerances: Tolerances,
    pub jumps: Vec<JumpRecord>,
    pub classes: Vec<NodeClass>,
    pub bv: BvReport,
    pub variation: f64,
    pub m0_integral: f64,
}

/// Jump detection and costing, regime timeline and BV check on `curve`.
pub fn analyze_curve(system: &System, settings: &RunSettings, curve: &ParamCurve) -> Result<CurveAnalysis, IntegrityError> {
    let (e, d, alpha) = (system.energy.as_ref(), &system.dissipation, settings.alpha);
    let tolerances = settings.tolerances.apply(Tolerances::for_curve(curve, e));
    let mut jumps = detect_jumps(curve, tolerances.plateau(curve), e);
    cost_jumps(alpha, curve, &mut jumps, e, d, settings.finsler_nodes);
    let classes = regime_timeline(alpha, curve, e, d, &tolerances);
    let bv = check_bv(curve, &jumps, e, d)?;
    let variation = total_variation(curve, &jumps, d)?;
    let m0_integral = m0_integral(alpha, curve, &jumps, e, d);
    Ok(CurveAnalysis { tolerances, jumps, classes, bv, variation, m0_integral })
}

/// Runs every epsilon concurrently; results keep the input order.
pub fn sweep(system: &System, settings: &RunSettings, eps: &[f64]) -> Vec<Result<EpsRun, PipelineError>> {
    crate::par::map(eps, |&e| run_eps(system, settings, e))
}

/// Sequential twin of [`sweep`].
pub fn sweep_seq(system: &System, settings: &RunSettings, eps: &[f64]) -> Vec<Result<EpsRun, PipelineError>> {
    crate::par::map_seq(eps, |&e| run_eps(system, settings, e))
}
