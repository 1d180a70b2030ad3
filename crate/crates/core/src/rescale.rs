//! Energy-dissipation arclength and the reparametrised curves (t(s), q(s)).

use std::io::{Read, Write};

use thiserror::Error;

use crate::contact::{joint_b, Dissipation, JointQuery};
use crate::energy::{slopes, Energy, State};
use crate::numeric::MonotoneCubic;
use crate::potentials::Vector;
use crate::viscous_solver::{fmt_num, Trajectory};

#[derive(Debug, Error)]
pub enum RescaleError {
    #[error("arclength is not strictly increasing at node {0}")]
    NotMonotone(usize),
    #[error("need at least two nodes")]
    TooShort,
    #[error("curve i/o: {0}")]
    Io(String),
}

/// s_n = s_{n-1} + tau_n (1 + ledger_n + |u'_n|). The backward rates are
/// constant on each step, so this is the exact integral of the piecewise
/// constant integrand.
pub fn arclength(tr: &Trajectory) -> Vec<f64> {
    let mut s = Vec::with_capacity(tr.len());
    s.push(0.0);
    for n in 1..tr.len() {
        let h = tr.step(n);
        let du = (&tr.u[n] - &tr.u[n - 1]).norm();
        s.push(s[n - 1] + h * (1.0 + tr.dissipation_rate(n)) + du);
    }
    s
}

/// Curve on a uniform grid of the rescaled arclength.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCurve {
    pub eps: f64,
    pub alpha: f64,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub u: Vec<Vector>,
    pub z: Vec<Vector>,
    pub dt: Vec<f64>,
    pub du: Vec<Vector>,
    pub dz: Vec<Vector>,
    pub slope_u: Vec<f64>,
    pub slope_z: Vec<f64>,
    /// t' + M_eps(t, q, t', q') + |u'| - 1
    pub norm_residual: Vec<f64>,
}

impl ParamCurve {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn state(&self, k: usize) -> State {
        State::new(self.u[k].clone(), self.z[k].clone())
    }

    pub fn length(&self) -> f64 {
        self.s.last().copied().unwrap_or(0.0)
    }

    /// Largest |norm_residual| over interior nodes.
    pub fn max_norm_residual(&self) -> f64 {
        let n = self.len();
        self.norm_residual[1..n.saturating_sub(1)].iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), RescaleError> {
        let (n, m) = (self.u[0].len(), self.z[0].len());
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["s".to_string(), "t".to_string()];
        header.extend((0..n).map(|i| format!("u_{i}")));
        header.extend((0..m).map(|i| format!("z_{i}")));
        header.push("dt".into());
        header.extend((0..n).map(|i| format!("du_{i}")));
        header.extend((0..m).map(|i| format!("dz_{i}")));
        header.extend(["slope_u", "slope_z", "norm_residual"].map(String::from));
        wr.write_record(&header).map_err(|e| RescaleError::Io(e.to_string()))?;
        for k in 0..self.len() {
            let mut row = vec![fmt_num(self.s[k]), fmt_num(self.t[k])];
            row.extend(self.u[k].iter().map(|x| fmt_num(*x)));
            row.extend(self.z[k].iter().map(|x| fmt_num(*x)));
            row.push(fmt_num(self.dt[k]));
            row.extend(self.du[k].iter().map(|x| fmt_num(*x)));
            row.extend(self.dz[k].iter().map(|x| fmt_num(*x)));
            row.extend([self.slope_u[k], self.slope_z[k], self.norm_residual[k]].map(fmt_num));
            wr.write_record(&row).map_err(|e| RescaleError::Io(e.to_string()))?;
        }
        wr.flush().map_err(|e| RescaleError::Io(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R, eps: f64, alpha: f64) -> Result<Self, RescaleError> {
        let io = |e: csv::Error| RescaleError::Io(e.to_string());
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(io)?.clone();
        let n = header.iter().filter(|h| h.starts_with("u_")).count();
        let m = header.iter().filter(|h| h.starts_with("z_")).count();
        if header.len() != 3 + 2 * n + 2 * m + 3 {
            return Err(RescaleError::Io("unexpected curve header".into()));
        }
        let mut c = ParamCurve {
            eps,
            alpha,
            s: vec![],
            t: vec![],
            u: vec![],
            z: vec![],
            dt: vec![],
            du: vec![],
            dz: vec![],
            slope_u: vec![],
            slope_z: vec![],
            norm_residual: vec![],
        };
        for rec in rd.records() {
            let rec = rec.map_err(io)?;
            let v: Vec<f64> = rec
                .iter()
                .map(|x| x.trim().parse::<f64>().map_err(|e| RescaleError::Io(e.to_string())))
                .collect::<Result<_, _>>()?;
            let slice = |a: usize, k: usize| Vector::from_column_slice(&v[a..a + k]);
            c.s.push(v[0]);
            c.t.push(v[1]);
            c.u.push(slice(2, n));
            c.z.push(slice(2 + n, m));
            c.dt.push(v[2 + n + m]);
            c.du.push(slice(3 + n + m, n));
            c.dz.push(slice(3 + 2 * n + m, m));
            let b = 3 + 2 * n + 2 * m;
            c.slope_u.push(v[b]);
            c.slope_z.push(v[b + 1]);
            c.norm_residual.push(v[b + 2]);
        }
        Ok(c)
    }
}

/// Central differences on a uniform grid, one-sided at the ends.
fn differences(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|k| {
            if k == 0 {
                (y[1] - y[0]) / h
            } else if k == n - 1 {
                (y[n - 1] - y[n - 2]) / h
            } else {
                (y[k + 1] - y[k - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Interpolates the trajectory onto `n_nodes` equally spaced values of the
/// arclength `s` with shape-preserving cubics and records derivatives, slopes
/// and the normalisation residual.
pub fn reparametrize(
    tr: &Trajectory,
    s: &[f64],
    n_nodes: usize,
    energy: &dyn Energy,
    d: &Dissipation,
) -> Result<ParamCurve, RescaleError> {
    if n_nodes < 3 || tr.len() < 2 || s.len() != tr.len() {
        return Err(RescaleError::TooShort);
    }
    if let Some(k) = s.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(RescaleError::NotMonotone(k + 1));
    }
    let total = *s.last().unwrap();
    let h = total / (n_nodes - 1) as f64;
    let grid: Vec<f64> = (0..n_nodes).map(|k| if k == n_nodes - 1 { total } else { k as f64 * h }).collect();
    let interp = |vals: Vec<f64>| -> Vec<f64> {
        let c = MonotoneCubic::new(s.to_vec(), vals).expect("strictly increasing abscissae");
        grid.iter().map(|&x| c.eval(x)).collect()
    };
    let (nu, nz) = (tr.u[0].len(), tr.z[0].len());
    let t: Vec<f64> = interp(tr.t.clone());
    let ucols: Vec<Vec<f64>> = (0..nu).map(|i| interp(tr.u.iter().map(|v| v[i]).collect())).collect();
    let zcols: Vec<Vec<f64>> = (0..nz).map(|i| interp(tr.z.iter().map(|v| v[i]).collect())).collect();
    let dt = differences(&t, h);
    let ducols: Vec<Vec<f64>> = ucols.iter().map(|c| differences(c, h)).collect();
    let dzcols: Vec<Vec<f64>> = zcols.iter().map(|c| differences(c, h)).collect();
    let gather = |cols: &[Vec<f64>], k: usize| Vector::from_iterator(cols.len(), cols.iter().map(|c| c[k]));
    let mut curve = ParamCurve {
        eps: tr.eps,
        alpha: tr.alpha,
        s: grid,
        t,
        u: vec![],
        z: vec![],
        dt,
        du: vec![],
        dz: vec![],
        slope_u: vec![],
        slope_z: vec![],
        norm_residual: vec![],
    };
    for k in 0..n_nodes {
        let (u, z) = (gather(&ucols, k), gather(&zcols, k));
        let (du, dz) = (gather(&ducols, k), gather(&dzcols, k));
        let t = curve.t[k].clamp(0.0, energy.horizon());
        let sl = slopes(energy, d, t, &u, &z);
        let m = joint_b(
            &JointQuery {
                tau: curve.dt[k].max(0.0),
                u_rate: du.clone(),
                z_rate: dz.clone(),
                sigma_u: sl.s_u,
                sigma_z: sl.s_z,
                alpha: tr.alpha,
                eps: tr.eps,
            },
            d,
        )
        .map(|v| v.value())
        .unwrap_or(f64::INFINITY);
        curve.norm_residual.push(curve.dt[k] + m + du.norm() - 1.0);
        curve.slope_u.push(sl.s_u);
        curve.slope_z.push(sl.s_z);
        curve.u.push(u);
        curve.z.push(z);
        curve.du.push(du);
        curve.dz.push(dz);
    }
    Ok(curve)
}
