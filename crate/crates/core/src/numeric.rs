//! Scalar numerical kernels shared by the modules: golden-section search,
//! the log-scale infimum over a positive scaling parameter, and two cubic
//! interpolants.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Lower end of the log10 search window for scaling parameters.
pub const LOG_TAU_MIN: f64 = -12.0;
/// Upper end of the log10 search window for scaling parameters.
pub const LOG_TAU_MAX: f64 = 12.0;
/// Bracket tolerance of the golden-section stage.
pub const GOLDEN_TOL: f64 = 1e-12;

/// Golden-section minimisation of a unimodal `f` on `[a, b]`.
///
/// Returns the best abscissa and its value.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut it = 0;
    while (b - a).abs() > tol && it < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        it += 1;
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimises a function of a positive scale `tau` that is unimodal in `tau`.
///
/// A coarse scan on the log10 window brackets the minimum, then golden
/// section refines it. Returns `(tau, value)`. If the minimum sits at an end
/// of the window the end value is returned, which is how non-attained
/// infima (tau -> 0 or tau -> infinity) show up.
pub fn log_scale_infimum<F: Fn(f64) -> f64>(f: F) -> (f64, f64) {
    const N: usize = 97;
    let h = (LOG_TAU_MAX - LOG_TAU_MIN) / (N - 1) as f64;
    let g = |lt: f64| f(10f64.powf(lt));
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    let vals: Vec<f64> = (0..N).map(|i| g(LOG_TAU_MIN + h * i as f64)).collect();
    for (i, &v) in vals.iter().enumerate() {
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let lo = LOG_TAU_MIN + h * best.saturating_sub(1) as f64;
    let hi = LOG_TAU_MIN + h * (best + 1).min(N - 1) as f64;
    let (lt, v) = golden_min(g, lo, hi, GOLDEN_TOL);
    if v <= best_val {
        (10f64.powf(lt), v)
    } else {
        (10f64.powf(LOG_TAU_MIN + h * best as f64), best_val)
    }
}

/// Finds a root of a nondecreasing function on `[a, b]` by bisection.
pub fn bisect_increasing<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) > 0.0 {
            b = m;
        } else {
            a = m;
        }
        if b - a <= tol * (1.0 + m.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

fn locate(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    if x <= xs[0] {
        return 0;
    }
    if x >= xs[n - 1] {
        return n - 2;
    }
    match xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i - 1,
    }
}

/// Natural cubic spline through `(x_i, y_i)` with strictly increasing `x`.
///
/// Outside the knot range the end polynomials are extended.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>, // second derivatives at the knots
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Option<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || xs.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior knots.
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let rhs = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
                let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
                c[i] = h1 / diag;
                d[i] = (rhs - h0 * d[i - 1]) / diag;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        Some(Self { xs, ys, m })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = locate(&self.xs, x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let i = locate(&self.xs, x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        (self.ys[i + 1] - self.ys[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
///
/// Monotone data give a monotone interpolant, which is what the inverse
/// of the arclength map needs.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Option<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || xs.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
        let mut d = vec![0.0; n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        for i in 0..n - 1 {
            if delta[i] == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
            }
        }
        Some(Self { xs, ys, d })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = locate(&self.xs, x);
        let h = self.xs[i + 1] - self.xs[i];
        let s = ((x - self.xs[i]) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.ys[i] + h10 * h * self.d[i] + h01 * self.ys[i + 1] + h11 * h * self.d[i + 1]
    }
}
