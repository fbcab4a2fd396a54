//! Label-frequency curves seen through uniform query noise.
//!
//! When a query at `w` is perturbed to `X = w + U`, `U ~ Unif[-sigma, sigma]`,
//! the label is `+1` with probability `F(w) = (1/2 sigma) * int_{w-sigma}^{w+sigma} m(x) dx`:
//! the convolution of the regression function with the uniform kernel. For
//! the built-in piecewise-power forms this integral has a closed form; a
//! composite Gauss-Legendre rule split at the breakpoints of `m` serves as an
//! independent cross-check and as the fallback for arbitrary forms.

use crate::error::{Error, Result};
use crate::function_class::RegressionFunction;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Default number of Gauss-Legendre nodes per smooth segment.
pub const DEFAULT_QUADRATURE_NODES: usize = 64;

/// Slack allowed when checking that an evaluation point is admissible, so
/// that grid endpoints produced by floating-point arithmetic stay usable.
const ADMISSIBLE_SLACK: f64 = 1e-9;

/// Integration backend for the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exact piecewise antiderivatives.
    Analytic,
    /// Composite Gauss-Legendre with this many nodes per smooth segment.
    Quadrature { nodes: usize },
}

/// The label-frequency curve `F = m * Unif[-sigma, sigma]`.
#[derive(Debug, Clone)]
pub struct ConvolvedFunction {
    m: RegressionFunction,
    sigma: f64,
    method: Method,
}

/// Builds the convolved curve for a positive noise half-width.
pub fn convolve(m: &RegressionFunction, sigma: f64, method: Method) -> Result<ConvolvedFunction> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::BadParams(format!(
            "convolution requires sigma > 0, got {sigma}"
        )));
    }
    let (lo, hi) = m.domain();
    if hi - lo <= 2.0 * sigma {
        return Err(Error::DegenerateDomain {
            lo: lo + sigma,
            hi: hi - sigma,
        });
    }
    if let Method::Quadrature { nodes } = method {
        if nodes == 0 {
            return Err(Error::BadParams("quadrature needs at least one node".into()));
        }
    }
    Ok(ConvolvedFunction {
        m: m.clone(),
        sigma,
        method,
    })
}

impl ConvolvedFunction {
    pub fn source(&self) -> &RegressionFunction {
        &self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Threshold of the underlying regression function.
    pub fn threshold(&self) -> f64 {
        self.m.threshold()
    }

    /// Evaluation interval: the domain shrunk by `sigma` on both sides.
    pub fn admissible(&self) -> (f64, f64) {
        let (lo, hi) = self.m.domain();
        (lo + self.sigma, hi - self.sigma)
    }

    /// Evaluates `F(w)`; the averaging window must stay inside the domain.
    pub fn eval(&self, w: f64) -> Result<f64> {
        let (lo, hi) = self.admissible();
        if !w.is_finite() || w < lo - ADMISSIBLE_SLACK || w > hi + ADMISSIBLE_SLACK {
            return Err(Error::QueryOutsideDomain { w, lo, hi });
        }
        let (dlo, dhi) = self.m.domain();
        let a = (w - self.sigma).max(dlo);
        let b = (w + self.sigma).min(dhi);
        let integral = match self.method {
            Method::Analytic => self.m.integral_on(a, b),
            Method::Quadrature { nodes } => self.quadrature_integral(a, b, nodes),
        };
        Ok(integral / (2.0 * self.sigma))
    }

    fn quadrature_integral(&self, a: f64, b: f64, nodes: usize) -> f64 {
        let mut cuts = vec![a];
        for bp in self.m.breakpoints() {
            if bp > a && bp < b {
                cuts.push(bp);
            }
        }
        cuts.push(b);
        let rule = gauss_legendre(nodes);
        let (xs, ws) = (&rule.0, &rule.1);
        let mut total = 0.0;
        for seg in cuts.windows(2) {
            let (half, mid) = (0.5 * (seg[1] - seg[0]), 0.5 * (seg[0] + seg[1]));
            if half <= 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for (&x, &wt) in xs.iter().zip(ws.iter()) {
                acc += wt * self.m.eval(mid + half * x);
            }
            total += acc * half;
        }
        total
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence and cached.
pub fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let j = j as f64;
                let p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x.abs();
        ws[i] = w;
        xs[n - 1 - i] = x.abs();
        ws[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        xs[n / 2] = 0.0;
    }
    let rule = Arc::new((xs, ws));
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

/// Largest pointwise gap `|F1(w) - F0(w)|` over a grid of the shared
/// admissible interval; returns `(gap, argmax)`.
pub fn max_gap(
    f0: &ConvolvedFunction,
    f1: &ConvolvedFunction,
    grid_step: f64,
) -> Result<(f64, f64)> {
    if f0.sigma != f1.sigma || f0.m.domain() != f1.m.domain() {
        return Err(Error::BadParams(
            "gap comparison requires matching sigma and domain".into(),
        ));
    }
    if !grid_step.is_finite() || grid_step <= 0.0 {
        return Err(Error::BadParams(format!(
            "grid_step must be positive, got {grid_step}"
        )));
    }
    let (lo, hi) = f0.admissible();
    max_gap_on(f0, f1, lo, hi, grid_step)
}

/// Same as [`max_gap`] but restricted to `[lo, hi]` (clamped to the
/// admissible interval). Used to scan only the support of the difference.
pub fn max_gap_on(
    f0: &ConvolvedFunction,
    f1: &ConvolvedFunction,
    lo: f64,
    hi: f64,
    grid_step: f64,
) -> Result<(f64, f64)> {
    let (alo, ahi) = f0.admissible();
    let lo = lo.max(alo);
    let hi = hi.min(ahi);
    if hi <= lo {
        return Err(Error::DegenerateDomain { lo, hi });
    }
    let steps = ((hi - lo) / grid_step).ceil() as usize;
    let mut best = (0.0f64, lo);
    for i in 0..=steps {
        let w = (lo + i as f64 * grid_step).min(hi);
        let gap = (f1.eval(w)? - f0.eval(w)?).abs();
        if gap > best.0 {
            best = (gap, w);
        }
    }
    Ok(best)
}

/// Symmetric difference quotient of `F` across the threshold:
/// `(F(t+h) - F(t-h)) / (2h)` for `0 < h <= sigma`.
pub fn local_slope(f: &ConvolvedFunction, h: f64) -> Result<f64> {
    if !h.is_finite() || h <= 0.0 || h > f.sigma {
        return Err(Error::BadParams(format!(
            "slope step must satisfy 0 < h <= sigma, got h = {h}, sigma = {}",
            f.sigma
        )));
    }
    let t = f.threshold();
    Ok((f.eval(t + h)? - f.eval(t - h)?) / (2.0 * h))
}

/// CSV curve `w,m,F` over the admissible interval with the given step.
pub fn curve_csv(f: &ConvolvedFunction, grid_step: f64) -> Result<String> {
    if !grid_step.is_finite() || grid_step <= 0.0 {
        return Err(Error::BadParams(format!(
            "grid_step must be positive, got {grid_step}"
        )));
    }
    let (lo, hi) = f.admissible();
    let steps = ((hi - lo) / grid_step).ceil() as usize;
    let mut out = String::from("w,m,F\n");
    for i in 0..=steps {
        let w = (lo + i as f64 * grid_step).min(hi);
        out.push_str(&format!("{},{},{}\n", w, f.m.eval(w), f.eval(w)?));
    }
    Ok(out)
}
