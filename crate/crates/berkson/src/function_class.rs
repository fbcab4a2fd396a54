//! Regression functions `m(x) = P(Y = +1 | X = x)` with threshold structure.
//!
//! Every built-in form is a piecewise description around a unique threshold
//! `t` where `m` crosses 1/2: below `t` the function sits under 1/2, above it
//! over 1/2. The margin away from the threshold is controlled by a power law
//! with exponent `k - 1`, two-sided between constants `c` and `C`. Functions
//! are antisymmetric about `(t, 1/2)` within the noise half-width `sigma` and
//! keep their threshold at least `sigma` away from the domain endpoints, so
//! the uniform query perturbation never leaves the domain.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Absolute slack used by membership checks on exact identities.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Class parameters shared by a family of regression functions.
///
/// `k` is the margin exponent (`k = 1` gives a jump of `2c` at the
/// threshold), `c <= C` bound the margin from below and above, `sigma` is the
/// half-width of the uniform query noise and `epsilon0` limits where the
/// two-sided margin control is required to hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginParams {
    pub k: f64,
    pub c: f64,
    pub big_c: f64,
    pub sigma: f64,
    pub epsilon0: f64,
}

impl MarginParams {
    /// Validates and builds parameters with the default `epsilon0 = 1/2`.
    pub fn new(k: f64, c: f64, big_c: f64, sigma: f64) -> Result<Self> {
        let p = MarginParams {
            k,
            c,
            big_c,
            sigma,
            epsilon0: 0.5,
        };
        p.validate()?;
        Ok(p)
    }

    /// Replaces `epsilon0`, re-validating.
    pub fn with_epsilon0(mut self, epsilon0: f64) -> Result<Self> {
        self.epsilon0 = epsilon0;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.k.is_finite() || self.k < 1.0 {
            return Err(Error::BadParams(format!("k must be >= 1, got {}", self.k)));
        }
        if !self.c.is_finite() || self.c <= 0.0 || self.c > 0.5 {
            return Err(Error::BadParams(format!(
                "c must lie in (0, 1/2], got {}",
                self.c
            )));
        }
        if !self.big_c.is_finite() || self.big_c < self.c {
            return Err(Error::BadParams(format!(
                "C must satisfy C >= c, got C = {}, c = {}",
                self.big_c, self.c
            )));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 || self.sigma >= 1.0 {
            return Err(Error::BadParams(format!(
                "sigma must lie in [0, 1), got {}",
                self.sigma
            )));
        }
        if !self.epsilon0.is_finite() || self.epsilon0 <= 0.0 || self.epsilon0 > 0.5 {
            return Err(Error::BadParams(format!(
                "epsilon0 must lie in (0, 1/2], got {}",
                self.epsilon0
            )));
        }
        Ok(())
    }
}

/// Exponent separation constant for the two-threshold power pair:
/// `beta = 1 / (1 - (c/C)^(1/(k-1)))`. Beyond `beta * a + sigma` the second
/// member of the pair rejoins the first while keeping its two-sided margin
/// control around its own threshold `a`.
pub fn beta(k: f64, c: f64, big_c: f64) -> Result<f64> {
    if k <= 1.0 {
        return Err(Error::BadParams(format!(
            "beta requires k > 1, got k = {k}"
        )));
    }
    if big_c <= c {
        return Err(Error::BadParams(format!(
            "beta requires C > c, got C = {big_c}, c = {c}"
        )));
    }
    Ok(1.0 / (1.0 - (c / big_c).powf(1.0 / (k - 1.0))))
}

/// Tagged description of the built-in function shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Form {
    /// `m(x) = clip(1/2 + c * sign(x - t) * |x - t|^(k-1))` on `[-1, 1]`.
    PowerSymmetric,
    /// Jump function `1/2 - c` / `1/2 + c` with threshold at `-a` (`k = 1`).
    StepPair0 { a: f64 },
    /// Jump function with threshold at `+a` (`k = 1`).
    StepPair1 { a: f64 },
    /// Power member with threshold `0` on the shifted domain `[-sigma, 2 - sigma]`.
    PowerPair0 { a: f64 },
    /// Power member with threshold `a`, rejoining the first member at
    /// `beta * a + sigma` (`k > 1`, shifted domain).
    PowerPair1 { a: f64, beta: f64 },
    /// Piecewise-linear interpolation through user-supplied knots.
    TabulatedPiecewise { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum PieceKind {
    /// Constant value in `[0, 1]`.
    Const(f64),
    /// `1/2 + orient * coef * |x - center|^(k-1)`, guaranteed unclipped and
    /// with `x - center` of constant sign on the piece.
    Power { orient: f64, coef: f64, center: f64 },
    /// `y0 + slope * (x - x0)` (tabulated segments).
    Linear { x0: f64, y0: f64, slope: f64 },
}

/// One analytic piece of a regression function on `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub kind: PieceKind,
}

/// A regression function with validated threshold structure.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFunction {
    params: MarginParams,
    t: f64,
    form: Form,
    domain: (f64, f64),
    pieces: Vec<Piece>,
}

struct PieceBuilder {
    k: f64,
    pieces: Vec<Piece>,
}

impl PieceBuilder {
    fn new(k: f64) -> Self {
        PieceBuilder {
            k,
            pieces: Vec::new(),
        }
    }

    fn push_const(&mut self, lo: f64, hi: f64, v: f64) {
        if hi > lo {
            self.pieces.push(Piece {
                lo,
                hi,
                kind: PieceKind::Const(v),
            });
        }
    }

    /// Adds `1/2 + orient * coef * |x - center|^(k-1)` on `[lo, hi)`, which
    /// must lie entirely on one side of `center`. Portions past the
    /// saturation radius (where the value would leave `[0, 1]`) are emitted
    /// as constant 0/1 pieces.
    fn push_power_side(&mut self, lo: f64, hi: f64, center: f64, orient: f64, coef: f64) {
        if hi <= lo {
            return;
        }
        debug_assert!(lo >= center - 1e-12 || hi <= center + 1e-12);
        let km1 = self.k - 1.0;
        debug_assert!(km1 > 0.0, "k = 1 forms must use constant pieces");
        let sat = (0.5 / coef).powf(1.0 / km1);
        let clipped = if orient > 0.0 { 1.0 } else { 0.0 };
        if lo >= center {
            // right side: |x - center| grows with x
            let cut = (center + sat).clamp(lo, hi);
            if cut > lo {
                self.pieces.push(Piece {
                    lo,
                    hi: cut,
                    kind: PieceKind::Power {
                        orient,
                        coef,
                        center,
                    },
                });
            }
            self.push_const(cut, hi, clipped);
        } else {
            // left side: |x - center| shrinks with x
            let cut = (center - sat).clamp(lo, hi);
            self.push_const(lo, cut, clipped);
            if hi > cut {
                self.pieces.push(Piece {
                    lo: cut,
                    hi,
                    kind: PieceKind::Power {
                        orient,
                        coef,
                        center,
                    },
                });
            }
        }
    }

    fn finish(self) -> Vec<Piece> {
        debug_assert!(self.pieces.windows(2).all(|w| w[0].hi == w[1].lo));
        self.pieces
    }
}

/// Builds the symmetric power-margin function with threshold `t` on `[-1, 1]`.
pub fn make_power(params: MarginParams, t: f64) -> Result<RegressionFunction> {
    params.validate()?;
    let (lo, hi) = (-1.0, 1.0);
    check_boundary(t, lo, hi, params.sigma)?;
    let pieces = if params.k == 1.0 {
        let mut b = PieceBuilder::new(1.0);
        b.push_const(lo, t, 0.5 - params.c);
        b.push_const(t, hi, 0.5 + params.c);
        b.finish()
    } else {
        let mut b = PieceBuilder::new(params.k);
        b.push_power_side(lo, t, t, -1.0, params.c);
        b.push_power_side(t, hi, t, 1.0, params.c);
        b.finish()
    };
    Ok(RegressionFunction {
        params,
        t,
        form: Form::PowerSymmetric,
        domain: (lo, hi),
        pieces,
    })
}

/// Builds the two-hypothesis pair used by the lower-bound constructions.
///
/// For `k = 1` the members are jump functions at `-a` and `+a` on `[-1, 1]`
/// (threshold separation `2a`). For `k > 1` they live on the shifted domain
/// `[-sigma, 2 - sigma]` with thresholds `0` and `a` (separation `a`); the
/// second member follows a power margin around `a` until `beta * a + sigma`
/// and rejoins the first member beyond that point.
pub fn make_lb_pair(
    params: MarginParams,
    a: f64,
) -> Result<(RegressionFunction, RegressionFunction)> {
    params.validate()?;
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::BadParams(format!(
            "threshold offset a must be positive, got {a}"
        )));
    }
    let sigma = params.sigma;
    if params.k == 1.0 {
        let (lo, hi) = (-1.0, 1.0);
        check_boundary(-a, lo, hi, sigma)?;
        check_boundary(a, lo, hi, sigma)?;
        let member = |t: f64, form: Form| {
            let mut b = PieceBuilder::new(1.0);
            b.push_const(lo, t, 0.5 - params.c);
            b.push_const(t, hi, 0.5 + params.c);
            RegressionFunction {
                params,
                t,
                form,
                domain: (lo, hi),
                pieces: b.finish(),
            }
        };
        Ok((
            member(-a, Form::StepPair0 { a }),
            member(a, Form::StepPair1 { a }),
        ))
    } else {
        let (lo, hi) = (-sigma, 2.0 - sigma);
        let bta = beta(params.k, params.c, params.big_c)?;
        let rejoin = bta * a + sigma;
        // The pair must differ only on a window that stays clear of the
        // admissible-query margin on the right.
        if rejoin + sigma > hi - sigma {
            return Err(Error::BoundaryViolation(format!(
                "rejoin point beta*a + sigma = {rejoin} too close to the domain end {hi}"
            )));
        }
        check_boundary(a, lo, hi, sigma)?;
        let p0 = {
            let mut b = PieceBuilder::new(params.k);
            b.push_power_side(lo, 0.0, 0.0, -1.0, params.c);
            b.push_power_side(0.0, hi, 0.0, 1.0, params.c);
            RegressionFunction {
                params,
                t: 0.0,
                form: Form::PowerPair0 { a },
                domain: (lo, hi),
                pieces: b.finish(),
            }
        };
        let p1 = {
            let mut b = PieceBuilder::new(params.k);
            b.push_power_side(lo, a, a, -1.0, params.c);
            b.push_power_side(a, rejoin, a, 1.0, params.c);
            b.push_power_side(rejoin, hi, 0.0, 1.0, params.c);
            RegressionFunction {
                params,
                t: a,
                form: Form::PowerPair1 { a, beta: bta },
                domain: (lo, hi),
                pieces: b.finish(),
            }
        };
        Ok((p0, p1))
    }
}

/// Builds a piecewise-linear regression function through `knots`.
///
/// Knots must be strictly increasing in `x`, with values in `[0, 1]`, and the
/// interpolant must cross 1/2 exactly once, at `t`.
pub fn make_tabulated(
    params: MarginParams,
    t: f64,
    knots: &[(f64, f64)],
) -> Result<RegressionFunction> {
    params.validate()?;
    if knots.len() < 2 {
        return Err(Error::BadParams(
            "tabulated form needs at least two knots".into(),
        ));
    }
    for w in knots.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::BadParams(format!(
                "tabulated knots must be strictly increasing in x: {} then {}",
                w[0].0, w[1].0
            )));
        }
    }
    if knots.iter().any(|&(_, y)| !(0.0..=1.0).contains(&y)) {
        return Err(Error::BadParams(
            "tabulated knot values must lie in [0, 1]".into(),
        ));
    }
    let (lo, hi) = (knots[0].0, knots[knots.len() - 1].0);
    check_boundary(t, lo, hi, params.sigma)?;
    let eval_at = |x: f64| -> f64 {
        let i = knots.partition_point(|&(kx, _)| kx <= x).clamp(1, knots.len() - 1);
        let (x0, y0) = knots[i - 1];
        let (x1, y1) = knots[i];
        y0 + (y1 - y0) / (x1 - x0) * (x - x0)
    };
    if (eval_at(t) - 0.5).abs() > 1e-9 {
        return Err(Error::BadParams(format!(
            "tabulated form must satisfy m(t) = 1/2 at t = {t}, got {}",
            eval_at(t)
        )));
    }
    let mut b = PieceBuilder::new(params.k);
    for w in knots.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        b.pieces.push(Piece {
            lo: x0,
            hi: x1,
            kind: PieceKind::Linear {
                x0,
                y0,
                slope: (y1 - y0) / (x1 - x0),
            },
        });
    }
    Ok(RegressionFunction {
        params,
        t,
        form: Form::TabulatedPiecewise {
            knots: knots.to_vec(),
        },
        domain: (lo, hi),
        pieces: b.finish(),
    })
}

fn check_boundary(t: f64, lo: f64, hi: f64, sigma: f64) -> Result<()> {
    if !t.is_finite() || t < lo || t > hi {
        return Err(Error::BadParams(format!(
            "threshold {t} outside the domain [{lo}, {hi}]"
        )));
    }
    if t - lo < sigma - 1e-15 || hi - t < sigma - 1e-15 {
        return Err(Error::BoundaryViolation(format!(
            "threshold {t} must be at least sigma = {sigma} away from [{lo}, {hi}]"
        )));
    }
    Ok(())
}

impl RegressionFunction {
    pub fn params(&self) -> &MarginParams {
        &self.params
    }

    /// Threshold where the function crosses 1/2.
    pub fn threshold(&self) -> f64 {
        self.t
    }

    pub fn form(&self) -> &Form {
        &self.form
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Interval of admissible query points: the domain shrunk by `sigma` on
    /// both sides, so the perturbed feature never leaves the domain.
    pub fn admissible(&self, sigma: f64) -> (f64, f64) {
        (self.domain.0 + sigma, self.domain.1 - sigma)
    }

    /// Constructs a member directly from pieces, bypassing all structural
    /// validation. Only for tests that need deliberately broken members.
    #[doc(hidden)]
    pub fn from_raw_parts(
        params: MarginParams,
        t: f64,
        form: Form,
        domain: (f64, f64),
        pieces_of: &RegressionFunction,
    ) -> Self {
        RegressionFunction {
            params,
            t,
            form,
            domain,
            pieces: pieces_of.pieces.clone(),
        }
    }

    /// Evaluates `m(x)`. `x` is clamped to the domain; `m(t) = 1/2` exactly,
    /// also for jump forms where the one-sided limits differ.
    pub fn eval(&self, x: f64) -> f64 {
        if x == self.t {
            return 0.5;
        }
        let x = x.clamp(self.domain.0, self.domain.1);
        let idx = self
            .pieces
            .partition_point(|p| p.lo <= x)
            .saturating_sub(1);
        let p = &self.pieces[idx];
        let v = match p.kind {
            PieceKind::Const(v) => v,
            PieceKind::Power {
                orient,
                coef,
                center,
            } => 0.5 + orient * coef * (x - center).abs().powf(self.params.k - 1.0),
            PieceKind::Linear { x0, y0, slope } => y0 + slope * (x - x0),
        };
        v.clamp(0.0, 1.0)
    }

    /// Exact integral of `m` over `[a, b]` (requires `a <= b` inside the domain).
    pub fn integral_on(&self, a: f64, b: f64) -> f64 {
        debug_assert!(b >= a - 1e-12);
        let a = a.clamp(self.domain.0, self.domain.1);
        let b = b.clamp(self.domain.0, self.domain.1);
        let k = self.params.k;
        let mut total = 0.0;
        for p in &self.pieces {
            let lo = p.lo.max(a);
            let hi = p.hi.min(b);
            if hi <= lo {
                continue;
            }
            total += match p.kind {
                PieceKind::Const(v) => v * (hi - lo),
                PieceKind::Power {
                    orient,
                    coef,
                    center,
                } => {
                    // antiderivative of |u|^(k-1) is sign(u) |u|^k / k
                    let g = |u: f64| u.signum() * u.abs().powf(k) / k;
                    0.5 * (hi - lo) + orient * coef * (g(hi - center) - g(lo - center))
                }
                PieceKind::Linear { x0, y0, slope } => {
                    let mid = 0.5 * (lo + hi);
                    (y0 + slope * (mid - x0)) * (hi - lo)
                }
            };
        }
        total
    }

    /// Sorted interior points where the analytic description changes piece.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.lo).collect()
    }

    /// Returns a copy shifted by `dx` (domain, threshold and pieces alike).
    /// Use `translate(-(1 - sigma) - domain.0)`-style shifts to map the
    /// shifted-domain pair members onto the standard interval `[-1, 1]`.
    #[must_use]
    pub fn translate(&self, dx: f64) -> Self {
        let mut out = self.clone();
        out.t += dx;
        out.domain = (out.domain.0 + dx, out.domain.1 + dx);
        for p in &mut out.pieces {
            p.lo += dx;
            p.hi += dx;
            match &mut p.kind {
                PieceKind::Const(_) => {}
                PieceKind::Power { center, .. } => *center += dx,
                PieceKind::Linear { x0, .. } => *x0 += dx,
            }
        }
        if let Form::TabulatedPiecewise { knots } = &mut out.form {
            for kn in knots.iter_mut() {
                kn.0 += dx;
            }
        }
        out
    }

    /// Copy translated so that its domain becomes `[-1, 1]`.
    #[must_use]
    pub fn to_standard_domain(&self) -> Self {
        let center = 0.5 * (self.domain.0 + self.domain.1);
        self.translate(-center)
    }

    /// Serializable description of this function.
    pub fn to_spec(&self) -> FunctionSpec {
        let (form, a, knots) = match &self.form {
            Form::PowerSymmetric => (FormTag::PowerSymmetric, None, None),
            Form::StepPair0 { a } => (FormTag::StepPair0, Some(*a), None),
            Form::StepPair1 { a } => (FormTag::StepPair1, Some(*a), None),
            Form::PowerPair0 { a } => (FormTag::PowerPair0, Some(*a), None),
            Form::PowerPair1 { a, .. } => (FormTag::PowerPair1, Some(*a), None),
            Form::TabulatedPiecewise { knots } => {
                (FormTag::TabulatedPiecewise, None, Some(knots.clone()))
            }
        };
        FunctionSpec {
            form,
            k: self.params.k,
            c: self.params.c,
            big_c: self.params.big_c,
            sigma: self.params.sigma,
            epsilon0: Some(self.params.epsilon0),
            t: Some(self.t),
            a,
            knots,
        }
    }
}

/// Verdict for a single class condition.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConditionReport {
    pub pass: bool,
    /// Location of the worst violation (or the worst margin if passing).
    pub worst_x: f64,
    /// Largest violation magnitude found (<= 0 means no violation).
    pub violation: f64,
}

/// Grid-based membership verdict for the three class conditions.
#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    /// Two-sided margin control `c|x-t|^(k-1) <= |m(x)-1/2| <= C|x-t|^(k-1)`.
    pub margin: ConditionReport,
    /// Antisymmetry `m(t+d) - 1/2 = 1/2 - m(t-d)` for `|d| <= sigma`.
    pub antisymmetry: ConditionReport,
    /// Threshold at least `sigma` from both domain endpoints.
    pub boundary: ConditionReport,
    pub grid_step: f64,
}

impl MembershipReport {
    #[must_use]
    pub fn pass(&self) -> bool {
        self.margin.pass && self.antisymmetry.pass && self.boundary.pass
    }
}

/// Checks the three class conditions on a grid of step `grid_step`.
///
/// The margin condition is only enforced where `|m(x) - 1/2| <= epsilon0`
/// and the value is strictly inside `(0, 1)` (i.e. before clipping), and the
/// threshold point itself is skipped (the power `|x-t|^(k-1)` degenerates
/// there for `k = 1`).
pub fn check_membership(m: &RegressionFunction, grid_step: f64) -> Result<MembershipReport> {
    if !grid_step.is_finite() || grid_step <= 0.0 {
        return Err(Error::BadParams(format!(
            "grid_step must be positive, got {grid_step}"
        )));
    }
    let p = m.params();
    let (lo, hi) = m.domain();
    let (k, c, big_c, sigma, eps0) = (p.k, p.c, p.big_c, p.sigma, p.epsilon0);
    let t = m.threshold();

    // (B) boundary clearance: exact arithmetic.
    let clearance = (t - lo).min(hi - t);
    let boundary = ConditionReport {
        pass: clearance >= sigma - 1e-15,
        worst_x: t,
        violation: sigma - clearance,
    };

    // (T) two-sided margin control on the grid.
    let mut margin = ConditionReport {
        pass: true,
        worst_x: t,
        violation: f64::NEG_INFINITY,
    };
    let steps = ((hi - lo) / grid_step).ceil() as usize;
    for i in 0..=steps {
        let x = (lo + i as f64 * grid_step).min(hi);
        if x == t {
            continue;
        }
        let v = m.eval(x);
        let dev = (v - 0.5).abs();
        if dev > eps0 + 1e-15 || v <= 1e-12 || v >= 1.0 - 1e-12 {
            continue;
        }
        let d = (x - t).abs().powf(k - 1.0);
        let viol = (c * d - dev).max(dev - big_c * d);
        if viol > margin.violation {
            margin.violation = viol;
            margin.worst_x = x;
        }
        if viol > MEMBERSHIP_TOL {
            margin.pass = false;
        }
    }

    // (M) antisymmetry about (t, 1/2) within the noise half-width.
    let mut anti = ConditionReport {
        pass: true,
        worst_x: t,
        violation: 0.0,
    };
    let n_delta = 1000usize;
    for j in 0..=n_delta {
        let d = sigma * j as f64 / n_delta as f64;
        if t + d > hi || t - d < lo {
            break;
        }
        let res = ((m.eval(t + d) - 0.5) - (0.5 - m.eval(t - d))).abs();
        if res > anti.violation {
            anti.violation = res;
            anti.worst_x = t + d;
        }
    }
    anti.pass = anti.violation <= MEMBERSHIP_TOL;

    Ok(MembershipReport {
        margin,
        antisymmetry: anti,
        boundary,
        grid_step,
    })
}

/// JSON tag for the built-in forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormTag {
    PowerSymmetric,
    StepPair0,
    StepPair1,
    PowerPair0,
    PowerPair1,
    TabulatedPiecewise,
}

/// Flat JSON description of a regression function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub form: FormTag,
    pub k: f64,
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<(f64, f64)>>,
}

impl FunctionSpec {
    /// Instantiates the described function.
    pub fn build(&self) -> Result<RegressionFunction> {
        let mut params = MarginParams::new(self.k, self.c, self.big_c, self.sigma)?;
        if let Some(e) = self.epsilon0 {
            params = params.with_epsilon0(e)?;
        }
        let need_a = || {
            self.a.ok_or_else(|| {
                Error::BadConfig("pair forms require the threshold offset `a`".into())
            })
        };
        match self.form {
            FormTag::PowerSymmetric => {
                let t = self
                    .t
                    .ok_or_else(|| Error::BadConfig("power form requires `t`".into()))?;
                make_power(params, t)
            }
            FormTag::StepPair0 | FormTag::StepPair1 => {
                if self.k != 1.0 {
                    return Err(Error::BadConfig(format!(
                        "step pair forms require k = 1, got k = {}",
                        self.k
                    )));
                }
                let (p0, p1) = make_lb_pair(params, need_a()?)?;
                Ok(if self.form == FormTag::StepPair0 { p0 } else { p1 })
            }
            FormTag::PowerPair0 | FormTag::PowerPair1 => {
                if self.k <= 1.0 {
                    return Err(Error::BadConfig(format!(
                        "power pair forms require k > 1, got k = {}",
                        self.k
                    )));
                }
                let (p0, p1) = make_lb_pair(params, need_a()?)?;
                Ok(if self.form == FormTag::PowerPair0 { p0 } else { p1 })
            }
            FormTag::TabulatedPiecewise => {
                let t = self
                    .t
                    .ok_or_else(|| Error::BadConfig("tabulated form requires `t`".into()))?;
                let knots = self
                    .knots
                    .as_ref()
                    .ok_or_else(|| Error::BadConfig("tabulated form requires `knots`".into()))?;
                make_tabulated(params, t, knots)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(k: f64, c: f64, big_c: f64, sigma: f64) -> MarginParams {
        MarginParams::new(k, c, big_c, sigma).unwrap()
    }

    #[test]
    fn step_form_takes_its_three_canonical_values() {
        let m = make_power(params(1.0, 0.25, 1.0, 0.2), 0.0).unwrap();
        assert_eq!(m.eval(-0.5), 0.25);
        assert_eq!(m.eval(0.0), 0.5);
        assert_eq!(m.eval(0.5), 0.75);
    }

    #[test]
    fn linear_form_crosses_half_at_threshold() {
        let m = make_power(params(2.0, 0.25, 1.0, 0.2), 0.0).unwrap();
        assert_eq!(m.eval(0.0), 0.5);
        assert!((m.eval(0.4) - 0.6).abs() < 1e-15);
        assert!((m.eval(-0.4) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn cubic_margin_value_matches_closed_form() {
        let m = make_power(params(3.0, 0.25, 1.0, 0.2), 0.2).unwrap();
        assert!((m.eval(0.6) - 0.54).abs() < 1e-15);
    }

    #[test]
    fn beta_matches_closed_form_for_quadratic_margin() {
        let b = beta(2.0, 0.25, 1.0).unwrap();
        assert!((b - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn step_pair_members_share_values_away_from_thresholds() {
        let (p0, p1) = make_lb_pair(params(1.0, 0.25, 1.0, 0.2), 0.1).unwrap();
        assert_eq!(p0.threshold(), -0.1);
        assert_eq!(p1.threshold(), 0.1);
        for x in [-0.9, -0.5, -0.11] {
            assert_eq!(p0.eval(x), 0.25, "x = {x}");
        }
        for x in [-0.9, -0.5, 0.09] {
            assert_eq!(p1.eval(x), 0.25, "x = {x}");
        }
        assert_eq!(p0.eval(0.5), 0.75);
        assert_eq!(p1.eval(0.5), 0.75);
    }

    #[test]
    fn power_pair_members_agree_beyond_rejoin_point() {
        let prm = params(3.0, 0.2, 0.8, 0.1);
        let a = 0.15;
        let (p0, p1) = make_lb_pair(prm, a).unwrap();
        let b = beta(3.0, 0.2, 0.8).unwrap();
        let rejoin = b * a + prm.sigma;
        let (_, hi) = p0.domain();
        let mut x = rejoin + 1e-9;
        while x < hi {
            assert!(
                (p0.eval(x) - p1.eval(x)).abs() < 1e-15,
                "members differ at x = {x}"
            );
            x += 0.05;
        }
        // strictly between the thresholds they must differ
        assert!(p0.eval(a / 2.0) > 0.5);
        assert!(p1.eval(a / 2.0) < 0.5);
    }

    #[test]
    fn power_pair_second_member_passes_membership_with_upper_constant() {
        // c x^(k-1) <= C (x-a)^(k-1) holds beyond the rejoin point by the
        // choice of beta, so the full membership check passes.
        let prm = params(3.0, 0.2, 0.8, 0.1);
        let (_, p1) = make_lb_pair(prm, 0.15).unwrap();
        let report = check_membership(&p1, 1e-3).unwrap();
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn membership_passes_for_quadratic_power_form() {
        let m = make_power(params(2.0, 0.25, 1.0, 0.2), 0.1).unwrap();
        let report = check_membership(&m, 1e-3).unwrap();
        assert!(report.pass(), "{report:?}");
        assert!(report.antisymmetry.violation <= 1e-12);
    }

    #[test]
    fn membership_boundary_condition_rejects_threshold_near_edge() {
        // Build a valid member, then move its threshold too close to the
        // boundary without rebuilding the pieces.
        let prm = params(1.0, 0.25, 1.0, 0.2);
        let good = make_power(prm, 0.0).unwrap();
        let bad = RegressionFunction::from_raw_parts(
            prm,
            1.0 - 0.1,
            Form::PowerSymmetric,
            (-1.0, 1.0),
            &good,
        );
        let report = check_membership(&bad, 1e-2).unwrap();
        assert!(!report.boundary.pass);
    }

    #[test]
    fn membership_margin_fails_when_upper_constant_is_forced_down() {
        // Rebuild the second pair member as if C were larger, then check it
        // against C = c: the upper margin bound must fail past the rejoin.
        let wide = params(3.0, 0.2, 0.8, 0.1);
        let (_, p1) = make_lb_pair(wide, 0.15).unwrap();
        let narrow = params(3.0, 0.2, 0.2, 0.1);
        let forged = RegressionFunction::from_raw_parts(
            narrow,
            p1.threshold(),
            p1.form().clone(),
            p1.domain(),
            &p1,
        );
        let report = check_membership(&forged, 1e-3).unwrap();
        assert!(!report.margin.pass);
        assert!(report.margin.worst_x > p1.threshold());
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(MarginParams::new(0.5, 0.25, 1.0, 0.1).is_err());
        assert!(MarginParams::new(2.0, 0.0, 1.0, 0.1).is_err());
        assert!(MarginParams::new(2.0, 0.6, 1.0, 0.1).is_err());
        assert!(MarginParams::new(2.0, 0.25, 0.1, 0.1).is_err());
        assert!(MarginParams::new(2.0, 0.25, 1.0, 1.0).is_err());
        // threshold too close to the boundary
        let prm = params(1.0, 0.25, 1.0, 0.2);
        assert!(matches!(
            make_power(prm, 0.9),
            Err(Error::BoundaryViolation(_))
        ));
        // pair separation too large for the shifted domain
        let prm = params(2.0, 0.25, 1.0, 0.3);
        assert!(make_lb_pair(prm, 1.2).is_err());
    }

    #[test]
    fn integral_matches_midpoint_sums() {
        let m = make_power(params(3.0, 0.3, 1.0, 0.1), 0.1).unwrap();
        let (a, b) = (-0.7, 0.9);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let riemann: f64 = (0..n)
            .map(|i| m.eval(a + (i as f64 + 0.5) * h) * h)
            .sum();
        assert!((m.integral_on(a, b) - riemann).abs() < 1e-9);
    }

    #[test]
    fn translate_shifts_threshold_and_domain_together() {
        let prm = params(2.0, 0.25, 1.0, 0.2);
        let (p0, _) = make_lb_pair(prm, 0.1).unwrap();
        let std = p0.to_standard_domain();
        assert_eq!(std.domain(), (-1.0, 1.0));
        let dx = -(0.5 * (p0.domain().0 + p0.domain().1));
        for x in [-0.9, -0.3, 0.0, 0.4, 0.9] {
            assert!((std.eval(x) - p0.eval(x - dx)).abs() < 1e-15);
        }
    }

    #[test]
    fn function_spec_round_trips_through_json() {
        let m = make_power(params(2.0, 0.25, 1.0, 0.2), 0.1).unwrap();
        let text = serde_json::to_string(&m.to_spec()).unwrap();
        let back: FunctionSpec = serde_json::from_str(&text).unwrap();
        let rebuilt = back.build().unwrap();
        assert_eq!(rebuilt, m);

        let (_, p1) = make_lb_pair(params(3.0, 0.2, 0.8, 0.1), 0.15).unwrap();
        let text = serde_json::to_string(&p1.to_spec()).unwrap();
        let rebuilt = serde_json::from_str::<FunctionSpec>(&text)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(rebuilt, p1);
    }

    #[test]
    fn tabulated_form_interpolates_and_validates() {
        let prm = params(1.0, 0.25, 1.0, 0.1);
        let knots = vec![(-1.0, 0.2), (0.0, 0.5), (1.0, 0.9)];
        let m = make_tabulated(prm, 0.0, &knots).unwrap();
        assert_eq!(m.eval(0.0), 0.5);
        assert!((m.eval(0.5) - 0.7).abs() < 1e-15);
        assert!((m.eval(-0.5) - 0.35).abs() < 1e-15);
        // m(t) far from 1/2 must be rejected
        assert!(make_tabulated(prm, 0.5, &knots).is_err());
    }

    proptest! {
        #[test]
        fn power_family_membership_holds(
            k in prop_oneof![Just(1.0), Just(2.0), Just(3.0), Just(4.0), 1.0f64..4.0],
            c in 0.05f64..0.5,
            sigma in 0.0f64..0.3,
            toff in -0.5f64..0.5,
        ) {
            let prm = params(k, c, c.max(1.0), sigma);
            let t = toff.clamp(-1.0 + sigma, 1.0 - sigma);
            let m = make_power(prm, t).unwrap();
            let report = check_membership(&m, 2e-3).unwrap();
            prop_assert!(report.pass(), "{report:?}");
            prop_assert_eq!(m.eval(t), 0.5);
        }

        #[test]
        fn pair_members_satisfy_membership(
            k in prop_oneof![Just(1.0), Just(2.0), Just(3.0), Just(4.0)],
            c in 0.05f64..0.4,
            sigma in 0.01f64..0.25,
            a in 0.02f64..0.3,
        ) {
            let big_c = if k == 1.0 { 1.0 } else { 4.0 * c };
            let prm = params(k, c, big_c, sigma);
            match make_lb_pair(prm, a) {
                Ok((p0, p1)) => {
                    let r0 = check_membership(&p0, 2e-3).unwrap();
                    let r1 = check_membership(&p1, 2e-3).unwrap();
                    prop_assert!(r0.pass(), "{r0:?}");
                    prop_assert!(r1.pass(), "{r1:?}");
                    prop_assert_eq!(p0.eval(p0.threshold()), 0.5);
                    prop_assert_eq!(p1.eval(p1.threshold()), 0.5);
                }
                Err(Error::BoundaryViolation(_)) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }

        #[test]
        fn values_stay_in_unit_interval(
            k in 1.0f64..5.0,
            c in 0.05f64..0.5,
            sigma in 0.0f64..0.3,
            x in -1.0f64..1.0,
        ) {
            let prm = params(k, c, c.max(1.0), sigma);
            let m = make_power(prm, 0.0).unwrap();
            let v = m.eval(x);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
