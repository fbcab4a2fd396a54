//! Budgeted, reproducible noisy label oracle.
//!
//! A query at `w` is perturbed to `X = w + U` with `U ~ Unif[-sigma, sigma]`
//! (the querier never observes `X`), and the returned label is `+1` with
//! probability `m(X)`. Queries must keep the perturbation inside the domain,
//! so only points at least `sigma` away from the endpoints are admissible.
//! Randomness comes from a counter-based generator seeded with `(seed,
//! stream)`, so independent trials use independent streams reproducibly.

use crate::error::{Error, Result};
use crate::function_class::RegressionFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const ADMISSIBLE_SLACK: f64 = 1e-9;

/// Binary label, encoded `+` / `-` in serialized output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Label {
    #[must_use]
    pub fn value(self) -> i8 {
        match self {
            Label::Plus => 1,
            Label::Minus => -1,
        }
    }

    #[must_use]
    pub fn is_plus(self) -> bool {
        self == Label::Plus
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Plus => "+",
            Label::Minus => "-",
        })
    }
}

/// One labelled query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub w: f64,
    pub y: Label,
}

/// Layout of a passive sampling batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// Points at `(2j - 1) / 2n` fractions of the interval, `j = 1..n`.
    EquispacedGrid,
    /// Independent uniform draws over the interval.
    UniformRandom,
}

/// Noisy label oracle with a hard query budget and a full query log.
#[derive(Debug, Clone)]
pub struct NoisyOracle {
    m: RegressionFunction,
    sigma: f64,
    budget: usize,
    used: usize,
    rng: ChaCha8Rng,
    log: Vec<Sample>,
}

impl NoisyOracle {
    /// Builds an oracle around `m` with noise half-width `sigma`.
    ///
    /// `stream` selects an independent randomness stream for a fixed `seed`;
    /// use the trial index so parallel trials are reproducible.
    pub fn new(
        m: &RegressionFunction,
        sigma: f64,
        budget: usize,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 || sigma >= 1.0 {
            return Err(Error::BadParams(format!(
                "oracle noise half-width must lie in [0, 1), got {sigma}"
            )));
        }
        let (lo, hi) = m.domain();
        if hi - lo <= 2.0 * sigma {
            return Err(Error::DegenerateDomain {
                lo: lo + sigma,
                hi: hi - sigma,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(NoisyOracle {
            m: m.clone(),
            sigma,
            budget,
            used: 0,
            rng,
            log: Vec::new(),
        })
    }

    pub fn source(&self) -> &RegressionFunction {
        &self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.used
    }

    /// Interval of admissible query points.
    pub fn admissible(&self) -> (f64, f64) {
        let (lo, hi) = self.m.domain();
        (lo + self.sigma, hi - self.sigma)
    }

    /// All queries made so far, in order.
    pub fn log(&self) -> &[Sample] {
        &self.log
    }

    /// Issues one query. Fails without consuming budget or randomness when
    /// the point is inadmissible or the budget is spent.
    pub fn query(&mut self, w: f64) -> Result<Label> {
        let (lo, hi) = self.admissible();
        if !w.is_finite() || w < lo - ADMISSIBLE_SLACK || w > hi + ADMISSIBLE_SLACK {
            return Err(Error::QueryOutsideDomain { w, lo, hi });
        }
        if self.used >= self.budget {
            return Err(Error::BudgetExhausted {
                budget: self.budget,
                used: self.used,
                requested: 1,
            });
        }
        let x = if self.sigma > 0.0 {
            w + self.sigma * (2.0 * self.rng.gen::<f64>() - 1.0)
        } else {
            w
        };
        let p = self.m.eval(x);
        let y = if self.rng.gen::<f64>() < p {
            Label::Plus
        } else {
            Label::Minus
        };
        self.used += 1;
        self.log.push(Sample { w, y });
        Ok(y)
    }

    /// Draws `n` passive samples over `[lo, hi]`, which must be admissible.
    /// The whole batch is validated against the budget up front.
    pub fn passive_batch(
        &mut self,
        n: usize,
        design: Design,
        interval: (f64, f64),
    ) -> Result<Vec<Sample>> {
        let (lo, hi) = interval;
        let (alo, ahi) = self.admissible();
        if !(lo < hi) {
            return Err(Error::DegenerateDomain { lo, hi });
        }
        if lo < alo - ADMISSIBLE_SLACK || hi > ahi + ADMISSIBLE_SLACK {
            return Err(Error::QueryOutsideDomain {
                w: if lo < alo { lo } else { hi },
                lo: alo,
                hi: ahi,
            });
        }
        if n == 0 {
            return Err(Error::BadParams("passive batch needs n >= 1".into()));
        }
        if n > self.remaining() {
            return Err(Error::BudgetExhausted {
                budget: self.budget,
                used: self.used,
                requested: n,
            });
        }
        let mut out = Vec::with_capacity(n);
        for j in 1..=n {
            let w = match design {
                Design::EquispacedGrid => {
                    lo + (hi - lo) * (2.0 * j as f64 - 1.0) / (2.0 * n as f64)
                }
                Design::UniformRandom => lo + (hi - lo) * self.rng.gen::<f64>(),
            };
            let y = self.query(w)?;
            out.push(Sample { w, y });
        }
        Ok(out)
    }

    /// Query log as CSV with a leading trial column.
    pub fn log_csv(&self, trial_id: u64) -> String {
        let mut out = String::from("trial_id,step,w,y\n");
        for (i, s) in self.log.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", trial_id, i, s.w, s.y));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::{convolve, Method};
    use crate::function_class::{make_lb_pair, make_power, MarginParams};

    fn power(k: f64, c: f64, sigma: f64, t: f64) -> RegressionFunction {
        make_power(MarginParams::new(k, c, c.max(1.0), sigma).unwrap(), t).unwrap()
    }

    #[test]
    fn noiseless_max_margin_labels_are_the_sign_of_the_offset() {
        let m = power(1.0, 0.5, 0.0, 0.3);
        let mut oracle = NoisyOracle::new(&m, 0.0, 100, 7, 0).unwrap();
        for i in 0..50 {
            let w = -0.95 + 1.8 * i as f64 / 49.0;
            let y = oracle.query(w).unwrap();
            if w > 0.3 {
                assert_eq!(y, Label::Plus, "w = {w}");
            } else if w < 0.3 {
                assert_eq!(y, Label::Minus, "w = {w}");
            }
        }
    }

    #[test]
    fn identical_seeds_and_streams_reproduce_labels() {
        let m = power(2.0, 0.25, 0.2, 0.0);
        let ws: Vec<f64> = (0..200).map(|i| -0.7 + 1.4 * i as f64 / 199.0).collect();
        let run = |seed, stream| -> Vec<Label> {
            let mut o = NoisyOracle::new(&m, 0.2, 500, seed, stream).unwrap();
            ws.iter().map(|&w| o.query(w).unwrap()).collect()
        };
        assert_eq!(run(42, 3), run(42, 3));
        assert_ne!(run(42, 3), run(42, 4));
        assert_ne!(run(42, 3), run(43, 3));
    }

    #[test]
    fn budget_violations_leave_no_trace() {
        let m = power(1.0, 0.25, 0.1, 0.0);
        let mut o = NoisyOracle::new(&m, 0.1, 3, 1, 0).unwrap();
        for _ in 0..3 {
            o.query(0.0).unwrap();
        }
        let before = o.log().len();
        assert!(matches!(o.query(0.0), Err(Error::BudgetExhausted { .. })));
        assert!(matches!(
            o.passive_batch(2, Design::EquispacedGrid, (-0.5, 0.5)),
            Err(Error::BudgetExhausted { .. })
        ));
        assert_eq!(o.log().len(), before);
        assert_eq!(o.used(), 3);
    }

    #[test]
    fn queries_too_close_to_the_boundary_are_rejected() {
        let m = power(1.0, 0.25, 0.2, 0.0);
        let mut o = NoisyOracle::new(&m, 0.2, 10, 1, 0).unwrap();
        assert!(matches!(
            o.query(0.85),
            Err(Error::QueryOutsideDomain { .. })
        ));
        assert!(o.query(0.8).is_ok());
        for s in o.log() {
            assert!(s.w.abs() <= 1.0 - 0.2 + 1e-9);
        }
    }

    #[test]
    fn equispaced_batch_is_symmetric_and_evenly_spaced() {
        let sigma = 0.2;
        let m = power(1.0, 0.25, sigma, 0.0);
        let mut o = NoisyOracle::new(&m, sigma, 10, 1, 0).unwrap();
        let dom = o.admissible();
        let n = 4;
        let batch = o.passive_batch(n, Design::EquispacedGrid, dom).unwrap();
        let ws: Vec<f64> = batch.iter().map(|s| s.w).collect();
        let spacing = (dom.1 - dom.0) / n as f64;
        for pair in ws.windows(2) {
            assert!((pair[1] - pair[0] - spacing).abs() < 1e-12);
        }
        for j in 0..n {
            assert!((ws[j] + ws[n - 1 - j]).abs() < 1e-12, "not symmetric");
        }
    }

    #[test]
    fn label_frequency_tracks_the_convolved_curve() {
        let (c, sigma) = (0.25, 0.2);
        let m = power(1.0, c, sigma, 0.0);
        let draws = 100_000;
        for (w, expect) in [(0.0, 0.5), (0.1, 0.625)] {
            let mut o = NoisyOracle::new(&m, sigma, draws, 11, 5).unwrap();
            let mut plus = 0usize;
            for _ in 0..draws {
                if o.query(w).unwrap().is_plus() {
                    plus += 1;
                }
            }
            let freq = plus as f64 / draws as f64;
            assert!(
                (freq - expect).abs() < 0.005,
                "w = {w}: freq {freq} vs {expect}"
            );
        }
    }

    #[test]
    fn uniform_design_frequency_matches_the_average_curve() {
        let (c, sigma) = (0.25, 0.2);
        let m = power(1.0, c, sigma, 0.1);
        let mut o = NoisyOracle::new(&m, sigma, 10_000, 3, 2).unwrap();
        let dom = o.admissible();
        let batch = o
            .passive_batch(10_000, Design::UniformRandom, dom)
            .unwrap();
        let freq = batch.iter().filter(|s| s.y.is_plus()).count() as f64 / batch.len() as f64;
        let f = convolve(&m, sigma, Method::Analytic).unwrap();
        let grid = 2_000;
        let mean: f64 = (0..=grid)
            .map(|i| f.eval(dom.0 + (dom.1 - dom.0) * i as f64 / grid as f64).unwrap())
            .sum::<f64>()
            / (grid + 1) as f64;
        assert!((freq - mean).abs() < 0.02, "freq {freq} vs mean {mean}");
    }

    #[test]
    fn label_distribution_passes_chi_square_against_the_curve() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let (p0, p1) = make_lb_pair(MarginParams::new(1.0, 0.25, 1.0, 0.2).unwrap(), 0.1).unwrap();
        let _ = p1;
        let sigma = 0.2;
        let f = convolve(&p0, sigma, Method::Analytic).unwrap();
        let (lo, hi) = f.admissible();
        let n_w = 20usize;
        let draws = 100_000usize;
        let mut stat = 0.0;
        for i in 0..n_w {
            let w = lo + (hi - lo) * (i as f64 + 0.5) / n_w as f64;
            let mut o = NoisyOracle::new(&p0, sigma, draws, 1234, i as u64).unwrap();
            let mut plus = 0usize;
            for _ in 0..draws {
                if o.query(w).unwrap().is_plus() {
                    plus += 1;
                }
            }
            let expect = f.eval(w).unwrap() * draws as f64;
            let expect_minus = draws as f64 - expect;
            let obs_minus = (draws - plus) as f64;
            stat += (plus as f64 - expect).powi(2) / expect
                + (obs_minus - expect_minus).powi(2) / expect_minus;
        }
        let crit = ChiSquared::new(n_w as f64).unwrap().inverse_cdf(1.0 - 1e-4);
        assert!(stat < crit, "chi-square stat {stat} over critical {crit}");
    }

    #[test]
    fn log_csv_has_one_row_per_query() {
        let m = power(1.0, 0.5, 0.0, 0.0);
        let mut o = NoisyOracle::new(&m, 0.0, 5, 1, 0).unwrap();
        o.query(0.5).unwrap();
        o.query(-0.5).unwrap();
        let csv = o.log_csv(7);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "trial_id,step,w,y");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("7,0,0.5,"));
        assert!(lines[2].ends_with(",-"));
        assert!(lines[1].ends_with(",+"));
    }
}
