//! Threshold estimators: a smoothed wide-bin histogram for passive data and
//! an epoch-halving active wrapper around it.
//!
//! The histogram estimator bins passive samples, averages the per-bin
//! positive fractions over a smoothing window matched to the noise
//! half-width, and returns the center of the first bin (left to right) where
//! the smoothed field crosses 1/2. The active wrapper re-runs it on
//! geometrically shrinking intervals centered at the running estimate, one
//! epoch per halving, which trades the global budget for resolution near the
//! threshold.

use crate::error::{Error, Result};
use crate::oracle::{Design, NoisyOracle, Sample};
use serde::{Deserialize, Serialize};

/// Default failure budget for the bin-width formulas.
pub const DEFAULT_DELTA: f64 = 0.05;

/// Default multiplier on the theoretical bin widths.
///
/// The conservative union-bound width makes bin-center quantization dominate
/// the estimator's risk at simulation scale; shrinking the bins to about a
/// third keeps the quantization error at the scale of the statistical noise
/// of the smoothed field while still leaving misclassification of bins
/// beyond the immediate neighbors of the threshold rare.
pub const DEFAULT_KAPPA: f64 = 0.3;

/// Minimum number of samples the histogram estimator accepts.
pub const MIN_HISTOGRAM_SAMPLES: usize = 8;

/// Tuning knobs for the histogram estimator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WidehistConfig {
    /// Failure budget entering the bin width through `log(2n/delta)`.
    pub delta: f64,
    /// Multiplier on the computed bin width.
    pub kappa: f64,
    /// Fixed bin width instead of the formula value.
    pub bin_width_override: Option<f64>,
    /// Fixed smoothing radius instead of `sigma / 2` (noisy branch) or `0`
    /// (small-noise branch).
    pub smoothing_radius_override: Option<f64>,
}

impl Default for WidehistConfig {
    fn default() -> Self {
        WidehistConfig {
            delta: DEFAULT_DELTA,
            kappa: DEFAULT_KAPPA,
            bin_width_override: None,
            smoothing_radius_override: None,
        }
    }
}

impl WidehistConfig {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::BadParams(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::BadParams(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// Which bin-width branch an estimate used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Noise below the bin resolution: unsmoothed bins.
    Noiseless,
    /// Noise above the bin resolution: smoothing window of radius `sigma/2`.
    Noisy,
    /// Epoch skipped (not enough budget or no admissible interval); the
    /// previous estimate was carried forward.
    Skipped,
}

/// Per-bin diagnostics of one histogram pass.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BinStat {
    pub center: f64,
    pub count: usize,
    /// Fraction of positive labels among the bin's own samples.
    pub raw_mean: f64,
    /// Sample-weighted positive fraction over the smoothing window.
    pub smoothed: f64,
}

/// One epoch of the active estimator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Working interval at the start of the epoch (after boundary clipping).
    pub domain: (f64, f64),
    /// Interval actually queried (working interval intersected with the
    /// admissible-query region).
    pub queried: (f64, f64),
    /// Half-width of the next working interval before boundary clipping.
    pub radius: f64,
    pub budget: usize,
    pub t_estimate: f64,
    pub phase: Phase,
}

/// Full output of an estimation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateTrace {
    pub t_hat: f64,
    /// Index into `bins` of the first bin whose smoothed mean reached 1/2,
    /// or `None` when the field never crossed.
    pub crossing_index: Option<usize>,
    /// Bin-width branch of the (final) histogram pass.
    pub phase: Phase,
    /// Bin diagnostics of the (final) histogram pass.
    pub bins: Vec<BinStat>,
    /// Epoch history (empty for a single passive pass).
    pub epochs: Vec<EpochRecord>,
}

/// Bin width used by the noisy branch:
/// `(kappa / c) * sqrt(R * sigma^(3 - 2k) * log(2n / delta) / (2n))`.
fn noisy_bin_width(r: f64, n: f64, sigma: f64, k: f64, c: f64, cfg: &WidehistConfig) -> f64 {
    cfg.kappa / c * (r * sigma.powf(3.0 - 2.0 * k) * (2.0 * n / cfg.delta).ln() / (2.0 * n)).sqrt()
}

/// Bin width used when the noise is below the achievable resolution:
/// `kappa * (R * log(2n / delta) / (2 c^2 n))^(1 / (2k - 1))`.
fn noiseless_bin_width(r: f64, n: f64, k: f64, c: f64, cfg: &WidehistConfig) -> f64 {
    cfg.kappa * (r * (2.0 * n / cfg.delta).ln() / (2.0 * c * c * n)).powf(1.0 / (2.0 * k - 1.0))
}

/// Smoothed wide-bin histogram estimate of the threshold from passive data.
///
/// `domain` must cover all sample positions. The noise half-width `sigma`,
/// margin exponent `k` and lower margin constant `c` select the bin width;
/// the smoothing window has radius `sigma / 2` unless the noise is below the
/// noiseless resolution scale `(R/n)^(1/(2k-1))`, in which case bins are
/// left unsmoothed.
pub fn widehist(
    samples: &[Sample],
    sigma: f64,
    k: f64,
    c: f64,
    domain: (f64, f64),
    config: &WidehistConfig,
) -> Result<EstimateTrace> {
    config.validate()?;
    let (lo, hi) = domain;
    if !(lo < hi) {
        return Err(Error::DegenerateDomain { lo, hi });
    }
    if !(k >= 1.0) || !(c > 0.0 && c <= 0.5) || !(sigma >= 0.0) {
        return Err(Error::BadParams(format!(
            "widehist needs k >= 1, c in (0, 1/2], sigma >= 0; got k = {k}, c = {c}, sigma = {sigma}"
        )));
    }
    let n = samples.len();
    if n < MIN_HISTOGRAM_SAMPLES {
        return Err(Error::TooFewSamples {
            got: n,
            need: MIN_HISTOGRAM_SAMPLES,
        });
    }
    let r = hi - lo;
    let nf = n as f64;
    let phase = if sigma < (r / nf).powf(1.0 / (2.0 * k - 1.0)) {
        Phase::Noiseless
    } else {
        Phase::Noisy
    };
    let h = config.bin_width_override.unwrap_or(match phase {
        Phase::Noisy => noisy_bin_width(r, nf, sigma, k, c, config),
        _ => noiseless_bin_width(r, nf, k, c, config),
    });
    // keep more than one sample per bin on average, and at least 4 bins
    let h = h.clamp(2.0 * r / nf, r / 4.0);
    let m_bins = (r / h).round().max(4.0) as usize;
    let h_eff = r / m_bins as f64;

    let mut counts = vec![0usize; m_bins];
    let mut plus = vec![0usize; m_bins];
    for s in samples {
        if s.w < lo - 1e-9 || s.w > hi + 1e-9 {
            return Err(Error::QueryOutsideDomain { w: s.w, lo, hi });
        }
        let idx = (((s.w - lo) / h_eff) as usize).min(m_bins - 1);
        counts[idx] += 1;
        if s.y.is_plus() {
            plus[idx] += 1;
        }
    }

    let radius = match phase {
        Phase::Noisy => config.smoothing_radius_override.unwrap_or(sigma / 2.0),
        _ => config.smoothing_radius_override.unwrap_or(0.0),
    };
    let window = (radius / h_eff + 1e-12).floor() as usize;

    let mut bins = Vec::with_capacity(m_bins);
    for i in 0..m_bins {
        let jlo = i.saturating_sub(window);
        let jhi = (i + window).min(m_bins - 1);
        let (mut cnt, mut pos) = (0usize, 0usize);
        for j in jlo..=jhi {
            cnt += counts[j];
            pos += plus[j];
        }
        bins.push(BinStat {
            center: lo + (i as f64 + 0.5) * h_eff,
            count: counts[i],
            raw_mean: if counts[i] > 0 {
                plus[i] as f64 / counts[i] as f64
            } else {
                f64::NAN
            },
            smoothed: if cnt > 0 {
                pos as f64 / cnt as f64
            } else {
                f64::NAN
            },
        });
    }

    let mut crossing = None;
    let mut prev: Option<f64> = None;
    let mut first_valid: Option<f64> = None;
    let mut any_below = false;
    for (i, b) in bins.iter().enumerate() {
        if b.smoothed.is_nan() {
            continue;
        }
        if first_valid.is_none() {
            first_valid = Some(b.smoothed);
        }
        if b.smoothed < 0.5 {
            any_below = true;
        }
        if let Some(p) = prev {
            if p < 0.5 && b.smoothed >= 0.5 {
                crossing = Some(i);
                break;
            }
        }
        prev = Some(b.smoothed);
    }
    let t_hat = match crossing {
        Some(i) => bins[i].center,
        // never crossed: side with the majority decides the endpoint
        None => match first_valid {
            Some(v) if v >= 0.5 && !any_below => lo,
            _ => hi,
        },
    };

    Ok(EstimateTrace {
        t_hat,
        crossing_index: crossing,
        phase,
        bins,
        epochs: Vec::new(),
    })
}

/// Number of epochs the active estimator runs for noise half-width `sigma`:
/// `ceil(log2(1 / sigma))`, at least 1.
pub fn epoch_count(sigma: f64) -> Result<usize> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::BadParams(format!(
            "epoch schedule requires sigma in (0, 1), got {sigma}"
        )));
    }
    Ok(((1.0 / sigma).log2().ceil() as usize).max(1))
}

/// Active threshold estimation by epoch halving.
///
/// Splits the budget `n` evenly over `ceil(log2(1/sigma))` epochs (remainder
/// to the last), queries an equispaced grid on the current working interval,
/// re-estimates with [`widehist`], and halves the interval around the new
/// estimate. Epochs whose interval leaves the admissible region or whose
/// budget is below the histogram minimum carry the previous estimate
/// forward and are tagged [`Phase::Skipped`].
pub fn actpass(
    oracle: &mut NoisyOracle,
    n: usize,
    k: f64,
    c: f64,
    config: &WidehistConfig,
) -> Result<EstimateTrace> {
    let sigma = oracle.sigma();
    let epochs = epoch_count(sigma)?;
    if n < epochs {
        return Err(Error::BadParams(format!(
            "budget n = {n} below the epoch count {epochs}"
        )));
    }
    if n > oracle.remaining() {
        return Err(Error::BudgetExhausted {
            budget: oracle.budget(),
            used: oracle.used(),
            requested: n,
        });
    }
    let (dlo, dhi) = oracle.source().domain();
    let half_width = 0.5 * (dhi - dlo);
    let base = n / epochs;
    let mut t_cur = 0.5 * (dlo + dhi);
    let mut d = (dlo, dhi);
    let mut records = Vec::with_capacity(epochs);
    let mut last_pass: Option<EstimateTrace> = None;
    for e in 1..=epochs {
        let budget = if e == epochs { n - base * (epochs - 1) } else { base };
        let (alo, ahi) = oracle.admissible();
        let q = (d.0.max(alo), d.1.min(ahi));
        let mut phase = Phase::Skipped;
        let mut used = 0usize;
        if q.1 - q.0 > 1e-12 && budget >= MIN_HISTOGRAM_SAMPLES {
            let samples = oracle.passive_batch(budget, Design::EquispacedGrid, q)?;
            let trace = widehist(&samples, sigma, k, c, q, config)?;
            t_cur = trace.t_hat;
            phase = trace.phase;
            used = budget;
            last_pass = Some(trace);
        }
        let radius = half_width * 0.5f64.powi(e as i32);
        records.push(EpochRecord {
            epoch: e,
            domain: d,
            queried: q,
            radius,
            budget: used,
            t_estimate: t_cur,
            phase,
        });
        d = ((t_cur - radius).max(dlo), (t_cur + radius).min(dhi));
    }
    let (crossing, bins, phase) = match last_pass {
        Some(tr) => (tr.crossing_index, tr.bins, tr.phase),
        None => (None, Vec::new(), Phase::Skipped),
    };
    Ok(EstimateTrace {
        t_hat: t_cur,
        crossing_index: crossing,
        phase,
        bins,
        epochs: records,
    })
}

/// Noise-free active fallback: bisection with repeated-query majority votes.
///
/// Each probe point is queried `r` times with `r = O(log(n/delta) / c^2)`
/// (a single query when `c = 1/2`, where labels are deterministic), and the
/// majority decides the half to keep. Intended for `sigma = 0` or noise far
/// below any resolvable scale.
pub fn noiseless_bisection(
    oracle: &mut NoisyOracle,
    n: usize,
    c: f64,
    delta: f64,
) -> Result<EstimateTrace> {
    if !(c > 0.0 && c <= 0.5) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadParams(format!(
            "bisection needs c in (0, 1/2] and delta in (0, 1); got c = {c}, delta = {delta}"
        )));
    }
    let mut reps = if c >= 0.5 - 1e-12 {
        1
    } else {
        ((2.0 * n as f64 / delta).ln() / (2.0 * c * c)).ceil() as usize
    };
    if reps % 2 == 0 {
        reps += 1;
    }
    let levels = n / reps;
    if levels == 0 {
        return Err(Error::BadParams(format!(
            "budget n = {n} below one majority round of {reps} queries"
        )));
    }
    let (mut lo, mut hi) = oracle.admissible();
    let mut records = Vec::with_capacity(levels);
    for e in 1..=levels {
        let mid = 0.5 * (lo + hi);
        let mut plus = 0usize;
        for _ in 0..reps {
            if oracle.query(mid)?.is_plus() {
                plus += 1;
            }
        }
        let domain = (lo, hi);
        if 2 * plus > reps {
            hi = mid;
        } else {
            lo = mid;
        }
        records.push(EpochRecord {
            epoch: e,
            domain,
            queried: (mid, mid),
            radius: 0.5 * (hi - lo),
            budget: reps,
            t_estimate: 0.5 * (lo + hi),
            phase: Phase::Noiseless,
        });
    }
    Ok(EstimateTrace {
        t_hat: 0.5 * (lo + hi),
        crossing_index: None,
        phase: Phase::Noiseless,
        bins: Vec::new(),
        epochs: records,
    })
}

/// Fraction of traces whose epoch-`e` working interval contains `t`,
/// indexed by epoch (0-based vector for epochs `1..=E`).
#[must_use]
pub fn containment_frequency(traces: &[EstimateTrace], t: f64) -> Vec<f64> {
    let max_e = traces.iter().map(|tr| tr.epochs.len()).max().unwrap_or(0);
    let mut freq = Vec::with_capacity(max_e);
    for e in 0..max_e {
        let (mut hit, mut tot) = (0usize, 0usize);
        for tr in traces {
            if let Some(rec) = tr.epochs.get(e) {
                tot += 1;
                if rec.domain.0 <= t && t <= rec.domain.1 {
                    hit += 1;
                }
            }
        }
        freq.push(if tot > 0 { hit as f64 / tot as f64 } else { 0.0 });
    }
    freq
}
