use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::spectral::SpectralState;

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpEstimate {
    pub error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Half the width of the 95% percentile interval.
    pub half_width: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub order: f64,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// `||a - b||_H` without allocating; the shorter vector is zero padded.
pub fn distance(a: &SpectralState, b: &SpectralState) -> f64 {
    let (a, b) = (a.coeffs(), b.coeffs());
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut s = 0.0;
    for (i, x) in long.iter().enumerate() {
        let d = x - short.get(i).copied().unwrap_or(0.0);
        s += d * d;
    }
    s.sqrt()
}

/// `(mean d^p)^{1/p}`, scaled by `max d` so that it is a power mean of
/// numbers in `[0, 1]` (no overflow, exact for constant samples).
fn power_mean(scaled_powers: impl Iterator<Item = f64>, count: usize, p: f64, dmax: f64) -> f64 {
    let mean = scaled_powers.sum::<f64>() / count as f64;
    dmax * mean.powf(1.0 / p)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// L^p estimates for every `p` from one set of distances, with bootstrap
/// intervals that reuse the same resampled index sets across `p`.
pub fn lp_estimates<R: Rng + ?Sized>(distances: &[f64], p_list: &[f64], rng: &mut R, resamples: usize) -> Vec<LpEstimate> {
    let m = distances.len();
    let dmax = distances.iter().copied().fold(0.0, f64::max);
    if m == 0 || dmax == 0.0 {
        let zero = LpEstimate {
            error: 0.0,
            ci_lo: 0.0,
            ci_hi: 0.0,
            half_width: 0.0,
        };
        return vec![zero; p_list.len()];
    }
    let powers: Vec<Vec<f64>> = p_list
        .iter()
        .map(|&p| distances.iter().map(|d| (d / dmax).powf(p)).collect())
        .collect();
    let mut boot: Vec<Vec<f64>> = vec![Vec::with_capacity(resamples); p_list.len()];
    let mut sums = vec![0.0; p_list.len()];
    for _ in 0..resamples {
        sums.fill(0.0);
        for _ in 0..m {
            let i = rng.random_range(0..m);
            for (s, w) in sums.iter_mut().zip(&powers) {
                *s += w[i];
            }
        }
        for ((b, s), &p) in boot.iter_mut().zip(&sums).zip(p_list) {
            b.push(dmax * (s / m as f64).powf(1.0 / p));
        }
    }
    p_list
        .iter()
        .zip(&powers)
        .zip(boot.iter_mut())
        .map(|((&p, w), b)| {
            b.sort_by(f64::total_cmp);
            let (ci_lo, ci_hi) = if b.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (percentile(b, 0.025), percentile(b, 0.975))
            };
            LpEstimate {
                error: power_mean(w.iter().copied(), m, p, dmax),
                ci_lo,
                ci_hi,
                half_width: 0.5 * (ci_hi - ci_lo),
            }
        })
        .collect()
}

/// `(E ||ref - coarse||^p)^{1/p}` over paired samples with a 1000-resample
/// bootstrap interval.
pub fn estimate_lp_error(reference: &[SpectralState], coarse: &[SpectralState], p: f64) -> Result<LpEstimate> {
    if reference.len() != coarse.len() {
        return Err(Error::InvalidArgument(format!(
            "{} reference vs {} coarse samples",
            reference.len(),
            coarse.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p = {p} must be >= 2")));
    }
    let d: Vec<f64> = reference.iter().zip(coarse).map(|(a, b)| distance(a, b)).collect();
    let mut rng = stream(0, 0, Purpose::Bootstrap);
    Ok(lp_estimates(&d, &[p], &mut rng, BOOTSTRAP_RESAMPLES)[0])
}

/// Least squares of `log error` on `log level`; `order` is the slope.
pub fn fit_order(levels: &[f64], errors: &[f64]) -> Result<OrderFit> {
    if levels.len() != errors.len() {
        return Err(Error::Fit(format!("{} levels vs {} errors", levels.len(), errors.len())));
    }
    if levels.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 levels, got {}", levels.len())));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Fit(format!("errors must be positive and finite, got {e}")));
    }
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Fit(format!("levels must be positive and finite, got {l}")));
    }
    let x: Vec<f64> = levels.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all levels are equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(OrderFit {
        order: slope,
        slope,
        intercept,
        stderr,
    })
}
