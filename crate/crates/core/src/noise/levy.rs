//! Finite-activity truncation of the tempered stable-like measure
//! `nu(dxi) = |xi|^{-1-alpha} e^{-|xi|} dxi`.
//!
//! Jumps with `|xi| <= eps` are dropped; their quadratic variation is
//! reported as a residual rather than corrected for.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::noise::marks::{JumpMultiplier, MagnitudeLaw, MarkModel};
use crate::quadrature;
use crate::spectral::SpectralState;

const TABLE_NODES: usize = 2048;
const TABLE_MAX: f64 = 60.0;

const GL5_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_W: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Magnitude law of the truncated measure, normalised to a probability.
#[derive(Debug)]
pub struct TruncatedStable {
    alpha: f64,
    eps: f64,
    /// `nu(|xi| > eps)`, both signs.
    intensity: f64,
    /// `int_{|xi| <= eps} xi^2 nu(dxi)`.
    residual: f64,
    // CDF table for |xi| on [eps, TABLE_MAX], one-sided mass
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl TruncatedStable {
    pub fn new(alpha: f64, eps: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidModel(format!("alpha={alpha} outside (0, 2)")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidModel(format!("eps={eps} outside (0, 1)")));
        }
        // substitute x = eps e^s so the integrand is smooth near eps
        let one_sided = quadrature::integrate_to_infinity(
            |s| {
                let x = eps * s.exp();
                x.powf(-alpha) * (-x).exp()
            },
            0.0,
            1e-11,
            0.0,
        );
        // x = t^2 removes the x^{1-alpha} endpoint behaviour at zero
        let small = quadrature::integrate(
            |t| {
                let x = t * t;
                if x == 0.0 {
                    0.0
                } else {
                    2.0 * t * x.powf(1.0 - alpha) * (-x).exp()
                }
            },
            0.0,
            eps.sqrt(),
            1e-11,
            0.0,
        );

        let step = (TABLE_MAX / eps).ln() / (TABLE_NODES - 1) as f64;
        let nodes: Vec<f64> = (0..TABLE_NODES).map(|i| eps * (step * i as f64).exp()).collect();
        let mut cumulative = Vec::with_capacity(TABLE_NODES);
        cumulative.push(0.0);
        for w in nodes.windows(2) {
            let piece = gl5(alpha, w[0], w[1]);
            cumulative.push(cumulative.last().unwrap() + piece);
        }
        Ok(Self {
            alpha,
            eps,
            intensity: 2.0 * one_sided,
            residual: 2.0 * small,
            nodes,
            cumulative,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Inverse-CDF draw of `xi`: `|xi|` from the table, symmetric sign.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        sign * self.quantile(u)
    }

    /// Quantile of `|xi|` at level `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let total = *self.cumulative.last().unwrap();
        let target = u * total;
        let i = self
            .cumulative
            .partition_point(|&c| c <= target)
            .clamp(1, self.nodes.len() - 1)
            - 1;
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let want = target - self.cumulative[i];
        let piece = self.cumulative[i + 1] - self.cumulative[i];
        // start from log-linear interpolation, then Newton on the exact piece
        let mut x = a * (b / a).powf((want / piece).clamp(0.0, 1.0));
        for _ in 0..3 {
            let g = gl5(self.alpha, a, x) - want;
            x = (x - g / density(self.alpha, x)).clamp(a, b);
        }
        x
    }

    /// `E[h(xi)]` under the normalised truncated law.
    pub fn expect<H: Fn(f64) -> f64>(&self, h: H) -> f64 {
        let alpha = self.alpha;
        let eps = self.eps;
        let one_sided = quadrature::integrate_to_infinity(
            |s| {
                let x = eps * s.exp();
                x * density(alpha, x) * 0.5 * (h(x) + h(-x))
            },
            0.0,
            1e-11,
            0.0,
        );
        2.0 * one_sided / self.intensity
    }
}

#[inline]
fn density(alpha: f64, x: f64) -> f64 {
    x.powf(-1.0 - alpha) * (-x).exp()
}

fn gl5(alpha: f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    GL5_X
        .iter()
        .zip(GL5_W)
        .map(|(x, w)| w * density(alpha, c + h * x))
        .sum::<f64>()
        * h
}

/// Finite-activity model for `|xi| > eps` with additive marks `xi * profile`,
/// plus the dropped small-jump quadratic variation.
pub fn truncate_levy(alpha: f64, eps: f64, profile: SpectralState) -> Result<(MarkModel, f64)> {
    let law = TruncatedStable::new(alpha, eps)?;
    let residual = law.residual();
    let model = MarkModel::new(
        law.intensity(),
        MagnitudeLaw::Truncated(Arc::new(law)),
        profile,
        JumpMultiplier::Zero,
        1.0,
    )?;
    Ok((model, residual))
}
