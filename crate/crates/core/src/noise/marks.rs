//! Finite-activity mark models with rank-one marks `z = xi * phi`.
//!
//! The jump coefficient is `G(x, z) = g1(z) x + g(z)` with `g(z) = g_scale * z`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::noise::levy::TruncatedStable;
use crate::quadrature;
use crate::spectral::{hnorm, project, SpectralState};

/// Law of the scalar jump magnitude `xi`.
#[derive(Clone, Debug)]
pub enum MagnitudeLaw {
    /// `xi = v_plus` with probability `p_plus`, otherwise `v_minus`.
    TwoPoint { p_plus: f64, v_plus: f64, v_minus: f64 },
    /// `xi = offset + Exp(rate)`.
    ExpShifted { rate: f64, offset: f64 },
    /// Normalised `|xi|^{-1-alpha} e^{-|xi|}` restricted to `|xi| > eps`.
    Truncated(Arc<TruncatedStable>),
}

impl MagnitudeLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            MagnitudeLaw::TwoPoint {
                p_plus,
                v_plus,
                v_minus,
            } => {
                if !(0.0..=1.0).contains(&p_plus) {
                    return Err(Error::InvalidModel(format!("p_plus={p_plus} outside [0, 1]")));
                }
                if v_plus == 0.0 || v_minus == 0.0 || !v_plus.is_finite() || !v_minus.is_finite() {
                    return Err(Error::InvalidModel(
                        "two-point magnitudes must be finite and nonzero".into(),
                    ));
                }
            }
            MagnitudeLaw::ExpShifted { rate, offset } => {
                if !(rate > 0.0 && rate.is_finite()) || !(offset >= 0.0 && offset.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "exp_shifted needs rate > 0 and offset >= 0, got rate={rate} offset={offset}"
                    )));
                }
            }
            MagnitudeLaw::Truncated(_) => {}
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MagnitudeLaw::TwoPoint {
                p_plus,
                v_plus,
                v_minus,
            } => {
                if rng.random::<f64>() < *p_plus {
                    *v_plus
                } else {
                    *v_minus
                }
            }
            MagnitudeLaw::ExpShifted { rate, offset } => {
                offset + Exp::new(*rate).expect("validated rate").sample(rng)
            }
            MagnitudeLaw::Truncated(t) => t.sample(rng),
        }
    }

    /// `E[h(xi)]`; closed form for the two-point law, quadrature otherwise.
    pub fn expect<H: Fn(f64) -> f64>(&self, h: H) -> f64 {
        match self {
            MagnitudeLaw::TwoPoint {
                p_plus,
                v_plus,
                v_minus,
            } => p_plus * h(*v_plus) + (1.0 - p_plus) * h(*v_minus),
            MagnitudeLaw::ExpShifted { rate, offset } => quadrature::integrate_to_infinity(
                |x| h(offset + x) * rate * (-rate * x).exp(),
                0.0,
                1e-12,
                1e-15,
            ),
            MagnitudeLaw::Truncated(t) => t.expect(h),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            MagnitudeLaw::TwoPoint {
                p_plus,
                v_plus,
                v_minus,
            } => p_plus * v_plus + (1.0 - p_plus) * v_minus,
            MagnitudeLaw::ExpShifted { rate, offset } => offset + 1.0 / rate,
            MagnitudeLaw::Truncated(_) => 0.0,
        }
    }

    /// `E|xi|^q`.
    pub fn moment_abs(&self, q: f64) -> f64 {
        self.expect(|x| x.abs().powf(q))
    }
}

/// The scalar jump multiplier `g1(z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JumpMultiplier {
    Zero,
    Constant(f64),
    /// `c1 * min(1, ||z||)`
    Clipped(f64),
}

impl JumpMultiplier {
    #[inline]
    pub fn eval(&self, mark_norm: f64) -> f64 {
        match *self {
            JumpMultiplier::Zero => 0.0,
            JumpMultiplier::Constant(c) => c,
            JumpMultiplier::Clipped(c) => c * mark_norm.min(1.0),
        }
    }

    /// Bound `b` on `|g1|`.
    pub fn bound(&self) -> f64 {
        match *self {
            JumpMultiplier::Zero => 0.0,
            JumpMultiplier::Constant(c) | JumpMultiplier::Clipped(c) => c.abs(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, JumpMultiplier::Zero)
    }
}

/// `phi_k = c k^{-r}` for `k = 1..=n`.
pub fn power_profile(c: f64, r: f64, n: usize) -> Result<SpectralState> {
    if r < 2.0 {
        return Err(Error::InvalidModel(format!(
            "profile decay r={r} must be at least 2"
        )));
    }
    if c == 0.0 || !c.is_finite() || n == 0 {
        return Err(Error::InvalidModel("profile needs finite c != 0 and n >= 1".into()));
    }
    SpectralState::new((1..=n).map(|k| c * (k as f64).powf(-r)).collect())
}

#[derive(Clone, Debug)]
pub struct MarkModel {
    intensity: f64,
    law: MagnitudeLaw,
    profile: SpectralState,
    profile_norm: f64,
    g1: JumpMultiplier,
    g_scale: f64,
}

impl MarkModel {
    pub fn new(
        intensity: f64,
        law: MagnitudeLaw,
        profile: SpectralState,
        g1: JumpMultiplier,
        g_scale: f64,
    ) -> Result<Self> {
        if !(intensity >= 0.0) {
            return Err(Error::InvalidModel(format!("intensity {intensity} must be >= 0")));
        }
        if !g_scale.is_finite() {
            return Err(Error::InvalidModel("g_scale must be finite".into()));
        }
        if let JumpMultiplier::Constant(c) | JumpMultiplier::Clipped(c) = g1 {
            if !c.is_finite() {
                return Err(Error::InvalidModel("g1 coefficient must be finite".into()));
            }
        }
        law.validate()?;
        let profile_norm = hnorm(&profile, 0.0);
        if profile_norm == 0.0 {
            return Err(Error::InvalidModel("mark profile must be nonzero".into()));
        }
        Ok(Self {
            intensity,
            law,
            profile,
            profile_norm,
            g1,
            g_scale,
        })
    }

    /// No jumps at all.
    pub fn none(n: usize) -> Self {
        Self::new(
            0.0,
            MagnitudeLaw::TwoPoint {
                p_plus: 0.5,
                v_plus: 1.0,
                v_minus: -1.0,
            },
            SpectralState::basis(n, 1),
            JumpMultiplier::Zero,
            0.0,
        )
        .expect("static model is valid")
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn law(&self) -> &MagnitudeLaw {
        &self.law
    }

    pub fn profile(&self) -> &SpectralState {
        &self.profile
    }

    pub fn g1(&self) -> JumpMultiplier {
        self.g1
    }

    pub fn g_scale(&self) -> f64 {
        self.g_scale
    }

    pub fn mean_xi(&self) -> f64 {
        self.law.mean()
    }

    /// `E|xi|^q`, used for the moment conditions on `g` and `g1`.
    pub fn mean_abs(&self, q: f64) -> f64 {
        self.law.moment_abs(q)
    }

    /// The mark `z = xi * phi` in the full profile dimension.
    pub fn mark(&self, xi: f64) -> SpectralState {
        self.profile.scaled(xi)
    }

    /// `||z||` for the mark with magnitude `xi`.
    #[inline]
    pub fn mark_norm(&self, xi: f64) -> f64 {
        xi.abs() * self.profile_norm
    }

    #[inline]
    pub fn g1_at(&self, xi: f64) -> f64 {
        self.g1.eval(self.mark_norm(xi))
    }

    /// `int g1 dnu = intensity * E[g1(xi phi)]`.
    pub fn mean_g1(&self) -> f64 {
        let e = match self.g1 {
            JumpMultiplier::Zero => 0.0,
            JumpMultiplier::Constant(c) => c,
            JumpMultiplier::Clipped(_) => self.law.expect(|x| self.g1_at(x)),
        };
        self.intensity * e
    }

    /// `int g dnu` projected onto `H_n`.
    pub fn mean_g(&self, n: usize) -> SpectralState {
        project(&self.profile, n).scaled(self.intensity * self.g_scale * self.mean_xi())
    }

    /// `int ||(-A)^{s/2} g(z)||^q dnu`, the moment condition on `g` in `H^s`.
    pub fn g_moment(&self, s: f64, q: f64) -> f64 {
        let base = (self.g_scale.abs() * hnorm(&self.profile, s)).powf(q);
        self.intensity * base * self.mean_abs(q)
    }
}

/// Compensator coefficients `(int g1 dnu, P_N int g dnu)`.
pub fn compensator_coeffs(model: &MarkModel, n: usize) -> Result<(f64, SpectralState)> {
    if n == 0 {
        return Err(Error::InvalidArgument("mode count must be positive".into()));
    }
    let mean_g1 = model.mean_g1();
    if !mean_g1.is_finite() {
        return Err(Error::InvalidModel("g1 compensator is not finite".into()));
    }
    Ok((mean_g1, model.mean_g(n)))
}
