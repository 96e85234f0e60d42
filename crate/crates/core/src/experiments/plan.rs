use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::levy::TruncatedStable;
use crate::noise::marks::{power_profile, JumpMultiplier, MagnitudeLaw, MarkModel};
use crate::schemes::{step_count, SchemeConfig, SchemeKind};
use crate::spectral::{Nonlinearity, SpectralState};

/// Below this many samples the bootstrap bands dominate the trend.
pub const MIN_RECOMMENDED_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Temporal,
    Spatial,
    Holder,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub n_ref: usize,
    pub dt_ref: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    TwoPoint { p_plus: f64, v_plus: f64, v_minus: f64 },
    ExpShifted { rate: f64, offset: f64 },
    /// `|xi|^{-1-alpha} e^{-|xi|}` truncated to `|xi| > eps`; the intensity follows.
    TruncatedStable { alpha: f64, eps: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MultiplierSpec {
    Zero,
    Constant(f64),
    Clipped(f64),
}

impl From<MultiplierSpec> for JumpMultiplier {
    fn from(m: MultiplierSpec) -> Self {
        match m {
            MultiplierSpec::Zero => JumpMultiplier::Zero,
            MultiplierSpec::Constant(c) => JumpMultiplier::Constant(c),
            MultiplierSpec::Clipped(c) => JumpMultiplier::Clipped(c),
        }
    }
}

/// `phi_k = c k^{-r}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub c: f64,
    pub r: f64,
}

fn default_multiplier() -> MultiplierSpec {
    MultiplierSpec::Zero
}

fn one() -> f64 {
    1.0
}

fn first_mode() -> Vec<f64> {
    vec![1.0]
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    /// Required for finite laws, must be absent for `truncated_stable`.
    #[serde(default)]
    pub intensity: Option<f64>,
    pub law: LawSpec,
    pub profile: ProfileSpec,
    #[serde(default = "default_multiplier")]
    pub g1: MultiplierSpec,
    #[serde(default = "one")]
    pub g_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyPlan {
    pub name: String,
    pub axis: Axis,
    pub scheme: SchemeKind,
    /// Step sizes (temporal), mode counts (spatial) or lags `h` (holder).
    pub levels: Vec<f64>,
    pub reference: Reference,
    pub p_list: Vec<f64>,
    pub samples: usize,
    #[serde(default = "one")]
    pub horizon: f64,
    pub f: Nonlinearity,
    /// Initial coefficients; `e_1` when omitted.
    #[serde(default = "first_mode")]
    pub x0: Vec<f64>,
    #[serde(default)]
    pub jumps: Option<JumpSpec>,
    #[serde(default = "yes")]
    pub wiener: bool,
    pub seed: u64,
}

fn is_power_of_two_ratio(level: f64, base: f64) -> bool {
    let ratio = level / base;
    let r = ratio.round();
    r >= 1.0 && r == ratio && r < 2f64.powi(53) && (r as u64).is_power_of_two()
}

impl StudyPlan {
    /// Checks every invariant; messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return bad("name", format!("{:?} is not usable as a file stem", self.name));
        }
        if self.samples == 0 {
            return bad("samples", "must be positive".into());
        }
        if self.samples < MIN_RECOMMENDED_SAMPLES {
            log::warn!(
                "study {}: {} samples is below {MIN_RECOMMENDED_SAMPLES}, error bars will dominate",
                self.name,
                self.samples
            );
        }
        if self.p_list.is_empty() {
            return bad("p_list", "must not be empty".into());
        }
        for (i, p) in self.p_list.iter().enumerate() {
            if !(*p >= 2.0 && p.is_finite()) {
                return bad(&format!("p_list[{i}]"), format!("{p} must be a finite real >= 2"));
            }
        }
        if self.levels.is_empty() {
            return bad("levels", "must not be empty".into());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon", format!("{} must be positive", self.horizon));
        }
        let Reference { n_ref, dt_ref } = self.reference;
        if n_ref == 0 {
            return bad("reference.n_ref", "must be positive".into());
        }
        if step_count(self.horizon, dt_ref).is_err() {
            return bad("reference.dt_ref", format!("{dt_ref} does not divide the horizon {}", self.horizon));
        }
        for (i, &level) in self.levels.iter().enumerate() {
            let field = format!("levels[{i}]");
            match self.axis {
                Axis::Temporal => {
                    if !is_power_of_two_ratio(level, dt_ref) {
                        return bad(&field, format!("{level} is not dyadic w.r.t. dt_ref = {dt_ref}"));
                    }
                    if step_count(self.horizon, level).is_err() {
                        return bad(&field, format!("{level} does not divide the horizon {}", self.horizon));
                    }
                }
                Axis::Spatial => {
                    if level.fract() != 0.0 || level < 1.0 || level > n_ref as f64 {
                        return bad(&field, format!("{level} must be an integer in 1..={n_ref}"));
                    }
                }
                Axis::Holder => {
                    if !(level > 0.0) || 0.5 * self.horizon + level > self.horizon {
                        return bad(&field, format!("lag {level} must lie in (0, horizon / 2]"));
                    }
                }
            }
        }
        self.initial_state().map_err(|e| Error::Config(format!("x0: {e}")))?;
        if let Nonlinearity::Linear { c } | Nonlinearity::Sine { a: c } = self.f {
            if !c.is_finite() {
                return bad("f", "coefficient must be finite".into());
            }
        }
        self.mark_model().map_err(|e| Error::Config(format!("jumps: {e}")))?;
        if self.axis == Axis::Holder {
            match &self.jumps {
                Some(j) if j.g1 == MultiplierSpec::Zero => {}
                Some(_) => return bad("jumps.g1", "the holder study needs an additive model".into()),
                None => {}
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<SpectralState> {
        if self.x0.is_empty() {
            return Err(Error::InvalidState("x0 needs at least one coefficient".into()));
        }
        SpectralState::new(self.x0.clone())
    }

    /// The mark model on `n_ref` modes and, for truncated laws, the dropped
    /// small-jump variance `int_{|xi| <= eps} xi^2 nu(dxi)`.
    pub fn mark_model(&self) -> Result<(MarkModel, Option<f64>)> {
        let n = self.reference.n_ref;
        let Some(spec) = self.jumps else {
            return Ok((MarkModel::none(n.max(1)), None));
        };
        let profile = power_profile(spec.profile.c, spec.profile.r, n)?;
        let (intensity, law, residual) = match spec.law {
            LawSpec::TwoPoint {
                p_plus,
                v_plus,
                v_minus,
            } => (
                spec.intensity,
                MagnitudeLaw::TwoPoint {
                    p_plus,
                    v_plus,
                    v_minus,
                },
                None,
            ),
            LawSpec::ExpShifted { rate, offset } => (spec.intensity, MagnitudeLaw::ExpShifted { rate, offset }, None),
            LawSpec::TruncatedStable { alpha, eps } => {
                if spec.intensity.is_some() {
                    return Err(Error::InvalidModel(
                        "intensity is fixed by alpha and eps for truncated_stable".into(),
                    ));
                }
                let t = TruncatedStable::new(alpha, eps)?;
                let (intensity, residual) = (t.intensity(), t.residual());
                (Some(intensity), MagnitudeLaw::Truncated(Arc::new(t)), Some(residual))
            }
        };
        let intensity = intensity.ok_or_else(|| Error::InvalidModel("intensity is required".into()))?;
        if !intensity.is_finite() {
            return Err(Error::InvalidModel("intensity must be finite".into()));
        }
        let model = MarkModel::new(intensity, law, profile, spec.g1.into(), spec.g_scale)?;
        Ok((model, residual))
    }

    pub fn scheme_config(&self, marks: &MarkModel, n_modes: usize, dt: f64) -> Result<SchemeConfig> {
        Ok(SchemeConfig {
            scheme: self.scheme,
            n_modes,
            dt_nominal: dt,
            horizon: self.horizon,
            f: self.f,
            marks: marks.clone(),
            x0: self.initial_state()?,
        })
    }
}
