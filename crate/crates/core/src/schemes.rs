//! Exponential Euler one-step map and the two fully discrete schemes.
//!
//! The one-step map advances `X` over `[t_i, t_i + dt]` as
//!
//! ```text
//! E(dt) X + int E(t_{i+1} - s) F_N(X) ds + W-increment + E(dt) J
//! ```
//!
//! where `J` is the jump term with the propagator frozen at `E(dt)`:
//! the compensator `-dt (int g1 dnu X + P_N int g dnu)` plus, for the
//! uniform scheme, the sum of `G_N(X, z_j)` over jumps inside the step.
//! The jump-adapted scheme instead puts every jump on a node and applies
//! `X <- X + G_N(X, z)` right after the step that ends there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::marks::{compensator_coeffs, MarkModel};
use crate::noise::path::{merge_with_jumps, restrict_path, CoupledNoisePath, JumpSkeleton, MicroGrid, NodeKind, StepNoise};
use crate::spectral::{eigenvalue, hnorm, phi1_factor, project, NemytskiiEvaluator, Nonlinearity, SpectralState};

/// Time nodes `0 = t_0 < .. < t_n = T` with per-node jump flags.
#[derive(Clone, Debug, PartialEq)]
pub struct TimePartition {
    nodes: Vec<f64>,
    kinds: Vec<NodeKind>,
    dt_nominal: f64,
}

impl TimePartition {
    pub fn uniform(steps: usize, dt: f64) -> Result<Self> {
        Self::adapted(steps, dt, &JumpSkeleton::empty(steps as f64 * dt))
    }

    fn adapted(steps: usize, dt: f64, jumps: &JumpSkeleton) -> Result<Self> {
        if steps == 0 || !(dt > 0.0) {
            return Err(Error::InvalidGrid(format!("bad partition: {steps} steps of {dt}")));
        }
        let (nodes, kinds) = merge_with_jumps(steps, dt, jumps)?;
        Ok(Self {
            nodes,
            kinds,
            dt_nominal: dt,
        })
    }

    /// The partition consisting of every micro-grid node.
    pub fn from_grid(grid: &MicroGrid) -> Self {
        Self {
            nodes: grid.nodes().to_vec(),
            kinds: grid.kinds().to_vec(),
            dt_nominal: grid.dt_ref(),
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn dt_nominal(&self) -> f64 {
        self.dt_nominal
    }

    pub fn max_step(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Number of `dt` steps in `horizon`, if `horizon` is an integer multiple of `dt`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::InvalidGrid(format!("horizon {horizon} / step {dt} must be positive")));
    }
    let n = (horizon / dt).round();
    if n < 1.0 || (n * dt - horizon).abs() > 1e-12 * horizon {
        return Err(Error::InvalidGrid(format!("horizon {horizon} is not a multiple of {dt}")));
    }
    Ok(n as usize)
}

/// Merges the uniform grid of step `dt_nominal` with the skeleton's jump times.
pub fn build_adapted_partition(horizon: f64, dt_nominal: f64, skeleton: &JumpSkeleton) -> Result<TimePartition> {
    let steps = step_count(horizon, dt_nominal)?;
    TimePartition::adapted(steps, dt_nominal, skeleton)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    JumpAdaptedA,
    UniformB,
}

#[derive(Clone, Debug)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    pub n_modes: usize,
    pub dt_nominal: f64,
    pub horizon: f64,
    pub f: Nonlinearity,
    pub marks: MarkModel,
    pub x0: SpectralState,
}

impl SchemeConfig {
    /// The uniform scheme with a multiplicative jump coefficient is well
    /// defined but not covered by the additive-noise convergence result.
    pub fn outside_additive_hypotheses(&self) -> bool {
        self.scheme == SchemeKind::UniformB && !self.marks.g1().is_zero()
    }

    fn check_against(&self, path: &CoupledNoisePath) -> Result<usize> {
        if self.n_modes == 0 || self.n_modes > path.n_ref() {
            return Err(Error::InvalidArgument(format!(
                "scheme uses {} modes, path has {}",
                self.n_modes,
                path.n_ref()
            )));
        }
        let ratio = self.dt_nominal / path.grid().dt_ref();
        let r = ratio.round();
        if r < 1.0 || r != ratio || (r as u64).count_ones() != 1 {
            return Err(Error::InvalidGrid(format!(
                "dt {} is not dt_ref * 2^j (dt_ref = {})",
                self.dt_nominal,
                path.grid().dt_ref()
            )));
        }
        let steps = step_count(self.horizon, self.dt_nominal)?;
        if steps as f64 * self.dt_nominal != path.horizon() {
            return Err(Error::InvalidGrid(format!(
                "scheme horizon {} differs from path horizon {}",
                self.horizon,
                path.horizon()
            )));
        }
        Ok(steps)
    }
}

/// Node values of one run; `pre_jump[i]` holds `X_{i-}` where node `i` carries a jump.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub partition: TimePartition,
    pub states: Vec<SpectralState>,
    pub pre_jump: Vec<Option<SpectralState>>,
}

impl Trajectory {
    pub fn terminal(&self) -> &SpectralState {
        self.states.last().expect("trajectory has at least the initial node")
    }
}

/// Mode-wise coefficients and scratch space for repeated steps on `H_N`.
struct Stepper<'a> {
    model: &'a MarkModel,
    lambdas: Vec<f64>,
    nonlinearity: NemytskiiEvaluator,
    mean_g1: f64,
    mean_g: Vec<f64>,
    // g_scale * P_N phi
    jump_profile: Vec<f64>,
    fx: Vec<f64>,
    jump_term: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(cfg: &'a SchemeConfig) -> Result<Self> {
        let n = cfg.n_modes;
        let (mean_g1, mean_g) = compensator_coeffs(&cfg.marks, n)?;
        Ok(Self {
            model: &cfg.marks,
            lambdas: (1..=n).map(eigenvalue).collect(),
            nonlinearity: NemytskiiEvaluator::new(cfg.f, n)?,
            mean_g1,
            mean_g: mean_g.into_coeffs(),
            jump_profile: project(cfg.marks.profile(), n).scaled(cfg.marks.g_scale()).into_coeffs(),
            fx: vec![0.0; n],
            jump_term: vec![0.0; n],
        })
    }

    /// One application of the one-step map; `jumps` are the in-step jumps
    /// that enter the jump term (empty for the jump-adapted scheme).
    fn phi(&mut self, x: &mut [f64], dt: f64, wiener: &[f64], jumps: &[crate::noise::JumpEvent]) {
        self.nonlinearity.eval_into(x, &mut self.fx);
        self.jump_term.fill(0.0);
        for e in jumps {
            let g1 = self.model.g1_at(e.xi);
            for ((j, xk), pk) in self.jump_term.iter_mut().zip(x.iter()).zip(&self.jump_profile) {
                *j += g1 * xk + e.xi * pk;
            }
        }
        for k in 0..x.len() {
            let lambda = self.lambdas[k];
            let decay = (-lambda * dt).exp();
            let j = self.jump_term[k] - dt * (self.mean_g1 * x[k] + self.mean_g[k]);
            x[k] = decay * x[k] + phi1_factor(lambda, dt) * self.fx[k] + wiener[k] + decay * j;
        }
    }

    fn jump(&self, x: &mut [f64], xi: f64) {
        let factor = 1.0 + self.model.g1_at(xi);
        for (xk, pk) in x.iter_mut().zip(&self.jump_profile) {
            *xk = factor * *xk + xi * pk;
        }
    }
}

fn check_bundle(x: &SpectralState, noise: &StepNoise, dt_step: f64, n: usize) -> Result<()> {
    if !(dt_step > 0.0) {
        return Err(Error::BundleMismatch(format!("step size {dt_step} must be positive")));
    }
    if (noise.dt() - dt_step).abs() > 1e-12 * dt_step {
        return Err(Error::BundleMismatch(format!(
            "bundle covers {} but step is {dt_step}",
            noise.dt()
        )));
    }
    if noise.wiener.len() != n || x.dim() != n {
        return Err(Error::BundleMismatch(format!(
            "dimensions: state {}, noise {}, scheme {n}",
            x.dim(),
            noise.wiener.len()
        )));
    }
    Ok(())
}

/// One application of the one-step map to `x`. For the jump-adapted scheme
/// the jump term is the compensator alone; for the uniform scheme it also
/// sums `G_N(x, z_j)` over the bundle's jumps.
pub fn one_step_phi(
    x: &SpectralState,
    noise: &StepNoise,
    skeleton: &JumpSkeleton,
    dt_step: f64,
    cfg: &SchemeConfig,
) -> Result<SpectralState> {
    check_bundle(x, noise, dt_step, cfg.n_modes)?;
    let mut stepper = Stepper::new(cfg)?;
    let jumps = match cfg.scheme {
        SchemeKind::JumpAdaptedA => &[][..],
        SchemeKind::UniformB => skeleton
            .events()
            .get(noise.jumps.clone())
            .ok_or_else(|| Error::BundleMismatch("jump range outside skeleton".into()))?,
    };
    let mut out = x.coeffs().to_vec();
    stepper.phi(&mut out, dt_step, &noise.wiener, jumps);
    Ok(SpectralState::from_raw(out))
}

/// `X_- + G_N(X_-, z) = (1 + g1(z)) X_- + P_N g(z)` with `g(z) = g_scale z`.
pub fn jump_apply(x_minus: &SpectralState, mark: &SpectralState, model: &MarkModel) -> Result<SpectralState> {
    let norm = hnorm(mark, 0.0);
    if norm == 0.0 {
        return Err(Error::ZeroMark);
    }
    let factor = 1.0 + model.g1().eval(norm);
    let g = project(mark, x_minus.dim());
    Ok(SpectralState::from_raw(
        x_minus
            .coeffs()
            .iter()
            .zip(g.coeffs())
            .map(|(x, z)| factor * x + model.g_scale() * z)
            .collect(),
    ))
}

/// Drives either scheme over the path, reporting `(node index, pre-jump, post)`
/// after every step, and returns the terminal coefficients.
fn drive<O>(
    cfg: &SchemeConfig,
    stepper: &mut Stepper<'_>,
    path: &CoupledNoisePath,
    mut observe: O,
) -> Result<(TimePartition, Vec<f64>)>
where
    O: FnMut(usize, Option<&[f64]>, &[f64]),
{
    let steps = cfg.check_against(path)?;
    let n = cfg.n_modes;
    let partition = match cfg.scheme {
        SchemeKind::JumpAdaptedA => build_adapted_partition(path.horizon(), cfg.dt_nominal, path.jumps())?,
        SchemeKind::UniformB => TimePartition::uniform(steps, cfg.dt_nominal)?,
    };
    let bundle = restrict_path(path, &partition, n)?;
    let events = path.jumps().events();
    let mut x = project(&cfg.x0, n).into_coeffs();
    observe(0, None, &x);
    let mut pre = vec![0.0; n];
    for (i, step) in bundle.iter().enumerate() {
        let in_step = &events[step.jumps.clone()];
        let dt = step.dt();
        match cfg.scheme {
            SchemeKind::UniformB => {
                stepper.phi(&mut x, dt, &step.wiener, in_step);
                observe(i + 1, None, &x);
            }
            SchemeKind::JumpAdaptedA => {
                stepper.phi(&mut x, dt, &step.wiener, &[]);
                match (partition.kinds()[i + 1].is_jump(), in_step) {
                    (false, []) => observe(i + 1, None, &x),
                    (true, [e]) if e.time == step.end => {
                        pre.copy_from_slice(&x);
                        stepper.jump(&mut x, e.xi);
                        observe(i + 1, Some(&pre), &x);
                    }
                    (_, [_, second, ..]) => return Err(Error::SimultaneousJumps(second.time)),
                    _ => {
                        return Err(Error::BundleMismatch(format!(
                            "jump flags and events disagree on step ending at {}",
                            step.end
                        )))
                    }
                }
            }
        }
    }
    Ok((partition, x))
}

fn run(cfg: &SchemeConfig, path: &CoupledNoisePath, expected: SchemeKind) -> Result<Trajectory> {
    if cfg.scheme != expected {
        return Err(Error::InvalidArgument(format!("config selects {:?}", cfg.scheme)));
    }
    let mut states = Vec::new();
    let mut pre_jump = Vec::new();
    let mut stepper = Stepper::new(cfg)?;
    let (partition, _) = drive(cfg, &mut stepper, path, |_, pre, post| {
        states.push(SpectralState::from_raw(post.to_vec()));
        pre_jump.push(pre.map(|p| SpectralState::from_raw(p.to_vec())));
    })?;
    if let Some(i) = states.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidState(format!("non-finite state at node {i}")));
    }
    Ok(Trajectory {
        partition,
        states,
        pre_jump,
    })
}

/// Jump-adapted scheme: steps on the uniform grid merged with the jump times,
/// compensator-only jump term inside steps, exact jump update at jump nodes.
pub fn run_scheme_a(cfg: &SchemeConfig, path: &CoupledNoisePath) -> Result<Trajectory> {
    run(cfg, path, SchemeKind::JumpAdaptedA)
}

/// Uniform scheme: constant steps, jumps aggregated inside each step.
pub fn run_scheme_b(cfg: &SchemeConfig, path: &CoupledNoisePath) -> Result<Trajectory> {
    run(cfg, path, SchemeKind::UniformB)
}

/// Terminal value of the selected scheme without storing the trajectory.
/// Non-finite terminal values are returned as-is for the caller to flag.
pub fn run_terminal(cfg: &SchemeConfig, path: &CoupledNoisePath) -> Result<SpectralState> {
    SchemeRunner::new(cfg)?.terminal(path)
}

/// A scheme with its per-configuration tables built once, for running many paths.
pub struct SchemeRunner<'a> {
    cfg: &'a SchemeConfig,
    stepper: Stepper<'a>,
}

impl<'a> SchemeRunner<'a> {
    pub fn new(cfg: &'a SchemeConfig) -> Result<Self> {
        Ok(Self {
            cfg,
            stepper: Stepper::new(cfg)?,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        self.cfg
    }

    pub fn terminal(&mut self, path: &CoupledNoisePath) -> Result<SpectralState> {
        let (_, x) = drive(self.cfg, &mut self.stepper, path, |_, _, _| {})?;
        Ok(SpectralState::from_raw(x))
    }
}
