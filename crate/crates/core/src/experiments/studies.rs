use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::plan::{Axis, StudyPlan};
use crate::experiments::stats::{distance, fit_order, lp_estimates, OrderFit, BOOTSTRAP_RESAMPLES};
use crate::noise::marks::{compensator_coeffs, MarkModel};
use crate::noise::path::{sample_jump_skeleton, CoupledNoisePath};
use crate::rng::{stream, Purpose, SeedRecord};
use crate::schemes::{step_count, SchemeConfig, SchemeKind, SchemeRunner};
use crate::spectral::{eigenvalue, phi1_factor, project};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelError {
    pub level: f64,
    pub error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub p: f64,
    pub levels: Vec<LevelError>,
    pub fit: Option<OrderFit>,
    /// Why no fit was produced, if none was.
    pub fit_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub name: String,
    pub axis: Axis,
    pub reports: Vec<OrderReport>,
    pub samples: usize,
    pub m_effective: usize,
    /// Sample indices dropped because a terminal value was not finite.
    pub aborted: Vec<u64>,
    pub truncation_residual: Option<f64>,
    /// Uniform scheme with a multiplicative jump coefficient.
    pub outside_hypotheses: bool,
}

impl StudyOutcome {
    pub fn report(&self, p: f64) -> Option<&OrderReport> {
        self.reports.iter().find(|r| r.p == p)
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Runs the study described by `plan` on `threads` workers (all cores if `None`).
pub fn run_study(plan: &StudyPlan, threads: Option<usize>) -> Result<StudyOutcome> {
    match plan.axis {
        Axis::Temporal => run_temporal_study(plan, threads),
        Axis::Spatial => run_spatial_study(plan, threads),
        Axis::Holder => run_holder_study(plan, threads),
    }
}

pub fn run_temporal_study(plan: &StudyPlan, threads: Option<usize>) -> Result<StudyOutcome> {
    expect_axis(plan, Axis::Temporal)?;
    let n = plan.reference.n_ref;
    coupled_study(plan, threads, |marks, level| plan.scheme_config(marks, n, level))
}

pub fn run_spatial_study(plan: &StudyPlan, threads: Option<usize>) -> Result<StudyOutcome> {
    expect_axis(plan, Axis::Spatial)?;
    let dt = plan.reference.dt_ref;
    coupled_study(plan, threads, |marks, level| plan.scheme_config(marks, level as usize, dt))
}

fn expect_axis(plan: &StudyPlan, axis: Axis) -> Result<()> {
    plan.validate()?;
    if plan.axis != axis {
        return Err(Error::InvalidArgument(format!("plan {} is a {:?} study", plan.name, plan.axis)));
    }
    Ok(())
}

/// Reference run at `(n_ref, dt_ref)` and one run per level, all on the same
/// coupled path per sample.
fn coupled_study<C>(plan: &StudyPlan, threads: Option<usize>, level_config: C) -> Result<StudyOutcome>
where
    C: Fn(&MarkModel, f64) -> Result<SchemeConfig>,
{
    let (marks, residual) = plan.mark_model()?;
    let reference = plan.scheme_config(&marks, plan.reference.n_ref, plan.reference.dt_ref)?;
    let mut configs = vec![reference];
    for &level in &plan.levels {
        configs.push(level_config(&marks, level)?);
    }
    for c in &configs {
        SchemeRunner::new(c)?;
    }
    let steps_ref = step_count(plan.horizon, plan.reference.dt_ref)?;
    let sample = |runners: &mut Vec<SchemeRunner<'_>>, i: usize| -> Result<Option<Vec<f64>>> {
        let seed = SeedRecord::new(plan.seed, i as u64);
        let mut path = CoupledNoisePath::generate(seed, steps_ref, plan.reference.dt_ref, plan.reference.n_ref, &marks)?;
        if !plan.wiener {
            path = path.without_wiener();
        }
        let mut terminals = Vec::with_capacity(runners.len());
        for r in runners.iter_mut() {
            let x = r.terminal(&path)?;
            if !x.is_finite() {
                return Ok(None);
            }
            terminals.push(x);
        }
        Ok(Some(terminals[1..].iter().map(|x| distance(&terminals[0], x)).collect()))
    };
    let results: Vec<Result<Option<Vec<f64>>>> = pool(threads)?.install(|| {
        (0..plan.samples)
            .into_par_iter()
            .map_init(
                || {
                    configs
                        .iter()
                        .map(|c| SchemeRunner::new(c).expect("runner construction checked above"))
                        .collect::<Vec<_>>()
                },
                |runners, i| sample(runners, i),
            )
            .collect()
    });
    let outside = plan.scheme == SchemeKind::UniformB && !marks.g1().is_zero();
    aggregate(plan, results, residual, outside)
}

/// Increments of the jump stochastic convolution
/// `N(t) = int_0^t E(t - s) g(z) (N - nu)(dz, ds)` at `t = T/2`, exact per mode.
pub fn run_holder_study(plan: &StudyPlan, threads: Option<usize>) -> Result<StudyOutcome> {
    expect_axis(plan, Axis::Holder)?;
    let (marks, residual) = plan.mark_model()?;
    let n = plan.reference.n_ref;
    let lambdas: Vec<f64> = (1..=n).map(eigenvalue).collect();
    let g = project(marks.profile(), n).scaled(marks.g_scale()).into_coeffs();
    let (_, mean_g) = compensator_coeffs(&marks, n)?;
    let mean_g = mean_g.into_coeffs();
    let t0 = 0.5 * plan.horizon;
    let sample = |i: usize| -> Result<Option<Vec<f64>>> {
        let mut rng = SeedRecord::new(plan.seed, i as u64).stream(Purpose::Jumps);
        let skeleton = sample_jump_skeleton(plan.horizon, &marks, &mut rng)?;
        let d = plan
            .levels
            .iter()
            .map(|&h| {
                let mut sq = 0.0;
                for k in 0..n {
                    let l = lambdas[k];
                    let mut jumps = 0.0;
                    for e in skeleton.events() {
                        if e.time <= t0 {
                            jumps += (-l * (t0 - e.time)).exp() * (-l * h).exp_m1() * e.xi;
                        } else if e.time <= t0 + h {
                            jumps += (-l * (t0 + h - e.time)).exp() * e.xi;
                        }
                    }
                    let delta = g[k] * jumps - mean_g[k] * (-l * t0).exp() * phi1_factor(l, h);
                    sq += delta * delta;
                }
                sq.sqrt()
            })
            .collect();
        Ok(Some(d))
    };
    let results: Vec<Result<Option<Vec<f64>>>> =
        pool(threads)?.install(|| (0..plan.samples).into_par_iter().map(sample).collect());
    aggregate(plan, results, residual, false)
}

fn aggregate(
    plan: &StudyPlan,
    results: Vec<Result<Option<Vec<f64>>>>,
    residual: Option<f64>,
    outside_hypotheses: bool,
) -> Result<StudyOutcome> {
    let mut per_level: Vec<Vec<f64>> = vec![Vec::with_capacity(results.len()); plan.levels.len()];
    let mut aborted = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r? {
            Some(d) => {
                for (acc, x) in per_level.iter_mut().zip(d) {
                    acc.push(x);
                }
            }
            None => {
                log::warn!("study {}: sample {i} aborted on a non-finite state", plan.name);
                aborted.push(i as u64);
            }
        }
    }
    let m_effective = plan.samples - aborted.len();
    let estimates: Vec<_> = per_level
        .iter()
        .map(|d| {
            // same resampled index sets for every level and every p
            let mut rng = stream(plan.seed, 0, Purpose::Bootstrap);
            lp_estimates(d, &plan.p_list, &mut rng, BOOTSTRAP_RESAMPLES)
        })
        .collect();
    let reports = plan
        .p_list
        .iter()
        .enumerate()
        .map(|(q, &p)| {
            let levels: Vec<LevelError> = plan
                .levels
                .iter()
                .zip(&estimates)
                .map(|(&level, e)| LevelError {
                    level,
                    error: e[q].error,
                    ci_lo: e[q].ci_lo,
                    ci_hi: e[q].ci_hi,
                    half_width: e[q].half_width,
                })
                .collect();
            let xs: Vec<f64> = levels.iter().map(|l| l.level).collect();
            let ys: Vec<f64> = levels.iter().map(|l| l.error).collect();
            let (fit, fit_error) = match fit_order(&xs, &ys) {
                Ok(mut f) => {
                    if plan.axis == Axis::Spatial {
                        f.order = -f.slope;
                    }
                    (Some(f), None)
                }
                Err(e) => (None, Some(e.to_string())),
            };
            OrderReport {
                p,
                levels,
                fit,
                fit_error,
            }
        })
        .collect();
    Ok(StudyOutcome {
        name: plan.name.clone(),
        axis: plan.axis,
        reports,
        samples: plan.samples,
        m_effective,
        aborted,
        truncation_residual: residual,
        outside_hypotheses,
    })
}
