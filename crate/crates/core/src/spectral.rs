//! Sine eigenbasis of the Dirichlet Laplacian on (0, 1).
//!
//! A [`SpectralState`] holds the coefficients `a_1..a_N` of a function
//! `u(x) = sum_k a_k e_k(x)` with `e_k(x) = sqrt(2) sin(k pi x)`. The
//! Laplacian is diagonal in this basis with eigenvalues `-lambda_k`,
//! `lambda_k = pi^2 k^2`, so the semigroup and its time integral act
//! mode by mode.
//!
//! Physical-space evaluation (needed for the pointwise nonlinearity) uses
//! a direct sine-matrix product on the interior nodes `x_m = m / (M + 1)`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalue `lambda_k = pi^2 k^2` of `-A` for the 1-based mode index `k`.
#[inline]
pub fn eigenvalue(k: usize) -> f64 {
    let k = k as f64;
    PI * PI * k * k
}

/// Coefficients of a function in `H_N = span{e_1, .., e_N}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    coeffs: Vec<f64>,
}

impl SpectralState {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidState("state needs at least one mode".into()));
        }
        if let Some(i) = coeffs.iter().position(|a| !a.is_finite()) {
            return Err(Error::InvalidState(format!(
                "coefficient of mode {} is not finite",
                i + 1
            )));
        }
        Ok(Self { coeffs })
    }

    /// Wraps coefficients produced internally; finiteness is the caller's job.
    pub(crate) fn from_raw(coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "state dimension must be positive");
        Self {
            coeffs: vec![0.0; dim],
        }
    }

    /// The basis function `e_k` (1-based) embedded in `H_dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k >= 1 && k <= dim, "mode {k} outside 1..={dim}");
        let mut s = Self::zeros(dim);
        s.coeffs[k - 1] = 1.0;
        s
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|a| a.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_raw(self.coeffs.iter().map(|a| a * factor).collect())
    }

    /// Difference of two states of possibly different dimension; the shorter
    /// one is zero-padded.
    pub fn sub(&self, other: &Self) -> Self {
        let n = self.dim().max(other.dim());
        let get = |s: &Self, i: usize| s.coeffs.get(i).copied().unwrap_or(0.0);
        Self::from_raw((0..n).map(|i| get(self, i) - get(other, i)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.sub(&other.scaled(-1.0))
    }
}

/// Orthogonal projection onto the first `n_target` modes, zero-padding when
/// the state is shorter.
pub fn project(state: &SpectralState, n_target: usize) -> SpectralState {
    assert!(n_target >= 1, "projection target must be positive");
    let mut coeffs = vec![0.0; n_target];
    let n = n_target.min(state.dim());
    coeffs[..n].copy_from_slice(&state.coeffs[..n]);
    SpectralState::from_raw(coeffs)
}

/// `(sum_k lambda_k^s a_k^2)^(1/2)`, the `H^s` norm; `s = 0` is the L2 norm.
pub fn hnorm(state: &SpectralState, s: f64) -> f64 {
    state
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let w = if s == 0.0 { 1.0 } else { eigenvalue(i + 1).powf(s) };
            w * a * a
        })
        .sum::<f64>()
        .sqrt()
}

/// `E(t) u`: each mode decays by `exp(-lambda_k t)`.
pub fn semigroup_apply(state: &SpectralState, t: f64) -> Result<SpectralState> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    Ok(SpectralState::from_raw(
        state
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| (-eigenvalue(i + 1) * t).exp() * a)
            .collect(),
    ))
}

/// Integrated-semigroup factor `(1 - exp(-lambda_k t)) / lambda_k` for one mode.
#[inline]
pub fn phi1_factor(lambda: f64, t: f64) -> f64 {
    -(-lambda * t).exp_m1() / lambda
}

/// `int_0^t E(s) u ds`, applied exactly per mode.
pub fn phi1_apply(state: &SpectralState, t: f64) -> Result<SpectralState> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    Ok(SpectralState::from_raw(
        state
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| phi1_factor(eigenvalue(i + 1), t) * a)
            .collect(),
    ))
}

/// Precomputed sine table for `modes` coefficients and `nodes` interior
/// collocation points `x_m = m / (nodes + 1)`.
#[derive(Clone, Debug)]
pub struct SineTransform {
    modes: usize,
    nodes: usize,
    // row-major, one row of `nodes` entries per mode: sqrt(2) sin(k pi x_m)
    table: Vec<f64>,
}

impl SineTransform {
    pub fn new(modes: usize, nodes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidArgument("transform needs at least one mode".into()));
        }
        if nodes < modes {
            return Err(Error::Undersampled {
                values: nodes,
                modes,
                required: modes,
            });
        }
        let h = 1.0 / (nodes + 1) as f64;
        let mut table = Vec::with_capacity(modes * nodes);
        for k in 1..=modes {
            for m in 1..=nodes {
                table.push(SQRT_2 * (PI * (k * m) as f64 * h).sin());
            }
        }
        Ok(Self {
            modes,
            nodes,
            table,
        })
    }

    /// Transform sized for the pseudo-spectral nonlinearity on `H_N`.
    pub fn dealiased(modes: usize) -> Result<Self> {
        Self::new(modes, 2 * modes + 1)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.table[k * self.nodes..(k + 1) * self.nodes]
    }

    /// Writes `u(x_m)` for the first `coeffs.len()` modes into `out`.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        assert!(coeffs.len() <= self.modes);
        assert_eq!(out.len(), self.nodes);
        out.fill(0.0);
        for (k, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, s) in out.iter_mut().zip(self.row(k)) {
                *o += a * s;
            }
        }
    }

    /// Discrete sine analysis of nodal values into `out.len()` coefficients.
    pub fn analyze(&self, values: &[f64], out: &mut [f64]) {
        assert!(out.len() <= self.modes);
        assert_eq!(values.len(), self.nodes);
        let w = 1.0 / (self.nodes + 1) as f64;
        for (k, o) in out.iter_mut().enumerate() {
            let dot: f64 = self.row(k).iter().zip(values).map(|(s, v)| s * v).sum();
            *o = w * dot;
        }
    }
}

/// Values of the state at the `m_q` interior nodes `x_m = m / (m_q + 1)`.
pub fn to_physical(state: &SpectralState, m_q: usize) -> Result<Vec<f64>> {
    if m_q < state.dim() {
        return Err(Error::Undersampled {
            values: m_q,
            modes: state.dim(),
            required: state.dim(),
        });
    }
    let tr = SineTransform::new(state.dim(), m_q)?;
    let mut out = vec![0.0; m_q];
    tr.synthesize(&state.coeffs, &mut out);
    Ok(out)
}

/// Discrete sine analysis onto `n` modes; requires `values.len() >= 2n + 1`.
pub fn from_physical(values: &[f64], n: usize) -> Result<SpectralState> {
    if n == 0 {
        return Err(Error::InvalidArgument("target dimension must be positive".into()));
    }
    if values.len() < 2 * n + 1 {
        return Err(Error::Undersampled {
            values: values.len(),
            modes: n,
            required: 2 * n + 1,
        });
    }
    let tr = SineTransform::new(n, values.len())?;
    let mut out = vec![0.0; n];
    tr.analyze(values, &mut out);
    Ok(SpectralState::from_raw(out))
}

/// Pointwise nonlinearity `f` of the Nemytskii operator `F(u)(x) = f(u(x))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    Zero,
    Linear { c: f64 },
    Sine { a: f64 },
}

impl Nonlinearity {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { c } => c * u,
            Nonlinearity::Sine { a } => a * u.sin(),
        }
    }

    /// Bound `L_F` on `|f'|`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { c } => c.abs(),
            Nonlinearity::Sine { a } => a.abs(),
        }
    }
}

/// Reusable buffers for evaluating `P_N F(u)` on a fixed `H_N`.
#[derive(Clone, Debug)]
pub struct NemytskiiEvaluator {
    f: Nonlinearity,
    transform: Option<SineTransform>,
    nodal: Vec<f64>,
}

impl NemytskiiEvaluator {
    pub fn new(f: Nonlinearity, modes: usize) -> Result<Self> {
        // zero and linear f commute with P_N, no transform needed
        let transform = match f {
            Nonlinearity::Sine { .. } => Some(SineTransform::dealiased(modes)?),
            _ => None,
        };
        let nodes = transform.as_ref().map_or(0, |t| t.nodes());
        Ok(Self {
            f,
            transform,
            nodal: vec![0.0; nodes],
        })
    }

    /// Writes `P_N F(u)` into `out` (`out.len() == u.len() == N`).
    pub fn eval_into(&mut self, u: &[f64], out: &mut [f64]) {
        match (self.f, &self.transform) {
            (Nonlinearity::Zero, _) => out.fill(0.0),
            (Nonlinearity::Linear { c }, _) => {
                for (o, a) in out.iter_mut().zip(u) {
                    *o = c * a;
                }
            }
            (f, Some(tr)) => {
                tr.synthesize(u, &mut self.nodal);
                for v in self.nodal.iter_mut() {
                    *v = f.eval(*v);
                }
                tr.analyze(&self.nodal, out);
            }
            (_, None) => unreachable!("sine nonlinearity always carries a transform"),
        }
    }
}

/// `P_{n_out} F(u)` evaluated pseudo-spectrally on `2 max(dim, n_out) + 1` nodes.
pub fn nemytskii_f(state: &SpectralState, f: Nonlinearity, n_out: usize) -> Result<SpectralState> {
    if n_out == 0 {
        return Err(Error::InvalidArgument("target dimension must be positive".into()));
    }
    match f {
        Nonlinearity::Zero => Ok(SpectralState::zeros(n_out)),
        Nonlinearity::Linear { c } => Ok(project(state, n_out).scaled(c)),
        Nonlinearity::Sine { .. } => {
            let m_q = 2 * state.dim().max(n_out) + 1;
            let mut nodal = to_physical(state, m_q)?;
            for v in nodal.iter_mut() {
                *v = f.eval(*v);
            }
            from_physical(&nodal, n_out)
        }
    }
}
