//! Leading-order excitation probability of the smeared detector.
//!
//! With Gaussian switching `e^{-t²/T²}` and the vacuum of a massless field,
//! the time and angular integrals are done exactly, leaving
//!
//! ```text
//! 𝓛(Ω) = (T²/2π) ∫₀^∞ dk k e^{-T²(Ω+k)²} |F̃(k)|²,
//! F̃(k) = (4π/k) ∫₀^∞ r sin(kr) Φ(r) dr.
//! ```
//!
//! `Ω > 0` is an excitation gap.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::modes::{AnalyticMode, BoundMode};
use crate::profiles::{ModelError, ModelParams};
use crate::quadcore::{integrate, QuadError};

/// Gaussian switching is negligible beyond this many widths of the peak.
const GAUSSIAN_REACH: f64 = 12.0;
/// Profiles are truncated at this many decay lengths.
const PROFILE_REACH: f64 = 40.0;
const REL_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResponseError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] QuadError),
    #[error("switching width T = {0} must be positive and finite")]
    InvalidSwitching(f64),
    #[error("perturbative regime violated: lambda^2 L = {0} >= 1")]
    PerturbativeRegimeViolated(f64),
    #[error("invalid coupling or probability: {0}")]
    InvalidCoupling(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchingParams {
    pub t_switch: f64,
    pub lambda: f64,
    pub gap: f64,
}

impl SwitchingParams {
    pub fn validate(&self) -> Result<(), ResponseError> {
        check_switching(self.t_switch)?;
        if !self.lambda.is_finite() || !self.gap.is_finite() {
            return Err(ResponseError::InvalidCoupling(self.lambda));
        }
        Ok(())
    }
}

fn check_switching(t: f64) -> Result<(), ResponseError> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(ResponseError::InvalidSwitching(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseResult {
    /// Probability per λ².
    pub probability: f64,
    pub abs_error_estimate: f64,
    pub gap: f64,
    pub t_switch: f64,
}

/// Real spherically symmetric smearing profile `Φ(r)`.
pub trait RadialProfile: Sync {
    fn value(&self, r: f64) -> f64;
    /// Length over which the profile falls by a factor e at large r.
    fn decay_length(&self) -> f64;
    /// Radius beyond which the profile is treated as zero.
    fn support(&self) -> f64 {
        PROFILE_REACH * self.decay_length()
    }
}

impl RadialProfile for AnalyticMode {
    fn value(&self, r: f64) -> f64 {
        self.phi(r / self.ell)
    }

    fn decay_length(&self) -> f64 {
        self.ell
    }
}

impl RadialProfile for BoundMode {
    fn value(&self, r: f64) -> f64 {
        if r > self.x_max() {
            0.0
        } else {
            self.profile(r)
        }
    }

    fn decay_length(&self) -> f64 {
        1.0 / (-self.eigenvalue).sqrt()
    }

    fn support(&self) -> f64 {
        self.x_max().min(PROFILE_REACH * self.decay_length())
    }
}

/// Sum of adaptive integrals over panels of `width` on `[0, end]`. The
/// absolute tolerance is set from a sampled estimate of `∫|f|`.
fn panelized<F: Fn(f64) -> f64>(f: F, end: f64, width: f64) -> Result<(f64, f64), QuadError> {
    let panels = (end / width).ceil().max(1.0) as usize;
    let edge = |i: usize| (i as f64 * width).min(end);
    let mut mass = 0.0;
    for i in 0..panels {
        let (a, b) = (edge(i), edge(i + 1));
        for j in 0..3 {
            mass += f(a + (j as f64 + 0.5) * (b - a) / 3.0).abs() * (b - a) / 3.0;
        }
    }
    let abs_tol = (1e-14 * mass).max(f64::MIN_POSITIVE);
    let (mut value, mut err) = (0.0, 0.0);
    for i in 0..panels {
        let q = integrate(&f, edge(i), edge(i + 1), REL_TOL, abs_tol)?;
        value += q.value;
        err += q.abs_error_estimate;
    }
    Ok((value, err))
}

/// `F̃(k) = (4π/k) ∫ r sin(kr) Φ(r) dr`, with the `k → 0` limit
/// `4π ∫ r² Φ dr` built in.
pub fn form_factor(k: f64, mode: &dyn RadialProfile) -> Result<f64, ResponseError> {
    let mut width = mode.decay_length();
    if k > 1.0 / width {
        width = PI / k;
    }
    let sinc_k = |r: f64| if k == 0.0 { r } else { (k * r).sin() / k };
    let (total, _) = panelized(|r| r * sinc_k(r) * mode.value(r), mode.support(), width)?;
    Ok(4.0 * PI * total)
}

/// `(T²/2π) ∫₀^∞ k e^{-T²(Ω+k)²} w(k) dk` on panels resolving the Gaussian.
fn k_integral(
    gap: f64,
    t_switch: f64,
    panel: f64,
    weight: &(dyn Fn(f64) -> Result<f64, ResponseError> + Sync),
) -> Result<ResponseResult, ResponseError> {
    check_switching(t_switch)?;
    let k_max = (-gap).max(0.0) + GAUSSIAN_REACH / t_switch;
    let panel = panel.min(1.0 / t_switch);
    let failure = std::cell::RefCell::new(None);
    let f = |k: f64| {
        let kern = k * (-(t_switch * (gap + k)).powi(2)).exp();
        if kern == 0.0 {
            return 0.0;
        }
        match weight(k) {
            Ok(w) => kern * w,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let outcome = panelized(f, k_max, panel);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let (value, err) = outcome?;
    let scale = t_switch * t_switch / (2.0 * PI);
    Ok(ResponseResult {
        probability: scale * value,
        abs_error_estimate: scale * err,
        gap,
        t_switch,
    })
}

/// 𝓛 for a detector smeared by `mode`.
pub fn excitation_probability(gap: f64, t_switch: f64, mode: &dyn RadialProfile) -> Result<ResponseResult, ResponseError> {
    let panel = 1.0 / mode.decay_length();
    k_integral(gap, t_switch, panel, &|k| Ok(form_factor(k, mode)?.powi(2)))
}

/// 𝓛 with `F̃ ≡ 1`, by the same quadrature as the smeared case.
pub fn excitation_probability_pointlike(gap: f64, t_switch: f64) -> Result<ResponseResult, ResponseError> {
    k_integral(gap, t_switch, f64::INFINITY, &|_| Ok(1.0))
}

/// Closed form of the pointlike response,
/// `e^{-Ω²T²}/(4π) - (ΩT/(4√π)) erfc(ΩT)`.
pub fn pointlike_probability(gap: f64, t_switch: f64) -> Result<f64, ResponseError> {
    check_switching(t_switch)?;
    let a = gap * t_switch;
    Ok((-a * a).exp() / (4.0 * PI) - a * libm::erfc(a) / (4.0 * PI.sqrt()))
}

/// Large-|Ω|T behaviour of the pointlike response, `|Ω|T/(2√π) Θ(-Ω)`.
pub fn pointlike_asymptote(gap: f64, t_switch: f64) -> f64 {
    if gap < 0.0 {
        -gap * t_switch / (2.0 * PI.sqrt())
    } else {
        0.0
    }
}

/// 𝓛 over a grid of `ΩT` for several detector sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseTable {
    pub t_switch: f64,
    pub gap_t: Vec<f64>,
    pub ells: Vec<f64>,
    /// One column per entry of `ells`.
    pub columns: Vec<Vec<f64>>,
    /// Pointlike reference column (closed form).
    pub pointlike: Vec<f64>,
}

/// Samples 𝓛 at `Ω = ΩT / T` for each ℓ, with `Φ₁` for `(ℓ, m_d)`.
pub fn response_curve(ells: &[f64], gap_t: &[f64], m_d: f64, t_switch: f64) -> Result<ResponseTable, ResponseError> {
    check_switching(t_switch)?;
    let modes = ells
        .iter()
        .map(|&ell| AnalyticMode::new(&ModelParams { ell, m_d, ..Default::default() }))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..ells.len()).flat_map(|i| (0..gap_t.len()).map(move |j| (i, j))).collect();
    let values = jobs
        .par_iter()
        .map(|&(i, j)| excitation_probability(gap_t[j] / t_switch, t_switch, &modes[i]).map(|r| r.probability))
        .collect::<Result<Vec<_>, _>>()?;
    let columns = values.chunks(gap_t.len().max(1)).map(<[f64]>::to_vec).collect();
    let pointlike = gap_t
        .iter()
        .map(|g| pointlike_probability(g / t_switch, t_switch))
        .collect::<Result<_, _>>()?;
    Ok(ResponseTable {
        t_switch,
        gap_t: gap_t.to_vec(),
        ells: ells.to_vec(),
        columns: if gap_t.is_empty() { vec![Vec::new(); ells.len()] } else { columns },
        pointlike,
    })
}

/// Ground and excited weights `(1 - λ²𝓛, λ²𝓛)` of the detector after the
/// interaction.
pub fn final_state(lambda: f64, probability: f64) -> Result<(f64, f64), ResponseError> {
    if !lambda.is_finite() || !(probability >= 0.0) {
        return Err(ResponseError::InvalidCoupling(probability));
    }
    let p = lambda * lambda * probability;
    if p >= 1.0 {
        return Err(ResponseError::PerturbativeRegimeViolated(p));
    }
    Ok((1.0 - p, p))
}
