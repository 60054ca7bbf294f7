//! Model definition: the parameter tuple, the sech-profile confining field,
//! the trap potential it induces, and the auxiliary functions entering the
//! confining-field equation of motion.
//!
//! Radii are passed as `x = r / ℓ`. Every public function returns values in
//! physical units (powers of `1/ℓ`); calling them with
//! [`ModelParams::nondimensional`] yields the `ℓ = 1` numbers used by the
//! solvers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this radius the `tanh(x)/x`-type ratios switch to Taylor series.
pub const SERIES_CUTOFF: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("localization scale ell must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("coupling mu = {mu} outside (0, ell^2 = {ell_sq})")]
    CouplingOutOfRange { mu: f64, ell_sq: f64 },
    #[error("{field} mass {mass} gives no real frequency: need mass * ell > 1 (ell = {ell})")]
    NoRealFrequency {
        field: &'static str,
        mass: f64,
        ell: f64,
    },
    #[error("parameter {name} is not finite")]
    NotFinite { name: &'static str },
    #[error("mixture probability {0} outside [0, 1]")]
    InvalidMixture(f64),
}

/// Parameters `(ℓ, μ, η, α, m_c, m_d)` of a detector instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Localization scale ℓ.
    pub ell: f64,
    /// Fluid coupling μ, units length².
    pub mu: f64,
    /// On-shell fluid Lagrangian choice `L = -ρ + 3ηP`.
    pub eta: f64,
    /// Trap strength α (dimensionless).
    pub alpha: f64,
    /// Mass of the confining complex field.
    pub m_c: f64,
    /// Mass of the detector field.
    pub m_d: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            ell: 1.0,
            mu: 0.2,
            eta: 0.0,
            alpha: -6.0,
            m_c: 2.0,
            m_d: 5.0,
        }
    }
}

impl ModelParams {
    /// Checks every invariant: `ℓ > 0`, `0 < μ < ℓ²`, `m_c ℓ > 1`, `m_d ℓ > 1`.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("ell", self.ell),
            ("mu", self.mu),
            ("eta", self.eta),
            ("alpha", self.alpha),
            ("m_c", self.m_c),
            ("m_d", self.m_d),
        ] {
            if !v.is_finite() {
                return Err(ModelError::NotFinite { name });
            }
        }
        if !(self.ell > 0.0) {
            return Err(ModelError::InvalidScale(self.ell));
        }
        let ell_sq = self.ell * self.ell;
        if !(self.mu > 0.0 && self.mu < ell_sq) {
            return Err(ModelError::CouplingOutOfRange { mu: self.mu, ell_sq });
        }
        self.omega_c()?;
        self.omega_d()?;
        Ok(())
    }

    /// `μ / ℓ²`.
    pub fn mu_hat(&self) -> f64 {
        self.mu / (self.ell * self.ell)
    }

    /// The same physical model expressed in units of ℓ.
    pub fn nondimensional(&self) -> Self {
        Self {
            ell: 1.0,
            mu: self.mu_hat(),
            eta: self.eta,
            alpha: self.alpha,
            m_c: self.m_c * self.ell,
            m_d: self.m_d * self.ell,
        }
    }

    fn frequency(&self, field: &'static str, mass: f64) -> Result<f64, ModelError> {
        if !(self.ell > 0.0) {
            return Err(ModelError::InvalidScale(self.ell));
        }
        let sq = mass * mass - 1.0 / (self.ell * self.ell);
        if !(mass * self.ell > 1.0) || !(sq > 0.0) {
            return Err(ModelError::NoRealFrequency {
                field,
                mass,
                ell: self.ell,
            });
        }
        Ok(sq.sqrt())
    }

    /// `ω_c = sqrt(m_c² - 1/ℓ²)`.
    pub fn omega_c(&self) -> Result<f64, ModelError> {
        self.frequency("confining", self.m_c)
    }

    /// `ω_d = sqrt(m_d² - 1/ℓ²)`, frequency of the single bound detector mode.
    pub fn omega_d(&self) -> Result<f64, ModelError> {
        self.frequency("detector", self.m_d)
    }
}

/// State of the detector field the fluid and tensor are built for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DetectorStateLabel {
    Ground,
    Excited,
    /// Diagonal mixture with excited-state probability `p`.
    Mixture(f64),
}

impl DetectorStateLabel {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            Self::Mixture(p) if !(0.0..=1.0).contains(&p) => Err(ModelError::InvalidMixture(p)),
            _ => Ok(()),
        }
    }

    /// Occupation of the bound mode; `⟨:φ²:⟩` is this weight times `2|Φ₁|²`.
    pub fn excitation_weight(&self) -> f64 {
        match *self {
            Self::Ground => 0.0,
            Self::Excited => 1.0,
            Self::Mixture(p) => p,
        }
    }
}

impl std::fmt::Display for DetectorStateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Ground => write!(f, "ground"),
            Self::Excited => write!(f, "excited"),
            Self::Mixture(p) => write!(f, "mixture:{p}"),
        }
    }
}

impl std::str::FromStr for DetectorStateLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "ground" => Ok(Self::Ground),
            "excited" => Ok(Self::Excited),
            _ => {
                let p = s
                    .strip_prefix("mixture:")
                    .ok_or_else(|| format!("unknown state '{s}' (ground, excited, mixture:<p>)"))?;
                let p: f64 = p.parse().map_err(|e| format!("bad mixture probability '{p}': {e}"))?;
                let state = Self::Mixture(p);
                state.validate().map_err(|e| e.to_string())?;
                Ok(state)
            }
        }
    }
}

/// The stationary confining field `ψ_c = e^{-iω_c t} sech(r/ℓ)/ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfiningField {
    pub ell: f64,
    pub omega_c: f64,
    /// Localization eigenvalue `λ_c = 1/ℓ`.
    pub lambda_c: f64,
}

impl ConfiningField {
    pub fn new(params: &ModelParams) -> Result<Self, ModelError> {
        Ok(Self {
            ell: params.ell,
            omega_c: params.omega_c()?,
            lambda_c: 1.0 / params.ell,
        })
    }

    /// `Ψ_c = sech(x)/ℓ`.
    pub fn envelope(&self, x: f64) -> f64 {
        sech(x) / self.ell
    }

    /// `dΨ_c/dr = -sech(x) tanh(x)/ℓ²`.
    pub fn envelope_derivative(&self, x: f64) -> f64 {
        -sech(x) * x.tanh() / (self.ell * self.ell)
    }
}

pub fn sech(x: f64) -> f64 {
    if x.abs() > 700.0 {
        0.0
    } else {
        1.0 / x.cosh()
    }
}

/// `tanh(x)/x`, series below [`SERIES_CUTOFF`].
pub fn tanhc(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    } else {
        x.tanh() / x
    }
}

/// `tanh(x) sech(x) / x`, the shape of the bound detector mode.
pub fn mode_shape(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        let x2 = x * x;
        1.0 - 5.0 / 6.0 * x2 + 61.0 / 120.0 * x2 * x2
    } else {
        x.tanh() * sech(x) / x
    }
}

/// Derivative of [`mode_shape`].
pub fn mode_shape_derivative(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        -5.0 / 3.0 * x + 61.0 / 30.0 * x * x * x
    } else {
        let (s, t) = (sech(x), x.tanh());
        (s * s * s - s * t * t) / x - t * s / (x * x)
    }
}

/// Effective trap for the detector field, `V = α sech²(x)/ℓ²`.
pub fn trap_potential(x: f64, params: &ModelParams) -> f64 {
    params.alpha * sech(x).powi(2) / (params.ell * params.ell)
}

/// `f = -(2/ℓ²) sech²(x) - (2/ℓ²) tanh(x)/x`.
pub fn f_profile(x: f64, params: &ModelParams) -> f64 {
    (-2.0 * sech(x).powi(2) - 2.0 * tanhc(x)) / (params.ell * params.ell)
}

/// `F_c = ∂V_c/∂|ψ_c|² = -2|ψ_c|² = -(2/ℓ²) sech²(x)`.
pub fn f_c_profile(x: f64, params: &ModelParams) -> f64 {
    confining_self_interaction_derivative(sech(x).powi(2) / (params.ell * params.ell))
}

/// Self-interaction `V_c(|ψ|²) = -|ψ|⁴`.
pub fn confining_self_interaction(psi_sq: f64) -> f64 {
    -psi_sq * psi_sq
}

pub fn confining_self_interaction_derivative(psi_sq: f64) -> f64 {
    -2.0 * psi_sq
}

/// `g = ⟨1|:φ_d²:|1⟩ = 2Φ₁² = (3/(4π ℓ³ ω_d)) tanh²(x) sech²(x) / x²`.
pub fn g_excited(x: f64, params: &ModelParams) -> Result<f64, ModelError> {
    let omega_d = params.omega_d()?;
    Ok(3.0 / (4.0 * PI * params.ell.powi(3) * omega_d) * mode_shape(x).powi(2))
}

/// `⟨:φ_d²:⟩` in the given state: the excitation weight times [`g_excited`].
pub fn g_state(x: f64, params: &ModelParams, state: DetectorStateLabel) -> Result<f64, ModelError> {
    let w = state.excitation_weight();
    if w == 0.0 {
        Ok(0.0)
    } else {
        Ok(w * g_excited(x, params)?)
    }
}

/// The closed form `6 csch⁴(2x) sinh⁶(x) / (π r² ω_d ℓ)` evaluated literally.
/// Kept for auditing; it equals `Φ₁²`, half of [`g_excited`].
pub fn g_printed_closed_form(x: f64, params: &ModelParams) -> Result<f64, ModelError> {
    let omega_d = params.omega_d()?;
    let ell = params.ell;
    let ratio_over_x2 = if x < SERIES_CUTOFF {
        // csch⁴(2x) sinh⁶(x) / x² → 1/16
        mode_shape(x).powi(2) / 16.0
    } else if x > 80.0 {
        0.0
    } else {
        x.sinh().powi(6) / (2.0 * x).sinh().powi(4) / (x * x)
    };
    Ok(6.0 * ratio_over_x2 / (PI * ell * ell * omega_d * ell))
}

/// On-shell fluid Lagrangian `L = -(2/(μℓ²)) tanh(x)/x - (α/(2μ)) g(x)`,
/// with `g` the state's `⟨:φ_d²:⟩`.
pub fn fluid_onshell_lagrangian(
    x: f64,
    params: &ModelParams,
    state: DetectorStateLabel,
) -> Result<f64, ModelError> {
    let ground = -2.0 / (params.mu * params.ell * params.ell) * tanhc(x);
    Ok(ground - params.alpha / (2.0 * params.mu) * g_state(x, params, state)?)
}
