//! The perfect-fluid sector.
//!
//! Pressure follows from the static radial conservation requirement
//!
//! ```text
//! (1 - μ|Ψ_c|²) P' - μ (|Ψ_c|²)' P + (f - (α/2) g - F_c) (|Ψ_c|²)' = 0,
//! ```
//!
//! which integrates to `(1 - μ̂ sech²x) P = ∫_x^∞ G_tot` with `P → 0` at
//! infinity. Energy density follows from the on-shell Lagrangian,
//! `ρ = 3ηP - L`. All profiles here are nondimensional: radii in units of ℓ,
//! `P` and `ρ` multiplied by ℓ⁴.

use serde::Serialize;
use thiserror::Error;

use crate::profiles::{
    fluid_onshell_lagrangian, g_state, sech, tanhc, DetectorStateLabel, ModelError, ModelParams,
};
use crate::quadcore::{bisect_root, integrate, integrate_tail, QuadError};

/// `G_tot` decays like `e^{-2x}`.
const SOURCE_DECAY: f64 = 0.5;
const PRESSURE_REL_TOL: f64 = 1e-12;
/// Start of the backward pressure integration.
pub const ODE_START: f64 = 30.0;
pub const ODE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluidError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] QuadError),
    #[error("mu = {mu} >= ell^2 = {ell_sq}: pressure divergent at r = {radius}")]
    PressureDivergent { mu: f64, ell_sq: f64, radius: f64 },
    #[error("mu = {mu} <= 0 gives a negative large-distance energy density")]
    NonPositiveCoupling { mu: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Static perfect-fluid profiles on a radial grid. The four-velocity is the
/// static frame `u = ∂_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluidSolution {
    pub params: ModelParams,
    pub state: DetectorStateLabel,
    /// Radii in units of ℓ, ascending.
    pub grid: Vec<f64>,
    /// ℓ⁴ P.
    pub pressure: Vec<f64>,
    /// ℓ⁴ ρ.
    pub density: Vec<f64>,
    /// P/ρ.
    pub w: Vec<f64>,
}

impl FluidSolution {
    /// Pressure by quadrature, then density and equation of state.
    pub fn solve(params: &ModelParams, state: DetectorStateLabel, grid: &[f64]) -> Result<Self, FluidError> {
        let pressure = pressure_quadrature(params, state, grid)?;
        let density = density(params, state, grid, &pressure)?;
        let w = eos_w(&density, &pressure);
        Ok(Self {
            params: *params,
            state,
            grid: grid.to_vec(),
            pressure,
            density,
            w,
        })
    }

    pub fn margins(&self) -> EnergyConditionMargins {
        energy_condition_margins(&self.grid, &self.density, &self.pressure)
    }

    /// `E(x) = 4π ∫ ρ x'² dx'` from the first grid point, trapezoid rule
    /// (units 1/ℓ). Grows without bound because ρ has a `1/x` tail.
    pub fn enclosed_energy(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.grid.len());
        out.push(0.0);
        for i in 1..self.grid.len() {
            let (x0, x1) = (self.grid[i - 1], self.grid[i]);
            let f0 = self.density[i - 1] * x0 * x0;
            let f1 = self.density[i] * x1 * x1;
            acc += 0.5 * (f0 + f1) * (x1 - x0) * 4.0 * std::f64::consts::PI;
            out.push(acc);
        }
        out
    }
}

/// Uniform grid of `points` radii on `[x_min, x_max]`.
pub fn uniform_grid(x_min: f64, x_max: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![x_min];
    }
    let h = (x_max - x_min) / (points - 1) as f64;
    (0..points).map(|i| x_min + i as f64 * h).collect()
}

/// 600 points on `[1e-3, 12]`.
pub fn default_grid() -> Vec<f64> {
    uniform_grid(1e-3, 12.0, 600)
}

fn check_grid(grid: &[f64]) -> Result<(), FluidError> {
    if grid.is_empty() {
        return Err(FluidError::InvalidGrid("empty".into()));
    }
    if grid.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(FluidError::InvalidGrid("radii must be finite and non-negative".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FluidError::InvalidGrid("radii must be strictly ascending".into()));
    }
    Ok(())
}

/// Rejects `μ ∉ (0, ℓ²)`.
pub fn check_coupling(params: &ModelParams) -> Result<(), FluidError> {
    let ell_sq = params.ell * params.ell;
    if !(params.mu > 0.0) {
        return Err(FluidError::NonPositiveCoupling { mu: params.mu });
    }
    if params.mu >= ell_sq {
        // pole of 1/(1 - (μ/ℓ²) sech²(r/ℓ))
        let y: f64 = (ell_sq / params.mu).sqrt();
        let radius = params.ell * ((1.0 + (1.0 - y * y).max(0.0).sqrt()) / y).ln();
        return Err(FluidError::PressureDivergent {
            mu: params.mu,
            ell_sq,
            radius,
        });
    }
    Ok(())
}

/// Nondimensional source `G_tot = 4 sech²x tanh²x / x + α ĝ sech²x tanh x`,
/// where `ĝ = ℓ² ⟨:φ_d²:⟩` for the state.
pub fn source_g(x: f64, params: &ModelParams, state: DetectorStateLabel) -> Result<f64, FluidError> {
    let nd = params.nondimensional();
    let (s2, t) = (sech(x).powi(2), x.tanh());
    let ground = 4.0 * s2 * t * tanhc(x);
    let w = state.excitation_weight();
    if w == 0.0 {
        return Ok(ground);
    }
    Ok(ground + nd.alpha * g_state(x, &nd, state)? * s2 * t)
}

fn source_fn(params: &ModelParams, state: DetectorStateLabel) -> Result<impl Fn(f64) -> f64, FluidError> {
    // surface ω_d errors before handing out an infallible closure
    source_g(1.0, params, state)?;
    let params = *params;
    Ok(move |x: f64| source_g(x, &params, state).unwrap_or(f64::NAN))
}

/// `∫_x^∞ G_tot` (nondimensional).
pub fn source_tail_integral(params: &ModelParams, state: DetectorStateLabel, x: f64) -> Result<f64, FluidError> {
    let g = source_fn(params, state)?;
    Ok(integrate_tail(&g, x, SOURCE_DECAY, PRESSURE_REL_TOL)?.value)
}

/// Pressure at a single radius, `ℓ⁴ P(x) = ∫_x^∞ G_tot / (1 - μ̂ sech²x)`.
pub fn pressure_at(params: &ModelParams, state: DetectorStateLabel, x: f64) -> Result<f64, FluidError> {
    check_coupling(params)?;
    let q = source_tail_integral(params, state, x)?;
    Ok(q / (1.0 - params.mu_hat() * sech(x).powi(2)))
}

/// `ℓ⁴ P(0)`; for the ground state this is `g0 / (1 - μ̂)`.
pub fn central_pressure(params: &ModelParams, state: DetectorStateLabel) -> Result<f64, FluidError> {
    pressure_at(params, state, 0.0)
}

/// Pressure on the grid from cumulative quadrature of the source.
pub fn pressure_quadrature(
    params: &ModelParams,
    state: DetectorStateLabel,
    grid: &[f64],
) -> Result<Vec<f64>, FluidError> {
    check_coupling(params)?;
    check_grid(grid)?;
    let g = source_fn(params, state)?;
    let n = grid.len();
    let mut tail = vec![0.0; n];
    tail[n - 1] = integrate_tail(&g, grid[n - 1], SOURCE_DECAY, PRESSURE_REL_TOL)?.value;
    for i in (0..n - 1).rev() {
        let piece = integrate(&g, grid[i], grid[i + 1], PRESSURE_REL_TOL, 1e-18)?.value;
        tail[i] = tail[i + 1] + piece;
    }
    let mu_hat = params.mu_hat();
    Ok(grid
        .iter()
        .zip(&tail)
        .map(|(x, q)| q / (1.0 - mu_hat * sech(*x).powi(2)))
        .collect())
}

/// Right-hand side of the pressure equation solved for `P'`.
fn pressure_slope(params: &ModelParams, state: DetectorStateLabel) -> Result<impl Fn(f64, f64) -> f64, FluidError> {
    let nd = params.nondimensional();
    g_state(1.0, &nd, state)?;
    let mu_hat = nd.mu;
    let half_alpha = 0.5 * nd.alpha;
    Ok(move |x: f64, p: f64| {
        let s2 = sech(x).powi(2);
        let dpsi2 = -2.0 * s2 * x.tanh();
        // μL = f - (α/2) g - F_c
        let mu_l = -2.0 * tanhc(x) - half_alpha * g_state(x, &nd, state).unwrap_or(f64::NAN);
        (mu_hat * dpsi2 * p - mu_l * dpsi2) / (1.0 - mu_hat * s2)
    })
}

/// Pressure by backward RK4 integration of the pressure equation from
/// `x = 30` with `P = 0`, fixed step `1e-3`, landing exactly on grid points.
pub fn pressure_ode(params: &ModelParams, state: DetectorStateLabel, grid: &[f64]) -> Result<Vec<f64>, FluidError> {
    check_coupling(params)?;
    check_grid(grid)?;
    let slope = pressure_slope(params, state)?;
    let mut out = vec![0.0; grid.len()];
    let mut x = ODE_START.max(*grid.last().unwrap());
    let mut p = 0.0;
    for (i, &target) in grid.iter().enumerate().rev() {
        while x > target {
            let h = (x - target).min(ODE_STEP);
            let k1 = slope(x, p);
            let k2 = slope(x - 0.5 * h, p - 0.5 * h * k1);
            let k3 = slope(x - 0.5 * h, p - 0.5 * h * k2);
            let k4 = slope(x - h, p - h * k3);
            p -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            x -= h;
            if (x - target).abs() < 1e-14 {
                x = target;
            }
        }
        out[i] = p;
    }
    Ok(out)
}

/// Residual of the pressure equation `(1-μ̂s²)P' + 2μ̂s²t P - μL̂·2s²t` given
/// a pressure value and slope at `x` (nondimensional).
pub fn pressure_equation_residual(
    params: &ModelParams,
    state: DetectorStateLabel,
    x: f64,
    pressure: f64,
    slope: f64,
) -> Result<f64, FluidError> {
    let nd = params.nondimensional();
    let s2 = sech(x).powi(2);
    let dpsi2 = -2.0 * s2 * x.tanh();
    let mu_l = -2.0 * tanhc(x) - 0.5 * nd.alpha * g_state(x, &nd, state)?;
    Ok((1.0 - nd.mu * s2) * slope - nd.mu * dpsi2 * pressure + mu_l * dpsi2)
}

/// `ℓ⁴ ρ = 3η ℓ⁴P - ℓ⁴ L`.
pub fn density(
    params: &ModelParams,
    state: DetectorStateLabel,
    grid: &[f64],
    pressure: &[f64],
) -> Result<Vec<f64>, FluidError> {
    if grid.len() != pressure.len() {
        return Err(FluidError::InvalidGrid("pressure and grid lengths differ".into()));
    }
    if !(params.mu > 0.0) {
        return Err(FluidError::NonPositiveCoupling { mu: params.mu });
    }
    let nd = params.nondimensional();
    grid.iter()
        .zip(pressure)
        .map(|(&x, &p)| Ok(3.0 * nd.eta * p - fluid_onshell_lagrangian(x, &nd, state)?))
        .collect()
}

pub fn eos_w(density: &[f64], pressure: &[f64]) -> Vec<f64> {
    density.iter().zip(pressure).map(|(r, p)| p / r).collect()
}

/// Grid minima of the isotropic-fluid energy-condition combinations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyConditionMargins {
    pub min_rho_plus_p: f64,
    pub min_rho_plus_3p: f64,
    pub min_rho_minus_abs_p: f64,
    /// Radius where `ρ - |P|` is smallest.
    pub argmin_rho_minus_abs_p: f64,
}

impl EnergyConditionMargins {
    /// All three positive: null, weak, strong and dominant conditions hold.
    pub fn all_positive(&self) -> bool {
        self.min_rho_plus_p > 0.0 && self.min_rho_plus_3p > 0.0 && self.min_rho_minus_abs_p > 0.0
    }
}

pub fn energy_condition_margins(grid: &[f64], density: &[f64], pressure: &[f64]) -> EnergyConditionMargins {
    let mut m = EnergyConditionMargins {
        min_rho_plus_p: f64::INFINITY,
        min_rho_plus_3p: f64::INFINITY,
        min_rho_minus_abs_p: f64::INFINITY,
        argmin_rho_minus_abs_p: f64::NAN,
    };
    for ((&x, &r), &p) in grid.iter().zip(density).zip(pressure) {
        m.min_rho_plus_p = m.min_rho_plus_p.min(r + p);
        m.min_rho_plus_3p = m.min_rho_plus_3p.min(r + 3.0 * p);
        let d = r - p.abs();
        if d < m.min_rho_minus_abs_p {
            m.min_rho_minus_abs_p = d;
            m.argmin_rho_minus_abs_p = x;
        }
    }
    m
}

/// Upper bound on μ for `ρ - |P| > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuThreshold {
    /// μ* in units of length² (ℓ² when unconstrained).
    pub value: f64,
    /// Set for η > 1/3, where the dominant condition adds no constraint.
    pub unconstrained: bool,
}

const ETA_CRITICAL: f64 = 1.0 / 3.0;

/// Closed form `μ* = ℓ² / (1 + (1 - 3η) g0 / 2)`.
pub fn mu_star_closed_form(eta: f64, ell: f64) -> MuThreshold {
    let ell_sq = ell * ell;
    if eta >= ETA_CRITICAL - 1e-12 {
        return MuThreshold {
            value: ell_sq,
            unconstrained: eta > ETA_CRITICAL,
        };
    }
    MuThreshold {
        value: ell_sq / (1.0 + (1.0 - 3.0 * eta) * crate::quadcore::g0_constant() / 2.0),
        unconstrained: false,
    }
}

/// μ* as the root of `(3η - 1) P(0; μ) + 2/μ` by bisection, with `P(0)` from
/// the pressure quadrature.
pub fn mu_star(eta: f64, ell: f64) -> Result<MuThreshold, FluidError> {
    let ell_sq = ell * ell;
    if eta >= ETA_CRITICAL - 1e-12 {
        return Ok(MuThreshold {
            value: ell_sq,
            unconstrained: eta > ETA_CRITICAL,
        });
    }
    let probe = ModelParams { ell: 1.0, mu: 0.5, eta, ..Default::default() };
    let q0 = source_tail_integral(&probe, DetectorStateLabel::Ground, 0.0)?;
    let margin = |mu_hat: f64| (3.0 * eta - 1.0) * q0 / (1.0 - mu_hat) + 2.0 / mu_hat;
    let root = bisect_root(margin, 1e-6, 1.0 - 1e-12, 1e-14)?;
    Ok(MuThreshold {
        value: root * ell_sq,
        unconstrained: false,
    })
}

/// μ* as the sign change of the grid minimum of `ρ - |P|` computed by the
/// full fluid solve; `None` when the margin stays positive on `(0, ℓ²)`.
pub fn mu_star_from_margins(eta: f64, ell: f64, grid: &[f64], tol: f64) -> Result<Option<f64>, FluidError> {
    let ell_sq = ell * ell;
    let margin = |mu_hat: f64| -> Result<f64, FluidError> {
        let p = ModelParams { ell, mu: mu_hat * ell_sq, eta, ..Default::default() };
        Ok(FluidSolution::solve(&p, DetectorStateLabel::Ground, grid)?.margins().min_rho_minus_abs_p)
    };
    let (lo, hi) = (1e-3, 1.0 - 1e-6);
    if margin(lo)? * margin(hi)? >= 0.0 {
        return Ok(None);
    }
    let failure = std::cell::RefCell::new(None);
    let root = bisect_root(
        |m| match margin(m) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        tol,
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(Some(root * ell_sq)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadcore::{derivative, g0_constant};

    const GROUND: DetectorStateLabel = DetectorStateLabel::Ground;

    fn params(mu: f64, eta: f64) -> ModelParams {
        ModelParams { mu, eta, ..Default::default() }
    }

    #[test]
    fn source_examples() {
        let p = params(0.2, 0.0);
        let total = source_tail_integral(&p, GROUND, 0.0).unwrap();
        assert!((total - 1.53971).abs() < 1e-5);
        for x in [1e-4, 5e-4, 2e-3] {
            let g = source_g(x, &p, GROUND).unwrap();
            assert!((g - 4.0 * x).abs() < 10.0 * x.powi(3));
        }
        let no_trap = ModelParams { alpha: 0.0, ..p };
        for x in [0.1, 1.0, 3.0] {
            assert_eq!(
                source_g(x, &no_trap, DetectorStateLabel::Excited).unwrap(),
                source_g(x, &no_trap, GROUND).unwrap()
            );
        }
    }

    #[test]
    fn central_pressure_closed_form() {
        let p = params(0.2, 0.0);
        let grid = [1e-9, 1.0];
        let pq = pressure_quadrature(&p, GROUND, &grid).unwrap();
        assert!((pq[0] - 1.92464).abs() < 1e-5, "{}", pq[0]);
        assert!((pq[0] - g0_constant() / 0.8).abs() < 1e-9);
        let tiny = params(1e-9, 0.0);
        assert!((central_pressure(&tiny, GROUND).unwrap() - g0_constant()).abs() < 1e-8);
        let far = pressure_at(&p, GROUND, 40.0).unwrap();
        assert!(far.abs() < 1e-30);
    }

    #[test]
    fn coupling_errors() {
        let grid = default_grid();
        let err = pressure_quadrature(&params(1.5, 0.0), GROUND, &grid).unwrap_err();
        match err {
            FluidError::PressureDivergent { radius, .. } => {
                assert!((1.0 - 1.5 * sech(radius).powi(2)).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            pressure_ode(&params(-0.1, 0.0), GROUND, &grid),
            Err(FluidError::NonPositiveCoupling { .. })
        ));
        assert!(matches!(
            pressure_quadrature(&params(0.2, 0.0), GROUND, &[1.0, 0.5]),
            Err(FluidError::InvalidGrid(_))
        ));
    }

    #[test]
    fn dual_path_pressure_ground() {
        let p = params(0.2, 0.0);
        let grid = default_grid();
        let a = pressure_quadrature(&p, GROUND, &grid).unwrap();
        let b = pressure_ode(&p, GROUND, &grid).unwrap();
        let worst = a.iter().zip(&b).map(|(x, y)| ((x - y) / x).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn substitution_residual_of_quadrature_pressure() {
        let p = params(0.2, 0.0);
        for i in 0..60 {
            let x = 0.01 + i as f64 * 0.2;
            let pv = pressure_at(&p, GROUND, x).unwrap();
            let slope = derivative(|y| pressure_at(&p, GROUND, y).unwrap(), x, 1, 1e-3);
            let r = pressure_equation_residual(&p, GROUND, x, pv, slope).unwrap();
            assert!(r.abs() < 1e-8, "x={x}: {r}");
        }
    }

    #[test]
    fn density_examples() {
        let grid = [1e-9, 0.5, 2.0, 200.0];
        let p0 = params(0.2, 0.0);
        let sol0 = FluidSolution::solve(&p0, GROUND, &grid).unwrap();
        assert!((sol0.density[0] - 10.0).abs() < 1e-8);
        let p1 = params(0.2, 1.0);
        let sol1 = FluidSolution::solve(&p1, GROUND, &grid).unwrap();
        assert!((sol1.density[0] - 15.7739).abs() < 1e-4, "{}", sol1.density[0]);
        // 1/x tail with coefficient 2/μ̂
        assert!((sol0.density[3] * 200.0 - 10.0).abs() < 1e-9);
        assert!((sol0.w[0] - 0.19246).abs() < 1e-5);
    }

    #[test]
    fn equation_of_state_identity() {
        let grid = default_grid();
        for state in [GROUND, DetectorStateLabel::Excited] {
            for eta in [0.0, 1.0] {
                let p = params(0.2, eta);
                let sol = FluidSolution::solve(&p, state, &grid).unwrap();
                let nd = p.nondimensional();
                for ((&x, &r), &pr) in grid.iter().zip(&sol.density).zip(&sol.pressure) {
                    let l = fluid_onshell_lagrangian(x, &nd, state).unwrap();
                    assert!((-r + 3.0 * eta * pr - l).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ground_pressure_positive_and_decreasing() {
        for mu in [0.05, 0.2, 0.5, 0.9] {
            let sol = FluidSolution::solve(&params(mu, 0.0), GROUND, &default_grid()).unwrap();
            assert!(sol.pressure.iter().all(|p| *p > 0.0));
            assert!(sol.pressure.windows(2).all(|w| w[1] < w[0]));
            assert!(sol.density.iter().all(|r| *r > 0.0));
        }
    }

    #[test]
    fn energy_conditions_reference_parameters() {
        for eta in [0.0, 1.0] {
            let sol = FluidSolution::solve(&params(0.2, eta), GROUND, &default_grid()).unwrap();
            assert!(sol.margins().all_positive());
            assert!(sol.w.iter().all(|w| *w > 0.0 && *w < 1.0 / 3.0));
        }
        let sol = FluidSolution::solve(&params(0.9, 0.0), GROUND, &default_grid()).unwrap();
        let m = sol.margins();
        assert!(m.min_rho_minus_abs_p < 0.0);
        assert_eq!(m.argmin_rho_minus_abs_p, 1e-3);
    }

    #[test]
    fn w_vanishes_far_away() {
        let sol = FluidSolution::solve(&params(0.2, 0.0), GROUND, &[0.5, 12.0, 20.0]).unwrap();
        assert!(sol.w[2] < 1e-12 && sol.w[2] < sol.w[1]);
    }

    #[test]
    fn threshold_paths() {
        let closed = mu_star_closed_form(0.0, 1.0);
        let bis = mu_star(0.0, 1.0).unwrap();
        assert!((closed.value - 0.565017).abs() < 1e-6);
        assert!(((bis.value - closed.value) / closed.value).abs() < 1e-6);
        assert_eq!(mu_star(1.0 / 3.0, 2.0).unwrap(), MuThreshold { value: 4.0, unconstrained: false });
        assert!(mu_star(1.0, 1.0).unwrap().unconstrained);
        assert!(mu_star_closed_form(1.0, 1.0).unconstrained);
    }

    #[test]
    fn threshold_consistency_around_mu_star() {
        let star = mu_star(0.0, 1.0).unwrap().value;
        let grid = default_grid();
        let below = FluidSolution::solve(&params(star - 1e-3, 0.0), GROUND, &grid).unwrap();
        let above = FluidSolution::solve(&params(star + 1e-3, 0.0), GROUND, &grid).unwrap();
        assert!(below.margins().min_rho_minus_abs_p > 0.0);
        assert!(above.margins().min_rho_minus_abs_p < 0.0);
    }

    #[test]
    fn enclosed_energy_grows() {
        let sol = FluidSolution::solve(&params(0.2, 0.0), GROUND, &default_grid()).unwrap();
        let e = sol.enclosed_energy();
        assert!(e.windows(2).all(|w| w[1] > w[0]));
    }
}
