//! Bound states of the confined detector field.
//!
//! The radial equation `u'' = (V + l(l+1)/x² - λ) u` is shot from both ends
//! with a fixed-step RK4 integrator: outward from the regular series at the
//! origin and inward from exponential decay at `x_max`. Eigenvalues are the
//! zeros of the normalized Wronskian of the two solutions at the matching
//! point, located by a coarse scan in `λ` followed by bisection. A Sturm node
//! count of the regular solution just below threshold cross-checks that no
//! level was skipped.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::profiles::{mode_shape, mode_shape_derivative, ModelError, ModelParams};
use crate::quadcore::{bisect_root, QuadError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] QuadError),
    #[error("found {found} bound states but the node count below threshold implies {expected}; a level was missed (refine scan_step or enlarge x_max)")]
    BracketExhausted { found: usize, expected: usize },
    #[error("unstable mode out of scope: eigenvalue {eigenvalue} <= -m^2 = {neg_mass_sq}")]
    UnstableMode { eigenvalue: f64, neg_mass_sq: f64 },
    #[error("invalid shooting configuration: {0}")]
    InvalidConfig(String),
}

/// Controls for [`shoot_bound_states`]. Lengths are in the potential's units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingConfig {
    pub x_max: f64,
    pub step: f64,
    pub match_point: f64,
    /// Coarse scan spacing in `λ`.
    pub scan_step: f64,
    /// Bisection tolerance on `λ`.
    pub tol: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            x_max: 25.0,
            step: 1e-3,
            match_point: 1.0,
            scan_step: 0.05,
            tol: 1e-12,
        }
    }
}

/// A discrete, Klein-Gordon normalized eigenmode.
///
/// The mode function is `Φ(x) √(4π) Y_lm`, so for `l = 0` the profile is the
/// full spherically symmetric mode and `2ω ∫|Φ|² d³x = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundMode {
    pub l: u32,
    pub eigenvalue: f64,
    pub omega: f64,
    pub nodes: usize,
    step: f64,
    /// `u = xΦ` and `u'` on the uniform grid `i * step`.
    u: Vec<f64>,
    du: Vec<f64>,
}

impl BoundMode {
    pub fn x_max(&self) -> f64 {
        self.step * (self.u.len() - 1) as f64
    }

    /// Cubic Hermite interpolation of `u(x) = xΦ(x)`; zero beyond the grid.
    pub fn radial_u(&self, x: f64) -> f64 {
        self.hermite(x).0
    }

    /// `Φ(x) = u(x)/x`.
    pub fn profile(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return if self.l == 0 { self.du[0] } else { 0.0 };
        }
        self.hermite(x).0 / x
    }

    pub fn profile_derivative(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let (u, du) = self.hermite(x);
        (du - u / x) / x
    }

    /// `2ω · 4π ∫ u² dx` by Simpson's rule on the stored grid.
    pub fn kg_norm(&self) -> f64 {
        2.0 * self.omega * 4.0 * PI * simpson(&self.u.iter().map(|v| v * v).collect::<Vec<_>>(), self.step)
    }

    fn hermite(&self, x: f64) -> (f64, f64) {
        let n = self.u.len();
        if x < 0.0 || x >= self.x_max() {
            return (0.0, 0.0);
        }
        let h = self.step;
        let i = ((x / h) as usize).min(n - 2);
        let t = (x - i as f64 * h) / h;
        let (p0, p1) = (self.u[i], self.u[i + 1]);
        let (m0, m1) = (self.du[i] * h, self.du[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        let slope = ((6.0 * t2 - 6.0 * t) * p0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * p1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        (value, slope)
    }
}

fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 3 {
        return values.iter().sum::<f64>() * h;
    }
    // Simpson on an even number of intervals, trapezoid on a leftover one
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    let mut sum = values[0] + values[even];
    for (i, v) in values.iter().enumerate().take(even).skip(1) {
        sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let mut total = sum * h / 3.0;
    if even < intervals {
        total += 0.5 * h * (values[even] + values[even + 1]);
    }
    total
}

struct Shooter<'a, V: Fn(f64) -> f64> {
    potential: &'a V,
    centrifugal: f64,
    config: ShootingConfig,
    n_steps: usize,
    match_index: usize,
}

/// One RK4 step of `(u, u')` for `u'' = q(x) u`.
fn rk4_step<Q: Fn(f64) -> f64>(q: &Q, x: f64, u: f64, du: f64, h: f64) -> (f64, f64) {
    let (q0, qm, q1) = (q(x), q(x + 0.5 * h), q(x + h));
    let k1u = du;
    let k1v = q0 * u;
    let k2u = du + 0.5 * h * k1v;
    let k2v = qm * (u + 0.5 * h * k1u);
    let k3u = du + 0.5 * h * k2v;
    let k3v = qm * (u + 0.5 * h * k2u);
    let k4u = du + h * k3v;
    let k4v = q1 * (u + h * k3u);
    (
        u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        du + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

const RESCALE_LIMIT: f64 = 1e150;

impl<'a, V: Fn(f64) -> f64> Shooter<'a, V> {
    fn new(potential: &'a V, l: u32, config: ShootingConfig) -> Result<Self, ModeError> {
        let ShootingConfig { x_max, step, match_point, scan_step, tol } = config;
        if !(step > 0.0 && x_max > match_point && match_point > step && scan_step > 0.0 && tol > 0.0) {
            return Err(ModeError::InvalidConfig(format!("{config:?}")));
        }
        let n_steps = (x_max / step).round() as usize;
        let match_index = (match_point / step).round() as usize;
        Ok(Self {
            potential,
            centrifugal: (l * (l + 1)) as f64,
            config,
            n_steps,
            match_index,
        })
    }

    fn q(&self, lambda: f64) -> impl Fn(f64) -> f64 + '_ {
        move |x: f64| (self.potential)(x) + self.centrifugal / (x * x) - lambda
    }

    fn start_index(&self) -> usize {
        (10 * self.centrifugal as usize).max(1)
    }

    /// Regular solution from the origin up to grid index `end`, with the
    /// rescaling-free values stored per node.
    fn outward(&self, lambda: f64, end: usize) -> (Vec<f64>, Vec<f64>) {
        let h = self.config.step;
        let l = ((1.0 + 4.0 * self.centrifugal).sqrt() - 1.0) / 2.0;
        let c = ((self.potential)(0.0) - lambda) / (2.0 * (2.0 * l + 3.0));
        let series = |x: f64| (x.powf(l + 1.0) * (1.0 + c * x * x), (l + 1.0) * x.powf(l) + (l + 3.0) * c * x.powf(l + 2.0));
        let start = self.start_index().min(end);
        let mut u = Vec::with_capacity(end + 1);
        let mut du = Vec::with_capacity(end + 1);
        for i in 0..=start {
            let (a, b) = series(i as f64 * h);
            u.push(a);
            du.push(if i == 0 && l > 0.0 { 0.0 } else { b });
        }
        let q = self.q(lambda);
        for i in start..end {
            let (a, b) = rk4_step(&q, i as f64 * h, u[i], du[i], h);
            u.push(a);
            du.push(b);
            if a.abs() > RESCALE_LIMIT {
                u.iter_mut().for_each(|v| *v /= RESCALE_LIMIT);
                du.iter_mut().for_each(|v| *v /= RESCALE_LIMIT);
            }
        }
        (u, du)
    }

    /// Decaying solution from `x_max` inward to grid index `end`; returned in
    /// ascending grid order.
    fn inward(&self, lambda: f64, end: usize) -> (Vec<f64>, Vec<f64>) {
        let h = self.config.step;
        let kappa = (-lambda).max(0.0).sqrt();
        let q = self.q(lambda);
        let mut u = vec![1e-30];
        let mut du = vec![-kappa * 1e-30];
        let mut i = self.n_steps;
        while i > end {
            let (a, b) = rk4_step(&q, i as f64 * h, *u.last().unwrap(), *du.last().unwrap(), -h);
            u.push(a);
            du.push(b);
            if a.abs() > RESCALE_LIMIT {
                u.iter_mut().for_each(|v| *v /= RESCALE_LIMIT);
                du.iter_mut().for_each(|v| *v /= RESCALE_LIMIT);
            }
            i -= 1;
        }
        u.reverse();
        du.reverse();
        (u, du)
    }

    /// Normalized Wronskian of the two solutions at the matching point.
    fn mismatch(&self, lambda: f64) -> f64 {
        let (uo, duo) = self.outward(lambda, self.match_index);
        let (ui, dui) = self.inward(lambda, self.match_index);
        let (a, da) = (*uo.last().unwrap(), *duo.last().unwrap());
        let (b, db) = (ui[0], dui[0]);
        (da * b - a * db) / ((a * a + da * da).sqrt() * (b * b + db * db).sqrt())
    }

    fn nodes_below_threshold(&self, lambda: f64) -> usize {
        let (u, _) = self.outward(lambda, self.n_steps);
        count_nodes(&u)
    }

    fn build_mode(&self, lambda: f64, l: u32, mass: f64) -> BoundMode {
        let (mut u, mut du) = self.outward(lambda, self.match_index);
        let (ui, dui) = self.inward(lambda, self.match_index);
        let scale = u[self.match_index] / ui[0];
        u.extend(ui.iter().skip(1).map(|v| v * scale));
        du.extend(dui.iter().skip(1).map(|v| v * scale));
        let omega = (mass * mass + lambda).sqrt();
        let mut mode = BoundMode {
            l,
            eigenvalue: lambda,
            omega,
            nodes: count_nodes(&u),
            step: self.config.step,
            u,
            du,
        };
        let norm = mode.kg_norm();
        let sign = if mode.du[..=self.start_index()].iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        let factor = sign / norm.sqrt();
        mode.u.iter_mut().for_each(|v| *v *= factor);
        mode.du.iter_mut().for_each(|v| *v *= factor);
        mode
    }
}

fn count_nodes(u: &[f64]) -> usize {
    let peak = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = peak * 1e-10;
    let mut nodes = 0;
    let mut last_sign = 0.0;
    for v in u.iter().skip(1) {
        if v.abs() <= floor {
            continue;
        }
        let s = v.signum();
        if last_sign != 0.0 && s != last_sign {
            nodes += 1;
        }
        last_sign = s;
    }
    nodes
}

/// All bound states of `-∇² + V` with angular momentum `l` and eigenvalue in
/// `(min V, 0)`, sorted ascending and Klein-Gordon normalized for the given
/// field `mass`.
///
/// `potential` must vanish at large `x` and be bounded below; its minimum is
/// located on the integration grid.
pub fn shoot_bound_states<V: Fn(f64) -> f64>(
    potential: V,
    mass: f64,
    l: u32,
    config: ShootingConfig,
) -> Result<Vec<BoundMode>, ModeError> {
    let shooter = Shooter::new(&potential, l, config)?;
    let v_min = (0..=shooter.n_steps)
        .map(|i| potential(i as f64 * config.step))
        .fold(f64::INFINITY, f64::min);
    let upper = -config.scan_step * 1e-2;
    if !(v_min < upper) {
        return Ok(Vec::new());
    }
    let lower = v_min + 1e-9;

    let mut grid = Vec::new();
    let mut lambda = lower;
    while lambda < upper {
        grid.push(lambda);
        lambda += config.scan_step;
    }
    grid.push(upper);

    let mut modes = Vec::new();
    let mut prev = (grid[0], shooter.mismatch(grid[0]));
    for &lambda in &grid[1..] {
        let m = shooter.mismatch(lambda);
        if m == 0.0 || m * prev.1 < 0.0 {
            let root = bisect_root(|e| shooter.mismatch(e), prev.0, lambda, config.tol)?;
            if root <= -mass * mass {
                return Err(ModeError::UnstableMode {
                    eigenvalue: root,
                    neg_mass_sq: -mass * mass,
                });
            }
            modes.push(shooter.build_mode(root, l, mass));
        }
        prev = (lambda, m);
    }

    let expected = shooter.nodes_below_threshold(upper);
    if expected != modes.len() {
        return Err(ModeError::BracketExhausted {
            found: modes.len(),
            expected,
        });
    }
    Ok(modes)
}

/// The single bound mode of `-∇² - (6/ℓ²) sech²(r/ℓ)` in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticMode {
    pub ell: f64,
    pub omega: f64,
    /// `μ₁ = -1/ℓ²`.
    pub eigenvalue: f64,
    amplitude: f64,
}

impl AnalyticMode {
    pub fn new(params: &ModelParams) -> Result<Self, ModelError> {
        let omega = params.omega_d()?;
        let ell = params.ell;
        Ok(Self {
            ell,
            omega,
            eigenvalue: -1.0 / (ell * ell),
            amplitude: (3.0 / (8.0 * PI * ell * omega)).sqrt() / ell,
        })
    }

    /// `Φ₁ = sqrt(3/(8πℓω_d)) tanh(r/ℓ)/(r cosh(r/ℓ))` at `x = r/ℓ`.
    pub fn phi(&self, x: f64) -> f64 {
        self.amplitude * mode_shape(x)
    }

    /// `dΦ₁/dr` at `x = r/ℓ`.
    pub fn phi_derivative(&self, x: f64) -> f64 {
        self.amplitude * mode_shape_derivative(x) / self.ell
    }

    /// `Φ₁(0⁺) = sqrt(3/(8πℓ³ω_d))`.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
}

pub fn analytic_phi1(x: f64, params: &ModelParams) -> Result<f64, ModelError> {
    Ok(AnalyticMode::new(params)?.phi(x))
}

/// Spacetime smearing `Λ = exp(-t²/(2T²)) Φ₁(r)`.
pub fn smearing_function(t: f64, x: f64, params: &ModelParams, t_switch: f64) -> Result<f64, ModeError> {
    if !(t_switch > 0.0) {
        return Err(ModeError::InvalidConfig(format!("switching width must be positive, got {t_switch}")));
    }
    Ok(switching(t, t_switch) * analytic_phi1(x, params)?)
}

/// Gaussian switching `ζ(t) = exp(-t²/(2T²))`.
pub fn switching(t: f64, t_switch: f64) -> f64 {
    (-t * t / (2.0 * t_switch * t_switch)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::sech;
    use crate::quadcore::{derivative, integrate, integrate_tail};

    fn pt(alpha: f64) -> impl Fn(f64) -> f64 {
        move |x: f64| alpha * sech(x).powi(2)
    }

    #[test]
    fn analytic_mode_limits_and_norm() {
        let p = ModelParams { ell: 1.3, m_d: 4.0, ..Default::default() };
        let mode = AnalyticMode::new(&p).unwrap();
        let expected = (3.0 / (8.0 * PI * p.ell.powi(3) * mode.omega)).sqrt();
        assert!((mode.phi(1e-9) - expected).abs() < 1e-12);
        // 2ω ∫ Φ² d³x = 2ω 4π ℓ³ ∫ Φ(x)² x² dx
        let radial = integrate_tail(|x| (mode.phi(x) * x).powi(2), 0.0, 0.5, 1e-13).unwrap().value;
        let norm = 2.0 * mode.omega * 4.0 * PI * p.ell.powi(3) * radial;
        assert!((norm - 1.0).abs() < 1e-10, "{norm}");
        // the same through ∫ tanh² sech² = 1/3
        let t = integrate_tail(|x| (x.tanh() * sech(x)).powi(2), 0.0, 0.5, 1e-13).unwrap().value;
        assert!((t - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_mode_requires_stable_frequency() {
        let p = ModelParams { ell: 1.0, m_d: 1.0, ..Default::default() };
        assert!(analytic_phi1(0.5, &p).is_err());
    }

    #[test]
    fn analytic_mode_eigen_residual() {
        let p = ModelParams::default();
        let mode = AnalyticMode::new(&p).unwrap();
        for i in 0..200 {
            let x = 0.01 + 12.0 * i as f64 / 200.0;
            let lap = derivative(|y| mode.phi(y), x, 2, 1e-3) + 2.0 / x * derivative(|y| mode.phi(y), x, 1, 1e-3);
            let res = -lap - 6.0 * sech(x).powi(2) * mode.phi(x) + mode.phi(x);
            assert!(res.abs() < 1e-6, "x={x}: {res}");
            // u = tanh·sech solves -u'' - 6 sech² u = -u
            let u = |y: f64| y.tanh() * sech(y);
            let r1d = -derivative(u, x, 2, 1e-3) - 6.0 * sech(x).powi(2) * u(x) + u(x);
            assert!(r1d.abs() < 1e-8);
            let d = derivative(|y| mode.phi(y), x, 1, 1e-4);
            assert!((d - mode.phi_derivative(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn single_level_of_depth_six_well() {
        let modes = shoot_bound_states(pt(-6.0), 5.0, 0, ShootingConfig::default()).unwrap();
        assert_eq!(modes.len(), 1);
        let m = &modes[0];
        assert!((m.eigenvalue + 1.0).abs() < 1e-6, "{}", m.eigenvalue);
        assert_eq!(m.nodes, 0);
        assert!((m.omega - 24f64.sqrt()).abs() < 1e-6);
        assert!((m.kg_norm() - 1.0).abs() < 1e-12);

        let p = ModelParams { ell: 1.0, m_d: 5.0, ..Default::default() };
        let exact = AnalyticMode::new(&p).unwrap();
        let diff = integrate(|x| ((m.profile(x) - exact.phi(x)) * x).powi(2), 0.0, 20.0, 1e-10, 1e-20).unwrap().value;
        let base = integrate(|x| (exact.phi(x) * x).powi(2), 0.0, 20.0, 1e-10, 1e-20).unwrap().value;
        let rel = (diff / base).sqrt();
        assert!(rel < 1e-4, "relative L2 error {rel}");
    }

    #[test]
    fn depth_two_well_has_no_s_wave_level() {
        let modes = shoot_bound_states(pt(-2.0), 5.0, 0, ShootingConfig::default()).unwrap();
        assert!(modes.is_empty());
    }

    #[test]
    fn depth_twelve_well() {
        let modes = shoot_bound_states(pt(-12.0), 5.0, 0, ShootingConfig::default()).unwrap();
        assert_eq!(modes.len(), 1);
        assert!((modes[0].eigenvalue + 4.0).abs() < 1e-6);
    }

    #[test]
    fn unstable_mode_rejected() {
        let err = shoot_bound_states(pt(-6.0), 0.5, 0, ShootingConfig::default()).unwrap_err();
        assert!(matches!(err, ModeError::UnstableMode { .. }));
    }

    #[test]
    fn coarse_scan_missing_levels_is_reported() {
        // two levels (-9 and -1) but a scan step wider than the well
        let cfg = ShootingConfig { scan_step: 30.0, ..Default::default() };
        let err = shoot_bound_states(pt(-20.0), 10.0, 0, cfg).unwrap_err();
        assert!(matches!(err, ModeError::BracketExhausted { .. }), "{err:?}");
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = ShootingConfig { step: -1.0, ..Default::default() };
        assert!(matches!(shoot_bound_states(pt(-6.0), 5.0, 0, cfg), Err(ModeError::InvalidConfig(_))));
    }

    #[test]
    fn smearing_examples() {
        let p = ModelParams::default();
        let phi0 = analytic_phi1(1e-6, &p).unwrap();
        assert!((smearing_function(0.0, 1e-6, &p, 2.0).unwrap() - phi0).abs() < 1e-15);
        for x in [0.3, 1.0, 4.0] {
            let v = smearing_function(-2.0, x, &p, 2.0).unwrap();
            assert!((v - (-0.5f64).exp() * analytic_phi1(x, &p).unwrap()).abs() < 1e-15);
        }
        let t = 1.7;
        let area = integrate(|s| switching(s, t), -40.0, 40.0, 1e-12, 1e-14).unwrap().value;
        assert!((area - (2.0 * PI).sqrt() * t).abs() < 1e-10);
        assert!(smearing_function(0.0, 1.0, &p, 0.0).is_err());
    }
}
