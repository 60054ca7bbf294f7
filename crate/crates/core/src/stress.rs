//! Total stress-energy tensor of the confined detector.
//!
//! Everything is static, diagonal and spherically symmetric, so a tensor is
//! stored as three radial profiles in the orthonormal static frame: energy
//! density, radial pressure and tangential pressure. Profiles are
//! nondimensional (radii in units of ℓ, components times ℓ⁴).

use serde::Serialize;
use thiserror::Error;

use crate::fluid::FluidSolution;
use crate::profiles::{g_state, mode_shape, mode_shape_derivative, sech, DetectorStateLabel, ModelError, ModelParams};
use crate::quadcore::derivative;

/// Lower and upper edge of the window where conservation is audited.
pub const AUDIT_WINDOW: (f64, f64) = (0.05, 10.0);
/// Finite-difference step for residuals of pointwise-evaluable tensors.
pub const FD_STEP: f64 = 1e-4;
const RESOLUTION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StressError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("fluid solution was computed for {found}, requested {requested}")]
    InconsistentState { requested: String, found: String },
    #[error("fluid solution parameters differ from the requested parameters")]
    InconsistentParams,
    #[error("grids differ")]
    GridMismatch,
    #[error("grid must be uniform to within 1e-9 relative spacing")]
    NonUniformGrid,
    #[error("grid too coarse: finite-difference error estimate {estimate:e} exceeds the resolvable residual (sup {residual:e})")]
    GridTooCoarse { estimate: f64, residual: f64 },
    #[error("grid does not cover the audit window [{lo}, {hi}] with two points of margin")]
    WindowNotCovered { lo: f64, hi: f64 },
    #[error("lambda^2 L = {weight} outside [0, 1]: perturbative mixture invalid")]
    MixtureOutOfRange { weight: f64 },
}

/// Diagonal static tensor `diag(ρ_E, R, 𝒫, 𝒫)` on a radial grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagonal {
    pub rho_e: Vec<f64>,
    pub radial: Vec<f64>,
    pub tangential: Vec<f64>,
}

impl Diagonal {
    fn zeros(n: usize) -> Self {
        Self {
            rho_e: vec![0.0; n],
            radial: vec![0.0; n],
            tangential: vec![0.0; n],
        }
    }

    fn push(&mut self, i: usize, rho: f64, r: f64, p: f64) {
        self.rho_e[i] = rho;
        self.radial[i] = r;
        self.tangential[i] = p;
    }

    fn add(&mut self, other: &Diagonal) {
        for (a, b) in [
            (&mut self.rho_e, &other.rho_e),
            (&mut self.radial, &other.radial),
            (&mut self.tangential, &other.tangential),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn blend(a: &Diagonal, b: &Diagonal, w: f64) -> Diagonal {
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (1.0 - w) * p + w * q).collect();
        Diagonal {
            rho_e: mix(&a.rho_e, &b.rho_e),
            radial: mix(&a.radial, &b.radial),
            tangential: mix(&a.tangential, &b.tangential),
        }
    }
}

/// Per-term breakdown of the total tensor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressPieces {
    pub confining_field: Diagonal,
    /// `-μ|ψ_c|² diag(ρ, P, P, P)`.
    pub fluid_coupling: Diagonal,
    pub fluid: Diagonal,
    /// Normal-ordered `φ_d` kinetic and mass terms.
    pub quantum: Diagonal,
    /// Normal-ordered `φ_d`–`ψ_c` interaction, `-½ g_{μν} α |ψ_c|² ⟨:φ_d²:⟩`.
    pub quantum_coupling: Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressComponents {
    pub grid: Vec<f64>,
    pub state: DetectorStateLabel,
    #[serde(flatten)]
    pub total: Diagonal,
    pub pieces: Option<StressPieces>,
}

impl StressComponents {
    pub fn rho_e(&self) -> &[f64] {
        &self.total.rho_e
    }

    pub fn radial(&self) -> &[f64] {
        &self.total.radial
    }

    pub fn tangential(&self) -> &[f64] {
        &self.total.tangential
    }

    /// Grid minima of the anisotropic energy-condition combinations.
    pub fn energy_conditions(&self) -> AnisotropicMargins {
        let mut m = AnisotropicMargins {
            min_rho: f64::INFINITY,
            min_rho_plus_radial: f64::INFINITY,
            min_rho_plus_tangential: f64::INFINITY,
            min_rho_plus_trace: f64::INFINITY,
            min_rho_minus_abs_radial: f64::INFINITY,
            min_rho_minus_abs_tangential: f64::INFINITY,
        };
        for i in 0..self.grid.len() {
            let (rho, r, p) = (self.total.rho_e[i], self.total.radial[i], self.total.tangential[i]);
            m.min_rho = m.min_rho.min(rho);
            m.min_rho_plus_radial = m.min_rho_plus_radial.min(rho + r);
            m.min_rho_plus_tangential = m.min_rho_plus_tangential.min(rho + p);
            m.min_rho_plus_trace = m.min_rho_plus_trace.min(rho + r + 2.0 * p);
            m.min_rho_minus_abs_radial = m.min_rho_minus_abs_radial.min(rho - r.abs());
            m.min_rho_minus_abs_tangential = m.min_rho_minus_abs_tangential.min(rho - p.abs());
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnisotropicMargins {
    pub min_rho: f64,
    pub min_rho_plus_radial: f64,
    pub min_rho_plus_tangential: f64,
    pub min_rho_plus_trace: f64,
    pub min_rho_minus_abs_radial: f64,
    pub min_rho_minus_abs_tangential: f64,
}

impl AnisotropicMargins {
    pub fn all_hold(&self) -> bool {
        [
            self.min_rho,
            self.min_rho_plus_radial,
            self.min_rho_plus_tangential,
            self.min_rho_plus_trace,
            self.min_rho_minus_abs_radial,
            self.min_rho_minus_abs_tangential,
        ]
        .iter()
        .all(|v| *v >= 0.0)
    }
}

/// Isotropic pressure and pressure deviator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandauDecomposition {
    /// `(R + 2𝒫)/3`.
    pub p: Vec<f64>,
    /// `(2/3)(R - 𝒫)`.
    pub pi: Vec<f64>,
}

impl LandauDecomposition {
    /// `(R, 𝒫) = (p + Π, p - Π/2)`.
    pub fn reconstruct(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.p.iter().zip(&self.pi).map(|(p, pi)| p + pi).collect();
        let t = self.p.iter().zip(&self.pi).map(|(p, pi)| p - 0.5 * pi).collect();
        (r, t)
    }
}

pub fn landau_decompose(components: &StressComponents) -> LandauDecomposition {
    let (r, t) = (components.radial(), components.tangential());
    LandauDecomposition {
        p: r.iter().zip(t).map(|(r, t)| (r + 2.0 * t) / 3.0).collect(),
        pi: r.iter().zip(t).map(|(r, t)| 2.0 / 3.0 * (r - t)).collect(),
    }
}

/// `ℓΦ₁` and its x-derivative, normalized so that `⟨1|:φ_d²:|1⟩ = 2Φ₁²`.
fn excited_mode(x: f64, nd: &ModelParams) -> Result<(f64, f64, f64), ModelError> {
    let omega = nd.omega_d()?;
    let amp = (3.0 / (8.0 * std::f64::consts::PI * omega)).sqrt();
    Ok((amp * mode_shape(x), amp * mode_shape_derivative(x), omega))
}

/// Sums the confining field, fluid and detector contributions.
pub fn assemble_total(
    params: &ModelParams,
    state: DetectorStateLabel,
    fluid: &FluidSolution,
) -> Result<StressComponents, StressError> {
    if fluid.state != state {
        return Err(StressError::InconsistentState {
            requested: state.to_string(),
            found: fluid.state.to_string(),
        });
    }
    if fluid.params != *params {
        return Err(StressError::InconsistentParams);
    }
    state.validate()?;
    let nd = params.nondimensional();
    let omega_c_sq = nd.m_c * nd.m_c - 1.0;
    let m_d_sq = nd.m_d * nd.m_d;
    let weight = state.excitation_weight();
    let n = fluid.grid.len();

    let mut pieces = StressPieces {
        confining_field: Diagonal::zeros(n),
        fluid_coupling: Diagonal::zeros(n),
        fluid: Diagonal::zeros(n),
        quantum: Diagonal::zeros(n),
        quantum_coupling: Diagonal::zeros(n),
    };
    for (i, &x) in fluid.grid.iter().enumerate() {
        let psi = sech(x);
        let psi_sq = psi * psi;
        let dpsi = -psi * x.tanh();
        let v_c = -psi_sq * psi_sq;
        pieces.confining_field.push(
            i,
            omega_c_sq * psi_sq + dpsi * dpsi + nd.m_c * nd.m_c * psi_sq + v_c,
            dpsi * dpsi + (omega_c_sq - nd.m_c * nd.m_c) * psi_sq - v_c,
            -dpsi * dpsi + (omega_c_sq - nd.m_c * nd.m_c) * psi_sq - v_c,
        );

        let (rho, p) = (fluid.density[i], fluid.pressure[i]);
        pieces.fluid.push(i, rho, p, p);
        let c = -nd.mu * psi_sq;
        pieces.fluid_coupling.push(i, c * rho, c * p, c * p);

        if weight != 0.0 {
            let (phi, dphi, omega) = excited_mode(x, &nd)?;
            let (phi_sq, dphi_sq) = (phi * phi, dphi * dphi);
            let gap = omega * omega - m_d_sq;
            pieces.quantum.push(
                i,
                weight * (omega * omega * phi_sq + dphi_sq + m_d_sq * phi_sq),
                weight * (dphi_sq + gap * phi_sq),
                weight * (-dphi_sq + gap * phi_sq),
            );
            let k = 0.5 * nd.alpha * psi_sq * g_state(x, &nd, state)?;
            pieces.quantum_coupling.push(i, k, -k, -k);
        }
    }

    let mut total = Diagonal::zeros(n);
    total.add(&pieces.confining_field);
    total.add(&pieces.fluid_coupling);
    total.add(&pieces.fluid);
    total.add(&pieces.quantum);
    total.add(&pieces.quantum_coupling);
    Ok(StressComponents {
        grid: fluid.grid.clone(),
        state,
        total,
        pieces: Some(pieces),
    })
}

/// Ground-state components in the closed forms
/// `ρ₀ = 2m_c² sech² + (1-μ̂ sech²)ρ`, `R₀ = -2 sech⁴ + (1-μ̂ sech²)P`,
/// `𝒫₀ = -2 sech² + (1-μ̂ sech²)P`, evaluated as written for comparison
/// with the assembled tensor.
pub fn printed_components(params: &ModelParams, fluid: &FluidSolution) -> StressComponents {
    let nd = params.nondimensional();
    let n = fluid.grid.len();
    let mut total = Diagonal::zeros(n);
    for (i, &x) in fluid.grid.iter().enumerate() {
        let s2 = sech(x).powi(2);
        let k = 1.0 - nd.mu * s2;
        total.push(
            i,
            2.0 * nd.m_c * nd.m_c * s2 + k * fluid.density[i],
            -2.0 * s2 * s2 + k * fluid.pressure[i],
            -2.0 * s2 + k * fluid.pressure[i],
        );
    }
    StressComponents {
        grid: fluid.grid.clone(),
        state: DetectorStateLabel::Ground,
        total,
        pieces: None,
    }
}

/// Radial conservation residual `dR/dx + (2/x)(R - 𝒫)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationResidual {
    pub sup: f64,
    pub argmax: f64,
    /// Richardson estimate of the finite-difference error in the profile.
    pub fd_error_estimate: f64,
    pub grid: Vec<f64>,
    pub profile: Vec<f64>,
}

/// Sup of the radial conservation residual over the audit window, with the
/// radial derivative from 5-point differences on the (uniform) grid.
pub fn conservation_residual(components: &StressComponents) -> Result<ConservationResidual, StressError> {
    let x = &components.grid;
    let r = components.radial();
    let t = components.tangential();
    let n = x.len();
    if n < 9 {
        return Err(StressError::WindowNotCovered {
            lo: AUDIT_WINDOW.0,
            hi: AUDIT_WINDOW.1,
        });
    }
    let h = (x[n - 1] - x[0]) / (n - 1) as f64;
    if x.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(StressError::NonUniformGrid);
    }
    let inside: Vec<usize> = (0..n).filter(|&i| x[i] >= AUDIT_WINDOW.0 && x[i] <= AUDIT_WINDOW.1).collect();
    let (first, last) = match (inside.first(), inside.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => {
            return Err(StressError::WindowNotCovered {
                lo: AUDIT_WINDOW.0,
                hi: AUDIT_WINDOW.1,
            })
        }
    };
    if first < 2 || last + 2 >= n {
        return Err(StressError::WindowNotCovered {
            lo: AUDIT_WINDOW.0,
            hi: AUDIT_WINDOW.1,
        });
    }
    let d = |i: usize, s: usize| (r[i - 2 * s] - 8.0 * r[i - s] + 8.0 * r[i + s] - r[i + 2 * s]) / (12.0 * s as f64 * h);

    let mut out = ConservationResidual {
        sup: 0.0,
        argmax: x[first],
        fd_error_estimate: 0.0,
        grid: Vec::with_capacity(inside.len()),
        profile: Vec::with_capacity(inside.len()),
    };
    for i in inside {
        let dr = d(i, 1);
        let res = dr + 2.0 / x[i] * (r[i] - t[i]);
        if i >= 4 && i + 4 < n {
            out.fd_error_estimate = out.fd_error_estimate.max((dr - d(i, 2)).abs() / 15.0);
        }
        if res.abs() > out.sup {
            out.sup = res.abs();
            out.argmax = x[i];
        }
        out.grid.push(x[i]);
        out.profile.push(res);
    }
    if out.fd_error_estimate > RESOLUTION_FLOOR && out.fd_error_estimate > 0.01 * out.sup {
        return Err(StressError::GridTooCoarse {
            estimate: out.fd_error_estimate,
            residual: out.sup,
        });
    }
    Ok(out)
}

/// `T = (1 - λ²L) T₀ + λ²L T₁`.
pub fn mixture_tensor(
    t0: &StressComponents,
    t1: &StressComponents,
    lambda: f64,
    probability: f64,
) -> Result<StressComponents, StressError> {
    let weight = lambda * lambda * probability;
    if !(0.0..=1.0).contains(&weight) {
        return Err(StressError::MixtureOutOfRange { weight });
    }
    if t0.grid != t1.grid {
        return Err(StressError::GridMismatch);
    }
    let pieces = match (&t0.pieces, &t1.pieces) {
        (Some(a), Some(b)) => Some(StressPieces {
            confining_field: Diagonal::blend(&a.confining_field, &b.confining_field, weight),
            fluid_coupling: Diagonal::blend(&a.fluid_coupling, &b.fluid_coupling, weight),
            fluid: Diagonal::blend(&a.fluid, &b.fluid, weight),
            quantum: Diagonal::blend(&a.quantum, &b.quantum, weight),
            quantum_coupling: Diagonal::blend(&a.quantum_coupling, &b.quantum_coupling, weight),
        }),
        _ => None,
    };
    Ok(StressComponents {
        grid: t0.grid.clone(),
        state: DetectorStateLabel::Mixture(weight),
        total: Diagonal::blend(&t0.total, &t1.total, weight),
        pieces,
    })
}

/// A static radial mode `e^{-iωt} Φ(x)` in a prescribed potential, all
/// quantities nondimensional.
pub struct PrescribedMode<'a> {
    pub omega: f64,
    pub mass: f64,
    pub phi: &'a dyn Fn(f64) -> f64,
    pub dphi: &'a dyn Fn(f64) -> f64,
    pub potential: &'a dyn Fn(f64) -> f64,
}

/// Divergence of the prescribed-potential tensor next to its on-shell value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaiveNonconservation {
    pub grid: Vec<f64>,
    /// `dR/dx + (2/x)(R - 𝒫)` of the singly occupied mode.
    pub divergence: Vec<f64>,
    /// `-½ ⟨:φ²:⟩ dV/dx`.
    pub source: Vec<f64>,
    pub sup_difference: f64,
}

/// Tensor `∂φ∂φ - ½g(∂φ·∂φ + m²φ² + Vφ²)` for one quantum in `mode`, with
/// its radial divergence taken by finite differences.
pub fn naive_nonconservation_for(mode: &PrescribedMode<'_>, grid: &[f64]) -> NaiveNonconservation {
    let radial = |x: f64| {
        let (phi, dphi) = ((mode.phi)(x), (mode.dphi)(x));
        dphi * dphi + (mode.omega * mode.omega - mode.mass * mode.mass - (mode.potential)(x)) * phi * phi
    };
    let tangential = |x: f64| {
        let (phi, dphi) = ((mode.phi)(x), (mode.dphi)(x));
        -dphi * dphi + (mode.omega * mode.omega - mode.mass * mode.mass - (mode.potential)(x)) * phi * phi
    };
    let mut out = NaiveNonconservation {
        grid: grid.to_vec(),
        divergence: Vec::with_capacity(grid.len()),
        source: Vec::with_capacity(grid.len()),
        sup_difference: 0.0,
    };
    for &x in grid {
        let div = derivative(radial, x, 1, FD_STEP) + 2.0 / x * (radial(x) - tangential(x));
        let phi = (mode.phi)(x);
        let src = -0.5 * (2.0 * phi * phi) * derivative(mode.potential, x, 1, FD_STEP);
        out.sup_difference = out.sup_difference.max((div - src).abs());
        out.divergence.push(div);
        out.source.push(src);
    }
    out
}

/// The excited bound mode in the trap `V = α sech²x`.
pub fn naive_nonconservation(params: &ModelParams, grid: &[f64]) -> Result<NaiveNonconservation, StressError> {
    let nd = params.nondimensional();
    let (_, _, omega) = excited_mode(1.0, &nd)?;
    let phi = |x: f64| excited_mode(x, &nd).map(|m| m.0).unwrap_or(f64::NAN);
    let dphi = |x: f64| excited_mode(x, &nd).map(|m| m.1).unwrap_or(f64::NAN);
    let alpha = nd.alpha;
    let potential = move |x: f64| alpha * sech(x).powi(2);
    Ok(naive_nonconservation_for(
        &PrescribedMode {
            omega,
            mass: nd.m_d,
            phi: &phi,
            dphi: &dphi,
            potential: &potential,
        },
        grid,
    ))
}

/// Uniform grid on `[0, 12]` spacing `h`, starting one step from the
/// origin; fine enough for the conservation audit.
pub fn audit_grid() -> Vec<f64> {
    crate::fluid::uniform_grid(0.005, 12.0, 2400)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::default_grid;

    const GROUND: DetectorStateLabel = DetectorStateLabel::Ground;
    const EXCITED: DetectorStateLabel = DetectorStateLabel::Excited;

    fn params(eta: f64) -> ModelParams {
        ModelParams { eta, ..Default::default() }
    }

    fn total(p: &ModelParams, state: DetectorStateLabel, grid: &[f64]) -> StressComponents {
        let fluid = FluidSolution::solve(p, state, grid).unwrap();
        assemble_total(p, state, &fluid).unwrap()
    }

    #[test]
    fn confining_radial_pressure_vanishes() {
        let t = total(&params(0.0), GROUND, &default_grid());
        let field = &t.pieces.as_ref().unwrap().confining_field;
        assert!(field.radial.iter().all(|r| r.abs() < 1e-15));
        for (x, p) in t.grid.iter().zip(&field.tangential) {
            let (s, th) = (sech(*x), x.tanh());
            assert!((p + 2.0 * s * s * th * th).abs() < 1e-14);
        }
    }

    #[test]
    fn conservation_all_states() {
        let grid = audit_grid();
        for state in [GROUND, EXCITED] {
            for eta in [0.0, 1.0] {
                let t = total(&params(eta), state, &grid);
                let res = conservation_residual(&t).unwrap();
                assert!(res.sup < 1e-6, "{state} eta={eta}: {}", res.sup);
            }
        }
    }

    #[test]
    fn printed_set_residual_profile() {
        let p = params(0.0);
        let fluid = FluidSolution::solve(&p, GROUND, &audit_grid()).unwrap();
        let printed = printed_components(&p, &fluid);
        assert!((printed.rho_e()[0] - 16.0).abs() < 1e-3);
        let res = conservation_residual(&printed).unwrap();
        for (x, r) in res.grid.iter().zip(&res.profile) {
            let expected = 8.0 * sech(*x).powi(4) * x.tanh();
            assert!((r - expected).abs() < 1e-6, "x={x}");
        }
        let assembled = assemble_total(&p, GROUND, &fluid).unwrap();
        let (a, b) = (landau_decompose(&assembled), landau_decompose(&printed));
        for (i, x) in fluid.grid.iter().enumerate() {
            let expected = 4.0 / 3.0 * sech(*x).powi(2) * x.tanh().powi(2);
            assert!((a.pi[i] - expected).abs() < 1e-8);
            assert!((b.pi[i] - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn printed_central_density_exact() {
        let p = params(0.0);
        let fluid = FluidSolution::solve(&p, GROUND, &[1e-9, 1.0]).unwrap();
        assert!((printed_components(&p, &fluid).rho_e()[0] - 16.0).abs() < 1e-8);
    }

    #[test]
    fn deviator_shape() {
        let t = total(&params(0.0), GROUND, &[1e-12, 0.881_373_587_019_543, 40.0, 100.0, 300.0]);
        let d = landau_decompose(&t);
        assert!(d.pi[0].abs() < 1e-20);
        assert!((d.pi[1] - 1.0 / 3.0).abs() < 1e-12);
        // fluid pressure and the field term share the e^{-2x} decay, so the
        // approach to -1 is only algebraic
        for i in 2..5 {
            let x = t.grid[i];
            let gap = d.pi[i] / d.p[i] + 1.0;
            assert!(gap < 0.0 && gap.abs() < 2.0 / x, "x={x}: {gap}");
        }
        let (r, p) = d.reconstruct();
        for i in 0..5 {
            assert!((r[i] - t.radial()[i]).abs() < 1e-15);
            assert!((p[i] - t.tangential()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn decays_except_density_tail() {
        let t = total(&params(0.0), GROUND, &[12.0]);
        assert!(t.radial()[0].abs() < 1e-8 && t.tangential()[0].abs() < 1e-8);
        let fluid_tail = t.pieces.as_ref().unwrap().fluid.rho_e[0];
        assert!((t.rho_e()[0] - fluid_tail).abs() < 1e-8);
    }

    #[test]
    fn ground_quantum_pieces_vanish() {
        let t = total(&params(0.0), GROUND, &default_grid());
        let pieces = t.pieces.unwrap();
        for d in [&pieces.quantum, &pieces.quantum_coupling] {
            assert!(d.rho_e.iter().chain(&d.radial).chain(&d.tangential).all(|v| *v == 0.0));
        }
    }

    #[test]
    fn total_energy_conditions() {
        for eta in [0.0, 1.0] {
            let t = total(&params(eta), GROUND, &default_grid());
            assert!(t.energy_conditions().all_hold(), "eta={eta}: {:?}", t.energy_conditions());
        }
    }

    #[test]
    fn mixtures() {
        let grid = default_grid();
        let p = params(0.0);
        let t0 = total(&p, GROUND, &grid);
        let t1 = total(&p, EXCITED, &grid);
        assert_eq!(mixture_tensor(&t0, &t1, 0.0, 0.7).unwrap().total, t0.total);
        assert_eq!(mixture_tensor(&t0, &t1, 1.0, 1.0).unwrap().total, t1.total);
        let m = mixture_tensor(&t0, &t1, 0.5, 1.2).unwrap();
        let direct = total(&p, DetectorStateLabel::Mixture(0.3), &grid);
        for i in 0..grid.len() {
            let lin = 0.7 * t0.rho_e()[i] + 0.3 * t1.rho_e()[i];
            assert!((m.rho_e()[i] - lin).abs() < 1e-12);
            assert!((direct.rho_e()[i] - lin).abs() < 1e-9 * lin.abs().max(1.0));
            assert!((direct.radial()[i] - m.radial()[i]).abs() < 1e-9);
        }
        assert!(matches!(
            mixture_tensor(&t0, &t1, 2.0, 0.5),
            Err(StressError::MixtureOutOfRange { .. })
        ));
    }

    #[test]
    fn inconsistent_state_rejected() {
        let p = params(0.0);
        let fluid = FluidSolution::solve(&p, GROUND, &default_grid()).unwrap();
        assert!(matches!(
            assemble_total(&p, EXCITED, &fluid),
            Err(StressError::InconsistentState { .. })
        ));
    }

    #[test]
    fn coarse_grid_detected() {
        let p = params(0.0);
        let grid = crate::fluid::uniform_grid(0.0, 12.0, 481);
        let t = total(&p, GROUND, &grid);
        let r = conservation_residual(&t);
        assert!(matches!(r, Err(StressError::GridTooCoarse { .. })), "{r:?}");
    }

    #[test]
    fn naive_tensor_not_conserved() {
        let grid: Vec<f64> = (1..200).map(|i| i as f64 * 0.05).collect();
        let n = naive_nonconservation(&params(0.0), &grid).unwrap();
        assert!(n.sup_difference < 1e-6, "{}", n.sup_difference);
        assert!(n.divergence.iter().map(|v| v.abs()).fold(0.0, f64::max) > 1e-3);
    }

    #[test]
    fn naive_tensor_conserved_without_potential() {
        let k = 1.3;
        let phi = move |x: f64| (k * x).sin() / x;
        let dphi = move |x: f64| k * (k * x).cos() / x - (k * x).sin() / (x * x);
        let flat = |_: f64| 0.0;
        let mode = PrescribedMode {
            omega: (25.0f64 + k * k).sqrt(),
            mass: 5.0,
            phi: &phi,
            dphi: &dphi,
            potential: &flat,
        };
        let grid: Vec<f64> = (1..200).map(|i| i as f64 * 0.05).collect();
        let n = naive_nonconservation_for(&mode, &grid);
        assert!(n.source.iter().all(|s| *s == 0.0));
        assert!(n.divergence.iter().all(|d| d.abs() < 1e-8));
    }
}
