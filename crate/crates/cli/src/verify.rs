//! The `verify` audit: every model invariant as a named check.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use udw_core::audit::{alternative_excited_pressure_residual, g_closed_form_ratio, pressure_ode_sign};
use udw_core::fluid::{
    central_pressure, default_grid, mu_star, mu_star_closed_form, mu_star_from_margins, pressure_ode,
    pressure_quadrature, FluidSolution,
};
use udw_core::modes::{shoot_bound_states, AnalyticMode, ShootingConfig};
use udw_core::profiles::{
    confining_self_interaction, confining_self_interaction_derivative, f_c_profile, f_profile,
    fluid_onshell_lagrangian, g_state, sech, tanhc, DetectorStateLabel, ModelParams,
};
use udw_core::quadcore::{derivative, g0_constant, integrate_tail};
use udw_core::response::{
    excitation_probability_pointlike, form_factor, pointlike_asymptote, pointlike_probability,
};
use udw_core::stress::{
    assemble_total, audit_grid, conservation_residual, landau_decompose, naive_nonconservation, printed_components,
};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Flagged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub tolerance: f64,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub config: Vec<(String, String)>,
    pub strict: bool,
    pub checks: Vec<Check>,
    pub summary: Summary,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.summary.fail == 0
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Passes when `value` is finite and at most `tolerance`.
fn below(name: &str, value: f64, tolerance: f64, note: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        status: if value.is_finite() && value <= tolerance { Status::Pass } else { Status::Fail },
        value,
        tolerance,
        note: note.into(),
    }
}

/// Passes when `value` is finite and strictly above `bound`.
fn above(name: &str, value: f64, bound: f64, note: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        status: if value.is_finite() && value > bound { Status::Pass } else { Status::Fail },
        value,
        tolerance: bound,
        note: note.into(),
    }
}

/// A known closed-form discrepancy: flagged when reproduced, failed when not.
fn discrepancy(name: &str, reproduced: bool, value: f64, tolerance: f64, note: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        status: if reproduced { Status::Flagged } else { Status::Fail },
        value,
        tolerance,
        note: note.into(),
    }
}

fn error_check(name: &str, err: impl std::fmt::Display) -> Check {
    Check {
        name: name.into(),
        status: Status::Fail,
        value: f64::NAN,
        tolerance: f64::NAN,
        note: format!("error: {err}"),
    }
}

fn run_group(name: &str, f: impl FnOnce() -> Result<Vec<Check>, CliError>) -> Vec<Check> {
    f().unwrap_or_else(|e| vec![error_check(name, e)])
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn sample(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn states() -> [(DetectorStateLabel, &'static str); 2] {
    [(DetectorStateLabel::Ground, "ground"), (DetectorStateLabel::Excited, "excited")]
}

const G0_REFERENCE: f64 = 1.53971;
const MU_STAR_REFERENCE: f64 = 0.565017;

fn quadcore_checks() -> Result<Vec<Check>, CliError> {
    let g = |x: f64| 4.0 * sech(x).powi(2) * x.tanh() * tanhc(x);
    let q = integrate_tail(g, 0.0, 0.5, 1e-12)?.value;
    Ok(vec![
        below("quadcore.g0_quadrature", (q - G0_REFERENCE).abs(), 1e-4, format!("quadrature value {q:.10}")),
        below(
            "quadcore.g0_dual_path",
            (q - g0_constant()).abs(),
            1e-5,
            format!("zeta-function closed form {:.12}", g0_constant()),
        ),
    ])
}

fn threshold_checks(ell: f64) -> Result<Vec<Check>, CliError> {
    let ell_sq = ell * ell;
    let closed = mu_star_closed_form(0.0, ell).value / ell_sq;
    let bisect = mu_star(0.0, ell)?.value / ell_sq;
    let margins = mu_star_from_margins(0.0, ell, &default_grid(), 1e-9)?.map(|m| m / ell_sq);
    let unconstrained = mu_star_from_margins(1.0, ell, &default_grid(), 1e-9)?;
    let third = mu_star_closed_form(1.0 / 3.0, ell).value / ell_sq;
    let mut out = vec![
        below("fluid.threshold_closed_form", rel(closed, MU_STAR_REFERENCE), 1e-4, format!("mu*/ell^2 = {closed:.8}")),
        below("fluid.threshold_bisection", rel(bisect, MU_STAR_REFERENCE), 1e-4, format!("mu*/ell^2 = {bisect:.8}")),
        below("fluid.threshold_paths_agree", rel(bisect, closed), 1e-8, "bisection against closed form"),
    ];
    out.push(match margins {
        Some(m) => below(
            "fluid.threshold_margin_scan",
            rel(m, closed),
            1e-4,
            format!("sign change of min(rho-|P|) at mu/ell^2 = {m:.8}"),
        ),
        None => error_check("fluid.threshold_margin_scan", "no sign change found"),
    });
    out.push(Check {
        name: "fluid.threshold_eta1_unconstrained".into(),
        status: if unconstrained.is_none() { Status::Pass } else { Status::Fail },
        value: unconstrained.unwrap_or(f64::NAN),
        tolerance: f64::NAN,
        note: "min(rho-|P|) keeps its sign on (0, ell^2) for eta=1".into(),
    });
    out.push(below("fluid.threshold_eta_third", (third - 1.0).abs(), 1e-12, "threshold reaches ell^2 at eta=1/3"));
    Ok(out)
}

fn mode_checks(params: &ModelParams) -> Result<Vec<Check>, CliError> {
    let well = |depth: f64| move |x: f64| -depth * sech(x).powi(2);
    let mass = params.m_d * params.ell;
    let cfg = ShootingConfig::default();
    let six = shoot_bound_states(well(6.0), mass, 0, cfg)?;
    let two = shoot_bound_states(well(2.0), mass, 0, cfg)?;
    let twelve = shoot_bound_states(well(12.0), mass, 0, cfg)?;
    let mut out = vec![
        below(
            "modes.depth6_count",
            (six.len() as f64 - 1.0).abs(),
            0.0,
            format!("{} s-wave states in -6 sech^2", six.len()),
        ),
        below("modes.depth2_count", two.len() as f64, 0.0, "no s-wave state in -2 sech^2"),
        below(
            "modes.depth12_count",
            (twelve.len() as f64 - 1.0).abs(),
            0.0,
            format!("{} s-wave states in -12 sech^2", twelve.len()),
        ),
    ];
    if let Some(m) = six.first() {
        out.push(below("modes.depth6_eigenvalue", (m.eigenvalue + 1.0).abs(), 1e-6, format!("eigenvalue {:.12}", m.eigenvalue)));
        let analytic = AnalyticMode::new(&ModelParams { ell: 1.0, m_d: mass, ..Default::default() })?;
        let xs = sample(0.01, 15.0, 3000);
        let sign = m.profile(0.5).signum();
        let (mut num, mut den) = (0.0, 0.0);
        for &x in &xs {
            let (a, b) = (sign * m.profile(x), analytic.phi(x));
            num += (a - b).powi(2) * x * x;
            den += b * b * x * x;
        }
        out.push(below("modes.depth6_profile_l2", (num / den).sqrt(), 1e-4, "relative L2 distance to the closed-form mode"));
    }
    if let Some(m) = twelve.first() {
        out.push(below("modes.depth12_eigenvalue", (m.eigenvalue + 4.0).abs(), 1e-6, format!("eigenvalue {:.12}", m.eigenvalue)));
    }
    let analytic = AnalyticMode::new(params)?;
    let ell = params.ell;
    let density = |r: f64| 2.0 * analytic.omega * 4.0 * PI * r * r * analytic.phi(r / ell).powi(2);
    let norm = integrate_tail(density, 0.0, 0.5 * ell, 1e-13)?.value;
    out.push(below("modes.kg_norm", (norm - 1.0).abs(), 1e-8, format!("2 omega_d int |Phi_1|^2 d^3x = {norm:.14}")));
    Ok(out)
}

fn profile_checks(params: &ModelParams) -> Result<Vec<Check>, CliError> {
    let nd = params.nondimensional();
    let xs = sample(0.01, 12.0, 400);
    let laplacian = |x: f64| derivative(sech, x, 2, 1e-3) + 2.0 / x * derivative(sech, x, 1, 1e-3);
    let eom = xs
        .iter()
        .map(|&x| (laplacian(x) - (1.0 - 2.0 * sech(x).powi(2) - 2.0 * tanhc(x)) * sech(x)).abs())
        .fold(0.0, f64::max);
    let omega_probe = ModelParams { m_c: 2.0 / params.ell, ..*params };
    let omega = omega_probe.omega_c()?;
    let mut lagrangian = 0.0f64;
    for (state, _) in states() {
        for &x in &xs {
            let r = nd.mu * fluid_onshell_lagrangian(x, &nd, state)? + 0.5 * nd.alpha * g_state(x, &nd, state)?
                + f_c_profile(x, &nd)
                - f_profile(x, &nd);
            lagrangian = lagrangian.max(r.abs());
        }
    }
    let potential = sample(0.0, 1.0, 101)
        .iter()
        .map(|&s| (derivative(confining_self_interaction, s, 1, 1e-3) - confining_self_interaction_derivative(s)).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        below("profiles.confining_eom", eom, 1e-6, "finite-difference Laplacian of sech on [0.01, 12]"),
        below(
            "profiles.frequency",
            (omega * params.ell - 3f64.sqrt()).abs(),
            4.0 * f64::EPSILON,
            "omega_c ell at m_c = 2/ell against sqrt(3)",
        ),
        below("profiles.lagrangian_identity", lagrangian, 1e-10, "mu L + (alpha/2) g + F_c - f, ground and excited"),
        below("profiles.self_interaction_derivative", potential, 1e-8, "finite difference of V_c against F_c"),
    ])
}

fn fluid_checks(params: &ModelParams) -> Result<Vec<Check>, CliError> {
    let grid = default_grid();
    let combos: Vec<(DetectorStateLabel, &str, f64)> = states()
        .into_iter()
        .flat_map(|(s, n)| [(s, n, 0.0), (s, n, 1.0)])
        .collect();
    let mut out: Vec<Check> = combos
        .par_iter()
        .map(|&(state, label, eta)| -> Result<Vec<Check>, CliError> {
            let p = ModelParams { eta, ..*params };
            let quad = pressure_quadrature(&p, state, &grid)?;
            let ode = pressure_ode(&p, state, &grid)?;
            let dual = quad.iter().zip(&ode).map(|(a, b)| rel(*b, *a)).fold(0.0, f64::max);
            let tag = format!("{label}.eta{eta}");
            let mut checks = vec![below(
                &format!("fluid.dual_path.{tag}"),
                dual,
                1e-6,
                "quadrature against backward RK4 pressure, max relative difference",
            )];
            let mut sub = 0.0f64;
            for &x in &sample(0.05, 10.0, 60) {
                let pr = udw_core::fluid::pressure_at(&p, state, x)?;
                let slope = derivative(|y| udw_core::fluid::pressure_at(&p, state, y).unwrap_or(f64::NAN), x, 1, 1e-3);
                sub = sub.max(udw_core::fluid::pressure_equation_residual(&p, state, x, pr, slope)?.abs());
            }
            checks.push(below(&format!("fluid.substitution.{tag}"), sub, 1e-8, "pressure equation residual of the quadrature pressure"));
            if state == DetectorStateLabel::Ground {
                let sol = FluidSolution::solve(&p, state, &grid)?;
                let m = sol.margins();
                let worst = m.min_rho_plus_p.min(m.min_rho_plus_3p).min(m.min_rho_minus_abs_p);
                checks.push(above(
                    &format!("fluid.energy_conditions.eta{eta}"),
                    worst,
                    0.0,
                    "smallest of min(rho+P), min(rho+3P), min(rho-|P|)",
                ));
                let w_lo = sol.w.iter().copied().fold(f64::INFINITY, f64::min);
                let w_hi = sol.w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                checks.push(Check {
                    name: format!("fluid.w_range.eta{eta}"),
                    status: if w_lo > 0.0 && w_hi < 1.0 / 3.0 { Status::Pass } else { Status::Fail },
                    value: w_hi,
                    tolerance: 1.0 / 3.0,
                    note: format!("w in [{w_lo:.6e}, {w_hi:.6e}]"),
                });
            }
            Ok(checks)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let p0 = central_pressure(params, DetectorStateLabel::Ground)?;
    let expected = g0_constant() / (1.0 - params.mu_hat());
    out.push(below("fluid.central_pressure", rel(p0, expected), 1e-9, format!("ell^4 P(0) = {p0:.10} against g0/(1-mu/ell^2)")));
    let sol = FluidSolution::solve(params, DetectorStateLabel::Ground, &[0.0, 40.0])?;
    let rho0 = 3.0 * params.eta * p0 + 2.0 / params.mu_hat();
    out.push(below("fluid.central_density", rel(sol.density[0], rho0), 1e-9, format!("ell^4 rho(0) = {:.10}", sol.density[0])));
    let tail = sol.density[1] * 40.0 * params.mu_hat() / 2.0;
    out.push(below("fluid.density_tail", (tail - 1.0).abs(), 1e-9, "rho x mu/(2 ell^2) at x = 40"));
    Ok(out)
}

fn stress_checks(params: &ModelParams) -> Result<Vec<Check>, CliError> {
    let grid = audit_grid();
    let combos: Vec<(DetectorStateLabel, &str, f64)> = states()
        .into_iter()
        .flat_map(|(s, n)| [(s, n, 0.0), (s, n, 1.0)])
        .collect();
    let mut out: Vec<Check> = combos
        .par_iter()
        .map(|&(state, label, eta)| -> Result<Vec<Check>, CliError> {
            let p = ModelParams { eta, ..*params };
            let sol = FluidSolution::solve(&p, state, &grid)?;
            let total = assemble_total(&p, state, &sol)?;
            let res = conservation_residual(&total)?;
            let tol = if state == DetectorStateLabel::Ground { 1e-6 } else { 1e-5 };
            let tag = format!("{label}.eta{eta}");
            let margins = total.energy_conditions();
            let worst = [
                margins.min_rho,
                margins.min_rho_plus_radial,
                margins.min_rho_plus_tangential,
                margins.min_rho_plus_trace,
                margins.min_rho_minus_abs_radial,
                margins.min_rho_minus_abs_tangential,
            ]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
            let mut checks = vec![
                below(
                    &format!("stress.conservation.{tag}"),
                    res.sup,
                    tol,
                    format!("sup |dR/dx + 2(R-Pperp)/x| on [0.05, 10], argmax {:.4}, fd error {:.2e}", res.argmax, res.fd_error_estimate),
                ),
                Check {
                    name: format!("stress.energy_conditions.{tag}"),
                    status: if margins.all_hold() { Status::Pass } else { Status::Fail },
                    value: worst,
                    tolerance: 0.0,
                    note: "smallest anisotropic margin of the total tensor".into(),
                },
            ];
            if state == DetectorStateLabel::Ground {
                let pieces = total.pieces.as_ref();
                let quantum = pieces
                    .map(|p| {
                        [&p.quantum, &p.quantum_coupling]
                            .iter()
                            .flat_map(|d| d.rho_e.iter().chain(&d.radial).chain(&d.tangential))
                            .fold(0.0f64, |m, v| m.max(v.abs()))
                    })
                    .unwrap_or(f64::NAN);
                checks.push(below(&format!("stress.ground_quantum_vanishes.eta{eta}"), quantum, 0.0, "normal-ordered detector terms in the vacuum"));
                let reference = |x: f64| 4.0 / 3.0 * (sech(x) * x.tanh()).powi(2);
                let dev = |pi: &[f64]| {
                    grid.iter().zip(pi).map(|(&x, v)| (v - reference(x)).abs()).fold(0.0, f64::max)
                };
                checks.push(below(
                    &format!("stress.deviator.assembled.eta{eta}"),
                    dev(&landau_decompose(&total).pi),
                    1e-8,
                    "Pi against (4/3) sech^2 tanh^2",
                ));
                checks.push(below(
                    &format!("stress.deviator.closed_form_components.eta{eta}"),
                    dev(&landau_decompose(&printed_components(&p, &sol)).pi),
                    1e-8,
                    "Pi of the closed-form ground components",
                ));
            }
            Ok(checks)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let naive = naive_nonconservation(params, &sample(0.05, 10.0, 200))?;
    let size = naive.divergence.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.push(below(
        "stress.prescribed_potential_source",
        naive.sup_difference,
        1e-6 * size.max(1.0),
        format!("detector tensor alone has divergence up to {size:.4e}, matching -<phi^2> V'/2"),
    ));
    Ok(out)
}

fn response_checks(params: &ModelParams) -> Result<Vec<Check>, CliError> {
    let mut worst = 0.0f64;
    for gt in [-5.0, -2.0, 0.0, 1.0, 2.0] {
        let num = excitation_probability_pointlike(gt, 1.0)?.probability;
        worst = worst.max(rel(num, pointlike_probability(gt, 1.0)?));
    }
    let zero = pointlike_probability(0.0, 1.0)?;
    let ratio = pointlike_probability(-5.0, 1.0)? / pointlike_asymptote(-5.0, 1.0);
    let mode = AnalyticMode::new(params)?;
    let ell = params.ell;
    let f0 = form_factor(0.0, &mode)?;
    let f0_exact = mode.amplitude() * 4.0 * PI * ell.powi(3) * PI / 2.0;
    let k = 1.0 / ell;
    let fk = form_factor(k, &mode)?;
    let fk_exact = f0_exact * sech(PI * k * ell / 2.0);
    // ∫ x tanh x sech x dx = π/2
    let ibp = integrate_tail(|x| x * x.tanh() * sech(x), 0.0, 1.0, 1e-13)?.value;
    Ok(vec![
        below("response.pointlike_quadrature", worst, 1e-6, "F=1 quadrature against the Gaussian-moment closed form, OmegaT in {-5,-2,0,1,2}"),
        below("response.zero_gap", (zero - 1.0 / (4.0 * PI)).abs(), 1e-8, "pointlike L at Omega = 0 against 1/(4 pi)"),
        below("response.asymptote", (ratio - 1.0).abs(), 0.01, "pointlike L / (|Omega|T/(2 sqrt pi)) at OmegaT = -5"),
        below("response.form_factor_origin", rel(f0, f0_exact), 1e-8, "F(0) against amplitude * 4 pi ell^3 * pi/2"),
        below("response.form_factor_sech", rel(fk, fk_exact), 1e-8, "F(1/ell) against F(0) sech(pi/2)"),
        below("response.integration_by_parts", (ibp - PI / 2.0).abs(), 1e-10, "int x tanh x sech x dx against pi/2"),
    ])
}

fn closed_form_checks(params: &ModelParams) -> Result<Vec<Check>, CliError> {
    let xs = sample(0.05, 10.0, 40);
    let sign = pressure_ode_sign(params, &xs)?;
    let mut out = vec![discrepancy(
        "closed_forms.pressure_ode_sign",
        sign.positive_rhs > 0.1 && sign.negative_rhs < 1e-8,
        sign.positive_rhs,
        1e-8,
        format!(
            "scalar pressure ODE with +4 tanh^2/(x(cosh^2-mu)) leaves residual {:.4e}; the -sign version leaves {:.2e}",
            sign.positive_rhs, sign.negative_rhs
        ),
    )];

    let p = ModelParams { eta: 0.0, ..*params };
    let grid = audit_grid();
    let sol = FluidSolution::solve(&p, DetectorStateLabel::Ground, &grid)?;
    let res = conservation_residual(&printed_components(&p, &sol))?;
    let offset = res
        .grid
        .iter()
        .zip(&res.profile)
        .map(|(&x, r)| (r - 8.0 * sech(x).powi(4) * x.tanh()).abs())
        .fold(0.0, f64::max);
    out.push(discrepancy(
        "closed_forms.ground_components_conservation",
        res.sup > 0.1 && offset < 1e-6,
        res.sup,
        1e-6,
        format!("closed-form ground components have divergence 8 sech^4 tanh (max deviation {offset:.2e})"),
    ));

    let ratio = g_closed_form_ratio(params, &xs)?;
    out.push(discrepancy(
        "closed_forms.g_factor",
        (ratio.min - 0.5).abs() < 1e-12 && (ratio.max - 0.5).abs() < 1e-12,
        ratio.max,
        1e-12,
        "csch^4(2x) sinh^6(x) closed form over 2 |Phi_1|^2; the conserved tensor needs ratio 1",
    ));

    let grid = sample(0.1, 5.6, 12);
    let unit = ModelParams { ell: 1.0, mu: 0.2, m_c: 2.0, m_d: 5.0, ..*params };
    let scaled = ModelParams { ell: 2.0, mu: 0.8, m_c: 1.0, m_d: 2.5, ..*params };
    let at_unit = alternative_excited_pressure_residual(&unit, &grid)?;
    let at_two = alternative_excited_pressure_residual(&scaled, &grid)?;
    out.push(below(
        "closed_forms.excited_pressure_unit_scale",
        at_unit,
        1e-8,
        "alternative excited pressure with the halved g solves the pressure equation at ell = 1",
    ));
    out.push(discrepancy(
        "closed_forms.excited_pressure_prefactor",
        at_two > 0.1 && at_unit < 1e-8,
        at_two,
        1e-8,
        "same expression at ell = 2 (mu = ell^2/5, m_c = 2/ell, m_d = 5/ell): the 1/(r^2 ell^2) prefactor does not scale",
    ));
    Ok(out)
}

/// Runs every group. Groups run in sequence; each group may fan out.
pub fn run(cfg: &RunConfig) -> VerifyReport {
    let params = cfg.params;
    let mut checks = Vec::new();
    checks.extend(run_group("quadcore", quadcore_checks));
    checks.extend(run_group("fluid.threshold", || threshold_checks(params.ell)));
    checks.extend(run_group("modes", || mode_checks(&params)));
    checks.extend(run_group("profiles", || profile_checks(&params)));
    checks.extend(run_group("fluid", || fluid_checks(&params)));
    checks.extend(run_group("stress", || stress_checks(&params)));
    checks.extend(run_group("response", || response_checks(&params)));
    checks.extend(run_group("closed_forms", || closed_form_checks(&params)));
    if cfg.strict_paper {
        for c in &mut checks {
            if c.status == Status::Flagged {
                c.status = Status::Fail;
            }
        }
    }
    let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
    let summary = Summary {
        pass: count(Status::Pass),
        fail: count(Status::Fail),
        flagged: count(Status::Flagged),
    };
    VerifyReport {
        config: cfg.echo(),
        strict: cfg.strict_paper,
        checks,
        summary,
    }
}
