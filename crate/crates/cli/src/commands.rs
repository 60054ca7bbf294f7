//! One function per subcommand. Each returns a table ready for the writer.

use rayon::prelude::*;
use udw_core::fluid::{check_coupling, mu_star, mu_star_closed_form, mu_star_from_margins, FluidSolution};
use udw_core::profiles::{sech, DetectorStateLabel, ModelParams};
use udw_core::response::{final_state, pointlike_probability, response_curve};
use udw_core::stress::{assemble_total, audit_grid, conservation_residual, landau_decompose, printed_components};

use crate::config::{Figure, RunConfig};
use crate::table::Table;
use crate::CliError;

/// Rejects parameters outside the model's domain before any computation.
pub fn validate_model(params: &ModelParams) -> Result<(), CliError> {
    check_coupling(params).map_err(|e| CliError::Invalid(e.to_string()))?;
    params.validate().map_err(|e| CliError::Invalid(e.to_string()))
}

fn header(cfg: &RunConfig) -> Table {
    let mut t = Table::default();
    for (k, v) in cfg.echo() {
        t.note(&k, v);
    }
    t
}

pub fn fluid(cfg: &RunConfig) -> Result<Table, CliError> {
    validate_model(&cfg.params)?;
    let mut t = header(cfg);
    fluid_columns(&cfg.params, cfg.state, &cfg.grid(), &mut t)?;
    Ok(t)
}

fn fluid_columns(params: &ModelParams, state: DetectorStateLabel, grid: &[f64], t: &mut Table) -> Result<(), CliError> {
    let sol = FluidSolution::solve(params, state, grid)?;
    let m = sol.margins();
    t.note("units", "x=r/ell; pressure and density in units of 1/ell^4");
    t.note_value("min_rho_plus_P", m.min_rho_plus_p);
    t.note_value("min_rho_plus_3P", m.min_rho_plus_3p);
    t.note_value("min_rho_minus_absP", m.min_rho_minus_abs_p);
    t.note("energy_conditions", if m.all_positive() { "hold" } else { "violated" });
    t.columns = ["x", "pressure", "density", "w", "rho_plus_P", "rho_plus_3P", "rho_minus_absP"]
        .map(String::from)
        .to_vec();
    for i in 0..grid.len() {
        let (p, r) = (sol.pressure[i], sol.density[i]);
        t.push(vec![grid[i], p, r, sol.w[i], r + p, r + 3.0 * p, r - p.abs()]);
    }
    Ok(())
}

pub fn stress(cfg: &RunConfig) -> Result<Table, CliError> {
    validate_model(&cfg.params)?;
    if cfg.audit_printed && cfg.state != DetectorStateLabel::Ground {
        return Err(CliError::Invalid("--audit-printed applies to the ground state only".into()));
    }
    let mut t = header(cfg);
    stress_columns(&cfg.params, cfg.state, &cfg.grid(), cfg.audit_printed, &mut t)?;
    Ok(t)
}

fn stress_columns(
    params: &ModelParams,
    state: DetectorStateLabel,
    grid: &[f64],
    printed: bool,
    t: &mut Table,
) -> Result<(), CliError> {
    let sol = FluidSolution::solve(params, state, grid)?;
    let total = assemble_total(params, state, &sol)?;
    let landau = landau_decompose(&total);

    let fine = audit_grid();
    let fine_sol = FluidSolution::solve(params, state, &fine)?;
    let residual = conservation_residual(&assemble_total(params, state, &fine_sol)?)?;
    t.note("units", "x=r/ell; components in units of 1/ell^4");
    t.note_value("conservation_sup", residual.sup);
    t.note_value("conservation_argmax", residual.argmax);
    t.note_value("conservation_fd_error", residual.fd_error_estimate);
    let margins = total.energy_conditions();
    t.note("energy_conditions", if margins.all_hold() { "hold" } else { "violated" });

    let mut names = vec!["x", "rhoE", "R", "Pperp", "p_iso", "Pi"];
    let mut cols: Vec<Vec<f64>> = vec![
        grid.to_vec(),
        total.rho_e().to_vec(),
        total.radial().to_vec(),
        total.tangential().to_vec(),
        landau.p,
        landau.pi,
    ];
    if printed {
        let alt = printed_components(params, &sol);
        let alt_landau = landau_decompose(&alt);
        let alt_residual = conservation_residual(&printed_components(params, &fine_sol))?;
        t.note_value("printed_conservation_sup", alt_residual.sup);
        names.extend(["rhoE_printed", "R_printed", "Pperp_printed", "Pi_printed"]);
        cols.extend([
            alt.rho_e().to_vec(),
            alt.radial().to_vec(),
            alt.tangential().to_vec(),
            alt_landau.pi,
        ]);
    }
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let body = Table::from_columns(&names, &refs);
    t.columns = body.columns;
    t.rows = body.rows;
    Ok(())
}

pub fn response(cfg: &RunConfig) -> Result<Table, CliError> {
    for &ell in &cfg.ells {
        let p = ModelParams { ell, m_d: cfg.params.m_d, ..Default::default() };
        p.omega_d().map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    let mut t = header(cfg);
    let m_d = cfg.params.m_d;
    response_columns(&cfg.ells, &cfg.gap_grid.values(), |_| m_d, cfg.t_switch, cfg.lambda, &mut t)?;
    Ok(t)
}

/// One response column per detector size; `m_d` gives the detector mass for
/// each size.
fn response_columns(
    ells: &[f64],
    gap_t: &[f64],
    m_d: impl Fn(f64) -> f64,
    t_switch: f64,
    lambda: Option<f64>,
    t: &mut Table,
) -> Result<(), CliError> {
    let mut curves = Vec::with_capacity(ells.len());
    for &ell in ells {
        curves.push(response_curve(&[ell], gap_t, m_d(ell), t_switch)?);
    }
    let columns: Vec<Vec<f64>> = curves.iter().map(|c| c.columns[0].clone()).collect();
    t.note("units", "gapT = Omega*T; L is the probability per lambda^2");
    let mut names: Vec<String> = vec!["gapT".into()];
    names.extend(ells.iter().map(|e| format!("L_ell={e}")));
    names.push("pointlike".into());
    let mut cols: Vec<Vec<f64>> = vec![gap_t.to_vec()];
    cols.extend(columns.iter().cloned());
    cols.push(gap_t.iter().map(|g| pointlike_probability(g / t_switch, t_switch)).collect::<Result<_, _>>()?);
    if let Some(lambda) = lambda {
        t.note("lambda", lambda);
        for (e, col) in ells.iter().zip(&columns) {
            names.push(format!("excited_weight_ell={e}"));
            cols.push(
                col.iter()
                    .map(|l| final_state(lambda, *l).map(|(_, p)| p))
                    .collect::<Result<_, _>>()?,
            );
        }
    }
    t.columns = names;
    for i in 0..gap_t.len() {
        t.push(cols.iter().map(|c| c[i]).collect());
    }
    Ok(())
}

/// Samples of μ/ℓ² for the scan.
fn mu_samples() -> Vec<f64> {
    (1..50).map(|i| 0.02 * i as f64).collect()
}

pub fn scan_mu(cfg: &RunConfig) -> Result<Table, CliError> {
    let base = ModelParams { mu: 0.5 * cfg.params.ell * cfg.params.ell, ..cfg.params };
    validate_model(&base)?;
    let grid = cfg.grid();
    let ell_sq = base.ell * base.ell;
    let rows = mu_samples()
        .par_iter()
        .map(|&m| {
            let p = ModelParams { mu: m * ell_sq, ..base };
            let e = FluidSolution::solve(&p, cfg.state, &grid)?.margins();
            Ok(vec![m, e.min_rho_plus_p, e.min_rho_plus_3p, e.min_rho_minus_abs_p])
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut t = header(cfg);
    let closed = mu_star_closed_form(base.eta, base.ell);
    let bisection = mu_star(base.eta, base.ell)?;
    t.note_value("mu_star_closed_form", closed.value / ell_sq);
    t.note_value("mu_star_bisection", bisection.value / ell_sq);
    t.note("unconstrained", closed.unconstrained);
    let sign_change = rows.windows(2).find(|w| w[0][3] > 0.0 && w[1][3] <= 0.0).map(|w| {
        let (a, b) = (&w[0], &w[1]);
        a[0] + (b[0] - a[0]) * a[3] / (a[3] - b[3])
    });
    match sign_change {
        Some(s) => t.note_value("sign_change_interpolated", s),
        None => t.note("sign_change_interpolated", "none"),
    }
    if cfg.state == DetectorStateLabel::Ground {
        match mu_star_from_margins(base.eta, base.ell, &grid, 1e-9)? {
            Some(m) => t.note_value("mu_star_margins", m / ell_sq),
            None => t.note("mu_star_margins", "none"),
        }
    }
    t.columns = ["mu_over_ell2", "min_rho_plus_P", "min_rho_plus_3P", "min_rho_minus_absP"]
        .map(String::from)
        .to_vec();
    t.rows = rows;
    Ok(t)
}

/// Parameters used by every figure preset: μ = ℓ²/5, m_c = 2/ℓ, m_d = 5/ℓ.
pub fn figure_params(ell: f64, eta: f64) -> ModelParams {
    ModelParams {
        ell,
        mu: ell * ell / 5.0,
        eta,
        alpha: -6.0,
        m_c: 2.0 / ell,
        m_d: 5.0 / ell,
    }
}

pub fn figure(cfg: &RunConfig) -> Result<Table, CliError> {
    let figure = cfg.figure.ok_or_else(|| CliError::Invalid("--figure is required".into()))?;
    let ell = cfg.params.ell;
    let eta = if figure == Figure::Fig2 { 1.0 } else { 0.0 };
    let state = if figure == Figure::Tmunu1 { DetectorStateLabel::Excited } else { DetectorStateLabel::Ground };
    let preset = RunConfig {
        params: figure_params(ell, eta),
        state,
        ..cfg.clone()
    };
    validate_model(&preset.params)?;
    let params = preset.params;
    let grid = preset.grid();
    let mut t = header(&preset);
    t.note("preset", format!("{figure}: mu=ell^2/5, m_c=2/ell, m_d=5/ell, alpha=-6"));
    match figure {
        Figure::Fig1 | Figure::Fig2 => fluid_columns(&params, state, &grid, &mut t)?,
        Figure::Figw => {
            let w: Vec<Vec<f64>> = [0.0, 1.0]
                .iter()
                .map(|&eta| Ok(FluidSolution::solve(&figure_params(ell, eta), state, &grid)?.w))
                .collect::<Result<_, CliError>>()?;
            let body = Table::from_columns(&["x", "w_eta0", "w_eta1"], &[&grid, &w[0], &w[1]]);
            t.columns = body.columns;
            t.rows = body.rows;
        }
        Figure::Tmunu0 | Figure::Tmunu1 => stress_columns(&params, state, &grid, figure == Figure::Tmunu0, &mut t)?,
        Figure::Deviator => {
            let mut inner = Table::default();
            stress_columns(&params, state, &grid, false, &mut inner)?;
            let (piso, pi) = (inner.column("p_iso").unwrap_or_default(), inner.column("Pi").unwrap_or_default());
            let reference: Vec<f64> = grid.iter().map(|&x| 4.0 / 3.0 * (sech(x) * x.tanh()).powi(2)).collect();
            let ratio: Vec<f64> = pi.iter().zip(&piso).map(|(a, b)| a / b).collect();
            let body = Table::from_columns(
                &["x", "p_iso", "Pi", "Pi_over_p", "Pi_closed_form"],
                &[&grid, &piso, &pi, &ratio, &reference],
            );
            t.columns = body.columns;
            t.rows = body.rows;
        }
        Figure::Excitation => {
            t.note("detector_mass", "m_d=5/ell for each curve");
            response_columns(&cfg.ells, &cfg.gap_grid.values(), |e| 5.0 / e, cfg.t_switch, cfg.lambda, &mut t)?
        }
    }
    Ok(t)
}
