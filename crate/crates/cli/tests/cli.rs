use std::f64::consts::PI;
use std::process::Command;

use udw_cli::table::Table;

fn udw(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("udw").chain(args.iter().copied());
    let code = udw_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn table(args: &[&str]) -> Table {
    let (code, out, err) = udw(args);
    assert_eq!(code, 0, "{err}");
    Table::parse_csv(&out).unwrap()
}

#[test]
fn csv_round_trip_is_byte_identical() {
    for args in [
        &["fluid", "--points", "40"][..],
        &["stress", "--points", "30", "--audit-printed"],
        &["scan-mu", "--eta", "1", "--points", "50"],
    ] {
        let (code, out, _) = udw(args);
        assert_eq!(code, 0);
        assert_eq!(Table::parse_csv(&out).unwrap().to_csv_string(), out, "{args:?}");
    }
}

#[test]
fn header_echoes_effective_config_with_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# fluid run\nmu = 0.3\neta=1\npoints=7\n").unwrap();
    let t = table(&["fluid", "--config", cfg.to_str().unwrap(), "--mu", "0.1"]);
    assert_eq!(t.meta_value("mu"), Some("0.1"));
    assert_eq!(t.meta_value("eta"), Some("1"));
    assert_eq!(t.meta_value("points"), Some("7"));
    assert_eq!(t.rows.len(), 7);
}

#[test]
fn exit_codes() {
    assert_eq!(udw(&["fluid", "--mu", "1.5"]).0, 2);
    assert_eq!(udw(&["fluid", "--mu", "-0.1"]).0, 2);
    assert_eq!(udw(&["fluid", "--m-c", "0.5"]).0, 2);
    assert_eq!(udw(&["stress", "--state", "mixture:1.5"]).0, 2);
    assert_eq!(udw(&["stress", "--state", "excited", "--audit-printed"]).0, 2);
    assert_eq!(udw(&["response", "--ells", "0.1"]).0, 2);
    assert_eq!(udw(&["figure"]).0, 2);
    assert_eq!(udw(&["fluid", "--no-such-flag"]).0, 2);
    assert_eq!(udw(&["fluid", "--config", "/nonexistent/udw.cfg"]).0, 2);
    let (code, _, err) = udw(&["fluid", "--mu", "1.5"]);
    assert_eq!(code, 2);
    assert!(err.contains("pressure divergent"), "{err}");
}

#[test]
fn binary_exit_status_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fluid.json");
    let status = Command::new(env!("CARGO_BIN_EXE_udw"))
        .args(["fluid", "--points", "5", "--format", "json", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(json["columns"][0], "x");
    assert_eq!(json["rows"].as_array().unwrap().len(), 5);

    let status = Command::new(env!("CARGO_BIN_EXE_udw")).args(["fluid", "--mu", "2"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(env!("CARGO_BIN_EXE_udw"))
        .args(["verify", "--strict-paper"])
        .env("UDW_THREADS", "1")
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(1));
    let status = Command::new(env!("CARGO_BIN_EXE_udw"))
        .args(["fluid"])
        .env("UDW_THREADS", "zero")
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));
}

#[test]
fn fluid_examples() {
    let t = table(&["fluid"]);
    let first = &t.rows[0];
    assert!((first[2] - 10.0).abs() < 1e-4, "density {}", first[2]);
    assert!((first[1] - 1.92464).abs() < 1e-4, "pressure {}", first[1]);
    assert!(t.column("rho_minus_absP").unwrap().iter().all(|v| *v > 0.0));
    let x = t.column("x").unwrap();
    assert!(x.windows(2).all(|w| w[1] > w[0]));

    let t = table(&["fluid", "--eta", "1"]);
    assert!(t.column("w").unwrap().iter().all(|w| *w > 0.0 && *w < 1.0 / 3.0));
}

#[test]
fn stress_examples() {
    let t = table(&["stress"]);
    for (x, pi) in t.column("x").unwrap().iter().zip(t.column("Pi").unwrap()) {
        let s = 1.0 / x.cosh();
        assert!((pi - 4.0 / 3.0 * (s * x.tanh()).powi(2)).abs() < 1e-8);
    }
    let sup: f64 = t.meta_value("conservation_sup").unwrap().parse().unwrap();
    assert!(sup < 1e-6, "{sup}");

    let t = table(&["stress", "--state", "excited"]);
    assert!(t.rows.iter().flatten().all(|v| v.is_finite()));
    let last = t.rows.last().unwrap();
    // pressures decay, the energy density keeps its 1/x fluid tail
    for v in &last[2..] {
        assert!(v.abs() < 1e-8, "{last:?}");
    }
    let sup: f64 = t.meta_value("conservation_sup").unwrap().parse().unwrap();
    assert!(sup < 1e-5, "{sup}");

    let t = table(&["stress", "--state", "mixture:0.3", "--points", "50"]);
    assert_eq!(t.meta_value("state"), Some("mixture:0.3"));
}

#[test]
fn response_examples() {
    let t = table(&["response", "--gap-grid=-5:1:1", "--ells", "0.5,1"]);
    assert_eq!(t.columns, ["gapT", "L_ell=0.5", "L_ell=1", "pointlike"]);
    let gap = t.column("gapT").unwrap();
    let point = t.column("pointlike").unwrap();
    let zero = gap.iter().position(|g| *g == 0.0).unwrap();
    assert!((point[zero] - 1.0 / (4.0 * PI)).abs() < 1e-12);
    let asym = 5.0 / (2.0 * PI.sqrt());
    assert!((point[0] / asym - 1.0).abs() < 0.01);
    assert!(t.rows.iter().flat_map(|r| &r[1..]).all(|v| *v >= 0.0));

    let t = table(&["response", "--gap-grid=0:1:1", "--ells", "1", "--lambda", "0.1"]);
    let l = t.column("L_ell=1").unwrap();
    let w = t.column("excited_weight_ell=1").unwrap();
    for (a, b) in l.iter().zip(&w) {
        assert!((b - 0.01 * a).abs() <= 1e-15 * a.abs().max(1e-300));
    }
}

#[test]
fn scan_mu_examples() {
    let t = table(&["scan-mu"]);
    let m: f64 = t.meta_value("mu_star_margins").unwrap().parse().unwrap();
    assert!((m - 0.565017).abs() < 1e-4, "{m}");
    let interp: f64 = t.meta_value("sign_change_interpolated").unwrap().parse().unwrap();
    assert!((interp - 0.565017).abs() < 1e-3, "{interp}");

    let t = table(&["scan-mu", "--eta", "1"]);
    assert_eq!(t.meta_value("sign_change_interpolated"), Some("none"));
    assert_eq!(t.meta_value("mu_star_margins"), Some("none"));
    assert!(t.column("min_rho_minus_absP").unwrap().iter().all(|v| *v > 0.0));

    let t = table(&["scan-mu", "--eta", "0.3333333333333333"]);
    let c: f64 = t.meta_value("mu_star_closed_form").unwrap().parse().unwrap();
    assert!((c - 1.0).abs() < 1e-12);
}

#[test]
fn figure_presets_bake_parameters() {
    let fig = |name: &str| table(&["figure", "--figure", name, "--ell", "2", "--mu", "3.9", "--points", "60", "--gap-grid=-2:2:1"]);
    let t = fig("fig1");
    assert_eq!(t.meta_value("eta"), Some("0"));
    assert!(t.meta_value("preset").unwrap().contains("mu=ell^2/5"));
    // the preset ignores --mu: at mu = ell^2/5 the central pressure is g0/(1 - 1/5)
    assert!((t.rows[0][1] - 1.539713751 / 0.8).abs() < 1e-4);
    assert_eq!(fig("fig2").meta_value("eta"), Some("1"));
    assert_eq!(fig("figw").columns, ["x", "w_eta0", "w_eta1"]);
    assert!(fig("tmunu0").columns.contains(&"R_printed".to_string()));
    assert_eq!(fig("tmunu1").meta_value("state"), Some("excited"));
    let d = fig("deviator");
    for row in &d.rows {
        assert!((row[2] - row[4]).abs() < 1e-8);
    }
    let e = fig("excitation");
    assert_eq!(e.rows.len(), 5);
    assert_eq!(e.columns.len(), 6);
    assert!(e.meta_value("detector_mass").is_some());
}

#[test]
fn verify_report_is_deterministic() {
    let (a_code, a, _) = udw(&["verify"]);
    let (_, b, _) = udw(&["verify"]);
    assert_eq!(a_code, 0);
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(report["summary"]["fail"], 0);
    assert_eq!(report["summary"]["flagged"], 4);
    let flagged: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["status"] == "flagged")
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        flagged,
        [
            "closed_forms.pressure_ode_sign",
            "closed_forms.ground_components_conservation",
            "closed_forms.g_factor",
            "closed_forms.excited_pressure_prefactor"
        ]
    );

    let (code, strict, _) = udw(&["verify", "--strict-paper"]);
    assert_eq!(code, 1);
    let report: serde_json::Value = serde_json::from_str(&strict).unwrap();
    assert_eq!(report["summary"]["fail"], 4);
    assert_eq!(report["summary"]["flagged"], 0);
}

#[test]
fn verify_at_other_scale() {
    let (code, out, _) = udw(&["verify", "--ell", "2", "--mu", "0.8", "--m-c", "1", "--m-d", "2.5"]);
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    let failing: Vec<_> = report["checks"].as_array().unwrap().iter().filter(|c| c["status"] == "fail").collect();
    assert!(failing.is_empty(), "{failing:?}");
    assert_eq!(code, 0);
}
