use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn zeroquant(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeroquant"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic file in the layout of the classic married-women labour supply
/// data: annual hours with a spike at zero and the usual covariates.
fn labour_supply_csv(path: &Path) {
    let mut text = String::from("inlf,hours,nwifeinc,educ,exper,expersq,age,kidslt6,kidsge6\n");
    for i in 0..150u64 {
        let h = |k: u64| ((i * 2654435761 + k * 40503) % 1000) as f64 / 1000.0;
        let educ = 8.0 + (h(1) * 10.0).floor();
        let exper = (h(2) * 30.0).floor();
        let age = 30.0 + (h(3) * 30.0).floor();
        let kidslt6 = (h(4) * 3.0).floor();
        let kidsge6 = (h(5) * 4.0).floor();
        let nwifeinc = 5.0 + 40.0 * h(6);
        let latent =
            -300.0 + 80.0 * educ + 40.0 * exper - 0.5 * exper * exper - 20.0 * age - 600.0 * kidslt6 - 10.0 * nwifeinc
                + 900.0 * (h(7) - 0.5);
        let hours = latent.max(0.0).round();
        text.push_str(&format!(
            "{},{hours},{nwifeinc},{educ},{exper},{},{age},{kidslt6},{kidsge6}\n",
            (hours > 0.0) as u8,
            exper * exper
        ));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn tobit_fit_on_labour_supply_layout() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("mroz.csv");
    labour_supply_csv(&data);
    let out = dir.path().join("out");
    let res = zeroquant(&[
        "fit",
        "--data",
        s(&data),
        "--response",
        "hours",
        "--x",
        "nwifeinc,educ,exper,expersq,age,kidslt6,kidsge6",
        "--variant",
        "tobit",
        "--tau",
        "0.25,0.5,0.75",
        "--standardize",
        "--iters",
        "400",
        "--burnin",
        "100",
        "--level",
        "0.95",
        "--out-dir",
        s(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for tag in ["0.25", "0.5", "0.75"] {
        for f in [
            format!("draws_tau{tag}.csv"),
            format!("summary_tau{tag}.json"),
            format!("censor_profile_tau{tag}.csv"),
        ] {
            assert!(out.join(&f).exists(), "{f}");
        }
    }
    let header = fs::read_to_string(out.join("draws_tau0.5.csv")).unwrap();
    assert_eq!(
        header.lines().nth(1),
        Some("iter,beta_0,beta_1,beta_2,beta_3,beta_4,beta_5,beta_6,beta_7,sigma")
    );
}

#[test]
fn fit_replay_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(
        &data,
        "y,a,b\n0,1,2\n1.5,2,1\n3,0.5,0.1\n0,0.2,0.4\n2,0.3,0.9\n4,1.1,0.3\n",
    )
    .unwrap();
    let a = dir.path().join("a");
    let res = zeroquant(&[
        "fit",
        "--data",
        s(&data),
        "--response",
        "y",
        "--x",
        "a",
        "--z",
        "b",
        "--transform",
        "sqrt",
        "--iters",
        "300",
        "--burnin",
        "100",
        "--seed",
        "7",
        "--level",
        "0.9",
        "--out-dir",
        s(&a),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let b = dir.path().join("b");
    let res = zeroquant(&["fit", "--manifest", s(&a.join("manifest.json")), "--out-dir", s(&b)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["draws_tau0.5.csv", "summary_tau0.5.json", "censor_profile_tau0.5.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let profile = fs::read_to_string(a.join("censor_profile_tau0.5.csv")).unwrap();
    assert_eq!(
        profile.lines().nth(1),
        Some("obs_id,tau,prob,quantile,quantile_response")
    );
    assert!(profile.lines().nth(2).unwrap().starts_with("1,0.5,"));

    let res = zeroquant(&["summarize", "--draws", s(&a.join("draws_tau0.5.csv")), "--level", "0.5"]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("\"schema_version\": 1") && text.contains("\"gamma_1\""));
}

#[test]
fn censor_curve_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let res = zeroquant(&[
        "censor-curve",
        "--mu",
        "-1",
        "--sigma",
        "1",
        "--tau",
        "0.5",
        "--p-steps",
        "4",
        "--out",
        s(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "mu,sigma,tau,p,f0,prob");
    assert_eq!(lines.len(), 2 + 5);
    assert!(lines[2].ends_with(",1.0"));
    assert!(lines[6].ends_with(",0.0"));
}

#[test]
fn simulate_smoke_and_bad_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"n": 100, "replications": 2, "fit": {"taus": [0.25, 0.75], "iters": 200, "burnin": 50}}"#,
    )
    .unwrap();
    let out = dir.path().join("sim");
    let res = zeroquant(&["simulate", "--spec", s(&spec), "--out-dir", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rows = fs::read_to_string(out.join("replications.csv")).unwrap();
    assert_eq!(rows.lines().count(), 2 + 4);

    fs::write(&spec, r#"{"n": "many"}"#).unwrap();
    let res = zeroquant(&["simulate", "--spec", s(&spec), "--out-dir", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("invalid simulation spec"));
}

#[test]
fn parse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, "y,a\n1,0\n-3,1\n").unwrap();
    let res = zeroquant(&[
        "fit",
        "--data",
        s(&data),
        "--response",
        "y",
        "--x",
        "a",
        "--level",
        "0.9",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("row 2"), "{err}");

    let res = zeroquant(&["fit", "--data", s(&data), "--response", "y"]);
    assert_eq!(res.status.code(), Some(2));
}
