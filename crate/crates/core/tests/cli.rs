use std::fs;
use std::path::Path;

use serde_json::Value;
use tempfile::TempDir;

use sfd::cli::run;

fn sfd(args: &[&str]) -> i32 {
    run(std::iter::once("sfd").chain(args.iter().copied()))
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) {
    let out = dir.to_str().unwrap();
    let mut args = vec!["simulate", "--n", "200", "--seed", "5", "--out-dir", out];
    args.extend_from_slice(extra);
    assert_eq!(sfd(&args), 0);
}

#[test]
fn simulate_then_fit_round_trip() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), &[]);
    let data = dir.path().join("simulated.csv");
    assert!(data.exists());
    let out = dir.path().to_str().unwrap();
    let code = sfd(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--regressors",
        "x",
        "--order-1d",
        "x",
        "--kind",
        "sfd",
        "--se",
        "hc",
        "--out-dir",
        out,
    ]);
    assert_eq!(code, 0);
    let fit = json(&dir.path().join("fit.json"));
    assert_eq!(fit["config"]["command"], "fit");
    assert!(fit["result"].is_object());
    assert!(dir.path().join("fit.csv").exists());
    assert!(dir.path().join("run_config.json").exists());
}

#[test]
fn simulation_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    simulate(a.path(), &["--dgp", "spillover"]);
    simulate(b.path(), &["--dgp", "spillover"]);
    let read = |d: &TempDir| fs::read(d.path().join("simulated.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn orderings_are_mutually_exclusive_and_required() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), &[]);
    let data = dir.path().join("simulated.csv");
    let data = data.to_str().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        sfd(&[
            "fit",
            "--data",
            data,
            "--regressors",
            "x",
            "--order-1d",
            "x",
            "--grid",
            "we",
            "--out-dir",
            out
        ]),
        2
    );
    assert_eq!(sfd(&["fit", "--data", data, "--regressors", "x", "--out-dir", out]), 2);
}

#[test]
fn computation_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), &[]);
    let data = dir.path().join("simulated.csv");
    let out = dir.path().to_str().unwrap();
    let code = sfd(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--regressors",
        "no_such_column",
        "--order-1d",
        "x",
        "--out-dir",
        out,
    ]);
    assert_eq!(code, 1);
    assert_eq!(sfd(&["simulate", "--n", "3", "--out-dir", out]), 1);
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(sfd(&["--help"]), 0);
    assert_eq!(sfd(&["fit", "--help"]), 0);
}

#[test]
fn monte_carlo_preset_and_replay_agree() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        sfd(&[
            "monte-carlo",
            "--preset",
            "fig5-point",
            "--reps",
            "20",
            "--out-dir",
            out
        ]),
        0
    );
    let first = json(&dir.path().join("monte_carlo.json"));
    assert_eq!(first["config"]["seed"], 1);

    let replay_dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run_config.json");
    assert_eq!(
        sfd(&[
            "replay",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            replay_dir.path().to_str().unwrap()
        ]),
        0
    );
    let second = json(&replay_dir.path().join("monte_carlo.json"));
    assert_eq!(first["result"], second["result"]);
}

#[test]
fn out_dir_falls_back_to_environment() {
    let dir = TempDir::new().unwrap();
    // the only test in this binary that touches the variable
    unsafe { std::env::set_var(sfd::cli::OUT_DIR_ENV, dir.path()) };
    let code = sfd(&["simulate", "--n", "50"]);
    unsafe { std::env::remove_var(sfd::cli::OUT_DIR_ENV) };
    assert_eq!(code, 0);
    assert!(dir.path().join("simulated.csv").exists());
}

#[test]
fn grid_commands_write_their_artifacts() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), &["--dgp", "channel-confounded", "--rows", "8"]);
    let data = dir.path().join("simulated.csv");
    let polys = dir.path().join("polygons.csv");
    assert!(polys.exists());
    let (data, polys) = (data.to_str().unwrap(), polys.to_str().unwrap());
    let out = dir.path().to_str().unwrap();
    let base = ["--data", data, "--regressors", "x,c_proxy,w1,w2", "--out-dir", out];

    let with = |head: &[&str], tail: &[&str]| {
        let mut v: Vec<&str> = head.to_vec();
        v.extend_from_slice(&base);
        v.extend_from_slice(tail);
        sfd(&v)
    };
    assert_eq!(with(&["sdd-check"], &["--grid", "we"]), 0);
    assert!(dir.path().join("sdd_check.json").exists());
    assert_eq!(
        with(
            &["extreme-bounds"],
            &["--grid", "we", "--focal", "x", "--group", "x", "--group", "c_proxy", "--group", "w=w1+w2"]
        ),
        0
    );
    let eb = json(&dir.path().join("extreme_bounds.json"));
    assert_eq!(eb["result"]["points"].as_array().unwrap().len(), 8);
    assert_eq!(
        with(&["se-table"], &["--grid", "we", "--se", "ols,hc,cluster,bootstrap:200"]),
        0
    );
    assert!(dir.path().join("se_table.csv").exists());
    assert_eq!(
        with(&["rotate-sweep", "--polygons", polys], &["--thetas", "0,45,-30"]),
        0
    );
    let sweep = json(&dir.path().join("rotation_sweep.json"));
    assert_eq!(sweep["result"]["points"].as_array().unwrap().len(), 3);
    assert_eq!(with(&["channels", "--polygons", polys], &["--theta", "30"]), 0);
    assert!(dir.path().join("channels.csv").exists());
}

#[test]
fn exact_fit_csv_gives_exact_slope() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("exact.csv");
    fs::write(
        &data,
        "id,coord_x,coord_y,y,x\na,1,0,1,0\nb,2,0,3,1\nc,3,0,9,4\nd,4,0,5,2\ne,5,0,15,7\n",
    )
    .unwrap();
    let code = sfd(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--regressors",
        "x",
        "--kind",
        "sfd",
        "--order-1d",
        "x",
        "--se",
        "newey-west:2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let fit = json(&dir.path().join("fit.json"));
    let x = &fit["result"]["fit"]["coefficients"][1];
    assert_eq!(x["name"], "x");
    assert!((x["estimate"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(x["std_error"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn sinusoid_preset_centres_sfd_on_the_truth() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        sfd(&[
            "monte-carlo",
            "--preset",
            "fig5-point",
            "--reps",
            "1000",
            "--out-dir",
            out
        ]),
        0
    );
    let mc = json(&dir.path().join("monte_carlo.json"));
    let sfd_est = mc["result"]["estimators"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["label"] == "sfd")
        .unwrap();
    let slope = sfd_est["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "x")
        .unwrap();
    let mean = slope["mean"].as_f64().unwrap();
    assert!((mean - 1.0).abs() <= 0.02, "mean sfd slope {mean}");
    assert!(dir.path().join("monte_carlo_draws.csv").exists());
}
