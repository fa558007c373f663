//! End-to-end runs of the `mclab` binary.
//!
//! The file name sorts before the acceptance target so these run first.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mclab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mclab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn minimal_lyapunov_config_reports_exponent_and_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "[lyapunov]\nn = 20000\n");
    let out = mclab(&["lyapunov", "--config", "c.toml", "--out", "o"], dir.path());
    ok(&out);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1, "{stdout}");
    assert!(stdout.starts_with("lyapunov: lambda_hat="));
    let v = json(&dir.path().join("o/lyapunov.json"));
    assert_eq!(v["schema"], "mclab.v1");
    assert_eq!(v["experiment"], "lyapunov");
    for key in ["lambda_hat", "stderr", "n"] {
        assert!(!v["result"][key].is_null(), "missing {key}");
    }
    assert_eq!(v["result"]["n"], 20000);
}

#[test]
fn misspelled_key_exits_with_status_two_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", "[map]\nalhpa = 0.5\n");
    let out = mclab(&["lyapunov", "--config", "c.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alhpa"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_values_are_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "map.toml", "[map]\nalpha = 1.5\n");
    let out = mclab(&["physical", "--config", "map.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    write(dir.path(), "sweep.toml", "[sweep]\nsteps = 1\n");
    let out = mclab(&["sweep", "--config", "sweep.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep.steps"));

    let out = mclab(&["stochastic", "--eps-list", "0.01,0.02"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps_list"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.toml",
        "seed = 11\n[physical]\ngrid = 6\nn = 4000\n[basins]\nblock = 3\n[verify_ph]\nsamples = 5000\n",
    );
    for exp in ["basins", "verify-ph", "toy-check"] {
        ok(&mclab(&[exp, "--config", "c.toml", "--out", "a"], dir.path()));
        ok(&mclab(
            &[exp, "--config", "c.toml", "--out", "b", "--threads", "1"],
            dir.path(),
        ));
    }
    for f in ["basins.json", "basins.csv", "verify-ph.json", "toy-check.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    // a different seed moves the jittered grid
    ok(&mclab(
        &["basins", "--config", "c.toml", "--out", "c", "--seed", "12"],
        dir.path(),
    ));
    let a = std::fs::read(dir.path().join("a/basins.csv")).unwrap();
    let c = std::fs::read(dir.path().join("c/basins.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    ok(&mclab(&["toy-check", "--out", "o"], dir.path()));
    let text = std::fs::read_to_string(dir.path().join("o/toy-check.json")).unwrap();
    let line = text.lines().find(|l| l.contains("\"rho_closed_form\"")).unwrap();
    let num = line.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    assert_eq!(num.parse::<f64>().unwrap(), 0.75 * 3f64.ln());
    let mantissa = num.split('e').next().unwrap().replace('.', "");
    assert_eq!(mantissa.len(), 17, "{num}");
}

#[test]
fn disintegrate_reads_back_its_own_source() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.toml",
        "[disintegrate]\nnodes_log2 = 7\noracle_samples = 65536\n",
    );
    ok(&mclab(
        &["disintegrate", "--config", "c.toml", "--out", "a", "--n", "3"],
        dir.path(),
    ));
    let a = json(&dir.path().join("a/disintegrate.json"));
    assert_eq!(a["result"]["n"], 3);
    assert!(a["result"]["weak_distance"].as_f64().unwrap() < 1e-3);
    ok(&mclab(
        &[
            "disintegrate",
            "--config",
            "c.toml",
            "--out",
            "b",
            "--n",
            "3",
            "--in",
            "a/disintegrate-source.csv",
        ],
        dir.path(),
    ));
    let b = json(&dir.path().join("b/disintegrate.json"));
    let (wa, wb) = (
        a["result"]["weak_distance"].as_f64().unwrap(),
        b["result"]["weak_distance"].as_f64().unwrap(),
    );
    assert!((wa - wb).abs() <= 1e-12, "{wa} vs {wb}");
    let lift = std::fs::read_to_string(dir.path().join("b/disintegrate-lift.csv")).unwrap();
    assert!(lift.starts_with("node,theta,t,image_theta,image_t,rho,radius,child_nodes\n"));
}

#[test]
fn stochastic_reuses_a_physical_report() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.toml",
        "[physical]\ngrid = 8\nn = 20000\n[stochastic]\nn_burn = 1000\nn_samp = 5000\n",
    );
    ok(&mclab(&["physical", "--config", "c.toml", "--out", "o"], dir.path()));
    let phys = json(&dir.path().join("o/physical.json"));
    assert_eq!(phys["result"]["n_measures"], 2);
    write(
        dir.path(),
        "s.toml",
        "[physical]\ngrid = 8\nn = 20000\n[stochastic]\nn_burn = 1000\nn_samp = 5000\nreport = \"o/physical.json\"\n",
    );
    let out = mclab(
        &[
            "stochastic",
            "--config",
            "s.toml",
            "--out",
            "o",
            "--eps-list",
            "0.05,0.03",
            "--chains",
            "3",
        ],
        dir.path(),
    );
    ok(&out);
    let v = json(&dir.path().join("o/stochastic.json"));
    assert_eq!(v["result"]["vertices_from"], "file");
    assert_eq!(v["result"]["vertices"], 2);
    assert_eq!(v["params"]["chains"], 3);
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let alpha: Vec<f64> = serde_json::from_value(r["alpha"].clone()).unwrap();
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn degenerate_sweep_gives_identical_rows_and_flags_unresolved_ones() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.toml",
        "[sweep]\nalpha_min = 0.4\nalpha_max = 0.4\nsteps = 2\ngrid = 5\nn = 50\nunresolved_threshold = 0.01\n",
    );
    let out = mclab(&["sweep", "--config", "c.toml", "--out", "o"], dir.path());
    ok(&out);
    let v = json(&dir.path().join("o/sweep.json"));
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let strip = |r: &Value| {
        let mut r = r.clone();
        r.as_object_mut().unwrap().remove("index");
        r
    };
    assert_eq!(strip(&rows[0]), strip(&rows[1]));
    // a 50-step horizon cannot converge: both rows are flagged, the sweep still completes
    assert_eq!(v["result"]["flagged_rows"], serde_json::json!([0, 1]));
    assert!(dir.path().join("o/sweep-rows/row_0001.json").exists());
    let csv = std::fs::read_to_string(dir.path().join("o/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
