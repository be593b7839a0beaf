use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "round,alive_count,total_residual_j,coverage_fraction,ch_fraction,election_iterations";

fn hetsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetsim"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn hetsim")
}

fn csv_rows(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.ends_with('\n'));
    let mut lines = text.lines().map(str::to_string);
    assert_eq!(lines.next().as_deref(), Some(HEADER));
    lines.collect()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn writes_per_run_and_mean_series_for_every_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = hetsim(&[
        "--nodes",
        "30",
        "--rounds",
        "4",
        "--runs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut expected = vec!["manifest.toml".to_string()];
    for a in ["heed", "heteng", "leach"] {
        expected.extend([format!("{a}_avg.csv"), format!("{a}_run0.csv"), format!("{a}_run1.csv")]);
    }
    expected.sort();
    assert_eq!(listing(&out), expected);

    let rows = csv_rows(&out.join("leach_run0.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("1,30,"));
    assert!(rows[3].ends_with(",1"), "leach always takes one iteration: {}", rows[3]);

    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("[run]"));
    assert!(manifest.contains("algorithms = [\"heteng\", \"leach\", \"heed\"]"));
    assert!(manifest.contains("nodes = 30"));
}

#[test]
fn flags_override_config_and_config_picks_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.toml");
    fs::write(
        &config,
        "nodes = 20\nrounds = 6\nruns = 1\n\n[election]\nstrategy = \"heed\"\nc_prob = 0.1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = hetsim(&[
        "--config",
        config.to_str().unwrap(),
        "--rounds",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(listing(&out), vec!["heed_avg.csv", "heed_run0.csv", "manifest.toml"]);
    assert_eq!(csv_rows(&out.join("heed_run0.csv")).len(), 3);

    // an explicit algorithm beats the config's strategy
    let out2 = dir.path().join("out2");
    let o = hetsim(&[
        "--config",
        config.to_str().unwrap(),
        "--algorithm",
        "LEACH",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(listing(&out2), vec!["leach_avg.csv", "leach_run0.csv", "manifest.toml"]);
    assert_eq!(csv_rows(&out2.join("leach_avg.csv")).len(), 6);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = hetsim(&[
            "--algorithm",
            "heteng",
            "--nodes",
            "40",
            "--rounds",
            "15",
            "--runs",
            "1",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        fs::read(out.join("heteng_run0.csv")).unwrap()
    };
    let a = run("a", "7");
    assert_eq!(a, run("b", "7"));
    assert_ne!(a, run("c", "8"));
}

#[test]
fn invalid_inputs_fail_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[election]\nc_prob = 1.5\n").unwrap();
    let o = hetsim(&["--config", bad.to_str().unwrap(), "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("election.c_prob"));

    let typo = dir.path().join("typo.toml");
    fs::write(&typo, "[election]\ncprob = 0.1\n").unwrap();
    let o = hetsim(&["--config", typo.to_str().unwrap(), "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("election.cprob"));

    let o = hetsim(&[
        "--config",
        dir.path().join("missing.toml").to_str().unwrap(),
        "--out",
        out,
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.toml"));

    let o = hetsim(&["--algorithm", "smart-beem", "--out", out]);
    assert!(!o.status.success());

    let file = dir.path().join("taken");
    fs::write(&file, "").unwrap();
    let o = hetsim(&[
        "--nodes",
        "5",
        "--rounds",
        "1",
        "--runs",
        "1",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a directory"));

    let o = hetsim(&["--bogus"]);
    assert!(!o.status.success());

    let o = hetsim(&["--nodes", "0", "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nodes"));
}
