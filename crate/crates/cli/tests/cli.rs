use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lshade-fht"))
}

#[test]
fn bounds_prints_prefactor() {
    let out = bin()
        .args(["bounds", "--dim", "30", "--n", "180", "--archive", "468"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let pref: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("prefactor\t"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((7.2e-8..=7.4e-8).contains(&pref), "{pref}");
}

#[test]
fn run_then_report_and_km() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "functions = [{ id = \"sphere\", dim = 2 }]\neps = [1e-1]\nruns = 3\nbudgets = [800]\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "3", "--jobs", "1"])
        .status()
        .unwrap();
    assert!(status.success());
    let km = std::fs::read_to_string(out.join("km_table.tsv")).unwrap();
    assert_eq!(km.lines().count(), 2);

    let status = bin().arg("report").arg("--logs").arg(out.join("logs")).status().unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read_to_string(out.join("km_table.tsv")).unwrap(), km);

    let cell = out.join("logs").join("sphere_d2_b800").join("eps_1e-1");
    let curve = bin().arg("km").arg("--cell").arg(&cell).output().unwrap();
    assert!(curve.status.success());
    assert!(String::from_utf8(curve.stdout).unwrap().starts_with("n\tS\tSE"));
}

#[test]
fn bad_input_exits_nonzero() {
    let out = bin().args(["run", "--config", "/nonexistent/exp.toml"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("error:"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "functions = [{ id = \"nope\", dim = 2 }]\neps = [1e-1]\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert!(!out.status.success());
    assert!(!dir.path().join("o").join("logs").exists());
}
