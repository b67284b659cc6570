use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn nemsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nemsched")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn inputs() -> Vec<String> {
    vec!["--config".into(), data("household.json").display().to_string(), "--scenario".into(), data("scenario.json").display().to_string()]
}

fn run(cmd: &str, extra: &[&str], out: &Path) -> Output {
    let mut args: Vec<String> = vec![cmd.into()];
    args.extend(inputs());
    args.extend(extra.iter().map(|s| s.to_string()));
    args.extend(["--out".into(), out.display().to_string()]);
    nemsched(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn validate_accepts_reference_household() {
    let out = nemsched(&["validate", "--config", data("household.json").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "OK");
}

#[test]
fn validate_names_a_broken_chain() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("household.json")).unwrap().replace("\"salvage\": 0.35", "\"salvage\": 0.39");
    let path = dir.path().join("broken.json");
    std::fs::write(&path, text).unwrap();
    let out = nemsched(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("price/penalty chain"), "{stdout}");
}

#[test]
fn validate_missing_file_is_an_io_error() {
    let out = nemsched(&["validate", "--config", "/nonexistent/household.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/household.json"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(code(&nemsched(&["benchmark", "--bogus"])), 2);
    assert_eq!(code(&nemsched(&[])), 2);
}

#[test]
fn malformed_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ \"horizon\": 3 }").unwrap();
    assert_eq!(code(&nemsched(&["validate", "--config", path.to_str().unwrap()])), 2);
}

#[test]
fn thresholds_writes_tables_and_recursion_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("thresholds", &["--hour", "12"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    // On-peak and second off-peak rows step down by exactly the charger rate.
    let steps: Vec<&str> =
        stdout.lines().filter(|l| l.contains(" on ") || l.contains(" off2 ")).filter_map(|l| l.split_whitespace().last()).collect();
    assert!(steps.iter().filter(|s| **s != "-").all(|s| *s == "3.6000"), "{stdout}");

    let (header, rows) = read_csv(&dir.path().join("thresholds.csv"));
    assert_eq!(header, ["t", "tau", "delta", "sigma_plus", "sigma_minus"]);
    assert_eq!(rows.len(), 16);
    let (header, _) = read_csv(&dir.path().join("values.csv"));
    assert_eq!(header, ["t", "y", "value", "slope"]);
    let (_, rows) = read_csv(&dir.path().join("boundaries.csv"));
    assert_eq!(rows.len(), 16);
}

#[test]
fn storage_free_thresholds_collapse_the_storage_zones() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("thresholds", &["--model", "storage-free", "--y", "6", "--s", "3"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("boundaries.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for row in &rows {
        let x = |name: &str| row[col(name)].parse::<f64>().unwrap();
        assert_eq!(x("delta_plus_prime"), x("delta_plus"));
        assert_eq!(x("delta_1"), x("delta_2"));
        assert_eq!(x("delta_3"), x("delta_4"));
        assert_eq!(x("delta_minus_prime"), x("delta_minus"));
    }
}

#[test]
fn thresholds_rejects_a_foreign_hour() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run("thresholds", &["--hour", "2"], dir.path())), 1);
}

#[test]
fn oracle_benchmark_has_zero_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("benchmark", &["--policies", "oracle", "--runs", "20", "--scales", "0.5,1,1.5"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("results.csv"));
    assert_eq!(header, ["policy", "renewable_scale", "n_runs", "mean_surplus", "std_err", "gap_to_oracle"]);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[0] == "oracle" && r[5].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn default_benchmark_covers_every_policy_and_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("benchmark", &["--runs", "12", "--mpc-runs", "2"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.path().join("results.csv"));
    assert_eq!(rows.len(), 15);
    let mut keys: Vec<(String, String)> = rows.iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 15);
    assert!(rows.iter().filter(|r| r[0] == "mpc").all(|r| r[2] == "2"));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("scale 0.5") && stdout.contains("scale 1.5"));
}

#[test]
fn band_check_needs_mo() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("benchmark", &["--policies", "pr", "--runs", "5", "--scales", "1", "--paper-band-check"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn trace_writes_one_row_per_interval() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("trace", &["--runs", "2", "--policies", "mo,pr"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for p in ["mo", "pr"] {
        let (header, rows) = read_csv(&dir.path().join(format!("trace_{p}.csv")));
        assert_eq!(header, ["episode", "t", "s", "y", "r", "v", "e", "d_total", "z", "zone", "reward"]);
        assert_eq!(rows.len(), 32);
    }
}
