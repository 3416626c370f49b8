//! End-to-end command behavior: artifacts, CSV layouts and exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use meshplan::instance::{load_instance, MatrixMode};
use meshplan::model::{check_constraints, Solution};
use meshplan::mopso::ArchiveFile;

fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["meshplan"];
    argv.extend_from_slice(args);
    meshplan_cli::run(argv)
}

fn toy_instance() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/toy_instance.json")
}

fn toy_fronts() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/toy_fronts.json")
}

fn small_plan(out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![
        "plan", "--grid", "4x4", "--dps", "40", "--swarm", "6", "--gmax", "5", "--seed", "3",
    ];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", out.to_str().unwrap()]);
    cli(&args)
}

#[test]
fn plan_writes_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(small_plan(dir.path(), &["--dump-routes"]), 0);
    for name in [
        "instance.json",
        "archive.json",
        "stats.csv",
        "cheapest.json",
        "summary.txt",
        "routes.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let instance = load_instance(dir.path().join("instance.json")).unwrap();
    let cheapest = Solution::load(dir.path().join("cheapest.json")).unwrap();
    assert!(check_constraints(&cheapest, &instance).feasible);

    let archive: ArchiveFile =
        serde_json::from_str(&fs::read_to_string(dir.path().join("archive.json")).unwrap())
            .unwrap();
    assert!(archive.entries.iter().all(|e| e.objectives.len() == 4));

    let stats = fs::read_to_string(dir.path().join("stats.csv")).unwrap();
    let mut lines = stats.lines();
    assert_eq!(
        lines.next().unwrap(),
        "generation,archive_size,min_cost,max_coverage,max_link_residual,min_gateway_balance"
    );
    assert_eq!(lines.count(), 5);

    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("archive") && summary.contains("cheapest"));
}

#[test]
fn coverage_model_archive_has_two_objectives() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(small_plan(dir.path(), &["--model", "cov"]), 0);
    let archive: ArchiveFile =
        serde_json::from_str(&fs::read_to_string(dir.path().join("archive.json")).unwrap())
            .unwrap();
    assert!(!archive.entries.is_empty());
    assert!(archive.entries.iter().all(|e| e.objectives.len() == 2));
}

#[test]
fn repeated_plans_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(small_plan(a.path(), &[]), 0);
    assert_eq!(small_plan(b.path(), &["--serial"]), 0);
    for name in ["archive.json", "stats.csv", "cheapest.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"grid": "4x4", "dps": 40, "swarm": 6, "gmax": 3, "model": "cov", "seed": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let code = cli(&[
        "plan",
        "--config",
        config.to_str().unwrap(),
        "--gmax",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let stats = fs::read_to_string(out.join("stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 1 + 4);
    let archive: ArchiveFile =
        serde_json::from_str(&fs::read_to_string(out.join("archive.json")).unwrap()).unwrap();
    assert!(archive.entries.iter().all(|e| e.objectives.len() == 2));

    fs::write(&config, r#"{"swarmz": 6}"#).unwrap();
    assert_eq!(cli(&["plan", "--config", config.to_str().unwrap()]), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(cli(&["plan", "--channels", "2", "--radios", "3"]), 1);
    assert_eq!(cli(&["plan", "--model", "xyz"]), 1);
    assert_eq!(cli(&["plan", "--grid", "6by6"]), 1);
    assert_eq!(cli(&["plan", "--gateways", "none"]), 1);
    assert_eq!(cli(&["plan", "--mut", "2"]), 1);
    assert_eq!(cli(&["plan", "--grid", "2x2", "--instance", "x.json"]), 1);
    assert_eq!(cli(&["sweep", "--axis", "grid", "--values", ""]), 1);
    assert_eq!(cli(&["sweep", "--axis", "colour", "--values", "1"]), 1);
    assert_eq!(cli(&["compare", "--models", "lglb"]), 1);
    assert_eq!(cli(&["verify", "--threshold", "1.5"]), 1);
    assert_eq!(cli(&["frobnicate"]), 1);
    assert_eq!(cli(&["--help"]), 0);
}

#[test]
fn unreachable_gateways_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let code = cli(&[
        "plan",
        "--grid",
        "6x6",
        "--hops",
        "1",
        "--gateways",
        "1",
        "--retries",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn oversized_verify_exits_three() {
    assert_eq!(cli(&["verify", "--grid", "4x4", "--dps", "10"]), 3);
}

#[test]
fn verify_against_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (instance, fronts) = (toy_instance(), toy_fronts());
    let base = [
        "verify",
        "--instance",
        instance.to_str().unwrap(),
        "--fixture",
        fronts.to_str().unwrap(),
        "--model",
        "llb",
        "--seed",
        "1",
    ];
    let mut args = base.to_vec();
    args.extend_from_slice(&["--out", dir.path().to_str().unwrap()]);
    assert_eq!(cli(&args), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report[0]["on_front_fraction"], 1.0);
    assert_eq!(report[0]["passed"], true);

    // Threshold 0 only asks that nothing archived is dominated.
    let mut lenient = base.to_vec();
    lenient.extend_from_slice(&["--swarm", "20", "--gmax", "200", "--threshold", "0"]);
    assert_eq!(cli(&lenient), 0);
}

#[test]
fn verify_rejects_fixture_of_another_instance() {
    let dir = tempfile::tempdir().unwrap();
    let mut instance = load_instance(toy_instance()).unwrap();
    instance.seed += 1;
    let path = dir.path().join("other.json");
    fs::write(&path, instance.to_json().unwrap()).unwrap();
    let fronts = toy_fronts();
    let code = cli(&[
        "verify",
        "--instance",
        path.to_str().unwrap(),
        "--fixture",
        fronts.to_str().unwrap(),
        "--swarm",
        "1",
        "--gmax",
        "1",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn sweep_writes_long_format_rows() {
    let dir = tempfile::tempdir().unwrap();
    let code = cli(&[
        "sweep",
        "--axis",
        "radios",
        "--values",
        "2,3",
        "--grid",
        "4x4",
        "--dps",
        "40",
        "--swarm",
        "4",
        "--gmax",
        "3",
        "--reps",
        "2",
        "--seed",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "axis,value,seed,aps,relays,gateways,total,coverage,link_residual,gateway_balance"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (r[1], r[2])).collect();
    assert_eq!(keys, vec![("2", "5"), ("2", "6"), ("3", "5"), ("3", "6")]);
    for r in &rows {
        let aps: usize = r[3].parse().unwrap();
        let relays: usize = r[4].parse().unwrap();
        assert_eq!(r[6].parse::<usize>().unwrap(), aps + relays);
    }
}

#[test]
fn compare_shares_instances_across_models() {
    let dir = tempfile::tempdir().unwrap();
    let code = cli(&[
        "compare",
        "--models",
        "cov,lglb",
        "--grid",
        "4x4,5x5",
        "--dps",
        "40",
        "--swarm",
        "4",
        "--gmax",
        "3",
        "--reps",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let mut reader = csv::Reader::from_path(dir.path().join("compare.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header[..4], ["grid", "seed", "model", "instance_hash"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2 * 2 * 2);
    for pair in rows.chunks(2) {
        assert_eq!(pair[0][0], pair[1][0]);
        assert_eq!(pair[0][1], pair[1][1]);
        assert_eq!(pair[0][3], pair[1][3], "models must see the same instance");
        assert_eq!((&pair[0][2], &pair[1][2]), ("cov", "lglb"));
    }
    assert_ne!(
        rows[0][3], rows[2][3],
        "repetitions use different instances"
    );
}

#[test]
fn instance_command_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let code = cli(&[
        "instance",
        "--grid",
        "3x5",
        "--dps",
        "12",
        "--random-matrices",
        "--seed",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let instance = load_instance(dir.path().join("instance.json")).unwrap();
    assert_eq!(
        (instance.rows, instance.cols, instance.num_dps()),
        (3, 5, 12)
    );
    assert_eq!(instance.matrices, MatrixMode::Random { density: 0.5 });
}
