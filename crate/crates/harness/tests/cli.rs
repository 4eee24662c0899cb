use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use uqd_harness::manifest::{sha256_hex, RunManifest};

fn uqd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uqd"))
        .args(args)
        .current_dir(cwd)
        .env_remove("UQD_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn run_dir(tmp: &Path, out: &str, name: &str) -> PathBuf {
    tmp.join(out).join(name)
}

const SMALL: [&str; 4] = ["--generations", "8", "--sampling-size", "512"];

#[test]
fn run_writes_archive_trace_and_complete_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--task", "linear", "--algorithm", "me_weighted", "--seed", "1", "--out", "o"];
    args.extend(SMALL);
    let o = uqd(&args, tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(tmp.path(), "o", "linear__me_weighted__seed1");
    for f in ["archive.tsv", "trace.csv", "run.toml", "manifest.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let m = RunManifest::read(&dir).unwrap();
    assert!(m.verify(&dir).unwrap().is_empty());
    let listed: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(listed, ["archive.tsv", "run.toml", "trace.csv"]);
    let trace = std::fs::read(dir.join("trace.csv")).unwrap();
    assert_eq!(m.files[2].sha256, sha256_hex(&trace));
    assert_eq!(m.ledger.generations, 8);
    assert_eq!(m.ledger.offspring, 8 * 512 / 32);

    // Tampering shows up in verification.
    std::fs::write(dir.join("trace.csv"), b"x").unwrap();
    assert_eq!(m.verify(&dir).unwrap(), ["trace.csv"]);
}

#[test]
fn repeated_runs_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (out, threads) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let mut args = vec!["run", "--task", "deceptive", "--algorithm", "as_delta", "--seed", "9", "--out", out];
        args.extend(["--generations", "6", "--sampling-size", "4096"]);
        args.extend(["--threads", threads]);
        assert_eq!(code(&uqd(&args, tmp.path())), 0);
        let dir = run_dir(tmp.path(), out, "deceptive__as_delta__seed9");
        files.push((std::fs::read(dir.join("archive.tsv")).unwrap(), std::fs::read(dir.join("trace.csv")).unwrap()));
        let h = RunManifest::read(&dir).unwrap().config_hash;
        files.last_mut().unwrap().0.extend(h.bytes());
    }
    assert!(files.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 7] = [
        &["run", "--task", "linear", "--algorithm", "me_delta", "--delta-f", "0.1", "--out", "o"],
        &["run", "--task", "linear", "--algorithm", "me_delta", "--delta-r", "0.1", "--out", "o"],
        &["run", "--task", "nowhere", "--algorithm", "me_delta", "--out", "o"],
        &["run", "--task", "linear", "--algorithm", "me_bogus", "--out", "o"],
        &["run", "--task", "linear", "--out", "o"],
        &["run", "--task", "linear", "--algorithm", "me_weighted", "--delta-f", "-1", "--delta-r", "0", "--out", "o"],
        &["evaluate", "--out", "x"],
    ];
    for args in cases {
        let o = uqd(args, tmp.path());
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("c.toml"),
        r#"
schema_version = 1
tasks = ["linear", "unavoidable_peak"]
seeds = [3, 4]
generations = 4
sampling_size = 256
out = "from_file"

[[algorithms]]
algorithm = "me_weighted"

[[algorithms]]
algorithm = "me_delta"
label = "delta_custom"
delta_f = 0.1
delta_r = 0.01
"#,
    )
    .unwrap();
    let o = uqd(&["run", "--config", "c.toml", "--seed", "7", "--generations", "2"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut made: Vec<String> = std::fs::read_dir(tmp.path().join("from_file"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    made.sort();
    assert_eq!(
        made,
        [
            "linear__delta_custom__seed7",
            "linear__me_weighted__seed7",
            "unavoidable_peak__delta_custom__seed7",
            "unavoidable_peak__me_weighted__seed7",
        ]
    );
    let m = RunManifest::read(&tmp.path().join("from_file/linear__delta_custom__seed7")).unwrap();
    assert_eq!(m.ledger.generations, 2);
    let toml = std::fs::read_to_string(tmp.path().join("from_file/linear__delta_custom__seed7/run.toml")).unwrap();
    assert!(toml.contains("delta_f = 0.1"));

    // Unknown keys are rejected.
    std::fs::write(tmp.path().join("bad.toml"), "schema_version = 1\ntasks = [\"linear\"]\nalgorithms = []\nsedes = [1]\n")
        .unwrap();
    assert_eq!(code(&uqd(&["run", "--config", "bad.toml"], tmp.path())), 2);
}

#[test]
fn out_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--task", "linear", "--algorithm", "vanilla_me"];
    args.extend(SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_uqd"))
        .args(&args)
        .current_dir(tmp.path())
        .env("UQD_OUT", "envroot")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("envroot/linear__vanilla_me__seed1/archive.tsv").is_file());
}

#[test]
fn evaluate_project_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    for (algo, seed) in [("mome_x", "1"), ("me_weighted", "1")] {
        let mut args = vec!["run", "--task", "linear", "--algorithm", algo, "--seed", seed, "--out", "r"];
        args.extend(SMALL);
        assert_eq!(code(&uqd(&args, p)), 0);
    }
    let mome = "r/linear__mome_x__seed1";
    let weighted = "r/linear__me_weighted__seed1";
    let before = std::fs::read(p.join(mome).join("manifest.json")).unwrap();

    assert_eq!(code(&uqd(&["project", "--run", weighted, "--delta-f", "0", "--delta-r", "0", "--out", "x"], p)), 2);
    assert_eq!(code(&uqd(&["project", "--run", mome, "--delta-f", "0.05", "--delta-r", "0.05", "--out", "pa"], p)), 0);
    assert_eq!(code(&uqd(&["project", "--run", mome, "--delta-f", "0", "--delta-r", "1", "--label", "mome_x_b", "--out", "pb"], p)), 0);
    assert!(RunManifest::read(&p.join("pa")).unwrap().verify(&p.join("pa")).unwrap().is_empty());

    // Missing archive names the run and exits 1.
    std::fs::create_dir_all(p.join("r/broken")).unwrap();
    std::fs::copy(p.join(weighted).join("run.toml"), p.join("r/broken/run.toml")).unwrap();
    let o = uqd(&["evaluate", "--run", weighted, "r/broken", "--out", "e"], p);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken"));

    for (reevals, out) in [("4", "e4"), ("64", "e64")] {
        let o = uqd(&["evaluate", "--run", weighted, "pa", "pb", mome, "--reevals", reevals, "--out", out], p);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let m4 = std::fs::read_to_string(p.join("e4/metrics.csv")).unwrap();
    let m64 = std::fs::read_to_string(p.join("e64/metrics.csv")).unwrap();
    assert_eq!(m4.lines().next(), m64.lines().next());
    assert_eq!(m4.lines().count(), 5);
    assert_ne!(m4, m64);

    // Evaluation never touches the run directories.
    assert_eq!(std::fs::read(p.join(mome).join("manifest.json")).unwrap(), before);
    for d in [mome, weighted] {
        assert!(RunManifest::read(&p.join(d)).unwrap().verify(&p.join(d)).unwrap().is_empty());
    }

    // The unprojected MOME-X run and `pa` share label and seed.
    assert_eq!(code(&uqd(&["report", "--metrics", "e64", "--out", "rep"], p)), 2);
    let o = uqd(&["evaluate", "--run", weighted, "pa", "pb", "--reevals", "16", "--out", "e16"], p);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&uqd(&["report", "--metrics", "e16/metrics.csv", "--out", "rep"], p)), 0);
    let sig = std::fs::read_to_string(p.join("rep/significance_average_fitness.csv")).unwrap();
    assert_eq!(sig.lines().count(), 1 + 3, "three labels on one task give three pairs");
    assert!(sig.contains("insufficient n"));
    let heat = std::fs::read_to_string(p.join("rep/heatmaps/pa__fitness.csv")).unwrap();
    assert_eq!(heat.lines().count(), 33);
    assert!(heat.lines().all(|l| l.split(',').count() == 33));
}
