use std::fs;
use std::path::Path;
use std::process::Command;

use chowla_lab::runner::{parse_config, run, RunManifest, Status};

fn run_text(text: &str) -> RunManifest {
    let config = parse_config(text).unwrap_or_else(|d| panic!("{d:#?}"));
    run(&config, text).unwrap()
}

fn with_dir(body: &str, dir: &Path, threads: usize, segment: u64) -> String {
    format!(
        "[global]\nmax_n = 1e6\noutput_dir = {:?}\nthreads = {threads}\nsegment_size = {segment}\nseed = 5\n\n{body}",
        dir.display().to_string()
    )
}

const TWO: &str = r#"
[[experiment]]
name = "pair"
kind = "correlate"
functions = ["liouville", "liouville"]
shifts = [0, 1]
grid = { x0 = 100, max = 1e5, ratio = 10 }

[[experiment]]
name = "race"
kind = "race"
grid = { x0 = 10, max = 1e5, ratio = 10 }
"#;

#[test]
fn empty_config_gives_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_text(&with_dir("", dir.path(), 1, 1 << 16));
    assert!(m.experiments.is_empty());
    assert_eq!(m.sweeps, 0);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn one_correlation_writes_one_csv() {
    let dir = tempfile::tempdir().unwrap();
    let body = "[[experiment]]\nname = \"lam\"\nkind = \"correlate\"\nfunctions = [\"liouville\", \"liouville\"]\nshifts = [0, 1]\ngrid = { x0 = 1e3, max = 1e6, ratio = 10 }\n";
    let m = run_text(&with_dir(body, dir.path(), 0, 1 << 20));
    assert_eq!(m.experiments.len(), 1);
    let e = &m.experiments[0];
    assert_eq!(e.status, Status::Ok);
    assert_eq!(e.outputs, vec![dir.path().join("lam.csv")]);
    let csv = fs::read_to_string(dir.path().join("lam.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    let on_disk: RunManifest = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk.experiments[0].outputs, e.outputs);
}

#[test]
fn experiments_share_one_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_text(&with_dir(TWO, dir.path(), 2, 1 << 14));
    assert!(m.all_ok());
    assert_eq!(m.sweeps, 1);
    let s = m.sweep.unwrap();
    // One pass over [1, 1e5] plus one-integer halos per block.
    assert_eq!(s.limit, 100_000);
    assert!(s.values_sieved >= s.limit && s.values_sieved <= s.limit + 2 * s.blocks, "{s:?}");
    assert!(m.throughput > 0.0);
}

#[test]
fn failing_experiment_does_not_stop_the_others() {
    let dir = tempfile::tempdir().unwrap();
    // A directory where the race CSV should go makes that write fail.
    fs::create_dir_all(dir.path().join("race.csv")).unwrap();
    let m = run_text(&with_dir(TWO, dir.path(), 1, 1 << 16));
    let by_name = |n: &str| m.experiments.iter().find(|e| e.name == n).unwrap();
    assert_eq!(by_name("pair").status, Status::Ok);
    assert_eq!(by_name("race").status, Status::Failed);
    assert!(by_name("race").error.is_some());
    assert!(!m.all_ok());
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "json") && !p.ends_with("manifest.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let body = format!(
        "{TWO}{}",
        r#"
[[experiment]]
name = "smooth"
kind = "smooth"
alpha = "1/2"
beta = "1/3"
grid = { x0 = 100, max = 1e5 }

[[experiment]]
name = "pat"
kind = "patterns"
k = 4
n = 1e5

[[experiment]]
name = "tp"
kind = "three_point"
function = "lambda_q(3)"
shifts = [0, 1, 2]
windows = [[1e5, 100]]

[[experiment]]
name = "st"
kind = "straighten"
mode = "dirichlet"
trials = 20
epsilon = 0.05
"#
    );
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    // Block layout depends on the segment length only, so thread count
    // cannot change the order of any floating-point operation.
    run_text(&with_dir(&body, a.path(), 1, 5000));
    run_text(&with_dir(&body, b.path(), 3, 5000));
    run_text(&with_dir(&body, c.path(), 2, 5000));
    let fa = csv_files(a.path());
    assert!(fa.len() >= 6);
    for other in [csv_files(b.path()), csv_files(c.path())] {
        assert_eq!(fa.len(), other.len());
        for ((na, da), (nb, db)) in fa.iter().zip(&other) {
            assert_eq!(na, nb);
            assert!(da == db, "{na} differs:\n{}\n---\n{}", String::from_utf8_lossy(da), String::from_utf8_lossy(db));
        }
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_chowla-lab")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(&good, with_dir(TWO, &dir.path().join("out"), 1, 1 << 16)).unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[[experiment]]\nname = \"x\"\nkind = \"correlate\"\nfunctions = [\"char(q=4,index=5)\"]\nshifts = [0]\ngrid = 100\n").unwrap();

    assert_eq!(cli(&["validate", good.to_str().unwrap()]).status.code(), Some(0));
    let v = cli(&["validate", bad.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&v.stdout).contains(":4:"));
    assert_eq!(cli(&["run", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(cli(&["run", good.to_str().unwrap()]).status.code(), Some(0));
    assert!(dir.path().join("out/manifest.json").exists());

    fs::create_dir_all(dir.path().join("out/race.csv")).ok();
    fs::remove_file(dir.path().join("out/race.csv")).ok();
    fs::create_dir_all(dir.path().join("out/race.csv")).unwrap();
    assert_eq!(cli(&["run", good.to_str().unwrap()]).status.code(), Some(2));

    let out = dir.path().join("direct");
    let r = cli(&["race", "--max", "1e4", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("race.csv")).unwrap();
    assert!(csv.starts_with("scale,empirical,target,gap"));
    assert_eq!(cli(&["smooth", "--alpha", "3/2", "--beta", "1/2", "--max", "1e4"]).status.code(), Some(1));
    assert_eq!(cli(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn thread_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_chowla-lab"))
        .env("CHOWLA_THREADS", "3")
        .args(["race", "--max", "1e4", "--threads", "1", "--out-dir", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.threads, 3);
}
