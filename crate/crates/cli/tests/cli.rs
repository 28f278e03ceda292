use std::path::Path;
use std::process::{Command, Output};

fn pinball(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinball")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn read(p: &str) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn all_closed_sample_traces_a_four_step_loop() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "c.cfg");
    let traj = path(dir.path(), "t.txt");
    let svg = path(dir.path(), "t.svg");
    assert_eq!(code(&pinball(&["sample", "--p", "1", "--extent", "8", "--seed", "7", "--out", &cfg])), 0);
    assert_eq!(code(&pinball(&["trace", "--config", &cfg, "--out", &traj, "--svg", &svg])), 0);
    let text = read(&traj);
    assert!(text.contains("status closed"));
    let states: Vec<&str> = text.lines().skip(7).collect();
    assert_eq!(states, ["0 0 E", "1 0 S", "1 -1 W", "0 -1 N"]);
    assert!(read(&svg).contains("<polygon"));
}

#[test]
fn estimate_at_p_zero_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "e.csv");
    let o = pinball(&["estimate", "--event", "Aprime", "--p", "0", "--n", "8", "--trials", "10", "--seed", "1", "--csv", &csv]);
    assert_eq!(code(&o), 0);
    let text = read(&csv);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "event,p,n,N,hits,estimate,ci_lo,ci_hi,seed,generator,walltime_ms");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "Aprime");
    assert_eq!(row[4], "0");
    assert_eq!(row[5], "0.000000");
    assert_eq!(row[10], "NA");
}

#[test]
fn estimate_csv_does_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for w in ["1", "4", "16"] {
        let csv = path(dir.path(), &format!("e{w}.csv"));
        let o = pinball(&[
            "estimate", "--event", "closure", "--p", "0.55,0.6", "--n", "6,10", "--trials", "200", "--seed", "5",
            "--enhanced", "--workers", w, "--csv", &csv,
        ]);
        assert_eq!(code(&o), 0);
        outputs.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    assert_eq!(String::from_utf8_lossy(&outputs[0]).lines().count(), 5);
}

#[test]
fn verify_passes_with_default_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "v.csv");
    let o = pinball(&[
        "verify", "--p", "0.5", "--n", "128", "--trials", "50", "--seed", "3", "--pattern", "default", "--csv", &csv,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("conditional_pass_rate=1.000000"));
    assert_eq!(read(&csv).lines().count(), 51);
}

#[test]
fn paired_estimate_reports_both_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "p.csv");
    let o = pinball(&[
        "estimate", "--event", "Aprime", "--p", "0.5", "--n", "8", "--trials", "100", "--seed", "2", "--paired", "--csv", &csv,
    ]);
    assert_eq!(code(&o), 0);
    let text = read(&csv);
    assert!(text.contains("\nAprime,") && text.contains("\nAprime+enhanced,"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "c.cfg");
    let o = pinball(&["sample", "--p", "1.5", "--extent", "4", "--seed", "1", "--out", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--p"));
    assert_eq!(code(&pinball(&["sample", "--extent", "4"])), 2);
    let o = pinball(&["trace", "--config", &path(dir.path(), "missing.cfg"), "--out", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config"));
    let o = pinball(&["verify", "--p", "0.5", "--n", "50", "--trials", "1", "--seed", "1", "--csv", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(!Path::new(&cfg).exists());
}

#[test]
fn failing_pattern_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.pattern");
    std::fs::write(&bad, "pattern 1\nname lone\nred 1 0\n").unwrap();
    let o = pinball(&["pattern", "check", "--pattern", &bad, "--trials", "20"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("detour[E]=fail"));
    let csv = path(dir.path(), "v.csv");
    let o = pinball(&["verify", "--p", "0.5", "--n", "101", "--trials", "1", "--seed", "1", "--pattern", &bad, "--csv", &csv]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&pinball(&["pattern", "check"])), 0);
}

#[test]
fn enhance_writes_changed_sites() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "c.cfg");
    let out = path(dir.path(), "e.cfg");
    let diff = path(dir.path(), "diff.txt");
    assert_eq!(code(&pinball(&["sample", "--p", "0.5", "--extent", "12", "--seed", "4", "--out", &cfg])), 0);
    let o = pinball(&["enhance", "--config", &cfg, "--out", &out, "--diff", &diff]);
    assert_eq!(code(&o), 0);
    assert!(read(&out).contains("provenance enhanced"));
    let changed = read(&diff).lines().count();
    assert!(String::from_utf8_lossy(&o.stdout).contains(&format!("{changed} sites closed")));
}

#[test]
fn event_witness_renders_and_rendering_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "c.cfg");
    let wit = path(dir.path(), "w.txt");
    assert_eq!(code(&pinball(&["sample", "--p", "1", "--extent", "9", "--seed", "1", "--out", &cfg])), 0);
    assert_eq!(code(&pinball(&["event", "--config", &cfg, "--event", "Acirc", "--n", "4", "--out", &wit])), 0);
    assert!(read(&wit).contains("holds true"));
    let mut svgs = Vec::new();
    for k in 0..2 {
        let svg = path(dir.path(), &format!("r{k}.svg"));
        let o = pinball(&[
            "render", "--config", &cfg, "--witness", &wit, "--pattern", "default", "--regions", "Q:4,Q:8", "--layers",
            "lattice,mirrors,circuit_witness,pattern_matches,regions", "--out", &svg,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        svgs.push(read(&svg));
    }
    assert_eq!(svgs[0], svgs[1]);
    assert!(svgs[0].contains("<g id=\"circuit_witness\""));
    assert_eq!(svgs[0].matches("<polygon").count(), 3);
}

#[test]
fn version_lists_formats_and_generator() {
    let o = pinball(&["--version"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("configuration format 1"));
    assert!(text.contains("generator chacha8-row-v1"));
}
