use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_gameda");

fn gameda(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("GAMEDA_THREADS").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn cournot_config(horizon: usize, trials: usize, exponent: f64, out: &str) -> String {
    format!(
        r#"
[game]
kind = "cournot"
firms = 3
a = 5.0
b = 1.0
c = 1.0
capacity = 10.0

[step]
policy = "power"
initial = 1.0
exponent = {exponent}

[noise]
kind = "gaussian"
sigma = 1.0

[run]
horizon = {horizon}
trials = {trials}
seed = 11

[output]
dir = "{out}"
"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read_dir_sorted(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn smoke_run_writes_ten_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &cournot_config(10, 1, 0.6, "out"));
    let out = gameda(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(tmp.path().join("out/trial_0000.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "trial,n,gamma_n,gap,fenchel,distance,length,ergodic_gap,bound_gap_ergodic,bound_length"
    );
    assert_eq!(lines.len() - 1, 10);
    assert!(tmp.path().join("out/summary.csv").exists());
}

#[test]
fn exponent_above_one_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &cournot_config(10, 1, 1.5, "out"));
    let out = gameda(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("step.exponent"), "{}", stderr(&out));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn missing_document_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[game]
kind = "document"
path = "nowhere.game"

[step]
policy = "constant"
gamma = 0.1

[noise]
kind = "none"

[run]
horizon = 10
trials = 1
seed = 1

[output]
dir = "out"
"#;
    let cfg = write(tmp.path(), "c.toml", text);
    let out = gameda(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("nowhere.game"));
}

#[test]
fn document_games_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "pennies.game",
        "finite-game players=2\nplayer 1 strategies=2\nplayer 2 strategies=2\n\
         payoff 1 1 1 = 1\npayoff 1 1 2 = -1\npayoff 1 2 1 = -1\npayoff 1 2 2 = 1\n\
         payoff 2 1 1 = -1\npayoff 2 1 2 = 1\npayoff 2 2 1 = 1\npayoff 2 2 2 = -1\n",
    );
    let text = r#"
[game]
kind = "document"
path = "pennies.game"

[regularizer]
kinds = ["entropic"]

[step]
policy = "power"
initial = 1.0
exponent = 0.7

[noise]
kind = "action-sampling"

[run]
horizon = 200
trials = 2
seed = 3

[candidate]
source = "explicit"
point = [0.5, 0.5, 0.5, 0.5]

[output]
dir = "out"
"#;
    let cfg = write(tmp.path(), "c.toml", text);
    let out = gameda(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(tmp.path().join("out/trial_0001.csv").exists());
}

#[test]
fn numeric_abort_exits_three_and_leaves_no_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = cournot_config(50, 2, 0.6, "out").replace(
        "policy = \"power\"\ninitial = 1.0\nexponent = 0.6",
        "policy = \"constant\"\ngamma = 1e14",
    );
    let cfg = write(tmp.path(), "c.toml", &text);
    let out = gameda(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(!tmp.path().join("out/trial_0000.csv").exists());
}

#[test]
fn failing_assertion_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let text = cournot_config(10, 2, 0.6, "out") + "\n[assertions]\nmedian_final_distance_max = 1e-9\n";
    let cfg = write(tmp.path(), "c.toml", &text);
    let out = gameda(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stdout(&out).contains("FAIL median_final_distance_max"));
}

#[test]
fn reruns_and_thread_counts_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &cournot_config(500, 6, 0.6, "out"));
    let mut runs = Vec::new();
    for threads in [None, Some("1"), Some("8")] {
        let mut cmd = Command::new(BIN);
        cmd.args(["run", cfg.to_str().unwrap()]);
        match threads {
            Some(t) => cmd.env("GAMEDA_THREADS", t),
            None => cmd.env_remove("GAMEDA_THREADS"),
        };
        let out = cmd.output().unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        runs.push(read_dir_sorted(&tmp.path().join("out")));
    }
    assert_eq!(runs[0].len(), 7);
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn bad_thread_count_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &cournot_config(10, 1, 0.6, "out"));
    let out = Command::new(BIN).args(["run", cfg.to_str().unwrap()]).env("GAMEDA_THREADS", "zero").output().unwrap();
    assert_eq!(code(&out), 2);
}

fn parse_f(s: &str) -> Option<f64> {
    (!s.is_empty()).then(|| s.parse().unwrap())
}

#[test]
fn summary_means_match_trial_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &cournot_config(300, 5, 0.6, "out"));
    assert_eq!(code(&gameda(&["run", cfg.to_str().unwrap()])), 0);
    let dir = tmp.path().join("out");
    let cols = ["gap", "fenchel", "distance", "length", "ergodic_gap"];
    // (n, metric) -> values across trials
    let mut values: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for t in 0..5 {
        let text = std::fs::read_to_string(dir.join(format!("trial_{t:04}.csv"))).unwrap();
        let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
        for (i, row) in rows.iter().enumerate() {
            for (j, col) in cols.iter().enumerate() {
                if let Some(v) = parse_f(row[3 + j]) {
                    values.entry((row[1].to_string(), col.to_string())).or_default().push(v);
                    if i + 1 == rows.len() {
                        values.entry(("final".into(), col.to_string())).or_default().push(v);
                    }
                }
            }
        }
    }
    let summary = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    let mut checked = 0;
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let vals = &values[&(f[0].to_string(), f[1].to_string())];
        assert_eq!(f[2].parse::<usize>().unwrap(), vals.len());
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let reported: f64 = f[3].parse().unwrap();
        assert!((mean - reported).abs() <= 1e-12 * mean.abs().max(1.0), "{line}");
        checked += 1;
    }
    assert!(checked > 50);
}

#[test]
fn bound_columns_come_from_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let text = cournot_config(64, 2, 0.7, "out") + "\n[bounds]\nstrong_stability = \"hessian\"\nepsilon = 0.2\n";
    let cfg = write(tmp.path(), "c.toml", &text);
    assert_eq!(code(&gameda(&["run", cfg.to_str().unwrap()])), 0);
    let a = std::fs::read_to_string(tmp.path().join("out/trial_0000.csv")).unwrap();
    let b = std::fs::read_to_string(tmp.path().join("out/trial_0001.csv")).unwrap();
    let tail = |s: &str| s.lines().skip(1).map(|l| l.splitn(9, ',').nth(8).unwrap().to_string()).collect::<Vec<_>>();
    // different noise, same bound columns
    assert_ne!(a, b);
    assert_eq!(tail(&a), tail(&b));
    assert!(tail(&a).iter().all(|t| !t.ends_with(',')));
}

#[test]
fn validate_reports_and_exits() {
    let out = gameda(&["validate", "fenchel"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS ")));
    let out = gameda(&["validate", "gradients"]);
    assert_eq!(code(&out), 0);
    assert_eq!(code(&gameda(&["validate", "unknown"])), 2);
}

#[test]
fn parse_check_accepts_and_rejects() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(
        tmp.path(),
        "g.game",
        "congestion-game players=1\nresource r alpha=1 beta=0.5\nplayer 1 load=1\npath 1 only = r\n",
    );
    let out = gameda(&["parse-check", good.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let bad = write(
        tmp.path(),
        "b.game",
        "congestion-game players=1\nresource r alpha=1 beta=0.5\nplayer 1 load=1\npath 1 only = r,s\n",
    );
    let out = gameda(&["parse-check", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains(":4:"), "{}", stderr(&out));
}

#[test]
fn montecarlo_trivial_cases() {
    let out = gameda(&["montecarlo-hessian", "--n-list", "1", "--samples", "200", "--seed", "5"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "N,fraction_nd\n1,1.000000\n");
    let out = gameda(&["montecarlo-hessian", "--n-list", "2,7,30", "--samples", "100", "--seed", "5", "--symmetric"]);
    assert_eq!(stdout(&out), "N,fraction_nd\n2,1.000000\n7,1.000000\n30,1.000000\n");
    assert_eq!(code(&gameda(&["montecarlo-hessian", "--n-list", "2", "--samples", "0"])), 2);
}
