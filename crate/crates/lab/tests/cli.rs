//! End-to-end runs of the `qubus` binary.

use std::path::Path;
use std::process::{Command, Output};

fn qubus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qubus"))
        .args(args)
        .env_remove("QUBUS_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn growth_output_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in ["1", "3", "8"] {
        let csv = dir.path().join(format!("g{threads}.csv"));
        let jsonl = dir.path().join(format!("g{threads}.jsonl"));
        let o = qubus(&[
            "growth", "merge", "--p", "0.8", "--L", "30", "--trials", "3000", "--seed", "11",
            "--threads", threads,
            "--csv", csv.to_str().unwrap(),
            "--jsonl", jsonl.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files.push((read(&csv), read(&jsonl)));
    }
    assert!(files.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(String::from_utf8_lossy(&files[0].1).lines().count(), 3000);
}

#[test]
fn sequential_csv_has_z_column() {
    let o = qubus(&["growth", "sequential", "--p", "0.75", "--L", "41", "--trials", "20000", "--seed", "7"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let header = "variant,p,L,trials,mean_ops,ci_ops,mean_time,ci_time,mean_wasted,analytic_ops,z_score";
    let row = text.lines().skip_while(|l| *l != header).nth(1).expect("csv row");
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[9], "80");
    assert!(fields[10].parse::<f64>().unwrap().is_finite());
}

#[test]
fn vertical_link_mean_qubits() {
    let o = qubus(&["growth", "vertical", "--p", "0.75", "--trials", "100000"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("consumed")).unwrap();
    let mean: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((mean - 14.0 / 3.0).abs() < 0.01 * 14.0 / 3.0, "{mean}");
}

#[test]
fn rejected_configs_exit_nonzero() {
    assert!(!qubus(&["growth", "sequential", "--p", "0.5", "--L", "10"]).status.success());
    assert!(!qubus(&["growth", "merge", "--p", "1.5", "--L", "10"]).status.success());
    assert!(!qubus(&["growth", "vertical", "--trials", "0"]).status.success());
    assert!(!qubus(&["gate", "parity-momentum", "--alpha", "-1"]).status.success());
    assert!(!qubus(&["gate", "teleport"]).status.success());
    let o = qubus(&["scaling", "--series", "dc,warp", "--lengths", "10"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown series"));
}

#[test]
fn seed_comes_from_flag_then_file_then_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"variant": "vertical", "p": 0.6, "trials": 500, "seed": 4}"#).unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_qubus"));
        c.args(["growth", "--config", cfg.to_str().unwrap()]).args(extra);
        match env {
            Some(v) => c.env("QUBUS_SEED", v),
            None => c.env_remove("QUBUS_SEED"),
        };
        stdout(&c.output().unwrap())
    };
    let from_file = run(&[], Some("99"));
    assert!(from_file.contains("p = 0.6 trials = 500 seed = 4"));
    assert!(run(&["--seed", "8"], None).contains("seed = 8"));
    assert!(run(&["--p", "0.9"], None).contains("p = 0.9 trials = 500"));
    std::fs::write(&cfg, r#"{"variant": "vertical", "trials": 10}"#).unwrap();
    assert!(run(&[], Some("99")).contains("seed = 99"));
    std::fs::write(&cfg, r#"{"variant": "vertical", "tirals": 10}"#).unwrap();
    let mut c = Command::new(env!("CARGO_BIN_EXE_qubus"));
    assert!(!c.args(["growth", "--config", cfg.to_str().unwrap()]).output().unwrap().status.success());
}

#[test]
fn gate_examples() {
    let o = qubus(&["gate", "three-qubit", "--alpha", "1000", "--theta", "0.003"]);
    assert!(o.status.success());
    let mut probs: Vec<f64> = stdout(&o)
        .lines()
        .filter(|l| l.starts_with("ghz") || l.starts_with("bell-q3") || l.starts_with("product"))
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    probs.sort_by(f64::total_cmp);
    assert_eq!(probs, vec![0.125, 0.125, 0.25, 0.25, 0.25]);

    let o = qubus(&["gate", "parity-momentum", "--alpha", "1", "--theta", "0"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("error budget: 0.5\n"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning:"));

    let o = qubus(&["gate", "chain", "--n", "5", "--beta", "sqrt(pi/8)"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("stabilizer check: PASS"));

    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("wrong.txt");
    std::fs::write(&g, "0 1\n1 2\n2 0\n").unwrap();
    let o = qubus(&["gate", "chain", "--n", "3", "--graph", g.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("stabilizer check: FAIL"));

    let csv = dir.path().join("bucket.csv");
    let o = qubus(&["gate", "parity-bucket", "--alpha", "4", "--theta", "0.3", "--resolving", "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("gate,label,probability,window_probability,fidelity,corrections\n"));
    assert!(text.contains("parity-bucket,even-bell-2,"));
}

#[test]
fn scaling_table_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ops.csv");
    let svg = dir.path().join("ops.svg");
    let o = qubus(&[
        "scaling", "--series", "dc,merge,seq", "--p", "0.75", "--l-min", "5", "--l-max", "400",
        "--csv", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap(), "--log-y",
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 80);
    let value = |l: &str, s: &str| -> f64 {
        let key = format!("ops,{l},{s},");
        text.lines().find(|x| x.starts_with(&key)).unwrap()[key.len()..].parse().unwrap()
    };
    assert!(value("100", "divide-conquer") < value("100", "merge"));
    assert!(value("400", "divide-conquer") > value("400", "merge"));
    let plot = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(plot.matches("<polyline").count(), 3);

    let o = qubus(&["scaling", "--figure", "time", "--series", "dc,merge,seq", "--lengths", "400"]);
    let out = stdout(&o);
    let t = |s: &str| -> f64 { out.lines().find(|l| l.contains(&format!(",{s},"))).unwrap().rsplit(',').next().unwrap().parse().unwrap() };
    assert!(t("divide-conquer") < t("merge") && t("merge") < t("sequential"));

    let o = qubus(&["scaling", "--series", "merge", "--lengths", "40"]);
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn verify_exit_code_follows_failures_only() {
    let o = qubus(&["verify", "--quick", "--only", "1,9"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("criterion  9  flag"));
    assert!(text.contains("94"));
    let o = qubus(&["verify", "--only", "7"]);
    assert_eq!(o.status.code(), Some(1));
}
