use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[dataset]
kind = "moons"
n = 160
noise = 0.1

[model]
layer_dims = [2, 10, 2]

[train]
epochs = 3
batch_size = 16

[lr]
lr_max = 0.05

[schedule]
s_f = 0.8

[experiment]
schedules = ["one-shot", "one-cycle"]
sparsities = [0.5, 0.8]
seeds = [0, 1]
alphas = [14.0]
betas = [4.0, 5.0]
max_epochs = 6
resolution = 21
"#;

fn prune_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prune-lab"))
        .current_dir(dir)
        .env_remove("PRUNE_LAB_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), config).unwrap();
    dir
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn schedule_command_writes_svg_and_csv() {
    let dir = setup(TINY);
    let out = prune_lab(dir.path(), &["--config", "exp.toml", "--out", "o", "schedule", "--quiet"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let svg = fs::read_to_string(dir.path().join("o/schedules.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].attribute("points").unwrap().split_whitespace().count(), 21);

    let out = prune_lab(
        dir.path(),
        &["--out", "b", "schedule", "--beta", "3", "--beta", "5", "--beta", "7", "--resolution", "9"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv_text = fs::read_to_string(dir.path().join("b/schedules.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    assert_eq!(rdr.headers().unwrap().len(), 4);
    assert_eq!(rdr.records().count(), 9);
}

#[test]
fn train_command_writes_all_artifacts() {
    let dir = setup(TINY);
    let out = prune_lab(dir.path(), &["--config", "exp.toml", "--out", "o", "--seed", "5", "train"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("one-cycle on moons"));
    assert!(stderr(&out).contains("defaults applied"));
    for f in ["metrics.csv", "accuracy.svg", "sparsity.svg", "lr.svg", "model.json", "config.toml"] {
        assert!(dir.path().join("o").join(f).exists(), "missing {f}");
    }
    let mut rdr = csv::Reader::from_path(dir.path().join("o/metrics.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().len(), 13);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[0][5], "5");

    let model = prune_lab::Network::load_json(&dir.path().join("o/model.json")).unwrap();
    assert_eq!(model.dims(), vec![2, 10, 2]);

    // The resolved config reproduces the run.
    let again = prune_lab(dir.path(), &["--config", "o/config.toml", "--out", "p", "--quiet", "train"]);
    assert_eq!(code(&again), 0, "{}", stderr(&again));
    assert_eq!(
        fs::read(dir.path().join("o/metrics.csv")).unwrap(),
        fs::read(dir.path().join("p/metrics.csv")).unwrap()
    );
}

#[test]
fn bench_output_is_identical_across_thread_counts() {
    let dir = setup(TINY);
    let one = prune_lab(dir.path(), &["--config", "exp.toml", "--out", "a", "--threads", "1", "--quiet", "bench"]);
    assert_eq!(code(&one), 0, "{}", stderr(&one));
    let many = Command::new(env!("CARGO_BIN_EXE_prune-lab"))
        .current_dir(dir.path())
        .env("PRUNE_LAB_THREADS", "4")
        .args(["--config", "exp.toml", "--out", "b", "--quiet", "bench"])
        .output()
        .unwrap();
    assert_eq!(code(&many), 0, "{}", stderr(&many));
    for f in ["metrics.csv", "bench.csv", "bench.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f} differs"
        );
    }
    let mut rdr = csv::Reader::from_path(dir.path().join("a/bench.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["schedule", "0.5", "0.8"]);
    assert_eq!(rdr.records().count(), 2);
    // 2 schedules x 2 sparsities x 2 seeds x 3 epochs.
    let metrics = csv::Reader::from_path(dir.path().join("a/metrics.csv")).unwrap().into_records().count();
    assert_eq!(metrics, 24);
    assert!(dir.path().join("a/accuracy-one-cycle-0.8.svg").exists());
}

#[test]
fn budget_command_needs_a_target_and_reports_relative_budgets() {
    let dir = setup(TINY);
    let out = prune_lab(dir.path(), &["--config", "exp.toml", "--out", "o", "budget"]);
    assert_eq!(code(&out), 1);
    let out = prune_lab(dir.path(), &["--config", "exp.toml", "--out", "o", "--quiet", "budget", "--target", "0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut rdr = csv::Reader::from_path(dir.path().join("o/budget.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    // Zero target: every schedule needs only the base budget.
    assert!(rows.iter().all(|r| &r[2] == "3" && &r[4] == "1.00x"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/budget.json")).unwrap()).unwrap();
    assert_eq!(json[1]["relative_budget"], 1.0);
}

#[test]
fn sweep_command_and_empty_sweep() {
    let dir = setup(TINY);
    let out = prune_lab(dir.path(), &["--config", "exp.toml", "--out", "o", "--quiet", "sweep"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("o/sweep.csv")).unwrap();
    assert!(text.starts_with("alpha,beta=4,beta=5\n14,"));

    let empty = setup(&TINY.replace("alphas = [14.0]", "alphas = []"));
    let out = prune_lab(empty.path(), &["--config", "exp.toml", "--out", "o", "--quiet", "sweep"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(empty.path().join("o/sweep.csv")).unwrap(), "alpha,beta=4,beta=5\n");
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = setup("[schedule]\nalpa = 14\n");
    let out = prune_lab(dir.path(), &["--config", "exp.toml", "--out", "o", "train"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("did you mean `alpha`"), "{}", stderr(&out));

    let dir = setup("[schedule]\ns_i = 0.9\ns_f = 0.5\n");
    let out = prune_lab(dir.path(), &["--config", "exp.toml", "--out", "o", "train"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("schedule.s_f"));

    let out = prune_lab(dir.path(), &["--config", "absent.toml", "--out", "o", "train"]);
    assert_eq!(code(&out), 2);

    let dir = setup("[dataset]\nsource = \"csv\"\npath = \"absent.csv\"\n[model]\nlayer_dims = [3, 2]\n");
    let out = prune_lab(dir.path(), &["--config", "exp.toml", "--out", "o", "train"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    let diverging = TINY.replace("lr_max = 0.05", "lr_max = 1e300\ndiv_start = 1.0");
    let dir = setup(&diverging);
    let out = prune_lab(dir.path(), &["--config", "exp.toml", "--out", "o", "train"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged"));

    let dir = setup(TINY);
    fs::write(dir.path().join("blocker"), "").unwrap();
    let out = prune_lab(dir.path(), &["--config", "exp.toml", "--out", "blocker/o", "train"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn diverged_bench_runs_are_flagged_not_fatal() {
    let diverging = TINY.replace("lr_max = 0.05", "lr_max = 1e300\ndiv_start = 1.0");
    let dir = setup(&diverging);
    let out = prune_lab(dir.path(), &["--config", "exp.toml", "--out", "o", "bench"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("failed"));
    let text = fs::read_to_string(dir.path().join("o/bench.csv")).unwrap();
    assert!(text.contains("failed"));
}
