use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_reachcast"));
    cmd.env("REACHCAST_THREADS", "1");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_with_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: TempDir,
    corpus: PathBuf,
    model: PathBuf,
    replay: PathBuf,
}

/// A two-user corpus, a time-to-grasp model trained on it and one trial
/// from an unseen corpus to replay.
fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let corpus = dir.path().join("corpus");
        let out = run(&["synth", "--users", "3", "--reps", "1", "--seed", "5", "--out", path(&corpus)]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        let trained = dir.path().join("trained");
        let out = run(&[
            "train", "--data", path(&corpus), "--task", "time", "--target-windows", "2500", "--epochs", "15",
            "--out", path(&trained),
        ]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        let other = dir.path().join("other");
        let out = run(&["synth", "--users", "1", "--reps", "1", "--seed", "99", "--out", path(&other)]);
        assert!(out.status.success());
        Fixture {
            corpus,
            model: trained.join("model.gpm"),
            replay: other.join("u01-cylinder_medium-r1.csv"),
            _dir: dir,
        }
    })
}

fn data_rows(recording: &Path) -> Vec<String> {
    fs::read_to_string(recording)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("frame"))
        .map(String::from)
        .collect()
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["teleport"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn filter_lists_26_taps() {
    let out = run(&["filter", "--order", "25", "--cutoff", "25", "--rate", "960"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("tap ")).count(), 26);
    let db_200: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("200 "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(db_200 <= -40.0);
}

#[test]
fn synth_writes_recordings_manifest_and_config_reproducibly() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = run(&["synth", "--users", "2", "--set", "synthetic", "--reps", "1", "--seed", "7", "--out", path(d)]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    }
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let recordings = names.iter().filter(|n| n.ends_with(".csv") && *n != "manifest.csv").count();
    assert_eq!(recordings, 18);
    assert!(names.contains(&"manifest.csv".to_string()));
    let config = fs::read_to_string(a.join("config.txt")).unwrap();
    assert!(config.contains("seed = 7"));
    assert!(config.contains("noise = 0.3"));
    for n in &names {
        if n != "config.txt" {
            assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
        }
    }
}

#[test]
fn missing_data_directory_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let out = run(&["train", "--data", path(&dir.path().join("nope")), "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupt_recordings_are_skipped_with_a_warning() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    fs::create_dir(&data).unwrap();
    for entry in fs::read_dir(&f.corpus).unwrap() {
        let p = entry.unwrap().path();
        fs::copy(&p, data.join(p.file_name().unwrap())).unwrap();
    }
    fs::write(data.join("zz-broken.csv"), "#GRSPREC v1 nonsense\n1,2,3\n").unwrap();
    let out = run(&[
        "eval", "--data", path(&data), "--protocol", "kfold4", "--target-windows", "200", "--epochs", "1",
        "--out", path(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("zz-broken.csv"));
    assert!(text(&out.stdout).contains("loaded 27 recordings"));
}

#[test]
fn training_is_bit_reproducible() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let mut models = Vec::new();
    for run_name in ["one", "two"] {
        let out_dir = dir.path().join(run_name);
        let out = run(&[
            "train", "--data", path(&f.corpus), "--task", "size", "--target-windows", "300", "--epochs", "2",
            "--out", path(&out_dir),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        assert!(out_dir.join("config.txt").exists());
        assert!(out_dir.join("training.csv").exists());
        models.push(fs::read(out_dir.join("model.gpm")).unwrap());
    }
    assert_eq!(models[0], models[1]);
    assert_eq!(&models[0][..4], b"GPM1");
}

#[test]
fn eval_writes_fold_rows_and_runtime_curves() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "eval", "--data", path(&f.corpus), "--task", "time", "--protocol", "kfold4,l1uo", "--target-windows", "300",
        "--epochs", "1", "--runtime-model", path(&f.model), "--out", path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("protocol,task,features,window,fold,metric,value"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let kfold_folds = rows.iter().filter(|r| r[0] == "kfold4" && r[4].starts_with("fold=")).count();
    let l1uo_folds = rows.iter().filter(|r| r[0] == "l1uo" && r[4].starts_with("user=")).count();
    assert_eq!((kfold_folds, l1uo_folds), (4, 3));
    assert!(rows.iter().any(|r| r[0] == "kfold4" && r[4] == "mean"));
    let curves = fs::read_to_string(dir.path().join("curves.jsonl")).unwrap();
    assert!(curves.lines().count() > 5);
    assert!(curves.lines().all(|l| l.starts_with("{\"curve\":") && l.contains("\"bin_lo\":")));
}

#[test]
fn transfer_reports_pre_and_post_metrics() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "transfer", "--data", path(&f.corpus), "--user", "u02", "--sizes", "0,20", "--target-windows", "600",
        "--epochs", "1", "--transfer-epochs", "2", "--out", path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.contains("transfer,distance,vh+fp,25,u02:20,mae_distance_mm_post,"));
    assert!(dir.path().join("model_u02_20.gpm").exists());

    let out = run(&[
        "transfer", "--data", path(&f.corpus), "--user", "u02", "--sizes", "5000", "--target-windows", "600",
        "--epochs", "1", "--out", path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn features_export_has_named_columns() {
    let f = fixture();
    let dir = TempDir::new().unwrap();
    let out = run(&["features", "--input", path(&f.replay), "--features", "vh+fp", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("features.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 3 + 16);
    assert_eq!(header[3], "vh");
    assert_eq!(header[4], "fp_thumb_x");
    assert!(csv.lines().count() > 100);
}

#[test]
fn short_stream_gives_warmup_notice_only() {
    let f = fixture();
    let rows = data_rows(&f.replay);
    let input = rows[..24].join("\n") + "\n";
    let out = run_with_stdin(&["predict", "--model", path(&f.model)], input.as_bytes());
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(text(&out.stderr).contains("no predictions"));
    assert!(text(&out.stderr).contains("latency"));
}

/// Time-to-grasp model trained on the default 16-user corpus balanced to the
/// default 35,000 windows, for 30 epochs.
fn desk_time_model() -> &'static (TempDir, PathBuf) {
    static MODEL: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    MODEL.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let corpus = dir.path().join("corpus");
        assert!(run(&["synth", "--out", path(&corpus)]).status.success());
        let trained = dir.path().join("trained");
        let out = run(&[
            "train", "--data", path(&corpus), "--task", "time", "--epochs", "30", "--out", path(&trained),
        ]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        let model = trained.join("model.gpm");
        (dir, model)
    })
}

#[test]
fn replayed_trial_predicts_decreasing_time_to_grasp() {
    let f = fixture();
    let (_, model) = desk_time_model();
    let rows = data_rows(&f.replay);
    let mut input = String::from("frame_index,garbage\nnot,a,row\n");
    input.push_str(&(rows.join("\n") + "\n"));
    let first = run_with_stdin(&["predict", "--model", path(model)], input.as_bytes());
    assert_eq!(first.status.code(), Some(0), "{}", text(&first.stderr));
    assert!(text(&first.stderr).contains("skipping malformed row"));
    let second = run_with_stdin(&["predict", "--model", path(model)], input.as_bytes());
    assert_eq!(first.stdout, second.stdout);

    // The approach runs from the moment the hand reference (last sensor)
    // has covered 5% of its reach until the object touch.
    let parsed: Vec<(u64, bool, bool, [f64; 3])> = rows
        .iter()
        .map(|r| {
            let f: Vec<&str> = r.split(',').collect();
            let hand = [f[37].parse().unwrap(), f[38].parse().unwrap(), f[39].parse().unwrap()];
            (f[0].parse().unwrap(), f[1] == "1", f[2] == "1", hand)
        })
        .collect();
    let start = parsed.iter().position(|f| !f.1).unwrap();
    let grasp = parsed.iter().position(|f| f.2).unwrap();
    let dist = |a: [f64; 3], b: [f64; 3]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    let reach = dist(parsed[grasp].3, parsed[start].3);
    let begin = (start..grasp).find(|&i| dist(parsed[i].3, parsed[start].3) >= 0.05 * reach).unwrap();
    let (from, to) = (parsed[begin].0, parsed[grasp].0);
    let times: Vec<f64> = text(&first.stdout)
        .lines()
        .filter_map(|l| {
            let mut it = l.split(',');
            let frame: u64 = it.next()?.parse().ok()?;
            let t: f64 = it.next()?.parse().ok()?;
            (frame >= from && frame < to).then_some(t)
        })
        .collect();
    assert!(times.len() > 200, "{} predictions", times.len());
    let decreasing = times.windows(2).filter(|w| w[1] <= w[0]).count();
    let share = decreasing as f64 / (times.len() - 1) as f64;
    assert!(share >= 0.95, "only {:.1}% of consecutive predictions decrease", 100.0 * share);
}
