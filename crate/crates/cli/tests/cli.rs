use std::path::{Path, PathBuf};
use std::process::Command;

use pdmd_core::archive::load_model;
use pdmd_core::io::read_dataset;
use pdmd_core::metrics::{frobenius_rel_error, parse_reports, time_rel_error};
use pdmd_core::synth::{generate, SynthSpec};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn pdmd(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_pdmd")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_linear(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["synth", "--family", "linear", "--nh", "32", "--np", "5", "--nt", "40", "--modes", "4", "--seed", "3", "-o", s(&out)];
    args.extend_from_slice(extra);
    let r = pdmd(&args);
    assert_eq!(r.code, 0, "{}", r.stderr);
    out
}

fn fit(data: &Path, alg: &str, out: &Path, extra: &[&str]) -> Run {
    let mut args = vec!["fit", "--data", s(data), "--algorithm", alg, "--rank", "4", "-o", s(out)];
    args.extend_from_slice(extra);
    pdmd(&args)
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth_linear(dir.path(), "a.pdmd", &[]);
    let b = synth_linear(dir.path(), "b.pdmd", &[]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let spec = std::fs::read_to_string(dir.path().join("a.pdmd.spec.json")).unwrap();
    assert!(SynthSpec::from_json(&spec).is_ok());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(pdmd(&["synth", "--family", "bogus", "-o", "x"]).code, 2);
    assert_eq!(pdmd(&["--threads", "0", "inspect", "x"]).code, 2);
    assert_eq!(pdmd(&["fit", "--algorithm", "roi"]).code, 2);
    assert_eq!(pdmd(&["--help"]).code, 0);
}

#[test]
fn missing_file_is_a_data_error() {
    let r = pdmd(&["inspect", "/nonexistent/file.pdmd"]);
    assert_eq!(r.code, 3, "{}", r.stderr);
}

#[test]
fn fit_reports_training_error_and_archive_loads() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_linear(dir.path(), "d.pdmd", &[]);
    let model = dir.path().join("roi.model");
    let r = fit(&data, "roi", &model, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let errors: Vec<f64> = r
        .stdout
        .lines()
        .filter_map(|l| l.split("error=").nth(1))
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(errors.len(), 5);
    assert!(errors.iter().all(|&e| e <= 1e-6), "{errors:?}");
    assert!(load_model(&model).is_ok());
    let r = pdmd(&["inspect", s(&model)]);
    assert!(r.stdout.contains("algorithm: ROI"), "{}", r.stdout);
}

#[test]
fn rank_beyond_data_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_linear(dir.path(), "d.pdmd", &[]);
    let r = pdmd(&["fit", "--data", s(&data), "--algorithm", "roi", "--rank", "500", "-o", s(&dir.path().join("m"))]);
    assert_ne!(r.code, 0);
    assert!(r.stderr.contains("fit roi"), "{}", r.stderr);
    assert!(!r.stderr.contains("panicked"));
}

#[test]
fn time_window_counts_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("facility.pdmd");
    let r = pdmd(&["synth", "--family", "linear", "--nh", "24", "--np", "3", "--nt", "401", "--dt", "10", "--modes", "4", "-o", s(&data)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = fit(&data, "roi", &dir.path().join("m"), &["--time-window", "1400,2800"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("training columns: 141"), "{}", r.stdout);
}

#[test]
fn predict_matches_data_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_linear(dir.path(), "d.pdmd", &[]);
    let spec = SynthSpec::from_json(&std::fs::read_to_string(dir.path().join("d.pdmd.spec.json")).unwrap()).unwrap();
    let (d, oracle) = generate(&spec).unwrap();
    let model = dir.path().join("roi.model");
    assert_eq!(fit(&data, "roi", &model, &["--train-idx", "0,2,4"]).code, 0);

    let out = dir.path().join("p.pdmd");
    let mu = format!("{}", d.params()[2][0]);
    let r = pdmd(&["predict", "--model", s(&model), "--mu", &mu, "-o", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("online regressor fits: 0"));
    let p = read_dataset::<f64>(&out).unwrap();
    assert!(frobenius_rel_error(&d.trajectories()[2], &p.trajectories()[0]).unwrap() <= 1e-8);

    let mid = format!("{}", d.params()[1][0]);
    let r = pdmd(&["predict", "--model", s(&model), "--mu", &mid, "--count", "80", "-o", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let p = read_dataset::<f64>(&out).unwrap();
    assert_eq!(p.n_t(), 80);
    let truth = oracle.trajectory(&d.params()[1], p.grid().instants()).unwrap();
    assert!(frobenius_rel_error(&truth, &p.trajectories()[0]).unwrap() <= 1e-6);

    let r = pdmd(&["predict", "--model", s(&model), "--mu", "0.1,0.2", "-o", s(&out)]);
    assert_ne!(r.code, 0);
}

#[test]
fn latent_interpolation_reports_online_fits() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_linear(dir.path(), "d.pdmd", &[]);
    let model = dir.path().join("mono.model");
    assert_eq!(fit(&data, "mono", &model, &[]).code, 0);
    let r = pdmd(&["predict", "--model", s(&model), "--mu", "0.3", "--count", "12", "-o", s(&dir.path().join("p"))]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("online regressor fits: 12"), "{}", r.stdout);
}

#[test]
fn eval_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_linear(dir.path(), "d.pdmd", &[]);
    let mut models = Vec::new();
    for alg in ["roi", "rkoi", "mono", "part"] {
        let m = dir.path().join(format!("{alg}.model"));
        let r = fit(&data, alg, &m, &["--test-idx", "1,3"]);
        assert_eq!(r.code, 0, "{alg}: {}", r.stderr);
        models.push(m);
    }
    let report = dir.path().join("r.jsonl");
    let mut args = vec!["eval", "--data", s(&data), "--test-idx", "1,3", "--report", s(&report)];
    for m in &models {
        args.extend(["--model", s(m)]);
    }
    let r = pdmd(&args);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let header: Vec<&str> = r.stdout.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["parameter", "algorithm", "error", "time_s"]);
    let reports = parse_reports(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(reports.len(), 8);

    let d = read_dataset::<f64>(&data).unwrap();
    let times = d.grid().instants();
    let m = load_model(&models[0]).unwrap();
    let eps = time_rel_error(&d.trajectories()[1], &m.predict(&d.params()[1], times).unwrap()).unwrap();

    let csv = dir.path().join("plot.csv");
    assert_eq!(pdmd(&["plotdata", s(&report), "-o", s(&csv)]).code, 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8 * times.len());
    let series: Vec<f64> = rows
        .iter()
        .filter(|r| r[2] == "roi" && r[3] == format!("{}", d.params()[1][0]))
        .map(|r| r[1].parse().unwrap())
        .collect();
    assert_eq!(series.len(), eps.len());
    assert!(series.iter().zip(&eps).all(|(a, b)| (a - b).abs() <= 1e-12));

    let r = pdmd(&["plotdata"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout, "time,value,algorithm,parameter\n");
}

#[test]
fn eval_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_linear(dir.path(), "d.pdmd", &[]);
    let model = dir.path().join("rkoi.model");
    assert_eq!(fit(&data, "rkoi", &model, &["--test-idx", "2"]).code, 0);
    let strip = |p: &Path| {
        let mut r = parse_reports(&std::fs::read_to_string(p).unwrap()).unwrap();
        r.iter_mut().for_each(|x| x.online_seconds = 0.0);
        r
    };
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        let r = pdmd(&["--threads", "1", "eval", "--data", s(&data), "--model", s(&model), "--test-idx", "2", "--report", s(p)]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_linear(dir.path(), "d.pdmd", &[]);
    let cfg = dir.path().join("fit.cfg");
    std::fs::write(&cfg, format!("# roi run\nalgorithm=roi\nrank=4\ndata={}\n", s(&data))).unwrap();
    let r = pdmd(&["--config", s(&cfg), "fit", "-o", s(&dir.path().join("m"))]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("rank: 4"));
}

#[test]
fn bench_suite_file() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.cfg");
    std::fs::write(
        &suite,
        "[scenario small]\nfamily=linear\nnh=16\nnp=5\nnt=40\nmodes=4\ntest_idx=1,3\nrank=4\n\n[scenario broken]\nfamily=linear\nnp=3\ntest_idx=7\nrank=4\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let r = pdmd(&["bench", "--suite", s(&suite), "--out", s(&out), "--repeats", "1"]);
    assert_ne!(r.code, 0);
    let table = std::fs::read_to_string(out.join("small.table.tsv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 2 * 4);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("scenario small: ok") && summary.contains("scenario broken: FAILED"), "{summary}");
}
