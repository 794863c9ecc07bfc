use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use pdmd_core::archive::{self, load_model, save_model};
use pdmd_core::io::{open_dataset, write_dataset};
use pdmd_core::linalg::Matrix;
use pdmd_core::metrics::{frobenius_rel_error, parse_reports, rmse, time_rel_error, timed, EvalReport};
use pdmd_core::model::{fit_model, FitConfig, TrainedModel};
use pdmd_core::reduction::BasisOptions;
use pdmd_core::regression::fit_count;
use pdmd_core::rkoi::Bagging;
use pdmd_core::snapshot::{ParametricDataset, TimeGrid};
use pdmd_core::synth::{generate, Affine, ExpMode, Family, SynthSpec};

use crate::args::{EvalArgs, FamilyArg, FitArgs, InspectArgs, PlotArgs, PredictArgs, SynthArgs};
use crate::{CliError, CliResult};

pub fn fmt_mu(mu: &[f64]) -> String {
    mu.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";")
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Modes used by `synth --family exp`.
pub fn default_exp_modes() -> Vec<ExpMode> {
    vec![
        ExpMode {
            rate: Affine::new(-0.05, &[-0.1]),
            frequency: Affine::new(1.0, &[0.5]),
            coeff: vec![1.0, 0.5],
        },
        ExpMode {
            rate: Affine::new(-0.02, &[0.0]),
            frequency: Affine::new(0.0, &[0.0]),
            coeff: vec![0.5, 0.2],
        },
        ExpMode {
            rate: Affine::new(0.0, &[-0.1]),
            frequency: Affine::new(2.5, &[0.3]),
            coeff: vec![0.3],
        },
    ]
}

pub fn family_of(f: FamilyArg, modes: usize, variation: f64) -> Family {
    match f {
        FamilyArg::Linear => Family::Linear {
            modes,
            variation,
            skew: 0.0,
        },
        FamilyArg::Exp => Family::ExpModes {
            modes: default_exp_modes(),
        },
        FamilyArg::Oscillator => Family::LiftedOscillator {
            growth: Affine::new(1.0, &[0.5]),
            frequency: Affine::new(2.0, &[1.0]),
            r0: 0.3,
        },
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".spec.json");
    PathBuf::from(s)
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            SynthSpec::from_json(&text).map_err(|e| CliError::core("synth", e))?
        }
        None => SynthSpec {
            family: family_of(a.family, a.modes as usize, a.variation),
            n_h: a.nh as usize,
            n_params: a.np as usize,
            param_range: vec![a.param_range],
            n_t: a.nt as usize,
            dt: a.dt,
            t0: 0.0,
            noise_std: a.noise,
            seed: a.seed,
        },
    };
    let (d, _) = generate(&spec).map_err(|e| CliError::core("synth", e))?;
    write_dataset(&d, &a.out).map_err(|e| CliError::core("synth", e))?;
    write_text(&sidecar_path(&a.out), &spec.to_json())?;
    println!(
        "wrote {} (N_h={}, N_p={}, N_t={})",
        a.out.display(),
        d.n_h(),
        d.n_params(),
        d.n_t()
    );
    Ok(())
}

fn check_indices(idx: &[usize], n: usize, what: &str) -> CliResult<()> {
    if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
        return Err(CliError::usage(format!("{what} index {bad} out of range for {n} parameters")));
    }
    Ok(())
}

/// Training split from explicit train indices or the complement of test indices.
pub fn training_split(
    d: &ParametricDataset<f64>,
    train_idx: Option<&[usize]>,
    test_idx: Option<&[usize]>,
) -> CliResult<ParametricDataset<f64>> {
    let n = d.n_params();
    let test: Vec<usize> = match (train_idx, test_idx) {
        (Some(tr), _) => {
            check_indices(tr, n, "train")?;
            (0..n).filter(|i| !tr.contains(i)).collect()
        }
        (None, Some(te)) => {
            check_indices(te, n, "test")?;
            te.to_vec()
        }
        (None, None) => Vec::new(),
    };
    if test.is_empty() {
        return Ok(d.clone());
    }
    let (train, _) = d.split_train_test(&test).map_err(|e| CliError::core("split", e))?;
    Ok(train)
}

pub fn fit(a: &FitArgs) -> CliResult<()> {
    let d = open_dataset::<f64>(&a.data).map_err(|e| CliError::core("dataset", e))?;
    let mut train = training_split(&d, a.train_idx.as_deref(), a.test_idx.as_deref())?;
    if let Some((s, e)) = a.time_window {
        train = train.restrict_time(s, e).map_err(|e| CliError::core("time window", e))?;
    }
    let alg = a.algorithm.into();
    let cfg = FitConfig {
        algorithm: alg,
        rank: a.rank.map(|r| r as usize),
        energy: a.energy,
        op_rank: a.op_rank.map(|r| r as usize),
        regressor: a.regressor.spec(d.param_dim()),
        basis: BasisOptions {
            randomized: a.randomized_svd,
            seed: a.seed,
            center: false,
            oversample: a.oversample.map(|v| v as usize),
            power_iters: a.power_iters.map(|v| v as usize),
        },
        bagging: (a.bag_trials > 0).then_some(Bagging {
            trials: a.bag_trials as usize,
            fraction: a.bag_fraction,
            seed: a.seed,
        }),
        ..FitConfig::new(alg, 1, d.param_dim())
    };
    let m = fit_model(&train, &cfg).map_err(|e| CliError::core(&format!("fit {}", alg.tag()), e))?;
    println!("algorithm: {alg}");
    println!("training parameters: {}", train.n_params());
    println!("training columns: {}", train.n_t());
    println!("rank: {}", m.rank);
    println!("offline seconds: {:.6}", m.offline_seconds);
    let times = train.grid().instants();
    for (mu, x) in train.params().iter().zip(train.trajectories()) {
        let pred = m.predict(mu, times).map_err(|e| CliError::core("training reconstruction", e))?;
        let err = frobenius_rel_error(x, &pred).map_err(|e| CliError::core("training error", e))?;
        println!("train mu={} error={err:.3e}", fmt_mu(mu));
    }
    save_model(&m, &a.out).map_err(|e| CliError::core("archive", e))?;
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Lattice instants of `m` inside `[a, b]`.
pub fn lattice_in(m: &TrainedModel<f64>, a: f64, b: f64) -> Vec<f64> {
    let tol = 1e-9;
    let first = ((a - m.t0) / m.dt - tol).ceil().max(0.0) as usize;
    let last = ((b - m.t0) / m.dt + tol).floor();
    if last < first as f64 {
        return Vec::new();
    }
    (first..=last as usize).map(|k| m.t0 + m.dt * k as f64).collect()
}

/// Prediction with online wall time (minimum over `repeats`) and regressor fits.
pub fn timed_predict(m: &TrainedModel<f64>, mu: &[f64], times: &[f64], repeats: u32) -> pdmd_core::Result<(Matrix<f64>, f64, u64)> {
    let mut best = f64::INFINITY;
    let mut out = None;
    let mut fits = 0;
    for _ in 0..repeats.max(1) {
        let before = fit_count();
        let (pred, secs) = timed(|| m.predict(mu, times));
        fits = fit_count() - before;
        best = best.min(secs);
        out = Some(pred?);
    }
    Ok((out.expect("at least one repetition"), best, fits))
}

pub fn predict(a: &PredictArgs) -> CliResult<()> {
    let m = load_model(&a.model).map_err(|e| CliError::core("archive", e))?;
    let times = match (a.time_range, a.count) {
        (Some((s, e)), _) => lattice_in(&m, s, e),
        (None, Some(n)) => m.lattice(n as usize),
        (None, None) => m.lattice(m.n_t),
    };
    if times.len() < 2 {
        return Err(CliError::usage("requested range holds fewer than two lattice instants"));
    }
    let (pred, secs, fits) = timed_predict(&m, &a.mu, &times, 1).map_err(|e| CliError::core("predict", e))?;
    let grid = Arc::new(TimeGrid::new(times).map_err(|e| CliError::core("predict", e))?);
    let d = ParametricDataset::new(vec![a.mu.clone()], vec![pred], grid).map_err(|e| CliError::core("predict", e))?;
    write_dataset(&d, &a.out).map_err(|e| CliError::core("predict", e))?;
    println!("algorithm: {}", m.algorithm());
    println!("columns: {}", d.n_t());
    println!("online seconds: {secs:.6}");
    println!("online regressor fits: {fits}");
    Ok(())
}

/// Scores one prediction against the truth.
pub fn report(
    m: &TrainedModel<f64>,
    mu: &[f64],
    truth: &Matrix<f64>,
    times: &[f64],
    repeats: u32,
) -> pdmd_core::Result<EvalReport> {
    let (pred, online, fits) = timed_predict(m, mu, times, repeats)?;
    Ok(EvalReport {
        algorithm: m.algorithm(),
        parameter: mu.to_vec(),
        rank: m.rank,
        frobenius_error: frobenius_rel_error(truth, &pred)?,
        time_errors: time_rel_error(truth, &pred)?,
        times: times.to_vec(),
        rmse: rmse(truth, &pred)?,
        offline_seconds: m.offline_seconds,
        online_seconds: online,
        online_fits: fits,
        window: None,
    })
}

pub fn print_table(rows: &[EvalReport]) {
    println!("{:<16} {:<12} {:>12} {:>12}", "parameter", "algorithm", "error", "time_s");
    for r in rows {
        println!(
            "{:<16} {:<12} {:>12.4e} {:>12.6}",
            fmt_mu(&r.parameter),
            r.algorithm.to_string(),
            r.frobenius_error,
            r.online_seconds
        );
    }
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    let d = open_dataset::<f64>(&a.data).map_err(|e| CliError::core("dataset", e))?;
    check_indices(&a.test_idx, d.n_params(), "test")?;
    let d = match a.time_window {
        Some((s, e)) => d.restrict_time(s, e).map_err(|e| CliError::core("time window", e))?,
        None => d,
    };
    let models = a
        .model
        .iter()
        .map(|p| load_model(p).map_err(|e| CliError::core(&format!("archive {}", p.display()), e)))
        .collect::<CliResult<Vec<_>>>()?;
    let times = d.grid().instants();
    let mut rows = Vec::new();
    for &i in &a.test_idx {
        let mu = &d.params()[i];
        for m in &models {
            let r = report(m, mu, &d.trajectories()[i], times, 1)
                .map_err(|e| CliError::core(&format!("eval {} mu={}", m.algorithm().tag(), fmt_mu(mu)), e))?;
            rows.push(r);
        }
    }
    print_table(&rows);
    if let Some(p) = &a.report {
        let text: String = rows.iter().map(|r| r.to_line() + "\n").collect();
        write_text(p, &text)?;
    }
    Ok(())
}

/// `time,value,algorithm,parameter` rows for every report.
pub fn plot_rows(reports: &[EvalReport]) -> String {
    let mut s = String::from("time,value,algorithm,parameter\n");
    for r in reports {
        for (t, e) in r.times.iter().zip(&r.time_errors) {
            s.push_str(&format!("{t},{e},{},{}\n", r.algorithm.tag(), fmt_mu(&r.parameter)));
        }
    }
    s
}

pub fn plotdata(a: &PlotArgs) -> CliResult<()> {
    let mut reports = Vec::new();
    for p in &a.reports {
        let text = fs::read_to_string(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
        reports.extend(parse_reports(&text).map_err(|e| CliError::core(&p.display().to_string(), e))?);
    }
    let out = plot_rows(&reports);
    match &a.out {
        Some(p) => write_text(p, &out),
        None => std::io::stdout()
            .write_all(out.as_bytes())
            .map_err(|e| CliError::data(format!("stdout: {e}"))),
    }
}

pub fn inspect(a: &InspectArgs) -> CliResult<()> {
    let head = fs::read(&a.path).map_err(|e| CliError::data(format!("{}: {e}", a.path.display())))?;
    if head.starts_with(archive::MAGIC) {
        let m = archive::decode_model(&head).map_err(|e| CliError::core("archive", e))?;
        let b = m.model.basis();
        println!("model archive: {}", a.path.display());
        println!("algorithm: {}", m.algorithm());
        println!("state dimension: {}", b.state_dim());
        println!("rank: {}", m.rank);
        if m.op_rank > 0 {
            println!("operator rank: {}", m.op_rank);
        }
        println!("energy captured: {:.6}", b.energy_captured);
        println!("training parameters: {}", m.train_params.len());
        println!("lattice: t0={} dt={} n_t={}", m.t0, m.dt, m.n_t);
        println!("offline seconds: {:.6}", m.offline_seconds);
        return Ok(());
    }
    let d = open_dataset::<f64>(&a.path).map_err(|e| CliError::core("dataset", e))?;
    let g = d.grid();
    println!("dataset: {}", a.path.display());
    println!("parameters: {} (dimension {})", d.n_params(), d.param_dim());
    println!("state dimension: {}", d.n_h());
    println!(
        "time grid: {} instants on [{}, {}]{}",
        g.len(),
        g.start(),
        g.end(),
        if g.is_uniform() { format!(", dt={}", g.dt()) } else { ", non-uniform".into() }
    );
    for (i, mu) in d.params().iter().enumerate() {
        println!("  {i}: {}", fmt_mu(mu));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pdmd_core::metrics::Algorithm;

    #[test]
    fn plot_rows_follow_reports() {
        assert_eq!(plot_rows(&[]), "time,value,algorithm,parameter\n");
        let r = EvalReport {
            algorithm: Algorithm::Rkoi,
            parameter: vec![0.5],
            rank: 2,
            frobenius_error: 0.0,
            time_errors: vec![0.1, 0.2],
            times: vec![0.0, 0.5],
            rmse: 0.0,
            offline_seconds: 0.0,
            online_seconds: 0.0,
            online_fits: 0,
            window: None,
        };
        let s = plot_rows(&[r]);
        assert_eq!(s.lines().count(), 3);
        assert!(s.contains("0.5,0.2,rkoi,0.5"));
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("a/b.pdmd")), PathBuf::from("a/b.pdmd.spec.json"));
    }
}
