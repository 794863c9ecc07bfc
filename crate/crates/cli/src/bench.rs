//! Benchmark suites: four-algorithm tables over train and forecast windows.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use pdmd_core::io::open_dataset;
use pdmd_core::metrics::{Algorithm, EvalReport};
use pdmd_core::model::{fit_model, FitConfig};
use pdmd_core::regression::RegressorSpec;
use pdmd_core::snapshot::ParametricDataset;
use pdmd_core::synth::{generate, SynthSpec};

use crate::args::{BenchArgs, ExtrapolationArg, FamilyArg, RegressorArg, RegressorOpts};
use crate::commands::{family_of, fmt_mu, plot_rows, report};
use crate::{config, CliError, CliResult};

/// Suite run when `--suite` is absent.
pub const DEFAULT_SUITE: &str = "\
[scenario linear-smooth]
family=linear
nh=64
np=8
nt=200
dt=0.1
modes=6
variation=0.02
param_range=0,1
seed=11
test_idx=1,4,6
rank=6

[scenario exp-modes]
family=exp
nh=64
np=9
nt=200
dt=0.05
param_range=0,1
seed=12
test_idx=1,4,7
rank=5

[scenario oscillator]
family=oscillator
nh=48
np=9
nt=300
dt=0.02
param_range=0,1
seed=13
test_idx=1,4,7
rank=4
";

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Synth(SynthSpec),
    Dataset(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub source: Source,
    pub test_idx: Vec<usize>,
    /// Last training instant; the grid midpoint when absent.
    pub train_end: Option<f64>,
    /// Per-algorithm rank in `Algorithm::ALL` order.
    pub ranks: [Option<usize>; 4],
    pub energy: f64,
    pub regressor: Option<RegressorArg>,
}

fn bad(name: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::usage(format!("scenario `{name}`: {msg}"))
}

fn num<T: std::str::FromStr>(name: &str, k: &str, v: &str) -> CliResult<T> {
    v.parse().map_err(|_| bad(name, format!("bad value `{v}` for `{k}`")))
}

fn list<T: std::str::FromStr>(name: &str, k: &str, v: &str) -> CliResult<Vec<T>> {
    v.split(',').map(|s| num(name, k, s.trim())).collect()
}

fn scenario(name: &str, entries: &[(String, String)], base: &Path) -> CliResult<Scenario> {
    let mut family = FamilyArg::Linear;
    let (mut nh, mut np, mut nt, mut modes) = (64usize, 8usize, 200usize, 6usize);
    let (mut dt, mut variation, mut noise) = (0.1, 0.02, 0.0);
    let mut range = (0.0, 1.0);
    let mut seed = 0u64;
    let mut spec_file = None;
    let mut dataset = None;
    let mut sc = Scenario {
        name: name.to_string(),
        source: Source::Dataset(PathBuf::new()),
        test_idx: Vec::new(),
        train_end: None,
        ranks: [None; 4],
        energy: 0.9999,
        regressor: None,
    };
    for (k, v) in entries {
        match k.as_str() {
            "family" => family = FamilyArg::from_str(v, true).map_err(|e| bad(name, e))?,
            "spec" => spec_file = Some(base.join(v)),
            "dataset" => dataset = Some(base.join(v)),
            "nh" => nh = num(name, k, v)?,
            "np" => np = num(name, k, v)?,
            "nt" => nt = num(name, k, v)?,
            "dt" => dt = num(name, k, v)?,
            "modes" => modes = num(name, k, v)?,
            "variation" => variation = num(name, k, v)?,
            "noise" => noise = num(name, k, v)?,
            "seed" => seed = num(name, k, v)?,
            "param_range" => match list::<f64>(name, k, v)?[..] {
                [a, b] => range = (a, b),
                _ => return Err(bad(name, "param_range expects two values")),
            },
            "test_idx" => sc.test_idx = list(name, k, v)?,
            "train_end" => sc.train_end = Some(num(name, k, v)?),
            "energy" => sc.energy = num(name, k, v)?,
            "regressor" => sc.regressor = Some(RegressorArg::from_str(v, true).map_err(|e| bad(name, e))?),
            "rank" => {
                let r = num(name, k, v)?;
                sc.ranks = [Some(r); 4];
            }
            _ => {
                let tag = k
                    .strip_prefix("rank.")
                    .ok_or_else(|| bad(name, format!("unknown key `{k}`")))?;
                let alg = Algorithm::from_tag(tag).ok_or_else(|| bad(name, format!("unknown algorithm `{tag}`")))?;
                let i = Algorithm::ALL.iter().position(|&a| a == alg).expect("listed");
                sc.ranks[i] = Some(num(name, k, v)?);
            }
        }
    }
    if sc.ranks.iter().flatten().any(|&r| r == 0) {
        return Err(bad(name, "ranks must be positive"));
    }
    if sc.test_idx.is_empty() {
        return Err(bad(name, "test_idx is required"));
    }
    sc.source = match (dataset, spec_file) {
        (Some(d), _) => Source::Dataset(d),
        (None, Some(p)) => {
            let text = fs::read_to_string(&p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            Source::Synth(SynthSpec::from_json(&text).map_err(|e| CliError::core(name, e))?)
        }
        (None, None) => Source::Synth(SynthSpec {
            family: family_of(family, modes, variation),
            n_h: nh,
            n_params: np,
            param_range: vec![range],
            n_t: nt,
            dt,
            t0: 0.0,
            noise_std: noise,
            seed,
        }),
    };
    Ok(sc)
}

/// Parses `[scenario <name>]` sections of `key=value` lines.
pub fn parse_suite(text: &str, base: &Path) -> CliResult<Vec<Scenario>> {
    let mut sections: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if let Some(head) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = head
                .strip_prefix("scenario")
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .ok_or_else(|| CliError::usage(format!("bad section header `{t}`")))?;
            sections.push((name.to_string(), String::new()));
        } else if let Some((_, body)) = sections.last_mut() {
            body.push_str(line);
            body.push('\n');
        } else if !t.is_empty() && !t.starts_with('#') {
            return Err(CliError::usage("suite entries must follow a [scenario <name>] header"));
        }
    }
    if sections.is_empty() {
        return Err(CliError::usage("suite has no scenarios"));
    }
    sections
        .iter()
        .map(|(name, body)| scenario(name, &config::parse(body)?, base))
        .collect()
}

/// Train-window and forecast-window reports for one algorithm at one test parameter.
#[derive(Clone, Debug)]
pub struct Row {
    pub train: EvalReport,
    pub forecast: EvalReport,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub ordering_violations: Vec<String>,
    pub fit_violations: Vec<String>,
    pub monotonicity_notes: Vec<String>,
}

fn load(sc: &Scenario) -> CliResult<ParametricDataset<f64>> {
    match &sc.source {
        Source::Synth(spec) => generate(spec).map(|(d, _)| d).map_err(|e| CliError::core(&sc.name, e)),
        Source::Dataset(p) => open_dataset(p).map_err(|e| CliError::core(&sc.name, e)),
    }
}

fn regressor(sc: &Scenario, param_dim: usize) -> RegressorSpec {
    RegressorOpts {
        regressor: sc.regressor,
        rbf_shape: None,
        poly_degree: 2,
        ridge: 0.0,
        extrapolation: ExtrapolationArg::Clamp,
    }
    .spec(param_dim)
}

pub fn run_scenario(sc: &Scenario, repeats: u32) -> CliResult<Outcome> {
    let d = load(sc)?;
    if let Some(&i) = sc.test_idx.iter().find(|&&i| i >= d.n_params()) {
        return Err(bad(&sc.name, format!("test index {i} out of range")));
    }
    let (train, test) = d.split_train_test(&sc.test_idx).map_err(|e| CliError::core(&sc.name, e))?;
    let g = d.grid().instants();
    let split = sc.train_end.unwrap_or(g[(g.len() - 1) / 2]);
    let last = *g.last().expect("non-empty grid");
    let next = g.iter().copied().find(|&t| t > split + 1e-9 * (last - g[0]).abs()).ok_or_else(|| bad(&sc.name, "train_end leaves no forecast window"))?;
    let window = |x: &ParametricDataset<f64>, a, b| x.restrict_time(a, b).map_err(|e| CliError::core(&sc.name, e));
    let train = window(&train, g[0], split)?;
    let test_a = window(&test, g[0], split)?;
    let test_b = window(&test, next, last)?;

    let mut out = Outcome::default();
    let mut models = Vec::new();
    for (i, &alg) in Algorithm::ALL.iter().enumerate() {
        let cfg = FitConfig {
            rank: sc.ranks[i],
            energy: sc.energy,
            regressor: regressor(sc, d.param_dim()),
            ..FitConfig::new(alg, 1, d.param_dim())
        };
        let m = fit_model(&train, &cfg).map_err(|e| CliError::core(&format!("{} fit {}", sc.name, alg.tag()), e))?;
        models.push(m);
    }
    for j in 0..test.n_params() {
        let mu = &test.params()[j];
        for m in &models {
            let ctx = |e| CliError::core(&format!("{} eval {} mu={}", sc.name, m.algorithm().tag(), fmt_mu(mu)), e);
            let mut a = report(m, mu, &test_a.trajectories()[j], test_a.grid().instants(), repeats).map_err(ctx)?;
            let mut b = report(m, mu, &test_b.trajectories()[j], test_b.grid().instants(), repeats).map_err(ctx)?;
            a.window = Some("train".into());
            b.window = Some("forecast".into());
            out.rows.push(Row { train: a, forecast: b });
        }
        let block = &out.rows[out.rows.len() - models.len()..];
        let time = |alg: Algorithm| block.iter().find(|r| r.train.algorithm == alg).map(|r| r.train.online_seconds).unwrap_or(f64::NAN);
        let fast = time(Algorithm::Roi).max(time(Algorithm::Rkoi));
        let slow = time(Algorithm::Monolithic).min(time(Algorithm::Partitioned));
        if !(fast < slow) {
            out.ordering_violations.push(format!("mu={}: roi/rkoi {fast:.3e}s vs mono/part {slow:.3e}s", fmt_mu(mu)));
        }
        for r in block {
            if !r.train.algorithm.regresses_online() && (r.train.online_fits > 0 || r.forecast.online_fits > 0) {
                out.fit_violations.push(format!("mu={} {}: {} online fits", fmt_mu(mu), r.train.algorithm.tag(), r.train.online_fits));
            }
            if r.forecast.frobenius_error < r.train.frobenius_error {
                out.monotonicity_notes.push(format!(
                    "mu={} {}: forecast {:.3e} < train {:.3e}",
                    fmt_mu(mu),
                    r.train.algorithm.tag(),
                    r.forecast.frobenius_error,
                    r.train.frobenius_error
                ));
            }
        }
    }
    Ok(out)
}

pub const TABLE_HEADER: &str =
    "parameter\talgorithm\terror\ttime_s\tforecast_error\tmean_time_error\tforecast_mean_time_error\trmse\tonline_fits\toffline_s";

pub fn table(rows: &[Row]) -> String {
    let mut s = String::from(TABLE_HEADER);
    s.push('\n');
    for r in rows {
        let (a, b) = (&r.train, &r.forecast);
        let _ = writeln!(
            s,
            "{}\t{}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}\t{}\t{:.6e}",
            fmt_mu(&a.parameter),
            a.algorithm.tag(),
            a.frobenius_error,
            a.online_seconds,
            b.frobenius_error,
            a.mean_time_error(),
            b.mean_time_error(),
            a.rmse,
            a.online_fits,
            a.offline_seconds
        );
    }
    s
}

fn write(path: PathBuf, text: &str) -> CliResult<()> {
    fs::write(&path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn write_outputs(dir: &Path, name: &str, o: &Outcome) -> CliResult<()> {
    write(dir.join(format!("{name}.table.tsv")), &table(&o.rows))?;
    let reports: Vec<EvalReport> = o.rows.iter().flat_map(|r| [r.train.clone(), r.forecast.clone()]).collect();
    write(dir.join(format!("{name}.eps.csv")), &plot_rows(&reports))?;
    let jsonl: String = reports.iter().map(|r| r.to_line() + "\n").collect();
    write(dir.join(format!("{name}.reports.jsonl")), &jsonl)
}

pub fn run(a: &BenchArgs) -> CliResult<()> {
    let scenarios = match &a.suite {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            parse_suite(&text, p.parent().unwrap_or(Path::new(".")))?
        }
        None => parse_suite(DEFAULT_SUITE, Path::new("."))?,
    };
    fs::create_dir_all(&a.out).map_err(|e| CliError::data(format!("{}: {e}", a.out.display())))?;
    let mut summary = String::new();
    let mut failure: Option<CliError> = None;
    for sc in &scenarios {
        log::info!("scenario {}", sc.name);
        match run_scenario(sc, a.repeats) {
            Ok(o) => {
                write_outputs(&a.out, &sc.name, &o)?;
                println!("[{}]", sc.name);
                print!("{}", table(&o.rows));
                let _ = writeln!(summary, "scenario {}: ok ({} rows)", sc.name, o.rows.len());
                let _ = writeln!(
                    summary,
                    "  online ordering: {}",
                    if o.ordering_violations.is_empty() { "ok".to_string() } else { o.ordering_violations.join("; ") }
                );
                let _ = writeln!(
                    summary,
                    "  roi/rkoi online fits: {}",
                    if o.fit_violations.is_empty() { "0".to_string() } else { o.fit_violations.join("; ") }
                );
                for n in &o.monotonicity_notes {
                    let _ = writeln!(summary, "  note: {n}");
                }
            }
            Err(e) => {
                eprintln!("scenario {} failed: {}", sc.name, e.message);
                let _ = writeln!(summary, "scenario {}: FAILED: {}", sc.name, e.message);
                failure.get_or_insert(e);
            }
        }
    }
    write(a.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    match failure {
        Some(e) => Err(CliError {
            code: e.code,
            message: "one or more scenarios failed".into(),
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_parses() {
        let s = parse_suite(DEFAULT_SUITE, Path::new(".")).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|sc| sc.test_idx.len() == 3 && sc.ranks.iter().all(Option::is_some)));
    }

    #[test]
    fn suite_errors() {
        assert!(parse_suite("rank=3\n", Path::new(".")).is_err());
        assert!(parse_suite("[scenario a]\ntest_idx=1\nbogus=1\n", Path::new(".")).is_err());
        assert!(parse_suite("[scenario a]\ntest_idx=1\nrank=0\n", Path::new(".")).is_err());
        let s = parse_suite("[scenario a]\ntest_idx=1\nrank=3\nrank.mono=5\n", Path::new(".")).unwrap();
        assert_eq!(s[0].ranks, [Some(3), Some(3), Some(5), Some(3)]);
    }
}
