//! Error metrics and phase timing.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

fn same_shape<T: Real>(truth: &Matrix<T>, pred: &Matrix<T>) -> Result<()> {
    if truth.shape() != pred.shape() {
        return Err(Error::DimensionMismatch {
            context: "prediction shape vs truth shape",
            expected: truth.rows() * truth.cols(),
            found: pred.rows() * pred.cols(),
        });
    }
    Ok(())
}

/// `‖truth − pred‖_F / ‖truth‖_F`.
pub fn frobenius_rel_error<T: Real>(truth: &Matrix<T>, pred: &Matrix<T>) -> Result<T> {
    same_shape(truth, pred)?;
    let n = truth.frobenius_norm();
    if n == T::zero() {
        return Err(Error::ZeroNorm);
    }
    Ok(truth.sub(pred).frobenius_norm() / n)
}

/// Column-wise `‖x(t) − x̂(t)‖₂ / ‖x(t)‖₂`.
pub fn time_rel_error<T: Real>(truth: &Matrix<T>, pred: &Matrix<T>) -> Result<Vec<T>> {
    same_shape(truth, pred)?;
    (0..truth.cols())
        .map(|j| {
            let n = norm(truth.col(j));
            if n == T::zero() {
                return Err(Error::ZeroColumn { index: j });
            }
            let d: Vec<T> = truth.col(j).iter().zip(pred.col(j)).map(|(&a, &b)| a - b).collect();
            Ok(norm(&d) / n)
        })
        .collect()
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

pub fn rmse<T: Real>(truth: &Matrix<T>, pred: &Matrix<T>) -> Result<T> {
    same_shape(truth, pred)?;
    let n = truth.rows() * truth.cols();
    if n == 0 {
        return Ok(T::zero());
    }
    Ok(truth.sub(pred).frobenius_norm() / T::from_usize_(n).sqrt())
}

/// Wall-clock seconds accumulated per phase label.
#[derive(Clone, Debug, Default)]
pub struct PhaseClock {
    totals: BTreeMap<String, f64>,
}

impl PhaseClock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `work`, adding its duration to `label`.
    pub fn timed<R>(&mut self, label: &str, work: impl FnOnce(&mut Self) -> R) -> R {
        let start = Instant::now();
        let out = work(self);
        *self.totals.entry(label.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }

    pub fn seconds(&self, label: &str) -> f64 {
        self.totals.get(label).copied().unwrap_or(0.0)
    }

    pub fn labels(&self) -> impl Iterator<Item = (&str, f64)> {
        self.totals.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Runs `work` once and returns its result with elapsed seconds.
pub fn timed<R>(work: impl FnOnce() -> R) -> (R, f64) {
    let start = Instant::now();
    let out = work();
    (out, start.elapsed().as_secs_f64())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Roi,
    Rkoi,
    #[serde(rename = "mono")]
    Monolithic,
    #[serde(rename = "part")]
    Partitioned,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Roi, Algorithm::Rkoi, Algorithm::Monolithic, Algorithm::Partitioned];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Roi => "roi",
            Algorithm::Rkoi => "rkoi",
            Algorithm::Monolithic => "mono",
            Algorithm::Partitioned => "part",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == s)
    }

    /// Whether prediction fits regressors online.
    pub fn regresses_online(self) -> bool {
        matches!(self, Algorithm::Monolithic | Algorithm::Partitioned)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Roi => "ROI",
            Algorithm::Rkoi => "RKOI",
            Algorithm::Monolithic => "Monolithic",
            Algorithm::Partitioned => "Partitioned",
        })
    }
}

/// One evaluation row, serialized as a JSON line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithm: Algorithm,
    pub parameter: Vec<f64>,
    pub rank: usize,
    pub frobenius_error: f64,
    pub time_errors: Vec<f64>,
    pub times: Vec<f64>,
    pub rmse: f64,
    pub offline_seconds: f64,
    pub online_seconds: f64,
    /// Regressor fits performed during prediction.
    pub online_fits: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<String>,
}

impl EvalReport {
    pub fn mean_time_error(&self) -> f64 {
        if self.time_errors.is_empty() {
            return 0.0;
        }
        self.time_errors.iter().sum::<f64>() / self.time_errors.len() as f64
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::Format(format!("report line: {e}")))
    }
}

/// Every non-blank line of `text` as a report.
pub fn parse_reports(text: &str) -> Result<Vec<EvalReport>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(EvalReport::from_line)
        .collect()
}
