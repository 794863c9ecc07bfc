//! Regressors from parameter space `ℝᵖ` to `ℝᵈ`.
//!
//! Every kind predicts `Cᵀ ψ(μ)` where `ψ` is a kind-specific feature vector
//! and `C` a stored coefficient matrix, so fitted regressors serialize as plain
//! arrays.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, lstsq, Lu, Matrix};
use crate::scalar::Real;

thread_local! {
    static FIT_COUNT: Cell<u64> = const { Cell::new(0) };
}

/// Number of regressor fits performed on the current thread.
pub fn fit_count() -> u64 {
    FIT_COUNT.with(|c| c.get())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbfKernel {
    Gaussian,
    ThinPlate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegressorKind {
    /// Piecewise linear, `p = 1` only.
    LinearInterp,
    Nearest,
    /// `shape = None` selects the median pairwise distance.
    Rbf { kernel: RbfKernel, shape: Option<f64> },
    Polynomial { degree: u32, ridge: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Extrapolation {
    #[default]
    Clamp,
    Allow,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    pub extrapolation: Extrapolation,
}

impl RegressorSpec {
    pub fn new(kind: RegressorKind) -> Self {
        Self {
            kind,
            extrapolation: Extrapolation::Clamp,
        }
    }

    /// Linear interpolation for scalar parameters, Gaussian RBF otherwise.
    pub fn default_for(param_dim: usize) -> Self {
        if param_dim == 1 {
            Self::new(RegressorKind::LinearInterp)
        } else {
            Self::new(RegressorKind::Rbf {
                kernel: RbfKernel::Gaussian,
                shape: None,
            })
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            RegressorKind::Rbf { shape: Some(s), .. } if !(s > 0.0 && s.is_finite()) => {
                Err(Error::InvalidArgument(format!("rbf shape must be positive, got {s}")))
            }
            RegressorKind::Polynomial { ridge, .. } if !(ridge >= 0.0 && ridge.is_finite()) => {
                Err(Error::InvalidArgument(format!("ridge must be non-negative, got {ridge}")))
            }
            _ => Ok(()),
        }
    }

    /// Substitutes nearest-neighbour lookup when linear interpolation has a single sample.
    pub fn effective(&self, n_samples: usize) -> Self {
        if n_samples < 2 && self.kind == RegressorKind::LinearInterp {
            Self {
                kind: RegressorKind::Nearest,
                ..*self
            }
        } else {
            *self
        }
    }

    fn interpolating(&self) -> bool {
        !matches!(self.kind, RegressorKind::Polynomial { .. })
    }
}

/// A fitted regressor; immutable and cheap to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedRegressor<T> {
    pub spec: RegressorSpec,
    /// Training parameters, `N_p` vectors of length `p`.
    pub params: Vec<Vec<T>>,
    /// `n_features × d`.
    pub coeffs: Matrix<T>,
    /// Kernel width for RBF kinds.
    pub shape: T,
    /// Bounding box of the training parameters.
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    /// Training indices sorted by parameter (linear interpolation).
    pub order: Vec<usize>,
    /// Monomial exponents (polynomial kind) or the RBF polynomial tail.
    pub exponents: Vec<Vec<u32>>,
}

pub fn fit<T: Real>(spec: &RegressorSpec, params: &[Vec<T>], values: &Matrix<T>) -> Result<FittedRegressor<T>> {
    FIT_COUNT.with(|c| c.set(c.get() + 1));
    spec.validate()?;
    let n_p = params.len();
    if n_p == 0 {
        return Err(Error::InvalidArgument("regression needs at least one sample".into()));
    }
    if values.rows() != n_p {
        return Err(Error::DimensionMismatch {
            context: "regression samples vs values",
            expected: n_p,
            found: values.rows(),
        });
    }
    let p = params[0].len();
    if p == 0 || params.iter().any(|m| m.len() != p) {
        return Err(Error::InvalidArgument("parameter vectors must share a positive dimension".into()));
    }
    if params.iter().flatten().any(|v| !v.is_finite()) || !values.all_finite() {
        return Err(Error::NonFinite("regression data"));
    }
    if spec.interpolating() {
        for (i, a) in params.iter().enumerate() {
            if params[i + 1..].contains(a) {
                return Err(Error::DuplicateParameters(a.iter().map(|x| x.to_f64_()).collect()));
            }
        }
    }
    let mut lower = params[0].clone();
    let mut upper = params[0].clone();
    for m in params {
        for k in 0..p {
            lower[k] = lower[k].min(m[k]);
            upper[k] = upper[k].max(m[k]);
        }
    }
    let mut out = FittedRegressor {
        spec: *spec,
        params: params.to_vec(),
        coeffs: values.clone(),
        shape: T::one(),
        lower,
        upper,
        order: Vec::new(),
        exponents: Vec::new(),
    };
    match spec.kind {
        RegressorKind::LinearInterp => {
            if p != 1 {
                return Err(Error::InvalidArgument("linear interpolation needs a scalar parameter".into()));
            }
            if n_p < 2 {
                return Err(Error::InvalidArgument("linear interpolation needs at least 2 samples".into()));
            }
            let mut order: Vec<usize> = (0..n_p).collect();
            order.sort_by(|&a, &b| params[a][0].partial_cmp(&params[b][0]).unwrap());
            out.order = order;
        }
        RegressorKind::Nearest => {}
        RegressorKind::Rbf { kernel, shape } => {
            out.shape = match shape {
                Some(s) => T::c(s),
                None => median_pairwise_distance(params),
            };
            fit_rbf(&mut out, kernel, values)?;
        }
        RegressorKind::Polynomial { degree, ridge } => {
            let exps = monomials(p, degree);
            if n_p < exps.len() && ridge == 0.0 {
                return Err(Error::Underdetermined {
                    samples: n_p,
                    terms: exps.len(),
                });
            }
            out.exponents = exps;
            let v = Matrix::from_fn(n_p, out.exponents.len(), |i, j| {
                monomial(&out.scaled(&params[i]), &out.exponents[j])
            });
            out.coeffs = ridge_lstsq(&v, values, T::c(ridge));
        }
    }
    Ok(out)
}

fn fit_rbf<T: Real>(out: &mut FittedRegressor<T>, kernel: RbfKernel, values: &Matrix<T>) -> Result<()> {
    let n = out.params.len();
    let p = out.params[0].len();
    let k = Matrix::from_fn(n, n, |i, j| out.kernel(kernel, dist(&out.params[i], &out.params[j])));
    match kernel {
        RbfKernel::Gaussian => {
            let w = match cholesky(&k) {
                Some(l) => {
                    let d = (0..n).map(|i| l[(i, i)]);
                    let (lo, hi) = d.fold((T::infinity(), T::zero()), |(a, b), x| (a.min(x), b.max(x)));
                    let cond = (hi / lo).powi(2);
                    if cond > T::c(1e12) {
                        log::warn!("rbf system condition estimate {:e} exceeds 1e12", cond.to_f64_());
                    }
                    solve_columns(values, |b| cholesky_solve(&l, b))
                }
                None => {
                    log::warn!("rbf system not numerically SPD; falling back to LU");
                    let lu = Lu::new(&k)?;
                    solve_columns(values, |b| lu.solve(b))
                }
            };
            out.coeffs = w;
        }
        RbfKernel::ThinPlate => {
            // Linear tail when the samples determine it, constant tail otherwise.
            for tail in [monomials(p, 1), monomials(p, 0)] {
                let m = tail.len();
                let a = Matrix::from_fn(n + m, n + m, |i, j| match (i < n, j < n) {
                    (true, true) => k[(i, j)],
                    (true, false) => monomial(&out.params[i], &tail[j - n]),
                    (false, true) => monomial(&out.params[j], &tail[i - n]),
                    (false, false) => T::zero(),
                });
                if let Ok(lu) = Lu::new(&a) {
                    let rhs = Matrix::from_fn(n + m, values.cols(), |i, j| {
                        if i < n { values[(i, j)] } else { T::zero() }
                    });
                    out.coeffs = solve_columns(&rhs, |b| lu.solve(b));
                    out.exponents = tail;
                    return Ok(());
                }
            }
            return Err(Error::SingularSigma {
                rank: n,
                sigma: 0.0,
                cutoff: 0.0,
            });
        }
    }
    Ok(())
}

fn solve_columns<T: Real>(b: &Matrix<T>, solve: impl Fn(&[T]) -> Vec<T>) -> Matrix<T> {
    let cols: Vec<Vec<T>> = (0..b.cols()).map(|j| solve(b.col(j))).collect();
    Matrix::from_columns(b.rows(), &cols).expect("square solve preserves length")
}

/// `argmin ‖V C − Y‖² + ridge ‖C‖²`.
fn ridge_lstsq<T: Real>(v: &Matrix<T>, y: &Matrix<T>, ridge: T) -> Matrix<T> {
    if ridge == T::zero() {
        return lstsq(v, y, T::c(1e-13));
    }
    let m = v.cols();
    let s = ridge.sqrt();
    let aug = Matrix::vcat(&[v, &Matrix::from_diag(&vec![s; m])]).expect("same width");
    let rhs = Matrix::vcat(&[y, &Matrix::zeros(m, y.cols())]).expect("same width");
    lstsq(&aug, &rhs, T::c(1e-13))
}

fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

fn median_pairwise_distance<T: Real>(params: &[Vec<T>]) -> T {
    let mut d = Vec::new();
    for i in 0..params.len() {
        for j in i + 1..params.len() {
            d.push(dist(&params[i], &params[j]));
        }
    }
    if d.is_empty() {
        return T::one();
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = d.len();
    if n % 2 == 1 {
        d[n / 2]
    } else {
        (d[n / 2 - 1] + d[n / 2]) / T::c(2.0)
    }
}

/// All exponent vectors of total degree at most `degree`, graded order.
fn monomials(p: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut cur = vec![0u32; p];
        push_compositions(&mut out, &mut cur, 0, total);
    }
    out
}

fn push_compositions(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for e in (0..=left).rev() {
        cur[pos] = e;
        push_compositions(out, cur, pos + 1, left - e);
    }
    cur[pos] = 0;
}

fn monomial<T: Real>(x: &[T], e: &[u32]) -> T {
    x.iter().zip(e).fold(T::one(), |acc, (&v, &k)| acc * v.powi(k as i32))
}

impl<T: Real> FittedRegressor<T> {
    pub fn param_dim(&self) -> usize {
        self.lower.len()
    }

    pub fn output_dim(&self) -> usize {
        self.coeffs.cols()
    }

    fn kernel(&self, kernel: RbfKernel, r: T) -> T {
        match kernel {
            RbfKernel::Gaussian => {
                let s = r / self.shape;
                (-(s * s)).exp()
            }
            RbfKernel::ThinPlate => {
                if r > T::zero() {
                    r * r * r.ln()
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Parameters mapped affinely onto `[-1, 1]` per coordinate.
    fn scaled(&self, mu: &[T]) -> Vec<T> {
        mu.iter()
            .enumerate()
            .map(|(k, &v)| {
                let half = (self.upper[k] - self.lower[k]) / T::c(2.0);
                let mid = (self.upper[k] + self.lower[k]) / T::c(2.0);
                if half > T::zero() { (v - mid) / half } else { v - mid }
            })
            .collect()
    }

    /// Applies the extrapolation policy, returning the point to evaluate at.
    pub fn admit(&self, mu: &[T]) -> Result<Vec<T>> {
        if mu.len() != self.param_dim() {
            return Err(Error::DimensionMismatch {
                context: "query parameter dimension",
                expected: self.param_dim(),
                found: mu.len(),
            });
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("query parameter"));
        }
        let outside = mu.iter().enumerate().any(|(k, &v)| {
            let tol = T::c(1e-12) * (self.upper[k] - self.lower[k]).abs().max(T::one());
            v < self.lower[k] - tol || v > self.upper[k] + tol
        });
        if !outside {
            return Ok(mu.to_vec());
        }
        match self.spec.extrapolation {
            Extrapolation::Allow => Ok(mu.to_vec()),
            Extrapolation::Error => Err(Error::Extrapolation {
                mu: mu.iter().map(|v| v.to_f64_()).collect(),
            }),
            Extrapolation::Clamp => {
                log::warn!(
                    "parameter {:?} outside training range; clamping",
                    mu.iter().map(|v| v.to_f64_()).collect::<Vec<_>>()
                );
                Ok(mu
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| v.max(self.lower[k]).min(self.upper[k]))
                    .collect())
            }
        }
    }

    /// Feature vector `ψ(μ)` such that the prediction is `coeffsᵀ ψ`.
    pub fn features(&self, mu: &[T]) -> Vec<T> {
        let n = self.params.len();
        match self.spec.kind {
            RegressorKind::LinearInterp => {
                let x = mu[0];
                let o = &self.order;
                let at = |i: usize| self.params[o[i]][0];
                let seg = (0..o.len() - 1).find(|&s| x <= at(s + 1)).unwrap_or(o.len() - 2);
                let (a, b) = (at(seg), at(seg + 1));
                let w = (x - a) / (b - a);
                let mut psi = vec![T::zero(); n];
                psi[o[seg]] = T::one() - w;
                psi[o[seg + 1]] += w;
                psi
            }
            RegressorKind::Nearest => {
                let mut best = 0;
                let mut bd = T::infinity();
                for (i, m) in self.params.iter().enumerate() {
                    let d = dist(m, mu);
                    if d < bd {
                        bd = d;
                        best = i;
                    }
                }
                let mut psi = vec![T::zero(); n];
                psi[best] = T::one();
                psi
            }
            RegressorKind::Rbf { kernel, .. } => {
                let mut psi: Vec<T> = self.params.iter().map(|m| self.kernel(kernel, dist(m, mu))).collect();
                psi.extend(self.exponents.iter().map(|e| monomial(mu, e)));
                psi
            }
            RegressorKind::Polynomial { .. } => {
                let s = self.scaled(mu);
                self.exponents.iter().map(|e| monomial(&s, e)).collect()
            }
        }
    }

    pub fn predict(&self, mu: &[T]) -> Result<Vec<T>> {
        let mu = self.admit(mu)?;
        Ok(self.coeffs.adjoint_matvec(&self.features(&mu)))
    }
}
