//! Seeded synthetic parametric systems with closed-form solutions.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig, matrix_power, orthonormalize, Matrix};
use crate::snapshot::{lattice_indices, ParametricDataset, TimeGrid};

/// `base + slope·μ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub base: f64,
    pub slope: Vec<f64>,
}

impl Affine {
    pub fn new(base: f64, slope: &[f64]) -> Self {
        Self {
            base,
            slope: slope.to_vec(),
        }
    }

    pub fn eval(&self, mu: &[f64]) -> f64 {
        self.base + self.slope.iter().zip(mu).map(|(s, m)| s * m).sum::<f64>()
    }
}

/// `c(μ) e^{σ(μ) t} (u cos ν(μ)t + w sin ν(μ)t)`; `w` is dropped when `ν ≡ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpMode {
    pub rate: Affine,
    pub frequency: Affine,
    /// Polynomial coefficients in the first parameter component, constant first.
    pub coeff: Vec<f64>,
}

impl ExpMode {
    fn oscillates(&self) -> bool {
        self.frequency.base != 0.0 || self.frequency.slope.iter().any(|&s| s != 0.0)
    }

    fn coefficient(&self, mu: &[f64]) -> f64 {
        self.coeff.iter().rev().fold(0.0, |acc, &a| acc * mu[0] + a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Family {
    /// `A(μ) = Q (M₀ + Σ_d μ_d M_d) Qᵀ` with `modes` latent dimensions.
    Linear { modes: usize, variation: f64, skew: f64 },
    /// Row-major N_h×N_h operators `[A₀, A₁, …, A_p]` and initial state.
    LinearSupplied { operators: Vec<Vec<f64>>, x0: Vec<f64> },
    ExpModes { modes: Vec<ExpMode> },
    /// Radius obeys `ṙ = r(λ − r²)`, phase advances at `ν`; the features
    /// `(r cos θ, r sin θ, r² cos 2θ, r² sin 2θ)` are lifted orthonormally.
    LiftedOscillator { growth: Affine, frequency: Affine, r0: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub family: Family,
    pub n_h: usize,
    pub n_params: usize,
    pub param_range: Vec<(f64, f64)>,
    pub n_t: usize,
    pub dt: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn linear(n_h: usize, modes: usize, n_params: usize, n_t: usize, seed: u64) -> Self {
        Self {
            family: Family::Linear {
                modes,
                variation: 0.2,
                skew: 0.0,
            },
            n_h,
            n_params,
            param_range: vec![(0.0, 1.0)],
            n_t,
            dt: 0.1,
            t0: 0.0,
            noise_std: 0.0,
            seed,
        }
    }

    pub fn exp_modes(n_h: usize, modes: Vec<ExpMode>, n_params: usize, range: (f64, f64), n_t: usize, dt: f64, seed: u64) -> Self {
        Self {
            family: Family::ExpModes { modes },
            n_h,
            n_params,
            param_range: vec![range],
            n_t,
            dt,
            t0: 0.0,
            noise_std: 0.0,
            seed,
        }
    }

    pub fn param_dim(&self) -> usize {
        self.param_range.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(format!("synth spec: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be non-negative");
        }
        if self.n_h == 0 || self.n_params == 0 || self.n_t < 2 {
            return bad("n_h, n_params must be positive and n_t at least 2");
        }
        if self.param_range.is_empty() || self.param_range.iter().any(|(a, b)| !(a <= b)) {
            return bad("parameter ranges must be non-empty intervals");
        }
        let p = self.param_dim();
        let slopes_ok = |a: &Affine| a.slope.len() == p;
        match &self.family {
            Family::Linear { modes, variation, skew } => {
                if *modes == 0 || *modes > self.n_h {
                    return bad("linear family needs 1 ≤ modes ≤ n_h");
                }
                if !(variation.is_finite() && skew.is_finite()) {
                    return bad("linear family variation and skew must be finite");
                }
            }
            Family::LinearSupplied { operators, x0 } => {
                if operators.len() != p + 1 || operators.iter().any(|a| a.len() != self.n_h * self.n_h) {
                    return bad("supplied operators must be p+1 row-major n_h×n_h matrices");
                }
                if x0.len() != self.n_h {
                    return bad("supplied x0 must have n_h entries");
                }
            }
            Family::ExpModes { modes } => {
                if modes.is_empty() {
                    return bad("exp-modes family needs at least one mode");
                }
                if modes.iter().any(|m| !slopes_ok(&m.rate) || !slopes_ok(&m.frequency)) {
                    return bad("exp-mode slopes must match the parameter dimension");
                }
                let cols: usize = modes.iter().map(|m| if m.oscillates() { 2 } else { 1 }).sum();
                if cols > self.n_h {
                    return bad("exp-modes need n_h ≥ number of spatial vectors");
                }
            }
            Family::LiftedOscillator { growth, frequency, r0 } => {
                if !slopes_ok(growth) || !slopes_ok(frequency) {
                    return bad("oscillator slopes must match the parameter dimension");
                }
                if self.n_h < 4 {
                    return bad("lifted oscillator needs n_h ≥ 4");
                }
                if !(*r0 > 0.0) {
                    return bad("oscillator r0 must be positive");
                }
            }
        }
        Ok(())
    }

    /// Training parameters: a uniform grid for scalar μ, seeded uniform draws otherwise.
    pub fn parameters(&self) -> Vec<Vec<f64>> {
        if self.param_dim() == 1 {
            let (a, b) = self.param_range[0];
            let n = self.n_params;
            return (0..n)
                .map(|i| vec![if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 }])
                .collect();
        }
        let mut rng = stream(self.seed, 2);
        (0..self.n_params)
            .map(|_| self.param_range.iter().map(|&(a, b)| if a == b { a } else { rng.random_range(a..b) }).collect())
            .collect()
    }
}

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    orthonormalize(&Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0)))
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    /// Latent operators `[M₀, M₁, …]`, latent initial state.
    Linear { ops: Vec<Matrix<f64>>, c: Vec<f64> },
    Exp,
    Oscillator,
}

/// Exact state evaluator for a [`SynthSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Oracle {
    pub spec: SynthSpec,
    /// Orthonormal lift from the latent or feature space to N_h.
    lift: Matrix<f64>,
    kind: Kind,
}

impl Oracle {
    pub fn new(spec: &SynthSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = stream(spec.seed, 0);
        let p = spec.param_dim();
        let (lift, kind) = match &spec.family {
            Family::Linear { modes, variation, skew } => {
                let m = *modes;
                let q = random_orthonormal(spec.n_h, m, &mut rng);
                let r = random_orthonormal(m, m, &mut rng);
                let corners = spec.param_range.iter().map(|&(a, b)| (a, b)).collect::<Vec<_>>();
                let mut d = vec![Matrix::zeros(m, m); p + 1];
                let pairs = m / 2;
                for k in 0..pairs {
                    let rho = 0.85 + 0.13 * (k as f64 + rng.random_range(0.0..1.0)) / pairs as f64;
                    let theta = 0.15 + 0.8 * (k as f64 + rng.random_range(0.1..0.9)) / pairs as f64;
                    let z0 = num_complex::Complex::from_polar(rho.min(0.98), theta);
                    set_block(&mut d[0], 2 * k, z0.re, z0.im);
                    for (dim, &(a, b)) in corners.iter().enumerate() {
                        // Endpoint eigenvalue ρ' e^{iθ(1+variation)} with ρ' ≤ 0.98.
                        let rho1 = (rho * (1.0 - 0.05 * variation.abs())).min(0.98);
                        let z1 = num_complex::Complex::from_polar(rho1, theta * (1.0 + variation));
                        let span = if b > a { b - a } else { 1.0 };
                        let dz = (z1 - z0) / span / p as f64;
                        set_block(&mut d[dim + 1], 2 * k, dz.re, dz.im);
                        let shift = dz * a;
                        d[0][(2 * k, 2 * k)] -= shift.re;
                        d[0][(2 * k + 1, 2 * k + 1)] -= shift.re;
                        d[0][(2 * k, 2 * k + 1)] += shift.im;
                        d[0][(2 * k + 1, 2 * k)] -= shift.im;
                    }
                }
                if m % 2 == 1 {
                    d[0][(m - 1, m - 1)] = 0.9;
                    for (dim, &(a, b)) in corners.iter().enumerate() {
                        let span = if b > a { b - a } else { 1.0 };
                        let slope = -0.1 * variation / span / p as f64;
                        d[dim + 1][(m - 1, m - 1)] = slope;
                        d[0][(m - 1, m - 1)] -= slope * a;
                    }
                }
                let mut ops: Vec<Matrix<f64>> = d.iter().map(|x| r.matmul(x).matmul(&r.transpose())).collect();
                if *skew != 0.0 {
                    let g = Matrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
                    ops[0] = ops[0].add(&g.sub(&g.transpose()).scaled(0.5 * skew));
                }
                let c = (0..m)
                    .map(|_| rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                    .collect();
                (q, Kind::Linear { ops, c })
            }
            Family::LinearSupplied { operators, x0 } => {
                let n = spec.n_h;
                let ops = operators.iter().map(|a| Matrix::from_rows(n, n, a)).collect();
                (Matrix::identity(n), Kind::Linear { ops, c: x0.clone() })
            }
            Family::ExpModes { modes } => {
                let cols = modes.iter().map(|m| if m.oscillates() { 2 } else { 1 }).sum();
                (random_orthonormal(spec.n_h, cols, &mut rng), Kind::Exp)
            }
            Family::LiftedOscillator { .. } => (random_orthonormal(spec.n_h, 4, &mut rng), Kind::Oscillator),
        };
        let oracle = Self {
            spec: spec.clone(),
            lift,
            kind,
        };
        oracle.check_stability()?;
        Ok(oracle)
    }

    /// Latent operator `M(μ)`; the full operator is `lift · M(μ) · liftᵀ`.
    pub fn latent_operator(&self, mu: &[f64]) -> Option<Matrix<f64>> {
        match &self.kind {
            Kind::Linear { ops, .. } => {
                let mut a = ops[0].clone();
                for (d, op) in ops[1..].iter().enumerate() {
                    a = a.add(&op.scaled(mu[d]));
                }
                Some(a)
            }
            _ => None,
        }
    }

    pub fn operator(&self, mu: &[f64]) -> Option<Matrix<f64>> {
        self.latent_operator(mu)
            .map(|a| self.lift.matmul(&a).matmul(&self.lift.transpose()))
    }

    pub fn lift(&self) -> &Matrix<f64> {
        &self.lift
    }

    fn check_stability(&self) -> Result<()> {
        if !matches!(self.kind, Kind::Linear { .. }) {
            return Ok(());
        }
        let mut probes = self.spec.parameters();
        let p = self.spec.param_dim();
        for mask in 0..(1usize << p.min(10)) {
            probes.push(
                (0..p)
                    .map(|d| {
                        let (a, b) = self.spec.param_range[d];
                        if mask >> d & 1 == 1 { b } else { a }
                    })
                    .collect(),
            );
        }
        if p == 1 {
            let (a, b) = self.spec.param_range[0];
            probes.extend((0..=64).map(|i| vec![a + (b - a) * i as f64 / 64.0]));
        }
        let tol = 1e-12;
        for mu in probes {
            let a = self.latent_operator(&mu).expect("linear family");
            let radius = eig(&a)?
                .eigenvalues
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if radius > 1.0 + tol {
                return Err(Error::UnstableFamily { radius, mu: mu[0] });
            }
        }
        Ok(())
    }

    /// Exact state at `(μ, t)`. Discrete families accept lattice instants only.
    pub fn eval(&self, mu: &[f64], t: f64) -> Result<Vec<f64>> {
        if mu.len() != self.spec.param_dim() {
            return Err(Error::DimensionMismatch {
                context: "parameter dimension",
                expected: self.spec.param_dim(),
                found: mu.len(),
            });
        }
        let s = &self.spec;
        let z = match (&self.kind, &s.family) {
            (Kind::Linear { c, .. }, _) => {
                let k = lattice_indices(&[t], s.t0, s.dt)?[0] - 1;
                let a = self.latent_operator(mu).expect("linear family");
                matrix_power(&a, k as u64).matvec(c)
            }
            (Kind::Exp, Family::ExpModes { modes }) => {
                let tau = t - s.t0;
                let mut z = Vec::with_capacity(self.lift.cols());
                for m in modes {
                    let amp = m.coefficient(mu) * (m.rate.eval(mu) * tau).exp();
                    let nu = m.frequency.eval(mu);
                    if m.oscillates() {
                        z.push(amp * (nu * tau).cos());
                        z.push(amp * (nu * tau).sin());
                    } else {
                        z.push(amp);
                    }
                }
                z
            }
            (Kind::Oscillator, Family::LiftedOscillator { growth, frequency, r0 }) => {
                let tau = t - s.t0;
                let lam = growth.eval(mu);
                let u0 = r0 * r0;
                // u = r² solves u' = 2u(λ − u).
                let u = if lam.abs() < 1e-14 {
                    u0 / (1.0 + 2.0 * u0 * tau)
                } else {
                    lam / (1.0 + (lam / u0 - 1.0) * (-2.0 * lam * tau).exp())
                };
                let r = u.max(0.0).sqrt();
                let th = frequency.eval(mu) * tau;
                vec![r * th.cos(), r * th.sin(), u * (2.0 * th).cos(), u * (2.0 * th).sin()]
            }
            _ => unreachable!("oracle kind matches family"),
        };
        Ok(self.lift.matvec(&z))
    }

    /// Exact N_h×len(times) trajectory.
    pub fn trajectory(&self, mu: &[f64], times: &[f64]) -> Result<Matrix<f64>> {
        if let Kind::Linear { c, .. } = &self.kind {
            let ks = lattice_indices(times, self.spec.t0, self.spec.dt)?;
            let a = self.latent_operator(mu).expect("linear family");
            let horizon = ks.iter().copied().max().unwrap_or(0);
            let mut states = Vec::with_capacity(horizon);
            let mut z = c.clone();
            for _ in 0..horizon {
                states.push(self.lift.matvec(&z));
                z = a.matvec(&z);
            }
            let cols: Vec<Vec<f64>> = ks.iter().map(|&k| states[k - 1].clone()).collect();
            return Matrix::from_columns(self.spec.n_h, &cols);
        }
        let cols = times.iter().map(|&t| self.eval(mu, t)).collect::<Result<Vec<_>>>()?;
        Matrix::from_columns(self.spec.n_h, &cols)
    }

    pub fn grid(&self) -> Result<TimeGrid<f64>> {
        TimeGrid::uniform(self.spec.t0, self.spec.dt, self.spec.n_t)
    }
}

fn set_block(m: &mut Matrix<f64>, i: usize, re: f64, im: f64) {
    m[(i, i)] = re;
    m[(i, i + 1)] = -im;
    m[(i + 1, i)] = im;
    m[(i + 1, i + 1)] = re;
}

/// Samples the training dataset on the uniform grid; noise, if any, is added
/// to snapshots only.
pub fn generate(spec: &SynthSpec) -> Result<(ParametricDataset<f64>, Oracle)> {
    let oracle = Oracle::new(spec)?;
    let grid = Arc::new(oracle.grid()?);
    let params = spec.parameters();
    let mut trajs = params
        .iter()
        .map(|mu| oracle.trajectory(mu, grid.instants()))
        .collect::<Result<Vec<_>>>()?;
    if spec.noise_std > 0.0 {
        let mut rng = stream(spec.seed, 1);
        let normal = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for x in &mut trajs {
            x.data_mut().iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        }
    }
    Ok((ParametricDataset::new(params, trajs, grid)?, oracle))
}

/// Scalar two-tone signal `Σ_j a_j e^{σ t} cos(ν_j t)`, used by the optimized-DMD checks.
pub fn two_tone(times: &[f64], decay: f64, freqs: &[f64], weights: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|&t| {
            freqs
                .iter()
                .zip(weights)
                .map(|(&f, &w)| w * (decay * t).exp() * (f * t).cos())
                .sum()
        })
        .collect()
}
