use super::matrix::{dot_conj, norm2, Matrix};
use super::qr::Qr;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rank-`r` factors `U Σ Vᵀ` of a real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSvd<T> {
    /// `N×r`, orthonormal columns.
    pub modes_u: Matrix<T>,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<T>,
    /// `M×r`, orthonormal columns.
    pub right_v: Matrix<T>,
}

impl<T: Real> TruncatedSvd<T> {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `U Σ Vᵀ`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let mut us = self.modes_u.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            for v in us.col_mut(j) {
                *v *= s;
            }
        }
        us.matmul(&self.right_v.transpose())
    }

    /// Keeps the leading `rank` triplets.
    pub fn truncate(&self, rank: usize) -> Self {
        let rank = rank.min(self.rank());
        Self {
            modes_u: self.modes_u.columns(0..rank),
            singular_values: self.singular_values[..rank].to_vec(),
            right_v: self.right_v.columns(0..rank),
        }
    }
}

/// Deterministic rank-`rank` SVD.
///
/// The reconstruction error is the tail singular-value energy of `m`.
pub fn truncated_svd<T: Real>(m: &Matrix<T>, rank: usize) -> Result<TruncatedSvd<T>> {
    let max = m.rows().min(m.cols());
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { rank, max });
    }
    if !m.all_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    Ok(thin_svd(m).truncate(rank))
}

/// Full thin SVD (`k = min(rows, cols)` triplets) of a finite matrix.
pub fn thin_svd<T: Real>(a: &Matrix<T>) -> TruncatedSvd<T> {
    if a.rows() >= a.cols() {
        tall_svd(a)
    } else {
        let t = tall_svd(&a.transpose());
        let mut out = TruncatedSvd {
            modes_u: t.right_v,
            singular_values: t.singular_values,
            right_v: t.modes_u,
        };
        fix_signs(&mut out);
        out
    }
}

fn tall_svd<T: Real>(a: &Matrix<T>) -> TruncatedSvd<T> {
    let (m, n) = a.shape();
    let qr = Qr::new(a);
    let (w, v) = jacobi(qr.r().clone());

    let mut sigma: Vec<T> = (0..n).map(|j| norm2(w.col(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap().then(i.cmp(&j)));
    let smax = sigma.iter().fold(T::zero(), |a, &b| a.max(b));
    let tiny = smax * T::eps() * T::from_usize_(m.max(n));

    let mut ur = Matrix::zeros(n, n);
    let mut vs = Matrix::zeros(n, n);
    let mut sorted = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = sigma[src];
        sorted.push(s);
        vs.set_col(dst, v.col(src));
        if s > tiny && s > T::min_positive_value() {
            let inv = s.recip();
            let col: Vec<T> = w.col(src).iter().map(|&x| x * inv).collect();
            ur.set_col(dst, &col);
        }
    }
    complete_orthonormal(&mut ur, &sorted, tiny);
    sigma = sorted;

    let mut u = Matrix::zeros(m, n);
    for j in 0..n {
        let mut col = vec![T::zero(); m];
        col[..n].copy_from_slice(ur.col(j));
        qr.apply_q(&mut col);
        u.set_col(j, &col);
    }
    let mut out = TruncatedSvd {
        modes_u: u,
        singular_values: sigma,
        right_v: vs,
    };
    fix_signs(&mut out);
    out
}

/// One-sided (Hestenes) Jacobi on the columns of a square matrix.
/// Returns `W = R V` with mutually orthogonal columns and the accumulated `V`.
fn jacobi<T: Real>(mut w: Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let n = w.cols();
    let mut v = Matrix::identity(n);
    let tol = T::eps() * T::from_usize_(n.max(1));
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: T = w.col(p).iter().map(|x| *x * *x).sum();
                let beta: T = w.col(q).iter().map(|x| *x * *x).sum();
                let gamma = dot_conj(w.col(p), w.col(q));
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = (T::one() + t * t).sqrt().recip();
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

#[inline]
fn rotate_columns<T: Real>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    let rows = m.rows();
    let data = m.data_mut();
    let (lo, hi) = data.split_at_mut(q * rows);
    let cp = &mut lo[p * rows..(p + 1) * rows];
    let cq = &mut hi[..rows];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Re-orthogonalizes columns in order and fills columns belonging to
/// (numerically) zero singular values with an orthonormal completion.
fn complete_orthonormal<T: Real>(u: &mut Matrix<T>, sigma: &[T], tiny: T) {
    let n = u.rows();
    let mut next_unit = 0usize;
    for j in 0..u.cols() {
        let mut candidate = if sigma[j] > tiny {
            Some(u.col(j).to_vec())
        } else {
            None
        };
        loop {
            let mut c = match candidate.take() {
                Some(c) => c,
                None => {
                    let mut e = vec![T::zero(); n];
                    e[next_unit % n] = T::one();
                    next_unit += 1;
                    e
                }
            };
            for _ in 0..2 {
                for i in 0..j {
                    let d = dot_conj(u.col(i), &c);
                    for (ci, &x) in c.iter_mut().zip(u.col(i)) {
                        *ci -= d * x;
                    }
                }
            }
            let nrm = norm2(&c);
            if nrm > T::c(0.5) || next_unit > 2 * n {
                let inv = nrm.recip();
                c.iter_mut().for_each(|x| *x *= inv);
                u.set_col(j, &c);
                break;
            }
        }
    }
}

/// Flips each `(u_j, v_j)` so the first largest-magnitude entry of `u_j` is positive.
fn fix_signs<T: Real>(svd: &mut TruncatedSvd<T>) {
    for j in 0..svd.rank() {
        let col = svd.modes_u.col(j);
        let mx = col.iter().fold(T::zero(), |a, b| a.max(b.abs()));
        let thresh = mx * (T::one() - T::c(1e-8));
        if let Some(&lead) = col.iter().find(|x| x.abs() >= thresh) {
            if lead < T::zero() {
                svd.modes_u.col_mut(j).iter_mut().for_each(|x| *x = -*x);
                svd.right_v.col_mut(j).iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
}

/// `V Σ⁺ Uᵀ`, treating `σ_j < rel_cutoff·σ_1` as zero.
pub fn pseudo_inverse<T: Real>(svd: &TruncatedSvd<T>, rel_cutoff: T) -> Result<Matrix<T>> {
    if !(rel_cutoff > T::zero() && rel_cutoff < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "rel_cutoff must lie in (0, 1), got {rel_cutoff}"
        )));
    }
    let s1 = svd.singular_values.first().copied().unwrap_or_else(T::zero);
    let cutoff = rel_cutoff * s1;
    let mut vs = svd.right_v.clone();
    let mut kept = 0;
    for (j, &s) in svd.singular_values.iter().enumerate() {
        let f = if s > T::zero() && s >= cutoff {
            kept += 1;
            s.recip()
        } else {
            T::zero()
        };
        vs.col_mut(j).iter_mut().for_each(|x| *x *= f);
    }
    if kept == 0 {
        return Err(Error::AllBelowCutoff);
    }
    Ok(vs.matmul(&svd.modes_u.transpose()))
}

/// Smallest rank whose cumulative energy `Σσ²` reaches `energy`, clamped to `max_rank`.
pub fn select_rank<T: Real>(singular_values: &[T], energy: T, max_rank: usize) -> Result<usize> {
    if !(energy > T::zero() && energy <= T::one()) {
        return Err(Error::InvalidArgument(format!("energy must lie in (0, 1], got {energy}")));
    }
    if singular_values.iter().any(|&s| s < T::zero() || !s.is_finite())
        || singular_values.windows(2).any(|w| w[1] > w[0])
    {
        return Err(Error::UnsortedSpectrum);
    }
    let total: T = singular_values.iter().map(|&s| s * s).sum();
    if total == T::zero() {
        return Err(Error::ZeroSpectrum);
    }
    let mut acc = T::zero();
    let mut r = singular_values.len();
    for (j, &s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc / total >= energy {
            r = j + 1;
            break;
        }
    }
    Ok(r.min(max_rank).max(1))
}

/// `sqrt(Σ_{j>r} σ_j²)`.
pub fn tail_energy<T: Real>(singular_values: &[T], rank: usize) -> T {
    singular_values
        .iter()
        .skip(rank)
        .map(|&s| s * s)
        .sum::<T>()
        .sqrt()
}
