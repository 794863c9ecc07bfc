//! General (non-symmetric) eigendecomposition.
//!
//! Householder reduction to Hessenberg form, single-shift complex QR with
//! Wilkinson shifts to reach Schur form, then eigenvectors by back
//! substitution on the triangular factor. Real inputs are promoted to complex.

use num_traits::{One, Zero};

use super::matrix::{norm2, Matrix};
use crate::error::{Error, Result};
use crate::scalar::{Field, Real, C};

/// Eigenpairs of a square matrix in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition<T> {
    pub eigenvalues: Vec<C<T>>,
    /// Columns are unit-norm eigenvectors, phase-normalized.
    pub eigenvectors: Matrix<C<T>>,
}

/// Eigendecomposition of a real square matrix.
pub fn eig<T: Real>(m: &Matrix<T>) -> Result<EigenDecomposition<T>> {
    eig_complex(&m.to_complex())
}

/// Eigendecomposition of a complex square matrix.
///
/// Eigenvalues are ordered by descending modulus, ties by descending
/// imaginary part.
pub fn eig_complex<T: Real>(m: &Matrix<C<T>>) -> Result<EigenDecomposition<T>> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if !m.all_finite() {
        return Err(Error::NonFinite("eig input"));
    }
    let n = rows;
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: vec![],
            eigenvectors: Matrix::zeros(0, 0),
        });
    }
    let (mut h, mut z) = hessenberg(m);
    schur(&mut h, &mut z)?;
    let values: Vec<C<T>> = (0..n).map(|i| h[(i, i)]).collect();
    let vectors = triangular_eigenvectors(&h, &z);

    let order = canonical_order(&values, |z| z.norm(), |z| z.im);
    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let eigenvectors = vectors.select_columns(&order);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn hessenberg<T: Real>(a: &Matrix<C<T>>) -> (Matrix<C<T>>, Matrix<C<T>>) {
    let n = a.rows();
    let mut h = a.clone();
    let mut z = Matrix::<C<T>>::identity(n);
    let two = C::new(T::c(2.0), T::zero());
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C<T>> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = norm2(&x);
        if xnorm == T::zero() {
            continue;
        }
        let tail: T = x[1..].iter().map(|v| v.norm_sqr()).sum();
        if tail == T::zero() {
            continue;
        }
        let phase = if x[0].norm() == T::zero() {
            C::one()
        } else {
            x[0].unscale(x[0].norm())
        };
        let mut u = x.clone();
        u[0] += phase.scale(xnorm);
        let un = norm2(&u);
        u.iter_mut().for_each(|v| *v = v.unscale(un));

        // H ← P H, rows k+1..n.
        for j in 0..n {
            let mut d = C::<T>::zero();
            for (t, &ui) in u.iter().enumerate() {
                d += ui.conj() * h[(k + 1 + t, j)];
            }
            d *= two;
            for (t, &ui) in u.iter().enumerate() {
                h[(k + 1 + t, j)] -= ui * d;
            }
        }
        // H ← H P and Z ← Z P, columns k+1..n.
        for target in [&mut h, &mut z] {
            for i in 0..n {
                let mut d = C::<T>::zero();
                for (t, &ui) in u.iter().enumerate() {
                    d += target[(i, k + 1 + t)] * ui;
                }
                d *= two;
                for (t, &ui) in u.iter().enumerate() {
                    target[(i, k + 1 + t)] -= d * ui.conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = C::zero();
        }
    }
    (h, z)
}

/// Rotation `G = [[c, s], [−s̄, c]]` with real `c` mapping `(x, y)` to `(ρ·x/|x|, 0)`.
#[inline]
fn givens<T: Real>(x: C<T>, y: C<T>) -> (T, C<T>) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == T::zero() {
        return (T::one(), C::zero());
    }
    if ax == T::zero() {
        return (T::zero(), C::one());
    }
    let rho = ax.hypot(ay);
    let c = ax / rho;
    let s = x.unscale(ax) * y.conj().unscale(rho);
    (c, s)
}

/// Reduces an upper-Hessenberg matrix to upper-triangular Schur form in place,
/// accumulating the unitary similarity into `z`.
fn schur<T: Real>(h: &mut Matrix<C<T>>, z: &mut Matrix<C<T>>) -> Result<()> {
    let n = h.rows();
    let eps = T::eps();
    let hnorm = h.frobenius_norm().max(T::min_positive_value());
    let max_iter = 30 * n.max(1);
    let mut total_iter = 0usize;
    let mut hi = n - 1;
    let mut iter = 0usize;
    while hi > 0 {
        // Locate the start of the active unreduced block.
        let mut lo = hi;
        while lo > 0 {
            let s = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let s = if s == T::zero() { hnorm } else { s };
            if h[(lo, lo - 1)].norm() <= eps * s {
                h[(lo, lo - 1)] = C::zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total_iter += 1;
        if total_iter > max_iter {
            return Err(Error::EigenNoConvergence {
                iterations: total_iter,
            });
        }

        let shift = if iter % 11 == 0 {
            // Exceptional shift to break cycles.
            h[(hi, hi)] + C::new(h[(hi, hi - 1)].norm() * T::c(0.75), h[(hi, hi - 1)].norm() * T::c(0.5))
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        // Implicit single-shift bulge chase over rows lo..=hi.
        for k in lo..hi {
            let (x, y) = if k == lo {
                (h[(lo, lo)] - shift, h[(lo + 1, lo)])
            } else {
                (h[(k, k - 1)], h[(k + 1, k - 1)])
            };
            let (c, s) = givens(x, y);
            let cc = C::new(c, T::zero());
            let col_start = if k == lo { lo } else { k - 1 };
            for j in col_start..n {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = cc * a + s * b;
                h[(k + 1, j)] = -s.conj() * a + cc * b;
            }
            if k > lo {
                h[(k + 1, k - 1)] = C::zero();
            }
            let row_end = (k + 2).min(hi);
            for i in 0..=row_end {
                let a = h[(i, k)];
                let b = h[(i, k + 1)];
                h[(i, k)] = a * cc + b * s.conj();
                h[(i, k + 1)] = -a * s + b * cc;
            }
            for i in 0..n {
                let a = z[(i, k)];
                let b = z[(i, k + 1)];
                z[(i, k)] = a * cc + b * s.conj();
                z[(i, k + 1)] = -a * s + b * cc;
            }
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = C::zero();
        }
    }
    Ok(())
}

fn wilkinson_shift<T: Real>(a: C<T>, b: C<T>, c: C<T>, d: C<T>) -> C<T> {
    let half = T::c(0.5);
    let tr_half = (a + d).scale(half);
    let diff_half = (a - d).scale(half);
    let disc = (diff_half * diff_half + b * c).sqrt();
    let l1 = tr_half + disc;
    let l2 = tr_half - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn triangular_eigenvectors<T: Real>(t: &Matrix<C<T>>, z: &Matrix<C<T>>) -> Matrix<C<T>> {
    let n = t.rows();
    let tnorm = t.frobenius_norm().max(T::min_positive_value());
    let small = T::eps() * tnorm;
    let mut out = Matrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = vec![C::<T>::zero(); n];
        y[k] = C::one();
        for i in (0..k).rev() {
            let mut acc = C::<T>::zero();
            for j in i + 1..=k {
                acc += t[(i, j)] * y[j];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < small {
                d = C::new(small, T::zero());
            }
            y[i] = -acc / d;
            let big = y[i].norm();
            if big > T::c(1e100) {
                let inv = big.recip();
                y[..=k].iter_mut().for_each(|v| *v = v.scale(inv));
            }
        }
        let mut v = z.matvec(&y);
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x = x.unscale(nv));
        phase_normalize(&mut v);
        out.set_col(k, &v);
    }
    out
}

/// Rotates `v` so its first largest-magnitude entry is real and positive.
/// Returns the unit phase factor that was applied.
pub fn phase_normalize<T: Real>(v: &mut [C<T>]) -> C<T> {
    let mx = v.iter().fold(T::zero(), |a, z| a.max(z.norm()));
    if mx == T::zero() {
        return C::one();
    }
    let thresh = mx * (T::one() - T::c(1e-8));
    let idx = v.iter().position(|z| z.norm() >= thresh).unwrap_or(0);
    let lead = v[idx];
    let rot = lead.conj().unscale(lead.norm());
    v.iter_mut().for_each(|x| *x *= rot);
    v[idx] = C::new(v[idx].norm(), T::zero());
    rot
}

/// Permutation sorting `values` by `primary` descending, then `secondary`
/// descending. Primary keys within a relative tolerance count as ties so
/// conjugate pairs order deterministically.
pub fn canonical_order<T: Real>(
    values: &[C<T>],
    primary: impl Fn(C<T>) -> T,
    secondary: impl Fn(C<T>) -> T,
) -> Vec<usize> {
    let keys: Vec<(T, T)> = values.iter().map(|&z| (primary(z), secondary(z))).collect();
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let by_primary = |&a: &usize, &b: &usize| {
        keys[b]
            .0
            .partial_cmp(&keys[a].0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(keys[b].1.partial_cmp(&keys[a].1).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.cmp(&b))
    };
    idx.sort_by(by_primary);
    let scale = keys.iter().fold(T::zero(), |a, k| a.max(k.0.abs()));
    let abs_tol = T::c(100.0) * T::eps() * scale;
    let mut out = Vec::with_capacity(idx.len());
    let mut start = 0;
    while start < idx.len() {
        let head = keys[idx[start]].0;
        let mut end = start + 1;
        while end < idx.len() {
            let k = keys[idx[end]].0;
            let tol = T::c(1e-10) * head.abs().max(k.abs()) + abs_tol;
            if (head - k).abs() <= tol {
                end += 1;
            } else {
                break;
            }
        }
        let mut group = idx[start..end].to_vec();
        group.sort_by(|&a, &b| {
            keys[b]
                .1
                .partial_cmp(&keys[a].1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        out.extend(group);
        start = end;
    }
    out
}

/// `max_j ‖A w_j − λ_j w_j‖₂`.
pub fn max_residual<T: Real>(a: &Matrix<C<T>>, e: &EigenDecomposition<T>) -> T {
    let mut worst = T::zero();
    for (j, &l) in e.eigenvalues.iter().enumerate() {
        let w = e.eigenvectors.col(j);
        let aw = a.matvec(w);
        let r: Vec<C<T>> = aw.iter().zip(w).map(|(&x, &y)| x - y * l).collect();
        worst = worst.max(norm2(&r));
    }
    worst
}
