use num_traits::{Float, Zero};

use super::matrix::{dot_conj, norm2, Matrix};
use crate::scalar::Field;

/// Householder QR factorization `A = Q R` of an `m×n` matrix.
///
/// Reflectors are `H_k = I − 2 u_k u_kᴴ` with unit `u_k`, so the same code
/// serves real and complex entries.
#[derive(Clone, Debug)]
pub struct Qr<E> {
    m: usize,
    n: usize,
    reflectors: Vec<Option<Vec<E>>>,
    r: Matrix<E>,
}

impl<E: Field> Qr<E> {
    pub fn new(a: &Matrix<E>) -> Self {
        let (m, n) = a.shape();
        let k = m.min(n);
        let mut work = a.clone();
        let mut reflectors = Vec::with_capacity(k);
        for j in 0..k {
            let x = &work.col(j)[j..];
            let u = householder_vector(x);
            if let Some(u) = &u {
                for c in j..n {
                    let col = &mut work.col_mut(c)[j..];
                    reflect(u, col);
                }
                for v in &mut work.col_mut(j)[j + 1..] {
                    *v = E::zero();
                }
            }
            reflectors.push(u);
        }
        let r = Matrix::from_fn(k, n, |i, j| if i <= j { work[(i, j)] } else { E::zero() });
        Self { m, n, reflectors, r }
    }

    /// Upper-triangular (trapezoidal when `n > m`) factor, `min(m,n) × n`.
    pub fn r(&self) -> &Matrix<E> {
        &self.r
    }

    /// First `min(m, n)` columns of `Q`.
    pub fn thin_q(&self) -> Matrix<E> {
        let k = self.m.min(self.n);
        let mut q = Matrix::zeros(self.m, k);
        for j in 0..k {
            q[(j, j)] = E::one();
        }
        for j in 0..k {
            let col = q.col_mut(j);
            self.apply_q(col);
        }
        q
    }

    /// In-place `v ← Q v`.
    pub fn apply_q(&self, v: &mut [E]) {
        for (j, u) in self.reflectors.iter().enumerate().rev() {
            if let Some(u) = u {
                reflect(u, &mut v[j..]);
            }
        }
    }

    /// In-place `v ← Qᴴ v`.
    pub fn apply_qh(&self, v: &mut [E]) {
        for (j, u) in self.reflectors.iter().enumerate() {
            if let Some(u) = u {
                reflect(u, &mut v[j..]);
            }
        }
    }

    /// Least-squares solution of `A x ≈ b` for `m ≥ n`.
    ///
    /// Components whose pivot `|R_jj|` falls below `rel_tol · max|R_ii|` are set to
    /// zero, giving a basic solution for rank-deficient systems.
    pub fn solve_least_squares(&self, b: &[E], rel_tol: E::Real) -> Vec<E> {
        assert!(self.m >= self.n, "least squares needs a tall system");
        assert_eq!(b.len(), self.m);
        let mut y = b.to_vec();
        self.apply_qh(&mut y);
        back_substitute(&self.r, &y[..self.n], rel_tol)
    }
}

/// Solves `R x = y` for the leading square block of an upper-triangular `R`.
pub(crate) fn back_substitute<E: Field>(r: &Matrix<E>, y: &[E], rel_tol: E::Real) -> Vec<E> {
    let n = y.len();
    let rmax = (0..n)
        .map(|i| r[(i, i)].modulus())
        .fold(E::Real::zero(), |a, b| a.max(b));
    let floor = rmax * rel_tol;
    let mut x = vec![E::zero(); n];
    for i in (0..n).rev() {
        let d = r[(i, i)];
        if d.modulus() <= floor || d.modulus() == E::Real::zero() {
            continue;
        }
        let mut acc = y[i];
        for j in i + 1..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / d;
    }
    x
}

/// Unit vector `u` such that `(I − 2uuᴴ) x = β e₁`; `None` when `x` is already zero.
fn householder_vector<E: Field>(x: &[E]) -> Option<Vec<E>> {
    let xnorm = norm2(x);
    if xnorm == E::Real::zero() {
        return None;
    }
    let tail: E::Real = x[1..].iter().map(|v| v.abs2()).sum();
    let a0 = x[0];
    if tail == E::Real::zero() && a0.imag() == E::Real::zero() {
        // Already of the form βe₁ with real β; no reflection needed.
        return None;
    }
    let phase = if a0.modulus() == E::Real::zero() {
        E::one()
    } else {
        a0.scale(a0.modulus().recip())
    };
    let beta = -(phase.scale(xnorm));
    let mut u = x.to_vec();
    u[0] -= beta;
    let un = norm2(&u);
    let inv = un.recip();
    for v in &mut u {
        *v = v.scale(inv);
    }
    Some(u)
}

#[inline]
fn reflect<E: Field>(u: &[E], v: &mut [E]) {
    let two = E::one() + E::one();
    let d = dot_conj(u, v) * two;
    for (vi, &ui) in v.iter_mut().zip(u) {
        *vi -= ui * d;
    }
}

/// Least-squares (tall) or minimum-norm (wide) solution of `A X ≈ B`, column by column.
pub fn lstsq<E: Field>(a: &Matrix<E>, b: &Matrix<E>, rel_tol: E::Real) -> Matrix<E> {
    assert_eq!(a.rows(), b.rows(), "lstsq row mismatch");
    let (m, n) = a.shape();
    let mut out = Matrix::zeros(n, b.cols());
    if m >= n {
        let qr = Qr::new(a);
        for j in 0..b.cols() {
            let x = qr.solve_least_squares(b.col(j), rel_tol);
            out.set_col(j, &x);
        }
    } else {
        // A = Rᴴ Qᴴ with Aᴴ = Q R; solve Rᴴ y = b then x = Q y.
        let qr = Qr::new(&a.adjoint());
        let r = qr.r();
        let rmax = (0..m)
            .map(|i| r[(i, i)].modulus())
            .fold(E::Real::zero(), |x, y| x.max(y));
        for j in 0..b.cols() {
            let rhs = b.col(j);
            let mut y = vec![E::zero(); n];
            for i in 0..m {
                let d = r[(i, i)];
                if d.modulus() <= rmax * rel_tol || d.modulus() == E::Real::zero() {
                    continue;
                }
                let mut acc = rhs[i];
                for k in 0..i {
                    acc -= r[(k, i)].conj() * y[k];
                }
                y[i] = acc / d.conj();
            }
            qr.apply_q(&mut y);
            out.set_col(j, &y);
        }
    }
    out
}

/// Orthonormal basis for the range of `a` (thin Q).
pub fn orthonormalize<E: Field>(a: &Matrix<E>) -> Matrix<E> {
    Qr::new(a).thin_q()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::C;

    #[test]
    fn reconstructs_real() {
        let a = Matrix::from_rows(4, 3, &[
            1.0, 2.0, 3.0, //
            4.0, 5.0, 6.0, //
            7.0, 8.0, 10.0, //
            -1.0, 0.5, 2.0,
        ]);
        let qr = Qr::new(&a);
        let q = qr.thin_q();
        assert!(q.orthonormality_defect() < 1e-14);
        let back = q.matmul(qr.r());
        assert!(back.sub(&a).max_abs() < 1e-13);
    }

    #[test]
    fn reconstructs_complex() {
        let a = Matrix::from_fn(5, 3, |i, j| C::new((i + 2 * j) as f64 * 0.3 - 1.0, (i * j) as f64 * 0.1 + 0.2));
        let qr = Qr::new(&a);
        let q = qr.thin_q();
        let back = q.matmul(qr.r());
        assert!(back.sub(&a).max_abs() < 1e-13);
        let g = q.adjoint_matmul(&q);
        assert!(g.sub(&Matrix::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let a = Matrix::from_rows(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = Matrix::from_rows(4, 1, &[6.0, 5.0, 7.0, 10.0]);
        let x = lstsq(&a, &b, 1e-14);
        // Normal equations: [4 6; 6 14] x = [28; 49] -> x = (4.9, 1.4).
        assert!((x[(0, 0)] - 4.9).abs() < 1e-12);
        assert!((x[(1, 0)] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn minimum_norm_for_wide_systems() {
        let a = Matrix::from_rows(1, 2, &[1.0, 1.0]);
        let b = Matrix::from_rows(1, 1, &[2.0]);
        let x = lstsq(&a, &b, 1e-14);
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((x[(1, 0)] - 1.0).abs() < 1e-14);
    }
}
