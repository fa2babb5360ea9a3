//! Small shared linear-algebra kernels: vector operations, a symmetric
//! banded Cholesky factorization (coarsest multigrid level, reduced
//! systems), and one-sided Jacobi orthogonalization for thin bases.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        s += *x * *y;
    }
    s
}

#[inline]
pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// y += alpha * x
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * *xi;
    }
}

/// Symmetric positive-definite banded matrix stored by lower band:
/// entry (i, j) with 0 <= i - j <= bw lives at `data[i * (bw + 1) + (i - j)]`.
#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    pub n: usize,
    pub bw: usize,
    data: Vec<T>,
}

impl<T: Real> BandMatrix<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![T::zero(); n * (bw + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= j && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Adds into the lower-band entry (i, j), i >= j.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[self.slot(i, j)]
    }
}

/// Cholesky factor of a banded SPD matrix; solves by forward/back substitution.
#[derive(Debug, Clone)]
pub struct BandedCholesky<T> {
    n: usize,
    bw: usize,
    l: Vec<T>,
}

impl<T: Real> BandedCholesky<T> {
    /// Factorizes a banded SPD matrix. Fails on a non-positive pivot.
    pub fn factor(a: &BandMatrix<T>) -> Result<Self> {
        let n = a.n;
        let bw = a.bw;
        let w = bw + 1;
        let mut l = a.data.clone();
        for i in 0..n {
            let jlo = i.saturating_sub(bw);
            for j in jlo..i {
                let klo = jlo.max(j.saturating_sub(bw));
                let mut s = l[i * w + (i - j)];
                for k in klo..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                let d = l[j * w]; // L(j, j)
                l[i * w + (i - j)] = s / d;
            }
            let mut s = l[i * w];
            for k in jlo..i {
                let v = l[i * w + (i - k)];
                s -= v * v;
            }
            if s <= T::zero() || !s.is_finite() {
                return Err(Error::Solver(format!(
                    "banded Cholesky: non-positive pivot {s} at row {i} (matrix not SPD)"
                )));
            }
            l[i * w] = s.sqrt();
        }
        Ok(Self { n, bw, l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        debug_assert_eq!(b.len(), self.n);
        let w = self.bw + 1;
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.l[i * w + (i - k)] * x[k];
            }
            x[i] = s / self.l[i * w];
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            let mut s = x[i];
            let jhi = (i + self.bw).min(self.n - 1);
            for j in (i + 1)..=jhi {
                s -= self.l[j * w + (j - i)] * x[j];
            }
            x[i] = s / self.l[i * w];
        }
        x
    }
}

/// Solves a small dense symmetric positive-definite system given by its
/// full matrix in row-major order. Used for the reduced m-by-m systems.
pub fn solve_spd_dense<T: Real>(a: &[Vec<T>], b: &[T]) -> Result<Vec<T>> {
    let n = b.len();
    let mut band = BandMatrix::zeros(n, n.saturating_sub(1));
    for i in 0..n {
        for j in 0..=i {
            band.set(i, j, a[i][j]);
        }
    }
    let chol = BandedCholesky::factor(&band)?;
    Ok(chol.solve(b))
}

/// Orthonormalizes the columns of a thin matrix by one-sided Jacobi
/// rotations. Returns the left factors ordered by decreasing singular
/// value; columns whose singular value falls below `rel_tol` times the
/// largest are dropped.
pub fn orthonormalize_columns<T: Real>(mut cols: Vec<Vec<T>>, rel_tol: T) -> Vec<Vec<T>> {
    let m = cols.len();
    if m == 0 {
        return cols;
    }
    let eps = T::of(1e-15);
    let max_sweeps = 30;
    for _ in 0..max_sweeps {
        let mut converged = true;
        for p in 0..m {
            for q in (p + 1)..m {
                let (head, tail) = cols.split_at_mut(q);
                let cp = &mut head[p];
                let cq = &mut tail[0];
                let alpha = dot(cp, cp);
                let beta = dot(cq, cq);
                let gamma = dot(cp, cq);
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = if zeta >= T::zero() {
                    T::one() / (zeta + (T::one() + zeta * zeta).sqrt())
                } else {
                    -T::one() / (-zeta + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
                    let va = *a;
                    let vb = *b;
                    *a = c * va - s * vb;
                    *b = s * va + c * vb;
                }
            }
        }
        if converged {
            break;
        }
    }
    // Sort by column norm (the singular values), drop the deficient tail.
    let mut order: Vec<usize> = (0..m).collect();
    let norms: Vec<T> = cols.iter().map(|c| norm2(c)).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());
    let sigma_max = norms[order[0]];
    let mut out = Vec::with_capacity(m);
    if sigma_max <= T::zero() {
        return out;
    }
    for &idx in &order {
        if norms[idx] < rel_tol * sigma_max {
            break;
        }
        let inv = T::one() / norms[idx];
        out.push(cols[idx].iter().map(|&v| v * inv).collect());
    }
    out
}
