use crate::scalar::Real;

/// Dynamically sized vector.
pub type DVec<T> = Vec<T>;

/// Row-major dense matrix, sized for small least-squares problems.
#[derive(Clone, Debug)]
pub struct DMat<T: Real> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> DMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[T]) -> DVec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .fold(T::zero(), |s, x| s + x)
            })
            .collect()
    }

    /// `self^T v`.
    pub fn transpose_mul_vec(&self, v: &[T]) -> DVec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let s = v[r];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * s;
            }
        }
        out
    }

    /// Gram matrix `self^T self` (cols x cols, symmetric).
    pub fn gram(&self) -> DMat<T> {
        let n = self.cols;
        let mut g = DMat::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ri = row[i];
                for j in i..n {
                    *g.at_mut(i, j) += ri * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                *g.at_mut(i, j) = g.at(j, i);
            }
        }
        g
    }
}

/// Solves `(A + damping I) x = b` for symmetric positive semi-definite `A`
/// via Cholesky. Returns the solution and a pivot-ratio condition estimate;
/// `None` if a pivot is not strictly positive.
pub fn solve_damped_normal<T: Real>(a: &DMat<T>, b: &[T], damping: T) -> Option<(DVec<T>, T)> {
    let n = a.rows;
    assert_eq!(a.cols, n);
    assert_eq!(b.len(), n);
    let mut l = vec![T::zero(); n * n];
    let mut min_d = T::infinity();
    let mut max_d = T::zero();
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.at(i, j);
            if i == j {
                s += damping;
            }
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= T::zero() || !s.is_finite() {
                    return None;
                }
                min_d = min_d.min(s);
                max_d = max_d.max(s);
                l[i * n + j] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let v = l[i * n + k] * y[k];
            y[i] = y[i] - v;
        }
        y[i] = y[i] / l[i * n + i];
    }
    let mut x = y;
    for i in (0..n).rev() {
        for k in i + 1..n {
            let v = l[k * n + i] * x[k];
            x[i] = x[i] - v;
        }
        x[i] = x[i] / l[i * n + i];
    }
    let cond = max_d / min_d;
    Some((x, cond))
}
