//! Dense lower-triangular Cholesky factorization and the two triangular solves
//! the Gaussian-process code needs. Storage is a row-major `n × n` buffer whose
//! strict upper triangle is left at zero.

/// Failure of [`Cholesky::factor`]: the first pivot that was not strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPd {
    pub pivot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factor a symmetric positive-definite matrix given in row-major order.
    /// Only the lower triangle of `a` is read.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self, NotPd> {
        assert_eq!(a.len(), n * n, "matrix buffer has wrong length");
        for i in 0..n {
            let (head, tail) = a.split_at_mut(i * n);
            let row_i = &mut tail[..n];
            for j in 0..i {
                let row_j = &head[j * n..j * n + n];
                let s = row_i[j] - dot(&row_i[..j], &row_j[..j]);
                row_i[j] = s / row_j[j];
            }
            let d = row_i[i] - dot(&row_i[..i], &row_i[..i]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(NotPd { pivot: i });
            }
            row_i[i] = d.sqrt();
            row_i[i + 1..].fill(0.0);
        }
        Ok(Cholesky { n, l: a })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.l[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Row-major copy of the factor.
    pub fn to_dense(&self) -> Vec<f64> {
        self.l.clone()
    }

    /// Solve `L z = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solve `Lᵀ x = z` in place.
    pub fn solve_upper_in_place(&self, z: &mut [f64]) {
        debug_assert_eq!(z.len(), self.n);
        for i in (0..self.n).rev() {
            let row = self.row(i);
            let xi = z[i] / row[i];
            z[i] = xi;
            for (zk, lik) in z[..i].iter_mut().zip(&row[..i]) {
                *zk -= lik * xi;
            }
        }
    }

    /// Solve `L Lᵀ x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `Σ log L_ii`, i.e. half the log-determinant of the factored matrix.
    pub fn half_log_det(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum()
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
