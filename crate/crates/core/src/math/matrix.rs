use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("matrix is not symmetric positive definite (pivot {pivot} is {value})")]
    NotSpd { pivot: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, MatrixError> {
        if rows * cols != data.len() {
            return Err(MatrixError::Shape(format!(
                "{rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn column(v: &[T]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.cols != other.rows {
            return Err(MatrixError::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatrixError::Shape("add needs equal shapes".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// Solves `A X = B` for symmetric positive definite `A` via a square-root
/// free Cholesky (`L D Lᵀ`) factorisation. `B` may carry several right-hand
/// sides as columns.
pub fn solve_spd<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, MatrixError> {
    let n = a.rows;
    if a.cols != n || b.rows != n {
        return Err(MatrixError::Shape(format!(
            "A is {}x{}, B is {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    // unit lower factor (row-major) and pivots
    let mut l = Matrix::<T>::identity(n);
    let mut d = vec![T::zero(); n];
    for j in 0..n {
        let mut dj = a[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * d[k];
        }
        if !(dj > T::zero()) {
            return Err(MatrixError::NotSpd { pivot: j, value: dj.as_f64() });
        }
        d[j] = dj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = s / dj;
        }
    }
    let mut x = b.clone();
    for c in 0..b.cols {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s;
        }
        for i in 0..n {
            x[(i, c)] /= d[i];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;

    #[test]
    fn identity_returns_rhs() {
        let b = Matrix::column(&[1.0, -2.0, 3.5]);
        assert_eq!(solve_spd(&Matrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn diagonal_system() {
        let x = solve_spd(&Matrix::diag(&[2.0, 4.0]), &Matrix::column(&[2.0, 4.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = Rng::new(20);
        let n = 20;
        let data = (0..n * n).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect();
        let m = Matrix::from_row_major(n, n, data).unwrap();
        let a = m.transpose().matmul(&m).unwrap().add(&Matrix::identity(n)).unwrap();
        let b = Matrix::column(&(0..n).map(|_| rng.uniform(-5.0, 5.0).unwrap()).collect::<Vec<_>>());
        let x = solve_spd(&a, &b).unwrap();
        let ax = a.matmul(&x).unwrap();
        let resid = ax
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(resid <= 1e-8 * b.max_abs(), "residual {resid}");
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = Matrix::diag(&[1.0, -1.0]);
        let err = solve_spd(&a, &Matrix::column(&[1.0, 1.0])).unwrap_err();
        assert!(matches!(err, MatrixError::NotSpd { pivot: 1, .. }));
    }

    #[test]
    fn solves_in_f32() {
        let x = solve_spd(&Matrix::<f32>::diag(&[2.0, 4.0]), &Matrix::column(&[2.0, 4.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0f32, 1.0]);
    }
}
