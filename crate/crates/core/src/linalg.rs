//! Dense complex matrices and the Cholesky solve used by the estimator and
//! the ZF detector.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Complex<T>,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex<T>] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&mut self, s: T) {
        for z in &mut self.data {
            *z *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// `self * rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^H * rhs`.
    pub fn adjoint_mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "row counts differ");
        let mut out = Self::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let b_row = rhs.row(k);
            for (i, a) in self.row(k).iter().enumerate() {
                let a = a.conj();
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * rhs^H`.
    pub fn mul_adjoint(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.cols, "column counts differ");
        Self::from_fn(self.rows, rhs.rows, |i, j| {
            self.row(i)
                .iter()
                .zip(rhs.row(j))
                .fold(Complex::new(T::zero(), T::zero()), |acc, (&a, &b)| {
                    acc + a * b.conj()
                })
        })
    }

    pub fn frobenius_sq(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }
}

impl<T> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular factor `A = L L^H` of a Hermitian positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: CMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &CMatrix<T>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::invalid("Cholesky needs a square matrix"));
        }
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            let floor = a[(j, j)].re.abs() * T::epsilon() * T::lit(64.0);
            if !(d > floor) || !d.is_finite() {
                return Err(Error::numeric(
                    "cholesky",
                    format!("pivot {j} is {d}; matrix is not positive definite"),
                ));
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex::new(djj, T::zero());
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor_matrix(&self) -> &CMatrix<T> {
        &self.l
    }

    /// Rough 2-norm condition number from the pivot spread, `(max L_ii / min L_ii)^2`.
    pub fn condition_estimate(&self) -> T {
        let n = self.l.rows();
        let (lo, hi) = (0..n).fold((T::infinity(), T::zero()), |(lo, hi), i| {
            let d = self.l[(i, i)].re;
            (lo.min(d), hi.max(d))
        });
        (hi / lo).powi(2)
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &CMatrix<T>) -> CMatrix<T> {
        let n = self.l.rows();
        assert_eq!(b.rows(), n);
        let mut x = b.clone();
        let cols = b.cols();
        // forward: L Y = B
        for i in 0..n {
            for k in 0..i {
                let lik = self.l[(i, k)];
                for c in 0..cols {
                    let v = x[(k, c)];
                    x[(i, c)] -= lik * v;
                }
            }
            let d = self.l[(i, i)].re;
            for c in 0..cols {
                x[(i, c)] /= d;
            }
        }
        // backward: L^H X = Y
        for i in (0..n).rev() {
            for k in i + 1..n {
                let lki = self.l[(k, i)].conj();
                for c in 0..cols {
                    let v = x[(k, c)];
                    x[(i, c)] -= lki * v;
                }
            }
            let d = self.l[(i, i)].re;
            for c in 0..cols {
                x[(i, c)] /= d;
            }
        }
        x
    }

    pub fn inverse(&self) -> CMatrix<T> {
        self.solve(&CMatrix::identity(self.l.rows()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn products_agree_with_explicit_adjoints() {
        let a = CMatrix::from_fn(3, 2, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let b = CMatrix::from_fn(3, 4, |i, j| c((i * j) as f64, 1.0 - i as f64));
        assert!(a.adjoint_mul(&b).max_abs_diff(&a.adjoint().mul(&b)) < 1e-14);
        let d = CMatrix::from_fn(4, 2, |i, j| c(j as f64, i as f64 * 0.3));
        assert!(a.mul_adjoint(&d).max_abs_diff(&a.mul(&d.adjoint())) < 1e-14);
    }

    #[test]
    fn cholesky_solves_hermitian_system() {
        let g = CMatrix::from_fn(5, 3, |i, j| {
            c(
                (i + 2 * j) as f64 % 3.0 + 0.1 * i as f64,
                (i as f64 - j as f64) * 0.7,
            )
        });
        let a = g.adjoint_mul(&g);
        let ch = Cholesky::factor(&a).unwrap();
        let inv = ch.inverse();
        let id = a.mul(&inv);
        assert!(id.max_abs_diff(&CMatrix::identity(3)) < 1e-10);
        assert!(ch.condition_estimate() >= 1.0);
    }

    #[test]
    fn rejects_singular_gram() {
        let g = CMatrix::from_fn(4, 2, |i, _| c(i as f64, 0.0));
        let err = Cholesky::factor(&g.adjoint_mul(&g)).unwrap_err();
        assert!(matches!(err, Error::NumericFailure { .. }));
    }
}
