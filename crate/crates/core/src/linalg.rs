//! Small dense Hermitian kernels on row-major buffers.
//!
//! Only the lower triangle of the input is read. After [`cholesky_in_place`]
//! the lower triangle holds `L` with `A = L L^H`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{GsmError, Result};

/// Cholesky factorization; fails on the first non-positive pivot.
pub fn cholesky_in_place(a: &mut [Complex64], n: usize) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let row_j = &mut a[j * n..(j + 1) * n];
        let mut d = row_j[j].re;
        for v in &row_j[..j] {
            d -= v.norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(GsmError::NotPositiveDefinite { pivot: j });
        }
        let ljj = d.sqrt();
        row_j[j] = Complex64::new(ljj, 0.0);
        let inv = 1.0 / ljj;
        for i in (j + 1)..n {
            let (upper, lower) = a.split_at_mut(i * n);
            let row_j = &upper[j * n..j * n + j];
            let row_i = &mut lower[..n];
            let mut s = row_i[j];
            for (li, lj) in row_i[..j].iter().zip(row_j) {
                s -= li * lj.conj();
            }
            row_i[j] = s * inv;
        }
    }
    Ok(())
}

/// `ln det A` from a factor produced by [`cholesky_in_place`].
pub fn logdet_from_factor(l: &[Complex64], n: usize) -> f64 {
    2.0 * (0..n).map(|j| l[j * n + j].re.ln()).sum::<f64>()
}

/// `ln det A` for Hermitian positive definite `A`; `a` is overwritten.
pub fn hermitian_logdet_in_place(a: &mut [Complex64], n: usize) -> Result<f64> {
    cholesky_in_place(a, n)?;
    Ok(logdet_from_factor(a, n))
}

/// Solves `L z = b` in place.
pub fn forward_substitute(l: &[Complex64], n: usize, b: &mut [Complex64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let mut s = b[i];
        for (lk, bk) in row.iter().zip(&b[..i]) {
            s -= lk * bk;
        }
        b[i] = s / l[i * n + i].re;
    }
}

/// Solves `L^H z = b` in place.
pub fn backward_substitute_adjoint(l: &[Complex64], n: usize, b: &mut [Complex64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i].conj() * b[k];
        }
        b[i] = s / l[i * n + i].re;
    }
}

/// Row-major copy of a matrix.
pub fn to_row_major(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// `ln det` of a Hermitian positive definite matrix.
pub fn hermitian_logdet(m: &DMatrix<Complex64>) -> Result<f64> {
    let n = m.nrows();
    let mut buf = to_row_major(m);
    hermitian_logdet_in_place(&mut buf, n)
}

/// A Cholesky factor kept for repeated quadratic forms.
#[derive(Debug, Clone)]
pub struct HermitianFactor {
    l: Vec<Complex64>,
    n: usize,
    logdet: f64,
}

impl HermitianFactor {
    pub fn new(m: &DMatrix<Complex64>) -> Result<Self> {
        let n = m.nrows();
        let mut l = to_row_major(m);
        cholesky_in_place(&mut l, n)?;
        let logdet = logdet_from_factor(&l, n);
        Ok(HermitianFactor { l, n, logdet })
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `y^H A^{-1} y`, using `scratch` (length `n`) as workspace.
    pub fn quad_form(&self, y: &[Complex64], scratch: &mut [Complex64]) -> f64 {
        scratch.copy_from_slice(y);
        forward_substitute(&self.l, self.n, scratch);
        scratch.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `A^{-1} b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut z = b.to_vec();
        forward_substitute(&self.l, self.n, &mut z);
        backward_substitute_adjoint(&self.l, self.n, &mut z);
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_normal, RngStream};

    fn random_hpd(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = RngStream::new(seed, 0).rng();
        let g = DMatrix::from_fn(n, n + 2, |_, _| complex_normal(&mut rng));
        &g * g.adjoint() + DMatrix::identity(n, n) * Complex64::new(0.1, 0.0)
    }

    #[test]
    fn logdet_matches_lu() {
        for n in [1, 2, 5, 16] {
            let a = random_hpd(n, n as u64);
            let lu_det = a.clone().lu().determinant();
            assert!(lu_det.im.abs() < 1e-8 * lu_det.re.abs());
            let ours = hermitian_logdet(&a).unwrap();
            assert!((ours - lu_det.re.ln()).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn factor_reconstructs() {
        let a = random_hpd(6, 3);
        let f = HermitianFactor::new(&a).unwrap();
        let l = DMatrix::from_fn(6, 6, |i, j| if j <= i { f.l[i * 6 + j] } else { Complex64::new(0.0, 0.0) });
        let back = &l * l.adjoint();
        assert!((back - &a).norm() < 1e-10);
    }

    #[test]
    fn solve_and_quad_form() {
        let a = random_hpd(5, 4);
        let f = HermitianFactor::new(&a).unwrap();
        let mut rng = RngStream::new(4, 1).rng();
        let b: Vec<Complex64> = (0..5).map(|_| complex_normal(&mut rng)).collect();
        let x = f.solve(&b);
        let bv = nalgebra::DVector::from_column_slice(&b);
        let xv = nalgebra::DVector::from_column_slice(&x);
        assert!((&a * &xv - &bv).norm() < 1e-10);
        let q = f.quad_form(&b, &mut vec![Complex64::default(); 5]);
        let direct = bv.dotc(&xv).re;
        assert!((q - direct).abs() < 1e-10);
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = DMatrix::identity(3, 3) * Complex64::new(1.0, 0.0);
        a[(2, 2)] = Complex64::new(-1.0, 0.0);
        assert!(matches!(
            hermitian_logdet(&a),
            Err(GsmError::NotPositiveDefinite { pivot: 2 })
        ));
    }
}
