//! Dense complex matrices, the Hermitian kernels the estimators need, and
//! seeded Rayleigh channel draws.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, trial_rng};

/// Off-diagonal Frobenius norm, relative to the full norm, at which the
/// Jacobi sweep stops.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Real diagonal matrix, padded with zeros to `rows x cols`.
    pub fn from_diag(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate().take(rows.min(cols)) {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let data = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Matrix product. Panics on mismatched inner dimensions.
    pub fn matmul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let src = rhs.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "vector length differs from column count");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `H H*`, the K x K Gram matrix of the rows.
    pub fn gram(&self) -> ComplexMatrix {
        let n = self.rows;
        let mut g = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: Complex64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b.conj())
                    .sum();
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
            g[(i, i)].im = 0.0;
        }
        g
    }

    pub fn scale(&self, s: f64) -> ComplexMatrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Multiplies row `i` by `w[i]`.
    pub fn scale_rows(&self, w: &[f64]) -> ComplexMatrix {
        assert_eq!(w.len(), self.rows);
        let mut out = self.clone();
        for (i, &wi) in w.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|z| *z *= wi);
        }
        out
    }

    /// Adds `s` to every diagonal entry.
    pub fn add_diag(&mut self, s: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)].re += s;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Squared Euclidean norm of each row, i.e. the diagonal of `H H*`.
    pub fn row_norms_sqr(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor `L` of a Hermitian positive-definite `A = L L*`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: ComplexMatrix,
}

impl Cholesky {
    /// Fails if `a` is not square, not finite, or not numerically positive definite.
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        let n = a.rows();
        if n != a.cols() {
            return Err(Error::Dimension(format!(
                "cholesky needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if !a.is_finite() {
            return Err(Error::Numeric("non-finite matrix entry".into()));
        }
        let max_diag = (0..n).map(|i| a[(i, i)].re.abs()).fold(0.0, f64::max);
        let floor = n as f64 * f64::EPSILON * max_diag;

        let mut l = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > floor) {
                return Err(Error::Numeric(format!(
                    "matrix is not positive definite (pivot {d:e} at column {j})"
                )));
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex64::new(djj, 0.0);
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

    pub fn factor(&self) -> &ComplexMatrix {
        &self.l
    }

    /// Natural log of the determinant of `A`.
    pub fn ln_det(&self) -> f64 {
        (0..self.l.rows())
            .map(|i| self.l[(i, i)].re.ln())
            .sum::<f64>()
            * 2.0
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        let l = &self.l;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * y[k];
            }
            y[i] = s / l[(i, i)].re;
        }
        y
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let mut x = ComplexMatrix::zeros(b.rows(), b.cols());
        let mut col = vec![Complex64::new(0.0, 0.0); b.rows()];
        for j in 0..b.cols() {
            for (i, c) in col.iter_mut().enumerate() {
                *c = b[(i, j)];
            }
            for (i, v) in self.solve(&col).into_iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        x
    }
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations, ascending.
///
/// Each rotation first removes the phase of the pivot entry with a diagonal
/// unitary, then applies a real Givens rotation. Converges when the
/// off-diagonal Frobenius norm falls below [`JACOBI_TOL`] times the full norm.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = a.rows();
    if n != a.cols() || n == 0 {
        return Err(Error::Dimension(format!(
            "hermitian eigensolver needs a nonempty square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::Numeric("non-finite matrix entry".into()));
    }
    let mut m = a.clone();
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let off_norm = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&m) <= JACOBI_TOL * scale;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
            )));
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                // A <- D* A D with D = diag(1, .., e^{-i phi} at q, ..) makes A[p][q] real.
                let phase = apq / mag;
                for k in 0..n {
                    m[(k, q)] *= phase.conj();
                }
                for k in 0..n {
                    m[(q, k)] *= phase;
                }

                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (kp, kq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = kp * c - kq * s;
                    m[(k, q)] = kp * s + kq * c;
                }
                for k in 0..n {
                    let (pk, qk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = pk * c - qk * s;
                    m[(q, k)] = pk * s + qk * c;
                }
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
                m[(p, p)].im = 0.0;
                m[(q, q)].im = 0.0;
            }
        }
        converged = off_norm(&m) <= JACOBI_TOL * scale;
    }

    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Coordinates of one K x M channel draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelEnsemble {
    pub num_users: usize,
    pub num_antennas: usize,
    pub master_seed: u64,
    pub trial_index: u64,
}

impl ChannelEnsemble {
    pub fn new(num_users: usize, num_antennas: usize, master_seed: u64, trial_index: u64) -> Self {
        Self {
            num_users,
            num_antennas,
            master_seed,
            trial_index,
        }
    }
}

/// Draws the K x M i.i.d. CN(0, 1) channel identified by `ensemble`.
pub fn sample_channel(ensemble: &ChannelEnsemble) -> Result<ComplexMatrix> {
    let (k, m) = (ensemble.num_users, ensemble.num_antennas);
    if k == 0 || m == 0 {
        return Err(Error::Dimension(format!("channel must be nonempty, got {k}x{m}")));
    }
    let mut rng = trial_rng(ensemble.master_seed, ensemble.trial_index);
    let data = (0..k * m).map(|_| complex_gaussian(&mut rng)).collect();
    ComplexMatrix::from_vec(k, m, data)
}

/// `log2 det(I + scale * H* H)` through a Cholesky factorization.
pub fn log_det_capacity(h: &ComplexMatrix, scale: f64) -> Result<f64> {
    if h.is_empty() {
        return Err(Error::Dimension("empty channel".into()));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Domain(format!("scale must be positive, got {scale}")));
    }
    if !h.is_finite() {
        return Err(Error::Numeric("non-finite channel entry".into()));
    }
    let mut a = h.conj_transpose().matmul(h).scale(scale);
    a.add_diag(1.0);
    let chol = Cholesky::new(&a)?;
    Ok((chol.ln_det() * crate::LOG2_E).max(0.0))
}

/// Eigenvalues of `H H*`, ascending. Round-off negatives are clamped to zero.
pub fn gram_eigenvalues(h: &ComplexMatrix) -> Result<Vec<f64>> {
    if h.is_empty() {
        return Err(Error::Dimension("empty channel".into()));
    }
    Ok(hermitian_eigenvalues(&h.gram())?
        .into_iter()
        .map(|x| x.max(0.0))
        .collect())
}
