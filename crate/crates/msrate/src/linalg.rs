//! Dense linear-algebra kernels for small symmetric matrices.
//!
//! Everything here is self-contained and sized for state dimensions of a
//! few dozen at most. The eigensolver is a cyclic Jacobi sweep, which is
//! slow but unconditionally robust on symmetric input; that trade-off is
//! the right one at these dimensions.

use crate::error::{Error, Result};

/// Relative off-diagonal tolerance terminating the Jacobi sweeps.
const JACOBI_TOL: f64 = 1e-12;
/// Hard cap on Jacobi sweeps before reporting failure.
const JACOBI_MAX_SWEEPS: usize = 100;
/// Cholesky pivot tolerance, relative to trace(M)/n.
const PD_PIVOT_TOL: f64 = 1e-12;

/// Dense row-major matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from row slices, rejecting non-finite entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            for &v in r {
                if !v.is_finite() {
                    return Err(Error::DimensionMismatch(format!(
                        "non-finite entry in row {i}"
                    )));
                }
                data.push(v);
            }
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "inner dimensions must agree for matmul"
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut s = 0.0;
            for j in 0..self.cols {
                s += self.get(i, j) * x[j];
            }
            y[i] = s;
        }
        y
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= c;
        }
        m
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert!(self.rows == other.rows && self.cols == other.cols);
        let mut m = self.clone();
        for (v, w) in m.data.iter_mut().zip(&other.data) {
            *v += w;
        }
        m
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert!(self.rows == other.rows && self.cols == other.cols);
        let mut m = self.clone();
        for (v, w) in m.data.iter_mut().zip(&other.data) {
            *v -= w;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Dense symmetric matrix; storage enforces `entries[i][j] == entries[j][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>, // full row-major, kept symmetric by every mutator
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    /// `I/n`, the trace-one multiple of the identity.
    pub fn scaled_identity_trace_one(dim: usize) -> Self {
        let mut m = SymMatrix::identity(dim);
        let c = 1.0 / dim as f64;
        for v in &mut m.data {
            *v *= c;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Matrix::from_rows(rows)?;
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch("symmetric matrix must be square".into()));
        }
        Ok(Self::symmetrized(&m))
    }

    /// `(M + Mᵀ)/2`, pinning storage to exact symmetry.
    pub fn symmetrized(m: &Matrix) -> Self {
        assert_eq!(m.rows(), m.cols());
        let n = m.rows();
        let mut s = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = 0.5 * (m.get(i, j) + m.get(j, i));
                s.data[i * n + j] = v;
                s.data[j * n + i] = v;
            }
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets both `(i,j)` and `(j,i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        let mut m = self.clone();
        for v in &mut m.data {
            *v *= c;
        }
        m
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let mut m = self.clone();
        for (v, w) in m.data.iter_mut().zip(&other.data) {
            *v += w;
        }
        m
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, other.dim);
        let mut m = self.clone();
        for (v, w) in m.data.iter_mut().zip(&other.data) {
            *v -= w;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    /// Quadratic form `xᵀ M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += x[i] * self.get(i, j) * x[j];
            }
        }
        s
    }
}

/// Eigendecomposition of a symmetric matrix, `M = V Λ Vᵀ`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues sorted ascending.
    pub values: Vec<f64>,
    /// Orthogonal matrix whose columns are the eigenvectors, in the same order.
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
pub fn sym_eigen(m: &SymMatrix) -> Result<EigenDecomposition> {
    let n = m.dim();
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);

    let off_norm = |a: &SymMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a.get(i, j) * a.get(i, j);
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&a) > JACOBI_TOL * scale {
        if sweeps >= JACOBI_MAX_SWEEPS {
            return Err(Error::NumericalFailure {
                sweeps,
                off: off_norm(&a),
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                // Rotation angle annihilating a[p][q]; the standard
                // numerically stable form with theta = cot(2*phi).
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                // The (p,p), (q,q), (p,q) entries need the exact rotated
                // values; recompute them from the originals.
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);

                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
        sweeps += 1;
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap());
    let values: Vec<f64> = idx.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, col, v.get(k, i));
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Cholesky factorization `M = L Lᵀ` with lower-triangular `L`.
///
/// Failure doubles as the positive-definiteness predicate: a pivot at or
/// below `1e-12 * trace(M)/n` reports `NotPositiveDefinite`.
pub fn cholesky(m: &SymMatrix) -> Result<Matrix> {
    let n = m.dim();
    let tol = PD_PIVOT_TOL * m.trace().abs() / n as f64;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= tol {
                    return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
pub fn inverse_spd(m: &SymMatrix) -> Result<SymMatrix> {
    let n = m.dim();
    let l = cholesky(m)?;
    // Invert L in place (forward substitution column by column), then
    // M^{-1} = L^{-T} L^{-1}.
    let mut linv = Matrix::zeros(n, n);
    for j in 0..n {
        linv.set(j, j, 1.0 / l.get(j, j));
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l.get(i, k) * linv.get(k, j);
            }
            linv.set(i, j, s / l.get(i, i));
        }
    }
    let inv = linv.transpose().matmul(&linv);
    Ok(SymMatrix::symmetrized(&inv))
}

/// Solves `M x = b` for symmetric positive-definite `M`.
pub fn solve_spd(m: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.dim();
    assert_eq!(b.len(), n);
    let l = cholesky(m)?;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Ok(x)
}

/// Moore-Penrose pseudoinverse of a positive semi-definite matrix.
///
/// Eigenvalues below `rank_tol * lambda_max` are treated as zero.
pub fn pinv_psd(m: &SymMatrix, rank_tol: f64) -> Result<SymMatrix> {
    let n = m.dim();
    let eig = sym_eigen(m)?;
    let lambda_max = eig.values.iter().cloned().fold(0.0_f64, f64::max);
    let cut = rank_tol * lambda_max;
    let mut out = Matrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam <= cut {
            continue;
        }
        let w = 1.0 / lam;
        for i in 0..n {
            let vi = eig.vectors.get(i, k);
            if vi == 0.0 {
                continue;
            }
            for j in 0..n {
                let v = out.get(i, j) + w * vi * eig.vectors.get(j, k);
                out.set(i, j, v);
            }
        }
    }
    Ok(SymMatrix::symmetrized(&out))
}

/// `M^{-1/2}` for symmetric positive-definite `M`.
pub fn sym_sqrt_inv(m: &SymMatrix) -> Result<SymMatrix> {
    // PD check carries the same pivot tolerance as the predicate.
    cholesky(m)?;
    let n = m.dim();
    let eig = sym_eigen(m)?;
    let mut out = Matrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        let w = 1.0 / lam.sqrt();
        for i in 0..n {
            let vi = eig.vectors.get(i, k);
            for j in 0..n {
                let v = out.get(i, j) + w * vi * eig.vectors.get(j, k);
                out.set(i, j, v);
            }
        }
    }
    Ok(SymMatrix::symmetrized(&out))
}

/// Largest singular value, `sqrt(lambda_max(MᵀM))`.
pub fn spectral_norm(m: &Matrix) -> f64 {
    let mtm = SymMatrix::symmetrized(&m.transpose().matmul(m));
    let eig = sym_eigen(&mtm).expect("Jacobi converges on any symmetric matrix");
    eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Numerical column rank via the eigenvalues of `MᵀM`.
pub fn column_rank(m: &Matrix, tol: f64) -> usize {
    let mtm = SymMatrix::symmetrized(&m.transpose().matmul(m));
    let eig = sym_eigen(&mtm).expect("Jacobi converges on any symmetric matrix");
    let lambda_max = eig.values.iter().cloned().fold(0.0_f64, f64::max);
    if lambda_max <= 0.0 {
        return 0;
    }
    eig.values.iter().filter(|&&v| v > tol * lambda_max).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    #[test]
    fn eigen_identity() {
        let eig = sym_eigen(&SymMatrix::identity(2)).unwrap();
        assert_close(eig.values[0], 1.0, 1e-12);
        assert_close(eig.values[1], 1.0, 1e-12);
    }

    #[test]
    fn eigen_diagonal_sorted() {
        let m = SymMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let eig = sym_eigen(&m).unwrap();
        assert_close(eig.values[0], -1.0, 1e-12);
        assert_close(eig.values[1], 3.0, 1e-12);
    }

    #[test]
    fn eigen_2x2_characteristic_roots() {
        // characteristic polynomial lambda^2 - 4 lambda + 3 = 0
        let m = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let eig = sym_eigen(&m).unwrap();
        assert_close(eig.values[0], 1.0, 1e-10);
        assert_close(eig.values[1], 3.0, 1e-10);
    }

    #[test]
    fn cholesky_identity_and_known_factor() {
        let l = cholesky(&SymMatrix::identity(3)).unwrap();
        assert!(l.sub(&Matrix::identity(3)).frobenius_norm() < 1e-14);

        let m = SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let l = cholesky(&m).unwrap();
        let expected = Matrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 2.0]]).unwrap();
        assert!(l.sub(&expected).frobenius_norm() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky(&m),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn inverse_spd_known_values() {
        let i2 = inverse_spd(&SymMatrix::identity(2)).unwrap();
        assert!(i2.sub(&SymMatrix::identity(2)).frobenius_norm() < 1e-14);

        let d = SymMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let dinv = inverse_spd(&d).unwrap();
        assert_close(dinv.get(0, 0), 0.5, 1e-14);
        assert_close(dinv.get(1, 1), 0.25, 1e-14);

        // det = 16, adjugate inverse checked by hand
        let m = SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let minv = inverse_spd(&m).unwrap();
        let expected =
            SymMatrix::from_rows(&[vec![5.0 / 16.0, -2.0 / 16.0], vec![-2.0 / 16.0, 4.0 / 16.0]])
                .unwrap();
        assert!(minv.sub(&expected).frobenius_norm() < 1e-12);
    }

    #[test]
    fn pinv_psd_known_values() {
        let d = SymMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let p = pinv_psd(&d, 1e-10).unwrap();
        assert_close(p.get(0, 0), 0.5, 1e-12);
        assert_close(p.get(1, 1), 0.0, 1e-12);

        let p = pinv_psd(&SymMatrix::identity(2), 1e-10).unwrap();
        assert!(p.sub(&SymMatrix::identity(2)).frobenius_norm() < 1e-12);

        // rank-1 vv' with v = (1,1): pseudoinverse is vv'/4
        let m = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let p = pinv_psd(&m, 1e-10).unwrap();
        let expected = m.scaled(0.25);
        assert!(p.sub(&expected).frobenius_norm() < 1e-10);
    }

    #[test]
    fn sym_sqrt_inv_known_values() {
        let r = sym_sqrt_inv(&SymMatrix::identity(2)).unwrap();
        assert!(r.sub(&SymMatrix::identity(2)).frobenius_norm() < 1e-12);

        let d = SymMatrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap();
        let r = sym_sqrt_inv(&d).unwrap();
        assert_close(r.get(0, 0), 0.5, 1e-12);
        assert_close(r.get(1, 1), 1.0 / 3.0, 1e-12);

        // M = [[2,1],[1,2]] has eigenvalues 1, 3; check M^{-1/2} M M^{-1/2} = I
        let m = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let r = sym_sqrt_inv(&m).unwrap();
        let prod = r.to_matrix().matmul(&m.to_matrix()).matmul(&r.to_matrix());
        assert!(prod.sub(&Matrix::identity(2)).frobenius_norm() < 1e-8);
    }

    #[test]
    fn spectral_norm_known_values() {
        assert_close(spectral_norm(&Matrix::identity(3)), 1.0, 1e-12);
        let d = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, -5.0]]).unwrap();
        assert_close(spectral_norm(&d), 5.0, 1e-12);
        // M'M = diag(0, 4)
        let m = Matrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert_close(spectral_norm(&m), 2.0, 1e-12);
    }

    #[test]
    fn column_rank_known_values() {
        let c = Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        assert_eq!(column_rank(&c, 1e-10), 1);
        assert_eq!(column_rank(&Matrix::identity(2), 1e-10), 2);
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(column_rank(&m, 1e-10), 1);
    }

    #[test]
    fn from_rows_rejects_non_finite() {
        assert!(Matrix::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(Matrix::from_rows(&[vec![f64::INFINITY]]).is_err());
    }

    proptest! {
        #[test]
        fn eigen_reconstruction_and_orthogonality(
            n in 1usize..=8,
            vals in proptest::collection::vec(-1.0f64..1.0, 64),
        ) {
            let mut raw = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    raw.set(i, j, vals[i * 8 + j]);
                }
            }
            let m = SymMatrix::symmetrized(&raw);
            let eig = sym_eigen(&m).unwrap();
            let v = &eig.vectors;
            // V' V = I
            let vtv = v.transpose().matmul(v);
            prop_assert!(vtv.sub(&Matrix::identity(n)).frobenius_norm() <= 1e-10);
            // V diag(values) V' = M
            let mut lam = Matrix::zeros(n, n);
            for i in 0..n { lam.set(i, i, eig.values[i]); }
            let rec = v.matmul(&lam).matmul(&v.transpose());
            let scale = m.frobenius_norm().max(1.0);
            prop_assert!(rec.sub(&m.to_matrix()).frobenius_norm() <= 1e-10 * scale);
        }

        #[test]
        fn cholesky_matches_eigen_predicate(vals in proptest::collection::vec(-1.0f64..1.0, 16)) {
            let mut m = Matrix::zeros(4, 4);
            for i in 0..4 {
                for j in 0..4 {
                    m.set(i, j, vals[i * 4 + j]);
                }
            }
            let s = SymMatrix::symmetrized(&m);
            let tol = PD_PIVOT_TOL * s.trace().abs() / 4.0;
            let lam_min = sym_eigen(&s).unwrap().values[0];
            let chol_ok = cholesky(&s).is_ok();
            // The two predicates agree away from the tolerance boundary.
            if lam_min > tol + 1e-9 {
                prop_assert!(chol_ok);
            }
            if lam_min < tol - 1e-9 {
                prop_assert!(!chol_ok);
            }
        }

        #[test]
        fn pinv_penrose_identities(n in 1usize..=5, rank in 0usize..=5,
                                   vals in proptest::collection::vec(-1.0f64..1.0, 25)) {
            let rank = rank.min(n);
            // Assemble a PSD matrix of the requested rank from outer products.
            let mut m = Matrix::zeros(n, n);
            for r in 0..rank {
                let v: Vec<f64> = (0..n).map(|i| vals[(r * n + i) % 25]).collect();
                for i in 0..n {
                    for j in 0..n {
                        m.set(i, j, m.get(i, j) + v[i] * v[j]);
                    }
                }
            }
            let s = SymMatrix::symmetrized(&m);
            let p = pinv_psd(&s, 1e-10).unwrap();
            let sm = s.to_matrix();
            let pm = p.to_matrix();
            let scale = s.frobenius_norm().max(1.0);
            prop_assert!(sm.matmul(&pm).matmul(&sm).sub(&sm).frobenius_norm() <= 1e-8 * scale);
            prop_assert!(pm.matmul(&sm).matmul(&pm).sub(&pm).frobenius_norm() <= 1e-8 * scale.max(p.frobenius_norm()));
        }

        #[test]
        fn spectral_norm_dominates_unit_vectors(
            mvals in proptest::collection::vec(-1.0f64..1.0, 9),
            xvals in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let mut m = Matrix::zeros(3, 3);
            for i in 0..3 {
                for j in 0..3 {
                    m.set(i, j, mvals[i * 3 + j]);
                }
            }
            let nx: f64 = xvals.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assume!(nx > 1e-6);
            let x: Vec<f64> = xvals.iter().map(|v| v / nx).collect();
            let y = m.matvec(&x);
            let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(spectral_norm(&m) + 1e-10 >= ny);
        }
    }

    #[test]
    fn spectral_norm_attained_by_top_singular_vector() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 0.5], vec![0.3, -1.0, 2.0], vec![0.0, 1.5, 1.0]])
            .unwrap();
        let mtm = SymMatrix::symmetrized(&m.transpose().matmul(&m));
        let eig = sym_eigen(&mtm).unwrap();
        let n = 3;
        let top: Vec<f64> = (0..n).map(|i| eig.vectors.get(i, n - 1)).collect();
        let y = m.matvec(&top);
        let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((spectral_norm(&m) - ny).abs() < 1e-8);
    }
}
