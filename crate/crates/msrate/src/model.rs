//! Problem-instance representation, validation, and config ingestion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SymMatrix};

/// Tolerance for the numerical rank test of the stacked input matrix.
const RANK_TOL: f64 = 1e-10;

/// The problem instance: `x_{k+1} = (A + A_bar w_k) x_k + (B + B_bar w_k) u_k`
/// with scalar noise `w_k ~ N(0, sigma^2)`.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub n: usize,
    pub m: usize,
    pub a: Matrix,
    pub a_bar: Matrix,
    pub b: Matrix,
    pub b_bar: Matrix,
    pub sigma: f64,
}

/// Outcome of the nondegeneracy check on the stacked input matrix.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// True iff the stacked matrix `[B; sigma*B_bar]` has full column rank.
    pub nondegenerate: bool,
    pub stacked_rank: usize,
    /// `lambda_max(A A' + sigma^2 A_bar A_bar')`.
    pub c_a: f64,
    /// `lambda_min(B'B + sigma^2 B_bar'B_bar)`.
    pub r0_min_eig: f64,
}

/// On-disk JSON schema; unknown keys are rejected.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: usize,
    m: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "A_bar")]
    a_bar: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "B_bar")]
    b_bar: Vec<Vec<f64>>,
    sigma: f64,
}

impl SystemSpec {
    pub fn new(
        a: Matrix,
        a_bar: Matrix,
        b: Matrix,
        b_bar: Matrix,
        sigma: f64,
    ) -> Result<SystemSpec> {
        let n = a.rows();
        let m = b.cols();
        if a.cols() != n {
            return Err(Error::DimensionMismatch("A must be square".into()));
        }
        if a_bar.rows() != n || a_bar.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A_bar must be {n}x{n}, got {}x{}",
                a_bar.rows(),
                a_bar.cols()
            )));
        }
        if b.rows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B must have {n} rows, got {}",
                b.rows()
            )));
        }
        if b_bar.rows() != n || b_bar.cols() != m {
            return Err(Error::DimensionMismatch(format!(
                "B_bar must be {n}x{m}, got {}x{}",
                b_bar.rows(),
                b_bar.cols()
            )));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidSigma(sigma));
        }
        Ok(SystemSpec {
            n,
            m,
            a,
            a_bar,
            b,
            b_bar,
            sigma,
        })
    }

    /// Copy with `A` replaced by `theta * A`; everything else unchanged.
    pub fn scale_a(&self, theta: f64) -> SystemSpec {
        assert!(theta > 0.0, "theta must be positive");
        let mut s = self.clone();
        s.a = self.a.scaled(theta);
        s
    }

    /// Copy with the noise level replaced.
    pub fn with_sigma(&self, sigma: f64) -> Result<SystemSpec> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidSigma(sigma));
        }
        let mut s = self.clone();
        s.sigma = sigma;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let raw = RawConfig {
            n: self.n,
            m: self.m,
            a: matrix_to_rows(&self.a),
            a_bar: matrix_to_rows(&self.a_bar),
            b: matrix_to_rows(&self.b),
            b_bar: matrix_to_rows(&self.b_bar),
            sigma: self.sigma,
        };
        serde_json::to_string_pretty(&raw).expect("config serialization cannot fail")
    }
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect())
        .collect()
}

/// Nondegeneracy check: rank of `[B; sigma*B_bar]` plus the constants
/// `C_A` and `lambda_min(R_0)` used throughout the bound computations.
pub fn validate(spec: &SystemSpec) -> ValidationReport {
    let n = spec.n;
    let m = spec.m;
    let mut stacked = Matrix::zeros(2 * n, m);
    for i in 0..n {
        for j in 0..m {
            stacked.set(i, j, spec.b.get(i, j));
            stacked.set(n + i, j, spec.sigma * spec.b_bar.get(i, j));
        }
    }
    let stacked_rank = linalg::column_rank(&stacked, RANK_TOL);

    let s2 = spec.sigma * spec.sigma;
    let aat = spec
        .a
        .matmul(&spec.a.transpose())
        .add(&spec.a_bar.matmul(&spec.a_bar.transpose()).scaled(s2));
    let c_a = linalg::sym_eigen(&SymMatrix::symmetrized(&aat))
        .expect("Jacobi converges on any symmetric matrix")
        .values
        .last()
        .copied()
        .unwrap();

    let r0 = spec
        .b
        .transpose()
        .matmul(&spec.b)
        .add(&spec.b_bar.transpose().matmul(&spec.b_bar).scaled(s2));
    let r0_min_eig = linalg::sym_eigen(&SymMatrix::symmetrized(&r0))
        .expect("Jacobi converges on any symmetric matrix")
        .values[0];

    ValidationReport {
        nondegenerate: stacked_rank == m,
        stacked_rank,
        c_a,
        r0_min_eig,
    }
}

/// `R_0 = B'B + sigma^2 B_bar'B_bar`.
pub fn r0(spec: &SystemSpec) -> SymMatrix {
    let s2 = spec.sigma * spec.sigma;
    SymMatrix::symmetrized(
        &spec
            .b
            .transpose()
            .matmul(&spec.b)
            .add(&spec.b_bar.transpose().matmul(&spec.b_bar).scaled(s2)),
    )
}

pub fn parse_spec(json: &str) -> Result<SystemSpec> {
    let raw: RawConfig = serde_json::from_str(json).map_err(|e| Error::ParseError(e.to_string()))?;
    let a = Matrix::from_rows(&raw.a)?;
    let a_bar = Matrix::from_rows(&raw.a_bar)?;
    let b = Matrix::from_rows(&raw.b)?;
    let b_bar = Matrix::from_rows(&raw.b_bar)?;
    if a.rows() != raw.n || b.cols() != raw.m {
        return Err(Error::DimensionMismatch(format!(
            "declared (n, m) = ({}, {}) but A is {}x{} and B is {}x{}",
            raw.n,
            raw.m,
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    SystemSpec::new(a, a_bar, b, b_bar, raw.sigma)
}

pub fn load_spec(path: &Path) -> Result<SystemSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ParseError(format!("{}: {e}", path.display())))?;
    parse_spec(&text)
}
