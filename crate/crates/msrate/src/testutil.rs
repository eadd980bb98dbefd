//! Shared fixtures for unit tests: the benchmark systems and the
//! hand-derived scalar closed forms used as oracles.

use crate::linalg::Matrix;
use crate::model::SystemSpec;

pub fn scalar_spec(a: f64, abar: f64, b: f64, bbar: f64, sigma: f64) -> SystemSpec {
    SystemSpec::new(
        Matrix::from_rows(&[vec![a]]).unwrap(),
        Matrix::from_rows(&[vec![abar]]).unwrap(),
        Matrix::from_rows(&[vec![b]]).unwrap(),
        Matrix::from_rows(&[vec![bbar]]).unwrap(),
        sigma,
    )
    .unwrap()
}

/// Scalar closed form of the value operator at P = 1:
/// `(a^2 + s^2 abar^2) - (ab + s^2 abar bbar)^2 / (b^2 + s^2 bbar^2)`.
pub fn gamma_true(a: f64, abar: f64, b: f64, bbar: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    (a * a + s2 * abar * abar) - (a * b + s2 * abar * bbar).powi(2) / (b * b + s2 * bbar * bbar)
}

/// The stabilizable two-dimensional benchmark system.
pub fn example_2d(sigma: f64) -> SystemSpec {
    SystemSpec::new(
        Matrix::from_rows(&[vec![0.88, 0.22], vec![-0.18, 0.86]]).unwrap(),
        Matrix::from_rows(&[vec![0.12, 0.04], vec![0.06, 0.10]]).unwrap(),
        Matrix::from_rows(&[vec![1.0], vec![0.7]]).unwrap(),
        Matrix::from_rows(&[vec![0.20], vec![0.25]]).unwrap(),
        sigma,
    )
    .unwrap()
}

/// The four-dimensional near-marginal benchmark system (sigma = 2).
pub fn example_4d() -> SystemSpec {
    SystemSpec::new(
        Matrix::from_rows(&[
            vec![0.9999, 0.34, 0.0, 0.0],
            vec![0.0, 0.9996, 0.25, 0.0],
            vec![0.0, 0.0, 0.9992, 0.22],
            vec![0.0, 0.0, 0.0, 0.9988],
        ])
        .unwrap(),
        Matrix::from_rows(&[
            vec![0.16, 0.06, 0.0, 0.0],
            vec![0.05, 0.13, 0.05, 0.0],
            vec![0.0, 0.04, 0.11, 0.05],
            vec![0.0, 0.0, 0.03, 0.10],
        ])
        .unwrap(),
        Matrix::from_rows(&[
            vec![0.0024, 0.0],
            vec![0.0, 0.05],
            vec![0.22, 0.0],
            vec![0.0, 0.14],
        ])
        .unwrap(),
        Matrix::from_rows(&[
            vec![0.375, 0.0],
            vec![0.0, 0.25],
            vec![0.15, 0.0],
            vec![0.0, 0.15],
        ])
        .unwrap(),
        2.0,
    )
    .unwrap()
}
