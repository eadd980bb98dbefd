//! Exact second-moment propagation of the closed loop, reproducible
//! Monte Carlo estimation of the state energy, and decay-slope fitting.
//!
//! # Reproducibility contract
//!
//! Trajectory `t` of a run with seed `s` draws from ChaCha8 seeded with
//! `s` on stream `t` (the generator's 64-bit stream counter), so every
//! trajectory has an independent substream fixed by `(seed, t)` alone.
//! Standard normals use the Box-Muller transform with a fixed
//! convention: two 53-bit uniforms `u1, u2` in (0, 1] per draw and
//! `z = sqrt(-2 ln u1) * cos(2 pi u2)`; the sine branch is discarded.
//! The cross-trajectory reduction always sums in trajectory order.
//! Identical `(spec, cfg)` therefore reproduce bit-identical output on
//! any thread count, with or without the `parallel` feature.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};
use crate::model::SystemSpec;

/// Energies beyond this magnitude truncate the trajectory and flag
/// divergence.
const OVERFLOW_LIMIT: f64 = 1e300;

/// Simulation parameters for one Monte Carlo run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Deterministic initial state.
    pub x0: Vec<f64>,
    /// Feedback gain applied as `u = -K x`.
    pub k: Matrix,
    pub horizon: usize,
    pub num_traj: usize,
    pub seed: u64,
    /// `(start, end)` step window for the slope regression.
    pub fit_window: (usize, usize),
}

/// Which estimator produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Exact,
    MonteCarlo,
}

/// Sequence of mean-square energies `E[x_k' x_k]`, exact or estimated.
#[derive(Debug, Clone)]
pub struct MomentTrajectory {
    /// `energies[k]` for `k = 0..=horizon`; shorter when truncated.
    pub energies: Vec<f64>,
    pub kind: TrajectoryKind,
    /// Set when an energy exceeded the overflow limit and the
    /// trajectory was truncated.
    pub diverged: bool,
}

fn closed_loop(spec: &SystemSpec, k: &Matrix) -> (Matrix, Matrix) {
    assert_eq!(k.rows(), spec.m);
    assert_eq!(k.cols(), spec.n);
    (
        spec.a.sub(&spec.b.matmul(k)),
        spec.a_bar.sub(&spec.b_bar.matmul(k)),
    )
}

/// Exact propagation of the second moment:
/// `S_{k+1} = A_cl S_k A_cl' + sigma^2 A_bar_cl S_k A_bar_cl'` with
/// `S_0 = x0 x0'`, reporting `trace(S_k)`.
pub fn propagate_exact(
    spec: &SystemSpec,
    k: &Matrix,
    x0: &[f64],
    horizon: usize,
) -> MomentTrajectory {
    assert_eq!(x0.len(), spec.n, "x0 must have dimension n");
    let (a_cl, abar_cl) = closed_loop(spec, k);
    let s2 = spec.sigma * spec.sigma;
    let n = spec.n;

    let mut sigma_k = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            sigma_k.set(i, j, x0[i] * x0[j]);
        }
    }
    let mut energies = Vec::with_capacity(horizon + 1);
    energies.push(x0.iter().map(|v| v * v).sum());
    let mut diverged = false;
    for _ in 0..horizon {
        let sm = sigma_k.to_matrix();
        sigma_k = SymMatrix::symmetrized(
            &a_cl
                .matmul(&sm)
                .matmul(&a_cl.transpose())
                .add(&abar_cl.matmul(&sm).matmul(&abar_cl.transpose()).scaled(s2)),
        );
        let e = sigma_k.trace();
        if !e.is_finite() || e > OVERFLOW_LIMIT {
            diverged = true;
            break;
        }
        energies.push(e);
    }
    MomentTrajectory {
        energies,
        kind: TrajectoryKind::Exact,
        diverged,
    }
}

/// 53-bit uniform in (0, 1].
#[inline]
fn uniform_open_closed(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0)
}

/// One standard normal via Box-Muller, cosine branch only.
#[inline]
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = uniform_open_closed(rng);
    let u2 = uniform_open_closed(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Per-trajectory squared-norm path for substream `(seed, index)`.
fn sample_trajectory(
    spec: &SystemSpec,
    a_cl: &Matrix,
    abar_cl: &Matrix,
    x0: &[f64],
    horizon: usize,
    seed: u64,
    index: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = spec.n;
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(x.iter().map(|v| v * v).sum());
    for _ in 0..horizon {
        let w = spec.sigma * standard_normal(&mut rng);
        let mut next = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += (a_cl.get(i, j) + w * abar_cl.get(i, j)) * x[j];
            }
            next[i] = s;
        }
        x = next;
        out.push(x.iter().map(|v| v * v).sum());
    }
    out
}

/// Seeded Monte Carlo estimate of the energy path, averaging
/// `num_traj` independent trajectories.
pub fn monte_carlo(spec: &SystemSpec, cfg: &SimConfig) -> MomentTrajectory {
    monte_carlo_impl(spec, cfg, cfg_parallelism())
}

/// Sequential implementation, always available; the parallel path must
/// produce bit-identical results (the benches compare them).
pub fn monte_carlo_sequential(spec: &SystemSpec, cfg: &SimConfig) -> MomentTrajectory {
    monte_carlo_impl(spec, cfg, 0)
}

/// Thread cap from `MSRATE_THREADS`: 0 forces sequential execution, an
/// unset or unparsable value leaves the rayon default.
fn cfg_parallelism() -> usize {
    match std::env::var("MSRATE_THREADS") {
        Ok(v) => v.parse().unwrap_or(usize::MAX),
        Err(_) => usize::MAX,
    }
}

fn monte_carlo_impl(spec: &SystemSpec, cfg: &SimConfig, threads: usize) -> MomentTrajectory {
    assert!(cfg.num_traj >= 1 && cfg.horizon >= 1);
    assert_eq!(cfg.x0.len(), spec.n);
    let (a_cl, abar_cl) = closed_loop(spec, &cfg.k);

    let paths: Vec<Vec<f64>> = run_trajectories(spec, &a_cl, &abar_cl, cfg, threads);

    // Fixed-order reduction keeps the result independent of scheduling.
    let mut energies = vec![0.0; cfg.horizon + 1];
    for path in &paths {
        for (e, v) in energies.iter_mut().zip(path) {
            *e += v;
        }
    }
    let inv = 1.0 / cfg.num_traj as f64;
    let mut diverged = false;
    let mut len = energies.len();
    for (k, e) in energies.iter_mut().enumerate() {
        *e *= inv;
        if !e.is_finite() || *e > OVERFLOW_LIMIT {
            diverged = true;
            len = k;
            break;
        }
    }
    energies.truncate(len.max(1));
    MomentTrajectory {
        energies,
        kind: TrajectoryKind::MonteCarlo,
        diverged,
    }
}

#[cfg(feature = "parallel")]
fn run_trajectories(
    spec: &SystemSpec,
    a_cl: &Matrix,
    abar_cl: &Matrix,
    cfg: &SimConfig,
    threads: usize,
) -> Vec<Vec<f64>> {
    if threads == 0 {
        return (0..cfg.num_traj)
            .map(|t| sample_trajectory(spec, a_cl, abar_cl, &cfg.x0, cfg.horizon, cfg.seed, t as u64))
            .collect();
    }
    let run = || {
        (0..cfg.num_traj)
            .into_par_iter()
            .map(|t| sample_trajectory(spec, a_cl, abar_cl, &cfg.x0, cfg.horizon, cfg.seed, t as u64))
            .collect()
    };
    if threads == usize::MAX {
        run()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool construction");
        pool.install(run)
    }
}

#[cfg(not(feature = "parallel"))]
fn run_trajectories(
    spec: &SystemSpec,
    a_cl: &Matrix,
    abar_cl: &Matrix,
    cfg: &SimConfig,
    _threads: usize,
) -> Vec<Vec<f64>> {
    (0..cfg.num_traj)
        .map(|t| sample_trajectory(spec, a_cl, abar_cl, &cfg.x0, cfg.horizon, cfg.seed, t as u64))
        .collect()
}

/// Ordinary least squares of `log(energies[k])` against `k` over
/// `[start, end)`; returns the per-step slope and its standard error.
pub fn fit_slope(traj: &MomentTrajectory, window: (usize, usize)) -> Result<(f64, f64)> {
    let (start, end) = window;
    assert!(start < end && end <= traj.energies.len(), "invalid window");
    let mut ys = Vec::with_capacity(end - start);
    for k in start..end {
        let e = traj.energies[k];
        if e <= 0.0 {
            return Err(Error::NonPositiveEnergy { step: k, energy: e });
        }
        ys.push(e.ln());
    }
    let m = ys.len() as f64;
    let xbar = (start..end).map(|k| k as f64).sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (k, y) in (start..end).zip(&ys) {
        let dx = k as f64 - xbar;
        sxx += dx * dx;
        sxy += dx * (y - ybar);
    }
    let slope = sxy / sxx;
    let mut ss_res = 0.0;
    for (k, y) in (start..end).zip(&ys) {
        let fit = ybar + slope * (k as f64 - xbar);
        ss_res += (y - fit) * (y - fit);
    }
    let stderr = if ys.len() > 2 {
        (ss_res / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, stderr))
}
