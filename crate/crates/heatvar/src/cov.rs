//! Closed-form covariances of space-time increments, assembly of the full
//! grid covariance matrix, and an independent quadrature oracle.
//!
//! All entries carry both the stationary `|i-j|` terms and the
//! non-stationary `i+j` terms; no Toeplitz approximation is made, so the
//! downstream sampler is exact.

use crate::error::{Error, Result};
use crate::kernel::{g_raw, h_raw, heat_kernel_raw};
use crate::quad;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Default cap on the flattened dimension `n * m`; factorization is cubic.
pub const DEFAULT_NM_CAP: usize = 8192;

/// The space-time observation grid: `n` equidistant times with step
/// `delta_n` and strictly increasing spatial points `xs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    delta_n: f64,
    xs: Vec<f64>,
}

impl GridSpec {
    pub fn new(n: usize, delta_n: f64, xs: Vec<f64>) -> Result<Self> {
        if n < 1 {
            return Err(Error::Invalid("grid needs at least one time step".into()));
        }
        if !(delta_n > 0.0) || !delta_n.is_finite() {
            return Err(Error::Invalid(format!(
                "delta_n must be positive and finite, got {delta_n}"
            )));
        }
        if xs.is_empty() {
            return Err(Error::Invalid("grid needs at least one spatial point".into()));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("spatial points must be finite".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid(
                "spatial points must be strictly increasing".into(),
            ));
        }
        Ok(GridSpec { n, delta_n, xs })
    }

    /// Uniform spatial spacing helper: `m` points `0, dx, ..., (m-1) dx`.
    pub fn uniform(n: usize, delta_n: f64, m: usize, dx: f64) -> Result<Self> {
        if m >= 2 && !(dx > 0.0) {
            return Err(Error::Invalid(format!(
                "uniform spacing must be positive, got {dx}"
            )));
        }
        let xs = (0..m).map(|k| k as f64 * dx).collect();
        GridSpec::new(n, delta_n, xs)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.xs.len()
    }

    #[inline]
    pub fn delta_n(&self) -> f64 {
        self.delta_n
    }

    #[inline]
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// Minimum spatial spacing `delta_m`; infinite for a single point.
    pub fn min_spacing(&self) -> f64 {
        self.xs
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// The de-correlation ratio `delta_n / delta_m^2`; zero for `m = 1`.
    pub fn decorrelation_ratio(&self) -> f64 {
        let dm = self.min_spacing();
        if dm.is_infinite() {
            0.0
        } else {
            self.delta_n / (dm * dm)
        }
    }

    /// Flattened dimension `n * m`, row-major time-major.
    #[inline]
    pub fn dim(&self) -> usize {
        self.n * self.m()
    }
}

/// Model parameters of the stochastic heat equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: f64,
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(theta: f64, sigma: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::Invalid(format!(
                "theta must be positive and finite, got {theta}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Invalid(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(ModelParams { theta, sigma })
    }
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i < 1 || i > n {
        return Err(Error::Index(format!(
            "time index {i} not in 1..={n}"
        )));
    }
    Ok(())
}

fn check_dx(dx: f64) -> Result<()> {
    if !(dx >= 0.0) || !dx.is_finite() {
        return Err(Error::Domain(format!(
            "spatial distance must be non-negative, got {dx}"
        )));
    }
    Ok(())
}

#[inline]
fn d2_at(f: impl Fn(f64) -> f64, s: f64) -> f64 {
    f(s) - 2.0 * f(s - 1.0) + f(s - 2.0)
}

/// Exact covariance `Cov(Delta_i X(x), Delta_j X(y))` with
/// `dx = |x - y|`, assembled from the `g_kappa`/`h_kappa` closed form.
pub fn increment_cov(
    i: usize,
    j: usize,
    dx: f64,
    grid: &GridSpec,
    params: &ModelParams,
) -> Result<f64> {
    check_index(i, grid.n)?;
    check_index(j, grid.n)?;
    check_dx(dx)?;
    Ok(increment_cov_unchecked(i, j, dx, grid.delta_n, params))
}

pub(crate) fn increment_cov_unchecked(
    i: usize,
    j: usize,
    dx: f64,
    delta_n: f64,
    params: &ModelParams,
) -> f64 {
    let theta = params.theta;
    let kappa = dx / delta_n.sqrt();
    let gk = |s: f64| g_raw(kappa, s, theta);
    let hk = |s: f64| h_raw(kappa, s, theta);
    let scale = params.sigma * params.sigma * delta_n.sqrt();
    let sum = (i + j) as f64;
    let lag = i.abs_diff(j) as f64 + 1.0;
    let (gterm, hterm) = if i == j {
        (gk(1.0) + 0.5 * d2_at(gk, sum), 2.0 * hk(1.0) + d2_at(hk, sum))
    } else {
        (
            0.5 * d2_at(gk, lag) + 0.5 * d2_at(gk, sum),
            d2_at(hk, lag) + d2_at(hk, sum),
        )
    };
    scale * ((2.0 / (PI * theta)).sqrt() * gterm - kappa / theta * hterm)
}

fn check_history_args(i: usize, j: usize, b: usize, grid: &GridSpec) -> Result<()> {
    check_index(i, grid.n)?;
    check_index(j, grid.n)?;
    if j > i {
        return Err(Error::Index(format!(
            "history decomposition requires j <= i, got i={i}, j={j}"
        )));
    }
    if b > j - 1 {
        return Err(Error::Index(format!(
            "history cutoff must satisfy b <= j-1, got b={b}, j={j}"
        )));
    }
    Ok(())
}

/// Covariance of the pre-`t_b` (history) components of two increments.
/// Zero for `b = 0`.
pub fn history_cov(
    i: usize,
    j: usize,
    b: usize,
    dx: f64,
    grid: &GridSpec,
    params: &ModelParams,
) -> Result<f64> {
    check_history_args(i, j, b, grid)?;
    check_dx(dx)?;
    if b == 0 {
        return Ok(0.0);
    }
    let theta = params.theta;
    let kappa = dx / grid.delta_n.sqrt();
    let gk = |s: f64| g_raw(kappa, s, theta);
    let hk = |s: f64| h_raw(kappa, s, theta);
    let scale = params.sigma * params.sigma * grid.delta_n.sqrt();
    let sum = (i + j) as f64;
    let cut = (i + j - 2 * b) as f64;
    Ok(scale
        * (0.5 * (2.0 / (PI * theta)).sqrt() * (d2_at(gk, sum) - d2_at(gk, cut))
            - kappa / theta * (d2_at(hk, sum) - d2_at(hk, cut))))
}

/// Covariance of the post-`t_b` (innovation) components of two increments.
pub fn innovation_cov(
    i: usize,
    j: usize,
    b: usize,
    dx: f64,
    grid: &GridSpec,
    params: &ModelParams,
) -> Result<f64> {
    check_history_args(i, j, b, grid)?;
    check_dx(dx)?;
    let theta = params.theta;
    let kappa = dx / grid.delta_n.sqrt();
    let gk = |s: f64| g_raw(kappa, s, theta);
    let hk = |s: f64| h_raw(kappa, s, theta);
    let scale = params.sigma * params.sigma * grid.delta_n.sqrt();
    let cut = (i + j - 2 * b) as f64;
    let lag = i.abs_diff(j) as f64 + 1.0;
    let (gterm, hterm) = if i == j {
        (d2_at(gk, cut) + 2.0 * gk(1.0), d2_at(hk, cut) + 2.0 * hk(1.0))
    } else {
        (d2_at(gk, cut) + d2_at(gk, lag), d2_at(hk, cut) + d2_at(hk, lag))
    };
    Ok(scale * (0.5 * (2.0 / (PI * theta)).sqrt() * gterm - kappa / theta * hterm))
}

/// Symmetric covariance matrix over flattened (time, space) index pairs,
/// row-major time-major: flat index `(i-1) * m + k`.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    dim: usize,
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl CovMatrix {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|r| self.get(r, r)).sum()
    }

    /// Build a matrix from a dense row-major square buffer; checks shape
    /// and symmetry.
    pub fn from_dense(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        let dim = n * m;
        if data.len() != dim * dim {
            return Err(Error::Invalid(format!(
                "expected {} entries for dimension {dim}, got {}",
                dim * dim,
                data.len()
            )));
        }
        let mat = CovMatrix { dim, n, m, data };
        for r in 0..dim {
            for c in 0..r {
                let a = mat.get(r, c);
                let b = mat.get(c, r);
                let tol = 1e-12 * (a.abs() + b.abs()).max(1e-300);
                if (a - b).abs() > tol {
                    return Err(Error::Invalid(format!(
                        "matrix is not symmetric at ({r}, {c}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(mat)
    }

    /// Dump the full symmetric matrix as row-major CSV, shortest
    /// round-trip decimals.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        for r in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|c| format!("{}", self.get(r, c))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Assemble the full `nm x nm` increment covariance matrix under the
/// default size cap.
pub fn build_cov_matrix(grid: &GridSpec, params: &ModelParams) -> Result<CovMatrix> {
    build_cov_matrix_capped(grid, params, DEFAULT_NM_CAP)
}

/// Assemble with an explicit size cap.
pub fn build_cov_matrix_capped(
    grid: &GridSpec,
    params: &ModelParams,
    cap: usize,
) -> Result<CovMatrix> {
    let dim = grid.dim();
    if dim > cap {
        return Err(Error::SizeCap { dim, cap });
    }
    let m = grid.m();
    let n = grid.n;
    let delta_n = grid.delta_n;
    let xs = grid.xs.clone();
    let mut data = vec![0.0f64; dim * dim];
    // Entries depend on (i, j, |x_k - x_l|) only and the formula is
    // symmetric in (i, j), so independent full-row computation yields a
    // bitwise symmetric matrix.
    data.par_chunks_mut(dim).enumerate().for_each(|(r, row)| {
        let i = r / m + 1;
        let k = r % m;
        for (c, slot) in row.iter_mut().enumerate() {
            let j = c / m + 1;
            let l = c % m;
            let dx = (xs[k] - xs[l]).abs();
            *slot = increment_cov_unchecked(i, j, dx, delta_n, params);
        }
    });
    Ok(CovMatrix { dim, n, m, data })
}

const ORACLE_TOL: f64 = 1e-12;

/// Independent brute-force oracle for [`increment_cov`]: the spatial
/// integral is removed analytically via the heat-kernel convolution
/// identity and the remaining time integral is done by adaptive
/// quadrature. Near a vanishing time argument the substitution
/// `s = T - v^2` removes the inverse-square-root endpoint singularity.
pub fn cov_oracle(
    i: usize,
    j: usize,
    dx: f64,
    grid: &GridSpec,
    params: &ModelParams,
) -> Result<f64> {
    check_index(i, grid.n)?;
    check_index(j, grid.n)?;
    check_dx(dx)?;
    let dn = grid.delta_n;
    let theta = params.theta;
    let mut total = 0.0;
    let terms = [
        (1.0, i, j),
        (-1.0, i - 1, j),
        (-1.0, i, j - 1),
        (1.0, i - 1, j - 1),
    ];
    for (sign, a, b) in terms {
        let ta = a as f64 * dn;
        let tb = b as f64 * dn;
        let t_end = ta.min(tb);
        if t_end <= 0.0 {
            continue;
        }
        let val = if a == b {
            // 2 v G(2 v^2, dx) = exp(-dx^2 / (4 theta v^2)) / sqrt(pi theta),
            // extended by continuity at v = 0
            let f = |v: f64| {
                if v == 0.0 {
                    if dx == 0.0 {
                        1.0 / (PI * theta).sqrt()
                    } else {
                        0.0
                    }
                } else {
                    (-dx * dx / (4.0 * theta * v * v)).exp() / (PI * theta).sqrt()
                }
            };
            quad::adaptive_simpson(&f, 0.0, t_end.sqrt(), ORACLE_TOL)?
        } else {
            let f = |s: f64| heat_kernel_raw(ta + tb - 2.0 * s, dx, theta);
            quad::adaptive_simpson(&f, 0.0, t_end, ORACLE_TOL)?
        };
        total += sign * val;
    }
    Ok(params.sigma * params.sigma * total)
}
