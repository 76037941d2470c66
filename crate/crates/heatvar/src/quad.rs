//! Gaussian quadrature rules (Golub-Welsch) and adaptive Simpson
//! integration used by the kernel functions and the covariance oracle.

use crate::error::{Error, Result};
use statrs::function::gamma::gamma;

/// Nodes and weights of a Gaussian quadrature rule, sorted by node.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Golub-Welsch: eigendecompose the symmetric tridiagonal Jacobi matrix of
/// the orthogonal-polynomial recurrence. `mu0` is the total mass of the
/// weight function; weights are `mu0 * v0^2` with `v0` the first component
/// of each normalized eigenvector.
fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> GaussRule {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = offdiag.to_vec();
    e.push(0.0);
    // first row of the accumulated eigenvector matrix; only this row is
    // needed for the weights
    let mut z = vec![0.0f64; n];
    z[0] = 1.0;
    // implicit-shift QL for a symmetric tridiagonal matrix
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 60, "QL iteration failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|i| (d[i], mu0 * z[i] * z[i])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> GaussRule {
    let diag = vec![0.0; n];
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            (k * k / ((2.0 * k - 1.0) * (2.0 * k + 1.0))).sqrt()
        })
        .collect();
    golub_welsch(&diag, &offdiag, 2.0)
}

/// Generalized Gauss-Laguerre rule for the weight `t^alpha e^{-t}` on
/// [0, inf).
pub fn gauss_laguerre(n: usize, alpha: f64) -> GaussRule {
    let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + alpha + 1.0).collect();
    let offdiag: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            (k * (k + alpha)).sqrt()
        })
        .collect();
    golub_welsch(&diag, &offdiag, gamma(alpha + 1.0))
}

/// Integrate `f` over `[a, b]` with a Gauss-Legendre rule mapped to the
/// interval.
pub fn integrate_interval<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rule: &GaussRule) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        sum += w * f(mid + half * x);
    }
    half * sum
}

/// Integrate `f` over consecutive panels given by sorted breakpoints.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], rule: &GaussRule) -> f64 {
    breaks
        .windows(2)
        .map(|w| integrate_interval(f, w[0], w[1], rule))
        .sum()
}

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature with absolute tolerance `tol`. The
/// per-subinterval tolerance is halved on each split so subinterval errors
/// sum to `tol`, but never below a floor at machine precision relative to
/// the integral's magnitude: below that floor the Richardson error
/// estimate is round-off, not discretization error.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let floor = f64::EPSILON * whole.abs().max(f64::MIN_POSITIVE);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, floor, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    floor: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    let tol_eff = tol.max(floor);
    if err.abs() <= 15.0 * tol_eff {
        return Ok(left + right + err / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature {
            achieved: err.abs() / 15.0,
            requested: tol_eff,
        });
    }
    let l = simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, floor, depth - 1)?;
    let r = simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, floor, depth - 1)?;
    Ok(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(8);
        // degree 15 is exact for an 8-point rule
        let f = |x: f64| x.powi(14) + 3.0 * x.powi(7) - x;
        let got = integrate_interval(&f, -1.0, 1.0, &rule);
        assert!((got - 2.0 / 15.0).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn laguerre_moments() {
        // int t^k e^{-t} dt = k!
        let rule = gauss_laguerre(32, 0.0);
        let got: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| w * t.powi(5))
            .sum();
        assert!((got - 120.0).abs() < 1e-10, "got {got}");
    }

    #[test]
    fn laguerre_half_integer_alpha() {
        // int t^{1/2} e^{-t} dt = Gamma(3/2) = sqrt(pi)/2
        let rule = gauss_laguerre(16, 0.5);
        let got: f64 = rule.weights.iter().sum();
        assert!((got - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn simpson_smooth() {
        let got = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((got - 2.0).abs() < 1e-10);
    }

    #[test]
    fn simpson_endpoint_sqrt() {
        let got = adaptive_simpson(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-9, "got {got}");
    }
}
