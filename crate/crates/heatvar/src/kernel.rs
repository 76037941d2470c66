//! Scalar building blocks: heat kernel, second-order increments, the
//! `g_kappa`/`h_kappa` pair from the closed-form increment covariance,
//! absolute moments of the standard normal, Hermite coefficients of
//! `|x|^p`, and the bivariate absolute-power covariance `rho_p`.

use crate::error::{Error, Result};
use crate::quad::{self, GaussRule};
use once_cell::sync::Lazy;
use libm::erfc;
use statrs::function::gamma::{gamma, ln_gamma};
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Mutex;

/// Integer exponent of a power variation, `p >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Power(u32);

impl Power {
    pub fn new(p: u32) -> Result<Self> {
        if p < 1 {
            return Err(Error::Domain("power exponent must satisfy p >= 1".into()));
        }
        Ok(Power(p))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }
}

/// Scaled spatial distance `kappa = |x - y| / sqrt(delta_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa(f64);

impl Kappa {
    pub fn new(value: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::Domain(format!(
                "kappa must be non-negative, got {value}"
            )));
        }
        Ok(Kappa(value))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Heat kernel `G(t, x) = exp(-x^2 / (2 theta t)) / sqrt(2 pi theta t)`,
/// the fundamental solution of the heat equation with diffusivity theta.
pub fn heat_kernel(t: f64, x: f64, theta: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if !(theta > 0.0) {
        return Err(Error::Domain(format!(
            "theta must be positive, got {theta}"
        )));
    }
    Ok(heat_kernel_raw(t, x, theta))
}

#[inline]
pub(crate) fn heat_kernel_raw(t: f64, x: f64, theta: f64) -> f64 {
    (-x * x / (2.0 * theta * t)).exp() / (2.0 * PI * theta * t).sqrt()
}

/// Second-order increment `D2(f, s) = f(s) - 2 f(s-1) + f(s-2)`, `s >= 2`.
pub fn d2<F: Fn(f64) -> f64>(f: F, s: f64) -> Result<f64> {
    if !(s >= 2.0) {
        return Err(Error::Domain(format!("d2 requires s >= 2, got {s}")));
    }
    Ok(f(s) - 2.0 * f(s - 1.0) + f(s - 2.0))
}

/// `D2(sqrt, s)` without domain checks; caller guarantees `s >= 2`.
#[inline]
pub(crate) fn d2_sqrt(s: f64) -> f64 {
    s.sqrt() - 2.0 * (s - 1.0).sqrt() + (s - 2.0).sqrt()
}

/// `g_kappa(s) = sqrt(s) exp(-kappa^2 / (2 theta s))`, with `g_kappa(0) = 0`.
pub fn g_kappa(kappa: Kappa, s: f64, theta: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("g_kappa requires s >= 0, got {s}")));
    }
    Ok(g_raw(kappa.get(), s, theta))
}

#[inline]
pub(crate) fn g_raw(kappa: f64, s: f64, theta: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        s.sqrt() * (-kappa * kappa / (2.0 * theta * s)).exp()
    }
}

/// Gaussian upper-tail probability `h_kappa(s) = P(Z >= kappa / sqrt(theta s))`
/// with `h_kappa(0) = 0`. Evaluated through erfc so large arguments do not
/// cancel.
pub fn h_kappa(kappa: Kappa, s: f64, theta: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("h_kappa requires s >= 0, got {s}")));
    }
    Ok(h_raw(kappa.get(), s, theta))
}

#[inline]
pub(crate) fn h_raw(kappa: f64, s: f64, theta: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        0.5 * erfc(kappa / (2.0 * theta * s).sqrt())
    }
}

/// `mu_p = E|Z|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)` for `Z ~ N(0,1)`.
pub fn mu_p(p: Power) -> f64 {
    mu_abs(p.as_f64())
}

#[inline]
pub(crate) fn mu_abs(p: f64) -> f64 {
    2f64.powf(0.5 * p) * gamma(0.5 * (p + 1.0)) / PI.sqrt()
}

const HERMITE_QUAD_NODES: usize = 200;

static LAGUERRE_RULES: Lazy<Mutex<HashMap<u32, GaussRule>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn with_laguerre_rule<T>(p: Power, f: impl FnOnce(&GaussRule) -> T) -> T {
    let mut map = LAGUERRE_RULES.lock().unwrap();
    let rule = map
        .entry(p.get())
        .or_insert_with(|| quad::gauss_laguerre(HERMITE_QUAD_NODES, 0.5 * (p.as_f64() - 1.0)));
    f(rule)
}

/// Orthonormal probabilists' Hermite function `He_q(x) / sqrt(q!)` by the
/// three-term recurrence.
fn hermite_orthonormal(q: u32, x: f64) -> f64 {
    let mut prev = 1.0; // q = 0
    if q == 0 {
        return prev;
    }
    let mut cur = x; // q = 1
    for k in 1..q {
        let k = k as f64;
        let next = (x * cur - k.sqrt() * prev) / (k + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Coefficient `c_q = E[|Z|^p He_q(Z)] / sqrt(q!)` in the orthonormal
/// Hermite basis. Zero for odd `q`; `c_0 = mu_p`.
///
/// `|x|^p` is even, so `c_q` reduces to a half-line integral; the
/// substitution `t = x^2/2` turns it into a generalized Gauss-Laguerre
/// quadrature with weight `t^{(p-1)/2} e^{-t}`, which is exact in the
/// polynomial factor and therefore free of the kink error a plain
/// Gauss-Hermite rule would incur at `x = 0`.
fn hermite_c(p: Power, q: u32) -> f64 {
    if q % 2 == 1 {
        return 0.0;
    }
    if q == 0 {
        return mu_p(p);
    }
    with_laguerre_rule(p, |rule| {
        let sum: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| w * hermite_orthonormal(q, (2.0 * t).sqrt()))
            .sum();
        2f64.powf(0.5 * p.as_f64()) / PI.sqrt() * sum
    })
}

/// Hermite coefficient `a_q` of `|x|^p - mu_p = sum_{q>=2} a_q He_q(x)`,
/// i.e. `a_q = E[|Z|^p He_q(Z)] / q!`.
pub fn hermite_coeff(p: Power, q: u32) -> f64 {
    if q == 0 {
        return mu_p(p);
    }
    if q % 2 == 1 {
        return 0.0;
    }
    hermite_c(p, q) * (-0.5 * ln_gamma(f64::from(q) + 1.0)).exp()
}

/// Squared orthonormal coefficients `c_q^2 = q! a_q^2` for `q = 0..=q_max`.
pub(crate) fn hermite_sq_coeffs(p: Power, q_max: u32) -> Vec<f64> {
    (0..=q_max)
        .map(|q| {
            let c = hermite_c(p, q);
            c * c
        })
        .collect()
}

/// Evaluation route for [`rho_p`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoMethod {
    /// Hermite series truncated at `q = 40` with a geometric tail bound.
    Series,
    /// Direct numerical integration of the bivariate absolute moment.
    Quadrature,
}

/// Default truncation order of the Hermite series route.
pub const RHO_SERIES_QMAX: u32 = 40;

/// `rho_p(a) = Cov(|Z1|^p, |Z2|^p)` for standard bivariate normal
/// `(Z1, Z2)` with correlation `a`.
pub fn rho_p(p: Power, a: f64, method: RhoMethod) -> Result<f64> {
    if !(a.abs() <= 1.0) {
        return Err(Error::Domain(format!(
            "correlation must satisfy |a| <= 1, got {a}"
        )));
    }
    Ok(match method {
        RhoMethod::Series => rho_series(p, a, RHO_SERIES_QMAX),
        RhoMethod::Quadrature => rho_quadrature(p, a),
    })
}

pub(crate) fn rho_series(p: Power, a: f64, q_max: u32) -> f64 {
    let c2 = cached_sq_coeffs(p);
    let mut sum = 0.0;
    let mut q = 2u32;
    while q <= q_max {
        sum += c2[q as usize] * a.powi(q as i32);
        q += 2;
    }
    sum
}

static SQ_COEFF_CACHE: Lazy<Mutex<HashMap<u32, Vec<f64>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn cached_sq_coeffs(p: Power) -> Vec<f64> {
    let mut map = SQ_COEFF_CACHE.lock().unwrap();
    map.entry(p.get())
        .or_insert_with(|| hermite_sq_coeffs(p, RHO_SERIES_QMAX))
        .clone()
}

/// Geometric bound on the truncated tail of the series route:
/// `sum_{q>q_max} q! a_q^2 |a|^q <= (mu_{2p} - mu_p^2) |a|^{q_max+1} / (1-|a|)`.
pub fn rho_series_tail_bound(p: Power, a: f64, q_max: u32) -> f64 {
    let total = mu_abs(2.0 * p.as_f64()) - mu_p(p).powi(2);
    let aa = a.abs();
    if aa >= 1.0 {
        return f64::INFINITY;
    }
    total * aa.powi(q_max as i32 + 1) / (1.0 - aa)
}

static PANEL_RULE: Lazy<GaussRule> = Lazy::new(|| quad::gauss_legendre(80));

/// Quadrature route: reduce the bivariate integral to one angular
/// dimension in polar coordinates,
/// `E|Z1|^p |Z2|^p = 2^p Gamma(p+1) / (2 pi) * int_0^{2pi} |cos|^p |a cos + b sin|^p`,
/// and integrate each smooth panel between kink angles with Gauss-Legendre.
fn rho_quadrature(p: Power, a: f64) -> f64 {
    let b = (1.0 - a * a).max(0.0).sqrt();
    let pf = p.as_f64();
    let mut breaks = vec![0.0, FRAC_PI_2, 1.5 * PI, 2.0 * PI];
    if b > 0.0 {
        let mut phi0 = (-a).atan2(b);
        if phi0 < 0.0 {
            phi0 += PI;
        }
        breaks.push(phi0);
        breaks.push(phi0 + PI);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let f = |phi: f64| {
        let (s, c) = phi.sin_cos();
        c.abs().powf(pf) * (a * c + b * s).abs().powf(pf)
    };
    let angular = quad::integrate_panels(&f, &breaks, &PANEL_RULE);
    let e_joint = 2f64.powf(pf) * gamma(pf + 1.0) / (2.0 * PI) * angular;
    e_joint - mu_p(p).powi(2)
}
