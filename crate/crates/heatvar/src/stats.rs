//! Power variations, CLT standardization, parameter estimators and
//! delta-method confidence intervals.

use crate::asymptotics;
use crate::cov::ModelParams;
use crate::error::{Error, Result};
use crate::kernel::{mu_p, Power};
use crate::sampler::IncrementField;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;

/// Power variations of one field: per-point values and their spatial
/// average.
#[derive(Debug, Clone, Serialize)]
pub struct PVResult {
    pub per_point: Vec<f64>,
    pub averaged: f64,
    pub p: Power,
    pub n: usize,
    pub m: usize,
    pub delta_n: f64,
}

/// What is assumed known when inverting the population mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Known {
    /// Diffusivity known; estimate sigma.
    Theta(f64),
    /// Volatility known; estimate theta.
    Sigma(f64),
    /// Nothing known; estimate the composite `sigma^2 sqrt(2/theta)`.
    Neither,
}

/// Estimation target reported in results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Sigma,
    Theta,
    ViscosityAdjusted,
}

/// Point estimate with delta-method standard error and confidence
/// interval.
#[derive(Debug, Clone, Serialize)]
pub struct EstimationResult {
    pub target: Target,
    pub point: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub n: usize,
    pub m: usize,
    pub delta_n: f64,
    pub p: Power,
}

/// `V_n^p(x) = (1/n) sum_i |Delta_i X(x) / delta_n^{1/4}|^p`.
pub fn power_variation(column: &[f64], p: Power, delta_n: f64) -> Result<f64> {
    if column.is_empty() {
        return Err(Error::Invalid("power variation of an empty column".into()));
    }
    if !(delta_n > 0.0) {
        return Err(Error::Domain(format!(
            "delta_n must be positive, got {delta_n}"
        )));
    }
    let norm = delta_n.powf(0.25);
    let pf = p.as_f64();
    let sum: f64 = column.iter().map(|&dx| (dx / norm).abs().powf(pf)).sum();
    Ok(sum / column.len() as f64)
}

/// Per-point power variations and their spatial average.
pub fn averaged_pv(field: &IncrementField, p: Power) -> Result<PVResult> {
    let grid = field.grid();
    let per_point: Vec<f64> = (0..grid.m())
        .map(|k| power_variation(&field.column(k), p, grid.delta_n()))
        .collect::<Result<_>>()?;
    let averaged = per_point.iter().sum::<f64>() / per_point.len() as f64;
    Ok(PVResult {
        per_point,
        averaged,
        p,
        n: grid.n(),
        m: grid.m(),
        delta_n: grid.delta_n(),
    })
}

/// Population mean of the power variation:
/// `(2/(pi theta))^{p/4} sigma^p mu_p`.
pub fn population_mean(p: Power, params: &ModelParams) -> f64 {
    (2.0 / (PI * params.theta)).powf(0.25 * p.as_f64()) * params.sigma.powf(p.as_f64()) * mu_p(p)
}

/// CLT statistic `sqrt(mn) (Vbar - population mean)` at the true
/// parameters.
pub fn clt_statistic(pv: &PVResult, params: &ModelParams) -> f64 {
    ((pv.m * pv.n) as f64).sqrt() * (pv.averaged - population_mean(pv.p, params))
}

fn z_quantile(level: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    std.inverse_cdf(1.0 - 0.5 * (1.0 - level))
}

/// Invert the population mean for the requested target and attach a
/// plug-in delta-method confidence interval at confidence `level`.
pub fn estimate(pv: &PVResult, known: Known, level: f64) -> Result<EstimationResult> {
    if !(pv.averaged > 0.0) {
        return Err(Error::Domain(format!(
            "power variation must be positive to invert, got {}",
            pv.averaged
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let p = pv.p;
    let pf = p.as_f64();
    let vbar = pv.averaged;
    let mu = mu_p(p);
    let mn = (pv.m * pv.n) as f64;
    let lambda = asymptotics::lambda_default(p);

    // point estimate, |d(point)/d(vbar)|, and plug-in parameters for v2
    let (target, point, dpoint, plug): (Target, f64, f64, ModelParams) = match known {
        Known::Theta(theta0) => {
            if !(theta0 > 0.0) {
                return Err(Error::Domain(format!(
                    "known theta must be positive, got {theta0}"
                )));
            }
            let sigma_hat = (vbar / mu).powf(1.0 / pf) * (PI * theta0 / 2.0).powf(0.25);
            let d = sigma_hat / (pf * vbar);
            (
                Target::Sigma,
                sigma_hat,
                d,
                ModelParams::new(theta0, sigma_hat)?,
            )
        }
        Known::Sigma(sigma0) => {
            if !(sigma0 > 0.0) {
                return Err(Error::Domain(format!(
                    "known sigma must be positive, got {sigma0}"
                )));
            }
            let theta_hat = 2.0 / PI * (sigma0.powf(pf) * mu / vbar).powf(4.0 / pf);
            let d = 4.0 * theta_hat / (pf * vbar);
            (
                Target::Theta,
                theta_hat,
                d,
                ModelParams::new(theta_hat, sigma0)?,
            )
        }
        Known::Neither => {
            // sigma^2 sqrt(2/theta) = sqrt(pi) (Vbar / mu_p)^{2/p}
            let nu_hat = PI.sqrt() * (vbar / mu).powf(2.0 / pf);
            let d = 2.0 * nu_hat / (pf * vbar);
            // v2 depends on the composite only:
            // (2/(pi theta))^{p/2} sigma^{2p} = nu^p pi^{-p/2};
            // represent it with sigma = sqrt(nu), theta = 2.
            let sigma_repr = nu_hat.sqrt();
            (
                Target::ViscosityAdjusted,
                nu_hat,
                d,
                ModelParams::new(2.0, sigma_repr)?,
            )
        }
    };

    let v2 = asymptotics::v2_from_lambda(p, &plug, lambda);
    let stderr = dpoint * (v2 / mn).sqrt();
    let z = z_quantile(level);
    Ok(EstimationResult {
        target,
        point,
        stderr,
        ci_low: point - z * stderr,
        ci_high: point + z * stderr,
        level,
        n: pv.n,
        m: pv.m,
        delta_n: pv.delta_n,
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cov::GridSpec;
    use crate::sampler::IncrementField;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn pw(p: u32) -> Power {
        Power::new(p).unwrap()
    }

    fn pv_from_mean(vbar: f64, p: Power, n: usize, m: usize) -> PVResult {
        PVResult {
            per_point: vec![vbar; m],
            averaged: vbar,
            p,
            n,
            m,
            delta_n: 0.01,
        }
    }

    #[test]
    fn power_variation_examples() {
        let col = vec![0.7; 10];
        let v = power_variation(&col, pw(3), 1.0).unwrap();
        assert!((v - 0.7f64.powi(3)).abs() < 1e-15);
        let v1 = power_variation(&[2.0], pw(2), 1.0).unwrap();
        assert!((v1 - 4.0).abs() < 1e-15);
        assert!(power_variation(&[], pw(2), 1.0).is_err());
        assert!(power_variation(&[1.0], pw(2), 0.0).is_err());
    }

    #[test]
    fn averaged_pv_properties() {
        let grid = GridSpec::uniform(4, 1.0, 3, 1.0).unwrap();
        let params = ModelParams::new(1.0, 1.0).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        let vals: Vec<f64> = (0..grid.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = IncrementField::new(vals.clone(), grid.clone(), params).unwrap();
        let pv = averaged_pv(&f, pw(2)).unwrap();
        let mean = pv.per_point.iter().sum::<f64>() / 3.0;
        assert!((pv.averaged - mean).abs() < 1e-15);
        // m = 1 averaged equals the single value
        let g1 = GridSpec::new(4, 1.0, vec![0.0]).unwrap();
        let f1 = IncrementField::new(vals[..4].to_vec(), g1, params).unwrap();
        let pv1 = averaged_pv(&f1, pw(2)).unwrap();
        assert_eq!(pv1.averaged, pv1.per_point[0]);
        // homogeneity: scaling the field by c scales values by |c|^p
        let f2 =
            IncrementField::new(vals.iter().map(|v| -2.0 * v).collect(), grid, params).unwrap();
        let pv2 = averaged_pv(&f2, pw(2)).unwrap();
        assert!((pv2.averaged - 4.0 * pv.averaged).abs() < 1e-12);
    }

    #[test]
    fn clt_statistic_examples() {
        let params = ModelParams::new(1.0, 1.0).unwrap();
        let pop = population_mean(pw(2), &params);
        let pv = pv_from_mean(pop, pw(2), 16, 4);
        assert_eq!(clt_statistic(&pv, &params), 0.0);
        let pv1 = pv_from_mean(pop + 0.1, pw(2), 16, 4);
        let pv2 = pv_from_mean(pop + 0.1, pw(2), 32, 8);
        let s1 = clt_statistic(&pv1, &params);
        let s2 = clt_statistic(&pv2, &params);
        assert!((s2 / s1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_inverts_population_mean_exactly() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..20 {
            let theta = rng.gen_range(0.2..4.0);
            let sigma = rng.gen_range(0.3..3.0);
            let params = ModelParams::new(theta, sigma).unwrap();
            for p in 1..=3u32 {
                let pop = population_mean(pw(p), &params);
                let pv = pv_from_mean(pop, pw(p), 64, 4);
                let est_sigma = estimate(&pv, Known::Theta(theta), 0.95).unwrap();
                assert!(
                    (est_sigma.point - sigma).abs() <= 1e-12 * sigma,
                    "sigma roundtrip p={p}"
                );
                let est_theta = estimate(&pv, Known::Sigma(sigma), 0.95).unwrap();
                assert!(
                    (est_theta.point - theta).abs() <= 1e-12 * theta,
                    "theta roundtrip p={p}"
                );
                let est_nu = estimate(&pv, Known::Neither, 0.95).unwrap();
                let nu = sigma * sigma * (2.0 / theta).sqrt();
                assert!(
                    (est_nu.point - nu).abs() <= 1e-12 * nu,
                    "viscosity roundtrip p={p}"
                );
            }
        }
    }

    #[test]
    fn estimate_reports_sane_intervals() {
        let params = ModelParams::new(1.0, 1.0).unwrap();
        let pop = population_mean(pw(2), &params);
        let pv = pv_from_mean(pop, pw(2), 256, 8);
        let est = estimate(&pv, Known::Sigma(1.0), 0.95).unwrap();
        assert!(est.stderr > 0.0);
        assert!(est.ci_low <= est.point && est.point <= est.ci_high);
        assert_eq!(est.target, Target::Theta);
        // viscosity plug-in variance matches the (theta, sigma) one
        let est_nu = estimate(&pv, Known::Neither, 0.95).unwrap();
        let lambda = asymptotics::lambda_default(pw(2));
        let v2_true = asymptotics::v2_from_lambda(pw(2), &params, lambda);
        let mn = (256.0 * 8.0f64).sqrt();
        let expect_se = 2.0 * est_nu.point / (2.0 * pop) * v2_true.sqrt() / mn;
        assert!((est_nu.stderr - expect_se).abs() < 1e-12 * expect_se);
    }

    #[test]
    fn estimate_rejects_bad_inputs() {
        let pv = pv_from_mean(0.0, pw(2), 16, 2);
        assert!(estimate(&pv, Known::Theta(1.0), 0.95).is_err());
        let ok = pv_from_mean(1.0, pw(2), 16, 2);
        assert!(estimate(&ok, Known::Theta(-1.0), 0.95).is_err());
        assert!(estimate(&ok, Known::Sigma(0.0), 0.95).is_err());
        assert!(estimate(&ok, Known::Theta(1.0), 1.5).is_err());
    }
}
