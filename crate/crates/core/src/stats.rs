//! Sample statistics and Welch's unequal-variance t-test.
//!
//! The two-sided p-value comes from the Student-t CDF evaluated through the
//! regularized incomplete beta function (Lentz continued fraction).

use crate::error::{Error, Result};
use serde::Serialize;

/// Mean and sample standard deviation (ddof = 1; zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, var.sqrt())
}

/// Welch t statistic, Welch-Satterthwaite degrees of freedom and two-sided p.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Set when both samples have zero variance but different means; `p` is
    /// then pinned to 0.
    pub degenerate: bool,
}

/// Two-sample Welch t-test (unequal variances, two-sided).
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    let (na, nb) = (a.len(), b.len());
    if na < 2 || nb < 2 {
        return Err(Error::Eval(format!(
            "welch_t_test needs at least 2 samples per side, got {na} and {nb}"
        )));
    }
    let (ma, _) = mean_std(a);
    let (mb, _) = mean_std(b);
    let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / (na as f64 - 1.0);
    let vb = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / (nb as f64 - 1.0);
    let (qa, qb) = (va / na as f64, vb / nb as f64);
    let se2 = qa + qb;
    if se2 == 0.0 {
        // no variance anywhere: identical means give t=0/p=1, different means
        // are infinitely significant
        let df = (na + nb - 2) as f64;
        return Ok(if ma == mb {
            TTestResult {
                t: 0.0,
                df,
                p: 1.0,
                degenerate: false,
            }
        } else {
            TTestResult {
                t: (ma - mb).signum() * f64::INFINITY,
                df,
                p: 0.0,
                degenerate: true,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na as f64 - 1.0) + qb * qb / (nb as f64 - 1.0));
    let p = if t == 0.0 {
        1.0
    } else {
        beta_reg(df / 2.0, 0.5, df / (df + t * t))
    };
    Ok(TTestResult {
        t,
        df,
        p,
        degenerate: false,
    })
}

/// Regularized incomplete beta function I_x(a, b).
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta_reg: a, b must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(a, b, x) / a
    } else {
        1.0 - front * betacf(b, a, 1.0 - x) / b
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 3e-16;
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos approximation (g = 7, 9 coefficients).
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection formula
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_reference_case() {
        // frozen from an independent reference implementation:
        // t = -1.0, df = 8.0, p = 0.346593507087
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let r = welch_t_test(&a, &b).unwrap();
        assert!((r.t - (-1.0)).abs() < 1e-12);
        assert!((r.df - 8.0).abs() < 1e-12);
        assert!((r.p - 0.346593507087).abs() < 1e-9, "p = {}", r.p);
    }

    #[test]
    fn welch_second_reference_case() {
        // unequal sizes/variances, frozen from the same reference:
        // t = 3.645718329208, df = 7.963518991142, p = 0.006585935590
        let a = [0.71, 0.74, 0.68, 0.77, 0.73, 0.70];
        let b = [0.66, 0.64, 0.69, 0.65];
        let r = welch_t_test(&a, &b).unwrap();
        assert!((r.t - 3.645718329208).abs() < 1e-9);
        assert!((r.df - 7.963518991142).abs() < 1e-9);
        assert!((r.p - 0.006585935590).abs() < 1e-9);
    }

    #[test]
    fn identical_samples() {
        let a = [0.5, 0.6, 0.7];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        assert!(!r.degenerate);
    }

    #[test]
    fn swapping_negates_t_preserves_p() {
        let a = [1.0, 2.0, 3.5, 1.2];
        let b = [2.0, 2.5, 4.0, 3.1, 2.2];
        let r1 = welch_t_test(&a, &b).unwrap();
        let r2 = welch_t_test(&b, &a).unwrap();
        assert_eq!(r1.t, -r2.t);
        assert_eq!(r1.p, r2.p);
        assert_eq!(r1.df, r2.df);
    }

    #[test]
    fn zero_variance_cases() {
        let r = welch_t_test(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        let r = welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(r.p, 0.0);
        assert!(r.degenerate);
    }

    #[test]
    fn short_samples_rejected() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mean_std_basics() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((m - 5.0).abs() < 1e-12);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn beta_reg_endpoints_and_symmetry() {
        assert_eq!(beta_reg(2.0, 3.0, 0.0), 0.0);
        assert_eq!(beta_reg(2.0, 3.0, 1.0), 1.0);
        // I_x(a,b) = 1 - I_{1-x}(b,a)
        let v = beta_reg(2.5, 1.5, 0.3);
        let w = 1.0 - beta_reg(1.5, 2.5, 0.7);
        assert!((v - w).abs() < 1e-12);
        // I_x(1,1) = x
        assert!((beta_reg(1.0, 1.0, 0.42) - 0.42).abs() < 1e-12);
    }
}
