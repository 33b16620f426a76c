//! Error metrics and the paired t-test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Median of an ascending slice; mean of the two middle values for even length.
pub fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "median of empty slice");
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Mean absolute error of pre-computed absolute errors.
pub fn mae(errors: &[f64]) -> Result<f64> {
    mean(errors).ok_or_else(|| Error::Invalid("MAE of an empty error list".into()))
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (k, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + k as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
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

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-tailed p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x)
}

/// Student's t CDF.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * student_t_two_tailed(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TTestNote {
    /// Every difference was zero.
    NoDifference,
    /// Differences were constant and nonzero; t is infinite.
    ZeroVariance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p_two_tailed: f64,
    pub df: f64,
    pub note: Option<TTestNote>,
}

/// Paired t-test on aligned per-instance errors, testing mean(a − b) = 0.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Invalid(format!(
            "paired t-test on lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Invalid(
            "paired t-test needs at least 2 pairs".into(),
        ));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = (n - 1) as f64;
    let m = d.iter().sum::<f64>() / n as f64;
    let sd = sample_sd(&d);
    if d.iter().all(|&x| x == 0.0) {
        return Ok(TTest {
            t: 0.0,
            p_two_tailed: 1.0,
            df,
            note: Some(TTestNote::NoDifference),
        });
    }
    if sd == 0.0 {
        return Ok(TTest {
            t: if m > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            },
            p_two_tailed: 0.0,
            df,
            note: Some(TTestNote::ZeroVariance),
        });
    }
    let t = m / (sd / (n as f64).sqrt());
    Ok(TTest {
        t,
        p_two_tailed: student_t_two_tailed(t, df),
        df,
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mae_basics() {
        assert_eq!(mae(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert!(mae(&[]).is_err());
    }

    #[test]
    fn pooled_mae_is_weighted_fold_mean() {
        let folds = [
            vec![0.5, 1.0, 0.25],
            vec![2.0, 0.0],
            vec![0.1, 0.2, 0.3, 0.4],
        ];
        let pooled: Vec<f64> = folds.iter().flatten().copied().collect();
        let n: usize = folds.iter().map(Vec::len).sum();
        let weighted: f64 = folds
            .iter()
            .map(|f| mae(f).unwrap() * f.len() as f64)
            .sum::<f64>()
            / n as f64;
        assert!((mae(&pooled).unwrap() - weighted).abs() < 1e-12);
    }

    #[test]
    fn gamma_against_factorials() {
        for (x, fact) in [(1.0, 1.0f64), (2.0, 1.0), (5.0, 24.0), (10.0, 362_880.0)] {
            assert!((ln_gamma(x) - fact.ln()).abs() < 1e-10);
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-10);
    }

    #[test]
    fn t_table_critical_values() {
        // two-tailed critical values from a standard t-table
        for (t, df, p) in [
            (2.776, 4.0, 0.05),
            (4.604, 4.0, 0.01),
            (2.132, 4.0, 0.10),
            (2.228, 10.0, 0.05),
            (3.169, 10.0, 0.01),
            (1.812, 10.0, 0.10),
            (12.706, 1.0, 0.05),
        ] {
            let got = student_t_two_tailed(t, df);
            assert!((got - p).abs() < 1e-3, "t={t} df={df}: {got} vs {p}");
        }
        assert!((student_t_two_tailed(2.0, 10.0) - 0.0734).abs() < 1e-3);
        assert!((student_t_cdf(0.0, 7.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identical_vectors() {
        let t = paired_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((t.t, t.p_two_tailed), (0.0, 1.0));
        assert_eq!(t.note, Some(TTestNote::NoDifference));
    }

    #[test]
    fn hand_computed_statistic() {
        let a = [1.0, 1.1, 0.9, 1.0, 1.0];
        let t = paired_t_test(&a, &[0.0; 5]).unwrap();
        let expected = 1.0 / (0.005f64.sqrt() / 5f64.sqrt());
        assert!((t.t - expected).abs() < 1e-9);
        assert!((t.t - 31.62).abs() < 0.01);
        assert_eq!(t.df, 4.0);
        assert!(t.p_two_tailed < 1e-5);
    }

    #[test]
    fn constant_difference_is_flagged() {
        let t = paired_t_test(&[2.0, 3.0], &[1.0, 2.0]).unwrap();
        assert_eq!(t.p_two_tailed, 0.0);
        assert_eq!(t.note, Some(TTestNote::ZeroVariance));
        assert!(paired_t_test(&[1.0], &[1.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn antisymmetric(a in prop::collection::vec(0.0f64..4.0, 3..40), shift in prop::collection::vec(-1.0f64..1.0, 40)) {
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| (x + s).abs()).collect();
            let ab = paired_t_test(&a, &b).unwrap();
            let ba = paired_t_test(&b, &a).unwrap();
            prop_assert!((ab.t + ba.t).abs() < 1e-9 || (ab.t.is_infinite() && ab.t == -ba.t));
            prop_assert!((ab.p_two_tailed - ba.p_two_tailed).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p_two_tailed));
        }
    }
}
