//! Small-sample statistics for multi-seed experiment comparisons: summary
//! mean±std, Welch's unequal-variance t-test, and least-squares slopes.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean and sample standard deviation (n − 1 denominator) of a seed batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn summarize(xs: &[f64]) -> SampleSummary {
    let n = xs.len();
    if n == 0 {
        return SampleSummary {
            n: 0,
            mean: f64::NAN,
            std: f64::NAN,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
    };
    SampleSummary { n, mean, std }
}

/// Welch's t-test result: the statistic, the Welch–Satterthwaite degrees of
/// freedom, and the two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchReport {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

impl WelchReport {
    /// Significance at the conventional α = 0.05.
    pub fn significant(&self) -> bool {
        self.p_value < 0.05
    }
}

/// Two-sided Welch's t-test for a difference in means, without assuming equal
/// variances. Returns `None` when either sample has fewer than two points.
///
/// Degenerate variances are handled directly: if both samples are constant,
/// equal means give p = 1 and unequal means p = 0.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<WelchReport> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let sa = summarize(a);
    let sb = summarize(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sa.std * sa.std, sb.std * sb.std);
    let se_sq = va / na + vb / nb;
    if se_sq == 0.0 {
        let same = sa.mean == sb.mean;
        return Some(WelchReport {
            t: if same { 0.0 } else { f64::INFINITY },
            df: na + nb - 2.0,
            p_value: if same { 1.0 } else { 0.0 },
        });
    }
    let t = (sa.mean - sb.mean) / se_sq.sqrt();
    let df = se_sq * se_sq
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0 by construction");
    let p_value = 2.0 * (1.0 - dist.cdf(t.abs()));
    Some(WelchReport { t, df, p_value })
}

/// Ordinary least-squares slope of `ys` against `xs`. `None` when fewer than
/// two points or when all `xs` coincide.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len(), "slope needs paired samples");
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}
