//! Small statistics helpers used by tests, checks and aggregation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit.
///
/// Adjacent cells are pooled from the end until each expected count is at
/// least 5. `probs` should sum to one.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> GofTest {
    assert_eq!(counts.len(), probs.len());
    let n: u64 = counts.iter().sum();
    let n = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut obs = 0.0;
    let mut exp = 0.0;
    for (&c, &p) in counts.iter().zip(probs).rev() {
        obs += c as f64;
        exp += p * n;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    let statistic: f64 = cells
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("dof > 0").cdf(statistic)
    };
    GofTest {
        statistic,
        dof,
        p_value,
    }
}

/// Chi-square fit of non-negative integer samples to a geometric law on
/// `{0, 1, 2, ...}` with `P(k) = p (1 - p)^k`.
pub fn geometric_gof(samples: &[u64], p: f64) -> GofTest {
    let max = samples.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; max + 2];
    for &s in samples {
        counts[s as usize] += 1;
    }
    let mut probs: Vec<f64> = (0..=max).map(|k| p * (1.0 - p).powi(k as i32)).collect();
    // Tail cell P(K > max) keeps the probabilities summing to one.
    probs.push((1.0 - p).powi(max as i32 + 1));
    chi_square_gof(&counts, &probs)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_err: f64,
}

/// Mean, sample standard deviation and standard error.
pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary::default();
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let std_dev = var.sqrt();
    Summary {
        n,
        mean,
        std_dev,
        std_err: std_dev / (n as f64).sqrt(),
    }
}
