//! Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.

use std::f64::consts::PI;

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    /// sup_t |F_x(t) - F_y(t)|
    pub statistic: f64,
    pub p_value: f64,
    pub m: usize,
    pub n: usize,
}

impl KsResult {
    /// `D * sqrt(mn / (m + n))`
    pub fn lambda(&self) -> f64 {
        let (m, n) = (self.m as f64, self.n as f64);
        self.statistic * (m * n / (m + n)).sqrt()
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

const SERIES_EPS: f64 = 1e-12;
/// Below this the alternating series needs too many terms; the Jacobi
/// theta form of the same distribution converges quickly there.
const SERIES_MIN_LAMBDA: f64 = 0.2;

/// Survival function of the Kolmogorov distribution,
/// `2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²)`, clamped to [0, 1].
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda.is_nan() || lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < SERIES_MIN_LAMBDA {
        // 1 - sqrt(2π)/λ Σ exp(-(2k-1)² π² / (8 λ²))
        let mut sum = 0.0;
        for k in 1..=100u32 {
            let odd = f64::from(2 * k - 1);
            let term = (-(odd * odd) * PI * PI / (8.0 * lambda * lambda)).exp();
            sum += term;
            if term < SERIES_EPS * sum.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        1.0 - (2.0 * PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        let mut k = 1.0f64;
        loop {
            let term = (-2.0 * k * k * lambda * lambda).exp();
            sum += sign * term;
            if term < SERIES_EPS {
                break;
            }
            sign = -sign;
            k += 1.0;
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}

/// Largest gap between the two empirical CDFs, checked at every pooled
/// sample point. Returned as the exact fraction `num / (m n)`.
fn ks_gap(xs: &[f64], ys: &[f64]) -> (u128, u128) {
    let (m, n) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut best: u128 = 0;
    while i < m || j < n {
        let t = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < m && xs[i] <= t {
            i += 1;
        }
        while j < n && ys[j] <= t {
            j += 1;
        }
        // |i/m - j/n| scaled by m n
        let gap = (i as u128 * n as u128).abs_diff(j as u128 * m as u128);
        best = best.max(gap);
    }
    (best, m as u128 * n as u128)
}

pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<KsResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(StatsError::NotANumber);
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (num, den) = ks_gap(&xs, &ys);
    let statistic = num as f64 / den as f64;
    let mut r = KsResult {
        statistic,
        p_value: 1.0,
        m: xs.len(),
        n: ys.len(),
    };
    r.p_value = kolmogorov_sf(r.lambda());
    Ok(r)
}
