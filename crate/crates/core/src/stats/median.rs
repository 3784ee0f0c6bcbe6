//! Distribution-free confidence interval for the median.

use statrs::distribution::{Binomial, DiscreteCDF};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianCI {
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
    /// Requested coverage.
    pub level: f64,
    /// Exact coverage of the chosen order statistics.
    pub coverage: f64,
    /// 1-based ranks of the bounds in the sorted sample.
    pub lo_rank: usize,
    pub hi_rank: usize,
    /// The sample is too small to reach `level`; the full range is reported.
    pub degenerate: bool,
}

pub fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// P(k ≤ B ≤ n - k) for B ~ Binomial(n, 1/2): the coverage of the
/// interval `[x_(k), x_(n+1-k)]`.
pub fn order_statistic_coverage(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n as u64).expect("p = 1/2 is valid");
    (1.0 - 2.0 * b.cdf(k as u64 - 1)).max(0.0)
}

/// Narrowest symmetric order-statistic interval `[x_(k), x_(n+1-k)]` whose
/// binomial coverage is at least `level`.
pub fn median_ci(sample: &[f64], level: f64) -> Result<MedianCI, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(StatsError::NotANumber);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();

    let mut k = 1;
    while 2 * (k + 1) <= n + 1 && order_statistic_coverage(n, k + 1) >= level {
        k += 1;
    }
    let coverage = order_statistic_coverage(n, k);
    Ok(MedianCI {
        median: median_sorted(&sorted),
        lo: sorted[k - 1],
        hi: sorted[n - k],
        level,
        coverage,
        lo_rank: k,
        hi_rank: n + 1 - k,
        degenerate: coverage < level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Σ_{j=k}^{n-k} C(n, j) / 2^n by direct enumeration.
    fn enumerated_coverage(n: usize, k: usize) -> f64 {
        let mut c = vec![1.0f64];
        for _ in 0..n {
            let mut next = vec![0.0; c.len() + 1];
            for (j, v) in c.iter().enumerate() {
                next[j] += v / 2.0;
                next[j + 1] += v / 2.0;
            }
            c = next;
        }
        (k..=n - k).map(|j| c[j]).sum()
    }

    #[test]
    fn coverage_matches_enumeration() {
        for n in 1usize..40 {
            for k in 1..=n.div_ceil(2) {
                let a = order_statistic_coverage(n, k);
                let b = enumerated_coverage(n, k);
                assert!((a - b).abs() < 1e-9, "n={n} k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn nine_values() {
        let s: Vec<f64> = (1..=9).map(f64::from).collect();
        let ci = median_ci(&s, 0.95).unwrap();
        // C(9,0)+C(9,1) = 10 → 1 - 20/512 ≈ 0.961; k = 3 gives ≈ 0.820
        assert!((enumerated_coverage(9, 2) - (1.0 - 20.0 / 512.0)).abs() < 1e-12);
        assert!(enumerated_coverage(9, 3) < 0.95);
        assert_eq!((ci.lo_rank, ci.hi_rank), (2, 8));
        assert_eq!((ci.median, ci.lo, ci.hi), (5.0, 2.0, 8.0));
        assert!(!ci.degenerate);
    }

    #[test]
    fn identical_values() {
        let ci = median_ci(&[1.0; 30], 0.95).unwrap();
        assert_eq!((ci.median, ci.lo, ci.hi), (1.0, 1.0, 1.0));
        assert!(ci.coverage >= 0.95);
    }

    #[test]
    fn single_value_is_degenerate() {
        let ci = median_ci(&[7.0], 0.95).unwrap();
        assert_eq!((ci.median, ci.lo, ci.hi), (7.0, 7.0, 7.0));
        assert!(ci.degenerate);
    }

    #[test]
    fn even_sample_median() {
        let ci = median_ci(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap();
        assert_eq!(ci.median, 2.5);
        assert!(ci.lo <= ci.median && ci.median <= ci.hi);
    }

    #[test]
    fn errors() {
        assert_eq!(median_ci(&[], 0.95), Err(StatsError::EmptySample));
        assert_eq!(median_ci(&[1.0], 1.5), Err(StatsError::InvalidLevel(1.5)));
    }
}
