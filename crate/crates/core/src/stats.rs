//! Deterministic summary statistics for Monte Carlo output.
//!
//! All reductions are pairwise over a materialized slice, so the result is a
//! pure function of the values in index order — aggregation never depends on
//! thread scheduling.

/// Pairwise (cascade) sum; deterministic and accurate to O(log n) rounding.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 64;
    if xs.len() <= BASE {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample mean and its standard error (sd / sqrt(n)).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return (m, f64::INFINITY);
    }
    let sq: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (xs.len() - 1) as f64
}

/// Ordinary least squares slope of `y` on `x` with its standard error.
/// Used to test that martingale increments do not load on the past.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let mx = mean(x);
    let my = mean(y);
    let sxy: Vec<f64> = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).collect();
    let sxx: Vec<f64> = x.iter().map(|&a| (a - mx) * (a - mx)).collect();
    let sxx = pairwise_sum(&sxx);
    let slope = pairwise_sum(&sxy) / sxx;
    let resid_sq: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = (b - my) - slope * (a - mx);
            r * r
        })
        .collect();
    let sigma2 = pairwise_sum(&resid_sq) / (n - 2) as f64;
    (slope, (sigma2 / sxx).sqrt())
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // evaluate both empirical CDFs just after the next observed value,
        // consuming ties on both sides so tied points never inflate the gap
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Critical value for the two-sample KS statistic at significance `alpha`,
/// from the asymptotic formula c(alpha) * sqrt((n+m)/(n m)).
pub fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Median of a sample (by value; averages the middle pair for even length).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
