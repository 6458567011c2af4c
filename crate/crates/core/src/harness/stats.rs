use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Logical error rate with its 95% Wilson interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rate {
    pub errors: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Rate {
    pub fn new(errors: u64, trials: u64) -> Self {
        let (lo, hi) = wilson(errors, trials, Z95);
        Rate { errors, trials, estimate: if trials == 0 { 0.0 } else { errors as f64 / trials as f64 }, lo, hi }
    }

    pub fn overlaps(&self, other: &Rate) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Half-width of the interval relative to the estimate.
    pub fn relative_half_width(&self) -> f64 {
        if self.estimate == 0.0 {
            f64::INFINITY
        } else {
            (self.hi - self.lo) / 2.0 / self.estimate
        }
    }

    /// `self` lies strictly above `other` with disjoint intervals.
    pub fn significantly_above(&self, other: &Rate) -> bool {
        self.lo > other.hi
    }
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Nearest-rank percentile of a sorted slice.
pub fn percentile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Latency distribution summary, following the minimum / mean / 95th
/// percentile convention.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LatencySummary {
    pub count: usize,
    pub mean_ns: f64,
    pub min_ns: u64,
    pub p95_ns: u64,
    pub max_ns: u64,
}

impl LatencySummary {
    pub fn new(values: &mut [u64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        values.sort_unstable();
        LatencySummary {
            count: values.len(),
            mean_ns: values.iter().map(|v| *v as f64).sum::<f64>() / values.len() as f64,
            min_ns: values[0],
            p95_ns: percentile(values, 0.95),
            max_ns: *values.last().unwrap(),
        }
    }
}
