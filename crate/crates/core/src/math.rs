//! Small numeric helpers shared across modules.

use std::f64::consts::SQRT_2;

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `log(sum(exp(v)))` with max subtraction. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Wilson score interval for a binomial proportion at ~95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

pub fn gray_code(n: u32) -> u32 {
    n ^ (n >> 1)
}

/// Linear interpolation of `y(x)` on a sorted grid, returning where `y` first crosses `level`.
/// `y` is compared in log10 when `log_y` is set.
pub fn first_crossing(x: &[f64], y: &[f64], level: f64, log_y: bool) -> Option<f64> {
    let tr = |v: f64| if log_y { v.max(1e-300).log10() } else { v };
    let target = tr(level);
    for i in 1..x.len().min(y.len()) {
        let (y0, y1) = (tr(y[i - 1]), tr(y[i]));
        if (y0 - target) * (y1 - target) <= 0.0 && y0 != y1 {
            let f = (target - y0) / (y1 - y0);
            return Some(x[i - 1] + f * (x[i] - x[i - 1]));
        }
        if y0 == target {
            return Some(x[i - 1]);
        }
    }
    None
}
