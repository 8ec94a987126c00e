//! Dynamic time warping with L1 local cost and max-length normalization.

use super::MetricsError;

/// Classic DP over |x_i - y_j| with steps {(1,0),(0,1),(1,1)}, anchored at
/// both ends, divided by max(len x, len y). Symmetric; zero iff the curves
/// are identical.
pub fn dtw_distance(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.is_empty() || y.is_empty() {
        return Err(MetricsError::EmptyCurve);
    }
    let (n, m) = (x.len(), y.len());
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let cost = (x[i - 1] - y[j - 1]).abs();
            cur[j] = cost + prev[j].min(cur[j - 1]).min(prev[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m] / n.max(m) as f64)
}
