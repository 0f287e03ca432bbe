//! Small numeric helpers shared by the feature, filter and metric code.

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population standard deviation (divides by n).
pub fn population_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    Some(var.max(0.0).sqrt())
}

/// Quantile of already sorted data using linear interpolation between order
/// statistics: position `h = (n - 1) * q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    Some(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Pearson correlation over the pairs where both sides are finite (NaN marks
/// a missing cell). Returns `None` when fewer than two complete pairs exist or
/// either side has zero variance on those pairs.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    debug_assert_eq!(xs.len(), ys.len());
    let mut n = 0usize;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        if x.is_nan() || y.is_nan() {
            continue;
        }
        n += 1;
        sx += x;
        sy += y;
    }
    if n < 2 {
        return None;
    }
    let mx = sx / n as f64;
    let my = sy / n as f64;
    let (mut cxy, mut cxx, mut cyy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        if x.is_nan() || y.is_nan() {
            continue;
        }
        let dx = x - mx;
        let dy = y - my;
        cxy += dx * dy;
        cxx += dx * dx;
        cyy += dy * dy;
    }
    if cxx <= 0.0 || cyy <= 0.0 {
        return None;
    }
    Some((cxy / (cxx.sqrt() * cyy.sqrt())).clamp(-1.0, 1.0))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
