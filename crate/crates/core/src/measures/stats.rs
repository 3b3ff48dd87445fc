//! Small descriptive statistics. Standard deviations are population ones.

pub fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn variance(v: &[f64]) -> Option<f64> {
    let m = mean(v)?;
    Some(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64)
}

pub fn std_dev(v: &[f64]) -> Option<f64> {
    variance(v).map(f64::sqrt)
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    let mid = s.len() / 2;
    let (lower, m, _) = s.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    if v.len() % 2 == 1 {
        Some(m)
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((below + m) / 2.0)
    }
}

/// `num / den`, or `None` when the denominator is zero or the result is not
/// finite.
pub fn ratio(num: f64, den: f64) -> Option<f64> {
    if den == 0.0 {
        return None;
    }
    let r = num / den;
    r.is_finite().then_some(r)
}
