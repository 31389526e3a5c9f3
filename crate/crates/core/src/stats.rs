//! Small summary statistics with a fixed summation order.

/// Pairwise sum, deterministic for a given slice order.
pub fn sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        let mut s = 0.0;
        for &x in v {
            s += x;
        }
        s
    } else {
        let m = v.len() / 2;
        sum(&v[..m]) + sum(&v[m..])
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    sum(v) / v.len() as f64
}

/// Mean and population standard deviation.
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    let mut ss = 0.0;
    for &x in v {
        ss += (x - m) * (x - m);
    }
    (m, libm::sqrt(ss / v.len() as f64))
}
