use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const DEFAULT_T_MAX: f64 = 0.99;

/// Strictly increasing path points in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TGrid {
    values: Vec<f64>,
}

impl TGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::arg("t grid is empty"));
        }
        for &t in &values {
            if t >= 1.0 {
                return Err(Error::ForbiddenEndpoint { t });
            }
            if !(t >= 0.0) {
                return Err(Error::arg("t values must be finite and nonnegative"));
            }
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("t grid must be strictly increasing"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `{0, step, 2 step, ...}` cut at `t_max`, with `t_max` appended when missing.
pub fn make_tgrid(t_max: f64, step: f64) -> Result<TGrid> {
    if t_max >= 1.0 {
        return Err(Error::ForbiddenEndpoint { t: t_max });
    }
    if !(step > 0.0 && step <= t_max) {
        return Err(Error::arg("need 0 < t_step <= t_max"));
    }
    const TOL: f64 = 1e-9;
    let mut values = Vec::new();
    let mut k = 0u32;
    loop {
        // rounding keeps decimal steps exact, e.g. 3 * 0.05 gives 0.15
        let t = libm::round(f64::from(k) * step * 1e12) / 1e12;
        if t > t_max - TOL {
            break;
        }
        values.push(t);
        k += 1;
    }
    values.push(t_max);
    TGrid::new(values)
}
