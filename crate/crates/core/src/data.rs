use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Declared exposure support `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    lo: f64,
    hi: f64,
}

impl Support {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidSupport { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, a: f64) -> bool {
        a >= self.lo && a <= self.hi
    }

    /// Maps `a` to `[0, 1]`.
    pub fn standardize(&self, a: f64) -> f64 {
        (a - self.lo) / self.width()
    }

    pub fn unstandardize(&self, z: f64) -> f64 {
        self.lo + z * self.width()
    }
}

/// Observations `(x, a, y)` with covariates stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    x: Vec<f64>,
    a: Vec<f64>,
    y: Vec<f64>,
    support: Support,
}

impl Dataset {
    /// Validates and builds a dataset. Row numbers in errors are 0-based observation indices.
    pub fn new(d: usize, x: Vec<f64>, a: Vec<f64>, y: Vec<f64>, support: Support) -> Result<Self> {
        let n = a.len();
        if n == 0 || d == 0 {
            return Err(Error::Shape(format!("need n >= 1 and d >= 1, got n = {n}, d = {d}")));
        }
        if y.len() != n || x.len() != n * d {
            return Err(Error::Shape(format!(
                "x has {} values, a has {n}, y has {} (d = {d})",
                x.len(),
                y.len()
            )));
        }
        for i in 0..n {
            for j in 0..d {
                if !x[i * d + j].is_finite() {
                    return Err(Error::NonFinite { row: i, column: format!("x{}", j + 1) });
                }
            }
            if !a[i].is_finite() {
                return Err(Error::NonFinite { row: i, column: "a".to_string() });
            }
            if !y[i].is_finite() {
                return Err(Error::NonFinite { row: i, column: "y".to_string() });
            }
            if !support.contains(a[i]) {
                return Err(Error::OutOfSupport {
                    row: i,
                    value: a[i],
                    lo: support.lo(),
                    hi: support.hi(),
                });
            }
        }
        Ok(Self { d, x, a, y, support })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn mean_y(&self) -> f64 {
        crate::stats::mean(&self.y)
    }

    /// Rows at `idx`, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut x = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            x.extend_from_slice(self.x_row(i));
        }
        Self {
            d: self.d,
            x,
            a: idx.iter().map(|&i| self.a[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            support: self.support,
        }
    }
}

/// One observation `Z = (X, A, Y)`.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub x: &'a [f64],
    pub a: f64,
    pub y: f64,
}

impl Dataset {
    pub fn obs(&self, i: usize) -> Observation<'_> {
        Observation { x: self.x_row(i), a: self.a[i], y: self.y[i] }
    }
}
