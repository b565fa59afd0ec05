//! Payoff shapes `g` applied to a user's own rate.

use crate::error::{Error, Result};

const SAMPLE_POINTS: usize = 100;

/// Piecewise-linear utility through user-supplied knots.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl UtilityTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidUtility("a table needs at least two knots".into()));
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidUtility("table knots must be finite".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidUtility("table x values must be strictly increasing".into()));
        }
        if ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidUtility("table values must be strictly increasing".into()));
        }
        Ok(UtilityTable { xs, ys })
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    fn segment(&self, x: f64) -> usize {
        // index of the segment [xs[k], xs[k+1]] used for x, extrapolating at the ends
        let n = self.xs.len();
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    fn slope(&self, k: usize) -> f64 {
        (self.ys[k + 1] - self.ys[k]) / (self.xs[k + 1] - self.xs[k])
    }

    fn eval(&self, x: f64) -> f64 {
        let k = self.segment(x);
        self.ys[k] + self.slope(k) * (x - self.xs[k])
    }

    fn deriv(&self, x: f64) -> f64 {
        self.slope(self.segment(x))
    }
}

/// The utility `g` of a user's own rate.
#[derive(Debug, Clone, PartialEq)]
pub enum Utility {
    /// `g(x) = x`
    Identity,
    /// `g(x) = ln(1 + x)`
    Log1p,
    /// `g(x) = x^p`, `0 < p < 1`
    Power(f64),
    Table(UtilityTable),
}

impl Utility {
    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(Error::InvalidUtility(format!(
                "power exponent must lie in (0, 1), got {exponent}"
            )));
        }
        Ok(Utility::Power(exponent))
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        UtilityTable::new(points).map(Utility::Table)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Utility::Identity => "identity",
            Utility::Log1p => "log",
            Utility::Power(_) => "power",
            Utility::Table(_) => "table",
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Utility::Identity => x,
            Utility::Log1p => x.ln_1p(),
            Utility::Power(p) => x.max(0.0).powf(*p),
            Utility::Table(t) => t.eval(x),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            Utility::Identity => 1.0,
            Utility::Log1p => 1.0 / (1.0 + x),
            Utility::Power(p) => p * x.powf(p - 1.0),
            Utility::Table(t) => t.deriv(x),
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        match self {
            Utility::Identity | Utility::Table(_) => 0.0,
            Utility::Log1p => -1.0 / ((1.0 + x) * (1.0 + x)),
            Utility::Power(p) => p * (p - 1.0) * x.powf(p - 2.0),
        }
    }

    /// `(g')^{-1}(y)` for strictly concave kinds; `None` otherwise.
    pub fn inv_deriv(&self, y: f64) -> Option<f64> {
        match self {
            Utility::Log1p => Some(1.0 / y - 1.0),
            Utility::Power(p) => Some((y / p).powf(1.0 / (p - 1.0))),
            Utility::Identity | Utility::Table(_) => None,
        }
    }

    pub fn is_strictly_concave(&self) -> bool {
        matches!(self, Utility::Log1p | Utility::Power(_))
    }

    /// Checks on 100 sample points of `(0, c_max]` that `g` is positive and
    /// strictly increasing, and for concave kinds that `g'` strictly decreases.
    pub fn validate(&self, c_max: f64) -> Result<()> {
        if !(c_max.is_finite() && c_max > 0.0) {
            return Err(Error::InvalidArgument(format!("c_max must be positive, got {c_max}")));
        }
        let xs: Vec<f64> = (1..=SAMPLE_POINTS)
            .map(|k| c_max * k as f64 / SAMPLE_POINTS as f64)
            .collect();
        let mut prev_g = self.eval(0.0);
        let mut prev_d = f64::INFINITY;
        for &x in &xs {
            let g = self.eval(x);
            if g.is_nan() || g <= 0.0 {
                return Err(Error::InvalidUtility(format!("g({x}) = {g} is not positive")));
            }
            if g.is_nan() || g <= prev_g {
                return Err(Error::InvalidUtility(format!("g is not strictly increasing at {x}")));
            }
            if self.is_strictly_concave() {
                let d = self.deriv(x);
                if d.is_nan() || d >= prev_d {
                    return Err(Error::InvalidUtility(format!("g' is not strictly decreasing at {x}")));
                }
                prev_d = d;
            }
            prev_g = g;
        }
        Ok(())
    }
}
