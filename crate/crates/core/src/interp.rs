//! Piecewise-linear interpolation on a strictly increasing knot sequence.
//! Evaluation outside the knot range is an error; nothing extrapolates.

use crate::error::{NhError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(NhError::InvalidTable(format!(
                "knot count mismatch: {} x values vs {} y values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(NhError::InvalidTable(
                "piecewise-linear interpolant needs at least two knots".into(),
            ));
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(NhError::InvalidTable(format!(
                    "knot abscissae must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(NhError::InvalidTable("knots must be finite".into()));
        }
        Ok(PiecewiseLinear { xs, ys })
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn y_min(&self) -> f64 {
        self.ys.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Index of the segment [x_i, x_{i+1}] containing x (in range).
    pub(crate) fn segment_index(&self, x: f64) -> usize {
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            i => (i - 1).min(self.xs.len() - 2),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min() && x <= self.x_max()
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.contains(x) {
            return Err(NhError::OutOfRange {
                x,
                lo: self.x_min(),
                hi: self.x_max(),
            });
        }
        let i = self.segment_index(x);
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        Ok(self.ys[i] + t * (self.ys[i + 1] - self.ys[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_at_knots_and_linear_between() {
        let pl = PiecewiseLinear::new(vec![0.0, 1.0, 3.0], vec![1.0, 2.0, -2.0]).unwrap();
        assert_abs_diff_eq!(pl.eval(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(pl.eval(1.0).unwrap(), 2.0);
        assert_abs_diff_eq!(pl.eval(3.0).unwrap(), -2.0);
        assert_abs_diff_eq!(pl.eval(2.0).unwrap(), 0.0);
        assert_abs_diff_eq!(pl.eval(0.5).unwrap(), 1.5);
    }

    #[test]
    fn no_extrapolation() {
        let pl = PiecewiseLinear::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert!(pl.eval(-0.1).is_err());
        assert!(pl.eval(1.1).is_err());
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(PiecewiseLinear::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(PiecewiseLinear::new(vec![1.0, 0.5], vec![1.0, 2.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0], vec![1.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, f64::NAN], vec![1.0, 2.0]).is_err());
    }
}
