use crate::error::{Error, Result};

/// Paired observations `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::validation(format!(
                "x has {} values but y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::validation("dataset is empty"));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("x[{i}] is not finite")));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("y[{i}] is not finite")));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.x
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn y_sum_sq(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum()
    }

    /// Sorted distinct covariate values.
    pub fn distinct_x(&self) -> Vec<f64> {
        let mut xs = self.x.clone();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }
}
