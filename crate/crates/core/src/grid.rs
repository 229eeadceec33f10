//! Segmented time axis and duration-weighted statistics over it.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Durations `dt_j > 0` of consecutive segments (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    durations: Vec<f64>,
    boundaries: Vec<f64>,
}

impl TimeGrid {
    pub fn new(durations: Vec<f64>) -> Result<Self> {
        if durations.is_empty() {
            return Err(Error::InvalidArgument("time grid needs at least one segment".into()));
        }
        if let Some((j, &dt)) = durations
            .iter()
            .enumerate()
            .find(|(_, &dt)| !(dt > 0.0) || !dt.is_finite())
        {
            return Err(Error::NonPositiveDuration(j, dt));
        }
        let mut boundaries = Vec::with_capacity(durations.len() + 1);
        boundaries.push(0.0);
        let mut t = 0.0;
        for &dt in &durations {
            t += dt;
            boundaries.push(t);
        }
        Ok(Self { durations, boundaries })
    }

    /// `segments` equal slices of `total`.
    pub fn uniform(total: f64, segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::InvalidArgument("segment count must be positive".into()));
        }
        Self::new(vec![total / segments as f64; segments])
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    /// `t_0 = 0, t_1, ..., t_N = T`.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn total(&self) -> f64 {
        *self.boundaries.last().expect("grid is non-empty")
    }

    /// Grid with every duration multiplied by the matching factor.
    pub fn scaled(&self, factors: impl IntoIterator<Item = f64>) -> Result<Self> {
        let durations: Vec<f64> = self
            .durations
            .iter()
            .zip(factors)
            .map(|(dt, f)| dt * f)
            .collect();
        if durations.len() != self.len() {
            return Err(Error::GridMismatch(self.len(), durations.len()));
        }
        Self::new(durations)
    }
}

/// One real sample per segment of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries {
    values: Vec<f64>,
    grid: Arc<TimeGrid>,
}

impl GridSeries {
    pub fn new(values: Vec<f64>, grid: Arc<TimeGrid>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(grid.len(), values.len()));
        }
        Ok(Self { values, grid })
    }

    pub fn constant(value: f64, grid: Arc<TimeGrid>) -> Self {
        Self {
            values: vec![value; grid.len()],
            grid,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridSeries {
        GridSeries {
            values: self.values.iter().map(|&x| f(x)).collect(),
            grid: Arc::clone(&self.grid),
        }
    }

    fn check_same_grid(&self, other: &GridSeries) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(self.grid.len(), other.grid.len()))
        }
    }
}

/// `<f>_T = (1/T) sum_j f_j dt_j`.
pub fn time_average(series: &GridSeries) -> f64 {
    let grid = series.grid();
    let weighted: f64 = series
        .values()
        .iter()
        .zip(grid.durations())
        .map(|(f, dt)| f * dt)
        .sum();
    weighted / grid.total()
}

/// `Cov(f, g) = <f g>_T - <f>_T <g>_T`, evaluated in centered form.
pub fn covariance(f: &GridSeries, g: &GridSeries) -> Result<f64> {
    f.check_same_grid(g)?;
    let mf = time_average(f);
    let mg = time_average(g);
    let grid = f.grid();
    let s: f64 = f
        .values()
        .iter()
        .zip(g.values())
        .zip(grid.durations())
        .map(|((a, b), dt)| (a - mf) * (b - mg) * dt)
        .sum();
    Ok(s / grid.total())
}

/// `Std(f) = sqrt(Cov(f, f))`.
pub fn std_dev(f: &GridSeries) -> f64 {
    covariance(f, f).expect("same grid").max(0.0).sqrt()
}

/// Optimality measure `sigma_Q = Std(Q) / <Q>_T`.
pub fn sigma_q(q: &GridSeries) -> Result<f64> {
    let mean = time_average(q);
    if mean.abs() <= 1e-14 {
        return Err(Error::UndefinedOptimality);
    }
    Ok(std_dev(q) / mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64], durations: &[f64]) -> GridSeries {
        let grid = Arc::new(TimeGrid::new(durations.to_vec()).unwrap());
        GridSeries::new(values.to_vec(), grid).unwrap()
    }

    #[test]
    fn grid_boundaries_and_total() {
        let g = TimeGrid::new(vec![0.5, 1.0, 2.5]).unwrap();
        assert_eq!(g.boundaries(), &[0.0, 0.5, 1.5, 4.0]);
        assert_eq!(g.total(), 4.0);
        assert!(matches!(TimeGrid::new(vec![1.0, 0.0]), Err(Error::NonPositiveDuration(1, _))));
        assert!(TimeGrid::new(vec![]).is_err());
    }

    #[test]
    fn time_average_cases() {
        assert_eq!(time_average(&series(&[4.2, 4.2, 4.2], &[0.1, 0.7, 0.2])), 4.2);
        assert_eq!(time_average(&series(&[1.0, 3.0], &[1.0, 1.0])), 2.0);
        assert_eq!(time_average(&series(&[1.0, 3.0], &[1.0, 3.0])), 2.5);
    }

    #[test]
    fn sigma_q_cases() {
        assert_eq!(sigma_q(&series(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0])).unwrap(), 0.0);
        assert!((sigma_q(&series(&[1.0, 3.0], &[1.0, 1.0])).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(
            sigma_q(&series(&[1.0, -1.0], &[1.0, 1.0])),
            Err(Error::UndefinedOptimality)
        );
    }

    #[test]
    fn covariance_cases() {
        let q = series(&[1.0, 3.0], &[1.0, 1.0]);
        let mu = GridSeries::new(vec![3.0, 1.0], Arc::clone(q.grid())).unwrap();
        assert!((covariance(&q, &mu).unwrap() + 1.0).abs() < 1e-15);
        let c = GridSeries::constant(7.0, Arc::clone(q.grid()));
        assert!(covariance(&q, &c).unwrap().abs() < 1e-12);
        assert!((covariance(&q, &q).unwrap() - 1.0).abs() < 1e-15);
        let other = series(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]);
        assert!(matches!(covariance(&q, &other), Err(Error::GridMismatch(2, 3))));
    }

    #[test]
    fn series_length_checked() {
        let grid = Arc::new(TimeGrid::uniform(1.0, 3).unwrap());
        assert!(GridSeries::new(vec![1.0], grid).is_err());
    }
}
