//! Uniform time grids.

use crate::error::{Error, Result};

/// Uniform grid `0 = t_0 < ... < t_n = t_max` with `steps` intervals.
pub fn uniform(t_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0) {
        return Err(Error::parameter(format!("t_max must be positive, got {t_max}")));
    }
    if steps == 0 {
        return Err(Error::parameter("grid needs at least one step"));
    }
    let dt = t_max / steps as f64;
    Ok((0..=steps).map(|m| m as f64 * dt).collect())
}

/// Spacing of a uniform grid; errors if the grid is not uniform to 1 part in 1e9.
pub fn uniform_spacing(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::parameter("grid needs at least two points"));
    }
    let dt = grid[1] - grid[0];
    if !(dt > 0.0) {
        return Err(Error::parameter("grid must be strictly increasing"));
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::parameter("grid is not uniform"));
        }
    }
    Ok(dt)
}

/// Check a grid is strictly increasing and starts at zero.
pub fn validate(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::parameter("grid needs at least two points"));
    }
    if grid[0] != 0.0 {
        return Err(Error::parameter(format!("grid must start at 0, got {}", grid[0])));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::parameter("grid must be strictly increasing"));
        }
    }
    Ok(())
}
