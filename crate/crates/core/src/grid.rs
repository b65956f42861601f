//! Periodic computational box and its wavenumbers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anisotropic periodic box `[-lx/2, lx/2) x [-ly/2, ly/2)` sampled on an
/// `nx x ny` lattice. Both sample counts are powers of two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl TryFrom<GridSpec> for Grid2D {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        Grid2D::new(s.nx, s.ny, s.lx, s.ly)
    }
}

impl From<Grid2D> for GridSpec {
    fn from(g: Grid2D) -> Self {
        GridSpec {
            nx: g.nx,
            ny: g.ny,
            lx: g.lx,
            ly: g.ly,
        }
    }
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 || !nx.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "nx = {nx} is not a power of two >= 2"
            )));
        }
        if ny < 2 || !ny.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "ny = {ny} is not a power of two >= 2"
            )));
        }
        if !(lx.is_finite() && lx > 0.0) || !(ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box lengths must be positive and finite (lx = {lx}, ly = {ly})"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Square `n x n` grid on `[-half_width, half_width]^2`.
    pub fn square(n: usize, half_width: f64) -> Result<Self> {
        Self::new(n, n, 2.0 * half_width, 2.0 * half_width)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Quadrature weight of one lattice cell.
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    /// Flat index of sample `(j, m)`; x is the slow axis.
    #[inline]
    pub fn index(&self, j: usize, m: usize) -> usize {
        j * self.ny + m
    }

    /// x coordinate of column `j`, measured from the box center.
    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.lx + j as f64 * self.hx()
    }

    #[inline]
    pub fn y(&self, m: usize) -> f64 {
        -0.5 * self.ly + m as f64 * self.hy()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|m| self.y(m)).collect()
    }

    /// Angular wavenumber of x-mode `j`.
    #[inline]
    pub fn kx(&self, j: usize) -> f64 {
        2.0 * PI * wrap(j, self.nx) as f64 / self.lx
    }

    #[inline]
    pub fn ky(&self, m: usize) -> f64 {
        2.0 * PI * wrap(m, self.ny) as f64 / self.ly
    }

    pub fn kxs(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.kx(j)).collect()
    }

    pub fn kys(&self) -> Vec<f64> {
        (0..self.ny).map(|m| self.ky(m)).collect()
    }

    /// Same lattice shape on a box scaled by `factor` in both directions.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.nx, self.ny, self.lx * factor, self.ly * factor)
    }
}

/// Signed frequency index of DFT bin `j` in `[-n/2, n/2)`.
#[inline]
pub fn wrap(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Grid2D::new(48, 64, 1.0, 1.0).is_err());
        assert!(Grid2D::new(64, 0, 1.0, 1.0).is_err());
        assert!(Grid2D::new(64, 64, -1.0, 1.0).is_err());
        assert!(Grid2D::new(64, 64, 1.0, f64::NAN).is_err());
        assert!(Grid2D::new(64, 32, 1.0, 2.0).is_ok());
    }

    #[test]
    fn wavenumbers() {
        let g = Grid2D::new(8, 4, 2.0 * PI, PI).unwrap();
        assert_eq!(g.kx(0), 0.0);
        assert_eq!(g.ky(0), 0.0);
        assert_eq!(g.kx(1), 1.0);
        assert_eq!(g.kx(4), -4.0);
        assert_eq!(g.kx(7), -1.0);
        assert_eq!(g.ky(1), 2.0);
        assert_eq!(g.ky(2), -4.0);
        let wraps: Vec<i64> = (0..8).map(|j| wrap(j, 8)).collect();
        assert_eq!(wraps, vec![0, 1, 2, 3, -4, -3, -2, -1]);
    }

    #[test]
    fn coordinates_centered() {
        let g = Grid2D::square(64, 10.0).unwrap();
        assert_eq!(g.x(0), -10.0);
        assert_eq!(g.x(32), 0.0);
        assert_eq!(g.y(32), 0.0);
        assert!((g.hx() - 20.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn serde_validates() {
        let bad = r#"{"nx": 30, "ny": 32, "lx": 1.0, "ly": 1.0}"#;
        assert!(serde_json::from_str::<Grid2D>(bad).is_err());
        let good = r#"{"nx": 32, "ny": 32, "lx": 1.0, "ly": 1.0}"#;
        let g: Grid2D = serde_json::from_str(good).unwrap();
        assert_eq!(g.nx(), 32);
    }
}
