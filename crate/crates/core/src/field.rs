//! Complex fields sampled on a [`Grid2D`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// Complex state sampled on a grid, row-major with x as the slow axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid2D,
    data: Vec<Complex64>,
    post_blowup: bool,
}

impl Field {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
            post_blowup: false,
        }
    }

    pub fn from_vec(grid: Grid2D, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field data has {} samples, grid needs {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            data,
            post_blowup: false,
        })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.nx() {
            let x = grid.x(j);
            for m in 0..grid.ny() {
                data.push(f(x, grid.y(m)));
            }
        }
        Self {
            grid,
            data,
            post_blowup: false,
        }
    }

    pub fn from_real_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_fn(grid, |x, y| Complex64::new(f(x, y), 0.0))
    }

    /// `amplitude * exp(-x^2/sx^2 - y^2/sy^2)`.
    pub fn gaussian(grid: Grid2D, amplitude: f64, sx: f64, sy: f64) -> Self {
        Self::from_real_fn(grid, |x, y| {
            amplitude * (-(x * x) / (sx * sx) - (y * y) / (sy * sy)).exp()
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn at(&self, j: usize, m: usize) -> Complex64 {
        self.data[self.grid.index(j, m)]
    }

    pub fn is_post_blowup(&self) -> bool {
        self.post_blowup
    }

    pub fn mark_post_blowup(&mut self) {
        self.post_blowup = true;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { context })
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Discrete `L^2` norm squared, rectangle rule.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Lattice position of the largest modulus (first one on ties).
    pub fn argmax_abs(&self) -> (usize, usize) {
        let mut best = 0;
        let mut best_val = -1.0;
        for (i, z) in self.data.iter().enumerate() {
            let v = z.norm_sqr();
            if v > best_val {
                best_val = v;
                best = i;
            }
        }
        (best / self.grid.ny(), best % self.grid.ny())
    }

    /// `<self, other> = sum conj(self) * other dA`.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.same_grid(other)?;
        let s: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.cell_area())
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn scaled(&self, c: Complex64) -> Field {
        self.map(|z| z * c)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field {
            grid: self.grid,
            data: self.data.iter().map(|&z| f(z)).collect(),
            post_blowup: self.post_blowup,
        }
    }

    /// `self - other`.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
            post_blowup: self.post_blowup || other.post_blowup,
        })
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: Complex64, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + c * b)
                .collect(),
            post_blowup: self.post_blowup || other.post_blowup,
        })
    }

    /// Periodic shift: the sample at `(j, m)` moves to `(j + dj, m + dm)`.
    pub fn shifted(&self, dj: isize, dm: isize) -> Field {
        let (nx, ny) = (self.grid.nx() as isize, self.grid.ny() as isize);
        let mut out = vec![Complex64::new(0.0, 0.0); self.data.len()];
        for j in 0..nx {
            let tj = (j + dj).rem_euclid(nx) as usize;
            for m in 0..ny {
                let tm = (m + dm).rem_euclid(ny) as usize;
                out[self.grid.index(tj, tm)] = self.data[self.grid.index(j as usize, m as usize)];
            }
        }
        Field {
            grid: self.grid,
            data: out,
            post_blowup: self.post_blowup,
        }
    }

    /// Mirror image `u(-x, y)` about the box center.
    pub fn reflected_x(&self) -> Field {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut out = self.data.clone();
        for j in 0..nx {
            let src = (nx - j) % nx;
            out[j * ny..(j + 1) * ny].copy_from_slice(&self.data[src * ny..(src + 1) * ny]);
        }
        Field {
            grid: self.grid,
            data: out,
            post_blowup: self.post_blowup,
        }
    }

    /// Mirror image `u(x, -y)` about the box center.
    pub fn reflected_y(&self) -> Field {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut out = self.data.clone();
        for j in 0..nx {
            for m in 0..ny {
                out[j * ny + m] = self.data[j * ny + (ny - m) % ny];
            }
        }
        Field {
            grid: self.grid,
            data: out,
            post_blowup: self.post_blowup,
        }
    }

    /// Fraction of the mass within `band` samples of any box edge.
    pub fn boundary_mass_fraction(&self, band: usize) -> f64 {
        let total: f64 = self.data.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut edge = 0.0;
        for j in 0..nx {
            let x_edge = j < band || j >= nx - band;
            for m in 0..ny {
                if x_edge || m < band || m >= ny - band {
                    edge += self.data[j * ny + m].norm_sqr();
                }
            }
        }
        edge / total
    }

    /// Fraction of the mass within `band` columns of the two x edges.
    pub fn x_boundary_mass_fraction(&self, band: usize) -> f64 {
        let total: f64 = self.data.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let edge: f64 = (0..nx)
            .filter(|&j| j < band || j >= nx - band)
            .flat_map(|j| self.data[j * ny..(j + 1) * ny].iter())
            .map(|z| z.norm_sqr())
            .sum();
        edge / total
    }

    /// Real parts as a flat vector.
    pub fn re(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn abs(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }
}

/// Width in samples of the edge band used for boundary-mass checks.
pub fn default_boundary_band(n: usize) -> usize {
    (n / 32).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid2D {
        Grid2D::square(16, 4.0).unwrap()
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Field::from_vec(grid(), vec![Complex64::new(0.0, 0.0); 10]).is_err());
    }

    #[test]
    fn reflections_are_involutions() {
        let f = Field::from_fn(grid(), |x, y| Complex64::new(x + 0.3 * y * y, x * y));
        assert_eq!(f.reflected_x().reflected_x(), f);
        assert_eq!(f.reflected_y().reflected_y(), f);
        let r = f.reflected_x();
        // u(-x, y) at x = 1 equals u(1, y) evaluated at x = -1
        let g = f.grid();
        let j = 8 + 4; // x = 2
        let jm = 8 - 4; // x = -2
        assert_eq!(r.at(j, 3), f.at(jm, 3));
        assert_eq!(g.x(j), -g.x(jm));
    }

    #[test]
    fn shift_roundtrip() {
        let f = Field::from_fn(grid(), |x, y| Complex64::new(x, y));
        assert_eq!(f.shifted(3, -5).shifted(-3, 5), f);
        assert_eq!(f.shifted(1, 0).at(1, 0), f.at(0, 0));
    }

    #[test]
    fn zero_field_boundary_fraction() {
        assert_eq!(Field::zeros(grid()).boundary_mass_fraction(1), 0.0);
    }
}
