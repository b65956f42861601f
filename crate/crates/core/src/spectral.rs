//! Fourier transforms on the periodic grid, spectral derivatives and the
//! free propagator of `i psi_t + psi_xx - psi_yyyy = 0`.
//!
//! Transforms are unnormalized forward and carry `1/(nx*ny)` on the inverse.
//! With `x_j = -Lx/2 + j*hx` the spectrum `F` represents
//! `f(x, y) = (1/N) sum F[j,m] exp(i kx_j (x + Lx/2) + i ky_m (y + Ly/2))`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid2D;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Row/column FFT plans for one lattice shape. Plans are immutable and
/// shared across threads; scratch space is per call.
pub struct Fft2 {
    nx: usize,
    ny: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            row_fwd: planner.plan_fft_forward(ny),
            row_inv: planner.plan_fft_inverse(ny),
            col_fwd: planner.plan_fft_forward(nx),
            col_inv: planner.plan_fft_inverse(nx),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.process(data, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform including the `1/(nx*ny)` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.process(data, &self.row_inv, &self.col_inv);
        let s = 1.0 / (self.nx * self.ny) as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    fn process(&self, data: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.nx * self.ny);
        let scratch_len = rows
            .get_inplace_scratch_len()
            .max(cols.get_inplace_scratch_len());
        let mut scratch = vec![ZERO; scratch_len];
        // y is the fast axis: rows are contiguous
        rows.process_with_scratch(data, &mut scratch);
        let mut t = vec![ZERO; data.len()];
        transpose(data, &mut t, self.nx, self.ny);
        cols.process_with_scratch(&mut t, &mut scratch);
        transpose(&t, data, self.ny, self.nx);
    }
}

/// `dst[c * rows + r] = src[r * cols + c]`, blocked for cache locality.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Cached plans for `grid`'s lattice shape.
pub fn plan(grid: &Grid2D) -> Arc<Fft2> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Fft2>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((grid.nx(), grid.ny()))
        .or_insert_with(|| Arc::new(Fft2::new(grid.nx(), grid.ny())))
        .clone()
}

/// Unnormalized forward spectrum of `f`.
pub fn forward(f: &Field) -> Vec<Complex64> {
    let mut s = f.data().to_vec();
    plan(f.grid()).forward(&mut s);
    s
}

/// Field whose forward spectrum is `spectrum`.
pub fn inverse(grid: Grid2D, mut spectrum: Vec<Complex64>) -> Field {
    plan(&grid).inverse(&mut spectrum);
    Field::from_vec(grid, spectrum).expect("spectrum length matches grid")
}

/// Multiplier of `d/dx`: `i kx` with the Nyquist column zeroed.
pub fn dx_symbol(grid: &Grid2D) -> Vec<f64> {
    let nx = grid.nx();
    (0..nx)
        .map(|j| if j == nx / 2 { 0.0 } else { grid.kx(j) })
        .collect()
}

/// Multiplier of `d^2/dy^2`: `-ky^2`.
pub fn dyy_symbol(grid: &Grid2D) -> Vec<f64> {
    grid.kys().iter().map(|k| -k * k).collect()
}

/// Apply a Fourier multiplier given as a function of the mode indices.
pub fn apply_multiplier(f: &Field, mult: impl Fn(usize, usize) -> Complex64) -> Field {
    let grid = *f.grid();
    let mut s = forward(f);
    let ny = grid.ny();
    for (i, z) in s.iter_mut().enumerate() {
        *z *= mult(i / ny, i % ny);
    }
    inverse(grid, s)
}

/// Spectral `d/dx`.
pub fn dx(f: &Field) -> Result<Field> {
    f.check_finite("dx input")?;
    let k = dx_symbol(f.grid());
    Ok(apply_multiplier(f, |j, _| Complex64::new(0.0, k[j])))
}

/// Spectral `d^2/dy^2`.
pub fn dyy(f: &Field) -> Result<Field> {
    f.check_finite("dyy input")?;
    let k = dyy_symbol(f.grid());
    Ok(apply_multiplier(f, |_, m| Complex64::new(k[m], 0.0)))
}

/// Symbol `kx^2 + ky^4` of `-d_xx + d_yyyy`, flattened like a field.
pub fn dispersion_symbol(grid: &Grid2D) -> Vec<f64> {
    let kx = grid.kxs();
    let ky = grid.kys();
    let mut out = Vec::with_capacity(grid.len());
    for a in &kx {
        for b in &ky {
            let b2 = b * b;
            out.push(a * a + b2 * b2);
        }
    }
    out
}

/// Unimodular multipliers `exp(-i t (kx^2 + ky^4))`.
pub fn propagator(grid: &Grid2D, t: f64) -> Vec<Complex64> {
    dispersion_symbol(grid)
        .into_iter()
        .map(|w| Complex64::from_polar(1.0, -t * w))
        .collect()
}

/// Exact free evolution over time `t` (any sign).
pub fn linear_propagate(f: &Field, t: f64) -> Result<Field> {
    f.check_finite("linear_propagate input")?;
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time {t} is not finite")));
    }
    let grid = *f.grid();
    let mut s = forward(f);
    if t != 0.0 {
        for (z, e) in s.iter_mut().zip(propagator(&grid, t)) {
            *z *= e;
        }
    }
    Ok(inverse(grid, s))
}

/// `||d_x f||^2` and `||d_yy f||^2` from one transform, via Parseval.
pub fn derivative_norms_sq(f: &Field) -> (f64, f64) {
    let grid = f.grid();
    let s = forward(f);
    derivative_norms_sq_from_spectrum(grid, &s)
}

pub fn derivative_norms_sq_from_spectrum(grid: &Grid2D, s: &[Complex64]) -> (f64, f64) {
    let kx = dx_symbol(grid);
    let ky2 = dyy_symbol(grid);
    let ny = grid.ny();
    let mut ax = 0.0;
    let mut byy = 0.0;
    for (j, row) in s.chunks_exact(ny).enumerate() {
        let kx2 = kx[j] * kx[j];
        let mut rx = 0.0;
        let mut ry = 0.0;
        for (z, k2) in row.iter().zip(&ky2) {
            let n = z.norm_sqr();
            rx += n;
            ry += k2 * k2 * n;
        }
        ax += kx2 * rx;
        byy += ry;
    }
    let w = grid.cell_area() / grid.len() as f64;
    (ax * w, byy * w)
}

/// Zero every mode outside the central 2/3 of each axis (`|wrap| > n/3`).
pub fn two_thirds_mask(grid: &Grid2D) -> Vec<f64> {
    let keep = |i: usize, n: usize| (crate::grid::wrap(i, n).unsigned_abs() as usize) * 3 <= n;
    let mut out = Vec::with_capacity(grid.len());
    for j in 0..grid.nx() {
        for m in 0..grid.ny() {
            out.push(if keep(j, grid.nx()) && keep(m, grid.ny()) {
                1.0
            } else {
                0.0
            });
        }
    }
    out
}

/// Spectral power fraction outside the central half band of either axis.
pub fn tail_power_fraction(grid: &Grid2D, s: &[Complex64]) -> f64 {
    let outer = |i: usize, n: usize| (crate::grid::wrap(i, n).unsigned_abs() as usize) * 4 > n;
    let ny = grid.ny();
    let mut total = 0.0;
    let mut tail = 0.0;
    for (i, z) in s.iter().enumerate() {
        let p = z.norm_sqr();
        total += p;
        if outer(i / ny, grid.nx()) || outer(i % ny, ny) {
            tail += p;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Trigonometric-interpolation matrix: row `t` holds `exp(i k (targets[t] - origin))`
/// for every DFT bin, with the Nyquist bin taken as a cosine.
fn interpolation_matrix(targets: &[f64], ks: &[f64], origin: f64) -> Vec<Complex64> {
    let n = ks.len();
    let mut out = Vec::with_capacity(targets.len() * n);
    for &t in targets {
        for (i, &k) in ks.iter().enumerate() {
            let ph = k * (t - origin);
            if i == n / 2 {
                out.push(Complex64::new(ph.cos(), 0.0));
            } else {
                out.push(Complex64::from_polar(1.0, ph));
            }
        }
    }
    out
}

/// Evaluate the band-limited interpolant of `f` on the tensor lattice
/// `xs x ys` (`xs.len() == nx`, `ys.len() == ny`), returned on `f`'s grid.
pub fn resample(f: &Field, xs: &[f64], ys: &[f64]) -> Field {
    let grid = *f.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    assert_eq!(xs.len(), nx);
    assert_eq!(ys.len(), ny);
    let n = grid.len() as f64;
    let s = forward(f);
    let ey = interpolation_matrix(ys, &grid.kys(), -0.5 * grid.ly());
    let ex = interpolation_matrix(xs, &grid.kxs(), -0.5 * grid.lx());
    // along y: g[kx][m] = sum_ky s[kx][ky] ey[m][ky]
    let mut g = vec![ZERO; grid.len()];
    for j in 0..nx {
        let row = &s[j * ny..(j + 1) * ny];
        for m in 0..ny {
            let e = &ey[m * ny..(m + 1) * ny];
            g[j * ny + m] = row.iter().zip(e).map(|(a, b)| a * b).sum();
        }
    }
    // along x: out[j][m] = sum_kx g[kx][m] ex[j][kx]
    let mut out = vec![ZERO; grid.len()];
    for jt in 0..nx {
        let e = &ex[jt * nx..(jt + 1) * nx];
        let dst = &mut out[jt * ny..(jt + 1) * ny];
        for (kx, &w) in e.iter().enumerate() {
            let src = &g[kx * ny..(kx + 1) * ny];
            for (d, v) in dst.iter_mut().zip(src) {
                *d += w * v;
            }
        }
    }
    out.iter_mut().for_each(|z| *z /= n);
    Field::from_vec(grid, out).expect("resampled length matches grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn fft_roundtrip_rectangular() {
        let g = Grid2D::new(16, 8, 3.0, 5.0).unwrap();
        let f = Field::from_fn(g, |x, y| Complex64::new((x * y).sin(), x - y * y));
        let back = inverse(g, forward(&f));
        assert!(max_diff(&f, &back) < 1e-13);
    }

    #[test]
    fn fft_matches_direct_dft() {
        let g = Grid2D::new(4, 8, 1.0, 1.0).unwrap();
        let f = Field::from_fn(g, |x, y| Complex64::new(x * 3.0 + y, y * y - x));
        let s = forward(&f);
        for kj in 0..4 {
            for km in 0..8 {
                let mut acc = ZERO;
                for j in 0..4 {
                    for m in 0..8 {
                        let ph = -2.0 * PI * ((kj * j) as f64 / 4.0 + (km * m) as f64 / 8.0);
                        acc += f.at(j, m) * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((acc - s[g.index(kj, km)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolation_reproduces_grid_values() {
        let g = Grid2D::square(16, 3.0).unwrap();
        let f = Field::from_fn(g, |x, y| Complex64::new((-x * x - y * y).exp(), 0.1 * x));
        let r = resample(&f, &g.xs(), &g.ys());
        assert!(max_diff(&f, &r) < 1e-13);
    }

    #[test]
    fn nonfinite_rejected() {
        let g = Grid2D::square(8, 1.0).unwrap();
        let mut f = Field::zeros(g);
        f.data_mut()[3] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(dx(&f), Err(Error::NonFinite { .. })));
        assert!(dyy(&f).is_err());
        assert!(linear_propagate(&f, 0.1).is_err());
    }
}
