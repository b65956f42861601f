//! Conserved quantities, action functionals, Pohozaev residuals and the
//! three scaling families.
//!
//! Every functional is an algebraic combination of four integrals, gathered
//! once per field in [`Norms`]:
//! `A = ||d_x u||^2`, `B = ||d_yy u||^2`, `M = ||u||^2` and `P = ||u||_p^p`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{default_boundary_band, Field};
use crate::params::ModelParams;
use crate::spectral;

/// Largest mass fraction a rescaling may push outside the box.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Boundary mass fraction above which the virial is flagged.
pub const VIRIAL_BOUNDARY_TOL: f64 = 1e-8;

/// `|z|^p`, with the modulus computed by `hypot`.
#[inline]
pub fn abs_pow(z: Complex64, p: f64) -> f64 {
    let a = z.norm();
    if p.fract() == 0.0 && p.abs() < 64.0 {
        a.powi(p as i32)
    } else {
        a.powf(p)
    }
}

/// `|z|^(p-2) z`; zero at the origin for every `p > 2`.
#[inline]
pub fn power_nonlinearity(z: Complex64, p: f64) -> Complex64 {
    if z.re == 0.0 && z.im == 0.0 {
        return z;
    }
    z * abs_pow(z, p - 2.0)
}

/// `||f||_p^p`.
pub fn lp_pow(f: &Field, p: f64) -> f64 {
    f.data().iter().map(|&z| abs_pow(z, p)).sum::<f64>() * f.grid().cell_area()
}

/// The four integrals every functional is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub dx_sq: f64,
    pub dyy_sq: f64,
    pub mass: f64,
    pub lp: f64,
    pub p: f64,
}

impl Norms {
    pub fn of(f: &Field, p: f64) -> Self {
        let (dx_sq, dyy_sq) = spectral::derivative_norms_sq(f);
        Self {
            dx_sq,
            dyy_sq,
            mass: f.norm_sq(),
            lp: lp_pow(f, p),
            p,
        }
    }

    pub fn kinetic(&self) -> f64 {
        self.dx_sq + self.dyy_sq
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.dx_sq + 0.5 * self.dyy_sq - self.lp / self.p
    }

    pub fn j_omega(&self, omega: f64) -> f64 {
        self.energy() + 0.5 * omega * self.mass
    }

    pub fn i_omega(&self, omega: f64) -> f64 {
        self.dx_sq + self.dyy_sq + omega * self.mass - self.lp
    }

    pub fn q(&self) -> f64 {
        let p = self.p;
        self.dx_sq + self.dyy_sq - 3.0 * (p - 2.0) / (4.0 * p) * self.lp
    }

    pub fn k(&self) -> f64 {
        let p = self.p;
        0.5 * self.dyy_sq - (p - 2.0) / (8.0 * p) * self.lp
    }

    /// `||d_x u|| + ||d_yy u|| + ||u||`.
    pub fn h12(&self) -> f64 {
        self.dx_sq.sqrt() + self.dyy_sq.sqrt() + self.mass.sqrt()
    }

    /// `sqrt(||d_x u||^2 + ||d_yy u||^2 + ||u||^2)`, an equivalent norm.
    pub fn h12_quadratic(&self) -> f64 {
        (self.dx_sq + self.dyy_sq + self.mass).sqrt()
    }

    /// Right-hand side of the transverse virial law,
    /// `8 ||d_x u||^2 - 4(p-2)/p ||u||_p^p`.
    pub fn virial_acceleration(&self) -> f64 {
        8.0 * self.dx_sq - 4.0 * (self.p - 2.0) / self.p * self.lp
    }

    pub fn pohozaev(&self, omega: f64) -> Result<PohozaevResiduals> {
        if self.lp == 0.0 {
            return Err(Error::UndefinedRatio);
        }
        let p = self.p;
        Ok(PohozaevResiduals {
            r1: self.q() / self.lp,
            r2: (omega * self.mass - (p + 6.0) / (4.0 * p) * self.lp) / self.lp,
            r3: (self.dx_sq - 2.0 * self.dyy_sq) / self.lp,
        })
    }

    /// `||u||_p^p / (||d_x u||^((p-2)/2) ||d_yy u||^((p-2)/4) ||u||^((p+6)/4))`.
    pub fn gn_quotient(&self) -> Result<f64> {
        let p = self.p;
        let den = self.dx_sq.powf((p - 2.0) / 4.0)
            * self.dyy_sq.powf((p - 2.0) / 8.0)
            * self.mass.powf((p + 6.0) / 8.0);
        if den == 0.0 {
            return Err(Error::UndefinedRatio);
        }
        Ok(self.lp / den)
    }
}

/// Snapshot of every scalar functional of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValues {
    pub mass: f64,
    pub energy: f64,
    pub j_omega: f64,
    pub i_omega: f64,
    pub q: f64,
    pub k: f64,
    pub virial: f64,
    pub h12_norm: f64,
}

impl FunctionalValues {
    pub fn evaluate(f: &Field, params: &ModelParams) -> Self {
        let n = Norms::of(f, params.p());
        let w = params.omega();
        Self {
            mass: n.mass,
            energy: n.energy(),
            j_omega: n.j_omega(w),
            i_omega: n.i_omega(w),
            q: n.q(),
            k: n.k(),
            virial: transverse_virial(f).value,
            h12_norm: n.h12(),
        }
    }
}

/// Residuals of the three Pohozaev-type identities, each divided by `||u||_p^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevResiduals {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl PohozaevResiduals {
    pub fn max_abs(&self) -> f64 {
        self.r1.abs().max(self.r2.abs()).max(self.r3.abs())
    }
}

pub fn mass(f: &Field) -> f64 {
    f.norm_sq()
}

pub fn energy(f: &Field, params: &ModelParams) -> f64 {
    Norms::of(f, params.p()).energy()
}

pub fn j_omega(f: &Field, params: &ModelParams) -> f64 {
    Norms::of(f, params.p()).j_omega(params.omega())
}

pub fn i_omega(f: &Field, params: &ModelParams) -> f64 {
    Norms::of(f, params.p()).i_omega(params.omega())
}

pub fn q_functional(f: &Field, params: &ModelParams) -> f64 {
    Norms::of(f, params.p()).q()
}

pub fn k_functional(f: &Field, params: &ModelParams) -> f64 {
    Norms::of(f, params.p()).k()
}

pub fn h12_norm(f: &Field) -> f64 {
    // p only enters the Lp term, which h12 ignores
    Norms::of(f, 4.0).h12()
}

pub fn pohozaev_ratios(f: &Field, params: &ModelParams) -> Result<PohozaevResiduals> {
    Norms::of(f, params.p()).pohozaev(params.omega())
}

pub fn gn_quotient(f: &Field, p: f64) -> Result<f64> {
    Norms::of(f, p).gn_quotient()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialValue {
    pub value: f64,
    pub x_boundary_fraction: f64,
    /// Set when the field is not localized in x, so the periodic wrap
    /// makes the value meaningless.
    pub boundary_warning: bool,
}

/// `V[u] = int x^2 |u|^2`, with x measured from the box center.
pub fn transverse_virial(f: &Field) -> VirialValue {
    let g = f.grid();
    let ny = g.ny();
    let mut v = 0.0;
    for (j, row) in f.data().chunks_exact(ny).enumerate() {
        let x = g.x(j);
        v += x * x * row.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    let frac = f.x_boundary_mass_fraction(default_boundary_band(g.nx()));
    VirialValue {
        value: v * g.cell_area(),
        x_boundary_fraction: frac,
        boundary_warning: frac > VIRIAL_BOUNDARY_TOL,
    }
}

/// `dV/dt = 4 Im int x conj(u) d_x u`.
pub fn virial_rate(f: &Field) -> Result<f64> {
    let d = spectral::dx(f)?;
    let g = f.grid();
    let ny = g.ny();
    let mut s = 0.0;
    for (j, (row, drow)) in f.data().chunks_exact(ny).zip(d.data().chunks_exact(ny)).enumerate() {
        let x = g.x(j);
        s += x * row.iter().zip(drow).map(|(u, du)| (u.conj() * du).im).sum::<f64>();
    }
    Ok(4.0 * s * g.cell_area())
}

/// `amplitude * u(ax * x, ay * y)`, resampled spectrally onto the same grid.
pub fn rescale(f: &Field, amplitude: f64, ax: f64, ay: f64) -> Result<Field> {
    for (name, v) in [("amplitude", amplitude), ("ax", ax), ("ay", ay)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!("{name} = {v} must be positive")));
        }
    }
    f.check_finite("rescale input")?;
    let g = *f.grid();
    // The new field at |x| <= Lx/2 reads the old one at |x| <= ax*Lx/2;
    // beyond Lx/2 that window overlaps the periodic image.
    let visible = |a: f64, l: f64| {
        let w = 0.5 * a * l;
        w.min(l - w)
    };
    let (vx, vy) = (visible(ax, g.lx()), visible(ay, g.ly()));
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::SupportOverflow { lost_fraction: 1.0 });
    }
    let total: f64 = f.data().iter().map(|z| z.norm_sqr()).sum();
    if total > 0.0 {
        let mut lost = 0.0;
        for j in 0..g.nx() {
            let xo = g.x(j).abs() > vx;
            for m in 0..g.ny() {
                if xo || g.y(m).abs() > vy {
                    lost += f.at(j, m).norm_sqr();
                }
            }
        }
        let frac = lost / total;
        if frac > SUPPORT_TOL {
            return Err(Error::SupportOverflow {
                lost_fraction: frac,
            });
        }
    }
    let xs: Vec<f64> = g.xs().iter().map(|x| ax * x).collect();
    let ys: Vec<f64> = g.ys().iter().map(|y| ay * y).collect();
    let mut out = spectral::resample(f, &xs, &ys);
    out.data_mut().iter_mut().for_each(|z| *z *= amplitude);
    Ok(out)
}

/// Mass-preserving scaling `u_lambda = lambda^(3/8) u(lambda^(1/2) x, lambda^(1/4) y)`.
pub fn scale_lambda(f: &Field, lambda: f64) -> Result<Field> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive")));
    }
    rescale(f, lambda.powf(0.375), lambda.sqrt(), lambda.powf(0.25))
}

/// `mu * u(lambda1 x, lambda2 y)`.
pub fn scale_aniso(f: &Field, mu: f64, lambda1: f64, lambda2: f64) -> Result<Field> {
    rescale(f, mu, lambda1, lambda2)
}

/// Transverse stretch `u^lambda = lambda^(1/2) u(x, lambda y)`.
pub fn scale_ylambda(f: &Field, lambda: f64) -> Result<Field> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive")));
    }
    rescale(f, lambda.sqrt(), 1.0, lambda)
}
