//! Fundamental solution `K(x, y) = int_0^inf e^{-t} H1(x, t) H2(y, t) dt` of the
//! unit-frequency linear ground-state operator and anisotropic decay fits of
//! computed ground states.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_state::GroundStateResult;

/// Half width of the tabulated range of `H2(z, 1)`.
pub const H2_TABLE_RANGE: f64 = 12.0;
/// Table spacing.
pub const H2_TABLE_STEP: f64 = 1e-3;
/// Beyond this `|z|`, `|H2(z, 1)| < 1e-40` and the value is taken as zero.
pub const H2_NEGLIGIBLE: f64 = 40.0;

/// `int_0^inf e^{-xi^4} d xi = Gamma(5/4)`.
pub const QUARTIC_GAUSSIAN_INTEGRAL: f64 = 0.906_402_477_055_477;

// 16-point Gauss-Legendre nodes and weights on [-1, 1] (positive half).
const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_09,
];

/// Quadrature rule for `2 int_0^XI cos(2 pi z xi) e^{-xi^4} d xi`, with the
/// weight `e^{-xi^4}` folded into the weights.
struct QuarticRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuarticRule {
    fn new(panels: usize) -> Self {
        const XI_MAX: f64 = 6.5;
        let h = XI_MAX / panels as f64;
        let mut nodes = Vec::with_capacity(16 * panels);
        let mut weights = Vec::with_capacity(16 * panels);
        for k in 0..panels {
            let mid = (k as f64 + 0.5) * h;
            for (x, w) in GL16_X.iter().zip(&GL16_W) {
                for s in [-1.0, 1.0] {
                    let xi = mid + s * x * 0.5 * h;
                    nodes.push(xi);
                    weights.push(2.0 * w * 0.5 * h * (-xi.powi(4)).exp());
                }
            }
        }
        Self { nodes, weights }
    }

    fn eval(&self, z: f64) -> f64 {
        let k = std::f64::consts::TAU * z;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(xi, w)| w * (k * xi).cos())
            .sum()
    }
}

fn panels_for(z: f64) -> usize {
    // at least ~6 panels per oscillation period of cos(2 pi z xi) on [0, 6.5]
    (40.0 + 40.0 * z.abs()).ceil() as usize
}

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let rule = QuarticRule::new(panels_for(H2_TABLE_RANGE));
        let n = (H2_TABLE_RANGE / H2_TABLE_STEP).round() as usize;
        // two guard points past the range keep the interpolation stencil inside
        (0..=n + 2)
            .map(|i| rule.eval(i as f64 * H2_TABLE_STEP))
            .collect()
    })
}

/// `H2(z, 1) = 2 int_0^inf cos(2 pi z xi) e^{-xi^4} d xi` by direct quadrature.
pub fn h2_direct(z: f64) -> f64 {
    QuarticRule::new(panels_for(z)).eval(z)
}

/// `H2(z, 1)` from the table with four-point cubic interpolation; direct
/// quadrature past the table range, zero past `H2_NEGLIGIBLE`.
pub fn h2_unit(z: f64) -> f64 {
    let a = z.abs();
    if a > H2_NEGLIGIBLE {
        return 0.0;
    }
    if a > H2_TABLE_RANGE {
        return h2_direct(a);
    }
    let t = table();
    let u = a / H2_TABLE_STEP;
    let i = (u.floor() as usize).min(t.len() - 3);
    let s = u - i as f64;
    // even function: mirror the stencil through the origin
    let at = |k: isize| t[k.unsigned_abs()];
    let k = i as isize;
    let (p0, p1, p2, p3) = (at(k - 1), at(k), at(k + 1), at(k + 2));
    // four-point Lagrange cubic on nodes -1, 0, 1, 2
    let (a0, a1, a2) = (s + 1.0, s - 1.0, s - 2.0);
    -p0 * s * a1 * a2 / 6.0 + p1 * a0 * a1 * a2 / 2.0 - p2 * a0 * s * a2 / 2.0 + p3 * a0 * s * a1 / 6.0
}

/// `H2(y, t) = t^{-1/4} H2(t^{-1/4} y, 1)`.
pub fn h2(y: f64, t: f64) -> f64 {
    let s = t.powf(-0.25);
    s * h2_unit(s * y)
}

/// `H1(x, t) = sqrt(pi/t) e^{-pi^2 x^2 / t}`.
pub fn h1(x: f64, t: f64) -> f64 {
    (std::f64::consts::PI / t).sqrt() * (-std::f64::consts::PI.powi(2) * x * x / t).exp()
}

// Gauss-Kronrod 7/15 nodes and weights.
const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let d = h * GK_X[i];
        let s = f(c - d) + f(c + d);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Global adaptive Gauss-Kronrod quadrature: returns the estimate and error
/// bound, or an accuracy error once the subinterval budget is spent.
pub fn integrate_adaptive(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<(f64, f64)> {
    let mut parts: Vec<(f64, f64, f64, f64)> = Vec::new();
    let initial = 8;
    let w = (b - a) / initial as f64;
    for i in 0..initial {
        let (lo, hi) = (a + i as f64 * w, a + (i + 1) as f64 * w);
        let (v, e) = gk15(&f, lo, hi);
        parts.push((lo, hi, v, e));
    }
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if !(total.is_finite() && err.is_finite()) {
            return Err(Error::NonFinite {
                context: "adaptive quadrature",
            });
        }
        if err <= abs_tol {
            return Ok((total, err));
        }
        if parts.len() >= max_intervals {
            return Err(Error::Accuracy {
                estimate: total,
                bound: err,
            });
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// Evaluate `K(x, y)` to absolute accuracy `quad_tol`.
pub fn kernel_eval(x: f64, y: f64, quad_tol: f64) -> Result<f64> {
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::InvalidArgument("kernel point must be finite".into()));
    }
    if !(quad_tol > 0.0 && quad_tol.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "quad_tol = {quad_tol} must be positive"
        )));
    }
    if x == 0.0 && y == 0.0 {
        return Err(Error::InvalidArgument(
            "the origin is excluded from kernel evaluation".into(),
        ));
    }
    // e^{-T} sqrt(pi/T) T^{-1/4} H2(0,1) bounds the discarded tail
    let h2_max = 2.0 * QUARTIC_GAUSSIAN_INTEGRAL;
    let mut t_cut: f64 = 1.0;
    while (-t_cut).exp() * (std::f64::consts::PI / t_cut).sqrt() * t_cut.powf(-0.25) * h2_max
        >= 0.1 * quad_tol
    {
        t_cut *= 1.25;
    }
    // below t_min one factor is under e^{-745} (x) or H2 is negligible (y)
    let t_x = std::f64::consts::PI.powi(2) * x * x / 745.0;
    let t_y = (y.abs() / H2_NEGLIGIBLE).powi(4);
    let t_min = t_x.max(t_y).max(1e-300);
    if t_min >= t_cut {
        return Ok(0.0);
    }
    let integrand = |s: f64| {
        let t = s.exp();
        t * (-t).exp() * h1(x, t) * h2(y, t)
    };
    let (v, _) = integrate_adaptive(integrand, t_min.ln(), t_cut.ln(), quad_tol, 4000)?;
    Ok(v)
}

/// Ordinary least squares of `ys` on `xs`: `(slope, intercept, r^2)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

/// Least squares `y = c0 + c1 u + c2 v`; returns `(c0, c1, c2)`.
fn two_regressor_fit(u: &[f64], v: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = u.len() as f64;
    let mean = |a: &[f64]| a.iter().sum::<f64>() / n;
    let (mu, mv, my) = (mean(u), mean(v), mean(y));
    let cov = |a: &[f64], ma: f64, b: &[f64], mb: f64| -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - ma) * (q - mb)).sum()
    };
    let (suu, svv, suv) = (cov(u, mu, u, mu), cov(v, mv, v, mv), cov(u, mu, v, mv));
    let (suy, svy) = (cov(u, mu, y, my), cov(v, mv, y, my));
    let det = suu * svv - suv * suv;
    let c1 = (suy * svv - svy * suv) / det;
    let c2 = (svy * suu - suy * suv) / det;
    (my - c1 * mu - c2 * mv, c1, c2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitWindow {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Default for FitWindow {
    fn default() -> Self {
        Self {
            x: (3.0, 8.0),
            y: (3.0, 8.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Freely fitted power of `|y|` in front of `e^{-sigma |y|^{2/3}}`.
    pub prefactor_exponent: f64,
    pub fit_window: FitWindow,
    /// `(x fit, y fit)`.
    pub r_squared: (f64, f64),
    /// `r^2` of regressing the same y-data on `|y|` instead of `|y|^{2/3}`.
    pub r_squared_y_exponential: f64,
    pub samples: (usize, usize),
}

/// Usable samples: inside the window, above the noise floor and in the
/// asymptotic regime below `1e-2 max |u|`.
fn samples(coords: &[f64], values: &[f64], window: (f64, f64), peak: f64) -> Vec<(f64, f64)> {
    coords
        .iter()
        .zip(values)
        .filter(|(c, v)| {
            let a = c.abs();
            a >= window.0 && a <= window.1 && **v > 1e-12 && **v < 1e-2 * peak
        })
        .map(|(c, v)| (c.abs(), *v))
        .collect()
}

pub fn decay_fit(result: &GroundStateResult) -> Result<DecayFit> {
    decay_fit_window(result, FitWindow::default())
}

/// Fit `log|u(x,0)| ~ -sigma_x |x|` and
/// `log|u(0,y)| + log|y|/3 ~ -sigma_y |y|^{2/3}` through the profile's peak.
pub fn decay_fit_window(result: &GroundStateResult, window: FitWindow) -> Result<DecayFit> {
    let u = &result.profile;
    let grid = *u.grid();
    let (j0, m0) = u.argmax_abs();
    let peak = u.max_abs();
    let (x0, y0) = (grid.x(j0), grid.y(m0));
    let xs: Vec<f64> = (0..grid.nx()).map(|j| grid.x(j) - x0).collect();
    let ys: Vec<f64> = (0..grid.ny()).map(|m| grid.y(m) - y0).collect();
    let along_x: Vec<f64> = (0..grid.nx()).map(|j| u.at(j, m0).norm()).collect();
    let along_y: Vec<f64> = (0..grid.ny()).map(|m| u.at(j0, m).norm()).collect();
    let sx = samples(&xs, &along_x, window.x, peak);
    let sy = samples(&ys, &along_y, window.y, peak);
    for (name, s) in [("x", &sx), ("y", &sy)] {
        if s.len() < 10 {
            return Err(Error::InsufficientData(format!(
                "{name} fit window has {} usable samples, need 10",
                s.len()
            )));
        }
    }
    let (ax, lx): (Vec<f64>, Vec<f64>) = sx.iter().map(|(a, v)| (*a, v.ln())).unzip();
    let (slope_x, _, r2x) = linear_fit(&ax, &lx);
    let ay: Vec<f64> = sy.iter().map(|s| s.0).collect();
    let ay23: Vec<f64> = ay.iter().map(|a| a.powf(2.0 / 3.0)).collect();
    let dep: Vec<f64> = sy.iter().map(|(a, v)| v.ln() + a.ln() / 3.0).collect();
    let (slope_y, _, r2y) = linear_fit(&ay23, &dep);
    let (_, _, r2exp) = linear_fit(&ay, &dep);
    let logu: Vec<f64> = sy.iter().map(|(_, v)| v.ln()).collect();
    let logy: Vec<f64> = ay.iter().map(|a| a.ln()).collect();
    let (_, beta, _) = two_regressor_fit(&logy, &ay23, &logu);
    Ok(DecayFit {
        sigma_x: -slope_x,
        sigma_y: -slope_y,
        prefactor_exponent: beta,
        fit_window: window,
        r_squared: (r2x, r2y),
        r_squared_y_exponential: r2exp,
        samples: (sx.len(), sy.len()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBoundFit {
    /// `log C1`.
    pub log_c1: f64,
    pub c2: f64,
    pub r_squared: f64,
}

/// Fit `log|K| + log|y|/3 = log C1 - C2 (|x| + |y|^{2/3})` on the ray
/// `x = y = r` for the given radii.
pub fn kernel_ray_fit(radii: &[f64], quad_tol: f64) -> Result<KernelBoundFit> {
    let mut u = Vec::new();
    let mut v = Vec::new();
    for &r in radii {
        let k = kernel_eval(r, r, quad_tol)?;
        if k == 0.0 {
            continue;
        }
        u.push(r.abs() + r.abs().powf(2.0 / 3.0));
        v.push(k.abs().ln() + r.abs().ln() / 3.0);
    }
    if u.len() < 3 {
        return Err(Error::InsufficientData(
            "kernel ray fit needs at least 3 nonzero samples".into(),
        ));
    }
    let (slope, intercept, r2) = linear_fit(&u, &v);
    Ok(KernelBoundFit {
        log_c1: intercept,
        c2: -slope,
        r_squared: r2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H2EnvelopeFit {
    pub c1: f64,
    /// Max over min of `|H2(z,1)| z^{1/3} e^{c1 z^{4/3}}` at envelope points.
    pub spread: f64,
    pub max_scaled: f64,
}

/// Values below this are at the round-off floor of the tabulation.
pub const H2_NOISE_FLOOR: f64 = 1e-13;

/// Fit `c1` in `|H2(z,1)| ~ z^{-1/3} e^{-c1 z^{4/3}}` through the local
/// maxima of `|H2|` on `[z0, z1]` that lie above the round-off floor.
pub fn h2_envelope_fit(z0: f64, z1: f64) -> Result<H2EnvelopeFit> {
    let n = ((z1 - z0) / H2_TABLE_STEP).round() as usize;
    let vals: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let z = z0 + i as f64 * H2_TABLE_STEP;
            (z, h2_unit(z).abs())
        })
        .collect();
    let peaks: Vec<(f64, f64)> = vals
        .windows(3)
        .filter(|w| w[1].1 >= w[0].1 && w[1].1 >= w[2].1 && w[1].1 > H2_NOISE_FLOOR)
        .map(|w| w[1])
        .collect();
    if peaks.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} envelope maxima on [{z0}, {z1}]",
            peaks.len()
        )));
    }
    let u: Vec<f64> = peaks.iter().map(|p| p.0.powf(4.0 / 3.0)).collect();
    let v: Vec<f64> = peaks.iter().map(|p| p.1.ln() + p.0.ln() / 3.0).collect();
    let (slope, _, _) = linear_fit(&u, &v);
    let c1 = -slope;
    let scaled: Vec<f64> = vals
        .iter()
        .filter(|(_, h)| *h > H2_NOISE_FLOOR)
        .map(|(z, h)| h * z.powf(1.0 / 3.0) * (c1 * z.powf(4.0 / 3.0)).exp())
        .collect();
    let max_scaled = scaled.iter().copied().fold(0.0, f64::max);
    let at_peaks: Vec<f64> = peaks
        .iter()
        .map(|(z, h)| h * z.powf(1.0 / 3.0) * (c1 * z.powf(4.0 / 3.0)).exp())
        .collect();
    let lo = at_peaks.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = at_peaks.iter().copied().fold(0.0, f64::max);
    Ok(H2EnvelopeFit {
        c1,
        spread: hi / lo,
        max_scaled,
    })
}
