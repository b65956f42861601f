//! Browser front end for three interactive operations: solving for a ground
//! state, stepping the split-step evolution, and sampling the kernel of
//! `(1 - d_xx + d_yyyy)^(-1)`.
//!
//! The plain-Rust types (`GroundStateView`, `Simulation`, `KernelView`) carry
//! the logic and are usable natively; the `#[wasm_bindgen]` exports wrap them.

use anls::evolution::{self, DiagnosticsRecord, EvolveConfig};
use anls::ground_state::{self, SolverOptions};
use anls::{kernel, spectral, Error, Field, Grid2D, ModelParams};
use wasm_bindgen::prelude::*;

/// Largest grid side offered in the browser.
pub const MAX_SIDE: usize = 256;

fn square_grid(n: usize, half_width: f64) -> Result<Grid2D, Error> {
    if n > MAX_SIDE {
        return Err(Error::InvalidGrid(format!("n = {n} exceeds the demo limit {MAX_SIDE}")));
    }
    Grid2D::square(n, half_width)
}

/// Ground state `u_omega` of `-u_xx + u_yyyy + omega u = |u|^(p-2) u`.
#[wasm_bindgen]
pub struct GroundStateView {
    n: usize,
    density: Vec<f64>,
    p: f64,
    residual: f64,
    iterations: usize,
    m_omega: f64,
    mass: f64,
    c_opt: f64,
    c_star: f64,
}

impl GroundStateView {
    pub fn solve(p: f64, n: usize, half_width: f64) -> Result<Self, Error> {
        let grid = square_grid(n, half_width)?;
        let params = ModelParams::new(p, 1.0)?;
        let opts = SolverOptions {
            max_iter: 2000,
            ..SolverOptions::default()
        };
        let r = ground_state::petviashvili_solve(&params, &grid, &ground_state::default_seed(grid), &opts)?;
        let gn = ground_state::gn_constant_from_ground_state(&r);
        Ok(Self {
            n,
            density: r.profile.abs(),
            p,
            residual: r.residual_l2,
            iterations: r.iterations,
            m_omega: r.m_omega,
            mass: r.norms.mass,
            c_opt: gn.c_opt,
            c_star: gn.c_star,
        })
    }
}

#[wasm_bindgen]
impl GroundStateView {
    #[wasm_bindgen(constructor)]
    pub fn new(p: f64, n: usize, half_width: f64) -> Result<GroundStateView, JsError> {
        Self::solve(p, n, half_width).map_err(|e| JsError::new(&e.to_string()))
    }

    /// Grid side; `density` is `n * n` values, row-major with x as the slow axis.
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    /// `|u|` on the grid.
    pub fn density(&self) -> Vec<f64> {
        self.density.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn m_omega(&self) -> f64 {
        self.m_omega
    }

    #[wasm_bindgen(getter)]
    pub fn mass(&self) -> f64 {
        self.mass
    }

    #[wasm_bindgen(getter)]
    pub fn c_opt(&self) -> f64 {
        self.c_opt
    }

    #[wasm_bindgen(getter)]
    pub fn c_star(&self) -> f64 {
        self.c_star
    }
}

/// Gaussian data `A exp(-x^2 - y^2)` advanced by Strang splitting on demand.
/// The run stops as `blowup` when the field becomes non-finite or when its
/// spectrum spills past the resolved band, the same test `evolve` uses.
#[wasm_bindgen]
pub struct Simulation {
    params: ModelParams,
    psi: Field,
    dt: f64,
    t: f64,
    /// Spectral tail fraction beyond which the run is reported as collapsing.
    tail_limit: f64,
    status: &'static str,
    last: DiagnosticsRecord,
}

impl Simulation {
    pub fn start(p: f64, amplitude: f64, n: usize, half_width: f64, dt: f64) -> Result<Self, Error> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        let grid = square_grid(n, half_width)?;
        let params = ModelParams::new(p, 1.0)?;
        let psi = Field::gaussian(grid, amplitude, 1.0, 1.0);
        let last = DiagnosticsRecord::evaluate(0.0, &psi, p)?;
        let threshold = EvolveConfig::default().resolution_tail_threshold.unwrap_or(1e-6);
        let tail_limit = threshold.max(100.0 * spectral::tail_power_fraction(&grid, &spectral::forward(&psi)));
        Ok(Self {
            params,
            psi,
            dt,
            t: 0.0,
            tail_limit,
            status: "running",
            last,
        })
    }

    /// Advance `steps` steps unless the run has already stopped.
    pub fn advance(&mut self, steps: usize) -> Result<(), Error> {
        if self.status != "running" {
            return Ok(());
        }
        for _ in 0..steps {
            match evolution::step_strang(&self.psi, self.dt, &self.params) {
                Ok(next) => self.psi = next,
                Err(Error::NonFinite { .. }) => {
                    self.status = "blowup";
                    return Ok(());
                }
                Err(e) => return Err(e),
            }
            self.t += self.dt;
        }
        self.last = DiagnosticsRecord::evaluate(self.t, &self.psi, self.params.p())?;
        if spectral::tail_power_fraction(self.psi.grid(), &spectral::forward(&self.psi)) > self.tail_limit {
            self.status = "blowup";
        }
        Ok(())
    }

    pub fn record(&self) -> &DiagnosticsRecord {
        &self.last
    }
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    pub fn new(p: f64, amplitude: f64, n: usize, half_width: f64, dt: f64) -> Result<Simulation, JsError> {
        Self::start(p, amplitude, n, half_width, dt).map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn step(&mut self, steps: usize) -> Result<(), JsError> {
        self.advance(steps).map_err(|e| JsError::new(&e.to_string()))
    }

    /// `running` or `blowup`.
    #[wasm_bindgen(getter)]
    pub fn status(&self) -> String {
        self.status.to_string()
    }

    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.psi.grid().nx()
    }

    #[wasm_bindgen(getter)]
    pub fn time(&self) -> f64 {
        self.t
    }

    #[wasm_bindgen(getter)]
    pub fn mass(&self) -> f64 {
        self.last.mass
    }

    #[wasm_bindgen(getter)]
    pub fn energy(&self) -> f64 {
        self.last.energy
    }

    #[wasm_bindgen(getter)]
    pub fn h12(&self) -> f64 {
        self.last.h12_norm
    }

    #[wasm_bindgen(getter)]
    pub fn virial(&self) -> f64 {
        self.last.virial
    }

    /// `|psi|` on the grid, row-major with x as the slow axis.
    pub fn density(&self) -> Vec<f64> {
        self.psi.abs()
    }
}

/// Cross-sections `K(x, 0)` and `K(0, y)` on `x, y = extent * i / samples`, `i = 1..=samples`.
#[wasm_bindgen]
pub struct KernelView {
    coords: Vec<f64>,
    along_x: Vec<f64>,
    along_y: Vec<f64>,
}

impl KernelView {
    pub fn sample(extent: f64, samples: usize, quad_tol: f64) -> Result<Self, Error> {
        if !(extent.is_finite() && extent > 0.0) || samples == 0 || samples > 400 {
            return Err(Error::InvalidArgument(format!(
                "need extent > 0 and 1 <= samples <= 400, got {extent} and {samples}"
            )));
        }
        let coords: Vec<f64> = (1..=samples).map(|i| extent * i as f64 / samples as f64).collect();
        let along_x = coords
            .iter()
            .map(|&x| kernel::kernel_eval(x, 0.0, quad_tol))
            .collect::<Result<_, _>>()?;
        let along_y = coords
            .iter()
            .map(|&y| kernel::kernel_eval(0.0, y, quad_tol))
            .collect::<Result<_, _>>()?;
        Ok(Self { coords, along_x, along_y })
    }

    pub fn along_x_values(&self) -> &[f64] {
        &self.along_x
    }

    pub fn along_y_values(&self) -> &[f64] {
        &self.along_y
    }
}

#[wasm_bindgen]
impl KernelView {
    #[wasm_bindgen(constructor)]
    pub fn new(extent: f64, samples: usize, quad_tol: f64) -> Result<KernelView, JsError> {
        Self::sample(extent, samples, quad_tol).map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn coords(&self) -> Vec<f64> {
        self.coords.clone()
    }

    pub fn along_x(&self) -> Vec<f64> {
        self.along_x.clone()
    }

    pub fn along_y(&self) -> Vec<f64> {
        self.along_y.clone()
    }
}
