//! Split-step Fourier integration of `i psi_t + psi_xx - psi_yyyy + |psi|^(p-2) psi = 0`
//! with conserved-quantity monitoring, blowup detection and the virial,
//! sign-invariance and orbital-stability probes built on top of it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{default_boundary_band, Field};
use crate::functionals::{self, abs_pow, Norms};
use crate::ground_state::GroundStateResult;
use crate::grid::Grid2D;
use crate::params::ModelParams;
use crate::spectral::{self, Fft2};

/// Initial boundary mass fraction above which `evolve` refuses to start.
pub const INITIAL_BOUNDARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Splitting {
    Lie,
    Strang,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_max: f64,
    pub splitting: Splitting,
    /// Steps between diagnostics records.
    pub diag_stride: usize,
    /// Blowup when `||psi||_{H^{1,2}}` exceeds this multiple of its initial value.
    pub blowup_h12_factor: f64,
    pub dt_floor: f64,
    /// A step is retried at half the step size when `max |psi|` changes by
    /// more than this fraction.
    pub max_amplitude_change: f64,
    /// 2/3-rule filter after every nonlinear substep; `None` picks the
    /// default for the exponent.
    pub dealias: Option<bool>,
    /// Optional extra blowup signal: spectral power outside the central
    /// half band exceeding this fraction (and 100 times its initial value).
    pub resolution_tail_threshold: Option<f64>,
    pub contamination_threshold: f64,
    pub stop_on_contamination: bool,
    /// Coefficient in front of the nonlinearity; 1 for the physical model.
    pub nonlinearity: f64,
    /// Times at which the field is captured for snapshot output.
    pub snapshot_times: Vec<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_max: 1.0,
            splitting: Splitting::Strang,
            diag_stride: 10,
            blowup_h12_factor: 1e4,
            dt_floor: 1e-12,
            max_amplitude_change: 0.1,
            dealias: None,
            resolution_tail_threshold: Some(1e-6),
            contamination_threshold: 1e-6,
            stop_on_contamination: false,
            nonlinearity: 1.0,
            snapshot_times: Vec::new(),
        }
    }
}

impl EvolveConfig {
    pub fn new(dt: f64, t_max: f64) -> Self {
        Self {
            dt,
            t_max,
            ..Self::default()
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.diag_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_max.is_finite() && self.t_max > self.dt) {
            return bad(format!("t_max = {} must exceed dt = {}", self.t_max, self.dt));
        }
        if self.diag_stride == 0 {
            return bad("diag_stride must be positive".into());
        }
        if !(self.blowup_h12_factor > 1.0) {
            return bad(format!(
                "blowup_h12_factor = {} must exceed 1",
                self.blowup_h12_factor
            ));
        }
        if !(self.dt_floor > 0.0 && self.dt_floor < self.dt) {
            return bad(format!("dt_floor = {} must lie in (0, dt)", self.dt_floor));
        }
        if !(self.max_amplitude_change > 0.0) {
            return bad("max_amplitude_change must be positive".into());
        }
        if !self.nonlinearity.is_finite() {
            return bad("nonlinearity coefficient must be finite".into());
        }
        Ok(())
    }
}

/// Diagnostics at one time. The first eight fields are the CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub q: f64,
    pub k: f64,
    pub virial: f64,
    pub h12_norm: f64,
    pub boundary_mass_fraction: f64,
    pub dx_sq: f64,
    pub dyy_sq: f64,
    pub lp: f64,
    /// `4 Im int x conj(psi) d_x psi`.
    pub virial_rate: f64,
}

impl DiagnosticsRecord {
    pub fn evaluate(t: f64, f: &Field, p: f64) -> Result<Self> {
        let n = Norms::of(f, p);
        Ok(Self {
            t,
            mass: n.mass,
            energy: n.energy(),
            q: n.q(),
            k: n.k(),
            virial: functionals::transverse_virial(f).value,
            h12_norm: n.h12(),
            boundary_mass_fraction: f.boundary_mass_fraction(default_boundary_band(f.grid().nx().min(f.grid().ny()))),
            dx_sq: n.dx_sq,
            dyy_sq: n.dyy_sq,
            lp: n.lp,
            virial_rate: functionals::virial_rate(f)?,
        })
    }

    pub fn norms(&self, p: f64) -> Norms {
        Norms {
            dx_sq: self.dx_sq,
            dyy_sq: self.dyy_sq,
            mass: self.mass,
            lp: self.lp,
            p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Completed,
    BlowupDetected,
    BoundaryContaminated,
    StepFloorReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupSignal {
    H12Growth,
    StepFloor,
    ResolutionLoss,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct TrajectoryOutcome {
    pub status: OutcomeStatus,
    pub t_final: f64,
    pub records: Vec<DiagnosticsRecord>,
    pub blowup_signal: Option<BlowupSignal>,
    /// First diagnostic time at which the boundary threshold was exceeded.
    pub contamination_time: Option<f64>,
    pub steps: usize,
    pub final_dt: f64,
    pub final_field: Field,
    pub snapshots: Vec<(f64, Field)>,
}

/// One-step integrator with precomputed multipliers for a fixed step size.
struct Stepper {
    grid: Grid2D,
    plan: std::sync::Arc<Fft2>,
    p: f64,
    coupling: f64,
    splitting: Splitting,
    dt: f64,
    /// `exp(-i dt/2 w)` for Strang, `exp(-i dt w)` for Lie.
    first: Vec<Complex64>,
    /// Trailing linear factor, including the dealiasing mask.
    last: Vec<Complex64>,
    spectrum: Vec<Complex64>,
}

impl Stepper {
    fn new(grid: Grid2D, p: f64, coupling: f64, splitting: Splitting, dealias: bool, dt: f64) -> Self {
        let mut s = Self {
            grid,
            plan: spectral::plan(&grid),
            p,
            coupling,
            splitting,
            dt,
            first: Vec::new(),
            last: Vec::new(),
            spectrum: Vec::new(),
        };
        s.set_dt(dt, dealias);
        s
    }

    fn set_dt(&mut self, dt: f64, dealias: bool) {
        self.dt = dt;
        let mask = if dealias {
            spectral::two_thirds_mask(&self.grid)
        } else {
            vec![1.0; self.grid.len()]
        };
        let (first, last) = match self.splitting {
            Splitting::Strang => (
                spectral::propagator(&self.grid, 0.5 * dt),
                spectral::propagator(&self.grid, 0.5 * dt),
            ),
            Splitting::Lie => (Vec::new(), spectral::propagator(&self.grid, dt)),
        };
        self.first = first;
        self.last = last.iter().zip(&mask).map(|(e, m)| e * m).collect();
    }

    fn nonlinear(&self, data: &mut [Complex64]) {
        let g = self.coupling * self.dt;
        if g == 0.0 {
            return;
        }
        let q = self.p - 2.0;
        for z in data.iter_mut() {
            let a = abs_pow(*z, q);
            *z *= Complex64::from_polar(1.0, g * a);
        }
    }

    /// Advance `data` in place; leaves the final spectrum in `self.spectrum`.
    fn step(&mut self, data: &mut [Complex64]) {
        if self.splitting == Splitting::Strang {
            self.plan.forward(data);
            for (z, e) in data.iter_mut().zip(&self.first) {
                *z *= e;
            }
            self.plan.inverse(data);
        }
        self.nonlinear(data);
        self.plan.forward(data);
        for (z, e) in data.iter_mut().zip(&self.last) {
            *z *= e;
        }
        self.spectrum.clear();
        self.spectrum.extend_from_slice(data);
        self.plan.inverse(data);
    }
}

fn dealias_for(config: &EvolveConfig, params: &ModelParams) -> bool {
    config.dealias.unwrap_or_else(|| params.dealias_by_default())
}

/// One Strang step: half free flow, exact nonlinear phase rotation
/// `psi -> psi exp(i dt |psi|^(p-2))`, half free flow.
pub fn step_strang(psi: &Field, dt: f64, params: &ModelParams) -> Result<Field> {
    step_with(psi, dt, params, Splitting::Strang, params.dealias_by_default(), 1.0)
}

/// One Lie step: nonlinear rotation followed by a full free flow.
pub fn step_lie(psi: &Field, dt: f64, params: &ModelParams) -> Result<Field> {
    step_with(psi, dt, params, Splitting::Lie, params.dealias_by_default(), 1.0)
}

/// Single step with explicit splitting, filtering and nonlinearity coefficient.
pub fn step_with(
    psi: &Field,
    dt: f64,
    params: &ModelParams,
    splitting: Splitting,
    dealias: bool,
    coupling: f64,
) -> Result<Field> {
    psi.check_finite("step input")?;
    let mut st = Stepper::new(*psi.grid(), params.p(), coupling, splitting, dealias, dt);
    let mut data = psi.data().to_vec();
    st.step(&mut data);
    let mut out = Field::from_vec(*psi.grid(), data)?;
    if !out.is_finite() {
        out.mark_post_blowup();
        return Err(Error::NonFinite {
            context: "step output (numerical blowup)",
        });
    }
    Ok(out)
}

pub fn evolve(psi0: &Field, config: &EvolveConfig, params: &ModelParams) -> Result<TrajectoryOutcome> {
    evolve_observed(psi0, config, params, |_, _| {})
}

/// `evolve`, calling `observer` with every diagnostics record and the field
/// it was computed from.
pub fn evolve_observed(
    psi0: &Field,
    config: &EvolveConfig,
    params: &ModelParams,
    mut observer: impl FnMut(&DiagnosticsRecord, &Field),
) -> Result<TrajectoryOutcome> {
    config.validate()?;
    psi0.check_finite("initial datum")?;
    let grid = *psi0.grid();
    let band = default_boundary_band(grid.nx().min(grid.ny()));
    let b0 = psi0.boundary_mass_fraction(band);
    if b0 >= INITIAL_BOUNDARY_TOL {
        return Err(Error::Precondition(format!(
            "initial boundary mass fraction {b0:.3e} is not below {INITIAL_BOUNDARY_TOL:e}"
        )));
    }
    let p = params.p();
    let dealias = dealias_for(config, params);
    let mut st = Stepper::new(grid, p, config.nonlinearity, config.splitting, dealias, config.dt);

    let first = DiagnosticsRecord::evaluate(0.0, psi0, p)?;
    observer(&first, psi0);
    let h12_0 = first.h12_norm;
    let tail_0 = match config.resolution_tail_threshold {
        Some(_) => spectral::tail_power_fraction(&grid, &spectral::forward(psi0)),
        None => 0.0,
    };
    let tail_limit = config
        .resolution_tail_threshold
        .map(|thr| thr.max(100.0 * tail_0));
    let mut records = vec![first];

    let mut snapshot_times: Vec<f64> = config
        .snapshot_times
        .iter()
        .copied()
        .filter(|t| *t >= 0.0 && *t <= config.t_max)
        .collect();
    snapshot_times.sort_by(f64::total_cmp);
    let mut snapshots = Vec::new();
    let mut next_snap = 0;
    while next_snap < snapshot_times.len() && snapshot_times[next_snap] <= 0.0 {
        snapshots.push((0.0, psi0.clone()));
        next_snap += 1;
    }

    let mut psi = psi0.data().to_vec();
    let mut trial = psi.clone();
    let mut amp = psi0.max_abs();
    let mut t = 0.0;
    // t = anchor + k dt between step-size changes, so times do not accumulate rounding
    let mut anchor = 0.0;
    let mut k = 0u64;
    let mut steps = 0usize;
    let mut dt = config.dt;
    let mut contamination_time = None;
    let mut blowup: Option<BlowupSignal> = None;
    let eps = 1e-12 * config.t_max;
    let cell = grid.cell_area();
    let inv_n = 1.0 / grid.len() as f64;

    while t < config.t_max - eps {
        // land exactly on t_max and on requested snapshot times
        let mut target = config.t_max;
        if next_snap < snapshot_times.len() {
            target = target.min(snapshot_times[next_snap]);
        }
        let landing = target - t <= dt * (1.0 + 1e-9);
        let h = if landing { target - t } else { dt };
        if (st.dt - h).abs() > 1e-15 * h {
            st.set_dt(h, dealias);
        }
        trial.copy_from_slice(&psi);
        st.step(&mut trial);

        let finite = trial.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            blowup = Some(BlowupSignal::NonFinite);
            psi.copy_from_slice(&trial);
            t += h;
            break;
        }
        let new_amp = trial.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if amp > 0.0 && (new_amp - amp).abs() > config.max_amplitude_change * amp {
            dt = 0.5 * h;
            anchor = t;
            k = 0;
            if dt < config.dt_floor {
                blowup = Some(BlowupSignal::StepFloor);
                break;
            }
            continue;
        }
        std::mem::swap(&mut psi, &mut trial);
        amp = new_amp;
        if landing {
            t = target;
            anchor = t;
            k = 0;
        } else {
            k += 1;
            t = anchor + k as f64 * dt;
        }
        steps += 1;

        let (ax, byy) = spectral::derivative_norms_sq_from_spectrum(&grid, &st.spectrum);
        let mass = st.spectrum.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell * inv_n;
        let h12 = ax.sqrt() + byy.sqrt() + mass.sqrt();
        if h12_0 > 0.0 && h12 > config.blowup_h12_factor * h12_0 {
            blowup = Some(BlowupSignal::H12Growth);
        } else if tail_limit.is_some_and(|lim| spectral::tail_power_fraction(&grid, &st.spectrum) > lim) {
            blowup = Some(BlowupSignal::ResolutionLoss);
        }

        let at_snapshot = next_snap < snapshot_times.len() && (t - snapshot_times[next_snap]).abs() <= eps;
        let done = t >= config.t_max - eps;
        if steps % config.diag_stride == 0 || done || blowup.is_some() {
            let field = Field::from_vec(grid, psi.clone())?;
            let rec = DiagnosticsRecord::evaluate(t, &field, p)?;
            observer(&rec, &field);
            if rec.boundary_mass_fraction > config.contamination_threshold && contamination_time.is_none() {
                contamination_time = Some(t);
            }
            records.push(rec);
            if contamination_time.is_some() && config.stop_on_contamination {
                break;
            }
        }
        if at_snapshot {
            snapshots.push((t, Field::from_vec(grid, psi.clone())?));
            next_snap += 1;
        }
        if blowup.is_some() {
            break;
        }
    }

    let mut final_field = Field::from_vec(grid, psi)?;
    let status = match blowup {
        Some(BlowupSignal::StepFloor) => {
            let last = records.last().map(|r| r.h12_norm).unwrap_or(h12_0);
            if last >= 2.0 * h12_0 {
                OutcomeStatus::BlowupDetected
            } else {
                OutcomeStatus::StepFloorReached
            }
        }
        Some(BlowupSignal::NonFinite) => {
            final_field.mark_post_blowup();
            OutcomeStatus::BlowupDetected
        }
        Some(_) => OutcomeStatus::BlowupDetected,
        None if contamination_time.is_some() => OutcomeStatus::BoundaryContaminated,
        None => OutcomeStatus::Completed,
    };
    Ok(TrajectoryOutcome {
        status,
        t_final: t,
        records,
        blowup_signal: blowup,
        contamination_time,
        steps,
        final_dt: dt,
        final_field,
        snapshots,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirialReport {
    /// `max |D2 V - (8 A - 4(p-2)/p P)|`, divided by `max |8 A - 4(p-2)/p P|`.
    pub max_rel_discrepancy: f64,
    pub max_abs_discrepancy: f64,
    /// Centered first difference of V against `4 Im int x conj(psi) d_x psi`,
    /// relative to the largest rate magnitude.
    pub first_derivative_rel: f64,
    pub first_derivative_abs: f64,
    pub spacing: f64,
    pub times: Vec<f64>,
    pub second_difference: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// Compare the transverse virial law against the recorded trajectory.
/// Records must be uniformly spaced in time.
pub fn virial_check(records: &[DiagnosticsRecord], params: &ModelParams) -> Result<VirialReport> {
    if records.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "virial check needs at least 3 records, got {}",
            records.len()
        )));
    }
    let h = records[1].t - records[0].t;
    for w in records.windows(2) {
        if ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.abs().max(1e-300) {
            return Err(Error::InsufficientData(
                "records are not uniformly spaced in time".into(),
            ));
        }
    }
    let p = params.p();
    let mut times = Vec::new();
    let mut d2 = Vec::new();
    let mut pred = Vec::new();
    let mut d1_err: f64 = 0.0;
    let mut rate_scale: f64 = 0.0;
    for w in records.windows(3) {
        times.push(w[1].t);
        d2.push((w[2].virial - 2.0 * w[1].virial + w[0].virial) / (h * h));
        pred.push(w[1].norms(p).virial_acceleration());
        let d1 = (w[2].virial - w[0].virial) / (2.0 * h);
        d1_err = d1_err.max((d1 - w[1].virial_rate).abs());
        rate_scale = rate_scale.max(w[1].virial_rate.abs());
    }
    let max_abs = d2
        .iter()
        .zip(&pred)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = pred.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(VirialReport {
        max_rel_discrepancy: if scale > 0.0 { max_abs / scale } else { max_abs },
        max_abs_discrepancy: max_abs,
        first_derivative_rel: if rate_scale > 0.0 { d1_err / rate_scale } else { d1_err },
        first_derivative_abs: d1_err,
        spacing: h,
        times,
        second_difference: d2,
        predicted: pred,
    })
}

/// Second differences of `V` on possibly non-uniform record times, paired
/// with the record time they are centered on.
pub fn virial_second_differences(records: &[DiagnosticsRecord]) -> Vec<(f64, f64)> {
    records
        .windows(3)
        .filter_map(|w| {
            let h1 = w[1].t - w[0].t;
            let h2 = w[2].t - w[1].t;
            if h1 <= 0.0 || h2 <= 0.0 {
                return None;
            }
            let d = 2.0 * ((w[2].virial - w[1].virial) / h2 - (w[1].virial - w[0].virial) / h1) / (h1 + h2);
            Some((w[1].t, d))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// `J_omega < m_omega` and `Q > 0`.
    InG,
    /// `J_omega < m_omega`, `Q < 0` and `K > 0`.
    InB,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub membership: Membership,
    pub j_omega: f64,
    pub q: f64,
    pub k: f64,
    pub m_omega: f64,
}

pub fn classify_initial_datum(psi0: &Field, params: &ModelParams, m_omega: f64) -> Classification {
    let n = Norms::of(psi0, params.p());
    let j = n.j_omega(params.omega());
    let (q, k) = (n.q(), n.k());
    let membership = if j < m_omega && q > 0.0 {
        Membership::InG
    } else if j < m_omega && q < 0.0 && k > 0.0 {
        Membership::InB
    } else {
        Membership::Neither
    };
    Classification {
        membership,
        j_omega: j,
        q,
        k,
        m_omega,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignProbeReport {
    pub initial_sign: f64,
    pub sign_preserved: bool,
    /// Set when boundary contamination cut the probe short.
    pub inconclusive: bool,
    pub status: OutcomeStatus,
    pub t_final: f64,
    pub q_trace: Vec<(f64, f64)>,
}

/// Evolve data with `Q != 0` and `J_omega < m_omega` and check that the sign
/// of `Q` never changes along the flow.
pub fn sign_invariance_probe(
    psi0: &Field,
    params: &ModelParams,
    m_omega: f64,
    config: &EvolveConfig,
) -> Result<SignProbeReport> {
    let n = Norms::of(psi0, params.p());
    let q0 = n.q();
    if q0.abs() <= 1e-6 * n.lp {
        return Err(Error::Precondition(format!(
            "Q(psi0) = {q0:e} is zero to tolerance"
        )));
    }
    let j = n.j_omega(params.omega());
    if j >= m_omega {
        return Err(Error::Precondition(format!(
            "J_omega(psi0) = {j} is not below m_omega = {m_omega}"
        )));
    }
    let mut cfg = config.clone();
    cfg.stop_on_contamination = true;
    let out = evolve(psi0, &cfg, params)?;
    let sign = q0.signum();
    let q_trace: Vec<(f64, f64)> = out.records.iter().map(|r| (r.t, r.q)).collect();
    let sign_preserved = q_trace.iter().all(|(_, q)| q.signum() == sign);
    Ok(SignProbeReport {
        initial_sign: sign,
        sign_preserved,
        inconclusive: out.contamination_time.is_some(),
        status: out.status,
        t_final: out.t_final,
        q_trace,
    })
}

/// Complex noise built from the lowest `modes x modes` Fourier modes,
/// scaled to unit maximum modulus.
pub fn band_limited_noise(grid: &Grid2D, modes: usize, rng: &mut impl Rng) -> Field {
    let (nx, ny) = (grid.nx(), grid.ny());
    let half = (modes / 2) as i64;
    let mut s = vec![Complex64::new(0.0, 0.0); grid.len()];
    for a in -half..half {
        for b in -half..half {
            let j = a.rem_euclid(nx as i64) as usize;
            let m = b.rem_euclid(ny as i64) as usize;
            s[j * ny + m] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    let f = spectral::inverse(*grid, s);
    let peak = f.max_abs();
    if peak == 0.0 {
        f
    } else {
        f.scaled(Complex64::new(1.0 / peak, 0.0))
    }
}

/// Distance from `psi` to the orbit `{e^{i theta} u(. - xi)}` in the
/// `H^{1,2}` norm. The shift maximizes the modulus of the cross-correlation;
/// the phase aligns the inner product at that shift.
pub fn orbit_distance(psi: &Field, u: &Field) -> Result<f64> {
    psi.same_grid(u)?;
    let grid = *psi.grid();
    let a = spectral::forward(psi);
    let b = spectral::forward(u);
    let corr: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y.conj()).collect();
    let c = spectral::inverse(grid, corr);
    let (dj, dm) = c.argmax_abs();
    let z = c.at(dj, dm);
    let phase = if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) };
    let aligned = u.shifted(dj as isize, dm as isize).scaled(phase);
    Ok(functionals::h12_norm(&psi.sub(&aligned)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitalProbeConfig {
    pub delta: f64,
    /// Data is `scale_lambda(u_omega, tau) (1 + delta noise)`.
    pub tau: f64,
    pub rng_seed: u64,
    /// Width of the tube used to report an escape.
    pub tube: f64,
}

impl Default for OrbitalProbeConfig {
    fn default() -> Self {
        Self {
            delta: 1e-2,
            tau: 1.0,
            rng_seed: 0,
            tube: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitalReport {
    pub sup_distance: f64,
    pub initial_distance: f64,
    pub escaped_tube: bool,
    pub status: OutcomeStatus,
    pub t_final: f64,
    /// Blowup at a mass-subcritical exponent, which global existence rules out.
    pub anomalous: bool,
    pub distances: Vec<(f64, f64)>,
}

/// Track `sup_t inf_{theta, xi} ||psi(t) - e^{i theta} u_omega(. - xi)||_{H^{1,2}}`
/// for perturbed ground-state data.
pub fn orbital_stability_probe(
    ground: &GroundStateResult,
    probe: &OrbitalProbeConfig,
    config: &EvolveConfig,
) -> Result<OrbitalReport> {
    let params = ground.params();
    let u = &ground.profile;
    let mut rng = ChaCha8Rng::seed_from_u64(probe.rng_seed);
    let base = if probe.tau == 1.0 {
        u.clone()
    } else {
        functionals::scale_lambda(u, probe.tau)?
    };
    let psi0 = if probe.delta == 0.0 {
        base
    } else {
        let noise = band_limited_noise(u.grid(), 8, &mut rng);
        let pert: Vec<Complex64> = base
            .data()
            .iter()
            .zip(noise.data())
            .map(|(b, n)| b * (1.0 + probe.delta * n))
            .collect();
        Field::from_vec(*u.grid(), pert)?
    };
    let mut distances = Vec::new();
    let mut err = None;
    let out = evolve_observed(&psi0, config, &params, |rec, f| match orbit_distance(f, u) {
        Ok(d) => distances.push((rec.t, d)),
        Err(e) => err = Some(e),
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let sup_distance = distances.iter().map(|d| d.1).fold(0.0, f64::max);
    Ok(OrbitalReport {
        sup_distance,
        initial_distance: distances.first().map(|d| d.1).unwrap_or(0.0),
        escaped_tube: sup_distance > probe.tube,
        status: out.status,
        t_final: out.t_final,
        anomalous: out.status == OutcomeStatus::BlowupDetected && params.p() < crate::params::MASS_CRITICAL_P,
        distances,
    })
}
