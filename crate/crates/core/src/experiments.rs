//! Named experiments: configuration, orchestration and on-disk artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Error;
use crate::evolution::{
    self, classify_initial_datum, DiagnosticsRecord, EvolveConfig, OrbitalProbeConfig,
    TrajectoryOutcome,
};
use crate::field::Field;
use crate::functionals::{self, Norms};
use crate::grid::Grid2D;
use crate::ground_state::{
    self, AscentOptions, GroundStateResult, SolverOptions, gn_constant_from_ground_state,
};
use crate::kernel::{self, FitWindow};
use crate::params::{ModelParams, MASS_CRITICAL_P};
use crate::snapshot;

/// Version of the artifact layout (CSV columns, JSON keys, file names).
pub const ARTIFACT_FORMAT_VERSION: u32 = 1;
/// Columns of every diagnostics CSV.
pub const DIAGNOSTICS_COLUMNS: [&str; 8] = [
    "t",
    "mass",
    "energy",
    "q",
    "k",
    "virial",
    "h12_norm",
    "boundary_mass_fraction",
];
/// Relative spread of `m_omega` across restarts above which the result is flagged.
pub const RESTART_DISCREPANCY_TOL: f64 = 1e-6;
/// Output root used when neither the flag nor the config names a directory;
/// each experiment writes to `<root>/<experiment-name>`.
pub const OUTPUT_DIR_ENV: &str = "ANLS_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "anls-output";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GroundState,
    Evolve,
    GnConstant,
    VirialCheck,
    DecayFit,
    StabilityProbe,
    InstabilityProbe,
    BlowupScan,
    SymmetryReport,
    KernelEval,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::GroundState,
        Experiment::Evolve,
        Experiment::GnConstant,
        Experiment::VirialCheck,
        Experiment::DecayFit,
        Experiment::StabilityProbe,
        Experiment::InstabilityProbe,
        Experiment::BlowupScan,
        Experiment::SymmetryReport,
        Experiment::KernelEval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GroundState => "ground-state",
            Experiment::Evolve => "evolve",
            Experiment::GnConstant => "gn-constant",
            Experiment::VirialCheck => "virial-check",
            Experiment::DecayFit => "decay-fit",
            Experiment::StabilityProbe => "stability-probe",
            Experiment::InstabilityProbe => "instability-probe",
            Experiment::BlowupScan => "blowup-scan",
            Experiment::SymmetryReport => "symmetry-report",
            Experiment::KernelEval => "kernel-eval",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, RunError> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| RunError::UnknownExperiment(name.to_string()))
    }

    /// Evolution settings used when the configuration gives none.
    pub fn default_evolve(self) -> EvolveConfig {
        let base = EvolveConfig::default();
        match self {
            Experiment::VirialCheck => EvolveConfig {
                dt: 1e-3,
                t_max: 0.5,
                diag_stride: 1,
                ..base
            },
            Experiment::StabilityProbe | Experiment::InstabilityProbe => EvolveConfig {
                dt: 1e-3,
                t_max: 10.0,
                diag_stride: 50,
                ..base
            },
            Experiment::BlowupScan => EvolveConfig {
                dt: 1e-3,
                t_max: 1.0,
                diag_stride: 20,
                ..base
            },
            _ => base,
        }
    }
}

/// Unvalidated model section; checked when the run is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub p: f64,
    pub omega: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { p: 4.0, omega: 1.0 }
    }
}

/// Unvalidated grid section; checked when the run is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nx: 256,
            ny: 256,
            lx: 40.0,
            ly: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    /// `amplitude exp(-x^2/sx^2 - y^2/sy^2)`, optionally rescaled to a given
    /// squared L2 norm or to a fraction of the threshold `c*` for this `p`.
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        sx: f64,
        #[serde(default = "one")]
        sy: f64,
        #[serde(default)]
        mass: Option<f64>,
        #[serde(default)]
        c_star_fraction: Option<f64>,
    },
    Zero,
    /// `scale_lambda(u_omega, tau)` of the ground state for the run's model.
    GroundState {
        #[serde(default = "one")]
        tau: f64,
    },
    Snapshot { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Gaussian {
            amplitude: 1.0,
            sx: 1.0,
            sy: 1.0,
            mass: None,
            c_star_fraction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub p_list: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Upper bound on concurrently evolved cells.
    pub workers: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            p_list: vec![3.0, MASS_CRITICAL_P, 6.0],
            amplitudes: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub quad_tol: f64,
    /// Largest coordinate sampled along each axis.
    pub extent: f64,
    /// Samples per axis cross-section.
    pub samples: usize,
    /// Radii on the diagonal `x = y` used for the decay-bound fit.
    pub ray: Vec<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            quad_tol: 1e-12,
            extent: 6.0,
            samples: 60,
            ray: (0..=16).map(|i| 2.0 + 0.25 * i as f64).collect(),
        }
    }
}

/// Complete description of one run. Every field has a default, so a JSON
/// file only needs the entries it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub evolve: Option<EvolveConfig>,
    pub solver: SolverOptions,
    pub output_dir: Option<PathBuf>,
    pub rng_seed: u64,
    pub initial: InitialData,
    /// Extra randomized restarts (ground-state searches, GN maximization).
    pub restarts: usize,
    pub ascent: AscentOptions,
    pub probe: OrbitalProbeConfig,
    pub scan: ScanConfig,
    pub kernel: KernelConfig,
    pub fit_window: FitWindow,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::GroundState.name().to_string(),
            model: ModelConfig::default(),
            grid: GridConfig::default(),
            evolve: None,
            solver: SolverOptions::default(),
            output_dir: None,
            rng_seed: 0,
            initial: InitialData::default(),
            restarts: 0,
            ascent: AscentOptions::default(),
            probe: OrbitalProbeConfig::default(),
            scan: ScanConfig::default(),
            kernel: KernelConfig::default(),
            fit_window: FitWindow::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
    }

    /// Validate every section and fill in defaults that depend on the
    /// experiment, the environment and nothing else.
    pub fn resolve(&self) -> Result<ResolvedRun, RunError> {
        let experiment = Experiment::from_name(&self.experiment)?;
        let grid = Grid2D::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)?;
        let model = ModelParams::new(self.model.p, self.model.omega)?;
        let mut config = self.clone();
        let evolve = config
            .evolve
            .clone()
            .unwrap_or_else(|| experiment.default_evolve());
        evolve.validate()?;
        config.evolve = Some(evolve.clone());
        let output_dir = config.output_dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUTPUT_DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
                .join(experiment.name())
        });
        config.output_dir = Some(output_dir.clone());
        if experiment == Experiment::BlowupScan
            && (config.scan.p_list.is_empty() || config.scan.amplitudes.is_empty())
        {
            return Err(RunError::Config(
                "scan.p_list and scan.amplitudes must be nonempty".into(),
            ));
        }
        Ok(ResolvedRun {
            experiment,
            grid,
            model,
            evolve,
            output_dir,
            config,
        })
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub experiment: Experiment,
    pub grid: Grid2D,
    pub model: ModelParams,
    pub evolve: EvolveConfig,
    pub output_dir: PathBuf,
    /// The configuration with every default made explicit; embedded in the manifest.
    pub config: RunConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("output directory {path} is not writable: {message}")]
    OutputDir { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 3,
            RunError::UnknownExperiment(_) => 4,
            RunError::OutputDir { .. } => 7,
            RunError::Core(e) => match e {
                Error::InvalidGrid(_) => 5,
                Error::InvalidParams(_) => 6,
                Error::InvalidArgument(_) | Error::GridMismatch => 3,
                Error::NotConverged { .. }
                | Error::SolverDiverged { .. }
                | Error::Accuracy { .. }
                | Error::NonFinite { .. } => 8,
                Error::Precondition(_)
                | Error::InsufficientData(_)
                | Error::SupportOverflow { .. }
                | Error::UndefinedRatio => 9,
                Error::Io(_) | Error::Format(_) | Error::Json(_) => 10,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "invalid_config",
            RunError::UnknownExperiment(_) => "unknown_experiment",
            RunError::OutputDir { .. } => "output_dir_unwritable",
            RunError::Core(e) => match e {
                Error::InvalidGrid(_) => "invalid_grid",
                Error::InvalidParams(_) => "invalid_params",
                Error::InvalidArgument(_) | Error::GridMismatch => "invalid_argument",
                Error::NotConverged { .. } => "not_converged",
                Error::SolverDiverged { .. } => "solver_diverged",
                Error::Accuracy { .. } => "accuracy",
                Error::NonFinite { .. } => "non_finite",
                Error::Precondition(_) => "precondition",
                Error::InsufficientData(_) => "insufficient_data",
                Error::SupportOverflow { .. } => "support_overflow",
                Error::UndefinedRatio => "undefined_ratio",
                Error::Io(_) => "io",
                Error::Format(_) => "format",
                Error::Json(_) => "json",
            },
        }
    }

    /// Machine-readable error report.
    pub fn to_json(&self) -> Value {
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
    }
}

/// Outcome of a successful run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    /// Key results, also written to the manifest.
    pub summary: Value,
    pub artifacts: Vec<String>,
}

impl RunReport {
    /// One-page human-readable summary.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment: {}", self.experiment.name());
        let _ = writeln!(s, "output_dir: {}", self.output_dir.display());
        if let Value::Object(map) = &self.summary {
            for (k, v) in map {
                let _ = writeln!(s, "{k}: {}", render_value(v));
            }
        }
        let _ = writeln!(s, "artifacts: {}", self.artifacts.join(", "));
        s
    }
}

fn render_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Artifact sink rooted at the output directory.
struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn create(dir: &Path) -> Result<Self, RunError> {
        let fail = |e: std::io::Error| RunError::OutputDir {
            path: dir.to_path_buf(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(fail)?;
        let probe = dir.join(".anls-write-probe");
        std::fs::write(&probe, b"").map_err(fail)?;
        std::fs::remove_file(&probe).map_err(fail)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), RunError> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
        text.push('\n');
        std::fs::write(path, text).map_err(Error::from)?;
        Ok(())
    }

    fn csv(&mut self, name: &str, text: String) -> Result<(), RunError> {
        let path = self.path(name);
        std::fs::write(path, text).map_err(Error::from)?;
        Ok(())
    }

    fn snapshot(&mut self, name: &str, f: &Field) -> Result<(), RunError> {
        let path = self.path(name);
        snapshot::write_snapshot(&path, f)?;
        Ok(())
    }
}

/// Float formatting for CSV: 17 significant digits, `.` separator.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text with a header row and Unix newlines.
pub struct CsvTable {
    text: String,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        let mut text = columns.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn floats(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        self.row(&cells);
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut t = CsvTable::new(&DIAGNOSTICS_COLUMNS);
    for r in records {
        t.floats(&[
            r.t,
            r.mass,
            r.energy,
            r.q,
            r.k,
            r.virial,
            r.h12_norm,
            r.boundary_mass_fraction,
        ]);
    }
    t.finish()
}

fn outcome_json(out: &TrajectoryOutcome) -> Value {
    json!({
        "status": out.status,
        "t_final": out.t_final,
        "steps": out.steps,
        "final_dt": out.final_dt,
        "blowup_signal": out.blowup_signal,
        "contamination_time": out.contamination_time,
        "records": out.records.len(),
    })
}

/// Execute a run and write its artifacts; the manifest is written last.
pub fn run(config: &RunConfig) -> Result<RunReport, RunError> {
    let resolved = config.resolve()?;
    run_resolved(&resolved)
}

pub fn run_resolved(run: &ResolvedRun) -> Result<RunReport, RunError> {
    let mut art = Artifacts::create(&run.output_dir)?;
    let summary = match run.experiment {
        Experiment::GroundState => exp_ground_state(run, &mut art)?,
        Experiment::Evolve => exp_evolve(run, &mut art)?,
        Experiment::GnConstant => exp_gn_constant(run, &mut art)?,
        Experiment::VirialCheck => exp_virial_check(run, &mut art)?,
        Experiment::DecayFit => exp_decay_fit(run, &mut art)?,
        Experiment::StabilityProbe => exp_orbital_probe(run, &mut art, false)?,
        Experiment::InstabilityProbe => exp_orbital_probe(run, &mut art, true)?,
        Experiment::BlowupScan => exp_blowup_scan(run, &mut art)?,
        Experiment::SymmetryReport => exp_symmetry_report(run, &mut art)?,
        Experiment::KernelEval => exp_kernel_eval(run, &mut art)?,
    };
    let mut artifacts = art.written.clone();
    artifacts.push("manifest.json".to_string());
    let manifest = json!({
        "format_version": ARTIFACT_FORMAT_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "experiment": run.experiment.name(),
        "rng_seed": run.config.rng_seed,
        "config": run.config,
        "summary": summary,
        "artifacts": artifacts,
    });
    art.json("manifest.json", &manifest)?;
    Ok(RunReport {
        experiment: run.experiment,
        output_dir: run.output_dir.clone(),
        summary,
        artifacts,
    })
}

fn solve_ground_state(run: &ResolvedRun, model: &ModelParams) -> Result<(GroundStateResult, f64), RunError> {
    Ok(ground_state::ground_state_with_restarts(
        model,
        &run.grid,
        &run.config.solver,
        run.config.restarts,
        run.config.rng_seed,
    )?)
}

fn ground_state_sidecar(gs: &GroundStateResult, spread: f64) -> Value {
    let n = gs.norms;
    json!({
        "summary": gs.summary(),
        "i_omega_ratio": n.i_omega(gs.omega) / n.lp,
        "q_ratio": n.q() / n.lp,
        "k_ratio": n.k() / n.lp,
        "restart_spread": spread,
        "restart_discrepancy": spread > RESTART_DISCREPANCY_TOL,
        "symmetry": ground_state::symmetry_report(gs),
    })
}

fn exp_ground_state(run: &ResolvedRun, art: &mut Artifacts) -> Result<Value, RunError> {
    let (gs, spread) = solve_ground_state(run, &run.model)?;
    art.snapshot("ground_state.anls", &gs.profile)?;
    art.json("ground_state.json", &ground_state_sidecar(&gs, spread))?;
    Ok(json!({
        "p": gs.p,
        "omega": gs.omega,
        "residual_l2": gs.residual_l2,
        "iterations": gs.iterations,
        "m_omega": gs.m_omega,
        "pohozaev_max": gs.pohozaev.max_abs(),
        "c_opt_estimate": gs.c_opt_estimate,
        "restart_discrepancy": spread > RESTART_DISCREPANCY_TOL,
    }))
}

fn initial_field(run: &ResolvedRun) -> Result<Field, RunError> {
    let grid = run.grid;
    Ok(match &run.config.initial {
        InitialData::Zero => Field::zeros(grid),
        InitialData::Gaussian {
            amplitude,
            sx,
            sy,
            mass,
            c_star_fraction,
        } => {
            let f = Field::gaussian(grid, *amplitude, *sx, *sy);
            let target = match (mass, c_star_fraction) {
                (Some(_), Some(_)) => {
                    return Err(RunError::Config(
                        "initial.mass and initial.c_star_fraction are exclusive".into(),
                    ))
                }
                (Some(m), None) => Some(*m),
                (None, Some(frac)) => {
                    let (gs, _) = solve_ground_state(run, &run.model.with_omega(1.0)?)?;
                    let c_star = gn_constant_from_ground_state(&gs).c_star;
                    Some((frac * c_star).powi(2))
                }
                (None, None) => None,
            };
            match target {
                Some(m) if !(m >= 0.0 && m.is_finite()) => {
                    return Err(RunError::Config(format!("initial mass {m} must be >= 0")))
                }
                Some(m) if f.norm_sq() > 0.0 => f.scaled(Complex64::new((m / f.norm_sq()).sqrt(), 0.0)),
                _ => f,
            }
        }
        InitialData::GroundState { tau } => {
            let (gs, _) = solve_ground_state(run, &run.model)?;
            if *tau == 1.0 {
                gs.profile
            } else {
                functionals::scale_lambda(&gs.profile, *tau)?
            }
        }
        InitialData::Snapshot { path } => {
            let f = snapshot::read_snapshot(path)?;
            if *f.grid() != grid {
                return Err(Error::GridMismatch.into());
            }
            f
        }
    })
}

fn exp_evolve(run: &ResolvedRun, art: &mut Artifacts) -> Result<Value, RunError> {
    let psi0 = initial_field(run)?;
    let out = evolution::evolve(&psi0, &run.evolve, &run.model)?;
    art.csv("diagnostics.csv", diagnostics_csv(&out.records))?;
    for (i, (_, f)) in out.snapshots.iter().enumerate() {
        art.snapshot(&format!("snapshot_{i:04}.anls"), f)?;
    }
    art.snapshot("final.anls", &out.final_field)?;
    let snaps: Vec<f64> = out.snapshots.iter().map(|s| s.0).collect();
    let mut outcome = outcome_json(&out);
    outcome["snapshot_times"] = json!(snaps);
    art.json("outcome.json", &outcome)?;
    let first = out.records.first().expect("initial record");
    let last = out.records.last().expect("initial record");
    let rel = |a: f64, b: f64| if a != 0.0 { (b - a) / a.abs() } else { b - a };
    Ok(json!({
        "status": out.status,
        "t_final": out.t_final,
        "blowup_signal": out.blowup_signal,
        "mass_drift": rel(first.mass, last.mass),
        "energy_drift": rel(first.energy, last.energy),
        "h12_growth": if first.h12_norm > 0.0 { last.h12_norm / first.h12_norm } else { 0.0 },
    }))
}

fn exp_gn_constant(run: &ResolvedRun, art: &mut Artifacts) -> Result<Value, RunError> {
    let (gs, _) = solve_ground_state(run, &run.model)?;
    let gn = gn_constant_from_ground_state(&gs);
    let quotient_w = functionals::gn_quotient(&gs.profile, gs.p)?;
    let mut summary = json!({
        "p": gn.p,
        "c_opt": gn.c_opt,
        "c_star": gn.c_star,
        "w_mass": gn.w_mass,
        "mass_critical": gn.mass_critical,
        "ground_state_quotient": quotient_w,
        "residual_l2": gs.residual_l2,
    });
    if run.config.restarts > 0 {
        let m = ground_state::gn_quotient_maximize(
            gs.p,
            &run.grid,
            run.config.restarts,
            run.config.rng_seed,
            &run.config.ascent,
        )?;
        summary["maximized_quotient"] = json!(m.best);
        summary["maximized_relative_gap"] = json!(m.best / gn.c_opt - 1.0);
        summary["per_restart"] = json!(m.per_restart);
    }
    art.snapshot("ground_state.anls", &gs.profile)?;
    art.json("gn_constant.json", &summary)?;
    Ok(summary)
}

fn virial_table(report: &evolution::VirialReport) -> String {
    let mut t = CsvTable::new(&["t", "second_difference", "predicted"]);
    for ((t_i, d), p) in report.times.iter().zip(&report.second_difference).zip(&report.predicted) {
        t.floats(&[*t_i, *d, *p]);
    }
    t.finish()
}

fn exp_virial_check(run: &ResolvedRun, art: &mut Artifacts) -> Result<Value, RunError> {
    let psi0 = initial_field(run)?;
    let mut coarse = run.evolve.clone();
    coarse.diag_stride = 1;
    let mut fine = coarse.clone();
    fine.dt *= 0.5;
    let out = evolution::evolve(&psi0, &coarse, &run.model)?;
    let out_fine = evolution::evolve(&psi0, &fine, &run.model)?;
    let rep = evolution::virial_check(&out.records, &run.model)?;
    let rep_fine = evolution::virial_check(&out_fine.records, &run.model)?;
    art.csv("diagnostics.csv", diagnostics_csv(&out.records))?;
    art.csv("virial.csv", virial_table(&rep))?;
    let summary = json!({
        "dt": coarse.dt,
        "max_rel_discrepancy": rep.max_rel_discrepancy,
        "max_rel_discrepancy_half_dt": rep_fine.max_rel_discrepancy,
        "convergence_ratio": rep.max_rel_discrepancy / rep_fine.max_rel_discrepancy,
        "first_derivative_rel": rep.first_derivative_rel,
        "first_derivative_rel_half_dt": rep_fine.first_derivative_rel,
        "status": out.status,
        "status_half_dt": out_fine.status,
    });
    art.json("virial.json", &summary)?;
    Ok(summary)
}

fn exp_decay_fit(run: &ResolvedRun, art: &mut Artifacts) -> Result<Value, RunError> {
    // the decay law is stated for the unit-frequency ground state
    let model = run.model.with_omega(1.0)?;
    let (gs, _) = solve_ground_state(run, &model)?;
    let fit = kernel::decay_fit_window(&gs, run.config.fit_window)?;
    let u = &gs.profile;
    let g = *u.grid();
    let (j0, m0) = u.argmax_abs();
    let mut tx = CsvTable::new(&["x", "abs_u"]);
    for j in 0..g.nx() {
        tx.floats(&[g.x(j) - g.x(j0), u.at(j, m0).norm()]);
    }
    let mut ty = CsvTable::new(&["y", "abs_u"]);
    for m in 0..g.ny() {
        ty.floats(&[g.y(m) - g.y(m0), u.at(j0, m).norm()]);
    }
    art.csv("decay_x.csv", tx.finish())?;
    art.csv("decay_y.csv", ty.finish())?;
    art.json("decay_fit.json", &fit)?;
    Ok(json!({
        "p": gs.p,
        "residual_l2": gs.residual_l2,
        "sigma_x": fit.sigma_x,
        "sigma_y": fit.sigma_y,
        "prefactor_exponent": fit.prefactor_exponent,
        "r_squared_x": fit.r_squared.0,
        "r_squared_y": fit.r_squared.1,
        "r_squared_y_exponential": fit.r_squared_y_exponential,
    }))
}

fn exp_orbital_probe(run: &ResolvedRun, art: &mut Artifacts, unstable: bool) -> Result<Value, RunError> {
    let p = run.model.p();
    let probe = run.config.probe;
    if unstable {
        if p <= MASS_CRITICAL_P {
            return Err(Error::InvalidParams(format!(
                "instability probe needs p > 14/3, got p = {p}"
            ))
            .into());
        }
    } else if p >= MASS_CRITICAL_P {
        return Err(Error::InvalidParams(format!(
            "stability probe needs 2 < p < 14/3, got p = {p}"
        ))
        .into());
    }
    let probe = OrbitalProbeConfig {
        rng_seed: run.config.rng_seed,
        ..probe
    };
    let (gs, _) = solve_ground_state(run, &run.model)?;
    let rep = evolution::orbital_stability_probe(&gs, &probe, &run.evolve)?;
    let mut t = CsvTable::new(&["t", "distance"]);
    for (ti, d) in &rep.distances {
        t.floats(&[*ti, *d]);
    }
    art.csv("orbital.csv", t.finish())?;
    art.json("orbital.json", &rep)?;
    Ok(json!({
        "p": p,
        "delta": probe.delta,
        "tau": probe.tau,
        "sup_distance": rep.sup_distance,
        "initial_distance": rep.initial_distance,
        "escaped_tube": rep.escaped_tube,
        "status": rep.status,
        "t_final": rep.t_final,
        "anomalous": rep.anomalous,
    }))
}

#[derive(Debug, Clone, Serialize)]
struct ScanCell {
    p: f64,
    amplitude: f64,
    status: Option<evolution::OutcomeStatus>,
    t_final: f64,
    energy: f64,
    mass: f64,
    membership: Option<evolution::Membership>,
    blowup_signal: Option<evolution::BlowupSignal>,
    error: Option<String>,
    records: Vec<DiagnosticsRecord>,
}

fn scan_cell(
    grid: Grid2D,
    p: f64,
    omega: f64,
    amplitude: f64,
    m_omega: Option<f64>,
    cfg: &EvolveConfig,
) -> ScanCell {
    let psi0 = Field::gaussian(grid, amplitude, 1.0, 1.0);
    let mut cell = ScanCell {
        p,
        amplitude,
        status: None,
        t_final: 0.0,
        energy: f64::NAN,
        mass: f64::NAN,
        membership: None,
        blowup_signal: None,
        error: None,
        records: Vec::new(),
    };
    let params = match ModelParams::new(p, omega) {
        Ok(m) => m,
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    };
    let n = Norms::of(&psi0, p);
    cell.energy = n.energy();
    cell.mass = n.mass;
    cell.membership = m_omega.map(|m| classify_initial_datum(&psi0, &params, m).membership);
    match evolution::evolve(&psi0, cfg, &params) {
        Ok(out) => {
            cell.status = Some(out.status);
            cell.t_final = out.t_final;
            cell.blowup_signal = out.blowup_signal;
            cell.records = out.records;
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

fn label<T: Serialize>(v: &Option<T>) -> String {
    match v {
        Some(x) => match serde_json::to_value(x) {
            Ok(Value::String(s)) => s,
            Ok(other) => other.to_string(),
            Err(_) => String::new(),
        },
        None => String::new(),
    }
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn exp_blowup_scan(run: &ResolvedRun, art: &mut Artifacts) -> Result<Value, RunError> {
    let scan = &run.config.scan;
    let omega = run.model.omega();
    // m_omega per exponent for the G/B classification; failures leave it unknown
    let m_omegas: Vec<Option<f64>> = scan
        .p_list
        .iter()
        .map(|&p| {
            ModelParams::new(p, omega)
                .ok()
                .and_then(|m| solve_ground_state(run, &m).ok())
                .map(|(gs, _)| gs.m_omega)
        })
        .collect();
    let cells: Vec<(usize, usize)> = (0..scan.p_list.len())
        .flat_map(|i| (0..scan.amplitudes.len()).map(move |j| (i, j)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(scan.workers.max(1))
        .build()
        .map_err(|e| RunError::Config(format!("worker pool: {e}")))?;
    let results: Vec<ScanCell> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, j)| {
                scan_cell(
                    run.grid,
                    scan.p_list[i],
                    omega,
                    scan.amplitudes[j],
                    m_omegas[i],
                    &run.evolve,
                )
            })
            .collect()
    });
    let mut table = CsvTable::new(&[
        "p",
        "amplitude",
        "status",
        "t_final",
        "energy",
        "mass",
        "membership",
        "blowup_signal",
        "error",
    ]);
    let mut counts = serde_json::Map::new();
    for (&(i, j), c) in cells.iter().zip(&results) {
        table.row(&[
            fmt_f64(c.p),
            fmt_f64(c.amplitude),
            label(&c.status),
            fmt_f64(c.t_final),
            fmt_f64(c.energy),
            fmt_f64(c.mass),
            label(&c.membership),
            label(&c.blowup_signal),
            csv_text(c.error.as_deref().unwrap_or("")),
        ]);
        if !c.records.is_empty() {
            art.csv(&format!("cell_{i:02}_{j:02}.csv"), diagnostics_csv(&c.records))?;
        }
        let key = if c.error.is_some() { "error".to_string() } else { label(&c.status) };
        let n = counts.get(&key).and_then(Value::as_u64).unwrap_or(0);
        counts.insert(key, json!(n + 1));
    }
    art.csv("phase_table.csv", table.finish())?;
    Ok(json!({
        "cells": results.len(),
        "outcomes": counts,
        "p_list": scan.p_list,
        "amplitudes": scan.amplitudes,
    }))
}

fn exp_symmetry_report(run: &ResolvedRun, art: &mut Artifacts) -> Result<Value, RunError> {
    let (gs, _) = solve_ground_state(run, &run.model)?;
    let rep = ground_state::symmetry_report(&gs);
    let shifted = gs.profile.shifted(7, -5);
    let recentered = ground_state::field_symmetry(&ground_state::normalize_phase_and_center(&shifted));
    let integer_p = gs.p.fract() == 0.0;
    let summary = json!({
        "p": gs.p,
        "x_reflection": rep.x_reflection,
        "y_reflection": rep.y_reflection,
        "y_symmetry_proven": integer_p,
        "shift_invariance": (recentered.x_reflection - rep.x_reflection)
            .abs()
            .max((recentered.y_reflection - rep.y_reflection).abs()),
        "residual_l2": gs.residual_l2,
    });
    art.json("symmetry.json", &summary)?;
    Ok(summary)
}

fn exp_kernel_eval(run: &ResolvedRun, art: &mut Artifacts) -> Result<Value, RunError> {
    let kc = &run.config.kernel;
    if kc.samples == 0 || !(kc.extent > 0.0) {
        return Err(RunError::Config(
            "kernel.samples and kernel.extent must be positive".into(),
        ));
    }
    let coords: Vec<f64> = (1..=kc.samples)
        .map(|i| kc.extent * i as f64 / kc.samples as f64)
        .collect();
    let mut points: Vec<(f64, f64)> = coords.iter().map(|&x| (x, 0.0)).collect();
    points.extend(coords.iter().map(|&y| (0.0, y)));
    points.extend(kc.ray.iter().map(|&r| (r, r)));
    let values: Vec<f64> = points
        .par_iter()
        .map(|&(x, y)| kernel::kernel_eval(x, y, kc.quad_tol))
        .collect::<crate::error::Result<_>>()?;
    let mut t = CsvTable::new(&["x", "y", "k"]);
    for ((x, y), k) in points.iter().zip(&values) {
        t.floats(&[*x, *y, *k]);
    }
    art.csv("kernel.csv", t.finish())?;
    let ray = kernel::kernel_ray_fit(&kc.ray, kc.quad_tol)?;
    let env = kernel::h2_envelope_fit(2.0, 8.0)?;
    let positive_on_x_axis = values[..kc.samples]
        .iter()
        .zip(&coords)
        .filter(|(_, x)| **x >= 0.5 && **x <= 5.0)
        .all(|(k, _)| *k > 0.0);
    let summary = json!({
        "h2_at_origin": kernel::h2_unit(0.0),
        "h2_at_origin_expected": 2.0 * kernel::QUARTIC_GAUSSIAN_INTEGRAL,
        "ray_fit_c2": ray.c2,
        "ray_fit_log_c1": ray.log_c1,
        "ray_fit_r_squared": ray.r_squared,
        "h2_envelope_c1": env.c1,
        "h2_envelope_spread": env.spread,
        "positive_on_x_axis": positive_on_x_axis,
        "points": points.len(),
    });
    art.json("kernel.json", &summary)?;
    Ok(summary)
}

/// Write a one-line JSON error report.
pub fn write_error(err: &RunError, mut out: impl std::io::Write) {
    let _ = writeln!(out, "{}", err.to_json());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::from_name(e.name()).unwrap(), e);
            let v = serde_json::to_value(e).unwrap();
            assert_eq!(v, Value::String(e.name().to_string()));
        }
        assert!(matches!(
            Experiment::from_name("nope"),
            Err(RunError::UnknownExperiment(_))
        ));
    }

    #[test]
    fn config_schema_errors_name_the_field() {
        let e = RunConfig::from_json("{\"experiment\": \"evolve\",\n \"gird\": {}}").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("gird") && msg.contains("line 2"), "{msg}");
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn distinct_exit_codes() {
        let mut c = RunConfig::default();
        c.experiment = "bogus".into();
        let unknown = c.resolve().unwrap_err().exit_code();
        c.experiment = "evolve".into();
        c.grid.nx = 100;
        let grid = c.resolve().unwrap_err().exit_code();
        c.grid.nx = 64;
        c.model.p = 1.0;
        let params = c.resolve().unwrap_err().exit_code();
        let codes = [unknown, grid, params, 3, 7];
        for (i, a) in codes.iter().enumerate() {
            for b in &codes[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn csv_floats_have_17_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        let back: f64 = fmt_f64(std::f64::consts::PI).parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }
}
