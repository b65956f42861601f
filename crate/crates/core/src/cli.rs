//! `anls` command line: one subcommand per experiment plus `run --config`.
//!
//! A JSON config file (optional) is loaded first, then flags override it.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::evolution::{EvolveConfig, Splitting};
use crate::experiments::{self, Experiment, InitialData, RunConfig, RunError};

#[derive(Debug, Parser)]
#[command(
    name = "anls",
    version,
    about = "Ground states, dynamics and kernel estimates for i psi_t + psi_xx - psi_yyyy + |psi|^(p-2) psi = 0"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment named in a config file (or by --experiment).
    Run {
        #[arg(long)]
        experiment: Option<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Solve for the ground state u_omega; writes a snapshot and a JSON sidecar.
    GroundState(Overrides),
    /// Evolve initial data; writes diagnostics.csv and snapshots.
    Evolve(Overrides),
    /// Optimal Gagliardo-Nirenberg constant C_opt and threshold c*.
    GnConstant(Overrides),
    /// Compare the second difference of V(t) with the virial identity.
    VirialCheck(Overrides),
    /// Fit the anisotropic decay rates of the ground state.
    DecayFit(Overrides),
    /// Orbital distance of perturbed ground states for 2 < p < 14/3.
    StabilityProbe(Overrides),
    /// Orbital distance of perturbed ground states for p > 14/3.
    InstabilityProbe(Overrides),
    /// Evolve A exp(-x^2-y^2) over a (p, A) grid; writes phase_table.csv.
    BlowupScan(Overrides),
    /// Reflection asymmetry of the centered ground state.
    SymmetryReport(Overrides),
    /// Evaluate the kernel of (1 - d_xx + d_yyyy)^(-1) and fit its decay.
    KernelEval(Overrides),
}

impl Command {
    fn parts(self) -> (Option<Experiment>, Option<String>, Overrides) {
        use Command::*;
        match self {
            Run {
                experiment,
                overrides,
            } => (None, experiment, overrides),
            GroundState(o) => (Some(Experiment::GroundState), None, o),
            Evolve(o) => (Some(Experiment::Evolve), None, o),
            GnConstant(o) => (Some(Experiment::GnConstant), None, o),
            VirialCheck(o) => (Some(Experiment::VirialCheck), None, o),
            DecayFit(o) => (Some(Experiment::DecayFit), None, o),
            StabilityProbe(o) => (Some(Experiment::StabilityProbe), None, o),
            InstabilityProbe(o) => (Some(Experiment::InstabilityProbe), None, o),
            BlowupScan(o) => (Some(Experiment::BlowupScan), None, o),
            SymmetryReport(o) => (Some(Experiment::SymmetryReport), None, o),
            KernelEval(o) => (Some(Experiment::KernelEval), None, o),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InitialKind {
    Gaussian,
    Zero,
    GroundState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplittingArg {
    Lie,
    Strang,
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration; flags take precedence over its entries.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Nonlinearity exponent p > 2.
    #[arg(long)]
    pub p: Option<f64>,
    /// Frequency omega > 0.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    /// Box length in x; the box is [-lx/2, lx/2).
    #[arg(long)]
    pub lx: Option<f64>,
    #[arg(long)]
    pub ly: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Steps between diagnostic records.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, value_enum)]
    pub splitting: Option<SplittingArg>,
    /// Comma-separated times at which field snapshots are written.
    #[arg(long, value_delimiter = ',')]
    pub snapshot_times: Option<Vec<f64>>,
    /// Artifact directory [default: <$ANLS_OUTPUT_DIR or ./anls-output>/<experiment>].
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub rng_seed: Option<u64>,
    /// Extra randomized restarts for the ground-state solver and GN maximization.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub residual_tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, value_enum)]
    pub initial: Option<InitialKind>,
    /// Read the initial field from an ANLS snapshot.
    #[arg(long, value_name = "FILE")]
    pub initial_snapshot: Option<PathBuf>,
    /// Gaussian amplitude.
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub sx: Option<f64>,
    #[arg(long)]
    pub sy: Option<f64>,
    /// Rescale Gaussian data to this squared L2 norm.
    #[arg(long)]
    pub mass: Option<f64>,
    /// Rescale Gaussian data to ||psi0||_2 = fraction * c*.
    #[arg(long)]
    pub c_star_fraction: Option<f64>,
    /// Scaling parameter lambda of scale_lambda(u_omega, lambda).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Relative size of the probe perturbation.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub p_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub amplitudes: Option<Vec<f64>>,
    /// Concurrent cells in blowup-scan.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub quad_tol: Option<f64>,
}

macro_rules! set {
    ($src:expr => $dst:expr) => {
        if let Some(v) = $src.clone() {
            $dst = v;
        }
    };
}

impl Overrides {
    /// Load the config file (if any) and apply every given flag.
    pub fn to_config(&self, experiment: Option<Experiment>, named: Option<String>) -> Result<RunConfig, RunError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(e) = experiment {
            c.experiment = e.name().to_string();
        }
        if let Some(name) = named {
            c.experiment = name;
        }
        set!(self.p => c.model.p);
        set!(self.omega => c.model.omega);
        set!(self.nx => c.grid.nx);
        set!(self.ny => c.grid.ny);
        set!(self.lx => c.grid.lx);
        set!(self.ly => c.grid.ly);
        set!(self.rng_seed => c.rng_seed);
        set!(self.restarts => c.restarts);
        set!(self.residual_tol => c.solver.residual_tol);
        set!(self.max_iter => c.solver.max_iter);
        set!(self.delta => c.probe.delta);
        set!(self.p_list => c.scan.p_list);
        set!(self.amplitudes => c.scan.amplitudes);
        set!(self.workers => c.scan.workers);
        set!(self.quad_tol => c.kernel.quad_tol);
        if self.output_dir.is_some() {
            c.output_dir = self.output_dir.clone();
        }

        let touches_evolve = self.dt.is_some()
            || self.t_max.is_some()
            || self.stride.is_some()
            || self.splitting.is_some()
            || self.snapshot_times.is_some();
        if touches_evolve {
            let mut ev: EvolveConfig = match c.evolve.take() {
                Some(ev) => ev,
                None => Experiment::from_name(&c.experiment)?.default_evolve(),
            };
            set!(self.dt => ev.dt);
            set!(self.t_max => ev.t_max);
            set!(self.stride => ev.diag_stride);
            set!(self.snapshot_times => ev.snapshot_times);
            if let Some(s) = self.splitting {
                ev.splitting = match s {
                    SplittingArg::Lie => Splitting::Lie,
                    SplittingArg::Strang => Splitting::Strang,
                };
            }
            c.evolve = Some(ev);
        }

        let probe = matches!(c.experiment.as_str(), "stability-probe" | "instability-probe");
        if probe {
            set!(self.tau => c.probe.tau);
        }
        self.apply_initial(&mut c, probe)?;
        Ok(c)
    }

    fn apply_initial(&self, c: &mut RunConfig, tau_consumed: bool) -> Result<(), RunError> {
        if let Some(path) = &self.initial_snapshot {
            if self.initial.is_some() {
                return Err(RunError::Config(
                    "--initial and --initial-snapshot are exclusive".into(),
                ));
            }
            c.initial = InitialData::Snapshot { path: path.clone() };
            return Ok(());
        }
        match self.initial {
            Some(InitialKind::Zero) => c.initial = InitialData::Zero,
            Some(InitialKind::GroundState) => {
                if !matches!(c.initial, InitialData::GroundState { .. }) {
                    c.initial = InitialData::GroundState { tau: 1.0 };
                }
            }
            Some(InitialKind::Gaussian) => {
                if !matches!(c.initial, InitialData::Gaussian { .. }) {
                    c.initial = InitialData::default();
                }
            }
            None => {}
        }
        let gaussian_flags = self.amplitude.is_some()
            || self.sx.is_some()
            || self.sy.is_some()
            || self.mass.is_some()
            || self.c_star_fraction.is_some();
        match &mut c.initial {
            InitialData::Gaussian {
                amplitude,
                sx,
                sy,
                mass,
                c_star_fraction,
            } => {
                set!(self.amplitude => *amplitude);
                set!(self.sx => *sx);
                set!(self.sy => *sy);
                if self.mass.is_some() {
                    *mass = self.mass;
                    *c_star_fraction = None;
                }
                if self.c_star_fraction.is_some() {
                    *c_star_fraction = self.c_star_fraction;
                    *mass = None;
                }
            }
            _ if gaussian_flags => {
                return Err(RunError::Config(
                    "Gaussian flags (--amplitude, --sx, --sy, --mass, --c-star-fraction) need Gaussian initial data".into(),
                ))
            }
            InitialData::GroundState { tau } => {
                if !tau_consumed {
                    set!(self.tau => *tau);
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Parse `args`, run the experiment and report; returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut impl Write, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let (experiment, named, overrides) = cli.command.parts();
    let outcome = overrides
        .to_config(experiment, named)
        .and_then(|c| experiments::run(&c));
    match outcome {
        Ok(report) => {
            let _ = write!(stdout, "{}", report.render());
            0
        }
        Err(e) => {
            experiments::write_error(&e, &mut *stderr);
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(args: &[&str]) -> Result<RunConfig, RunError> {
        let cli = Cli::try_parse_from(std::iter::once("anls").chain(args.iter().copied())).unwrap();
        let (e, n, o) = cli.command.parts();
        o.to_config(e, n)
    }

    #[test]
    fn flags_override_defaults() {
        let c = config(&["evolve", "--p", "3", "--nx", "64", "--dt", "0.01", "--amplitude", "2"]).unwrap();
        assert_eq!(c.experiment, "evolve");
        assert_eq!(c.model.p, 3.0);
        assert_eq!(c.grid.nx, 64);
        assert_eq!(c.evolve.unwrap().dt, 0.01);
        assert!(matches!(c.initial, InitialData::Gaussian { amplitude, .. } if amplitude == 2.0));
    }

    #[test]
    fn flags_win_over_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"experiment": "gn-constant", "model": {"p": 5}, "grid": {"nx": 32}}"#).unwrap();
        let c = config(&["run", "--config", path.to_str().unwrap(), "--p", "4"]).unwrap();
        assert_eq!(c.experiment, "gn-constant");
        assert_eq!(c.model.p, 4.0);
        assert_eq!(c.grid.nx, 32);
        assert_eq!(c.grid.ny, 256);
    }

    #[test]
    fn probe_tau_goes_to_the_probe() {
        let c = config(&["instability-probe", "--p", "5", "--tau", "1.1"]).unwrap();
        assert_eq!(c.probe.tau, 1.1);
        let c = config(&["evolve", "--initial", "ground-state", "--tau", "0.9"]).unwrap();
        assert_eq!(c.initial, InitialData::GroundState { tau: 0.9 });
    }

    #[test]
    fn gaussian_flags_conflict_with_other_data() {
        let e = config(&["evolve", "--initial", "zero", "--amplitude", "2"]).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn usage_errors_exit_2() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(main_with_args(["anls", "evolve", "--p", "x"], &mut out, &mut err), 2);
        assert_eq!(main_with_args(["anls", "nonsense"], &mut out, &mut err), 2);
    }
}
