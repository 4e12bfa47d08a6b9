use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use ionshuttle::config::{ChainPreset, ConfigFile, ErfSigma, PlotScale, Preset, SeriesName, SweepSpec, TfGrid};
use ionshuttle::design::ComFamily;
use ionshuttle::dynamics::{self, IntegratorOptions};
use ionshuttle::sweep::{self, Context, TrajectoryFile};
use ionshuttle::trajectory::{KindName, Trajectory, TrajectorySpec};
use ionshuttle::{Error, PhaseState, Result};

#[derive(Parser, Debug)]
#[command(name = "ionshuttle", version, about = "Transport trajectories and excitation for trapped-ion chains")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parameter preset: fig1, fig3, fig4a or fig4b.
    #[arg(long, global = true)]
    preset: Option<Preset>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "IONSHUTTLE_WORKERS")]
    workers: Option<usize>,
    /// Transport duration(s) in microseconds.
    #[arg(long, global = true, value_delimiter = ',')]
    tf: Vec<f64>,
    /// Ion masses in u, ion 1 first; selects a custom chain.
    #[arg(long, global = true, value_delimiter = ',')]
    masses: Vec<f64>,
    /// Axial frequency of ion 1 alone, MHz.
    #[arg(long, global = true)]
    trap_mhz: Option<f64>,
    /// Transport distance in micrometres.
    #[arg(long, global = true)]
    distance: Option<f64>,
    /// Trajectory kind(s); `-uncoupled` selects the uncoupled-mode model.
    #[arg(long, global = true, value_delimiter = ',')]
    kind: Vec<SeriesName>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Equilibrium offsets, mode frequencies, vectors and driving coefficients.
    Modes,
    /// Numerically designed nonic for a two-ion chain.
    Design,
    /// Full classical transport simulation of one trajectory.
    Simulate {
        /// Trajectory or design-result JSON to simulate.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Multiplier on the centre-of-mass frequency for analytic families.
        #[arg(long, default_value_t = 1.0)]
        omega_scale: f64,
        /// erf width in microseconds.
        #[arg(long)]
        sigma: Option<f64>,
        /// Write the lab-frame trajectory of every step as CSV.
        #[arg(long)]
        dense: Option<PathBuf>,
    },
    /// Excitation against transport duration, CSV.
    Sweep,
    /// Optimal erf width at each duration.
    OptimizeSigma,
    /// Variational scan of the centre-of-mass frequency multiplier.
    ScanOmega {
        /// Analytic family to scan: nonic-analytic or cosine.
        #[arg(long, default_value = "nonic-analytic")]
        family: KindName,
    },
    /// Matplotlib script for a sweep dataset.
    PlotScript {
        /// Sweep CSV to plot.
        dataset: PathBuf,
        /// Linear ordinate instead of the preset's choice.
        #[arg(long)]
        linear: bool,
    },
}

struct Run {
    cli: Cli,
    file: ConfigFile,
    spec: SweepSpec,
}

impl Run {
    fn new(cli: Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile {
                schema_version: ionshuttle::config::SCHEMA_VERSION,
                ..ConfigFile::default()
            },
        };
        let mut spec = file.resolve(cli.preset)?;
        if !cli.tf.is_empty() {
            spec.tf = TfGrid::Values {
                values_s: cli.tf.iter().map(|t| t * 1e-6).collect(),
            };
        }
        if !cli.kind.is_empty() {
            spec.kinds = cli.kind.clone();
        }
        if !cli.masses.is_empty() {
            spec.chain.preset = ChainPreset::Custom;
            spec.chain.masses_amu = Some(cli.masses.clone());
        }
        if let Some(f) = cli.trap_mhz {
            spec.chain.trap_frequency_hz = f * 1e6;
        }
        if let Some(d) = cli.distance {
            spec.distance_m = d * 1e-6;
        }
        spec.validate()?;
        Ok(Self { cli, file, spec })
    }

    fn workers(&self) -> usize {
        self.cli
            .workers
            .or(self.file.workers)
            .filter(|&n| n > 0)
            .unwrap_or_else(sweep::default_workers)
    }

    fn out(&self) -> Option<&Path> {
        self.cli.out.as_deref().or(self.file.out.as_deref())
    }

    fn single_tf(&self) -> Result<f64> {
        match self.spec.tf_values()?.as_slice() {
            [t] => Ok(*t),
            _ => Err(Error::Config("this command needs a single --tf".into())),
        }
    }

    fn write_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write_text(&(text + "\n"))
    }

    fn write_text(&self, text: &str) -> Result<()> {
        match self.out() {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ModesOutput<'a> {
    masses_kg: Vec<f64>,
    omega1: f64,
    com_omega: f64,
    basis: &'a ionshuttle::NormalModeBasis,
    omega_over_omega1: Vec<f64>,
}

#[derive(Serialize)]
struct SimulateOutput {
    trajectory: TrajectorySpec,
    boundary: ionshuttle::BoundaryReport,
    excitation: ionshuttle::ExcitationReport,
    uncoupled: ionshuttle::ExcitationReport,
}

fn build_trajectory(run: &Run, ctx: &Context, omega_scale: f64, sigma_us: Option<f64>) -> Result<Trajectory> {
    if let Some(p) = match &run.cli.command {
        Command::Simulate { trajectory, .. } => trajectory.as_ref(),
        _ => None,
    } {
        return TrajectoryFile::load(p)?.trajectory();
    }
    if run.cli.kind.is_empty() && run.cli.tf.is_empty() {
        if let Some(t) = &run.file.trajectory {
            return Trajectory::try_from(t);
        }
    }
    let kind = match run.spec.kinds.as_slice() {
        [k] => k.kind,
        _ => return Err(Error::Config("simulate needs a single --kind or --trajectory".into())),
    };
    let tf = run.single_tf()?;
    match kind {
        KindName::Linear => Trajectory::linear(tf, ctx.distance),
        KindName::NonicAnalytic => ctx.analytic(ComFamily::Nonic, tf, omega_scale),
        KindName::Cosine => ctx.analytic(ComFamily::Cosine, tf, omega_scale),
        KindName::Erf => {
            let sigma = match (sigma_us, run.spec.erf_sigma) {
                (Some(s), _) => s * 1e-6,
                (None, ErfSigma::Fraction { fraction }) => fraction * tf,
                (None, ErfSigma::Fixed { sigma_s }) => sigma_s,
                (None, ErfSigma::Optimize) => sweep::optimize_sigma(ctx, tf)?.sigma,
            };
            Trajectory::erf(tf, ctx.distance, sigma)
        }
        KindName::DesignedNonic => ctx.design(tf)?.trajectory(),
    }
}

fn execute(run: &Run) -> Result<()> {
    let ctx = Context::from_spec(&run.spec)?;
    match &run.cli.command {
        Command::Modes => {
            let omega1 = ctx.config.omega1();
            run.write_json(&ModesOutput {
                masses_kg: ctx.config.masses(),
                omega1,
                com_omega: ctx.config.com_omega(),
                omega_over_omega1: ctx.basis.omega.iter().map(|w| w / omega1).collect(),
                basis: &ctx.basis,
            })
        }
        Command::Design => {
            let result = ctx.design(run.single_tf()?)?;
            run.write_json(&result)
        }
        Command::Simulate {
            omega_scale,
            sigma,
            dense,
            ..
        } => {
            let traj = build_trajectory(run, &ctx, *omega_scale, *sigma)?;
            let ctx = Context::new(
                run.spec.chain.build(traj.distance())?,
                traj.distance(),
                ctx.integrator.clone(),
            )?;
            let excitation = ctx.simulate(&traj)?;
            if let Some(path) = dense {
                let opts = IntegratorOptions {
                    dense_output: true,
                    ..ctx.integrator.clone()
                };
                let initial = PhaseState::at_rest(0.0, ctx.basis.offsets.clone());
                let prop = dynamics::propagate(&ctx.config, &traj, (0.0, traj.tf()), &initial, &opts)?;
                dynamics::write_dense_csv(&prop.samples, BufWriter::new(File::create(path)?))?;
            }
            run.write_json(&SimulateOutput {
                trajectory: TrajectorySpec::from(&traj),
                boundary: traj.verify_boundaries(),
                uncoupled: ctx.uncoupled(&traj)?,
                excitation,
            })
        }
        Command::Sweep => {
            let data = sweep::run_sweep(&run.spec, run.workers())?;
            match run.out() {
                Some(p) => data.write_csv(BufWriter::new(File::create(p)?)),
                None => data.write_csv(std::io::stdout().lock()),
            }
        }
        Command::OptimizeSigma => {
            let tfs = run.spec.tf_values()?;
            let results = sweep::with_workers(run.workers(), || {
                use rayon::prelude::*;
                tfs.par_iter().map(|&tf| sweep::optimize_sigma(&ctx, tf)).collect::<Result<Vec<_>>>()
            })??;
            run.write_json(&results)
        }
        Command::ScanOmega { family } => {
            let family = match family {
                KindName::NonicAnalytic => ComFamily::Nonic,
                KindName::Cosine => ComFamily::Cosine,
                other => return Err(Error::Config(format!("cannot scan omega for {other}"))),
            };
            let scales = run.spec.omega_scan.values()?;
            let tfs = run.spec.tf_values()?;
            let scan = sweep::with_workers(run.workers(), || sweep::scan_omega_scale(&ctx, family, &scales, &tfs))??;
            run.write_json(&scan)
        }
        Command::PlotScript { dataset, linear } => {
            let script = run
                .out()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| dataset.with_extension("py"));
            let scale = if *linear { PlotScale::Linear } else { run.spec.plot };
            let series = sweep::emit_plot_script(dataset, &script, scale)?;
            eprintln!("wrote {} ({} series)", script.display(), series.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match Run::new(cli).and_then(|run| execute(&run)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
