//! Batch sweeps over transport duration, σ optimization for the erf family,
//! the variational frequency scan and dataset/plot-script output.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{self, ChainConfig, NormalModeBasis};
use crate::config::{ErfSigma, Model, PlotScale, SeriesName, SweepSpec};
use crate::design::{self, ComFamily, DesignResult};
use crate::dynamics::{self, ExcitationReport};
use crate::optimize::{self, SearchOptions};
use crate::trajectory::{KindName, Trajectory, TrajectorySpec};
use crate::{Error, IntegratorOptions, Result};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "IONSHUTTLE_WORKERS";

/// Shortest decimal that round-trips the value rounded to 12 significant digits.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded:e}")
}

/// Everything a sweep point needs, computed once per chain.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ChainConfig,
    pub basis: NormalModeBasis,
    pub distance: f64,
    pub integrator: IntegratorOptions,
}

impl Context {
    pub fn new(config: ChainConfig, distance: f64, integrator: IntegratorOptions) -> Result<Self> {
        let basis = chain::normal_modes(&config)?;
        Ok(Self {
            config,
            basis,
            distance,
            integrator,
        })
    }

    pub fn from_spec(spec: &SweepSpec) -> Result<Self> {
        Self::new(spec.chain()?, spec.distance_m, spec.integrator())
    }

    pub fn num_modes(&self) -> usize {
        self.basis.num_modes()
    }

    pub fn analytic(&self, family: ComFamily, tf: f64, omega_scale: f64) -> Result<Trajectory> {
        design::design_com_analytic(family, self.config.com_omega(), self.distance, tf, omega_scale)
    }

    pub fn simulate(&self, traj: &Trajectory) -> Result<ExcitationReport> {
        dynamics::simulate_transport(&self.config, &self.basis, traj, &self.integrator)
    }

    pub fn uncoupled(&self, traj: &Trajectory) -> Result<ExcitationReport> {
        design::uncoupled_excitation(&self.config, &self.basis, traj)
    }

    pub fn design(&self, tf: f64) -> Result<DesignResult> {
        design::design_nonic(&self.config, &self.basis, self.distance, tf)
    }

    pub fn excitation(&self, traj: &Trajectory, model: Model) -> Result<ExcitationReport> {
        match model {
            Model::Full => self.simulate(traj),
            Model::Uncoupled => self.uncoupled(traj),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub kind: String,
    pub tf: f64,
    pub quanta: Vec<f64>,
    pub total_quanta_omega1: f64,
    /// Largest final auxiliary residual of a designed trajectory, relative to `max |Gamma| d`.
    pub design_residual: Option<f64>,
    /// Wall time of the point, s. Not written to the CSV.
    pub wall_time: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub num_modes: usize,
    pub rows: Vec<ResultRow>,
}

impl Dataset {
    pub fn header(num_modes: usize) -> Vec<String> {
        let mut h = vec!["kind".to_string(), "tf_s".to_string()];
        h.extend((1..=num_modes).map(|i| format!("n_mode_{i}")));
        h.extend(["total_quanta_omega1", "design_residual", "error"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::header(self.num_modes)).map_err(csv_error)?;
        for row in &self.rows {
            let mut rec = vec![row.kind.clone(), format_float(row.tf)];
            if row.error.is_some() {
                rec.extend(std::iter::repeat_n(String::new(), self.num_modes + 1));
            } else {
                rec.extend(row.quanta.iter().map(|q| format_float(*q)));
                rec.push(format_float(row.total_quanta_omega1));
            }
            rec.push(row.design_residual.map(format_float).unwrap_or_default());
            rec.push(row.error.clone().unwrap_or_default());
            w.write_record(&rec).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Rows of one series, in tf order.
    pub fn series<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.kind == kind)
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// Row label: the series name, with `@scale` for a scaled analytic family.
pub fn series_label(series: SeriesName, omega_scale: f64) -> String {
    let analytic = matches!(series.kind, KindName::NonicAnalytic | KindName::Cosine);
    if analytic && omega_scale != 1.0 {
        format!("{series}@{omega_scale}")
    } else {
        series.to_string()
    }
}

struct Point {
    series: SeriesName,
    omega_scale: f64,
    tf: f64,
}

fn evaluate_point(ctx: &Context, spec: &SweepSpec, p: &Point) -> ResultRow {
    let start = Instant::now();
    let mut design_residual = None;
    let outcome = (|| -> Result<ExcitationReport> {
        let traj = match p.series.kind {
            KindName::Linear => Trajectory::linear(p.tf, ctx.distance)?,
            KindName::NonicAnalytic => ctx.analytic(ComFamily::Nonic, p.tf, p.omega_scale)?,
            KindName::Cosine => ctx.analytic(ComFamily::Cosine, p.tf, p.omega_scale)?,
            KindName::Erf => {
                let sigma = match spec.erf_sigma {
                    ErfSigma::Fraction { fraction } => fraction * p.tf,
                    ErfSigma::Fixed { sigma_s } => sigma_s,
                    ErfSigma::Optimize => optimize_sigma(ctx, p.tf)?.sigma,
                };
                Trajectory::erf(p.tf, ctx.distance, sigma)?
            }
            KindName::DesignedNonic => {
                let res = ctx.design(p.tf)?;
                design_residual = Some(res.max_residual() / res.tolerance * design::DESIGN_TOLERANCE);
                res.trajectory()?
            }
        };
        ctx.excitation(&traj, p.series.model)
    })();
    let label = series_label(p.series, p.omega_scale);
    let wall_time = start.elapsed().as_secs_f64();
    match outcome {
        Ok(rep) => ResultRow {
            kind: label,
            tf: p.tf,
            quanta: rep.quanta(),
            total_quanta_omega1: rep.total_quanta_omega1,
            design_residual,
            wall_time,
            error: None,
        },
        Err(e) => {
            log::warn!("{label} at tf = {} s failed: {e}", p.tf);
            ResultRow {
                kind: label,
                tf: p.tf,
                quanta: Vec::new(),
                total_quanta_omega1: f64::NAN,
                design_residual,
                wall_time,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Default worker count: `IONSHUTTLE_WORKERS`, else the number of CPUs.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Evaluates every (series, scale, tf) point of `spec`. Point failures are
/// recorded in the row's `error` field; rows are sorted by (kind, tf).
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<Dataset> {
    spec.validate()?;
    let ctx = Context::from_spec(spec)?;
    let tfs = spec.tf_values()?;
    let mut points = Vec::new();
    for &series in &spec.kinds {
        let scales: &[f64] = match series.kind {
            KindName::NonicAnalytic | KindName::Cosine => &spec.omega_scale,
            _ => &[1.0],
        };
        for &omega_scale in scales {
            for &tf in &tfs {
                points.push(Point { series, omega_scale, tf });
            }
        }
    }
    let mut rows: Vec<ResultRow> =
        with_workers(workers, || points.par_iter().map(|p| evaluate_point(&ctx, spec, p)).collect())?;
    rows.sort_by(|a, b| a.kind.cmp(&b.kind).then(a.tf.total_cmp(&b.tf)));
    Ok(Dataset {
        num_modes: ctx.num_modes(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaOptimum {
    pub tf: f64,
    pub sigma: f64,
    /// Full-simulation excitation at `sigma`, in quanta of ion 1.
    pub excitation: f64,
    /// The landscape was not unimodal and a grid scan was used.
    pub fallback: bool,
    pub evaluations: usize,
}

/// Minimizes the full-simulation excitation of the erf family over
/// `sigma in [tf/100, tf/2]`. The search runs in `ln sigma`.
pub fn optimize_sigma(ctx: &Context, tf: f64) -> Result<SigmaOptimum> {
    if !(tf.is_finite() && tf > 0.0) {
        return Err(Error::InvalidParameter("tf must be positive".into()));
    }
    let objective = |x: f64| {
        Trajectory::erf(tf, ctx.distance, x.exp())
            .and_then(|t| ctx.simulate(&t))
            .map_or(f64::INFINITY, |r| r.total_quanta_omega1)
    };
    let opts = SearchOptions {
        xtol: 1e-3,
        ..SearchOptions::default()
    };
    let m = optimize::minimize(objective, (tf / 100.0).ln(), (tf / 2.0).ln(), &opts);
    if !m.value.is_finite() {
        return Err(Error::Convergence {
            what: "erf sigma optimization",
            iterations: m.evaluations,
            residual: m.value,
        });
    }
    if m.fallback {
        log::info!("erf excitation at tf = {tf} s is not unimodal in sigma; used grid scan");
    }
    Ok(SigmaOptimum {
        tf,
        sigma: m.x.exp(),
        excitation: m.value,
        fallback: m.fallback,
        evaluations: m.evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaScan {
    pub best: f64,
    /// `(scale, mean of ln excitation over the tf set)`
    pub scores: Vec<(f64, f64)>,
    /// The best scale is an end point of the scanned range.
    pub at_endpoint: bool,
}

/// Grid scan of the frequency multiplier of an analytic family, scoring each
/// scale by the mean log of the full-simulation excitation over `tfs`.
pub fn scan_omega_scale(ctx: &Context, family: ComFamily, scales: &[f64], tfs: &[f64]) -> Result<OmegaScan> {
    if scales.is_empty() || tfs.is_empty() {
        return Err(Error::InvalidParameter("omega scan needs scales and durations".into()));
    }
    let pairs: Vec<(f64, f64)> = scales.iter().flat_map(|&s| tfs.iter().map(move |&t| (s, t))).collect();
    let values: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(s, tf)| Ok(ctx.simulate(&ctx.analytic(family, tf, s)?)?.total_quanta_omega1))
        .collect();
    let mut excitation = Vec::with_capacity(values.len());
    for v in values {
        excitation.push(match v {
            Ok(e) => e,
            Err(Error::IonCrossing(..)) => f64::INFINITY,
            Err(e) => return Err(e),
        });
    }
    let mut scores = Vec::with_capacity(scales.len());
    for (i, &s) in scales.iter().enumerate() {
        let chunk = &excitation[i * tfs.len()..(i + 1) * tfs.len()];
        let sum: f64 = chunk.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).sum();
        scores.push((s, sum / tfs.len() as f64));
    }
    let k = (0..scores.len())
        .min_by(|&a, &b| scores[a].1.total_cmp(&scores[b].1))
        .expect("non-empty scan");
    let at_endpoint = scores.len() > 1 && (k == 0 || k == scores.len() - 1);
    if at_endpoint {
        log::warn!(
            "best omega scale {} is at the end of the scanned range [{}, {}]",
            scores[k].0,
            scales[0],
            scales[scales.len() - 1]
        );
    }
    Ok(OmegaScan {
        best: scores[k].0,
        scores,
        at_endpoint,
    })
}

/// A trajectory file: either a bare trajectory or a saved design result.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrajectoryFile {
    Design(DesignResult),
    Trajectory(TrajectorySpec),
}

impl TrajectoryFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: not a trajectory: {e}", path.display())))
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        match self {
            TrajectoryFile::Design(d) => d.trajectory(),
            TrajectoryFile::Trajectory(s) => Trajectory::try_from(s),
        }
    }
}

const REQUIRED_COLUMNS: [&str; 3] = ["kind", "tf_s", "total_quanta_omega1"];

/// Writes a matplotlib script plotting total excitation against tf, one series
/// per kind. The script reads the dataset by its path relative to the script.
/// Returns the series names. Nothing is written on error.
pub fn emit_plot_script(dataset: &Path, script: &Path, scale: PlotScale) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_path(dataset)
        .map_err(|e| Error::Config(format!("cannot read dataset {}: {e}", dataset.display())))?;
    let header = reader.headers().map_err(csv_error)?.clone();
    let missing: Vec<&str> = REQUIRED_COLUMNS
        .iter()
        .copied()
        .filter(|c| !header.iter().any(|h| h == *c))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "dataset {} lacks column(s): {}",
            dataset.display(),
            missing.join(", ")
        )));
    }
    let kind_col = header.iter().position(|h| h == "kind").expect("checked");
    let mut series: Vec<String> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        let k = rec.get(kind_col).unwrap_or_default().to_string();
        if !series.contains(&k) {
            series.push(k);
        }
    }
    if series.is_empty() {
        return Err(Error::Config(format!("dataset {} has no rows", dataset.display())));
    }

    let script_dir = script.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let data_abs = std::path::absolute(dataset)?;
    let dir_abs = std::path::absolute(script_dir)?;
    let rel = pathdiff::diff_paths(&data_abs, &dir_abs).unwrap_or(data_abs);
    let rel = rel.to_string_lossy().replace('\\', "/");
    let yscale = match scale {
        PlotScale::Log => "log",
        PlotScale::Linear => "linear",
    };
    let stem = script.file_stem().map_or("plot".into(), |s| s.to_string_lossy().into_owned());
    let text = format!(
        r#"#!/usr/bin/env python3
# Final motional excitation against transport duration.
import csv
import math
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, {rel:?})
SERIES = {series:?}

curves = {{name: ([], []) for name in SERIES}}
with open(DATA, newline="") as fh:
    for row in csv.DictReader(fh):
        if row.get("error") or not row["total_quanta_omega1"]:
            continue
        value = float(row["total_quanta_omega1"])
        if not math.isfinite(value):
            continue
        xs, ys = curves.setdefault(row["kind"], ([], []))
        xs.append(float(row["tf_s"]) * 1e6)
        ys.append(value)

fig, ax = plt.subplots(figsize=(6.4, 4.2))
for name, (xs, ys) in curves.items():
    if {log_floor}:
        pairs = [(x, y) for x, y in zip(xs, ys) if y > 0]
        xs, ys = [p[0] for p in pairs], [p[1] for p in pairs]
    ax.plot(xs, ys, marker=".", linewidth=1, label=name)
ax.set_yscale("{yscale}")
ax.set_xlabel("transport duration (us)")
ax.set_ylabel("excitation (quanta of ion 1)")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(HERE, "{stem}.png"), dpi=150)
"#,
        log_floor = if scale == PlotScale::Log { "True" } else { "False" },
    );
    std::fs::write(script, text)?;
    Ok(series)
}
