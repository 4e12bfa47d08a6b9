//! Classical propagation of the full Coulomb chain and excitation readout.
//!
//! The equations of motion `q_i' = p_i / m_i`, `p_i' = F_i(q, Q0(t))` are
//! integrated in the frame of the moving trap: the state holds the
//! displacements `y_i = q_i - Q0(t) - delta_i` from the instantaneous
//! equilibrium and the velocities `w_i = q_i' - Q0'(t)`, so that
//!
//! ```text
//! y_i' = w_i,    w_i' = F_i(y + delta) / m_i - Q0''(t)
//! ```
//!
//! The transport distance drops out of the state, which keeps the small final
//! oscillation resolvable to well below a vibrational quantum. The time span is
//! split at `t = 0` and `t = tf`, where the trap velocity may jump; the
//! lab-frame state is continuous across those points.

use std::io::Write;

use serde::Serialize;

use crate::chain::{self, ChainConfig, NormalModeBasis, PhaseState};
use crate::integrate::{self, Dopri5Options, StepStats, Tolerances};
use crate::trajectory::{Trajectory, TrapState};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    /// Absolute position tolerance, m. Defaults to `rel_tol` times the crystal
    /// length scale.
    pub abs_tol_position: Option<f64>,
    /// Absolute momentum tolerance, kg m/s. Defaults to the position tolerance
    /// times `m_i omega1`.
    pub abs_tol_momentum: Option<f64>,
    /// Largest allowed step, s.
    pub max_step: Option<f64>,
    /// Record the lab-frame state after every accepted step.
    pub dense_output: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol_position: None,
            abs_tol_momentum: None,
            max_step: None,
            dense_output: false,
        }
    }
}

impl IntegratorOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.rel_tol)
            || self.abs_tol_position.is_some_and(|x| !ok(x))
            || self.abs_tol_momentum.is_some_and(|x| !ok(x))
            || self.max_step.is_some_and(|x| !ok(x))
        {
            return Err(Error::InvalidParameter("integrator tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeExcitation {
    /// rad/s
    pub omega: f64,
    /// J
    pub energy: f64,
    pub quanta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcitationReport {
    pub modes: Vec<ModeExcitation>,
    /// Sum of mode energies, J.
    pub total_energy: f64,
    /// `total_energy / (hbar omega1)`.
    pub total_quanta_omega1: f64,
}

impl ExcitationReport {
    pub fn from_modes(modes: Vec<ModeExcitation>, hbar_omega1: f64) -> Self {
        let total_energy = modes.iter().map(|m| m.energy).sum();
        Self {
            modes,
            total_energy,
            total_quanta_omega1: total_energy / hbar_omega1,
        }
    }

    pub fn quanta(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.quanta).collect()
    }

    pub fn total_mode_quanta(&self) -> f64 {
        self.modes.iter().map(|m| m.quanta).sum()
    }
}

/// Lab-frame snapshot recorded with dense output.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSample {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub q0: f64,
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub final_state: PhaseState,
    pub samples: Vec<DenseSample>,
    pub stats: StepStats,
}

#[derive(Clone, Copy)]
enum Phase {
    Before,
    During,
    After,
}

impl Phase {
    fn trap(self, traj: &Trajectory, t: f64) -> TrapState {
        match self {
            Phase::Before => TrapState::default(),
            Phase::During => traj.evaluate_unclamped(t),
            Phase::After => TrapState {
                q0: traj.distance(),
                ..TrapState::default()
            },
        }
    }
}

/// Integrates the chain from `initial` (taken at `t_span.0`) to `t_span.1`.
pub fn propagate(
    config: &ChainConfig,
    traj: &Trajectory,
    t_span: (f64, f64),
    initial: &PhaseState,
    opts: &IntegratorOptions,
) -> Result<Propagation> {
    let offsets = chain::equilibrium(config, 0.0)?;
    propagate_with_offsets(config, &offsets, traj, t_span, initial, opts)
}

fn propagate_with_offsets(
    config: &ChainConfig,
    offsets: &[f64],
    traj: &Trajectory,
    (t_start, t_end): (f64, f64),
    initial: &PhaseState,
    opts: &IntegratorOptions,
) -> Result<Propagation> {
    opts.validate()?;
    let n = config.num_ions();
    if initial.q.len() != n || initial.p.len() != n {
        return Err(Error::InvalidParameter(format!(
            "initial state must hold {n} positions and momenta"
        )));
    }
    if let Some((i, j)) = initial.ordering_violation() {
        return Err(Error::IonCrossing(i, j, t_start));
    }
    if !(t_end >= t_start) {
        return Err(Error::InvalidParameter("time span must be increasing".into()));
    }

    let masses = config.masses();
    let u0 = config.u0();
    let coulomb = config.coulomb();
    let ell = config.length_scale();
    let omega1 = config.omega1();
    let pos_tol = opts.abs_tol_position.unwrap_or(opts.rel_tol * ell);
    let vel_tol: Vec<f64> = masses
        .iter()
        .map(|m| match opts.abs_tol_momentum {
            Some(p) => p / m,
            None => pos_tol * omega1,
        })
        .collect();
    let mut abs = vec![pos_tol; n];
    abs.extend(vel_tol);

    // Keep every step well inside the stability region of the fastest mode,
    // bounded via Gershgorin on the mass-weighted Hessian.
    let h = chain::hessian(config, offsets);
    let omega_max_sq = (0..n)
        .map(|i| (0..n).map(|j| h[(i, j)].abs() / (masses[i] * masses[j]).sqrt()).sum::<f64>())
        .fold(0.0, f64::max);
    let stable_step = 0.1 * 2.0 * std::f64::consts::PI / omega_max_sq.sqrt();

    let tf = traj.tf();
    let mut cuts = vec![t_start];
    cuts.extend([0.0, tf].into_iter().filter(|&c| c > t_start && c < t_end));
    cuts.push(t_end);

    let mut q = initial.q.clone();
    let mut p = initial.p.clone();
    let mut stats = StepStats::default();
    let mut samples = Vec::new();
    if opts.dense_output {
        samples.push(DenseSample {
            t: t_start,
            q: q.clone(),
            p: p.clone(),
            q0: traj.evaluate(t_start).q0,
        });
    }

    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let phase = if b <= 0.0 {
            Phase::Before
        } else if a >= tf {
            Phase::After
        } else {
            Phase::During
        };
        let trap_a = phase.trap(traj, a);
        let mut y0 = Vec::with_capacity(2 * n);
        for i in 0..n {
            y0.push(q[i] - trap_a.q0 - offsets[i]);
        }
        for i in 0..n {
            y0.push(p[i] / masses[i] - trap_a.dq0);
        }
        let mut max_step = opts.max_step.unwrap_or(f64::INFINITY).min(stable_step);
        if let Phase::During = phase {
            max_step = max_step.min(tf / 16.0);
        }
        let dopts = Dopri5Options {
            tolerances: Tolerances {
                rel: opts.rel_tol,
                abs: abs.clone(),
            },
            max_step,
            max_steps: 50_000_000,
        };

        let mut x = vec![0.0; n];
        let mut forces = vec![0.0; n];
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            for i in 0..n {
                x[i] = y[i] + offsets[i];
            }
            chain::offsets_potential_forces(u0, coulomb, &x, &mut forces);
            let acc = phase.trap(traj, t).ddq0;
            for i in 0..n {
                dy[i] = y[n + i];
                dy[n + i] = forces[i] / masses[i] - acc;
            }
        };
        let (y1, seg_stats) = integrate::dopri5(rhs, a, &y0, b, &dopts, |step| {
            let y = step.end();
            let t = step.t1();
            for i in 0..n.saturating_sub(1) {
                if !(y[i] + offsets[i] > y[i + 1] + offsets[i + 1]) {
                    return Err(Error::IonCrossing(i, i + 1, t));
                }
            }
            if opts.dense_output {
                let trap = phase.trap(traj, t);
                samples.push(DenseSample {
                    t,
                    q: (0..n).map(|i| y[i] + offsets[i] + trap.q0).collect(),
                    p: (0..n).map(|i| masses[i] * (y[n + i] + trap.dq0)).collect(),
                    q0: trap.q0,
                });
            }
            Ok(())
        })?;
        stats.accepted += seg_stats.accepted;
        stats.rejected += seg_stats.rejected;
        stats.evaluations += seg_stats.evaluations;

        let trap_b = phase.trap(traj, b);
        for i in 0..n {
            q[i] = y1[i] + offsets[i] + trap_b.q0;
            p[i] = masses[i] * (y1[n + i] + trap_b.dq0);
        }
    }

    Ok(Propagation {
        final_state: PhaseState { t: t_end, q, p },
        samples,
        stats,
    })
}

/// Per-mode energies about the equilibrium of a static trap centred at `q0_final`.
pub fn measure_excitation(
    config: &ChainConfig,
    basis: &NormalModeBasis,
    final_state: &PhaseState,
    q0_final: f64,
) -> ExcitationReport {
    let masses = config.masses();
    let (coords, momenta) = basis.project(&masses, &final_state.q, &final_state.p, q0_final);
    let hbar = config.hbar();
    let modes = basis
        .omega
        .iter()
        .zip(coords.iter().zip(&momenta))
        .map(|(&omega, (x, p))| {
            let energy = 0.5 * (p * p + omega * omega * x * x);
            ModeExcitation {
                omega,
                energy,
                quanta: energy / (hbar * omega),
            }
        })
        .collect();
    ExcitationReport::from_modes(modes, hbar * config.omega1())
}

/// Transports the chain from rest at equilibrium along `traj` and reports the
/// excitation at `tf`.
pub fn simulate_transport(
    config: &ChainConfig,
    basis: &NormalModeBasis,
    traj: &Trajectory,
    opts: &IntegratorOptions,
) -> Result<ExcitationReport> {
    let initial = PhaseState::at_rest(0.0, basis.offsets.clone());
    let run = propagate_with_offsets(config, &basis.offsets, traj, (0.0, traj.tf()), &initial, opts)?;
    Ok(measure_excitation(config, basis, &run.final_state, traj.distance()))
}

/// Kinetic plus potential energy above the minimum of a static trap at `q0`,
/// evaluated without forming the large absolute potential.
pub fn energy_above_minimum(config: &ChainConfig, offsets: &[f64], state: &PhaseState, q0: f64) -> f64 {
    let masses = config.masses();
    let n = masses.len();
    let y: Vec<f64> = (0..n).map(|i| state.q[i] - q0 - offsets[i]).collect();
    let mut e = 0.0;
    for i in 0..n {
        e += state.p[i] * state.p[i] / (2.0 * masses[i]);
        e += 0.5 * config.u0() * y[i] * (y[i] + 2.0 * offsets[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let r = offsets[i] - offsets[j];
            let dr = y[i] - y[j];
            e -= config.coulomb() * dr / (r * (r + dr));
        }
    }
    e
}

/// Durations `k 2 pi / omega`, `k >= 1`, inside `[tf_min, tf_max]`: the zeros
/// of the final excitation of a mode under a constant-velocity transport.
pub fn spectral_minima(omega: f64, tf_min: f64, tf_max: f64) -> Vec<f64> {
    if !(omega > 0.0) || !(tf_max >= tf_min) {
        return Vec::new();
    }
    let period = 2.0 * std::f64::consts::PI / omega;
    let first = (tf_min / period).ceil().max(1.0) as u64;
    let last = (tf_max / period).floor() as u64;
    (first..=last).map(|k| k as f64 * period).collect()
}

/// Writes dense samples as CSV: `t,q_1..q_N,p_1..p_N,Q0` with 12 significant digits.
pub fn write_dense_csv<W: Write>(samples: &[DenseSample], mut out: W) -> Result<()> {
    let n = samples.first().map_or(0, |s| s.q.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("q_{i}")));
    header.extend((1..=n).map(|i| format!("p_{i}")));
    header.push("Q0".into());
    writeln!(out, "{}", header.join(","))?;
    for s in samples {
        let mut row = vec![crate::sweep::format_float(s.t)];
        row.extend(s.q.iter().map(|v| crate::sweep::format_float(*v)));
        row.extend(s.p.iter().map(|v| crate::sweep::format_float(*v)));
        row.push(crate::sweep::format_float(s.q0));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
