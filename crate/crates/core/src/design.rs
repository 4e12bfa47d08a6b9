//! Invariant-based inverse engineering of the trap trajectory.
//!
//! In the frame of the moving trap each mass-weighted mode `nu` obeys the
//! forced oscillator
//!
//! ```text
//! alpha'' + Omega_nu^2 alpha = -Gamma_nu Q0''(t)
//! ```
//!
//! where `alpha` is the centre of the mode's invariant eigenstates. A transport
//! leaves mode `nu` unexcited exactly when `alpha(tf) = alpha'(tf) = 0` for the
//! solution starting from rest.

use serde::{Deserialize, Serialize};

use crate::chain::{ChainConfig, NormalModeBasis};
use crate::dynamics::{ExcitationReport, ModeExcitation};
use crate::integrate::{self, DenseStep, Dopri5Options, Tolerances};
use crate::linalg::{self, Matrix};
use crate::trajectory::{Trajectory, TrajectorySpec};
use crate::{Error, Result};

/// Relative tolerance used for auxiliary-equation integrations.
pub const AUXILIARY_REL_TOL: f64 = 1e-14;

/// Design residuals must stay below this fraction of `max|Gamma| d`.
pub const DESIGN_TOLERANCE: f64 = 1e-9;

/// Condition numbers above this reject a design.
pub const MAX_CONDITION: f64 = 1e12;

/// Solution of one mode's auxiliary equation over `[0, tf]`.
#[derive(Debug, Clone)]
pub struct AuxiliarySolution {
    pub omega: f64,
    pub gamma: f64,
    /// Accepted integrator steps; `t` values are strictly increasing.
    pub t: Vec<f64>,
    pub alpha: Vec<f64>,
    pub dalpha: Vec<f64>,
    /// Velocity jumps from trap-velocity discontinuities at `t = 0` and `t = tf`.
    pub kick_start: f64,
    pub kick_end: f64,
    steps: Vec<DenseStep>,
}

impl AuxiliarySolution {
    /// `(alpha, alpha')` just after the trap stops.
    pub fn final_state(&self) -> (f64, f64) {
        let n = self.alpha.len() - 1;
        (self.alpha[n], self.dalpha[n] + self.kick_end)
    }

    /// Mode energy `(alpha'^2 + Omega^2 alpha^2) / 2` after transport, J.
    pub fn final_energy(&self) -> f64 {
        let (a, da) = self.final_state();
        0.5 * (da * da + self.omega * self.omega * a * a)
    }

    /// Interpolated `(alpha, alpha')` at `t` inside `[0, tf]`.
    pub fn eval(&self, t: f64) -> Option<(f64, f64)> {
        if self.steps.is_empty() {
            return (t == self.t[0]).then(|| (self.alpha[0], self.dalpha[0]));
        }
        let idx = self.steps.partition_point(|s| s.t1() < t);
        let step = self.steps.get(idx)?;
        if t < step.t0 {
            return None;
        }
        let y = step.interpolate(t);
        Some((y[0], y[1]))
    }
}

/// Integrates the auxiliary equation of a mode with frequency `omega` and
/// driving coefficient `gamma` for the trajectory `traj`, starting at rest.
///
/// A jump `dv` in the trap velocity at either end of the window kicks the mode
/// velocity by `-gamma dv`.
pub fn solve_auxiliary(omega: f64, gamma: f64, traj: &Trajectory) -> Result<AuxiliarySolution> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mode frequency must be positive, got {omega:e}"
        )));
    }
    let tf = traj.tf();
    let start = traj.evaluate_unclamped(0.0);
    let end = traj.evaluate_unclamped(tf);
    let kick_start = -gamma * start.dq0;
    let kick_end = gamma * end.dq0;

    // Keep the absolute tolerance on the scale of a static displacement by the
    // whole distance, so that zero-forcing modes still integrate cleanly.
    let scale = (gamma.abs() * traj.distance().abs()).max(f64::MIN_POSITIVE);
    let opts = Dopri5Options {
        tolerances: Tolerances {
            rel: AUXILIARY_REL_TOL,
            abs: vec![AUXILIARY_REL_TOL * scale, AUXILIARY_REL_TOL * scale * omega],
        },
        max_step: tf / 16.0,
        max_steps: 10_000_000,
    };
    let w2 = omega * omega;
    let mut t = vec![0.0];
    let mut alpha = vec![0.0];
    let mut dalpha = vec![kick_start];
    let mut steps = Vec::new();
    integrate::dopri5(
        |time, y, dy| {
            dy[0] = y[1];
            dy[1] = -w2 * y[0] - gamma * traj.evaluate_unclamped(time).ddq0;
        },
        0.0,
        &[0.0, kick_start],
        tf,
        &opts,
        |step| {
            let y = step.end();
            t.push(step.t1());
            alpha.push(y[0]);
            dalpha.push(y[1]);
            steps.push(step.clone());
            Ok(())
        },
    )?;
    Ok(AuxiliarySolution {
        omega,
        gamma,
        t,
        alpha,
        dalpha,
        kick_start,
        kick_end,
        steps,
    })
}

/// Excitation of the harmonic, uncoupled normal-mode model after transport.
pub fn uncoupled_excitation(
    config: &ChainConfig,
    basis: &NormalModeBasis,
    traj: &Trajectory,
) -> Result<ExcitationReport> {
    let hbar = config.hbar();
    let modes = basis
        .omega
        .iter()
        .zip(&basis.gamma)
        .map(|(&omega, &gamma)| {
            let energy = solve_auxiliary(omega, gamma, traj)?.final_energy();
            Ok(ModeExcitation {
                omega,
                energy,
                quanta: energy / (hbar * omega),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExcitationReport::from_modes(modes, hbar * config.omega1()))
}

/// Outcome of [`design_nonic`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignResult {
    pub trajectory: TrajectorySpec,
    /// `a_0..a_9` of `Q0(t) = sum a_n t^n`, SI.
    pub coefficients: [f64; 10],
    /// `alpha(tf)` and `alpha'(tf)/Omega` per designed mode, kg^1/2 m, from an
    /// independent re-integration with the final coefficients.
    pub residuals: Vec<f64>,
    /// Residual bound used to accept the design, kg^1/2 m.
    pub tolerance: f64,
    /// 1-norm condition number of the linear design system.
    pub condition: f64,
    /// Indices of the modes whose end conditions were imposed.
    pub driven_modes: Vec<usize>,
}

impl DesignResult {
    pub fn trajectory(&self) -> Result<Trajectory> {
        Trajectory::try_from(&self.trajectory)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Final `(alpha, alpha'/Omega)` of a mode for the given trajectory.
fn end_values(omega: f64, gamma: f64, traj: &Trajectory) -> Result<[f64; 2]> {
    let (a, da) = solve_auxiliary(omega, gamma, traj)?.final_state();
    Ok([a, da / omega])
}

/// Numerically designed nonic `Q0(t) = sum_{n=0}^9 a_n t^n` for a two-ion chain.
///
/// `a_0..a_5` are fixed by `Q0(0) = 0`, `Q0(tf) = d` and zero velocity and
/// acceleration at both ends; `a_6..a_9` are chosen so that both modes end at
/// rest in their auxiliary frame. The end values are affine in the free
/// coefficients, so the map is built from one integration per coefficient plus
/// one for the quintic base and then inverted as a linear system.
///
/// A mode with vanishing `Gamma` is never driven and is left out; with a
/// single driven mode only `a_6, a_7` are used.
pub fn design_nonic(
    config: &ChainConfig,
    basis: &NormalModeBasis,
    d: f64,
    tf: f64,
) -> Result<DesignResult> {
    if config.num_ions() != 2 {
        return Err(Error::InvalidParameter(format!(
            "numerical nonic design needs a two-ion chain, got {} ions",
            config.num_ions()
        )));
    }
    if !(tf.is_finite() && tf > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "transport time must be positive, got {tf:e}"
        )));
    }
    let gamma_max = basis.gamma.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    let driven: Vec<usize> = (0..basis.num_modes())
        .filter(|&nu| basis.gamma[nu].abs() > 1e-10 * config.total_mass().sqrt())
        .collect();
    let unknowns = 2 * driven.len();
    let tolerance = DESIGN_TOLERANCE * gamma_max * d.abs();

    // Unit-distance designs; everything scales linearly with d.
    let evaluate = |free: [f64; 4]| -> Result<Vec<f64>> {
        let traj = Trajectory::designed_nonic(tf, 1.0, free)?;
        let mut out = Vec::with_capacity(unknowns);
        for &nu in &driven {
            out.extend(end_values(basis.omega[nu], basis.gamma[nu], &traj)?);
        }
        Ok(out)
    };

    let (free, condition) = if unknowns == 0 {
        ([0.0; 4], 1.0)
    } else {
        let base = evaluate([0.0; 4])?;
        let mut jac = Matrix::zeros(unknowns);
        for k in 0..unknowns {
            let mut unit = [0.0; 4];
            unit[k] = 1.0;
            let col = evaluate(unit)?;
            for i in 0..unknowns {
                jac[(i, k)] = col[i] - base[i];
            }
        }
        let condition = linalg::condition_number(&jac).map_err(|_| {
            Error::DesignFailure(format!("singular design system at tf = {tf:e} s; try a different tf"))
        })?;
        if !(condition <= MAX_CONDITION) {
            return Err(Error::DesignFailure(format!(
                "design system ill-conditioned (condition {condition:e}) at tf = {tf:e} s; try a different tf"
            )));
        }
        let rhs: Vec<f64> = base.iter().map(|b| -b).collect();
        let x = linalg::Lu::new(&jac)?.solve(&rhs);
        let mut free = [0.0; 4];
        free[..unknowns].copy_from_slice(&x);
        (free, condition)
    };

    // Independent re-integration with the final coefficients at full scale.
    let traj = Trajectory::designed_nonic(tf, d, free)?;
    let mut residuals = Vec::with_capacity(unknowns);
    for &nu in &driven {
        residuals.extend(end_values(basis.omega[nu], basis.gamma[nu], &traj)?);
    }
    let result = DesignResult {
        trajectory: TrajectorySpec::from(&traj),
        coefficients: traj.raw_polynomial().expect("polynomial family"),
        residuals,
        tolerance,
        condition,
        driven_modes: driven,
    };
    if result.max_residual() > tolerance {
        return Err(Error::DesignFailure(format!(
            "end conditions not met at tf = {tf:e} s (residual {:e} > {tolerance:e})",
            result.max_residual()
        )));
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComFamily {
    Nonic,
    Cosine,
}

/// Analytic trajectory that leaves the centre of mass of a chain with
/// frequency `omega` unexcited: `Q0 = Qc + Qc'' / omega'^2` with
/// `omega' = omega_scale * omega`.
pub fn design_com_analytic(
    family: ComFamily,
    omega: f64,
    d: f64,
    tf: f64,
    omega_scale: f64,
) -> Result<Trajectory> {
    if !(omega_scale.is_finite() && omega_scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "omega scale must be positive, got {omega_scale}"
        )));
    }
    let w = omega * omega_scale;
    match family {
        ComFamily::Nonic => Trajectory::nonic_analytic(tf, d, w),
        ComFamily::Cosine => Trajectory::cosine(tf, d, w),
    }
}
