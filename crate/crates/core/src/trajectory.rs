//! Trap-minimum trajectories `Q0(t)` for a transport of length `d` in time `tf`.
//!
//! Every family is evaluated in the dimensionless time `s = t / tf` and has
//! closed-form first and second derivatives. Outside `[0, tf]` the trap is at
//! rest: `Q0 = 0` before the transport and `Q0 = d` after it.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Coefficients `b_n` of the centre-of-mass polynomial `Qc(s) = d sum b_n s^n`.
pub const NONIC_COM_COEFFS: [f64; 10] = [0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0];

/// Coefficients `c_0..c_3` of the cosine series for `Qc`, normalised by 256.
pub const COSINE_COM_COEFFS: [f64; 4] = [128.0, -150.0, 25.0, -3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindName {
    Linear,
    NonicAnalytic,
    Cosine,
    Erf,
    DesignedNonic,
}

impl KindName {
    pub const ALL: [KindName; 5] = [
        KindName::Linear,
        KindName::NonicAnalytic,
        KindName::Cosine,
        KindName::Erf,
        KindName::DesignedNonic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KindName::Linear => "linear",
            KindName::NonicAnalytic => "nonic-analytic",
            KindName::Cosine => "cosine",
            KindName::Erf => "erf",
            KindName::DesignedNonic => "designed-nonic",
        }
    }
}

impl fmt::Display for KindName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KindName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KindName::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown trajectory kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryKind {
    /// Constant velocity `d / tf`.
    Linear,
    /// Nonic centre-of-mass polynomial corrected for a trap of frequency `omega`.
    NonicAnalytic { omega: f64 },
    /// Cosine-series centre-of-mass trajectory corrected for `omega`.
    Cosine { omega: f64 },
    /// Gaussian velocity profile of width `sigma` (s).
    Erf { sigma: f64 },
    /// `Q0(s) = d sum_{n=3}^{9} x_n s^n` with `x_6..x_9` free and `x_3..x_5`
    /// fixed by the end conditions.
    DesignedNonic { free: [f64; 4] },
}

impl TrajectoryKind {
    pub fn name(&self) -> KindName {
        match self {
            TrajectoryKind::Linear => KindName::Linear,
            TrajectoryKind::NonicAnalytic { .. } => KindName::NonicAnalytic,
            TrajectoryKind::Cosine { .. } => KindName::Cosine,
            TrajectoryKind::Erf { .. } => KindName::Erf,
            TrajectoryKind::DesignedNonic { .. } => KindName::DesignedNonic,
        }
    }
}

/// Value, first and second time derivative of `Q0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrapState {
    pub q0: f64,
    pub dq0: f64,
    pub ddq0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    tf: f64,
    d: f64,
    kind: TrajectoryKind,
    /// Power-series coefficients in `s` (m) for the polynomial families.
    poly: Option<[f64; 10]>,
}

impl Trajectory {
    pub fn new(kind: TrajectoryKind, tf: f64, d: f64) -> Result<Self> {
        if !(tf.is_finite() && tf > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "transport time must be positive, got {tf:e}"
            )));
        }
        if !d.is_finite() {
            return Err(Error::InvalidParameter("transport distance must be finite".into()));
        }
        let poly = match kind {
            TrajectoryKind::Linear => None,
            TrajectoryKind::NonicAnalytic { omega } | TrajectoryKind::Cosine { omega } => {
                if !(omega.is_finite() && omega > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "trap frequency must be positive, got {omega:e}"
                    )));
                }
                if matches!(kind, TrajectoryKind::NonicAnalytic { .. }) {
                    Some(NONIC_COM_COEFFS.map(|b| d * b))
                } else {
                    None
                }
            }
            TrajectoryKind::Erf { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "erf width must be positive, got {sigma:e}"
                    )));
                }
                None
            }
            TrajectoryKind::DesignedNonic { free } => {
                if free.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite nonic coefficient".into()));
                }
                Some(designed_coefficients(&free).map(|x| d * x))
            }
        };
        Ok(Self { tf, d, kind, poly })
    }

    pub fn linear(tf: f64, d: f64) -> Result<Self> {
        Self::new(TrajectoryKind::Linear, tf, d)
    }

    pub fn nonic_analytic(tf: f64, d: f64, omega: f64) -> Result<Self> {
        Self::new(TrajectoryKind::NonicAnalytic { omega }, tf, d)
    }

    pub fn cosine(tf: f64, d: f64, omega: f64) -> Result<Self> {
        Self::new(TrajectoryKind::Cosine { omega }, tf, d)
    }

    pub fn erf(tf: f64, d: f64, sigma: f64) -> Result<Self> {
        Self::new(TrajectoryKind::Erf { sigma }, tf, d)
    }

    pub fn designed_nonic(tf: f64, d: f64, free: [f64; 4]) -> Result<Self> {
        Self::new(TrajectoryKind::DesignedNonic { free }, tf, d)
    }

    /// A trap that never moves, as a zero-distance linear ramp.
    pub fn stationary(tf: f64) -> Result<Self> {
        Self::linear(tf, 0.0)
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn distance(&self) -> f64 {
        self.d
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    /// Coefficients `a_n` of `Q0(t) = sum a_n t^n` for the polynomial families.
    pub fn raw_polynomial(&self) -> Option<[f64; 10]> {
        let c = self.poly?;
        let mut a = [0.0; 10];
        let mut scale = 1.0;
        for n in 0..10 {
            a[n] = c[n] / scale;
            scale *= self.tf;
        }
        if let TrajectoryKind::NonicAnalytic { omega } = self.kind {
            // Q0 = Qc + Qc''/omega^2
            for n in 2..10 {
                a[n - 2] += (n * (n - 1)) as f64 * a[n] / (omega * omega);
            }
        }
        Some(a)
    }

    /// Clamped evaluation: the trap rests at 0 before and at `d` after the
    /// transport window.
    pub fn evaluate(&self, t: f64) -> TrapState {
        if t < 0.0 {
            TrapState::default()
        } else if t > self.tf {
            TrapState {
                q0: self.d,
                ..TrapState::default()
            }
        } else {
            self.evaluate_unclamped(t)
        }
    }

    /// The family's closed form at any `t`, ignoring the rest phases. On
    /// `[0, tf]` this gives the one-sided limits at the window edges.
    pub fn evaluate_unclamped(&self, t: f64) -> TrapState {
        let tf = self.tf;
        let d = self.d;
        let s = t / tf;
        match self.kind {
            TrajectoryKind::Linear => TrapState {
                q0: d * s,
                dq0: d / tf,
                ddq0: 0.0,
            },
            TrajectoryKind::NonicAnalytic { omega } => {
                let p = poly_derivatives(self.poly.as_ref().expect("nonic coefficients"), s);
                let kappa = 1.0 / (omega * tf).powi(2);
                TrapState {
                    q0: p[0] + kappa * p[2],
                    dq0: (p[1] + kappa * p[3]) / tf,
                    ddq0: (p[2] + kappa * p[4]) / (tf * tf),
                }
            }
            TrajectoryKind::Cosine { omega } => {
                let c = cosine_derivatives(d, s);
                let kappa = 1.0 / (omega * tf).powi(2);
                TrapState {
                    q0: c[0] + kappa * c[2],
                    dq0: (c[1] + kappa * c[3]) / tf,
                    ddq0: (c[2] + kappa * c[4]) / (tf * tf),
                }
            }
            TrajectoryKind::Erf { sigma } => {
                let k = 2.0 * std::f64::consts::SQRT_2 * sigma;
                let den = libm::erf(tf / k);
                let z = (tf - 2.0 * t) / k;
                let g = (-z * z).exp() / PI.sqrt();
                TrapState {
                    q0: 0.5 * d * (1.0 - libm::erf(z) / den),
                    dq0: 2.0 * d * g / (k * den),
                    ddq0: 8.0 * d * z * g / (k * k * den),
                }
            }
            TrajectoryKind::DesignedNonic { .. } => {
                let p = poly_derivatives(self.poly.as_ref().expect("nonic coefficients"), s);
                TrapState {
                    q0: p[0],
                    dq0: p[1] / tf,
                    ddq0: p[2] / (tf * tf),
                }
            }
        }
    }

    /// Centre-of-mass target `Qc(t)` for the two analytic families.
    pub fn com_target(&self, t: f64) -> Option<f64> {
        let s = (t / self.tf).clamp(0.0, 1.0);
        match self.kind {
            TrajectoryKind::NonicAnalytic { .. } => Some(poly_derivatives(self.poly.as_ref()?, s)[0]),
            TrajectoryKind::Cosine { .. } => Some(cosine_derivatives(self.d, s)[0]),
            _ => None,
        }
    }

    pub fn verify_boundaries(&self) -> BoundaryReport {
        let a = self.evaluate_unclamped(0.0);
        let b = self.evaluate_unclamped(self.tf);
        BoundaryReport {
            q0_start: a.q0,
            q0_end: b.q0 - self.d,
            dq0_start: a.dq0,
            dq0_end: b.dq0,
            ddq0_start: a.ddq0,
            ddq0_end: b.ddq0,
            distance: self.d,
            tf: self.tf,
        }
    }

    /// Extremes of `Q0` over `samples + 1` evenly spaced points of `[0, tf]`.
    pub fn excursion(&self, samples: usize) -> Excursion {
        let samples = samples.max(1);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..=samples {
            let q = self.evaluate(self.tf * k as f64 / samples as f64).q0;
            min = min.min(q);
            max = max.max(q);
        }
        Excursion {
            min,
            max,
            below_start: (-min).max(0.0),
            beyond_end: (max - self.d).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excursion {
    pub min: f64,
    pub max: f64,
    /// How far the trap goes behind its starting point, m.
    pub below_start: f64,
    /// How far it overshoots the destination, m.
    pub beyond_end: f64,
}

/// Boundary-condition residuals of a trajectory (m, m/s, m/s^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub q0_start: f64,
    pub q0_end: f64,
    pub dq0_start: f64,
    pub dq0_end: f64,
    pub ddq0_start: f64,
    pub ddq0_end: f64,
    #[serde(skip)]
    distance: f64,
    #[serde(skip)]
    tf: f64,
}

impl BoundaryReport {
    pub fn residuals(&self) -> [f64; 6] {
        [
            self.q0_start,
            self.q0_end,
            self.dq0_start,
            self.dq0_end,
            self.ddq0_start,
            self.ddq0_end,
        ]
    }

    /// Largest residual with positions scaled by `d`, velocities by `d/tf` and
    /// accelerations by `d/tf^2`.
    pub fn max_scaled(&self) -> f64 {
        let d = self.distance.abs().max(f64::MIN_POSITIVE);
        let scales = [
            d,
            d,
            d / self.tf,
            d / self.tf,
            d / (self.tf * self.tf),
            d / (self.tf * self.tf),
        ];
        self.residuals()
            .iter()
            .zip(scales)
            .fold(0.0, |m, (r, s)| m.max(r.abs() / s))
    }

    pub fn within(&self, tol: f64) -> bool {
        self.residuals().iter().all(|r| r.is_finite()) && self.max_scaled() < tol
    }
}

/// Values of `P, P', P'', P''', P''''` for `P(s) = sum c_n s^n`.
fn poly_derivatives(c: &[f64; 10], s: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for n in (k..10).rev() {
            let falling: f64 = (0..k).map(|j| (n - j) as f64).product();
            acc = acc * s + falling * c[n];
        }
        *o = acc;
    }
    out
}

/// `Qc(s)` of the cosine family and its first four `s`-derivatives.
fn cosine_derivatives(d: f64, s: f64) -> [f64; 5] {
    let c = &COSINE_COM_COEFFS;
    let mut out = [d * c[0] / 256.0, 0.0, 0.0, 0.0, 0.0];
    for n in 1..4 {
        let k = (2 * n - 1) as f64 * PI;
        let (sn, cs) = (k * s).sin_cos();
        let a = d * c[n] / 256.0;
        out[0] += a * cs;
        out[1] -= a * k * sn;
        out[2] -= a * k * k * cs;
        out[3] += a * k * k * k * sn;
        out[4] += a * k.powi(4) * cs;
    }
    out
}

/// Dimensionless coefficients `x_0..x_9` of a designed nonic. The quintic part
/// `x_3..x_5` enforces `P(1) = 1, P'(1) = P''(1) = 0` given the free `x_6..x_9`;
/// `x_0 = x_1 = x_2 = 0` enforce the conditions at `s = 0`.
pub fn designed_coefficients(free: &[f64; 4]) -> [f64; 10] {
    let mut x = [0.0; 10];
    x[6..10].copy_from_slice(free);
    let r0 = 1.0 - free.iter().sum::<f64>();
    let r1 = -(6..10).map(|n| n as f64 * x[n]).sum::<f64>();
    let r2 = -(6..10).map(|n| (n * (n - 1)) as f64 * x[n]).sum::<f64>();
    x[3] = 10.0 * r0 - 4.0 * r1 + 0.5 * r2;
    x[4] = -15.0 * r0 + 7.0 * r1 - r2;
    x[5] = 6.0 * r0 - 3.0 * r1 + 0.5 * r2;
    x
}

/// Serialised form: a kind tag plus a flat parameter list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kind: KindName,
    pub tf_s: f64,
    pub d_m: f64,
    /// `[]` for linear, `[omega]` for the analytic families, `[sigma]` for erf,
    /// `[x6, x7, x8, x9]` for a designed nonic.
    pub params: Vec<f64>,
}

impl From<&Trajectory> for TrajectorySpec {
    fn from(t: &Trajectory) -> Self {
        let params = match t.kind {
            TrajectoryKind::Linear => vec![],
            TrajectoryKind::NonicAnalytic { omega } | TrajectoryKind::Cosine { omega } => vec![omega],
            TrajectoryKind::Erf { sigma } => vec![sigma],
            TrajectoryKind::DesignedNonic { free } => free.to_vec(),
        };
        Self {
            kind: t.kind.name(),
            tf_s: t.tf,
            d_m: t.d,
            params,
        }
    }
}

impl TryFrom<&TrajectorySpec> for Trajectory {
    type Error = Error;

    fn try_from(spec: &TrajectorySpec) -> Result<Self> {
        let want = match spec.kind {
            KindName::Linear => 0,
            KindName::NonicAnalytic | KindName::Cosine | KindName::Erf => 1,
            KindName::DesignedNonic => 4,
        };
        if spec.params.len() != want {
            return Err(Error::Config(format!(
                "trajectory kind '{}' takes {want} parameters, got {}",
                spec.kind,
                spec.params.len()
            )));
        }
        let p = &spec.params;
        let kind = match spec.kind {
            KindName::Linear => TrajectoryKind::Linear,
            KindName::NonicAnalytic => TrajectoryKind::NonicAnalytic { omega: p[0] },
            KindName::Cosine => TrajectoryKind::Cosine { omega: p[0] },
            KindName::Erf => TrajectoryKind::Erf { sigma: p[0] },
            KindName::DesignedNonic => TrajectoryKind::DesignedNonic {
                free: [p[0], p[1], p[2], p[3]],
            },
        };
        Trajectory::new(kind, spec.tf_s, spec.d_m)
    }
}
