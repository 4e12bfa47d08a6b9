//! Linear Coulomb chain in a harmonic well.
//!
//! Ions are indexed `0..N` with positions strictly decreasing in the index,
//! `q[0] > q[1] > ... > q[N-1]`. The potential energy is
//!
//! ```text
//! V = sum_i u0/2 (q_i - Q0)^2 + sum_{i<j} Cc / (q_i - q_j)
//! ```
//!
//! with `Cc = e^2 / (4 pi eps0)`.

use serde::{Deserialize, Serialize};

use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// CODATA 2018 values.
pub mod constants {
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

    /// Neutral-atom masses in u; the electron mass is neglected.
    pub const BE9_AMU: f64 = 9.012;
    pub const MG24_AMU: f64 = 23.985;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Species {
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
}

impl Species {
    /// Singly charged ion of the given mass in kg.
    pub fn new(mass: f64) -> Result<Self> {
        Self::with_charge(mass, constants::ELEMENTARY_CHARGE)
    }

    pub fn with_charge(mass: f64, charge: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ion mass must be positive, got {mass:e}"
            )));
        }
        if !(charge.is_finite() && charge > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ion charge must be positive, got {charge:e}"
            )));
        }
        Ok(Self { mass, charge })
    }

    pub fn from_amu(amu: f64) -> Result<Self> {
        Self::new(amu * constants::ATOMIC_MASS_UNIT)
    }

    pub fn beryllium9() -> Self {
        Self::from_amu(constants::BE9_AMU).expect("positive mass")
    }

    pub fn magnesium24() -> Self {
        Self::from_amu(constants::MG24_AMU).expect("positive mass")
    }
}

/// Ion chain, trap strength and transport distance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    species: Vec<Species>,
    u0: f64,
    distance: f64,
    coulomb: f64,
    hbar: f64,
}

impl ChainConfig {
    /// `u0` is the trap spring constant in N/m and `distance` the transport
    /// distance in m. All ions must carry the same charge.
    pub fn new(species: Vec<Species>, u0: f64, distance: f64) -> Result<Self> {
        if species.is_empty() {
            return Err(Error::InvalidParameter("chain needs at least one ion".into()));
        }
        if !(u0.is_finite() && u0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "trap spring constant must be positive, got {u0:e}"
            )));
        }
        if !(distance.is_finite() && distance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "transport distance must be non-negative, got {distance:e}"
            )));
        }
        let charge = species[0].charge;
        if species
            .iter()
            .any(|s| (s.charge - charge).abs() > 1e-12 * charge)
        {
            return Err(Error::InvalidParameter(
                "all ions must carry the same charge".into(),
            ));
        }
        let coulomb = charge * charge / (4.0 * std::f64::consts::PI * constants::VACUUM_PERMITTIVITY);
        Ok(Self {
            species,
            u0,
            distance,
            coulomb,
            hbar: constants::HBAR,
        })
    }

    /// Chooses `u0` so that the first ion alone oscillates at `omega1` (rad/s).
    pub fn from_trap_frequency(species: Vec<Species>, omega1: f64, distance: f64) -> Result<Self> {
        let m1 = species
            .first()
            .ok_or_else(|| Error::InvalidParameter("chain needs at least one ion".into()))?
            .mass;
        if !(omega1.is_finite() && omega1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "trap frequency must be positive, got {omega1:e}"
            )));
        }
        Self::new(species, m1 * omega1 * omega1, distance)
    }

    pub fn with_distance(&self, distance: f64) -> Result<Self> {
        Self::new(self.species.clone(), self.u0, distance)
    }

    pub fn num_ions(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn masses(&self) -> Vec<f64> {
        self.species.iter().map(|s| s.mass).collect()
    }

    pub fn u0(&self) -> f64 {
        self.u0
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// `Cc = e^2 / (4 pi eps0)` in J m.
    pub fn coulomb(&self) -> f64 {
        self.coulomb
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Single-ion frequency of the first ion, `sqrt(u0 / m1)`.
    pub fn omega1(&self) -> f64 {
        (self.u0 / self.species[0].mass).sqrt()
    }

    /// `m2 / m1`; `None` for a single ion.
    pub fn mass_ratio(&self) -> Option<f64> {
        (self.species.len() >= 2).then(|| self.species[1].mass / self.species[0].mass)
    }

    pub fn total_mass(&self) -> f64 {
        self.species.iter().map(|s| s.mass).sum()
    }

    /// Centre-of-mass frequency `sqrt(N u0 / M)`.
    pub fn com_omega(&self) -> f64 {
        (self.num_ions() as f64 * self.u0 / self.total_mass()).sqrt()
    }

    /// Two-ion reduced mass `m1 m2 / M`.
    pub fn reduced_mass(&self) -> Option<f64> {
        (self.species.len() == 2).then(|| {
            let (m1, m2) = (self.species[0].mass, self.species[1].mass);
            m1 * m2 / (m1 + m2)
        })
    }

    /// Two-ion relative-motion frequency, `omega_r^2 = (m1^2 + m2^2)/(2 m1 m2) omega^2`.
    pub fn relative_omega(&self) -> Option<f64> {
        (self.species.len() == 2).then(|| {
            let (m1, m2) = (self.species[0].mass, self.species[1].mass);
            ((m1 * m1 + m2 * m2) / (2.0 * m1 * m2)).sqrt() * self.com_omega()
        })
    }

    /// Length scale `(Cc / u0)^(1/3)` of the crystal.
    pub fn length_scale(&self) -> f64 {
        (self.coulomb / self.u0).cbrt()
    }
}

/// Positions and momenta of all ions at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn at_rest(t: f64, q: Vec<f64>) -> Self {
        let p = vec![0.0; q.len()];
        Self { t, q, p }
    }

    /// First adjacent pair violating `q[i] > q[i+1]`, if any.
    pub fn ordering_violation(&self) -> Option<(usize, usize)> {
        first_unordered(&self.q)
    }
}

fn first_unordered(q: &[f64]) -> Option<(usize, usize)> {
    q.windows(2).position(|w| !(w[0] > w[1])).map(|i| (i, i + 1))
}

fn check_positions(q: &[f64]) -> Result<()> {
    match first_unordered(q) {
        None => Ok(()),
        Some((i, j)) if q[i] == q[j] => Err(Error::SingularConfiguration(i, j)),
        Some((i, j)) => Err(Error::IonCrossing(i, j, f64::NAN)),
    }
}

/// Potential energy and exact forces `-dV/dq` at positions `q` with the trap
/// minimum at `q0`.
pub fn potential_forces(config: &ChainConfig, q: &[f64], q0: f64) -> Result<(f64, Vec<f64>)> {
    if q.len() != config.num_ions() {
        return Err(Error::InvalidParameter(format!(
            "expected {} positions, got {}",
            config.num_ions(),
            q.len()
        )));
    }
    check_positions(q)?;
    let x: Vec<f64> = q.iter().map(|qi| qi - q0).collect();
    let mut forces = vec![0.0; q.len()];
    let v = offsets_potential_forces(config.u0, config.coulomb, &x, &mut forces);
    Ok((v, forces))
}

/// Potential and forces in terms of offsets `x_i = q_i - Q0`. No ordering check.
pub(crate) fn offsets_potential_forces(u0: f64, coulomb: f64, x: &[f64], forces: &mut [f64]) -> f64 {
    let mut v = 0.0;
    for (f, xi) in forces.iter_mut().zip(x) {
        v += 0.5 * u0 * xi * xi;
        *f = -u0 * xi;
    }
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let r = x[i] - x[j];
            let inv = 1.0 / r;
            v += coulomb * inv;
            let f = coulomb * inv * inv;
            forces[i] += f;
            forces[j] -= f;
        }
    }
    v
}

/// Hessian `d^2 V / dq_i dq_j` at offsets `x`.
pub fn hessian(config: &ChainConfig, x: &[f64]) -> Matrix {
    let n = x.len();
    let mut h = Matrix::zeros(n);
    for i in 0..n {
        h[(i, i)] = config.u0;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let r = (x[i] - x[j]).abs();
            let k = 2.0 * config.coulomb / (r * r * r);
            h[(i, i)] += k;
            h[(j, j)] += k;
            h[(i, j)] -= k;
            h[(j, i)] -= k;
        }
    }
    h
}

const NEWTON_MAX_ITERATIONS: usize = 100;

/// Equilibrium offsets `delta_j = q_j - Q0` of the chain in a trap centred at `q0`.
///
/// Newton iteration on the force balance, in units of `(Cc/u0)^(1/3)`, starting
/// from a uniformly spaced chain. A step that increases the residual is halved
/// until it does not.
pub fn equilibrium(config: &ChainConfig, q0: f64) -> Result<Vec<f64>> {
    let n = config.num_ions();
    let ell = config.length_scale();
    let force_scale = config.u0 * ell;

    // Uniform-chain spacing estimate 2.018 N^-0.559 (in units of ell).
    let spacing = if n > 1 { 2.018 / (n as f64).powf(0.559) } else { 0.0 };
    let mut q: Vec<f64> = (0..n)
        .map(|i| q0 + ell * spacing * ((n as f64 - 1.0) / 2.0 - i as f64))
        .collect();

    let residual = |q: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (_, f) = potential_forces(config, q, q0)?;
        let r = f.iter().fold(0.0_f64, |m, x| m.max(x.abs())) / force_scale;
        Ok((r, f))
    };

    let (mut res, mut forces) = residual(&q)?;
    let mut iterations = 0;
    while res >= 1e-12 {
        if iterations == NEWTON_MAX_ITERATIONS {
            return Err(Error::Convergence {
                what: "equilibrium Newton solve",
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let x: Vec<f64> = q.iter().map(|qi| qi - q0).collect();
        let h = hessian(config, &x);
        let step = linalg::Lu::new(&h)
            .map_err(|_| Error::Convergence {
                what: "equilibrium Newton solve (singular Hessian)",
                iterations,
                residual: res,
            })?
            .solve(&forces);

        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = q.iter().zip(&step).map(|(qi, s)| qi + damping * s).collect();
            match residual(&trial) {
                Ok((r, f)) if r < res || damping < 1e-6 => {
                    q = trial;
                    res = r;
                    forces = f;
                    break;
                }
                _ if damping < 1e-6 => {
                    return Err(Error::Convergence {
                        what: "equilibrium Newton solve (line search)",
                        iterations,
                        residual: res,
                    })
                }
                _ => damping *= 0.5,
            }
        }
    }
    Ok(q.iter().map(|qi| qi - q0).collect())
}

/// Mass-weighted normal modes about the equilibrium of a static trap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalModeBasis {
    /// Equilibrium offsets from the trap centre, m.
    pub offsets: Vec<f64>,
    /// Mode angular frequencies, rad/s, ascending.
    pub omega: Vec<f64>,
    /// Rows are modes: `modes[nu][j] = a_{nu j}`.
    pub modes: Vec<Vec<f64>>,
    /// Driving coefficients `sum_j a_{nu j} sqrt(m_j)`, kg^1/2.
    pub gamma: Vec<f64>,
    /// Set when two frequencies coincide to 1e-10 relative.
    pub degenerate: bool,
}

impl NormalModeBasis {
    pub fn num_modes(&self) -> usize {
        self.omega.len()
    }

    pub fn mode_matrix(&self) -> Matrix {
        Matrix::from_rows(&self.modes)
    }

    /// Mode coordinates and momenta for lab-frame positions and momenta with the
    /// trap minimum at `q0`.
    pub fn project(&self, masses: &[f64], q: &[f64], p: &[f64], q0: f64) -> (Vec<f64>, Vec<f64>) {
        let disp: Vec<f64> = q
            .iter()
            .zip(&self.offsets)
            .map(|(qj, dj)| qj - dj - q0)
            .collect();
        self.project_displacements(masses, &disp, p)
    }

    /// Mode coordinates for displacements from equilibrium and momenta.
    pub fn project_displacements(&self, masses: &[f64], disp: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let sq: Vec<f64> = masses.iter().map(|m| m.sqrt()).collect();
        let coords = self
            .modes
            .iter()
            .map(|row| row.iter().zip(disp).zip(&sq).map(|((a, y), s)| a * s * y).sum())
            .collect();
        let momenta = self
            .modes
            .iter()
            .map(|row| row.iter().zip(p).zip(&sq).map(|((a, pj), s)| a * pj / s).sum())
            .collect();
        (coords, momenta)
    }
}

/// Diagonalises the mass-weighted Hessian `V_ij / sqrt(m_i m_j)` at equilibrium.
pub fn normal_modes(config: &ChainConfig) -> Result<NormalModeBasis> {
    let offsets = equilibrium(config, 0.0)?;
    let masses = config.masses();
    let h = hessian(config, &offsets);
    let n = masses.len();
    let mut weighted = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            weighted[(i, j)] = h[(i, j)] / (masses[i] * masses[j]).sqrt();
        }
    }
    let eig = linalg::symmetric_eigen(&weighted)?;
    if let Some(bad) = eig.values.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "non-positive mode eigenvalue {bad:e}"
        )));
    }
    let degenerate = eig
        .values
        .windows(2)
        .any(|w| (w[1] - w[0]).abs() <= 1e-10 * w[1].abs());
    if degenerate {
        log::warn!("degenerate normal-mode frequencies; eigenvectors fixed by sign convention only");
    }
    let mut basis = NormalModeBasis {
        offsets,
        omega: eig.values.iter().map(|l| l.sqrt()).collect(),
        modes: eig.vectors.rows(),
        gamma: Vec::new(),
        degenerate,
    };
    basis.gamma = driving_coefficients(&basis, config);
    Ok(basis)
}

/// `Gamma_nu = sum_j a_{nu j} sqrt(m_j)`; the driving momentum of mode `nu` is
/// `P0_nu(t) = dQ0/dt * Gamma_nu`.
pub fn driving_coefficients(basis: &NormalModeBasis, config: &ChainConfig) -> Vec<f64> {
    let sq: Vec<f64> = config.species().iter().map(|s| s.mass.sqrt()).collect();
    basis
        .modes
        .iter()
        .map(|row| row.iter().zip(&sq).map(|(a, s)| a * s).sum())
        .collect()
}

/// Closed-form two-ion results.
///
/// The `plus` mode is the larger root of the eigenvalue pair and is therefore
/// the second (index 1) mode of an ascending [`NormalModeBasis`]; `minus` is
/// index 0.
pub mod two_ion {
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct ClosedForm {
        pub lambda_plus: f64,
        pub lambda_minus: f64,
        pub a_plus: f64,
        pub b_plus: f64,
        pub a_minus: f64,
        pub b_minus: f64,
    }

    impl ClosedForm {
        pub fn omega_plus(&self) -> f64 {
            self.lambda_plus.sqrt()
        }

        pub fn omega_minus(&self) -> f64 {
            self.lambda_minus.sqrt()
        }

        /// Modes in ascending frequency order as rows `(a, b)`.
        pub fn ascending_modes(&self) -> [[f64; 2]; 2] {
            [[self.a_minus, self.b_minus], [self.a_plus, self.b_plus]]
        }
    }

    /// Eigenvalues and eigenvector coefficients for mass ratio `mu = m2/m1 >= 1`
    /// and single-ion frequency `omega1` of the lighter ion.
    pub fn closed_form(mu: f64, omega1: f64) -> ClosedForm {
        let inv = 1.0 / mu;
        let root = (1.0 - inv + inv * inv).sqrt();
        let w2 = omega1 * omega1;
        let cp = 1.0 - inv - root;
        let cm = 1.0 - inv + root;
        let a_plus = (1.0 / (1.0 + cp * cp * mu)).sqrt();
        let a_minus = (1.0 / (1.0 + cm * cm * mu)).sqrt();
        ClosedForm {
            lambda_plus: w2 * (1.0 + inv + root),
            lambda_minus: w2 * (1.0 + inv - root),
            a_plus,
            b_plus: cp * mu.sqrt() * a_plus,
            a_minus,
            b_minus: cm * mu.sqrt() * a_minus,
        }
    }

    /// Equilibrium separation `x0 = 2 (Cc / 4 u0)^(1/3)`.
    pub fn separation(coulomb: f64, u0: f64) -> f64 {
        2.0 * (coulomb / (4.0 * u0)).cbrt()
    }
}
