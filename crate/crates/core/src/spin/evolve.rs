use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Matrix2, Matrix3};

use super::{
    level_energies, rabi_frequency, transition_frequency, DriveConfig, Matrix3c, SpinError,
    SpinState, C64,
};
use crate::device::{NvField, PhysicalConstants};

/// Ratio between the fastest time scale and the largest admissible step.
pub const STEPS_PER_PERIOD: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Propagation {
    /// Fixed-step 4th-order Magnus integration of the full lab-frame
    /// Hamiltonian. `step` defaults to the largest admissible value.
    Integrate { step: Option<f64> },
    /// Analytic two-level rotation in the frame of the drive; the spectator
    /// level only accrues its bias phase.
    RotatingWave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DephasingModel {
    /// Coherences decay as `exp(−t/T2*)`.
    Exponential,
    /// Coherences decay as `exp(−(t/T2*)²)`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dephasing {
    pub t2_star: f64,
    pub model: DephasingModel,
}

impl Dephasing {
    /// Coherence factor accumulated between absolute times `t0` and `t1`.
    fn factor(&self, t0: f64, t1: f64) -> f64 {
        match self.model {
            DephasingModel::Exponential => (-(t1 - t0) / self.t2_star).exp(),
            DephasingModel::Gaussian => (-(t1 * t1 - t0 * t0) / (self.t2_star * self.t2_star)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub propagation: Propagation,
    pub dephasing: Option<Dephasing>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            propagation: Propagation::Integrate { step: None },
            dephasing: None,
        }
    }
}

impl EvolveOptions {
    pub fn rwa() -> Self {
        Self {
            propagation: Propagation::RotatingWave,
            dephasing: None,
        }
    }

    pub fn with_dephasing(mut self, t2_star: f64, model: DephasingModel) -> Self {
        self.dephasing = Some(Dephasing { t2_star, model });
        self
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

struct SpinOps {
    sz: Matrix3c,
    sz2: Matrix3c,
    /// S_x² − S_y²
    q1: Matrix3c,
    /// {S_x, S_y}
    q2: Matrix3c,
    /// {S_x, S_z}
    a1: Matrix3c,
    /// {S_y, S_z}
    a2: Matrix3c,
}

impl SpinOps {
    fn new() -> Self {
        let r = 1.0 / SQRT_2;
        let z = c(0.0, 0.0);
        let sx = Matrix3::new(z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z);
        let sy = Matrix3::new(z, c(0.0, -r), z, c(0.0, r), z, c(0.0, -r), z, c(0.0, r), z);
        let sz = Matrix3::from_diagonal(&nalgebra::Vector3::new(c(1.0, 0.0), z, c(-1.0, 0.0)));
        Self {
            sz2: sz * sz,
            q1: sx * sx - sy * sy,
            q2: sx * sy + sy * sx,
            a1: sx * sz + sz * sx,
            a2: sy * sz + sz * sy,
            sz,
        }
    }
}

/// Static and oscillating parts `(H0, H1)` of `H(t)/h = H0 + H1·cos(2πνt + φ)`
/// in Hz, for the given NV-frame field amplitudes and bias.
pub fn hamiltonian(field: &NvField, b_bias: f64, k: &PhysicalConstants) -> (Matrix3c, Matrix3c) {
    let ops = SpinOps::new();
    let r = |x: f64| c(x, 0.0);
    let h0 = ops.sz2 * r(k.zero_field_splitting) + ops.sz * r(k.gamma * b_bias);
    let h1 = ops.sz2 * r(k.d_par * field.par)
        + (ops.q1 * r(field.mu1) + ops.q2 * r(field.mu2)) * r(k.d_perp)
        + (ops.a1 * r(field.mu1) + ops.a2 * r(field.mu2)) * r(k.d_perp_prime);
    (h0, h1)
}

/// Evolve `state` under `drive` for `drive.duration`.
pub fn evolve(
    state: &SpinState,
    drive: &DriveConfig,
    constants: &PhysicalConstants,
    options: &EvolveOptions,
) -> Result<SpinState, SpinError> {
    drive.validate()?;
    let rho0 = SpinState::from_matrix(*state.rho())?;
    if let Some(d) = options.dephasing {
        if !(d.t2_star > 0.0) {
            return Err(SpinError::InvalidDrive(format!("T2* must be > 0 (got {})", d.t2_star)));
        }
    }
    let rho = match options.propagation {
        Propagation::Integrate { step } => integrate(&rho0, drive, constants, step, options.dephasing)?,
        Propagation::RotatingWave => rotating_wave(&rho0, drive, constants, options.dephasing),
    };
    Ok(SpinState::from_matrix_unchecked(hermitize(rho)))
}

fn hermitize(m: Matrix3c) -> Matrix3c {
    (m + m.adjoint()) * c(0.5, 0.0)
}

fn dephase(rho: &mut Matrix3c, factor: f64) {
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                rho[(i, j)] *= factor;
            }
        }
    }
}

fn integrate(
    state: &SpinState,
    drive: &DriveConfig,
    k: &PhysicalConstants,
    step: Option<f64>,
    dephasing: Option<Dephasing>,
) -> Result<Matrix3c, SpinError> {
    let omega = rabi_frequency(drive, k);
    let fastest = drive.frequency.max(omega);
    let bound = if fastest > 0.0 { 1.0 / (STEPS_PER_PERIOD * fastest) } else { f64::INFINITY };
    let step = match step {
        Some(s) if !(s > 0.0 && s.is_finite()) => {
            return Err(SpinError::InvalidDrive(format!("step must be > 0 (got {s})")))
        }
        Some(s) if s > bound * (1.0 + 1e-12) => {
            return Err(SpinError::StepTooLarge { step: s, bound })
        }
        Some(s) => s,
        None => {
            // Also resolve the bare level splittings, which can exceed the carrier.
            let e = level_energies(drive.b_bias, k);
            let spread = e.iter().cloned().fold(f64::MIN, f64::max) - e.iter().cloned().fold(f64::MAX, f64::min);
            let level_bound = if spread > 0.0 { 1.0 / (STEPS_PER_PERIOD * spread) } else { f64::INFINITY };
            let s = bound.min(level_bound);
            if s.is_finite() { s } else { drive.duration.max(f64::MIN_POSITIVE) }
        }
    };
    let t_end = drive.duration;
    let mut rho = *state.rho();
    if t_end == 0.0 {
        return Ok(rho);
    }
    let n = ((t_end / step).ceil() as usize).max(1);
    let dt = t_end / n as f64;
    let (h0, h1) = hamiltonian(&drive.field, drive.b_bias, k);
    let w = 2.0 * PI * drive.frequency;
    let ham = |t: f64| h0 + h1 * c((w * t + drive.phase).cos(), 0.0);
    let g = 3f64.sqrt() / 6.0;
    let comm_coef = 3f64.sqrt() / 12.0 * dt * dt;
    for i in 0..n {
        let t0 = i as f64 * dt;
        let t1 = t0 + dt;
        if let Some(d) = dephasing {
            dephase(&mut rho, d.factor(t0, t0 + 0.5 * dt));
        }
        let a1 = ham(t0 + (0.5 - g) * dt) * c(0.0, -2.0 * PI);
        let a2 = ham(t0 + (0.5 + g) * dt) * c(0.0, -2.0 * PI);
        let m = (a1 + a2) * c(0.5 * dt, 0.0) + (a2 * a1 - a1 * a2) * c(comm_coef, 0.0);
        let u = m.exp();
        rho = u * rho * u.adjoint();
        if let Some(d) = dephasing {
            dephase(&mut rho, d.factor(t0 + 0.5 * dt, t1));
        }
    }
    Ok(rho)
}

/// Number of Strang substeps used when the rotating-wave path is combined
/// with dephasing.
const RWA_DEPHASING_SUBSTEPS: usize = 400;

fn rotating_wave(
    state: &SpinState,
    drive: &DriveConfig,
    k: &PhysicalConstants,
    dephasing: Option<Dephasing>,
) -> Matrix3c {
    let (upper, lower) = drive.transition.levels();
    let (p, q) = (upper.index(), lower.index());
    let r = 3 - p - q;
    let f0 = transition_frequency(drive, k);
    let s = if f0 >= 0.0 { 1.0 } else { -1.0 };
    let delta = f0 - s * drive.frequency;
    let (_, h1) = hamiltonian(&drive.field, drive.b_bias, k);
    let g = h1[(p, q)] * 0.5 * C64::from_polar(1.0, -s * drive.phase);
    let h_rot = Matrix2::new(c(0.5 * delta, 0.0), g, g.conj(), c(-0.5 * delta, 0.0));

    let t = drive.duration;
    let embed = |u2: &Matrix2<C64>| {
        let mut u = Matrix3c::zeros();
        u[(p, p)] = u2[(0, 0)];
        u[(p, q)] = u2[(0, 1)];
        u[(q, p)] = u2[(1, 0)];
        u[(q, q)] = u2[(1, 1)];
        u[(r, r)] = c(1.0, 0.0);
        u
    };
    let mut rho = *state.rho();
    match dephasing {
        None => {
            let u = embed(&(h_rot * c(0.0, -2.0 * PI * t)).exp());
            rho = u * rho * u.adjoint();
        }
        Some(d) => {
            // Frame phases are diagonal, so dephasing commutes with them.
            let n = RWA_DEPHASING_SUBSTEPS;
            let dt = t / n as f64;
            let u = embed(&(h_rot * c(0.0, -2.0 * PI * dt)).exp());
            for i in 0..n {
                let t0 = i as f64 * dt;
                dephase(&mut rho, d.factor(t0, t0 + 0.5 * dt));
                rho = u * rho * u.adjoint();
                dephase(&mut rho, d.factor(t0 + 0.5 * dt, t0 + dt));
            }
        }
    }
    let e = level_energies(drive.b_bias, k);
    let mut phase = [0.0; 3];
    phase[p] = -2.0 * PI * e[p] * t + PI * delta * t;
    phase[q] = -2.0 * PI * e[q] * t - PI * delta * t;
    phase[r] = -2.0 * PI * e[r] * t;
    let frame = Matrix3::from_diagonal(&nalgebra::Vector3::from(phase.map(|x| C64::from_polar(1.0, x))));
    frame * rho * frame.adjoint()
}
