//! NV ground-state spin dynamics under electric and magnetic drive.
//!
//! States are 3×3 density matrices in the basis {|+1⟩, |0⟩, |−1⟩}. Rabi
//! rates follow the transverse-field relations used throughout the crate:
//! `Ω(+1↔−1) = d_perp·|E_perp|` and `Ω(±1↔0) = d_perp'·|E_perp|/√2`, both as
//! cyclic frequencies (a π-pulse lasts `1/(2Ω)`).

mod evolve;
mod fidelity;

pub use evolve::{
    evolve, hamiltonian, Dephasing, DephasingModel, EvolveOptions, Propagation,
};
pub use fidelity::{
    average_gate_fidelity, crosstalk_fidelity, dephasing_pi_fidelity, rotation_fidelity,
    state_fidelity, CrosstalkAveraging,
};

use nalgebra::{DMatrix, Matrix3};
use thiserror::Error;

use crate::device::{NvField, PhysicalConstants};

pub type C64 = nalgebra::Complex<f64>;
pub type Matrix3c = Matrix3<C64>;

/// Tolerance used when validating density matrices.
pub const STATE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SpinError {
    #[error("integration step {step:.3e} s exceeds the bound {bound:.3e} s")]
    StepTooLarge { step: f64, bound: f64 },
    #[error("non-physical state: {0}")]
    NonPhysical(String),
    #[error("invalid drive: {0}")]
    InvalidDrive(String),
    #[error("dimension mismatch: {0}x{0} vs {1}x{1}")]
    DimensionMismatch(usize, usize),
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

/// Ground-state sublevel. The discriminant is the basis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinLevel {
    Plus = 0,
    Zero = 1,
    Minus = 2,
}

impl SpinLevel {
    pub fn index(self) -> usize {
        self as usize
    }

    /// `m_s` quantum number.
    pub fn m(self) -> f64 {
        match self {
            SpinLevel::Plus => 1.0,
            SpinLevel::Zero => 0.0,
            SpinLevel::Minus => -1.0,
        }
    }
}

/// Driven transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    /// |+1⟩ ↔ |−1⟩ (double quantum).
    PlusMinus,
    /// |0⟩ ↔ |upper⟩ with `upper` either `Plus` or `Minus`.
    SingleQuantum { upper: SpinLevel },
}

impl Transition {
    /// The two levels coupled, upper (in `m_s`) first.
    pub fn levels(self) -> (SpinLevel, SpinLevel) {
        match self {
            Transition::PlusMinus => (SpinLevel::Plus, SpinLevel::Minus),
            Transition::SingleQuantum { upper } => (upper, SpinLevel::Zero),
        }
    }
}

/// An oscillating field `E(t) = E_nv·cos(2π·frequency·t + phase)` applied for
/// `duration`, with a static bias field along the NV axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveConfig {
    pub transition: Transition,
    /// NV-frame field amplitudes (V/m).
    pub field: NvField,
    /// Carrier frequency (Hz).
    pub frequency: f64,
    pub phase: f64,
    pub duration: f64,
    /// Static field along ẑ′ (T).
    pub b_bias: f64,
}

impl DriveConfig {
    /// A drive on `transition`, resonant with the bias-split levels.
    pub fn resonant(
        transition: Transition,
        field: NvField,
        duration: f64,
        b_bias: f64,
        constants: &PhysicalConstants,
    ) -> Self {
        let mut d = Self {
            transition,
            field,
            frequency: 0.0,
            phase: 0.0,
            duration,
            b_bias,
        };
        d.frequency = transition_frequency(&d, constants).abs();
        d
    }

    pub fn validate(&self) -> Result<(), SpinError> {
        let f = &self.field;
        if ![f.par, f.mu1, f.mu2, self.frequency, self.phase, self.b_bias]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(SpinError::InvalidDrive("non-finite parameter".into()));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(SpinError::InvalidDrive(format!(
                "duration must be >= 0 (got {})",
                self.duration
            )));
        }
        if self.frequency < 0.0 {
            return Err(SpinError::InvalidDrive("negative carrier frequency".into()));
        }
        if let Transition::SingleQuantum { upper: SpinLevel::Zero } = self.transition {
            return Err(SpinError::InvalidDrive("single-quantum upper level cannot be |0>".into()));
        }
        Ok(())
    }
}

/// Level energies `E/h` (Hz) of `D·S_z² + γ·B·S_z`.
pub fn level_energies(b_bias: f64, c: &PhysicalConstants) -> [f64; 3] {
    [SpinLevel::Plus, SpinLevel::Zero, SpinLevel::Minus]
        .map(|l| c.zero_field_splitting * l.m() * l.m() + c.gamma * b_bias * l.m())
}

/// Signed transition frequency `E_upper − E_lower` (Hz).
pub fn transition_frequency(drive: &DriveConfig, c: &PhysicalConstants) -> f64 {
    let e = level_energies(drive.b_bias, c);
    let (u, l) = drive.transition.levels();
    e[u.index()] - e[l.index()]
}

/// Cyclic Rabi frequency (Hz) of the drive on its transition.
pub fn rabi_frequency(drive: &DriveConfig, c: &PhysicalConstants) -> f64 {
    let e_perp = drive.field.perp();
    match drive.transition {
        Transition::PlusMinus => c.d_perp * e_perp,
        Transition::SingleQuantum { .. } => c.d_perp_prime * e_perp / std::f64::consts::SQRT_2,
    }
}

/// A validated spin-1 density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    rho: Matrix3c,
}

impl SpinState {
    pub fn basis(level: SpinLevel) -> Self {
        let mut rho = Matrix3c::zeros();
        rho[(level.index(), level.index())] = C64::new(1.0, 0.0);
        Self { rho }
    }

    /// Pure state from (unnormalized) amplitudes on |+1⟩, |0⟩, |−1⟩.
    pub fn pure(amplitudes: [C64; 3]) -> Result<Self, SpinError> {
        let v = nalgebra::Vector3::from(amplitudes);
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(SpinError::NonPhysical("zero or non-finite state vector".into()));
        }
        let v = v / C64::new(n, 0.0);
        Ok(Self {
            rho: v * v.adjoint(),
        })
    }

    pub fn from_matrix(rho: Matrix3c) -> Result<Self, SpinError> {
        let d = DMatrix::from_iterator(3, 3, rho.iter().cloned());
        validate_density(&d)?;
        Ok(Self { rho })
    }

    pub(crate) fn from_matrix_unchecked(rho: Matrix3c) -> Self {
        Self { rho }
    }

    pub fn rho(&self) -> &Matrix3c {
        &self.rho
    }

    pub fn population(&self, level: SpinLevel) -> f64 {
        self.rho[(level.index(), level.index())].re
    }

    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        (self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// The 2×2 block on the two levels of `transition` (upper level first),
    /// not renormalized.
    pub fn restrict(&self, transition: Transition) -> DMatrix<C64> {
        let (u, l) = transition.levels();
        let idx = [u.index(), l.index()];
        DMatrix::from_fn(2, 2, |r, c| self.rho[(idx[r], idx[c])])
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_iterator(3, 3, self.rho.iter().cloned())
    }
}

/// Check Hermiticity, unit trace and positivity within [`STATE_TOL`].
pub fn validate_density(rho: &DMatrix<C64>) -> Result<(), SpinError> {
    let n = rho.nrows();
    if rho.ncols() != n {
        return Err(SpinError::NonPhysical(format!("not square: {}x{}", n, rho.ncols())));
    }
    if !rho.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(SpinError::NonPhysical("non-finite entry".into()));
    }
    let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > STATE_TOL {
        return Err(SpinError::NonPhysical(format!("not Hermitian (deviation {herm:.2e})")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
        return Err(SpinError::NonPhysical(format!("trace {} != 1", tr.re)));
    }
    let min_eig = hermitian_eigen(rho).0.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -STATE_TOL {
        return Err(SpinError::NonPhysical(format!("negative eigenvalue {min_eig:.2e}")));
    }
    Ok(())
}

/// Eigen-decomposition of a Hermitian matrix (symmetrized first).
pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn drive(transition: Transition, e: f64) -> DriveConfig {
        DriveConfig {
            transition,
            field: NvField::new(0.0, e, 0.0),
            frequency: 1e9,
            phase: 0.0,
            duration: 1e-7,
            b_bias: 0.0,
        }
    }

    #[test]
    fn rabi_at_calibration_field() {
        let c = PhysicalConstants::default();
        let f = rabi_frequency(&drive(Transition::PlusMinus, 1e7), &c);
        assert_relative_eq!(f, 1.7e6, max_relative = 1e-12);
        assert_eq!(rabi_frequency(&drive(Transition::PlusMinus, 0.0), &c), 0.0);
    }

    #[test]
    fn single_quantum_rabi() {
        let c = PhysicalConstants::default();
        let d = drive(Transition::SingleQuantum { upper: SpinLevel::Plus }, 1e7);
        // 0.34 Hz·cm/V = 0.0034 Hz·m/V; 1e7 V/m.
        let expected = 0.0034 * 1e7 / 2f64.sqrt();
        assert_relative_eq!(rabi_frequency(&d, &c), expected, max_relative = 1e-12);
        assert!((rabi_frequency(&d, &c) - 24_041.6).abs() < 0.1);
    }

    #[test]
    fn rabi_is_homogeneous_and_uses_transverse_only() {
        let c = PhysicalConstants::default();
        let mut d = drive(Transition::PlusMinus, 0.0);
        d.field = NvField::new(5e6, 3e6, 4e6);
        assert_relative_eq!(rabi_frequency(&d, &c), c.d_perp * 5e6, max_relative = 1e-12);
        let mut d2 = d;
        d2.field = d.field.scale(2.5);
        assert_relative_eq!(
            rabi_frequency(&d2, &c),
            2.5 * rabi_frequency(&d, &c),
            max_relative = 1e-12
        );
    }

    #[test]
    fn drive_validation() {
        let mut d = drive(Transition::PlusMinus, 1.0);
        d.duration = -1.0;
        assert!(d.validate().is_err());
        let mut d = drive(Transition::PlusMinus, 1.0);
        d.field.mu1 = f64::NAN;
        assert!(d.validate().is_err());
        let d = drive(Transition::SingleQuantum { upper: SpinLevel::Zero }, 1.0);
        assert!(d.validate().is_err());
    }

    #[test]
    fn state_validation() {
        let mut m = Matrix3c::zeros();
        m[(0, 0)] = C64::new(0.5, 0.0);
        assert!(SpinState::from_matrix(m).is_err());
        m[(2, 2)] = C64::new(0.5, 0.0);
        assert!(SpinState::from_matrix(m).is_ok());
        m[(0, 2)] = C64::new(0.0, 0.3);
        assert!(SpinState::from_matrix(m).is_err());
        m[(2, 0)] = C64::new(0.0, -0.3);
        assert!(SpinState::from_matrix(m).is_ok());
        m[(0, 2)] = C64::new(0.0, 0.8);
        m[(2, 0)] = C64::new(0.0, -0.8);
        assert!(SpinState::from_matrix(m).is_err(), "not positive");
    }

    #[test]
    fn restricted_view() {
        let s = SpinState::pure([C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0)])
            .unwrap();
        let r = s.restrict(Transition::PlusMinus);
        assert_relative_eq!(r[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(r[(0, 1)].im, -0.5, epsilon = 1e-15);
        let r0 = s.restrict(Transition::SingleQuantum { upper: SpinLevel::Minus });
        assert_relative_eq!(r0[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_eq!(r0[(1, 1)].re, 0.0);
    }
}
