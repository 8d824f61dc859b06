use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{hermitian_eigen, rabi_frequency, validate_density, DriveConfig, SpinError, C64};
use crate::device::PhysicalConstants;

/// Minimum sample count accepted by [`average_gate_fidelity`].
pub const MIN_SAMPLES: usize = 1000;

const PURE_TOL: f64 = 1e-12;
/// Eigenvalues below this (relative) are treated as round-off zeros.
const EIGEN_FLOOR: f64 = 1e-14;

/// Initial-state treatment for cross-talk evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrosstalkAveraging {
    /// Single equator state `(|+1⟩+|−1⟩)/√2`.
    Equator,
    /// Uniform average over pure states of the driven pair.
    BlochAverage,
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`.
pub fn state_fidelity(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> Result<f64, SpinError> {
    if rho.nrows() != sigma.nrows() || rho.ncols() != sigma.ncols() {
        return Err(SpinError::DimensionMismatch(rho.nrows(), sigma.nrows()));
    }
    validate_density(rho)?;
    validate_density(sigma)?;
    let purity = |m: &DMatrix<C64>| (m * m).trace().re;
    if purity(rho) > 1.0 - PURE_TOL || purity(sigma) > 1.0 - PURE_TOL {
        // For a pure argument the Uhlmann fidelity is exactly tr(ρσ).
        return Ok((rho * sigma).trace().re.clamp(0.0, 1.0));
    }
    let (vals, vecs) = hermitian_eigen(rho);
    let sqrt_diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| C64::new(l.max(0.0).sqrt(), 0.0)),
    ));
    let sqrt_rho = &vecs * sqrt_diag * vecs.adjoint();
    let m = &sqrt_rho * sigma * &sqrt_rho;
    let (mv, _) = hermitian_eigen(&m);
    let floor = EIGEN_FLOOR * m.trace().re.abs().max(1.0);
    let tr: f64 = mv.iter().map(|&l| if l > floor { l.sqrt() } else { 0.0 }).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// Equator-state π-pulse fidelity `½(1 + exp(−1/(2·Ω·T2*)))`.
///
/// `omega` and `t2_star` must be positive; the limits Ω → ∞ and T2* → ∞ give 1.
pub fn dephasing_pi_fidelity(omega: f64, t2_star: f64) -> f64 {
    debug_assert!(omega >= 0.0 && t2_star >= 0.0);
    0.5 * (1.0 + (-1.0 / (2.0 * omega * t2_star)).exp())
}

fn pure2(a: C64, b: C64) -> Matrix2<C64> {
    let v = nalgebra::Vector2::new(a, b);
    v * v.adjoint()
}

/// Monte Carlo average π-rotation fidelity over uniformly distributed pure
/// qubit states, with the coherence decayed by `exp(−t_π/T2*)`.
pub fn average_gate_fidelity(
    omega: f64,
    t2_star: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64, SpinError> {
    if n_samples < MIN_SAMPLES {
        return Err(SpinError::TooFewSamples { min: MIN_SAMPLES, got: n_samples });
    }
    let t_pi = 1.0 / (2.0 * omega);
    let lambda = (-t_pi / t2_star).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..n_samples {
        let nz: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let (ca, sa) = (((1.0 + nz) / 2.0).sqrt(), ((1.0 - nz) / 2.0).sqrt());
        // π rotation about x: (a, b) → −i(b, a).
        let a = C64::new(ca, 0.0);
        let b = C64::from_polar(sa, phi);
        let ti = C64::new(0.0, -1.0);
        let target = pure2(ti * b, ti * a);
        let mut rho = target;
        rho[(0, 1)] *= lambda;
        rho[(1, 0)] *= lambda;
        // ⟨φ|ρ|φ⟩ for pure target φ.
        acc += (target * rho).trace().re;
    }
    Ok(acc / n_samples as f64)
}

const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];
const AZIMUTH_POINTS: usize = 8;

/// Fidelity of an unwanted rotation by `theta` with the identity. The
/// rotation axis lies in the equatorial plane, orthogonal to the equator
/// reference state `(|+1⟩+|−1⟩)/√2`.
pub fn rotation_fidelity(theta: f64, averaging: CrosstalkAveraging) -> f64 {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    // exp(−iθσ_y/2)
    let u = Matrix2::new(
        C64::new(c, 0.0),
        C64::new(-s, 0.0),
        C64::new(s, 0.0),
        C64::new(c, 0.0),
    );
    let fid = |a: C64, b: C64| {
        let psi = pure2(a, b);
        let out = u * psi * u.adjoint();
        let to_d = |m: Matrix2<C64>| DMatrix::from_iterator(2, 2, m.iter().cloned());
        state_fidelity(&to_d(psi), &to_d(out)).expect("pure states are valid")
    };
    match averaging {
        CrosstalkAveraging::Equator => {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            fid(C64::new(r, 0.0), C64::new(r, 0.0))
        }
        CrosstalkAveraging::BlochAverage => {
            // Integrand is a low-order polynomial on the sphere, so the
            // product rule is exact.
            let mut acc = 0.0;
            for (&nz, &w) in GL4_NODES.iter().zip(&GL4_WEIGHTS) {
                for k in 0..AZIMUTH_POINTS {
                    let phi = 2.0 * PI * k as f64 / AZIMUTH_POINTS as f64;
                    let a = C64::new(((1.0 + nz) / 2.0).sqrt(), 0.0);
                    let b = C64::from_polar(((1.0 - nz) / 2.0).sqrt(), phi);
                    acc += w * fid(a, b);
                }
            }
            acc / (2.0 * AZIMUTH_POINTS as f64)
        }
    }
}

/// Fidelity of a neighbouring qubit left idle while exposed to
/// `residual_drive` for the target π time `t_pi`.
pub fn crosstalk_fidelity(
    residual_drive: &DriveConfig,
    t_pi: f64,
    averaging: CrosstalkAveraging,
    constants: &PhysicalConstants,
) -> f64 {
    let omega_res = rabi_frequency(residual_drive, constants);
    rotation_fidelity(2.0 * PI * omega_res * t_pi, averaging)
}
