//! Lumped-circuit heat load per π-pulse for electric versus magnetic drive.

use std::f64::consts::PI;

use thiserror::Error;

use crate::device::{PhysicalConstants, SPEED_OF_LIGHT};
use crate::spin::C64;

/// `β·l2` above which the short-line approximation is flagged.
pub const SHORT_LINE_LIMIT: f64 = 0.1;
/// `R_w·ω·C_w` above which omitting the wire capacitance is flagged.
pub const WIRE_CAPACITANCE_LIMIT: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error("{name} must be > 0 (got {value})")]
    NonPositive { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    /// Array capacitance (F).
    pub c: f64,
    /// Leakage resistance (Ω).
    pub r: f64,
    /// Wire resistance (Ω).
    pub r_w: f64,
    /// Wire capacitance (F); only used for the validity check.
    pub c_w: f64,
    /// Line impedance (Ω).
    pub z0: f64,
    /// Voltage-to-field length (m).
    pub lambda: f64,
    /// Room-temperature line length (m).
    pub l1: f64,
    /// Cold line length (m).
    pub l2: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            c: 2.8e-17,
            r: 1e20,
            r_w: 1e-2,
            c_w: 1e-15,
            z0: 50.0,
            lambda: 1e-6,
            l1: 1.0,
            l2: 0.01,
        }
    }
}

impl CircuitParams {
    pub fn validate(&self) -> Result<(), ThermalError> {
        for (name, value) in [
            ("C", self.c),
            ("R", self.r),
            ("R_w", self.r_w),
            ("C_w", self.c_w),
            ("Z0", self.z0),
            ("Lambda", self.lambda),
            ("l1", self.l1),
            ("l2", self.l2),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ThermalError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Impedance {
    /// Lumped array impedance including the wire resistance (Ω).
    pub z_c: C64,
    /// Input impedance after the cold line of length `l2` (Ω).
    pub z_lt: C64,
    pub beta_l2: f64,
    pub warnings: Vec<String>,
}

/// `Z_C = R(1 − jωCR)/(1 + ω²C²R²) + R_w` and its transformation through the
/// cold line section.
pub fn efpsa_impedance(p: &CircuitParams, omega: f64) -> Impedance {
    let wcr = omega * p.c * p.r;
    let z_c = C64::new(p.r, -p.r * wcr) / (1.0 + wcr * wcr) + p.r_w;
    let beta_l2 = omega / SPEED_OF_LIGHT * p.l2;
    let t = C64::new(0.0, beta_l2.tan());
    let z_lt = p.z0 * (z_c + t * p.z0) / (p.z0 + t * z_c);
    let mut warnings = Vec::new();
    if beta_l2 > SHORT_LINE_LIMIT {
        warnings.push(format!("beta*l2 = {beta_l2:.3} exceeds {SHORT_LINE_LIMIT}; cold line is not short"));
    }
    let wire = p.r_w * omega * p.c_w;
    if wire > WIRE_CAPACITANCE_LIMIT {
        warnings.push(format!("R_w*omega*C_w = {wire:.3e}; wire capacitance is not negligible"));
    }
    Impedance { z_c, z_lt, beta_l2, warnings }
}

/// `U_e = 2·Z_C·U/(Z_C + Z0)`.
pub fn voltage_at_device(z_c: C64, z0: f64, u_source: f64) -> C64 {
    if z_c.norm().is_infinite() {
        return C64::new(2.0 * u_source, 0.0);
    }
    z_c * (2.0 * u_source) / (z_c + z0)
}

/// Device voltage for Rabi frequency `rabi` (Hz): `U_e = Ω·Λ/d_⊥`.
pub fn drive_voltage(p: &CircuitParams, rabi: f64, d_perp: f64) -> f64 {
    rabi * p.lambda / d_perp
}

/// `J_E = (1 + ω²C²R_wR)/R · Λ²Ω/(2d_⊥²)` in J per π-pulse.
pub fn heat_electric(p: &CircuitParams, rabi: f64, omega: f64, d_perp: f64) -> f64 {
    let x = omega * omega * p.c * p.c * p.r_w * p.r;
    (1.0 + x) / p.r * p.lambda * p.lambda * rabi / (2.0 * d_perp * d_perp)
}

/// `J_B = 2π²/(μ0²γ²) · d²·R_w·Ω` in J per π-pulse, for a wire at distance `d`.
pub fn heat_magnetic(p: &CircuitParams, rabi: f64, d: f64, gamma: f64, mu0: f64) -> f64 {
    2.0 * PI * PI / (mu0 * mu0 * gamma * gamma) * d * d * p.r_w * rabi
}

/// `J_E/J_B` with `Λ = d`: `μ0²γ²/(4π²d_⊥²) · (1 + ω²C²R_wR)/(R_wR)`.
pub fn dissipation_ratio(p: &CircuitParams, omega: f64, d_perp: f64, gamma: f64, mu0: f64) -> f64 {
    let x = omega * omega * p.c * p.c * p.r_w * p.r;
    mu0 * mu0 * gamma * gamma / (4.0 * PI * PI * d_perp * d_perp) * (1.0 + x) / (p.r_w * p.r)
}

/// Electric susceptibility of the driven transition: `d_⊥` for |+1⟩↔|−1⟩,
/// `d_⊥′/√2` for single-quantum transitions.
pub fn effective_susceptibility(single_quantum: bool, c: &PhysicalConstants) -> f64 {
    if single_quantum {
        c.d_perp_prime / std::f64::consts::SQRT_2
    } else {
        c.d_perp
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Angular drive frequency (rad/s).
    pub omega: f64,
    pub z_c_abs: f64,
    pub heat_electric: f64,
    pub heat_magnetic: f64,
    pub ratio: f64,
    pub ratio_single_quantum: f64,
}

/// Heat table over `omegas` with `Λ = d` for the ratio columns.
pub fn heat_sweep(p: &CircuitParams, rabi: f64, omegas: &[f64], k: &PhysicalConstants) -> Vec<SweepRow> {
    let d_pm = effective_susceptibility(false, k);
    let d_sq = effective_susceptibility(true, k);
    omegas
        .iter()
        .map(|&omega| SweepRow {
            omega,
            z_c_abs: efpsa_impedance(p, omega).z_c.norm(),
            heat_electric: heat_electric(p, rabi, omega, d_pm),
            heat_magnetic: heat_magnetic(p, rabi, p.lambda, k.gamma, k.mu0),
            ratio: dissipation_ratio(p, omega, d_pm, k.gamma, k.mu0),
            ratio_single_quantum: dissipation_ratio(p, omega, d_sq, k.gamma, k.mu0),
        })
        .collect()
}

/// Log-spaced angular frequencies `2π·f` for `f` in `[f_lo, f_hi]` Hz.
pub fn omega_grid(f_lo: f64, f_hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            2.0 * PI * f_lo * (f_hi / f_lo).powf(t)
        })
        .collect()
}

/// First abscissa where the sampled curve `ys(xs)` crosses `target`,
/// interpolating linearly in log–log space.
pub fn locate_crossing(xs: &[f64], ys: &[f64], target: f64) -> Option<f64> {
    xs.windows(2).zip(ys.windows(2)).find_map(|(x, y)| {
        let (lo, hi) = (y[0].min(y[1]), y[0].max(y[1]));
        if target < lo || target > hi {
            return None;
        }
        if y[0] == y[1] {
            return Some(x[0]);
        }
        let t = (target.ln() - y[0].ln()) / (y[1].ln() - y[0].ln());
        Some((x[0].ln() + t * (x[1].ln() - x[0].ln())).exp())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn k() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn impedance_limits() {
        let p = CircuitParams::default();
        let dc = efpsa_impedance(&p, 1e-12).z_c;
        assert_relative_eq!(dc.re, p.r + p.r_w, max_relative = 1e-9);
        let small_r = CircuitParams { r: 1e12, ..p };
        let w = 2.0 * PI * 1e9;
        let hi = efpsa_impedance(&small_r, w).z_c;
        // ωCR ≈ 176: capacitive branch dominates.
        assert_relative_eq!(hi.im.abs(), 1.0 / (w * p.c), max_relative = 1e-4);
    }

    #[test]
    fn impedance_matches_direct_complex_evaluation() {
        let p = CircuitParams::default();
        let w = 2.0 * PI * 2e9;
        // Oracle: R ∥ 1/(jωC), then series R_w.
        let zr = C64::new(p.r, 0.0);
        let zc = C64::new(0.0, -1.0 / (w * p.c));
        let oracle = zr * zc / (zr + zc) + p.r_w;
        let z = efpsa_impedance(&p, w);
        assert_relative_eq!((z.z_c - oracle).norm() / oracle.norm(), 0.0, epsilon = 1e-12);
        assert!(z.warnings.iter().any(|w| w.contains("beta*l2")));
    }

    #[test]
    fn device_voltage() {
        let p = CircuitParams::default();
        let z = efpsa_impedance(&p, 2.0 * PI * 2e9).z_c;
        let ue = voltage_at_device(z, p.z0, 1.0);
        assert!((ue.norm() - 2.0).abs() < 2e-3);
        assert_relative_eq!(voltage_at_device(C64::new(50.0, 0.0), 50.0, 3.0).re, 3.0, epsilon = 1e-15);
        assert_eq!(voltage_at_device(C64::new(f64::INFINITY, 0.0), 50.0, 1.5).re, 3.0);
    }

    #[test]
    fn heat_values() {
        let p = CircuitParams::default();
        let kk = k();
        let jb = heat_magnetic(&p, 2e6, 1e-6, kk.gamma, kk.mu0);
        // Oracle: 2π²/(μ0²γ²)·d²·R_w·Ω evaluated by hand ≈ 3.19e-16.
        assert!((jb - 3.19e-16).abs() < 0.01e-16, "{jb}");
        assert_relative_eq!(heat_magnetic(&p, 2e6, 2e-6, kk.gamma, kk.mu0) / jb, 4.0, max_relative = 1e-12);
        assert_eq!(heat_magnetic(&p, 0.0, 1e-6, kk.gamma, kk.mu0), 0.0);
        let je = heat_electric(&p, 2e6, 2.0 * PI * 2e9, kk.d_perp);
        assert_relative_eq!(heat_electric(&p, 4e6, 2.0 * PI * 2e9, kk.d_perp) / je, 2.0, max_relative = 1e-12);
        let open = CircuitParams { r: 1e300, ..p };
        assert!(heat_electric(&open, 2e6, 0.0, kk.d_perp) < 1e-290);
        assert_relative_eq!(drive_voltage(&p, 1.7e6, kk.d_perp), 10.0, max_relative = 1e-12);
    }

    #[test]
    fn sweep_brackets_reference_heat() {
        let p = CircuitParams::default();
        let rows = heat_sweep(&p, 2e6, &omega_grid(1e6, 2e9, 200), &k());
        let je: Vec<f64> = rows.iter().map(|r| r.heat_electric).collect();
        let lo = je.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = je.iter().cloned().fold(0.0, f64::max);
        assert!(lo < 1.1e-21 && 1.1e-21 < hi, "[{lo:e}, {hi:e}]");
        let xs: Vec<f64> = rows.iter().map(|r| r.omega).collect();
        let w = locate_crossing(&xs, &je, 1.1e-21).unwrap();
        assert!(w > xs[0] && w < *xs.last().unwrap());
    }

    #[test]
    fn short_line_converges_to_lumped() {
        let p = CircuitParams { r: 1e4, ..CircuitParams::default() };
        let w = 2.0 * PI * 1e8;
        let mut last = f64::INFINITY;
        for l2 in [1e-2, 1e-3, 1e-4, 1e-5] {
            let z = efpsa_impedance(&CircuitParams { l2, ..p }, w);
            let err = (z.z_lt - z.z_c).norm() / z.z_c.norm();
            // First-order estimate: tan(βl)·|Z0² − Z_C²|/(|Z_C|·Z0).
            let est = z.beta_l2.tan() * (p.z0 * p.z0 - z.z_c * z.z_c).norm() / (z.z_c.norm() * p.z0);
            assert!(err < last);
            if est < 0.01 {
                assert!(err <= 1.1 * est, "{err} vs {est}");
            }
            last = err;
        }
    }

    #[test]
    fn single_quantum_substitution() {
        let kk = k();
        assert_relative_eq!(effective_susceptibility(true, &kk), kk.d_perp / 50.0 / 2f64.sqrt(), max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn ratio_identity(
            lc in -18.0f64..-14.0, lr in 10.0f64..21.0, lrw in -4.0f64..0.0,
            lw in 5.0f64..11.0, ld in -7.0f64..-5.0, lo in 4.0f64..8.0, dp in 0.001f64..1.0,
        ) {
            let kk = k();
            let d = 10f64.powf(ld);
            let p = CircuitParams { c: 10f64.powf(lc), r: 10f64.powf(lr), r_w: 10f64.powf(lrw), lambda: d, ..CircuitParams::default() };
            let omega = 10f64.powf(lw);
            let rabi = 10f64.powf(lo);
            let je = heat_electric(&p, rabi, omega, dp);
            let jb = heat_magnetic(&p, rabi, d, kk.gamma, kk.mu0);
            let r = dissipation_ratio(&p, omega, dp, kk.gamma, kk.mu0);
            prop_assert!(((je / jb) - r).abs() <= 1e-12 * r);
            prop_assert!(je >= 0.0 && jb >= 0.0 && r > 0.0);
            prop_assert!(dissipation_ratio(&p, omega * 1.5, dp, kk.gamma, kk.mu0) >= r);
        }
    }
}
