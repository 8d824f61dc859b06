//! Physical constants, device geometry, crystal frames and configuration
//! loading.
//!
//! Every other module reads material and geometry parameters through a
//! [`DeviceModel`]. The model is immutable once loaded.
//!
//! Units are SI throughout, with two exceptions kept for readability of
//! configuration files: optical dipoles are given in Debye and converted on
//! access, and susceptibilities are stored in Hz per (V/m), i.e. Hz·m/V. A
//! susceptibility of 17 Hz·cm/V is therefore 0.17 Hz·m/V.

use nalgebra::Vector3;
use serde::Deserialize;
use thiserror::Error;

/// 1 Debye in C·m.
pub const DEBYE: f64 = 3.33564e-30;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Largest accepted array; the dense G-matrix is `(2N)²`.
pub const MAX_SITES: usize = 1 << 14;

/// Displacement-to-spacing ratio above which a site is flagged.
pub const DISPLACEMENT_WARN_RATIO: f64 = 0.25;

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("`{key}` must be finite and strictly positive (got {value})")]
    NonPositive { key: &'static str, value: f64 },
    #[error("n_sites must be at least 1")]
    NoSites,
    #[error("n_sites = {0} exceeds the limit of {MAX_SITES}")]
    TooManySites(i64),
    #[error("d_perp_prime ({prime}) exceeds d_perp ({perp})")]
    PrimeExceedsPerp { prime: f64, perp: f64 },
    #[error("displacements has {got} entries but n_sites is {expected}")]
    DisplacementCount { expected: usize, got: usize },
    #[error("displacement of site {site} is not finite")]
    NonFiniteDisplacement { site: usize },
    #[error("unsupported NV orientation {0:?}; expected one of the <111> axes")]
    UnsupportedAxis([i32; 3]),
}

/// Spin and optical coupling constants of the color center.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalConstants {
    /// Transverse spin–electric susceptibility driving |+1⟩↔|−1⟩ (Hz·m/V).
    pub d_perp: f64,
    /// Parallel spin–electric susceptibility (Hz·m/V).
    pub d_par: f64,
    /// Transverse susceptibility driving |±1⟩↔|0⟩ (Hz·m/V).
    pub d_perp_prime: f64,
    /// Electron gyromagnetic ratio (Hz/T).
    pub gamma: f64,
    /// Vacuum permeability (T·m/A).
    pub mu0: f64,
    /// Planck constant (J·s).
    pub h: f64,
    /// Parallel optical dipole difference (Debye).
    pub delta_mu_par: f64,
    /// Perpendicular optical dipole (Debye).
    pub mu_perp_opt: f64,
    /// Inhomogeneous dephasing time (s).
    pub t2_star: f64,
    /// Debye-Waller factor.
    pub debye_waller: f64,
    /// Dielectric strength of diamond (V/m).
    pub e_bd_diamond: f64,
    /// Dielectric strength of HfO2 (V/m).
    pub e_bd_hfo2: f64,
    /// Ground-state zero-field splitting (Hz). Only the three-level
    /// integrator uses it.
    pub zero_field_splitting: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        let d_perp = 0.17;
        Self {
            d_perp,
            d_par: 0.0035,
            d_perp_prime: d_perp / 50.0,
            gamma: 2.8e10,
            mu0: 4.0e-7 * std::f64::consts::PI,
            h: 6.626_070_15e-34,
            delta_mu_par: 1.5,
            mu_perp_opt: 2.1,
            t2_star: 10e-6,
            debye_waller: 0.03,
            e_bd_diamond: 2.0e9,
            e_bd_hfo2: 1.6e9,
            zero_field_splitting: 2.87e9,
        }
    }
}

impl PhysicalConstants {
    /// Parallel optical dipole difference in C·m.
    pub fn delta_mu_par_si(&self) -> f64 {
        self.delta_mu_par * DEBYE
    }

    /// Perpendicular optical dipole in C·m.
    pub fn mu_perp_opt_si(&self) -> f64 {
        self.mu_perp_opt * DEBYE
    }

    /// The weaker of the two dielectric strengths.
    pub fn breakdown_field(&self) -> f64 {
        self.e_bd_diamond.min(self.e_bd_hfo2)
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let fields: [(&'static str, f64); 13] = [
            ("d_perp", self.d_perp),
            ("d_par", self.d_par),
            ("d_perp_prime", self.d_perp_prime),
            ("gamma", self.gamma),
            ("mu0", self.mu0),
            ("planck", self.h),
            ("delta_mu_par_debye", self.delta_mu_par),
            ("mu_perp_opt_debye", self.mu_perp_opt),
            ("t2_star", self.t2_star),
            ("debye_waller", self.debye_waller),
            ("e_bd_diamond", self.e_bd_diamond),
            ("e_bd_hfo2", self.e_bd_hfo2),
            ("zero_field_splitting", self.zero_field_splitting),
        ];
        for (key, value) in fields {
            positive(key, value)?;
        }
        if self.d_perp_prime > self.d_perp {
            return Err(DeviceError::PrimeExceedsPerp {
                prime: self.d_perp_prime,
                perp: self.d_perp,
            });
        }
        Ok(())
    }
}

/// Electrode array and waveguide dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceGeometry {
    /// Electrode spacing (m).
    pub a: f64,
    pub h_wg: f64,
    pub w_wg: f64,
    pub l_fin: f64,
    pub w_fin: f64,
    pub h_fin: f64,
    pub n_sites: usize,
    /// Per-site displacement from the nominal position `k·a·ẑ` (m).
    pub displacements: Vec<Vector3<f64>>,
    /// Crystal direction of the NV axis, one of the `<111>` family.
    pub nv_axis: [i32; 3],
}

impl Default for DeviceGeometry {
    fn default() -> Self {
        let n_sites = 10;
        Self {
            a: 0.183e-6,
            h_wg: 0.364e-6,
            w_wg: 0.091e-6,
            l_fin: 0.500e-6,
            w_fin: 0.091e-6,
            h_fin: 0.273e-6,
            n_sites,
            displacements: vec![Vector3::zeros(); n_sites],
            nv_axis: [1, 1, 1],
        }
    }
}

impl DeviceGeometry {
    /// Default geometry with a different site count.
    pub fn with_sites(n_sites: usize) -> Self {
        Self {
            n_sites,
            displacements: vec![Vector3::zeros(); n_sites],
            ..Self::default()
        }
    }

    /// Nominal site position `k·a·ẑ` in the lab frame.
    pub fn nominal_position(&self, k: usize) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, k as f64 * self.a)
    }

    /// NV positions `k·a·ẑ + δ_k` in the lab frame.
    pub fn nv_positions(&self) -> Vec<Vector3<f64>> {
        (0..self.n_sites)
            .map(|k| self.nominal_position(k) + self.displacements[k])
            .collect()
    }

    /// Half the electrode gap: distance from the waveguide axis to an
    /// electrode face.
    pub fn electrode_offset(&self) -> f64 {
        0.5 * self.l_fin
    }

    pub fn validate(&self) -> Result<Vec<String>, DeviceError> {
        for (key, value) in [
            ("a", self.a),
            ("h_wg", self.h_wg),
            ("w_wg", self.w_wg),
            ("l_fin", self.l_fin),
            ("w_fin", self.w_fin),
            ("h_fin", self.h_fin),
        ] {
            positive(key, value)?;
        }
        if self.n_sites < 1 {
            return Err(DeviceError::NoSites);
        }
        if self.displacements.len() != self.n_sites {
            return Err(DeviceError::DisplacementCount {
                expected: self.n_sites,
                got: self.displacements.len(),
            });
        }
        FrameTransform::for_axis(self.nv_axis)?;
        let mut warnings = Vec::new();
        for (site, d) in self.displacements.iter().enumerate() {
            if !d.iter().all(|v| v.is_finite()) {
                return Err(DeviceError::NonFiniteDisplacement { site });
            }
            let ratio = d.norm() / self.a;
            if ratio > DISPLACEMENT_WARN_RATIO {
                warnings.push(format!(
                    "site {site}: |delta|/a = {ratio:.3} exceeds {DISPLACEMENT_WARN_RATIO}"
                ));
            }
        }
        Ok(warnings)
    }
}

/// Field components in the NV frame: parallel to the NV axis and along the
/// two transverse dipole axes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NvField {
    pub par: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl NvField {
    pub fn new(par: f64, mu1: f64, mu2: f64) -> Self {
        Self { par, mu1, mu2 }
    }

    /// Transverse magnitude `sqrt(E_mu1² + E_mu2²)`.
    pub fn perp(&self) -> f64 {
        self.mu1.hypot(self.mu2)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.par * s, self.mu1 * s, self.mu2 * s)
    }
}

/// Lab frame (x̂=[001], ŷ=[1̄10], ẑ=[110]) and NV frame (ẑ′ along the NV
/// axis, μ̂₁, μ̂₂ transverse), all expressed in crystal coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTransform {
    pub lab: [Vector3<f64>; 3],
    /// `[ẑ′, μ̂₁, μ̂₂]`.
    pub nv: [Vector3<f64>; 3],
    /// Rows are the NV basis vectors written in lab coordinates.
    lab_to_nv: nalgebra::Matrix3<f64>,
}

impl Default for FrameTransform {
    fn default() -> Self {
        Self::for_axis([1, 1, 1]).expect("[111] is supported")
    }
}

impl FrameTransform {
    /// Frames for one of the four `<111>` orientations. The [111] frame uses
    /// μ̂₁ = [11̄0] and μ̂₂ = [1̄1̄2]; the other orientations are its images
    /// under the sign flips that map [111] onto them.
    pub fn for_axis(axis: [i32; 3]) -> Result<Self, DeviceError> {
        if !axis.iter().all(|c| c.abs() == 1) {
            return Err(DeviceError::UnsupportedAxis(axis));
        }
        // Antipodal axes describe the same NV class; normalize to x = +1.
        let flip = axis[0] as f64;
        let s = Vector3::new(1.0, axis[1] as f64 * flip, axis[2] as f64 * flip);
        let crystal = |v: [f64; 3]| Vector3::new(v[0], v[1], v[2]).normalize();
        let lab = [
            crystal([0.0, 0.0, 1.0]),
            crystal([-1.0, 1.0, 0.0]),
            crystal([1.0, 1.0, 0.0]),
        ];
        let nv = [
            crystal([1.0, 1.0, 1.0]).component_mul(&s),
            crystal([1.0, -1.0, 0.0]).component_mul(&s),
            crystal([-1.0, -1.0, 2.0]).component_mul(&s),
        ];
        let mut m = nalgebra::Matrix3::zeros();
        for (r, n) in nv.iter().enumerate() {
            for (c, l) in lab.iter().enumerate() {
                m[(r, c)] = n.dot(l);
            }
        }
        Ok(Self {
            lab,
            nv,
            lab_to_nv: m,
        })
    }

    /// Project a lab-frame vector onto (ẑ′, μ̂₁, μ̂₂).
    pub fn lab_to_nv(&self, e_lab: &Vector3<f64>) -> NvField {
        let v = self.lab_to_nv * e_lab;
        NvField::new(v[0], v[1], v[2])
    }

    pub fn nv_to_lab(&self, e: &NvField) -> Vector3<f64> {
        self.lab_to_nv.transpose() * Vector3::new(e.par, e.mu1, e.mu2)
    }

    /// Row `i` of the lab→NV rotation (0 = parallel, 1 = μ₁, 2 = μ₂).
    pub fn projection_row(&self, i: usize) -> Vector3<f64> {
        self.lab_to_nv.row(i).transpose()
    }
}

/// Constants, geometry and frames of one device. Immutable after loading.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeviceModel {
    pub constants: PhysicalConstants,
    pub geometry: DeviceGeometry,
    pub frame: FrameTransform,
    /// Non-fatal validation findings.
    pub warnings: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    a: Option<f64>,
    h_wg: Option<f64>,
    w_wg: Option<f64>,
    l_fin: Option<f64>,
    w_fin: Option<f64>,
    h_fin: Option<f64>,
    n_sites: Option<i64>,
    displacements: Option<Vec<[f64; 3]>>,
    nv_axis: Option<[i32; 3]>,
    d_perp: Option<f64>,
    d_par: Option<f64>,
    d_perp_prime: Option<f64>,
    gamma: Option<f64>,
    mu0: Option<f64>,
    planck: Option<f64>,
    delta_mu_par_debye: Option<f64>,
    mu_perp_opt_debye: Option<f64>,
    t2_star: Option<f64>,
    debye_waller: Option<f64>,
    e_bd_diamond: Option<f64>,
    e_bd_hfo2: Option<f64>,
    zero_field_splitting: Option<f64>,
}

/// Parse a flat key/value configuration (TOML syntax). Missing keys take
/// their defaults; `d_perp_prime` defaults to `d_perp / 50` of the loaded
/// `d_perp`.
pub fn load_device(config_text: &str) -> Result<DeviceModel, DeviceError> {
    let raw: RawConfig =
        toml::from_str(config_text).map_err(|e| DeviceError::Parse(e.message().to_string()))?;

    let mut c = PhysicalConstants::default();
    if let Some(v) = raw.d_perp {
        c.d_perp = v;
        c.d_perp_prime = v / 50.0;
    }
    macro_rules! set {
        ($target:expr, $src:expr) => {
            if let Some(v) = $src {
                $target = v;
            }
        };
    }
    set!(c.d_par, raw.d_par);
    set!(c.d_perp_prime, raw.d_perp_prime);
    set!(c.gamma, raw.gamma);
    set!(c.mu0, raw.mu0);
    set!(c.h, raw.planck);
    set!(c.delta_mu_par, raw.delta_mu_par_debye);
    set!(c.mu_perp_opt, raw.mu_perp_opt_debye);
    set!(c.t2_star, raw.t2_star);
    set!(c.debye_waller, raw.debye_waller);
    set!(c.e_bd_diamond, raw.e_bd_diamond);
    set!(c.e_bd_hfo2, raw.e_bd_hfo2);
    set!(c.zero_field_splitting, raw.zero_field_splitting);
    c.validate()?;

    let mut g = DeviceGeometry::default();
    set!(g.a, raw.a);
    set!(g.h_wg, raw.h_wg);
    set!(g.w_wg, raw.w_wg);
    set!(g.l_fin, raw.l_fin);
    set!(g.w_fin, raw.w_fin);
    set!(g.h_fin, raw.h_fin);
    set!(g.nv_axis, raw.nv_axis);
    if let Some(n) = raw.n_sites {
        if n < 1 {
            return Err(DeviceError::NoSites);
        }
        if n as u64 > MAX_SITES as u64 {
            return Err(DeviceError::TooManySites(n));
        }
        g.n_sites = n as usize;
    }
    g.displacements = match raw.displacements {
        Some(d) => d.into_iter().map(Vector3::from).collect(),
        None => vec![Vector3::zeros(); g.n_sites],
    };
    let warnings = g.validate()?;
    let frame = FrameTransform::for_axis(g.nv_axis)?;

    Ok(DeviceModel {
        constants: c,
        geometry: g,
        frame,
        warnings,
    })
}

fn positive(key: &'static str, value: f64) -> Result<(), DeviceError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(DeviceError::NonPositive { key, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn empty_config_gives_table_defaults() {
        let m = load_device("").unwrap();
        assert_eq!(m.geometry.a, 0.183e-6);
        assert_eq!(m.geometry.h_wg, 0.364e-6);
        assert_eq!(m.geometry.w_wg, 0.091e-6);
        assert_eq!(m.geometry.l_fin, 0.500e-6);
        assert_eq!(m.geometry.w_fin, 0.091e-6);
        assert_eq!(m.geometry.h_fin, 0.273e-6);
        assert_eq!(m.constants, PhysicalConstants::default());
        assert!(m.warnings.is_empty());
    }

    #[test]
    fn override_passes_through() {
        let m = load_device("a = 0.2e-6").unwrap();
        assert_eq!(m.geometry.a, 0.2e-6);
        assert_eq!(m.geometry.h_wg, 0.364e-6);
    }

    #[test]
    fn d_perp_override_moves_prime_default() {
        let m = load_device("d_perp = 0.5").unwrap();
        assert_relative_eq!(m.constants.d_perp_prime, 0.01, max_relative = 1e-15);
        let m = load_device("d_perp = 0.5\nd_perp_prime = 0.02").unwrap();
        assert_eq!(m.constants.d_perp_prime, 0.02);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(
            load_device("w_wg = -1"),
            Err(DeviceError::NonPositive { key: "w_wg", .. })
        ));
        assert!(matches!(load_device("a = 0"), Err(DeviceError::NonPositive { .. })));
        assert!(matches!(load_device("n_sites = 0"), Err(DeviceError::NoSites)));
        assert!(matches!(load_device("n_sites = 1000000000000"), Err(DeviceError::TooManySites(_))));
        assert!(matches!(load_device("a = "), Err(DeviceError::Parse(_))));
        assert!(matches!(load_device("bogus = 1"), Err(DeviceError::Parse(_))));
        assert!(matches!(
            load_device("d_perp_prime = 1.0"),
            Err(DeviceError::PrimeExceedsPerp { .. })
        ));
        assert!(matches!(
            load_device("n_sites = 2\ndisplacements = [[0.0, 0.0, 0.0]]"),
            Err(DeviceError::DisplacementCount { .. })
        ));
        assert!(matches!(
            load_device("nv_axis = [1, 0, 1]"),
            Err(DeviceError::UnsupportedAxis(_))
        ));
    }

    #[test]
    fn large_displacement_warns() {
        let m = load_device("n_sites = 2\ndisplacements = [[0.0, 0.0, 0.0], [0.0, 0.06e-6, 0.0]]")
            .unwrap();
        assert_eq!(m.warnings.len(), 1);
        assert!(m.warnings[0].starts_with("site 1"));
    }

    #[test]
    fn bases_are_orthonormal() {
        for axis in [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]] {
            let f = FrameTransform::for_axis(axis).unwrap();
            for basis in [&f.lab, &f.nv] {
                for i in 0..3 {
                    for j in 0..3 {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!((basis[i].dot(&basis[j]) - expect).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn field_along_axis_is_parallel() {
        let f = FrameTransform::default();
        // [111] in lab coordinates.
        let e_lab = Vector3::new(
            f.nv[0].dot(&f.lab[0]),
            f.nv[0].dot(&f.lab[1]),
            f.nv[0].dot(&f.lab[2]),
        ) * 3.0;
        let e = f.lab_to_nv(&e_lab);
        assert_relative_eq!(e.par, 3.0, epsilon = 1e-12);
        assert!(e.mu1.abs() < 1e-12 && e.mu2.abs() < 1e-12);
    }

    #[test]
    fn lab_y_matches_explicit_dot_products() {
        // Oracle: exact crystal vectors, written out independently.
        let y_lab = [-1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0];
        let z_nv = [1.0 / 3f64.sqrt(); 3];
        let mu1 = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
        let mu2 = [-1.0 / 6f64.sqrt(), -1.0 / 6f64.sqrt(), 2.0 / 6f64.sqrt()];
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];

        let e = FrameTransform::default().lab_to_nv(&Vector3::new(0.0, 1.0, 0.0));
        assert_relative_eq!(e.par, dot(y_lab, z_nv), epsilon = 1e-15);
        assert_relative_eq!(e.mu1, dot(y_lab, mu1), epsilon = 1e-15);
        assert_relative_eq!(e.mu1, -1.0, epsilon = 1e-15);
        assert!(e.mu2.abs() < 1e-15);
        assert_relative_eq!(e.mu2, dot(y_lab, mu2), epsilon = 1e-15);
    }

    #[test]
    fn transverse_magnitude_in_lab_angles() {
        // |E_perp|² = E_y² + (sin θ E_x − cos θ E_z)² with cos θ = 1/√3.
        let theta = (1.0 / 3f64.sqrt()).acos();
        let f = FrameTransform::default();
        let e_lab = Vector3::new(0.3, -1.2, 0.7);
        let e = f.lab_to_nv(&e_lab);
        let expected = (e_lab.y.powi(2) + (theta.sin() * e_lab.x - theta.cos() * e_lab.z).powi(2))
            .sqrt();
        assert_relative_eq!(e.perp(), expected, epsilon = 1e-14);
        assert_relative_eq!(e.par, theta.cos() * e_lab.x + theta.sin() * e_lab.z, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn round_trip_and_norm(x in -1e9f64..1e9, y in -1e9f64..1e9, z in -1e9f64..1e9) {
            let f = FrameTransform::default();
            let v = Vector3::new(x, y, z);
            let e = f.lab_to_nv(&v);
            let back = f.nv_to_lab(&e);
            let scale = v.norm().max(1.0);
            prop_assert!((back - v).norm() <= 1e-12 * scale);
            let n2 = e.par * e.par + e.mu1 * e.mu1 + e.mu2 * e.mu2;
            prop_assert!((n2 - v.norm_squared()).abs() <= 1e-9 * v.norm_squared().max(1e-300));
        }
    }
}
