//! Voltage synthesis: programming per-site drive fields through `G⁻¹` and
//! allocating DC Stark-shift frequency channels.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use thiserror::Error;

use crate::device::{NvField, PhysicalConstants, MAX_SITES};
use crate::field::{Components, GMatrix, MAX_CONDITION};
use crate::spin::{crosstalk_fidelity, CrosstalkAveraging, DriveConfig, Transition};

/// Largest admissible ratio of a zeroed component to `|E_μ1|`.
pub const ZEROED_COMPONENT_TOL: f64 = 0.01;
/// Required channel spacing in units of the linewidth.
pub const MIN_SPACING_LINEWIDTHS: f64 = 100.0;
const REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("G is singular or ill-conditioned (condition number {0:.3e})")]
    Singular(f64),
    #[error("G is rank-deficient; dependent rows: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("G must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("peak surface field {field:.3e} V/m exceeds breakdown limit {limit:.3e} V/m")]
    Breakdown { field: f64, limit: f64 },
    #[error("infeasible plan: {0}")]
    Infeasible(String),
    #[error("tolerance failure: {0}")]
    Tolerance(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
}

/// Per-site transverse drive amplitudes (V/m); sites not listed are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveTarget {
    pub fields: Vec<(f64, f64)>,
}

impl DriveTarget {
    pub fn zeros(n_sites: usize) -> Self {
        Self { fields: vec![(0.0, 0.0); n_sites] }
    }

    /// `field` on `site`, zero elsewhere.
    pub fn single_site(n_sites: usize, site: usize, field: (f64, f64)) -> Self {
        let mut t = Self::zeros(n_sites);
        t.fields[site] = field;
        t
    }

    pub fn n_sites(&self) -> usize {
        self.fields.len()
    }

    pub fn targets(&self) -> Vec<usize> {
        (0..self.n_sites()).filter(|&k| self.fields[k] != (0.0, 0.0)).collect()
    }

    /// Right-hand side in `Perp2` row order.
    pub fn rhs(&self) -> Vec<f64> {
        self.fields.iter().flat_map(|&(a, b)| [a, b]).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { fields: self.fields.iter().map(|&(a, b)| (s * a, s * b)).collect() }
    }
}

/// How a site's optical frequency is set.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRequest {
    Channel(usize),
    ShiftHz(f64),
}

/// Frequency channels, expressed as detunings from the photonic band edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    /// Zero-field emitter detuning from the band edge (Hz).
    pub emitter_detuning: f64,
    /// Channel detunings (Hz); index 0 is the in-gap parking channel.
    pub channels: Vec<f64>,
    pub linewidth: f64,
    pub assignment: Vec<ChannelRequest>,
}

impl ChannelPlan {
    /// Ch0 parked 200 GHz inside the gap and Ch1–3 at 60/100/140 GHz into the
    /// band, emitter at 300 GHz, every site parked.
    pub fn standard(n_sites: usize) -> Self {
        Self {
            emitter_detuning: 300e9,
            channels: vec![-200e9, 60e9, 100e9, 140e9],
            linewidth: 100e6,
            assignment: vec![ChannelRequest::Channel(0); n_sites],
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.linewidth > 0.0) || self.channels.is_empty() {
            return Err(ControlError::InvalidTarget("need channels and a positive linewidth".into()));
        }
        let mut sorted = self.channels.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let min_spacing = MIN_SPACING_LINEWIDTHS * self.linewidth;
        if let Some(w) = sorted.windows(2).find(|w| w[1] - w[0] < min_spacing) {
            return Err(ControlError::InvalidTarget(format!(
                "channels {:.4e} and {:.4e} Hz are closer than {min_spacing:.3e} Hz",
                w[0], w[1]
            )));
        }
        for r in &self.assignment {
            if let ChannelRequest::Channel(c) = r {
                if *c >= self.channels.len() {
                    return Err(ControlError::InvalidTarget(format!("unknown channel {c}")));
                }
            }
        }
        Ok(())
    }

    /// Stark shift each site must acquire (Hz).
    pub fn required_shifts(&self) -> Vec<f64> {
        self.assignment
            .iter()
            .map(|r| match *r {
                ChannelRequest::Channel(c) => self.channels[c] - self.emitter_detuning,
                ChannelRequest::ShiftHz(s) => s,
            })
            .collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteFieldJson {
    site: usize,
    mu1: f64,
    #[serde(default)]
    mu2: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteChannelJson {
    site: usize,
    #[serde(flatten)]
    request: ChannelRequest,
}

fn default_emitter() -> f64 {
    300e9
}
fn default_channels() -> Vec<f64> {
    vec![-200e9, 60e9, 100e9, 140e9]
}
fn default_linewidth() -> f64 {
    100e6
}

#[derive(Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
enum RequestJson {
    Drive {
        n_sites: usize,
        sites: Vec<SiteFieldJson>,
    },
    Stark {
        n_sites: usize,
        #[serde(default = "default_emitter")]
        emitter_detuning_hz: f64,
        #[serde(default = "default_channels")]
        channels_hz: Vec<f64>,
        #[serde(default = "default_linewidth")]
        linewidth_hz: f64,
        #[serde(default)]
        default_channel: usize,
        #[serde(default)]
        sites: Vec<SiteChannelJson>,
    },
}

/// A synthesis request: exactly one of AC drive or Stark programming.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthesisRequest {
    Drive(DriveTarget),
    Stark(ChannelPlan),
}

impl SynthesisRequest {
    pub fn from_json(text: &str) -> Result<Self, ControlError> {
        let raw: RequestJson =
            serde_json::from_str(text).map_err(|e| ControlError::InvalidTarget(e.to_string()))?;
        let check_count = |n: usize| {
            if n == 0 || n > MAX_SITES {
                Err(ControlError::InvalidTarget(format!("n_sites must lie in 1..={MAX_SITES} (got {n})")))
            } else {
                Ok(())
            }
        };
        let check_site = |site: usize, n: usize| {
            if site >= n {
                Err(ControlError::InvalidTarget(format!("site {site} out of range 0..{n}")))
            } else {
                Ok(())
            }
        };
        match raw {
            RequestJson::Drive { n_sites, sites } => {
                check_count(n_sites)?;
                let mut t = DriveTarget::zeros(n_sites);
                for s in sites {
                    check_site(s.site, n_sites)?;
                    if !(s.mu1.is_finite() && s.mu2.is_finite()) {
                        return Err(ControlError::InvalidTarget("non-finite field".into()));
                    }
                    t.fields[s.site] = (s.mu1, s.mu2);
                }
                Ok(SynthesisRequest::Drive(t))
            }
            RequestJson::Stark {
                n_sites,
                emitter_detuning_hz,
                channels_hz,
                linewidth_hz,
                default_channel,
                sites,
            } => {
                check_count(n_sites)?;
                let mut plan = ChannelPlan {
                    emitter_detuning: emitter_detuning_hz,
                    channels: channels_hz,
                    linewidth: linewidth_hz,
                    assignment: vec![ChannelRequest::Channel(default_channel); n_sites],
                };
                for s in sites {
                    check_site(s.site, n_sites)?;
                    plan.assignment[s.site] = s.request;
                }
                plan.validate()?;
                Ok(SynthesisRequest::Stark(plan))
            }
        }
    }
}

/// `h·Δν = Δμ_∥·E_∥ − (√2/2)·μ_⊥·|E_⊥|`, returned in Hz.
pub fn stark_shift(field: &NvField, constants: &PhysicalConstants) -> f64 {
    (constants.delta_mu_par_si() * field.par - FRAC_1_SQRT_2 * constants.mu_perp_opt_si() * field.perp())
        / constants.h
}

/// Transverse field giving a purely perpendicular shift `shift` (Hz, ≤ 0).
pub fn perp_field_for_shift(shift: f64, constants: &PhysicalConstants) -> Result<f64, ControlError> {
    if shift > 0.0 {
        return Err(ControlError::Infeasible(format!(
            "shift {shift:.4e} Hz is positive; the perpendicular term only shifts downward"
        )));
    }
    Ok(-shift * constants.h / (FRAC_1_SQRT_2 * constants.mu_perp_opt_si()))
}

#[derive(Debug, Clone, Default)]
pub struct ControlOptions {
    /// Turn breakdown advisories into errors.
    pub strict: bool,
    /// Per-electrode surface field per volt, from the basis set.
    pub surface_field_per_volt: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub voltages: Vec<f64>,
    /// `‖G·V − E‖/‖E‖` (absolute when `E = 0`).
    pub relative_residual: f64,
    pub condition_number: f64,
    pub peak_surface_field: Option<f64>,
    pub warnings: Vec<String>,
}

fn row_name(g: &GMatrix, r: usize) -> String {
    let (site, c) = g.row_label(r);
    format!("site {site} {}", c.name())
}

/// Rows that are linearly dependent on earlier rows (sequential Gram–Schmidt).
pub fn dependent_rows(g: &GMatrix) -> Vec<String> {
    let m = &g.matrix;
    let scale = m.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::new();
    for r in 0..m.nrows() {
        let mut v: DVector<f64> = m.row(r).transpose();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v -= b * proj;
            }
        }
        let n = v.norm();
        if n <= tol {
            out.push(row_name(g, r));
        } else {
            basis.push(v / n);
        }
    }
    out
}

fn relative_residual(m: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let r = (m * x - b).norm();
    let nb = b.norm();
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

fn breakdown_check(
    voltages: &[f64],
    opts: &ControlOptions,
    constants: &PhysicalConstants,
    warnings: &mut Vec<String>,
) -> Result<Option<f64>, ControlError> {
    let Some(surf) = &opts.surface_field_per_volt else { return Ok(None) };
    if surf.len() != voltages.len() {
        return Err(ControlError::DimensionMismatch { expected: voltages.len(), got: surf.len() });
    }
    let peak = voltages.iter().zip(surf).map(|(v, m)| v.abs() * m).fold(0.0, f64::max);
    let limit = constants.breakdown_field();
    if peak > limit {
        if opts.strict {
            return Err(ControlError::Breakdown { field: peak, limit });
        }
        warnings.push(format!("peak surface field {peak:.3e} V/m exceeds breakdown limit {limit:.3e} V/m"));
    }
    Ok(Some(peak))
}

/// Solve `G·V = E` for an arbitrary per-site transverse target.
pub fn synthesize_drive(
    g: &GMatrix,
    target: &DriveTarget,
    constants: &PhysicalConstants,
    opts: &ControlOptions,
) -> Result<Synthesis, ControlError> {
    let g = g.perp_rows();
    let (rows, cols) = g.matrix.shape();
    if rows != cols {
        return Err(ControlError::NotSquare { rows, cols });
    }
    if target.n_sites() != g.n_sites() {
        return Err(ControlError::DimensionMismatch { expected: g.n_sites(), got: target.n_sites() });
    }
    if target.fields.iter().any(|&(a, b)| !(a.is_finite() && b.is_finite())) {
        return Err(ControlError::InvalidTarget("non-finite field".into()));
    }
    let deficient = dependent_rows(&g);
    if !deficient.is_empty() {
        return Err(ControlError::RankDeficient(deficient));
    }
    if !(g.condition_number < MAX_CONDITION) {
        return Err(ControlError::Singular(g.condition_number));
    }
    let b = DVector::from_vec(target.rhs());
    let lu = g.matrix.clone().lu();
    let mut x = lu.solve(&b).ok_or(ControlError::Singular(g.condition_number))?;
    for _ in 0..REFINEMENT_STEPS {
        let r = &b - &g.matrix * &x;
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => break,
        }
    }
    let voltages: Vec<f64> = x.iter().cloned().collect();
    let mut warnings = Vec::new();
    let peak_surface_field = breakdown_check(&voltages, opts, constants, &mut warnings)?;
    Ok(Synthesis {
        relative_residual: relative_residual(&g.matrix, &x, &b),
        condition_number: g.condition_number,
        voltages,
        peak_surface_field,
        warnings,
    })
}

/// Cross-talk elimination: the target must be zero away from the driven sites.
pub fn eliminate_crosstalk(
    g: &GMatrix,
    target: &DriveTarget,
    constants: &PhysicalConstants,
    opts: &ControlOptions,
) -> Result<Synthesis, ControlError> {
    if target.targets().is_empty() {
        return Err(ControlError::InvalidTarget("no target site has a nonzero field".into()));
    }
    synthesize_drive(g, target, constants, opts)
}

/// Voltages that produce `field` at `site` using only that site's electrode
/// pair, all other electrodes grounded.
pub fn local_drive(g: &GMatrix, site: usize, field: (f64, f64)) -> Result<Vec<f64>, ControlError> {
    let g = g.perp_rows();
    if site >= g.n_sites() || 2 * site + 1 >= g.n_electrodes() {
        return Err(ControlError::InvalidTarget(format!("site {site} out of range")));
    }
    let block = g.matrix.view((2 * site, 2 * site), (2, 2)).into_owned();
    let v = block
        .lu()
        .solve(&DVector::from_vec(vec![field.0, field.1]))
        .ok_or(ControlError::Singular(f64::INFINITY))?;
    let mut out = vec![0.0; g.n_electrodes()];
    out[2 * site] = v[0];
    out[2 * site + 1] = v[1];
    Ok(out)
}

/// Cross-talk fidelity of one idle site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteCrosstalk {
    pub site: usize,
    pub residual_ratio: f64,
    pub equator: f64,
    pub bloch_average: f64,
}

/// Cross-talk fidelities of every non-target site during a π-pulse on the
/// strongest target site.
pub fn crosstalk_report(
    g: &GMatrix,
    voltages: &[f64],
    target: &DriveTarget,
    constants: &PhysicalConstants,
) -> Result<Vec<SiteCrosstalk>, ControlError> {
    let g = g.perp_rows();
    let e = g
        .apply(voltages)
        .map_err(|_| ControlError::DimensionMismatch { expected: g.n_electrodes(), got: voltages.len() })?;
    let drive = |k: usize| DriveConfig {
        transition: Transition::PlusMinus,
        field: NvField::new(0.0, e[2 * k], e[2 * k + 1]),
        frequency: 0.0,
        phase: 0.0,
        duration: 0.0,
        b_bias: 0.0,
    };
    let targets = target.targets();
    let omega_t = targets
        .iter()
        .map(|&k| crate::spin::rabi_frequency(&drive(k), constants))
        .fold(0.0, f64::max);
    if !(omega_t > 0.0) {
        return Err(ControlError::InvalidTarget("target sites receive no field".into()));
    }
    let t_pi = 1.0 / (2.0 * omega_t);
    Ok((0..g.n_sites())
        .filter(|k| !targets.contains(k))
        .map(|k| {
            let d = drive(k);
            SiteCrosstalk {
                site: k,
                residual_ratio: crate::spin::rabi_frequency(&d, constants) / omega_t,
                equator: crosstalk_fidelity(&d, t_pi, CrosstalkAveraging::Equator, constants),
                bloch_average: crosstalk_fidelity(&d, t_pi, CrosstalkAveraging::BlochAverage, constants),
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct ChannelAllocation {
    pub voltages: Vec<f64>,
    /// Achieved NV-frame field per site.
    pub fields: Vec<NvField>,
    pub required_shifts: Vec<f64>,
    pub achieved_shifts: Vec<f64>,
    /// Largest `max(|E_∥|, |E_μ2|)/|E_μ1|` over sites with a nonzero request.
    pub max_zeroed_ratio: f64,
    pub peak_surface_field: Option<f64>,
    pub warnings: Vec<String>,
}

/// Program Stark shifts with antisymmetric top/bottom voltages.
///
/// Each site receives a field along `+μ̂₁` whose magnitude gives the
/// requested (non-positive) shift through the perpendicular term; `E_∥` and
/// `E_μ2` are driven to zero in the least-squares sense.
pub fn allocate_channels(
    g3: &GMatrix,
    plan: &ChannelPlan,
    constants: &PhysicalConstants,
    opts: &ControlOptions,
) -> Result<ChannelAllocation, ControlError> {
    if g3.components != Components::Full3 {
        return Err(ControlError::InvalidTarget("channel allocation needs a Full3 G-matrix".into()));
    }
    plan.validate()?;
    let n = g3.n_sites();
    if plan.assignment.len() != n {
        return Err(ControlError::DimensionMismatch { expected: n, got: plan.assignment.len() });
    }
    if g3.n_electrodes() != 2 * n {
        return Err(ControlError::DimensionMismatch { expected: 2 * n, got: g3.n_electrodes() });
    }
    let required = plan.required_shifts();
    let limit = constants.breakdown_field();
    let mut e_req = Vec::with_capacity(n);
    for (k, &s) in required.iter().enumerate() {
        let e = perp_field_for_shift(s, constants).map_err(|e| match e {
            ControlError::Infeasible(m) => ControlError::Infeasible(format!("site {k}: {m}")),
            other => other,
        })?;
        if e > limit {
            return Err(ControlError::Infeasible(format!(
                "site {k} needs {e:.3e} V/m, above the breakdown limit {limit:.3e} V/m"
            )));
        }
        e_req.push(e);
    }
    // Antisymmetric reduction: V_top = u, V_bottom = −u.
    let a = DMatrix::from_fn(3 * n, n, |r, k| g3.matrix[(r, 2 * k)] - g3.matrix[(r, 2 * k + 1)]);
    let mut b = DVector::zeros(3 * n);
    for k in 0..n {
        b[3 * k + 1] = e_req[k];
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let u = svd
        .solve(&b, smax * 1e-13)
        .map_err(|m| ControlError::Infeasible(format!("least-squares solve failed: {m}")))?;
    let voltages: Vec<f64> = (0..n).flat_map(|k| [u[k], -u[k]]).collect();
    let e = g3.apply(&voltages).expect("dimensions checked");
    let fields: Vec<NvField> = (0..n).map(|k| NvField::new(e[3 * k], e[3 * k + 1], e[3 * k + 2])).collect();
    let scale = e_req.iter().cloned().fold(0.0, f64::max);
    let mut max_ratio: f64 = 0.0;
    for (k, f) in fields.iter().enumerate() {
        let zeroed = f.par.abs().max(f.mu2.abs());
        if e_req[k] > 0.0 {
            max_ratio = max_ratio.max(zeroed / f.mu1.abs());
        } else if zeroed.max(f.mu1.abs()) > ZEROED_COMPONENT_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(ControlError::Tolerance(format!("site {k} requested zero shift but has field")));
        }
    }
    if max_ratio > ZEROED_COMPONENT_TOL {
        return Err(ControlError::Tolerance(format!(
            "parallel/μ2 residual is {:.2}% of |E_μ1|",
            100.0 * max_ratio
        )));
    }
    let mut warnings = Vec::new();
    let peak_surface_field = breakdown_check(&voltages, opts, constants, &mut warnings)?;
    Ok(ChannelAllocation {
        achieved_shifts: fields.iter().map(|f| stark_shift(f, constants)).collect(),
        voltages,
        fields,
        required_shifts: required,
        max_zeroed_ratio: max_ratio,
        peak_surface_field,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{DeviceGeometry, FrameTransform};
    use crate::field::{assemble_g, FieldBasisSet};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn surrogate_g(n: usize, fin: f64, comps: Components) -> (GMatrix, FieldBasisSet) {
        let geom = DeviceGeometry::with_sites(n);
        let basis = FieldBasisSet::surrogate(&geom, fin).unwrap();
        let g = assemble_g(&basis, &geom.nv_positions(), &FrameTransform::default(), comps).unwrap();
        (g, basis)
    }

    fn random_g(n: usize, seed: u64) -> GMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DMatrix::from_fn(2 * n, 2 * n, |_, _| rng.random_range(-1.0..1.0) * 1e5);
        for i in 0..2 * n {
            m[(i, i)] += 4e5;
        }
        GMatrix::new(m, Components::Perp2).unwrap()
    }

    #[test]
    fn scaled_identity_places_field_on_target_only() {
        let g = GMatrix::new(DMatrix::identity(6, 6) * 2e6, Components::Perp2).unwrap();
        let t = DriveTarget::single_site(3, 0, (1e7, 0.0));
        let s = eliminate_crosstalk(&g, &t, &k(), &ControlOptions::default()).unwrap();
        assert_relative_eq!(s.voltages[0], 5.0, epsilon = 1e-12);
        assert!(s.voltages[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn random_well_conditioned_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..5 {
            let g = random_g(6, seed);
            let t = DriveTarget { fields: (0..6).map(|_| (rng.random_range(-1e7..1e7), rng.random_range(-1e7..1e7))).collect() };
            let s = synthesize_drive(&g, &t, &k(), &ControlOptions::default()).unwrap();
            // Oracle: recompute the residual directly.
            let e = g.apply(&s.voltages).unwrap();
            let b = t.rhs();
            let num: f64 = e.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
            assert!(num / den < 1e-9);
            assert_relative_eq!(num / den, s.relative_residual, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank_deficiency_names_rows() {
        let mut m = DMatrix::identity(4, 4);
        m.set_row(3, &(m.row(0) * 2.0 + m.row(1)));
        let g = GMatrix::new(m, Components::Perp2).unwrap();
        let err = synthesize_drive(&g, &DriveTarget::zeros(2), &k(), &ControlOptions::default()).unwrap_err();
        match err {
            ControlError::RankDeficient(rows) => assert_eq!(rows, vec!["site 1 mu2".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn odd_symmetric_array_has_common_mode_null_space() {
        // A mirror-symmetric common-mode pattern leaves E_μ2 = 0 on every site.
        let (g, _) = surrogate_g(5, 1.7, Components::Perp2);
        match synthesize_drive(&g, &DriveTarget::zeros(5), &k(), &ControlOptions::default()) {
            Err(ControlError::RankDeficient(rows)) => assert_eq!(rows.len(), 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_square_rejected() {
        let g = GMatrix::new(DMatrix::identity(4, 6), Components::Perp2).unwrap();
        assert!(matches!(
            synthesize_drive(&g, &DriveTarget::zeros(2), &k(), &ControlOptions::default()),
            Err(ControlError::NotSquare { rows: 4, cols: 6 })
        ));
    }

    #[test]
    fn two_site_amplitude_ratio() {
        let (g, _) = surrogate_g(6, 1.7, Components::Perp2);
        let mut t = DriveTarget::zeros(6);
        t.fields[1] = (1e7, 0.0);
        t.fields[4] = (0.5e7, 0.0);
        let s = synthesize_drive(&g, &t, &k(), &ControlOptions::default()).unwrap();
        let e = g.apply(&s.voltages).unwrap();
        let amp = |k: usize| e[2 * k].hypot(e[2 * k + 1]);
        assert_relative_eq!(amp(1) / amp(4), 2.0, max_relative = 1e-9);
    }

    #[test]
    fn superposition_of_single_site_solutions() {
        let (g, _) = surrogate_g(6, 1.7, Components::Perp2);
        let o = ControlOptions::default();
        let a = DriveTarget::single_site(6, 1, (1e7, 2e6));
        let b = DriveTarget::single_site(6, 3, (1e7, 2e6));
        let mut both = a.clone();
        both.fields[3] = b.fields[3];
        let va = synthesize_drive(&g, &a, &k(), &o).unwrap().voltages;
        let vb = synthesize_drive(&g, &b, &k(), &o).unwrap().voltages;
        let vab = synthesize_drive(&g, &both, &k(), &o).unwrap().voltages;
        for i in 0..12 {
            assert!((vab[i] - va[i] - vb[i]).abs() <= 1e-9 * vab.iter().map(|v| v.abs()).fold(0.0, f64::max));
        }
    }

    #[test]
    fn crosstalk_ordering_on_surrogate_array() {
        let field = (1e7, 0.0);
        let site = 4;
        let kk = k();
        let (g_fin, _) = surrogate_g(10, 1.7, Components::Perp2);
        let (g_bare, _) = surrogate_g(10, 1.0, Components::Perp2);
        let t = DriveTarget::single_site(10, site, field);
        let nb = |r: &[SiteCrosstalk]| r.iter().find(|c| c.site == site + 1).unwrap().equator;
        let f_bare = nb(&crosstalk_report(&g_bare, &local_drive(&g_bare, site, field).unwrap(), &t, &kk).unwrap());
        let f_fin = nb(&crosstalk_report(&g_fin, &local_drive(&g_fin, site, field).unwrap(), &t, &kk).unwrap());
        let ce = eliminate_crosstalk(&g_fin, &t, &kk, &ControlOptions::default()).unwrap();
        let f_ce = nb(&crosstalk_report(&g_fin, &ce.voltages, &t, &kk).unwrap());
        assert!(f_ce > 0.999, "{f_ce}");
        assert!((0.85..=0.95).contains(&f_fin), "fin {f_fin}");
        assert!((0.60..=0.75).contains(&f_bare), "bare {f_bare}");
        assert!(f_ce > f_fin && f_fin > f_bare);
    }

    #[test]
    fn stark_shift_values() {
        let kk = k();
        assert_eq!(stark_shift(&NvField::new(0.0, 0.0, 0.0), &kk), 0.0);
        let perp = stark_shift(&NvField::new(0.0, 1e8, 0.0), &kk);
        // Oracle: 2.1 D and 1.5 D in SI, h = 6.62607015e-34.
        let d = 3.33564e-30;
        let h = 6.626_070_15e-34;
        assert_relative_eq!(perp, -(2f64.sqrt() / 2.0) * 2.1 * d * 1e8 / h, max_relative = 1e-12);
        assert!((perp.abs() - 7.475e11).abs() < 1e9);
        let par = stark_shift(&NvField::new(1e8, 0.0, 0.0), &kk);
        assert_relative_eq!(par, 1.5 * d * 1e8 / h, max_relative = 1e-12);
        assert_relative_eq!(par / perp.abs(), 1.5 / (2.1 * 2f64.sqrt() / 2.0), max_relative = 1e-12);
    }

    #[test]
    fn all_sites_parked() {
        let (g3, basis) = surrogate_g(10, 1.7, Components::Full3);
        let opts = ControlOptions { strict: false, surface_field_per_volt: Some(basis.surface_field_per_volt()) };
        let plan = ChannelPlan::standard(10);
        let a = allocate_channels(&g3, &plan, &k(), &opts).unwrap();
        for k in 0..10 {
            assert_relative_eq!(a.voltages[2 * k], -a.voltages[2 * k + 1], epsilon = 0.0);
            assert!(a.fields[k].par.abs() < 0.01 * a.fields[k].mu1.abs());
            assert!(a.fields[k].mu2.abs() < 0.01 * a.fields[k].mu1.abs());
            assert_relative_eq!(a.achieved_shifts[k], -500e9, max_relative = 1e-6);
        }
        assert!(a.peak_surface_field.unwrap() > 0.0);
    }

    #[test]
    fn adjacent_pair_on_resonance() {
        let (g3, _) = surrogate_g(10, 1.7, Components::Full3);
        let mut plan = ChannelPlan::standard(10);
        plan.assignment[4] = ChannelRequest::Channel(2);
        plan.assignment[5] = ChannelRequest::Channel(2);
        let a = allocate_channels(&g3, &plan, &k(), &ControlOptions::default()).unwrap();
        assert!((a.achieved_shifts[4] - a.achieved_shifts[5]).abs() < plan.linewidth / 10.0);
        assert!((a.achieved_shifts[4] - a.achieved_shifts[3]).abs() > 100e9);
    }

    #[test]
    fn zero_shift_everywhere_gives_zero_volts() {
        let (g3, _) = surrogate_g(4, 1.7, Components::Full3);
        let mut plan = ChannelPlan::standard(4);
        plan.assignment = vec![ChannelRequest::ShiftHz(0.0); 4];
        let a = allocate_channels(&g3, &plan, &k(), &ControlOptions::default()).unwrap();
        assert!(a.voltages.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn infeasible_and_invalid_plans() {
        let (g3, _) = surrogate_g(3, 1.7, Components::Full3);
        let mut plan = ChannelPlan::standard(3);
        plan.assignment[0] = ChannelRequest::ShiftHz(-2e13);
        assert!(matches!(allocate_channels(&g3, &plan, &k(), &ControlOptions::default()), Err(ControlError::Infeasible(_))));
        plan.assignment[0] = ChannelRequest::ShiftHz(1e9);
        assert!(matches!(allocate_channels(&g3, &plan, &k(), &ControlOptions::default()), Err(ControlError::Infeasible(_))));
        let mut crowded = ChannelPlan::standard(3);
        crowded.channels = vec![-200e9, 60e9, 65e9];
        assert!(crowded.validate().is_err());
    }

    #[test]
    fn strict_breakdown_is_an_error() {
        let (g, basis) = surrogate_g(4, 1.7, Components::Perp2);
        let t = DriveTarget::single_site(4, 1, (5e8, 0.0));
        let mut opts = ControlOptions { strict: false, surface_field_per_volt: Some(basis.surface_field_per_volt()) };
        let s = synthesize_drive(&g, &t, &k(), &opts).unwrap();
        assert!(!s.warnings.is_empty());
        opts.strict = true;
        assert!(matches!(synthesize_drive(&g, &t, &k(), &opts), Err(ControlError::Breakdown { .. })));
    }

    #[test]
    fn request_json() {
        let d = SynthesisRequest::from_json(r#"{"mode":"drive","n_sites":3,"sites":[{"site":1,"mu1":1e7}]}"#).unwrap();
        assert_eq!(d, SynthesisRequest::Drive(DriveTarget::single_site(3, 1, (1e7, 0.0))));
        let s = SynthesisRequest::from_json(
            r#"{"mode":"stark","n_sites":2,"sites":[{"site":1,"channel":2},{"site":0,"shift_hz":-1e10}]}"#,
        )
        .unwrap();
        match s {
            SynthesisRequest::Stark(p) => {
                assert_eq!(p.assignment, vec![ChannelRequest::ShiftHz(-1e10), ChannelRequest::Channel(2)]);
            }
            _ => panic!(),
        }
        assert!(SynthesisRequest::from_json(r#"{"mode":"drive","n_sites":3,"sites":[{"site":3,"mu1":1}]}"#).is_err());
        assert!(SynthesisRequest::from_json(r#"{"mode":"both"}"#).is_err());
        assert!(SynthesisRequest::from_json(r#"{"mode":"drive","n_sites":1,"sites":[],"x":1}"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn solution_is_linear_in_target(alpha in -10.0f64..10.0, seed in 0u64..1000) {
            let g = random_g(4, seed);
            let t = DriveTarget { fields: vec![(1e7, 0.0), (0.0, 3e6), (-2e6, 1e6), (0.0, 0.0)] };
            let o = ControlOptions::default();
            let v = synthesize_drive(&g, &t, &k(), &o).unwrap().voltages;
            let va = synthesize_drive(&g, &t.scaled(alpha), &k(), &o).unwrap().voltages;
            let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
            for (a, b) in va.iter().zip(&v) {
                prop_assert!((a - alpha * b).abs() <= 1e-9 * scale * alpha.abs().max(1.0));
            }
        }

        #[test]
        fn larger_perp_field_shifts_further_down(e1 in 0.0f64..1e8, de in 1.0f64..1e7) {
            let kk = k();
            let a = stark_shift(&NvField::new(0.0, e1, 0.0), &kk);
            let b = stark_shift(&NvField::new(0.0, e1 + de, 0.0), &kk);
            prop_assert!(b < a);
        }
    }
}
