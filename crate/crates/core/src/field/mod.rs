//! Quasi-static field responses of the electrode array and the linear map
//! `E = G·V` from electrode voltages to NV-frame fields.

mod gmatrix;
mod map;
pub mod profiles;
mod surrogate;

pub use gmatrix::{Component, Components, GMatrix, MAX_CONDITION};
pub use map::{sample_to_map, FieldMap, FIELD_MAP_MAGIC};
pub use profiles::{appendix_c_profile, fit_loglog_slope, ProfileKind};
pub use surrogate::{SurrogateModel, DEFAULT_FIN_CONFINEMENT};

use std::sync::Arc;

use nalgebra::{DMatrix, Vector3};
use thiserror::Error;

use crate::device::{DeviceGeometry, FrameTransform};

pub type V3 = Vector3<f64>;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing block '{0}'")]
    MissingBlock(String),
    #[error("axis {axis} is not strictly increasing")]
    NonMonotone { axis: char },
    #[error("line {line}: non-finite field value")]
    NonFinite { line: usize },
    #[error("point ({x:.4e}, {y:.4e}, {z:.4e}) m lies outside the field-map domain")]
    OutOfDomain { x: f64, y: f64, z: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl FieldError {
    pub(crate) fn out_of_domain(p: &V3) -> Self {
        FieldError::OutOfDomain { x: p.x, y: p.y, z: p.z }
    }
}

/// Origin of a basis set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Surrogate,
    Imported,
    /// Spatially uniform responses, used for calibration and testing.
    Synthetic,
}

#[derive(Debug, Clone)]
enum Response {
    Surrogate { model: Arc<SurrogateModel>, electrode: usize },
    Imported(FieldMap),
    Uniform(V3),
}

/// Per-electrode unit-voltage field responses (V/m per V).
#[derive(Debug, Clone)]
pub struct FieldBasisSet {
    provenance: Provenance,
    responses: Vec<Response>,
}

impl FieldBasisSet {
    /// Analytic surrogate for the electrode array in `geometry`.
    pub fn surrogate(geometry: &DeviceGeometry, fin_confinement: f64) -> Result<Self, FieldError> {
        let model = Arc::new(SurrogateModel::new(geometry, fin_confinement)?);
        Ok(Self::from_model(model))
    }

    pub fn from_model(model: Arc<SurrogateModel>) -> Self {
        let responses = (0..model.n_electrodes())
            .map(|electrode| Response::Surrogate { model: model.clone(), electrode })
            .collect();
        Self { provenance: Provenance::Surrogate, responses }
    }

    /// Basis from imported maps; electrode ids must be exactly `0..n`.
    pub fn from_maps(mut maps: Vec<FieldMap>) -> Result<Self, FieldError> {
        if maps.is_empty() {
            return Err(FieldError::InvalidArgument("no field maps supplied".into()));
        }
        maps.sort_by_key(|m| m.electrode);
        for (i, m) in maps.iter().enumerate() {
            if m.electrode != i {
                return Err(FieldError::InvalidArgument(format!(
                    "electrode ids must be 0..{} without gaps (found {} at position {i})",
                    maps.len(),
                    m.electrode
                )));
            }
        }
        Ok(Self {
            provenance: Provenance::Imported,
            responses: maps.into_iter().map(Response::Imported).collect(),
        })
    }

    /// Spatially uniform responses.
    pub fn uniform(fields: Vec<V3>) -> Self {
        Self {
            provenance: Provenance::Synthetic,
            responses: fields.into_iter().map(Response::Uniform).collect(),
        }
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn n_electrodes(&self) -> usize {
        self.responses.len()
    }

    /// Reorder electrodes: new electrode `i` is old electrode `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, FieldError> {
        let n = self.n_electrodes();
        let mut seen = vec![false; n];
        if perm.len() != n {
            return Err(FieldError::DimensionMismatch { expected: n, got: perm.len() });
        }
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(FieldError::InvalidArgument("not a permutation".into()));
            }
        }
        Ok(Self {
            provenance: self.provenance,
            responses: perm.iter().map(|&p| self.responses[p].clone()).collect(),
        })
    }

    /// Responses of every electrode at `point`.
    pub fn responses_at(&self, point: &V3) -> Result<Vec<V3>, FieldError> {
        let mut out = Vec::with_capacity(self.responses.len());
        let mut cache: Option<(usize, Vec<V3>)> = None;
        for r in &self.responses {
            out.push(match r {
                Response::Surrogate { model, electrode } => {
                    let key = Arc::as_ptr(model) as usize;
                    if cache.as_ref().map(|c| c.0) != Some(key) {
                        cache = Some((key, model.all_responses(point)));
                    }
                    cache.as_ref().unwrap().1[*electrode]
                }
                Response::Imported(m) => m.sample(point)?,
                Response::Uniform(v) => *v,
            });
        }
        Ok(out)
    }

    /// Response of electrode `j` at `point`.
    pub fn response(&self, j: usize, point: &V3) -> Result<V3, FieldError> {
        match self.responses.get(j) {
            None => Err(FieldError::DimensionMismatch { expected: self.n_electrodes(), got: j + 1 }),
            Some(Response::Surrogate { model, electrode }) => Ok(model.response(*electrode, point)),
            Some(Response::Imported(m)) => m.sample(point),
            Some(Response::Uniform(v)) => Ok(*v),
        }
    }

    /// Largest field magnitude per volt at the surface of each electrode,
    /// used for breakdown checks. Imported maps report their grid maximum.
    pub fn surface_field_per_volt(&self) -> Vec<f64> {
        self.responses
            .iter()
            .map(|r| match r {
                Response::Surrogate { model, electrode } => model.surface_field_per_volt(*electrode),
                Response::Imported(m) => m.max_magnitude(),
                Response::Uniform(v) => v.norm(),
            })
            .collect()
    }
}

/// `Σ_j V_j · basis_j(p)` at each point.
pub fn superpose(basis: &FieldBasisSet, voltages: &[f64], points: &[V3]) -> Result<Vec<V3>, FieldError> {
    if voltages.len() != basis.n_electrodes() {
        return Err(FieldError::DimensionMismatch {
            expected: basis.n_electrodes(),
            got: voltages.len(),
        });
    }
    points
        .iter()
        .map(|p| {
            let rs = basis.responses_at(p)?;
            Ok(rs.iter().zip(voltages).fold(V3::zeros(), |acc, (r, &v)| acc + r * v))
        })
        .collect()
}

/// Build `G` with rows `(site, component)` and one column per electrode.
pub fn assemble_g(
    basis: &FieldBasisSet,
    nv_positions: &[V3],
    frame: &FrameTransform,
    components: Components,
) -> Result<GMatrix, FieldError> {
    let comps = components.list();
    let nc = comps.len();
    let ne = basis.n_electrodes();
    let mut m = DMatrix::zeros(nv_positions.len() * nc, ne);
    for (s, p) in nv_positions.iter().enumerate() {
        let rs = basis.responses_at(p)?;
        for (j, r) in rs.iter().enumerate() {
            let nv = frame.lab_to_nv(r);
            for (ci, c) in comps.iter().enumerate() {
                m[(s * nc + ci, j)] = c.pick(&nv);
            }
        }
    }
    GMatrix::new(m, components)
}
