//! Analytic electrode surrogate.
//!
//! Each electrode is a uniformly charged line of length `h_fin` along lab x̂,
//! centred at `(0, ±l_fin/2, k·a)`. Charges for a given set of electrode
//! potentials come from the full potential-coefficient matrix, so grounded
//! electrodes screen their neighbours. All quantities are in units where the
//! factor `1/(4πε)` is absorbed into the charge; it cancels between the
//! potential solve and the field evaluation.
//!
//! Dielectric fins are represented by an axial window that raises the field
//! near the electrode's own site by `fin_confinement` and leaves the field at
//! neighbouring sites and in the far field unchanged.

use nalgebra::{DMatrix, DVector};

use super::{FieldError, V3};
use crate::device::DeviceGeometry;

/// Fin enhancement factor on the driven site.
pub const DEFAULT_FIN_CONFINEMENT: f64 = 1.7;

#[derive(Debug, Clone)]
pub struct SurrogateModel {
    centres: Vec<V3>,
    /// Site coordinate along ẑ for each electrode.
    site_z: Vec<f64>,
    length: f64,
    radius: f64,
    /// Column `j`: line charges when electrode `j` is held at 1 V, all others at 0 V.
    charges: DMatrix<f64>,
    fin_confinement: f64,
    fin_width: f64,
}

/// `ln(u + √(u² + ρ²))`-type quantity `u + r` without cancellation.
fn u_plus_r(u: f64, r: f64, rho: f64) -> f64 {
    if u >= 0.0 {
        u + r
    } else {
        rho * rho / (r - u)
    }
}

/// Potential of a unit line charge along x̂ centred at `c`.
fn line_potential(p: &V3, c: &V3, length: f64) -> f64 {
    let x = -(p.x - c.x).abs();
    let rho = (p.y - c.y).hypot(p.z - c.z);
    let (u1, u2) = (0.5 * length - x, -0.5 * length - x);
    let (r1, r2) = (u1.hypot(rho), u2.hypot(rho));
    (u_plus_r(u1, r1, rho) / u_plus_r(u2, r2, rho)).ln()
}

/// Field of a unit line charge along x̂ centred at `c`.
fn line_field(p: &V3, c: &V3, length: f64) -> V3 {
    let dx = p.x - c.x;
    let (dy, dz) = (p.y - c.y, p.z - c.z);
    let rho = dy.hypot(dz);
    let r_plus = (0.5 * length - dx).hypot(rho);
    let r_minus = (-0.5 * length - dx).hypot(rho);
    let ex = 1.0 / r_plus - 1.0 / r_minus;
    if rho == 0.0 {
        return V3::new(ex, 0.0, 0.0);
    }
    // Radial part is even in x; evaluate on the x ≤ 0 side for accuracy.
    let x = -dx.abs();
    let (u1, u2) = (0.5 * length - x, -0.5 * length - x);
    let (r1, r2) = (u1.hypot(rho), u2.hypot(rho));
    // g(u) = (1 − u/r)/ρ
    let g = |u: f64, r: f64| if u >= 0.0 { rho / (r * (r + u)) } else { (r - u) / (r * rho) };
    let e_rho = g(u2, r2) - g(u1, r1);
    V3::new(ex, e_rho * dy / rho, e_rho * dz / rho)
}

impl SurrogateModel {
    pub fn new(geometry: &DeviceGeometry, fin_confinement: f64) -> Result<Self, FieldError> {
        if !(fin_confinement >= 1.0 && fin_confinement.is_finite()) {
            return Err(FieldError::InvalidArgument(format!(
                "fin_confinement must be >= 1 (got {fin_confinement})"
            )));
        }
        let g = geometry;
        for (name, v) in [("a", g.a), ("l_fin", g.l_fin), ("w_fin", g.w_fin), ("h_fin", g.h_fin)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FieldError::Degenerate(format!("{name} must be > 0 (got {v})")));
            }
        }
        if g.n_sites == 0 {
            return Err(FieldError::Degenerate("no sites".into()));
        }
        let radius = g.w_fin / 4.0;
        let half_gap = g.electrode_offset();
        if radius >= half_gap || 2.0 * radius >= g.a {
            return Err(FieldError::Degenerate(format!(
                "electrode radius {radius:.3e} m does not fit the spacing"
            )));
        }
        let mut centres = Vec::with_capacity(2 * g.n_sites);
        let mut site_z = Vec::with_capacity(2 * g.n_sites);
        for k in 0..g.n_sites {
            let z = g.nominal_position(k).z;
            for side in [1.0, -1.0] {
                centres.push(V3::new(0.0, side * half_gap, z));
                site_z.push(z);
            }
        }
        let n = centres.len();
        // Collocate on each electrode's surface, facing the array axis.
        let p = DMatrix::from_fn(n, n, |i, j| {
            let toward_axis = if centres[i].y > 0.0 { -radius } else { radius };
            line_potential(&(centres[i] + V3::new(0.0, toward_axis, 0.0)), &centres[j], g.h_fin)
        });
        let lu = p.lu();
        let charges = lu
            .try_inverse()
            .ok_or_else(|| FieldError::Degenerate("singular potential-coefficient matrix".into()))?;
        Ok(Self {
            centres,
            site_z,
            length: g.h_fin,
            radius,
            charges,
            fin_confinement,
            fin_width: g.w_fin / 2.0,
        })
    }

    pub fn n_electrodes(&self) -> usize {
        self.centres.len()
    }

    pub fn centres(&self) -> &[V3] {
        &self.centres
    }

    pub fn fin_confinement(&self) -> f64 {
        self.fin_confinement
    }

    fn fin_window(&self, electrode: usize, p: &V3) -> f64 {
        let s = (p.z - self.site_z[electrode]) / self.fin_width;
        1.0 + (self.fin_confinement - 1.0) * (-s * s).exp()
    }

    fn line_fields(&self, p: &V3) -> Vec<V3> {
        self.centres.iter().map(|c| line_field(p, c, self.length)).collect()
    }

    /// Unit-voltage responses of every electrode at `p`.
    pub fn all_responses(&self, p: &V3) -> Vec<V3> {
        let lines = self.line_fields(p);
        (0..self.n_electrodes())
            .map(|j| {
                let col = self.charges.column(j);
                let e = lines.iter().zip(col.iter()).fold(V3::zeros(), |acc, (l, &q)| acc + l * q);
                e * self.fin_window(j, p)
            })
            .collect()
    }

    pub fn response(&self, electrode: usize, p: &V3) -> V3 {
        let lines = self.line_fields(p);
        let col = self.charges.column(electrode);
        let e = lines.iter().zip(col.iter()).fold(V3::zeros(), |acc, (l, &q)| acc + l * q);
        e * self.fin_window(electrode, p)
    }

    /// Potential at `p` for the given electrode voltages (bare, no fin window).
    pub fn potential(&self, voltages: &[f64], p: &V3) -> f64 {
        let q = &self.charges * DVector::from_column_slice(voltages);
        self.centres
            .iter()
            .zip(q.iter())
            .map(|(c, &qi)| qi * line_potential(p, c, self.length))
            .sum()
    }

    /// Field magnitude per volt on the electrode surface facing the array axis.
    pub fn surface_field_per_volt(&self, electrode: usize) -> f64 {
        let c = self.centres[electrode];
        let toward_axis = if c.y > 0.0 { -self.radius } else { self.radius };
        self.response(electrode, &(c + V3::new(0.0, toward_axis, 0.0))).norm()
    }
}
