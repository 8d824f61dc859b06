use nalgebra::DMatrix;

use super::FieldError;
use crate::device::NvField;

/// Condition numbers at or above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

const GMATRIX_MAGIC: &str = "# efpsa-gmatrix v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Par,
    Mu1,
    Mu2,
}

impl Component {
    pub fn pick(self, f: &NvField) -> f64 {
        match self {
            Component::Par => f.par,
            Component::Mu1 => f.mu1,
            Component::Mu2 => f.mu2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Par => "par",
            Component::Mu1 => "mu1",
            Component::Mu2 => "mu2",
        }
    }
}

/// Which NV-frame components each site contributes as rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Components {
    /// `(E_μ1, E_μ2)` per site.
    Perp2,
    /// `(E_∥, E_μ1, E_μ2)` per site.
    Full3,
}

impl Components {
    pub fn list(self) -> &'static [Component] {
        match self {
            Components::Perp2 => &[Component::Mu1, Component::Mu2],
            Components::Full3 => &[Component::Par, Component::Mu1, Component::Mu2],
        }
    }

    pub fn per_site(self) -> usize {
        self.list().len()
    }
}

/// Linear response from electrode voltages to NV-frame field components.
/// Column `2k` is the top electrode of site `k`, column `2k+1` the bottom one.
#[derive(Debug, Clone, PartialEq)]
pub struct GMatrix {
    pub matrix: DMatrix<f64>,
    pub components: Components,
    pub condition_number: f64,
}

/// Ratio of extreme singular values (infinite if rank-deficient).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

impl GMatrix {
    pub fn new(matrix: DMatrix<f64>, components: Components) -> Result<Self, FieldError> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 || !matrix.nrows().is_multiple_of(components.per_site()) {
            return Err(FieldError::InvalidArgument(format!(
                "{} rows is not a positive multiple of {} components",
                matrix.nrows(),
                components.per_site()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::InvalidArgument("G has non-finite entries".into()));
        }
        let condition_number = condition_number(&matrix);
        Ok(Self { matrix, components, condition_number })
    }

    pub fn n_sites(&self) -> usize {
        self.matrix.nrows() / self.components.per_site()
    }

    pub fn n_electrodes(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row_label(&self, row: usize) -> (usize, Component) {
        let nc = self.components.per_site();
        (row / nc, self.components.list()[row % nc])
    }

    pub fn apply(&self, voltages: &[f64]) -> Result<Vec<f64>, FieldError> {
        if voltages.len() != self.n_electrodes() {
            return Err(FieldError::DimensionMismatch { expected: self.n_electrodes(), got: voltages.len() });
        }
        let v = nalgebra::DVector::from_column_slice(voltages);
        Ok((&self.matrix * v).iter().cloned().collect())
    }

    /// Restrict to the `(E_μ1, E_μ2)` rows.
    pub fn perp_rows(&self) -> GMatrix {
        match self.components {
            Components::Perp2 => self.clone(),
            Components::Full3 => {
                let rows: Vec<usize> = (0..self.matrix.nrows()).filter(|r| r % 3 != 0).collect();
                let m = self.matrix.select_rows(rows.iter());
                GMatrix::new(m, Components::Perp2).expect("subset of a valid matrix")
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{GMATRIX_MAGIC}\n# units: V/m per V\nsite,component");
        for j in 0..self.n_electrodes() {
            s.push_str(&format!(",e{j}"));
        }
        s.push('\n');
        for r in 0..self.matrix.nrows() {
            let (site, c) = self.row_label(r);
            s.push_str(&format!("{site},{}", c.name()));
            for v in self.matrix.row(r).iter() {
                s.push_str(&format!(",{v:e}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, FieldError> {
        let perr = |line: usize, msg: String| FieldError::Parse { line, msg };
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
        if headers.len() < 3 || &headers[0] != "site" || &headers[1] != "component" {
            return Err(FieldError::MissingBlock("header 'site,component,e0,...'".into()));
        }
        let ne = headers.len() - 2;
        for (j, h) in headers.iter().skip(2).enumerate() {
            if h != format!("e{j}") {
                return Err(perr(1, format!("expected column 'e{j}', found '{h}'")));
            }
        }
        let mut labels = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| perr(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != ne + 2 {
                return Err(perr(line, format!("expected {} fields, found {}", ne + 2, rec.len())));
            }
            let site: usize = rec[0].parse().map_err(|_| perr(line, "bad site index".into()))?;
            let comp = match &rec[1] {
                "par" => Component::Par,
                "mu1" => Component::Mu1,
                "mu2" => Component::Mu2,
                other => return Err(perr(line, format!("unknown component '{other}'"))),
            };
            for f in rec.iter().skip(2) {
                let v: f64 = f.parse().map_err(|_| perr(line, format!("bad number '{f}'")))?;
                if !v.is_finite() {
                    return Err(perr(line, "non-finite entry".into()));
                }
                values.push(v);
            }
            labels.push((line, site, comp));
        }
        if labels.is_empty() {
            return Err(FieldError::MissingBlock("matrix rows".into()));
        }
        let components = if labels[0].2 == Component::Par { Components::Full3 } else { Components::Perp2 };
        let nc = components.per_site();
        for (r, &(line, site, comp)) in labels.iter().enumerate() {
            if site != r / nc || comp != components.list()[r % nc] {
                return Err(perr(
                    line,
                    format!("row out of order: expected site {} component {}", r / nc, components.list()[r % nc].name()),
                ));
            }
        }
        if labels.len() % nc != 0 {
            return Err(FieldError::MissingBlock(format!("rows for site {}", labels.len() / nc)));
        }
        let m = DMatrix::from_row_slice(labels.len(), ne, &values);
        GMatrix::new(m, components)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn csv_round_trip() {
        let m = DMatrix::from_fn(6, 4, |i, j| (i as f64 + 1.0) * 1.5e5 - j as f64 * 3.3e4);
        let g = GMatrix::new(m, Components::Full3).unwrap();
        let t = g.to_csv();
        let back = GMatrix::from_csv(&t).unwrap();
        assert_eq!(back.matrix, g.matrix);
        assert_eq!(back.components, Components::Full3);
        assert_eq!(back.to_csv(), t);
    }

    #[test]
    fn csv_errors() {
        assert!(GMatrix::from_csv("").is_err());
        assert!(GMatrix::from_csv("site,component,e0\n").is_err());
        assert!(GMatrix::from_csv("site,component,e0\n0,mu2,1\n0,mu1,2\n").is_err());
        assert!(GMatrix::from_csv("site,component,e0\n0,mu1,1\n").is_err());
        assert!(GMatrix::from_csv("site,component,e0\n0,mu1,x\n0,mu2,1\n").is_err());
        assert!(GMatrix::from_csv("site,component,e1\n0,mu1,1\n0,mu2,1\n").is_err());
        let ok = GMatrix::from_csv("# c\nsite,component,e0,e1\n0,mu1,1,0\n0,mu2,0,2\n").unwrap();
        assert_relative_eq!(ok.condition_number, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn condition_number_of_singular_is_infinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(condition_number(&m) > 1e15);
    }

    #[test]
    fn perp_rows_drop_parallel() {
        let m = DMatrix::from_fn(3, 2, |i, j| (3 * i + j) as f64);
        let g = GMatrix::new(m, Components::Full3).unwrap();
        let p = g.perp_rows();
        assert_eq!(p.matrix.nrows(), 2);
        assert_eq!(p.matrix[(0, 0)], 3.0);
    }
}
