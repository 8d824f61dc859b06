//! Text field-map format for externally computed electrode responses.
//!
//! ```text
//! # efpsa-field-map v1
//! electrode <id>
//! units V/m per V
//! dims <nx> <ny> <nz>
//! x <nx values, m>
//! y <ny values, m>
//! z <nz values, m>
//! data
//! <ex>,<ey>,<ez>      (nx·ny·nz rows, x varies fastest, then y, then z)
//! end
//! ```
//!
//! Blank lines and lines starting with `#` after the first are ignored.

use super::{FieldBasisSet, FieldError, V3};

pub const FIELD_MAP_MAGIC: &str = "# efpsa-field-map v1";
const UNITS: &str = "V/m per V";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub electrode: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
    /// Row-major with x fastest.
    pub data: Vec<V3>,
}

fn perr(line: usize, msg: impl Into<String>) -> FieldError {
    FieldError::Parse { line, msg: msg.into() }
}

fn check_axis(axis: char, v: &[f64]) -> Result<(), FieldError> {
    if v.len() < 2 || v.windows(2).any(|w| !(w[1] > w[0])) || v.iter().any(|x| !x.is_finite()) {
        return Err(FieldError::NonMonotone { axis });
    }
    Ok(())
}

/// Cell index and fractional offset of `x` on `axis`.
fn locate(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let (lo, hi) = (axis[0], *axis.last().unwrap());
    if !(x >= lo && x <= hi) {
        return None;
    }
    let i = axis.partition_point(|&a| a <= x).clamp(1, axis.len() - 1) - 1;
    Some((i, (x - axis[i]) / (axis[i + 1] - axis[i])))
}

impl FieldMap {
    pub fn new(electrode: usize, xs: Vec<f64>, ys: Vec<f64>, zs: Vec<f64>, data: Vec<V3>) -> Result<Self, FieldError> {
        check_axis('x', &xs)?;
        check_axis('y', &ys)?;
        check_axis('z', &zs)?;
        let n = xs.len() * ys.len() * zs.len();
        if data.len() != n {
            return Err(FieldError::DimensionMismatch { expected: n, got: data.len() });
        }
        if data.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(FieldError::NonFinite { line: 0 });
        }
        Ok(Self { electrode, xs, ys, zs, data })
    }

    pub fn parse(text: &str) -> Result<Self, FieldError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, l)) if l == FIELD_MAP_MAGIC => {}
            Some((n, _)) => return Err(perr(n, format!("expected header '{FIELD_MAP_MAGIC}'"))),
            None => return Err(FieldError::MissingBlock("header".into())),
        }
        let mut lines = lines.filter(|(_, l)| !l.starts_with('#'));
        let mut keyed = |key: &str| -> Result<(usize, String), FieldError> {
            let (n, l) = lines.next().ok_or_else(|| FieldError::MissingBlock(key.into()))?;
            let mut parts = l.splitn(2, char::is_whitespace);
            if parts.next() != Some(key) {
                return Err(perr(n, format!("expected '{key}' block")));
            }
            Ok((n, parts.next().unwrap_or("").trim().to_string()))
        };
        let (n, rest) = keyed("electrode")?;
        let electrode: usize = rest.parse().map_err(|_| perr(n, "electrode id must be a non-negative integer"))?;
        let (n, rest) = keyed("units")?;
        if rest != UNITS {
            return Err(perr(n, format!("units must be '{UNITS}'")));
        }
        let (n, rest) = keyed("dims")?;
        let dims: Vec<usize> = rest
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| perr(n, "dims must be three integers"))?;
        if dims.len() != 3 || dims.iter().any(|&d| d < 2) {
            return Err(perr(n, "dims must be three integers >= 2"));
        }
        let total = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .filter(|&t| t <= 1 << 28)
            .ok_or_else(|| perr(n, "grid too large"))?;
        let mut axes = Vec::with_capacity(3);
        for (k, name) in ["x", "y", "z"].iter().enumerate() {
            let (n, rest) = keyed(name)?;
            let v: Vec<f64> = rest
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| perr(n, format!("bad number on {name} axis")))?;
            if v.len() != dims[k] {
                return Err(perr(n, format!("{name} axis has {} values, dims says {}", v.len(), dims[k])));
            }
            check_axis(name.chars().next().unwrap(), &v)?;
            axes.push(v);
        }
        let (n, rest) = keyed("data")?;
        if !rest.is_empty() {
            return Err(perr(n, "unexpected text after 'data'"));
        }
        // Grow with the data actually present rather than the declared size.
        let mut data = Vec::with_capacity(total.min(1 << 12));
        loop {
            let (n, l) = lines.next().ok_or_else(|| FieldError::MissingBlock("end".into()))?;
            if l == "end" {
                break;
            }
            let v: Vec<f64> = l
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| perr(n, "data row must be three comma-separated numbers"))?;
            if v.len() != 3 {
                return Err(perr(n, "data row must be three comma-separated numbers"));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(FieldError::NonFinite { line: n });
            }
            if data.len() == total {
                return Err(perr(n, format!("more than {total} data rows")));
            }
            data.push(V3::new(v[0], v[1], v[2]));
        }
        if data.len() != total {
            return Err(FieldError::MissingBlock(format!(
                "data rows ({} of {total} present)",
                data.len()
            )));
        }
        if let Some((n, _)) = lines.next() {
            return Err(perr(n, "content after 'end'"));
        }
        let zs = axes.pop().unwrap();
        let ys = axes.pop().unwrap();
        let xs = axes.pop().unwrap();
        Ok(Self { electrode, xs, ys, zs, data })
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        s.push_str(FIELD_MAP_MAGIC);
        s.push('\n');
        s.push_str(&format!("electrode {}\nunits {UNITS}\n", self.electrode));
        s.push_str(&format!("dims {} {} {}\n", self.xs.len(), self.ys.len(), self.zs.len()));
        s.push_str(&format!("x {}\ny {}\nz {}\ndata\n", join(&self.xs), join(&self.ys), join(&self.zs)));
        for v in &self.data {
            s.push_str(&format!("{:e},{:e},{:e}\n", v.x, v.y, v.z));
        }
        s.push_str("end\n");
        s
    }

    fn at(&self, i: usize, j: usize, k: usize) -> V3 {
        self.data[i + self.xs.len() * (j + self.ys.len() * k)]
    }

    /// Trilinear interpolation; points outside the grid are rejected.
    pub fn sample(&self, p: &V3) -> Result<V3, FieldError> {
        let ((i, tx), (j, ty), (k, tz)) = match (locate(&self.xs, p.x), locate(&self.ys, p.y), locate(&self.zs, p.z)) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(FieldError::out_of_domain(p)),
        };
        let lerp = |a: V3, b: V3, t: f64| a * (1.0 - t) + b * t;
        let c00 = lerp(self.at(i, j, k), self.at(i + 1, j, k), tx);
        let c10 = lerp(self.at(i, j + 1, k), self.at(i + 1, j + 1, k), tx);
        let c01 = lerp(self.at(i, j, k + 1), self.at(i + 1, j, k + 1), tx);
        let c11 = lerp(self.at(i, j + 1, k + 1), self.at(i + 1, j + 1, k + 1), tx);
        Ok(lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz))
    }

    pub fn max_magnitude(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Tabulate electrode `electrode` of `basis` on a rectilinear grid.
pub fn sample_to_map(
    basis: &FieldBasisSet,
    electrode: usize,
    xs: &[f64],
    ys: &[f64],
    zs: &[f64],
) -> Result<FieldMap, FieldError> {
    let mut data = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &z in zs {
        for &y in ys {
            for &x in xs {
                data.push(basis.response(electrode, &V3::new(x, y, z))?);
            }
        }
    }
    FieldMap::new(electrode, xs.to_vec(), ys.to_vec(), zs.to_vec(), data)
}
