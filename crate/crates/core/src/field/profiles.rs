//! Far-field localization of reference current and electrode structures.
//!
//! All profiles are field magnitudes normalized to 1 at `r = 500 nm`, for
//! structures whose characteristic size is 250 nm. Magnetic kinds use
//! Biot–Savart sums over straight segments (each integrated exactly);
//! electric kinds use the electrode surrogate.

use std::f64::consts::PI;
use std::str::FromStr;

use super::surrogate::SurrogateModel;
use super::{FieldError, V3};
use crate::device::DeviceGeometry;

pub const NORMALIZATION_RADIUS: f64 = 500e-9;
pub const STRUCTURE_SCALE: f64 = 250e-9;
pub const MIN_RADIUS: f64 = 50e-9;
/// Chords used for circular current paths.
const LOOP_SEGMENTS: usize = 1440;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    SingleLine,
    TwoLines,
    Loop,
    LoopWithFeeds,
    ElectrodePair,
    EfpsaArray,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 6] = [
        ProfileKind::SingleLine,
        ProfileKind::TwoLines,
        ProfileKind::Loop,
        ProfileKind::LoopWithFeeds,
        ProfileKind::ElectrodePair,
        ProfileKind::EfpsaArray,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::SingleLine => "single-line",
            ProfileKind::TwoLines => "two-lines",
            ProfileKind::Loop => "loop",
            ProfileKind::LoopWithFeeds => "loop-with-feeds",
            ProfileKind::ElectrodePair => "electrode-pair",
            ProfileKind::EfpsaArray => "efpsa-array",
        }
    }

    /// Multipole order of the far field.
    pub fn expected_slope(self) -> f64 {
        match self {
            ProfileKind::SingleLine => -1.0,
            ProfileKind::TwoLines | ProfileKind::LoopWithFeeds => -2.0,
            ProfileKind::Loop | ProfileKind::ElectrodePair | ProfileKind::EfpsaArray => -3.0,
        }
    }
}

impl FromStr for ProfileKind {
    type Err = FieldError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProfileKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| FieldError::InvalidArgument(format!("unsupported profile kind '{s}'")))
    }
}

/// Straight current element from `origin + s0·dir` to `origin + s1·dir`;
/// either bound may be infinite.
struct Segment {
    origin: V3,
    dir: V3,
    s0: f64,
    s1: f64,
}

impl Segment {
    fn between(a: V3, b: V3) -> Self {
        let d = b - a;
        Segment { origin: a, dir: d / d.norm(), s0: 0.0, s1: d.norm() }
    }

    /// Field per unit current in units of μ0/(4π).
    fn field(&self, p: &V3) -> V3 {
        let rel = p - self.origin;
        let t = self.dir.dot(&rel);
        let n = self.dir.cross(&rel);
        let d2 = n.norm_squared();
        if d2 == 0.0 {
            return V3::zeros();
        }
        let term = |x: f64| if x.is_infinite() { x.signum() } else { x / (x * x + d2).sqrt() };
        n * ((term(self.s1 - t) - term(self.s0 - t)) / d2)
    }
}

fn circle_path(radius: f64, theta0: f64, theta1: f64, segments: usize) -> Vec<Segment> {
    let pt = |th: f64| V3::new(radius * th.cos(), radius * th.sin(), 0.0);
    (0..segments)
        .map(|i| {
            let a = theta0 + (theta1 - theta0) * i as f64 / segments as f64;
            let b = theta0 + (theta1 - theta0) * (i + 1) as f64 / segments as f64;
            Segment::between(pt(a), pt(b))
        })
        .collect()
}

fn current_paths(kind: ProfileKind) -> Vec<Segment> {
    let r = STRUCTURE_SCALE;
    let x = V3::x();
    match kind {
        ProfileKind::SingleLine => vec![Segment {
            origin: V3::zeros(),
            dir: x,
            s0: f64::NEG_INFINITY,
            s1: f64::INFINITY,
        }],
        ProfileKind::TwoLines => [1.0, -1.0]
            .iter()
            .map(|&s| Segment {
                origin: V3::new(0.0, s * r / 2.0, 0.0),
                dir: x * s,
                s0: f64::NEG_INFINITY,
                s1: f64::INFINITY,
            })
            .collect(),
        ProfileKind::Loop => circle_path(r, 0.0, 2.0 * PI, LOOP_SEGMENTS),
        ProfileKind::LoopWithFeeds => {
            // Feeds separated by one structure scale, attached at ±30°.
            let half = (0.5f64).asin();
            let mut segs = circle_path(r, half, 2.0 * PI - half, LOOP_SEGMENTS);
            let top = V3::new(r * half.cos(), r * half.sin(), 0.0);
            let bottom = V3::new(top.x, -top.y, 0.0);
            segs.push(Segment { origin: top, dir: -x, s0: f64::NEG_INFINITY, s1: 0.0 });
            segs.push(Segment { origin: bottom, dir: x, s0: 0.0, s1: f64::INFINITY });
            segs
        }
        _ => unreachable!("electric kinds have no current path"),
    }
}

/// Evaluates a profile at many radii, building the structure once.
pub fn profile_curve(kind: ProfileKind, radii: &[f64]) -> Result<Vec<f64>, FieldError> {
    if let Some(&r) = radii.iter().find(|&&r| !(r >= MIN_RADIUS && r.is_finite())) {
        return Err(FieldError::InvalidArgument(format!(
            "radius {r:.3e} m is below the {MIN_RADIUS:.0e} m minimum"
        )));
    }
    let eval: Box<dyn Fn(f64) -> f64> = match kind {
        ProfileKind::SingleLine | ProfileKind::TwoLines | ProfileKind::Loop | ProfileKind::LoopWithFeeds => {
            let segs = current_paths(kind);
            Box::new(move |r| {
                let p = V3::new(0.0, 0.0, r);
                segs.iter().fold(V3::zeros(), |acc, s| acc + s.field(&p)).norm()
            })
        }
        ProfileKind::ElectrodePair | ProfileKind::EfpsaArray => {
            let n = if kind == ProfileKind::ElectrodePair { 1 } else { DeviceGeometry::default().n_sites };
            let geom = DeviceGeometry::with_sites(n);
            let model = SurrogateModel::new(&geom, 1.0)?;
            let k = n / 2;
            let centre = geom.nominal_position(k);
            let mut v = vec![0.0; 2 * n];
            v[2 * k] = 0.5;
            v[2 * k + 1] = -0.5;
            Box::new(move |r| {
                let p = centre + V3::new(r, 0.0, 0.0);
                model
                    .all_responses(&p)
                    .iter()
                    .zip(&v)
                    .fold(V3::zeros(), |acc, (e, &vj)| acc + e * vj)
                    .norm()
            })
        }
    };
    let norm = eval(NORMALIZATION_RADIUS);
    Ok(radii.iter().map(|&r| eval(r) / norm).collect())
}

/// Normalized field magnitude of `kind` at distance `r` (m).
pub fn appendix_c_profile(kind: ProfileKind, r: f64) -> Result<f64, FieldError> {
    Ok(profile_curve(kind, &[r])?[0])
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `n` log-spaced radii over `[lo, hi]`.
pub fn log_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}
