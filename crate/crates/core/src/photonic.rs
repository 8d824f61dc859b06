//! Emitter–waveguide optical interface: Purcell-enhanced β, propagation loss
//! and the Purcell spectrum near the slow-light band edge.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhotonicError {
    #[error("detuning {0:.4e} Hz is outside the Purcell table")]
    OutOfDomain(f64),
    #[error("Purcell table line {line}: {msg}")]
    Table { line: usize, msg: String },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// `β = F·DW / (F·DW + 1 − DW)`.
pub fn beta_efficiency(purcell: f64, debye_waller: f64) -> f64 {
    if purcell.is_infinite() {
        return 1.0;
    }
    let enhanced = purcell * debye_waller;
    enhanced / (enhanced + (1.0 - debye_waller))
}

/// Conversion of the per-period transmission loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossUnits {
    /// `t_wg` in dB per period: factor `10^(−t·N/10)`.
    #[default]
    Decibel,
    /// `t_wg` in nepers per period: factor `exp(−t·N)`.
    Neper,
}

/// `η = β·loss(t_wg, N)`.
pub fn collection_efficiency(beta: f64, t_wg: f64, n_periods: f64, units: LossUnits) -> f64 {
    let x = t_wg * n_periods;
    match units {
        LossUnits::Decibel => beta * 10f64.powf(-x / 10.0),
        LossUnits::Neper => beta * (-x).exp(),
    }
}

/// Where the emitter sits along the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmitterPosition {
    /// Photons cross the whole device.
    #[default]
    FullLength,
    /// Photons cross half of it.
    Midpoint,
}

impl EmitterPosition {
    pub fn periods(self, n_periods: f64) -> f64 {
        match self {
            EmitterPosition::FullLength => n_periods,
            EmitterPosition::Midpoint => n_periods / 2.0,
        }
    }
}

/// Purcell factor against detuning from the band edge (positive into the
/// slow-light band, negative into the gap).
#[derive(Debug, Clone, PartialEq)]
pub enum PurcellProfile {
    /// Flat at `f_max` for `0 ≤ d ≤ saturation`, `f_max·√(saturation/d)`
    /// beyond, and `f_max·exp(d/gap_decay)` inside the gap.
    BandEdge { f_max: f64, saturation: f64, gap_decay: f64 },
    /// Linear interpolation of `(detuning, F_P)` samples.
    Tabulated(Vec<(f64, f64)>),
}

impl Default for PurcellProfile {
    /// Peak 25 at the edge and `F_P ≥ 10` over the first 200 GHz.
    fn default() -> Self {
        PurcellProfile::BandEdge { f_max: 25.0, saturation: 32e9, gap_decay: 10e9 }
    }
}

impl PurcellProfile {
    /// Parse a two-column CSV `detuning_Hz,F_P`; an optional header row is skipped.
    pub fn from_csv(text: &str) -> Result<Self, PhotonicError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| PhotonicError::Table { line: i + 1, msg: e.to_string() })?;
            let line = rec.position().map_or(i + 1, |p| p.line() as usize);
            if rec.len() != 2 {
                return Err(PhotonicError::Table { line, msg: format!("expected 2 columns, found {}", rec.len()) });
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            let (d, f) = match parsed {
                (Ok(d), Ok(f)) => (d, f),
                _ if rows.is_empty() && i == 0 => continue,
                _ => return Err(PhotonicError::Table { line, msg: "non-numeric entry".into() }),
            };
            if !(d.is_finite() && f.is_finite() && f >= 0.0) {
                return Err(PhotonicError::Table { line, msg: "entries must be finite with F_P >= 0".into() });
            }
            if let Some(&(prev, _)) = rows.last() {
                if !(d > prev) {
                    return Err(PhotonicError::Table { line, msg: "detuning must be strictly increasing".into() });
                }
            }
            rows.push((d, f));
        }
        if rows.len() < 2 {
            return Err(PhotonicError::Table { line: 0, msg: "need at least two rows".into() });
        }
        Ok(PurcellProfile::Tabulated(rows))
    }

    pub fn purcell_at(&self, detuning: f64) -> Result<f64, PhotonicError> {
        if !detuning.is_finite() {
            return Err(PhotonicError::OutOfDomain(detuning));
        }
        match self {
            PurcellProfile::BandEdge { f_max, saturation, gap_decay } => Ok(if detuning < 0.0 {
                f_max * (detuning / gap_decay).exp()
            } else if detuning <= *saturation {
                *f_max
            } else {
                f_max * (saturation / detuning).sqrt()
            }),
            PurcellProfile::Tabulated(rows) => {
                let (lo, hi) = (rows[0].0, rows[rows.len() - 1].0);
                if detuning < lo || detuning > hi {
                    return Err(PhotonicError::OutOfDomain(detuning));
                }
                let i = rows.partition_point(|r| r.0 <= detuning).clamp(1, rows.len() - 1) - 1;
                let ((x0, y0), (x1, y1)) = (rows[i], rows[i + 1]);
                if detuning == x1 {
                    return Ok(y1);
                }
                let span = x1 - x0;
                let t = if span.is_finite() {
                    (detuning - x0) / span
                } else {
                    (0.5 * detuning - 0.5 * x0) / (0.5 * x1 - 0.5 * x0)
                };
                Ok((y0 + (y1 - y0) * t.clamp(0.0, 1.0)).clamp(y0.min(y1), y0.max(y1)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticalInterface {
    pub purcell: f64,
    pub debye_waller: f64,
    /// Per-period transmission loss.
    pub t_wg: f64,
    pub n_periods: f64,
    pub units: LossUnits,
    pub position: EmitterPosition,
    pub profile: PurcellProfile,
}

impl Default for OpticalInterface {
    fn default() -> Self {
        Self {
            purcell: 10.0,
            debye_waller: 0.03,
            t_wg: 4e-3,
            n_periods: 100.0,
            units: LossUnits::Decibel,
            position: EmitterPosition::FullLength,
            profile: PurcellProfile::default(),
        }
    }
}

impl OpticalInterface {
    pub fn validate(&self) -> Result<(), PhotonicError> {
        if !(self.purcell >= 0.0) {
            return Err(PhotonicError::Invalid(format!("F_P must be >= 0 (got {})", self.purcell)));
        }
        if !(self.debye_waller > 0.0 && self.debye_waller < 1.0) {
            return Err(PhotonicError::Invalid(format!("DW must lie in (0, 1) (got {})", self.debye_waller)));
        }
        if !(self.t_wg >= 0.0) || !(self.n_periods >= 0.0) {
            return Err(PhotonicError::Invalid("loss and period count must be >= 0".into()));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        beta_efficiency(self.purcell, self.debye_waller)
    }

    pub fn eta(&self) -> f64 {
        self.eta_for(self.n_periods)
    }

    /// Collection efficiency of a device `n_periods` long.
    pub fn eta_for(&self, n_periods: f64) -> f64 {
        collection_efficiency(self.beta(), self.t_wg, self.position.periods(n_periods), self.units)
    }
}
