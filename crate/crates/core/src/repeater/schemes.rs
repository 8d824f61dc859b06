//! Superradiant time-gated heralding and the heralding-scheme comparison.

use serde::Serialize;

use super::RepeaterError;

/// Fidelity of a herald recorded at time `t` after excitation:
/// `F = e^{Γt}/(2 + e^{Γt})`.
pub fn superradiance_fidelity(t: f64, gamma_sp: f64) -> f64 {
    // 1/(1 + 2e^{−Γt}) avoids overflow at large Γt.
    1.0 / (1.0 + 2.0 * (-gamma_sp * t).exp())
}

/// Single-photon detection density `Γe^{−Γt}`.
pub fn herald_density(t: f64, gamma_sp: f64) -> f64 {
    gamma_sp * (-gamma_sp * t).exp()
}

/// Earliest gate time `t₀` reaching fidelity `f`: `ln(2F/(1−F))/Γ`.
pub fn superradiance_time(f: f64, gamma_sp: f64) -> Result<f64, RepeaterError> {
    check_target(f)?;
    Ok((2.0 * f / (1.0 - f)).ln() / gamma_sp)
}

/// Probability of a herald beyond the gate giving fidelity `f`: `(1−F)/(2F)`,
/// which equals `∫_{t₀}^∞ Γe^{−Γs} ds = e^{−Γt₀}`.
pub fn tradeoff(f: f64) -> f64 {
    (1.0 - f) / (2.0 * f)
}

fn check_target(f: f64) -> Result<(), RepeaterError> {
    if f > 1.0 / 3.0 && f < 1.0 {
        Ok(())
    } else {
        Err(RepeaterError::Unreachable(f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    BarrettKok,
    SinglePhoton,
    Superradiance,
    BarrettKokSuperradiance,
}

impl Scheme {
    pub const ALL: [Scheme; 4] =
        [Scheme::BarrettKok, Scheme::SinglePhoton, Scheme::Superradiance, Scheme::BarrettKokSuperradiance];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::BarrettKok => "barrett-kok",
            Scheme::SinglePhoton => "single-photon",
            Scheme::Superradiance => "superradiance",
            Scheme::BarrettKokSuperradiance => "bk+superradiance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeRates {
    pub p_det: f64,
    pub barrett_kok: f64,
    pub single_photon: f64,
    pub superradiance: f64,
    /// Full BK rounds plus first-round heralds past `t₀`, which skip round two.
    pub combined: f64,
}

impl SchemeRates {
    pub fn get(&self, s: Scheme) -> f64 {
        match s {
            Scheme::BarrettKok => self.barrett_kok,
            Scheme::SinglePhoton => self.single_photon,
            Scheme::Superradiance => self.superradiance,
            Scheme::BarrettKokSuperradiance => self.combined,
        }
    }

    /// Best scheme; ties resolve to the earlier entry of [`Scheme::ALL`].
    pub fn best(&self) -> Scheme {
        let mut best = Scheme::BarrettKok;
        for s in Scheme::ALL {
            if self.get(s) > self.get(best) {
                best = s;
            }
        }
        best
    }
}

/// Success probability per attempt at target fidelity `f` for each scheme.
pub fn scheme_rates(f: f64, p_det: f64) -> Result<SchemeRates, RepeaterError> {
    check_target(f)?;
    if !(0.0..=1.0).contains(&p_det) {
        return Err(RepeaterError::Invalid(format!("p_det must lie in [0, 1] (got {p_det})")));
    }
    let bk = p_det * p_det / 2.0;
    let late = tradeoff(f) * p_det;
    Ok(SchemeRates {
        p_det,
        barrett_kok: bk,
        single_photon: 2.0 * (1.0 - f) * p_det,
        superradiance: late,
        combined: bk + late,
    })
}

/// Smallest `p_det` above which the combined scheme is strictly best,
/// found by bisection on `ln p_det`. `None` if it never wins on `(0, 1]`.
pub fn scheme_crossover(f: f64) -> Result<Option<f64>, RepeaterError> {
    let wins = |p: f64| scheme_rates(f, p).map(|r| r.best() == Scheme::BarrettKokSuperradiance);
    let (mut lo, mut hi) = (1e-12f64, 1.0f64);
    if !wins(hi)? {
        return Ok(None);
    }
    if wins(lo)? {
        return Ok(Some(lo));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if wins(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok(Some(hi))
}
