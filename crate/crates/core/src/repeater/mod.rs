//! Entanglement-rate models for a three-node link (A – central array – B)
//! with time–frequency multiplexing.
//!
//! Rates follow a pair-channel renewal model. The central node runs
//! `P = min(N, capacity)/2` independent pair channels; each one needs an
//! A-side and a B-side heralded link (Bernoulli `p₁` per `t_link` round),
//! then local Barrett–Kok (`p₂` per attempt) and the nuclear swap. One cycle
//! yields one ebit, so `Γ = P / E[T_cycle]` with
//! `E[T] = t_link·E[max(G_A, G_B)] + t_bk/p₂ + t_swap`.

mod montecarlo;
mod schemes;

pub use montecarlo::{monte_carlo_protocol, McEstimate};
pub use schemes::{
    herald_density, scheme_crossover, scheme_rates, superradiance_fidelity, superradiance_time,
    tradeoff, Scheme, SchemeRates,
};

use serde::Serialize;
use thiserror::Error;

use crate::device::SPEED_OF_LIGHT;
use crate::photonic::OpticalInterface;

#[derive(Debug, Error)]
pub enum RepeaterError {
    #[error("invalid link parameter: {0}")]
    Invalid(String),
    #[error("target fidelity {0} is unreachable (must lie in (1/3, 1))")]
    Unreachable(f64),
    #[error("Monte Carlo needs at least {min} trials (got {got})")]
    TooFewTrials { min: usize, got: usize },
}

/// Time and fidelity of the electron–nuclear swap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapCost {
    pub time: f64,
    pub fidelity: f64,
}

impl Default for SwapCost {
    fn default() -> Self {
        Self { time: 0.0, fidelity: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkParams {
    /// Link length (km).
    pub length_km: f64,
    /// Fiber attenuation (km⁻¹).
    pub gamma_fiber: f64,
    pub p_d: f64,
    pub p_c: f64,
    pub alpha: f64,
    /// Photon lifetime (s); sets the time-bin width.
    pub t_ph: f64,
    pub n_freq: usize,
    pub mzi_eff: f64,
    /// Heralding signal velocity (m/s).
    pub signal_velocity: f64,
    /// Duration of one local Barrett–Kok attempt (s); two optical rounds.
    pub bk_attempt_time: f64,
    pub swap: SwapCost,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            length_km: 1.0,
            gamma_fiber: 0.041,
            p_d: 0.83,
            p_c: 0.33,
            alpha: 0.01,
            t_ph: 10e-9,
            n_freq: 10,
            mzi_eff: 0.92,
            signal_velocity: SPEED_OF_LIGHT,
            bk_attempt_time: 20e-9,
            swap: SwapCost::default(),
        }
    }
}

fn in_unit(x: f64) -> bool {
    x > 0.0 && x <= 1.0
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), RepeaterError> {
        let bad = |m: String| Err(RepeaterError::Invalid(m));
        if !(self.length_km > 0.0 && self.length_km.is_finite()) {
            return bad(format!("L must be > 0 (got {})", self.length_km));
        }
        if !(self.gamma_fiber >= 0.0 && self.gamma_fiber.is_finite()) {
            return bad(format!("gamma_fiber must be >= 0 (got {})", self.gamma_fiber));
        }
        for (name, v) in [("p_d", self.p_d), ("p_c", self.p_c), ("mzi_eff", self.mzi_eff)] {
            if !in_unit(v) {
                return bad(format!("{name} must lie in (0, 1] (got {v})"));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1] (got {})", self.alpha));
        }
        if !in_unit(self.swap.fidelity) {
            return bad(format!("swap fidelity must lie in (0, 1] (got {})", self.swap.fidelity));
        }
        for (name, v) in [("t_ph", self.t_ph), ("signal_velocity", self.signal_velocity)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be > 0 (got {v})"));
            }
        }
        for (name, v) in [("bk_attempt_time", self.bk_attempt_time), ("swap time", self.swap.time)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be >= 0 (got {v})"));
            }
        }
        if self.n_freq == 0 {
            return bad("n_freq must be >= 1".into());
        }
        Ok(())
    }

    /// Heralding time `L / v` (s).
    pub fn t_link(&self) -> f64 {
        self.length_km * 1e3 / self.signal_velocity
    }

    pub fn fiber_transmission(&self) -> f64 {
        (-self.gamma_fiber * self.length_km).exp()
    }
}

/// `p₁ = 2α·e^{−γL}·p_d·p_c·η_wg`.
pub fn link_success_p1(lp: &LinkParams, eta_wg: f64) -> f64 {
    2.0 * lp.alpha * lp.fiber_transmission() * lp.p_d * lp.p_c * eta_wg
}

/// `p₂ = (p_d·η_wg)²/2`.
pub fn local_bk_p2(lp: &LinkParams, eta_wg: f64) -> f64 {
    (lp.p_d * eta_wg).powi(2) / 2.0
}

/// Time–frequency bins per heralding window: `n_freq·⌊t_link/t_ph⌋`, at least `n_freq`.
pub fn channel_capacity(lp: &LinkParams) -> usize {
    let bins = (lp.t_link() / lp.t_ph).floor().max(1.0) as usize;
    lp.n_freq * bins
}

/// Expected number of rounds until two independent `Geom(p)` processes have both succeeded.
pub fn expected_max_geometric(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::INFINITY;
    }
    2.0 / p - 1.0 / (2.0 * p - p * p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Efpsa,
    Mzi,
    Hybrid { n_dev: usize },
}

impl Architecture {
    /// `(periods per device, MZI layers)` for `n` qubits.
    fn optics_split(self, n: usize) -> (f64, u32) {
        let layers = |d: usize| if d <= 1 { 0 } else { usize::BITS - (d - 1).leading_zeros() };
        match self {
            Architecture::Efpsa => (n as f64, 0),
            Architecture::Mzi => (1.0, layers(n)),
            Architecture::Hybrid { n_dev } => (n.div_ceil(n_dev.max(1)) as f64, layers(n_dev)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Limit {
    Loss,
    Capacity,
}

/// Steps of one pair-channel cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProtocolStep {
    /// (1) Heralded spin–photon links to A and to B, one attempt per `t_link`.
    DistantLink,
    /// (2.i) Local Barrett–Kok between the two electron spins.
    LocalEntangle,
    /// (2.ii) Electron–nuclear Bell measurement and feed-forward.
    Swap,
}

/// One operating point of the link: everything the closed form and the
/// Renewal model of one node: shared by the closed form and the Monte Carlo engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairModel {
    /// Parallel pair channels (may be half-integral).
    pub pairs: f64,
    pub p1: f64,
    pub p2: f64,
    pub t_link: f64,
    pub t_bk: f64,
    pub t_swap: f64,
    pub limit: Limit,
    /// Fidelity of delivered pairs relative to the swap input.
    pub fidelity: f64,
}

impl PairModel {
    pub fn new(arch: Architecture, n: usize, lp: &LinkParams, optics: &OpticalInterface) -> Self {
        Self::with_clamp(arch, n, lp, optics, true)
    }

    /// `clamp = false` drops the capacity limit (used for scaling fits).
    pub fn with_clamp(arch: Architecture, n: usize, lp: &LinkParams, optics: &OpticalInterface, clamp: bool) -> Self {
        let cap = channel_capacity(lp);
        let (periods, layers) = arch.optics_split(n);
        let eta = optics.eta_for(periods) * lp.mzi_eff.powi(layers as i32);
        let limit = if clamp && n > cap { Limit::Capacity } else { Limit::Loss };
        let used = if limit == Limit::Capacity { cap } else { n };
        Self {
            pairs: used as f64 / 2.0,
            p1: link_success_p1(lp, eta),
            p2: local_bk_p2(lp, eta),
            t_link: lp.t_link(),
            t_bk: lp.bk_attempt_time,
            t_swap: lp.swap.time,
            limit,
            fidelity: lp.swap.fidelity,
        }
    }

    /// Mean time spent in each protocol step per cycle.
    pub fn mean_step_times(&self) -> [(ProtocolStep, f64); 3] {
        let bk = if self.t_bk == 0.0 { 0.0 } else { self.t_bk / self.p2 };
        [
            (ProtocolStep::DistantLink, self.t_link * expected_max_geometric(self.p1)),
            (ProtocolStep::LocalEntangle, bk),
            (ProtocolStep::Swap, self.t_swap),
        ]
    }

    pub fn mean_cycle_time(&self) -> f64 {
        self.mean_step_times().iter().map(|s| s.1).sum()
    }

    /// Closed-form rate (ebits/s).
    pub fn rate(&self) -> f64 {
        if self.pairs == 0.0 || self.p1 == 0.0 || self.p2 == 0.0 {
            return 0.0;
        }
        self.pairs / self.mean_cycle_time()
    }
}

pub fn rate_efpsa(n: usize, lp: &LinkParams, optics: &OpticalInterface) -> f64 {
    PairModel::new(Architecture::Efpsa, n, lp, optics).rate()
}

pub fn rate_mzi(n: usize, lp: &LinkParams, optics: &OpticalInterface) -> f64 {
    PairModel::new(Architecture::Mzi, n, lp, optics).rate()
}

pub fn rate_hybrid(n: usize, n_dev: usize, lp: &LinkParams, optics: &OpticalInterface) -> Result<f64, RepeaterError> {
    if n_dev == 0 || n_dev > n.max(1) {
        return Err(RepeaterError::Invalid(format!("N_dev must lie in [1, {n}] (got {n_dev})")));
    }
    Ok(PairModel::new(Architecture::Hybrid { n_dev }, n, lp, optics).rate())
}

/// Best hybrid split for `n` qubits by exhaustive scan of `N_dev ∈ [1, n]`.
/// Ties go to the smallest `N_dev`.
pub fn optimize_hybrid(n: usize, lp: &LinkParams, optics: &OpticalInterface) -> (usize, f64) {
    let mut best = (1, rate_efpsa(n, lp, optics));
    let mut seen = (f64::NAN, u32::MAX);
    for n_dev in 2..=n {
        let arch = Architecture::Hybrid { n_dev };
        let split = arch.optics_split(n);
        if split.0 == seen.0 && split.1 == seen.1 {
            continue;
        }
        seen = split;
        let r = PairModel::new(arch, n, lp, optics).rate();
        if r > best.1 {
            best = (n_dev, r);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub rate: f64,
    pub limit: Limit,
    /// Chosen `N_dev` for hybrid envelopes.
    pub n_dev: Option<usize>,
}

pub type RateCurve = Vec<RatePoint>;

pub fn rate_curve(arch: Architecture, ns: &[usize], lp: &LinkParams, optics: &OpticalInterface) -> RateCurve {
    ns.iter()
        .map(|&n| {
            let m = PairModel::new(arch, n, lp, optics);
            RatePoint { n, rate: m.rate(), limit: m.limit, n_dev: None }
        })
        .collect()
}

/// Optimal hybrid envelope.
pub fn hybrid_envelope(ns: &[usize], lp: &LinkParams, optics: &OpticalInterface) -> RateCurve {
    let cap = channel_capacity(lp);
    ns.iter()
        .map(|&n| {
            let (d, rate) = optimize_hybrid(n, lp, optics);
            let limit = if n > cap { Limit::Capacity } else { Limit::Loss };
            RatePoint { n, rate, limit, n_dev: Some(d) }
        })
        .collect()
}

/// Log–log regression exponent of the unclamped MZI rate over `ns`.
pub fn mzi_scaling_exponent(ns: &[usize], lp: &LinkParams, optics: &OpticalInterface) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = ns
        .iter()
        .map(|&n| PairModel::with_clamp(Architecture::Mzi, n, lp, optics, false).rate())
        .collect();
    crate::field::fit_loglog_slope(&xs, &ys)
}
