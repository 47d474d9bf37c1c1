//! Two-user power-domain NOMA downlink with imperfect CSI.
//!
//! The satellite superposes `√(αP)·x_n + √((1−α)P)·x_f`. The far user decodes
//! its own message treating the near user's as interference; the near user
//! first decodes and cancels the far message (SIC). Channel-estimation error
//! inflates every noise term from `σ²` to `σ²(1 + 1/L)`.

use crate::channel::UserLink;
use crate::error::{Error, Result};

/// Power split and receiver settings shared by both users of a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Share of the transmit power given to the near user.
    pub alpha: f64,
    /// Transmit power, linear.
    pub p_s: f64,
    pub noise_var: f64,
    pub pilots: u32,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.p_s >= 0.0 && self.p_s.is_finite()) {
            return Err(Error::domain(format!(
                "transmit power must be nonnegative, got {}",
                self.p_s
            )));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::domain("noise variance must be positive"));
        }
        if self.pilots == 0 {
            return Err(Error::domain("pilot count L must be at least 1"));
        }
        Ok(())
    }

    /// Noise plus estimation-error power `σ²/L + σ²`.
    pub fn effective_noise(&self) -> f64 {
        self.noise_var / f64::from(self.pilots) + self.noise_var
    }
}

/// Superposition pair; `near` receives the `α` share and performs SIC.
#[derive(Debug, Clone, PartialEq)]
pub struct NomaPair {
    pub near: UserLink,
    pub far: UserLink,
    pub budget: LinkBudget,
}

impl NomaPair {
    pub fn new(near: UserLink, far: UserLink, budget: LinkBudget) -> Result<Self> {
        budget.validate()?;
        if near.id == far.id {
            return Err(Error::domain(format!(
                "user {} cannot be paired with itself",
                near.id
            )));
        }
        Ok(Self { near, far, budget })
    }

    pub fn sinr_far(&self) -> f64 {
        interference_limited_sinr(&self.budget, self.far.gain_true())
    }

    pub fn sinr_near_decode_far(&self) -> f64 {
        interference_limited_sinr(&self.budget, self.near.gain_true())
    }

    pub fn sinr_near(&self) -> f64 {
        sic_sinr(&self.budget, self.near.gain_true())
    }

    pub fn noma_rates(&self, order: DecodingOrder) -> RateReport {
        let (near_gain, far_gain) = match order {
            DecodingOrder::Correct => (self.near.gain_true(), self.far.gain_true()),
            DecodingOrder::Disrupted => (self.far.gain_true(), self.near.gain_true()),
        };
        noma_rates_from_gains(&self.budget, near_gain, far_gain)
    }

    pub fn tdma_rates(&self) -> RateReport {
        tdma_rates_from_gains(&self.budget, self.near.gain_true(), self.far.gain_true())
    }
}

/// Which user performs SIC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodingOrder {
    /// The user labelled near receives the α share and decodes the far message first.
    Correct,
    /// Roles swapped: the far user receives the α share and attempts SIC.
    Disrupted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub rate_near: f64,
    pub rate_far: f64,
    pub sum_rate: f64,
    /// Whether the SIC user can decode the far message at least as well as its
    /// intended receiver.
    pub sic_ok: bool,
}

impl RateReport {
    fn new(rate_near: f64, rate_far: f64, sic_ok: bool) -> Self {
        Self {
            rate_near,
            rate_far,
            sum_rate: rate_near + rate_far,
            sic_ok,
        }
    }
}

/// SINR of the far message at a receiver with gain `gain`:
/// `(1−α)P g / (αP g + σ²/L + σ²)`.
///
/// Evaluated as `((1−α)/α) · x/(x + n)` with `x = αP g`, so rounding can never
/// push it past the ceiling `(1−α)/α`.
pub fn interference_limited_sinr(budget: &LinkBudget, gain: f64) -> f64 {
    let x = budget.alpha * budget.p_s * gain;
    if x == 0.0 {
        return 0.0;
    }
    interference_ceiling(budget.alpha) * (x / (x + budget.effective_noise()))
}

/// Limit `(1−α)/α` of the far-message SINR as power grows.
pub fn interference_ceiling(alpha: f64) -> f64 {
    (1.0 - alpha) / alpha
}

/// SINR of the near message after SIC: `αP g / (σ²/L + σ²)`.
pub fn sic_sinr(budget: &LinkBudget, gain: f64) -> f64 {
    budget.alpha * budget.p_s * gain / budget.effective_noise()
}

/// NOMA rates when the SIC role sits with the `near_gain` receiver.
pub fn noma_rates_from_gains(budget: &LinkBudget, near_gain: f64, far_gain: f64) -> RateReport {
    let gamma_f = interference_limited_sinr(budget, far_gain);
    let gamma_nf = interference_limited_sinr(budget, near_gain);
    let gamma_n = sic_sinr(budget, near_gain);
    RateReport::new(
        (1.0 + gamma_n).log2(),
        (1.0 + gamma_f.min(gamma_nf)).log2(),
        gamma_nf >= gamma_f,
    )
}

/// Equal time split, full power per slot.
pub fn tdma_rates_from_gains(budget: &LinkBudget, near_gain: f64, far_gain: f64) -> RateReport {
    let noise = budget.effective_noise();
    let rate = |g: f64| 0.5 * (1.0 + budget.p_s * g / noise).log2();
    RateReport::new(rate(near_gain), rate(far_gain), true)
}
