//! Satellite-to-user channel generation.
//!
//! Each link follows the Shadowed-Rician model: a Nakagami-m line-of-sight
//! amplitude with uniform phase plus circularly-symmetric Gaussian scatter.
//! The model parameters `(b, m, Ω)` are cubic polynomials in the elevation
//! angle, valid for 20° ≤ θ ≤ 80°. Receivers see the channel through a
//! pilot-based estimate `ĥ = h + e` with `e ~ CN(0, σ²/L)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const MIN_ELEVATION_DEG: f64 = 20.0;
pub const MAX_ELEVATION_DEG: f64 = 80.0;

// Cubic coefficients, highest power first.
const B_COEFFS: [f64; 4] = [-4.7943e-8, 5.5784e-6, -2.1344e-4, 3.271e-2];
const M_COEFFS: [f64; 4] = [6.3739e-5, 5.8533e-4, -1.5973e-1, 3.5156];
const OMEGA_COEFFS: [f64; 4] = [1.4428e-5, -2.3798e-3, 1.2702e-1, -1.4864];

/// Shadowed-Rician parameter triple for one elevation angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrParams {
    b: f64,
    m: f64,
    omega: f64,
}

impl SrParams {
    /// Half the average scatter power.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Nakagami fading parameter of the LOS component.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// Average LOS power.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `E[|h|²] = Ω + 2b`.
    pub fn mean_power(&self) -> f64 {
        self.omega + 2.0 * self.b
    }
}

fn horner(coeffs: &[f64; 4], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, c| acc * x + c)
}

/// Evaluates the elevation polynomials.
pub fn sr_params(theta_deg: f64) -> Result<SrParams> {
    if !(MIN_ELEVATION_DEG..=MAX_ELEVATION_DEG).contains(&theta_deg) {
        return Err(Error::domain(format!(
            "elevation {theta_deg}° outside the valid range \
             {MIN_ELEVATION_DEG}° <= theta <= {MAX_ELEVATION_DEG}°"
        )));
    }
    Ok(SrParams {
        b: horner(&B_COEFFS, theta_deg),
        m: horner(&M_COEFFS, theta_deg),
        omega: horner(&OMEGA_COEFFS, theta_deg),
    })
}

/// Circularly-symmetric complex Gaussian with total variance `var`.
fn complex_gaussian<R: Rng + ?Sized>(var: f64, rng: &mut R) -> Complex64 {
    let per_dim = (var / 2.0).sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    Complex64::new(per_dim * normal.sample(rng), per_dim * normal.sample(rng))
}

/// Draws one complex Shadowed-Rician coefficient.
pub fn sample_channel<R: Rng + ?Sized>(params: &SrParams, rng: &mut R) -> Complex64 {
    let los_amplitude = if params.omega > 0.0 {
        // Nakagami(m, Ω) amplitude is sqrt of Gamma(m, Ω/m).
        let gamma = Gamma::new(params.m, params.omega / params.m).expect("valid gamma");
        gamma.sample(rng).sqrt()
    } else {
        0.0
    };
    let phase: f64 = rng.random::<f64>() * TAU;
    let scatter = if params.b > 0.0 {
        complex_gaussian(2.0 * params.b, rng)
    } else {
        Complex64::new(0.0, 0.0)
    };
    Complex64::from_polar(los_amplitude, phase) + scatter
}

/// Pilot-based estimate of `h` with error variance `noise_var / pilots`.
pub fn estimate_channel<R: Rng + ?Sized>(
    h: Complex64,
    noise_var: f64,
    pilots: u32,
    rng: &mut R,
) -> Result<Complex64> {
    if pilots == 0 {
        return Err(Error::domain("pilot count L must be at least 1"));
    }
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::domain(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    Ok(h + complex_gaussian(noise_var / f64::from(pilots), rng))
}

/// Poisson user count for intensity `lambda_density` over `area`.
///
/// A zero mean measure gives the empty process.
pub fn sample_user_count<R: Rng + ?Sized>(
    lambda_density: f64,
    area: f64,
    rng: &mut R,
) -> Result<u64> {
    let mean = lambda_density * area;
    if !mean.is_finite() || mean < 0.0 || lambda_density < 0.0 || area < 0.0 {
        return Err(Error::domain(format!(
            "PPP intensity must be nonnegative and finite, got lambda*A = {mean}"
        )));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let poisson = Poisson::new(mean).map_err(|e| Error::domain(e.to_string()))?;
    Ok(poisson.sample(rng) as u64)
}

/// Class label of a user: far users are `-1`, near users `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Far,
    Near,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Far => -1.0,
            Label::Near => 1.0,
        }
    }

    pub fn from_sign(value: f64) -> Self {
        if value >= 0.0 {
            Label::Near
        } else {
            Label::Far
        }
    }
}

/// One user's geometry and channel state.
#[derive(Debug, Clone, PartialEq)]
pub struct UserLink {
    pub id: usize,
    pub theta_deg: f64,
    /// Ground position in km relative to the beam centre.
    pub position: [f64; 2],
    pub h_true: Complex64,
    pub h_est: Complex64,
    pub label: Option<Label>,
}

impl UserLink {
    /// `|h|²`.
    pub fn gain_true(&self) -> f64 {
        self.h_true.norm_sqr()
    }

    /// `|ĥ|²`.
    pub fn gain_est(&self) -> f64 {
        self.h_est.norm_sqr()
    }
}

/// Geometry and estimation settings for a user cohort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deployment {
    pub beam_radius_km: f64,
    pub theta_range_deg: [f64; 2],
    pub noise_var: f64,
    pub pilots: u32,
}

impl Default for Deployment {
    fn default() -> Self {
        Self {
            beam_radius_km: 100.0,
            theta_range_deg: [MIN_ELEVATION_DEG, MAX_ELEVATION_DEG],
            noise_var: 1.0,
            pilots: 7,
        }
    }
}

impl Deployment {
    pub fn validate(&self) -> Result<()> {
        if !(self.beam_radius_km > 0.0 && self.beam_radius_km.is_finite()) {
            return Err(Error::domain("beam radius must be positive"));
        }
        let [lo, hi] = self.theta_range_deg;
        if !(MIN_ELEVATION_DEG..=MAX_ELEVATION_DEG).contains(&lo)
            || !(MIN_ELEVATION_DEG..=MAX_ELEVATION_DEG).contains(&hi)
            || lo > hi
        {
            return Err(Error::domain(format!(
                "elevation range [{lo}, {hi}] must lie within \
                 [{MIN_ELEVATION_DEG}, {MAX_ELEVATION_DEG}]"
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
}

const GEOMETRY_STREAM: u64 = 0;
const FADING_STREAM: u64 = 1;
const ESTIMATION_STREAM: u64 = 2;

/// Places `count` users uniformly over the beam disc and draws their channels.
///
/// Geometry, fading and estimation noise come from separate sub-streams of
/// `stream`, so changing one source never shifts the others.
pub fn place_users(
    count: usize,
    deployment: &Deployment,
    stream: &RngStream,
) -> Result<Vec<UserLink>> {
    deployment.validate()?;
    let mut geometry = stream.derive(GEOMETRY_STREAM).generator();
    let mut fading = stream.derive(FADING_STREAM).generator();
    let mut estimation = stream.derive(ESTIMATION_STREAM).generator();
    let [lo, hi] = deployment.theta_range_deg;

    let mut users = Vec::with_capacity(count);
    for id in 0..count {
        // Area-uniform: radius scales with the square root of a uniform draw.
        let r = deployment.beam_radius_km * geometry.random::<f64>().sqrt();
        let phi = geometry.random::<f64>() * TAU;
        let theta_deg = lo + (hi - lo) * geometry.random::<f64>();

        let params = sr_params(theta_deg)?;
        let h_true = sample_channel(&params, &mut fading);
        let h_est = estimate_channel(
            h_true,
            deployment.noise_var,
            deployment.pilots,
            &mut estimation,
        )?;
        users.push(UserLink {
            id,
            theta_deg,
            position: [r * phi.cos(), r * phi.sin()],
            h_true,
            h_est,
            label: None,
        });
    }
    Ok(users)
}
