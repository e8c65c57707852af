//! Exact spherical-patch traveling waves and their instability certificates.
//!
//! A unit-mass uniform ball of radius `R` translates rigidly with velocity
//! `c / (ω₁ R)` where `c = −(4/15) e₃` and `ω₁ = |B(0, 1)|`. Comparing two
//! radii gives closed-form lower bounds on the L¹ and Wasserstein-1 distances
//! that grow in time although the initial data are arbitrarily close.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernels::Vec3;
use crate::quadrature::simpson_1d;

/// Volume of the unit ball.
pub const OMEGA_1: f64 = 4.0 * PI / 3.0;

/// Vertical component of the unit-patch wave speed.
pub const C3: f64 = -4.0 / 15.0;

/// Unit-patch wave velocity `c`.
pub fn wave_speed() -> Vec3 {
    Vec3::new(0.0, 0.0, C3)
}

/// First absolute moment `∫|x| ρ_{1,0}` of the uniform unit ball.
pub const MEAN_RADIUS: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchWave {
    radius: f64,
}

impl PatchWave {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("patch radius must be positive, got {radius}")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `1 / |B(0, R)|`.
    pub fn density_value(&self) -> f64 {
        1.0 / (OMEGA_1 * self.radius.powi(3))
    }

    /// Translation velocity of the support, `dα_R/dt = c / (ω₁ R)`.
    pub fn wave_velocity(&self) -> Vec3 {
        wave_speed() / (OMEGA_1 * self.radius)
    }

    /// `α_R(t) = t c / (ω₁ R)`.
    pub fn center(&self, t: f64) -> Vec3 {
        wave_speed() * (t / (OMEGA_1 * self.radius))
    }

    pub fn mass(&self) -> f64 {
        self.density_value() * OMEGA_1 * self.radius.powi(3)
    }
}

/// `ρ_R(t, x) = R⁻³ ρ_{1,0}(x/R − t c / (ω₁ R²))`.
pub fn patch_density(w: &PatchWave, t: f64, x: &Vec3) -> f64 {
    let r = w.radius;
    let y = x / r - wave_speed() * (t / (OMEGA_1 * r * r));
    if y.norm_squared() <= 1.0 {
        1.0 / (OMEGA_1 * r.powi(3))
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingParams {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl ScalingParams {
    pub fn new(alpha: f64, beta: f64, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::invalid(format!("scaling factor must be positive, got {lambda}")));
        }
        Ok(Self { alpha, beta, lambda })
    }
}

/// `ρ̄(t, x) = λ^{−(α+β)} ρ(t/λ^β, x/λ^α)`.
pub fn scale_solution<F>(rho: F, s: ScalingParams) -> impl Fn(f64, &Vec3) -> f64
where
    F: Fn(f64, &Vec3) -> f64,
{
    let amp = s.lambda.powf(-(s.alpha + s.beta));
    let tscale = s.lambda.powf(s.beta);
    let xscale = s.lambda.powf(s.alpha);
    move |t, x| amp * rho(t / tscale, &(x / xscale))
}

fn distance_between_centers(radius: f64, t: f64) -> f64 {
    (1.0 / radius - 1.0).abs() * t * C3.abs() / OMEGA_1
}

/// Volume of `B(0, a) ∩ B(d e₃, b)`.
///
/// In the lens case the cross-sectional area is a quadratic in `z` on each
/// side of the intersection plane, so Simpson with two panels per side is exact.
pub fn ball_overlap_volume(a: f64, b: f64, d: f64) -> Result<f64> {
    let (small, big) = if a <= b { (a, b) } else { (b, a) };
    if d >= a + b {
        return Ok(0.0);
    }
    if d + small <= big {
        return Ok(OMEGA_1 * small.powi(3));
    }
    // plane where the two spheres intersect, measured from the center of B(0, a)
    let zp = (d * d + a * a - b * b) / (2.0 * d);
    let cap_b = simpson_1d(|z| PI * (b * b - (z - d) * (z - d)).max(0.0), d - b, zp, 2)?;
    let cap_a = simpson_1d(|z| PI * (a * a - z * z).max(0.0), zp, a, 2)?;
    Ok(cap_a + cap_b)
}

/// `‖ρ_R(t) − ρ_1(t)‖_{L¹}`.
pub fn l1_distance(radius: f64, t: f64) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("patch radius must be positive, got {radius}")));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
    }
    if radius == 1.0 {
        return Ok(0.0);
    }
    let d = distance_between_centers(radius, t);
    let (small, big) = if radius < 1.0 { (radius, 1.0) } else { (1.0, radius) };
    if d >= radius + 1.0 {
        return Ok(2.0);
    }
    if d + small <= big {
        return Ok(2.0 * (1.0 - (small / big).powi(3)));
    }
    // |ρ_R − ρ_1| integrates to 2 − 2 min(ρ_R, ρ_1) |overlap|
    let lower_density = 1.0 / (OMEGA_1 * big.powi(3));
    let overlap = ball_overlap_volume(radius, 1.0, d)?;
    Ok(2.0 - 2.0 * lower_density * overlap)
}

/// First time after which the supports of `ρ_R` and `ρ_1` stay disjoint.
pub fn separation_time(radius: f64) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("patch radius must be positive, got {radius}")));
    }
    if radius == 1.0 {
        return Err(Error::invalid("equal radii never separate"));
    }
    Ok((radius + 1.0) * OMEGA_1 / (C3.abs() * (1.0 / radius - 1.0).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WassersteinBounds {
    /// `W₁(ρ_{R,0}, ρ_{1,0}) ≤ |1 − R| ∫|x| ρ_{1,0}`.
    pub initial_upper: f64,
    /// `W₁(ρ_R(t), ρ_1(t)) ≥ |c₃| (t/ω₁) |1/R − 1|`, from the test function `x₃`.
    pub lower_at_t: f64,
}

pub fn wasserstein_bounds(radius: f64, t: f64) -> Result<WassersteinBounds> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("patch radius must be positive, got {radius}")));
    }
    Ok(WassersteinBounds {
        initial_upper: (1.0 - radius).abs() * MEAN_RADIUS,
        lower_at_t: wasserstein_slope(radius) * t,
    })
}

/// `d/dt` of the W₁ lower bound.
pub fn wasserstein_slope(radius: f64) -> f64 {
    C3.abs() * (1.0 / radius - 1.0).abs() / OMEGA_1
}
