//! Closed-form Stokes kernels and chord-distance functions on the unit sphere.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Threshold below which a negative chord distance is treated as round-off.
pub const GAMMA_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub mu: f64,
    pub force: [f64; 3],
    pub radius: f64,
}

impl FluidParams {
    pub fn new(mu: f64, force: Vec3, radius: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("viscosity must be positive, got {mu}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        if !force.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("force must be finite"));
        }
        Ok(Self {
            mu,
            force: [force.x, force.y, force.z],
            radius,
        })
    }

    /// `μ = 1`, `F = −e₃`, radius `R`.
    pub fn unit_gravity(radius: f64) -> Result<Self> {
        Self::new(1.0, -Vec3::z(), radius)
    }

    pub fn force(&self) -> Vec3 {
        Vec3::from(self.force)
    }
}

/// A point `(θ, φ) ∈ [0, π] × [0, 2π]` on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    pub theta: f64,
    pub phi: f64,
}

impl SpherePoint {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        crate::quadrature::check_theta(theta)?;
        if !(-1e-12..=2.0 * PI + 1e-12).contains(&phi) {
            return Err(Error::AngleOutOfRange {
                value: phi,
                lo: 0.0,
                hi: 2.0 * PI,
            });
        }
        Ok(Self { theta, phi })
    }

    /// `e(θ, φ) = (sin θ cos φ, sin θ sin φ, cos θ)`.
    pub fn unit_vector(theta: f64, phi: f64) -> Vec3 {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }

    pub fn unit_vector_of(&self) -> Vec3 {
        Self::unit_vector(self.theta, self.phi)
    }
}

/// Stokeslet `U(x) = (I/|x| + x⊗x/|x|³) / (8πμ)`.
pub fn oseen_tensor(x: &Vec3, mu: f64) -> Result<Mat3> {
    let r = x.norm();
    if r == 0.0 {
        return Err(Error::SingularPoint);
    }
    let k = Mat3::identity() / r + (x * x.transpose()) / (r * r * r);
    Ok(k / (8.0 * PI * mu))
}

/// `U(x) F` without forming the matrix; `x` must be nonzero.
#[inline]
pub(crate) fn oseen_apply(x: &Vec3, force: &Vec3, mu: f64) -> Vec3 {
    let r2 = x.norm_squared();
    let r = r2.sqrt();
    (force + x * (x.dot(force) / r2)) / (8.0 * PI * mu * r)
}

/// Settling velocity of an isolated sphere, `U_S = F / (6πμR)`.
pub fn stokes_drag_velocity(params: &FluidParams) -> Vec3 {
    params.force() / (6.0 * PI * params.mu * params.radius)
}

/// Velocity generated by the force density `1_{B(0,R₀)} F`, with `R₀ = params.radius`.
///
/// The interior branch is used on the interface `|x| = R₀`.
pub fn hadamard_rybczynski_velocity(x: &Vec3, params: &FluidParams) -> Vec3 {
    let r0 = params.radius;
    let mu = params.mu;
    let f = params.force();
    let r = x.norm();
    if r <= r0 {
        let radial = if r > 0.0 {
            // (|x|²/R₀²)(2/5)(I − x⊗x/(2|x|²)) F
            let xhat = x / r;
            (f - xhat * (0.5 * xhat.dot(&f))) * (0.4 * r * r / (r0 * r0))
        } else {
            Vec3::zeros()
        };
        (f - radial) * (r0 * r0 / (3.0 * mu))
    } else {
        let xhat = x / r;
        let proj = xhat * xhat.dot(&f);
        let stokeslet = (f + proj) * (r0 / r);
        let dipole = (f - proj * 3.0) * (0.2 * (r0 / r).powi(3));
        (stokeslet + dipole) * (r0 * r0 / (6.0 * mu))
    }
}

/// Exterior branch evaluated anywhere except the origin (continuity checks).
pub fn hadamard_rybczynski_exterior(x: &Vec3, params: &FluidParams) -> Vec3 {
    let r0 = params.radius;
    let f = params.force();
    let r = x.norm();
    let xhat = x / r;
    let proj = xhat * xhat.dot(&f);
    ((f + proj) * (r0 / r) + (f - proj * 3.0) * (0.2 * (r0 / r).powi(3))) * (r0 * r0 / (6.0 * params.mu))
}

/// `γ[r](θ, θ̄, φ) = r(θ)² + r(θ̄)² − 2 r(θ) r(θ̄)(sin θ sin θ̄ cos φ + cos θ cos θ̄)`.
pub fn gamma(r_at_theta: f64, r_at_thetabar: f64, theta: f64, theta_bar: f64, phi: f64) -> Result<f64> {
    let g = gamma_raw(r_at_theta, r_at_thetabar, theta, theta_bar, phi);
    if g < -GAMMA_CLAMP {
        return Err(Error::NegativeGamma(g));
    }
    Ok(g.max(0.0))
}

#[inline]
pub(crate) fn gamma_raw(r1: f64, r2: f64, theta: f64, theta_bar: f64, phi: f64) -> f64 {
    let c = theta.sin() * theta_bar.sin() * phi.cos() + theta.cos() * theta_bar.cos();
    r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * c
}

/// Result of [`desingularized_ratio`]; `excluded` marks the coincident point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub value: f64,
    pub excluded: bool,
}

/// `(−sin θ cos θ̄ cos φ + cos θ sin θ̄) / √γ[1](θ, θ̄, φ)` in its bounded form.
///
/// Numerator and denominator are rewritten through the components of
/// `e(θ, φ) − e(θ̄, 0)`, so the quotient is a bounded combination of a unit
/// vector's components (|value| ≤ √2).
pub fn desingularized_ratio(theta: f64, theta_bar: f64, phi: f64) -> Ratio {
    let (st, ct) = theta.sin_cos();
    let (sb, cb) = theta_bar.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let value = ratio_from_trig(st, ct, sb, cb, sp, cp);
    match value {
        Some(value) => Ratio { value, excluded: false },
        None => Ratio {
            value: 0.0,
            excluded: true,
        },
    }
}

#[inline]
pub(crate) fn ratio_from_trig(st: f64, ct: f64, sb: f64, cb: f64, sp: f64, cp: f64) -> Option<f64> {
    let dx = st * cp - sb;
    let dy = sp * st;
    let dz = ct - cb;
    let den2 = dx * dx + dy * dy + dz * dz;
    // distances below 1e-12 are the coincident point up to rounding
    if den2 < 1e-24 {
        return None;
    }
    Some((-dx * cb + dz * sb) / den2.sqrt())
}

/// The same quotient computed naively; singular on the diagonal.
pub fn naive_ratio(theta: f64, theta_bar: f64, phi: f64) -> f64 {
    let num = -theta.sin() * theta_bar.cos() * phi.cos() + theta.cos() * theta_bar.sin();
    let g = gamma_raw(1.0, 1.0, theta, theta_bar, phi);
    num / g.sqrt()
}
