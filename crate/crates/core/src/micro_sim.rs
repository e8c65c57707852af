//! Point-particle sedimentation: `N` Stokeslets in `B(0, R₀)` interacting
//! through the Oseen tensor, plus the rescaled dynamics whose mean fall speed
//! is 1.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::io;
use crate::kernels::{oseen_apply, stokes_drag_velocity, FluidParams, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    pub positions: Vec<Vec3>,
    /// Fluid viscosity, force per particle and particle radius.
    pub params: FluidParams,
    pub cloud_radius: f64,
    pub delta: f64,
}

/// `δ = 10⁻³ R₀ N^{−1/3}`.
pub fn default_delta(cloud_radius: f64, n: usize) -> f64 {
    1e-3 * cloud_radius * (n.max(1) as f64).powf(-1.0 / 3.0)
}

impl ParticleCloud {
    pub fn new(positions: Vec<Vec3>, params: FluidParams, cloud_radius: f64, delta: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("a cloud needs at least one particle"));
        }
        if !(cloud_radius > 0.0 && cloud_radius.is_finite()) {
            return Err(Error::invalid(format!(
                "cloud radius must be positive, got {cloud_radius}"
            )));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!(
                "regularization must be nonnegative, got {delta}"
            )));
        }
        if let Some(i) = positions
            .iter()
            .position(|x| !(x.norm() <= cloud_radius * (1.0 + 1e-12)))
        {
            return Err(Error::invalid(format!("particle {i} lies outside the cloud ball")));
        }
        Ok(Self {
            positions,
            params,
            cloud_radius,
            delta,
        })
    }

    /// `n` points uniform in `B(0, R₀)`: uniform direction times `R₀ U^{1/3}`.
    pub fn uniform_ball(n: usize, cloud_radius: f64, params: FluidParams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = (0..n)
            .map(|_| {
                let dir: [f64; 3] = UnitSphere.sample(&mut rng);
                let u: f64 = rng.random();
                Vec3::from(dir) * (cloud_radius * u.cbrt())
            })
            .collect();
        Self::new(positions, params, cloud_radius, default_delta(cloud_radius, n))
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn center_of_mass(&self) -> Vec3 {
        center_of_mass(&self.positions)
    }
}

fn center_of_mass(x: &[Vec3]) -> Vec3 {
    x.iter().fold(Vec3::zeros(), |a, v| a + v) / x.len() as f64
}

/// Offset used for the interaction of `x_i − x_j`; `None` if it must be clamped
/// and there is no direction to clamp along.
#[inline]
fn clamped(d: Vec3, delta: f64) -> std::result::Result<(Vec3, bool), ()> {
    let r = d.norm();
    if r >= delta && r > 0.0 {
        Ok((d, false))
    } else if r > 0.0 {
        Ok((d * (delta / r), true))
    } else if delta > 0.0 {
        // coincident: any direction at distance δ, fixed for determinism
        Ok((Vec3::z() * delta, true))
    } else {
        Err(())
    }
}

/// Interaction sum `Σ_{j≠i} U(x_i − x_j) F` and the number of clamped pairs.
fn interaction(x: &[Vec3], i: usize, force: &Vec3, mu: f64, delta: f64) -> Result<(Vec3, usize)> {
    let xi = x[i];
    let mut acc = Vec3::zeros();
    let mut clamps = 0;
    for (j, xj) in x.iter().enumerate() {
        if j == i {
            continue;
        }
        let (d, c) = clamped(xi - xj, delta).map_err(|_| Error::CoincidentParticles { i, j })?;
        clamps += c as usize;
        acc += oseen_apply(&d, force, mu);
    }
    Ok((acc, clamps))
}

/// `U_S + Σ_{j≠i} U(x_i − x_j) F`.
pub fn pairwise_velocity(cloud: &ParticleCloud, i: usize) -> Result<Vec3> {
    if i >= cloud.len() {
        return Err(Error::invalid(format!(
            "particle {i} outside a cloud of {}",
            cloud.len()
        )));
    }
    let p = &cloud.params;
    let (v, _) = interaction(&cloud.positions, i, &p.force(), p.mu, cloud.delta)?;
    Ok(stokes_drag_velocity(p) + v)
}

/// Every particle velocity.
pub fn velocities(cloud: &ParticleCloud, exec: Execution) -> Result<Vec<Vec3>> {
    let p = &cloud.params;
    let us = stokes_drag_velocity(p);
    let f = p.force();
    exec.try_map(cloud.len(), |i| {
        interaction(&cloud.positions, i, &f, p.mu, cloud.delta).map(|(v, _)| us + v)
    })
}

/// `(1/N) Σ_i ẋ_i`.
pub fn mean_settling_velocity(cloud: &ParticleCloud) -> Result<Vec3> {
    mean_settling_velocity_with(cloud, Execution::default())
}

pub fn mean_settling_velocity_with(cloud: &ParticleCloud, exec: Execution) -> Result<Vec3> {
    Ok(center_of_mass(&velocities(cloud, exec)?))
}

/// `V₀ = U_S + (N − 1) F / (5π μ R₀)`.
pub fn v0_formula(cloud: &ParticleCloud) -> Vec3 {
    let p = &cloud.params;
    stokes_drag_velocity(p) + p.force() * ((cloud.len() as f64 - 1.0) / (5.0 * PI * p.mu * cloud.cloud_radius))
}

/// Monte Carlo estimate of `|B|⁻² ∬_{B×B} U(x − y) F dx dy` over the unit ball with `F = −e₃`, `μ = 1`.
pub fn mean_oseen_monte_carlo(pairs: usize, seed: u64) -> Vec3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| {
        let dir: [f64; 3] = UnitSphere.sample(rng);
        let u: f64 = rng.random();
        Vec3::from(dir) * u.cbrt()
    };
    let f = -Vec3::z();
    let mut acc = Vec3::zeros();
    for _ in 0..pairs {
        let d = point(&mut rng) - point(&mut rng);
        if d.norm_squared() > 0.0 {
            acc += oseen_apply(&d, &f, 1.0);
        }
    }
    acc / pairs as f64
}

/// Equations of motion for [`evolve_cloud`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityLaw {
    /// `U_S + Σ U(x_i − x_j) F` in the laboratory frame.
    Lab,
    /// The interaction sum only, i.e. the frame translating with `U_S`.
    DriftSubtracted,
    /// `ẋ̃_i = −(5/(8(N−1))) Σ_{j≠i} 𝒦(x̃_i − x̃_j) e₃` with `𝒦 = I/|x| + x⊗x/|x|³`.
    Rescaled,
}

/// Prefactor `N/(N−1) · 5π · (1/N) · 1/(8π)` of the rescaled law; `0` when `N = 1`.
pub fn rescaled_prefactor(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    nf / (nf - 1.0) * 5.0 * PI / nf / (8.0 * PI)
}

/// Positions divided by `R₀`; the result pairs with [`VelocityLaw::Rescaled`].
pub fn rescale_cloud(cloud: &ParticleCloud) -> Result<ParticleCloud> {
    let r0 = cloud.cloud_radius;
    let positions = cloud.positions.iter().map(|x| x / r0).collect();
    ParticleCloud::new(positions, cloud.params, 1.0, cloud.delta / r0)
}

fn law_velocities(x: &[Vec3], cloud: &ParticleCloud, law: VelocityLaw, exec: Execution) -> Result<(Vec<Vec3>, usize)> {
    let p = &cloud.params;
    let (force, mu, drift) = match law {
        VelocityLaw::Lab => (p.force(), p.mu, stokes_drag_velocity(p)),
        VelocityLaw::DriftSubtracted => (p.force(), p.mu, Vec3::zeros()),
        // 𝒦 e₃ = 8π U(x) e₃ at μ = 1
        VelocityLaw::Rescaled => (
            -Vec3::z() * (8.0 * PI * rescaled_prefactor(x.len())),
            1.0,
            Vec3::zeros(),
        ),
    };
    let parts = exec.try_map(x.len(), |i| interaction(x, i, &force, mu, cloud.delta))?;
    let clamps = parts.iter().map(|(_, c)| c).sum();
    Ok((parts.into_iter().map(|(v, _)| v + drift).collect(), clamps))
}

/// Velocities under `law` at the cloud's current positions.
pub fn law_velocity(cloud: &ParticleCloud, law: VelocityLaw, exec: Execution) -> Result<Vec<Vec3>> {
    Ok(law_velocities(&cloud.positions, cloud, law, exec)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudSnapshot {
    pub time: f64,
    #[serde(skip)]
    pub positions: Vec<Vec3>,
    pub center_of_mass: [f64; 3],
    /// `max z − min z`.
    pub vertical_extent: f64,
    /// Clamped pair interactions accumulated since the previous snapshot.
    pub clamp_events: usize,
}

impl CloudSnapshot {
    fn new(time: f64, positions: Vec<Vec3>, clamp_events: usize) -> Self {
        let c = center_of_mass(&positions);
        let (lo, hi) = positions
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x.z), hi.max(x.z))
            });
        Self {
            time,
            positions,
            center_of_mass: [c.x, c.y, c.z],
            vertical_extent: hi - lo,
            clamp_events,
        }
    }
}

/// Explicit midpoint integration to `t_final` with a snapshot every `every` steps.
pub fn evolve_cloud(
    cloud: &ParticleCloud,
    t_final: f64,
    dt: f64,
    law: VelocityLaw,
    every: usize,
    exec: Execution,
) -> Result<Vec<CloudSnapshot>> {
    if !(t_final > 0.0 && t_final.is_finite()) || !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("T and dt must be positive"));
    }
    let steps = (t_final / dt).round().max(1.0) as usize;
    let every = every.max(1);
    let mut x = cloud.positions.clone();
    let mut out = vec![CloudSnapshot::new(0.0, x.clone(), 0)];
    let mut clamps = 0;
    for k in 1..=steps {
        let (v1, c1) = law_velocities(&x, cloud, law, exec)?;
        let mid: Vec<Vec3> = x.iter().zip(&v1).map(|(a, v)| a + v * (0.5 * dt)).collect();
        let (v2, c2) = law_velocities(&mid, cloud, law, exec)?;
        clamps += c1 + c2;
        for (a, v) in x.iter_mut().zip(&v2) {
            *a += v * dt;
        }
        let time = k as f64 * dt;
        if let Some(index) = x
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::BlowUp { index, time });
        }
        if k % every == 0 || k == steps {
            if clamps > 0 {
                log::debug!("t = {time}: {clamps} clamped pair interactions");
            }
            out.push(CloudSnapshot::new(time, x.clone(), clamps));
            clamps = 0;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CloudManifest {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub delta: f64,
    pub law: VelocityLaw,
    pub frame_times: Vec<f64>,
    pub frames: Vec<CloudSnapshot>,
}

/// Writes `frame_XXXXX.csv` (`id,x,y,z`) per snapshot plus `manifest.json`.
pub fn write_frames(dir: &Path, snapshots: &[CloudSnapshot], mut manifest: CloudManifest) -> Result<()> {
    for (k, s) in snapshots.iter().enumerate() {
        let rows = s.positions.iter().enumerate().map(|(i, p)| [i as f64, p.x, p.y, p.z]);
        io::write_csv(dir.join(format!("frame_{k:05}.csv")), &["id", "x", "y", "z"], rows)?;
    }
    manifest.frame_times = snapshots.iter().map(|s| s.time).collect();
    manifest.frames = snapshots.to_vec();
    io::write_json(dir.join("manifest.json"), &manifest)
}
