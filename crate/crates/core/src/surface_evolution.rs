//! Nonlocal hyperbolic model `∂_t r + A₁[r] ∂_θ r = A₂[r]` for an axisymmetric
//! droplet surface written in spherical coordinates around a reference center
//! `(0, 0, c₃(t))`.
//!
//! `A₁` and `A₂` are double integrals over `(θ̄, φ)`. The θ̄ direction is
//! sampled at cell midpoints so the integrable singularity of `1/√γ[r]` on the
//! diagonal is never hit; φ uses composite Simpson. Because the φ dependence of
//! both integrands is `(p + q cos φ)/√(a − b cos φ)`, each `(θ, θ̄)` pair only
//! needs the two Simpson sums `Σ w/√γ` and `Σ w cos φ/√γ`.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::io;
use crate::quadrature::{PhiGrid, ThetaGrid};

/// Reference-center speed of the exact traveling wave.
pub const WAVE_CENTER_SPEED: f64 = -4.0 / 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: ThetaGrid,
    r: Vec<f64>,
    c3: f64,
    time: f64,
}

impl RadialProfile {
    pub fn new(grid: ThetaGrid, r: Vec<f64>, c3: f64, time: f64) -> Result<Self> {
        if r.len() != grid.len() {
            return Err(Error::invalid(format!(
                "profile has {} samples for a {}-node grid",
                r.len(),
                grid.len()
            )));
        }
        if let Some((i, &v)) = r.iter().enumerate().find(|(_, v)| !v.is_finite() || **v <= 0.0) {
            return Err(Error::invalid(format!(
                "radius {v} at node {i} must be positive and finite"
            )));
        }
        Ok(Self { grid, r, c3, time })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: ThetaGrid, f: F) -> Result<Self> {
        let r = grid.nodes().iter().map(|&t| f(t)).collect();
        Self::new(grid, r, 0.0, 0.0)
    }

    pub fn constant(grid: ThetaGrid, radius: f64) -> Result<Self> {
        Self::from_fn(grid, |_| radius)
    }

    pub fn grid(&self) -> &ThetaGrid {
        &self.grid
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn c3(&self) -> f64 {
        self.c3
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn min_radius(&self) -> f64 {
        self.r.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Enclosed volume `(2π/3) ∫ r³ sin θ dθ`.
    pub fn volume(&self) -> Result<f64> {
        let s: Vec<f64> = self
            .grid
            .nodes()
            .iter()
            .zip(&self.r)
            .map(|(t, r)| r.powi(3) * t.sin())
            .collect();
        Ok(2.0 * PI / 3.0 * self.grid.integrate(&s)?)
    }

    /// Profile `θ ↦ r(π − θ)`.
    pub fn reflected(&self) -> Self {
        let mut r = self.r.clone();
        r.reverse();
        Self { r, ..self.clone() }
    }

    /// `max_i |r_i − value|`.
    pub fn sup_deviation(&self, value: f64) -> f64 {
        self.r.iter().fold(0.0f64, |a, r| a.max((r - value).abs()))
    }

    /// Nodal `∂_θ r`: centered second-order inside, one-sided second-order at the poles.
    pub fn derivative(&self) -> Vec<f64> {
        let n = self.r.len();
        let h = self.grid.spacing();
        let r = &self.r;
        let mut d = vec![0.0; n];
        d[0] = (-3.0 * r[0] + 4.0 * r[1] - r[2]) / (2.0 * h);
        d[n - 1] = (3.0 * r[n - 1] - 4.0 * r[n - 2] + r[n - 3]) / (2.0 * h);
        for i in 1..n - 1 {
            d[i] = (r[i + 1] - r[i - 1]) / (2.0 * h);
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "speed", rename_all = "snake_case")]
pub enum CenterPolicy {
    /// `ċ₃ = center_speed(r)`: the center follows the flow.
    Transported,
    /// `ċ₃ = −4/15`, the exact wave speed.
    FixedWaveSpeed,
    Prescribed(f64),
}

impl CenterPolicy {
    pub fn speed(&self, p: &RadialProfile) -> Result<f64> {
        match *self {
            CenterPolicy::Transported => center_speed(p),
            CenterPolicy::FixedWaveSpeed => Ok(WAVE_CENTER_SPEED),
            CenterPolicy::Prescribed(s) => Ok(s),
        }
    }
}

/// `ċ₃[r] = −¼ ∫₀^π r²(θ̄) sin θ̄ (1 − ½ sin² θ̄) dθ̄`.
pub fn center_speed(p: &RadialProfile) -> Result<f64> {
    let s: Vec<f64> = p
        .grid
        .nodes()
        .iter()
        .zip(&p.r)
        .map(|(t, r)| {
            let st = t.sin();
            r * r * st * (1.0 - 0.5 * st * st)
        })
        .collect();
    Ok(-0.25 * p.grid.integrate(&s)?)
}

/// Midpoint samples of `r` and `∂_θ r` used in the θ̄ direction.
struct MidpointData {
    sin: Vec<f64>,
    cos: Vec<f64>,
    theta: Vec<f64>,
    r: Vec<f64>,
    dr: Vec<f64>,
    h: f64,
}

impl MidpointData {
    fn new(p: &RadialProfile) -> Self {
        let r = &p.r;
        let n = r.len();
        let h = p.grid.spacing();
        let theta = p.grid.midpoints();
        let mut rm = Vec::with_capacity(n - 1);
        for m in 0..n - 1 {
            // cubic interpolation from the four nearest nodes
            let v = if n < 4 {
                0.5 * (r[m] + r[m + 1])
            } else if m == 0 {
                (5.0 * r[0] + 15.0 * r[1] - 5.0 * r[2] + r[3]) / 16.0
            } else if m == n - 2 {
                (5.0 * r[n - 1] + 15.0 * r[n - 2] - 5.0 * r[n - 3] + r[n - 4]) / 16.0
            } else {
                (-r[m - 1] + 9.0 * r[m] + 9.0 * r[m + 1] - r[m + 2]) / 16.0
            };
            rm.push(v);
        }
        let dr = (0..n - 1).map(|m| (r[m + 1] - r[m]) / h).collect();
        Self {
            sin: theta.iter().map(|t| t.sin()).collect(),
            cos: theta.iter().map(|t| t.cos()).collect(),
            theta,
            r: rm,
            dr,
            h,
        }
    }
}

/// Quadrature driver holding the φ grid tables.
#[derive(Debug, Clone)]
pub struct SurfaceSolver {
    phi: PhiGrid,
    cos_phi: Vec<f64>,
    w_phi: Vec<f64>,
    pub exec: Execution,
}

/// `A₁[r]` and `A₂[r]` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceRates {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
}

impl SurfaceSolver {
    pub fn new(phi: PhiGrid) -> Self {
        let cos_phi = phi.nodes().iter().map(|p| p.cos()).collect();
        let w_phi = phi.simpson_weights();
        Self {
            phi,
            cos_phi,
            w_phi,
            exec: Execution::default(),
        }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn phi_grid(&self) -> &PhiGrid {
        &self.phi
    }

    /// The two integral parts `(I₁, I₂)` at node `i`, without the `ċ₃` terms
    /// and without the `−1/(8π)` prefactors.
    fn integrals_at(&self, p: &RadialProfile, mid: &MidpointData, i: usize) -> Result<(f64, f64)> {
        let theta = p.grid.nodes()[i];
        let (st, ct) = theta.sin_cos();
        let ri = p.r[i];
        let mut i1 = 0.0;
        let mut i2 = 0.0;
        for m in 0..mid.r.len() {
            let (sb, cb) = (mid.sin[m], mid.cos[m]);
            let rb = mid.r[m];
            let a = ri * ri + rb * rb - 2.0 * ri * rb * ct * cb;
            let b = 2.0 * ri * rb * st * sb;
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            for (&cp, &w) in self.cos_phi.iter().zip(&self.w_phi) {
                let inv = 1.0 / (a - b * cp).sqrt();
                s0 += w * inv;
                s1 += w * cp * inv;
            }
            if !(s0.is_finite() && s1.is_finite()) {
                let bad = self
                    .phi
                    .nodes()
                    .iter()
                    .zip(&self.cos_phi)
                    .find(|(_, &cp)| !(a - b * cp > 0.0))
                    .map(|(p, _)| *p)
                    .unwrap_or(f64::NAN);
                return Err(Error::NonFiniteSample {
                    location: format!("(theta, theta_bar, phi) = ({theta}, {}, {bad})", mid.theta[m]),
                    value: s0 + s1,
                });
            }
            let flux = rb * sb - mid.dr[m] * cb;
            i1 += flux * rb * sb * ((ri - rb * cb * ct) * s1 - rb * sb * st * s0);
            i2 += flux * rb * rb * sb * (cb * (-st) * s1 + ct * sb * s0);
        }
        Ok((i1 * mid.h, i2 * mid.h))
    }

    fn check_index(p: &RadialProfile, i: usize) -> Result<()> {
        if i >= p.r.len() {
            return Err(Error::invalid(format!("node {i} outside a {}-node profile", p.r.len())));
        }
        Ok(())
    }

    fn a1_from(p: &RadialProfile, i: usize, i1: f64, cdot3: f64) -> f64 {
        if i == 0 || i == p.r.len() - 1 {
            return 0.0;
        }
        let theta = p.grid.nodes()[i];
        -i1 / (8.0 * PI * p.r[i]) + cdot3 * theta.sin() / p.r[i]
    }

    fn a2_from(p: &RadialProfile, i: usize, i2: f64, cdot3: f64) -> f64 {
        let theta = p.grid.nodes()[i];
        -i2 / (8.0 * PI) - cdot3 * theta.cos()
    }

    pub fn a1_of(&self, p: &RadialProfile, i: usize, cdot3: f64) -> Result<f64> {
        Self::check_index(p, i)?;
        let mid = MidpointData::new(p);
        let (i1, _) = self.integrals_at(p, &mid, i)?;
        Ok(Self::a1_from(p, i, i1, cdot3))
    }

    pub fn a2_of(&self, p: &RadialProfile, i: usize, cdot3: f64) -> Result<f64> {
        Self::check_index(p, i)?;
        let mid = MidpointData::new(p);
        let (_, i2) = self.integrals_at(p, &mid, i)?;
        Ok(Self::a2_from(p, i, i2, cdot3))
    }

    pub fn rates(&self, p: &RadialProfile, cdot3: f64) -> Result<SurfaceRates> {
        let mid = MidpointData::new(p);
        let parts = self.exec.try_map(p.r.len(), |i| self.integrals_at(p, &mid, i))?;
        let a1 = parts
            .iter()
            .enumerate()
            .map(|(i, &(i1, _))| Self::a1_from(p, i, i1, cdot3))
            .collect();
        let a2 = parts
            .iter()
            .enumerate()
            .map(|(i, &(_, i2))| Self::a2_from(p, i, i2, cdot3))
            .collect();
        Ok(SurfaceRates { a1, a2 })
    }

    /// One explicit Euler step with upwind differencing of `∂_θ r`.
    pub fn step_upwind(&self, p: &RadialProfile, dt: f64, policy: CenterPolicy) -> Result<RadialProfile> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be nonnegative, got {dt}")));
        }
        if dt == 0.0 {
            return Ok(p.clone());
        }
        let cdot3 = policy.speed(p)?;
        let rates = self.rates(p, cdot3)?;
        let h = p.grid.spacing();
        let max_a1 = rates.a1.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if dt * max_a1 > h {
            return Err(Error::Cfl {
                courant: dt * max_a1,
                spacing: h,
            });
        }
        let r = &p.r;
        let n = r.len();
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let a1 = rates.a1[i];
            let grad = if a1 > 0.0 && i > 0 {
                (r[i] - r[i - 1]) / h
            } else if a1 < 0.0 && i + 1 < n {
                (r[i + 1] - r[i]) / h
            } else {
                0.0
            };
            next.push(r[i] - dt * a1 * grad + dt * rates.a2[i]);
        }
        let time = p.time + dt;
        if let Some((node, &min_r)) = next
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Less))
        {
            if !(min_r > 0.0) {
                return Err(Error::Collapse { time, min_r, node });
            }
        }
        Ok(RadialProfile {
            grid: p.grid.clone(),
            r: next,
            c3: p.c3 + dt * cdot3,
            time,
        })
    }

    /// Repeated [`SurfaceSolver::step_upwind`] up to `t_final`, keeping a snapshot
    /// at `t = 0`, every `snapshot_every` and at the end.
    #[allow(clippy::result_large_err)]
    pub fn evolve(
        &self,
        p0: &RadialProfile,
        t_final: f64,
        dt: f64,
        policy: CenterPolicy,
        snapshot_every: f64,
    ) -> std::result::Result<Vec<RadialProfile>, EvolutionHalt> {
        let halt = |error: Error, snapshots: Vec<RadialProfile>, last: &RadialProfile| EvolutionHalt {
            error,
            snapshots,
            last_valid: last.clone(),
        };
        if !(t_final > 0.0 && dt > 0.0 && snapshot_every > 0.0) {
            return Err(halt(
                Error::invalid("t_final, dt and snapshot_every must be positive"),
                vec![],
                p0,
            ));
        }
        let steps = (t_final / dt).round() as usize;
        let every = ((snapshot_every / dt).round() as usize).max(1);
        let mut snapshots = vec![p0.clone()];
        let mut current = p0.clone();
        for k in 1..=steps {
            match self.step_upwind(&current, dt, policy) {
                Ok(next) => current = next,
                Err(e) => return Err(halt(e, snapshots, &current)),
            }
            if k % every == 0 || k == steps {
                snapshots.push(current.clone());
            }
        }
        Ok(snapshots)
    }
}

/// An evolution stopped by a guard; carries what was produced so far.
#[derive(Debug, ThisError)]
#[error("evolution halted at t = {}: {error}", .last_valid.time)]
pub struct EvolutionHalt {
    #[source]
    pub error: Error,
    pub snapshots: Vec<RadialProfile>,
    pub last_valid: RadialProfile,
}

pub fn center_speed_of(p: &RadialProfile, policy: CenterPolicy) -> Result<f64> {
    policy.speed(p)
}

pub fn a1_of(p: &RadialProfile, theta_index: usize, cdot3: f64, phi_grid: &PhiGrid) -> Result<f64> {
    SurfaceSolver::new(phi_grid.clone()).a1_of(p, theta_index, cdot3)
}

pub fn a2_of(p: &RadialProfile, theta_index: usize, cdot3: f64, phi_grid: &PhiGrid) -> Result<f64> {
    SurfaceSolver::new(phi_grid.clone()).a2_of(p, theta_index, cdot3)
}

pub fn step_upwind(p: &RadialProfile, dt: f64, policy: CenterPolicy, phi_grid: &PhiGrid) -> Result<RadialProfile> {
    SurfaceSolver::new(phi_grid.clone()).step_upwind(p, dt, policy)
}

#[allow(clippy::result_large_err)]
pub fn evolve(
    p0: &RadialProfile,
    t_final: f64,
    dt: f64,
    policy: CenterPolicy,
    snapshot_every: f64,
    phi_grid: &PhiGrid,
) -> std::result::Result<Vec<RadialProfile>, EvolutionHalt> {
    SurfaceSolver::new(phi_grid.clone()).evolve(p0, t_final, dt, policy, snapshot_every)
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotMeta {
    pub time: f64,
    pub c3: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub dt: f64,
}

/// Writes `<stem>.csv` (`theta,r`), `<stem>.json` and optionally `<stem>.svg`.
pub fn write_snapshot(dir: &Path, stem: &str, p: &RadialProfile, n_phi: usize, dt: f64, svg: bool) -> Result<()> {
    let rows = p.grid.nodes().iter().zip(&p.r).map(|(&t, &r)| [t, r]);
    io::write_csv(dir.join(format!("{stem}.csv")), &["theta", "r"], rows)?;
    let meta = SnapshotMeta {
        time: p.time,
        c3: p.c3,
        n_theta: p.grid.len(),
        n_phi,
        dt,
    };
    io::write_json(dir.join(format!("{stem}.json")), &meta)?;
    if svg {
        let text = io::meridian_svg(p.grid.nodes(), &p.r, p.c3, &format!("t = {:.3}", p.time));
        std::fs::write(dir.join(format!("{stem}.svg")), text)?;
    }
    Ok(())
}
