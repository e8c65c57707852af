//! The four experiment drivers. Each writes into `config.out` and finishes with `run.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::info;
use patchstab::io::{read_csv_columns, write_csv, write_json};
use patchstab::linear_stability::{
    assemble_galerkin_with, solve_spectrum, solve_spectrum_dumping, GalerkinConfig, Perturbation, SpectrumReport,
};
use patchstab::micro_sim::{
    self, default_delta, evolve_cloud, v0_formula, write_frames, CloudManifest, ParticleCloud, VelocityLaw,
};
use patchstab::patch_waves::{l1_distance, separation_time, wasserstein_bounds, wasserstein_slope};
use patchstab::quadrature::{PhiGrid, ThetaGrid};
use patchstab::surface_evolution::{write_snapshot, RadialProfile, SurfaceSolver};
use patchstab::{Execution, FluidParams, Vec3};
use serde::Serialize;
use serde_json::json;

use crate::config::{EvolveParams, Manifest, MicroParams, PatchParams, RunConfig, SpectrumParams, VERSION};

/// Exclusive hold on an output directory for the lifetime of a run.
struct OutputDir {
    path: PathBuf,
    lock: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    fn claim(path: &Path) -> Result<Self> {
        std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        let lock = path.join(".lock");
        std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .with_context(|| {
                format!(
                    "{} is in use by another run (remove {} if stale)",
                    path.display(),
                    lock.display()
                )
            })?;
        Ok(Self {
            path: path.to_path_buf(),
            lock,
            written: Vec::new(),
        })
    }

    fn file(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.path.join(name)
    }

    fn finish<P: Serialize>(mut self, subcommand: &'static str, status: &str, config: &RunConfig<P>) -> Result<()> {
        let outputs = std::mem::take(&mut self.written);
        let manifest = Manifest {
            tool: "patchstab",
            version: VERSION,
            subcommand,
            status,
            config,
            outputs,
        };
        write_json(self.path.join("run.json"), &manifest)?;
        Ok(())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.lock);
    }
}

pub fn run_patch(cfg: &RunConfig<PatchParams>) -> Result<()> {
    let p = &cfg.params;
    p.validate()?;
    let mut out = OutputDir::claim(&cfg.out)?;
    let r = p.radius;
    let rows = (0..=p.steps)
        .map(|k| {
            let t = p.t_max * k as f64 / p.steps as f64;
            Ok([t, l1_distance(r, t)?, wasserstein_bounds(r, t)?.lower_at_t])
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(out.file("patch.csv"), &["t", "l1", "w1_lower"], &rows)?;
    let t_r = if r == 1.0 { None } else { Some(separation_time(r)?) };
    let summary = json!({
        "R": r,
        "T_R": t_r,
        "l1_initial": rows[0][1],
        "l1_final": rows[rows.len() - 1][1],
        "w1_slope": wasserstein_slope(r),
        "w1_initial_upper": wasserstein_bounds(r, 0.0)?.initial_upper,
        "rows": rows.len(),
    });
    write_json(out.file("summary.json"), &summary)?;
    info!("patch R = {r}: T_R = {t_r:?}, {} rows", rows.len());
    out.finish("patch", "ok", cfg)
}

pub fn run_spectrum(cfg: &RunConfig<SpectrumParams>, exec: Execution) -> Result<()> {
    let p = &cfg.params;
    p.validate()?;
    let mut out = OutputDir::claim(&cfg.out)?;
    let start = Instant::now();
    let galerkin = GalerkinConfig {
        k: p.k,
        n_theta: p.n_theta,
        n_phi: p.n_phi,
        inner_theta: p.inner_theta,
        normalization: p.normalization,
        exec,
    };
    let matrix = assemble_galerkin_with(galerkin)?;
    let report = match solve_spectrum_dumping(&matrix, Some(&cfg.out)) {
        Ok(r) => r,
        Err(e) => {
            out.written.push("galerkin_matrix.csv".into());
            out.finish("spectrum", "eigensolver_failed", cfg)?;
            return Err(e.into());
        }
    };
    let rows = report.eigenvalues.iter().map(|l| [l.re, l.im]);
    write_csv(out.file("eigenvalues.csv"), &["re", "im"], rows)?;
    let grid = ThetaGrid::new(p.n_theta)?;
    let h = report.dominant_perturbation().values_on(&grid)?;
    let rows = grid.nodes().iter().zip(&h).map(|(&t, &v)| [t, v]);
    write_csv(out.file("dominant_eigenvector.csv"), &["theta", "h"], rows)?;
    let summary = json!({
        "K": p.k,
        "n_theta": p.n_theta,
        "n_phi": p.n_phi,
        "normalization": p.normalization,
        "max_real": report.max_real,
        "threshold_1_over_15": 1.0 / 15.0,
        "symmetric_residual": report.symmetric_residual(),
    });
    write_json(out.file("summary.json"), &summary)?;
    info!(
        "K = {}, n_theta = {}: max Re = {:.6} in {:.2?}",
        p.k,
        p.n_theta,
        report.max_real,
        start.elapsed()
    );
    out.finish("spectrum", "ok", cfg)
}

/// Reads `theta,h` written by `spectrum`.
fn read_eigenvector(path: &Path) -> Result<Perturbation> {
    let (header, cols) = read_csv_columns(path).with_context(|| format!("reading {}", path.display()))?;
    if header != ["theta", "h"] {
        bail!("{} must have columns theta,h; got {header:?}", path.display());
    }
    let grid = ThetaGrid::new(cols[0].len())?;
    let aligned = grid.len() == cols[0].len() && grid.nodes().iter().zip(&cols[0]).all(|(a, b)| (a - b).abs() < 1e-9);
    if !aligned {
        bail!(
            "{}: theta column is not a uniform grid on [0, pi] with an odd node count",
            path.display()
        );
    }
    Ok(Perturbation::from_samples(grid, cols[1].clone())?)
}

fn dominant_mode(p: &EvolveParams, exec: Execution) -> Result<Perturbation> {
    if let Some(path) = &p.eigvec {
        return read_eigenvector(path);
    }
    let mut g = GalerkinConfig::new(p.k, p.spectrum_n_theta);
    g.exec = exec;
    let report: SpectrumReport = solve_spectrum(&assemble_galerkin_with(g)?)?;
    info!(
        "dominant eigenvalue {:.6} (K = {}, n_theta = {})",
        report.max_real, p.k, p.spectrum_n_theta
    );
    Ok(report.dominant_perturbation())
}

pub fn run_evolve(cfg: &RunConfig<EvolveParams>, exec: Execution) -> Result<()> {
    let p = &cfg.params;
    p.validate()?;
    let base = p.base_radius()?;
    let policy = p.center_policy()?;
    let grid = ThetaGrid::new(p.n_theta)?;
    let r0 = match p.perturb.as_str() {
        "dominant" => {
            let h = dominant_mode(p, exec)?.values_on(&grid)?;
            h.iter().map(|v| base + p.eps * v).collect()
        }
        _ => vec![base; grid.len()],
    };
    let p0 = RadialProfile::new(grid, r0, 0.0, 0.0)?;
    let mut out = OutputDir::claim(&cfg.out)?;
    let solver = SurfaceSolver::new(PhiGrid::new(p.n_phi)?).with_execution(exec);
    let start = Instant::now();
    let (snapshots, halt) = match solver.evolve(&p0, p.t_final, p.dt, policy, p.every) {
        Ok(s) => (s, None),
        Err(h) => {
            let mut s = h.snapshots;
            if s.last().map(|x| x.time()) != Some(h.last_valid.time()) {
                s.push(h.last_valid);
            }
            (s, Some(h.error))
        }
    };
    for (k, s) in snapshots.iter().enumerate() {
        let stem = format!("snapshot_{k:05}");
        write_snapshot(&cfg.out, &stem, s, p.n_phi, p.dt, p.svg)?;
        out.written.push(format!("{stem}.csv"));
        out.written.push(format!("{stem}.json"));
        if p.svg {
            out.written.push(format!("{stem}.svg"));
        }
    }
    let last = snapshots.last().context("no snapshot produced")?;
    let summary = json!({
        "final_time": last.time(),
        "c3": last.c3(),
        "sup_deviation": last.sup_deviation(base),
        "min_radius": last.min_radius(),
        "volume": last.volume()?,
        "snapshots": snapshots.len(),
        "halted": halt.as_ref().map(|e| e.to_string()),
    });
    write_json(out.file("summary.json"), &summary)?;
    info!("evolved to t = {} in {:.2?}", last.time(), start.elapsed());
    match halt {
        None => out.finish("evolve", "ok", cfg),
        Some(e) => {
            out.finish("evolve", "halted", cfg)?;
            Err(anyhow::Error::new(e).context(format!("evolution halted; last valid snapshot at t = {}", last.time())))
        }
    }
}

pub fn run_micro(cfg: &RunConfig<MicroParams>, exec: Execution) -> Result<()> {
    let p = &cfg.params;
    p.validate()?;
    let mut out = OutputDir::claim(&cfg.out)?;
    let params = FluidParams::new(p.mu, -Vec3::z(), p.a)?;
    let mut cloud = ParticleCloud::uniform_ball(p.n, p.cloud_radius, params, cfg.seed)?;
    cloud.delta = p.delta.unwrap_or_else(|| default_delta(p.cloud_radius, p.n));
    let v_mean = micro_sim::mean_settling_velocity_with(&cloud, exec)?;
    let v0 = v0_formula(&cloud);
    let evolved = match p.law {
        VelocityLaw::Rescaled => micro_sim::rescale_cloud(&cloud)?,
        _ => cloud.clone(),
    };
    let start = Instant::now();
    let frames = evolve_cloud(&evolved, p.t_final, p.dt, p.law, p.every, exec)?;
    let (first, last) = (&frames[0], &frames[frames.len() - 1]);
    let fall_speed = -(last.center_of_mass[2] - first.center_of_mass[2]) / last.time;
    let manifest = CloudManifest {
        n: p.n,
        seed: cfg.seed,
        dt: p.dt,
        t: p.t_final,
        delta: evolved.delta,
        law: p.law,
        frame_times: vec![],
        frames: vec![],
    };
    write_frames(&cfg.out, &frames, manifest)?;
    out.written
        .extend((0..frames.len()).map(|k| format!("frame_{k:05}.csv")));
    out.written.push("manifest.json".into());
    let report = json!({
        "N": p.n,
        "mean_velocity": [v_mean.x, v_mean.y, v_mean.z],
        "v0_formula": [v0.x, v0.y, v0.z],
        "relative_error_vs_v0": ((v_mean.z - v0.z) / v0.z).abs(),
        "stokes_velocity": patchstab::kernels::stokes_drag_velocity(&params).z,
        "mean_fall_speed": fall_speed,
        "clamp_events": frames.iter().map(|f| f.clamp_events).sum::<usize>(),
    });
    write_json(out.file("report.json"), &report)?;
    info!(
        "N = {}: mean v3 {:.4} vs V0 {:.4}; run took {:.2?}",
        p.n,
        v_mean.z,
        v0.z,
        start.elapsed()
    );
    out.finish("micro", "ok", cfg)
}
