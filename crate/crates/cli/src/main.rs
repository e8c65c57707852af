use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use patchstab::micro_sim::VelocityLaw;
use patchstab::quadrature::Normalization;
use patchstab::Execution;
use serde::de::DeserializeOwned;

mod commands;
mod config;

use config::{parse_enum, EvolveParams, MicroParams, PatchParams, RunConfig, SpectrumParams};

#[derive(Parser, Debug)]
#[command(name = "patchstab", version, about = "Spherical patch instability experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Output directory [default: out/<subcommand>]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON config file, or the run.json of an earlier run
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel kernels
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run every kernel on the calling thread
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// L1 distance and W1 lower bound between two patch waves
    Patch(PatchArgs),
    /// Galerkin spectrum of the linearized operator
    Spectrum(SpectrumArgs),
    /// Upwind evolution of an axisymmetric surface
    Evolve(EvolveArgs),
    /// N-particle Oseen sedimentation
    Micro(MicroArgs),
}

#[derive(Args, Debug)]
struct PatchArgs {
    #[arg(long = "R", allow_negative_numbers = true)]
    radius: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    ntheta: Option<usize>,
    #[arg(long)]
    nphi: Option<usize>,
    #[arg(long)]
    inner_theta: Option<usize>,
    /// interval or reference
    #[arg(long, value_parser = parse_enum::<Normalization>)]
    normalization: Option<Normalization>,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    /// Initial radius, `const:<r>`
    #[arg(long)]
    r0: Option<String>,
    #[arg(long = "T", allow_negative_numbers = true)]
    t_final: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long)]
    ntheta: Option<usize>,
    #[arg(long)]
    nphi: Option<usize>,
    /// Time between snapshots
    #[arg(long)]
    every: Option<f64>,
    /// wave, transported or prescribed:<speed>
    #[arg(long)]
    center: Option<String>,
    /// none or dominant
    #[arg(long)]
    perturb: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    /// dominant_eigenvector.csv of a spectrum run
    #[arg(long)]
    eigvec: Option<PathBuf>,
    /// Basis size when the eigenvector is computed inline
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    spectrum_ntheta: Option<usize>,
    /// Also write SVG meridian plots
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug)]
struct MicroArgs {
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "R0")]
    cloud_radius: Option<f64>,
    /// Particle radius
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "T", allow_negative_numbers = true)]
    t_final: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Steps between frames
    #[arg(long)]
    every: Option<usize>,
    /// lab, drift_subtracted or rescaled
    #[arg(long, value_parser = parse_enum::<VelocityLaw>)]
    law: Option<VelocityLaw>,
    #[arg(long)]
    delta: Option<f64>,
}

/// Copies every flag that was given over the corresponding field.
macro_rules! overlay {
    ($dst:expr, $src:expr; $($flag:ident => $field:ident),* $(,)?) => {
        $(if let Some(v) = $src.$flag.clone() { $dst.$field = v; })*
    };
}

fn base<P: DeserializeOwned + Default>(common: &Common, name: &str) -> Result<RunConfig<P>> {
    let mut cfg = match &common.config {
        Some(path) => config::load(path)?,
        None => RunConfig {
            seed: 1,
            out: PathBuf::from("out").join(name),
            params: P::default(),
        },
    };
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let exec = if cli.common.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let common = &cli.common;
    match cli.command {
        Command::Patch(a) => {
            let mut cfg: RunConfig<PatchParams> = base(common, "patch")?;
            overlay!(cfg.params, a; radius => radius, t_max => t_max, steps => steps);
            commands::run_patch(&cfg)
        }
        Command::Spectrum(a) => {
            let mut cfg: RunConfig<SpectrumParams> = base(common, "spectrum")?;
            overlay!(cfg.params, a; k => k, ntheta => n_theta, nphi => n_phi,
                inner_theta => inner_theta, normalization => normalization);
            commands::run_spectrum(&cfg, exec)
        }
        Command::Evolve(a) => {
            let mut cfg: RunConfig<EvolveParams> = base(common, "evolve")?;
            overlay!(cfg.params, a; r0 => r0, t_final => t_final, dt => dt, ntheta => n_theta,
                nphi => n_phi, every => every, center => center, perturb => perturb, eps => eps,
                k => k, spectrum_ntheta => spectrum_n_theta);
            if a.eigvec.is_some() {
                cfg.params.eigvec = a.eigvec;
            }
            cfg.params.svg |= a.svg;
            commands::run_evolve(&cfg, exec)
        }
        Command::Micro(a) => {
            let mut cfg: RunConfig<MicroParams> = base(common, "micro")?;
            overlay!(cfg.params, a; n => n, cloud_radius => cloud_radius, a => a, mu => mu,
                t_final => t_final, dt => dt, every => every, law => law);
            if a.delta.is_some() {
                cfg.params.delta = a.delta;
            }
            commands::run_micro(&cfg, exec)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
