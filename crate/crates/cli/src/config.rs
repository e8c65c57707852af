//! Run configuration: defaults, JSON config files, flag overlays and the run manifest.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use patchstab::micro_sim::VelocityLaw;
use patchstab::quadrature::Normalization;
use patchstab::surface_evolution::{CenterPolicy, WAVE_CENTER_SPEED};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a run depends on. Round-trips through JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig<P> {
    pub seed: u64,
    pub out: PathBuf,
    pub params: P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchParams {
    #[serde(rename = "R")]
    pub radius: f64,
    pub t_max: f64,
    pub steps: usize,
}

impl Default for PatchParams {
    fn default() -> Self {
        Self {
            radius: 0.5,
            t_max: 100.0,
            steps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    #[serde(rename = "K")]
    pub k: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub inner_theta: usize,
    pub normalization: Normalization,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            k: 4,
            n_theta: 200,
            n_phi: patchstab::linear_stability::DEFAULT_N_PHI,
            inner_theta: patchstab::linear_stability::DEFAULT_INNER_THETA,
            normalization: Normalization::Reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveParams {
    /// `const:<radius>`.
    pub r0: String,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Time between snapshots.
    pub every: f64,
    /// `wave`, `transported` or `prescribed:<speed>`.
    pub center: String,
    /// `none` or `dominant`.
    pub perturb: String,
    pub eps: f64,
    /// `dominant_eigenvector.csv` from an earlier `spectrum` run; computed inline when absent.
    pub eigvec: Option<PathBuf>,
    /// Inline spectrum resolution, used only without `eigvec`.
    #[serde(rename = "K")]
    pub k: usize,
    pub spectrum_n_theta: usize,
    pub svg: bool,
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self {
            r0: "const:1".into(),
            t_final: 150.0,
            dt: 0.01,
            n_theta: 100,
            n_phi: 200,
            every: 10.0,
            center: "wave".into(),
            perturb: "none".into(),
            eps: 0.2,
            eigvec: None,
            k: 25,
            spectrum_n_theta: 100,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicroParams {
    #[serde(rename = "N")]
    pub n: usize,
    /// Cloud radius.
    #[serde(rename = "R0")]
    pub cloud_radius: f64,
    /// Particle radius.
    pub a: f64,
    pub mu: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    /// Steps between frames.
    pub every: usize,
    pub law: VelocityLaw,
    /// Pair regularization; `δ = 10⁻³ R₀ N^{−1/3}` when absent.
    pub delta: Option<f64>,
}

impl Default for MicroParams {
    fn default() -> Self {
        Self {
            n: 2000,
            cloud_radius: 1.0,
            a: 0.01,
            mu: 1.0,
            t_final: 1.0,
            dt: 0.01,
            every: 10,
            law: VelocityLaw::Lab,
            delta: None,
        }
    }
}

impl PatchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            bail!("R must be a positive number, got {}", self.radius);
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) || self.steps == 0 {
            bail!("need t_max >= 0 and steps >= 1");
        }
        Ok(())
    }
}

impl SpectrumParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            bail!("K must be at least 1");
        }
        if self.n_theta < 8 {
            bail!("n_theta must be at least 8, got {}", self.n_theta);
        }
        if self.n_phi < 2 || self.inner_theta < 3 {
            bail!("n_phi >= 2 and inner_theta >= 3 required");
        }
        Ok(())
    }
}

impl EvolveParams {
    pub fn validate(&self) -> Result<()> {
        self.base_radius()?;
        self.center_policy()?;
        if !matches!(self.perturb.as_str(), "none" | "dominant") {
            bail!("perturb must be `none` or `dominant`, got {:?}", self.perturb);
        }
        if !(self.t_final > 0.0 && self.dt > 0.0 && self.every > 0.0) {
            bail!("T, dt and every must be positive");
        }
        if self.n_theta < 8 || self.n_phi < 2 {
            bail!("n_theta >= 8 and n_phi >= 2 required");
        }
        if !self.eps.is_finite() {
            bail!("eps must be finite");
        }
        Ok(())
    }

    pub fn base_radius(&self) -> Result<f64> {
        let v = self
            .r0
            .strip_prefix("const:")
            .with_context(|| format!("r0 must look like `const:<radius>`, got {:?}", self.r0))?;
        let r: f64 = v.parse().with_context(|| format!("bad radius in r0 {:?}", self.r0))?;
        if !(r > 0.0 && r.is_finite()) {
            bail!("r0 radius must be positive, got {r}");
        }
        Ok(r)
    }

    pub fn center_policy(&self) -> Result<CenterPolicy> {
        Ok(match self.center.as_str() {
            "wave" => CenterPolicy::FixedWaveSpeed,
            "transported" => CenterPolicy::Transported,
            s => match s.strip_prefix("prescribed:") {
                Some(v) => CenterPolicy::Prescribed(v.parse().with_context(|| format!("bad center speed {v:?}"))?),
                None => bail!(
                    "center must be wave, transported or prescribed:<speed>; got {s:?} (wave = {WAVE_CENTER_SPEED})"
                ),
            },
        })
    }
}

impl MicroParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            bail!("N must be at least 1");
        }
        if !(self.cloud_radius > 0.0 && self.a > 0.0 && self.mu > 0.0) {
            bail!("R0, a and mu must be positive");
        }
        if !(self.t_final > 0.0 && self.dt > 0.0) || self.every == 0 {
            bail!("T, dt and every must be positive");
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                bail!("delta must be nonnegative, got {d}");
            }
        }
        Ok(())
    }
}

/// Reads either a bare [`RunConfig`] or a `run.json` manifest written by an earlier run.
pub fn load<P: DeserializeOwned>(path: &Path) -> Result<RunConfig<P>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value).with_context(|| format!("config {} does not match this subcommand", path.display()))
}

/// `run.json`: config plus version stamp, enough to repeat the run.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, P> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub status: &'a str,
    pub config: &'a RunConfig<P>,
    pub outputs: Vec<String>,
}

/// Parses a lowercase enum name through its serde representation.
pub fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}
