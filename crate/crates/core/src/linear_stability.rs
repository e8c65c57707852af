//! Linearization `L[h] = J[h] + K h` of the surface model around `r ≡ 1`,
//! its characteristic flow, and a Legendre–Galerkin spectral discretization.
//!
//! `J[h](θ) = −(1/8π) ∬ sin θ̄ · N/√γ · ((5/2) h sin θ̄ − h' cos θ̄) dθ̄ dφ`
//! with `N/√γ` the bounded quotient from [`crate::kernels::desingularized_ratio`].
//! The only θ-dependent factor is `W(θ, θ̄) = ∫ N/√γ dφ`, so every routine
//! starts from a row of Simpson-weighted `W` values and contracts it with
//! samples of `h` on the θ̄ grid.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::io;
use crate::kernels::ratio_from_trig;
use crate::quadrature::{check_theta, simpson_2d, Exclusion, LegendreBasis, Normalization, PhiGrid, ThetaGrid};

pub type C64 = Complex<f64>;

/// Growth threshold `1/15` for the `W^{1,∞}` setting.
pub const GROWTH_THRESHOLD: f64 = 1.0 / 15.0;

/// Default θ̄ nodes for the inner integral of `J`.
pub const DEFAULT_INNER_THETA: usize = 401;
/// Default φ nodes for the inner integral of `J`.
pub const DEFAULT_N_PHI: usize = 400;

/// θ̄ and φ grids for the double integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadGrids {
    pub theta: ThetaGrid,
    pub phi: PhiGrid,
}

impl QuadGrids {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        Ok(Self {
            theta: ThetaGrid::new(n_theta)?,
            phi: PhiGrid::new(n_phi)?,
        })
    }

    /// 401 θ̄ nodes by 400 φ nodes.
    pub fn production() -> Self {
        Self::new(DEFAULT_INNER_THETA, DEFAULT_N_PHI).expect("static grid sizes are valid")
    }
}

/// `K(θ) = (2/15) cos θ`.
pub fn k_coefficient(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(2.0 / 15.0 * theta.cos())
}

/// Precomputed trig tables for rows of the `J` kernel.
#[derive(Debug, Clone)]
pub struct JKernel {
    theta_bar: Vec<f64>,
    sin_b: Vec<f64>,
    cos_b: Vec<f64>,
    w_b: Vec<f64>,
    sin_p: Vec<f64>,
    cos_p: Vec<f64>,
    w_p: Vec<f64>,
}

impl JKernel {
    pub fn new(grids: &QuadGrids) -> Self {
        let tb = grids.theta.nodes().to_vec();
        let ph = grids.phi.nodes();
        Self {
            sin_b: tb.iter().map(|t| t.sin()).collect(),
            cos_b: tb.iter().map(|t| t.cos()).collect(),
            w_b: grids.theta.simpson_weights(),
            sin_p: ph.iter().map(|p| p.sin()).collect(),
            cos_p: ph.iter().map(|p| p.cos()).collect(),
            w_p: grids.phi.simpson_weights(),
            theta_bar: tb,
        }
    }

    pub fn theta_bar(&self) -> &[f64] {
        &self.theta_bar
    }

    /// `w_m sin θ̄_m Σ_φ w_φ N/√γ(θ, θ̄_m, φ)`; the coincident node contributes 0.
    pub fn row(&self, theta: f64) -> Vec<f64> {
        let (st, ct) = theta.sin_cos();
        (0..self.theta_bar.len())
            .map(|m| {
                let (sb, cb) = (self.sin_b[m], self.cos_b[m]);
                let mut acc = 0.0;
                for p in 0..self.w_p.len() {
                    if let Some(v) = ratio_from_trig(st, ct, sb, cb, self.sin_p[p], self.cos_p[p]) {
                        acc += self.w_p[p] * v;
                    }
                }
                self.w_b[m] * sb * acc
            })
            .collect()
    }

    /// `(5/2) h sin θ̄ − h' cos θ̄` on the θ̄ nodes.
    fn bracket(&self, h: &[(f64, f64)]) -> Vec<f64> {
        h.iter()
            .zip(self.sin_b.iter().zip(&self.cos_b))
            .map(|(&(v, d), (&s, &c))| 2.5 * v * s - d * c)
            .collect()
    }

    fn contract(row: &[f64], bracket: &[f64]) -> f64 {
        -row.iter().zip(bracket).map(|(a, b)| a * b).sum::<f64>() / (8.0 * PI)
    }
}

/// `(1/16π) ∬ sin² θ̄ N/√γ dθ̄ dφ`, which equals `(2/15) cos θ`.
pub fn k_by_quadrature(theta: f64, grids: &QuadGrids) -> Result<f64> {
    check_theta(theta)?;
    let kernel = JKernel::new(grids);
    let row = kernel.row(theta);
    let v: f64 = row.iter().zip(&kernel.sin_b).map(|(a, s)| a * s).sum::<f64>() / (16.0 * PI);
    if !v.is_finite() {
        return Err(Error::NonFiniteSample {
            location: format!("K quadrature at theta = {theta}"),
            value: v,
        });
    }
    Ok(v)
}

/// `∬_{S²} ω₃ |e₃ − ω| dσ = ∬ cos θ̄ √(2 − 2 cos θ̄) sin θ̄ dθ̄ dφ`, exactly `−16π/15`.
pub fn sphere_integral(grids: &QuadGrids) -> Result<f64> {
    simpson_2d(
        |tb, _| tb.cos() * (2.0 - 2.0 * tb.cos()).max(0.0).sqrt() * tb.sin(),
        &grids.theta,
        &grids.phi,
        Exclusion::None,
    )
}

type PerturbationFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// A perturbation `h` together with its derivative `h'`.
#[derive(Clone)]
pub enum Perturbation {
    Coefficients {
        basis: LegendreBasis,
        coeffs: Vec<f64>,
    },
    Samples {
        grid: ThetaGrid,
        values: Vec<f64>,
        derivatives: Vec<f64>,
    },
    Function(PerturbationFn),
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Perturbation::Coefficients { basis, coeffs } => f
                .debug_struct("Coefficients")
                .field("basis", basis)
                .field("coeffs", coeffs)
                .finish(),
            Perturbation::Samples { grid, values, .. } => f
                .debug_struct("Samples")
                .field("nodes", &grid.len())
                .field("values", values)
                .finish(),
            Perturbation::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl Perturbation {
    /// `h` and `h'` given as closures.
    pub fn from_fn<F, D>(h: F, dh: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Perturbation::Function(Arc::new(move |t| (h(t), dh(t))))
    }

    pub fn zero() -> Self {
        Self::from_fn(|_| 0.0, |_| 0.0)
    }

    pub fn from_coefficients(basis: LegendreBasis, coeffs: Vec<f64>) -> Self {
        Perturbation::Coefficients { basis, coeffs }
    }

    /// Grid samples; `h'` by second-order finite differences.
    pub fn from_samples(grid: ThetaGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} samples for a {}-node grid",
                values.len(),
                grid.len()
            )));
        }
        let derivatives = fd_derivative(&values, grid.spacing());
        Ok(Perturbation::Samples {
            grid,
            values,
            derivatives,
        })
    }

    /// `(h(θ), h'(θ))`.
    pub fn eval(&self, theta: f64) -> Result<(f64, f64)> {
        check_theta(theta)?;
        match self {
            Perturbation::Coefficients { basis, coeffs } => {
                let table = basis.eval_upto(coeffs.len(), theta)?;
                Ok(coeffs
                    .iter()
                    .zip(&table)
                    .fold((0.0, 0.0), |(v, d), (c, (e, de))| (v + c * e, d + c * de)))
            }
            Perturbation::Samples {
                grid,
                values,
                derivatives,
            } => {
                let h = grid.spacing();
                Ok((cubic_interp(values, h, theta), cubic_interp(derivatives, h, theta)))
            }
            Perturbation::Function(f) => Ok(f(theta)),
        }
    }

    pub fn sample(&self, nodes: &[f64]) -> Result<Vec<(f64, f64)>> {
        nodes.iter().map(|&t| self.eval(t)).collect()
    }

    pub fn values_on(&self, grid: &ThetaGrid) -> Result<Vec<f64>> {
        Ok(self.sample(grid.nodes())?.into_iter().map(|(v, _)| v).collect())
    }

    /// `max |h|` over the grid nodes.
    pub fn sup_norm(&self, grid: &ThetaGrid) -> Result<f64> {
        Ok(self.values_on(grid)?.iter().fold(0.0f64, |a, v| a.max(v.abs())))
    }

    /// `(∫₀^π |h|^p)^{1/p}` by Simpson on the grid.
    pub fn lp_norm(&self, grid: &ThetaGrid, p: f64) -> Result<f64> {
        lp_norm(&self.values_on(grid)?, grid, p)
    }
}

/// `(∫₀^π |v|^p)^{1/p}` of grid samples.
pub fn lp_norm(values: &[f64], grid: &ThetaGrid, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("L^p norm needs p >= 1, got {p}")));
    }
    let s: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
    Ok(grid.integrate(&s)?.max(0.0).powf(1.0 / p))
}

fn fd_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    if n < 3 {
        return vec![if n == 2 { (v[1] - v[0]) / h } else { 0.0 }; n];
    }
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    d
}

/// Four-point Lagrange interpolation of uniform samples on `[0, π]`.
fn cubic_interp(v: &[f64], h: f64, x: f64) -> f64 {
    let n = v.len();
    if n < 4 {
        let s = (x / h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n.saturating_sub(2));
        let f = s - i as f64;
        return if n == 1 { v[0] } else { v[i] * (1.0 - f) + v[i + 1] * f };
    }
    let s = (x / h).clamp(0.0, (n - 1) as f64);
    let i0 = ((s.floor() as isize) - 1).clamp(0, n as isize - 4) as usize;
    let u = s - i0 as f64;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut l = 1.0;
        for b in 0..4 {
            if a != b {
                l *= (u - b as f64) / (a as f64 - b as f64);
            }
        }
        acc += l * v[i0 + a];
    }
    acc
}

/// `J[h](θ)` by tensor Simpson on `grids`.
pub fn j_apply(h: &Perturbation, theta: f64, grids: &QuadGrids) -> Result<f64> {
    check_theta(theta)?;
    let kernel = JKernel::new(grids);
    let samples = h.sample(kernel.theta_bar())?;
    let v = JKernel::contract(&kernel.row(theta), &kernel.bracket(&samples));
    if !v.is_finite() {
        return Err(Error::NonFiniteSample {
            location: format!("J at theta = {theta}"),
            value: v,
        });
    }
    Ok(v)
}

/// `L[h](θ) = J[h](θ) + K(θ) h(θ)`.
pub fn l_apply(h: &Perturbation, theta: f64, grids: &QuadGrids) -> Result<f64> {
    Ok(j_apply(h, theta, grids)? + k_coefficient(theta)? * h.eval(theta)?.0)
}

/// `Θ(t, s, θ) = 2 arctan(tan(θ/2) e^{−(t−s)/15})`, the flow of `θ' = −sin θ / 15`.
pub fn characteristic_flow(t: f64, s: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if theta <= 0.0 {
        return Ok(0.0);
    }
    if theta >= PI {
        return Ok(PI);
    }
    Ok(2.0 * ((0.5 * theta).tan() * (-(t - s) / 15.0).exp()).atan())
}

/// Resolution and basis choices for [`assemble_galerkin_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GalerkinConfig {
    pub k: usize,
    /// Outer projection nodes (rounded up to an even panel count).
    pub n_theta: usize,
    pub n_phi: usize,
    pub inner_theta: usize,
    pub normalization: Normalization,
    #[serde(skip)]
    pub exec: Execution,
}

impl GalerkinConfig {
    pub fn new(k: usize, n_theta: usize) -> Self {
        Self {
            k,
            n_theta,
            n_phi: DEFAULT_N_PHI,
            inner_theta: DEFAULT_INNER_THETA,
            normalization: Normalization::Reference,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinMatrix {
    pub config: GalerkinConfig,
    pub entries: DMatrix<f64>,
}

impl GalerkinMatrix {
    pub fn size(&self) -> usize {
        self.config.k
    }
}

/// `A_ij = ∫₀^π (L e_j) e_i dθ` with the reference-normalized basis.
pub fn assemble_galerkin(k: usize, n_theta: usize, n_phi: usize) -> Result<GalerkinMatrix> {
    assemble_galerkin_with(GalerkinConfig {
        n_phi,
        ..GalerkinConfig::new(k, n_theta)
    })
}

pub fn assemble_galerkin_with(config: GalerkinConfig) -> Result<GalerkinMatrix> {
    let k = config.k;
    if k == 0 {
        return Err(Error::invalid("basis size must be at least 1"));
    }
    let outer = ThetaGrid::new(config.n_theta)?;
    let grids = QuadGrids::new(config.inner_theta, config.n_phi)?;
    let kernel = JKernel::new(&grids);
    let basis = LegendreBasis::new(config.normalization);

    // basis brackets on the inner grid, one column per basis function
    let inner_tables: Vec<Vec<(f64, f64)>> = kernel
        .theta_bar()
        .iter()
        .map(|&t| basis.eval_upto(k, t))
        .collect::<Result<_>>()?;
    let brackets: Vec<Vec<f64>> = (0..k)
        .map(|j| kernel.bracket(&inner_tables.iter().map(|row| row[j]).collect::<Vec<_>>()))
        .collect();

    // (L e_j)(θ_o) for every outer node
    let l_rows: Vec<Vec<f64>> = config.exec.try_map(outer.len(), |o| -> Result<Vec<f64>> {
        let theta = outer.nodes()[o];
        let row = kernel.row(theta);
        let e = basis.eval_upto(k, theta)?;
        let kt = 2.0 / 15.0 * theta.cos();
        Ok((0..k)
            .map(|j| JKernel::contract(&row, &brackets[j]) + kt * e[j].0)
            .collect())
    })?;

    let w = outer.simpson_weights();
    let mut a = DMatrix::<f64>::zeros(k, k);
    for (o, &theta) in outer.nodes().iter().enumerate() {
        let e = basis.eval_upto(k, theta)?;
        for i in 0..k {
            let wi = w[o] * e[i].0;
            for j in 0..k {
                a[(i, j)] += wi * l_rows[o][j];
            }
        }
    }
    for i in 0..k {
        for j in 0..k {
            let v = a[(i, j)];
            if !v.is_finite() {
                return Err(Error::Galerkin {
                    i,
                    j,
                    source: Box::new(Error::NonFiniteSample {
                        location: format!("Galerkin entry ({i}, {j})"),
                        value: v,
                    }),
                });
            }
        }
    }
    Ok(GalerkinMatrix { config, entries: a })
}

/// Eigenvalues sorted by descending real part with unit-norm eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<C64>,
    /// Basis coefficients of each eigenfunction.
    pub eigenvectors: Vec<Vec<C64>>,
    pub max_real: f64,
    pub threshold: f64,
    pub normalization: Normalization,
}

impl SpectrumReport {
    /// Builds a report from precomputed eigenpairs; sorts them.
    pub fn from_parts(
        eigenvalues: Vec<C64>,
        eigenvectors: Vec<Vec<C64>>,
        normalization: Normalization,
    ) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.len() != eigenvectors.len() {
            return Err(Error::invalid("need one eigenvector per eigenvalue"));
        }
        let mut pairs: Vec<(C64, Vec<C64>)> = eigenvalues.into_iter().zip(eigenvectors).collect();
        pairs.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(b.0.im.total_cmp(&a.0.im)));
        pair_conjugates(&mut pairs);
        let max_real = pairs[0].0.re;
        let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
        Ok(Self {
            eigenvalues,
            eigenvectors,
            max_real,
            threshold: GROWTH_THRESHOLD,
            normalization,
        })
    }

    /// `1/(15p)`.
    pub fn threshold_p(p: f64) -> f64 {
        1.0 / (15.0 * p)
    }

    /// Hausdorff distance between the spectrum and its negation.
    pub fn symmetric_residual(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| {
                self.eigenvalues
                    .iter()
                    .map(|m| (l + m).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    /// Eigenfunction `index` as `(h, h')` at `θ`.
    pub fn eigenfunction(&self, index: usize, theta: f64) -> Result<(C64, C64)> {
        let c = self
            .eigenvectors
            .get(index)
            .ok_or_else(|| Error::invalid(format!("no eigenpair {index}")))?;
        let table = LegendreBasis::new(self.normalization).eval_upto(c.len(), theta)?;
        Ok(c.iter()
            .zip(&table)
            .fold((C64::new(0.0, 0.0), C64::new(0.0, 0.0)), |(v, d), (ck, (e, de))| {
                (v + ck * *e, d + ck * *de)
            }))
    }

    /// Real part of the dominant eigenfunction as a perturbation.
    pub fn dominant_perturbation(&self) -> Perturbation {
        let coeffs = self.eigenvectors[0].iter().map(|c| c.re).collect();
        Perturbation::from_coefficients(LegendreBasis::new(self.normalization), coeffs)
    }
}

fn pair_conjugates(pairs: &mut [(C64, Vec<C64>)]) {
    let mut i = 0;
    while i + 1 < pairs.len() {
        let l = pairs[i].0;
        if l.im > 0.0 {
            let target = l.conj();
            let best = (i + 1..pairs.len())
                .min_by(|&a, &b| (pairs[a].0 - target).norm().total_cmp(&(pairs[b].0 - target).norm()));
            if let Some(b) = best {
                pairs.swap(i + 1, b);
                i += 2;
                continue;
            }
        }
        i += 1;
    }
}

/// Dense eigendecomposition of the Galerkin matrix.
pub fn solve_spectrum(a: &GalerkinMatrix) -> Result<SpectrumReport> {
    solve_spectrum_dumping(a, None)
}

/// As [`solve_spectrum`]; on failure the matrix is written to `dump_dir/galerkin_matrix.csv`.
pub fn solve_spectrum_dumping(a: &GalerkinMatrix, dump_dir: Option<&Path>) -> Result<SpectrumReport> {
    let m = &a.entries;
    let n = m.nrows();
    let fail = |dump_dir: Option<&Path>| -> Error {
        let dump = dump_dir.and_then(|d| dump_matrix(m, d).ok());
        Error::EigenSolver { dim: n, dump }
    };
    let evd = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)])
        .eigen()
        .map_err(|_| fail(dump_dir))?;
    let (s, u) = (evd.S(), evd.U());
    let values: Vec<C64> = (0..n).map(|k| C64::new(s[k].re, s[k].im)).collect();
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(fail(dump_dir));
    }
    let mass = a.config.normalization.mass();
    let basis = LegendreBasis::new(a.config.normalization);
    let at_pi: Vec<f64> = basis.eval_upto(n, PI)?.into_iter().map(|(e, _)| e).collect();
    let vectors = (0..n)
        .map(|k| {
            let v = DVector::from_iterator(n, (0..n).map(|i| C64::new(u[(i, k)].re, u[(i, k)].im)));
            normalize_eigenvector(v, mass, &at_pi)
        })
        .collect();
    SpectrumReport::from_parts(values, vectors, a.config.normalization)
}

fn dump_matrix(m: &DMatrix<f64>, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("galerkin_matrix.csv");
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows = (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect::<Vec<_>>());
    io::write_csv(&path, &header, rows)?;
    Ok(path)
}

/// Unit `L²(0, π)` norm, phase chosen so `h(π)` is real and positive.
fn normalize_eigenvector(v: DVector<C64>, mass: f64, at_pi: &[f64]) -> Vec<C64> {
    let norm = (v.norm_squared() * mass).sqrt();
    let mut v: Vec<C64> = v.iter().map(|c| c / norm).collect();
    let h_pi: C64 = v.iter().zip(at_pi).map(|(c, e)| c * *e).sum();
    let anchor = if h_pi.norm() > 1e-10 {
        h_pi
    } else {
        // fall back to the largest coefficient
        *v.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).expect("nonempty")
    };
    let phase = anchor.conj() / anchor.norm();
    for c in &mut v {
        *c *= phase;
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstabilityEvidence {
    pub unstable: bool,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub p: f64,
    pub threshold: f64,
    pub exceeds_one_fifteenth: bool,
    /// `max_real > 0` with a nonzero endpoint value.
    pub sup_norm_unstable: bool,
    pub endpoint_0: f64,
    pub endpoint_pi: f64,
}

/// `max_real > 1/(15p)` together with the dominant eigenfunction's endpoint values.
pub fn instability_certificate(report: &SpectrumReport, p: f64) -> Result<InstabilityEvidence> {
    if !(p > 2.0) {
        return Err(Error::invalid(format!("certificate needs p > 2, got {p}")));
    }
    let lambda = report.eigenvalues[0];
    let threshold = SpectrumReport::threshold_p(p);
    let endpoint_0 = report.eigenfunction(0, 0.0)?.0.norm();
    let endpoint_pi = report.eigenfunction(0, PI)?.0.norm();
    Ok(InstabilityEvidence {
        unstable: report.max_real > threshold,
        lambda_re: lambda.re,
        lambda_im: lambda.im,
        p,
        threshold,
        exceeds_one_fifteenth: report.max_real > GROWTH_THRESHOLD,
        sup_norm_unstable: report.max_real > 0.0 && endpoint_pi.max(endpoint_0) > 0.0,
        endpoint_0,
        endpoint_pi,
    })
}

/// Grid discretization of `∂_t h − (sin θ / 15) ∂_θ h = L[h]`.
///
/// `J` uses the evolution grid itself as θ̄ grid with `h'` by finite
/// differences; transport is semi-Lagrangian along [`characteristic_flow`].
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    grid: ThetaGrid,
    kernel: Vec<Vec<f64>>,
    sin: Vec<f64>,
    cos: Vec<f64>,
    norm_bound: f64,
}

impl LinearizedOperator {
    pub fn new(n_theta: usize, n_phi: usize, exec: Execution) -> Result<Self> {
        let grids = QuadGrids::new(n_theta, n_phi)?;
        let kernel_tables = JKernel::new(&grids);
        let nodes = grids.theta.nodes().to_vec();
        let kernel: Vec<Vec<f64>> = exec.map(nodes.len(), |i| kernel_tables.row(nodes[i]));
        let h = grids.theta.spacing();
        let row_sum = kernel
            .iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            / (8.0 * PI);
        Ok(Self {
            sin: nodes.iter().map(|t| t.sin()).collect(),
            cos: nodes.iter().map(|t| t.cos()).collect(),
            grid: grids.theta,
            kernel,
            norm_bound: row_sum * (2.5 + 2.0 / h) + 2.0 / 15.0,
        })
    }

    pub fn grid(&self) -> &ThetaGrid {
        &self.grid
    }

    /// `L[h]` at the grid nodes for grid samples `h`.
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let dh = fd_derivative(h, self.grid.spacing());
        let bracket: Vec<f64> = (0..h.len())
            .map(|m| 2.5 * h[m] * self.sin[m] - dh[m] * self.cos[m])
            .collect();
        self.kernel
            .iter()
            .enumerate()
            .map(|(i, row)| JKernel::contract(row, &bracket) + 2.0 / 15.0 * self.cos[i] * h[i])
            .collect()
    }

    fn at_feet(&self, v: &[f64], feet: &[f64]) -> Vec<f64> {
        let h = self.grid.spacing();
        feet.iter().map(|&x| cubic_interp(v, h, x)).collect()
    }

    /// Heun step along characteristics, trapezoidal in the `L` term.
    fn step(&self, h: &[f64], feet: &[f64], dt: f64) -> Vec<f64> {
        let lh = self.apply(h);
        let h_foot = self.at_feet(h, feet);
        let lh_foot = self.at_feet(&lh, feet);
        let predictor: Vec<f64> = h_foot.iter().zip(&lh_foot).map(|(a, b)| a + dt * b).collect();
        let l_pred = self.apply(&predictor);
        h_foot
            .iter()
            .zip(lh_foot.iter().zip(&l_pred))
            .map(|(a, (b, c))| a + 0.5 * dt * (b + c))
            .collect()
    }

    /// Samples of `h(t)` at each requested time (ascending, nonnegative).
    pub fn evolve_samples(&self, h0: &[f64], times: &[f64], dt: f64) -> Result<Vec<Vec<f64>>> {
        if h0.len() != self.grid.len() {
            return Err(Error::invalid("initial samples do not match the grid"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        if dt * self.norm_bound > 2.0 {
            return Err(Error::invalid(format!(
                "time step {dt} too large for the explicit integral term (bound {:.3})",
                2.0 / self.norm_bound
            )));
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::invalid("times must be nonnegative and ascending"));
        }
        let feet: Vec<f64> = self
            .grid
            .nodes()
            .iter()
            .map(|&t| characteristic_flow(-dt, 0.0, t))
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(times.len());
        let mut h = h0.to_vec();
        let mut now = 0.0;
        for &target in times {
            let steps = ((target - now) / dt).round() as usize;
            for _ in 0..steps {
                h = self.step(&h, &feet, dt);
                now += dt;
                if let Some(index) = h.iter().position(|v| !v.is_finite()) {
                    return Err(Error::BlowUp { index, time: now });
                }
            }
            out.push(h.clone());
        }
        Ok(out)
    }
}

/// Linearized solution `h(t, ·)` on `grids.theta` with step `dt = 0.01`.
pub fn linearized_evolve(h0: &Perturbation, t: f64, grids: &QuadGrids) -> Result<Perturbation> {
    linearized_evolve_dt(h0, t, 0.01, grids)
}

pub fn linearized_evolve_dt(h0: &Perturbation, t: f64, dt: f64, grids: &QuadGrids) -> Result<Perturbation> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
    }
    let op = LinearizedOperator::new(grids.theta.len(), grids.phi.len(), Execution::default())?;
    let h = h0.values_on(op.grid())?;
    let mut out = op.evolve_samples(&h, &[t], dt)?;
    Perturbation::from_samples(op.grid().clone(), out.pop().expect("one time requested"))
}
