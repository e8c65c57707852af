//! Composite Simpson rules, angular grids and the Legendre basis on `[0, π]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::SpherePoint;

/// Largest Legendre degree accepted by [`LegendreBasis::eval`].
pub const K_MAX: usize = 512;

/// Uniform Simpson grid on `[a, b]` with an even panel count.
#[derive(Debug, Clone, PartialEq)]
struct UniformGrid {
    nodes: Vec<f64>,
    spacing: f64,
}

impl UniformGrid {
    fn new(requested_nodes: usize, a: f64, b: f64, label: &str) -> Result<Self> {
        if requested_nodes < 2 {
            return Err(Error::invalid(format!(
                "{label} grid needs at least 2 nodes, got {requested_nodes}"
            )));
        }
        let mut panels = requested_nodes - 1;
        if panels % 2 == 1 {
            panels += 1;
            log::info!(
                "{label} grid: {requested_nodes} nodes give an odd panel count, using {} nodes",
                panels + 1
            );
        }
        let spacing = (b - a) / panels as f64;
        let mut nodes: Vec<f64> = (0..=panels).map(|i| a + i as f64 * spacing).collect();
        nodes[panels] = b;
        Ok(Self { nodes, spacing })
    }

    fn weights(&self) -> Vec<f64> {
        simpson_weights(self.nodes.len(), self.spacing)
    }
}

/// Nodes on `[0, π]` including both endpoints.
///
/// The node count is bumped by one when the request would give an odd
/// number of Simpson panels, so `ThetaGrid::new(100)` has 101 nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    requested: usize,
    inner: UniformGrid,
}

impl ThetaGrid {
    pub fn new(n_theta: usize) -> Result<Self> {
        Ok(Self {
            requested: n_theta,
            inner: UniformGrid::new(n_theta, 0.0, PI, "theta")?,
        })
    }

    /// Node count originally asked for (before the even-panel adjustment).
    pub fn requested(&self) -> usize {
        self.requested
    }

    pub fn len(&self) -> usize {
        self.inner.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn panels(&self) -> usize {
        self.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.inner.nodes
    }

    pub fn spacing(&self) -> f64 {
        self.inner.spacing
    }

    /// Cell midpoints `(θ_i + θ_{i+1}) / 2`.
    pub fn midpoints(&self) -> Vec<f64> {
        self.inner.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn simpson_weights(&self) -> Vec<f64> {
        self.inner.weights()
    }

    /// Simpson integral of nodal samples.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.len() {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                self.len(),
                samples.len()
            )));
        }
        simpson_samples(samples, self.spacing())
    }
}

/// Nodes on `[0, 2π]`, endpoints included, uniform spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiGrid {
    requested: usize,
    inner: UniformGrid,
}

impl PhiGrid {
    pub fn new(n_phi: usize) -> Result<Self> {
        Ok(Self {
            requested: n_phi,
            inner: UniformGrid::new(n_phi, 0.0, 2.0 * PI, "phi")?,
        })
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    pub fn len(&self) -> usize {
        self.inner.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.inner.nodes
    }

    pub fn spacing(&self) -> f64 {
        self.inner.spacing
    }

    pub fn simpson_weights(&self) -> Vec<f64> {
        self.inner.weights()
    }
}

/// Composite Simpson weights for `n_nodes` (odd) equally spaced samples.
pub fn simpson_weights(n_nodes: usize, h: f64) -> Vec<f64> {
    debug_assert!(n_nodes % 2 == 1 && n_nodes >= 3);
    let mut w = vec![0.0; n_nodes];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = if i == 0 || i == n_nodes - 1 {
            h / 3.0
        } else if i % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        };
    }
    w
}

/// Composite Simpson value of equally spaced samples with spacing `h`.
pub fn simpson_samples(values: &[f64], h: f64) -> Result<f64> {
    let n = values.len();
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::OddPanels(n.saturating_sub(1)));
    }
    let mut acc = values[0] + values[n - 1];
    for (i, &v) in values.iter().enumerate().take(n - 1).skip(1) {
        if !v.is_finite() {
            return Err(Error::NonFiniteSample {
                location: format!("sample {i}"),
                value: v,
            });
        }
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    if !acc.is_finite() {
        return Err(Error::NonFiniteSample {
            location: "endpoint".into(),
            value: acc,
        });
    }
    Ok(acc * h / 3.0)
}

/// Composite Simpson approximation of `∫_a^b f` with `n` panels.
pub fn simpson_1d<F>(f: F, a: f64, b: f64, n: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if n == 0 || n % 2 == 1 {
        return Err(Error::OddPanels(n));
    }
    if !(a < b) {
        return Err(Error::invalid(format!("need a < b, got [{a}, {b}]")));
    }
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let x = if i == n { b } else { a + i as f64 * h };
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample {
                location: format!("x = {x}"),
                value: v,
            });
        }
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * v;
    }
    Ok(acc * h / 3.0)
}

/// Treatment of the node where a spherical integrand is singular.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Exclusion {
    /// Every sample must be finite.
    #[default]
    None,
    /// Samples whose sphere point `e(θ̄, φ)` coincides with the pole are set to 0.
    Pole(SpherePoint),
}

impl Exclusion {
    fn excludes(&self, theta_bar: f64, phi: f64) -> bool {
        match self {
            Exclusion::None => false,
            Exclusion::Pole(p) => {
                let a = SpherePoint::unit_vector(theta_bar, phi);
                let b = p.unit_vector_of();
                (a - b).norm() < 1e-12
            }
        }
    }
}

/// Tensor-product Simpson value of `∬ f(θ̄, φ) dθ̄ dφ` over `[0, π] × [0, 2π]`.
pub fn simpson_2d<F>(f: F, theta: &ThetaGrid, phi: &PhiGrid, exclusion: Exclusion) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let wt = theta.simpson_weights();
    let wp = phi.simpson_weights();
    let mut total = 0.0;
    for (&tb, &w1) in theta.nodes().iter().zip(&wt) {
        let mut row = 0.0;
        for (&ph, &w2) in phi.nodes().iter().zip(&wp) {
            if exclusion.excludes(tb, ph) {
                continue;
            }
            let v = f(tb, ph);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample {
                    location: format!("(theta_bar, phi) = ({tb}, {ph})"),
                    value: v,
                });
            }
            row += w2 * v;
        }
        total += w1 * row;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveEstimate {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Recursive adaptive Simpson with Richardson correction. Diagnostic use only.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<AdaptiveEstimate>
where
    F: Fn(f64) -> f64,
{
    if !(a < b) || !(tol > 0.0) {
        return Err(Error::invalid("adaptive_simpson needs a < b and tol > 0"));
    }
    let mut evals = 0usize;
    let mut eval = |x: f64| -> Result<f64> {
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteSample {
                location: format!("x = {x}"),
                value: v,
            })
        }
    };
    let fa = eval(a)?;
    let fb = eval(b)?;
    let m = 0.5 * (a + b);
    let fm = eval(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut err = 0.0;
    let value = refine(&mut eval, a, b, fa, fm, fb, whole, tol, max_depth, &mut err)?;
    Ok(AdaptiveEstimate {
        value,
        error_estimate: err,
        evaluations: evals,
    })
}

#[allow(clippy::too_many_arguments)]
fn refine<E>(
    eval: &mut E,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err: &mut f64,
) -> Result<f64>
where
    E: FnMut(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(lm)?;
    let frm = eval(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        *err += delta.abs() / 15.0;
        return Ok(left + right + delta / 15.0);
    }
    Ok(refine(eval, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, err)?
        + refine(eval, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, err)?)
}

/// How the Legendre polynomials are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Unit norm in `L²(0, π)`: `e_k = √((2k+1)/π) P_k(2θ/π − 1)`.
    #[default]
    Interval,
    /// Unit norm on the reference interval `[−1, 1]`:
    /// `e_k = √((2k+1)/2) P_k(2θ/π − 1)`, so `‖e_k‖²_{L²(0,π)} = π/2`.
    Reference,
}

impl Normalization {
    /// Squared `L²(0, π)` norm of each basis function.
    pub fn mass(self) -> f64 {
        match self {
            Normalization::Interval => 1.0,
            Normalization::Reference => PI / 2.0,
        }
    }

    fn scale(self, k: usize) -> f64 {
        let num = (2 * k + 1) as f64;
        match self {
            Normalization::Interval => (num / PI).sqrt(),
            Normalization::Reference => (num / 2.0).sqrt(),
        }
    }
}

/// Legendre polynomials shifted from `[−1, 1]` to `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LegendreBasis {
    pub normalization: Normalization,
}

impl LegendreBasis {
    pub fn new(normalization: Normalization) -> Self {
        Self { normalization }
    }

    /// `(e_k(θ), e_k'(θ))`.
    pub fn eval(&self, k: usize, theta: f64) -> Result<(f64, f64)> {
        if k > K_MAX {
            return Err(Error::invalid(format!("basis index {k} exceeds {K_MAX}")));
        }
        Ok(self.eval_upto(k + 1, theta)?[k])
    }

    /// Values and derivatives of `e_0, …, e_{count−1}` at `θ`.
    pub fn eval_upto(&self, count: usize, theta: f64) -> Result<Vec<(f64, f64)>> {
        check_theta(theta)?;
        if count > K_MAX + 1 {
            return Err(Error::invalid(format!("basis size {count} exceeds {}", K_MAX + 1)));
        }
        let s = (2.0 * theta / PI - 1.0).clamp(-1.0, 1.0);
        let dsdt = 2.0 / PI;
        let mut out = Vec::with_capacity(count);
        // P_n and P'_n via P'_{n+1} = P'_{n-1} + (2n+1) P_n, exact at s = ±1.
        let (mut p_prev, mut p) = (0.0, 1.0);
        let (mut dp_prev, mut dp) = (0.0, 0.0);
        for n in 0..count {
            let c = self.normalization.scale(n);
            out.push((c * p, c * dp * dsdt));
            let nf = n as f64;
            let p_next = ((2.0 * nf + 1.0) * s * p - nf * p_prev) / (nf + 1.0);
            let dp_next = dp_prev + (2.0 * nf + 1.0) * p;
            p_prev = p;
            p = p_next;
            dp_prev = dp;
            dp = dp_next;
        }
        Ok(out)
    }
}

/// `L²(0, π)`-orthonormal basis value and derivative.
pub fn basis_eval(k: usize, theta: f64) -> Result<(f64, f64)> {
    LegendreBasis::new(Normalization::Interval).eval(k, theta)
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    const SLACK: f64 = 1e-12;
    if !(-SLACK..=PI + SLACK).contains(&theta) {
        return Err(Error::AngleOutOfRange {
            value: theta,
            lo: 0.0,
            hi: PI,
        });
    }
    Ok(())
}

/// Gram matrix `⟨e_i, e_j⟩` under Simpson with `panels` panels (row-major).
pub fn gram_matrix(basis: &LegendreBasis, size: usize, panels: usize) -> Result<Vec<Vec<f64>>> {
    let grid = ThetaGrid::new(panels + 1)?;
    let w = grid.simpson_weights();
    let table: Vec<Vec<(f64, f64)>> = grid
        .nodes()
        .iter()
        .map(|&t| basis.eval_upto(size, t))
        .collect::<Result<_>>()?;
    let mut g = vec![vec![0.0; size]; size];
    for (row, wi) in table.iter().zip(&w) {
        for i in 0..size {
            for j in 0..size {
                g[i][j] += wi * row[i].0 * row[j].0;
            }
        }
    }
    Ok(g)
}

/// `∫_{S²} dσ(ω) / |ω − e(θ, 0)|^α` with the singular node excluded.
///
/// The sphere is parametrized in polar coordinates `(t, ψ)` around the
/// singular point with `t = u²`, so `dσ = 2u sin(u²) du dψ` and the integrand
/// stays bounded near `u = 0` for `α ≤ 3/2`. Finite for `α < 2`; grows without
/// bound under refinement at `α = 2`.
pub fn sphere_singular_integral(theta: f64, alpha: f64, n_theta: usize, n_phi: usize) -> Result<f64> {
    check_theta(theta)?;
    let tg = ThetaGrid::new(n_theta)?;
    let pg = PhiGrid::new(n_phi)?;
    let p = SpherePoint::unit_vector(theta, 0.0);
    let a = SpherePoint::unit_vector(theta + PI / 2.0, 0.0);
    let b = p.cross(&a);
    let scale = PI.sqrt() / PI;
    let wu = tg.simpson_weights();
    let wp = pg.simpson_weights();
    let mut total = 0.0;
    for (&node, &w1) in tg.nodes().iter().zip(&wu).skip(1) {
        let u = node * scale;
        let t = u * u;
        let (st, ct) = t.sin_cos();
        let mut row = 0.0;
        for (&psi, &w2) in pg.nodes().iter().zip(&wp) {
            let w = p * ct + (a * psi.cos() + b * psi.sin()) * st;
            let d = (w - p).norm();
            let v = 2.0 * u * st / d.powf(alpha);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample {
                    location: format!("(u, psi) = ({u}, {psi})"),
                    value: v,
                });
            }
            row += w2 * v;
        }
        total += w1 * scale * row;
    }
    Ok(total)
}
