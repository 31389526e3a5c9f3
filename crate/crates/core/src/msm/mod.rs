//! Extended marginal structural model `m(a, t, beta) = mu + t sum_j beta_j phi_j(a)`
//! fit to an effect surface near `t = 0` and extrapolated to `t = 1`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::data::{Dataset, Support};
use crate::error::{Error, Result};
use crate::estimators::{eif_rows, EstimatorOptions};
use crate::grid::TGrid;
use crate::linalg::{symmetric_eigenvalues, Cholesky, Matrix};
use crate::nuisance::Nuisances;
use crate::paths::{Family, PathSpec};
use crate::quadrature::LegendreRule;
use crate::stats;

/// Largest accepted condition number of the Gram matrix.
pub const MAX_CONDITION: f64 = 1e10;
pub const DEFAULT_A_NODES: usize = 11;
pub const DEFAULT_S_NODES: usize = 21;
/// Relative tolerance for negative eigenvalues of a symmetrized covariance.
pub const PSD_TOL: f64 = 1e-9;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Basis functions of the exposure.
#[derive(Clone)]
pub enum Basis {
    /// `1, z, ..., z^degree` with `z` the exposure mapped affinely onto [0, 1].
    Poly(usize),
    /// Named functions of the raw exposure.
    Custom(Vec<(String, ScalarFn)>),
}

impl Basis {
    pub fn len(&self) -> usize {
        match self {
            Basis::Poly(d) => d + 1,
            Basis::Custom(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn describe(&self) -> String {
        match self {
            Basis::Poly(d) => format!("poly{d}"),
            Basis::Custom(f) => {
                let names: Vec<&str> = f.iter().map(|(n, _)| n.as_str()).collect();
                names.join("+")
            }
        }
    }

    /// Parses `polyK` for K in 0..=8.
    pub fn parse(s: &str) -> Result<Self> {
        s.strip_prefix("poly")
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|&d| d <= 8)
            .map(Basis::Poly)
            .ok_or_else(|| Error::arg(format!("unknown basis `{s}` (expected poly0..poly8)")))
    }
}

impl fmt::Debug for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Basis, weight `h(a) >= 0`, centre `mu_hat` and exposure support.
#[derive(Clone)]
pub struct MsmModel {
    pub basis: Basis,
    pub weight: ScalarFn,
    pub mu_hat: f64,
    pub support: Support,
}

impl fmt::Debug for MsmModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MsmModel")
            .field("basis", &self.basis)
            .field("mu_hat", &self.mu_hat)
            .field("support", &self.support)
            .finish()
    }
}

impl MsmModel {
    /// Model with `h = 1`.
    pub fn new(basis: Basis, support: Support, mu_hat: f64) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::arg("the basis needs at least one function"));
        }
        if !mu_hat.is_finite() {
            return Err(Error::arg("mu_hat must be finite"));
        }
        Ok(Self { basis, weight: Arc::new(|_| 1.0), mu_hat, support })
    }

    pub fn with_weight<H: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, h: H) -> Self {
        self.weight = Arc::new(h);
        self
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn eval_basis(&self, a: f64) -> Vec<f64> {
        match &self.basis {
            Basis::Poly(d) => {
                let z = self.support.standardize(a);
                let mut out = Vec::with_capacity(d + 1);
                let mut p = 1.0;
                for _ in 0..=*d {
                    out.push(p);
                    p *= z;
                }
                out
            }
            Basis::Custom(f) => f.iter().map(|(_, g)| g(a)).collect(),
        }
    }
}

/// Gauss-Legendre nodes in `a` (weights in standardized units, summing to one) and in
/// `s` on `[0, t_cut]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceNodes {
    pub t_cut: f64,
    pub a: Vec<f64>,
    pub wa: Vec<f64>,
    pub s: Vec<f64>,
    pub ws: Vec<f64>,
}

impl SurfaceNodes {
    pub fn new(support: Support, t_cut: f64, na: usize, ns: usize) -> Result<Self> {
        if !(t_cut > 0.0) {
            return Err(Error::arg("t_cut must be positive"));
        }
        if t_cut >= 1.0 {
            return Err(Error::ForbiddenEndpoint { t: t_cut });
        }
        if na == 0 || ns == 0 {
            return Err(Error::arg("surface grids need at least one node"));
        }
        let (ra, rs) = (LegendreRule::new(na), LegendreRule::new(ns));
        let a = ra.nodes().iter().map(|&x| support.unstandardize(0.5 * (x + 1.0))).collect();
        let wa = ra.weights().iter().map(|&w| 0.5 * w).collect();
        let s = rs.nodes().iter().map(|&x| 0.5 * t_cut * (x + 1.0)).collect();
        let ws = rs.weights().iter().map(|&w| 0.5 * t_cut * w).collect();
        Ok(Self { t_cut, a, wa, s, ws })
    }

    pub fn default_for(support: Support, t_cut: f64) -> Result<Self> {
        Self::new(support, t_cut, DEFAULT_A_NODES, DEFAULT_S_NODES)
    }

    /// Number of `(a, s)` points; values are stored a-major.
    pub fn len(&self) -> usize {
        self.a.len() * self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Evaluates `surface(a, s)` on the grid, a-major.
    pub fn tabulate<F: Fn(f64, f64) -> f64>(&self, surface: F) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for &a in &self.a {
            for &s in &self.s {
                out.push(surface(a, s));
            }
        }
        out
    }
}

/// Gram matrix `integral phi phi^T h da` with its Cholesky factor.
fn gram(model: &MsmModel, nodes: &SurfaceNodes) -> Result<(Matrix, Cholesky)> {
    let k = model.k();
    let mut g = Matrix::zeros(k);
    for (&a, &wa) in nodes.a.iter().zip(&nodes.wa) {
        let h = (model.weight)(a);
        if !(h >= 0.0) || !h.is_finite() {
            return Err(Error::arg(format!("weight h({a}) = {h} must be finite and nonnegative")));
        }
        let phi = model.eval_basis(a);
        for i in 0..k {
            for j in 0..k {
                g[(i, j)] += wa * h * phi[i] * phi[j];
            }
        }
    }
    let eig = symmetric_eigenvalues(&g);
    let (lo, hi) = (eig[0], eig[k - 1]);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            condition,
            diagnosis: format!(
                "basis {} is nearly collinear under the weight on [{}, {}]; drop terms or change h",
                model.basis.describe(),
                model.support.lo(),
                model.support.hi()
            ),
        });
    }
    let chol = Cholesky::new(&g, 0.0).ok_or_else(|| Error::Singular("Gram matrix".into()))?;
    Ok((g, chol))
}

/// Rows `w_j(a, s) = w_a w_s s h(a) phi_j(a)`, each of length `nodes.len()`.
fn projection_weights(model: &MsmModel, nodes: &SurfaceNodes) -> Vec<Vec<f64>> {
    let k = model.k();
    let mut w = vec![Vec::with_capacity(nodes.len()); k];
    for (&a, &wa) in nodes.a.iter().zip(&nodes.wa) {
        let h = (model.weight)(a);
        let phi = model.eval_basis(a);
        for (&s, &ws) in nodes.s.iter().zip(&nodes.ws) {
            for j in 0..k {
                w[j].push(wa * ws * s * h * phi[j]);
            }
        }
    }
    w
}

/// Fitted model at one cutoff.
#[derive(Debug, Clone)]
pub struct MsmFit {
    pub model: MsmModel,
    pub t_cut: f64,
    pub beta_t: Vec<f64>,
    /// Asymptotic covariance of `beta_t`, when a covariance was supplied.
    pub v_t: Option<Matrix>,
}

impl MsmFit {
    pub fn basis(&self) -> String {
        self.model.basis.describe()
    }

    /// `m(a*, 1, beta_t) = mu_hat + sum_j beta_j phi_j(a*)`.
    pub fn psi_star(&self, a_star: f64) -> Result<f64> {
        extrapolate(self, a_star)
    }

    pub fn trace_vt(&self) -> Option<f64> {
        self.v_t.as_ref().map(Matrix::trace)
    }
}

/// Closed-form minimizer `beta_t = (3 / t^3) G^{-1} nu_t` from tabulated surface values
/// (a-major on `nodes`).
pub fn fit_beta_on(model: &MsmModel, nodes: &SurfaceNodes, values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != nodes.len() {
        return Err(Error::Shape(format!("{} surface values for {} nodes", values.len(), nodes.len())));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i, column: "surface".into() });
    }
    let (_, chol) = gram(model, nodes)?;
    let w = projection_weights(model, nodes);
    let centered: Vec<f64> = values.iter().map(|v| v - model.mu_hat).collect();
    let nu: Vec<f64> = w.iter().map(|wj| stats::sum(&dot_terms(wj, &centered))).collect();
    let scale = 3.0 / (nodes.t_cut * nodes.t_cut * nodes.t_cut);
    Ok(chol.solve(&nu).into_iter().map(|b| scale * b).collect())
}

fn dot_terms(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// `fit_beta_on` with the default node counts and a surface closure `(a, s) -> psi`.
pub fn fit_beta<F: Fn(f64, f64) -> f64>(surface: F, model: &MsmModel, t_cut: f64) -> Result<Vec<f64>> {
    let nodes = SurfaceNodes::default_for(model.support, t_cut)?;
    fit_beta_on(model, &nodes, &nodes.tabulate(surface))
}

/// `mu_hat + sum_j beta_j phi_j(a*)`.
pub fn extrapolate(fit: &MsmFit, a_star: f64) -> Result<f64> {
    let s = fit.model.support;
    if !s.contains(a_star) {
        return Err(Error::arg(format!("a* = {a_star} lies outside the support [{}, {}]", s.lo(), s.hi())));
    }
    let phi = fit.model.eval_basis(a_star);
    Ok(fit.model.mu_hat + stats::sum(&dot_terms(&fit.beta_t, &phi)))
}

fn sandwich(model: &MsmModel, nodes: &SurfaceNodes, mut c: Matrix) -> Result<Matrix> {
    c.symmetrize();
    check_psd(&c)?;
    let (_, chol) = gram(model, nodes)?;
    let ginv = chol.inverse();
    let t3 = nodes.t_cut * nodes.t_cut * nodes.t_cut;
    let mut v = ginv.mul(&c).mul(&ginv);
    let scale = 9.0 / (t3 * t3);
    let k = v.dim();
    for i in 0..k {
        for j in 0..k {
            v[(i, j)] *= scale;
        }
    }
    v.symmetrize();
    Ok(v)
}

fn check_psd(c: &Matrix) -> Result<()> {
    let eig = symmetric_eigenvalues(c);
    let min = eig[0];
    if min < -PSD_TOL * c.max_abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(())
}

/// `V_t = (9 / t^6) G^{-1} C G^{-1}` with
/// `C_jk = sum w_j(a, s) w_k(a', s') cov(s, a, s', a')` on the surface nodes.
pub fn variance_vt<C: Fn(f64, f64, f64, f64) -> f64>(
    model: &MsmModel,
    nodes: &SurfaceNodes,
    eif_cov: C,
) -> Result<Matrix> {
    let w = projection_weights(model, nodes);
    let points: Vec<(f64, f64)> =
        nodes.a.iter().flat_map(|&a| nodes.s.iter().map(move |&s| (a, s))).collect();
    let m = points.len();
    let mut cov = vec![0.0; m * m];
    for (p, &(a, s)) in points.iter().enumerate() {
        for (q, &(a2, s2)) in points.iter().enumerate() {
            cov[p * m + q] = eif_cov(s, a, s2, a2);
        }
    }
    let k = model.k();
    let mut c = Matrix::zeros(k);
    let mut tmp = vec![0.0; m];
    for i in 0..k {
        for (p, t) in tmp.iter_mut().enumerate() {
            *t = stats::sum(&dot_terms(&cov[p * m..(p + 1) * m], &w[i]));
        }
        for j in 0..k {
            c[(i, j)] = stats::sum(&dot_terms(&w[j], &tmp));
        }
    }
    sandwich(model, nodes, c)
}

/// `V_t` from centered influence-function values, `eif[i * m + p]` for observation `i`
/// and surface point `p` (a-major); the covariance is `E[phi phi'] / n`.
pub fn variance_vt_from_eif(model: &MsmModel, nodes: &SurfaceNodes, eif: &[f64], n: usize) -> Result<Matrix> {
    let m = nodes.len();
    if n == 0 || eif.len() != n * m {
        return Err(Error::Shape(format!("influence matrix has {} entries, expected {n} x {m}", eif.len())));
    }
    let w = projection_weights(model, nodes);
    let k = model.k();
    let proj: Vec<Vec<f64>> =
        (0..n).map(|i| w.iter().map(|wj| stats::sum(&dot_terms(wj, &eif[i * m..(i + 1) * m]))).collect()).collect();
    let mut c = Matrix::zeros(k);
    let n2 = (n as f64) * (n as f64);
    for a in 0..k {
        for b in a..k {
            let terms: Vec<f64> = proj.iter().map(|p| p[a] * p[b]).collect();
            let v = stats::sum(&terms) / n2;
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    sandwich(model, nodes, c)
}

/// Cutoff with the smallest `trace(V_t)`, ties toward the smaller cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub t_star: f64,
    /// `(t_cut, trace V_t)` over the candidates.
    pub profile: Vec<(f64, f64)>,
}

pub fn select_from_profile(profile: Vec<(f64, f64)>) -> Result<Selection> {
    let mut best: Option<(f64, f64)> = None;
    for &(t, tr) in &profile {
        if !tr.is_finite() {
            continue;
        }
        match best {
            Some((_, b)) if tr >= b => {}
            _ => best = Some((t, tr)),
        }
    }
    let (t_star, _) = best.ok_or_else(|| Error::arg("no cutoff with a finite variance"))?;
    Ok(Selection { t_star, profile })
}

/// Minimizes `trace(V_t)` over the positive grid points. `V_t` does not depend on the
/// surface values, only on the covariance.
pub fn select_t<C>(model: &MsmModel, eif_cov: C, tgrid: &TGrid) -> Result<Selection>
where
    C: Fn(f64, f64, f64, f64) -> f64,
{
    let mut profile = Vec::new();
    for &t in tgrid.values().iter().filter(|&&t| t > 0.0) {
        let nodes = SurfaceNodes::default_for(model.support, t)?;
        profile.push((t, variance_vt(model, &nodes, &eif_cov)?.trace()));
    }
    select_from_profile(profile)
}

/// One-step Wasserstein surface `psi_hat(a, s)` on the nodes, with centered
/// influence values (observation-major).
#[derive(Debug, Clone)]
pub struct SurfaceEstimate {
    pub nodes: SurfaceNodes,
    pub psi: Vec<f64>,
    pub eif: Vec<f64>,
    pub n: usize,
}

/// Surface from the Wasserstein one-step estimator toward each `a` node.
pub fn estimate_surface(
    data: &Dataset,
    nuis: &Nuisances,
    nodes: &SurfaceNodes,
    opts: &EstimatorOptions,
) -> Result<SurfaceEstimate> {
    let n = data.n();
    let (na, ns) = (nodes.a.len(), nodes.s.len());
    let m = na * ns;
    let grid = TGrid::new(nodes.s.clone())?;
    let mut psi = vec![0.0; m];
    let mut eif = vec![0.0; n * m];
    let opts = EstimatorOptions { chi_square: false, ..opts.clone() };
    for (ia, &a) in nodes.a.iter().enumerate() {
        let spec = PathSpec::new(Family::Wasserstein, data.support(), a)?;
        let rows = eif_rows(data, &spec, &grid, nuis, &opts, 0..n)?;
        let mut column = vec![0.0; n];
        for is in 0..ns {
            for (c, r) in column.iter_mut().zip(&rows) {
                *c = r.values[is];
            }
            let mean = stats::mean(&column);
            let p = ia * ns + is;
            psi[p] = mean;
            for (i, c) in column.iter().enumerate() {
                eif[i * m + p] = c - mean;
            }
        }
    }
    Ok(SurfaceEstimate { nodes: nodes.clone(), psi, eif, n })
}

/// Fits `beta_t` and `V_t` to an estimated surface.
pub fn fit_surface(model: &MsmModel, est: &SurfaceEstimate) -> Result<MsmFit> {
    let beta_t = fit_beta_on(model, &est.nodes, &est.psi)?;
    let v_t = variance_vt_from_eif(model, &est.nodes, &est.eif, est.n)?;
    Ok(MsmFit { model: model.clone(), t_cut: est.nodes.t_cut, beta_t, v_t: Some(v_t) })
}
