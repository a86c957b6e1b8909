//! Spectrum of the limiting covariance operator 𝒮 = 𝒮₀ − (rank two), its
//! traces and truncation, and sums of weighted chi-square variables.
//!
//! 𝒮₀ is diagonal in the orthonormal basis 𝔏_κ with eigenvalue ρ_κ depending
//! only on |κ|. Within one weight the two rank-one directions are parallel, so
//! ρ_k survives in 𝒮 with multiplicity at least p_m(k) − 1.

use crate::error::{Error, Result};
use crate::linalg::{SeriesControl, SpdMatrix};
use crate::partitions::{count_partitions, enumerate_up_to, ln_factorial, ln_partitional_shifted_factorial, Partition};
use crate::specialfn::{bessel_a2_eig, etr, log_multigamma, BesselOrder};
use crate::wishart::RngStream;
use crate::zonal::ln_zonal_at_identity;
use nalgebra::DMatrix;
use rand_distr::{ChiSquared, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared as ChiSquaredDist, ContinuousCDF};

/// Relative cluster tolerance for grouping eigenvalues into multiplicities.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-7;
/// Matrix eigenvalues below this multiple of ρ_(0) are roundoff.
pub const NOISE_FLOOR: f64 = 2e-13;
/// Absolute eigenvalue resolution of the matrix method, as a multiple of ρ_(0).
pub const ABS_RESOLUTION: f64 = 64.0 * f64::EPSILON;
pub const POLE_TOL: f64 = 1e-9;

/// β = ((α+4)/α)^{1/2} and b_α = (1 + α(1−β)/2)^{1/2}.
pub fn beta_and_balpha(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let beta = (1.0 + 4.0 / alpha).sqrt();
    // 1 + α(1−β)/2 rewritten without cancellation
    let b2 = 4.0 / (alpha * (1.0 + beta) * (1.0 + beta));
    Ok((beta, b2.sqrt()))
}

/// Scalar quantities shared by everything in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumParams {
    pub alpha: f64,
    pub m: usize,
    pub beta: f64,
    pub b_alpha: f64,
    /// b_α²
    pub b2: f64,
    /// r = b_α⁴
    pub r: f64,
    ln_rho0: f64,
}

impl SpectrumParams {
    pub fn new(alpha: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !(alpha > 0.5 * (m as f64 - 1.0)) {
            return Err(Error::Domain(format!("alpha must exceed (m-1)/2, got {alpha}")));
        }
        let (beta, b_alpha) = beta_and_balpha(alpha)?;
        let b2 = b_alpha * b_alpha;
        let mf = m as f64;
        Ok(SpectrumParams { alpha, m, beta, b_alpha, b2, r: b2 * b2, ln_rho0: mf * alpha * (alpha * b2).ln() })
    }

    pub fn ln_rho(&self, k: usize) -> f64 {
        self.ln_rho0 + 2.0 * k as f64 * self.b2.ln()
    }

    /// ρ̃_k = α^{mα} b_α^{4k+2mα}.
    pub fn rho(&self, k: usize) -> f64 {
        self.ln_rho(k).exp()
    }

    fn mf(&self) -> f64 {
        self.m as f64
    }

    /// 1/(α³m), weight of the second rank-one term.
    pub fn c(&self) -> f64 {
        1.0 / (self.alpha.powi(3) * self.mf())
    }

    /// Layer weight w_k = Σ_{|κ|=k} a_κ² = β^{mα}(mα)_k/k! ρ̃_k².
    fn ln_layer_weight(&self, k: usize) -> f64 {
        let (lp, _) = crate::partitions::ln_shifted_factorial(self.mf() * self.alpha, k);
        self.mf() * self.alpha * self.beta.ln() + lp - ln_factorial(k) + 2.0 * self.ln_rho(k)
    }

    /// t_k = b_κ/a_κ = α²(m b_α² − kβ).
    fn t(&self, k: usize) -> f64 {
        self.alpha * self.alpha * (self.mf() * self.b2 - k as f64 * self.beta)
    }
}

pub fn rho(kappa: &Partition, alpha: f64, m: usize) -> Result<f64> {
    Ok(SpectrumParams::new(alpha, m)?.rho(kappa.weight()))
}

/// a_κ = (C_κ(I)[α]_κ/|κ|!)^{1/2} β^{mα/2} ρ_κ.
pub fn coeff_a(kappa: &Partition, alpha: f64, m: usize) -> Result<f64> {
    let p = SpectrumParams::new(alpha, m)?;
    Ok(coeff_a_with(&p, kappa))
}

fn coeff_a_with(p: &SpectrumParams, kappa: &Partition) -> f64 {
    let k = kappa.weight();
    let (la, _) = ln_partitional_shifted_factorial(p.alpha, kappa);
    let l = 0.5 * (ln_zonal_at_identity(kappa, p.m) + la - ln_factorial(k)) + 0.5 * p.mf() * p.alpha * p.beta.ln() + p.ln_rho(k);
    l.exp()
}

/// b_κ = a_κ α²(m b_α² − |κ|β).
pub fn coeff_b(kappa: &Partition, alpha: f64, m: usize) -> Result<f64> {
    let p = SpectrumParams::new(alpha, m)?;
    Ok(coeff_a_with(&p, kappa) * p.t(kappa.weight()))
}

/// Matrix of 𝒮 in the basis 𝔏_κ, |κ| ≤ K, rows in the enumeration order.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub params: SpectrumParams,
    pub max_weight: usize,
    pub partitions: Vec<Partition>,
    pub rho: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

pub fn build_operator_matrix(alpha: f64, m: usize, k: usize) -> Result<OperatorMatrix> {
    if k < 2 {
        return Err(Error::InvalidArgument("operator truncation needs K >= 2".into()));
    }
    let p = SpectrumParams::new(alpha, m)?;
    let partitions = enumerate_up_to(k, m);
    let rho: Vec<f64> = partitions.iter().map(|q| p.rho(q.weight())).collect();
    let a: Vec<f64> = partitions.iter().map(|q| coeff_a_with(&p, q)).collect();
    let b: Vec<f64> = partitions.iter().zip(&a).map(|(q, a)| a * p.t(q.weight())).collect();
    let n = partitions.len();
    let c = p.c();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { rho[i] } else { 0.0 };
        d - a[i] * a[j] - c * (b[i] * b[j])
    });
    Ok(OperatorMatrix { params: p, max_weight: k, partitions, rho, a, b, matrix })
}

/// Tr 𝒮₀ = α^{mα} b_α^{2mα} Π_{k=1}^m (1 − b_α^{4k})^{-1}.
pub fn trace_s0(alpha: f64, m: usize) -> Result<f64> {
    let p = SpectrumParams::new(alpha, m)?;
    let prod: f64 = (1..=m).map(|k| 1.0 - p.r.powi(k as i32)).product();
    Ok(p.rho(0) / prod)
}

/// Tr 𝒮 = Tr 𝒮₀ − (α/(α+2))^{mα}(1 + (mα+1)/(α+2)²).
pub fn trace_s(alpha: f64, m: usize) -> Result<f64> {
    let mf = m as f64;
    let rank_two = (mf * alpha * (alpha / (alpha + 2.0)).ln()).exp() * (1.0 + (mf * alpha + 1.0) / (alpha + 2.0).powi(2));
    Ok(trace_s0(alpha, m)? - rank_two)
}

/// Smallest r whose weights ≤ r carry a (1 − ε) share of Tr 𝒮₀, and the
/// number N = Σ_{k=2}^r p_m(k) of eigenvalues of 𝒮 to retain.
pub fn truncation_rank(alpha: f64, m: usize, eps: f64) -> Result<(usize, usize)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0,1), got {eps}")));
    }
    let p = SpectrumParams::new(alpha, m)?;
    // work relative to ρ̃_0: Σ r^k p_m(k) against Π(1 − r^k)^{-1}
    let total: f64 = 1.0 / (1..=m).map(|k| 1.0 - p.r.powi(k as i32)).product::<f64>();
    let target = (1.0 - eps) * total;
    let mut s = 0.0;
    let mut rk = 1.0;
    for k in 0..10_000usize {
        s += rk * count_partitions(k, m) as f64;
        if s >= target {
            let n: u128 = (2..=k).map(|j| count_partitions(j, m)).sum();
            return Ok((k, n as usize));
        }
        rk *= p.r;
    }
    Err(Error::Numerical("truncation rank search did not terminate".into()))
}

/// Default operator truncation: the weight where ρ drops below 1e−14 ρ_(0),
/// but at least 12.
pub fn default_max_weight(alpha: f64, m: usize) -> Result<usize> {
    let p = SpectrumParams::new(alpha, m)?;
    let k = (14.0 * std::f64::consts::LN_10 / (-p.r.ln())).ceil() as usize;
    Ok(k.max(12))
}

/// The series A, B, D and G = α³m·A·B − D² whose positive roots away from
/// the ρ̃_k are the remaining eigenvalues of 𝒮.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GValues {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub g: f64,
    pub terms: usize,
}

pub fn g_functions(delta: f64, alpha: f64, m: usize, ctrl: &SeriesControl) -> Result<GValues> {
    let p = SpectrumParams::new(alpha, m)?;
    g_with(&p, delta, ctrl)
}

fn g_with(p: &SpectrumParams, delta: f64, ctrl: &SeriesControl) -> Result<GValues> {
    let (mut saa, mut sab, mut sbb) = (0.0, 0.0, 0.0);
    let mut k = 0usize;
    loop {
        let rk = p.rho(k);
        let gap = rk - delta;
        if gap.abs() <= POLE_TOL * rk {
            return Err(Error::Pole { delta, weight: k, tol: POLE_TOL * rk });
        }
        let w = p.ln_layer_weight(k).exp() / gap;
        let t = p.t(k);
        saa += w;
        sab += w * t;
        sbb += w * t * t;
        let term = (w * t * t).abs().max(w.abs());
        k += 1;
        // past δ the terms decrease geometrically
        if rk < delta && term <= ctrl.abs_tol * 1e-2 * (1.0 + sbb.abs()) {
            break;
        }
        if rk == 0.0 || k > 20_000 {
            break;
        }
    }
    let c = p.c();
    let a = 1.0 - saa;
    let b = 1.0 - c * sbb;
    let d = sab;
    Ok(GValues { a, b, d, g: p.alpha.powi(3) * p.mf() * a * b - d * d, terms: k })
}

/// Positive roots of G on each interval (ρ̃_{k+1}, ρ̃_k), k < k_max, found by a
/// sign scan followed by bisection. Returned in decreasing order.
pub fn find_deltas_by_roots(alpha: f64, m: usize, k_max: usize, ctrl: &SeriesControl) -> Result<Vec<f64>> {
    let p = SpectrumParams::new(alpha, m)?;
    let mut grid: Vec<f64> = (1..64).map(|i| i as f64 / 64.0).collect();
    for j in 2..=8 {
        let e = 10f64.powi(-j);
        grid.push(e);
        grid.push(1.0 - e);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut roots = Vec::new();
    for k in 0..k_max {
        let hi = p.rho(k);
        let lo = p.rho(k + 1);
        let width = hi - lo;
        // points from the top pole downwards
        let pts: Vec<f64> = grid.iter().map(|t| hi - t * width).collect();
        let mut prev: Option<(f64, f64)> = None;
        for &x in &pts {
            let g = match g_with(&p, x, ctrl) {
                Ok(v) => v.g,
                Err(Error::Pole { .. }) => {
                    prev = None;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if let Some((px, pg)) = prev {
                if pg == 0.0 {
                    roots.push(px);
                } else if pg.signum() != g.signum() {
                    roots.push(bisect(&p, x, px, g, ctrl)?);
                }
            }
            prev = Some((x, g));
        }
    }
    roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(roots)
}

fn bisect(p: &SpectrumParams, mut lo: f64, mut hi: f64, g_lo: f64, ctrl: &SeriesControl) -> Result<f64> {
    let s_lo = g_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = g_with(p, mid, ctrl)?.g;
        if g == 0.0 {
            return Ok(mid);
        }
        if g.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    Matrix,
    GRoots,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub eps: f64,
    pub r: usize,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub version: String,
    pub alpha: f64,
    pub m: usize,
    pub beta: f64,
    pub b_alpha: f64,
    pub max_weight: usize,
    pub cluster_tol: f64,
    /// Absolute part of the cluster tolerance.
    pub cluster_abs_tol: f64,
    /// [weight, ρ̃_k] for k ≤ max_weight.
    pub rho: Vec<(usize, f64)>,
    /// [δ, multiplicity], descending.
    pub deltas: Vec<(f64, usize)>,
    #[serde(rename = "trace_S0")]
    pub trace_s0: f64,
    #[serde(rename = "trace_S")]
    pub trace_s: f64,
    pub truncation: Truncation,
    pub method: SpectrumMethod,
    /// Eigenvalues dropped as roundoff, counted with multiplicity.
    pub below_noise_floor: usize,
}

impl SpectrumResult {
    /// Deltas repeated by multiplicity, descending.
    pub fn expanded(&self) -> Vec<f64> {
        self.deltas.iter().flat_map(|&(v, k)| std::iter::repeat(v).take(k)).collect()
    }

    /// The first `n` eigenvalues with multiplicity, as (value, count) terms.
    pub fn leading(&self, n: usize) -> Vec<(f64, usize)> {
        let mut out = Vec::new();
        let mut left = n;
        for &(v, k) in &self.deltas {
            if left == 0 {
                break;
            }
            let take = k.min(left);
            out.push((v, take));
            left -= take;
        }
        out
    }

    /// Σ_{k > K} p_m(k) ρ̃_k, the part of Tr 𝒮₀ not represented by the matrix.
    pub fn rho_tail(&self) -> f64 {
        let p = SpectrumParams::new(self.alpha, self.m).expect("validated");
        let mut s = 0.0;
        let mut k = self.max_weight + 1;
        loop {
            let t = p.rho(k) * count_partitions(k, self.m) as f64;
            s += t;
            if t <= 1e-18 * s || t == 0.0 {
                break;
            }
            k += 1;
        }
        s
    }

    /// Size of the cluster sitting on ρ̃_k, or 0 if none.
    pub fn multiplicity_at_rho(&self, k: usize) -> usize {
        let r = self.rho.iter().find(|(w, _)| *w == k).map(|x| x.1);
        match r {
            Some(r) => self
                .deltas
                .iter()
                .filter(|(v, _)| (v - r).abs() <= (self.cluster_tol * r).max(self.cluster_abs_tol))
                .map(|x| x.1)
                .sum(),
            None => 0,
        }
    }
}

/// Eigenvalues of the truncated operator matrix, clustered into multiplicities.
/// `k` defaults to [`default_max_weight`]; `cluster_tol` is relative.
pub fn eigen_spectrum(alpha: f64, m: usize, k: Option<usize>, cluster_tol: Option<f64>, eps: f64) -> Result<SpectrumResult> {
    let k = match k {
        Some(k) => k,
        None => default_max_weight(alpha, m)?,
    };
    let tol = cluster_tol.unwrap_or(DEFAULT_CLUSTER_TOL);
    let op = build_operator_matrix(alpha, m, k)?;
    let p = op.params;
    if p.rho(k) > 1e-3 * p.rho(0) {
        return Err(Error::InvalidArgument(format!("max weight {k} too small: rho there is not negligible")));
    }
    let mut raw: Vec<f64> = op.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
    raw.sort_by(|a, b| b.partial_cmp(a).unwrap());
    check_interlacing(&raw, &op.rho, p.rho(0))?;
    let floor = NOISE_FLOOR * p.rho(0);
    let kept: Vec<f64> = raw.iter().copied().filter(|v| *v > floor).collect();
    let below = raw.len() - kept.len();
    let abs_tol = ABS_RESOLUTION * p.rho(0);
    let deltas = cluster(&kept, tol, abs_tol);
    let (r, n) = truncation_rank(alpha, m, eps)?;
    Ok(SpectrumResult {
        version: crate::VERSION.to_string(),
        alpha,
        m,
        beta: p.beta,
        b_alpha: p.b_alpha,
        max_weight: k,
        cluster_tol: tol,
        cluster_abs_tol: abs_tol,
        rho: (0..=k).map(|j| (j, p.rho(j))).collect(),
        deltas,
        trace_s0: trace_s0(alpha, m)?,
        trace_s: trace_s(alpha, m)?,
        truncation: Truncation { eps, r, n },
        method: SpectrumMethod::Matrix,
        below_noise_floor: below,
    })
}

/// Same report built from the G-roots; the roots are cross-checked against the
/// matrix eigenvalues, which also supply the eigenvalues sitting on ρ̃_k.
pub fn eigen_spectrum_roots(alpha: f64, m: usize, k: Option<usize>, cluster_tol: Option<f64>, eps: f64, ctrl: &SeriesControl) -> Result<SpectrumResult> {
    let mut res = eigen_spectrum(alpha, m, k, cluster_tol, eps)?;
    let roots = find_deltas_by_roots(alpha, m, res.max_weight, ctrl)?;
    cross_check(&res, &roots)?;
    // replace each matched matrix value by the more accurate root
    let mut list = res.deltas.clone();
    for r in &roots {
        if let Some(best) = list.iter_mut().min_by(|x, y| (x.0 - r).abs().partial_cmp(&(y.0 - r).abs()).unwrap()) {
            if best.1 == 1 {
                best.0 = *r;
            }
        }
    }
    list.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    res.deltas = list;
    res.method = SpectrumMethod::GRoots;
    Ok(res)
}

/// Every G-root above the noise floor must match a matrix eigenvalue to 1e−8,
/// and every matrix eigenvalue well separated from ρ̃ must match a root.
pub fn cross_check(res: &SpectrumResult, roots: &[f64]) -> Result<()> {
    let raw = res.expanded();
    let rho0 = res.rho[0].1;
    let floor = NOISE_FLOOR * rho0;
    for r in roots.iter().filter(|r| **r > floor) {
        let d = raw.iter().map(|v| (v - r).abs()).fold(f64::INFINITY, f64::min);
        if d > 1e-8 {
            return Err(Error::Consistency(format!("G-root {r:e} has no matrix eigenvalue within 1e-8 (nearest {d:e})")));
        }
    }
    for &(v, _) in &res.deltas {
        let near_rho = res.rho.iter().map(|(_, r)| ((v - r) / r).abs()).fold(f64::INFINITY, f64::min);
        if near_rho > 1e-6 && v > 1e3 * floor {
            let d = roots.iter().map(|r| (v - r).abs()).fold(f64::INFINITY, f64::min);
            if d > 1e-8 {
                return Err(Error::Consistency(format!("matrix eigenvalue {v:e} has no G-root within 1e-8")));
            }
        }
    }
    Ok(())
}

fn check_interlacing(desc: &[f64], rho: &[f64], rho0: f64) -> Result<()> {
    let mut r = rho.to_vec();
    r.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let tol = 1e-9 * rho0;
    for (i, d) in desc.iter().enumerate() {
        if *d > r[i] + tol {
            return Err(Error::Consistency(format!("eigenvalue {i} = {d:e} exceeds rho {:e}", r[i])));
        }
        if i + 2 < r.len() && *d < r[i + 2] - tol {
            return Err(Error::Consistency(format!("eigenvalue {i} = {d:e} below rho {:e}", r[i + 2])));
        }
    }
    Ok(())
}

/// Groups a descending list into (value, count): neighbours within
/// max(tol·value, abs_tol) of the cluster head join it.
fn cluster(desc: &[f64], tol: f64, abs_tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for &v in desc {
        match out.last_mut() {
            Some((head, n, sum)) if (*head - v).abs() <= (tol * head.abs()).max(abs_tol) => {
                *n += 1;
                *sum += v;
            }
            _ => out.push((v, 1, v)),
        }
    }
    out.into_iter().map(|(_, n, s)| (s / n as f64, n)).collect()
}

/// Coefficients of the eigenfunction for a root δ in the basis 𝔏_κ, |κ| ≤ k,
/// normalized to unit length.
pub fn eigenfunction_coefficients(alpha: f64, m: usize, delta: f64, k: usize, ctrl: &SeriesControl) -> Result<Vec<(Partition, f64)>> {
    let p = SpectrumParams::new(alpha, m)?;
    let g = g_with(&p, delta, ctrl)?;
    let c = p.c();
    let saa = 1.0 - g.a;
    let sbb = (1.0 - g.b) / c;
    let sab = g.d;
    // null vector of [[1−Saa, −c Sab], [−Sab, 1 − c Sbb]]
    let r1 = (c * sab, 1.0 - saa);
    let r2 = (1.0 - c * sbb, sab);
    let (u, w) = if r1.0.hypot(r1.1) >= r2.0.hypot(r2.1) { r1 } else { r2 };
    let parts = enumerate_up_to(k, m);
    let mut v: Vec<(Partition, f64)> = parts
        .into_iter()
        .map(|q| {
            let kk = q.weight();
            let a = coeff_a_with(&p, &q);
            let val = a * (u + c * p.t(kk) * w) / (p.rho(kk) - delta);
            (q, val)
        })
        .collect();
    let norm = v.iter().map(|x| x.1 * x.1).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Numerical("zero eigenfunction coefficients".into()));
    }
    for x in v.iter_mut() {
        x.1 /= norm;
    }
    Ok(v)
}

/// K(S,T) = etr(−(S+T)/α)[Γ_m(α)A_ν(−S/α², T) − (tr S)(tr T)/(α³m) − 1].
pub fn cov_kernel_k(s: &SpdMatrix, t: &SpdMatrix, alpha: f64, ctrl: &SeriesControl) -> Result<f64> {
    cov_kernel_k_eig(s.eigenvalues(), t.eigenvalues(), alpha, ctrl)
}

pub fn cov_kernel_k_eig(s: &[f64], t: &[f64], alpha: f64, ctrl: &SeriesControl) -> Result<f64> {
    let m = s.len();
    if t.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: t.len() });
    }
    let order = BesselOrder::for_alpha(alpha, m)?;
    let g = log_multigamma(m, alpha)?.exp();
    let sx: Vec<f64> = s.iter().map(|v| -v / (alpha * alpha)).collect();
    let a = bessel_a2_eig(order, &sx, t, ctrl)?.value;
    let trs: f64 = s.iter().sum();
    let trt: f64 = t.iter().sum();
    let e = etr(&s.iter().zip(t).map(|(x, y)| -(x + y) / alpha).collect::<Vec<_>>());
    Ok(e * (g * a - trs * trt / (alpha.powi(3) * m as f64) - 1.0))
}

/// Sorted Monte Carlo replicates with quantile and tail estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("replicates must be finite and nonempty".into()));
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(EmpiricalDistribution { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Upper `level` point, i.e. the (1 − level) quantile, with an
    /// order-statistic standard error.
    pub fn upper_quantile(&self, level: f64) -> (f64, f64) {
        let r = self.sorted.len();
        let p = 1.0 - level;
        let j = ((p * r as f64).ceil() as usize).clamp(1, r) - 1;
        let d = ((r as f64).sqrt().round() as usize).max(1);
        let lo = j.saturating_sub(d);
        let hi = (j + d).min(r - 1);
        let se = if hi > lo {
            (self.sorted[hi] - self.sorted[lo]) / (hi - lo) as f64 * (r as f64 * p * (1.0 - p)).sqrt()
        } else {
            f64::NAN
        };
        (self.sorted[j], se)
    }

    /// Fraction of replicates ≥ t and its binomial standard error.
    pub fn tail(&self, t: f64) -> (f64, f64) {
        let r = self.sorted.len() as f64;
        let p = self.count_at_least(t) as f64 / r;
        (p, (p * (1.0 - p) / r).sqrt())
    }

    /// (1 + #{≥ t}) / (1 + R).
    pub fn p_value(&self, t: f64) -> f64 {
        (1.0 + self.count_at_least(t) as f64) / (1.0 + self.sorted.len() as f64)
    }

    fn count_at_least(&self, t: f64) -> usize {
        let below = self.sorted.partition_point(|v| *v < t);
        self.sorted.len() - below
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Value of the empirical CDF at x.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let (x, y) = (a.values(), b.values());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / x.len() as f64 - j as f64 / y.len() as f64).abs());
    }
    d
}

/// Σ δ_k χ²_{mult_k} with independent chi-squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedChiSquare {
    terms: Vec<(f64, usize)>,
}

const BLOCK: usize = 4096;

impl WeightedChiSquare {
    pub fn new(terms: Vec<(f64, usize)>) -> Result<Self> {
        if terms.is_empty() || terms.iter().any(|(d, k)| !(*d > 0.0) || *k == 0) {
            return Err(Error::InvalidArgument("weights must be positive with positive multiplicity".into()));
        }
        Ok(WeightedChiSquare { terms })
    }

    pub fn terms(&self) -> &[(f64, usize)] {
        &self.terms
    }

    pub fn mean(&self) -> f64 {
        self.terms.iter().map(|(d, k)| d * *k as f64).sum()
    }

    /// `reps` draws; block b uses stream b of `stream.master_seed`.
    pub fn simulate(&self, reps: usize, stream: RngStream) -> EmpiricalDistribution {
        let dists: Vec<(f64, ChiSquared<f64>)> = self.terms.iter().map(|(d, k)| (*d, ChiSquared::new(*k as f64).expect("positive df"))).collect();
        let blocks = reps.div_ceil(BLOCK);
        let values: Vec<f64> = (0..blocks)
            .into_par_iter()
            .flat_map_iter(|bi| {
                let mut rng = stream.with_stream(bi as u64).rng();
                let n = BLOCK.min(reps - bi * BLOCK);
                let dists = &dists;
                (0..n).map(move |_| dists.iter().map(|(d, c)| d * c.sample(&mut rng)).sum::<f64>()).collect::<Vec<_>>()
            })
            .collect();
        EmpiricalDistribution::new(values).expect("finite draws")
    }
}

/// Monte Carlo upper `level` point of Σ δ χ²_mult and its standard error.
pub fn weighted_chisq_quantile(deltas: &[(f64, usize)], level: f64, reps: usize, stream: RngStream) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0,1), got {level}")));
    }
    Ok(WeightedChiSquare::new(deltas.to_vec())?.simulate(reps, stream).upper_quantile(level))
}

/// Monte Carlo P(Σ δ χ²_mult ≥ t) and its standard error.
pub fn weighted_chisq_tail(deltas: &[(f64, usize)], t: f64, reps: usize, stream: RngStream) -> Result<(f64, f64)> {
    Ok(WeightedChiSquare::new(deltas.to_vec())?.simulate(reps, stream).tail(t))
}

fn kotz_parts(deltas: &[f64]) -> Result<(f64, f64)> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidArgument("need at least one positive weight".into()));
    }
    let hi = deltas.iter().copied().fold(f64::MIN, f64::max);
    let lo = deltas.iter().copied().fold(f64::MAX, f64::min);
    Ok((hi + lo, deltas.len() as f64))
}

/// One-term approximation P(Σ_{k≤M} δ_k χ²_1 ≥ t) ≈ P(χ²_M ≥ 2t/(δ_1 + δ_M)),
/// with the weights listed one per degree of freedom.
pub fn kotz_one_term_tail(deltas: &[f64], t: f64) -> Result<f64> {
    let (s, mdf) = kotz_parts(deltas)?;
    let d = ChiSquaredDist::new(mdf).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(d.sf(2.0 * t / s))
}

/// Critical value ½(δ_1 + δ_M) χ²_{M; level}.
pub fn kotz_one_term_critical(deltas: &[f64], level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0,1), got {level}")));
    }
    let (s, mdf) = kotz_parts(deltas)?;
    let d = ChiSquaredDist::new(mdf).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(0.5 * s * d.inverse_cdf(1.0 - level))
}
