//! The statistic T²_n = n ∫ (Ĥ_n(T) − etr(−T/α))² dP₀(T), its calibration,
//! and the decision report.

use crate::error::{Error, Result};
use crate::linalg::{spd_inv_sqrt, sym_eigenvalues, SeriesControl, SpdMatrix, SymmetricMatrix};
use crate::partitions::count_partitions;
use crate::specialfn::{bessel_a2_eig, log_multigamma, BesselOrder, BesselProfile, BesselWeights, QualityFlag};
use crate::spectrum::{eigen_spectrum, truncation_rank, EmpiricalDistribution, SpectrumParams, WeightedChiSquare};
use crate::wishart::{RngStream, WishartModel};
use crate::zonal::{shared_table, ZonalTable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Profile truncation: a point's scaled zonal layers are dropped once their
/// squared norm stays below PROFILE_TOL² for two weights.
const PROFILE_TOL: f64 = 1e-9;
/// Roundoff allowance before a negative statistic is an error.
const NEGATIVE_CLAMP: f64 = 1e-10;
/// Stream tags separating independent uses of one seed.
const TAG_CALIBRATE: u64 = 1;
const TAG_LIMIT: u64 = 2;
/// Master seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Asymptotic,
    Conservative,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(Method::Mc),
            "asymptotic" => Ok(Method::Asymptotic),
            "conservative" => Ok(Method::Conservative),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofConfig {
    pub alpha: f64,
    pub method: Method,
    pub level: f64,
    /// Null samples for method = mc.
    pub mc_reps: usize,
    /// Draws from the limiting law for the asymptotic and conservative methods.
    pub limit_reps: usize,
    pub seed: u64,
    pub series: SeriesControl,
    /// Truncation share for the asymptotic method.
    pub eps: f64,
    pub allow_alpha_below_theorem_bound: bool,
}

impl GofConfig {
    pub fn new(alpha: f64) -> Self {
        GofConfig {
            alpha,
            method: Method::Mc,
            level: 0.05,
            mc_reps: 10_000,
            limit_reps: 2_000_000,
            seed: DEFAULT_SEED,
            series: SeriesControl::default(),
            eps: 1e-10,
            allow_alpha_below_theorem_bound: false,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!("level must lie in (0,1), got {}", self.level)));
        }
        let mf = m as f64;
        let always = (2.0 * mf - 1.0) / 2.0;
        if !(self.alpha > always) {
            return Err(Error::Domain(format!("alpha must exceed (2m-1)/2 = {always}, got {}", self.alpha)));
        }
        let bound = always.max((mf + 3.0) / 2.0);
        if !(self.alpha > bound) && !self.allow_alpha_below_theorem_bound {
            return Err(Error::Domain(format!(
                "alpha = {} is not above {bound}, where the limit theory holds; set the override to proceed",
                self.alpha
            )));
        }
        if self.method == Method::Mc && self.mc_reps < 100 {
            return Err(Error::InvalidArgument("mc_reps must be at least 100".into()));
        }
        self.series.validate()
    }
}

/// Eigenvalues of Y_j = X̄^{-1/2} X_j X̄^{-1/2}.
pub fn standardize_sample(sample: &[SpdMatrix]) -> Result<Vec<Vec<f64>>> {
    if sample.len() < 2 {
        return Err(Error::DegenerateSample(format!("need at least 2 matrices, got {}", sample.len())));
    }
    let m = sample[0].dim();
    let mut sum = SymmetricMatrix::zeros(m);
    for x in sample {
        if x.dim() != m {
            return Err(Error::DimensionMismatch { expected: m, got: x.dim() });
        }
        sum = sum.add(x.matrix())?;
    }
    let mean = SpdMatrix::new(sum.scale(1.0 / sample.len() as f64))
        .map_err(|e| Error::DegenerateSample(format!("sample mean is singular: {e}")))?;
    let root = spd_inv_sqrt(&mean);
    sample
        .iter()
        .map(|x| {
            let y = x.matrix().congruence(root.matrix().as_slice())?;
            sym_eigenvalues(&y)
        })
        .collect()
}

/// Constants of the kernel: (α/(α+1))^{mα}, α/(α+1), (1+2/α)^{−mα}.
fn kernel_constants(alpha: f64, m: usize) -> (f64, f64, f64) {
    let ma = m as f64 * alpha;
    let c = alpha / (alpha + 1.0);
    ((ma * c.ln()).exp(), c, (-ma * (1.0 + 2.0 / alpha).ln()).exp())
}

/// h(X,Y) = Γ_m(α)etr(−X−Y)A_ν(−X,Y) − (α/(α+1))^{mα}[etr(−αX/(α+1)) + etr(−αY/(α+1))] + (1+2/α)^{−mα}.
pub fn kernel_h(x: &[f64], y: &[f64], alpha: f64, ctrl: &SeriesControl) -> Result<f64> {
    let m = x.len();
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len() });
    }
    let order = BesselOrder::for_alpha(alpha, m)?;
    let g = log_multigamma(m, alpha)?.exp();
    let nx: Vec<f64> = x.iter().map(|v| -v).collect();
    let a = bessel_a2_eig(order, &nx, y, ctrl)?.value;
    let (c1, c, c2) = kernel_constants(alpha, m);
    let trx: f64 = x.iter().sum();
    let try_: f64 = y.iter().sum();
    Ok(g * (-trx - try_).exp() * a - c1 * ((-c * trx).exp() + (-c * try_).exp()) + c2)
}

/// Statistic with the diagnostics gathered while computing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticValue {
    pub value: f64,
    pub max_weight: usize,
    pub flags: Vec<QualityFlag>,
}

/// Engine for repeated statistic evaluations at a fixed (α, m).
#[derive(Debug, Clone)]
pub struct StatisticEngine {
    alpha: f64,
    m: usize,
    table: std::sync::Arc<ZonalTable>,
    weights: BesselWeights,
    max_weight: usize,
    hard_cap: usize,
}

impl StatisticEngine {
    pub fn new(alpha: f64, m: usize, ctrl: &SeriesControl) -> Result<Self> {
        ctrl.validate()?;
        let table = shared_table(m, ctrl.max_weight)?;
        let mut weights = BesselWeights::new(m, alpha)?;
        weights.prepare(&table, ctrl.max_weight);
        Ok(StatisticEngine { alpha, m, table, weights, max_weight: ctrl.max_weight, hard_cap: ctrl.hard_cap })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Table reaching the hard cap, built on first need.
    fn wide_table(&self) -> Result<std::sync::Arc<ZonalTable>> {
        shared_table(self.m, self.hard_cap)
    }

    /// Scaled zonal profiles of the points, extended to a common weight.
    /// Points needing more than max_weight layers are retried up to the hard cap.
    pub fn profiles(&self, points: &[Vec<f64>]) -> Result<Vec<BesselProfile>> {
        let mut w = self.weights.clone();
        let mut table = self.table.clone();
        let mut out = Vec::with_capacity(points.len());
        for p in points {
            if p.len() != self.m {
                return Err(Error::DimensionMismatch { expected: self.m, got: p.len() });
            }
            match BesselProfile::converged(&table, &mut w, p, PROFILE_TOL, self.max_weight) {
                Ok(prof) => out.push(prof),
                Err(Error::NonConvergence { .. }) if self.hard_cap > self.max_weight => {
                    if table.max_weight() < self.hard_cap {
                        table = self.wide_table()?;
                    }
                    out.push(BesselProfile::converged(&table, &mut w, p, PROFILE_TOL, self.hard_cap)?);
                }
                Err(e) => return Err(e),
            }
        }
        let k = out.iter().map(|p| p.weight()).max().unwrap_or(0);
        for p in out.iter_mut() {
            p.extend_to(&table, &mut w, k);
        }
        Ok(out)
    }

    /// Copy of the prepared series weights, for use with [`Self::hankel_values`].
    pub fn weights(&self) -> BesselWeights {
        self.weights.clone()
    }

    /// Γ_m(α)A_ν(T, y_i) for every profiled point y_i. Layers of T are added
    /// until the largest layer contribution is negligible for two weights; the
    /// point profiles are extended as needed.
    pub fn hankel_values(&self, t: &[f64], points: &mut [BesselProfile], w: &mut BesselWeights, ctrl: &SeriesControl) -> Result<Vec<f64>> {
        let mut tp = BesselProfile::start(t);
        let mut table = self.table.clone();
        let mut out = vec![0.0; points.len()];
        let mut run = 0;
        let mut k = 0usize;
        loop {
            if k > table.max_weight() && table.max_weight() < self.hard_cap {
                table = self.wide_table()?;
            }
            tp.push_layer(&table, w)?;
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for (p, o) in points.iter_mut().zip(out.iter_mut()) {
                if p.weight() < k {
                    p.extend_to(&table, w, k);
                }
                let d = tp.layer_dot(p, k);
                *o += sign * d;
                worst = worst.max(d.abs());
                scale = scale.max(o.abs());
            }
            if ctrl.layer_small(worst, scale) {
                run += 1;
                if run >= 2 {
                    return Ok(out);
                }
            } else {
                run = 0;
            }
            k += 1;
        }
    }

    /// T²_n from standardized eigenvalues.
    pub fn statistic(&self, ys: &[Vec<f64>]) -> Result<StatisticValue> {
        let n = ys.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty sample".into()));
        }
        let prof = self.profiles(ys)?;
        let (c1, c, c2) = kernel_constants(self.alpha, self.m);
        let tr: Vec<f64> = ys.iter().map(|y| y.iter().sum()).collect();
        let ex: Vec<f64> = tr.iter().map(|t| (-t).exp()).collect();
        let mut pair = 0.0;
        for i in 0..n {
            for j in i..n {
                let (s, _) = prof[i].pair_sum(&prof[j], false);
                let v = ex[i] * ex[j] * s;
                pair += if i == j { v } else { 2.0 * v };
            }
        }
        let lin: f64 = tr.iter().map(|t| (-c * t).exp()).sum();
        let mut value = pair / n as f64 - 2.0 * c1 * lin + n as f64 * c2;
        if value < 0.0 {
            if value >= -NEGATIVE_CLAMP {
                value = 0.0;
            } else {
                return Err(Error::Consistency(format!("statistic is negative beyond roundoff: {value:e}")));
            }
        }
        let mut flags = Vec::new();
        let worst = ys.iter().map(|y| y.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        if worst > crate::specialfn::LARGE_ARGUMENT_NORM {
            flags.push(QualityFlag::LargeArgument { norm: worst });
        }
        let weight = prof.first().map(|p| p.weight()).unwrap_or(0);
        if weight > self.max_weight {
            flags.push(QualityFlag::ExtendedWeight { weight });
        }
        Ok(StatisticValue { value, max_weight: weight, flags })
    }
}

/// T²_n = n^{-1} Σ_i Σ_j h(Y_i, Y_j) for a sample of SPD matrices.
pub fn statistic_t2(sample: &[SpdMatrix], cfg: &GofConfig) -> Result<StatisticValue> {
    let ys = standardize_sample(sample)?;
    StatisticEngine::new(cfg.alpha, ys[0].len(), &cfg.series)?.statistic(&ys)
}

/// Monte Carlo of n E_{T∼P₀}(Ĥ_n(T) − etr(−T/α))², returned with its
/// standard error.
pub fn statistic_oracle_mc(sample: &[SpdMatrix], cfg: &GofConfig, draws: usize, stream: RngStream) -> Result<(f64, f64)> {
    let ys = standardize_sample(sample)?;
    oracle_from_eigenvalues(&ys, cfg, draws, stream)
}

pub fn oracle_from_eigenvalues(ys: &[Vec<f64>], cfg: &GofConfig, draws: usize, stream: RngStream) -> Result<(f64, f64)> {
    if draws < 2 {
        return Err(Error::InvalidArgument("need at least two draws".into()));
    }
    let m = ys[0].len();
    let alpha = cfg.alpha;
    let n = ys.len() as f64;
    // Γ_m(α)A_ν(T, Y) = Σ_k (−1)^k Σ_κ z_κ(T) z_κ(Y)
    let engine = StatisticEngine::new(alpha, m, &cfg.series)?;
    let yprof = engine.profiles(ys)?;
    let mut yprof = yprof;
    let model = WishartModel::standard(alpha, m)?;
    let sampler = model.sampler();
    let mut rng = stream.rng();
    let mut w = engine.weights();
    let mut vals = Vec::with_capacity(draws);
    for _ in 0..draws {
        let t = sampler.sample_spd(&mut rng);
        let hv = engine.hankel_values(t.eigenvalues(), &mut yprof, &mut w, &cfg.series)?;
        let h = hv.iter().sum::<f64>() / n;
        let e = (-t.trace() / alpha).exp();
        vals.push(n * (h - e) * (h - e));
    }
    let mean = vals.iter().sum::<f64>() / draws as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
    Ok((mean, (var / draws as f64).sqrt()))
}

/// Statistic of one H₀ sample of size n with Σ = I drawn from `stream`.
fn null_replicate(engine: &StatisticEngine, model: &WishartModel, n: usize, stream: RngStream) -> Result<f64> {
    let sampler = model.sampler();
    let mut rng = stream.rng();
    let sample: Vec<SpdMatrix> = (0..n).map(|_| sampler.sample_spd(&mut rng)).collect();
    let ys = standardize_sample(&sample)?;
    Ok(engine.statistic(&ys)?.value)
}

/// Null distribution of T²_n from `reps` independent samples; replicate r
/// uses stream r, so the result does not depend on the number of threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCalibration {
    pub alpha: f64,
    pub m: usize,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub distribution: EmpiricalDistribution,
}

impl NullCalibration {
    pub fn critical_value(&self, level: f64) -> (f64, f64) {
        self.distribution.upper_quantile(level)
    }
}

pub fn null_distribution(alpha: f64, m: usize, n: usize, reps: usize, seed: u64, ctrl: &SeriesControl) -> Result<NullCalibration> {
    if reps < 100 {
        return Err(Error::InvalidArgument("reps must be at least 100".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("sample size must be at least 2".into()));
    }
    let engine = StatisticEngine::new(alpha, m, ctrl)?;
    let model = WishartModel::standard(alpha, m)?;
    let base = RngStream::new(seed, 0).fork(TAG_CALIBRATE);
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| null_replicate(&engine, &model, n, base.with_stream(r as u64)))
        .collect::<Result<_>>()?;
    Ok(NullCalibration { alpha, m, n, reps, seed, distribution: EmpiricalDistribution::new(values)? })
}

/// (1 − level) quantile of T²_n under H₀ and its standard error.
pub fn mc_null_quantile(alpha: f64, m: usize, n: usize, level: f64, reps: usize, seed: u64, ctrl: &SeriesControl) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0,1), got {level}")));
    }
    Ok(null_distribution(alpha, m, n, reps, seed, ctrl)?.critical_value(level))
}

/// Weights of the limiting law used by `method`.
pub fn limit_terms(alpha: f64, m: usize, method: Method, eps: f64) -> Result<Vec<(f64, usize)>> {
    match method {
        Method::Asymptotic => {
            let res = eigen_spectrum(alpha, m, None, None, eps)?;
            Ok(res.leading(res.truncation.n))
        }
        Method::Conservative => {
            let (r, _) = truncation_rank(alpha, m, eps)?;
            let p = SpectrumParams::new(alpha, m)?;
            Ok((0..=r).map(|k| (p.rho(k), count_partitions(k, m) as usize)).collect())
        }
        Method::Mc => Err(Error::InvalidArgument("the mc method has no limiting law".into())),
    }
}

/// Reference distribution for a configuration and sample shape.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub method: Method,
    pub reps: usize,
    pub distribution: EmpiricalDistribution,
}

pub fn calibrate(cfg: &GofConfig, m: usize, n: usize) -> Result<Calibration> {
    cfg.validate(m)?;
    match cfg.method {
        Method::Mc => {
            let c = null_distribution(cfg.alpha, m, n, cfg.mc_reps, cfg.seed, &cfg.series)?;
            Ok(Calibration { method: cfg.method, reps: cfg.mc_reps, distribution: c.distribution })
        }
        method => {
            let terms = limit_terms(cfg.alpha, m, method, cfg.eps)?;
            let d = WeightedChiSquare::new(terms)?.simulate(cfg.limit_reps, RngStream::new(cfg.seed, 0).fork(TAG_LIMIT));
            Ok(Calibration { method, reps: cfg.limit_reps, distribution: d })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub version: String,
    pub statistic: f64,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub method: Method,
    pub level: f64,
    pub critical_value: f64,
    pub critical_value_se: f64,
    pub p_value: f64,
    pub reject: bool,
    pub mc_reps: usize,
    pub seed: u64,
    pub flags: Vec<String>,
    pub config: GofConfig,
}

/// Decision from a precomputed reference distribution.
pub fn decide(statistic: &StatisticValue, n: usize, m: usize, cfg: &GofConfig, cal: &Calibration) -> GofReport {
    let (crit, se) = cal.distribution.upper_quantile(cfg.level);
    let p = cal.distribution.p_value(statistic.value);
    let flags = statistic.flags.iter().map(|f| serde_json::to_string(f).unwrap_or_default()).collect();
    GofReport {
        version: crate::VERSION.to_string(),
        statistic: statistic.value,
        n,
        m,
        alpha: cfg.alpha,
        method: cfg.method,
        level: cfg.level,
        critical_value: crit,
        critical_value_se: se,
        p_value: p,
        reject: p <= cfg.level,
        mc_reps: cal.reps,
        seed: cfg.seed,
        flags,
        config: cfg.clone(),
    }
}

pub fn gof_test(sample: &[SpdMatrix], cfg: &GofConfig) -> Result<GofReport> {
    let ys = standardize_sample(sample)?;
    let m = ys[0].len();
    cfg.validate(m)?;
    let stat = StatisticEngine::new(cfg.alpha, m, &cfg.series)?.statistic(&ys)?;
    let cal = calibrate(cfg, m, ys.len())?;
    Ok(decide(&stat, ys.len(), m, cfg, &cal))
}
