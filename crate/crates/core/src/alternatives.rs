//! Alternatives to the Wishart null: contiguous families drifting to P₀ at
//! rate n^{-1/2}, fixed alternatives, the shift c(T) of the limiting field,
//! power simulation and the approximate Bahadur slope.

use crate::error::{Error, Result};
use crate::goftest::{null_distribution, standardize_sample, GofConfig, StatisticEngine};
use crate::linalg::{spd_inv_sqrt, SeriesControl, SpdMatrix};
use crate::specialfn::{log_multigamma, multidigamma};
use crate::spectrum::{eigen_spectrum, EmpiricalDistribution};
use crate::wishart::{RngStream, WishartModel, WishartSampler};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const TAG_POWER: u64 = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// W(α, (1 + n^{-1/2}) I)
    Scale,
    /// W(α + n^{-1/2}, I)
    Shape,
    /// W(α, I) contaminated by W(2α, I) with probability n^{-1/2}
    Contamination,
    /// P₀ itself (direction h ≡ 0)
    FixedCustom,
    /// Matrix F with shapes (a, b): B^{-1/2} A B^{-1/2}, A ~ W(a, I), B ~ W(b, I)
    MatrixF,
    /// Generalized inverse Gaussian contamination; recognized but unsupported.
    GigContamination,
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scale" => Ok(FamilyKind::Scale),
            "shape" => Ok(FamilyKind::Shape),
            "contam" | "contamination" => Ok(FamilyKind::Contamination),
            "null" | "fixed-custom" => Ok(FamilyKind::FixedCustom),
            "matrix-f" => Ok(FamilyKind::MatrixF),
            "gig" | "gig-contamination" => Ok(FamilyKind::GigContamination),
            _ => Err(Error::InvalidArgument(format!("unknown family {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeFamily {
    pub kind: FamilyKind,
    pub alpha: f64,
    pub m: usize,
    /// Sample size setting the contiguous drift.
    pub n: usize,
    /// Matrix-F shapes (a, b).
    pub extra: Option<(f64, f64)>,
}

impl AlternativeFamily {
    pub fn new(kind: FamilyKind, alpha: f64, m: usize, n: usize) -> Result<Self> {
        let fam = AlternativeFamily { kind, alpha, m, n, extra: None };
        fam.check()?;
        Ok(fam)
    }

    pub fn matrix_f(a: f64, b: f64, m: usize) -> Result<Self> {
        let fam = AlternativeFamily { kind: FamilyKind::MatrixF, alpha: a, m, n: 1, extra: Some((a, b)) };
        fam.check()?;
        Ok(fam)
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidArgument("n and m must be positive".into()));
        }
        let half = 0.5 * (self.m as f64 - 1.0);
        match self.kind {
            FamilyKind::GigContamination => Err(Error::NotImplemented(
                "generalized inverse Gaussian contamination needs a matrix Bessel function of the second kind and a sampler".into(),
            )),
            FamilyKind::MatrixF => {
                let (a, b) = self.extra.ok_or_else(|| Error::InvalidArgument("matrix F needs shapes (a, b)".into()))?;
                if !(a > half) || !(b > 0.5 * (self.m as f64 + 1.0)) {
                    return Err(Error::Domain(format!("matrix F shapes need a > (m-1)/2 and b > (m+1)/2, got ({a}, {b})")));
                }
                Ok(())
            }
            _ => {
                if !(self.alpha > half) {
                    return Err(Error::Domain(format!("alpha must exceed (m-1)/2, got {}", self.alpha)));
                }
                Ok(())
            }
        }
    }

    /// n^{-1/2}
    pub fn drift(&self) -> f64 {
        1.0 / (self.n as f64).sqrt()
    }

    pub fn sampler(&self) -> Result<FamilySampler> {
        self.check()?;
        let m = self.m;
        let a = self.alpha;
        let d = self.drift();
        let s = match self.kind {
            FamilyKind::Scale => FamilySampler::One(WishartModel::new(a, SpdMatrix::from_diag(&vec![1.0 + d; m])?)?.sampler()),
            FamilyKind::Shape => FamilySampler::One(WishartModel::standard(a + d, m)?.sampler()),
            FamilyKind::FixedCustom => FamilySampler::One(WishartModel::standard(a, m)?.sampler()),
            FamilyKind::Contamination => FamilySampler::Mixture {
                base: WishartModel::standard(a, m)?.sampler(),
                other: WishartModel::standard(2.0 * a, m)?.sampler(),
                p: d,
            },
            FamilyKind::MatrixF => {
                let (fa, fb) = self.extra.expect("checked");
                FamilySampler::MatrixF { num: WishartModel::standard(fa, m)?.sampler(), den: WishartModel::standard(fb, m)?.sampler() }
            }
            FamilyKind::GigContamination => unreachable!("rejected by check"),
        };
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub enum FamilySampler {
    One(WishartSampler),
    Mixture { base: WishartSampler, other: WishartSampler, p: f64 },
    MatrixF { num: WishartSampler, den: WishartSampler },
}

impl FamilySampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SpdMatrix {
        match self {
            FamilySampler::One(s) => s.sample_spd(rng),
            FamilySampler::Mixture { base, other, p } => {
                if rng.gen::<f64>() < *p {
                    other.sample_spd(rng)
                } else {
                    base.sample_spd(rng)
                }
            }
            FamilySampler::MatrixF { num, den } => loop {
                let a = num.sample_spd(rng);
                let b = den.sample_spd(rng);
                let r = spd_inv_sqrt(&b);
                let x = a.matrix().congruence(r.matrix().as_slice()).expect("same dimension");
                if let Ok(x) = SpdMatrix::new(x) {
                    break x;
                }
            },
        }
    }
}

pub fn sample_alternative(fam: &AlternativeFamily, stream: RngStream) -> Result<SpdMatrix> {
    Ok(fam.sampler()?.sample(&mut stream.rng()))
}

/// Limit direction h of the family: mα − tr X (scale), log det X − ψ_m(α)
/// (shape), Γ_m(α)/Γ_m(2α)(det X)^α − 1 (contamination), 0 otherwise.
pub fn h_limit(fam: &AlternativeFamily, x: &SpdMatrix) -> Result<f64> {
    let m = fam.m;
    if x.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: x.dim() });
    }
    let a = fam.alpha;
    match fam.kind {
        FamilyKind::Scale => Ok(m as f64 * a - x.trace()),
        FamilyKind::Shape => Ok(x.log_det() - multidigamma(m, a)?),
        FamilyKind::Contamination => Ok((log_multigamma(m, a)? - log_multigamma(m, 2.0 * a)? + a * x.log_det()).exp() - 1.0),
        FamilyKind::FixedCustom => Ok(0.0),
        FamilyKind::MatrixF => Err(Error::InvalidArgument("a fixed alternative has no limit direction".into())),
        FamilyKind::GigContamination => Err(Error::NotImplemented("generalized inverse Gaussian contamination".into())),
    }
}

/// Monte Carlo estimate and standard error of
/// c(T) = ∫[Γ_m(α)A_ν(T, X/α) + tr(X − αI)(tr T)etr(−T/α)/(α²m) − etr(−T/α)] h(X) dP₀(X).
pub fn shift_c<H>(t: &SpdMatrix, h: H, alpha: f64, draws: usize, stream: RngStream, ctrl: &SeriesControl) -> Result<(f64, f64)>
where
    H: Fn(&SpdMatrix) -> Result<f64>,
{
    let m = t.dim();
    if draws < 2 {
        return Err(Error::InvalidArgument("need at least two draws".into()));
    }
    let engine = StatisticEngine::new(alpha, m, ctrl)?;
    let sampler = WishartModel::standard(alpha, m)?.sampler();
    let mut rng = stream.rng();
    let xs: Vec<SpdMatrix> = (0..draws).map(|_| sampler.sample_spd(&mut rng)).collect();
    let hs: Vec<f64> = xs.iter().map(&h).collect::<Result<_>>()?;
    let scaled: Vec<Vec<f64>> = xs.iter().map(|x| x.eigenvalues().iter().map(|v| v / alpha).collect()).collect();
    let mut prof = engine.profiles(&scaled)?;
    let mut w = engine.weights();
    let a = engine.hankel_values(t.eigenvalues(), &mut prof, &mut w, ctrl)?;
    let trt = t.trace();
    let e = (-trt / alpha).exp();
    let lin = trt * e / (alpha * alpha * m as f64);
    let ma = m as f64 * alpha;
    let vals: Vec<f64> = (0..draws).map(|i| (a[i] + (xs[i].trace() - ma) * lin - e) * hs[i]).collect();
    Ok(mean_se(&vals))
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// MC mean and standard error of the family's h under P₀.
pub fn h_mean_under_null(fam: &AlternativeFamily, draws: usize, stream: RngStream) -> Result<(f64, f64)> {
    let sampler = WishartModel::standard(fam.alpha, fam.m)?.sampler();
    let mut rng = stream.rng();
    let vals: Vec<f64> = (0..draws).map(|_| h_limit(fam, &sampler.sample_spd(&mut rng))).collect::<Result<_>>()?;
    Ok(mean_se(&vals))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub version: String,
    pub family: FamilyKind,
    pub theta_or_n: f64,
    pub alpha: f64,
    pub m: usize,
    pub level: f64,
    pub reps: usize,
    pub calibration_reps: usize,
    pub critical_value: f64,
    pub reject_rate: f64,
    pub se: f64,
    pub seed: u64,
}

/// Rejection frequency of the mc test at `level` over `reps` samples of size
/// n from the family. The null distribution is computed once with
/// `cfg.mc_reps` replicates and reused.
pub fn power_sim(fam: &AlternativeFamily, n: usize, level: f64, reps: usize, seed: u64, cfg: &GofConfig) -> Result<PowerResult> {
    if reps < 100 {
        return Err(Error::InvalidArgument("reps must be at least 100".into()));
    }
    let mut cfg = cfg.clone();
    cfg.level = level;
    cfg.seed = seed;
    cfg.validate(fam.m)?;
    let null = null_distribution(cfg.alpha, fam.m, n, cfg.mc_reps, seed, &cfg.series)?;
    let (crit, _) = null.critical_value(level);
    let (rate, se) = rejection_rate(fam, n, level, reps, seed, cfg.alpha, &cfg.series, &null.distribution)?;
    Ok(PowerResult {
        version: crate::VERSION.to_string(),
        family: fam.kind,
        theta_or_n: n as f64,
        alpha: cfg.alpha,
        m: fam.m,
        level,
        reps,
        calibration_reps: cfg.mc_reps,
        critical_value: crit,
        reject_rate: rate,
        se,
        seed,
    })
}

/// Rejection frequency and binomial standard error against a given null
/// distribution of T²_n; reject when the mc p-value is at most `level`.
#[allow(clippy::too_many_arguments)]
pub fn rejection_rate(fam: &AlternativeFamily, n: usize, level: f64, reps: usize, seed: u64, alpha: f64, ctrl: &SeriesControl, null: &EmpiricalDistribution) -> Result<(f64, f64)> {
    let engine = StatisticEngine::new(alpha, fam.m, ctrl)?;
    let sampler = fam.sampler()?;
    let base = RngStream::new(seed, 0).fork(TAG_POWER);
    let rejections: Vec<bool> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = base.with_stream(r as u64).rng();
            let sample: Vec<SpdMatrix> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
            let ys = standardize_sample(&sample)?;
            let t = engine.statistic(&ys)?.value;
            Ok(null.p_value(t) <= level)
        })
        .collect::<Result<_>>()?;
    let rate = rejections.iter().filter(|b| **b).count() as f64 / reps as f64;
    Ok((rate, (rate * (1.0 - rate) / reps as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BahadurSlope {
    pub theta: f64,
    /// b²(θ) = θ² ∫ [∫ Γ_m(α)A_ν(T, X/α) h_θ(X) dP₀(X)]² dP₀(T)
    pub b2: f64,
    pub se: f64,
    /// Largest distinct eigenvalue of the limiting covariance operator.
    pub delta1: f64,
    /// b²(θ)/(θ² δ₁)
    pub ratio: f64,
}

/// Nested Monte Carlo for b²(θ). The inner integral reuses one set of
/// `draws_x` null draws for every outer T.
#[allow(clippy::too_many_arguments)]
pub fn bahadur_b2<H>(theta: f64, h_theta: H, alpha: f64, m: usize, draws_t: usize, draws_x: usize, stream: RngStream, ctrl: &SeriesControl) -> Result<BahadurSlope>
where
    H: Fn(&SpdMatrix) -> Result<f64>,
{
    if draws_t < 2 || draws_x < 1 {
        return Err(Error::InvalidArgument("need at least two outer and one inner draw".into()));
    }
    let engine = StatisticEngine::new(alpha, m, ctrl)?;
    let sampler = WishartModel::standard(alpha, m)?.sampler();
    let mut rng = stream.rng();
    let xs: Vec<SpdMatrix> = (0..draws_x).map(|_| sampler.sample_spd(&mut rng)).collect();
    let hs: Vec<f64> = xs.iter().map(&h_theta).collect::<Result<_>>()?;
    let sp = eigen_spectrum(alpha, m, None, None, 1e-10)?;
    let delta1 = sp.deltas[0].0;
    let mut outer = Vec::with_capacity(draws_t);
    if hs.iter().all(|v| *v == 0.0) {
        outer.resize(draws_t, 0.0);
    } else {
        let scaled: Vec<Vec<f64>> = xs.iter().map(|x| x.eigenvalues().iter().map(|v| v / alpha).collect()).collect();
        let mut prof = engine.profiles(&scaled)?;
        let mut w = engine.weights();
        let mut trng = stream.fork(1).rng();
        for _ in 0..draws_t {
            let t = sampler.sample_spd(&mut trng);
            let a = engine.hankel_values(t.eigenvalues(), &mut prof, &mut w, ctrl)?;
            let inner = a.iter().zip(&hs).map(|(u, v)| u * v).sum::<f64>() / draws_x as f64;
            outer.push(theta * theta * inner * inner);
        }
    }
    let (b2, se) = mean_se(&outer);
    let ratio = if theta != 0.0 { b2 / (theta * theta * delta1) } else { 0.0 };
    Ok(BahadurSlope { theta, b2, se, delta1, ratio })
}

/// Mean of T²_n / n over `reps` samples of size n from the family.
pub fn mean_scaled_statistic(fam: &AlternativeFamily, alpha: f64, n: usize, reps: usize, seed: u64, ctrl: &SeriesControl) -> Result<(f64, f64)> {
    let engine = StatisticEngine::new(alpha, fam.m, ctrl)?;
    let sampler = fam.sampler()?;
    let base = RngStream::new(seed, 0).fork(TAG_POWER + 1);
    let vals: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = base.with_stream(r as u64).rng();
            let sample: Vec<SpdMatrix> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
            let ys = standardize_sample(&sample)?;
            Ok(engine.statistic(&ys)?.value / n as f64)
        })
        .collect::<Result<_>>()?;
    Ok(mean_se(&vals))
}
