//! Wishart model with density ∝ (det Σ)^α (det X)^{α−(m+1)/2} etr(−ΣX), so
//! that E X = αΣ^{-1}. Conventional form: n = 2α degrees of freedom and
//! scale V = (2Σ)^{-1}.

use crate::error::{Error, Result};
use crate::linalg::{spd_inv_sqrt, spd_sqrt, SeriesControl, SpdMatrix, SymmetricMatrix};
use crate::specialfn::{bessel_a2_eig, hyp1f1_eig, log_multigamma, BesselOrder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

/// Names a reproducible random stream. Distinct (seed, stream) pairs give
/// independent ChaCha streams, so replicate r always sees the same numbers no
/// matter how work is split across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream { master_seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.master_seed);
        r.set_stream(self.stream_id);
        r
    }

    /// Stream with a different master seed derived from this one and `tag`,
    /// for separating independent uses of one user seed.
    pub fn fork(&self, tag: u64) -> RngStream {
        RngStream { master_seed: splitmix64(self.master_seed ^ splitmix64(tag)), stream_id: self.stream_id }
    }

    pub fn with_stream(&self, stream_id: u64) -> RngStream {
        RngStream { master_seed: self.master_seed, stream_id }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WishartModel {
    alpha: f64,
    sigma: SpdMatrix,
}

impl WishartModel {
    pub fn new(alpha: f64, sigma: SpdMatrix) -> Result<Self> {
        let m = sigma.dim();
        if !(alpha > 0.5 * (m as f64 - 1.0)) {
            return Err(Error::Domain(format!("Wishart shape must exceed (m-1)/2 = {}, got {alpha}", 0.5 * (m as f64 - 1.0))));
        }
        Ok(WishartModel { alpha, sigma })
    }

    /// W(α, I_m).
    pub fn standard(alpha: f64, m: usize) -> Result<Self> {
        Self::new(alpha, SpdMatrix::identity(m))
    }

    /// From degrees of freedom n and conventional scale V (E X = nV).
    pub fn from_conventional(df: f64, v: &SpdMatrix) -> Result<Self> {
        let sigma = SpdMatrix::new(v.inverse().matrix().scale(0.5))?;
        Self::new(0.5 * df, sigma)
    }

    /// (n, V) with n = 2α, V = (2Σ)^{-1}.
    pub fn to_conventional(&self) -> (f64, SpdMatrix) {
        let v = SpdMatrix::new(self.sigma.inverse().matrix().scale(0.5)).expect("SPD");
        (2.0 * self.alpha, v)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    /// αΣ^{-1}.
    pub fn mean(&self) -> SymmetricMatrix {
        self.sigma.inverse().matrix().scale(self.alpha)
    }

    pub fn sampler(&self) -> WishartSampler {
        WishartSampler::new(self)
    }
}

/// Bartlett-decomposition sampler with the per-model distributions prebuilt.
#[derive(Debug, Clone)]
pub struct WishartSampler {
    m: usize,
    /// Factor F with F Fᵀ = V, or None when V = I/2.
    factor: Option<Vec<f64>>,
    chi: Vec<Gamma<f64>>,
}

impl WishartSampler {
    pub fn new(model: &WishartModel) -> Self {
        let m = model.dim();
        let df = 2.0 * model.alpha;
        let chi = (0..m).map(|i| Gamma::new(0.5 * (df - i as f64), 2.0).expect("valid gamma")).collect();
        let is_identity = model.sigma.matrix() == &SymmetricMatrix::identity(m);
        let factor = if is_identity {
            None
        } else {
            let (_, v) = model.to_conventional();
            Some(spd_sqrt(&v).matrix().as_slice().to_vec())
        };
        WishartSampler { m, factor, chi }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SymmetricMatrix {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            a[i * m + i] = self.chi[i].sample(rng).sqrt();
            for j in 0..i {
                a[i * m + j] = rng.sample(StandardNormal);
            }
        }
        // X = F A Aᵀ Fᵀ, with F = I/√2 when Σ = I
        let mut aat = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                let mut s = 0.0;
                for k in 0..=j {
                    s += a[i * m + k] * a[j * m + k];
                }
                aat[i * m + j] = s;
                aat[j * m + i] = s;
            }
        }
        match &self.factor {
            None => SymmetricMatrix::symmetrize(m, &aat).expect("square").scale(0.5),
            Some(f) => SymmetricMatrix::symmetrize(m, &aat).expect("square").congruence(f).expect("square"),
        }
    }

    /// Draw wrapped as an SPD matrix. Bartlett draws are positive definite with
    /// probability one; a draw that fails the numerical check is redrawn.
    pub fn sample_spd<R: Rng + ?Sized>(&self, rng: &mut R) -> SpdMatrix {
        loop {
            if let Ok(x) = SpdMatrix::new(self.sample(rng)) {
                return x;
            }
        }
    }
}

pub fn wishart_sample(model: &WishartModel, stream: RngStream) -> SpdMatrix {
    model.sampler().sample_spd(&mut stream.rng())
}

pub fn wishart_logpdf(model: &WishartModel, x: &SpdMatrix) -> Result<f64> {
    let m = model.dim();
    if x.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: x.dim() });
    }
    let a = model.alpha;
    let tr = crate::linalg::trace_product(model.sigma.matrix(), x.matrix())?;
    Ok(a * model.sigma.log_det() + (a - 0.5 * (m as f64 + 1.0)) * x.log_det() - tr - log_multigamma(m, a)?)
}

/// ∫ Γ_m(ν+(m+1)/2) A_ν(TX) dW = ₁F₁(α; ν+(m+1)/2; −TΣ^{-1}).
pub fn hankel_wishart(model: &WishartModel, nu: f64, t: &SpdMatrix, ctrl: &SeriesControl) -> Result<f64> {
    let m = model.dim();
    if t.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: t.dim() });
    }
    let s = spd_inv_sqrt(&model.sigma);
    let arg = t.matrix().congruence(s.matrix().as_slice())?;
    let eig: Vec<f64> = crate::linalg::sym_eigenvalues(&arg)?.iter().map(|v| -v).collect();
    let b = nu + 0.5 * (m as f64 + 1.0);
    if b == model.alpha {
        return Ok(crate::specialfn::etr(&eig));
    }
    Ok(hyp1f1_eig(model.alpha, b, &eig, ctrl)?.value)
}

/// Γ_m(α) n^{-1} Σ_j A_ν(T, Y_j), ν = α − (m+1)/2, from eigenvalues of the
/// already standardized Y_j.
pub fn empirical_hankel_eig(sample: &[Vec<f64>], t: &[f64], alpha: f64, ctrl: &SeriesControl) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let m = t.len();
    let order = BesselOrder::for_alpha(alpha, m)?;
    let g = log_multigamma(m, alpha)?.exp();
    let mut s = 0.0;
    for y in sample {
        if y.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: y.len() });
        }
        s += bessel_a2_eig(order, t, y, ctrl)?.value;
    }
    Ok(g * s / sample.len() as f64)
}

pub fn empirical_hankel(sample: &[SpdMatrix], t: &SpdMatrix, alpha: f64, ctrl: &SeriesControl) -> Result<f64> {
    let eig: Vec<Vec<f64>> = sample
        .iter()
        .map(|x| {
            if x.dim() != t.dim() {
                Err(Error::DimensionMismatch { expected: t.dim(), got: x.dim() })
            } else {
                Ok(x.eigenvalues().to_vec())
            }
        })
        .collect::<Result<_>>()?;
    empirical_hankel_eig(&eig, t.eigenvalues(), alpha, ctrl)
}
