//! Small dense symmetric matrices and the spectral helpers the rest of the
//! crate builds on.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative threshold used when deciding positive definiteness.
pub const SPD_REL_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Real symmetric m×m matrix. The upper triangle is the source of truth and the
/// full array is kept mirrored so element access never has to branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        SymmetricMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut a = Self::zeros(dim);
        for i in 0..dim {
            a.data[i * dim + i] = 1.0;
        }
        a
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut a = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            a.data[i * values.len() + i] = *v;
        }
        a
    }

    /// Builds from the upper triangle, row-major: a11, a12, .., a1m, a22, .., amm.
    pub fn from_upper(dim: usize, upper: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let need = dim * (dim + 1) / 2;
        if upper.len() != need {
            return Err(Error::DimensionMismatch { expected: need, got: upper.len() });
        }
        let mut a = Self::zeros(dim);
        let mut idx = 0;
        for i in 0..dim {
            for j in i..dim {
                a.data[i * dim + j] = upper[idx];
                a.data[j * dim + i] = upper[idx];
                idx += 1;
            }
        }
        Ok(a)
    }

    /// Builds from rows. The lower triangle is ignored and replaced by the
    /// mirror of the upper triangle.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let mut a = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            for j in i..dim {
                a.data[i * dim + j] = row[j];
                a.data[j * dim + i] = row[j];
            }
        }
        Ok(a)
    }

    /// Symmetrizes an arbitrary row-major square array as (B + Bᵀ)/2.
    pub fn symmetrize(dim: usize, full: &[f64]) -> Result<Self> {
        if full.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: full.len() });
        }
        let mut a = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = 0.5 * (full[i * dim + j] + full[j * dim + i]);
                a.data[i * dim + j] = v;
                a.data[j * dim + i] = v;
            }
        }
        Ok(a)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Row-major full array.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn upper(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * (self.dim + 1) / 2);
        for i in 0..self.dim {
            for j in i..self.dim {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        SymmetricMatrix { dim: self.dim, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim, other.dim)?;
        Ok(SymmetricMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim, other.dim)?;
        Ok(SymmetricMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Plain row-major product, not symmetric in general.
    pub fn matmul(&self, other: &Self) -> Result<Vec<f64>> {
        check_dims(self.dim, other.dim)?;
        Ok(matmul(self.dim, &self.data, &other.data))
    }

    /// M A Mᵀ for a general square row-major M.
    pub fn congruence(&self, m: &[f64]) -> Result<Self> {
        let d = self.dim;
        if m.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: m.len() });
        }
        let ma = matmul(d, m, &self.data);
        let mut mt = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                mt[j * d + i] = m[i * d + j];
            }
        }
        SymmetricMatrix::symmetrize(d, &matmul(d, &ma, &mt))
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        Err(Error::DimensionMismatch { expected: a, got: b })
    } else {
        Ok(())
    }
}

pub(crate) fn matmul(d: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

pub fn trace(a: &SymmetricMatrix) -> f64 {
    (0..a.dim).map(|i| a.get(i, i)).sum()
}

pub fn frobenius(a: &SymmetricMatrix) -> f64 {
    a.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// ⟨A, B⟩ = tr(AB).
pub fn trace_product(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<f64> {
    check_dims(a.dim, b.dim)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    /// Column k (entries `vectors[i * m + k]`) is the eigenvector for `values[k]`.
    pub vectors: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Q f(Λ) Qᵀ.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let m = self.dim();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let mut full = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for k in 0..m {
                    s += self.vectors[i * m + k] * fv[k] * self.vectors[j * m + k];
                }
                full[i * m + j] = s;
                full[j * m + i] = s;
            }
        }
        SymmetricMatrix { dim: m, data: full }
    }
}

/// Cyclic Jacobi eigen-solver.
pub fn sym_eig(a: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    let n = a.dim;
    let mut w = a.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = frobenius(a);
    let mut converged = n == 1 || scale == 0.0;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| w[i * n + j] * w[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-300 || off <= f64::EPSILON * 1e-3 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = w[p * n + p];
                let aqq = w[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let wkp = w[k * n + p];
                    let wkq = w[k * n + q];
                    w[k * n + p] = c * wkp - s * wkq;
                    w[k * n + q] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let wpk = w[p * n + k];
                    let wqk = w[q * n + k];
                    w[p * n + k] = c * wpk - s * wqk;
                    w[q * n + k] = s * wpk + c * wqk;
                }
                w[p * n + q] = 0.0;
                w[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| w[i * n + j].abs())
            .fold(0.0, f64::max);
        if off > 1e-10 * scale.max(1e-300) {
            return Err(Error::Numerical(format!(
                "Jacobi iteration did not converge after {JACOBI_MAX_SWEEPS} sweeps"
            )));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[j * n + j].partial_cmp(&w[i * n + i]).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<f64> = order.iter().map(|&i| w[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (newk, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + newk] = v[i * n + k];
        }
    }
    Ok(SpectralDecomposition { values, vectors })
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues(a: &SymmetricMatrix) -> Result<Vec<f64>> {
    if a.dim == 1 {
        return Ok(vec![a.get(0, 0)]);
    }
    if a.dim == 2 {
        let (p, q, r) = (a.get(0, 0), a.get(0, 1), a.get(1, 1));
        let mean = 0.5 * (p + r);
        let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        return Ok(vec![mean + rad, mean - rad]);
    }
    Ok(sym_eig(a)?.values)
}

/// Symmetric positive-definite matrix with its eigen-decomposition computed at
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdMatrix {
    base: SymmetricMatrix,
    eig: SpectralDecomposition,
}

impl SpdMatrix {
    pub fn new(base: SymmetricMatrix) -> Result<Self> {
        let eig = sym_eig(&base)?;
        let lmax = eig.values[0];
        let lmin = *eig.values.last().unwrap();
        let tol = SPD_REL_TOL * lmax.abs();
        if !(lmax > 0.0) || !(lmin > tol) {
            return Err(Error::NotPositiveDefinite { min_eig: lmin, tol });
        }
        Ok(SpdMatrix { base, eig })
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix::new(SymmetricMatrix::identity(dim)).expect("identity is SPD")
    }

    pub fn from_diag(values: &[f64]) -> Result<Self> {
        SpdMatrix::new(SymmetricMatrix::diag(values))
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }

    pub fn matrix(&self) -> &SymmetricMatrix {
        &self.base
    }

    pub fn eigen(&self) -> &SpectralDecomposition {
        &self.eig
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.values
    }

    pub fn trace(&self) -> f64 {
        trace(&self.base)
    }

    pub fn log_det(&self) -> f64 {
        self.eig.values.iter().map(|v| v.ln()).sum()
    }

    pub fn inverse(&self) -> SpdMatrix {
        let inv = self.eig.apply(|v| 1.0 / v);
        SpdMatrix::new(inv).expect("inverse of SPD is SPD")
    }
}

pub fn spd_sqrt(a: &SpdMatrix) -> SpdMatrix {
    SpdMatrix::new(a.eig.apply(f64::sqrt)).expect("square root of SPD is SPD")
}

pub fn spd_inv_sqrt(a: &SpdMatrix) -> SpdMatrix {
    SpdMatrix::new(a.eig.apply(|v| 1.0 / v.sqrt())).expect("inverse square root of SPD is SPD")
}

/// Truncation policy shared by all matrix-argument series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    pub max_weight: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub hard_cap: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl { max_weight: 60, rel_tol: 1e-10, abs_tol: 1e-14, hard_cap: 120 }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<()> {
        if self.max_weight > self.hard_cap {
            return Err(Error::InvalidArgument(format!(
                "max_weight {} exceeds hard_cap {}",
                self.max_weight, self.hard_cap
            )));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("series tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn with_max_weight(mut self, k: usize) -> Self {
        self.max_weight = k;
        self.hard_cap = self.hard_cap.max(k);
        self
    }

    /// Layer test used by every adaptive series in the crate.
    #[inline]
    pub fn layer_small(&self, contribution: f64, partial: f64) -> bool {
        contribution.abs() <= self.abs_tol && contribution.abs() <= self.rel_tol * partial.abs()
    }
}
