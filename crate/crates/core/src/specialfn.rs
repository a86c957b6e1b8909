//! Multivariate gamma and digamma, and series for Bessel and confluent
//! hypergeometric functions of one and two matrix arguments.

use crate::error::{Error, Result};
use crate::linalg::{frobenius, sym_eigenvalues, SeriesControl, SymmetricMatrix};
use crate::partitions::{ln_factorial, ln_partitional_shifted_factorial};
use crate::zonal::{shared_table, ZonalTable};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};
use std::sync::Arc;

/// Frobenius norm above which series results are flagged.
pub const LARGE_ARGUMENT_NORM: f64 = 50.0;

/// Ratio Σ|terms| / |sum| above which a cancellation flag is raised.
const CANCELLATION_RATIO: f64 = 1e6;

fn check_domain(m: usize, a: f64) -> Result<()> {
    if !(a > 0.5 * (m as f64 - 1.0)) {
        return Err(Error::Domain(format!("multivariate gamma of dimension {m} needs a > {}, got {a}", 0.5 * (m as f64 - 1.0))));
    }
    Ok(())
}

/// ln Γ_m(a) = m(m−1)/4 ln π + Σ_j ln Γ(a − (j−1)/2).
pub fn log_multigamma(m: usize, a: f64) -> Result<f64> {
    check_domain(m, a)?;
    let mut s = 0.25 * (m * (m - 1)) as f64 * std::f64::consts::PI.ln();
    for j in 0..m {
        s += ln_gamma(a - 0.5 * j as f64);
    }
    Ok(s)
}

pub fn multigamma(m: usize, a: f64) -> Result<f64> {
    Ok(log_multigamma(m, a)?.exp())
}

/// ψ_m(a) = Σ_j ψ(a − (j−1)/2).
pub fn multidigamma(m: usize, a: f64) -> Result<f64> {
    check_domain(m, a)?;
    Ok((0..m).map(|j| digamma(a - 0.5 * j as f64)).sum())
}

/// etr(Y) from eigenvalues.
pub fn etr(eig: &[f64]) -> f64 {
    eig.iter().sum::<f64>().exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselOrder {
    pub nu: f64,
    pub m: usize,
}

impl BesselOrder {
    pub fn new(nu: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !(nu > 0.5 * (m as f64 - 2.0)) {
            return Err(Error::Domain(format!("Bessel order needs nu > (m-2)/2, got nu={nu}, m={m}")));
        }
        Ok(BesselOrder { nu, m })
    }

    /// The order used by the test statistic: ν = α − (m+1)/2.
    pub fn for_alpha(alpha: f64, m: usize) -> Result<Self> {
        Self::new(alpha - 0.5 * (m as f64 + 1.0), m)
    }

    /// ν + (m+1)/2.
    pub fn shift(&self) -> f64 {
        self.nu + 0.5 * (self.m as f64 + 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QualityFlag {
    LargeArgument { norm: f64 },
    Cancellation { digits_lost: f64 },
    /// The series needed more than the configured max_weight layers.
    ExtendedWeight { weight: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Highest weight layer included.
    pub weight: usize,
    /// Sum of absolute values of all terms.
    pub abs_sum: f64,
    pub flags: Vec<QualityFlag>,
}

impl SeriesValue {
    fn finish(value: f64, weight: usize, abs_sum: f64, norm: f64) -> Self {
        let mut flags = Vec::new();
        if norm > LARGE_ARGUMENT_NORM {
            flags.push(QualityFlag::LargeArgument { norm });
        }
        if abs_sum > CANCELLATION_RATIO * value.abs() && abs_sum > 0.0 {
            flags.push(QualityFlag::Cancellation { digits_lost: (abs_sum / value.abs().max(f64::MIN_POSITIVE)).log10() });
        }
        SeriesValue { value, weight, abs_sum, flags }
    }

    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Coefficient of C_κ(X)C_κ(Y)/C_κ(I) (or of C_κ(Y) in the one-argument form)
/// as a signed logarithm.
type LnCoefficient<'a> = dyn Fn(usize, &crate::partitions::Partition) -> Option<(f64, f64)> + 'a;

fn table_for(m: usize, k: usize, have: &mut Arc<ZonalTable>, cap: usize) -> Result<()> {
    if have.max_weight() < k {
        *have = shared_table(m, (2 * k).max(12).min(cap.max(k)))?;
    }
    Ok(())
}

fn initial_table(m: usize, ctrl: &SeriesControl) -> Result<Arc<ZonalTable>> {
    shared_table(m, ctrl.max_weight.min(12))
}

/// Σ_k Σ_κ c_κ C_κ(x) [C_κ(y)/C_κ(I)] with the adaptive two-layer stop.
fn series_engine(
    m: usize,
    x: &[f64],
    y: Option<&[f64]>,
    coeff: &LnCoefficient<'_>,
    ctrl: &SeriesControl,
    norm: f64,
) -> Result<SeriesValue> {
    ctrl.validate()?;
    let mut table = initial_table(m, ctrl)?;
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut small_run = 0;
    for k in 0..=ctrl.max_weight {
        table_for(m, k, &mut table, ctrl.max_weight)?;
        let layer = table.layer(k);
        let cx = table.layer_values(k, x);
        let cy = y.map(|y| table.layer_values(k, y));
        let mut contrib = 0.0;
        for (i, kappa) in layer.partitions().iter().enumerate() {
            let Some((lnc, sign)) = coeff(k, kappa) else { continue };
            let term = match &cy {
                None => sign * cx[i] * lnc.exp(),
                Some(cy) => {
                    let h = (0.5 * (lnc - layer.ln_identity_values()[i])).exp();
                    sign * (cx[i] * h) * (cy[i] * h)
                }
            };
            contrib += term;
            abs_sum += term.abs();
        }
        sum += contrib;
        if ctrl.layer_small(contrib, sum) {
            small_run += 1;
            if small_run >= 2 {
                return Ok(SeriesValue::finish(sum, k, abs_sum, norm));
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::NonConvergence { weight: ctrl.max_weight, partial: sum })
}

fn eig_of(a: &SymmetricMatrix) -> Result<Vec<f64>> {
    sym_eigenvalues(a)
}


/// A_ν at a symmetric matrix with eigenvalues `y`.
pub fn bessel_a_eig(order: BesselOrder, y: &[f64], ctrl: &SeriesControl) -> Result<SeriesValue> {
    let m = order.m;
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len() });
    }
    let b = order.shift();
    let lg = log_multigamma(m, b)?;
    let coeff = move |k: usize, kappa: &crate::partitions::Partition| {
        let (lb, sb) = ln_partitional_shifted_factorial(b, kappa);
        let sign = if k % 2 == 0 { sb } else { -sb };
        Some((-ln_factorial(k) - lb - lg, sign))
    };
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    series_engine(m, y, None, &coeff, ctrl, norm)
}

pub fn bessel_a(order: BesselOrder, y: &SymmetricMatrix, ctrl: &SeriesControl) -> Result<SeriesValue> {
    if y.dim() != order.m {
        return Err(Error::DimensionMismatch { expected: order.m, got: y.dim() });
    }
    bessel_a_eig(order, &eig_of(y)?, ctrl)
}

/// A_ν(X, Y) from the eigenvalues of X and Y.
pub fn bessel_a2_eig(order: BesselOrder, x: &[f64], y: &[f64], ctrl: &SeriesControl) -> Result<SeriesValue> {
    let m = order.m;
    if x.len() != m || y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: x.len().min(y.len()) });
    }
    let b = order.shift();
    let lg = log_multigamma(m, b)?;
    let coeff = move |k: usize, kappa: &crate::partitions::Partition| {
        let (lb, sb) = ln_partitional_shifted_factorial(b, kappa);
        let sign = if k % 2 == 0 { sb } else { -sb };
        Some((-ln_factorial(k) - lb - lg, sign))
    };
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt();
    series_engine(m, x, Some(y), &coeff, ctrl, norm)
}

pub fn bessel_a2(order: BesselOrder, x: &SymmetricMatrix, y: &SymmetricMatrix, ctrl: &SeriesControl) -> Result<SeriesValue> {
    if x.dim() != order.m || y.dim() != order.m {
        return Err(Error::DimensionMismatch { expected: order.m, got: x.dim().min(y.dim()) });
    }
    bessel_a2_eig(order, &eig_of(x)?, &eig_of(y)?, ctrl)
}

fn hyp_coeff(a: f64, b: f64) -> impl Fn(usize, &crate::partitions::Partition) -> Option<(f64, f64)> {
    move |k, kappa| {
        let (la, sa) = ln_partitional_shifted_factorial(a, kappa);
        if sa == 0.0 || la == f64::NEG_INFINITY {
            return None;
        }
        let (lb, sb) = ln_partitional_shifted_factorial(b, kappa);
        Some((la - lb - ln_factorial(k), sa * sb))
    }
}

fn check_b(b: f64, m: usize, k_max: usize) -> Result<()> {
    // [b]_κ vanishes when some b − (j−1)/2 is a non-positive integer reachable in k_max steps
    for j in 0..m {
        let c = b - 0.5 * j as f64;
        if c <= 0.0 && c.fract() == 0.0 && (-c) < k_max as f64 {
            return Err(Error::Domain(format!("[b]_kappa vanishes for b = {b}")));
        }
    }
    Ok(())
}

/// ₁F₁(a; b; Y) from eigenvalues.
pub fn hyp1f1_eig(a: f64, b: f64, y: &[f64], ctrl: &SeriesControl) -> Result<SeriesValue> {
    let m = y.len();
    check_b(b, m, ctrl.max_weight)?;
    let coeff = hyp_coeff(a, b);
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    series_engine(m, y, None, &coeff, ctrl, norm)
}

pub fn hyp1f1(a: f64, b: f64, y: &SymmetricMatrix, ctrl: &SeriesControl) -> Result<SeriesValue> {
    hyp1f1_eig(a, b, &eig_of(y)?, ctrl)
}

/// ₁F₁(a; b; X, Y) from eigenvalues.
pub fn hyp1f1_2_eig(a: f64, b: f64, x: &[f64], y: &[f64], ctrl: &SeriesControl) -> Result<SeriesValue> {
    let m = x.len();
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len() });
    }
    check_b(b, m, ctrl.max_weight)?;
    let coeff = hyp_coeff(a, b);
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt();
    series_engine(m, x, Some(y), &coeff, ctrl, norm)
}

pub fn hyp1f1_2(a: f64, b: f64, x: &SymmetricMatrix, y: &SymmetricMatrix, ctrl: &SeriesControl) -> Result<SeriesValue> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    hyp1f1_2_eig(a, b, &eig_of(x)?, &eig_of(y)?, ctrl)
}

/// Frobenius norm helper re-exported for flag checks done by callers.
pub fn argument_norm(y: &SymmetricMatrix) -> f64 {
    frobenius(y)
}

/// Per-layer weights (k! [b]_κ C_κ(I))^{-1/2} used by [`BesselProfile`].
#[derive(Debug, Clone)]
pub struct BesselWeights {
    b: f64,
    m: usize,
    half: Vec<Vec<f64>>,
}

impl BesselWeights {
    /// Requires b > (m−1)/2 so every [b]_κ is positive.
    pub fn new(m: usize, b: f64) -> Result<Self> {
        check_domain(m, b)?;
        Ok(BesselWeights { b, m, half: Vec::new() })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Fills the weights through weight k.
    pub fn prepare(&mut self, table: &ZonalTable, k: usize) {
        while self.half.len() <= k {
            let w = self.half.len();
            let layer = table.layer(w);
            let v = layer
                .partitions()
                .iter()
                .zip(layer.ln_identity_values())
                .map(|(kappa, lci)| {
                    let (lb, _) = ln_partitional_shifted_factorial(self.b, kappa);
                    (-0.5 * (ln_factorial(w) + lb + lci)).exp()
                })
                .collect();
            self.half.push(v);
        }
    }
}

/// Scaled zonal values z_κ(x) = C_κ(x)·(k! [b]_κ C_κ(I))^{-1/2}, layer by layer,
/// so that Σ_k (±1)^k Σ_κ z_κ(x) z_κ(y) = Γ_m(b) A_{b−(m+1)/2}(∓X, Y).
#[derive(Debug, Clone)]
pub struct BesselProfile {
    eig: Vec<f64>,
    layers: Vec<Vec<f64>>,
}

impl BesselProfile {
    /// Computes layers until the self-series Σ_κ z_κ² stays below tol² for two
    /// consecutive weights, or `max_weight` is reached.
    pub fn converged(table: &ZonalTable, weights: &mut BesselWeights, eig: &[f64], tol: f64, max_weight: usize) -> Result<Self> {
        if eig.len() != weights.m || table.m() != weights.m {
            return Err(Error::DimensionMismatch { expected: weights.m, got: eig.len() });
        }
        let mut p = BesselProfile { eig: eig.to_vec(), layers: Vec::new() };
        let mut run = 0;
        let k_top = max_weight.min(table.max_weight());
        weights.prepare(table, k_top);
        let pw = table.powers(eig, k_top);
        for k in 0..=k_top {
            let mono = table.monomials(k, &pw, k_top + 1);
            let c = table.combine(k, &mono);
            let z: Vec<f64> = c.iter().zip(&weights.half[k]).map(|(a, w)| a * w).collect();
            let self_layer: f64 = z.iter().map(|v| v * v).sum();
            p.layers.push(z);
            if self_layer <= tol * tol {
                run += 1;
                if run >= 2 {
                    return Ok(p);
                }
            } else {
                run = 0;
            }
        }
        Err(Error::NonConvergence { weight: k_top, partial: f64::NAN })
    }

    pub fn weight(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn extend_to(&mut self, table: &ZonalTable, weights: &mut BesselWeights, k: usize) {
        if self.weight() >= k {
            return;
        }
        weights.prepare(table, k);
        let pw = table.powers(&self.eig, k);
        for w in (self.weight() + 1)..=k {
            let mono = table.monomials(w, &pw, k + 1);
            let c = table.combine(w, &mono);
            self.layers.push(c.iter().zip(&weights.half[w]).map(|(a, h)| a * h).collect());
        }
    }

    /// Profile with no layers yet, to be grown by [`BesselProfile::push_layer`].
    pub fn start(eig: &[f64]) -> Self {
        BesselProfile { eig: eig.to_vec(), layers: Vec::new() }
    }

    /// Number of layers held (weight + 1).
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Appends the next weight.
    pub fn push_layer(&mut self, table: &ZonalTable, weights: &mut BesselWeights) -> Result<()> {
        let w = self.layers.len();
        if w > table.max_weight() || weights.m != table.m() || self.eig.len() != table.m() {
            return Err(Error::NonConvergence { weight: w.saturating_sub(1), partial: f64::NAN });
        }
        weights.prepare(table, w);
        let pw = table.powers(&self.eig, w);
        let mono = table.monomials(w, &pw, w + 1);
        let c = table.combine(w, &mono);
        self.layers.push(c.iter().zip(&weights.half[w]).map(|(a, h)| a * h).collect());
        Ok(())
    }

    /// Σ_κ z_κ(x) z_κ(y) at weight k; both profiles must hold that layer.
    pub fn layer_dot(&self, other: &BesselProfile, k: usize) -> f64 {
        self.layers[k].iter().zip(&other.layers[k]).map(|(u, v)| u * v).sum()
    }

    /// Σ_k s^k Σ_κ z_κ(x) z_κ(y) over the common layers, with s = −1 when
    /// `alternate`. Returns (sum, sum of absolute layer contributions).
    pub fn pair_sum(&self, other: &BesselProfile, alternate: bool) -> (f64, f64) {
        let k = self.weight().min(other.weight());
        let mut s = 0.0;
        let mut a = 0.0;
        for w in 0..=k {
            let d: f64 = self.layers[w].iter().zip(&other.layers[w]).map(|(u, v)| u * v).sum();
            a += d.abs();
            if alternate && w % 2 == 1 {
                s -= d;
            } else {
                s += d;
            }
        }
        (s, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SpdMatrix;
    use rand::{Rng, SeedableRng};

    fn ctrl() -> SeriesControl {
        SeriesControl::default()
    }

    #[test]
    fn multigamma_values() {
        assert!((multigamma(1, 4.3).unwrap() - ln_gamma(4.3).exp()).abs() < 1e-12);
        assert!((multigamma(2, 3.0).unwrap() - 1.5 * std::f64::consts::PI).abs() < 1e-12);
        assert!(multigamma(3, 4.5).unwrap().is_finite());
        assert!(multigamma(3, 0.9).is_err());
    }

    #[test]
    fn multidigamma_is_derivative() {
        for (m, a) in [(1usize, 2.2), (2, 3.0), (3, 4.5), (3, 1.3)] {
            let h = 1e-5;
            let fd = (log_multigamma(m, a + h).unwrap() - log_multigamma(m, a - h).unwrap()) / (2.0 * h);
            assert!((fd - multidigamma(m, a).unwrap()).abs() < 1e-6);
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..50 {
            let v = multidigamma(3, 1.1 + 0.3 * i as f64).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!((multidigamma(1, 2.0).unwrap() - digamma(2.0)).abs() < 1e-15);
    }

    #[test]
    fn bessel_at_zero() {
        let o = BesselOrder::for_alpha(4.5, 3).unwrap();
        let v = bessel_a_eig(o, &[0.0; 3], &ctrl()).unwrap();
        assert!((v.value - 1.0 / multigamma(3, 4.5).unwrap()).abs() < 1e-15);
        let v = bessel_a2_eig(o, &[0.0; 3], &[1.0, 2.0, 3.0], &ctrl()).unwrap();
        assert!((v.value * multigamma(3, 4.5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bessel_scalar_case() {
        let nu = 1.7;
        let o = BesselOrder::new(nu, 1).unwrap();
        for y in [0.3, 2.0, 7.5, -3.0] {
            let mut s = 0.0;
            let mut term = 1.0 / ln_gamma(nu + 1.0).exp();
            for k in 0..200 {
                s += term;
                term *= -y / ((k + 1) as f64 * (nu + 1.0 + k as f64));
            }
            let got = bessel_a_eig(o, &[y], &ctrl()).unwrap().value;
            assert!((got - s).abs() < 1e-12 * s.abs().max(1e-3), "y={y}");
        }
    }

    #[test]
    fn bessel_two_argument_reductions() {
        let o = BesselOrder::for_alpha(3.0, 2).unwrap();
        let x = [1.3, 0.2];
        let a1 = bessel_a_eig(o, &x, &ctrl()).unwrap().value;
        let a2 = bessel_a2_eig(o, &x, &[1.0, 1.0], &ctrl()).unwrap().value;
        assert!((a1 - a2).abs() < 1e-13);
        let y = [0.7, 2.4];
        let u = bessel_a2_eig(o, &x, &y, &ctrl()).unwrap().value;
        let v = bessel_a2_eig(o, &y, &x, &ctrl()).unwrap().value;
        assert!((u - v).abs() < 1e-14);
    }

    #[test]
    fn bessel_bound_random_spd() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for trial in 0..1000 {
            let m = 2 + trial % 2;
            let alpha = if m == 2 { 3.0 } else { 4.5 };
            let o = BesselOrder::for_alpha(alpha, m).unwrap();
            let t: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..4.0)).collect();
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..4.0)).collect();
            let g = multigamma(m, alpha).unwrap();
            let v = bessel_a2_eig(o, &t, &x, &ctrl()).unwrap().value * g;
            assert!(v.abs() <= 1.0 + 1e-9, "trial {trial}: {v}");
        }
    }

    #[test]
    fn hyp1f1_special_cases() {
        let y = [0.4, -1.2, 0.9];
        assert_eq!(hyp1f1_eig(2.0, 3.5, &[0.0; 3], &ctrl()).unwrap().value, 1.0);
        let v = hyp1f1_eig(3.3, 3.3, &y, &ctrl()).unwrap().value;
        assert!((v - etr(&y)).abs() < 1e-12 * etr(&y));
        let a = hyp1f1_eig(1.5, 4.0, &y, &ctrl()).unwrap().value;
        let b = hyp1f1_2_eig(1.5, 4.0, &y, &[1.0; 3], &ctrl()).unwrap().value;
        assert!((a - b).abs() < 1e-13 * a.abs());
    }

    #[test]
    fn kummer_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let m = rng.gen_range(2..=3);
            let mut y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let target = rng.gen_range(0.1..2.0);
            y.iter_mut().for_each(|v| *v *= target / n);
            let a = rng.gen_range(0.5..4.0);
            let b = rng.gen_range(2.0..6.0);
            let lhs = hyp1f1_eig(a, b, &y, &ctrl()).unwrap().value;
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            let rhs = etr(&y) * hyp1f1_eig(b - a, b, &neg, &ctrl()).unwrap().value;
            assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs());
        }
    }

    #[test]
    fn large_argument_flagged() {
        let o = BesselOrder::for_alpha(3.0, 2).unwrap();
        let mut c = ctrl();
        c.max_weight = 120;
        let v = bessel_a_eig(o, &[40.0, 35.0], &c).unwrap();
        assert!(v.flags.iter().any(|f| matches!(f, QualityFlag::LargeArgument { .. })));
        let w = bessel_a_eig(o, &[1.0, 0.5], &c).unwrap();
        assert!(w.is_clean());
    }

    #[test]
    fn non_convergence_reported() {
        let o = BesselOrder::for_alpha(3.0, 2).unwrap();
        let c = SeriesControl { max_weight: 3, ..Default::default() };
        match bessel_a_eig(o, &[5.0, 4.0], &c) {
            Err(Error::NonConvergence { weight, partial }) => {
                assert_eq!(weight, 3);
                assert!(partial.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn profile_pair_sum_matches_series() {
        let m = 3;
        let alpha = 4.5;
        let table = shared_table(m, 60).unwrap();
        let mut w = BesselWeights::new(m, alpha).unwrap();
        let x = [2.1, 0.8, 0.3];
        let y = [1.4, 1.1, 0.2];
        let mut px = BesselProfile::converged(&table, &mut w, &x, 1e-16, 60).unwrap();
        let mut py = BesselProfile::converged(&table, &mut w, &y, 1e-16, 60).unwrap();
        let k = px.weight().max(py.weight());
        px.extend_to(&table, &mut w, k);
        py.extend_to(&table, &mut w, k);
        let g = multigamma(m, alpha).unwrap();
        let o = BesselOrder::for_alpha(alpha, m).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let direct = bessel_a2_eig(o, &neg, &y, &ctrl()).unwrap().value * g;
        let (s, _) = px.pair_sum(&py, false);
        assert!((s - direct).abs() < 1e-12 * direct);
        let alt = bessel_a2_eig(o, &x, &y, &ctrl()).unwrap().value * g;
        let (s2, _) = px.pair_sum(&py, true);
        assert!((s2 - alt).abs() < 1e-11);
    }

    /// Haar-random orthogonal matrix from QR of a Gaussian matrix.
    fn haar(m: usize, rng: &mut impl Rng) -> Vec<f64> {
        use rand_distr::StandardNormal;
        let g = nalgebra::DMatrix::<f64>::from_fn(m, m, |_, _| rng.sample(StandardNormal));
        let qr = g.qr();
        let (q, r) = (qr.q(), qr.r());
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = q[(i, j)] * r[(j, j)].signum();
            }
        }
        out
    }

    #[test]
    fn average_representation() {
        // A_ν(X, Y) = E_H A_ν(H X Hᵀ Y)
        let m = 2;
        let o = BesselOrder::for_alpha(3.0, m).unwrap();
        let x = SymmetricMatrix::diag(&[1.5, 0.4]);
        let y = SpdMatrix::from_diag(&[0.9, 0.3]).unwrap();
        let ys = crate::linalg::spd_sqrt(&y);
        let target = bessel_a2_eig(o, &[1.5, 0.4], &[0.9, 0.3], &ctrl()).unwrap().value;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let reps = 10000;
        let mut vals = Vec::with_capacity(reps);
        for _ in 0..reps {
            let h = haar(m, &mut rng);
            let hx = x.congruence(&h).unwrap();
            let arg = hx.congruence(ys.matrix().as_slice()).unwrap();
            vals.push(bessel_a(o, &arg, &ctrl()).unwrap().value);
        }
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - target).abs() <= 3.0 * sd / (reps as f64).sqrt() + 1e-12, "{mean} vs {target}");
    }
}
