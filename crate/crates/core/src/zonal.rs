//! Zonal polynomials C_κ in the normalization Σ_{|κ|=k} C_κ(Y) = (tr Y)^k.
//!
//! Each polynomial is kept in the monomial symmetric basis of the eigenvalues.
//! Coefficients come from James' recurrence, which fixes C_κ up to a constant,
//! and are then scaled to the closed form for C_κ(I_m).

use crate::error::{Error, Result};
use crate::partitions::{enumerate_partitions, ln_factorial, ln_partitional_shifted_factorial, Partition};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

/// Largest weight a table may be built to.
pub const ZONAL_HARD_CAP: usize = 120;

#[derive(Debug, Clone)]
pub struct ZonalLayer {
    weight: usize,
    partitions: Vec<Partition>,
    index: HashMap<Partition, usize>,
    /// Row i holds c_{κ_i μ_j} for j ≥ i (zero below the diagonal by dominance).
    coeffs: Vec<Vec<f64>>,
    /// Distinct permutations of each padded exponent vector, flattened by m.
    perms: Vec<Vec<u16>>,
    identity: Vec<f64>,
    ln_identity: Vec<f64>,
}

impl ZonalLayer {
    pub fn weight(&self) -> usize {
        self.weight
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    pub fn index_of(&self, kappa: &Partition) -> Option<usize> {
        self.index.get(kappa).copied()
    }

    /// C_κ(I_m) for each κ in the layer.
    pub fn identity_values(&self) -> &[f64] {
        &self.identity
    }

    pub fn ln_identity_values(&self) -> &[f64] {
        &self.ln_identity
    }

    /// Monomial coefficient of M_μ in C_κ (zero unless μ ≤ κ).
    pub fn coefficient(&self, kappa: usize, mu: usize) -> f64 {
        if mu < kappa {
            0.0
        } else {
            self.coeffs[kappa][mu - kappa]
        }
    }
}

#[derive(Debug, Clone)]
pub struct ZonalTable {
    m: usize,
    layers: Vec<ZonalLayer>,
}

impl ZonalTable {
    pub fn build(m: usize, max_weight: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if max_weight > ZONAL_HARD_CAP {
            return Err(Error::InvalidArgument(format!(
                "zonal table weight {max_weight} exceeds hard cap {ZONAL_HARD_CAP}"
            )));
        }
        let layers = (0..=max_weight).map(|k| build_layer(m, k)).collect();
        Ok(ZonalTable { m, layers })
    }

    /// Extends the table in place to a larger weight.
    pub fn extend_to(&mut self, max_weight: usize) -> Result<()> {
        if max_weight > ZONAL_HARD_CAP {
            return Err(Error::InvalidArgument(format!(
                "zonal table weight {max_weight} exceeds hard cap {ZONAL_HARD_CAP}"
            )));
        }
        while self.layers.len() <= max_weight {
            let k = self.layers.len();
            self.layers.push(build_layer(self.m, k));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn max_weight(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layer(&self, k: usize) -> &ZonalLayer {
        &self.layers[k]
    }

    pub fn layers(&self) -> &[ZonalLayer] {
        &self.layers
    }

    fn locate(&self, kappa: &Partition) -> Result<(usize, usize)> {
        let k = kappa.weight();
        if k > self.max_weight() || kappa.len() > self.m {
            return Err(Error::InvalidArgument(format!("partition {kappa} not in table")));
        }
        let i = self.layers[k]
            .index_of(kappa)
            .ok_or_else(|| Error::InvalidArgument(format!("partition {kappa} not in table")))?;
        Ok((k, i))
    }

    /// Power table x_i^e for e ≤ k_max.
    pub fn powers(&self, eig: &[f64], k_max: usize) -> Vec<f64> {
        let m = self.m;
        let mut pw = vec![1.0; m * (k_max + 1)];
        for i in 0..m {
            for e in 1..=k_max {
                pw[i * (k_max + 1) + e] = pw[i * (k_max + 1) + e - 1] * eig[i];
            }
        }
        pw
    }

    /// Monomial symmetric functions M_μ(x) for every μ in layer k.
    pub fn monomials(&self, k: usize, pw: &[f64], stride: usize) -> Vec<f64> {
        let m = self.m;
        let layer = &self.layers[k];
        layer
            .perms
            .iter()
            .map(|flat| {
                flat.chunks(m)
                    .map(|e| e.iter().enumerate().map(|(i, &ei)| pw[i * stride + ei as usize]).product::<f64>())
                    .sum()
            })
            .collect()
    }

    /// C_κ(x) for every κ in layer k at eigenvalues x.
    pub fn layer_values(&self, k: usize, eig: &[f64]) -> Vec<f64> {
        let pw = self.powers(eig, k);
        let mono = self.monomials(k, &pw, k + 1);
        self.combine(k, &mono)
    }

    pub(crate) fn combine(&self, k: usize, mono: &[f64]) -> Vec<f64> {
        let layer = &self.layers[k];
        layer
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().zip(&mono[i..]).map(|(c, v)| c * v).sum())
            .collect()
    }

    /// C_κ(x) for every layer 0..=k_max.
    pub fn values_up_to(&self, k_max: usize, eig: &[f64]) -> Vec<Vec<f64>> {
        let pw = self.powers(eig, k_max);
        (0..=k_max)
            .map(|k| {
                let mono = self.monomials(k, &pw, k_max + 1);
                self.combine(k, &mono)
            })
            .collect()
    }

    /// Text dump: one line per partition with its monomial coefficients.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "m={} K={}", self.m, self.max_weight());
        for layer in &self.layers {
            for (i, kappa) in layer.partitions.iter().enumerate() {
                let _ = write!(s, "{kappa} I={:.17e}:", layer.identity[i]);
                for (j, c) in layer.coeffs[i].iter().enumerate() {
                    if *c != 0.0 {
                        let _ = write!(s, " {}={:.17e}", layer.partitions[i + j], c);
                    }
                }
                s.push('\n');
            }
        }
        s
    }
}

fn build_layer(m: usize, k: usize) -> ZonalLayer {
    let partitions: Vec<Partition> = enumerate_partitions(k, m).iter().cloned().collect();
    let n = partitions.len();
    let index: HashMap<Partition, usize> =
        partitions.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
    let rho: Vec<f64> = partitions.iter().map(rho_james).collect();
    let padded: Vec<Vec<usize>> = partitions.iter().map(|p| p.padded(m)).collect();

    // For each λ the moves (target index μ, integer weight) are independent of κ.
    let moves: Vec<Vec<(usize, f64)>> = padded
        .iter()
        .map(|l| {
            let mut out = Vec::new();
            for j in 0..m {
                for i in 0..j {
                    for t in 1..=l[j] {
                        let mut v = l.clone();
                        v[i] += t;
                        v[j] -= t;
                        let mu = Partition::from_unsorted(v);
                        let w = (l[i] + t) as f64 - (l[j] - t) as f64;
                        if let Some(&idx) = index.get(&mu) {
                            out.push((idx, w));
                        }
                    }
                }
            }
            out
        })
        .collect();

    let mut coeffs = Vec::with_capacity(n);
    for a in 0..n {
        let mut row = vec![0.0; n - a];
        row[0] = 1.0;
        for b in (a + 1)..n {
            if !partitions[a].dominates(&partitions[b]) {
                continue;
            }
            let mut s = 0.0;
            for &(mu, w) in &moves[b] {
                if mu >= a && mu < b {
                    s += w * row[mu - a];
                }
            }
            row[b - a] = s / (rho[a] - rho[b]);
        }
        coeffs.push(row);
    }

    let perms: Vec<Vec<u16>> = padded.iter().map(|e| distinct_permutations(e)).collect();
    let ln_identity: Vec<f64> = partitions.iter().map(|p| ln_zonal_at_identity(p, m)).collect();
    let identity: Vec<f64> = ln_identity.iter().map(|l| l.exp()).collect();
    for a in 0..n {
        let raw: f64 = coeffs[a].iter().enumerate().map(|(j, c)| c * (perms[a + j].len() / m) as f64).sum();
        let scale = identity[a] / raw;
        for c in coeffs[a].iter_mut() {
            *c *= scale;
        }
    }
    ZonalLayer { weight: k, partitions, index, coeffs, perms, identity, ln_identity }
}

/// ρ_κ = Σ k_i (k_i − i), 1-based i.
fn rho_james(p: &Partition) -> f64 {
    p.parts().iter().enumerate().map(|(i, &k)| k as f64 * (k as f64 - (i + 1) as f64)).sum()
}

fn distinct_permutations(e: &[usize]) -> Vec<u16> {
    let mut v: Vec<u16> = e.iter().map(|&x| x as u16).collect();
    v.sort_unstable();
    let mut out = Vec::new();
    loop {
        out.extend_from_slice(&v);
        // next lexicographic permutation
        let n = v.len();
        if n < 2 {
            break;
        }
        let mut i = n - 1;
        while i > 0 && v[i - 1] >= v[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = n - 1;
        while v[j] <= v[i - 1] {
            j -= 1;
        }
        v.swap(i - 1, j);
        v[i..].reverse();
    }
    out
}

/// ln C_κ(I_m) from the closed-form product.
pub fn ln_zonal_at_identity(kappa: &Partition, m: usize) -> f64 {
    if kappa.len() > m {
        return f64::NEG_INFINITY;
    }
    let k = kappa.weight();
    let l = kappa.len();
    let parts = kappa.parts();
    let (lnf, _) = ln_partitional_shifted_factorial(0.5 * m as f64, kappa);
    let mut s = 2.0 * k as f64 * std::f64::consts::LN_2 + ln_factorial(k) + lnf;
    for i in 0..l {
        for j in (i + 1)..l {
            s += ((2 * parts[i]) as f64 - (2 * parts[j]) as f64 - i as f64 + j as f64).ln();
        }
        s -= ln_factorial(2 * parts[i] + l - (i + 1));
    }
    s
}

/// C_κ(I_m); zero when κ has more than m parts.
pub fn zonal_at_identity(kappa: &Partition, m: usize) -> f64 {
    if kappa.len() > m {
        return 0.0;
    }
    ln_zonal_at_identity(kappa, m).exp()
}

pub fn build_zonal_table(m: usize, max_weight: usize) -> Result<ZonalTable> {
    ZonalTable::build(m, max_weight)
}

/// C_κ at a symmetric matrix with the given eigenvalues.
pub fn zonal_value(table: &ZonalTable, kappa: &Partition, eig: &[f64]) -> Result<f64> {
    if eig.len() != table.m {
        return Err(Error::DimensionMismatch { expected: table.m, got: eig.len() });
    }
    let (k, i) = table.locate(kappa)?;
    let pw = table.powers(eig, k);
    let mono = table.monomials(k, &pw, k + 1);
    let row = &table.layers[k].coeffs[i];
    Ok(row.iter().zip(&mono[i..]).map(|(c, v)| c * v).sum())
}

type TableCache = Mutex<HashMap<usize, Arc<ZonalTable>>>;

fn table_cache() -> &'static TableCache {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Process-wide table for dimension m covering at least weight k.
pub fn shared_table(m: usize, k: usize) -> Result<Arc<ZonalTable>> {
    let mut cache = table_cache().lock().unwrap();
    if let Some(t) = cache.get(&m) {
        if t.max_weight() >= k {
            return Ok(t.clone());
        }
    }
    let mut t = match cache.get(&m) {
        Some(t) => (**t).clone(),
        None => ZonalTable::build(m, 0)?,
    };
    t.extend_to(k)?;
    let arc = Arc::new(t);
    cache.insert(m, arc.clone());
    Ok(arc)
}

/// Binomial coefficients (κ choose σ), grouped by |σ| in table order.
#[derive(Debug, Clone)]
pub struct BinomialRow {
    kappa: Partition,
    m: usize,
    by_weight: Vec<Vec<(Partition, f64)>>,
}

impl BinomialRow {
    pub fn kappa(&self) -> &Partition {
        &self.kappa
    }

    pub fn get(&self, sigma: &Partition) -> f64 {
        let d = sigma.weight();
        if d >= self.by_weight.len() || sigma.len() > self.m {
            return 0.0;
        }
        self.by_weight[d].iter().find(|(s, _)| s == sigma).map(|(_, v)| *v).unwrap_or(0.0)
    }

    /// (σ, coefficient) for every σ of weight d.
    pub fn weight(&self, d: usize) -> &[(Partition, f64)] {
        &self.by_weight[d]
    }
}

type BinomialCache = Mutex<HashMap<(usize, Partition), Arc<BinomialRow>>>;

fn binomial_cache() -> &'static BinomialCache {
    static CACHE: OnceLock<BinomialCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// All (κ choose σ) for fixed κ, from the exact monomial expansion of
/// C_κ(1 + y) followed by a triangular change of basis in each degree.
pub fn binomial_row(table: &ZonalTable, kappa: &Partition) -> Result<Arc<BinomialRow>> {
    let m = table.m;
    let key = (m, kappa.clone());
    if let Some(r) = binomial_cache().lock().unwrap().get(&key) {
        return Ok(r.clone());
    }
    let (k, ki) = table.locate(kappa)?;
    let top = &table.layers[k];
    // coefficient of y^λ (λ sorted) in C_κ(1+y), per degree d and λ index
    let mut coef: Vec<Vec<f64>> = (0..=k).map(|d| vec![0.0; table.layers[d].len()]).collect();
    let lam_padded: Vec<Vec<Vec<usize>>> =
        (0..=k).map(|d| table.layers[d].partitions.iter().map(|p| p.padded(m)).collect()).collect();
    for (j, c) in top.coeffs[ki].iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        let mu = ki + j;
        for e in top.perms[mu].chunks(m) {
            for d in 0..=k {
                for (li, lam) in lam_padded[d].iter().enumerate() {
                    let mut prod = 1.0;
                    for i in 0..m {
                        let (ei, li_) = (e[i] as usize, lam[i]);
                        if li_ > ei {
                            prod = 0.0;
                            break;
                        }
                        prod *= binom(ei, li_);
                    }
                    coef[d][li] += c * prod;
                }
            }
        }
    }
    let mut by_weight = Vec::with_capacity(k + 1);
    let ln_ck = top.ln_identity[ki];
    for d in 0..=k {
        let layer = &table.layers[d];
        let n = layer.len();
        let mut dsig = vec![0.0; n];
        for l in 0..n {
            let mut r = coef[d][l];
            for s in 0..l {
                r -= dsig[s] * layer.coefficient(s, l);
            }
            let diag = layer.coefficient(l, l);
            if diag == 0.0 {
                return Err(Error::Numerical("singular triangular system in binomial expansion".into()));
            }
            dsig[l] = r / diag;
        }
        let row: Vec<(Partition, f64)> = layer
            .partitions
            .iter()
            .enumerate()
            .map(|(s, sigma)| (sigma.clone(), dsig[s] * (layer.ln_identity[s] - ln_ck).exp()))
            .collect();
        by_weight.push(row);
    }
    let row = Arc::new(BinomialRow { kappa: kappa.clone(), m, by_weight });
    binomial_cache().lock().unwrap().insert(key, row.clone());
    Ok(row)
}

fn binom(n: usize, r: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..r {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::{partitional_shifted_factorial, shifted_factorial};
    use rand::{Rng, SeedableRng};

    fn p(v: &[usize]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn low_weight_layers() {
        let t = build_zonal_table(3, 2).unwrap();
        assert_eq!(zonal_value(&t, &Partition::zero(), &[0.3, -2.0, 5.0]).unwrap(), 1.0);
        let c1 = zonal_value(&t, &p(&[1]), &[2.0, 3.0, -1.0]).unwrap();
        assert!((c1 - 4.0).abs() < 1e-14);
        let t2 = build_zonal_table(2, 2).unwrap();
        let y = [1.7, -0.4];
        let c2 = zonal_value(&t2, &p(&[2]), &y).unwrap();
        let c11 = zonal_value(&t2, &p(&[1, 1]), &y).unwrap();
        // explicit: C_(2) = y1² + y2² + (2/3) y1 y2, C_(1,1) = (4/3) y1 y2
        assert!((c2 - (y[0] * y[0] + y[1] * y[1] + 2.0 / 3.0 * y[0] * y[1])).abs() < 1e-14);
        assert!((c11 - 4.0 / 3.0 * y[0] * y[1]).abs() < 1e-14);
        assert!((c2 + c11 - 1.69).abs() < 1e-14);
    }

    #[test]
    fn identity_values() {
        assert_eq!(zonal_at_identity(&Partition::zero(), 3), 1.0);
        assert!((zonal_at_identity(&p(&[1]), 4) - 4.0).abs() < 1e-13);
        assert!((zonal_at_identity(&p(&[2]), 2) - 8.0 / 3.0).abs() < 1e-13);
        assert!((zonal_at_identity(&p(&[1, 1]), 2) - 4.0 / 3.0).abs() < 1e-13);
        assert_eq!(zonal_at_identity(&p(&[1, 1, 1]), 2), 0.0);
        let t = build_zonal_table(3, 10).unwrap();
        for k in 0..=10 {
            let vals = t.layer_values(k, &[1.0, 1.0, 1.0]);
            for (i, v) in vals.iter().enumerate() {
                let want = t.layer(k).identity_values()[i];
                assert!((v - want).abs() <= 1e-12 * want);
            }
        }
    }

    #[test]
    fn zero_argument_vanishes() {
        let t = build_zonal_table(2, 5).unwrap();
        for k in 1..=5 {
            assert!(t.layer_values(k, &[0.0, 0.0]).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn trace_identity_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for m in [2usize, 3] {
            let t = build_zonal_table(m, 6).unwrap();
            for _ in 0..500 {
                let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let tr: f64 = y.iter().sum();
                for k in 0..=6 {
                    let s: f64 = t.layer_values(k, &y).iter().sum();
                    let scale = y.iter().map(|v| v.abs()).sum::<f64>().powi(k as i32).max(1e-300);
                    assert!((s - tr.powi(k as i32)).abs() <= 1e-10 * scale.max(tr.abs().powi(k as i32)));
                }
            }
        }
    }

    #[test]
    fn trace_identity_high_weight() {
        let t = build_zonal_table(3, 40).unwrap();
        let y = [0.9, 0.5, 0.1];
        for k in [20usize, 30, 40] {
            let s: f64 = t.layer_values(k, &y).iter().sum();
            assert!((s / 1.5f64.powi(k as i32) - 1.0).abs() < 1e-11, "k={k}");
        }
    }

    #[test]
    fn factorial_sum_identity() {
        for m in [2usize, 3] {
            let t = build_zonal_table(m, 8).unwrap();
            for a in [2.5, 4.5, 10.0] {
                for k in 0..=8 {
                    let layer = t.layer(k);
                    let s: f64 = layer
                        .partitions()
                        .iter()
                        .zip(layer.identity_values())
                        .map(|(kap, c)| c * partitional_shifted_factorial(a, kap))
                        .sum();
                    let want = shifted_factorial(m as f64 * a, k);
                    assert!((s - want).abs() <= 1e-10 * want, "m={m} a={a} k={k}");
                }
            }
        }
    }

    #[test]
    fn homogeneity() {
        let t = build_zonal_table(3, 7).unwrap();
        let y = [0.7, -1.1, 2.3];
        let c = 1.37;
        let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
        for k in 0..=7 {
            let a = t.layer_values(k, &y);
            let b = t.layer_values(k, &yc);
            for (u, v) in a.iter().zip(&b) {
                assert!((v - c.powi(k as i32) * u).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn one_dimensional_case_is_power() {
        let t = build_zonal_table(1, 10).unwrap();
        for k in 0..=10 {
            let v = t.layer_values(k, &[1.3]);
            assert_eq!(v.len(), 1);
            assert!((v[0] - 1.3f64.powi(k as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn extend_matches_fresh_build() {
        let mut a = build_zonal_table(3, 4).unwrap();
        a.extend_to(9).unwrap();
        let b = build_zonal_table(3, 9).unwrap();
        assert_eq!(a.dump(), b.dump());
    }

    #[test]
    fn orthogonal_invariance_through_eigenvalues() {
        use crate::linalg::{sym_eigenvalues, SymmetricMatrix};
        let y = SymmetricMatrix::from_rows(&[vec![2.0, 0.5, 0.1], vec![0.5, 1.0, -0.3], vec![0.1, -0.3, 0.7]]).unwrap();
        let (c, s) = (0.6f64, 0.8f64);
        let h = [c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0];
        let hy = y.congruence(&h).unwrap();
        let t = build_zonal_table(3, 5).unwrap();
        let e1 = sym_eigenvalues(&y).unwrap();
        let e2 = sym_eigenvalues(&hy).unwrap();
        for k in 0..=5 {
            for (a, b) in t.layer_values(k, &e1).iter().zip(t.layer_values(k, &e2)) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    /// Brute-force multipoint oracle: evaluate C_κ(1 + t·d) at many generic
    /// diagonal points and solve for the C_σ coefficients by least squares.
    fn binomial_by_solve(t: &ZonalTable, kappa: &Partition) -> Vec<(Partition, f64)> {
        let m = t.m();
        let k = kappa.weight();
        let sigmas: Vec<Partition> = (0..=k).flat_map(|d| t.layer(d).partitions().to_vec()).collect();
        let n = sigmas.len();
        let npts = 3 * n + 5;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut a = nalgebra::DMatrix::<f64>::zeros(npts, n);
        let mut rhs = nalgebra::DVector::<f64>::zeros(npts);
        let ck = zonal_at_identity(kappa, m);
        for r in 0..npts {
            let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.9..0.9)).collect();
            let y1: Vec<f64> = y.iter().map(|v| 1.0 + v).collect();
            rhs[r] = zonal_value(t, kappa, &y1).unwrap() / ck;
            for (c, s) in sigmas.iter().enumerate() {
                a[(r, c)] = zonal_value(t, s, &y).unwrap() / zonal_at_identity(s, m);
            }
        }
        let sol = a.svd(true, true).solve(&rhs, 1e-14).unwrap();
        sigmas.into_iter().zip(sol.iter().cloned()).collect()
    }

    #[test]
    fn binomial_matches_multipoint_solve() {
        for m in [2usize, 3] {
            let t = build_zonal_table(m, 6).unwrap();
            for k in 0..=6 {
                for kappa in t.layer(k).partitions().to_vec() {
                    let row = binomial_row(&t, &kappa).unwrap();
                    for (sigma, want) in binomial_by_solve(&t, &kappa) {
                        let got = row.get(&sigma);
                        assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "m={m} {kappa} {sigma}: {got} vs {want}");
                    }
                    assert!((row.get(&Partition::zero()) - 1.0).abs() < 1e-12);
                    assert!((row.get(&kappa) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn binomial_reproduces_expansion_at_fresh_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let t = build_zonal_table(3, 8).unwrap();
        for kappa in [p(&[4, 2, 1]), p(&[8]), p(&[3, 3, 2]), p(&[2, 1])] {
            let row = binomial_row(&t, &kappa).unwrap();
            let ck = zonal_at_identity(&kappa, 3);
            for _ in 0..20 {
                let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
                let y1: Vec<f64> = y.iter().map(|v| 1.0 + v).collect();
                let lhs = zonal_value(&t, &kappa, &y1).unwrap() / ck;
                let mut rhs = 0.0;
                for d in 0..=kappa.weight() {
                    for (sigma, b) in row.weight(d) {
                        rhs += b * zonal_value(&t, sigma, &y).unwrap() / zonal_at_identity(sigma, 3);
                    }
                }
                assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "{kappa}");
            }
        }
    }

    #[test]
    fn binomials_of_single_row_are_ordinary() {
        // m = 1 collapses to ordinary binomial coefficients
        let t = build_zonal_table(1, 7).unwrap();
        let row = binomial_row(&t, &p(&[7])).unwrap();
        for s in 0..=7 {
            assert!((row.get(&p(&[s])) - binom(7, s)).abs() < 1e-10);
        }
        assert!((crate::partitions::generalized_binomial(&p(&[2]), &p(&[1]), 2).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dump_lists_partitions() {
        let t = build_zonal_table(2, 2).unwrap();
        let d = t.dump();
        assert!(d.contains("(1,1)"));
        assert!(d.lines().count() == 1 + 4);
    }

    proptest::proptest! {
        #[test]
        fn trace_power_expansion(y in proptest::collection::vec(-2.0f64..2.0, 3), k in 0usize..7) {
            let t = shared_table(3, 6).unwrap();
            let s: f64 = t.layer_values(k, &y).iter().sum();
            let tr: f64 = y.iter().sum();
            let scale = y.iter().map(|v| v.abs()).sum::<f64>().powi(k as i32).max(1e-300);
            proptest::prop_assert!((s - tr.powi(k as i32)).abs() <= 1e-10 * scale);
        }

        #[test]
        fn homogeneous_of_degree_k(y in proptest::collection::vec(0.1f64..2.0, 2), c in 0.2f64..3.0, k in 0usize..9) {
            let t = shared_table(2, 8).unwrap();
            let cy: Vec<f64> = y.iter().map(|v| c * v).collect();
            for (a, b) in t.layer_values(k, &y).iter().zip(t.layer_values(k, &cy)) {
                proptest::prop_assert!((b - c.powi(k as i32) * a).abs() <= 1e-11 * b.abs().max(1e-300));
            }
        }
    }
}
