//! Integer partitions and the shifted factorials indexed by them.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

/// Non-increasing sequence of positive parts. The zero partition has no parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    pub fn new(mut parts: Vec<usize>) -> Result<Self> {
        parts.retain(|&p| p > 0);
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(format!("parts {parts:?} are not non-increasing")));
        }
        Ok(Partition { parts })
    }

    /// Sorts arbitrary non-negative parts into a partition.
    pub fn from_unsorted(mut parts: Vec<usize>) -> Self {
        parts.retain(|&p| p > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Partition { parts }
    }

    pub fn zero() -> Self {
        Partition { parts: Vec::new() }
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn weight(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Part i (0-based), zero past the end.
    pub fn part(&self, i: usize) -> usize {
        self.parts.get(i).copied().unwrap_or(0)
    }

    /// Parts padded with zeros to length m.
    pub fn padded(&self, m: usize) -> Vec<usize> {
        let mut v = self.parts.clone();
        v.resize(m.max(v.len()), 0);
        v
    }

    /// κ ⊆ σ as Young diagrams.
    pub fn contained_in(&self, other: &Partition) -> bool {
        self.len() <= other.len() && self.parts.iter().zip(&other.parts).all(|(a, b)| a <= b)
    }

    /// Dominance order μ ≤ self (same weight assumed).
    pub fn dominates(&self, other: &Partition) -> bool {
        let n = self.len().max(other.len());
        let (mut s, mut t) = (0usize, 0usize);
        for i in 0..n {
            s += self.part(i);
            t += other.part(i);
            if s < t {
                return false;
            }
        }
        true
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "(0)");
        }
        let s: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

type Memo = Mutex<HashMap<(usize, usize), Arc<Vec<Partition>>>>;

fn memo() -> &'static Memo {
    static MEMO: OnceLock<Memo> = OnceLock::new();
    MEMO.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Partitions of k with at most m parts: (k) first, then descending
/// lexicographic order, e.g. (3), (2,1), (1,1,1).
pub fn enumerate_partitions(k: usize, m: usize) -> Arc<Vec<Partition>> {
    assert!(m >= 1, "m must be positive");
    if let Some(v) = memo().lock().unwrap().get(&(k, m)) {
        return v.clone();
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(m);
    fill(k, k, m, &mut cur, &mut out);
    let arc = Arc::new(out);
    memo().lock().unwrap().insert((k, m), arc.clone());
    arc
}

fn fill(rem: usize, max_part: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Partition>) {
    if rem == 0 {
        out.push(Partition { parts: cur.clone() });
        return;
    }
    if slots == 0 {
        return;
    }
    let mut p = max_part.min(rem);
    while p >= 1 {
        // remaining slots must be able to hold what is left
        if p * slots >= rem {
            cur.push(p);
            fill(rem - p, p, slots - 1, cur, out);
            cur.pop();
        } else {
            break;
        }
        p -= 1;
    }
}

/// All partitions of weight 0..=k_max with at most m parts, weight by weight.
pub fn enumerate_up_to(k_max: usize, m: usize) -> Vec<Partition> {
    (0..=k_max).flat_map(|k| enumerate_partitions(k, m).iter().cloned().collect::<Vec<_>>()).collect()
}

/// p_m(k): number of partitions of k into at most m parts.
pub fn count_partitions(k: usize, m: usize) -> u128 {
    // p(n, parts ≤ m) = p(n, largest part ≤ m)
    let mut table = vec![0u128; k + 1];
    table[0] = 1;
    for part in 1..=m.min(k.max(1)) {
        for n in part..=k {
            table[n] += table[n - part];
        }
    }
    table[k]
}

/// ln n!, exact to rounding for n ≤ 170.
pub fn ln_factorial(n: usize) -> f64 {
    if n <= 170 {
        let mut f = 1.0f64;
        for i in 2..=n {
            f *= i as f64;
        }
        f.ln()
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0)
    }
}

/// (a)_k = a(a+1)…(a+k−1).
pub fn shifted_factorial(a: f64, k: usize) -> f64 {
    let mut p = 1.0;
    for i in 0..k {
        p *= a + i as f64;
    }
    p
}

/// ln|(a)_k| and the sign of (a)_k.
pub fn ln_shifted_factorial(a: f64, k: usize) -> (f64, f64) {
    let mut s = 0.0;
    let mut sign = 1.0;
    for i in 0..k {
        let f = a + i as f64;
        if f < 0.0 {
            sign = -sign;
        }
        s += f.abs().ln();
    }
    (s, sign)
}

/// [a]_κ = Π_j (a − (j−1)/2)_{k_j}.
pub fn partitional_shifted_factorial(a: f64, kappa: &Partition) -> f64 {
    kappa
        .parts
        .iter()
        .enumerate()
        .map(|(j, &kj)| shifted_factorial(a - 0.5 * j as f64, kj))
        .product()
}

/// ln|[a]_κ| and its sign.
pub fn ln_partitional_shifted_factorial(a: f64, kappa: &Partition) -> (f64, f64) {
    let mut s = 0.0;
    let mut sign = 1.0;
    for (j, &kj) in kappa.parts.iter().enumerate() {
        let (l, sg) = ln_shifted_factorial(a - 0.5 * j as f64, kj);
        s += l;
        sign *= sg;
    }
    (s, sign)
}

/// Generalized binomial coefficient (κ choose σ) in m variables, defined by
/// C_κ(I+Y)/C_κ(I) = Σ_σ (κ choose σ) C_σ(Y)/C_σ(I).
pub fn generalized_binomial(kappa: &Partition, sigma: &Partition, m: usize) -> Result<f64> {
    if kappa.len() > m || sigma.len() > m {
        return Err(Error::InvalidArgument("partition longer than dimension".into()));
    }
    if sigma.weight() > kappa.weight() {
        return Ok(0.0);
    }
    let table = crate::zonal::shared_table(m, kappa.weight())?;
    crate::zonal::binomial_row(&table, kappa).map(|row| row.get(sigma))
}
