//! Generalized Laguerre polynomials of matrix argument.

use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, SpdMatrix, SymmetricMatrix};
use crate::partitions::{ln_factorial, ln_partitional_shifted_factorial, Partition};
use crate::zonal::{binomial_row, shared_table, ZonalTable};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct LaguerreContext {
    gamma: f64,
    m: usize,
    table: Arc<ZonalTable>,
}

impl LaguerreContext {
    /// Context for L^{(γ)}_κ with |κ| ≤ max_weight.
    pub fn new(gamma: f64, m: usize, max_weight: usize) -> Result<Self> {
        if !(gamma > -1.0) {
            return Err(Error::Domain(format!("Laguerre parameter must exceed -1, got {gamma}")));
        }
        Ok(LaguerreContext { gamma, m, table: shared_table(m, max_weight)? })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn table(&self) -> &ZonalTable {
        &self.table
    }

    /// γ + (m+1)/2.
    fn shift(&self) -> f64 {
        self.gamma + 0.5 * (self.m as f64 + 1.0)
    }

    fn check(&self, kappa: &Partition) -> Result<()> {
        if kappa.len() > self.m {
            return Err(Error::InvalidArgument(format!("partition {kappa} longer than m = {}", self.m)));
        }
        if kappa.weight() > self.table.max_weight() {
            return Err(Error::InvalidArgument(format!("partition {kappa} beyond context weight")));
        }
        Ok(())
    }

    /// ln L_κ(0) = ln([γ+(m+1)/2]_κ C_κ(I)).
    pub fn ln_value_at_zero(&self, kappa: &Partition) -> f64 {
        let (l, _) = ln_partitional_shifted_factorial(self.shift(), kappa);
        l + crate::zonal::ln_zonal_at_identity(kappa, self.m)
    }

    /// L_κ at eigenvalues y, given precomputed zonal layers C_σ(y).
    fn eval_with(&self, kappa: &Partition, cy: &[Vec<f64>]) -> Result<f64> {
        let row = binomial_row(&self.table, kappa)?;
        let a = self.shift();
        let ln_top = self.ln_value_at_zero(kappa);
        let mut s = 0.0;
        for d in 0..=kappa.weight() {
            let layer = self.table.layer(d);
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            for (i, (sigma, b)) in row.weight(d).iter().enumerate() {
                if *b == 0.0 {
                    continue;
                }
                let (lf, sf) = ln_partitional_shifted_factorial(a, sigma);
                let w = (ln_top - lf - layer.ln_identity_values()[i]).exp() * sf;
                s += sign * b * cy[d][i] * w;
            }
        }
        Ok(s)
    }

    pub fn laguerre_l_eig(&self, kappa: &Partition, y: &[f64]) -> Result<f64> {
        self.check(kappa)?;
        if y.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: y.len() });
        }
        let cy = self.table.values_up_to(kappa.weight(), y);
        self.eval_with(kappa, &cy)
    }

    pub fn laguerre_normalized_eig(&self, kappa: &Partition, y: &[f64]) -> Result<f64> {
        let l = self.laguerre_l_eig(kappa, y)?;
        Ok(l * (-0.5 * (ln_factorial(kappa.weight()) + self.ln_value_at_zero(kappa))).exp())
    }

    /// ℒ_κ(y) for every κ with |κ| ≤ k_max, layer by layer.
    pub fn normalized_all(&self, y: &[f64], k_max: usize) -> Result<Vec<Vec<f64>>> {
        if k_max > self.table.max_weight() {
            return Err(Error::InvalidArgument("weight beyond context".into()));
        }
        let cy = self.table.values_up_to(k_max, y);
        (0..=k_max)
            .map(|k| {
                self.table
                    .layer(k)
                    .partitions()
                    .iter()
                    .map(|kappa| {
                        let l = self.eval_with(kappa, &cy)?;
                        Ok(l * (-0.5 * (ln_factorial(k) + self.ln_value_at_zero(kappa))).exp())
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn laguerre_l(ctx: &LaguerreContext, kappa: &Partition, y: &SymmetricMatrix) -> Result<f64> {
    ctx.laguerre_l_eig(kappa, &sym_eigenvalues(y)?)
}

pub fn laguerre_normalized(ctx: &LaguerreContext, kappa: &Partition, y: &SymmetricMatrix) -> Result<f64> {
    ctx.laguerre_normalized_eig(kappa, &sym_eigenvalues(y)?)
}

/// 𝔏_κ(S) = β^{mα/2} etr((1−β)S/2) ℒ^{(ν)}_κ(βS), ν = α − (m+1)/2, from eigenvalues of S.
pub fn eigenfunction_l_eig(alpha: f64, m: usize, kappa: &Partition, s: &[f64]) -> Result<f64> {
    let (beta, _) = crate::spectrum::beta_and_balpha(alpha)?;
    let nu = alpha - 0.5 * (m as f64 + 1.0);
    let ctx = LaguerreContext::new(nu, m, kappa.weight())?;
    let bs: Vec<f64> = s.iter().map(|v| beta * v).collect();
    let l = ctx.laguerre_normalized_eig(kappa, &bs)?;
    let tr: f64 = s.iter().sum();
    Ok((0.5 * m as f64 * alpha * beta.ln() + 0.5 * (1.0 - beta) * tr).exp() * l)
}

pub fn eigenfunction_l(alpha: f64, m: usize, kappa: &Partition, s: &SpdMatrix) -> Result<f64> {
    if s.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: s.dim() });
    }
    eigenfunction_l_eig(alpha, m, kappa, s.eigenvalues())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::{partitional_shifted_factorial, shifted_factorial};
    use crate::zonal::zonal_at_identity;

    fn p(v: &[usize]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn value_at_zero_closed_form() {
        for m in 1..=3usize {
            let ctx = LaguerreContext::new(1.3, m, 8).unwrap();
            for k in 0..=8 {
                for kappa in crate::partitions::enumerate_partitions(k, m).iter() {
                    let got = ctx.laguerre_l_eig(kappa, &vec![0.0; m]).unwrap();
                    let want = partitional_shifted_factorial(1.3 + 0.5 * (m as f64 + 1.0), kappa) * zonal_at_identity(kappa, m);
                    assert!((got - want).abs() <= 1e-12 * want, "{kappa} m={m}");
                }
            }
        }
    }

    #[test]
    fn zero_partition_is_one() {
        let ctx = LaguerreContext::new(0.5, 2, 3).unwrap();
        assert_eq!(ctx.laguerre_l_eig(&Partition::zero(), &[3.0, 1.0]).unwrap(), 1.0);
        assert!((ctx.laguerre_normalized_eig(&Partition::zero(), &[3.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    /// Classical Laguerre L_k^{(γ)} by its three-term recurrence.
    fn classical(k: usize, g: f64, y: f64) -> f64 {
        let (mut a, mut b) = (1.0, 1.0 + g - y);
        if k == 0 {
            return a;
        }
        for n in 1..k {
            let nf = n as f64;
            let c = ((2.0 * nf + 1.0 + g - y) * b - (nf + g) * a) / (nf + 1.0);
            a = b;
            b = c;
        }
        b
    }

    #[test]
    fn scalar_case_matches_classical_recurrence() {
        // for m = 1, L_(k)(y) = k! times the classical polynomial
        let g = 0.7;
        let ctx = LaguerreContext::new(g, 1, 10).unwrap();
        for k in 0..=10 {
            for y in [0.1, 1.3, 4.0, 9.5] {
                let got = ctx.laguerre_l_eig(&p(&[k]), &[y]).unwrap();
                let want = shifted_factorial(1.0, k) * classical(k, g, y);
                assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "k={k} y={y}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn explicit_low_degree_two_by_two() {
        // hand expansion: L_(1)(Y) = a m − tr Y with a = γ + (m+1)/2
        let g = 0.4;
        let m = 2;
        let a = g + 1.5;
        let ctx = LaguerreContext::new(g, m, 2).unwrap();
        let y = [1.7, 0.3];
        let got = ctx.laguerre_l_eig(&p(&[1]), &y).unwrap();
        assert!((got - (a * m as f64 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn bound_against_exponential() {
        let ctx = LaguerreContext::new(1.5, 2, 6).unwrap();
        for y in [[0.5, 0.1], [3.0, 2.0], [7.0, 0.2]] {
            for k in 0..=6 {
                for kappa in crate::partitions::enumerate_partitions(k, 2).iter() {
                    let v = ctx.laguerre_l_eig(kappa, &y).unwrap();
                    let bound = (y[0] + y[1]).exp() * ctx.ln_value_at_zero(kappa).exp();
                    assert!(v.abs() <= bound * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn normalized_all_matches_pointwise() {
        let ctx = LaguerreContext::new(2.0, 3, 5).unwrap();
        let y = [2.2, 0.9, 0.4];
        let all = ctx.normalized_all(&y, 5).unwrap();
        for k in 0..=5 {
            for (i, kappa) in ctx.table().layer(k).partitions().iter().enumerate() {
                let v = ctx.laguerre_normalized_eig(kappa, &y).unwrap();
                assert!((v - all[k][i]).abs() <= 1e-13 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn eigenfunction_zero_partition() {
        let alpha = 5.0;
        let (beta, _) = crate::spectrum::beta_and_balpha(alpha).unwrap();
        let s = [1.2, 0.3];
        let v = eigenfunction_l_eig(alpha, 2, &Partition::zero(), &s).unwrap();
        let want = beta.powf(alpha) * (0.5 * (1.0 - beta) * 1.5).exp();
        assert!((v - want).abs() < 1e-14);
    }
}
