//! Direct (non-dynamical) equilibrium solvers.
//!
//! For the generalized family at fixed route prices `q` the equilibrium
//! rates follow from a scalar root: writing `C = |x_s|_1^2`, every route
//! satisfies `x_r / |x_s|_n = a_r(C)` with
//!
//! ```text
//! a_r(C) = 2 beta / (2 beta + q_r tau_r^2 C - 2)
//! ```
//!
//! and summing the n-th powers gives `psi(C) = sum_r a_r(C)^n = 1` at the
//! unique equilibrium. `psi` is strictly decreasing on its domain, so
//! bisection is exact and safe. For the max-norm family (`n = inf`) the sum
//! condition becomes `max_r a_r(C) = 1`, which pins `C` at the lower end of
//! the domain in closed form.
//!
//! The module also solves the friendliness test network: one bottleneck of
//! capacity `c` shared by the multipath source under test and a single-path
//! NewReno flow, by bisecting on the bottleneck price.

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, NormOrder, PhiMode};
use crate::error::{Error, Result};

/// Root residual target for the scalar bisection.
const ROOT_TOL: f64 = 1e-12;
/// Relative residual target for the solved rate vector.
const SYSTEM_TOL: f64 = 1e-8;
const MAX_BISECT_ITERS: usize = 200;

/// Result of a generalized-family equilibrium solve at fixed prices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiSolveResult {
    /// Squared aggregate rate `|x_s|_1^2` at the root.
    pub c_tilde: f64,
    /// Per-route share coefficients, each in (0, 1].
    pub a: Vec<f64>,
    /// Per-route equilibrium rates, strictly positive.
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `|psi(c_tilde) - 1|` (for the max-norm solver, `|max_r a_r - 1|`).
    pub residual: f64,
}

impl PsiSolveResult {
    pub fn aggregate(&self) -> f64 {
        self.x.iter().sum()
    }
}

/// Lower end of the admissible domain for `C = |x_s|_1^2`.
pub fn c_lower(qs: &[f64], taus: &[f64]) -> Result<f64> {
    if qs.len() != taus.len() || qs.is_empty() {
        return Err(Error::Domain("price/rtt vectors must match and be nonempty".into()));
    }
    let mut min = f64::INFINITY;
    for (r, (&q, &tau)) in qs.iter().zip(taus).enumerate() {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::Domain(format!("q[{r}] must be positive, got {q}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Domain(format!("tau[{r}] must be positive, got {tau}")));
        }
        min = min.min(q * tau * tau);
    }
    Ok(2.0 / min)
}

/// `psi(C) = sum_r (2 beta / (2 beta + q_r tau_r^2 C - 2))^n`.
///
/// Defined for `C >= c_lower`, where every denominator is at least `2 beta`.
pub fn psi(c: f64, qs: &[f64], taus: &[f64], beta: f64, n: u32) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("psi requires beta > 0, got {beta}")));
    }
    if n == 0 {
        return Err(Error::Domain("psi requires n >= 1".into()));
    }
    let lower = c_lower(qs, taus)?;
    if c < lower * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "C = {c} below the admissible lower bound {lower}"
        )));
    }
    Ok(qs
        .iter()
        .zip(taus)
        .map(|(&q, &tau)| {
            let denom = 2.0 * beta + (q * tau * tau * c - 2.0).max(0.0);
            (2.0 * beta / denom).powi(n as i32)
        })
        .sum())
}

fn share_coefficients(c: f64, qs: &[f64], taus: &[f64], beta: f64) -> Vec<f64> {
    qs.iter()
        .zip(taus)
        .map(|(&q, &tau)| 2.0 * beta / (2.0 * beta + (q * tau * tau * c - 2.0).max(0.0)))
        .collect()
}

fn rates_from_shares(c: f64, a: &[f64]) -> Vec<f64> {
    let sum_a: f64 = a.iter().sum();
    let norm = c.sqrt() / sum_a;
    a.iter().map(|&ar| ar * norm).collect()
}

fn verify_rates(x: &[f64], qs: &[f64], taus: &[f64], beta: f64, n: NormOrder) -> Result<f64> {
    let alg = Algorithm::generalized(beta, 0.0, n);
    let phi = alg.fluid_phi(x, taus, PhiMode::Analysis)?;
    let mut worst = 0.0f64;
    for (p, &q) in phi.iter().zip(qs) {
        worst = worst.max((p - q).abs() / q.abs().max(1e-300));
    }
    Ok(worst)
}

/// Solves `phi_r(x_s) = q_r` for the generalized family with a finite norm
/// order, by bisection on `psi(C) = 1`.
pub fn solve_generalized_equilibrium(
    qs: &[f64],
    taus: &[f64],
    beta: f64,
    n: u32,
) -> Result<PsiSolveResult> {
    let lower = c_lower(qs, taus)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    if n == 0 {
        return Err(Error::Domain("norm order must be >= 1".into()));
    }

    let f = |c: f64| psi(c, qs, taus, beta, n).map(|v| v - 1.0);

    let mut lo = lower;
    let flo = f(lo)?;
    // psi(c_lower) >= 1 by construction; anything else is a logic error.
    assert!(
        flo >= -1e-9,
        "psi must bracket the root from above at the domain edge"
    );
    let mut iterations = 0usize;
    let (c_tilde, residual) = if flo.abs() <= ROOT_TOL {
        (lo, flo.abs())
    } else {
        let mut hi = lo * 2.0;
        let mut fhi = f(hi)?;
        while fhi > 0.0 {
            lo = hi;
            hi *= 2.0;
            fhi = f(hi)?;
            iterations += 1;
            if iterations > MAX_BISECT_ITERS {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: fhi.abs(),
                });
            }
        }
        let mut mid = 0.5 * (lo + hi);
        let mut fmid = f(mid)?;
        while fmid.abs() > ROOT_TOL && iterations < MAX_BISECT_ITERS {
            if fmid > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            mid = 0.5 * (lo + hi);
            fmid = f(mid)?;
            iterations += 1;
        }
        if fmid.abs() > ROOT_TOL {
            return Err(Error::NoConvergence {
                iterations,
                residual: fmid.abs(),
            });
        }
        (mid, fmid.abs())
    };

    let a = share_coefficients(c_tilde, qs, taus, beta);
    let x = rates_from_shares(c_tilde, &a);
    let sys = verify_rates(&x, qs, taus, beta, NormOrder::Finite(n))?;
    if sys > SYSTEM_TOL {
        return Err(Error::NoConvergence {
            iterations,
            residual: sys,
        });
    }
    Ok(PsiSolveResult {
        c_tilde,
        a,
        x,
        iterations,
        residual,
    })
}

/// Solves the max-norm (`n = inf`) member of the family, covering Balia.
///
/// The condition `max_r a_r(C) = 1` forces `q_r tau_r^2 C = 2` on the
/// cheapest route, i.e. `C` equals the domain lower bound, and the rates
/// follow in closed form. No iteration is required.
pub fn solve_generalized_equilibrium_maxnorm(
    qs: &[f64],
    taus: &[f64],
    beta: f64,
) -> Result<PsiSolveResult> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    let c_tilde = c_lower(qs, taus)?;
    let a = share_coefficients(c_tilde, qs, taus, beta);
    let max_a = a.iter().fold(f64::MIN, |m, &v| m.max(v));
    let residual = (max_a - 1.0).abs();
    let x = rates_from_shares(c_tilde, &a);
    let sys = verify_rates(&x, qs, taus, beta, NormOrder::Inf)?;
    if sys > SYSTEM_TOL {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: sys,
        });
    }
    Ok(PsiSolveResult {
        c_tilde,
        a,
        x,
        iterations: 0,
        residual,
    })
}

/// Per-source equilibrium rates at fixed route prices, for any descriptor.
///
/// Closed forms exist for every variant except the finite-n generalized
/// family, which goes through the bisection above. For Coupled (and the
/// beta = 0 family) only the aggregate is determined; ties are split equally
/// across the cheapest routes, in construction order.
pub fn solve_source_rates(alg: Algorithm, qs: &[f64], taus: &[f64]) -> Result<Vec<f64>> {
    if qs.len() != taus.len() || qs.is_empty() {
        return Err(Error::Domain("price/rtt vectors must match and be nonempty".into()));
    }
    for (r, &q) in qs.iter().enumerate() {
        if !(q > 0.0) {
            return Err(Error::Domain(format!("q[{r}] must be positive, got {q}")));
        }
    }
    match alg {
        Algorithm::NewReno => Ok(qs
            .iter()
            .zip(taus)
            .map(|(&q, &tau)| (2.0 / q).sqrt() / tau)
            .collect()),
        Algorithm::Ewtcp { a } => Ok(qs
            .iter()
            .zip(taus)
            .map(|(&q, &tau)| (2.0 * a / q).sqrt() / tau)
            .collect()),
        Algorithm::Coupled => solve_coupled(qs, taus),
        Algorithm::Semicoupled => {
            // phi_r = 2/(tau_r^2 x_r S) = q_r gives x_r = 2/(q_r tau_r^2 S)
            // and summing yields S^2 = sum_k 2/(q_k tau_k^2).
            let s = qs
                .iter()
                .zip(taus)
                .map(|(&q, &tau)| 2.0 / (q * tau * tau))
                .sum::<f64>()
                .sqrt();
            Ok(qs
                .iter()
                .zip(taus)
                .map(|(&q, &tau)| 2.0 / (q * tau * tau * s))
                .collect())
        }
        Algorithm::Max => {
            // The aggregate matches Coupled's; the split weights routes by
            // 1/(q_r tau_r).
            let s = (2.0
                / qs.iter()
                    .zip(taus)
                    .map(|(&q, &tau)| q * tau * tau)
                    .fold(f64::INFINITY, f64::min))
            .sqrt();
            let weights: Vec<f64> = qs.iter().zip(taus).map(|(&q, &tau)| 1.0 / (q * tau)).collect();
            let total: f64 = weights.iter().sum();
            Ok(weights.iter().map(|&w| s * w / total).collect())
        }
        Algorithm::Balia => solve_generalized_equilibrium_maxnorm(qs, taus, crate::algorithms::BALIA_BETA)
            .map(|r| r.x),
        Algorithm::Generalized { beta, n, .. } => {
            if beta == 0.0 {
                return solve_coupled(qs, taus);
            }
            match n {
                NormOrder::Inf => {
                    solve_generalized_equilibrium_maxnorm(qs, taus, beta).map(|r| r.x)
                }
                NormOrder::Finite(n) => {
                    solve_generalized_equilibrium(qs, taus, beta, n).map(|r| r.x)
                }
            }
        }
    }
}

fn solve_coupled(qs: &[f64], taus: &[f64]) -> Result<Vec<f64>> {
    // Only routes attaining min_r q_r tau_r^2 can carry traffic; the
    // aggregate is pinned, the split among minimizers is not.
    let costs: Vec<f64> = qs.iter().zip(taus).map(|(&q, &tau)| q * tau * tau).collect();
    let min = costs.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let s = (2.0 / min).sqrt();
    let active: Vec<usize> = costs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c <= min * (1.0 + 1e-12))
        .map(|(r, _)| r)
        .collect();
    let share = s / active.len() as f64;
    let mut x = vec![0.0; qs.len()];
    for r in active {
        x[r] = share;
    }
    Ok(x)
}

/// Equilibrium of the friendliness test network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FriendlinessResult {
    /// Aggregate equilibrium rate of the multipath source.
    pub mp_throughput: f64,
    /// Equilibrium rate of the competing single-path NewReno flow.
    pub sp_throughput: f64,
    /// Price at the shared bottleneck.
    pub bottleneck_price: f64,
    /// `|mp + sp - c|` at the returned price.
    pub residual: f64,
}

/// Solves the single-bottleneck test network: the multipath source under
/// test (routes with RTTs `taus_mp`) shares one link of capacity `c` with a
/// single-path NewReno flow of RTT `tau_g`.
///
/// At a bottleneck price `p`, every MP route sees `q_r = p` and the NewReno
/// flow satisfies `2/(tau_g^2 x_g^2) = p`. The total demand is strictly
/// decreasing in `p`, so bisection on `mp(p) + sp(p) = c` converges to any
/// accuracy.
pub fn solve_test_network(
    alg: Algorithm,
    taus_mp: &[f64],
    tau_g: f64,
    c: f64,
) -> Result<FriendlinessResult> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("capacity must be positive, got {c}")));
    }
    if !(tau_g > 0.0) {
        return Err(Error::Domain(format!("tau_g must be positive, got {tau_g}")));
    }
    let demand = |p: f64| -> Result<(f64, f64)> {
        let qs = vec![p; taus_mp.len()];
        let mp: f64 = solve_source_rates(alg, &qs, taus_mp)?.iter().sum();
        let sp = (2.0 / p).sqrt() / tau_g;
        Ok((mp, sp))
    };
    let excess = |p: f64| -> Result<f64> {
        let (mp, sp) = demand(p)?;
        Ok(mp + sp - c)
    };

    // Bracket the root: demand -> inf as p -> 0 and -> 0 as p -> inf.
    let mut lo = 2.0 / (tau_g * tau_g * c * c);
    let mut iters = 0;
    while excess(lo)? < 0.0 {
        lo *= 0.5;
        iters += 1;
        if iters > 200 {
            return Err(Error::NoConvergence {
                iterations: iters,
                residual: f64::NAN,
            });
        }
    }
    let mut hi = lo * 2.0;
    while excess(hi)? > 0.0 {
        hi *= 2.0;
        iters += 1;
        if iters > 400 {
            return Err(Error::NoConvergence {
                iterations: iters,
                residual: f64::NAN,
            });
        }
    }

    let tol = 1e-8 * c;
    let mut mid = 0.5 * (lo + hi);
    let mut fmid = excess(mid)?;
    while fmid.abs() > tol && iters < 600 {
        if fmid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        fmid = excess(mid)?;
        iters += 1;
    }
    if fmid.abs() > tol {
        return Err(Error::NoConvergence {
            iterations: iters,
            residual: fmid.abs(),
        });
    }
    let (mp, sp) = demand(mid)?;
    Ok(FriendlinessResult {
        mp_throughput: mp,
        sp_throughput: sp,
        bottleneck_price: mid,
        residual: fmid.abs(),
    })
}
