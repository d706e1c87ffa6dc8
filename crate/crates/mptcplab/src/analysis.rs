//! Design-criteria checkers, Jacobians, linearization spectra and the
//! window-oscillation metric.
//!
//! The six criteria C0-C5 characterize when an MP-TCP design has a unique,
//! stable and well-behaved equilibrium:
//!
//! - C0: the per-source marginal Jacobian is symmetric (a utility function
//!   exists),
//! - C1: per-source link demand is nonincreasing in that link's price and
//!   vanishes as the price grows,
//! - C2: the symmetric part of the marginal Jacobian is negative definite,
//! - C3: the marginal diverges exactly on the rate boundary (and the routing
//!   matrix has full row rank, checked separately via [`crate::net`]),
//! - C4: aggregate source throughput is nonincreasing in every route price,
//! - C5: the marginal vanishes as the route rate grows.
//!
//! All checkers are sampling-based certificates: they report "passed at N
//! samples" together with the worst witness found, never a proof.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, NormOrder, PhiMode};
use crate::equilibrium::solve_source_rates;
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::net::{routing_matrix, NetworkSpec, SystemState};

/// Symmetry test threshold: `|J - J^T|_max <= 1e-8 |J|_max`.
const SYMMETRY_REL_TOL: f64 = 1e-8;
/// Strict-negativity threshold for the largest symmetric-part eigenvalue.
const C2_EIG_THRESHOLD: f64 = -1e-10;
/// Agreement required between closed-form and finite-difference Jacobians.
pub const JACOBIAN_FD_REL_TOL: f64 = 1e-5;

/// How a Jacobian was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JacobianMethod {
    ClosedForm,
    FiniteDifference,
}

/// The per-source marginal Jacobian at one point, with its symmetry and
/// definiteness diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacobianReport {
    pub j_phi: DMatrix<f64>,
    pub symmetric: bool,
    pub sym_part_max_eig: f64,
    pub method: JacobianMethod,
}

/// `d Phi_s / d x_s` for one source.
pub fn jacobian_phi(
    alg: Algorithm,
    xs: &[f64],
    taus: &[f64],
    method: JacobianMethod,
) -> Result<JacobianReport> {
    if xs.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain("Jacobian requires x > 0 componentwise".into()));
    }
    let j = match method {
        JacobianMethod::ClosedForm => closed_form_jacobian(alg, xs, taus)?,
        JacobianMethod::FiniteDifference => finite_difference_jacobian(alg, xs, taus)?,
    };
    let mut amax = 0.0f64;
    let mut asym = 0.0f64;
    for r in 0..j.nrows() {
        for k in 0..j.ncols() {
            amax = amax.max(j[(r, k)].abs());
            asym = asym.max((j[(r, k)] - j[(k, r)]).abs());
        }
    }
    let symmetric = asym <= SYMMETRY_REL_TOL * amax.max(1e-300);
    let sym_part_max_eig = linalg::max_symmetric_eigenvalue(&linalg::symmetric_part(&j));
    Ok(JacobianReport {
        j_phi: j,
        symmetric,
        sym_part_max_eig,
        method,
    })
}

fn closed_form_jacobian(alg: Algorithm, xs: &[f64], taus: &[f64]) -> Result<DMatrix<f64>> {
    let m = xs.len();
    let sum: f64 = xs.iter().sum();
    let j = match alg {
        Algorithm::NewReno | Algorithm::Ewtcp { .. } => {
            let a = match alg {
                Algorithm::Ewtcp { a } => a,
                _ => 1.0,
            };
            DMatrix::from_fn(m, m, |r, k| {
                if r == k {
                    -4.0 * a / (taus[r] * taus[r] * xs[r] * xs[r] * xs[r])
                } else {
                    0.0
                }
            })
        }
        Algorithm::Coupled => {
            DMatrix::from_fn(m, m, |r, _| -4.0 / (taus[r] * taus[r] * sum * sum * sum))
        }
        Algorithm::Semicoupled => DMatrix::from_fn(m, m, |r, k| {
            let common = -2.0 / (taus[r] * taus[r] * xs[r] * sum * sum);
            if r == k {
                common - 2.0 / (taus[r] * taus[r] * xs[r] * xs[r] * sum)
            } else {
                common
            }
        }),
        Algorithm::Max => {
            // Differentiable away from ties in max_k x_k / tau_k; the first
            // maximizer is used at a tie.
            let over_tau: Vec<f64> = xs.iter().zip(taus).map(|(&x, &t)| x / t).collect();
            let k_star = argmax(&over_tau);
            let big_m = over_tau[k_star];
            DMatrix::from_fn(m, m, |r, k| {
                let mut v = -4.0 * big_m / (taus[r] * xs[r] * sum * sum * sum);
                if k == k_star {
                    v += 2.0 / (taus[r] * taus[k_star] * xs[r] * sum * sum);
                }
                if k == r {
                    v += -2.0 * big_m / (taus[r] * xs[r] * xs[r] * sum * sum);
                }
                v
            })
        }
        Algorithm::Generalized { .. } | Algorithm::Balia => {
            let (beta, _, n) = alg.generalized_params().unwrap();
            let norm = crate::algorithms::rate_norm(xs, n);
            let dnorm = norm_gradient(xs, n, norm);
            DMatrix::from_fn(m, m, |r, k| {
                let t2 = taus[r] * taus[r];
                let mut v = -4.0 * (1.0 - beta) / (t2 * sum * sum * sum);
                v += 2.0 * beta / t2
                    * (dnorm[k] / (xs[r] * sum * sum)
                        - 2.0 * norm / (xs[r] * sum * sum * sum));
                if k == r {
                    v += -2.0 * beta * norm / (t2 * xs[r] * xs[r] * sum * sum);
                }
                v
            })
        }
    };
    Ok(j)
}

/// Gradient of the n-norm: `(x_k / |x|_n)^(n-1)`, degenerating to the
/// first-argmax indicator for the max-norm.
fn norm_gradient(xs: &[f64], n: NormOrder, norm: f64) -> Vec<f64> {
    match n {
        NormOrder::Inf => {
            let k_star = argmax(xs);
            (0..xs.len()).map(|k| if k == k_star { 1.0 } else { 0.0 }).collect()
        }
        NormOrder::Finite(1) => vec![1.0; xs.len()],
        NormOrder::Finite(n) => xs
            .iter()
            .map(|&x| (x / norm).powi(n as i32 - 1))
            .collect(),
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn finite_difference_jacobian(alg: Algorithm, xs: &[f64], taus: &[f64]) -> Result<DMatrix<f64>> {
    let m = xs.len();
    let mut j = DMatrix::zeros(m, m);
    let mut work = xs.to_vec();
    for k in 0..m {
        let h = 1e-6 * xs[k].max(1.0);
        work[k] = xs[k] + h;
        let hi = alg.fluid_phi(&work, taus, PhiMode::Analysis)?;
        work[k] = xs[k] - h;
        let lo = alg.fluid_phi(&work, taus, PhiMode::Analysis)?;
        work[k] = xs[k];
        for r in 0..m {
            j[(r, k)] = (hi[r] - lo[r]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// Share coefficients `a_r = 2 x_r / |x|_1 - x_r^n / |x|_n^n` appearing in
/// the structured Jacobian of the generalized family. They always sum to one
/// and have squared norm at most one.
pub fn mixing_coefficients(xs: &[f64], n: NormOrder) -> Vec<f64> {
    let sum: f64 = xs.iter().sum();
    match n {
        NormOrder::Inf => {
            let k_star = argmax(xs);
            xs.iter()
                .enumerate()
                .map(|(k, &x)| 2.0 * x / sum - if k == k_star { 1.0 } else { 0.0 })
                .collect()
        }
        NormOrder::Finite(p) => {
            let norm = crate::algorithms::rate_norm(xs, n);
            xs.iter()
                .map(|&x| 2.0 * x / sum - (x / norm).powi(p as i32))
                .collect()
        }
    }
}

/// Structured form of the generalized-family Jacobian at equal RTTs:
///
/// ```text
/// J = -4(1-beta)/(tau^2 S^3) * 1 1^T
///     - 2 beta |x|_n / (tau^2 S^2) * X^-1 (I + 1 a^T) X^-1
/// ```
///
/// with `S = |x|_1`, `X = diag(x)` and `a` the mixing coefficients.
pub fn generalized_jacobian_equal_rtt(
    beta: f64,
    n: NormOrder,
    xs: &[f64],
    tau: f64,
) -> DMatrix<f64> {
    let m = xs.len();
    let sum: f64 = xs.iter().sum();
    let norm = crate::algorithms::rate_norm(xs, n);
    let a = mixing_coefficients(xs, n);
    let t2 = tau * tau;
    let c1 = -4.0 * (1.0 - beta) / (t2 * sum * sum * sum);
    let c2 = -2.0 * beta * norm / (t2 * sum * sum);
    DMatrix::from_fn(m, m, |r, k| {
        let eye = if r == k { 1.0 } else { 0.0 };
        c1 + c2 * (eye + a[k]) / (xs[r] * xs[k])
    })
}

/// Serializable verdict of one criterion check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub algorithm: String,
    pub verdict: bool,
    pub samples: usize,
    pub worst_witness: Option<Witness>,
}

/// The most offending sample point a checker saw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub value: f64,
    pub detail: String,
}

fn sample_point(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect()
}

/// C0: Jacobian symmetry at random interior points.
pub fn check_c0(alg: Algorithm, taus: &[f64], samples: usize, seed: u64) -> Result<CriterionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = taus.len();
    let mut worst: Option<Witness> = None;
    let mut verdict = true;
    for _ in 0..samples {
        let xs = sample_point(&mut rng, m);
        let rep = jacobian_phi(alg, &xs, taus, JacobianMethod::ClosedForm)?;
        if !rep.symmetric {
            verdict = false;
            let asym = (&rep.j_phi - rep.j_phi.transpose()).amax();
            if worst.as_ref().is_none_or(|w| asym > w.value) {
                worst = Some(Witness {
                    point: xs,
                    value: asym,
                    detail: "max |J - J^T| entry".into(),
                });
            }
        }
    }
    Ok(CriterionReport {
        criterion: "C0".into(),
        algorithm: alg.name().into(),
        verdict,
        samples,
        worst_witness: worst,
    })
}

/// C2: the symmetric part of the Jacobian is negative definite at random
/// interior points.
pub fn check_c2(alg: Algorithm, taus: &[f64], samples: usize, seed: u64) -> Result<CriterionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = taus.len();
    let mut worst: Option<Witness> = None;
    let mut verdict = true;
    for _ in 0..samples {
        let xs = sample_point(&mut rng, m);
        let rep = jacobian_phi(alg, &xs, taus, JacobianMethod::ClosedForm)?;
        let eig = rep.sym_part_max_eig;
        if worst.as_ref().is_none_or(|w| eig > w.value) {
            worst = Some(Witness {
                point: xs,
                value: eig,
                detail: "largest eigenvalue of [J]^+".into(),
            });
        }
        if !(eig < C2_EIG_THRESHOLD) {
            verdict = false;
        }
    }
    Ok(CriterionReport {
        criterion: "C2".into(),
        algorithm: alg.name().into(),
        verdict,
        samples,
        worst_witness: worst,
    })
}

/// C3 (marginal part): `phi_r -> inf` exactly as `x_r -> 0`, finite in the
/// interior. The routing-rank part of C3 is a property of the network and is
/// checked with [`crate::net::full_row_rank`].
pub fn check_c3(alg: Algorithm, taus: &[f64]) -> Result<CriterionReport> {
    let m = taus.len();
    let mut verdict = true;
    let mut worst: Option<Witness> = None;
    for r in 0..m {
        // Follow phi_r along x_r -> 0 with the other coordinates at one.
        let mut xs = vec![1.0; m];
        let mut prev = f64::NEG_INFINITY;
        let mut diverged = true;
        let mut x_r = 1.0;
        while x_r >= 1e-12 {
            xs[r] = x_r;
            let phi = alg.fluid_phi(&xs, taus, PhiMode::Analysis)?;
            if !phi.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteMarginal { route: r });
            }
            if phi[r] < prev {
                diverged = false; // not even monotone toward the boundary
                break;
            }
            prev = phi[r];
            x_r *= 1e-2;
        }
        // Divergence means growth beyond any fixed multiple of the interior value.
        xs[r] = 1.0;
        let interior = alg.fluid_phi(&xs, taus, PhiMode::Analysis)?[r];
        if !(diverged && prev > 1e8 * interior.max(1e-300)) {
            verdict = false;
            worst = Some(Witness {
                point: vec![1e-12],
                value: prev,
                detail: format!("phi_{r} at x_{r} = 1e-12 (interior value {interior:.3e})"),
            });
        }
    }
    Ok(CriterionReport {
        criterion: "C3".into(),
        algorithm: alg.name().into(),
        verdict,
        samples: m * 7,
        worst_witness: worst,
    })
}

/// C5: `phi_r -> 0` as `x_r -> inf`, other coordinates fixed.
pub fn check_c5(alg: Algorithm, taus: &[f64]) -> Result<CriterionReport> {
    let m = taus.len();
    let mut verdict = true;
    let mut worst: Option<Witness> = None;
    for r in 0..m {
        let mut xs = vec![1.0; m];
        xs[r] = 1.0;
        let start = alg.fluid_phi(&xs, taus, PhiMode::Analysis)?[r];
        xs[r] = 1e12;
        let tail = alg.fluid_phi(&xs, taus, PhiMode::Analysis)?[r];
        if !(tail <= 1e-8 * start) {
            verdict = false;
            worst = Some(Witness {
                point: vec![1e12],
                value: tail,
                detail: format!("phi_{r} at x_{r} = 1e12"),
            });
        }
    }
    Ok(CriterionReport {
        criterion: "C5".into(),
        algorithm: alg.name().into(),
        verdict,
        samples: m,
        worst_witness: worst,
    })
}

/// C1: per-source demand through a link is nonincreasing in that link's
/// price and vanishes as the price grows without bound.
///
/// Uses the per-source equilibrium map from [`crate::equilibrium`]; the
/// monotonicity test is a finite-difference sign test along an ascending
/// price grid.
pub fn check_c1(
    alg: Algorithm,
    net: &NetworkSpec,
    price_samples: usize,
    seed: u64,
) -> Result<CriterionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut verdict = true;
    let mut worst: Option<Witness> = None;
    let mut samples = 0usize;
    for s in 0..net.num_sources() {
        let routes = net.source_routes(s).to_vec();
        let taus = net.source_rtts(s);
        let links: Vec<usize> = {
            let mut ls: Vec<usize> = routes
                .iter()
                .flat_map(|&r| net.route(r).links.iter().copied())
                .collect();
            ls.sort_unstable();
            ls.dedup();
            ls
        };
        for &l in &links {
            for _ in 0..price_samples.max(1) {
                let base: Vec<f64> = (0..net.num_links())
                    .map(|_| 10f64.powf(rng.gen_range(-1.5..0.5)))
                    .collect();
                let demand = |p_l: f64| -> Result<f64> {
                    let mut prices = base.clone();
                    prices[l] = p_l;
                    let qs: Vec<f64> = routes
                        .iter()
                        .map(|&r| net.route(r).links.iter().map(|&ll| prices[ll]).sum())
                        .collect();
                    let x = solve_source_rates(alg, &qs, &taus)?;
                    Ok(routes
                        .iter()
                        .zip(&x)
                        .filter(|(&r, _)| net.route(r).links.contains(&l))
                        .map(|(_, &xr)| xr)
                        .sum())
                };
                // Ascending grid over four decades.
                let mut prev = f64::INFINITY;
                for k in 0..=16 {
                    let p_l = 1e-2 * 10f64.powf(k as f64 / 4.0);
                    let y = demand(p_l)?;
                    samples += 1;
                    if y > prev + 1e-9 * prev.abs().max(1.0) {
                        verdict = false;
                        worst = Some(Witness {
                            point: vec![p_l],
                            value: y - prev,
                            detail: format!("demand increase on link {l} of source {s}"),
                        });
                    }
                    prev = y;
                }
                let tail = demand(1e6)?;
                if !(tail <= 1e-6 * net.link(l).capacity) {
                    verdict = false;
                    worst = Some(Witness {
                        point: vec![1e6],
                        value: tail,
                        detail: format!("demand on link {l} of source {s} does not vanish"),
                    });
                }
            }
        }
    }
    Ok(CriterionReport {
        criterion: "C1".into(),
        algorithm: alg.name().into(),
        verdict,
        samples,
        worst_witness: worst,
    })
}

/// C4: aggregate source throughput is nonincreasing in every route price.
///
/// Where the marginal Jacobian is invertible the column sums of its inverse
/// are tested directly. Where it is singular (Coupled and the beta = 0
/// family) the equivalent statement is tested on the equilibrium map itself:
/// `1^T x_s(q)` must not increase in any `q_r`.
pub fn check_c4(alg: Algorithm, taus: &[f64], samples: usize, seed: u64) -> Result<CriterionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = taus.len();
    let mut verdict = true;
    let mut worst: Option<Witness> = None;
    for _ in 0..samples {
        let xs = sample_point(&mut rng, m);
        let rep = jacobian_phi(alg, &xs, taus, JacobianMethod::ClosedForm)?;
        let invertible = rep.sym_part_max_eig < C2_EIG_THRESHOLD;
        if invertible {
            if let Some(inv) = rep.j_phi.clone().try_inverse() {
                for k in 0..m {
                    let col_sum: f64 = (0..m).map(|r| inv[(r, k)]).sum();
                    if worst.as_ref().is_none_or(|w| col_sum > w.value) {
                        worst = Some(Witness {
                            point: xs.clone(),
                            value: col_sum,
                            detail: format!("column {k} sum of the inverse Jacobian"),
                        });
                    }
                    if !(col_sum <= 1e-10) {
                        verdict = false;
                    }
                }
                continue;
            }
        }
        // Singular Jacobian: fall back to the equilibrium map.
        let qs: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.gen_range(-1.0..1.0))).collect();
        let total = |q: &[f64]| -> Result<f64> {
            Ok(solve_source_rates(alg, q, taus)?.iter().sum())
        };
        let base = total(&qs)?;
        for r in 0..m {
            let mut bumped = qs.clone();
            let h = 1e-6 * qs[r];
            bumped[r] += h;
            let slope = (total(&bumped)? - base) / h;
            if worst.as_ref().is_none_or(|w| slope > w.value) {
                worst = Some(Witness {
                    point: qs.clone(),
                    value: slope,
                    detail: format!("d(1^T x)/d q_{r} via the equilibrium map"),
                });
            }
            if !(slope <= 1e-9 * (base / qs[r]).abs().max(1.0)) {
                verdict = false;
            }
        }
    }
    Ok(CriterionReport {
        criterion: "C4".into(),
        algorithm: alg.name().into(),
        verdict,
        samples,
        worst_witness: worst,
    })
}

/// One row of the criteria table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgorithmVerdicts {
    pub algorithm: String,
    pub c0: bool,
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    pub c4: bool,
    pub c5: bool,
}

fn two_route_probe_net() -> Result<NetworkSpec> {
    // Desk-scale capacities: the vanishing-demand check compares the demand
    // left at a price of 1e6 against 1e-6 of the capacity.
    NetworkSpec::new(
        vec![
            crate::net::LinkSpec::new(2000.0, 1.0),
            crate::net::LinkSpec::new(2000.0, 1.0),
        ],
        vec![
            crate::net::RouteSpec::new(0, vec![0], 1.0),
            crate::net::RouteSpec::new(0, vec![1], 1.0),
        ],
    )
}

/// Runs every checker for one descriptor on a two-route source with unit
/// RTTs (the canonical setting the published verdict table refers to).
pub fn criteria_verdicts(alg: Algorithm, samples: usize, seed: u64) -> Result<AlgorithmVerdicts> {
    let taus = [1.0, 1.0];
    let net = two_route_probe_net()?;
    Ok(AlgorithmVerdicts {
        algorithm: alg.name().into(),
        c0: check_c0(alg, &taus, samples, seed)?.verdict,
        c1: check_c1(alg, &net, 3, seed ^ 0x1)?.verdict,
        c2: check_c2(alg, &taus, samples, seed ^ 0x2)?.verdict,
        c3: check_c3(alg, &taus)?.verdict,
        c4: check_c4(alg, &taus, samples, seed ^ 0x4)?.verdict,
        c5: check_c5(alg, &taus)?.verdict,
    })
}

/// Reports from all checkers for one descriptor, for JSON emission.
pub fn criteria_reports(alg: Algorithm, samples: usize, seed: u64) -> Result<Vec<CriterionReport>> {
    let taus = [1.0, 1.0];
    let net = two_route_probe_net()?;
    Ok(vec![
        check_c0(alg, &taus, samples, seed)?,
        check_c1(alg, &net, 3, seed ^ 0x1)?,
        check_c2(alg, &taus, samples, seed ^ 0x2)?,
        check_c3(alg, &taus)?,
        check_c4(alg, &taus, samples, seed ^ 0x4)?,
        check_c5(alg, &taus)?,
    ])
}

/// Linearization of the rate/price dynamics at an equilibrium.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Eigenvalues of the equilibrium Jacobian.
    pub eigenvalues: Vec<C64>,
    /// Largest real part over the spectrum.
    pub spectral_abscissa: f64,
    /// Rayleigh quotient of each eigenvector: the rate-block quadratic form
    /// of `[dPhi/dx]^+` over the gain-weighted norm of the eigenvector.
    pub rayleigh_bound: Vec<f64>,
    /// Largest Rayleigh quotient over the computed eigenvectors. This is the
    /// bound the responsiveness comparison uses.
    pub lambda_bar: f64,
    /// Supremum of the same quotient over the whole unit sphere. Price-only
    /// directions zero the numerator, so this degenerates to 0 and is
    /// reported only for completeness.
    pub sphere_supremum: f64,
    /// Worst `|Re(lambda) - rayleigh|` over the computed eigenpairs; an
    /// internal consistency check of the eigen-solve.
    pub rayleigh_identity_error: f64,
    /// Links that carried a positive price and were kept.
    pub active_links: Vec<usize>,
}

/// Builds the equilibrium Jacobian
///
/// ```text
/// J* = [ K dPhi/dx   -K H^T ]
///      [ G H          0     ]
/// ```
///
/// (`K` the gain diagonal at the equilibrium, `G` the price-gain diagonal)
/// on the active-link subnetwork, and decomposes it.
///
/// `algs` assigns one descriptor per source. Links with (numerically) zero
/// equilibrium price are removed first; the equilibrium must satisfy the
/// fixed-point conditions to 1e-6.
pub fn linearization(
    net: &NetworkSpec,
    algs: &[Algorithm],
    equilibrium: &SystemState,
) -> Result<SpectrumReport> {
    if algs.len() != net.num_sources() {
        return Err(Error::DimensionMismatch {
            what: "algorithms per source",
            expected: net.num_sources(),
            got: algs.len(),
        });
    }
    let residual = crate::fluid::equilibrium_residual(net, algs, equilibrium)?;
    if residual > 1e-6 {
        return Err(Error::NotAnEquilibrium {
            residual,
            tol: 1e-6,
        });
    }

    let num_routes = net.num_routes();
    let max_p = equilibrium.prices.amax().max(1e-300);
    let active_links: Vec<usize> = (0..net.num_links())
        .filter(|&l| equilibrium.prices[l] > 1e-7 * max_p)
        .collect();
    if active_links.is_empty() {
        return Err(Error::Domain("no active links at the equilibrium".into()));
    }
    let num_active = active_links.len();

    // Block-diagonal dPhi/dx over sources, and the gain diagonal.
    let mut j_phi = DMatrix::zeros(num_routes, num_routes);
    let mut gains = DVector::zeros(num_routes);
    for s in 0..net.num_sources() {
        let routes = net.source_routes(s);
        let taus = net.source_rtts(s);
        let xs: Vec<f64> = routes.iter().map(|&r| equilibrium.rates[r]).collect();
        let rep = jacobian_phi(algs[s], &xs, &taus, JacobianMethod::ClosedForm)?;
        let k = algs[s].fluid_k(&xs, &taus);
        for (i, &ri) in routes.iter().enumerate() {
            gains[ri] = k[i];
            for (j, &rj) in routes.iter().enumerate() {
                j_phi[(ri, rj)] = rep.j_phi[(i, j)];
            }
        }
    }

    let h_full = routing_matrix(net);
    let h = DMatrix::from_fn(num_active, num_routes, |i, r| h_full[(active_links[i], r)]);
    let gamma = DVector::from_iterator(
        num_active,
        active_links.iter().map(|&l| net.link(l).price_gain),
    );

    let n = num_routes + num_active;
    let mut jac = DMatrix::zeros(n, n);
    for r in 0..num_routes {
        for k in 0..num_routes {
            jac[(r, k)] = gains[r] * j_phi[(r, k)];
        }
        for l in 0..num_active {
            jac[(r, num_routes + l)] = -gains[r] * h[(l, r)];
        }
    }
    for l in 0..num_active {
        for r in 0..num_routes {
            jac[(num_routes + l, r)] = gamma[l] * h[(l, r)];
        }
    }

    let sym_phi = linalg::symmetric_part(&j_phi);
    let pairs = linalg::eigenpairs(&jac);

    let mut eigenvalues = Vec::with_capacity(n);
    let mut rayleigh_bound = Vec::with_capacity(n);
    let mut identity_err = 0.0f64;
    let mut abscissa = f64::NEG_INFINITY;
    for pair in &pairs {
        eigenvalues.push(pair.value);
        abscissa = abscissa.max(pair.value.re);
        let xv = pair.vector.rows(0, num_routes).into_owned();
        let pv = pair.vector.rows(num_routes, num_active).into_owned();
        let num = linalg::hermitian_quadratic_form(&sym_phi, &xv);
        let mut den = 0.0;
        for r in 0..num_routes {
            den += xv[r].norm_sqr() / gains[r];
        }
        for l in 0..num_active {
            den += pv[l].norm_sqr() / gamma[l];
        }
        let quotient = num / den;
        identity_err = identity_err.max((pair.value.re - quotient).abs());
        rayleigh_bound.push(quotient);
    }
    let lambda_bar = rayleigh_bound.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));

    Ok(SpectrumReport {
        eigenvalues,
        spectral_abscissa: abscissa,
        rayleigh_bound,
        lambda_bar,
        sphere_supremum: 0.0,
        rayleigh_identity_error: identity_err,
        active_links,
    })
}

/// Responsiveness comparison of two linearizations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponsivenessComparison {
    pub lambda_bar_a: f64,
    pub lambda_bar_b: f64,
    pub abscissa_a: f64,
    pub abscissa_b: f64,
    /// True when `a` is at least as responsive as `b` (smaller lambda_bar).
    pub a_at_least_as_responsive: bool,
}

pub fn compare_responsiveness(a: &SpectrumReport, b: &SpectrumReport) -> ResponsivenessComparison {
    ResponsivenessComparison {
        lambda_bar_a: a.lambda_bar,
        lambda_bar_b: b.lambda_bar,
        abscissa_a: a.spectral_abscissa,
        abscissa_b: b.spectral_abscissa,
        a_at_least_as_responsive: a.lambda_bar <= b.lambda_bar + 1e-12,
    }
}

/// Expected relative aggregate-rate reduction per loss epoch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OscillationReport {
    /// First-order value of the metric.
    pub d_s: f64,
    /// Monte Carlo cross-check, when one was run.
    pub mc_estimate: Option<f64>,
    pub mc_stderr: Option<f64>,
}

/// First-order window-oscillation metric
///
/// ```text
/// D_s = sum_r tau_r q_r k_r(x_s) / (|x_s|_1 sum_r tau_r q_r x_r)
/// ```
///
/// For a single NewReno route this is exactly 1/2; multipath descriptors
/// with `k_r <= x_r |x|_1 / 2` stay at or below 1/2.
pub fn oscillation_metric(
    alg: Algorithm,
    xs: &[f64],
    taus: &[f64],
    qs: &[f64],
) -> Result<OscillationReport> {
    if xs.len() != taus.len() || xs.len() != qs.len() || xs.is_empty() {
        return Err(Error::Domain("inconsistent oscillation inputs".into()));
    }
    if xs.iter().any(|&x| !(x > 0.0)) || qs.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::Domain(
            "oscillation metric requires x > 0 and q > 0".into(),
        ));
    }
    let k = alg.fluid_k(xs, taus);
    let sum_x: f64 = xs.iter().sum();
    // Normalizing the weights by the first one leaves the ratio unchanged
    // and keeps degenerate cases (single route, equal routes) bit-exact.
    let w0 = taus[0] * qs[0];
    let num: f64 = (0..xs.len()).map(|r| taus[r] * qs[r] / w0 * k[r]).sum();
    let den: f64 = (0..xs.len()).map(|r| taus[r] * qs[r] / w0 * xs[r]).sum();
    Ok(OscillationReport {
        d_s: num / (sum_x * den),
        mc_estimate: None,
        mc_stderr: None,
    })
}

/// Output of the conditional-drop oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DropOracleResult {
    /// First-order value `sum_k d_k q_k |A_k| / sum_k q_k |A_k|`.
    pub closed_form: f64,
    /// Exact conditional expectation from the binomial tail probabilities.
    pub exact: f64,
    pub mc_estimate: f64,
    pub mc_stderr: f64,
    /// Trials on which the conditioning event occurred.
    pub accepted: usize,
    pub trials: usize,
}

/// Direct Monte Carlo of `E[sum_k d_k 1{set k sees a loss} | any loss]`
/// where set `k` holds `sizes[k]` independent Bernoulli(`probs[k]`) trials.
///
/// The exact value `sum_k d_k P_k / P(any)` with
/// `P_k = 1 - (1 - q_k)^{|A_k|}` is returned alongside the first-order
/// closed form, whose error vanishes linearly in `sum_k q_k`. Intended for
/// `trials` of 1e5 and up.
pub fn conditional_drop_oracle(
    sizes: &[usize],
    probs: &[f64],
    weights: &[f64],
    trials: usize,
    seed: u64,
) -> Result<DropOracleResult> {
    let m = sizes.len();
    if probs.len() != m || weights.len() != m || m == 0 {
        return Err(Error::Domain("inconsistent oracle inputs".into()));
    }
    for &q in probs {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!(
                "loss probability {q} outside (0, 1)"
            )));
        }
    }

    let closed_num: f64 = (0..m).map(|k| weights[k] * probs[k] * sizes[k] as f64).sum();
    let closed_den: f64 = (0..m).map(|k| probs[k] * sizes[k] as f64).sum();
    let closed_form = closed_num / closed_den;

    let p_set: Vec<f64> = (0..m)
        .map(|k| 1.0 - (1.0 - probs[k]).powi(sizes[k] as i32))
        .collect();
    let p_any = 1.0 - p_set.iter().map(|&p| 1.0 - p).product::<f64>();
    let exact = (0..m).map(|k| weights[k] * p_set[k]).sum::<f64>() / p_any;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let mut drop = 0.0;
        let mut any = false;
        for k in 0..m {
            let mut hit = false;
            for _ in 0..sizes[k] {
                if rng.gen::<f64>() < probs[k] {
                    hit = true;
                }
            }
            if hit {
                any = true;
                drop += weights[k];
            }
        }
        if any {
            accepted += 1;
            sum += drop;
            sum_sq += drop * drop;
        }
    }
    if accepted < 2 {
        return Err(Error::NoConvergence {
            iterations: trials,
            residual: f64::NAN,
        });
    }
    let mean = sum / accepted as f64;
    let var = (sum_sq / accepted as f64 - mean * mean).max(0.0);
    let stderr = (var / accepted as f64).sqrt();
    Ok(DropOracleResult {
        closed_form,
        exact,
        mc_estimate: mean,
        mc_stderr: stderr,
        accepted,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::standard_descriptors;
    use approx::assert_relative_eq;

    fn fd_matches(alg: Algorithm, xs: &[f64], taus: &[f64]) {
        let cf = jacobian_phi(alg, xs, taus, JacobianMethod::ClosedForm).unwrap();
        let fd = jacobian_phi(alg, xs, taus, JacobianMethod::FiniteDifference).unwrap();
        let scale = cf.j_phi.amax();
        let diff = (&cf.j_phi - &fd.j_phi).amax();
        assert!(
            diff <= JACOBIAN_FD_REL_TOL * scale,
            "{}: closed form vs finite differences differ by {diff:.3e} (scale {scale:.3e})",
            alg.name()
        );
    }

    #[test]
    fn closed_form_jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for alg in [
            Algorithm::Ewtcp { a: 1.5 },
            Algorithm::Coupled,
            Algorithm::Semicoupled,
            Algorithm::Max,
            Algorithm::Balia,
            Algorithm::generalized(0.6, 0.3, NormOrder::Finite(3)),
            Algorithm::generalized(0.9, 0.0, NormOrder::Finite(1)),
        ] {
            for _ in 0..25 {
                let m = rng.gen_range(2..=4usize);
                let taus: Vec<f64> = (0..m).map(|_| rng.gen_range(0.3..2.0)).collect();
                let xs = sample_point(&mut rng, m);
                fd_matches(alg, &xs, &taus);
            }
        }
        fd_matches(Algorithm::NewReno, &[2.5], &[0.7]);
    }

    #[test]
    fn structured_jacobian_matches_direct_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..50 {
            let m = rng.gen_range(2..=6usize);
            let beta = rng.gen_range(0.05..1.0);
            let tau = rng.gen_range(0.3..2.0);
            let n = if rng.gen_bool(0.5) {
                NormOrder::Inf
            } else {
                NormOrder::Finite(rng.gen_range(1..=6))
            };
            let xs = sample_point(&mut rng, m);
            let taus = vec![tau; m];
            let alg = Algorithm::generalized(beta, 0.0, n);
            let direct = jacobian_phi(alg, &xs, &taus, JacobianMethod::ClosedForm)
                .unwrap()
                .j_phi;
            let structured = generalized_jacobian_equal_rtt(beta, n, &xs, tau);
            let diff = (&direct - &structured).amax();
            assert!(diff <= 1e-10 * direct.amax());
        }
    }

    #[test]
    fn mixing_coefficients_sum_to_one_with_bounded_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        for _ in 0..200 {
            let m = rng.gen_range(1..=8usize);
            let xs = sample_point(&mut rng, m);
            for n in [
                NormOrder::Finite(1),
                NormOrder::Finite(2),
                NormOrder::Finite(rng.gen_range(1..=12)),
                NormOrder::Inf,
            ] {
                let a = mixing_coefficients(&xs, n);
                let sum: f64 = a.iter().sum();
                let sq: f64 = a.iter().map(|&v| v * v).sum();
                assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
                assert!(sq <= 1.0 + 1e-12, "norm bound violated: {sq}");
            }
        }
    }

    #[test]
    fn coupled_jacobian_is_symmetric_singular() {
        let rep = jacobian_phi(
            Algorithm::Coupled,
            &[1.0, 2.0],
            &[1.0, 1.0],
            JacobianMethod::ClosedForm,
        )
        .unwrap();
        assert!(rep.symmetric);
        // Rank-one -c 1 1^T: the largest symmetric-part eigenvalue is 0.
        assert!(rep.sym_part_max_eig.abs() < 1e-12);
        let s = 3.0f64;
        assert_relative_eq!(rep.j_phi[(0, 1)], -4.0 / (s * s * s), epsilon = 1e-12);
    }

    #[test]
    fn max_jacobian_asymmetric_at_generic_point() {
        let rep = jacobian_phi(
            Algorithm::Max,
            &[1.0, 2.0],
            &[1.0, 1.0],
            JacobianMethod::FiniteDifference,
        )
        .unwrap();
        assert!(!rep.symmetric);
        let asym = (&rep.j_phi - rep.j_phi.transpose()).amax();
        assert!(asym > 1e-3);
    }

    #[test]
    fn ewtcp_jacobian_diagonal() {
        let rep = jacobian_phi(
            Algorithm::ewtcp(),
            &[1.0, 3.0],
            &[1.0, 2.0],
            JacobianMethod::ClosedForm,
        )
        .unwrap();
        assert!(rep.symmetric);
        assert_eq!(rep.j_phi[(0, 1)], 0.0);
        assert_relative_eq!(rep.j_phi[(0, 0)], -4.0, epsilon = 1e-12);
        assert!(rep.sym_part_max_eig < 0.0);
    }

    #[test]
    fn published_verdict_pattern() {
        let expected = [
            ("ewtcp", [true, true, true, true, true, true]),
            ("coupled", [true, true, false, false, true, true]),
            ("semicoupled", [false, true, true, true, true, true]),
            ("max", [false, true, true, true, true, true]),
            ("balia", [false, true, true, true, true, true]),
        ];
        for (alg, exp) in [
            Algorithm::ewtcp(),
            Algorithm::Coupled,
            Algorithm::Semicoupled,
            Algorithm::Max,
            Algorithm::Balia,
        ]
        .iter()
        .zip(expected)
        {
            let v = criteria_verdicts(*alg, 100, 2024).unwrap();
            assert_eq!(v.algorithm, exp.0);
            assert_eq!(
                [v.c0, v.c1, v.c2, v.c3, v.c4, v.c5],
                exp.1,
                "verdicts for {}",
                exp.0
            );
        }
    }

    #[test]
    fn generalized_beta_zero_fails_c2() {
        let alg = Algorithm::generalized(0.0, 0.0, NormOrder::Finite(2));
        let rep = check_c2(alg, &[1.0, 1.0], 50, 7).unwrap();
        assert!(!rep.verdict);
    }

    #[test]
    fn generalized_midrange_beta_passes_c2_at_four_routes() {
        let alg = Algorithm::generalized(0.5, 0.25, NormOrder::Inf);
        let rep = check_c2(alg, &[1.0; 4], 100, 11).unwrap();
        assert!(rep.verdict, "worst witness: {:?}", rep.worst_witness);
    }

    #[test]
    fn newreno_phi_at_large_rate() {
        let phi = Algorithm::NewReno
            .fluid_phi(&[1e6], &[1.0], PhiMode::Analysis)
            .unwrap();
        assert_relative_eq!(phi[0], 2e-12, max_relative = 1e-12);
    }

    #[test]
    fn oscillation_metric_hand_values() {
        // NewReno: exactly 1/2 regardless of the operating point.
        let rep = oscillation_metric(Algorithm::NewReno, &[3.7], &[0.9], &[0.01]).unwrap();
        assert_eq!(rep.d_s, 0.5);

        // Two equal Balia routes: 1/4.
        let rep =
            oscillation_metric(Algorithm::Balia, &[1.0, 1.0], &[1.0, 1.0], &[0.01, 0.01]).unwrap();
        assert_relative_eq!(rep.d_s, 0.25, epsilon = 1e-12);

        // Every standard multipath descriptor stays below 1/2 on two active
        // equal routes.
        for alg in standard_descriptors() {
            let rep =
                oscillation_metric(alg, &[2.0, 2.0], &[1.0, 1.0], &[0.02, 0.02]).unwrap();
            assert!(rep.d_s < 0.5, "{}: D_s = {}", alg.name(), rep.d_s);
        }
    }

    #[test]
    fn drop_oracle_single_set_is_exact() {
        let r = conditional_drop_oracle(&[5], &[0.01], &[2.5], 20_000, 3).unwrap();
        assert_eq!(r.mc_estimate, 2.5);
        assert_eq!(r.exact, 2.5);
        assert_eq!(r.closed_form, 2.5);
        assert_eq!(r.mc_stderr, 0.0);
    }

    #[test]
    fn drop_oracle_two_set_closed_form() {
        let r = conditional_drop_oracle(&[10, 10], &[0.001, 0.002], &[1.0, 2.0], 200_000, 5)
            .unwrap();
        assert_relative_eq!(r.closed_form, 5.0 / 3.0, epsilon = 1e-12);
        // The Monte Carlo estimates the exact conditional expectation.
        assert!(
            (r.mc_estimate - r.exact).abs() <= 3.0 * r.mc_stderr,
            "mc {} vs exact {} (stderr {})",
            r.mc_estimate,
            r.exact,
            r.mc_stderr
        );
    }
}
