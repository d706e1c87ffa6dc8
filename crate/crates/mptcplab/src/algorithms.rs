//! Algorithm descriptors: the per-source fluid functions `k_r(x_s)`,
//! `phi_r(x_s)` and the packet-level per-ACK / per-loss window updates
//! `I_r(w_s)`, `D_r(w_s)` for each MP-TCP variant, plus the conversion
//! between the two representations.
//!
//! The fluid pair `(k, phi)` is what the rate dynamics integrate; the packet
//! pair `(I, D)` is what the event simulator applies. For every variant the
//! two are linked by
//!
//! ```text
//! k_r(x_s)   = x_r / tau_r * D_r(w_s)
//! phi_r(x_s) = I_r(w_s) / D_r(w_s)         with x_r = w_r / tau_r
//! ```
//!
//! which `packet_to_fluid` evaluates directly. Balia's capped decrement is
//! the one deliberate departure from this correspondence: its packet
//! decrement is `w_r/2 * min(alpha_r, 1.5)` while its fluid gain comes from
//! the generalized family, so the conversion identity for Balia holds exactly
//! only where all routes carry equal rates (`alpha_r = 1`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate floor used by guarded marginal evaluation near the boundary.
pub const RATE_FLOOR: f64 = 1e-9;

/// Balia is the generalized algorithm at these parameters, with a capped
/// multiplicative decrease.
pub const BALIA_BETA: f64 = 0.2;
pub const BALIA_ETA: f64 = 0.5;
pub const BALIA_DECREMENT_CAP: f64 = 1.5;

/// Order of the norm in the generalized marginal: an exact finite power or
/// the max-norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormOrder {
    Finite(u32),
    Inf,
}

impl std::fmt::Display for NormOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormOrder::Finite(n) => write!(f, "{n}"),
            NormOrder::Inf => write!(f, "inf"),
        }
    }
}

/// An MP-TCP window-update algorithm and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Algorithm {
    NewReno,
    Ewtcp { a: f64 },
    Coupled,
    Semicoupled,
    Max,
    Generalized { beta: f64, eta: f64, n: NormOrder },
    Balia,
}

impl Algorithm {
    pub fn ewtcp() -> Self {
        Algorithm::Ewtcp { a: 1.0 }
    }

    pub fn generalized(beta: f64, eta: f64, n: NormOrder) -> Self {
        Algorithm::Generalized { beta, eta, n }
    }

    /// Name as spelled in config files and reports.
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::NewReno => "newreno",
            Algorithm::Ewtcp { .. } => "ewtcp",
            Algorithm::Coupled => "coupled",
            Algorithm::Semicoupled => "semicoupled",
            Algorithm::Max => "max",
            Algorithm::Generalized { .. } => "generalized",
            Algorithm::Balia => "balia",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Algorithm::Ewtcp { a } => {
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::InvalidAlgorithm(format!(
                        "ewtcp requires a > 0, got {a}"
                    )));
                }
            }
            Algorithm::Generalized { beta, eta, n } => {
                if !(beta >= 0.0) || !beta.is_finite() {
                    return Err(Error::InvalidAlgorithm(format!(
                        "generalized requires beta >= 0, got {beta}"
                    )));
                }
                if !(eta >= 0.0) || !eta.is_finite() {
                    return Err(Error::InvalidAlgorithm(format!(
                        "generalized requires eta >= 0, got {eta}"
                    )));
                }
                if let NormOrder::Finite(0) = n {
                    return Err(Error::InvalidAlgorithm(
                        "generalized norm order must be >= 1".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// The `(beta, eta, n)` triple when the descriptor belongs to the
    /// generalized family (Balia included).
    pub fn generalized_params(&self) -> Option<(f64, f64, NormOrder)> {
        match *self {
            Algorithm::Generalized { beta, eta, n } => Some((beta, eta, n)),
            Algorithm::Balia => Some((BALIA_BETA, BALIA_ETA, NormOrder::Inf)),
            _ => None,
        }
    }

    /// Gain vector `k_r(x_s)`.
    ///
    /// Legacy variants use `x_r^2 / 2`; the generalized family scales the
    /// gain of low-rate routes up through `eta`.
    pub fn fluid_k(&self, xs: &[f64], taus: &[f64]) -> Vec<f64> {
        debug_assert_eq!(xs.len(), taus.len());
        match self.generalized_params() {
            Some((_, eta, _)) => {
                let m = max_slice(xs);
                xs.iter()
                    .map(|&x| 0.5 * x * (x + eta * (m - x)))
                    .collect()
            }
            None => xs.iter().map(|&x| 0.5 * x * x).collect(),
        }
    }

    /// Marginal price vector `phi_r(x_s)`.
    ///
    /// In `Analysis` mode a divergent marginal at `x_r = 0` is reported as
    /// `+inf` (set deliberately, not computed through); negative rates are
    /// rejected. In `Guarded` mode rates are floored at [`RATE_FLOOR`] before
    /// evaluation, which the fluid integrator relies on near the boundary.
    pub fn fluid_phi(&self, xs: &[f64], taus: &[f64], mode: PhiMode) -> Result<Vec<f64>> {
        debug_assert_eq!(xs.len(), taus.len());
        for (r, &x) in xs.iter().enumerate() {
            if x < 0.0 || !x.is_finite() {
                return Err(Error::Domain(format!("rate x[{r}] = {x} out of domain")));
            }
        }
        let guarded: Vec<f64>;
        let xs = match mode {
            PhiMode::Analysis => xs,
            PhiMode::Guarded => {
                guarded = xs.iter().map(|&x| x.max(RATE_FLOOR)).collect();
                &guarded
            }
        };
        let sum: f64 = xs.iter().sum();
        let phi = match *self {
            Algorithm::NewReno => phi_per_route(xs, taus, |x, tau| 2.0 / (tau * tau * x * x)),
            Algorithm::Ewtcp { a } => {
                phi_per_route(xs, taus, |x, tau| 2.0 * a / (tau * tau * x * x))
            }
            Algorithm::Coupled => taus
                .iter()
                .map(|&tau| 2.0 / (tau * tau * sum * sum))
                .collect(),
            // Conversion-consistent form 2 / (tau^2 x_r sum): this is what the
            // per-ACK rule 1/(tau_r sum_k w_k/tau_k) maps to, recovers NewReno
            // exactly for a single route and equals the generalized family at
            // (beta, n) = (1, 1).
            Algorithm::Semicoupled => {
                phi_per_route(xs, taus, |x, tau| 2.0 / (tau * tau * x * sum))
            }
            Algorithm::Max => {
                let m = xs
                    .iter()
                    .zip(taus)
                    .map(|(&x, &tau)| x / tau)
                    .fold(f64::NEG_INFINITY, f64::max);
                xs.iter()
                    .zip(taus)
                    .map(|(&x, &tau)| 2.0 * m / (x * tau * sum * sum))
                    .collect()
            }
            Algorithm::Generalized { .. } | Algorithm::Balia => {
                let (beta, _, n) = self.generalized_params().unwrap();
                let norm = rate_norm(xs, n);
                // Split form: the (1-beta) term stays finite at x_r = 0, so
                // beta = 0 degenerates to Coupled without a 0/0.
                xs.iter()
                    .zip(taus)
                    .map(|(&x, &tau)| {
                        2.0 * (1.0 - beta) / (tau * tau * sum * sum)
                            + 2.0 * beta * norm / (tau * tau * x * sum * sum)
                    })
                    .collect()
            }
        };
        if matches!(mode, PhiMode::Analysis) {
            for (r, (&p, &x)) in phi.iter().zip(xs).enumerate() {
                if x > 0.0 && !p.is_finite() {
                    return Err(Error::NonFiniteMarginal { route: r });
                }
            }
        }
        Ok(phi)
    }

    /// Per-ACK window increment `I_r(w_s)` for every route of the source.
    ///
    /// `taus` are the (smoothed) round-trip times the endpoint currently
    /// measures. Windows must be positive; a single-route source degenerates
    /// to the NewReno update exactly.
    pub fn packet_increment(&self, ws: &[f64], taus: &[f64]) -> Result<Vec<f64>> {
        check_windows(ws, taus)?;
        if ws.len() == 1 {
            let a = match *self {
                Algorithm::Ewtcp { a } => a,
                _ => 1.0,
            };
            return Ok(vec![a / ws[0]]);
        }
        let xs: Vec<f64> = ws.iter().zip(taus).map(|(&w, &tau)| w / tau).collect();
        let sum: f64 = xs.iter().sum();
        Ok(match *self {
            Algorithm::NewReno => ws.iter().map(|&w| 1.0 / w).collect(),
            Algorithm::Ewtcp { a } => ws.iter().map(|&w| a / w).collect(),
            Algorithm::Coupled => xs
                .iter()
                .zip(taus)
                .map(|(&x, &tau)| (x / tau) / (sum * sum))
                .collect(),
            Algorithm::Semicoupled => taus.iter().map(|&tau| 1.0 / (tau * sum)).collect(),
            Algorithm::Max => {
                let m = xs
                    .iter()
                    .zip(taus)
                    .map(|(&x, &tau)| x / tau)
                    .fold(f64::NEG_INFINITY, f64::max);
                ws.iter()
                    .map(|&w| (m / (sum * sum)).min(1.0 / w))
                    .collect()
            }
            Algorithm::Balia => {
                let m = max_slice(&xs);
                xs.iter()
                    .zip(taus)
                    .map(|(&x, &tau)| {
                        let alpha = m / x;
                        x / (tau * sum * sum) * ((1.0 + alpha) / 2.0) * ((4.0 + alpha) / 5.0)
                    })
                    .collect()
            }
            Algorithm::Generalized { .. } => {
                // Image of the fluid pair under the window/fluid conversion:
                // I_r = phi_r * D_r with D_r = tau_r k_r / x_r.
                let k = self.fluid_k(&xs, taus);
                let phi = self.fluid_phi(&xs, taus, PhiMode::Analysis)?;
                xs.iter()
                    .zip(taus)
                    .zip(k.iter().zip(&phi))
                    .map(|((&x, &tau), (&kr, &pr))| pr * tau * kr / x)
                    .collect()
            }
        })
    }

    /// Per-loss window decrement `D_r(w_s)` for route `r`. The caller floors
    /// the resulting window at one packet.
    pub fn packet_decrement(&self, ws: &[f64], taus: &[f64], r: usize) -> Result<f64> {
        check_windows(ws, taus)?;
        if r >= ws.len() {
            return Err(Error::Domain(format!("route index {r} out of range")));
        }
        if ws.len() == 1 {
            return Ok(ws[0] / 2.0);
        }
        Ok(match *self {
            Algorithm::Balia => {
                let xs: Vec<f64> = ws.iter().zip(taus).map(|(&w, &tau)| w / tau).collect();
                let alpha = max_slice(&xs) / xs[r];
                ws[r] / 2.0 * alpha.min(BALIA_DECREMENT_CAP)
            }
            Algorithm::Generalized { .. } => {
                let xs: Vec<f64> = ws.iter().zip(taus).map(|(&w, &tau)| w / tau).collect();
                let k = self.fluid_k(&xs, taus);
                taus[r] * k[r] / xs[r]
            }
            _ => ws[r] / 2.0,
        })
    }
}

/// Evaluation mode for the marginal price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiMode {
    /// Exact semantics: divergent boundary marginals come back as `+inf`.
    Analysis,
    /// Rates floored at [`RATE_FLOOR`]; used while integrating trajectories
    /// that may graze the boundary.
    Guarded,
}

/// A fluid `(K_s, Phi_s)` pair evaluated at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainAndMarginal {
    pub k: Vec<f64>,
    pub phi: Vec<f64>,
}

/// Converts packet-level update rules into the fluid pair at the given
/// window vector: `k_r = x_r/tau_r * D_r(w_s)` and `phi_r = I_r / D_r`.
///
/// `increment` returns the per-ACK increase for every route; `decrement`
/// returns the per-loss decrease for one route.
pub fn packet_to_fluid<FI, FD>(
    increment: FI,
    decrement: FD,
    ws: &[f64],
    taus: &[f64],
) -> Result<GainAndMarginal>
where
    FI: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
    FD: Fn(&[f64], &[f64], usize) -> Result<f64>,
{
    check_windows(ws, taus)?;
    let inc = increment(ws, taus)?;
    if inc.len() != ws.len() {
        return Err(Error::DimensionMismatch {
            what: "increment vector",
            expected: ws.len(),
            got: inc.len(),
        });
    }
    let mut k = Vec::with_capacity(ws.len());
    let mut phi = Vec::with_capacity(ws.len());
    for r in 0..ws.len() {
        let d = decrement(ws, taus, r)?;
        if !(d > 0.0) {
            return Err(Error::ZeroDecrement);
        }
        let x = ws[r] / taus[r];
        k.push(x / taus[r] * d);
        phi.push(inc[r] / d);
    }
    Ok(GainAndMarginal { k, phi })
}

/// Convenience wrapper: the fluid pair induced by an algorithm's own packet
/// rules.
pub fn fluid_from_packet(alg: Algorithm, ws: &[f64], taus: &[f64]) -> Result<GainAndMarginal> {
    packet_to_fluid(
        |w, t| alg.packet_increment(w, t),
        |w, t, r| alg.packet_decrement(w, t, r),
        ws,
        taus,
    )
}

/// `L_n` norm of a nonnegative rate vector, scaled to avoid overflow for
/// large finite orders.
pub fn rate_norm(xs: &[f64], n: NormOrder) -> f64 {
    let m = max_slice(xs);
    match n {
        NormOrder::Inf => m,
        NormOrder::Finite(1) => xs.iter().sum(),
        NormOrder::Finite(n) => {
            if m == 0.0 {
                return 0.0;
            }
            let p = n as i32;
            let sum: f64 = xs.iter().map(|&x| (x / m).powi(p)).sum();
            m * sum.powf(1.0 / n as f64)
        }
    }
}

fn max_slice(xs: &[f64]) -> f64 {
    xs.iter().fold(f64::NEG_INFINITY, |acc, &x| acc.max(x))
}

fn phi_per_route(xs: &[f64], taus: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    xs.iter().zip(taus).map(|(&x, &tau)| f(x, tau)).collect()
}

fn check_windows(ws: &[f64], taus: &[f64]) -> Result<()> {
    if ws.len() != taus.len() {
        return Err(Error::DimensionMismatch {
            what: "windows vs rtts",
            expected: taus.len(),
            got: ws.len(),
        });
    }
    if ws.is_empty() {
        return Err(Error::Domain("empty window vector".into()));
    }
    for (r, &w) in ws.iter().enumerate() {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::Domain(format!("window w[{r}] = {w} out of domain")));
        }
    }
    for (r, &tau) in taus.iter().enumerate() {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Domain(format!("rtt tau[{r}] = {tau} out of domain")));
        }
    }
    Ok(())
}

/// The descriptors exercised by the criteria checkers and reference
/// experiments, in friendliness order.
pub fn standard_descriptors() -> Vec<Algorithm> {
    vec![
        Algorithm::ewtcp(),
        Algorithm::Semicoupled,
        Algorithm::Max,
        Algorithm::Balia,
        Algorithm::Coupled,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn sample_rates(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| 10f64.powf(rng.gen_range(-2.0..2.0)))
            .collect()
    }

    #[test]
    fn fluid_k_examples() {
        let g = Algorithm::generalized(0.5, 0.0, NormOrder::Inf);
        let k = g.fluid_k(&[3.0, 4.0], &[1.0, 1.0]);
        assert_eq!(k, vec![4.5, 8.0]);

        let k = Algorithm::Balia.fluid_k(&[2.0, 4.0], &[1.0, 1.0]);
        assert_relative_eq!(k[0], 3.0, max_relative = 1e-15);
        assert_relative_eq!(k[1], 8.0, max_relative = 1e-15);

        for alg in standard_descriptors() {
            let k = alg.fluid_k(&[0.0, 1.0], &[1.0, 1.0]);
            assert_eq!(k[0], 0.0);
        }
    }

    #[test]
    fn fluid_phi_examples() {
        let phi = Algorithm::NewReno
            .fluid_phi(&[2.0], &[1.0], PhiMode::Analysis)
            .unwrap();
        assert_relative_eq!(phi[0], 0.5, max_relative = 1e-15);

        let phi = Algorithm::Coupled
            .fluid_phi(&[1.0, 1.0], &[1.0, 1.0], PhiMode::Analysis)
            .unwrap();
        assert_eq!(phi, vec![0.5, 0.5]);
    }

    #[test]
    fn generalized_recovers_named_algorithms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in 2..=4usize {
            for _ in 0..50 {
                let xs = sample_rates(&mut rng, m);
                let tau = rng.gen_range(0.2..3.0);
                let taus = vec![tau; m];

                let max_phi = Algorithm::Max
                    .fluid_phi(&xs, &taus, PhiMode::Analysis)
                    .unwrap();
                let g_max = Algorithm::generalized(1.0, 0.0, NormOrder::Inf)
                    .fluid_phi(&xs, &taus, PhiMode::Analysis)
                    .unwrap();
                for (a, b) in max_phi.iter().zip(&g_max) {
                    assert_relative_eq!(a, b, max_relative = 1e-12);
                }

                let coupled = Algorithm::Coupled
                    .fluid_phi(&xs, &taus, PhiMode::Analysis)
                    .unwrap();
                let g_coupled = Algorithm::generalized(0.0, 0.0, NormOrder::Finite(3))
                    .fluid_phi(&xs, &taus, PhiMode::Analysis)
                    .unwrap();
                for (a, b) in coupled.iter().zip(&g_coupled) {
                    assert_relative_eq!(a, b, max_relative = 1e-12);
                }

                let semi = Algorithm::Semicoupled
                    .fluid_phi(&xs, &taus, PhiMode::Analysis)
                    .unwrap();
                let g_semi = Algorithm::generalized(1.0, 0.0, NormOrder::Finite(1))
                    .fluid_phi(&xs, &taus, PhiMode::Analysis)
                    .unwrap();
                for (a, b) in semi.iter().zip(&g_semi) {
                    assert_relative_eq!(a, b, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn phi_divergence_at_boundary() {
        let taus = [1.0, 1.0];
        // C3-satisfying variants blow up at x_r = 0.
        for alg in [
            Algorithm::NewReno,
            Algorithm::ewtcp(),
            Algorithm::Semicoupled,
            Algorithm::Max,
            Algorithm::Balia,
        ] {
            let phi = alg.fluid_phi(&[0.0, 1.0], &taus, PhiMode::Analysis).unwrap();
            assert!(phi[0].is_infinite(), "{} should diverge", alg.name());
            assert!(phi[1].is_finite());
        }
        // Coupled stays finite when the aggregate is positive.
        let phi = Algorithm::Coupled
            .fluid_phi(&[0.0, 1.0], &taus, PhiMode::Analysis)
            .unwrap();
        assert_relative_eq!(phi[0], 2.0, max_relative = 1e-15);

        // Guarded mode floors the rate instead.
        let phi = Algorithm::Balia
            .fluid_phi(&[0.0, 1.0], &taus, PhiMode::Guarded)
            .unwrap();
        assert!(phi[0].is_finite());
        assert!(phi[0] > 1e6);
    }

    #[test]
    fn packet_increment_examples() {
        let inc = Algorithm::Balia.packet_increment(&[10.0], &[0.37]).unwrap();
        assert_eq!(inc, vec![0.1]);

        let inc = Algorithm::Balia
            .packet_increment(&[100.0, 100.0], &[1.0, 1.0])
            .unwrap();
        assert_relative_eq!(inc[0], 0.0025, max_relative = 1e-15);
        assert_relative_eq!(inc[1], 0.0025, max_relative = 1e-15);

        let inc = Algorithm::NewReno.packet_increment(&[8.0], &[1.0]).unwrap();
        assert_eq!(inc, vec![0.125]);
    }

    #[test]
    fn packet_decrement_examples() {
        let d = Algorithm::Balia.packet_decrement(&[10.0], &[1.0], 0).unwrap();
        assert_eq!(d, 5.0);

        let d = Algorithm::Balia
            .packet_decrement(&[1.0, 10.0], &[1.0, 1.0], 0)
            .unwrap();
        assert_relative_eq!(d, 0.75, max_relative = 1e-15);

        let d = Algorithm::ewtcp()
            .packet_decrement(&[20.0, 5.0], &[1.0, 1.0], 0)
            .unwrap();
        assert_eq!(d, 10.0);
    }

    #[test]
    fn max_min_term_binds_only_in_packet_path() {
        // Route 1 has a large window and a long RTT; the 1/w cap binds there.
        let ws = [10.0, 100.0];
        let taus = [0.1, 1.0];
        let inc = Algorithm::Max.packet_increment(&ws, &taus).unwrap();
        assert_eq!(inc[1], 1.0 / 100.0);
        assert!(inc[0] < 1.0 / 10.0);
        // The fluid marginal drops the cap.
        let xs = [100.0, 100.0];
        let phi = Algorithm::Max.fluid_phi(&xs, &taus, PhiMode::Analysis).unwrap();
        let m = 100.0 / 0.1f64;
        assert_relative_eq!(phi[1], 2.0 * m / (100.0 * 1.0 * 200.0 * 200.0), max_relative = 1e-12);
    }

    #[test]
    fn conversion_newreno_closed_form() {
        let g = fluid_from_packet(Algorithm::NewReno, &[4.0], &[1.0]).unwrap();
        assert_relative_eq!(g.k[0], 0.5 * 4.0 * 4.0, max_relative = 1e-15);
        assert_relative_eq!(g.phi[0], 2.0 / 16.0, max_relative = 1e-15);
    }

    #[test]
    fn conversion_reproduces_fluid_pair_for_legacy_variants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for alg in [
            Algorithm::NewReno,
            Algorithm::Ewtcp { a: 1.7 },
            Algorithm::Coupled,
            Algorithm::Semicoupled,
        ] {
            for m in 1..=4usize {
                if matches!(alg, Algorithm::NewReno) && m > 1 {
                    continue;
                }
                for _ in 0..40 {
                    let taus: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..2.0)).collect();
                    let ws: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..200.0)).collect();
                    let xs: Vec<f64> = ws.iter().zip(&taus).map(|(&w, &t)| w / t).collect();
                    let got = fluid_from_packet(alg, &ws, &taus).unwrap();
                    let k = alg.fluid_k(&xs, &taus);
                    let phi = alg.fluid_phi(&xs, &taus, PhiMode::Analysis).unwrap();
                    for r in 0..m {
                        assert_relative_eq!(got.k[r], k[r], max_relative = 1e-12);
                        assert_relative_eq!(got.phi[r], phi[r], max_relative = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn conversion_reproduces_fluid_pair_for_max_outside_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let m = rng.gen_range(2..=4usize);
            // Equal RTTs keep the 1/w term from binding.
            let tau = rng.gen_range(0.2..2.0);
            let taus = vec![tau; m];
            let ws: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..200.0)).collect();
            let xs: Vec<f64> = ws.iter().map(|&w| w / tau).collect();
            let raw = xs.iter().map(|&x| x / tau).fold(f64::MIN, f64::max)
                / xs.iter().sum::<f64>().powi(2);
            assert!(ws.iter().all(|&w| raw <= 1.0 / w), "cap must not bind");
            let got = fluid_from_packet(Algorithm::Max, &ws, &taus).unwrap();
            let phi = Algorithm::Max.fluid_phi(&xs, &taus, PhiMode::Analysis).unwrap();
            for r in 0..m {
                assert_relative_eq!(got.phi[r], phi[r], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn conversion_matches_generalized_family_exactly() {
        // The generalized packet rules are defined as the conversion image of
        // the fluid pair, so the round trip is exact for any parameters.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let m = rng.gen_range(2..=5usize);
            let beta = rng.gen_range(0.05..1.0);
            let eta = rng.gen_range(0.0..1.0);
            let n = if rng.gen_bool(0.5) {
                NormOrder::Inf
            } else {
                NormOrder::Finite(rng.gen_range(1..=8))
            };
            let alg = Algorithm::generalized(beta, eta, n);
            let taus: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..2.0)).collect();
            let ws: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..200.0)).collect();
            let xs: Vec<f64> = ws.iter().zip(&taus).map(|(&w, &t)| w / t).collect();
            let got = fluid_from_packet(alg, &ws, &taus).unwrap();
            let k = alg.fluid_k(&xs, &taus);
            let phi = alg.fluid_phi(&xs, &taus, PhiMode::Analysis).unwrap();
            for r in 0..m {
                assert_relative_eq!(got.k[r], k[r], max_relative = 1e-12);
                assert_relative_eq!(got.phi[r], phi[r], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn conversion_matches_balia_at_equal_rates() {
        // With equal per-route rates alpha_r = 1 and the capped decrement
        // coincides with the conversion-consistent one.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..50 {
            let m = rng.gen_range(2..=4usize);
            let tau = rng.gen_range(0.2..2.0);
            let w = rng.gen_range(2.0..300.0);
            let taus = vec![tau; m];
            let ws = vec![w; m];
            let xs = vec![w / tau; m];
            let got = fluid_from_packet(Algorithm::Balia, &ws, &taus).unwrap();
            let k = Algorithm::Balia.fluid_k(&xs, &taus);
            let phi = Algorithm::Balia.fluid_phi(&xs, &taus, PhiMode::Analysis).unwrap();
            for r in 0..m {
                assert_relative_eq!(got.k[r], k[r], max_relative = 1e-12);
                assert_relative_eq!(got.phi[r], phi[r], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn single_route_degenerates_to_newreno() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let x = 10f64.powf(rng.gen_range(-2.0..2.0));
            let tau = rng.gen_range(0.1..3.0);
            let w = x * tau;
            let k_ref = Algorithm::NewReno.fluid_k(&[x], &[tau]);
            let phi_ref = Algorithm::NewReno
                .fluid_phi(&[x], &[tau], PhiMode::Analysis)
                .unwrap();
            for alg in standard_descriptors() {
                let scale = match alg {
                    Algorithm::Ewtcp { a } => a,
                    _ => 1.0,
                };
                let k = alg.fluid_k(&[x], &[tau]);
                let phi = alg.fluid_phi(&[x], &[tau], PhiMode::Analysis).unwrap();
                assert_relative_eq!(k[0], k_ref[0], max_relative = 1e-12);
                assert_relative_eq!(phi[0], scale * phi_ref[0], max_relative = 1e-12);

                let inc = alg.packet_increment(&[w], &[tau]).unwrap();
                assert_eq!(inc[0], scale * (1.0 / w));
                let dec = alg.packet_decrement(&[w], &[tau], 0).unwrap();
                assert_eq!(dec, w / 2.0);
            }
        }
    }

    #[test]
    fn pointwise_phi_ordering_at_equal_rtts() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let m = rng.gen_range(2..=6usize);
            let taus = vec![rng.gen_range(0.2..3.0); m];
            let xs = sample_rates(&mut rng, m);
            let ewtcp = Algorithm::ewtcp().fluid_phi(&xs, &taus, PhiMode::Analysis).unwrap();
            let semi = Algorithm::Semicoupled
                .fluid_phi(&xs, &taus, PhiMode::Analysis)
                .unwrap();
            let maxa = Algorithm::Max.fluid_phi(&xs, &taus, PhiMode::Analysis).unwrap();
            let coupled = Algorithm::Coupled
                .fluid_phi(&xs, &taus, PhiMode::Analysis)
                .unwrap();
            for r in 0..m {
                assert!(ewtcp[r] >= semi[r] * (1.0 - 1e-12));
                assert!(semi[r] >= maxa[r] * (1.0 - 1e-12));
                assert!(maxa[r] >= coupled[r] * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(Algorithm::Ewtcp { a: 0.0 }.validate().is_err());
        assert!(Algorithm::generalized(-0.1, 0.0, NormOrder::Inf)
            .validate()
            .is_err());
        assert!(Algorithm::generalized(0.2, -1.0, NormOrder::Inf)
            .validate()
            .is_err());
        assert!(Algorithm::generalized(0.2, 0.5, NormOrder::Finite(0))
            .validate()
            .is_err());
        assert!(Algorithm::Balia.validate().is_ok());
    }

    #[test]
    fn packet_calls_reject_bad_windows() {
        assert!(Algorithm::Balia.packet_increment(&[0.0, 5.0], &[1.0, 1.0]).is_err());
        assert!(Algorithm::Balia.packet_increment(&[1.0], &[1.0, 1.0]).is_err());
        assert!(Algorithm::Balia.packet_decrement(&[5.0], &[1.0], 3).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gain_bounded_by_half_rate_times_aggregate(
                xs in proptest::collection::vec(1e-3f64..1e3, 1..6),
                eta in 0.0f64..1.0,
                beta in 0.0f64..1.0,
            ) {
                let taus = vec![1.0; xs.len()];
                let sum: f64 = xs.iter().sum();
                for alg in [
                    Algorithm::ewtcp(),
                    Algorithm::Coupled,
                    Algorithm::Semicoupled,
                    Algorithm::Max,
                    Algorithm::Balia,
                    Algorithm::generalized(beta, eta, NormOrder::Inf),
                ] {
                    let k = alg.fluid_k(&xs, &taus);
                    for (kr, &x) in k.iter().zip(&xs) {
                        prop_assert!(*kr <= 0.5 * x * sum * (1.0 + 1e-12));
                    }
                }
            }

            #[test]
            fn finite_norm_between_max_and_sum(
                xs in proptest::collection::vec(1e-3f64..1e3, 1..6),
                n in 1u32..40,
            ) {
                let norm = rate_norm(&xs, NormOrder::Finite(n));
                let max = xs.iter().cloned().fold(f64::MIN, f64::max);
                let sum: f64 = xs.iter().sum();
                prop_assert!(norm >= max * (1.0 - 1e-12));
                prop_assert!(norm <= sum * (1.0 + 1e-12));
            }
        }
    }
}
