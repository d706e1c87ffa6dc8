//! Fixed-step integration of the rate/price fluid dynamics
//!
//! ```text
//! dx_r/dt = k_r(x_s) (phi_r(x_s) - q_r)_{x_r}^+
//! dp_l/dt = gamma_l (y_l - c_l)_{p_l}^+
//! ```
//!
//! where `(a)_x^+` passes `a` through for `x > 0` and clamps it at zero on
//! the boundary. The integrator realizes the projection by stepping the raw
//! field and clamping negative components to zero afterwards, which agrees
//! with the projected dynamics in the small-step limit; marginals are
//! evaluated in guarded mode so boundary-grazing states stay finite.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::algorithms::{Algorithm, PhiMode, RATE_FLOOR};
use crate::error::{Error, Result};
use crate::net::{aggregate_price, aggregate_rate, NetworkSpec, SystemState};

/// Hard divergence guard: abort when `|x|_inf` exceeds this many times the
/// largest link capacity.
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegrationMethod {
    Euler,
    Rk4,
}

/// Configuration of one fluid run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluidRunConfig {
    /// Integration step in seconds.
    pub dt: f64,
    /// End time in seconds.
    pub t_end: f64,
    pub method: IntegrationMethod,
    /// Record every this many steps (>= 1).
    pub record_every: usize,
    pub initial: SystemState,
    /// When set, the trace carries the Lyapunov value of every recorded
    /// sample relative to this equilibrium.
    pub reference_equilibrium: Option<SystemState>,
}

impl FluidRunConfig {
    pub fn new(initial: SystemState, dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            method: IntegrationMethod::Rk4,
            record_every: 100,
            initial,
            reference_equilibrium: None,
        }
    }

    fn validate(&self, net: &NetworkSpec) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end > self.dt) {
            return Err(Error::InvalidConfig(format!(
                "t_end ({}) must exceed dt ({})",
                self.t_end, self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be >= 1".into()));
        }
        if self.initial.rates.len() != net.num_routes()
            || self.initial.prices.len() != net.num_links()
        {
            return Err(Error::InvalidConfig(
                "initial state dimensions do not match the network".into(),
            ));
        }
        if self.initial.rates.iter().any(|&x| x < 0.0)
            || self.initial.prices.iter().any(|&p| p < 0.0)
        {
            return Err(Error::InvalidConfig("initial state must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Time-indexed record of a fluid run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    pub lyapunov: Option<Vec<f64>>,
    pub residuals: Option<Vec<f64>>,
}

impl SimTrace {
    pub fn final_state(&self) -> &SystemState {
        self.states.last().expect("trace holds at least the initial sample")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trace holds at least the initial sample")
    }

    /// State at the recorded sample closest to `t`.
    pub fn state_at(&self, t: f64) -> &SystemState {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (*a - t).abs().partial_cmp(&(*b - t).abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        &self.states[idx]
    }

    /// CSV export: `t, x_1..x_R, p_1..p_L, V, residual` (V empty when the
    /// run carried no reference equilibrium).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let num_routes = self.states.first().map_or(0, |s| s.rates.len());
        let num_links = self.states.first().map_or(0, |s| s.prices.len());
        write!(w, "t")?;
        for r in 0..num_routes {
            write!(w, ",x_{}", r + 1)?;
        }
        for l in 0..num_links {
            write!(w, ",p_{}", l + 1)?;
        }
        writeln!(w, ",V,residual")?;
        for (i, (&t, state)) in self.times.iter().zip(&self.states).enumerate() {
            write!(w, "{t:.9}")?;
            for r in 0..num_routes {
                write!(w, ",{:.12e}", state.rates[r])?;
            }
            for l in 0..num_links {
                write!(w, ",{:.12e}", state.prices[l])?;
            }
            match &self.lyapunov {
                Some(v) => write!(w, ",{:.12e}", v[i])?,
                None => write!(w, ",")?,
            }
            match &self.residuals {
                Some(res) => writeln!(w, ",{:.12e}", res[i])?,
                None => writeln!(w, ",")?,
            }
        }
        Ok(())
    }

    pub fn write_csv_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn check_source_count(net: &NetworkSpec, algs: &[Algorithm]) -> Result<()> {
    if algs.len() != net.num_sources() {
        return Err(Error::DimensionMismatch {
            what: "algorithms per source",
            expected: net.num_sources(),
            got: algs.len(),
        });
    }
    Ok(())
}

/// Projected time-derivatives `(dx, dp)` at `state`.
///
/// The bracket is clamped to `max(0, .)` wherever the corresponding state
/// component sits on (numerically, within [`RATE_FLOOR`] of) the boundary.
pub fn rhs(
    net: &NetworkSpec,
    algs: &[Algorithm],
    state: &SystemState,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_source_count(net, algs)?;
    let (mut dx, mut dp) = raw_field(net, algs, state)?;
    for r in 0..dx.len() {
        if state.rates[r] <= RATE_FLOOR {
            dx[r] = dx[r].max(0.0);
        }
    }
    for l in 0..dp.len() {
        if state.prices[l] <= 0.0 {
            dp[l] = dp[l].max(0.0);
        }
    }
    Ok((dx, dp))
}

/// Unprojected field; marginals evaluated in guarded mode with the rate
/// floor applied to both the gain and the marginal, so that products like
/// `k * phi` keep their finite boundary limits.
fn raw_field(
    net: &NetworkSpec,
    algs: &[Algorithm],
    state: &SystemState,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = aggregate_price(net, state)?;
    let y = aggregate_rate(net, state)?;
    let mut dx = vec![0.0; net.num_routes()];
    let mut dp = vec![0.0; net.num_links()];
    for s in 0..net.num_sources() {
        let routes = net.source_routes(s);
        let taus = net.source_rtts(s);
        let xs: Vec<f64> = routes
            .iter()
            .map(|&r| state.rates[r].max(RATE_FLOOR))
            .collect();
        let phi = algs[s].fluid_phi(&xs, &taus, PhiMode::Guarded)?;
        let k = algs[s].fluid_k(&xs, &taus);
        for (i, &r) in routes.iter().enumerate() {
            if !phi[i].is_finite() {
                return Err(Error::NonFiniteMarginal { route: r });
            }
            dx[r] = k[i] * (phi[i] - q[r]);
        }
    }
    for l in 0..net.num_links() {
        dp[l] = net.link(l).price_gain * (y[l] - net.link(l).capacity);
    }
    Ok((dx, dp))
}

/// Integrates the dynamics and records a trace.
///
/// Per-sample equilibrium residuals are always recorded; Lyapunov values are
/// recorded when the config carries a reference equilibrium. Aborts with
/// [`Error::Diverged`] if `|x|_inf` blows past a generous multiple of the
/// largest capacity.
pub fn integrate(net: &NetworkSpec, algs: &[Algorithm], cfg: &FluidRunConfig) -> Result<SimTrace> {
    check_source_count(net, algs)?;
    cfg.validate(net)?;
    let divergence_limit = DIVERGENCE_FACTOR * net.max_capacity();

    let mut state = cfg.initial.clone();
    let steps = (cfg.t_end / cfg.dt).ceil() as usize;

    let mut times = Vec::with_capacity(steps / cfg.record_every + 2);
    let mut states = Vec::with_capacity(steps / cfg.record_every + 2);
    let mut lyap = cfg.reference_equilibrium.as_ref().map(|_| Vec::new());
    let mut residuals = Vec::with_capacity(steps / cfg.record_every + 2);

    let record = |t: f64,
                      state: &SystemState,
                      times: &mut Vec<f64>,
                      states: &mut Vec<SystemState>,
                      residuals: &mut Vec<f64>,
                      lyap: &mut Option<Vec<f64>>|
     -> Result<()> {
        times.push(t);
        states.push(state.clone());
        residuals.push(equilibrium_residual(net, algs, state)?);
        if let (Some(values), Some(eq)) = (lyap.as_mut(), cfg.reference_equilibrium.as_ref()) {
            values.push(lyapunov(net, algs, state, eq)?);
        }
        Ok(())
    };

    record(0.0, &state, &mut times, &mut states, &mut residuals, &mut lyap)?;

    let clamp = |s: &mut SystemState| {
        for v in s.rates.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        for v in s.prices.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    };

    for step in 1..=steps {
        let dt = cfg.dt;
        match cfg.method {
            IntegrationMethod::Euler => {
                let (dx, dp) = raw_field(net, algs, &state)?;
                axpy(&mut state, dt, &dx, &dp);
            }
            IntegrationMethod::Rk4 => {
                let (k1x, k1p) = raw_field(net, algs, &state)?;
                let mut s2 = state.clone();
                axpy(&mut s2, 0.5 * dt, &k1x, &k1p);
                clamp(&mut s2);
                let (k2x, k2p) = raw_field(net, algs, &s2)?;
                let mut s3 = state.clone();
                axpy(&mut s3, 0.5 * dt, &k2x, &k2p);
                clamp(&mut s3);
                let (k3x, k3p) = raw_field(net, algs, &s3)?;
                let mut s4 = state.clone();
                axpy(&mut s4, dt, &k3x, &k3p);
                clamp(&mut s4);
                let (k4x, k4p) = raw_field(net, algs, &s4)?;
                let w = dt / 6.0;
                for r in 0..state.rates.len() {
                    state.rates[r] += w * (k1x[r] + 2.0 * k2x[r] + 2.0 * k3x[r] + k4x[r]);
                }
                for l in 0..state.prices.len() {
                    state.prices[l] += w * (k1p[l] + 2.0 * k2p[l] + 2.0 * k3p[l] + k4p[l]);
                }
            }
        }
        clamp(&mut state);

        let t = step as f64 * dt;
        let xmax = state.rates.amax();
        if !xmax.is_finite() || xmax > divergence_limit {
            return Err(Error::Diverged { t, norm: xmax });
        }
        if step % cfg.record_every == 0 || step == steps {
            record(t, &state, &mut times, &mut states, &mut residuals, &mut lyap)?;
        }
    }

    Ok(SimTrace {
        times,
        states,
        lyapunov: lyap,
        residuals: Some(residuals),
    })
}

fn axpy(state: &mut SystemState, dt: f64, dx: &[f64], dp: &[f64]) {
    for r in 0..state.rates.len() {
        state.rates[r] += dt * dx[r];
    }
    for l in 0..state.prices.len() {
        state.prices[l] += dt * dp[l];
    }
}

/// Worst violation of the equilibrium fixed-point conditions at `state`:
/// the complementarity residuals `|min(x_r, q_r - phi_r)|` and
/// `|min(p_l, c_l - y_l)|` together with the magnitudes of any
/// `phi_r <= q_r` or `y_l <= c_l` violations.
pub fn equilibrium_residual(
    net: &NetworkSpec,
    algs: &[Algorithm],
    state: &SystemState,
) -> Result<f64> {
    check_source_count(net, algs)?;
    let q = aggregate_price(net, state)?;
    let y = aggregate_rate(net, state)?;
    let mut worst = 0.0f64;
    for s in 0..net.num_sources() {
        let routes = net.source_routes(s);
        let taus = net.source_rtts(s);
        let xs: Vec<f64> = routes.iter().map(|&r| state.rates[r]).collect();
        let phi = algs[s].fluid_phi(&xs, &taus, PhiMode::Analysis)?;
        for (i, &r) in routes.iter().enumerate() {
            let slack = q[r] - phi[i];
            worst = worst.max(state.rates[r].min(slack).abs());
            worst = worst.max((phi[i] - q[r]).max(0.0));
        }
    }
    for l in 0..net.num_links() {
        let slack = net.link(l).capacity - y[l];
        worst = worst.max(state.prices[l].min(slack).abs());
        worst = worst.max((y[l] - net.link(l).capacity).max(0.0));
    }
    Ok(worst)
}

/// Lyapunov value of `state` relative to `equilibrium`:
///
/// ```text
/// V = sum_r integral_{x_r*}^{x_r} (z - x_r*) / k_r(z) dz
///     + 1/2 sum_l (p_l - p_l*)^2 / gamma_l
/// ```
///
/// For the separable gain `k = z^2/2` the integral has the closed form
/// `2 (ln(x/x*) + x*/x - 1)`; descriptors whose gain couples the routes
/// (the generalized family with eta > 0, Balia) use the locally valid
/// variant with the gain frozen at the equilibrium.
pub fn lyapunov(
    net: &NetworkSpec,
    algs: &[Algorithm],
    state: &SystemState,
    equilibrium: &SystemState,
) -> Result<f64> {
    check_source_count(net, algs)?;
    if equilibrium.rates.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain(
            "reference equilibrium must have strictly positive rates".into(),
        ));
    }
    let mut v = 0.0;
    for s in 0..net.num_sources() {
        let routes = net.source_routes(s);
        let taus = net.source_rtts(s);
        let xs_star: Vec<f64> = routes.iter().map(|&r| equilibrium.rates[r]).collect();
        let separable = match algs[s].generalized_params() {
            Some((_, eta, _)) => eta == 0.0,
            None => true,
        };
        let k_star = algs[s].fluid_k(&xs_star, &taus);
        for (i, &r) in routes.iter().enumerate() {
            let x = state.rates[r];
            let x_star = xs_star[i];
            if separable {
                if x <= 0.0 {
                    return Err(Error::BoundaryRate { route: r });
                }
                v += 2.0 * ((x / x_star).ln() + x_star / x - 1.0);
            } else {
                v += (x - x_star) * (x - x_star) / (2.0 * k_star[i]);
            }
        }
    }
    for l in 0..net.num_links() {
        let dp = state.prices[l] - equilibrium.prices[l];
        v += 0.5 * dp * dp / net.link(l).price_gain;
    }
    Ok(v)
}

/// Adaptive Simpson quadrature; an independent route to the Lyapunov rate
/// integral for test cross-checks.
pub fn adaptive_quadrature<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol * 0.5, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol * 0.5, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Runs the integrator from a positive uniform start until the equilibrium
/// residual drops below `tol`, doubling the horizon as needed. Returns the
/// settled state. A convenience for fixture construction.
pub fn settle_to_equilibrium(
    net: &NetworkSpec,
    algs: &[Algorithm],
    dt: f64,
    tol: f64,
) -> Result<SystemState> {
    let initial =
        SystemState::uniform(net, 0.5 * net.max_capacity() / net.num_routes() as f64, 0.1);
    let mut t_end = 50.0;
    let mut cfg = FluidRunConfig::new(initial, dt, t_end);
    cfg.record_every = ((0.5 / dt) as usize).max(1);
    for _ in 0..8 {
        cfg.t_end = t_end;
        let trace = integrate(net, algs, &cfg)?;
        let state = trace.final_state().clone();
        let residual = equilibrium_residual(net, algs, &state)?;
        if residual <= tol {
            return Ok(state);
        }
        cfg.initial = state;
        t_end *= 2.0;
    }
    Err(Error::NoConvergence {
        iterations: 8,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{LinkSpec, RouteSpec};
    use approx::assert_relative_eq;

    fn single_newreno_net() -> NetworkSpec {
        NetworkSpec::new(
            vec![LinkSpec::new(1.0, 1.0)],
            vec![RouteSpec::new(0, vec![0], 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn rhs_zero_at_equilibrium() {
        // Single NewReno flow/link, tau=1, c=1: x*=1, p*=phi(1)=2.
        let net = single_newreno_net();
        let state = SystemState::from_slices(&[1.0], &[2.0]);
        let (dx, dp) = rhs(&net, &[Algorithm::NewReno], &state).unwrap();
        assert!(dx[0].abs() < 1e-12);
        assert!(dp[0].abs() < 1e-12);
    }

    #[test]
    fn rhs_balances_marginal_against_price() {
        let net = single_newreno_net();
        // q = phi(x) at x = 2: phi = 0.5, so dx = 0 while y = 2 > c = 1
        // keeps the price rising.
        let state = SystemState::from_slices(&[2.0], &[0.5]);
        let (dx, dp) = rhs(&net, &[Algorithm::NewReno], &state).unwrap();
        assert!(dx[0].abs() < 1e-12);
        assert!(dp[0] > 0.0);
    }

    #[test]
    fn rhs_projection_active_at_boundary() {
        let net = single_newreno_net();
        // x = 0 with a huge price: the bracket is negative, the projection
        // pins the rate derivative at zero; p = 0 with y < c pins the price.
        let state = SystemState::from_slices(&[0.0], &[1e20]);
        let (dx, _) = rhs(&net, &[Algorithm::NewReno], &state).unwrap();
        assert_eq!(dx[0], 0.0);

        let state = SystemState::from_slices(&[0.5], &[0.0]);
        let (_, dp) = rhs(&net, &[Algorithm::NewReno], &state).unwrap();
        assert_eq!(dp[0], 0.0);
    }

    #[test]
    fn newreno_converges_to_capacity() {
        let net = single_newreno_net();
        let cfg = FluidRunConfig::new(SystemState::from_slices(&[0.1], &[0.0]), 1e-3, 60.0);
        let trace = integrate(&net, &[Algorithm::NewReno], &cfg).unwrap();
        let fin = trace.final_state();
        assert_relative_eq!(fin.rates[0], 1.0, epsilon = 1e-4);
        assert_relative_eq!(fin.prices[0], 2.0, epsilon = 1e-3);
        let res = trace.residuals.as_ref().unwrap();
        assert!(res.last().unwrap() < &1e-4);
    }

    #[test]
    fn trajectories_stay_nonnegative() {
        let net = single_newreno_net();
        let cfg = FluidRunConfig::new(SystemState::from_slices(&[5.0], &[9.0]), 1e-3, 20.0);
        let trace = integrate(&net, &[Algorithm::NewReno], &cfg).unwrap();
        for s in &trace.states {
            assert!(s.rates.iter().all(|&x| x >= 0.0));
            assert!(s.prices.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn equilibrium_residual_hand_values() {
        let net = single_newreno_net();
        let algs = [Algorithm::NewReno];
        let exact = SystemState::from_slices(&[1.0], &[2.0]);
        assert!(equilibrium_residual(&net, &algs, &exact).unwrap() < 1e-15);

        // x = 0.5, p = 2: phi = 8 > q = 2 (violation 6), y = 0.5 < c at
        // p > 0 (residual 0.5); the max is 6.
        let off = SystemState::from_slices(&[0.5], &[2.0]);
        let r = equilibrium_residual(&net, &algs, &off).unwrap();
        assert_relative_eq!(r, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_hand_value_and_positivity() {
        let net = single_newreno_net();
        let algs = [Algorithm::NewReno];
        let eq = SystemState::from_slices(&[1.0], &[2.0]);
        assert_eq!(lyapunov(&net, &algs, &eq, &eq).unwrap(), 0.0);

        let state = SystemState::from_slices(&[2.0], &[2.0]);
        let v = lyapunov(&net, &algs, &state, &eq).unwrap();
        assert_relative_eq!(v, 2.0 * (2.0f64.ln() + 0.5 - 1.0), epsilon = 1e-12);
        assert!(v > 0.0);

        // Any state off the equilibrium has positive V.
        for (x, p) in [(0.5, 2.0), (1.0, 1.0), (3.0, 0.1)] {
            let s = SystemState::from_slices(&[x], &[p]);
            assert!(lyapunov(&net, &algs, &s, &eq).unwrap() > 0.0);
        }

        // The closed form rejects the boundary.
        let s = SystemState::from_slices(&[0.0], &[2.0]);
        assert!(lyapunov(&net, &algs, &s, &eq).is_err());
    }

    #[test]
    fn lyapunov_closed_form_matches_quadrature() {
        let x_star = 1.7f64;
        for x in [0.2f64, 0.9, 1.7, 3.4, 10.0] {
            let closed = 2.0 * ((x / x_star).ln() + x_star / x - 1.0);
            let quad =
                adaptive_quadrature(&|z: f64| (z - x_star) / (0.5 * z * z), x_star, x, 1e-10);
            assert_relative_eq!(closed, quad, epsilon = 1e-9);
        }
    }

    #[test]
    fn csv_export_shape() {
        let net = single_newreno_net();
        let mut cfg = FluidRunConfig::new(SystemState::from_slices(&[0.5], &[0.1]), 1e-3, 1.0);
        cfg.record_every = 200;
        cfg.reference_equilibrium = Some(SystemState::from_slices(&[1.0], &[2.0]));
        let trace = integrate(&net, &[Algorithm::NewReno], &cfg).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1,p_1,V,residual");
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 5);
        assert!(trace.lyapunov.is_some());
    }

    #[test]
    fn settle_reaches_small_residual() {
        let net = single_newreno_net();
        let state = settle_to_equilibrium(&net, &[Algorithm::NewReno], 1e-3, 1e-6).unwrap();
        assert_relative_eq!(state.rates[0], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn invalid_configs_rejected() {
        let net = single_newreno_net();
        let good = SystemState::from_slices(&[0.1], &[0.0]);
        let mut cfg = FluidRunConfig::new(good.clone(), 0.0, 1.0);
        assert!(integrate(&net, &[Algorithm::NewReno], &cfg).is_err());
        cfg = FluidRunConfig::new(good.clone(), 1e-3, 1e-4);
        assert!(integrate(&net, &[Algorithm::NewReno], &cfg).is_err());
        cfg = FluidRunConfig::new(good, 1e-3, 1.0);
        cfg.record_every = 0;
        assert!(integrate(&net, &[Algorithm::NewReno], &cfg).is_err());
    }
}
