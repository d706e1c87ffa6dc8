//! Network topology, routing and system state.
//!
//! A network is a set of capacitated links and a set of routes grouped by
//! source. All other modules work against the dense 0/1 routing matrix `H`
//! (links x routes) induced at construction. Networks of interest here are
//! tiny (tens of links/routes at most), so everything is dense.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A link: capacity in packets/sec, price gain per second, and the
/// packet-simulator-only fields (drop-tail buffer in packets, one-way
/// propagation delay in seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub capacity: f64,
    #[serde(default = "default_gain")]
    pub price_gain: f64,
    #[serde(default = "default_buffer")]
    pub buffer: usize,
    #[serde(default)]
    pub prop_delay: f64,
}

fn default_gain() -> f64 {
    1.0
}

fn default_buffer() -> usize {
    50
}

impl LinkSpec {
    pub fn new(capacity: f64, price_gain: f64) -> Self {
        Self {
            capacity,
            price_gain,
            buffer: default_buffer(),
            prop_delay: 0.0,
        }
    }

    pub fn with_buffer(mut self, buffer: usize) -> Self {
        self.buffer = buffer;
        self
    }

    pub fn with_prop_delay(mut self, prop_delay: f64) -> Self {
        self.prop_delay = prop_delay;
        self
    }
}

/// A route: the source it belongs to, the ordered links it traverses and its
/// round-trip time in seconds. RTTs are treated as constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSpec {
    pub source: usize,
    pub links: Vec<usize>,
    pub rtt: f64,
}

impl RouteSpec {
    pub fn new(source: usize, links: Vec<usize>, rtt: f64) -> Self {
        Self { source, links, rtt }
    }
}

/// An immutable validated network: links, routes, and routes grouped by
/// source. Indices are stable integers assigned at construction; route order
/// within a source is construction order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    links: Vec<LinkSpec>,
    routes: Vec<RouteSpec>,
    sources: Vec<Vec<usize>>,
}

impl NetworkSpec {
    pub fn new(links: Vec<LinkSpec>, routes: Vec<RouteSpec>) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::InvalidNetwork("no links".into()));
        }
        if routes.is_empty() {
            return Err(Error::InvalidNetwork("no routes".into()));
        }
        for (l, link) in links.iter().enumerate() {
            if !(link.capacity > 0.0) || !link.capacity.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "link {l}: capacity must be positive and finite"
                )));
            }
            if !(link.price_gain > 0.0) || !link.price_gain.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "link {l}: price_gain must be positive and finite"
                )));
            }
            if link.buffer < 1 {
                return Err(Error::InvalidNetwork(format!(
                    "link {l}: buffer must be at least 1 packet"
                )));
            }
            if link.prop_delay < 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "link {l}: prop_delay must be nonnegative"
                )));
            }
        }
        let mut max_source = 0;
        for (r, route) in routes.iter().enumerate() {
            if route.links.is_empty() {
                return Err(Error::InvalidNetwork(format!("route {r}: no links")));
            }
            let mut seen = vec![false; links.len()];
            for &l in &route.links {
                if l >= links.len() {
                    return Err(Error::InvalidNetwork(format!(
                        "route {r}: link index {l} out of range"
                    )));
                }
                if seen[l] {
                    return Err(Error::InvalidNetwork(format!(
                        "route {r}: duplicate link {l}"
                    )));
                }
                seen[l] = true;
            }
            if !(route.rtt > 0.0) || !route.rtt.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "route {r}: rtt must be positive and finite"
                )));
            }
            let prop_sum: f64 = route.links.iter().map(|&l| links[l].prop_delay).sum();
            if route.rtt < prop_sum {
                return Err(Error::InvalidNetwork(format!(
                    "route {r}: rtt {} below the sum of propagation delays {}",
                    route.rtt, prop_sum
                )));
            }
            max_source = max_source.max(route.source);
        }
        let mut sources = vec![Vec::new(); max_source + 1];
        for (r, route) in routes.iter().enumerate() {
            sources[route.source].push(r);
        }
        if let Some(s) = sources.iter().position(Vec::is_empty) {
            return Err(Error::InvalidNetwork(format!("source {s} has no routes")));
        }
        Ok(Self {
            links,
            routes,
            sources,
        })
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn num_routes(&self) -> usize {
        self.routes.len()
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn link(&self, l: usize) -> &LinkSpec {
        &self.links[l]
    }

    pub fn links(&self) -> &[LinkSpec] {
        &self.links
    }

    pub fn route(&self, r: usize) -> &RouteSpec {
        &self.routes[r]
    }

    pub fn routes(&self) -> &[RouteSpec] {
        &self.routes
    }

    /// Route indices of source `s`, in construction order.
    pub fn source_routes(&self, s: usize) -> &[usize] {
        &self.sources[s]
    }

    pub fn sources(&self) -> &[Vec<usize>] {
        &self.sources
    }

    /// RTTs of the routes of source `s`.
    pub fn source_rtts(&self, s: usize) -> Vec<f64> {
        self.sources[s].iter().map(|&r| self.routes[r].rtt).collect()
    }

    pub fn capacities(&self) -> DVector<f64> {
        DVector::from_iterator(self.links.len(), self.links.iter().map(|l| l.capacity))
    }

    pub fn price_gains(&self) -> DVector<f64> {
        DVector::from_iterator(self.links.len(), self.links.iter().map(|l| l.price_gain))
    }

    pub fn max_capacity(&self) -> f64 {
        self.links.iter().map(|l| l.capacity).fold(0.0, f64::max)
    }
}

/// Instantaneous system state: per-route sending rates `x` (packets/sec) and
/// per-link congestion prices `p` (loss-probability proxy). Both are
/// componentwise nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub rates: DVector<f64>,
    pub prices: DVector<f64>,
}

impl SystemState {
    pub fn new(rates: DVector<f64>, prices: DVector<f64>) -> Self {
        Self { rates, prices }
    }

    pub fn from_slices(rates: &[f64], prices: &[f64]) -> Self {
        Self {
            rates: DVector::from_column_slice(rates),
            prices: DVector::from_column_slice(prices),
        }
    }

    pub fn zeros(net: &NetworkSpec) -> Self {
        Self {
            rates: DVector::zeros(net.num_routes()),
            prices: DVector::zeros(net.num_links()),
        }
    }

    /// Uniform positive starting point; handy for fluid runs.
    pub fn uniform(net: &NetworkSpec, rate: f64, price: f64) -> Self {
        Self {
            rates: DVector::from_element(net.num_routes(), rate),
            prices: DVector::from_element(net.num_links(), price),
        }
    }

    fn check_dims(&self, net: &NetworkSpec) -> Result<()> {
        if self.rates.len() != net.num_routes() {
            return Err(Error::DimensionMismatch {
                what: "rates",
                expected: net.num_routes(),
                got: self.rates.len(),
            });
        }
        if self.prices.len() != net.num_links() {
            return Err(Error::DimensionMismatch {
                what: "prices",
                expected: net.num_links(),
                got: self.prices.len(),
            });
        }
        Ok(())
    }
}

/// Dense routing matrix `H`: `H[(l, r)] = 1` iff link `l` lies on route `r`.
pub fn routing_matrix(net: &NetworkSpec) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(net.num_links(), net.num_routes());
    for (r, route) in net.routes().iter().enumerate() {
        for &l in &route.links {
            h[(l, r)] = 1.0;
        }
    }
    h
}

/// Aggregate route prices `q = H^T p`.
pub fn aggregate_price(net: &NetworkSpec, state: &SystemState) -> Result<DVector<f64>> {
    state.check_dims(net)?;
    let mut q = DVector::zeros(net.num_routes());
    for (r, route) in net.routes().iter().enumerate() {
        q[r] = route.links.iter().map(|&l| state.prices[l]).sum();
    }
    Ok(q)
}

/// Aggregate link rates `y = H x`.
pub fn aggregate_rate(net: &NetworkSpec, state: &SystemState) -> Result<DVector<f64>> {
    state.check_dims(net)?;
    let mut y = DVector::zeros(net.num_links());
    for (r, route) in net.routes().iter().enumerate() {
        for &l in &route.links {
            y[l] += state.rates[r];
        }
    }
    Ok(y)
}

/// True iff `H` has full row rank, judged by singular values with a 1e-9
/// relative cutoff.
pub fn full_row_rank(h: &DMatrix<f64>) -> bool {
    let rows = h.nrows();
    if rows == 0 {
        return true;
    }
    if h.ncols() < rows {
        return false;
    }
    let svd = h.clone().svd(false, false);
    let max_sv = svd.singular_values.max();
    if max_sv <= 0.0 {
        return false;
    }
    let tol = 1e-9 * max_sv;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    rank == rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_link_net() -> NetworkSpec {
        NetworkSpec::new(
            vec![LinkSpec::new(1.0, 1.0)],
            vec![RouteSpec::new(0, vec![0], 1.0)],
        )
        .unwrap()
    }

    /// Single bottleneck shared by a two-route source and a one-route source.
    pub(crate) fn bottleneck_net() -> NetworkSpec {
        NetworkSpec::new(
            vec![LinkSpec::new(12.0, 1.0)],
            vec![
                RouteSpec::new(0, vec![0], 1.0),
                RouteSpec::new(0, vec![0], 1.0),
                RouteSpec::new(1, vec![0], 1.0),
            ],
        )
        .unwrap()
    }

    /// Two links; the source under test routes over both, the single-path
    /// source shares the second link.
    pub(crate) fn two_link_net() -> NetworkSpec {
        NetworkSpec::new(
            vec![LinkSpec::new(8.0, 1.0), LinkSpec::new(8.0, 1.0)],
            vec![
                RouteSpec::new(0, vec![0], 1.0),
                RouteSpec::new(0, vec![1], 1.0),
                RouteSpec::new(1, vec![1], 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn routing_matrix_single_link() {
        let h = routing_matrix(&single_link_net());
        assert_eq!(h, DMatrix::from_row_slice(1, 1, &[1.0]));
    }

    #[test]
    fn routing_matrix_shared_bottleneck() {
        let h = routing_matrix(&bottleneck_net());
        assert_eq!(h, DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]));
    }

    #[test]
    fn routing_matrix_two_links() {
        let h = routing_matrix(&two_link_net());
        assert_eq!(
            h,
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0])
        );
    }

    #[test]
    fn aggregate_price_zero() {
        let net = bottleneck_net();
        let state = SystemState::zeros(&net);
        let q = aggregate_price(&net, &state).unwrap();
        assert!(q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn aggregate_price_bottleneck() {
        let net = bottleneck_net();
        let state = SystemState::from_slices(&[0.0, 0.0, 0.0], &[0.02]);
        let q = aggregate_price(&net, &state).unwrap();
        assert_eq!(q.as_slice(), &[0.02, 0.02, 0.02]);
    }

    #[test]
    fn aggregate_price_two_links() {
        let net = two_link_net();
        let state = SystemState::from_slices(&[0.0; 3], &[0.01, 0.03]);
        let q = aggregate_price(&net, &state).unwrap();
        assert_eq!(q.as_slice(), &[0.01, 0.03, 0.03]);
    }

    #[test]
    fn aggregate_rate_examples() {
        let net = bottleneck_net();
        let state = SystemState::from_slices(&[1.0, 2.0, 3.0], &[0.0]);
        let y = aggregate_rate(&net, &state).unwrap();
        assert_eq!(y.as_slice(), &[6.0]);

        let net = two_link_net();
        let state = SystemState::from_slices(&[5.0, 1.0, 2.0], &[0.0, 0.0]);
        let y = aggregate_rate(&net, &state).unwrap();
        assert_eq!(y.as_slice(), &[5.0, 3.0]);

        let zero = SystemState::zeros(&net);
        let y = aggregate_rate(&net, &zero).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn aggregate_dimension_mismatch() {
        let net = two_link_net();
        let state = SystemState::from_slices(&[1.0, 2.0], &[0.0, 0.0]);
        assert!(aggregate_price(&net, &state).is_err());
        let state = SystemState::from_slices(&[1.0, 2.0, 3.0], &[0.0]);
        assert!(aggregate_rate(&net, &state).is_err());
    }

    #[test]
    fn full_row_rank_cases() {
        assert!(full_row_rank(&DMatrix::from_row_slice(1, 3, &[
            1.0, 1.0, 1.0
        ])));
        assert!(!full_row_rank(&DMatrix::from_row_slice(2, 2, &[
            1.0, 0.0, 1.0, 0.0
        ])));
        assert!(full_row_rank(&DMatrix::from_row_slice(2, 3, &[
            1.0, 0.0, 0.0, 0.0, 1.0, 1.0
        ])));
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        assert!(NetworkSpec::new(
            vec![LinkSpec::new(0.0, 1.0)],
            vec![RouteSpec::new(0, vec![0], 1.0)]
        )
        .is_err());
        assert!(NetworkSpec::new(
            vec![LinkSpec::new(1.0, 1.0)],
            vec![RouteSpec::new(0, vec![0, 0], 1.0)]
        )
        .is_err());
        assert!(NetworkSpec::new(
            vec![LinkSpec::new(1.0, 1.0)],
            vec![RouteSpec::new(0, vec![1], 1.0)]
        )
        .is_err());
        assert!(NetworkSpec::new(
            vec![LinkSpec::new(1.0, 1.0)],
            vec![RouteSpec::new(0, vec![0], -1.0)]
        )
        .is_err());
        // A route for source 1 with no source 0 leaves source 0 empty.
        assert!(NetworkSpec::new(
            vec![LinkSpec::new(1.0, 1.0)],
            vec![RouteSpec::new(1, vec![0], 1.0)]
        )
        .is_err());
        // rtt below the propagation delays on the path.
        assert!(NetworkSpec::new(
            vec![LinkSpec::new(1.0, 1.0).with_prop_delay(1.5)],
            vec![RouteSpec::new(0, vec![0], 1.0)]
        )
        .is_err());
    }

    #[test]
    fn recomputed_aggregates_are_exact() {
        let net = two_link_net();
        let state = SystemState::from_slices(&[1.5, 2.5, 0.25], &[0.125, 0.5]);
        let q1 = aggregate_price(&net, &state).unwrap();
        let q2 = aggregate_price(&net, &state).unwrap();
        assert_eq!(q1, q2);
        let h = routing_matrix(&net);
        assert_eq!(q1, h.transpose() * &state.prices);
        let y = aggregate_rate(&net, &state).unwrap();
        assert_eq!(y, h * &state.rates);
    }
}
