use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::topology::{NodeId, Topology};

/// Host-pair demand rates in bits/s.
///
/// Stored as a dense row-major matrix over the topology's hosts (in
/// lexicographic order). The diagonal is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficMatrix {
    hosts: Vec<NodeId>,
    rates: Vec<f64>,
}

impl TrafficMatrix {
    pub fn zeros(hosts: &[NodeId]) -> Self {
        Self { hosts: hosts.to_vec(), rates: vec![0.0; hosts.len() * hosts.len()] }
    }

    pub fn for_topology(topo: &Topology) -> Self {
        Self::zeros(topo.hosts())
    }

    /// Builds a matrix from a row-major vector. Diagonal entries are forced to
    /// zero and negative entries are rejected by returning `None`.
    pub fn from_dense(hosts: &[NodeId], mut rates: Vec<f64>) -> Option<Self> {
        let n = hosts.len();
        if rates.len() != n * n || rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return None;
        }
        for i in 0..n {
            rates[i * n + i] = 0.0;
        }
        Some(Self { hosts: hosts.to_vec(), rates })
    }

    pub fn hosts(&self) -> &[NodeId] {
        &self.hosts
    }

    pub fn dense(&self) -> &[f64] {
        &self.rates
    }

    pub fn host_count(&self) -> usize {
        self.hosts.len()
    }

    fn position(&self, host: NodeId) -> usize {
        self.hosts.binary_search(&host).expect("host not in traffic matrix")
    }

    pub fn get(&self, src: NodeId, dst: NodeId) -> f64 {
        let n = self.hosts.len();
        self.rates[self.position(src) * n + self.position(dst)]
    }

    pub fn get_index(&self, i: usize, j: usize) -> f64 {
        self.rates[i * self.hosts.len() + j]
    }

    pub fn set(&mut self, src: NodeId, dst: NodeId, rate: f64) {
        assert!(rate.is_finite() && rate >= 0.0, "demand must be finite and nonnegative");
        if src == dst {
            return;
        }
        let n = self.hosts.len();
        let (i, j) = (self.position(src), self.position(dst));
        self.rates[i * n + j] = rate;
    }

    pub fn set_index(&mut self, i: usize, j: usize, rate: f64) {
        assert!(rate.is_finite() && rate >= 0.0, "demand must be finite and nonnegative");
        if i != j {
            let n = self.hosts.len();
            self.rates[i * n + j] = rate;
        }
    }

    /// All off-diagonal pairs with their rates, in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = ((NodeId, NodeId), f64)> + '_ {
        let n = self.hosts.len();
        (0..n).flat_map(move |i| {
            (0..n).filter(move |&j| j != i).map(move |j| ((self.hosts[i], self.hosts[j]), self.rates[i * n + j]))
        })
    }

    /// Pairs with strictly positive demand.
    pub fn positive(&self) -> BTreeMap<(NodeId, NodeId), f64> {
        self.entries().filter(|(_, r)| *r > 0.0).collect()
    }

    pub fn total(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.rates.iter().all(|r| *r == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor.is_finite() && factor >= 0.0);
        Self { hosts: self.hosts.clone(), rates: self.rates.iter().map(|r| r * factor).collect() }
    }

    /// Element-wise maximum with `other`.
    pub fn max_with(&self, other: &TrafficMatrix) -> Self {
        assert_eq!(self.hosts, other.hosts, "traffic matrices over different host sets");
        Self {
            hosts: self.hosts.clone(),
            rates: self.rates.iter().zip(&other.rates).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    pub fn add(&self, other: &TrafficMatrix) -> Self {
        assert_eq!(self.hosts, other.hosts, "traffic matrices over different host sets");
        Self {
            hosts: self.hosts.clone(),
            rates: self.rates.iter().zip(&other.rates).map(|(a, b)| a + b).collect(),
        }
    }

    /// Column sum `Σ_i d(i, dst)`.
    pub fn column_total(&self, dst: NodeId) -> f64 {
        let n = self.hosts.len();
        let j = self.position(dst);
        (0..n).map(|i| self.rates[i * n + j]).sum()
    }

    pub fn row_total(&self, src: NodeId) -> f64 {
        let n = self.hosts.len();
        let i = self.position(src);
        self.rates[i * n..(i + 1) * n].iter().sum()
    }
}
