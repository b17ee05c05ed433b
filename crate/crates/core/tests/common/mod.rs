#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use te_core::{EdgeId, NodeId, Path, Topology, TopologyBuilder, TrafficMatrix, Walk};

/// Connected random graph on `n` switches `s0..s{n-1}`: a random spanning
/// tree plus extra links. Integer weights so cost ties are exact.
pub fn random_graph(n: usize, extra: usize, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = TopologyBuilder::new(format!("rand{seed}"));
    for i in 0..n {
        b = b.switch(format!("s{i}"));
    }
    let mut present = std::collections::BTreeSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        present.insert((j, i));
    }
    let mut tries = 0;
    while present.len() < n - 1 + extra && tries < 1000 {
        tries += 1;
        let a = rng.random_range(0..n);
        let c = rng.random_range(0..n);
        if a != c {
            present.insert((a.min(c), a.max(c)));
        }
    }
    for (a, c) in present {
        let cap = 10.0 * rng.random_range(1..=5) as f64;
        let w = rng.random_range(1..=4) as f64;
        b = b.link(format!("s{a}"), format!("s{c}"), cap, w);
    }
    b.hosts_on_every_switch(1e6).build().unwrap()
}

pub fn id(topo: &Topology, name: &str) -> NodeId {
    topo.node_id(name).unwrap_or_else(|| panic!("no node {name}"))
}

/// Every simple switch-level walk from `a` to `b` with its latency cost.
pub fn simple_walks(topo: &Topology, a: NodeId, b: NodeId) -> Vec<(f64, Walk)> {
    fn dfs(topo: &Topology, b: NodeId, cur: &mut Walk, cost: f64, out: &mut Vec<(f64, Walk)>) {
        let here = cur.end();
        if here == b {
            out.push((cost, cur.clone()));
            return;
        }
        for e in topo.switch_out_edges(here).collect::<Vec<EdgeId>>() {
            let next = topo.edge(e).dst;
            if cur.nodes.contains(&next) {
                continue;
            }
            cur.nodes.push(next);
            cur.edges.push(e);
            dfs(topo, b, cur, cost + topo.edge(e).latency_weight, out);
            cur.nodes.pop();
            cur.edges.pop();
        }
    }
    let mut out = Vec::new();
    dfs(topo, b, &mut Walk::trivial(a), 0.0, &mut out);
    out
}

/// Every simple path between two hosts.
pub fn simple_host_paths(topo: &Topology, s: NodeId, t: NodeId) -> Vec<Path> {
    simple_walks(topo, topo.host_switch(s), topo.host_switch(t))
        .into_iter()
        .map(|(_, w)| w.between_hosts(topo, s, t))
        .collect()
}

/// Dense two-phase simplex with Bland's rule for
/// `min c·x  s.t.  A x = b, x ≥ 0` with `b ≥ 0`. Returns the optimum and a
/// solution, or `None` when infeasible.
pub fn simplex_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<(f64, Vec<f64>)> {
    const EPS: f64 = 1e-10;
    let m = a.len();
    let n = c.len();
    let w = n + m + 1;
    let rhs = n + m;
    let mut t = vec![vec![0.0; w]; m + 1];
    for i in 0..m {
        assert!(b[i] >= 0.0);
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][rhs] = b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    // phase one: minimize the sum of artificials
    for j in 0..w {
        if j < n || j == rhs {
            t[m][j] = -(0..m).map(|i| t[i][j]).sum::<f64>();
        }
    }
    fn pivot(t: &mut [Vec<f64>], r: usize, col: usize) {
        let p = t[r][col];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        let row = t[r].clone();
        for (i, line) in t.iter_mut().enumerate() {
            if i != r && line[col] != 0.0 {
                let f = line[col];
                for (x, y) in line.iter_mut().zip(&row) {
                    *x -= f * y;
                }
            }
        }
    }
    fn run(t: &mut [Vec<f64>], basis: &mut [usize], allowed: usize, rhs: usize) {
        let m = basis.len();
        loop {
            let Some(col) = (0..allowed).find(|&j| t[m][j] < -1e-10) else { return };
            let mut best: Option<(f64, usize)> = None;
            for i in 0..m {
                if t[i][col] > 1e-10 {
                    let r = t[i][rhs] / t[i][col];
                    let better = match best {
                        None => true,
                        Some((br, bi)) => r < br - 1e-12 || (r <= br + 1e-12 && basis[i] < basis[bi]),
                    };
                    if better {
                        best = Some((r, i));
                    }
                }
            }
            let (_, r) = best.expect("unbounded");
            pivot(t, r, col);
            basis[r] = col;
        }
    }
    run(&mut t, &mut basis, n + m, rhs);
    if -t[m][rhs] > 1e-7 {
        return None;
    }
    // drive artificials out of the basis
    for r in 0..m {
        if basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| t[r][j].abs() > EPS) {
                pivot(&mut t, r, col);
                basis[r] = col;
            }
        }
    }
    for j in 0..w {
        t[m][j] = if j < n { c[j] } else { 0.0 };
    }
    for r in 0..m {
        let cb = if basis[r] < n { c[basis[r]] } else { 0.0 };
        if cb != 0.0 {
            let row = t[r].clone();
            for (x, y) in t[m].iter_mut().zip(&row) {
                *x -= cb * y;
            }
        }
    }
    run(&mut t, &mut basis, n, rhs);
    let mut x = vec![0.0; n];
    for r in 0..m {
        if basis[r] < n {
            x[basis[r]] = t[r][rhs];
        }
    }
    Some((-t[m][rhs], x))
}

/// Exact minimum max-congestion over the given candidate paths per pair, by
/// linear programming. Variables are path flows and λ; one row per
/// commodity (`Σ_p f_p = d`) and per directed edge (`load − λ·c + s = 0`).
pub fn lp_congestion(topo: &Topology, tm: &TrafficMatrix, paths: &dyn Fn(NodeId, NodeId) -> Vec<Path>) -> f64 {
    let commodities: Vec<((NodeId, NodeId), f64)> = tm.positive().into_iter().collect();
    let mut cols: Vec<(usize, Path)> = Vec::new();
    for (k, ((s, t), _)) in commodities.iter().enumerate() {
        for p in paths(*s, *t) {
            cols.push((k, p));
        }
    }
    let ne = topo.edge_count();
    let nf = cols.len();
    let lambda = nf;
    let n = nf + 1 + ne;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (k, (_, d)) in commodities.iter().enumerate() {
        let mut row = vec![0.0; n];
        for (j, (kk, _)) in cols.iter().enumerate() {
            if *kk == k {
                row[j] = 1.0;
            }
        }
        a.push(row);
        b.push(*d);
    }
    for e in 0..ne {
        let mut row = vec![0.0; n];
        for (j, (_, p)) in cols.iter().enumerate() {
            row[j] = p.edges().iter().filter(|x| x.index() == e).count() as f64;
        }
        row[lambda] = -topo.edges()[e].capacity;
        row[nf + 1 + e] = 1.0;
        a.push(row);
        b.push(0.0);
    }
    let mut c = vec![0.0; n];
    c[lambda] = 1.0;
    simplex_min(&a, &b, &c).expect("feasible").0
}

/// Optimal congestion over all simple paths.
pub fn lp_optimum(topo: &Topology, tm: &TrafficMatrix) -> f64 {
    lp_congestion(topo, tm, &|s, t| simple_host_paths(topo, s, t))
}

/// Random sparse matrix with `k` positive commodities.
pub fn random_tm(topo: &Topology, k: usize, seed: u64) -> TrafficMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tm = TrafficMatrix::for_topology(topo);
    let h = topo.hosts().to_vec();
    let mut placed = 0;
    while placed < k {
        let a = h[rng.random_range(0..h.len())];
        let b = h[rng.random_range(0..h.len())];
        if a != b && tm.get(a, b) == 0.0 {
            tm.set(a, b, rng.random_range(1..=20) as f64);
            placed += 1;
        }
    }
    tm
}

/// Two switches joined through two middle switches of capacity 10 and 30,
/// with 20 units of demand between their hosts.
pub fn parallel_links() -> (Topology, TrafficMatrix) {
    let t = TopologyBuilder::new("par")
        .switch("a")
        .switch("b")
        .switch("m1")
        .switch("m2")
        .host("ha")
        .host("hb")
        .link("a", "m1", 10.0, 1.0)
        .link("m1", "b", 10.0, 1.0)
        .link("a", "m2", 30.0, 1.0)
        .link("m2", "b", 30.0, 1.0)
        .link("ha", "a", 1000.0, 0.0)
        .link("hb", "b", 1000.0, 0.0)
        .build()
        .unwrap();
    let mut tm = TrafficMatrix::for_topology(&t);
    tm.set(id(&t, "ha"), id(&t, "hb"), 20.0);
    (t, tm)
}
