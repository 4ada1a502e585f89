//! Network model and the polynomial system it induces.
//!
//! A network is a connected simple graph on nodes `0..n` with node 0 as the
//! slack. Unknowns are `z = [x_1..x_{n-1}, y_1..y_{n-1}]`; for each non-slack
//! node k the system has a circle equation `x_k^2 + y_k^2 - 1` and a flow
//! equation `sum_m b_km (x_k y_m - x_m y_k) - P_k` over neighbors m, with
//! `(x_0, y_0) = (1, 0)`. Susceptance vectors `b` are always indexed in
//! canonical edge order: endpoints sorted within an edge, edges sorted
//! lexicographically.

use crate::linalg::CMat;
use num_bigint::BigUint;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = Vec<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("need at least 2 nodes, got {0}")]
    TooSmall(usize),
    #[error("edge ({0}, {1}) out of range for {2} nodes")]
    BadNode(usize, usize, usize),
    #[error("self loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is not connected")]
    Disconnected,
    #[error("expected {expected} injection values, got {got}")]
    BadInjections { expected: usize, got: usize },
    #[error("{0} edges on {1} nodes is not a tree")]
    NotATree(usize, usize),
    #[error("cycle graph needs at least 3 nodes, got {0}")]
    CycleTooSmall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphFamily {
    Cycle,
    Complete,
    Tree,
    Other,
}

/// Closed-form solution counts for a family, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountBounds {
    /// All isolated complex solutions, trivial ones included.
    pub total: u64,
    /// Isolated complex solutions with some y_k != 0.
    pub nontrivial: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    edges: Vec<(usize, usize)>,
    injections: Vec<f64>,
}

fn exact_binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 1..=k as u128 {
        r = r * (n as u128 - k as u128 + i) / i;
    }
    u64::try_from(r).expect("binomial overflows u64")
}

impl Network {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, NetworkError> {
        if n < 2 {
            return Err(NetworkError::TooSmall(n));
        }
        let mut canon: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(NetworkError::BadNode(a, b, n));
            }
            if a == b {
                return Err(NetworkError::SelfLoop(a));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        for w in canon.windows(2) {
            if w[0] == w[1] {
                return Err(NetworkError::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        let net = Network { n, edges: canon, injections: vec![0.0; n - 1] };
        if !net.is_connected() {
            return Err(NetworkError::Disconnected);
        }
        Ok(net)
    }

    /// Replace the injections at nodes 1..n-1 (defaults are all zero).
    pub fn with_injections(mut self, injections: &[f64]) -> Result<Self, NetworkError> {
        if injections.len() != self.n - 1 {
            return Err(NetworkError::BadInjections {
                expected: self.n - 1,
                got: injections.len(),
            });
        }
        self.injections = injections.to_vec();
        Ok(self)
    }

    pub fn cycle(n: usize) -> Result<Self, NetworkError> {
        if n < 3 {
            return Err(NetworkError::CycleTooSmall(n));
        }
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Network::new(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self, NetworkError> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Network::new(n, &edges)
    }

    pub fn tree_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, NetworkError> {
        let net = Network::new(n, edges)?;
        if net.edges.len() != n - 1 {
            return Err(NetworkError::NotATree(net.edges.len(), n));
        }
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn injections(&self) -> &[f64] {
        &self.injections
    }

    pub fn zero_injection(&self) -> bool {
        self.injections.iter().all(|p| *p == 0.0)
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }

    pub fn family(&self) -> GraphFamily {
        let m = self.edges.len();
        let n = self.n;
        if m == n * (n - 1) / 2 {
            GraphFamily::Complete
        } else if m == n && self.adjacency().iter().all(|a| a.len() == 2) {
            GraphFamily::Cycle
        } else if m == n - 1 {
            GraphFamily::Tree
        } else {
            GraphFamily::Other
        }
    }

    pub fn family_label(&self) -> String {
        match self.family() {
            GraphFamily::Cycle => format!("cycle:{}", self.n),
            GraphFamily::Complete => format!("complete:{}", self.n),
            GraphFamily::Tree => format!("tree:{}", self.n),
            GraphFamily::Other => format!("graph:n{}m{}", self.n, self.edges.len()),
        }
    }

    /// Two-coloring with node 0 colored `false`, if the graph is bipartite.
    pub fn bipartition(&self) -> Option<Vec<bool>> {
        let adj = self.adjacency();
        let mut color: Vec<Option<bool>> = vec![None; self.n];
        color[0] = Some(false);
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            let cv = color[v].unwrap();
            for &w in &adj[v] {
                match color[w] {
                    None => {
                        color[w] = Some(!cv);
                        queue.push_back(w);
                    }
                    Some(cw) if cw == cv => return None,
                    _ => {}
                }
            }
        }
        Some(color.into_iter().map(|c| c.unwrap()).collect())
    }

    /// Closed-form counts of isolated complex solutions for cycles and
    /// complete graphs; for trees every solution is trivial. `None` for other
    /// topologies.
    pub fn solution_count_bounds(&self) -> Option<CountBounds> {
        let n = self.n as u64;
        let trivial = 1u64 << (n - 1);
        match self.family() {
            GraphFamily::Cycle => {
                let total = n * exact_binomial(n - 1, (n - 1) / 2);
                Some(CountBounds { total, nontrivial: total - trivial })
            }
            GraphFamily::Complete => {
                let total = exact_binomial(2 * n - 2, n - 1);
                Some(CountBounds { total, nontrivial: total - trivial })
            }
            GraphFamily::Tree => Some(CountBounds { total: trivial, nontrivial: 0 }),
            GraphFamily::Other => None,
        }
    }

    /// The 2^{n-1} solutions with every y_k = 0 and x_k = +/-1. Ordered by
    /// sign mask: bit k-1 of the index set means x_k = -1. These satisfy the
    /// zero-injection system exactly, for any susceptances.
    pub fn trivial_solutions(&self) -> Vec<Point> {
        let nm1 = self.n - 1;
        (0..1usize << nm1)
            .map(|mask| {
                let mut p = vec![ZERO; 2 * nm1];
                for k in 0..nm1 {
                    let sign = if mask >> k & 1 == 1 { -1.0 } else { 1.0 };
                    p[k] = Complex64::new(sign, 0.0);
                }
                p
            })
            .collect()
    }

    pub fn system(&self) -> PolySystem {
        let nm1 = self.n - 1;
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nm1];
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            if i >= 1 {
                adj[i - 1].push((e, j));
            }
            adj[j - 1].push((e, i));
        }
        PolySystem {
            n: self.n,
            edges: self.edges.clone(),
            injections: self.injections.clone(),
            adj,
        }
    }
}

/// Max-norm distance between two points of equal length.
pub fn point_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Exact check of `sum_{m=0}^{2k-1} C(2k-1, m) |2 + 2m - 2k| = 2k C(2k-1, k-1)`
/// in arbitrary-width integer arithmetic.
pub fn verify_binomial_identity(k: u32) -> bool {
    assert!(k >= 1);
    let n = 2 * k - 1;
    let mut lhs = BigUint::from(0u32);
    for m in 0..=n {
        let weight = (2 + 2 * m as i64 - 2 * k as i64).unsigned_abs();
        lhs += big_binomial(n, m) * BigUint::from(weight);
    }
    let rhs = BigUint::from(2 * k) * big_binomial(n, k - 1);
    lhs == rhs
}

fn big_binomial(n: u32, k: u32) -> BigUint {
    num_integer::binomial(BigUint::from(n), BigUint::from(k))
}

/// The polynomial system of a network: `2(n-1)` quadratic equations in
/// `2(n-1)` unknowns, linear in the edge parameters b. Equation rows are the
/// n-1 circle equations followed by the n-1 flow equations.
#[derive(Debug, Clone)]
pub struct PolySystem {
    n: usize,
    edges: Vec<(usize, usize)>,
    injections: Vec<f64>,
    /// Per non-slack node k (index k-1): (edge index, other endpoint).
    adj: Vec<Vec<(usize, usize)>>,
}

impl PolySystem {
    pub fn dim(&self) -> usize {
        2 * (self.n - 1)
    }

    pub fn n_params(&self) -> usize {
        self.edges.len()
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Every equation is quadratic.
    pub fn degrees(&self) -> Vec<usize> {
        vec![2; self.dim()]
    }

    #[inline]
    fn coord(&self, z: &[Complex64], m: usize) -> (Complex64, Complex64) {
        if m == 0 {
            (Complex64::new(1.0, 0.0), ZERO)
        } else {
            (z[m - 1], z[self.n - 1 + m - 1])
        }
    }

    pub fn eval(&self, z: &[Complex64], b: &[Complex64], out: &mut [Complex64]) {
        let nm1 = self.n - 1;
        debug_assert_eq!(z.len(), 2 * nm1);
        debug_assert_eq!(b.len(), self.edges.len());
        debug_assert_eq!(out.len(), 2 * nm1);
        for k in 1..=nm1 {
            let (xk, yk) = self.coord(z, k);
            out[k - 1] = xk * xk + yk * yk - 1.0;
            let mut flow = ZERO;
            for &(e, m) in &self.adj[k - 1] {
                let (xm, ym) = self.coord(z, m);
                flow += b[e] * (xk * ym - xm * yk);
            }
            out[nm1 + k - 1] = flow - self.injections[k - 1];
        }
    }

    pub fn residual(&self, z: &[Complex64], b: &[Complex64]) -> f64 {
        let mut out = vec![ZERO; self.dim()];
        self.eval(z, b, &mut out);
        crate::linalg::max_norm(&out)
    }

    /// Jacobian in the unknowns at fixed parameters.
    pub fn jac_z(&self, z: &[Complex64], b: &[Complex64], out: &mut CMat) {
        let nm1 = self.n - 1;
        debug_assert_eq!(out.rows(), 2 * nm1);
        debug_assert_eq!(out.cols(), 2 * nm1);
        out.fill_zero();
        for k in 1..=nm1 {
            let (xk, yk) = self.coord(z, k);
            out.set(k - 1, k - 1, xk * 2.0);
            out.set(k - 1, nm1 + k - 1, yk * 2.0);
            let row = nm1 + k - 1;
            let mut dxk = ZERO;
            let mut dyk = ZERO;
            for &(e, m) in &self.adj[k - 1] {
                let (xm, ym) = self.coord(z, m);
                dxk += b[e] * ym;
                dyk -= b[e] * xm;
                if m >= 1 {
                    let old_x = out.get(row, m - 1);
                    out.set(row, m - 1, old_x - b[e] * yk);
                    let old_y = out.get(row, nm1 + m - 1);
                    out.set(row, nm1 + m - 1, old_y + b[e] * xk);
                }
            }
            let ox = out.get(row, k - 1);
            out.set(row, k - 1, ox + dxk);
            let oy = out.get(row, nm1 + k - 1);
            out.set(row, nm1 + k - 1, oy + dyk);
        }
    }

    /// Coefficient matrix of the flow equations as a linear map in b:
    /// `A(z) b = flow part`, shape (n-1) x |E|. Entry (k-1, e) is
    /// `x_k y_m - x_m y_k` when edge e joins k and m, else zero.
    pub fn flow_matrix(&self, z: &[Complex64]) -> CMat {
        let nm1 = self.n - 1;
        let mut a = CMat::zeros(nm1, self.edges.len());
        for k in 1..=nm1 {
            let (xk, yk) = self.coord(z, k);
            for &(e, m) in &self.adj[k - 1] {
                let (xm, ym) = self.coord(z, m);
                a.set(k - 1, e, xk * ym - xm * yk);
            }
        }
        a
    }

    /// Directional parameter derivative `(dF/db) v`: zero on circle rows, the
    /// flow coefficients contracted with v on flow rows.
    pub fn param_dir(&self, z: &[Complex64], v: &[Complex64], out: &mut [Complex64]) {
        let nm1 = self.n - 1;
        debug_assert_eq!(v.len(), self.edges.len());
        for k in 1..=nm1 {
            out[k - 1] = ZERO;
            let (xk, yk) = self.coord(z, k);
            let mut acc = ZERO;
            for &(e, m) in &self.adj[k - 1] {
                let (xm, ym) = self.coord(z, m);
                acc += v[e] * (xk * ym - xm * yk);
            }
            out[nm1 + k - 1] = acc;
        }
    }

    /// Bind parameters, giving a square system Newton can refine against.
    pub fn at<'a>(&'a self, b: &[Complex64]) -> SystemAt<'a> {
        assert_eq!(b.len(), self.edges.len());
        SystemAt { sys: self, b: b.to_vec() }
    }

    pub fn injections(&self) -> &[f64] {
        &self.injections
    }
}

/// A `PolySystem` with parameters bound.
pub struct SystemAt<'a> {
    sys: &'a PolySystem,
    b: Vec<Complex64>,
}

impl crate::linalg::NewtonSystem for SystemAt<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }
    fn eval(&self, z: &[Complex64], out: &mut [Complex64]) {
        self.sys.eval(z, &self.b, out);
    }
    fn jacobian(&self, z: &[Complex64], out: &mut CMat) {
        self.sys.jac_z(z, &self.b, out);
    }
}

/// One symmetry of the solution set. `FlipSide` negates both coordinates of
/// every node on the side of the bipartition not containing the slack; it is
/// the angle shift by pi on that side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryAction {
    Identity,
    NegateY,
    FlipSide,
    /// NegateY composed with FlipSide: x negated on the far side, y negated
    /// on the slack side. The only nontrivial symmetry that survives nonzero
    /// injections (on bipartite graphs).
    NegateYFlipSide,
}

/// The symmetry group acting on solutions, as a list of actions plus the
/// bipartition side they refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryGroup {
    elements: Vec<SymmetryAction>,
    /// far_side[v] is true when node v lies on the side not containing the
    /// slack; empty when no side-dependent action is present.
    far_side: Vec<bool>,
}

impl SymmetryGroup {
    /// The full group valid for this network: order 4 for bipartite
    /// zero-injection networks, order 2 (y-negation) for other zero-injection
    /// networks, order 2 (the composed map) for bipartite networks with
    /// nonzero injections, trivial otherwise.
    pub fn for_network(net: &Network) -> SymmetryGroup {
        use SymmetryAction::*;
        let side = net.bipartition();
        match (net.zero_injection(), side) {
            (true, Some(far_side)) => SymmetryGroup {
                elements: vec![Identity, NegateY, FlipSide, NegateYFlipSide],
                far_side,
            },
            (true, None) => SymmetryGroup::y_negation(),
            (false, Some(far_side)) => {
                SymmetryGroup { elements: vec![Identity, NegateYFlipSide], far_side }
            }
            (false, None) => SymmetryGroup::trivial(),
        }
    }

    /// Just {identity, y-negation}; valid for any zero-injection network.
    pub fn y_negation() -> SymmetryGroup {
        SymmetryGroup {
            elements: vec![SymmetryAction::Identity, SymmetryAction::NegateY],
            far_side: Vec::new(),
        }
    }

    pub fn trivial() -> SymmetryGroup {
        SymmetryGroup { elements: vec![SymmetryAction::Identity], far_side: Vec::new() }
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[SymmetryAction] {
        &self.elements
    }

    pub fn far_side(&self) -> &[bool] {
        &self.far_side
    }

    pub fn label(&self) -> &'static str {
        match self.elements.len() {
            1 => "trivial",
            2 if self.elements.contains(&SymmetryAction::NegateY) => "y-negation",
            2 => "bipartite-composed",
            _ => "bipartite-order4",
        }
    }

    pub fn apply(&self, action: SymmetryAction, p: &[Complex64]) -> Point {
        let nm1 = p.len() / 2;
        let mut q = p.to_vec();
        let far = |k: usize| self.far_side.get(k).copied().unwrap_or(false);
        match action {
            SymmetryAction::Identity => {}
            SymmetryAction::NegateY => {
                for v in &mut q[nm1..] {
                    *v = -*v;
                }
            }
            SymmetryAction::FlipSide => {
                for k in 1..=nm1 {
                    if far(k) {
                        q[k - 1] = -q[k - 1];
                        q[nm1 + k - 1] = -q[nm1 + k - 1];
                    }
                }
            }
            SymmetryAction::NegateYFlipSide => {
                for k in 1..=nm1 {
                    if far(k) {
                        q[k - 1] = -q[k - 1];
                    } else {
                        q[nm1 + k - 1] = -q[nm1 + k - 1];
                    }
                }
            }
        }
        q
    }

    /// All distinct images of a point under the group, deduplicated to `tol`.
    pub fn orbit(&self, p: &[Complex64], tol: f64) -> Vec<Point> {
        let mut out: Vec<Point> = Vec::with_capacity(self.elements.len());
        for &g in &self.elements {
            let q = self.apply(g, p);
            if out.iter().all(|o| point_distance(o, &q) > tol) {
                out.push(q);
            }
        }
        out
    }

    /// Minimum distance between q and any group image of p.
    pub fn min_distance(&self, p: &[Complex64], q: &[Complex64]) -> f64 {
        self.elements
            .iter()
            .map(|&g| point_distance(&self.apply(g, p), q))
            .fold(f64::INFINITY, f64::min)
    }
}
