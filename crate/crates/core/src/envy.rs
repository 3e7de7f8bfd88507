//! Envy graphs, desire graphs and the fairness predicates built on them.

use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::ledger::{KappaLedger, ValueLedger, ValueView};
use crate::market::{AgentId, MarketShape, Pair, Side};
use crate::rational::{Rational, PQ};
use crate::valuation::{validate_oracle, Capabilities, Capability, ValuationOracle, ValueMatrix, Violation};

/// Directed graphs that can answer edge queries.
pub trait Digraph {
    fn vertex_count(&self) -> usize;
    fn has_edge(&self, u: usize, v: usize) -> bool;
}

/// Plain adjacency-list digraph; neighbours kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AdjacencyGraph {
    pub adj: Vec<Vec<usize>>,
}

impl AdjacencyGraph {
    pub fn new(vertex_count: usize) -> Self {
        AdjacencyGraph {
            adj: vec![Vec::new(); vertex_count],
        }
    }

    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::new(vertex_count);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        if let Err(pos) = self.adj[u].binary_search(&v) {
            self.adj[u].insert(pos, v);
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }
}

impl Digraph for AdjacencyGraph {
    fn vertex_count(&self) -> usize {
        self.adj.len()
    }
    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj.get(u).is_some_and(|vs| vs.binary_search(&v).is_ok())
    }
}

/// Envy within one side: edge `i -> j` iff `v_i(X_i) < v_i(X_j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvyGraph {
    pub side: Side,
    pub graph: AdjacencyGraph,
}

impl EnvyGraph {
    pub fn envies(&self, i: usize, j: usize) -> bool {
        self.graph.has_edge(i, j)
    }

    pub fn is_edgeless(&self) -> bool {
        self.graph.adj.iter().all(Vec::is_empty)
    }
}

pub fn build_envy_graph<V: ValueView + ?Sized>(view: &V, side: Side) -> EnvyGraph {
    let len = view.shape().len(side);
    let mut graph = AdjacencyGraph::new(len);
    for i in 0..len {
        let own = view.bundle_value(side, i, i);
        for j in (0..len).filter(|&j| j != i) {
            if own < view.bundle_value(side, i, j) {
                graph.adj[i].push(j);
            }
        }
    }
    EnvyGraph { side, graph }
}

/// A closed walk `(u_1, ..., u_l)`; vertices may repeat.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Circuit {
    vertices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("a circuit needs at least two vertices")]
    TooShort,
    #[error("missing edge ({0}, {1})")]
    MissingEdge(usize, usize),
    #[error("self-loop at {0}")]
    SelfLoop(usize),
    #[error("vertex {0} repeats; a cycle needs distinct vertices")]
    Repeated(usize),
    #[error("vertex {0} does not occur in the circuit")]
    NotInCircuit(usize),
}

impl Circuit {
    pub fn new<G: Digraph + ?Sized>(vertices: Vec<usize>, graph: &G) -> Result<Self, CircuitError> {
        if vertices.len() < 2 {
            return Err(CircuitError::TooShort);
        }
        let l = vertices.len();
        for q in 0..l {
            let (u, v) = (vertices[q], vertices[(q + 1) % l]);
            if u == v {
                return Err(CircuitError::SelfLoop(u));
            }
            if !graph.has_edge(u, v) {
                return Err(CircuitError::MissingEdge(u, v));
            }
        }
        Ok(Circuit { vertices })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// The vertex following the first occurrence of `v`.
    pub fn suc(&self, v: usize) -> Option<usize> {
        let q = self.vertices.iter().position(|&u| u == v)?;
        Some(self.vertices[(q + 1) % self.vertices.len()])
    }

    /// Consecutive edges, including the closing one.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let l = self.vertices.len();
        (0..l).map(move |q| (self.vertices[q], self.vertices[(q + 1) % l]))
    }
}

/// A circuit whose vertices are pairwise distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cycle(Circuit);

impl Cycle {
    pub fn new<G: Digraph + ?Sized>(vertices: Vec<usize>, graph: &G) -> Result<Self, CircuitError> {
        let circuit = Circuit::new(vertices, graph)?;
        Self::from_circuit(circuit)
    }

    fn from_circuit(circuit: Circuit) -> Result<Self, CircuitError> {
        let vs = circuit.vertices();
        for (k, v) in vs.iter().enumerate() {
            if vs[..k].contains(v) {
                return Err(CircuitError::Repeated(*v));
            }
        }
        Ok(Cycle(circuit))
    }

    pub fn vertices(&self) -> &[usize] {
        self.0.vertices()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains_edge(&self, u: usize, v: usize) -> bool {
        self.0.edges().any(|e| e == (u, v))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.edges()
    }

    /// Rotation starting at the smallest vertex, for comparisons.
    pub fn canonical(&self) -> Vec<usize> {
        let vs = self.vertices();
        let start = (0..vs.len()).min_by_key(|&k| vs[k]).unwrap_or(0);
        vs[start..].iter().chain(&vs[..start]).copied().collect()
    }
}

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.vertices().iter().map(usize::to_string).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Some directed cycle of `graph`, searching depth-first from vertex 0 with
/// neighbours in ascending order.
pub fn find_directed_cycle(graph: &AdjacencyGraph) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Grey,
        Black,
    }
    let n = graph.vertex_count();
    let mut color = vec![Color::White; n];
    let mut path: Vec<usize> = Vec::new();
    for root in 0..n {
        if color[root] != Color::White {
            continue;
        }
        // Explicit stack of (vertex, next neighbour position).
        let mut stack = vec![(root, 0usize)];
        color[root] = Color::Grey;
        path.push(root);
        while let Some(&mut (u, ref mut pos)) = stack.last_mut() {
            if let Some(&v) = graph.adj[u].get(*pos) {
                *pos += 1;
                match color[v] {
                    Color::White => {
                        color[v] = Color::Grey;
                        path.push(v);
                        stack.push((v, 0));
                    }
                    Color::Grey => {
                        let start = path.iter().position(|&w| w == v).expect("grey vertex on path");
                        return Some(path[start..].to_vec());
                    }
                    Color::Black => {}
                }
            } else {
                color[u] = Color::Black;
                path.pop();
                stack.pop();
            }
        }
    }
    None
}

pub fn has_envy_cycle(graph: &EnvyGraph) -> Option<Cycle> {
    find_directed_cycle(&graph.graph).map(|vs| Cycle::new(vs, &graph.graph).expect("DFS cycles are simple"))
}

/// Envy cycle on either side, N first.
pub fn any_envy_cycle<V: ValueView + ?Sized>(view: &V) -> Option<(Side, Cycle)> {
    Side::BOTH
        .into_iter()
        .find_map(|side| has_envy_cycle(&build_envy_graph(view, side)).map(|c| (side, c)))
}

/// Outcome of a `c`-envy-boundedness check with the pair of largest gap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvyBound {
    pub bounded: bool,
    /// The ordered pair `(i, j)` maximizing `v_i(X_j) - v_i(X_i)`.
    pub worst: Option<(AgentId, AgentId)>,
    pub gap: Rational,
}

/// `v_i(X_j) - v_i(X_i) <= c` for every ordered same-side pair.
pub fn is_c_envy_bounded<V: ValueView + ?Sized>(view: &V, c: Rational) -> EnvyBound {
    let shape = view.shape();
    let mut worst = None;
    let mut gap = Rational::zero();
    for side in Side::BOTH {
        let len = shape.len(side);
        for i in 0..len {
            let own = view.bundle_value(side, i, i);
            for j in (0..len).filter(|&j| j != i) {
                let g = view.bundle_value(side, i, j) - own;
                if worst.is_none() || g > gap {
                    gap = g;
                    worst = Some((AgentId { side, index: i }, AgentId { side, index: j }));
                }
            }
        }
    }
    EnvyBound {
        bounded: gap <= c,
        worst,
        gap,
    }
}

/// EF1 outcome; `witness` is the first pair whose envy survives every
/// single-match removal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ef1Verdict {
    pub ef1: bool,
    pub witness: Option<(AgentId, AgentId)>,
}

/// Envy-freeness up to one match. Removing the occurrence `i` values most
/// from `X_j` leaves the least residual envy, so only that one is tried.
pub fn is_ef1(ledger: &ValueLedger) -> Ef1Verdict {
    let shape = ledger.shape();
    for side in Side::BOTH {
        let len = shape.len(side);
        for i in 0..len {
            let own = ledger.bundle_value(side, i, i);
            for j in (0..len).filter(|&j| j != i) {
                let other = ledger.bundle_value(side, i, j);
                if own < other && own < other - ledger.best_single(side, i, j) {
                    return Ef1Verdict {
                        ef1: false,
                        witness: Some((AgentId { side, index: i }, AgentId { side, index: j })),
                    };
                }
            }
        }
    }
    Ef1Verdict {
        ef1: true,
        witness: None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("EFX check needs binary {{0,1}} valuations")]
pub struct NotBinary01;

/// Envy-freeness up to any positively valued match, for `{0,1}` values.
/// A positively valued match is worth exactly 1, so every such removal
/// lowers `v_i(X_j)` by one.
pub fn is_efx_binary01(kappa: &KappaLedger, caps: &Capabilities) -> Result<bool, NotBinary01> {
    if !caps.binary01 {
        return Err(NotBinary01);
    }
    let shape = kappa.shape();
    for side in Side::BOTH {
        let len = shape.len(side);
        for i in 0..len {
            let own = kappa.kappa(side, i, i);
            for j in (0..len).filter(|&j| j != i) {
                if kappa.kappa(side, i, j) > own + 1 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Relabels `circuit` to end at `i` and start at its successor, then splices
/// out the stretch between repeated vertices until none repeat. The returned
/// cycle contains the edge `(i, suc(i))`.
pub fn find_cycle_in_circuit(circuit: &Circuit, i: usize) -> Result<Cycle, CircuitError> {
    let vs = circuit.vertices();
    let l = vs.len();
    let q = vs.iter().position(|&u| u == i).ok_or(CircuitError::NotInCircuit(i))?;
    // d[0] = suc(i), d[last] = i.
    let mut d: Vec<usize> = (1..=l).map(|k| vs[(q + k) % l]).collect();
    loop {
        let repeat = (0..d.len()).find_map(|j| ((j + 1)..d.len()).find(|&k| d[k] == d[j]).map(|k| (j, k)));
        let Some((j, k)) = repeat else { break };
        // Keep u_1..u_j and u_{k+1}..; drop u_{j+1}..u_k.
        d.drain(j + 1..=k);
    }
    Cycle::from_circuit(Circuit { vertices: d })
}

/// An undirected desire edge between N-agent `n` and M-agent `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DesireEdge {
    pub pair: Pair,
    /// Both endpoints value each other at 1.
    pub symmetric: bool,
}

/// Undirected bipartite graph with an edge `{i, k}` whenever
/// `v_i(k) + v_k(i) >= 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesireGraph {
    pub shape: MarketShape,
    /// Sorted by `(n, m)`.
    pub edges: Vec<DesireEdge>,
}

impl DesireGraph {
    pub fn from_matrix(values: &ValueMatrix) -> Self {
        let shape = values.shape();
        let mut edges = Vec::new();
        for n in 0..shape.n {
            for m in 0..shape.m {
                let (i, k) = (AgentId::n(n), AgentId::m(m));
                let (vik, vki) = (values.get(i, k), values.get(k, i));
                if vik + vki >= Rational::one() {
                    edges.push(DesireEdge {
                        pair: Pair::new(n, m),
                        symmetric: vik.is_one() && vki.is_one(),
                    });
                }
            }
        }
        DesireGraph { shape, edges }
    }

    /// Requires a static `{0,1}` oracle.
    pub fn from_oracle<O: ValuationOracle + ?Sized>(oracle: &O) -> Result<Self, Violation> {
        validate_oracle(oracle, 1, &[Capability::Static, Capability::Binary01])?;
        Ok(Self::from_matrix(&oracle.matrix_at(1)))
    }

    pub fn vertex(&self, agent: AgentId) -> usize {
        match agent.side {
            Side::N => agent.index,
            Side::M => self.shape.n + agent.index,
        }
    }

    pub fn agent(&self, vertex: usize) -> AgentId {
        if vertex < self.shape.n {
            AgentId::n(vertex)
        } else {
            AgentId::m(vertex - self.shape.n)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, pair: Pair) -> bool {
        self.edges.binary_search_by_key(&pair, |e| e.pair).is_ok()
    }

    /// Directed view with both orientations of every edge.
    pub fn as_digraph(&self) -> AdjacencyGraph {
        let mut g = AdjacencyGraph::new(self.shape.n + self.shape.m);
        for e in &self.edges {
            let (u, v) = (self.vertex(AgentId::n(e.pair.n)), self.vertex(AgentId::m(e.pair.m)));
            g.add_edge(u, v);
            g.add_edge(v, u);
        }
        g
    }

    /// `is_bridge[k]` for `edges[k]` (lowlink depth-first search).
    pub fn bridges(&self) -> Vec<bool> {
        let vcount = self.shape.n + self.shape.m;
        let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); vcount];
        for (k, e) in self.edges.iter().enumerate() {
            let (u, v) = (self.vertex(AgentId::n(e.pair.n)), self.vertex(AgentId::m(e.pair.m)));
            incident[u].push((v, k));
            incident[v].push((u, k));
        }
        let mut order = vec![usize::MAX; vcount];
        let mut low = vec![0usize; vcount];
        let mut is_bridge = vec![false; self.edges.len()];
        let mut counter = 0;
        for root in 0..vcount {
            if order[root] != usize::MAX {
                continue;
            }
            // (vertex, edge id used to enter it, next incident position)
            let mut stack = vec![(root, usize::MAX, 0usize)];
            order[root] = counter;
            low[root] = counter;
            counter += 1;
            while let Some(&mut (u, via, ref mut pos)) = stack.last_mut() {
                if let Some(&(v, k)) = incident[u].get(*pos) {
                    *pos += 1;
                    if k == via {
                        continue;
                    }
                    if order[v] == usize::MAX {
                        order[v] = counter;
                        low[v] = counter;
                        counter += 1;
                        stack.push((v, k, 0));
                    } else {
                        low[u] = low[u].min(order[v]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(parent, _, _)) = stack.last() {
                        low[parent] = low[parent].min(low[u]);
                        if low[u] > order[parent] {
                            is_bridge[via] = true;
                        }
                    }
                }
            }
        }
        is_bridge
    }
}

/// Whether every cycle of the desire graph uses symmetric edges only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricCycles {
    pub holds: bool,
    /// An asymmetric edge lying on some cycle.
    pub witness: Option<Pair>,
}

/// An undirected edge lies on a cycle iff it is not a bridge, so the
/// property holds iff every asymmetric edge is a bridge.
pub fn only_symmetric_cycles(graph: &DesireGraph) -> SymmetricCycles {
    let bridges = graph.bridges();
    let witness = graph
        .edges
        .iter()
        .zip(&bridges)
        .find(|(e, &bridge)| !e.symmetric && !bridge)
        .map(|(e, _)| e.pair);
    SymmetricCycles {
        holds: witness.is_none(),
        witness,
    }
}

impl fmt::Display for EnvyBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.worst {
            Some((i, j)) => write!(f, "max gap {} at ({i}, {j})", PQ(&self.gap)),
            None => write!(f, "no pairs"),
        }
    }
}
