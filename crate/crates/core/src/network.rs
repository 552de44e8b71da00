//! Time-varying communication graph, doubly stochastic mixing weights and the
//! synchronous message bus.
//!
//! Each tick the harness builds a proximity graph from the defenders' current
//! positions, attaches Metropolis–Hastings weights, and runs one exchange
//! round. Self-loops are implicit: every agent is its own neighbor and always
//! receives its own message.

use nalgebra::DMatrix;

use crate::{ensure_finite, Error, Result, Vec3};

/// Undirected communication graph for one round, optionally carrying its
/// mixing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    n: usize,
    /// Sorted neighbor lists, self excluded.
    neighbors: Vec<Vec<usize>>,
    weights: Option<DMatrix<f64>>,
}

impl CommGraph {
    /// Builds a graph from an undirected edge list. Duplicate and reversed
    /// pairs collapse to one edge.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Input(format!("edge ({i},{j}) out of range for n={n}")));
            }
            if i == j {
                return Err(Error::Input(format!("explicit self-loop ({i},{i})")));
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            n,
            neighbors,
            weights: None,
        })
    }

    /// Graph with only the implicit self-loops.
    pub fn edgeless(n: usize) -> Self {
        Self {
            n,
            neighbors: vec![Vec::new(); n],
            weights: None,
        }
    }

    pub fn complete(n: usize) -> Self {
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect();
        Self {
            n,
            neighbors,
            weights: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Neighbors of `i`, excluding `i` itself.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Closed neighborhood of `i` (includes the self-loop), sorted.
    pub fn closed_neighborhood(&self, i: usize) -> Vec<usize> {
        let mut out = self.neighbors[i].clone();
        let at = out.partition_point(|&j| j < i);
        out.insert(at, i);
        out
    }

    /// Degree of `i`, self-loop not counted.
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i == j || self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Undirected edges as `(i, j)` with `i < j`, lexicographically ordered.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn weights(&self) -> Option<&DMatrix<f64>> {
        self.weights.as_ref()
    }

    /// Mixing weight `a_ij`, or zero when no weights are attached.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights.as_ref().map_or(0.0, |w| w[(i, j)])
    }

    /// Smallest strictly positive weight: the realized lower bound `a`.
    pub fn min_positive_weight(&self) -> Option<f64> {
        self.weights
            .as_ref()?
            .iter()
            .copied()
            .filter(|&w| w > 0.0)
            .reduce(f64::min)
    }

    /// Blends the mixing matrix with the identity: `A <- (1 - theta) A + theta I`.
    pub fn with_laziness(mut self, theta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&theta) {
            return Err(Error::Input(format!("laziness must lie in [0,1), got {theta}")));
        }
        let w = self
            .weights
            .as_mut()
            .ok_or_else(|| Error::Input("laziness requires mixing weights".into()))?;
        if theta > 0.0 {
            *w *= 1.0 - theta;
            for i in 0..self.n {
                w[(i, i)] += theta;
            }
        }
        Ok(self)
    }

    /// True when the edge set (self-loops aside) connects all nodes.
    pub fn is_connected(&self) -> bool {
        let mut uf = UnionFind::new(self.n);
        for (i, j) in self.edges() {
            uf.union(i, j);
        }
        uf.components() <= 1
    }
}

/// Connects every pair of agents whose distance is at most `radius`.
pub fn build_proximity_graph(positions: &[Vec3], radius: f64) -> Result<CommGraph> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Input(format!("communication radius must be positive, got {radius}")));
    }
    for (i, p) in positions.iter().enumerate() {
        ensure_finite(p, &format!("position of agent {i}"))?;
    }
    let n = positions.len();
    let mut neighbors = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if (positions[i] - positions[j]).norm() <= radius {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    for list in &mut neighbors {
        list.sort_unstable();
    }
    Ok(CommGraph {
        n,
        neighbors,
        weights: None,
    })
}

/// Attaches Metropolis–Hastings weights `a_ij = 1 / (1 + max(deg_i, deg_j))`
/// with the self-weight absorbing the remainder of each row.
///
/// The result is symmetric and doubly stochastic for any undirected graph, and
/// the self-weight is always strictly positive.
pub fn metropolis_weights(graph: CommGraph) -> CommGraph {
    let n = graph.n;
    let mut w = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let di = graph.degree(i);
        for &j in graph.neighbors(i) {
            let dj = graph.degree(j);
            w[(i, j)] = 1.0 / (1.0 + di.max(dj) as f64);
        }
    }
    for i in 0..n {
        let off: f64 = graph.neighbors(i).iter().map(|&j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    CommGraph {
        weights: Some(w),
        ..graph
    }
}

/// For every start index `t`, reports whether the union of edge sets over
/// rounds `t..=t + b` connects all nodes. Windows running past the end of the
/// sequence use the available suffix.
pub fn check_b_connectivity(graphs: &[CommGraph], b: usize) -> Result<Vec<bool>> {
    if b == 0 {
        return Err(Error::Input("B must be a positive integer".into()));
    }
    let Some(first) = graphs.first() else {
        return Ok(Vec::new());
    };
    let n = first.n;
    if let Some(g) = graphs.iter().find(|g| g.n != n) {
        return Err(Error::Input(format!(
            "graph sequence mixes node counts {n} and {}",
            g.n
        )));
    }
    Ok((0..graphs.len())
        .map(|t| {
            let end = (t + b).min(graphs.len() - 1);
            let mut uf = UnionFind::new(n);
            for g in &graphs[t..=end] {
                for (i, j) in g.edges() {
                    uf.union(i, j);
                }
            }
            uf.components() <= 1
        })
        .collect())
}

struct UnionFind {
    parent: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.components -= 1;
        }
    }

    fn components(&self) -> usize {
        self.components
    }
}

/// Payload one agent broadcasts per round: its two trackers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub sender: usize,
    pub s: Vec3,
    pub y: Vec3,
}

/// Messages delivered to one agent in one round, sorted by sender.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mailbox {
    messages: Vec<Message>,
}

impl Mailbox {
    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn from_sender(&self, j: usize) -> Option<&Message> {
        self.messages
            .binary_search_by_key(&j, |m| m.sender)
            .ok()
            .map(|k| &self.messages[k])
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

/// Lossless synchronous bus. One call to [`MessageBus::exchange`] is one
/// communication round: all sends are collected before any mailbox exists.
#[derive(Debug, Clone, Default)]
pub struct MessageBus {
    rounds: u64,
    delivered: u64,
}

impl MessageBus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Delivers `outbound[j]` to every member of `j`'s closed neighborhood.
    /// `outbound` must hold exactly one message per agent, indexed by sender.
    pub fn exchange(&mut self, graph: &CommGraph, outbound: &[Message]) -> Result<Vec<Mailbox>> {
        if outbound.len() != graph.n() {
            return Err(Error::Protocol(format!(
                "{} outbound messages for {} agents",
                outbound.len(),
                graph.n()
            )));
        }
        if let Some((i, m)) = outbound.iter().enumerate().find(|(i, m)| m.sender != *i) {
            return Err(Error::Protocol(format!(
                "slot {i} carries a message from agent {}",
                m.sender
            )));
        }
        let boxes: Vec<Mailbox> = (0..graph.n())
            .map(|i| Mailbox {
                messages: graph
                    .closed_neighborhood(i)
                    .into_iter()
                    .map(|j| outbound[j])
                    .collect(),
            })
            .collect();
        self.rounds += 1;
        self.delivered += boxes.iter().map(|b| b.len() as u64).sum::<u64>();
        Ok(boxes)
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }
}
