//! Minimum s-t cuts and surface recovery.
//!
//! The solver grows two search trees, one from the source and one from the
//! sink, and keeps them across augmentations: after each augmentation only the
//! nodes cut off from their root (orphans) are re-attached or released. On the
//! shallow grid-structured graphs built here this is much cheaper than
//! restarting a breadth-first search for every path.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::{Arc, FlowNetwork, GraphSpec};
use crate::problem::{Problem, SegmentationResult};

const NONE: u32 = u32::MAX;
const TERMINAL: u32 = u32::MAX - 1;
const INF_DIST: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tree {
    Free,
    Source,
    Sink,
}

/// Residual graph in CSR form. Input arc `i` becomes residual arcs `2i`
/// (forward) and `2i + 1` (reverse, initially empty).
struct Residual {
    head: Vec<u32>,
    tail: Vec<u32>,
    cap: Vec<u64>,
    offsets: Vec<u32>,
    adj: Vec<u32>,
}

impl Residual {
    fn new(net: &FlowNetwork) -> Self {
        let m = net.arcs.len() * 2;
        let mut head = Vec::with_capacity(m);
        let mut tail = Vec::with_capacity(m);
        let mut cap = Vec::with_capacity(m);
        let mut degree = vec![0u32; net.nodes + 1];
        for a in &net.arcs {
            head.extend([a.to as u32, a.from as u32]);
            tail.extend([a.from as u32, a.to as u32]);
            cap.extend([a.capacity, 0]);
            degree[a.from] += 1;
            degree[a.to] += 1;
        }
        let mut offsets = vec![0u32; net.nodes + 1];
        for v in 0..net.nodes {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill = offsets.clone();
        let mut adj = vec![0u32; m];
        for (e, &t) in tail.iter().enumerate() {
            let t = t as usize;
            adj[fill[t] as usize] = e as u32;
            fill[t] += 1;
        }
        Self {
            head,
            tail,
            cap,
            offsets,
            adj,
        }
    }

    #[inline]
    fn arcs_of(&self, v: u32) -> std::ops::Range<usize> {
        self.offsets[v as usize] as usize..self.offsets[v as usize + 1] as usize
    }
}

struct Solver {
    g: Residual,
    source: u32,
    sink: u32,
    tree: Vec<Tree>,
    parent: Vec<u32>,
    ts: Vec<u32>,
    dist: Vec<u32>,
    time: u32,
    active: VecDeque<u32>,
    queued: Vec<bool>,
    orphans: VecDeque<u32>,
    flow: u128,
}

impl Solver {
    fn new(net: &FlowNetwork) -> Self {
        let n = net.nodes;
        let mut s = Self {
            g: Residual::new(net),
            source: net.source as u32,
            sink: net.sink as u32,
            tree: vec![Tree::Free; n],
            parent: vec![NONE; n],
            ts: vec![0; n],
            dist: vec![0; n],
            time: 0,
            active: VecDeque::new(),
            queued: vec![false; n],
            orphans: VecDeque::new(),
            flow: 0,
        };
        for (root, tree) in [(s.source, Tree::Source), (s.sink, Tree::Sink)] {
            s.tree[root as usize] = tree;
            s.parent[root as usize] = TERMINAL;
            s.dist[root as usize] = 1;
            s.activate(root);
        }
        s
    }

    #[inline]
    fn activate(&mut self, v: u32) {
        if !self.queued[v as usize] {
            self.queued[v as usize] = true;
            self.active.push_back(v);
        }
    }

    /// Parent of `v` in its tree, following the stored parent arc.
    #[inline]
    fn up(&self, v: u32, arc: u32) -> u32 {
        match self.tree[v as usize] {
            Tree::Source => self.g.tail[arc as usize],
            _ => self.g.head[arc as usize],
        }
    }

    /// Expands the trees until they touch. Returns the connecting arc, oriented
    /// from the source tree to the sink tree.
    fn grow(&mut self) -> Option<u32> {
        while let Some(&v) = self.active.front() {
            let side = self.tree[v as usize];
            if side != Tree::Free {
                for i in self.g.arcs_of(v) {
                    let e = self.g.adj[i];
                    let w = self.g.head[e as usize];
                    match side {
                        Tree::Source if self.g.cap[e as usize] > 0 => match self.tree[w as usize] {
                            Tree::Free => {
                                self.tree[w as usize] = Tree::Source;
                                self.parent[w as usize] = e;
                                self.ts[w as usize] = self.ts[v as usize];
                                self.dist[w as usize] = self.dist[v as usize] + 1;
                                self.activate(w);
                            }
                            Tree::Sink => return Some(e),
                            Tree::Source => {}
                        },
                        Tree::Sink if self.g.cap[(e ^ 1) as usize] > 0 => match self.tree[w as usize] {
                            Tree::Free => {
                                self.tree[w as usize] = Tree::Sink;
                                self.parent[w as usize] = e ^ 1;
                                self.ts[w as usize] = self.ts[v as usize];
                                self.dist[w as usize] = self.dist[v as usize] + 1;
                                self.activate(w);
                            }
                            Tree::Source => return Some(e ^ 1),
                            Tree::Sink => {}
                        },
                        _ => {}
                    }
                }
            }
            self.active.pop_front();
            self.queued[v as usize] = false;
        }
        None
    }

    fn augment(&mut self, bridge: u32) {
        let g = &self.g;
        let mut bottleneck = g.cap[bridge as usize];
        let mut v = g.tail[bridge as usize];
        while self.parent[v as usize] != TERMINAL {
            let a = self.parent[v as usize];
            bottleneck = bottleneck.min(g.cap[a as usize]);
            v = g.tail[a as usize];
        }
        let mut v = g.head[bridge as usize];
        while self.parent[v as usize] != TERMINAL {
            let a = self.parent[v as usize];
            bottleneck = bottleneck.min(g.cap[a as usize]);
            v = g.head[a as usize];
        }

        self.push(bridge, bottleneck);
        let mut v = self.g.tail[bridge as usize];
        while self.parent[v as usize] != TERMINAL {
            let a = self.parent[v as usize];
            self.push(a, bottleneck);
            let next = self.g.tail[a as usize];
            if self.g.cap[a as usize] == 0 {
                self.parent[v as usize] = NONE;
                self.orphans.push_back(v);
            }
            v = next;
        }
        let mut v = self.g.head[bridge as usize];
        while self.parent[v as usize] != TERMINAL {
            let a = self.parent[v as usize];
            self.push(a, bottleneck);
            let next = self.g.head[a as usize];
            if self.g.cap[a as usize] == 0 {
                self.parent[v as usize] = NONE;
                self.orphans.push_back(v);
            }
            v = next;
        }
        self.flow += bottleneck as u128;
    }

    #[inline]
    fn push(&mut self, arc: u32, amount: u64) {
        self.g.cap[arc as usize] -= amount;
        self.g.cap[(arc ^ 1) as usize] += amount;
    }

    /// Length of the tree path from `q` to its root, or `None` if the path
    /// runs into an orphan. Marks visited nodes with the current timestamp.
    fn origin_distance(&mut self, q: u32) -> Option<u32> {
        let mut d = 0u32;
        let mut j = q;
        loop {
            if self.ts[j as usize] == self.time {
                d += self.dist[j as usize];
                break;
            }
            let a = self.parent[j as usize];
            d += 1;
            if a == TERMINAL {
                self.ts[j as usize] = self.time;
                self.dist[j as usize] = 1;
                break;
            }
            if a == NONE {
                return None;
            }
            j = self.up(j, a);
        }
        let mut j = q;
        let mut dj = d;
        while self.ts[j as usize] != self.time {
            self.ts[j as usize] = self.time;
            self.dist[j as usize] = dj;
            dj -= 1;
            j = self.up(j, self.parent[j as usize]);
        }
        Some(d)
    }

    fn adopt(&mut self) {
        while let Some(p) = self.orphans.pop_front() {
            let side = self.tree[p as usize];
            let mut best = NONE;
            let mut best_dist = INF_DIST;
            for i in self.g.arcs_of(p) {
                let e = self.g.adj[i];
                let q = self.g.head[e as usize];
                if self.tree[q as usize] != side {
                    continue;
                }
                // Candidate parent arc: q -> p for the source tree, p -> q for the sink tree.
                let cand = if side == Tree::Source { e ^ 1 } else { e };
                if self.g.cap[cand as usize] == 0 {
                    continue;
                }
                if let Some(d) = self.origin_distance(q) {
                    if d < best_dist {
                        best = cand;
                        best_dist = d;
                    }
                }
            }
            if best != NONE {
                self.parent[p as usize] = best;
                self.ts[p as usize] = self.time;
                self.dist[p as usize] = best_dist + 1;
                continue;
            }
            for i in self.g.arcs_of(p) {
                let e = self.g.adj[i];
                let q = self.g.head[e as usize];
                if self.tree[q as usize] != side {
                    continue;
                }
                let toward_p = if side == Tree::Source { e ^ 1 } else { e };
                if self.g.cap[toward_p as usize] > 0 {
                    self.activate(q);
                }
                let a = self.parent[q as usize];
                if a != NONE && a != TERMINAL && self.up(q, a) == p {
                    self.parent[q as usize] = NONE;
                    self.orphans.push_back(q);
                }
            }
            self.tree[p as usize] = Tree::Free;
        }
    }

    /// Runs to completion or until the flow reaches `limit`.
    fn run(&mut self, limit: u128) -> u128 {
        while let Some(bridge) = self.grow() {
            self.time = self.time.wrapping_add(1);
            self.augment(bridge);
            if self.flow >= limit {
                break;
            }
            self.adopt();
        }
        self.flow
    }

    /// Nodes reachable from the source in the residual graph.
    fn source_side(&self) -> Vec<bool> {
        let mut seen = vec![false; self.tree.len()];
        let mut queue = VecDeque::from([self.source]);
        seen[self.source as usize] = true;
        while let Some(v) = queue.pop_front() {
            for i in self.g.arcs_of(v) {
                let e = self.g.adj[i] as usize;
                let w = self.g.head[e];
                if self.g.cap[e] > 0 && !seen[w as usize] {
                    seen[w as usize] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }
}

/// A maximum flow and the source-side-minimal minimum cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutResult {
    pub flow: u64,
    /// `source_side[v]` is true for nodes reachable from the source in the
    /// final residual graph.
    pub source_side: Vec<bool>,
    /// Indices into the network's arc list of arcs crossing the cut.
    pub severed: Vec<usize>,
}

impl CutResult {
    pub fn cut_capacity(&self, arcs: &[Arc]) -> u128 {
        self.severed.iter().map(|&i| arcs[i].capacity as u128).sum()
    }
}

fn validate_network(net: &FlowNetwork) -> Result<()> {
    if net.source == net.sink || net.source >= net.nodes || net.sink >= net.nodes {
        return Err(Error::InvalidProblem("bad source/sink ids".into()));
    }
    if net.nodes >= TERMINAL as usize || net.arcs.len() * 2 >= u32::MAX as usize {
        return Err(Error::CapacityOverflow("network too large for 32-bit ids".into()));
    }
    if let Some(a) = net.arcs.iter().find(|a| a.from >= net.nodes || a.to >= net.nodes || a.from == a.to) {
        return Err(Error::InvalidProblem(format!("bad arc {} -> {}", a.from, a.to)));
    }
    Ok(())
}

/// Maximum flow on an arbitrary network. A flow of at least `infinity` is
/// reported as [`Error::Infeasible`].
pub fn solve_network(net: &FlowNetwork, infinity: u64) -> Result<CutResult> {
    validate_network(net)?;
    let mut solver = Solver::new(net);
    let flow = solver.run(infinity as u128);
    if flow >= infinity as u128 {
        return Err(Error::Infeasible);
    }
    let source_side = solver.source_side();
    if source_side[net.sink] {
        return Err(Error::InternalInconsistency("sink reachable after max flow".into()));
    }
    let severed: Vec<usize> = net
        .arcs
        .iter()
        .enumerate()
        .filter(|(_, a)| source_side[a.from] && !source_side[a.to])
        .map(|(i, _)| i)
        .collect();
    let cut = CutResult {
        flow: flow as u64,
        source_side,
        severed,
    };
    if cut.cut_capacity(&net.arcs) != flow {
        return Err(Error::InternalInconsistency(format!(
            "flow {flow} differs from cut capacity {}",
            cut.cut_capacity(&net.arcs)
        )));
    }
    Ok(cut)
}

/// Minimum cut of an assembled graph; infeasible if every cut severs a
/// sentinel arc.
pub fn solve_min_cut(g: &GraphSpec) -> Result<CutResult> {
    solve_network(&g.network, g.sentinel)
}

/// Reads the surfaces off a minimum cut: `S_i(a)` is the highest level of
/// column `a` on the source side.
pub fn recover_surfaces(cut: &CutResult, graph: &GraphSpec, problem: &Problem) -> Result<SegmentationResult> {
    let layout = graph.layout;
    if cut.source_side.len() != graph.network.nodes {
        return Err(Error::InternalInconsistency("cut does not match graph".into()));
    }
    let mut labels = vec![vec![0usize; layout.columns]; layout.surfaces];
    for (i, surface) in labels.iter_mut().enumerate() {
        for (a, label) in surface.iter_mut().enumerate() {
            let side = |z| cut.source_side[layout.node(i, a, z)];
            let top = (0..layout.levels).take_while(|&z| side(z)).count();
            if top == 0 || (top..layout.levels).any(side) {
                return Err(Error::InternalInconsistency(format!(
                    "surface {i}, column {a}: source side is not a nonempty prefix"
                )));
            }
            *label = top - 1;
        }
    }
    let energy = cut.flow as f64 / graph.scale.as_f64() + graph.energy_offset();
    let result = SegmentationResult::from_labels(problem, labels, energy);
    if result.separation_violations(problem.separation()) > 0 {
        return Err(Error::InternalInconsistency("recovered surfaces violate separation".into()));
    }
    Ok(result)
}
