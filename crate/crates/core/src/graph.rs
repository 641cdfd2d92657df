//! Graph construction for simultaneous multi-surface search in irregularly
//! sampled columns.
//!
//! Each surface `i` gets a subgraph with one node `n_i(a, z)` per column `a`
//! and level `z`. A labeling `S_i(a) = k` corresponds to the cut that keeps
//! `n_i(a, 0..=k)` on the source side. Three arc classes encode the energy:
//!
//! * intra-column arcs: data costs plus infinite downward arcs that force each
//!   column to be cut exactly once;
//! * inter-column arcs between 4-neighbors: weights `g(k1, k2)` whose severed
//!   sum equals `psi(L_a(S(a)) - L_b(S(b)))` for any pair of labels;
//! * inter-surface arcs: infinite arcs that make any labeling closer than the
//!   minimum separation an infinite cut.
//!
//! Real weights are converted to integer capacities by fixed-point scaling;
//! "infinite" arcs get a sentinel larger than the sum of all finite capacities.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cost::normalize_cost;
use crate::error::{Error, Result};
use crate::penalty::{eval_f, ConvexPenalty};
use crate::problem::Problem;

/// Node numbering: surface-major, column-major, level-minor. Source and sink
/// take the two ids after the last interior node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeLayout {
    pub surfaces: usize,
    pub columns: usize,
    pub levels: usize,
}

impl NodeLayout {
    #[inline]
    pub fn node(&self, surface: usize, column: usize, level: usize) -> usize {
        debug_assert!(surface < self.surfaces && column < self.columns && level < self.levels);
        (surface * self.columns + column) * self.levels + level
    }

    pub fn interior_nodes(&self) -> usize {
        self.surfaces * self.columns * self.levels
    }

    pub fn source(&self) -> usize {
        self.interior_nodes()
    }

    pub fn sink(&self) -> usize {
        self.interior_nodes() + 1
    }

    /// Inverse of [`NodeLayout::node`] for interior ids.
    pub fn locate(&self, node: usize) -> Option<(usize, usize, usize)> {
        (node < self.interior_nodes()).then(|| {
            let level = node % self.levels;
            let rest = node / self.levels;
            (rest / self.columns, rest % self.columns, level)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Source,
    Sink,
    Node(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcClass {
    /// Source to the bottom of a column.
    Anchor,
    /// Infinite arc from a level to the one below it.
    Monotonicity,
    /// Carries the data cost of the level it leaves.
    Data,
    Smoothness,
    Separation,
}

/// An arc before quantization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedArc {
    pub from: Endpoint,
    pub to: Endpoint,
    pub weight: Weight,
    pub class: ArcClass,
}

impl WeightedArc {
    fn finite(from: Endpoint, to: Endpoint, w: f64, class: ArcClass) -> Self {
        Self {
            from,
            to,
            weight: Weight::Finite(w),
            class,
        }
    }

    fn infinite(from: Endpoint, to: Endpoint, class: ArcClass) -> Self {
        Self {
            from,
            to,
            weight: Weight::Infinite,
            class,
        }
    }
}

/// Fixed-point multiplier turning real weights into integer capacities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapacityScale(u64);

impl CapacityScale {
    pub const DEFAULT: Self = Self(1 << 16);

    pub fn new(scale: u64) -> Result<Self> {
        if scale == 0 {
            return Err(Error::CapacityOverflow("scale must be >= 1".into()));
        }
        Ok(Self(scale))
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl Default for CapacityScale {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Round-half-even of `value * scale`.
pub fn quantize_energy(value: f64, scale: CapacityScale) -> Result<i64> {
    if !value.is_finite() {
        return Err(Error::CapacityOverflow(format!("cannot quantize {value}")));
    }
    let q = (value * scale.as_f64()).round_ties_even();
    const LIMIT: f64 = 9_223_372_036_854_775_808.0; // 2^63
    if !(-LIMIT..LIMIT).contains(&q) {
        return Err(Error::CapacityOverflow(format!(
            "{value} at scale {} exceeds the integer range",
            scale.get()
        )));
    }
    Ok(q as i64)
}

fn quantize_capacity(weight: f64, scale: CapacityScale) -> Result<u64> {
    let q = quantize_energy(weight.max(0.0), scale)?;
    Ok(q as u64)
}

/// A directed arc with integer capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: u64,
}

/// A bare s-t flow network, the input of the max-flow solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNetwork {
    pub nodes: usize,
    pub source: usize,
    pub sink: usize,
    pub arcs: Vec<Arc>,
}

impl FlowNetwork {
    /// DIMACS max-flow text (`p`, `n`, `a` lines, 1-based node ids).
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "c surfcut min-cut graph");
        let _ = writeln!(out, "p max {} {}", self.nodes, self.arcs.len());
        let _ = writeln!(out, "n {} s", self.source + 1);
        let _ = writeln!(out, "n {} t", self.sink + 1);
        for arc in &self.arcs {
            let _ = writeln!(out, "a {} {} {}", arc.from + 1, arc.to + 1, arc.capacity);
        }
        out
    }

    pub fn from_dimacs(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::format("<dimacs>", format!("line {}: {msg}", line + 1));
        let mut header = None;
        let mut source = None;
        let mut sink = None;
        let mut arcs = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            match parts.next() {
                None | Some("c") => {}
                Some("p") => {
                    if parts.next() != Some("max") {
                        return Err(bad(ln, "expected 'p max'"));
                    }
                    let n: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad(ln, "node count"))?;
                    let m: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad(ln, "arc count"))?;
                    header = Some((n, m));
                }
                Some("n") => {
                    let id = parts
                        .next()
                        .and_then(|v| v.parse::<usize>().ok())
                        .and_then(|v| v.checked_sub(1))
                        .ok_or_else(|| bad(ln, "node id"))?;
                    match parts.next() {
                        Some("s") => source = Some(id),
                        Some("t") => sink = Some(id),
                        _ => return Err(bad(ln, "node designator must be s or t")),
                    }
                }
                Some("a") => {
                    let mut num = || -> Option<u64> { parts.next()?.parse().ok() };
                    let (Some(u), Some(v), Some(c)) = (num(), num(), num()) else {
                        return Err(bad(ln, "arc needs 'a from to capacity'"));
                    };
                    if u == 0 || v == 0 {
                        return Err(bad(ln, "node ids are 1-based"));
                    }
                    arcs.push(Arc {
                        from: u as usize - 1,
                        to: v as usize - 1,
                        capacity: c,
                    });
                }
                Some(other) => return Err(bad(ln, &format!("unknown line type {other}"))),
            }
        }
        let (nodes, m) = header.ok_or_else(|| Error::format("<dimacs>", "missing problem line"))?;
        if m != arcs.len() {
            return Err(Error::format("<dimacs>", format!("header says {m} arcs, found {}", arcs.len())));
        }
        let source = source.ok_or_else(|| Error::format("<dimacs>", "missing source"))?;
        let sink = sink.ok_or_else(|| Error::format("<dimacs>", "missing sink"))?;
        if source >= nodes || sink >= nodes || arcs.iter().any(|a| a.from >= nodes || a.to >= nodes) {
            return Err(Error::format("<dimacs>", "node id exceeds node count"));
        }
        Ok(Self {
            nodes,
            source,
            sink,
            arcs,
        })
    }
}

/// The assembled graph for a [`Problem`].
#[derive(Debug, Clone)]
pub struct GraphSpec {
    pub layout: NodeLayout,
    pub network: FlowNetwork,
    /// Capacity standing in for +infinity.
    pub sentinel: u64,
    pub scale: CapacityScale,
    /// Per-surface constant subtracted from the data costs before building.
    pub data_shifts: Vec<f64>,
}

impl GraphSpec {
    pub fn node(&self, surface: usize, column: usize, level: usize) -> usize {
        self.layout.node(surface, column, level)
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.network.arcs
    }

    /// Energy offset removed by cost normalization: sum of shift times columns.
    pub fn energy_offset(&self) -> f64 {
        self.data_shifts.iter().sum::<f64>() * self.layout.columns as f64
    }
}

/// `g(k1, k2)` for arcs from column `a` (mapping `la`) to column `b`
/// (mapping `lb`), before clamping. `k2 == Z` is the arc to the sink; terms
/// touching `L_a(-1)` or `L_b(Z)` vanish.
pub fn inter_column_weight(psi: &ConvexPenalty, la: &[f64], lb: &[f64], k1: usize, k2: usize) -> Result<f64> {
    let z = la.len();
    if lb.len() != z {
        return Err(Error::IndexOutOfRange(format!(
            "column mappings differ in length: {} vs {}",
            z,
            lb.len()
        )));
    }
    if k1 >= z || k2 == 0 || k2 > z {
        return Err(Error::IndexOutOfRange(format!(
            "need 0 <= k1 < {z} and 1 <= k2 <= {z}, got k1={k1}, k2={k2}"
        )));
    }
    // h(i, j) = f(L_a(i), L_b(j)) with the out-of-range terms set to zero.
    let h = |i: Option<usize>, j: usize| -> f64 {
        match i {
            Some(i) if j < z => eval_f(psi, la[i], lb[j]),
            _ => 0.0,
        }
    };
    let prev = k1.checked_sub(1);
    Ok(h(Some(k1), k2 - 1) - h(prev, k2 - 1) - h(Some(k1), k2) + h(prev, k2))
}

/// Data arcs and monotonicity arcs for one column of one surface.
///
/// `costs[z]` is the (already nonnegative) cost of the surface passing through
/// level `z`.
pub fn build_intra_column_arcs(
    costs: &[f64],
    layout: &NodeLayout,
    surface: usize,
    column: usize,
) -> Result<Vec<WeightedArc>> {
    if costs.is_empty() {
        return Err(Error::IndexOutOfRange("column has no levels".into()));
    }
    if let Some((level, &value)) = costs.iter().enumerate().find(|(_, c)| !(**c >= 0.0)) {
        return Err(Error::NegativeDataCost { level, value });
    }
    let n = |z| Endpoint::Node(layout.node(surface, column, z));
    let top = costs.len() - 1;
    let mut arcs = Vec::with_capacity(2 * costs.len() + 1);
    arcs.push(WeightedArc::infinite(Endpoint::Source, n(0), ArcClass::Anchor));
    for z in 1..costs.len() {
        arcs.push(WeightedArc::infinite(n(z), n(z - 1), ArcClass::Monotonicity));
        arcs.push(WeightedArc::finite(n(z - 1), n(z), costs[z - 1], ArcClass::Data));
    }
    arcs.push(WeightedArc::finite(n(top), Endpoint::Sink, costs[top], ArcClass::Data));
    Ok(arcs)
}

fn push_directional_arcs(
    psi: &ConvexPenalty,
    from_map: &[f64],
    to_map: &[f64],
    from_node: impl Fn(usize) -> Endpoint,
    to_node: impl Fn(usize) -> Endpoint,
    arcs: &mut Vec<WeightedArc>,
) -> Result<()> {
    let z = from_map.len();
    for k1 in 0..z {
        for k2 in 1..=z {
            let w = inter_column_weight(psi, from_map, to_map, k1, k2)?.max(0.0);
            if w > 0.0 {
                let to = if k2 == z { Endpoint::Sink } else { to_node(k2) };
                arcs.push(WeightedArc::finite(from_node(k1), to, w, ArcClass::Smoothness));
            }
        }
    }
    Ok(())
}

/// Smoothness arcs between neighboring columns `a` and `b` of one surface, in
/// both directions. Zero-weight arcs are omitted.
pub fn build_inter_column_arcs(
    psi: &ConvexPenalty,
    la: &[f64],
    lb: &[f64],
    layout: &NodeLayout,
    surface: usize,
    (a, b): (usize, usize),
) -> Result<Vec<WeightedArc>> {
    let na = |k| Endpoint::Node(layout.node(surface, a, k));
    let nb = |k| Endpoint::Node(layout.node(surface, b, k));
    let mut arcs = Vec::new();
    push_directional_arcs(psi, la, lb, na, nb, &mut arcs)?;
    push_directional_arcs(psi, lb, la, nb, na, &mut arcs)?;
    Ok(arcs)
}

/// Separation arcs from surface `lower` to surface `lower + 1` in one column.
///
/// Level `z` of the lower surface links to the first level `z'` of the upper
/// surface with `L(z') - L(z) >= gap`, or to the sink if no such level exists.
pub fn build_inter_surface_arcs(
    positions: &[f64],
    gap: f64,
    layout: &NodeLayout,
    lower: usize,
    column: usize,
) -> Vec<WeightedArc> {
    let mut arcs = Vec::with_capacity(positions.len());
    let mut target = 0;
    for (z, &lz) in positions.iter().enumerate() {
        while target < positions.len() && positions[target] - lz < gap {
            target += 1;
        }
        let from = Endpoint::Node(layout.node(lower, column, z));
        let to = if target < positions.len() {
            Endpoint::Node(layout.node(lower + 1, column, target))
        } else {
            Endpoint::Sink
        };
        arcs.push(WeightedArc::infinite(from, to, ArcClass::Separation));
    }
    arcs
}

/// Builds the full graph: all subgraphs, all three arc classes, integer
/// capacities and the sentinel.
pub fn assemble_graph(problem: &Problem, scale: CapacityScale) -> Result<GraphSpec> {
    let layout = NodeLayout {
        surfaces: problem.surfaces(),
        columns: problem.columns(),
        levels: problem.levels(),
    };
    let normalized: Vec<_> = problem.costs().iter().map(normalize_cost).collect();
    let data_shifts = normalized.iter().map(|(_, s)| *s).collect();
    let ny = problem.dims()[1];

    let mut groups: Vec<Result<Vec<WeightedArc>>> = Vec::new();
    for (i, (costs, _)) in normalized.iter().enumerate() {
        groups.par_extend((0..layout.columns).into_par_iter().map(|a| {
            build_intra_column_arcs(costs.column(a / ny, a % ny), &layout, i, a)
        }));
    }
    let pairs = problem.neighbor_pairs();
    for (i, psi) in problem.penalties().iter().enumerate() {
        if psi.weight() == 0.0 {
            continue;
        }
        groups.par_extend(pairs.par_iter().map(|&(a, b)| {
            build_inter_column_arcs(
                psi,
                problem.mapping(a).positions(),
                problem.mapping(b).positions(),
                &layout,
                i,
                (a, b),
            )
        }));
    }
    for (i, &gap) in problem.separation().gaps().iter().enumerate() {
        groups.par_extend((0..layout.columns).into_par_iter().map(|a| {
            Ok(build_inter_surface_arcs(problem.mapping(a).positions(), gap, &layout, i, a))
        }));
    }

    let id = |e: Endpoint| match e {
        Endpoint::Source => layout.source(),
        Endpoint::Sink => layout.sink(),
        Endpoint::Node(n) => n,
    };
    let mut finite_sum: u128 = 0;
    let mut staged = Vec::new();
    for group in groups {
        for arc in group? {
            let capacity = match arc.weight {
                Weight::Finite(w) => {
                    let c = quantize_capacity(w, scale)?;
                    if c == 0 && arc.class == ArcClass::Smoothness {
                        continue;
                    }
                    finite_sum += c as u128;
                    Some(c)
                }
                Weight::Infinite => None,
            };
            staged.push((id(arc.from), id(arc.to), capacity));
        }
    }
    let sentinel = finite_sum + 1;
    if sentinel > u64::MAX as u128 {
        return Err(Error::CapacityOverflow(format!(
            "finite capacities sum to {finite_sum} at scale {}; lower the scale",
            scale.get()
        )));
    }
    let sentinel = sentinel as u64;
    let arcs = staged
        .into_iter()
        .map(|(from, to, c)| Arc {
            from,
            to,
            capacity: c.unwrap_or(sentinel),
        })
        .collect();
    Ok(GraphSpec {
        layout,
        network: FlowNetwork {
            nodes: layout.interior_nodes() + 2,
            source: layout.source(),
            sink: layout.sink(),
            arcs,
        },
        sentinel,
        scale,
        data_shifts,
    })
}
