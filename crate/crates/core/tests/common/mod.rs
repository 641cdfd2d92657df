#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use surfcut::graph::{build_inter_column_arcs, Endpoint, NodeLayout, Weight};
use surfcut::mapping::ColumnMapping;
use surfcut::{ConvexPenalty, Problem, SeparationConstraint, Volume};

/// Strictly increasing positions with gaps in `[0.05, 2.05)`.
pub fn random_positions(rng: &mut ChaCha8Rng, levels: usize) -> Vec<f64> {
    let mut z = rng.random_range(-3.0..3.0);
    (0..levels)
        .map(|_| {
            let here = z;
            z += rng.random_range(0.05..2.05);
            here
        })
        .collect()
}

pub fn random_penalty(rng: &mut ChaCha8Rng) -> ConvexPenalty {
    let w = rng.random_range(0.1..5.0);
    match rng.random_range(0..3) {
        0 => ConvexPenalty::linear(w).unwrap(),
        1 => ConvexPenalty::quadratic(w).unwrap(),
        _ => {
            let b1 = rng.random_range(0.2..2.0);
            let b2 = b1 + rng.random_range(0.2..2.0);
            let s0 = rng.random_range(0.0..1.0);
            let s1 = s0 + rng.random_range(0.0..2.0);
            let s2 = s1 + rng.random_range(0.0..2.0);
            ConvexPenalty::piecewise_linear(w, vec![b1, b2], vec![s0, s1, s2]).unwrap()
        }
    }
}

/// Sum of the smoothness arcs between two columns severed when column `a`
/// keeps levels `0..=k1` and column `b` keeps `0..=k2` on the source side.
pub fn severed_smoothness(psi: &ConvexPenalty, la: &[f64], lb: &[f64], k1: usize, k2: usize) -> f64 {
    let layout = NodeLayout {
        surfaces: 1,
        columns: 2,
        levels: la.len(),
    };
    let labels = [k1, k2];
    let source_side = |e: Endpoint| match e {
        Endpoint::Source => true,
        Endpoint::Sink => false,
        Endpoint::Node(n) => {
            let (_, col, level) = layout.locate(n).unwrap();
            level <= labels[col]
        }
    };
    build_inter_column_arcs(psi, la, lb, &layout, 0, (0, 1))
        .unwrap()
        .iter()
        .filter(|arc| source_side(arc.from) && !source_side(arc.to))
        .map(|arc| match arc.weight {
            Weight::Finite(w) => w,
            Weight::Infinite => f64::INFINITY,
        })
        .sum()
}

pub struct Instance {
    pub problem: Problem,
    pub description: String,
}

/// Random small problem: `ny` columns in a row, `levels` levels, `surfaces`
/// surfaces, integer-ish costs in `[0, 10]`, optional irregular mappings and
/// a gap that keeps at least one labeling feasible.
pub fn random_instance(rng: &mut ChaCha8Rng, max_columns: usize, max_levels: usize, surfaces: usize, irregular: bool) -> Instance {
    let ny = rng.random_range(1..=max_columns);
    let levels = rng.random_range(2..=max_levels);
    let dims = [1, ny, levels];
    let costs: Vec<Volume> = (0..surfaces)
        .map(|_| {
            let data = (0..ny * levels).map(|_| (rng.random_range(0.0..10.0_f64) * 4.0).round() / 4.0).collect();
            Volume::new(dims, [1.0; 3], data).unwrap()
        })
        .collect();
    let mappings: Vec<ColumnMapping> = (0..ny)
        .map(|y| {
            if irregular {
                ColumnMapping::new(0, y, random_positions(rng, levels)).unwrap()
            } else {
                ColumnMapping::equidistant(0, y, levels)
            }
        })
        .collect();
    let penalties: Vec<ConvexPenalty> = (0..surfaces)
        .map(|_| {
            let w = rng.random_range(0.0..4.0);
            if rng.random_bool(0.5) {
                ConvexPenalty::linear(w).unwrap()
            } else {
                ConvexPenalty::quadratic(w).unwrap()
            }
        })
        .collect();
    // largest gap every column can still satisfy between its extremes
    let span = mappings
        .iter()
        .map(|m| m.at(levels - 1) - m.at(0))
        .fold(f64::INFINITY, f64::min);
    let per_gap = span / (surfaces.max(2) - 1) as f64;
    let mut gaps: Vec<f64> = (1..surfaces).map(|_| rng.random_range(0.0..=per_gap)).collect();
    while !mappings.iter().all(|m| stack_fits(m.positions(), &gaps)) {
        gaps.iter_mut().for_each(|g| *g /= 2.0);
    }
    let description = format!("{ny} columns x {levels} levels x {surfaces} surfaces, gaps {gaps:?}");
    let problem = Problem::new(costs, mappings, penalties, SeparationConstraint::new(gaps).unwrap()).unwrap();
    Instance { problem, description }
}

/// Greedy check that surfaces can be stacked in one column with these gaps.
pub fn stack_fits(positions: &[f64], gaps: &[f64]) -> bool {
    let mut level = 0;
    for &gap in gaps {
        match (level..positions.len()).find(|&k| positions[k] - positions[level] >= gap) {
            Some(k) => level = k,
            None => return false,
        }
    }
    true
}
