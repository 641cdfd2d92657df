//! Exhaustive reference minimizer for small instances.
//!
//! Evaluates the energy term by term straight from the problem definition and
//! enumerates every labeling. It shares nothing with the graph construction
//! beyond the penalty evaluation, so it can certify the graph solution.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{Labeling, Problem};

/// Largest number of labelings [`brute_force_minimize`] will enumerate.
pub const MAX_LABELINGS: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "status", content = "value")]
pub enum Energy {
    Finite(f64),
    /// A separation constraint is violated.
    Infeasible,
}

impl Energy {
    pub fn finite(self) -> Option<f64> {
        match self {
            Energy::Finite(e) => Some(e),
            Energy::Infeasible => None,
        }
    }
}

fn check_labels(problem: &Problem, labeling: &Labeling) -> Result<()> {
    if labeling.len() != problem.surfaces() || labeling.iter().any(|s| s.len() != problem.columns()) {
        return Err(Error::InvalidProblem(format!(
            "labeling must be {} surfaces x {} columns",
            problem.surfaces(),
            problem.columns()
        )));
    }
    for (surface, labels) in labeling.iter().enumerate() {
        if let Some((column, &label)) = labels.iter().enumerate().find(|(_, &k)| k >= problem.levels()) {
            return Err(Error::LabelOutOfRange {
                surface,
                column,
                label,
            });
        }
    }
    Ok(())
}

/// True iff every column keeps each pair of consecutive surfaces at least the
/// required gap apart.
pub fn is_feasible(problem: &Problem, labeling: &Labeling) -> bool {
    (0..problem.surfaces().saturating_sub(1)).all(|i| {
        let gap = problem.separation().gap(i);
        (0..problem.columns()).all(|a| {
            let m = problem.mapping(a);
            m.at(labeling[i + 1][a]) - m.at(labeling[i][a]) >= gap
        })
    })
}

/// Data terms plus smoothness over the 4-neighborhood plus the hard
/// separation term.
pub fn energy(problem: &Problem, labeling: &Labeling) -> Result<Energy> {
    check_labels(problem, labeling)?;
    Ok(energy_unchecked(problem, labeling, &problem.neighbor_pairs()))
}

fn energy_unchecked(problem: &Problem, labeling: &Labeling, pairs: &[(usize, usize)]) -> Energy {
    if !is_feasible(problem, labeling) {
        return Energy::Infeasible;
    }
    let mut total = 0.0;
    for (i, labels) in labeling.iter().enumerate() {
        for (a, &k) in labels.iter().enumerate() {
            total += problem.column_costs(i, a)[k];
        }
        let psi = &problem.penalties()[i];
        for &(a, b) in pairs {
            total += psi.eval(problem.mapping(a).at(labels[a]) - problem.mapping(b).at(labels[b]));
        }
    }
    Energy::Finite(total)
}

/// Enumerates all labelings in lexicographic order (surface-major, then
/// column) and returns the first one of minimum energy.
pub fn brute_force_minimize(problem: &Problem) -> Result<(Labeling, f64)> {
    let slots = problem.surfaces() * problem.columns();
    let z = problem.levels();
    let count = (z as f64).powi(slots as i32);
    if count > MAX_LABELINGS {
        return Err(Error::SearchSpaceTooLarge(count));
    }
    let pairs = problem.neighbor_pairs();
    let cols = problem.columns();
    let mut flat = vec![0usize; slots];
    let mut labeling: Labeling = vec![vec![0; cols]; problem.surfaces()];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        for (s, &k) in flat.iter().enumerate() {
            labeling[s / cols][s % cols] = k;
        }
        if let Energy::Finite(e) = energy_unchecked(problem, &labeling, &pairs) {
            if best.as_ref().is_none_or(|(_, b)| e < *b) {
                best = Some((flat.clone(), e));
            }
        }
        // odometer increment, last slot fastest
        let mut pos = slots;
        loop {
            if pos == 0 {
                let (flat, e) = best.ok_or(Error::Infeasible)?;
                let labels = flat.chunks(cols).map(<[usize]>::to_vec).collect();
                return Ok((labels, e));
            }
            pos -= 1;
            flat[pos] += 1;
            if flat[pos] < z {
                break;
            }
            flat[pos] = 0;
        }
    }
}
