//! Problem instances and segmentation results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{equidistant_mappings, validate_mapping, ColumnMapping};
use crate::penalty::ConvexPenalty;
use crate::volume::Volume;

/// Minimum gaps `d_{j,j+1}` between consecutive surfaces, in mapping units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeparationConstraint(Vec<f64>);

impl SeparationConstraint {
    pub fn new(gaps: Vec<f64>) -> Result<Self> {
        if let Some(g) = gaps.iter().find(|g| !g.is_finite() || **g < 0.0) {
            return Err(Error::InvalidProblem(format!("separation must be finite and >= 0, got {g}")));
        }
        Ok(Self(gaps))
    }

    pub fn none() -> Self {
        Self(Vec::new())
    }

    pub fn gaps(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Gap between surface `i` and `i + 1`.
    pub fn gap(&self, i: usize) -> f64 {
        self.0[i]
    }
}

/// Labels `S_i(a)` indexed `[surface][column]`, columns x-major.
pub type Labeling = Vec<Vec<usize>>;

#[derive(Debug, Clone)]
pub struct Problem {
    costs: Vec<Volume>,
    mappings: Vec<ColumnMapping>,
    penalties: Vec<ConvexPenalty>,
    separation: SeparationConstraint,
}

impl Problem {
    /// `costs[i]` is the data cost volume `D_i`, sample `(x, y, k)` being the
    /// cost of surface `i` passing through `L_a(k)` in column `a = (x, y)`.
    pub fn new(
        costs: Vec<Volume>,
        mappings: Vec<ColumnMapping>,
        penalties: Vec<ConvexPenalty>,
        separation: SeparationConstraint,
    ) -> Result<Self> {
        let Some(first) = costs.first() else {
            return Err(Error::InvalidProblem("at least one surface is required".into()));
        };
        let dims = first.dims();
        if let Some(v) = costs.iter().find(|v| v.dims() != dims) {
            return Err(Error::InvalidProblem(format!(
                "cost volumes disagree on dims: {dims:?} vs {:?}",
                v.dims()
            )));
        }
        let surfaces = costs.len();
        if penalties.len() != surfaces {
            return Err(Error::InvalidProblem(format!(
                "{surfaces} surfaces but {} penalties",
                penalties.len()
            )));
        }
        if separation.len() != surfaces - 1 {
            return Err(Error::InvalidProblem(format!(
                "{surfaces} surfaces need {} separations, got {}",
                surfaces - 1,
                separation.len()
            )));
        }
        if mappings.len() != dims[0] * dims[1] {
            return Err(Error::InvalidProblem(format!(
                "{} mappings for {} columns",
                mappings.len(),
                dims[0] * dims[1]
            )));
        }
        for (a, m) in mappings.iter().enumerate() {
            if (m.x, m.y) != (a / dims[1], a % dims[1]) {
                return Err(Error::InvalidProblem(format!(
                    "mapping {a} is for column ({}, {}), expected ({}, {})",
                    m.x,
                    m.y,
                    a / dims[1],
                    a % dims[1]
                )));
            }
            if m.levels() != dims[2] {
                return Err(Error::InvalidProblem(format!(
                    "mapping for column {a} has {} levels, volume has {}",
                    m.levels(),
                    dims[2]
                )));
            }
            validate_mapping(m.positions())?;
        }
        Ok(Self {
            costs,
            mappings,
            penalties,
            separation,
        })
    }

    /// Same problem on the regular grid `L(k) = k`.
    pub fn equidistant(
        costs: Vec<Volume>,
        penalties: Vec<ConvexPenalty>,
        separation: SeparationConstraint,
    ) -> Result<Self> {
        let dims = costs
            .first()
            .map(Volume::dims)
            .ok_or_else(|| Error::InvalidProblem("at least one surface is required".into()))?;
        Self::new(costs, equidistant_mappings(dims[0], dims[1], dims[2]), penalties, separation)
    }

    pub fn surfaces(&self) -> usize {
        self.costs.len()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.costs[0].dims()
    }

    pub fn columns(&self) -> usize {
        self.costs[0].columns()
    }

    pub fn levels(&self) -> usize {
        self.dims()[2]
    }

    pub fn costs(&self) -> &[Volume] {
        &self.costs
    }

    pub fn mappings(&self) -> &[ColumnMapping] {
        &self.mappings
    }

    pub fn mapping(&self, column: usize) -> &ColumnMapping {
        &self.mappings[column]
    }

    pub fn penalties(&self) -> &[ConvexPenalty] {
        &self.penalties
    }

    pub fn separation(&self) -> &SeparationConstraint {
        &self.separation
    }

    /// Cost samples of surface `i` along column `a`.
    pub fn column_costs(&self, surface: usize, column: usize) -> &[f64] {
        let ny = self.dims()[1];
        self.costs[surface].column(column / ny, column % ny)
    }

    /// 4-neighborhood as unordered pairs `(a, b)` with `a < b`, x-major order.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let [nx, ny, _] = self.dims();
        let mut pairs = Vec::with_capacity(2 * nx * ny);
        for x in 0..nx {
            for y in 0..ny {
                let a = x * ny + y;
                if y + 1 < ny {
                    pairs.push((a, a + 1));
                }
                if x + 1 < nx {
                    pairs.push((a, a + ny));
                }
            }
        }
        pairs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationResult {
    /// `labels[i][a]` = `S_i(a)`.
    pub labels: Labeling,
    /// `positions[i][a]` = `L_a(S_i(a))`.
    pub positions: Vec<Vec<f64>>,
    pub energy: f64,
}

impl SegmentationResult {
    pub fn from_labels(problem: &Problem, labels: Labeling, energy: f64) -> Self {
        let positions = labels
            .iter()
            .map(|surface| {
                surface
                    .iter()
                    .enumerate()
                    .map(|(a, &k)| problem.mapping(a).at(k))
                    .collect()
            })
            .collect();
        Self {
            labels,
            positions,
            energy,
        }
    }

    pub fn surfaces(&self) -> usize {
        self.labels.len()
    }

    /// Count of `(column, surface pair)` where the separation constraint fails.
    pub fn separation_violations(&self, separation: &SeparationConstraint) -> usize {
        self.positions
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                w[0].iter()
                    .zip(&w[1])
                    .filter(|(lo, hi)| *hi - *lo < separation.gap(i))
                    .count()
            })
            .sum()
    }
}
