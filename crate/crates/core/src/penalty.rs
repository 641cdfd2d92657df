//! The convex smoothness penalty family and the one-sided operator built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a penalty before weighting. All shapes are even functions of the
/// position difference with `psi(0) = 0`, convex, and nondecreasing in `|d|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PenaltyShape {
    /// `|d|`
    Linear,
    /// `d^2`
    Quadratic,
    /// Integral of a nondecreasing step slope: `slopes[0]` on `[0, breakpoints[0])`,
    /// `slopes[1]` up to `breakpoints[1]`, and so on.
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPenalty", into = "RawPenalty")]
pub struct ConvexPenalty {
    weight: f64,
    shape: PenaltyShape,
}

#[derive(Serialize, Deserialize)]
struct RawPenalty {
    weight: f64,
    #[serde(flatten)]
    shape: PenaltyShape,
}

impl TryFrom<RawPenalty> for ConvexPenalty {
    type Error = Error;
    fn try_from(raw: RawPenalty) -> Result<Self> {
        ConvexPenalty::new(raw.weight, raw.shape)
    }
}

impl From<ConvexPenalty> for RawPenalty {
    fn from(p: ConvexPenalty) -> Self {
        RawPenalty {
            weight: p.weight,
            shape: p.shape,
        }
    }
}

impl ConvexPenalty {
    pub fn new(weight: f64, shape: PenaltyShape) -> Result<Self> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidPenalty(format!("weight must be finite and >= 0, got {weight}")));
        }
        if let PenaltyShape::PiecewiseLinear {
            breakpoints,
            slopes,
        } = &shape
        {
            if slopes.len() != breakpoints.len() + 1 {
                return Err(Error::InvalidPenalty(format!(
                    "{} breakpoints need {} slopes, got {}",
                    breakpoints.len(),
                    breakpoints.len() + 1,
                    slopes.len()
                )));
            }
            if breakpoints.iter().chain(slopes).any(|v| !v.is_finite()) {
                return Err(Error::InvalidPenalty("non-finite breakpoint or slope".into()));
            }
            if breakpoints.first().is_some_and(|&b| b <= 0.0)
                || breakpoints.windows(2).any(|w| w[1] <= w[0])
            {
                return Err(Error::InvalidPenalty(
                    "breakpoints must be positive and strictly increasing".into(),
                ));
            }
            if slopes[0] < 0.0 {
                return Err(Error::InvalidPenalty(
                    "first slope must be >= 0 (penalty nondecreasing in |d|)".into(),
                ));
            }
            if let Some(i) = slopes.windows(2).position(|w| w[1] < w[0]) {
                return Err(Error::InvalidPenalty(format!(
                    "slopes must be nondecreasing for convexity (slope {} < slope {})",
                    i + 1,
                    i
                )));
            }
        }
        Ok(Self { weight, shape })
    }

    pub fn linear(weight: f64) -> Result<Self> {
        Self::new(weight, PenaltyShape::Linear)
    }

    pub fn quadratic(weight: f64) -> Result<Self> {
        Self::new(weight, PenaltyShape::Quadratic)
    }

    pub fn piecewise_linear(weight: f64, breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        Self::new(
            weight,
            PenaltyShape::PiecewiseLinear {
                breakpoints,
                slopes,
            },
        )
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn shape(&self) -> &PenaltyShape {
        &self.shape
    }

    /// Same shape, weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.weight * factor, self.shape.clone())
    }

    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        eval_penalty(self, d)
    }
}

/// `psi(d)`.
pub fn eval_penalty(psi: &ConvexPenalty, d: f64) -> f64 {
    let d = d.abs();
    let raw = match &psi.shape {
        PenaltyShape::Linear => d,
        PenaltyShape::Quadratic => d * d,
        PenaltyShape::PiecewiseLinear {
            breakpoints,
            slopes,
        } => {
            let mut acc = 0.0;
            let mut start = 0.0;
            for (&bp, &slope) in breakpoints.iter().zip(slopes) {
                if d <= bp {
                    return psi.weight * (acc + slope * (d - start));
                }
                acc += slope * (bp - start);
                start = bp;
            }
            acc + slopes[slopes.len() - 1] * (d - start)
        }
    };
    psi.weight * raw
}

/// One-sided penalty: 0 if `r1 < r2`, otherwise `psi(r1 - r2)`.
#[inline]
pub fn eval_f(psi: &ConvexPenalty, r1: f64, r2: f64) -> f64 {
    if r1 < r2 {
        0.0
    } else {
        eval_penalty(psi, r1 - r2)
    }
}
