//! Data-cost volumes: signed edge costs, probability inversion, and the shift
//! that makes costs usable as capacities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume;

/// Which intensity transition along +z should get low cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    DarkToBright,
    BrightToDark,
}

impl std::str::FromStr for Polarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dark-to-bright" => Ok(Polarity::DarkToBright),
            "bright-to-dark" => Ok(Polarity::BrightToDark),
            other => Err(Error::ConfigInvalid(format!("unknown polarity {other}"))),
        }
    }
}

const SMOOTH5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
// Normalized so a unit ramp gives a response of exactly 1.
const DERIV5: [f64; 5] = [-1.0 / 8.0, -2.0 / 8.0, 0.0, 2.0 / 8.0, 1.0 / 8.0];

/// Correlates `v` with a 1-D kernel along one axis, replicating borders.
pub(crate) fn convolve_axis(v: &Volume, kernel: &[f64], axis: usize) -> Volume {
    let [_, ny, nz] = v.dims();
    let half = (kernel.len() / 2) as isize;
    let data: Vec<f64> = (0..v.len())
        .into_par_iter()
        .map(|idx| {
            let z = idx % nz;
            let y = (idx / nz) % ny;
            let x = idx / (nz * ny);
            let mut p = [x as isize, y as isize, z as isize];
            let centre = p[axis];
            let mut acc = 0.0;
            for (j, &k) in kernel.iter().enumerate() {
                p[axis] = centre + j as isize - half;
                acc += k * v.get_clamped(p[0], p[1], p[2]);
            }
            acc
        })
        .collect();
    v.with_data(data)
}

/// Signed z-edge response of the separable 5x5x5 Sobel-type filter:
/// smoothing `[1 4 6 4 1]/16` across x and y, derivative `[-1 -2 0 2 1]/8`
/// along z. Positive where intensity increases with z.
pub fn sobel_z_response(v: &Volume) -> Volume {
    let sx = convolve_axis(v, &SMOOTH5, 0);
    let sxy = convolve_axis(&sx, &SMOOTH5, 1);
    convolve_axis(&sxy, &DERIV5, 2)
}

/// Edge cost shifted so its minimum is 0; low where the chosen transition is
/// strongest.
pub fn gradient_cost(v: &Volume, polarity: Polarity) -> Volume {
    let response = sobel_z_response(v);
    let sign = match polarity {
        Polarity::DarkToBright => -1.0,
        Polarity::BrightToDark => 1.0,
    };
    let raw: Vec<f64> = response.data().iter().map(|r| sign * r).collect();
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    v.with_data(raw.into_iter().map(|c| c - min).collect())
}

/// `(1 - p) * 255`.
pub fn probability_to_cost(p: &Volume) -> Result<Volume> {
    if let Some((index, &value)) = p.data().iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::ProbabilityOutOfRange { index, value });
    }
    Ok(p.with_data(p.data().iter().map(|v| (1.0 - v) * 255.0).collect()))
}

/// Shifts a cost volume so its minimum is exactly 0. Returns the shifted
/// volume and the amount subtracted (the original minimum).
pub fn normalize_cost(c: &Volume) -> (Volume, f64) {
    let shift = c.min();
    if shift == 0.0 {
        return (c.clone(), 0.0);
    }
    (c.with_data(c.data().iter().map(|v| v - shift).collect()), shift)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian smoothing with per-axis sigma in voxels; a zero sigma
/// leaves that axis untouched.
pub fn gaussian_smooth(v: &Volume, sigma: [f64; 3]) -> Result<Volume> {
    if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::ConfigInvalid(format!("gaussian sigma must be >= 0, got {sigma:?}")));
    }
    let mut out = v.clone();
    for (axis, &s) in sigma.iter().enumerate() {
        if s > 0.0 {
            out = convolve_axis(&out, &gaussian_kernel(s), axis);
        }
    }
    Ok(out)
}
