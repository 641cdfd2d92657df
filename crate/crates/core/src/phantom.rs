//! Synthetic layered volumes with exact ground-truth surfaces.
//!
//! Voxel `k` of a column covers `[k - 0.5, k + 0.5)` along z. Its intensity is
//! the overlap-weighted mean of the layers passing through it, so boundary
//! voxels blend neighboring layers (a 1-D partial-volume model).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume;

/// Analytic height field `z(x, y)` in voxel units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SurfaceFn {
    /// `z = offset + slope_x * x + slope_y * y`
    Plane {
        offset: f64,
        #[serde(default)]
        slope_x: f64,
        #[serde(default)]
        slope_y: f64,
    },
    /// `z = offset + amplitude * sin(2 pi (x / wavelength_x + y / wavelength_y) + phase)`;
    /// a zero wavelength drops that axis.
    Sinusoid {
        offset: f64,
        amplitude: f64,
        #[serde(default)]
        wavelength_x: f64,
        #[serde(default)]
        wavelength_y: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl SurfaceFn {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            SurfaceFn::Plane {
                offset,
                slope_x,
                slope_y,
            } => offset + slope_x * x + slope_y * y,
            SurfaceFn::Sinusoid {
                offset,
                amplitude,
                wavelength_x,
                wavelength_y,
                phase,
            } => {
                let fx = if wavelength_x != 0.0 { x / wavelength_x } else { 0.0 };
                let fy = if wavelength_y != 0.0 { y / wavelength_y } else { 0.0 };
                offset + amplitude * (std::f64::consts::TAU * (fx + fy) + phase).sin()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    #[serde(default = "unit_spacing")]
    pub spacing: [f64; 3],
    /// Surfaces from bottom (low z) to top.
    pub surfaces: Vec<SurfaceFn>,
    /// One intensity per layer: below the first surface, between each pair,
    /// above the last. `surfaces.len() + 1` entries.
    pub intensities: Vec<f64>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn unit_spacing() -> [f64; 3] {
    [1.0; 3]
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub volume: Volume,
    /// `truth[i][a]`: height of surface `i` at the center of column `a` (x-major).
    pub truth: Vec<Vec<f64>>,
}

/// Fraction of `[lo, hi)` covered by `[a, b)`.
fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    ((hi.min(b) - lo.max(a)).max(0.0)) / (hi - lo)
}

/// Partial-volume intensities of one column given its surface heights.
pub fn render_column(heights: &[f64], intensities: &[f64], levels: usize) -> Vec<f64> {
    (0..levels)
        .map(|k| {
            let lo = k as f64 - 0.5;
            let hi = k as f64 + 0.5;
            let mut below = f64::NEG_INFINITY;
            let mut v = 0.0;
            for (layer, &intensity) in intensities.iter().enumerate() {
                let above = heights.get(layer).copied().unwrap_or(f64::INFINITY);
                v += overlap(lo, hi, below, above) * intensity;
                below = above;
            }
            v
        })
        .collect()
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let [nx, ny, nz] = spec.dims;
    if spec.dims.contains(&0) {
        return Err(Error::InvalidVolume(format!("dims must be positive, got {:?}", spec.dims)));
    }
    if spec.intensities.len() != spec.surfaces.len() + 1 {
        return Err(Error::ConfigInvalid(format!(
            "{} surfaces need {} layer intensities, got {}",
            spec.surfaces.len(),
            spec.surfaces.len() + 1,
            spec.intensities.len()
        )));
    }
    if !(spec.noise_sigma >= 0.0) || !spec.noise_sigma.is_finite() {
        return Err(Error::ConfigInvalid(format!("noise sigma must be >= 0, got {}", spec.noise_sigma)));
    }
    let mut truth = vec![Vec::with_capacity(nx * ny); spec.surfaces.len()];
    let mut data = Vec::with_capacity(nx * ny * nz);
    let mut heights = vec![0.0; spec.surfaces.len()];
    for x in 0..nx {
        for y in 0..ny {
            for (i, s) in spec.surfaces.iter().enumerate() {
                heights[i] = s.eval(x as f64, y as f64);
                if !heights[i].is_finite() {
                    return Err(Error::ConfigInvalid(format!("surface {i} is not finite at ({x}, {y})")));
                }
                truth[i].push(heights[i]);
            }
            if let Some(i) = heights.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::SurfacesOutOfOrder {
                    x,
                    y,
                    lower: i,
                    upper: i + 1,
                });
            }
            data.extend(render_column(&heights, &spec.intensities, nz));
        }
    }
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for v in &mut data {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(Phantom {
        volume: Volume::new(spec.dims, spec.spacing, data)?,
        truth,
    })
}

/// Block-mean pooling by integer factors; trailing partial blocks are dropped.
pub fn downsample(v: &Volume, factors: [usize; 3]) -> Result<Volume> {
    let dims = v.dims();
    for k in 0..3 {
        if factors[k] == 0 {
            return Err(Error::ConfigInvalid("downsampling factors must be >= 1".into()));
        }
        if factors[k] > dims[k] {
            return Err(Error::FactorExceedsDim {
                factor: factors[k],
                dim: dims[k],
            });
        }
    }
    let out = [0, 1, 2].map(|k| dims[k] / factors[k]);
    let spacing = [0, 1, 2].map(|k| v.spacing()[k] * factors[k] as f64);
    let norm = (factors[0] * factors[1] * factors[2]) as f64;
    Volume::from_fn(out, spacing, |x, y, z| {
        let mut acc = 0.0;
        for i in 0..factors[0] {
            for j in 0..factors[1] {
                for k in 0..factors[2] {
                    acc += v.get(x * factors[0] + i, y * factors[1] + j, z * factors[2] + k);
                }
            }
        }
        acc / norm
    })
}

/// Maps a coordinate on the fine grid to the grid downsampled by `factor`
/// along the same axis (block `k` has its center at fine `k * f + (f - 1) / 2`).
pub fn to_downsampled_coordinate(z: f64, factor: usize) -> f64 {
    let f = factor as f64;
    (z - (f - 1.0) / 2.0) / f
}
