//! Gradient vector flow and the voxel-center displacement it induces.
//!
//! The flow field is normalized so the largest displacement is half a voxel,
//! which keeps every shifted center inside its own voxel. The z-component of
//! the shift defines each column's sample positions; the full 3-D shift is
//! used to resample the cost volumes at the moved centers.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mapping::{validate_mapping, ColumnMapping};
use crate::volume::{Volume, VolumeHeader};

/// A 3-vector per voxel, same layout as [`Volume`].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    dims: [usize; 3],
    data: Vec<[f64; 3]>,
}

impl VectorField {
    pub fn new(dims: [usize; 3], data: Vec<[f64; 3]>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::DimMismatch(format!("{} vectors for dims {dims:?}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFiniteValue {
                index: i,
                value: f64::NAN,
            });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![[0.0; 3]; dims.iter().product()],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|v| norm(*v)).fold(0.0, f64::max)
    }

    /// One component as a scalar volume.
    pub fn component(&self, axis: usize, spacing: [f64; 3]) -> Result<Volume> {
        Volume::new(self.dims, spacing, self.data.iter().map(|v| v[axis]).collect())
    }

    fn component_path(base: &Path, axis: usize) -> PathBuf {
        let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("gvf");
        base.with_file_name(format!("{stem}_{}.raw", ["x", "y", "z"][axis]))
    }

    /// Writes `<base>_x.raw`, `<base>_y.raw`, `<base>_z.raw`, each with a sidecar
    /// tagged `"role":"gvf"` and its component.
    pub fn write(&self, base: impl AsRef<Path>, spacing: [f64; 3]) -> Result<Vec<PathBuf>> {
        let base = base.as_ref();
        (0..3)
            .map(|axis| {
                let path = Self::component_path(base, axis);
                let vol = self.component(axis, spacing)?;
                let header = VolumeHeader {
                    role: Some("gvf".into()),
                    component: Some(["x", "y", "z"][axis].into()),
                    ..vol.header()
                };
                vol.write_with_header(&path, &header)?;
                Ok(path)
            })
            .collect()
    }

    pub fn read(base: impl AsRef<Path>) -> Result<Self> {
        let base = base.as_ref();
        let mut comps = Vec::with_capacity(3);
        for axis in 0..3 {
            let path = Self::component_path(base, axis);
            let (vol, header) = Volume::read_with_header(&path)?;
            if header.role.as_deref() != Some("gvf") || header.component.as_deref() != Some(["x", "y", "z"][axis]) {
                return Err(Error::format(&path, "sidecar is not a gvf component"));
            }
            comps.push(vol);
        }
        if comps.iter().any(|c| c.dims() != comps[0].dims()) {
            return Err(Error::DimMismatch("gvf components differ in dims".into()));
        }
        let data = (0..comps[0].len())
            .map(|i| [comps[0].data()[i], comps[1].data()[i], comps[2].data()[i]])
            .collect();
        Self::new(comps[0].dims(), data)
    }
}

#[inline]
fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
fn coords(idx: usize, dims: [usize; 3]) -> [usize; 3] {
    [idx / (dims[1] * dims[2]), (idx / dims[2]) % dims[1], idx % dims[2]]
}

/// Central-difference gradient in voxel units, borders replicated.
pub fn gradient(v: &Volume) -> VectorField {
    let dims = v.dims();
    let data = (0..v.len())
        .into_par_iter()
        .map(|idx| {
            let [x, y, z] = coords(idx, dims).map(|c| c as isize);
            [
                0.5 * (v.get_clamped(x + 1, y, z) - v.get_clamped(x - 1, y, z)),
                0.5 * (v.get_clamped(x, y + 1, z) - v.get_clamped(x, y - 1, z)),
                0.5 * (v.get_clamped(x, y, z + 1) - v.get_clamped(x, y, z - 1)),
            ]
        })
        .collect();
    VectorField { dims, data }
}

/// Gradient magnitude scaled to `[0, 1]`; the usual input to
/// [`compute_gvf`], whose diffused gradient then points toward edges.
pub fn edge_map(v: &Volume) -> Volume {
    let g = gradient(v);
    let mag: Vec<f64> = g.data.iter().map(|d| norm(*d)).collect();
    let max = mag.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return v.with_data(vec![0.0; mag.len()]);
    }
    v.with_data(mag.into_iter().map(|m| m / max).collect())
}

/// Largest stable explicit step for the 3-D diffusion term on a unit grid.
pub fn gvf_step_bound(mu: f64) -> f64 {
    1.0 / (6.0 * mu)
}

/// Gradient vector flow of `v`: diffuses `grad v` by iterating
/// `u <- u + dt * (mu * lap(u) - (u - grad v) * |grad v|^2)`.
///
/// The data term is applied implicitly, so only the diffusion term limits
/// `dt`. With `dt = None` the step is `min(1, 1 / (6 mu))`; a larger forced
/// step is rejected.
pub fn compute_gvf(v: &Volume, mu: f64, iterations: usize, dt: Option<f64>) -> Result<VectorField> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::ConfigInvalid(format!("gvf mu must be > 0, got {mu}")));
    }
    let bound = gvf_step_bound(mu);
    let dt = match dt {
        Some(dt) if !(dt > 0.0) || dt > bound => return Err(Error::UnstableStep { dt, bound }),
        Some(dt) => dt,
        None => bound.min(1.0),
    };
    let grad = gradient(v);
    let weight: Vec<f64> = grad.data.iter().map(|g| g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).collect();
    let dims = v.dims();
    let [nx, ny, nz] = dims.map(|d| d as isize);
    let mut u = grad.data.clone();
    let mut next = vec![[0.0; 3]; u.len()];
    for _ in 0..iterations {
        next.par_iter_mut().enumerate().for_each(|(idx, out)| {
            let [x, y, z] = coords(idx, dims).map(|c| c as isize);
            let at = |x: isize, y: isize, z: isize| {
                let x = x.clamp(0, nx - 1);
                let y = y.clamp(0, ny - 1);
                let z = z.clamp(0, nz - 1);
                u[((x * ny + y) * nz + z) as usize]
            };
            let neighbors = [
                at(x - 1, y, z),
                at(x + 1, y, z),
                at(x, y - 1, z),
                at(x, y + 1, z),
                at(x, y, z - 1),
                at(x, y, z + 1),
            ];
            let c = u[idx];
            let b = weight[idx];
            let g = grad.data[idx];
            for k in 0..3 {
                let lap = neighbors.iter().map(|n| n[k]).sum::<f64>() - 6.0 * c[k];
                out[k] = (c[k] + dt * (mu * lap + b * g[k])) / (1.0 + dt * b);
            }
        });
        std::mem::swap(&mut u, &mut next);
    }
    VectorField::new(dims, u)
}

/// Displacements of every voxel center, in mapping units.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedCenters {
    dims: [usize; 3],
    /// Voxel size along z in mapping units.
    delta: f64,
    /// Normalization factor applied to the field (0 for a zero field).
    lambda: f64,
    shifts: Vec<[f64; 3]>,
}

impl ShiftedCenters {
    /// Wraps explicit shifts, e.g. from a stored field.
    pub fn from_shifts(dims: [usize; 3], delta: f64, shifts: Vec<[f64; 3]>) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::ConfigInvalid(format!("voxel size must be > 0, got {delta}")));
        }
        let field = VectorField::new(dims, shifts)?;
        Ok(Self {
            dims,
            delta,
            lambda: 1.0,
            shifts: field.data,
        })
    }

    /// No displacement: the regular grid.
    pub fn identity(dims: [usize; 3], delta: f64) -> Self {
        Self {
            dims,
            delta,
            lambda: 0.0,
            shifts: vec![[0.0; 3]; dims.iter().product()],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn shifts(&self) -> &[[f64; 3]] {
        &self.shifts
    }

    pub fn max_shift(&self) -> f64 {
        self.shifts.iter().map(|s| norm(*s)).fold(0.0, f64::max)
    }

    /// Shifted center of voxel `idx` in voxel index coordinates.
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let c = coords(idx, self.dims);
        let s = self.shifts[idx];
        [0, 1, 2].map(|k| c[k] as f64 + s[k] / self.delta)
    }
}

/// Scales the field so its largest vector has length `delta / 2` and returns
/// the resulting center displacements.
pub fn normalize_and_shift(f: &VectorField, delta: f64) -> Result<ShiftedCenters> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::ConfigInvalid(format!("voxel size must be > 0, got {delta}")));
    }
    let max = f.max_norm();
    if max == 0.0 {
        return Ok(ShiftedCenters::identity(f.dims, delta));
    }
    let lambda = delta / (2.0 * max);
    Ok(ShiftedCenters {
        dims: f.dims,
        delta,
        lambda,
        shifts: f.data.iter().map(|v| v.map(|c| lambda * c)).collect(),
    })
}

/// Column mappings `L(k) = k * delta + shift_z(x, y, k)`, x-major.
pub fn mappings_from_shifts(centers: &ShiftedCenters) -> Result<Vec<ColumnMapping>> {
    let [nx, ny, nz] = centers.dims;
    let mut out = Vec::with_capacity(nx * ny);
    for x in 0..nx {
        for y in 0..ny {
            let start = (x * ny + y) * nz;
            let positions: Vec<f64> = (0..nz)
                .map(|k| k as f64 * centers.delta + centers.shifts[start + k][2])
                .collect();
            validate_mapping(&positions)?;
            out.push(ColumnMapping::new(x, y, positions)?);
        }
    }
    Ok(out)
}

/// Trilinear sample of `v` at a continuous index position, clamped to the grid.
pub fn sample_trilinear(v: &Volume, p: [f64; 3]) -> f64 {
    let dims = v.dims();
    let mut base = [0isize; 3];
    let mut frac = [0.0; 3];
    for k in 0..3 {
        let c = p[k].clamp(0.0, (dims[k] - 1) as f64);
        let f = c.floor();
        base[k] = f as isize;
        frac[k] = c - f;
    }
    let mut acc = 0.0;
    for corner in 0..8 {
        let mut w = 1.0;
        let mut q = base;
        for k in 0..3 {
            if corner >> k & 1 == 1 {
                q[k] += 1;
                w *= frac[k];
            } else {
                w *= 1.0 - frac[k];
            }
        }
        if w != 0.0 {
            acc += w * v.get_clamped(q[0], q[1], q[2]);
        }
    }
    acc
}

/// Resamples `cost` at the shifted centers.
pub fn deform_cost_volume(cost: &Volume, centers: &ShiftedCenters) -> Result<Volume> {
    if cost.dims() != centers.dims {
        return Err(Error::DimMismatch(format!(
            "cost {:?} vs shifts {:?}",
            cost.dims(),
            centers.dims
        )));
    }
    let data = (0..cost.len())
        .into_par_iter()
        .map(|idx| sample_trilinear(cost, centers.center(idx)))
        .collect();
    Ok(cost.with_data(data))
}
