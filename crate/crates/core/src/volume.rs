//! Dense 3-D scalar volumes and their on-disk format.
//!
//! Voxels are stored z-fastest, then y, then x. On disk a volume is a raw
//! little-endian `f32` file plus a JSON sidecar next to it carrying
//! `{"dims":[X,Y,Z],"spacing":[sx,sy,sz]}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    /// Free-form role tag, used by vector field components.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<String>,
}

impl Volume {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidVolume(format!("dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidVolume(format!(
                "spacing must be positive and finite, got {spacing:?}"
            )));
        }
        let len = dims[0] * dims[1] * dims[2];
        if data.len() != len {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match dims {dims:?} ({len})",
                data.len()
            )));
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index, value });
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    pub fn filled(dims: [usize; 3], spacing: [f64; 3], value: f64) -> Result<Self> {
        Self::new(dims, spacing, vec![value; dims[0] * dims[1] * dims[2]])
    }

    /// Builds a volume by evaluating `f(x, y, z)` at every voxel.
    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for x in 0..dims[0] {
            for y in 0..dims[1] {
                for z in 0..dims[2] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(dims, spacing, data)
    }

    /// Same dims and spacing as `self`, new contents. Contents must be finite.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self {
            dims: self.dims,
            spacing: self.spacing,
            data,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn columns(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + z
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(x, y, z)]
    }

    /// Clamped access: out-of-range coordinates replicate the border.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, z: isize) -> f64 {
        let c = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
        self.get(c(x, self.dims[0]), c(y, self.dims[1]), c(z, self.dims[2]))
    }

    /// The samples of column `(x, y)` in increasing z.
    pub fn column(&self, x: usize, y: usize) -> &[f64] {
        let start = self.index(x, y, 0);
        &self.data[start..start + self.dims[2]]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.dims, self.spacing, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn header(&self) -> VolumeHeader {
        VolumeHeader {
            dims: self.dims,
            spacing: self.spacing,
            role: None,
            component: None,
        }
    }

    /// Writes the raw `f32` payload to `path` and the sidecar next to it.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_with_header(path.as_ref(), &self.header())
    }

    pub(crate) fn write_with_header(&self, path: &Path, header: &VolumeHeader) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for &v in &self.data {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let sidecar = sidecar_path(path);
        let json = serde_json::to_string_pretty(header).map_err(|e| Error::format(&sidecar, e))?;
        fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_with_header(path.as_ref()).map(|(v, _)| v)
    }

    pub(crate) fn read_with_header(path: &Path) -> Result<(Self, VolumeHeader)> {
        let sidecar = sidecar_path(path);
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let header: VolumeHeader =
            serde_json::from_str(&text).map_err(|e| Error::format(&sidecar, e))?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let expected = header.dims.iter().product::<usize>() * 4;
        if bytes.len() != expected {
            return Err(Error::format(
                path,
                format!("expected {expected} bytes for dims {:?}, found {}", header.dims, bytes.len()),
            ));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let volume = Self::new(header.dims, header.spacing, data)?;
        Ok((volume, header))
    }
}

/// `foo.raw` -> `foo.json`; a path without extension gets `.json` appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}
