//! Segmentation accuracy measures.

use crate::error::{Error, Result};

/// Unsigned mean surface positioning error: mean over columns of
/// `|auto(a) - reference(a)|`.
pub fn umsp(auto: &[f64], reference: &[f64]) -> Result<f64> {
    if auto.len() != reference.len() || auto.is_empty() {
        return Err(Error::ColumnSetMismatch {
            auto: auto.len(),
            reference: reference.len(),
        });
    }
    Ok(auto.iter().zip(reference).map(|(a, r)| (a - r).abs()).sum::<f64>() / auto.len() as f64)
}

#[inline]
fn dist2(p: [f64; 3], q: [f64; 3]) -> f64 {
    (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)
}

/// Point sets larger than this use the bucketed nearest-neighbor search.
const BRUTE_FORCE_LIMIT: usize = 10_000;

/// Nearest-neighbor distances from every query point to `targets`.
fn nearest_distances(queries: &[[f64; 3]], targets: &[[f64; 3]]) -> Vec<f64> {
    if queries.len().max(targets.len()) < BRUTE_FORCE_LIMIT {
        return queries
            .iter()
            .map(|&p| targets.iter().map(|&q| dist2(p, q)).fold(f64::INFINITY, f64::min).sqrt())
            .collect();
    }
    let grid = BucketGrid::new(targets);
    queries.iter().map(|&p| grid.nearest(p)).collect()
}

/// Uniform grid over a point set for exact nearest-neighbor queries.
struct BucketGrid<'a> {
    points: &'a [[f64; 3]],
    origin: [f64; 3],
    cell: f64,
    shape: [usize; 3],
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> BucketGrid<'a> {
    fn new(points: &'a [[f64; 3]]) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let extent: Vec<f64> = (0..3).map(|k| (hi[k] - lo[k]).max(1e-12)).collect();
        // about two points per cell on average
        let volume: f64 = extent.iter().product();
        let cell = (volume * 2.0 / points.len() as f64).cbrt().max(extent.iter().cloned().fold(0.0, f64::max) / 512.0);
        let shape = [0, 1, 2].map(|k| ((extent[k] / cell).floor() as usize + 1).min(1024));
        let mut grid = Self {
            points,
            origin: lo,
            cell,
            shape,
            starts: Vec::new(),
            order: Vec::new(),
        };
        let cells: Vec<usize> = points.iter().map(|&p| grid.flat(grid.cell_of(p))).collect();
        let n_cells = shape.iter().product::<usize>();
        let mut counts = vec![0usize; n_cells + 1];
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for i in 0..n_cells {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut order = vec![0usize; points.len()];
        for (i, &c) in cells.iter().enumerate() {
            order[fill[c]] = i;
            fill[c] += 1;
        }
        grid.starts = counts;
        grid.order = order;
        grid
    }

    fn cell_of(&self, p: [f64; 3]) -> [isize; 3] {
        [0, 1, 2].map(|k| ((p[k] - self.origin[k]) / self.cell).floor() as isize)
    }

    fn flat(&self, c: [isize; 3]) -> usize {
        let c = [0, 1, 2].map(|k| c[k].clamp(0, self.shape[k] as isize - 1) as usize);
        (c[0] * self.shape[1] + c[1]) * self.shape[2] + c[2]
    }

    fn nearest(&self, p: [f64; 3]) -> f64 {
        let centre = self.cell_of(p);
        let max_ring = *self.shape.iter().max().unwrap() as isize + centre.iter().map(|c| c.abs()).max().unwrap_or(0);
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        let c = [centre[0] + dx, centre[1] + dy, centre[2] + dz];
                        if (0..3).any(|k| c[k] < 0 || c[k] >= self.shape[k] as isize) {
                            continue;
                        }
                        let f = self.flat(c);
                        for &i in &self.order[self.starts[f]..self.starts[f + 1]] {
                            best = best.min(dist2(p, self.points[i]));
                        }
                    }
                }
            }
            // every unvisited cell is at least `ring * cell` away
            if best.is_finite() && best.sqrt() <= ring as f64 * self.cell {
                break;
            }
        }
        best.sqrt()
    }
}

/// Unsigned average symmetric surface distance in physical units. Points are
/// given in voxel coordinates and scaled by `spacing` first.
pub fn uassd(auto: &[[f64; 3]], reference: &[[f64; 3]], spacing: [f64; 3]) -> Result<f64> {
    if auto.is_empty() || reference.is_empty() {
        return Err(Error::EmptySurface);
    }
    let scale = |pts: &[[f64; 3]]| -> Vec<[f64; 3]> {
        pts.iter().map(|p| [p[0] * spacing[0], p[1] * spacing[1], p[2] * spacing[2]]).collect()
    };
    let a = scale(auto);
    let r = scale(reference);
    let mean = |d: Vec<f64>| d.iter().sum::<f64>() / d.len() as f64;
    Ok(0.5 * (mean(nearest_distances(&a, &r)) + mean(nearest_distances(&r, &a))))
}

/// `|A ∩ B| / |A ∪ B|`, 1 when both masks are empty.
pub fn jaccard(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch(format!("masks have {} and {} pixels", a.len(), b.len())));
    }
    let (inter, union) = a.iter().zip(b).fold((0usize, 0usize), |(i, u), (&x, &y)| {
        (i + (x && y) as usize, u + (x || y) as usize)
    });
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Relative area difference `|auto - manual| / manual`.
pub fn pad(area_auto: f64, area_manual: f64) -> Result<f64> {
    if area_manual == 0.0 {
        return Err(Error::ZeroReferenceArea);
    }
    Ok((area_auto - area_manual).abs() / area_manual)
}

fn directed_hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// Symmetric Hausdorff distance (max over both directions of the largest
/// nearest-point distance).
pub fn hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyContour);
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

/// Shoelace area of a closed polygon.
pub fn polygon_area(contour: &[[f64; 2]]) -> f64 {
    let n = contour.len();
    (0..n)
        .map(|i| {
            let p = contour[i];
            let q = contour[(i + 1) % n];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        .abs()
        * 0.5
}

/// Rasterizes a closed polygon onto a `width x height` pixel grid (row-major,
/// pixel centers at integer coordinates) by the even-odd rule.
pub fn rasterize_polygon(contour: &[[f64; 2]], width: usize, height: usize) -> Vec<bool> {
    let n = contour.len();
    let mut mask = vec![false; width * height];
    for py in 0..height {
        for px in 0..width {
            let (x, y) = (px as f64, py as f64);
            let mut inside = false;
            for i in 0..n {
                let [xi, yi] = contour[i];
                let [xj, yj] = contour[(i + n - 1) % n];
                if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                    inside = !inside;
                }
            }
            mask[py * width + px] = inside;
        }
    }
    mask
}
