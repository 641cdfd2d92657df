//! End-to-end segmentation runs driven by a JSON configuration, plus report
//! emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::{gaussian_smooth, gradient_cost, Polarity};
use crate::displacement::{compute_gvf, deform_cost_volume, edge_map, mappings_from_shifts, normalize_and_shift};
use crate::error::{Error, Result, StageExt};
use crate::graph::{assemble_graph, CapacityScale, GraphSpec};
use crate::maxflow::{recover_surfaces, solve_min_cut};
use crate::mapping::read_mappings_csv;
use crate::metrics::{uassd, umsp};
use crate::penalty::ConvexPenalty;
use crate::phantom::{downsample, generate_phantom, to_downsampled_coordinate, PhantomSpec};
use crate::problem::{Problem, SegmentationResult, SeparationConstraint};
use crate::volume::Volume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputConfig {
    Phantom(PhantomSpec),
    /// An intensity volume; costs are built from it.
    Volume { path: PathBuf },
    /// Precomputed cost volumes, one per surface. `image` feeds the
    /// displacement field and is required when it is enabled.
    Costs {
        paths: Vec<PathBuf>,
        #[serde(default)]
        image: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    /// Intensity change crossed when moving up through the surface. Ignored
    /// for precomputed costs.
    #[serde(default)]
    pub polarity: Option<Polarity>,
    pub penalty: ConvexPenalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GvfConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub dt: Option<f64>,
}

fn yes() -> bool {
    true
}

fn default_mu() -> f64 {
    0.2
}

fn default_iterations() -> usize {
    80
}

impl Default for GvfConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            mu: default_mu(),
            iterations: default_iterations(),
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    /// Block-mean factors `(fx, fy, fz)`.
    #[serde(default)]
    pub downsample: Option<[usize; 3]>,
    /// Gaussian sigma per axis, in voxels.
    #[serde(default)]
    pub gaussian: Option<[f64; 3]>,
    pub surfaces: Vec<SurfaceConfig>,
    /// Minimum gaps `d_{i,i+1}` between consecutive surfaces.
    #[serde(default)]
    pub separations: Vec<f64>,
    #[serde(default)]
    pub gvf: GvfConfig,
    #[serde(default = "default_scale")]
    pub scale: u64,
    /// Also segment the undeformed costs on the regular grid.
    #[serde(default)]
    pub baseline: bool,
    /// Overrides the phantom noise seed when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub dump_graph: Option<PathBuf>,
}

fn default_scale() -> u64 {
    CapacityScale::DEFAULT.get()
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.surfaces.is_empty() {
            return Err(Error::ConfigInvalid("at least one surface is required".into()));
        }
        if self.separations.len() + 1 != self.surfaces.len() {
            return Err(Error::ConfigInvalid(format!(
                "{} surfaces need {} separations, got {}",
                self.surfaces.len(),
                self.surfaces.len() - 1,
                self.separations.len()
            )));
        }
        if let InputConfig::Costs { paths, image } = &self.input {
            if paths.len() != self.surfaces.len() {
                return Err(Error::ConfigInvalid(format!(
                    "{} cost volumes for {} surfaces",
                    paths.len(),
                    self.surfaces.len()
                )));
            }
            if self.gvf.enabled && image.is_none() {
                return Err(Error::ConfigInvalid("displacement field needs an input image".into()));
            }
        } else if let Some(i) = self.surfaces.iter().position(|s| s.polarity.is_none()) {
            return Err(Error::ConfigInvalid(format!("surface {i} needs a polarity")));
        }
        if !(self.gvf.mu > 0.0) {
            return Err(Error::ConfigInvalid(format!("gvf mu must be > 0, got {}", self.gvf.mu)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceMetrics {
    /// Voxels of the (possibly downsampled) grid.
    pub umsp: f64,
    /// Physical units.
    pub uassd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub config: PipelineConfig,
    /// Dims and spacing of the segmented grid.
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    /// Normalization factor of the displacement field (0 when disabled).
    pub lambda: f64,
    pub proposed: SegmentationResult,
    pub baseline: Option<SegmentationResult>,
    /// Ground-truth heights in grid units, when known.
    pub truth: Option<Vec<Vec<f64>>>,
    pub proposed_metrics: Option<Vec<SurfaceMetrics>>,
    pub baseline_metrics: Option<Vec<SurfaceMetrics>>,
}

/// Assembles, cuts and decodes.
pub fn segment(problem: &Problem, scale: CapacityScale) -> Result<SegmentationResult> {
    segment_with_graph(problem, scale).map(|(r, _)| r)
}

pub fn segment_with_graph(problem: &Problem, scale: CapacityScale) -> Result<(SegmentationResult, GraphSpec)> {
    let graph = assemble_graph(problem, scale).stage("graph")?;
    let cut = solve_min_cut(&graph).stage("maxflow")?;
    let result = recover_surfaces(&cut, &graph, problem).stage("recover")?;
    Ok((result, graph))
}

fn surface_points(heights: &[f64], ny: usize) -> Vec<[f64; 3]> {
    heights
        .iter()
        .enumerate()
        .map(|(a, &z)| [(a / ny) as f64, (a % ny) as f64, z])
        .collect()
}

pub fn surface_metrics(
    result: &SegmentationResult,
    truth: &[Vec<f64>],
    dims: [usize; 3],
    spacing: [f64; 3],
) -> Result<Vec<SurfaceMetrics>> {
    if truth.len() != result.surfaces() {
        return Err(Error::DimMismatch(format!(
            "{} truth surfaces for {} segmented",
            truth.len(),
            result.surfaces()
        )));
    }
    result
        .positions
        .iter()
        .zip(truth)
        .map(|(auto, reference)| {
            Ok(SurfaceMetrics {
                umsp: umsp(auto, reference)?,
                uassd: uassd(&surface_points(auto, dims[1]), &surface_points(reference, dims[1]), spacing)?,
            })
        })
        .collect()
}

fn phantom_truth(spec: &PhantomSpec, dims: [usize; 3], factors: [usize; 3]) -> Vec<Vec<f64>> {
    let center = |i: usize, f: usize| (i * f) as f64 + (f as f64 - 1.0) / 2.0;
    spec.surfaces
        .iter()
        .map(|s| {
            (0..dims[0] * dims[1])
                .map(|a| {
                    let z = s.eval(center(a / dims[1], factors[0]), center(a % dims[1], factors[1]));
                    to_downsampled_coordinate(z, factors[2])
                })
                .collect()
        })
        .collect()
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let scale = CapacityScale::new(config.scale)?;
    let factors = config.downsample.unwrap_or([1, 1, 1]);
    let penalties: Vec<ConvexPenalty> = config.surfaces.iter().map(|s| s.penalty.clone()).collect();
    let separation = SeparationConstraint::new(config.separations.clone())?;

    let mut truth = None;
    let (image, costs) = match &config.input {
        InputConfig::Phantom(spec) => {
            let mut spec = spec.clone();
            if let Some(seed) = config.seed {
                spec.seed = seed;
            }
            let phantom = generate_phantom(&spec).stage("phantom")?;
            let image = downsample(&phantom.volume, factors).stage("downsample")?;
            truth = Some(phantom_truth(&spec, image.dims(), factors));
            (Some(image), None)
        }
        InputConfig::Volume { path } => {
            let v = Volume::read(path).stage("input")?;
            (Some(downsample(&v, factors).stage("downsample")?), None)
        }
        InputConfig::Costs { paths, image } => {
            let costs = paths
                .iter()
                .map(|p| Volume::read(p).and_then(|v| downsample(&v, factors)))
                .collect::<Result<Vec<_>>>()
                .stage("input")?;
            let image = match image {
                Some(p) => Some(Volume::read(p).and_then(|v| downsample(&v, factors)).stage("input")?),
                None => None,
            };
            (image, Some(costs))
        }
    };
    let image = match (image, config.gaussian) {
        (Some(v), Some(sigma)) => Some(gaussian_smooth(&v, sigma).stage("preprocess")?),
        (v, _) => v,
    };
    let costs = match costs {
        Some(c) => c,
        None => {
            let image = image.as_ref().ok_or_else(|| Error::InternalInconsistency("no image".into()))?;
            config
                .surfaces
                .iter()
                .map(|s| gradient_cost(image, s.polarity.unwrap_or(Polarity::DarkToBright)))
                .collect()
        }
    };
    let dims = costs[0].dims();
    let spacing = costs[0].spacing();
    if let Some(img) = &image {
        if img.dims() != dims {
            return Err(Error::DimMismatch(format!("image {:?} vs costs {:?}", img.dims(), dims)));
        }
    }

    let baseline = if config.baseline {
        let problem =
            Problem::equidistant(costs.clone(), penalties.clone(), separation.clone()).stage("baseline")?;
        Some(segment(&problem, scale).stage("baseline")?)
    } else {
        None
    };

    let (problem, lambda) = match (&image, config.gvf.enabled) {
        (Some(img), true) if config.gvf.iterations > 0 => {
            let field = compute_gvf(&edge_map(img), config.gvf.mu, config.gvf.iterations, config.gvf.dt).stage("gvf")?;
            let centers = normalize_and_shift(&field, 1.0).stage("gvf")?;
            let mappings = mappings_from_shifts(&centers).stage("gvf")?;
            let deformed = costs
                .iter()
                .map(|c| deform_cost_volume(c, &centers))
                .collect::<Result<Vec<_>>>()
                .stage("deform")?;
            (Problem::new(deformed, mappings, penalties, separation).stage("problem")?, centers.lambda())
        }
        _ => (Problem::equidistant(costs, penalties, separation).stage("problem")?, 0.0),
    };
    let (proposed, graph) = segment_with_graph(&problem, scale)?;
    if let Some(path) = &config.dump_graph {
        std::fs::write(path, graph.network.to_dimacs()).map_err(|e| Error::io(path, e))?;
    }

    let metrics = |r: &SegmentationResult| -> Result<Option<Vec<SurfaceMetrics>>> {
        truth
            .as_ref()
            .map(|t| surface_metrics(r, t, dims, spacing))
            .transpose()
            .stage("metrics")
    };
    let proposed_metrics = metrics(&proposed)?;
    let baseline_metrics = baseline.as_ref().map(&metrics).transpose()?.flatten();
    Ok(PipelineOutput {
        config: config.clone(),
        dims,
        spacing,
        lambda,
        proposed,
        baseline,
        truth,
        proposed_metrics,
        baseline_metrics,
    })
}

/// On-disk problem description: cost volumes (one per surface), optional
/// column mappings CSV, penalties and gaps. Relative paths resolve against
/// the bundle's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBundle {
    pub costs: Vec<PathBuf>,
    #[serde(default)]
    pub mappings: Option<PathBuf>,
    pub penalties: Vec<ConvexPenalty>,
    #[serde(default)]
    pub separations: Vec<f64>,
}

impl ProblemBundle {
    pub fn load(path: impl AsRef<Path>) -> Result<Problem> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bundle: ProblemBundle = serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        bundle.resolve(path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve(&self, base: &Path) -> Result<Problem> {
        let costs = self
            .costs
            .iter()
            .map(|p| Volume::read(base.join(p)))
            .collect::<Result<Vec<_>>>()?;
        let separation = SeparationConstraint::new(self.separations.clone())?;
        match &self.mappings {
            Some(m) => {
                let dims = costs
                    .first()
                    .map(Volume::dims)
                    .ok_or_else(|| Error::InvalidProblem("at least one surface is required".into()))?;
                let mappings = read_mappings_csv(base.join(m), dims)?;
                Problem::new(costs, mappings, self.penalties.clone(), separation)
            }
            None => Problem::equidistant(costs, self.penalties.clone(), separation),
        }
    }
}

/// One row of a surface CSV: `x, y, surface, position` (other columns ignored).
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct SurfaceSample {
    pub x: usize,
    pub y: usize,
    pub surface: usize,
    pub position: f64,
}

pub fn read_surface_csv(path: impl AsRef<Path>) -> Result<Vec<SurfaceSample>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    reader
        .deserialize()
        .map(|row| row.map_err(|e| Error::format(path, e)))
        .collect()
}

/// Compares two surface files column by column. Surfaces are matched by index
/// and must cover the same `(x, y)` set.
pub fn evaluate_surfaces(
    auto: &[SurfaceSample],
    reference: &[SurfaceSample],
    spacing: [f64; 3],
) -> Result<Vec<SurfaceMetrics>> {
    let group = |rows: &[SurfaceSample]| {
        let mut by_surface: BTreeMap<usize, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
        for r in rows {
            by_surface.entry(r.surface).or_default().insert((r.x, r.y), r.position);
        }
        by_surface
    };
    let a = group(auto);
    let r = group(reference);
    if a.is_empty() || r.is_empty() {
        return Err(Error::EmptySurface);
    }
    if a.len() != r.len() {
        return Err(Error::DimMismatch(format!("{} surfaces vs {}", a.len(), r.len())));
    }
    a.values()
        .zip(r.values())
        .map(|(sa, sr)| {
            if sa.len() != sr.len() || sa.keys().ne(sr.keys()) {
                return Err(Error::ColumnSetMismatch {
                    auto: sa.len(),
                    reference: sr.len(),
                });
            }
            let pa: Vec<f64> = sa.values().copied().collect();
            let pr: Vec<f64> = sr.values().copied().collect();
            let points = |s: &BTreeMap<(usize, usize), f64>| -> Vec<[f64; 3]> {
                s.iter().map(|(&(x, y), &z)| [x as f64, y as f64, z]).collect()
            };
            Ok(SurfaceMetrics {
                umsp: umsp(&pa, &pr)?,
                uassd: uassd(&points(sa), &points(sr), spacing)?,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    energy: f64,
    metrics: &'a Option<Vec<SurfaceMetrics>>,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    version: &'static str,
    timestamp: String,
    seed: Option<u64>,
    parameters: &'a PipelineConfig,
    dims: [usize; 3],
    spacing: [f64; 3],
    lambda: f64,
    proposed: RunReport<'a>,
    baseline: Option<RunReport<'a>>,
}

/// Report body as JSON; `timestamp` is the only field that varies between
/// identical runs.
pub fn report_json(out: &PipelineOutput, timestamp: &str) -> Result<String> {
    let seed = match &out.config.input {
        InputConfig::Phantom(spec) => Some(out.config.seed.unwrap_or(spec.seed)),
        _ => out.config.seed,
    };
    let report = Report {
        version: env!("CARGO_PKG_VERSION"),
        timestamp: timestamp.to_string(),
        seed,
        parameters: &out.config,
        dims: out.dims,
        spacing: out.spacing,
        lambda: out.lambda,
        proposed: RunReport {
            energy: out.proposed.energy,
            metrics: &out.proposed_metrics,
        },
        baseline: out.baseline.as_ref().map(|b| RunReport {
            energy: b.energy,
            metrics: &out.baseline_metrics,
        }),
    };
    serde_json::to_string_pretty(&report).map_err(|e| Error::InternalInconsistency(e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `report.json`, `surfaces.csv` and `plotdata.csv` into `dir`.
pub fn emit_report(out: &PipelineOutput, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if out.proposed.surfaces() == 0 {
        return Err(Error::EmptySurface);
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ny = out.dims[1];

    let mut surfaces = String::from("x,y,surface,label,position\n");
    for (i, (labels, positions)) in out.proposed.labels.iter().zip(&out.proposed.positions).enumerate() {
        for (a, (k, z)) in labels.iter().zip(positions).enumerate() {
            writeln!(surfaces, "{},{},{i},{k},{z}", a / ny, a % ny).unwrap();
        }
    }
    let mut plot = String::from("x,y,surface,truth,proposed,baseline\n");
    for (i, positions) in out.proposed.positions.iter().enumerate() {
        for (a, z) in positions.iter().enumerate() {
            let truth = out.truth.as_ref().map(|t| t[i][a]);
            let base = out.baseline.as_ref().map(|b| b.positions[i][a]);
            writeln!(plot, "{},{},{i},{},{z},{}", a / ny, a % ny, opt(truth), opt(base)).unwrap();
        }
    }
    let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let files = [
        ("report.json", report_json(out, &timestamp)?),
        ("surfaces.csv", surfaces),
        ("plotdata.csv", plot),
    ];
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
