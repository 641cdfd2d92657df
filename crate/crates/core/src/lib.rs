//! Globally optimal simultaneous segmentation of layered surfaces in
//! irregularly sampled column space.
//!
//! Each surface is a height field over a grid of columns whose samples sit at
//! arbitrary increasing positions `L_a(k)`. The energy combines per-sample data
//! costs, a convex penalty on position differences between neighboring
//! columns, and hard minimum gaps between consecutive surfaces. It is
//! minimized exactly by one minimum s-t cut.
//!
//! ```
//! use surfcut::{segment, CapacityScale, ConvexPenalty, Problem, SeparationConstraint, Volume};
//!
//! let costs = Volume::new([1, 2, 3], [1.0; 3], vec![3.0, 0.0, 3.0, 3.0, 3.0, 0.0]).unwrap();
//! let problem = Problem::equidistant(
//!     vec![costs],
//!     vec![ConvexPenalty::linear(1.0).unwrap()],
//!     SeparationConstraint::none(),
//! )
//! .unwrap();
//! let result = segment(&problem, CapacityScale::DEFAULT).unwrap();
//! assert_eq!(result.labels, vec![vec![1, 2]]);
//! assert_eq!(result.energy, 1.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod displacement;
pub mod error;
pub mod graph;
pub mod mapping;
pub mod maxflow;
pub mod metrics;
pub mod oracle;
pub mod penalty;
pub mod phantom;
pub mod pipeline;
pub mod problem;
pub mod volume;

pub use error::{Error, Result};
pub use graph::{assemble_graph, CapacityScale, FlowNetwork, GraphSpec};
pub use mapping::ColumnMapping;
pub use maxflow::{recover_surfaces, solve_min_cut, solve_network};
pub use penalty::ConvexPenalty;
pub use pipeline::{run_pipeline, segment, PipelineConfig};
pub use problem::{Labeling, Problem, SegmentationResult, SeparationConstraint};
pub use volume::Volume;
