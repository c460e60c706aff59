//! Mass-conserving, score-driven upsampling of coarse attribution maps.
//!
//! A coarse attribution assigns one value to each receptive field
//! (neighbourhood) of a pixel lattice. [`usu`] redistributes every
//! neighbourhood's mass over its pixels with weights derived from segment
//! scores, so the result sums back to the coarse masses exactly, depends only
//! on data inside the neighbourhood, and orders pixels by score. The crate
//! also carries the interpolation baselines it is compared against, an
//! importance-weighted variant, hierarchical boundary refinement, evaluation
//! metrics and a synthetic benchmark generator.

pub mod error;
pub mod evaluate;
pub mod grid;
pub mod interp;
pub mod io;
pub mod iwmr;
pub mod method;
pub mod numeric;
pub mod potential;
pub mod refine;
pub mod synth;
pub mod usu;

pub use error::{Result, UsuError};
pub use grid::{
    block_partition, connected_components, neighbourhood_masses, piecewise_constant_expand, quad_refine,
    threshold_segments, AttributionGrid, LabelMap, Mask, NeighbourhoodSystem, Pixel, SegmentHierarchy,
    SegmentPartition,
};
pub use interp::{Alignment, KernelFamily, KernelSpec};
pub use method::{Method, Upsampler};
pub use potential::{Potential, PotentialFamily};
pub use refine::{RefineConfig, SegmentScorer};
pub use usu::{usu_upsample, MassInput, WeightField};
