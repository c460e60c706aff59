//! Hierarchical boundary refinement.
//!
//! Starting from a coarse segmentation, the score matrix is convolved with a
//! diagonal difference kernel (the H-map). Segments where the response
//! exceeds a threshold are split, rescored, and the finer score matrix is
//! blended into the running one with a per-pixel sigmoid weight. The loop
//! stops when the blended field stops changing (Frobenius norm), when no
//! segment needs splitting, or at the depth limit. The final attribution is
//! USU against the blended per-pixel scores, so total mass is preserved at
//! every depth.

use std::collections::BTreeSet;

use crate::error::{invalid, Result, UsuError};
use crate::grid::{quad_refine, AttributionGrid, NeighbourhoodSystem, SegmentHierarchy, SegmentPartition};
use crate::numeric::{compensated_sum, logistic};
use crate::potential::Potential;
use crate::usu::{usu_upsample_scores, MassInput};

/// Diagonal difference kernel, row-major.
pub const DIAGONAL_KERNEL: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, -1.0]];

/// Assigns a score in `[0, 1]` to every segment of a partition.
pub trait SegmentScorer: Sync {
    fn score(&self, segments: &SegmentPartition, attribution: &AttributionGrid) -> Result<Vec<f64>>;
}

impl<F> SegmentScorer for F
where
    F: Fn(&SegmentPartition, &AttributionGrid) -> Result<Vec<f64>> + Sync,
{
    fn score(&self, segments: &SegmentPartition, attribution: &AttributionGrid) -> Result<Vec<f64>> {
        self(segments, attribution)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineConfig {
    /// Boundary threshold on `max |H|` within a segment.
    pub theta: f64,
    /// Mixing centre.
    pub mu: f64,
    /// Mixing temperature.
    pub tau: f64,
    /// Comparator tolerance; `None` uses `0.01 * sqrt(H * W)`.
    pub tolerance: Option<f64>,
    /// Maximum number of depth levels (including the initial one).
    pub max_depth: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            theta: 0.05,
            mu: 0.1,
            tau: 0.05,
            tolerance: None,
            max_depth: 4,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.theta) || !positive(self.tau) || !(self.mu.is_finite() && self.mu >= 0.0) {
            return invalid("theta and tau must be positive, mu non-negative");
        }
        if self.tolerance.is_some_and(|t| !positive(t)) {
            return invalid("comparator tolerance must be positive");
        }
        if self.max_depth == 0 {
            return invalid("max depth must be at least 1");
        }
        Ok(())
    }

    pub fn tolerance_for(&self, dims: (usize, usize)) -> f64 {
        self.tolerance
            .unwrap_or_else(|| 0.01 * ((dims.0 * dims.1) as f64).sqrt())
    }
}

/// `Phi(x) = s(sigma(x))`.
pub fn score_matrix(segments: &SegmentPartition) -> AttributionGrid {
    let values = segments.labels().iter().map(|&p| segments.score(p)).collect();
    AttributionGrid::new(segments.height(), segments.width(), values)
        .expect("partition dimensions and scores are already validated")
}

/// Convolution with [`DIAGONAL_KERNEL`], replicating border values.
pub fn hmap(phi: &AttributionGrid) -> AttributionGrid {
    let (h, w) = phi.dims();
    let at = |r: isize, c: isize| phi.get(r.clamp(0, h as isize - 1) as usize, c.clamp(0, w as isize - 1) as usize);
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut acc = 0.0;
            // the kernel is invariant under 180 degree rotation, so
            // convolution and correlation coincide
            for (i, row) in DIAGONAL_KERNEL.iter().enumerate() {
                for (j, &k) in row.iter().enumerate() {
                    if k != 0.0 {
                        acc += k * at(r + i as isize - 1, c + j as isize - 1);
                    }
                }
            }
            out.push(acc);
        }
    }
    AttributionGrid::new(h, w, out).expect("finite input gives finite output")
}

/// Segments whose peak `|H|` exceeds `theta`.
pub fn boundary_segments(h: &AttributionGrid, segments: &SegmentPartition, theta: f64) -> Result<BTreeSet<usize>> {
    h.ensure_same_dims(segments.dims())?;
    let v = h.values();
    Ok((0..segments.count())
        .filter(|&p| segments.members(p).iter().any(|&i| v[i].abs() > theta))
        .collect())
}

/// `alpha(x) = sigmoid(-(|H(x)| - mu) / tau)`.
pub fn mixing_alpha(h: &AttributionGrid, mu: f64, tau: f64) -> Result<AttributionGrid> {
    if !(tau.is_finite() && tau > 0.0) {
        return invalid("mixing temperature must be positive");
    }
    h.map(|v| logistic(-(v.abs() - mu) / tau))
}

/// `alpha * coarse + (1 - alpha) * fine`, pointwise.
pub fn merge(coarse: &AttributionGrid, fine: &AttributionGrid, alpha: &AttributionGrid) -> Result<AttributionGrid> {
    coarse.ensure_same_dims(fine.dims())?;
    coarse.ensure_same_dims(alpha.dims())?;
    if alpha.values().iter().any(|a| !(0.0..=1.0).contains(a)) {
        return invalid("mixing coefficients must lie in [0, 1]");
    }
    let values = coarse
        .values()
        .iter()
        .zip(fine.values())
        .zip(alpha.values())
        .map(|((&c, &f), &a)| if c == f { c } else { a * c + (1.0 - a) * f })
        .collect();
    AttributionGrid::new(coarse.height(), coarse.width(), values)
}

pub fn frobenius_distance(a: &AttributionGrid, b: &AttributionGrid) -> Result<f64> {
    a.ensure_same_dims(b.dims())?;
    Ok(compensated_sum(a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y))).sqrt())
}

/// True while refinement has not converged: `||a - b||_F > tolerance`.
pub fn comparator(a: &AttributionGrid, b: &AttributionGrid, tolerance: f64) -> Result<bool> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return invalid("comparator tolerance must be positive");
    }
    Ok(frobenius_distance(a, b)? > tolerance)
}

/// Partition, raw score matrix and attribution at one depth.
#[derive(Clone, Debug)]
pub struct DepthState {
    pub depth: usize,
    pub partition: SegmentPartition,
    pub score_matrix: AttributionGrid,
    /// Blended per-pixel scores after this depth.
    pub merged_scores: AttributionGrid,
    /// USU against `merged_scores`.
    pub attribution: AttributionGrid,
    /// Segments of the previous depth that were split to reach this one.
    pub refined: BTreeSet<usize>,
}

#[derive(Clone, Debug)]
pub struct RefineOutcome {
    pub attribution: AttributionGrid,
    pub hierarchy: SegmentHierarchy,
    pub states: Vec<DepthState>,
}

impl RefineOutcome {
    pub fn merged_scores(&self) -> &AttributionGrid {
        &self.states.last().unwrap().merged_scores
    }
}

fn rescore(
    scorer: &dyn SegmentScorer,
    partition: &SegmentPartition,
    attribution: &AttributionGrid,
    depth: usize,
) -> Result<SegmentPartition> {
    let wrap = |e: UsuError| UsuError::Scorer {
        depth,
        source: Box::new(e),
    };
    let scores = scorer.score(partition, attribution).map_err(wrap)?;
    partition.with_scores(scores).map_err(wrap)
}

/// Runs the depth recursion from `initial` and redistributes `attribution`
/// (full resolution) over `hood` with the final blended scores.
pub fn refine_pipeline(
    attribution: &AttributionGrid,
    hood: &NeighbourhoodSystem,
    initial: &SegmentPartition,
    scorer: &dyn SegmentScorer,
    config: &RefineConfig,
    potential: &Potential,
) -> Result<RefineOutcome> {
    config.validate()?;
    attribution.ensure_same_dims(hood.dims())?;
    if initial.dims() != hood.dims() {
        return invalid("initial partition and neighbourhoods must share dimensions");
    }
    let tolerance = config.tolerance_for(hood.dims());
    let redistribute =
        |scores: &AttributionGrid| usu_upsample_scores(MassInput::Grid(attribution), scores, hood, potential);

    let mut partition = rescore(scorer, initial, attribution, 0)?;
    let mut phi = score_matrix(&partition);
    let mut merged = phi.clone();
    let mut states = vec![DepthState {
        depth: 0,
        partition: partition.clone(),
        score_matrix: phi.clone(),
        merged_scores: merged.clone(),
        attribution: redistribute(&merged)?,
        refined: BTreeSet::new(),
    }];

    while states.len() < config.max_depth {
        let depth = states.len();
        let h = hmap(&phi);
        let targets = boundary_segments(&h, &partition, config.theta)?;
        if targets.is_empty() {
            break;
        }
        let split = quad_refine(&partition, &targets)?;
        if split.count() == partition.count() {
            // every boundary segment is a single pixel
            break;
        }
        let fine = rescore(scorer, &split, attribution, depth)?;
        let fine_phi = score_matrix(&fine);
        let alpha = mixing_alpha(&h, config.mu, config.tau)?;
        let next = merge(&merged, &fine_phi, &alpha)?;
        let changing = comparator(&next, &merged, tolerance)?;
        merged = next;
        partition = fine;
        phi = fine_phi;
        states.push(DepthState {
            depth,
            partition: partition.clone(),
            score_matrix: phi.clone(),
            merged_scores: merged.clone(),
            attribution: redistribute(&merged)?,
            refined: targets,
        });
        if !changing {
            break;
        }
    }

    let hierarchy = SegmentHierarchy::new(states.iter().map(|s| s.partition.clone()).collect())?;
    let attribution = states.last().unwrap().attribution.clone();
    Ok(RefineOutcome {
        attribution,
        hierarchy,
        states,
    })
}
