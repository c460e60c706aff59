//! Ratio-form redistribution of neighbourhood mass to pixels.
//!
//! Each pixel `x` in neighbourhood `N_k` receives
//! `M_k * phi(s(x)) / sum_{y in N_k} phi(s(y))`. The weights depend only on
//! scores inside `N_k` and sum to one there, so every neighbourhood keeps its
//! mass and no pixel sees data from another neighbourhood.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::{neighbourhood_masses, AttributionGrid, NeighbourhoodSystem, SegmentPartition};
use crate::numeric::compensated_sum;
use crate::potential::Potential;

/// How the per-neighbourhood normalizer is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Subtract the neighbourhood's largest log-potential before `exp`.
    #[default]
    ShiftedLogSumExp,
    /// Evaluate `phi` directly. Overflows for small temperatures.
    Direct,
}

/// Per-pixel normalized weights `w_{nu(x)}(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightField {
    height: usize,
    width: usize,
    weights: Vec<f64>,
}

impl WeightField {
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.width + col]
    }

    /// Weight sums per neighbourhood (each should be one).
    pub fn neighbourhood_sums(&self, hood: &NeighbourhoodSystem) -> Vec<f64> {
        (0..hood.count())
            .map(|k| compensated_sum(hood.members(k).iter().map(|&i| self.weights[i])))
            .collect()
    }
}

/// Mass source for the redistribution.
#[derive(Clone, Copy, Debug)]
pub enum MassInput<'a> {
    /// One coarse value `a_k` per neighbourhood; mass is `a_k * |N_k|`.
    Coarse(&'a [f64]),
    /// A full-resolution attribution; mass is summed per neighbourhood.
    Grid(&'a AttributionGrid),
}

impl MassInput<'_> {
    pub fn masses(&self, hood: &NeighbourhoodSystem) -> Result<Vec<f64>> {
        match *self {
            MassInput::Coarse(values) => {
                if values.len() != hood.count() {
                    return invalid(format!(
                        "{} coarse values for {} neighbourhoods",
                        values.len(),
                        hood.count()
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(crate::UsuError::Domain("non-finite coarse value".into()));
                }
                Ok(values
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| a * hood.size(k) as f64)
                    .collect())
            }
            MassInput::Grid(grid) => neighbourhood_masses(grid, hood),
        }
    }
}

fn normalize(
    log_phi: &[f64],
    hood: &NeighbourhoodSystem,
    potential: &Potential,
    scores: &[f64],
    mode: Normalization,
) -> Result<WeightField> {
    let per_hood: Vec<Vec<f64>> = (0..hood.count())
        .into_par_iter()
        .map(|k| {
            let members = hood.members(k);
            match mode {
                Normalization::ShiftedLogSumExp => {
                    let peak = members.iter().map(|&i| log_phi[i]).fold(f64::NEG_INFINITY, f64::max);
                    let raw: Vec<f64> = members.iter().map(|&i| (log_phi[i] - peak).exp()).collect();
                    let z = compensated_sum(raw.iter().copied());
                    Ok(raw.into_iter().map(|v| v / z).collect())
                }
                Normalization::Direct => {
                    let raw = members
                        .iter()
                        .map(|&i| potential.evaluate(scores[i]))
                        .collect::<Result<Vec<f64>>>()?;
                    let z = compensated_sum(raw.iter().copied());
                    Ok(raw.into_iter().map(|v| v / z).collect())
                }
            }
        })
        .collect::<Result<_>>()?;
    let mut weights = vec![0.0; hood.height() * hood.width()];
    for (k, w) in per_hood.into_iter().enumerate() {
        for (&i, v) in hood.members(k).iter().zip(w) {
            weights[i] = v;
        }
    }
    Ok(WeightField {
        height: hood.height(),
        width: hood.width(),
        weights,
    })
}

/// Weights from a per-pixel score field (scores in the potential's domain).
pub fn weights_from_scores(
    pixel_scores: &AttributionGrid,
    hood: &NeighbourhoodSystem,
    potential: &Potential,
    mode: Normalization,
) -> Result<WeightField> {
    pixel_scores.ensure_same_dims(hood.dims())?;
    let scores = pixel_scores.values();
    let log_phi = scores
        .iter()
        .map(|&s| potential.log_value(s))
        .collect::<Result<Vec<f64>>>()?;
    normalize(&log_phi, hood, potential, scores, mode)
}

/// Normalized USU weights for a segment partition.
pub fn usu_weights(
    segments: &SegmentPartition,
    hood: &NeighbourhoodSystem,
    potential: &Potential,
) -> Result<WeightField> {
    usu_weights_with(segments, hood, potential, Normalization::default())
}

pub fn usu_weights_with(
    segments: &SegmentPartition,
    hood: &NeighbourhoodSystem,
    potential: &Potential,
    mode: Normalization,
) -> Result<WeightField> {
    if segments.dims() != hood.dims() {
        return invalid("segments and neighbourhoods must share dimensions");
    }
    let per_segment = segments
        .scores()
        .iter()
        .map(|&s| potential.log_value(s))
        .collect::<Result<Vec<f64>>>()?;
    let log_phi: Vec<f64> = segments.labels().iter().map(|&p| per_segment[p]).collect();
    let scores: Vec<f64> = segments.labels().iter().map(|&p| segments.score(p)).collect();
    normalize(&log_phi, hood, potential, &scores, mode)
}

/// `A(x) = masses[nu(x)] * w(x)`.
pub fn redistribute(masses: &[f64], weights: &WeightField, hood: &NeighbourhoodSystem) -> Result<AttributionGrid> {
    if masses.len() != hood.count() {
        return invalid(format!("{} masses for {} neighbourhoods", masses.len(), hood.count()));
    }
    if weights.dims() != hood.dims() {
        return invalid("weight field and neighbourhoods must share dimensions");
    }
    let values = weights
        .weights
        .iter()
        .zip(hood.labels())
        .map(|(&w, &k)| masses[k] * w)
        .collect();
    AttributionGrid::new(hood.height(), hood.width(), values)
}

/// The USU fused attribution.
pub fn usu_upsample(
    input: MassInput<'_>,
    segments: &SegmentPartition,
    hood: &NeighbourhoodSystem,
    potential: &Potential,
) -> Result<AttributionGrid> {
    let masses = input.masses(hood)?;
    let weights = usu_weights(segments, hood, potential)?;
    redistribute(&masses, &weights, hood)
}

/// USU driven by a per-pixel score field instead of a segment partition.
pub fn usu_upsample_scores(
    input: MassInput<'_>,
    pixel_scores: &AttributionGrid,
    hood: &NeighbourhoodSystem,
    potential: &Potential,
) -> Result<AttributionGrid> {
    let masses = input.masses(hood)?;
    let weights = weights_from_scores(pixel_scores, hood, potential, Normalization::default())?;
    redistribute(&masses, &weights, hood)
}

/// Checks `U(c * A) == c * U(A)` to `1e-10` relative.
pub fn verify_linearity_in_mass(
    segments: &SegmentPartition,
    hood: &NeighbourhoodSystem,
    potential: &Potential,
    a: &AttributionGrid,
    c: f64,
) -> Result<bool> {
    let base = usu_upsample(MassInput::Grid(a), segments, hood, potential)?;
    let scaled = usu_upsample(MassInput::Grid(&a.scaled(c)?), segments, hood, potential)?;
    let scale = base
        .values()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    Ok(base
        .values()
        .iter()
        .zip(scaled.values())
        .all(|(&b, &s)| (s - c * b).abs() <= 1e-10 * (c.abs() * scale).max(f64::MIN_POSITIVE)))
}
