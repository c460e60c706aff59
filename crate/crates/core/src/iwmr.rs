//! Soft importance-weighted mass redistribution (IWMR).
//!
//! The global mass budget is reassigned across neighbourhoods in proportion
//! to `Lambda(lambda_k) * |N_k|`, where `lambda_k` is the highest score of any
//! segment touching `N_k`. Inside each neighbourhood the USU weights are used
//! unchanged. Per-neighbourhood completeness becomes `sum_{N_k} A = M~_k`;
//! the total mass is still conserved.

use crate::error::{invalid, Result};
use crate::grid::{AttributionGrid, NeighbourhoodSystem, SegmentPartition};
use crate::numeric::compensated_sum;
use crate::potential::Potential;
use crate::usu::{redistribute, usu_weights, MassInput, WeightField};

/// Default temperature of the importance potential.
pub const DEFAULT_IMPORTANCE_TEMPERATURE: f64 = 0.1;

/// Per-neighbourhood importance `lambda_k` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceVector {
    values: Vec<f64>,
    temperature: f64,
}

impl ImportanceVector {
    pub fn new(values: Vec<f64>, temperature: f64) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return invalid(format!("importance {v} is outside [0, 1]"));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return invalid("importance temperature must be positive");
        }
        Ok(Self { values, temperature })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

/// `lambda_k = max { s_p : S_p intersects N_k }`.
pub fn neighbourhood_importance(segments: &SegmentPartition, hood: &NeighbourhoodSystem) -> Result<Vec<f64>> {
    if segments.dims() != hood.dims() {
        return invalid("segments and neighbourhoods must share dimensions");
    }
    Ok((0..hood.count())
        .map(|k| {
            hood.members(k)
                .iter()
                .map(|&i| segments.pixel_score(i))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect())
}

/// `rho_k = Lambda(lambda_k)|N_k| / sum_j Lambda(lambda_j)|N_j|` with
/// `Lambda(l) = exp((l - 0.5) / eps_L)`, computed with a max shift.
pub fn redistribution_weights(importance: &ImportanceVector, sizes: &[usize]) -> Result<Vec<f64>> {
    let lambda = importance.values();
    if lambda.len() != sizes.len() {
        return invalid(format!("{} importances for {} sizes", lambda.len(), sizes.len()));
    }
    if lambda.is_empty() || sizes.contains(&0) {
        return invalid("neighbourhood sizes must be positive");
    }
    let t = importance.temperature();
    let logs: Vec<f64> = lambda
        .iter()
        .zip(sizes)
        .map(|(&l, &n)| (l - 0.5) / t + (n as f64).ln())
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|&v| (v - peak).exp()).collect();
    let z = compensated_sum(raw.iter().copied());
    Ok(raw.into_iter().map(|v| v / z).collect())
}

/// Full output of an IWMR run, kept for bookkeeping checks.
#[derive(Clone, Debug)]
pub struct IwmrOutcome {
    pub attribution: AttributionGrid,
    pub weights: WeightField,
    pub original_masses: Vec<f64>,
    pub redistributed_masses: Vec<f64>,
    pub rho: Vec<f64>,
}

pub fn iwmr_redistribute(
    input: MassInput<'_>,
    segments: &SegmentPartition,
    hood: &NeighbourhoodSystem,
    potential: &Potential,
    importance_temperature: f64,
) -> Result<IwmrOutcome> {
    let masses = input.masses(hood)?;
    let lambda = ImportanceVector::new(neighbourhood_importance(segments, hood)?, importance_temperature)?;
    let rho = redistribution_weights(&lambda, &hood.sizes())?;
    let total = compensated_sum(masses.iter().copied());
    let redistributed: Vec<f64> = rho.iter().map(|&r| total * r).collect();
    let weights = usu_weights(segments, hood, potential)?;
    let attribution = redistribute(&redistributed, &weights, hood)?;
    Ok(IwmrOutcome {
        attribution,
        weights,
        original_masses: masses,
        redistributed_masses: redistributed,
        rho,
    })
}

/// The IWMR fused attribution.
pub fn iwmr_upsample(
    input: MassInput<'_>,
    segments: &SegmentPartition,
    hood: &NeighbourhoodSystem,
    potential: &Potential,
    importance_temperature: f64,
) -> Result<AttributionGrid> {
    Ok(iwmr_redistribute(input, segments, hood, potential, importance_temperature)?.attribution)
}
