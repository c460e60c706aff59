//! Error decomposition, desiderata checks, benchmark metrics and the
//! built-in segment scorers.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result, UsuError};
use crate::grid::{
    block_partition, neighbourhood_masses, AttributionGrid, LabelMap, Mask, NeighbourhoodSystem, Pixel,
    SegmentPartition,
};
use crate::method::Upsampler;
use crate::numeric::compensated_sum;
use crate::refine::SegmentScorer;
use crate::synth::instance_rng;

/// Per-pixel spurious attribution (`alpha`) and signal loss (`beta`).
#[derive(Clone, Debug, PartialEq)]
pub struct PixelErrors {
    pub alpha: AttributionGrid,
    pub beta: AttributionGrid,
}

/// Per-neighbourhood under- and over-allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct MassImbalance {
    pub deficit: Vec<f64>,
    pub excess: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub alpha: AttributionGrid,
    pub beta: AttributionGrid,
    pub mass_deficit: Vec<f64>,
    pub mass_excess: Vec<f64>,
}

/// `alpha = max(0, |A~| - |A*|)`, `beta = max(0, |A*| - |A~|)`.
pub fn alpha_beta(estimate: &AttributionGrid, truth: &AttributionGrid) -> Result<PixelErrors> {
    let alpha = estimate.zip_with(truth, |e, t| (e.abs() - t.abs()).max(0.0))?;
    let beta = estimate.zip_with(truth, |e, t| (t.abs() - e.abs()).max(0.0))?;
    Ok(PixelErrors { alpha, beta })
}

pub fn mass_imbalance(
    estimate: &AttributionGrid,
    truth: &AttributionGrid,
    hood: &NeighbourhoodSystem,
) -> Result<MassImbalance> {
    estimate.ensure_same_dims(truth.dims())?;
    let got = neighbourhood_masses(estimate, hood)?;
    let want = neighbourhood_masses(truth, hood)?;
    let diff: Vec<f64> = want.iter().zip(&got).map(|(w, g)| w - g).collect();
    Ok(MassImbalance {
        deficit: diff.iter().map(|d| d.max(0.0)).collect(),
        excess: diff.iter().map(|d| (-d).max(0.0)).collect(),
    })
}

pub fn error_report(
    estimate: &AttributionGrid,
    truth: &AttributionGrid,
    hood: &NeighbourhoodSystem,
) -> Result<ErrorReport> {
    let PixelErrors { alpha, beta } = alpha_beta(estimate, truth)?;
    let MassImbalance { deficit, excess } = mass_imbalance(estimate, truth, hood)?;
    Ok(ErrorReport {
        alpha,
        beta,
        mass_deficit: deficit,
        mass_excess: excess,
    })
}

fn ensure_mask(a: &AttributionGrid, mask: &Mask) -> Result<()> {
    a.ensure_same_dims(mask.dims())?;
    if mask.count() == 0 {
        return invalid("ground-truth mask is empty");
    }
    Ok(())
}

/// Number of thresholds tried by [`iou_best`].
pub const IOU_THRESHOLDS: usize = 256;

/// Best intersection-over-union of `A~ >= t` against the mask over
/// [`IOU_THRESHOLDS`] evenly spaced `t` from `min A~` to `max A~`.
pub fn iou_best(a: &AttributionGrid, mask: &Mask) -> Result<f64> {
    ensure_mask(a, mask)?;
    let v = a.values();
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let steps = (IOU_THRESHOLDS - 1) as f64;
    let best = (0..IOU_THRESHOLDS)
        .map(|i| {
            let t = if i == IOU_THRESHOLDS - 1 {
                hi
            } else {
                lo + i as f64 * (hi - lo) / steps
            };
            let (mut inter, mut union) = (0usize, 0usize);
            for (&x, &g) in v.iter().zip(mask.bits()) {
                let on = x >= t;
                inter += usize::from(on && g);
                union += usize::from(on || g);
            }
            inter as f64 / union as f64
        })
        .fold(0.0, f64::max);
    Ok(best)
}

/// Fraction of absolute attribution inside the mask.
pub fn concentration(a: &AttributionGrid, mask: &Mask) -> Result<f64> {
    a.ensure_same_dims(mask.dims())?;
    let total = compensated_sum(a.values().iter().map(|v| v.abs()));
    if total == 0.0 {
        return Err(UsuError::UndefinedMetric(
            "concentration of an all-zero attribution".into(),
        ));
    }
    let inside = compensated_sum(
        a.values()
            .iter()
            .zip(mask.bits())
            .filter(|(_, &g)| g)
            .map(|(v, _)| v.abs()),
    );
    Ok(inside / total)
}

/// Position of the first maximum in row-major order.
pub fn argmax(a: &AttributionGrid) -> Pixel {
    let mut best = 0;
    for (i, &v) in a.values().iter().enumerate() {
        if v > a.values()[best] {
            best = i;
        }
    }
    (best / a.width(), best % a.width())
}

/// Whether the attribution peak (first in row-major order) lies in the mask.
pub fn pointing_game(a: &AttributionGrid, mask: &Mask) -> Result<bool> {
    a.ensure_same_dims(mask.dims())?;
    let (r, c) = argmax(a);
    Ok(mask.get(r, c))
}

/// Fraction of each segment covered by the mask.
pub fn oracle_scorer(segments: &SegmentPartition, mask: &Mask) -> Result<Vec<f64>> {
    if segments.dims() != mask.dims() {
        return invalid("segments and mask must share dimensions");
    }
    let bits = mask.bits();
    Ok((0..segments.count())
        .map(|p| {
            let m = segments.members(p);
            m.iter().filter(|&&i| bits[i]).count() as f64 / m.len() as f64
        })
        .collect())
}

/// Mean `|A|` per segment, min-max normalized. Equal means give 0.5.
pub fn mean_attribution_scorer(segments: &SegmentPartition, a: &AttributionGrid) -> Result<Vec<f64>> {
    a.ensure_same_dims(segments.dims())?;
    let v = a.values();
    let means: Vec<f64> = (0..segments.count())
        .map(|p| {
            let m = segments.members(p);
            compensated_sum(m.iter().map(|&i| v[i].abs())) / m.len() as f64
        })
        .collect();
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return Ok(vec![0.5; means.len()]);
    }
    Ok(means.iter().map(|&m| ((m - lo) / (hi - lo)).clamp(0.0, 1.0)).collect())
}

/// Ground-truth overlap scorer for the refinement pipeline.
#[derive(Clone, Debug)]
pub struct OracleScorer {
    pub mask: Mask,
}

impl SegmentScorer for OracleScorer {
    fn score(&self, segments: &SegmentPartition, _: &AttributionGrid) -> Result<Vec<f64>> {
        oracle_scorer(segments, &self.mask)
    }
}

/// Model-free scorer driven by the attribution itself.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanAttributionScorer;

impl SegmentScorer for MeanAttributionScorer {
    fn score(&self, segments: &SegmentPartition, a: &AttributionGrid) -> Result<Vec<f64>> {
        mean_attribution_scorer(segments, a)
    }
}

/// Randomized instances used by [`verify_desiderata`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatteryConfig {
    pub trials: usize,
    pub seed: u64,
    /// Largest grid side.
    pub max_side: usize,
    /// Largest number of neighbourhoods per axis.
    pub max_blocks: usize,
    /// Largest number of segments.
    pub max_segments: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 0,
            max_side: 32,
            max_blocks: 8,
            max_segments: 12,
        }
    }
}

/// Tolerance on the mean mass discrepancy.
pub const D1_TOLERANCE: f64 = 1e-6;
/// Largest relative spread of conditioning ratios accepted as constant.
pub const D3_SPREAD: f64 = 0.01;
/// Largest change of an inside share under outside perturbation.
pub const D4_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassWitness {
    pub trial: usize,
    pub neighbourhood: usize,
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderWitness {
    pub trial: usize,
    pub neighbourhood: usize,
    /// Pixel with the higher score but the lower value.
    pub higher: Pixel,
    pub lower: Pixel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditioningWitness {
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationWitness {
    pub trial: usize,
    pub neighbourhood: usize,
    pub pixel: Pixel,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesiderataReport {
    pub method: String,
    pub trials: usize,
    /// Mean `|sum_{N_k} A~ - M_k|` over every neighbourhood of every trial.
    pub d1_error: f64,
    pub d1_max_error: f64,
    pub d1_pass: bool,
    pub d1_witness: Option<MassWitness>,
    pub d2_pass: bool,
    pub d2_witness: Option<OrderWitness>,
    pub d3_pass: bool,
    pub d3_witness: Option<ConditioningWitness>,
    /// Inside shares `A~(x) / sum_{N_k} A~` unchanged by outside edits.
    pub d4_pass: bool,
    pub d4_witness: Option<PerturbationWitness>,
    /// Inside values themselves unchanged.
    pub d4_strict_pass: bool,
    /// `sum A~ == sum M_k` on every trial.
    pub global_conservation_pass: bool,
}

impl DesiderataReport {
    /// Pass flags as a four-character `0`/`1` string.
    pub fn pattern(&self) -> String {
        [self.d1_pass, self.d2_pass, self.d3_pass, self.d4_pass]
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }
}

struct Instance {
    coarse: AttributionGrid,
    segments: SegmentPartition,
    hood: NeighbourhoodSystem,
}

// Random segments as nearest-seed cells (Manhattan metric) of random sites.
fn random_instance(config: &BatteryConfig, trial: usize) -> Result<Instance> {
    let mut rng = instance_rng(config.seed, trial as u64);
    let side = config.max_side.max(2);
    let h = rng.gen_range(2..=side);
    let w = rng.gen_range(2..=side);
    let kh = rng.gen_range(1..=config.max_blocks.clamp(1, h));
    let kw = rng.gen_range(1..=config.max_blocks.clamp(1, w));
    let hood = block_partition(h, w, kh, kw)?;
    let sites: Vec<(usize, usize)> = (0..rng.gen_range(1..=config.max_segments.max(1)))
        .map(|_| (rng.gen_range(0..h), rng.gen_range(0..w)))
        .collect();
    let raw: Vec<usize> = (0..h * w)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            (0..sites.len())
                .min_by_key(|&j| sites[j].0.abs_diff(r) + sites[j].1.abs_diff(c))
                .unwrap()
        })
        .collect();
    let map = LabelMap::compacted(h, w, &raw)?;
    let scores = (0..map.count()).map(|_| rng.gen::<f64>()).collect();
    let segments = SegmentPartition::new(map, scores)?;
    let coarse = AttributionGrid::from_fn(kh, kw, |_, _| rng.gen_range(-0.5..1.0))?;
    Ok(Instance { coarse, segments, hood })
}

#[derive(Default)]
struct TrialResult {
    abs_errors: Vec<f64>,
    worst: Option<MassWitness>,
    order: Option<OrderWitness>,
    perturbation: Option<PerturbationWitness>,
    strict_local: bool,
    globally_conserved: bool,
}

fn run_trial(method: &dyn Upsampler, config: &BatteryConfig, trial: usize) -> Result<TrialResult> {
    let Instance { coarse, segments, hood } = random_instance(config, trial)?;
    let out = method.upsample(&coarse, &segments, &hood)?;
    let target: Vec<f64> = (0..hood.count())
        .map(|k| coarse.values()[k] * hood.size(k) as f64)
        .collect();
    let got = neighbourhood_masses(&out, &hood)?;
    let abs_errors: Vec<f64> = got.iter().zip(&target).map(|(g, t)| (g - t).abs()).collect();
    let worst = abs_errors
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, &e)| MassWitness {
            trial,
            neighbourhood: k,
            error: e,
        });
    let total_target = compensated_sum(target.iter().copied());
    let scale = 1.0 + compensated_sum(target.iter().map(|t| t.abs()));
    let globally_conserved = (out.total() - total_target).abs() <= D1_TOLERANCE * scale;

    // ordering, only where both the given and the allocated mass are non-negative
    let v = out.values();
    let mut order = None;
    'hoods: for k in 0..hood.count() {
        if target[k] < 0.0 || got[k] < 0.0 {
            continue;
        }
        let members = hood.members(k);
        let slack = 1e-12 * (1.0 + target[k].abs());
        for &x in members {
            for &y in members {
                if segments.pixel_score(x) > segments.pixel_score(y) && v[x] < v[y] - slack {
                    order = Some(OrderWitness {
                        trial,
                        neighbourhood: k,
                        higher: hood.pixel(x),
                        lower: hood.pixel(y),
                    });
                    break 'hoods;
                }
            }
        }
    }

    // perturb every coarse cell except one and compare that cell's shares
    let mut rng = instance_rng(config.seed ^ 0x5eed_d4d4, trial as u64);
    let k = rng.gen_range(0..hood.count());
    let mut edited: Vec<f64> = coarse.values().iter().map(|a| a + rng.gen_range(0.5..1.5)).collect();
    edited[k] = coarse.values()[k];
    let edited = AttributionGrid::new(coarse.height(), coarse.width(), edited)?;
    let moved = method.upsample(&edited, &segments, &hood)?;
    let members = hood.members(k);
    let share = |g: &AttributionGrid| {
        let s = compensated_sum(members.iter().map(|&i| g.values()[i]));
        (s.abs() > 1e-9).then(|| members.iter().map(|&i| g.values()[i] / s).collect::<Vec<_>>())
    };
    let mut perturbation = None;
    if let (Some(before), Some(after)) = (share(&out), share(&moved)) {
        for (j, (b, a)) in before.iter().zip(&after).enumerate() {
            let delta = (a - b).abs();
            if delta > D4_TOLERANCE && perturbation.is_none_or(|w: PerturbationWitness| delta > w.delta) {
                perturbation = Some(PerturbationWitness {
                    trial,
                    neighbourhood: k,
                    pixel: hood.pixel(members[j]),
                    delta,
                });
            }
        }
    }
    let strict_local = members.iter().all(|&i| {
        let (a, b) = (out.values()[i], moved.values()[i]);
        (a - b).abs() <= D4_TOLERANCE * (1.0 + a.abs())
    });

    Ok(TrialResult {
        abs_errors,
        worst,
        order,
        perturbation,
        strict_local,
        globally_conserved,
    })
}

/// Two segments per neighbourhood with scores `s + 0.1` and `s`; returns the
/// value ratio of a high pixel to a low pixel for each `s`.
pub fn conditioning_ratios(method: &dyn Upsampler) -> Result<Vec<f64>> {
    let hood = block_partition(8, 8, 2, 2)?;
    let coarse = AttributionGrid::filled(2, 2, 1.0)?;
    let labels: Vec<usize> = (0..64).map(|i| usize::from((i % 8) % 4 >= 2)).collect();
    let map = LabelMap::new(8, 8, labels)?;
    (1..=8)
        .map(|i| {
            let s = i as f64 / 10.0;
            let segments = SegmentPartition::new(map.clone(), vec![s + 0.1, s])?;
            let out = method.upsample(&coarse, &segments, &hood)?;
            // (0, 0) is in the high segment, (0, 2) in the low one, both in block 0
            Ok(out.get(0, 0) / out.get(0, 2))
        })
        .collect()
}

/// Runs the randomized battery for D1, D2 and D4 plus the controlled D3
/// instances.
pub fn verify_desiderata(method: &dyn Upsampler, config: &BatteryConfig) -> Result<DesiderataReport> {
    if config.trials == 0 {
        return invalid("battery needs at least one trial");
    }
    let results = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(method, config, t))
        .collect::<Result<Vec<_>>>()?;

    let count: usize = results.iter().map(|r| r.abs_errors.len()).sum();
    let d1_error = compensated_sum(results.iter().flat_map(|r| r.abs_errors.iter().copied())) / count as f64;
    let d1_witness = results
        .iter()
        .filter_map(|r| r.worst)
        .fold(None, |acc: Option<MassWitness>, w| match acc {
            Some(a) if a.error >= w.error => Some(a),
            _ => Some(w),
        });
    let d1_max_error = d1_witness.map_or(0.0, |w| w.error);
    let d1_pass = d1_error <= D1_TOLERANCE;
    let d2_witness = results.iter().find_map(|r| r.order);
    let d4_witness = results.iter().find_map(|r| r.perturbation);

    let ratios = conditioning_ratios(method)?;
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d3_pass =
        ratios.iter().all(|r| r.is_finite()) && min_ratio > 1.0 + 1e-9 && max_ratio / min_ratio - 1.0 <= D3_SPREAD;

    Ok(DesiderataReport {
        method: method.name(),
        trials: config.trials,
        d1_error,
        d1_max_error,
        d1_pass,
        d1_witness: (!d1_pass).then_some(d1_witness).flatten(),
        d2_pass: d2_witness.is_none(),
        d2_witness,
        d3_pass,
        d3_witness: Some(ConditioningWitness { min_ratio, max_ratio }),
        d4_pass: d4_witness.is_none(),
        d4_witness,
        d4_strict_pass: results.iter().all(|r| r.strict_local),
        global_conservation_pass: results.iter().all(|r| r.globally_conserved),
    })
}
