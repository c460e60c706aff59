//! Synthetic benchmark: best IoU, concentration and pointing game of each
//! method against the ground-truth foreground.

use std::io::Write;

use rayon::prelude::*;
use usu_core::evaluate::{
    concentration, iou_best, mean_attribution_scorer, oracle_scorer, pointing_game, OracleScorer,
};
use usu_core::refine::{refine_pipeline, RefineConfig};
use usu_core::synth::{gen_dataset, DatasetConfig, DatasetItem, Family};
use usu_core::{
    block_partition, piecewise_constant_expand, threshold_segments, LabelMap, Method, SegmentPartition, Upsampler,
};

use crate::error::{CliError, CliResult};
use crate::output::write_atomic;
use crate::{BenchArgs, OracleMode};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub family: Family,
    pub methods: Vec<Method>,
    pub resolutions: Vec<usize>,
    pub oracle: OracleMode,
    pub seed: u64,
    pub per_class: usize,
    pub size: usize,
    pub max_depth: usize,
}

impl BenchConfig {
    pub fn new(family: Family, methods: Vec<Method>, oracle: OracleMode) -> Self {
        Self {
            family,
            methods,
            resolutions: vec![7],
            oracle,
            seed: 0,
            per_class: 30,
            size: 64,
            max_depth: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub index: usize,
    pub kind: String,
    pub resolution: usize,
    pub method: String,
    pub iou: f64,
    pub concentration: f64,
    pub pointing: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSummary {
    pub method: String,
    pub resolution: usize,
    pub instances: usize,
    pub iou: f64,
    pub concentration: f64,
    pub pointing: f64,
}

fn evaluate_item(item: &DatasetItem, config: &BenchConfig) -> CliResult<Vec<BenchRow>> {
    let inst = &item.instance;
    let size = config.size;
    let mut rows = Vec::new();
    for view in &item.coarse {
        let res = view.resolution;
        let hood = block_partition(size, size, res, res)?;
        let expanded = piecewise_constant_expand(view.coarse.values(), &hood)?;
        let mut refined = None;
        let segments = match config.oracle {
            OracleMode::Full => {
                let labels: Vec<usize> = inst.gt_mask.bits().iter().map(|&b| usize::from(b)).collect();
                let map = LabelMap::compacted(size, size, &labels)?;
                let s = SegmentPartition::uniform(map, 0.5)?;
                let scores = oracle_scorer(&s, &inst.gt_mask)?;
                s.with_scores(scores)?
            }
            OracleMode::Scores => {
                let start = SegmentPartition::uniform(block_partition(size, size, 2, 2)?.map().clone(), 0.5)?;
                let refine = RefineConfig {
                    max_depth: config.max_depth,
                    ..RefineConfig::default()
                };
                let scorer = OracleScorer {
                    mask: inst.gt_mask.clone(),
                };
                let potential = match config.methods.iter().find(|m| matches!(m, Method::Usu { .. })) {
                    Some(Method::Usu { potential }) => *potential,
                    _ => usu_core::Potential::default(),
                };
                let outcome = refine_pipeline(&expanded, &hood, &start, &scorer, &refine, &potential)?;
                let finest = outcome.hierarchy.finest().clone();
                refined = Some(outcome.attribution);
                finest
            }
            OracleMode::None => {
                let s = SegmentPartition::uniform(threshold_segments(&inst.image)?, 0.5)?;
                let scores = mean_attribution_scorer(&s, &expanded)?;
                s.with_scores(scores)?
            }
        };
        for method in &config.methods {
            let result = match (method, &refined) {
                (Method::Usu { .. }, Some(a)) => a.clone(),
                _ => method.upsample(&view.coarse, &segments, &hood)?,
            };
            rows.push(BenchRow {
                index: item.index,
                kind: inst.kind.to_string(),
                resolution: res,
                method: method.name(),
                iou: iou_best(&result, &inst.gt_mask)?,
                concentration: concentration(&result, &inst.gt_mask)?,
                pointing: pointing_game(&result, &inst.gt_mask)?,
            });
        }
    }
    Ok(rows)
}

pub fn run_benchmark(config: &BenchConfig) -> CliResult<Vec<BenchRow>> {
    if config.methods.is_empty() {
        return Err(CliError::Usage("no methods to benchmark".into()));
    }
    let data = gen_dataset(&DatasetConfig {
        kinds: config.family.kinds(),
        per_class: config.per_class,
        size: config.size,
        resolutions: config.resolutions.clone(),
        seed: config.seed,
    })?;
    let rows = data
        .par_iter()
        .map(|item| evaluate_item(item, config))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Means per (method, resolution), in first-appearance order.
pub fn summarize(rows: &[BenchRow]) -> Vec<BenchSummary> {
    let mut out: Vec<BenchSummary> = Vec::new();
    for row in rows {
        let slot = match out
            .iter()
            .position(|s| s.method == row.method && s.resolution == row.resolution)
        {
            Some(i) => i,
            None => {
                out.push(BenchSummary {
                    method: row.method.clone(),
                    resolution: row.resolution,
                    instances: 0,
                    iou: 0.0,
                    concentration: 0.0,
                    pointing: 0.0,
                });
                out.len() - 1
            }
        };
        let s = &mut out[slot];
        s.instances += 1;
        s.iou += row.iou;
        s.concentration += row.concentration;
        s.pointing += f64::from(u8::from(row.pointing));
    }
    for s in &mut out {
        let n = s.instances as f64;
        s.iou /= n;
        s.concentration /= n;
        s.pointing /= n;
    }
    out
}

pub fn run_command(args: &BenchArgs, out: &mut dyn Write) -> CliResult<()> {
    let config = BenchConfig {
        family: args.dataset.parse()?,
        methods: args.methods.clone(),
        resolutions: args.resolutions.clone(),
        oracle: args.oracle,
        seed: args.seed,
        per_class: args.per_class,
        size: args.size,
        max_depth: args.max_depth,
    };
    let rows = run_benchmark(&config)?;
    if let Some(path) = &args.out {
        write_atomic(path, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record([
                "index",
                "kind",
                "resolution",
                "method",
                "iou",
                "concentration",
                "pointing",
            ])?;
            for r in &rows {
                csv.write_record([
                    r.index.to_string(),
                    r.kind.clone(),
                    r.resolution.to_string(),
                    r.method.clone(),
                    r.iou.to_string(),
                    r.concentration.to_string(),
                    u8::from(r.pointing).to_string(),
                ])?;
            }
            csv.flush()?;
            Ok(())
        })?;
    }
    writeln!(
        out,
        "{:<10} {:>4} {:>6} {:>8} {:>8} {:>8}",
        "method", "res", "n", "iou", "conc", "pg"
    )?;
    for s in summarize(&rows) {
        writeln!(
            out,
            "{:<10} {:>4} {:>6} {:>8.4} {:>8.4} {:>8.4}",
            s.method, s.resolution, s.instances, s.iou, s.concentration, s.pointing
        )?;
    }
    Ok(())
}
