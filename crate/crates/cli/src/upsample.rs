use std::io::Write;

use usu_core::evaluate::MeanAttributionScorer;
use usu_core::io::{encode_partition, load_neighbourhoods, load_partition};
use usu_core::refine::refine_pipeline;
use usu_core::{block_partition, piecewise_constant_expand, Method, Upsampler};

use crate::error::{CliError, CliResult};
use crate::output::{load_grid, save_bytes, save_grid, save_pgm};
use crate::UpsampleArgs;

pub fn run(args: &UpsampleArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let method = args.method.with_temperatures(args.epsilon, args.epsilon_lambda)?;
    if method.uses_scores() && args.segments.is_none() {
        return Err(CliError::Usage(format!("--method {method} requires --segments")));
    }
    if args.refine.refine && !matches!(method, Method::Usu { .. }) {
        return Err(CliError::Usage("--refine is only available with --method usu".into()));
    }
    let coarse = load_grid(&args.coarse, args.format)?;
    let segments = args.segments.as_deref().map(load_partition).transpose()?;
    if !method.uses_scores() && segments.is_some() {
        writeln!(
            err,
            "usu: warning: {method} does not read segment scores; --segments is ignored"
        )?;
    }
    let target = match (args.target, &segments) {
        (Some(t), Some(s)) if t != s.dims() => {
            return Err(CliError::Usage(format!(
                "--target {}x{} does not match the {}x{} segment map",
                t.0,
                t.1,
                s.height(),
                s.width()
            )))
        }
        (Some(t), _) => t,
        (None, Some(s)) => s.dims(),
        (None, None) => return Err(CliError::Usage("--target is required without --segments".into())),
    };
    let hood = match &args.neighbourhoods {
        Some(path) => {
            if !method.uses_scores() {
                return Err(CliError::Usage(
                    "interpolation kernels need the default block neighbourhoods".into(),
                ));
            }
            let hood = load_neighbourhoods(path)?;
            if hood.dims() != target || hood.count() != coarse.len() {
                return Err(CliError::Usage(format!(
                    "neighbourhood map has {} parts over {}x{}; expected {} parts over {}x{}",
                    hood.count(),
                    hood.height(),
                    hood.width(),
                    coarse.len(),
                    target.0,
                    target.1
                )));
            }
            hood
        }
        None => block_partition(target.0, target.1, coarse.height(), coarse.width())?,
    };
    // interpolation ignores the partition, so any placeholder works there
    let segments = match segments {
        Some(s) => s,
        None => usu_core::SegmentPartition::uniform(hood.map().clone(), 0.5)?,
    };

    let result = if args.refine.refine {
        let Method::Usu { potential } = method else {
            unreachable!()
        };
        let expanded = piecewise_constant_expand(coarse.values(), &hood)?;
        let outcome = refine_pipeline(
            &expanded,
            &hood,
            &segments,
            &MeanAttributionScorer,
            &args.refine.config(),
            &potential,
        )?;
        if let Some(dir) = &args.refine.export_hierarchy {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            for (d, level) in outcome.hierarchy.levels().iter().enumerate() {
                save_bytes(&dir.join(format!("level{d}.usul")), &encode_partition(level))?;
            }
        }
        writeln!(out, "refinement depth {}", outcome.hierarchy.depth())?;
        outcome.attribution
    } else {
        method.upsample(&coarse, &segments, &hood)?
    };

    save_grid(&args.out, &result, args.format)?;
    if let Some(pgm) = &args.export_pgm {
        save_pgm(pgm, &result)?;
    }
    writeln!(
        out,
        "{method}: {}x{} -> {}x{}, total mass {:.6e}",
        coarse.height(),
        coarse.width(),
        result.height(),
        result.width(),
        result.total()
    )?;
    Ok(())
}
