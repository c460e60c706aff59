use std::fs;
use std::io::Write;

use serde_json::json;
use usu_core::io::{encode_grid, encode_mask};
use usu_core::synth::{gen_dataset, DatasetConfig};

use crate::error::{CliError, CliResult};
use crate::output::save_bytes;
use crate::{kinds_for, SynthArgs};

pub fn run(args: &SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    let config = DatasetConfig {
        kinds: kinds_for(&args.kind)?,
        per_class: args.count,
        size: args.size,
        resolutions: args.resolutions.clone(),
        seed: args.seed,
    };
    let data = gen_dataset(&config)?;
    fs::create_dir_all(&args.outdir).map_err(|e| CliError::Io(format!("{}: {e}", args.outdir.display())))?;

    let mut instances = Vec::with_capacity(data.len());
    for item in &data {
        let inst = &item.instance;
        let stem = format!("{:04}_{}", item.index, inst.kind);
        let mut files = vec![
            (format!("{stem}_image.usug"), encode_grid(&inst.image)),
            (format!("{stem}_mask.usug"), encode_mask(&inst.gt_mask)),
            (format!("{stem}_gt.usug"), encode_grid(&inst.gt_attribution)),
        ];
        for view in &item.coarse {
            files.push((
                format!("{stem}_coarse{}.usug", view.resolution),
                encode_grid(&view.coarse),
            ));
        }
        for (name, bytes) in &files {
            save_bytes(&args.outdir.join(name), bytes)?;
        }
        instances.push(json!({
            "index": item.index,
            "kind": inst.kind.to_string(),
            "seed": inst.seed,
            "files": files.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        }));
    }
    let manifest = json!({
        "kind": args.kind,
        "count_per_kind": args.count,
        "size": args.size,
        "seed": args.seed,
        "resolutions": args.resolutions,
        "instances": instances,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    save_bytes(&args.outdir.join("manifest.json"), format!("{text}\n").as_bytes())?;
    writeln!(out, "wrote {} instances to {}", data.len(), args.outdir.display())?;
    Ok(())
}
