use std::io::Write;

use usu_core::evaluate::{verify_desiderata, BatteryConfig, DesiderataReport};

use crate::error::{CliError, CliResult};
use crate::output::write_atomic;
use crate::VerifyArgs;

pub const REPORT_HEADER: [&str; 14] = [
    "method",
    "trials",
    "d1_error",
    "d1_max_error",
    "d1_pass",
    "d2_pass",
    "d3_pass",
    "d4_pass",
    "d4_strict_pass",
    "global_conservation_pass",
    "d1_witness",
    "d2_witness",
    "d3_witness",
    "d4_witness",
];

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// One CSV record; witnesses are space separated `key=value` lists.
pub fn report_record(r: &DesiderataReport) -> Vec<String> {
    let d1 = r
        .d1_witness
        .map(|w| format!("trial={} k={} error={:e}", w.trial, w.neighbourhood, w.error))
        .unwrap_or_default();
    let d2 = r
        .d2_witness
        .map(|w| {
            format!(
                "trial={} k={} higher={}:{} lower={}:{}",
                w.trial, w.neighbourhood, w.higher.0, w.higher.1, w.lower.0, w.lower.1
            )
        })
        .unwrap_or_default();
    let d3 = r
        .d3_witness
        .map(|w| format!("min_ratio={} max_ratio={}", w.min_ratio, w.max_ratio))
        .unwrap_or_default();
    let d4 = r
        .d4_witness
        .map(|w| {
            format!(
                "trial={} k={} pixel={}:{} delta={:e}",
                w.trial, w.neighbourhood, w.pixel.0, w.pixel.1, w.delta
            )
        })
        .unwrap_or_default();
    vec![
        r.method.clone(),
        r.trials.to_string(),
        format!("{:e}", r.d1_error),
        format!("{:e}", r.d1_max_error),
        flag(r.d1_pass).into(),
        flag(r.d2_pass).into(),
        flag(r.d3_pass).into(),
        flag(r.d4_pass).into(),
        flag(r.d4_strict_pass).into(),
        flag(r.global_conservation_pass).into(),
        d1,
        d2,
        d3,
        d4,
    ]
}

pub fn run(args: &VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let method = args.method.with_temperatures(args.epsilon, args.epsilon_lambda)?;
    let config = BatteryConfig {
        trials: args.trials,
        seed: args.seed,
        max_side: args.max_side,
        max_blocks: args.max_blocks,
        ..BatteryConfig::default()
    };
    let report = verify_desiderata(&method, &config)?;
    if let Some(path) = &args.report {
        write_atomic(path, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(REPORT_HEADER)?;
            csv.write_record(report_record(&report))?;
            csv.flush()?;
            Ok(())
        })?;
    }
    writeln!(out, "method   {}", report.method)?;
    writeln!(out, "trials   {}", report.trials)?;
    writeln!(out, "d1_error {:e} (max {:e})", report.d1_error, report.d1_max_error)?;
    writeln!(out, "pattern  {}", report.pattern())?;
    writeln!(
        out,
        "strict locality {}, global conservation {}",
        flag(report.d4_strict_pass),
        flag(report.global_conservation_pass)
    )?;
    if let Some(expected) = &args.expect {
        if report.pattern() != *expected {
            return Err(CliError::Mismatch(format!(
                "pattern {} differs from expected {expected}",
                report.pattern()
            )));
        }
        writeln!(out, "matches expected pattern {expected}")?;
    }
    Ok(())
}
