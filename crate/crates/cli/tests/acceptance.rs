//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; the process fails if any
//! criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use usu_cli::bench::{run_benchmark, summarize, BenchConfig, BenchSummary};
use usu_cli::OracleMode;
use usu_core::evaluate::{alpha_beta, mass_imbalance, verify_desiderata, BatteryConfig};
use usu_core::interp::{locality_violation_witness, mass_leak_witness, monotonicity_counterexample};
use usu_core::iwmr::iwmr_redistribute;
use usu_core::refine::{boundary_segments, comparator, hmap, merge, refine_pipeline, RefineConfig};
use usu_core::synth::{faithful_coarse, Family};
use usu_core::usu::usu_weights;
use usu_core::{
    block_partition, neighbourhood_masses, AttributionGrid, KernelFamily, KernelSpec, LabelMap, MassInput, Method,
    NeighbourhoodSystem, Potential, SegmentPartition,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = (&'static str, fn() -> Outcome);

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

struct Random {
    segments: SegmentPartition,
    hood: NeighbourhoodSystem,
    coarse: Vec<f64>,
}

// Random block neighbourhoods, random segments from stripes of random
// labels, random scores and coarse values.
fn random_case(rng: &mut ChaCha8Rng, max_side: usize, non_negative: bool) -> Random {
    let h = rng.gen_range(2..=max_side);
    let w = rng.gen_range(2..=max_side);
    let hood = block_partition(h, w, rng.gen_range(1..=h.min(8)), rng.gen_range(1..=w.min(8))).unwrap();
    let parts = rng.gen_range(1..=10usize);
    let raw: Vec<usize> = (0..h * w).map(|_| rng.gen_range(0..parts)).collect();
    let map = LabelMap::compacted(h, w, &raw).unwrap();
    let scores = (0..map.count()).map(|_| rng.gen::<f64>()).collect();
    let lo = if non_negative { 0.0 } else { -1.0 };
    let coarse = (0..hood.count()).map(|_| rng.gen_range(lo..1.0)).collect();
    Random {
        segments: SegmentPartition::new(map, scores).unwrap(),
        hood,
        coarse,
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let config = BatteryConfig {
        trials: 500,
        seed: 1,
        max_side: 128,
        max_blocks: 16,
        max_segments: 24,
    };
    let r = verify_desiderata(&Method::usu(), &config).unwrap();
    let t = start.elapsed();
    let pass = r.d1_max_error <= 1e-9 && r.d1_error <= 1e-12 && within(t, 10);
    outcome(
        pass,
        format!(
            "mean d1_error {:.3e}, max {:.3e}, {:.2?}",
            r.d1_error, r.d1_max_error, t
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;
    let coarse = AttributionGrid::new(2, 2, vec![0.0, 1.0, 0.2, 0.5]).unwrap();
    for family in [KernelFamily::Bilinear, KernelFamily::Bicubic, KernelFamily::Lanczos3] {
        let k = KernelSpec::new(family);
        let leak: f64 = mass_leak_witness(k, (2, 2), (8, 8), (0, 0))
            .unwrap()
            .iter()
            .map(|v| v.abs())
            .sum();
        let local = locality_violation_witness(k, (2, 2), (8, 8), (0, 0), (0, 1)).unwrap();
        let mono = monotonicity_counterexample(k, &coarse, (8, 8)).unwrap();
        pass &= leak > 1e-6 && local.delta != 0.0 && mono.is_some();
        notes.push(format!("{family} leak {leak:.3} locality {:.3}", local.delta));
    }
    let nearest = KernelSpec::new(KernelFamily::Nearest);
    let leak: f64 = mass_leak_witness(nearest, (2, 2), (8, 8), (0, 0))
        .unwrap()
        .iter()
        .map(|v| v.abs())
        .sum();
    pass &= leak == 0.0;
    notes.push(format!("nearest leak {leak}"));
    let t = start.elapsed();
    pass &= within(t, 5);
    outcome(pass, format!("{}, {:.2?}", notes.join("; "), t))
}

fn criterion_3() -> Outcome {
    let expected = [
        ("usu", "1111"),
        ("bilinear", "0000"),
        ("bicubic", "0000"),
        ("lanczos3", "0000"),
        ("iwmr", "0111"),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (method, pattern) in expected {
        let status = Command::new(env!("CARGO_BIN_EXE_usu"))
            .args(["verify", "--method", method, "--expect", pattern])
            .output()
            .unwrap();
        let ok = status.status.success();
        pass &= ok;
        notes.push(format!("{method} {}", if ok { pattern } else { "mismatch" }));
    }
    for family in [KernelFamily::Bilinear, KernelFamily::Bicubic, KernelFamily::Lanczos3] {
        let r = verify_desiderata(&Method::interp(family), &BatteryConfig::default()).unwrap();
        pass &= r.d1_error > 1e-3;
        notes.push(format!("{family} d1_error {:.3e}", r.d1_error));
    }
    outcome(pass, notes.join("; "))
}

fn criterion_4() -> Outcome {
    let tensor = Potential::default();
    let ratios: Vec<f64> = (0..10)
        .map(|i| tensor.conditioning_ratio(i as f64 / 10.0, 0.1).unwrap())
        .collect();
    let spread = ratios.iter().map(|r| (r / ratios[0] - 1.0).abs()).fold(0.0, f64::max);
    let power = Potential::power_law(2.0).unwrap();
    let low = power.conditioning_ratio(0.1, 0.1).unwrap();
    let high = power.conditioning_ratio(0.8, 0.1).unwrap();
    let pass = spread <= 1e-12 && (low - 4.0).abs() <= 1e-9 && (high - 1.265625).abs() <= 1e-9;
    outcome(
        pass,
        format!("tensor spread {spread:.2e}; power-law {low:.12} / {high:.12}"),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_total: f64 = 0.0;
    let mut worst_flow: f64 = 0.0;
    let mut identical = true;
    for _ in 0..200 {
        let c = random_case(&mut rng, 40, false);
        let pot = Potential::default();
        let out = iwmr_redistribute(MassInput::Coarse(&c.coarse), &c.segments, &c.hood, &pot, 0.1).unwrap();
        let total: f64 = out.original_masses.iter().sum();
        let scale = 1.0 + out.original_masses.iter().map(|m| m.abs()).sum::<f64>();
        let redistributed = usu_core::numeric::compensated_sum(out.redistributed_masses.iter().copied());
        let flow = usu_core::numeric::compensated_sum(
            out.redistributed_masses
                .iter()
                .zip(&out.original_masses)
                .map(|(a, b)| a - b),
        );
        worst_total = worst_total.max((redistributed - total).abs() / scale);
        worst_flow = worst_flow.max(flow.abs() / scale);
        identical &= out.weights == usu_weights(&c.segments, &c.hood, &pot).unwrap();
    }
    let pass = worst_total <= 1e-9 && worst_flow <= 1e-9 && identical;
    outcome(
        pass,
        format!("budget error {worst_total:.2e}, net flow {worst_flow:.2e}, weights identical {identical}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let side = rng.gen_range(8..=32);
        let hood = block_partition(side, side, rng.gen_range(1..=6), rng.gen_range(1..=6)).unwrap();
        let a = AttributionGrid::from_fn(side, side, |_, _| rng.gen_range(-0.2..1.0)).unwrap();
        let s0 = SegmentPartition::uniform(block_partition(side, side, 2, 2).unwrap().map().clone(), 0.5).unwrap();
        let cx = rng.gen_range(0.0..side as f64);
        let cy = rng.gen_range(0.0..side as f64);
        let radius = rng.gen_range(2.0..side as f64 / 2.0);
        let fg: Vec<bool> = (0..side * side)
            .map(|i| ((i / side) as f64 + 0.5 - cy).hypot((i % side) as f64 + 0.5 - cx) <= radius)
            .collect();
        let scorer = move |s: &SegmentPartition, _: &AttributionGrid| {
            Ok((0..s.count())
                .map(|p| s.members(p).iter().filter(|&&i| fg[i]).count() as f64 / s.size(p) as f64)
                .collect::<Vec<_>>())
        };
        for max_depth in 1..=5 {
            let config = RefineConfig {
                max_depth,
                ..RefineConfig::default()
            };
            let out = refine_pipeline(&a, &hood, &s0, &scorer, &config, &Potential::default()).unwrap();
            let total = a.total();
            let scale = total.abs().max(1e-300);
            for st in &out.states {
                worst = worst.max((st.attribution.total() - total).abs() / scale);
            }
            let levels = out.hierarchy.levels();
            assert!(levels
                .windows(2)
                .all(|p| usu_core::grid::is_refinement(p[1].map(), p[0].map()).unwrap()));
        }
    }
    let conserved = worst <= 1e-9;

    // H-map linearity and zero on constant interiors, every binary 3x3 pair
    let fields: Vec<AttributionGrid> = (0..512u32)
        .map(|bits| AttributionGrid::from_fn(3, 3, |r, c| f64::from((bits >> (r * 3 + c)) & 1)).unwrap())
        .collect();
    let maps: Vec<AttributionGrid> = fields.iter().map(hmap).collect();
    let mut linear = true;
    for (i, f1) in fields.iter().enumerate() {
        for (j, f2) in fields.iter().enumerate().skip(i) {
            let sum = hmap(&f1.zip_with(f2, |a, b| a + 0.75 * b).unwrap());
            linear &= sum
                .values()
                .iter()
                .zip(maps[i].values().iter().zip(maps[j].values()))
                .all(|(s, (a, b))| (s - (a + 0.75 * b)).abs() <= 1e-12);
        }
    }
    let mut zero_interior = true;
    for bits in 0..(1u32 << 16) {
        let f = AttributionGrid::from_fn(4, 4, |r, c| f64::from((bits >> (r * 4 + c)) & 1)).unwrap();
        let h = hmap(&f);
        for (r, c) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            let v = f.get(r, c);
            let flat = (r - 1..=r + 1).all(|rr| (c - 1..=c + 1).all(|cc| f.get(rr, cc) == v));
            zero_interior &= !flat || h.get(r, c) == 0.0;
        }
    }

    // threshold monotonicity over random fields and thresholds
    let mut monotone = true;
    for _ in 0..500 {
        let h = AttributionGrid::from_fn(6, 6, |_, _| rng.gen_range(-2.0..2.0)).unwrap();
        let raw: Vec<usize> = (0..36).map(|_| rng.gen_range(0..5)).collect();
        let s = SegmentPartition::uniform(LabelMap::compacted(6, 6, &raw).unwrap(), 0.5).unwrap();
        let (t1, t2) = (rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        monotone &= boundary_segments(&h, &s, hi)
            .unwrap()
            .is_subset(&boundary_segments(&h, &s, lo).unwrap());
    }

    // merge identity and boundedness over a grid of inputs and weights
    let levels: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
    let mut merge_ok = true;
    for &x in &levels {
        for &y in &levels {
            for &a in &levels[1..8] {
                let g = |v| AttributionGrid::filled(1, 1, v).unwrap();
                let m = merge(&g(x), &g(y), &g(a)).unwrap().values()[0];
                merge_ok &= (0.0..=1.0).contains(&m) && m >= x.min(y) && m <= x.max(y);
                merge_ok &= merge(&g(x), &g(x), &g(a)).unwrap().values()[0] == x;
            }
        }
    }

    // comparator symmetry and self-falseness
    let mut comparator_ok = true;
    for _ in 0..500 {
        let a = AttributionGrid::from_fn(4, 5, |_, _| rng.gen::<f64>()).unwrap();
        let b = AttributionGrid::from_fn(4, 5, |_, _| rng.gen::<f64>()).unwrap();
        let tol = rng.gen_range(0.01..2.0);
        comparator_ok &= !comparator(&a, &a, tol).unwrap();
        comparator_ok &= comparator(&a, &b, tol).unwrap() == comparator(&b, &a, tol).unwrap();
    }

    let t = start.elapsed();
    let pass = conserved && linear && zero_interior && monotone && merge_ok && comparator_ok && within(t, 30);
    outcome(
        pass,
        format!(
            "mass drift {worst:.2e}; linear {linear}, zero-interior {zero_interior}, monotone {monotone}, merge {merge_ok}, comparator {comparator_ok}, {t:.2?}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut exclusive = true;
    for _ in 0..200 {
        let est = AttributionGrid::from_fn(8, 8, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
        let truth = AttributionGrid::from_fn(8, 8, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
        let e = alpha_beta(&est, &truth).unwrap();
        for i in 0..64 {
            let (a, b) = (e.alpha.values()[i], e.beta.values()[i]);
            let gap = (est.values()[i].abs() - truth.values()[i].abs()).abs();
            exclusive &= a * b == 0.0 && (a + b - gap).abs() <= 1e-12;
        }
    }
    let mut bounded = true;
    let mut faithful_worst: f64 = 0.0;
    for _ in 0..500 {
        let c = random_case(&mut rng, 24, true);
        let (h, w) = c.hood.dims();
        let truth =
            AttributionGrid::from_fn(h, w, |_, _| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() }).unwrap();
        let est = AttributionGrid::from_fn(h, w, |_, _| rng.gen::<f64>()).unwrap();
        let e = alpha_beta(&est, &truth).unwrap();
        let m = mass_imbalance(&est, &truth, &c.hood).unwrap();
        let sa = neighbourhood_masses(&e.alpha, &c.hood).unwrap();
        let sb = neighbourhood_masses(&e.beta, &c.hood).unwrap();
        for k in 0..c.hood.count() {
            bounded &= sa[k] >= m.excess[k] - 1e-12 && sb[k] >= m.deficit[k] - 1e-12;
        }
        let coarse = faithful_coarse(&truth, &c.hood).unwrap();
        let up =
            usu_core::usu_upsample(MassInput::Coarse(&coarse), &c.segments, &c.hood, &Potential::default()).unwrap();
        let f = mass_imbalance(&up, &truth, &c.hood).unwrap();
        faithful_worst = f
            .deficit
            .iter()
            .chain(&f.excess)
            .copied()
            .fold(faithful_worst, f64::max);
    }
    let pass = exclusive && bounded && faithful_worst <= 1e-9;
    outcome(
        pass,
        format!("exclusive {exclusive}, bounds {bounded}, faithful imbalance {faithful_worst:.2e}"),
    )
}

fn summary_for<'a>(rows: &'a [BenchSummary], method: &str) -> &'a BenchSummary {
    rows.iter().find(|s| s.method == method).unwrap()
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let config = BenchConfig::new(Family::Shapes, vec![Method::usu(), Method::iwmr()], OracleMode::Full);
    let summary = summarize(&run_benchmark(&config).unwrap());
    let t = start.elapsed();
    let mut pass = within(t, 30);
    let mut notes = Vec::new();
    for s in &summary {
        pass &= s.instances == 90 && s.iou >= 0.99 && s.pointing == 1.0;
        notes.push(format!("{} iou {:.4} pg {:.3}", s.method, s.iou, s.pointing));
    }
    outcome(pass, format!("{}, {t:.2?}", notes.join("; ")))
}

fn criterion_9() -> Outcome {
    let methods = vec![Method::usu(), Method::interp(KernelFamily::Bilinear)];
    let config = BenchConfig::new(Family::Shapes, methods, OracleMode::None);
    let summary = summarize(&run_benchmark(&config).unwrap());
    let usu = summary_for(&summary, "usu");
    let bil = summary_for(&summary, "bilinear");
    let pass = usu.iou > bil.iou && usu.concentration > bil.concentration && usu.pointing >= bil.pointing;
    outcome(
        pass,
        format!(
            "usu iou {:.4} conc {:.4} pg {:.3} vs bilinear iou {:.4} conc {:.4} pg {:.3}",
            usu.iou, usu.concentration, usu.pointing, bil.iou, bil.concentration, bil.pointing
        ),
    )
}

// Direct transcription of the weight formula, without shifts or
// compensated sums.
fn naive_weights(scores: &[f64], phi: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut z = 0.0;
    for &s in scores {
        z += phi(s);
    }
    scores.iter().map(|&s| phi(s) / z).collect()
}

fn criterion_10() -> Outcome {
    let alphabet = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;
    for n in 1..=6usize {
        let hood = NeighbourhoodSystem::new(1, n, vec![0; n]).unwrap();
        let map = LabelMap::new(1, n, (0..n).collect()).unwrap();
        for code in 0..alphabet.len().pow(n as u32) {
            let scores: Vec<f64> = (0..n)
                .map(|i| alphabet[code / alphabet.len().pow(i as u32) % alphabet.len()])
                .collect();
            let segments = SegmentPartition::new(map.clone(), scores.clone()).unwrap();
            for eps in [0.1, 0.5] {
                let got = usu_weights(&segments, &hood, &Potential::tensor(eps).unwrap()).unwrap();
                let want = naive_weights(&scores, |s| ((s - 0.5) / eps).exp());
                worst = got
                    .values()
                    .iter()
                    .zip(&want)
                    .map(|(a, b)| (a - b).abs())
                    .fold(worst, f64::max);
                cases += 1;
            }
            if scores.iter().all(|&s| s > 0.0) {
                let got = usu_weights(&segments, &hood, &Potential::power_law(2.0).unwrap()).unwrap();
                let want = naive_weights(&scores, |s| s * s);
                worst = got
                    .values()
                    .iter()
                    .zip(&want)
                    .map(|(a, b)| (a - b).abs())
                    .fold(worst, f64::max);
                cases += 1;
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!("{cases} weight vectors, max deviation {worst:.2e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Check; 10] = [
        ("D1 conservation at scale", criterion_1),
        ("interpolation violations", criterion_2),
        ("desiderata patterns via verify", criterion_3),
        ("conditioning ratios", criterion_4),
        ("IWMR budget conservation", criterion_5),
        ("hierarchical pipeline properties", criterion_6),
        ("error decomposition", criterion_7),
        ("oracle reproduction", criterion_8),
        ("model-free scorer beats bilinear", criterion_9),
        ("brute-force weight equivalence", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<34} {}  {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
