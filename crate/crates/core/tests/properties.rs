use proptest::prelude::*;
use usu_core::io::{decode_grid, decode_labels, encode_grid, encode_partition};
use usu_core::refine::{hmap, merge};
use usu_core::synth::{gen_dataset, DatasetConfig, Family};
use usu_core::{
    block_partition, neighbourhood_masses, usu_upsample, AttributionGrid, LabelMap, MassInput, NeighbourhoodSystem,
    Potential, SegmentPartition,
};

#[derive(Debug, Clone)]
struct Case {
    hood: NeighbourhoodSystem,
    segments: SegmentPartition,
    coarse: Vec<f64>,
}

fn case() -> impl Strategy<Value = Case> {
    (2usize..20, 2usize..20, 1usize..5, 1usize..5, 1usize..6)
        .prop_flat_map(|(h, w, bh, bw, parts)| {
            let bh = bh.min(h);
            let bw = bw.min(w);
            (
                Just((h, w, bh, bw)),
                prop::collection::vec(0..parts, h * w),
                prop::collection::vec(0.0..1.0f64, parts),
                prop::collection::vec(-1.0..1.0f64, bh * bw),
            )
        })
        .prop_map(|((h, w, bh, bw), raw, scores, coarse)| {
            let map = LabelMap::compacted(h, w, &raw).unwrap();
            let scores = scores[..map.count()].to_vec();
            Case {
                hood: block_partition(h, w, bh, bw).unwrap(),
                segments: SegmentPartition::new(map, scores).unwrap(),
                coarse,
            }
        })
}

fn upsample(c: &Case, coarse: &[f64]) -> AttributionGrid {
    usu_upsample(MassInput::Coarse(coarse), &c.segments, &c.hood, &Potential::default()).unwrap()
}

proptest! {
    #[test]
    fn masses_are_conserved(c in case()) {
        let out = upsample(&c, &c.coarse);
        let masses = neighbourhood_masses(&out, &c.hood).unwrap();
        for (k, m) in masses.iter().enumerate() {
            let want = c.coarse[k] * c.hood.size(k) as f64;
            prop_assert!((m - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn higher_scores_get_more_mass(c in case()) {
        let out = upsample(&c, &c.coarse);
        for k in 0..c.hood.count() {
            if c.coarse[k] < 0.0 {
                continue;
            }
            for &i in c.hood.members(k) {
                for &j in c.hood.members(k) {
                    if c.segments.pixel_score(i) > c.segments.pixel_score(j) {
                        prop_assert!(out.values()[i] >= out.values()[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn other_neighbourhoods_do_not_matter(c in case(), k in 0usize..16, noise in prop::collection::vec(-3.0..3.0f64, 16)) {
        let k = k % c.hood.count();
        let perturbed: Vec<f64> = c.coarse.iter().enumerate().map(|(j, &v)| if j == k { v } else { v + noise[j % 16] }).collect();
        let a = upsample(&c, &c.coarse);
        let b = upsample(&c, &perturbed);
        for &i in c.hood.members(k) {
            prop_assert_eq!(a.values()[i], b.values()[i]);
        }
    }

    #[test]
    fn unrelated_segment_scores_do_not_matter(c in case(), bump in 0.0..1.0f64) {
        // a segment that touches no pixel of neighbourhood 0 cannot change it
        let inside: std::collections::BTreeSet<usize> =
            c.hood.members(0).iter().map(|&i| c.segments.map().label(i)).collect();
        if let Some(p) = (0..c.segments.count()).find(|p| !inside.contains(p)) {
            let mut scores = c.segments.scores().to_vec();
            scores[p] = bump;
            let other = Case { segments: c.segments.with_scores(scores).unwrap(), ..c.clone() };
            let a = upsample(&c, &c.coarse);
            let b = upsample(&other, &c.coarse);
            for &i in c.hood.members(0) {
                prop_assert_eq!(a.values()[i], b.values()[i]);
            }
        }
    }

    #[test]
    fn hmap_is_linear(
        a in prop::collection::vec(-1.0..1.0f64, 30),
        b in prop::collection::vec(-1.0..1.0f64, 30),
        s in -2.0..2.0f64,
    ) {
        let ga = AttributionGrid::new(5, 6, a).unwrap();
        let gb = AttributionGrid::new(5, 6, b).unwrap();
        let combined = hmap(&ga.zip_with(&gb, |x, y| x + s * y).unwrap());
        let (ha, hb) = (hmap(&ga), hmap(&gb));
        for i in 0..30 {
            prop_assert!((combined.values()[i] - (ha.values()[i] + s * hb.values()[i])).abs() <= 1e-12);
        }
    }

    #[test]
    fn merge_stays_between_inputs(x in -5.0..5.0f64, y in -5.0..5.0f64, a in 0.0..=1.0f64) {
        let g = |v| AttributionGrid::filled(1, 1, v).unwrap();
        let m = merge(&g(x), &g(y), &g(a)).unwrap().values()[0];
        prop_assert!(m >= x.min(y) - 1e-12 && m <= x.max(y) + 1e-12);
    }

    #[test]
    fn binary_formats_round_trip(c in case(), values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO | prop::num::f64::NEGATIVE | prop::num::f64::POSITIVE, 1..64)) {
        let grid = AttributionGrid::new(1, values.len(), values).unwrap();
        let back = decode_grid(&encode_grid(&grid)).unwrap();
        prop_assert!(grid.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let (map, scores) = decode_labels(&encode_partition(&c.segments)).unwrap();
        prop_assert_eq!(&map, c.segments.map());
        prop_assert_eq!(scores.as_slice(), c.segments.scores());
    }
}

#[test]
fn datasets_are_reproducible() {
    let mut config = DatasetConfig::new(Family::Shapes);
    config.per_class = 3;
    config.size = 32;
    config.seed = 11;
    let a = gen_dataset(&config).unwrap();
    let b = gen_dataset(&config).unwrap();
    assert_eq!(a, b);
    config.seed = 12;
    assert_ne!(a, gen_dataset(&config).unwrap());
}
