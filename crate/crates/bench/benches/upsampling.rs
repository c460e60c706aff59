use criterion::{black_box, criterion_group, criterion_main, Criterion};
use usu_bench::fixture;
use usu_core::evaluate::MeanAttributionScorer;
use usu_core::refine::{hmap, refine_pipeline, RefineConfig};
use usu_core::{
    block_partition, piecewise_constant_expand, usu_upsample, AttributionGrid, KernelFamily, MassInput, Method,
    Potential, SegmentPartition, Upsampler,
};

fn usu_224(c: &mut Criterion) {
    let f = fixture(224, 7);
    let potential = Potential::default();
    c.bench_function("usu 224x224 K=49", |b| {
        b.iter(|| {
            usu_upsample(
                MassInput::Coarse(black_box(&f.coarse)),
                &f.segments,
                &f.hood,
                &potential,
            )
            .unwrap()
        })
    });
}

fn bilinear_224(c: &mut Criterion) {
    let f = fixture(224, 7);
    let coarse = AttributionGrid::new(7, 7, f.coarse.clone()).unwrap();
    let method = Method::interp(KernelFamily::Bilinear);
    c.bench_function("bilinear 224x224 from 7x7", |b| {
        b.iter(|| method.upsample(black_box(&coarse), &f.segments, &f.hood).unwrap())
    });
}

fn hmap_224(c: &mut Criterion) {
    let f = fixture(224, 7);
    let field = piecewise_constant_expand(&f.coarse, &f.hood).unwrap();
    c.bench_function("hmap 224x224", |b| b.iter(|| hmap(black_box(&field))));
}

fn refine_64(c: &mut Criterion) {
    let f = fixture(64, 7);
    let field = piecewise_constant_expand(&f.coarse, &f.hood).unwrap();
    let start = SegmentPartition::uniform(block_partition(64, 64, 2, 2).unwrap().map().clone(), 0.5).unwrap();
    let config = RefineConfig::default();
    let potential = Potential::default();
    c.bench_function("refine 64x64 depth 4", |b| {
        b.iter(|| {
            refine_pipeline(
                black_box(&field),
                &f.hood,
                &start,
                &MeanAttributionScorer,
                &config,
                &potential,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, usu_224, bilinear_224, hmap_224, refine_64);
criterion_main!(benches);
