//! Fixtures shared by the benchmarks.

use usu_core::synth::{faithful_coarse, gen_instance, InstanceKind, ShapeKind};
use usu_core::{block_partition, threshold_segments, NeighbourhoodSystem, SegmentPartition};

/// A `size`x`size` circle instance with `blocks`x`blocks` neighbourhoods and
/// its coarse view.
pub struct Fixture {
    pub segments: SegmentPartition,
    pub hood: NeighbourhoodSystem,
    pub coarse: Vec<f64>,
}

pub fn fixture(size: usize, blocks: usize) -> Fixture {
    let inst = gen_instance(InstanceKind::Shape(ShapeKind::Circle), size, 0).unwrap();
    let hood = block_partition(size, size, blocks, blocks).unwrap();
    let coarse = faithful_coarse(&inst.gt_attribution, &hood).unwrap();
    let map = threshold_segments(&inst.image).unwrap();
    let scores = (0..map.count()).map(|p| 0.2 + 0.6 * (p % 2) as f64).collect();
    Fixture {
        segments: SegmentPartition::new(map, scores).unwrap(),
        hood,
        coarse,
    }
}
