//! Pixel lattices, neighbourhood systems, segment partitions and the
//! geometric primitives (adjacency, boundaries, refinement) built on them.
//!
//! All grids are row-major with `(row, col)` indexing and the origin at the
//! top-left corner.

use std::collections::BTreeSet;
use std::ops::Deref;

use crate::error::{invalid, Result, UsuError};
use crate::numeric::compensated_sum;

/// A lattice site as `(row, col)`.
pub type Pixel = (usize, usize);

/// Dense `height x width` real field. Values are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributionGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl AttributionGrid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return invalid(format!("grid dimensions must be positive, got {height}x{width}"));
        }
        if values.len() != height * width {
            return invalid(format!(
                "grid {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(UsuError::Domain(format!("non-finite value at flat index {i}")));
        }
        Ok(Self { height, width, values })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::filled(height, width, 0.0)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Compensated total over the lattice.
    pub fn total(&self) -> f64 {
        compensated_sum(self.values.iter().copied())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.height, self.width, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.map(|v| v * factor)
    }

    /// Pointwise combination of two grids of equal shape.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_dims(other.dims())?;
        Self::new(
            self.height,
            self.width,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub(crate) fn ensure_same_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return invalid(format!(
                "dimension mismatch: {}x{} vs {}x{}",
                self.height, self.width, dims.0, dims.1
            ));
        }
        Ok(())
    }
}

/// Binary field over the lattice, e.g. a ground-truth foreground.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 || bits.len() != height * width {
            return invalid(format!("mask of {} bits cannot be {height}x{width}", bits.len()));
        }
        Ok(Self { height, width, bits })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let bits = (0..height * width)
            .map(|i| f(i / width.max(1), i % width.max(1)))
            .collect();
        Self::new(height, width, bits)
    }

    /// Pixels with a nonzero value.
    pub fn support(grid: &AttributionGrid) -> Self {
        Self {
            height: grid.height,
            width: grid.width,
            bits: grid.values.iter().map(|&v| v != 0.0).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// The mask as a 0/1 field.
    pub fn to_grid(&self) -> AttributionGrid {
        AttributionGrid {
            height: self.height,
            width: self.width,
            values: self.bits.iter().map(|&b| f64::from(u8::from(b))).collect(),
        }
    }
}

/// A partition of the lattice into labelled, non-empty parts.
///
/// Members of each part are stored in row-major order, which fixes the
/// reduction order of every per-part sum.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<usize>,
    count: usize,
    offsets: Vec<usize>,
    members: Vec<usize>,
}

impl LabelMap {
    /// Builds a label map; labels must cover `0..count` with no empty part.
    pub fn new(height: usize, width: usize, labels: Vec<usize>) -> Result<Self> {
        if height == 0 || width == 0 {
            return invalid(format!("lattice dimensions must be positive, got {height}x{width}"));
        }
        if labels.len() != height * width {
            return invalid(format!(
                "label map {height}x{width} needs {} labels, got {}",
                height * width,
                labels.len()
            ));
        }
        let count = labels.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; count];
        for &l in &labels {
            sizes[l] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return invalid(format!("label {empty} has no pixels"));
        }
        let mut offsets = Vec::with_capacity(count + 1);
        offsets.push(0);
        for s in &sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        let mut cursor = offsets[..count].to_vec();
        let mut members = vec![0usize; labels.len()];
        for (i, &l) in labels.iter().enumerate() {
            members[cursor[l]] = i;
            cursor[l] += 1;
        }
        Ok(Self {
            height,
            width,
            labels,
            count,
            offsets,
            members,
        })
    }

    /// Relabels arbitrary ids to `0..count` in order of first appearance.
    pub fn compacted(height: usize, width: usize, raw: &[usize]) -> Result<Self> {
        let mut remap = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&id| {
                let next = remap.len();
                *remap.entry(id).or_insert(next)
            })
            .collect();
        Self::new(height, width, labels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Number of parts.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Label of a flat (row-major) pixel index.
    pub fn label(&self, index: usize) -> usize {
        self.labels[index]
    }

    pub fn label_at(&self, row: usize, col: usize) -> usize {
        self.labels[row * self.width + col]
    }

    /// Flat indices of the pixels in part `k`, row-major.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.members[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn size(&self, k: usize) -> usize {
        self.offsets[k + 1] - self.offsets[k]
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.count).map(|k| self.size(k)).collect()
    }

    pub fn pixel(&self, index: usize) -> Pixel {
        (index / self.width, index % self.width)
    }
}

/// Coarse receptive fields `N_0..N_{K-1}` partitioning the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighbourhoodSystem(LabelMap);

impl NeighbourhoodSystem {
    pub fn new(height: usize, width: usize, labels: Vec<usize>) -> Result<Self> {
        LabelMap::new(height, width, labels).map(Self)
    }

    pub fn from_map(map: LabelMap) -> Self {
        Self(map)
    }

    pub fn map(&self) -> &LabelMap {
        &self.0
    }
}

impl Deref for NeighbourhoodSystem {
    type Target = LabelMap;

    fn deref(&self) -> &LabelMap {
        &self.0
    }
}

/// Semantic segments with one score in `[0, 1]` per segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentPartition {
    map: LabelMap,
    scores: Vec<f64>,
}

impl SegmentPartition {
    pub fn new(map: LabelMap, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != map.count() {
            return invalid(format!("{} segments but {} scores", map.count(), scores.len()));
        }
        if let Some(p) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return invalid(format!("score {} of segment {p} is outside [0, 1]", scores[p]));
        }
        Ok(Self { map, scores })
    }

    pub fn from_labels(height: usize, width: usize, labels: Vec<usize>, scores: Vec<f64>) -> Result<Self> {
        Self::new(LabelMap::new(height, width, labels)?, scores)
    }

    /// Every segment scored `score`.
    pub fn uniform(map: LabelMap, score: f64) -> Result<Self> {
        let n = map.count();
        Self::new(map, vec![score; n])
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score(&self, p: usize) -> f64 {
        self.scores[p]
    }

    /// Score of the segment containing a flat pixel index.
    pub fn pixel_score(&self, index: usize) -> f64 {
        self.scores[self.map.label(index)]
    }

    pub fn with_scores(&self, scores: Vec<f64>) -> Result<Self> {
        Self::new(self.map.clone(), scores)
    }

    pub fn map(&self) -> &LabelMap {
        &self.map
    }
}

impl Deref for SegmentPartition {
    type Target = LabelMap;

    fn deref(&self) -> &LabelMap {
        &self.map
    }
}

/// Depth-indexed nested partitions; level `d + 1` refines level `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentHierarchy {
    levels: Vec<SegmentPartition>,
}

impl SegmentHierarchy {
    pub fn new(levels: Vec<SegmentPartition>) -> Result<Self> {
        if levels.is_empty() {
            return invalid("a hierarchy needs at least one level");
        }
        for (d, pair) in levels.windows(2).enumerate() {
            if !is_refinement(&pair[1], &pair[0])? {
                return invalid(format!("level {} does not refine level {d}", d + 1));
            }
        }
        Ok(Self { levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[SegmentPartition] {
        &self.levels
    }

    pub fn finest(&self) -> &SegmentPartition {
        self.levels.last().unwrap()
    }

    pub fn coarsest(&self) -> &SegmentPartition {
        &self.levels[0]
    }
}

/// Index of the block containing coordinate `i` when `extent` pixels are cut
/// into `blocks` equal blocks, the last block absorbing any remainder.
pub fn block_of(i: usize, extent: usize, blocks: usize) -> usize {
    (i / (extent / blocks)).min(blocks - 1)
}

/// Rectangular receptive fields for a `coarse_h x coarse_w` coarse map.
pub fn block_partition(height: usize, width: usize, coarse_h: usize, coarse_w: usize) -> Result<NeighbourhoodSystem> {
    if height == 0 || width == 0 || coarse_h == 0 || coarse_w == 0 {
        return invalid("block partition dimensions must be positive");
    }
    if coarse_h > height || coarse_w > width {
        return invalid(format!(
            "coarse grid {coarse_h}x{coarse_w} exceeds lattice {height}x{width}"
        ));
    }
    let mut labels = Vec::with_capacity(height * width);
    for r in 0..height {
        let rb = block_of(r, height, coarse_h);
        for c in 0..width {
            labels.push(rb * coarse_w + block_of(c, width, coarse_w));
        }
    }
    NeighbourhoodSystem::new(height, width, labels)
}

/// Per-neighbourhood mass `M_k`.
pub fn neighbourhood_masses(a: &AttributionGrid, hood: &NeighbourhoodSystem) -> Result<Vec<f64>> {
    a.ensure_same_dims(hood.dims())?;
    let v = a.values();
    Ok((0..hood.count())
        .map(|k| compensated_sum(hood.members(k).iter().map(|&i| v[i])))
        .collect())
}

/// Expands one value per neighbourhood to a piecewise-constant grid.
pub fn piecewise_constant_expand(coarse: &[f64], hood: &NeighbourhoodSystem) -> Result<AttributionGrid> {
    if coarse.len() != hood.count() {
        return invalid(format!(
            "{} coarse values for {} neighbourhoods",
            coarse.len(),
            hood.count()
        ));
    }
    AttributionGrid::new(
        hood.height(),
        hood.width(),
        hood.labels().iter().map(|&k| coarse[k]).collect(),
    )
}

/// 8-connectivity: Chebyshev distance exactly one.
pub fn adjacent(x: Pixel, y: Pixel) -> bool {
    x.0.abs_diff(y.0).max(x.1.abs_diff(y.1)) == 1
}

fn has_foreign_neighbour(map: &LabelMap, index: usize) -> bool {
    let (r, c) = map.pixel(index);
    let own = map.label(index);
    let (h, w) = map.dims();
    for rr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
        for cc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
            if map.label_at(rr, cc) != own {
                return true;
            }
        }
    }
    false
}

/// Pixels of segment `p` with at least one 8-neighbour outside it.
pub fn segment_boundary(s: &LabelMap, p: usize) -> Result<Vec<Pixel>> {
    if p >= s.count() {
        return invalid(format!("segment {p} out of range (count {})", s.count()));
    }
    Ok(s.members(p)
        .iter()
        .filter(|&&i| has_foreign_neighbour(s, i))
        .map(|&i| s.pixel(i))
        .collect())
}

/// Pixels of segment `p` whose whole 8-neighbourhood lies inside it.
pub fn segment_interior(s: &LabelMap, p: usize) -> Result<Vec<Pixel>> {
    if p >= s.count() {
        return invalid(format!("segment {p} out of range (count {})", s.count()));
    }
    Ok(s.members(p)
        .iter()
        .filter(|&&i| !has_foreign_neighbour(s, i))
        .map(|&i| s.pixel(i))
        .collect())
}

/// True iff every part of `fine` lies inside a single part of `coarse`.
pub fn is_refinement(fine: &LabelMap, coarse: &LabelMap) -> Result<bool> {
    if fine.dims() != coarse.dims() {
        return invalid("refinement check needs partitions of equal dimensions");
    }
    Ok((0..fine.count()).all(|q| {
        let m = fine.members(q);
        let parent = coarse.label(m[0]);
        m.iter().all(|&i| coarse.label(i) == parent)
    }))
}

/// Parent of every fine segment; `None` when `fine` does not refine `coarse`.
pub fn parent_map(fine: &LabelMap, coarse: &LabelMap) -> Result<Option<Vec<usize>>> {
    if !is_refinement(fine, coarse)? {
        return Ok(None);
    }
    Ok(Some(
        (0..fine.count()).map(|q| coarse.label(fine.members(q)[0])).collect(),
    ))
}

/// Splits each targeted segment into up to four parts by bisecting its
/// bounding box (top/left halves take the extra row/column). Fragments of
/// non-rectangular segments are kept as they fall. Children inherit the
/// parent's score; untargeted segments keep theirs.
pub fn quad_refine(s: &SegmentPartition, targets: &BTreeSet<usize>) -> Result<SegmentPartition> {
    if let Some(&bad) = targets.iter().find(|&&p| p >= s.count()) {
        return invalid(format!("target segment {bad} out of range (count {})", s.count()));
    }
    let w = s.width();
    let mut raw = vec![0usize; s.height() * w];
    let mut scores = Vec::new();
    for p in 0..s.count() {
        let members = s.members(p);
        if !targets.contains(&p) {
            for &i in members {
                raw[i] = scores.len();
            }
            scores.push(s.score(p));
            continue;
        }
        let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
        for &i in members {
            let (r, c) = (i / w, i % w);
            r0 = r0.min(r);
            r1 = r1.max(r);
            c0 = c0.min(c);
            c1 = c1.max(c);
        }
        let row_split = r0 + (r1 - r0 + 1).div_ceil(2);
        let col_split = c0 + (c1 - c0 + 1).div_ceil(2);
        let quadrant = |i: usize| usize::from(i / w >= row_split) * 2 + usize::from(i % w >= col_split);
        let mut occupied = [false; 4];
        for &i in members {
            occupied[quadrant(i)] = true;
        }
        // child ids in quadrant order: TL, TR, BL, BR
        let mut ids = [usize::MAX; 4];
        for q in (0..4).filter(|&q| occupied[q]) {
            ids[q] = scores.len();
            scores.push(s.score(p));
        }
        for &i in members {
            raw[i] = ids[quadrant(i)];
        }
    }
    SegmentPartition::new(LabelMap::new(s.height(), w, raw)?, scores)
}

/// 4-connected components of equal class, labelled in row-major order of
/// first appearance.
pub fn connected_components(height: usize, width: usize, class: &[usize]) -> Result<LabelMap> {
    if class.len() != height * width {
        return invalid("class map does not match the lattice");
    }
    let mut labels = vec![usize::MAX; class.len()];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..class.len() {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / width, i % width);
            let mut visit = |j: usize| {
                if labels[j] == usize::MAX && class[j] == class[i] {
                    labels[j] = next;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - width);
            }
            if r + 1 < height {
                visit(i + width);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < width {
                visit(i + 1);
            }
        }
        next += 1;
    }
    LabelMap::new(height, width, labels)
}

/// Segments an intensity image: threshold at the midrange, then split each
/// side into connected components.
pub fn threshold_segments(image: &AttributionGrid) -> Result<LabelMap> {
    let v = image.values();
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let class: Vec<usize> = v.iter().map(|&x| usize::from(x > mid)).collect();
    connected_components(image.height(), image.width(), &class)
}
