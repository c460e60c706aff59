//! Synthetic instances with known foreground: filled shapes and periodic
//! patterns, plus coarse aggregation at chosen grid resolutions.
//!
//! A pixel `(r, c)` belongs to a figure iff its centre `(r + 0.5, c + 0.5)`
//! satisfies the figure's inequality. Pattern thresholds compare against a
//! fixed `1e-9`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result, UsuError};
use crate::grid::{block_partition, neighbourhood_masses, AttributionGrid, Mask, NeighbourhoodSystem};

const PATTERN_EPS: f64 = 1e-9;
pub const MIN_SHAPE_SIZE: usize = 16;
pub const MIN_PATTERN_SIZE: usize = 32;

/// Generator for instance `index` of a run seeded with `seed`: ChaCha8
/// seeded from `seed`, on stream `index`.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Seed of instance `index`: the first word of [`instance_rng`].
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    instance_rng(seed, index).next_u64()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Circle,
    Triangle,
    Square,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PatternKind {
    Zigzag,
    Sine,
    Spiral,
    Concentric,
    Moire,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InstanceKind {
    Shape(ShapeKind),
    Pattern(PatternKind),
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Circle, ShapeKind::Triangle, ShapeKind::Square];
}

impl PatternKind {
    pub const ALL: [PatternKind; 5] = [
        PatternKind::Zigzag,
        PatternKind::Sine,
        PatternKind::Spiral,
        PatternKind::Concentric,
        PatternKind::Moire,
    ];
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InstanceKind::Shape(ShapeKind::Circle) => "circle",
            InstanceKind::Shape(ShapeKind::Triangle) => "triangle",
            InstanceKind::Shape(ShapeKind::Square) => "square",
            InstanceKind::Pattern(PatternKind::Zigzag) => "zigzag",
            InstanceKind::Pattern(PatternKind::Sine) => "sine",
            InstanceKind::Pattern(PatternKind::Spiral) => "spiral",
            InstanceKind::Pattern(PatternKind::Concentric) => "concentric",
            InstanceKind::Pattern(PatternKind::Moire) => "moire",
        })
    }
}

impl FromStr for InstanceKind {
    type Err = UsuError;

    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .iter()
            .map(|&k| InstanceKind::Shape(k))
            .chain(PatternKind::ALL.iter().map(|&k| InstanceKind::Pattern(k)))
            .find(|k| k.to_string() == s)
            .ok_or_else(|| UsuError::InvalidArgument(format!("unknown instance kind '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthInstance {
    pub kind: InstanceKind,
    pub seed: u64,
    /// Grayscale rendering in `[0, 1]`.
    pub image: AttributionGrid,
    pub gt_mask: Mask,
    /// Ground-truth attribution: the mask as a 0/1 field.
    pub gt_attribution: AttributionGrid,
}

/// Size and position jitter of generated shapes, as fractions of the side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeParams {
    pub radius: (f64, f64),
    pub center_jitter: f64,
}

impl Default for ShapeParams {
    fn default() -> Self {
        Self {
            radius: (0.15, 0.35),
            center_jitter: 0.1,
        }
    }
}

/// Rasterizes a filled shape. `center` is in continuous `(y, x)`
/// coordinates; `radius` is the disc radius, the square's half-width and
/// the triangle's circumradius (apex up).
pub fn draw_shape(kind: ShapeKind, size: usize, center: (f64, f64), radius: f64) -> Result<Mask> {
    if size == 0 || !(radius.is_finite() && radius > 0.0) {
        return invalid("shape needs a positive size and radius");
    }
    let (cy, cx) = center;
    let vertices: Vec<(f64, f64)> = (0..3)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / 3.0;
            (cy - radius * t.cos(), cx + radius * t.sin())
        })
        .collect();
    Mask::from_fn(size, size, |r, c| {
        let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
        match kind {
            ShapeKind::Circle => (y - cy).powi(2) + (x - cx).powi(2) <= radius * radius,
            ShapeKind::Square => (y - cy).abs() <= radius && (x - cx).abs() <= radius,
            ShapeKind::Triangle => {
                let side = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) * (y - a.0) - (b.0 - a.0) * (x - a.1);
                let d = [
                    side(vertices[0], vertices[1]),
                    side(vertices[1], vertices[2]),
                    side(vertices[2], vertices[0]),
                ];
                d.iter().all(|&v| v >= 0.0) || d.iter().all(|&v| v <= 0.0)
            }
        }
    })
}

/// Orientation, period and phase of a periodic pattern.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatternParams {
    pub period: f64,
    pub phase: f64,
    /// Lateral displacement of stripes (sine, zigzag) or grating angle in
    /// radians (moire).
    pub amplitude: f64,
}

pub fn draw_pattern(kind: PatternKind, size: usize, params: &PatternParams) -> Result<Mask> {
    let PatternParams {
        period,
        phase,
        amplitude,
    } = *params;
    if size == 0 || !(period.is_finite() && period > 0.0) {
        return invalid("pattern needs a positive size and period");
    }
    let mid = size as f64 / 2.0;
    let k = 2.0 * PI / period;
    Mask::from_fn(size, size, |r, c| {
        let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
        let (dy, dx) = (y - mid, x - mid);
        let value = match kind {
            PatternKind::Sine => (k * (x + amplitude * (k * y / 4.0).sin()) + phase).sin(),
            PatternKind::Zigzag => {
                // triangle-wave displacement, square-wave profile
                let t = (y / (2.0 * period)).rem_euclid(1.0);
                let u = x + amplitude * (4.0 * (t - 0.5).abs() - 1.0);
                if ((u / period) + phase / (2.0 * PI)).rem_euclid(1.0) < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            PatternKind::Concentric => (k * (dx * dx + dy * dy).sqrt() + phase).sin(),
            PatternKind::Spiral => (k * (dx * dx + dy * dy).sqrt() + dy.atan2(dx) + phase).sin(),
            PatternKind::Moire => {
                let (s, co) = amplitude.sin_cos();
                (k * (dx * co + dy * s) + phase).cos() + (k * (dx * co - dy * s)).cos()
            }
        };
        value > PATTERN_EPS
    })
}

fn render(kind: InstanceKind, seed: u64, mask: Mask, rng: &mut ChaCha8Rng) -> Result<SynthInstance> {
    let n = mask.count();
    if n == 0 || n == mask.bits().len() {
        return invalid(format!("{kind} instance with seed {seed} has a degenerate mask"));
    }
    let size = mask.width();
    let image = AttributionGrid::from_fn(size, size, |r, c| {
        let base = if mask.get(r, c) { 0.85 } else { 0.15 };
        base + rng.gen_range(-0.1..0.1)
    })?;
    Ok(SynthInstance {
        kind,
        seed,
        image,
        gt_attribution: mask.to_grid(),
        gt_mask: mask,
    })
}

pub fn gen_shape(kind: ShapeKind, size: usize, seed: u64, params: &ShapeParams) -> Result<SynthInstance> {
    if size < MIN_SHAPE_SIZE {
        return invalid(format!("shape size must be at least {MIN_SHAPE_SIZE}, got {size}"));
    }
    let (lo, hi) = params.radius;
    if !(0.0 < lo && lo <= hi && hi < 0.5) || !(0.0..0.5).contains(&params.center_jitter) {
        return invalid("shape radius range must lie in (0, 0.5) and jitter in [0, 0.5)");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let radius = rng.gen_range(lo..=hi) * s;
    let j = params.center_jitter * s;
    let mut jitter = || if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 };
    let center = (s / 2.0 + jitter(), s / 2.0 + jitter());
    let mask = draw_shape(kind, size, center, radius)?;
    render(InstanceKind::Shape(kind), seed, mask, &mut rng)
}

pub fn gen_pattern(kind: PatternKind, size: usize, seed: u64) -> Result<SynthInstance> {
    if size < MIN_PATTERN_SIZE {
        return invalid(format!("pattern size must be at least {MIN_PATTERN_SIZE}, got {size}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = size as f64 / 8.0 * rng.gen_range(0.75..1.25);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let amplitude = match kind {
        PatternKind::Moire => rng.gen_range(0.05..0.2),
        _ => rng.gen_range(0.0..period / 2.0),
    };
    let mask = draw_pattern(
        kind,
        size,
        &PatternParams {
            period,
            phase,
            amplitude,
        },
    )?;
    render(InstanceKind::Pattern(kind), seed, mask, &mut rng)
}

pub fn gen_instance(kind: InstanceKind, size: usize, seed: u64) -> Result<SynthInstance> {
    match kind {
        InstanceKind::Shape(k) => gen_shape(k, size, seed, &ShapeParams::default()),
        InstanceKind::Pattern(k) => gen_pattern(k, size, seed),
    }
}

/// `a_k = sum_{N_k} A* / |N_k|`.
pub fn faithful_coarse(truth: &AttributionGrid, hood: &NeighbourhoodSystem) -> Result<Vec<f64>> {
    let masses = neighbourhood_masses(truth, hood)?;
    Ok(masses
        .iter()
        .enumerate()
        .map(|(k, &m)| m / hood.size(k) as f64)
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Shapes,
    Patterns,
}

impl Family {
    pub fn kinds(self) -> Vec<InstanceKind> {
        match self {
            Family::Shapes => ShapeKind::ALL.iter().map(|&k| InstanceKind::Shape(k)).collect(),
            Family::Patterns => PatternKind::ALL.iter().map(|&k| InstanceKind::Pattern(k)).collect(),
        }
    }
}

impl FromStr for Family {
    type Err = UsuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shapes" => Ok(Family::Shapes),
            "patterns" => Ok(Family::Patterns),
            _ => invalid(format!("unknown dataset '{s}' (expected shapes or patterns)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub kinds: Vec<InstanceKind>,
    pub per_class: usize,
    pub size: usize,
    pub resolutions: Vec<usize>,
    pub seed: u64,
}

impl DatasetConfig {
    pub fn new(family: Family) -> Self {
        Self {
            kinds: family.kinds(),
            per_class: 30,
            size: 64,
            resolutions: vec![4, 7, 14],
            seed: 0,
        }
    }
}

/// Coarse attribution at one resolution, laid out `resolution x resolution`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseView {
    pub resolution: usize,
    pub coarse: AttributionGrid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetItem {
    pub index: usize,
    pub instance: SynthInstance,
    pub coarse: Vec<CoarseView>,
}

/// Instances are interleaved by kind, so index `i` has kind
/// `kinds[i % kinds.len()]` and seed `derive_seed(seed, i)`.
pub fn gen_dataset(config: &DatasetConfig) -> Result<Vec<DatasetItem>> {
    if config.per_class == 0 || config.kinds.is_empty() {
        return invalid("dataset needs at least one instance per class");
    }
    if config.resolutions.iter().any(|&r| r == 0 || r > config.size) {
        return invalid("resolutions must lie in 1..=size");
    }
    let n = config.per_class * config.kinds.len();
    (0..n)
        .into_par_iter()
        .map(|index| {
            let kind = config.kinds[index % config.kinds.len()];
            let instance = gen_instance(kind, config.size, derive_seed(config.seed, index as u64))?;
            let coarse = config
                .resolutions
                .iter()
                .map(|&res| {
                    let hood = block_partition(config.size, config.size, res, res)?;
                    let values = faithful_coarse(&instance.gt_attribution, &hood)?;
                    Ok(CoarseView {
                        resolution: res,
                        coarse: AttributionGrid::new(res, res, values)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DatasetItem {
                index,
                instance,
                coarse,
            })
        })
        .collect()
}
