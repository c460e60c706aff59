//! Classical interpolation kernels used as baselines, and constructive
//! witnesses of how they break mass conservation, score ordering and
//! locality.
//!
//! Kernels are separable. Half-pixel-centers alignment places each coarse
//! sample at the centre of its block; border samples are replicated.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Result, UsuError};
use crate::grid::{block_of, block_partition, AttributionGrid, LabelMap, Pixel, SegmentPartition};
use crate::numeric::compensated_sum;
use crate::usu::MassInput;

/// Cubic convolution parameter.
pub const KEYS_A: f64 = -0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Nearest,
    Bilinear,
    Bicubic,
    Lanczos3,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::Nearest,
        KernelFamily::Bilinear,
        KernelFamily::Bicubic,
        KernelFamily::Lanczos3,
    ];

    fn radius(self) -> isize {
        match self {
            KernelFamily::Nearest => 0,
            KernelFamily::Bilinear => 1,
            KernelFamily::Bicubic => 2,
            KernelFamily::Lanczos3 => 3,
        }
    }

    /// 1-D kernel value at offset `x` (in coarse-sample units).
    pub fn eval(self, x: f64) -> f64 {
        let ax = x.abs();
        match self {
            KernelFamily::Nearest => f64::from(u8::from(ax < 0.5)),
            KernelFamily::Bilinear => (1.0 - ax).max(0.0),
            KernelFamily::Bicubic => keys(ax),
            KernelFamily::Lanczos3 => {
                if ax < 3.0 {
                    sinc(x) * sinc(x / 3.0)
                } else {
                    0.0
                }
            }
        }
    }
}

fn keys(ax: f64) -> f64 {
    let a = KEYS_A;
    if ax < 1.0 {
        ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0
    } else if ax < 2.0 {
        ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a
    } else {
        0.0
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Nearest => "nearest",
            KernelFamily::Bilinear => "bilinear",
            KernelFamily::Bicubic => "bicubic",
            KernelFamily::Lanczos3 => "lanczos3",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = UsuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(KernelFamily::Nearest),
            "bilinear" => Ok(KernelFamily::Bilinear),
            "bicubic" => Ok(KernelFamily::Bicubic),
            "lanczos3" | "lanczos" => Ok(KernelFamily::Lanczos3),
            other => Err(UsuError::InvalidArgument(format!("unknown kernel '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Alignment {
    #[default]
    HalfPixelCenters,
    AlignCorners,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub alignment: Alignment,
}

impl KernelSpec {
    pub fn new(family: KernelFamily) -> Self {
        Self {
            family,
            alignment: Alignment::default(),
        }
    }
}

/// Sparse weights `(source index, weight)` for each output index along one
/// axis. Weights of each output index sum to one.
pub fn axis_weights(input: usize, output: usize, kernel: KernelSpec) -> Result<Vec<Vec<(usize, f64)>>> {
    if input == 0 || output < input {
        return invalid(format!("cannot upsample axis of {input} samples to {output}"));
    }
    let mut table = Vec::with_capacity(output);
    for i in 0..output {
        if kernel.family == KernelFamily::Nearest {
            let src = match kernel.alignment {
                // consistent with the block partition of the output axis
                Alignment::HalfPixelCenters => block_of(i, output, input),
                Alignment::AlignCorners if output > 1 => {
                    ((i * (input - 1)) as f64 / (output - 1) as f64).round() as usize
                }
                Alignment::AlignCorners => 0,
            };
            table.push(vec![(src, 1.0)]);
            continue;
        }
        let u = match kernel.alignment {
            Alignment::HalfPixelCenters => (i as f64 + 0.5) * input as f64 / output as f64 - 0.5,
            Alignment::AlignCorners if output > 1 => i as f64 * (input - 1) as f64 / (output - 1) as f64,
            Alignment::AlignCorners => 0.0,
        };
        let base = u.floor() as isize;
        let r = kernel.family.radius();
        let mut taps: Vec<(usize, f64)> = Vec::with_capacity(2 * r as usize);
        for j in (base - r + 1)..=(base + r) {
            let w = kernel.family.eval(u - j as f64);
            if w == 0.0 {
                continue;
            }
            let src = j.clamp(0, input as isize - 1) as usize;
            match taps.iter_mut().find(|(s, _)| *s == src) {
                Some(t) => t.1 += w,
                None => taps.push((src, w)),
            }
        }
        if kernel.family == KernelFamily::Lanczos3 {
            let z = compensated_sum(taps.iter().map(|t| t.1));
            for t in &mut taps {
                t.1 /= z;
            }
        }
        table.push(taps);
    }
    Ok(table)
}

/// Separable interpolation of a coarse grid to `target_h x target_w`:
/// rows first, then columns.
pub fn interp_upsample(
    coarse: &AttributionGrid,
    target_h: usize,
    target_w: usize,
    kernel: KernelSpec,
) -> Result<AttributionGrid> {
    let (ch, cw) = coarse.dims();
    let wx = axis_weights(cw, target_w, kernel)?;
    let wy = axis_weights(ch, target_h, kernel)?;
    let src = coarse.values();
    let mut horizontal = vec![0.0; ch * target_w];
    for r in 0..ch {
        for (c, taps) in wx.iter().enumerate() {
            horizontal[r * target_w + c] = taps.iter().map(|&(j, w)| w * src[r * cw + j]).sum();
        }
    }
    let mut out = vec![0.0; target_h * target_w];
    for (r, taps) in wy.iter().enumerate() {
        for c in 0..target_w {
            out[r * target_w + c] = taps.iter().map(|&(j, w)| w * horizontal[j * target_w + c]).sum();
        }
    }
    AttributionGrid::new(target_h, target_w, out)
}

fn indicator(dims: (usize, usize), cell: Pixel) -> Result<AttributionGrid> {
    if cell.0 >= dims.0 || cell.1 >= dims.1 {
        return invalid(format!("cell {cell:?} outside coarse grid {}x{}", dims.0, dims.1));
    }
    AttributionGrid::from_fn(dims.0, dims.1, |r, c| f64::from(u8::from((r, c) == cell)))
}

/// Interpolates the indicator of coarse cell `cell` and reports, for every
/// block neighbourhood, `sum_{N_k} A~ - M_k`. Nonzero entries are mass that
/// crossed a block boundary.
pub fn mass_leak_witness(
    kernel: KernelSpec,
    coarse_dims: (usize, usize),
    target_dims: (usize, usize),
    cell: Pixel,
) -> Result<Vec<f64>> {
    let hood = block_partition(target_dims.0, target_dims.1, coarse_dims.0, coarse_dims.1)?;
    let a = indicator(coarse_dims, cell)?;
    let out = interp_upsample(&a, target_dims.0, target_dims.1, kernel)?;
    let masses = MassInput::Coarse(a.values()).masses(&hood)?;
    let v = out.values();
    Ok((0..hood.count())
        .map(|k| compensated_sum(hood.members(k).iter().map(|&i| v[i])) - masses[k])
        .collect())
}

/// Output change inside one neighbourhood caused by data outside it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalityWitness {
    /// Pixel of the inspected neighbourhood with the largest change.
    pub pixel: Pixel,
    /// `A~_2(pixel) - A~_1(pixel)`.
    pub delta: f64,
}

/// Compares `A_1 = 0` with `A_2 = indicator(external)`; both vanish on the
/// block of coarse cell `inside`, so a local operator would not change any
/// pixel there.
pub fn locality_violation_witness(
    kernel: KernelSpec,
    coarse_dims: (usize, usize),
    target_dims: (usize, usize),
    inside: Pixel,
    external: Pixel,
) -> Result<LocalityWitness> {
    if inside == external {
        return invalid("the external cell must differ from the inspected one");
    }
    let hood = block_partition(target_dims.0, target_dims.1, coarse_dims.0, coarse_dims.1)?;
    let zero = AttributionGrid::zeros(coarse_dims.0, coarse_dims.1)?;
    let a2 = indicator(coarse_dims, external)?;
    let out1 = interp_upsample(&zero, target_dims.0, target_dims.1, kernel)?;
    let out2 = interp_upsample(&a2, target_dims.0, target_dims.1, kernel)?;
    let k = inside.0 * coarse_dims.1 + inside.1;
    let mut best = LocalityWitness {
        pixel: hood.pixel(hood.members(k)[0]),
        delta: 0.0,
    };
    for &i in hood.members(k) {
        let d = out2.values()[i] - out1.values()[i];
        if d.abs() > best.delta.abs() {
            best = LocalityWitness {
                pixel: hood.pixel(i),
                delta: d,
            };
        }
    }
    Ok(best)
}

/// Segments under which interpolation breaks score ordering: `higher` sits
/// in a segment scored 1, `lower` in one scored 0, yet
/// `A~(higher) < A~(lower)` in a neighbourhood of non-negative mass.
#[derive(Clone, Debug)]
pub struct MonotonicityCounterexample {
    pub segments: SegmentPartition,
    pub higher: Pixel,
    pub lower: Pixel,
    pub higher_value: f64,
    pub lower_value: f64,
}

/// Searches for a score-ordering violation of the kernel on `coarse`.
/// Returns `None` when the output is constant on every non-negative-mass
/// block (e.g. nearest under half-pixel-centers).
pub fn monotonicity_counterexample(
    kernel: KernelSpec,
    coarse: &AttributionGrid,
    target_dims: (usize, usize),
) -> Result<Option<MonotonicityCounterexample>> {
    let (th, tw) = target_dims;
    let hood = block_partition(th, tw, coarse.height(), coarse.width())?;
    let out = interp_upsample(coarse, th, tw, kernel)?;
    let masses = MassInput::Coarse(coarse.values()).masses(&hood)?;
    let v = out.values();
    for k in (0..hood.count()).filter(|&k| masses[k] >= 0.0) {
        let members = hood.members(k);
        let lo = *members.iter().min_by(|&&a, &&b| v[a].total_cmp(&v[b])).unwrap();
        let hi = *members.iter().max_by(|&&a, &&b| v[a].total_cmp(&v[b])).unwrap();
        if v[hi] - v[lo] > 1e-12 {
            // the lowest-valued pixel becomes the top-scored segment
            let labels: Vec<usize> = (0..th * tw).map(|i| usize::from(i == lo)).collect();
            let segments = SegmentPartition::new(LabelMap::new(th, tw, labels)?, vec![0.0, 1.0])?;
            return Ok(Some(MonotonicityCounterexample {
                segments,
                higher: hood.pixel(lo),
                lower: hood.pixel(hi),
                higher_value: v[lo],
                lower_value: v[hi],
            }));
        }
    }
    Ok(None)
}
