//! A uniform handle over every upsampling procedure, used by the
//! desiderata verifier, the benchmark and the command line.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, UsuError};
use crate::grid::{AttributionGrid, NeighbourhoodSystem, SegmentPartition};
use crate::interp::{interp_upsample, KernelFamily, KernelSpec};
use crate::iwmr::{iwmr_upsample, DEFAULT_IMPORTANCE_TEMPERATURE};
use crate::potential::Potential;
use crate::usu::{usu_upsample, MassInput};

/// Maps a coarse attribution (one cell per neighbourhood, row-major, laid
/// out as the block partition's labels) to full resolution.
pub trait Upsampler: Sync {
    fn name(&self) -> String;

    fn upsample(
        &self,
        coarse: &AttributionGrid,
        segments: &SegmentPartition,
        hood: &NeighbourhoodSystem,
    ) -> Result<AttributionGrid>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Usu {
        potential: Potential,
    },
    Iwmr {
        potential: Potential,
        importance_temperature: f64,
    },
    Interp(KernelSpec),
}

impl Method {
    pub fn usu() -> Self {
        Method::Usu {
            potential: Potential::default(),
        }
    }

    pub fn iwmr() -> Self {
        Method::Iwmr {
            potential: Potential::default(),
            importance_temperature: DEFAULT_IMPORTANCE_TEMPERATURE,
        }
    }

    pub fn interp(family: KernelFamily) -> Self {
        Method::Interp(KernelSpec::new(family))
    }

    /// Replaces the tensor temperatures of score-aware methods.
    pub fn with_temperatures(self, epsilon: f64, importance: f64) -> Result<Self> {
        Ok(match self {
            Method::Usu { .. } => Method::Usu {
                potential: Potential::tensor(epsilon)?,
            },
            Method::Iwmr { .. } => {
                if !(importance.is_finite() && importance > 0.0) {
                    return Err(UsuError::InvalidArgument(
                        "importance temperature must be positive".into(),
                    ));
                }
                Method::Iwmr {
                    potential: Potential::tensor(epsilon)?,
                    importance_temperature: importance,
                }
            }
            interp => interp,
        })
    }

    /// Whether the procedure reads segment scores at all.
    pub fn uses_scores(&self) -> bool {
        !matches!(self, Method::Interp(_))
    }
}

impl Upsampler for Method {
    fn name(&self) -> String {
        self.to_string()
    }

    fn upsample(
        &self,
        coarse: &AttributionGrid,
        segments: &SegmentPartition,
        hood: &NeighbourhoodSystem,
    ) -> Result<AttributionGrid> {
        match *self {
            Method::Usu { potential } => usu_upsample(MassInput::Coarse(coarse.values()), segments, hood, &potential),
            Method::Iwmr {
                potential,
                importance_temperature,
            } => iwmr_upsample(
                MassInput::Coarse(coarse.values()),
                segments,
                hood,
                &potential,
                importance_temperature,
            ),
            Method::Interp(kernel) => interp_upsample(coarse, hood.height(), hood.width(), kernel),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Usu { .. } => f.write_str("usu"),
            Method::Iwmr { .. } => f.write_str("iwmr"),
            Method::Interp(k) => write!(f, "{}", k.family),
        }
    }
}

impl FromStr for Method {
    type Err = UsuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "usu" => Ok(Method::usu()),
            "iwmr" => Ok(Method::iwmr()),
            other => other.parse::<KernelFamily>().map(Method::interp).map_err(|_| {
                UsuError::InvalidArgument(format!(
                    "unknown method '{other}' (expected usu, iwmr, nearest, bilinear, bicubic, lanczos3)"
                ))
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for name in ["usu", "iwmr", "nearest", "bilinear", "bicubic", "lanczos3"] {
            assert_eq!(name.parse::<Method>().unwrap().to_string(), name);
        }
        assert!("cubic".parse::<Method>().is_err());
        assert!(!Method::interp(KernelFamily::Bilinear).uses_scores());
        assert!(Method::iwmr().uses_scores());
    }
}
