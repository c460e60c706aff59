//! Score potentials and their conditioning strength.
//!
//! The tensor potential `exp((s - 0.5) / eps)` gives the same weight ratio
//! for a score gap regardless of where in `[0, 1]` the gap sits. The
//! power-law and log-odds potentials are strictly monotone as well, so they
//! still produce valid ratio-form operators, but their ratios drift with the
//! base score.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, UsuError};

/// Default temperature of the tensor potential.
pub const DEFAULT_TEMPERATURE: f64 = 0.1;

/// A strictly positive, strictly increasing score potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Potential {
    /// `exp((s - 0.5) / temperature)` on `[0, 1]`.
    Tensor { temperature: f64 },
    /// `s^exponent` on `(0, 1]`.
    PowerLaw { exponent: f64 },
    /// `(s / (1 - s))^exponent` on `(0, 1)`.
    LogOdds { exponent: f64 },
}

impl Default for Potential {
    fn default() -> Self {
        Potential::Tensor {
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl Potential {
    pub fn tensor(temperature: f64) -> Result<Self> {
        Potential::Tensor { temperature }.validated()
    }

    pub fn power_law(exponent: f64) -> Result<Self> {
        Potential::PowerLaw { exponent }.validated()
    }

    pub fn log_odds(exponent: f64) -> Result<Self> {
        Potential::LogOdds { exponent }.validated()
    }

    fn parameter(&self) -> f64 {
        match *self {
            Potential::Tensor { temperature } => temperature,
            Potential::PowerLaw { exponent } | Potential::LogOdds { exponent } => exponent,
        }
    }

    pub fn validated(self) -> Result<Self> {
        let p = self.parameter();
        if !(p.is_finite() && p > 0.0) {
            return Err(UsuError::InvalidArgument(format!(
                "{self}: parameter must be positive and finite"
            )));
        }
        Ok(self)
    }

    /// Whether `s` lies in the admissible score domain of this family.
    pub fn admits(&self, s: f64) -> bool {
        match self {
            Potential::Tensor { .. } => (0.0..=1.0).contains(&s),
            Potential::PowerLaw { .. } => s > 0.0 && s <= 1.0,
            Potential::LogOdds { .. } => s > 0.0 && s < 1.0,
        }
    }

    fn check(&self, s: f64) -> Result<()> {
        if self.admits(s) {
            Ok(())
        } else {
            Err(UsuError::Domain(format!("score {s} is outside the domain of {self}")))
        }
    }

    /// `ln(phi(s))`. Weight normalization works from this form so that the
    /// per-neighbourhood maximum can be subtracted before exponentiation.
    pub fn log_value(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        Ok(match *self {
            Potential::Tensor { temperature } => (s - 0.5) / temperature,
            Potential::PowerLaw { exponent } => exponent * s.ln(),
            Potential::LogOdds { exponent } => exponent * (s.ln() - (1.0 - s).ln()),
        })
    }

    /// `phi(s)`.
    pub fn evaluate(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        Ok(match *self {
            Potential::Tensor { temperature } => ((s - 0.5) / temperature).exp(),
            Potential::PowerLaw { exponent } => s.powf(exponent),
            Potential::LogOdds { exponent } => (s / (1.0 - s)).powf(exponent),
        })
    }

    /// `phi(s + delta) / phi(s)`.
    pub fn conditioning_ratio(&self, s: f64, delta: f64) -> Result<f64> {
        Ok(self.evaluate(s + delta)? / self.evaluate(s)?)
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Tensor { temperature } => write!(f, "tensor(eps={temperature})"),
            Potential::PowerLaw { exponent } => write!(f, "power_law(gamma={exponent})"),
            Potential::LogOdds { exponent } => write!(f, "log_odds(gamma={exponent})"),
        }
    }
}

/// Potential family name, as accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialFamily {
    Tensor,
    PowerLaw,
    LogOdds,
}

impl PotentialFamily {
    pub fn with_parameter(self, parameter: f64) -> Result<Potential> {
        match self {
            PotentialFamily::Tensor => Potential::tensor(parameter),
            PotentialFamily::PowerLaw => Potential::power_law(parameter),
            PotentialFamily::LogOdds => Potential::log_odds(parameter),
        }
    }
}

impl FromStr for PotentialFamily {
    type Err = UsuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tensor" => Ok(PotentialFamily::Tensor),
            "power_law" | "power-law" => Ok(PotentialFamily::PowerLaw),
            "log_odds" | "log-odds" => Ok(PotentialFamily::LogOdds),
            other => Err(UsuError::InvalidArgument(format!("unknown potential family '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn tensor_values() {
        let t = Potential::tensor(0.1).unwrap();
        assert_eq!(t.evaluate(0.5).unwrap(), 1.0);
        assert!((t.evaluate(0.6).unwrap() - E).abs() < 1e-12);
        assert!((t.conditioning_ratio(0.1, 0.1).unwrap() - E).abs() < 1e-12 * E);
        assert!((t.conditioning_ratio(0.8, 0.1).unwrap() - E).abs() < 1e-12 * E);
    }

    #[test]
    fn power_law_values() {
        let p = Potential::power_law(2.0).unwrap();
        assert_eq!(p.evaluate(0.5).unwrap(), 0.25);
        assert!((p.conditioning_ratio(0.1, 0.1).unwrap() - 4.0).abs() < 1e-12);
        assert!((p.conditioning_ratio(0.8, 0.1).unwrap() - 1.265625).abs() < 1e-12);
    }

    #[test]
    fn zero_increment_is_identity() {
        for p in [
            Potential::tensor(0.05).unwrap(),
            Potential::power_law(3.0).unwrap(),
            Potential::log_odds(1.5).unwrap(),
        ] {
            assert_eq!(p.conditioning_ratio(0.4, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn singular_scores_are_domain_errors() {
        assert!(matches!(
            Potential::power_law(2.0).unwrap().evaluate(0.0),
            Err(UsuError::Domain(_))
        ));
        let lo = Potential::log_odds(1.0).unwrap();
        assert!(matches!(lo.evaluate(0.0), Err(UsuError::Domain(_))));
        assert!(matches!(lo.evaluate(1.0), Err(UsuError::Domain(_))));
        assert!(matches!(
            Potential::tensor(0.1).unwrap().evaluate(1.2),
            Err(UsuError::Domain(_))
        ));
        assert!(Potential::tensor(0.0).is_err());
        assert!(Potential::power_law(-1.0).is_err());
    }

    #[test]
    fn log_odds_ratio_depends_on_base_score() {
        let lo = Potential::log_odds(1.0).unwrap();
        let a = lo.conditioning_ratio(0.1, 0.1).unwrap();
        let b = lo.conditioning_ratio(0.45, 0.1).unwrap();
        assert!((a - b).abs() / b > 0.01);
    }

    fn any_potential() -> impl Strategy<Value = Potential> {
        prop_oneof![
            (0.01f64..2.0).prop_map(|t| Potential::Tensor { temperature: t }),
            (0.1f64..4.0).prop_map(|g| Potential::PowerLaw { exponent: g }),
            (0.1f64..4.0).prop_map(|g| Potential::LogOdds { exponent: g }),
        ]
    }

    proptest! {
        #[test]
        fn strictly_positive_and_increasing(p in any_potential(), a in 0.01f64..0.98, gap in 1e-3f64..0.01) {
            let b = a + gap;
            let (fa, fb) = (p.evaluate(a).unwrap(), p.evaluate(b).unwrap());
            prop_assert!(fa > 0.0);
            prop_assert!(fa < fb);
        }

        #[test]
        fn tensor_ratio_is_score_independent(t in 0.02f64..1.0, s in 0.0f64..1.0, d in 0.0f64..1.0) {
            let d = d * (1.0 - s);
            let p = Potential::Tensor { temperature: t };
            let expected = (d / t).exp();
            let got = p.conditioning_ratio(s, d).unwrap();
            prop_assert!((got - expected).abs() <= 1e-12 * expected);
        }
    }
}
