use super::PipelineError;
use crate::nn::AdamConfig;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Cost and heuristic encoders, both solvers, full loss.
    Nwa,
    /// Cost encoder with the black-box solver only.
    Bba,
    /// Cost encoder on image, source and target, neural solver, `D_C + 0.001 D_E`.
    Na,
    /// `Na` with the Chebyshev heuristic.
    AdmNa,
    /// `AdmNa` without the source channel.
    NsNa,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Nwa, Variant::Bba, Variant::Na, Variant::AdmNa, Variant::NsNa];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Nwa => "nwa",
            Variant::Bba => "bba",
            Variant::Na => "na",
            Variant::AdmNa => "admna",
            Variant::NsNa => "nsna",
        }
    }

    /// Input channels of the cost encoder.
    pub fn cost_channels(self) -> usize {
        match self {
            Variant::Nwa | Variant::Bba => 3,
            Variant::Na | Variant::AdmNa => 5,
            Variant::NsNa => 4,
        }
    }

    pub fn has_heuristic_encoder(self) -> bool {
        self == Variant::Nwa
    }

    /// Whether the cost map depends on the source cell.
    pub fn sees_source(self) -> bool {
        matches!(self, Variant::Na | Variant::AdmNa)
    }

    /// Whether the cost map depends on the target cell.
    pub fn sees_target(self) -> bool {
        matches!(self, Variant::Na | Variant::AdmNa | Variant::NsNa)
    }

    /// Whether the predicted costs are scaled to `[w_min, w_max]`. The
    /// neural-solver baselines keep the raw sigmoid.
    pub fn scales_costs(self) -> bool {
        matches!(self, Variant::Nwa | Variant::Bba)
    }

    pub fn uses_epsilon(self) -> bool {
        self == Variant::Nwa
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| PipelineError::UnknownVariant(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NwaConfig {
    pub variant: Variant,
    pub w_min: f64,
    pub w_max: f64,
    pub lambda: f64,
    /// Softmax temperature; `None` means the square root of the grid width.
    pub tau: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub lr: f64,
    pub eps_train_range: (f64, f64),
    /// Samples per optimiser step.
    pub batch_size: usize,
    pub encoder_widths: Vec<usize>,
    /// 3x3 blocks at grid resolution in the cost encoder.
    pub cost_context: usize,
    /// 3x3 blocks at grid resolution in the heuristic encoder.
    pub heuristic_context: usize,
}

impl Default for NwaConfig {
    fn default() -> Self {
        NwaConfig {
            variant: Variant::Nwa,
            w_min: 1.0,
            w_max: 10.0,
            lambda: 20.0,
            tau: None,
            alpha: 1.0,
            beta: 0.1,
            lr: 1e-3,
            eps_train_range: (0.0, 9.0),
            batch_size: 64,
            encoder_widths: vec![8, 16, 16],
            cost_context: 0,
            heuristic_context: 2,
        }
    }
}

impl NwaConfig {
    pub fn for_variant(variant: Variant) -> Self {
        NwaConfig { variant, ..Self::default() }
    }

    pub fn tau_for(&self, grid_width: usize) -> f64 {
        self.tau.unwrap_or((grid_width as f64).sqrt())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        let finite = [self.w_min, self.w_max, self.lambda, self.alpha, self.beta, self.lr];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("numeric settings must be finite".into());
        }
        if self.w_min <= 0.0 || self.w_max <= self.w_min {
            return bad(format!("need 0 < w_min < w_max, got {} and {}", self.w_min, self.w_max));
        }
        if self.lambda <= 0.0 {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if let Some(t) = self.tau {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("tau must be positive, got {t}"));
            }
        }
        if self.alpha < 0.0 || self.beta < 0.0 || self.alpha + self.beta == 0.0 {
            return bad(format!("loss weights must be non-negative and not both zero, got {} and {}", self.alpha, self.beta));
        }
        if self.lr <= 0.0 {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        let (lo, hi) = self.eps_train_range;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo) {
            return bad(format!("eps range must satisfy 0 <= lo <= hi, got [{lo}, {hi}]"));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) {
            return bad("encoder widths must be positive".into());
        }
        Ok(())
    }
}

/// Non-negative tradeoff parameter of the learned heuristic.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EpsilonParam(f64);

impl EpsilonParam {
    pub const ZERO: EpsilonParam = EpsilonParam(0.0);

    pub fn new(value: f64) -> Result<Self, PipelineError> {
        if value.is_finite() && value >= 0.0 {
            Ok(EpsilonParam(value))
        } else {
            Err(PipelineError::NegativeEpsilon(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_tau() {
        let c = NwaConfig::default();
        c.validate().unwrap();
        assert!((c.tau_for(12) - 3.4641).abs() < 1e-4);
        assert!((c.tau_for(20) - 4.4721).abs() < 1e-4);
        assert_eq!(NwaConfig { tau: Some(2.0), ..c }.tau_for(12), 2.0);
    }

    #[test]
    fn invalid_configs() {
        let ok = NwaConfig::default();
        for bad in [
            NwaConfig { w_min: 0.0, ..ok.clone() },
            NwaConfig { w_max: 0.5, ..ok.clone() },
            NwaConfig { alpha: 0.0, beta: 0.0, ..ok.clone() },
            NwaConfig { beta: -0.1, ..ok.clone() },
            NwaConfig { eps_train_range: (-1.0, 2.0), ..ok.clone() },
            NwaConfig { eps_train_range: (3.0, 2.0), ..ok.clone() },
            NwaConfig { tau: Some(0.0), ..ok.clone() },
            NwaConfig { batch_size: 0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert!(NwaConfig { beta: 0.0, ..ok }.validate().is_ok());
    }

    #[test]
    fn variants_round_trip_and_channels() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("resnet".parse::<Variant>().is_err());
        let ch: Vec<usize> = Variant::ALL.iter().map(|v| v.cost_channels()).collect();
        assert_eq!(ch, vec![3, 3, 5, 5, 4]);
    }

    #[test]
    fn epsilon_is_non_negative() {
        assert!(EpsilonParam::new(-0.5).is_err());
        assert!(EpsilonParam::new(f64::NAN).is_err());
        assert_eq!(EpsilonParam::new(4.0).unwrap().value(), 4.0);
    }
}
