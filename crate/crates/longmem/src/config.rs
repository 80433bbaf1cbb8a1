//! Experiment configuration: one TOML file with sections
//! `{model, noise, sampler, fbm, run}`. Every field has an explicit
//! default, and the runner echoes the fully-populated configuration into
//! the report so results are self-describing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ma::CoefficientKind;
use crate::noise::{build_matched_mixture, NoiseSpec};
use crate::params::{self, DerivedConstants};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: f64,
    pub epsilon: f64,
    pub sigma_z2: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            alpha: 0.75,
            epsilon: 0.5,
            sigma_z2: 1.0,
        }
    }
}

/// Noise selection. `family` is one of `gaussian`,
/// `symmetric_gaussian_mixture` (with explicit `components`), or
/// `matched_mixture` (constructed to match Gaussian moments through the
/// model's `kappa`, with location spread `spread * sigma_Z`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub family: String,
    pub components: Option<Vec<crate::noise::MixtureComponent>>,
    pub spread: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            family: "gaussian".into(),
            components: None,
            spread: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    /// Past truncation depth as a multiple of the window length.
    pub j_max_multiplier: usize,
    /// Horizon for first non-occurrence detection, in limiting-time units
    /// of `ceil(n^beta)` shifts.
    pub horizon_units: usize,
    /// Stop sampling a window size once this many replicas hit the event.
    pub in_event_target: usize,
    /// Replicas per deterministic batch.
    pub batch_size: usize,
    /// Hard cap on replicas per window size.
    pub max_replicas: usize,
    /// Window lengths of the experiment ladder.
    pub n_ladder: Vec<usize>,
    /// Coefficient family.
    pub coefficients: CoefficientKind,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            j_max_multiplier: 50,
            horizon_units: 128,
            in_event_target: 5000,
            batch_size: 1024,
            max_replicas: 100_000,
            n_ladder: vec![500, 1000, 2000, 4000],
            coefficients: CoefficientKind::SmoothedPower,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FbmSection {
    /// Grid step is `2^dt_log2` limiting-time units.
    pub dt_log2: i32,
    /// Independent hitting-time samples for the reference law.
    pub tau_samples: usize,
    /// Initial horizon in limiting-time units (doubled on demand).
    pub base_horizon_units: f64,
    /// Hard cap on the doubled horizon.
    pub cap_horizon_units: f64,
}

impl Default for FbmSection {
    fn default() -> Self {
        Self {
            dt_log2: -10,
            tau_samples: 100_000,
            base_horizon_units: 8.0,
            cap_horizon_units: 1024.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Ceiling for KS(law of n^{-beta} I_n | E_0, law of tau) at the
    /// largest window of the ladder.
    pub ks_final_max: f64,
    /// Slack allowed on the non-increasing KS trend along the ladder.
    pub ks_ladder_slack: f64,
    /// Ceiling for KS of the scaled overshoot against Exp(1); only
    /// meaningful once n*eps/sigma_n is large.
    pub overshoot_ks_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ks_final_max: 0.15,
            ks_ladder_slack: 0.02,
            overshoot_ks_max: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// 0 = use the ambient thread pool.
    pub threads: usize,
    pub out_dir: String,
    pub tolerances: Tolerances,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 7,
            threads: 0,
            out_dir: "out".into(),
            tolerances: Tolerances::default(),
        }
    }
}

/// The whole experiment configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub noise: NoiseSection,
    pub sampler: SamplerSection,
    pub fbm: FbmSection,
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Validate ranges and derive the model constants.
    pub fn validate(&self) -> Result<DerivedConstants> {
        let consts = params::derive_constants(self.model.alpha, self.model.sigma_z2)?;
        if !(self.model.epsilon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: self.model.epsilon,
                constraint: "threshold must be positive",
            });
        }
        if self.sampler.n_ladder.is_empty() {
            return Err(Error::Config("n_ladder must not be empty".into()));
        }
        for &n in &self.sampler.n_ladder {
            if n < 2 {
                return Err(Error::Config(format!("window length {n} below 2")));
            }
        }
        if self.sampler.j_max_multiplier < 1 || self.sampler.horizon_units < 1 {
            return Err(Error::Config(
                "j_max_multiplier and horizon_units must be at least 1".into(),
            ));
        }
        if self.sampler.batch_size < 1 || self.sampler.in_event_target < 1 {
            return Err(Error::Config(
                "batch_size and in_event_target must be at least 1".into(),
            ));
        }
        if self.fbm.tau_samples < 1 {
            return Err(Error::Config("tau_samples must be at least 1".into()));
        }
        if !(self.fbm.dt_log2 <= 0 && self.fbm.dt_log2 >= -24) {
            return Err(Error::Config(format!(
                "dt_log2 = {} outside the supported range [-24, 0]",
                self.fbm.dt_log2
            )));
        }
        self.resolve_noise()?;
        Ok(consts)
    }

    /// Turn the noise section into a concrete validated spec.
    pub fn resolve_noise(&self) -> Result<NoiseSpec> {
        match self.noise.family.as_str() {
            "gaussian" => NoiseSpec::gaussian(self.model.sigma_z2),
            "symmetric_gaussian_mixture" => {
                let comps = self.noise.components.clone().ok_or_else(|| {
                    Error::Config("symmetric_gaussian_mixture needs components".into())
                })?;
                let spec = NoiseSpec::symmetric_mixture(comps)?;
                let v = spec.variance();
                if (v - self.model.sigma_z2).abs() > 1e-9 * self.model.sigma_z2.max(1.0) {
                    return Err(Error::Config(format!(
                        "mixture variance {v} disagrees with sigma_z2 = {}",
                        self.model.sigma_z2
                    )));
                }
                Ok(spec)
            }
            "matched_mixture" => {
                let kappa = params::kappa(self.model.alpha)?;
                let built = build_matched_mixture(self.model.sigma_z2, kappa, self.noise.spread)?;
                Ok(built.spec)
            }
            other => Err(Error::Config(format!("unknown noise family '{other}'"))),
        }
    }

    pub fn dt(&self) -> f64 {
        2f64.powi(self.fbm.dt_log2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        // every section appears explicitly in the echo
        for section in ["[model]", "[noise]", "[sampler]", "[fbm]", "[run]"] {
            assert!(text.contains(section), "missing {section} in:\n{text}");
        }
    }

    #[test]
    fn alpha_out_of_range_names_the_bound() {
        let text = "[model]\nalpha = 0.4\n";
        let err = ExperimentConfig::from_toml(text).unwrap_err();
        assert!(format!("{err}").contains("(1/2, 1)"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[model]\nalhpa = 0.75\n";
        assert!(ExperimentConfig::from_toml(text).is_err());
    }

    #[test]
    fn mixture_noise_resolves_and_checks_variance() {
        let text = r#"
[model]
sigma_z2 = 2.0

[noise]
family = "symmetric_gaussian_mixture"
components = [
  { w = 0.5, mu = 1.0, s = 1.0 },
  { w = 0.5, mu = -1.0, s = 1.0 },
]
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let spec = cfg.resolve_noise().unwrap();
        assert!((spec.variance() - 2.0).abs() < 1e-12);

        let bad = text.replace("sigma_z2 = 2.0", "sigma_z2 = 1.0");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn matched_mixture_resolves() {
        let text = "[noise]\nfamily = \"matched_mixture\"\nspread = 0.9\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let spec = cfg.resolve_noise().unwrap();
        assert!((spec.variance() - 1.0).abs() < 1e-12);
        assert!((spec.moment(4) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn noise_spec_wire_format() {
        let g = NoiseSpec::gaussian(1.5).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains("\"family\":\"gaussian\""), "{json}");
        assert!(json.contains("\"sigma_Z2\":1.5"), "{json}");

        let m = NoiseSpec::symmetric_mixture(vec![
            crate::noise::MixtureComponent {
                weight: 0.5,
                mean: 1.0,
                sd: 2.0,
            },
            crate::noise::MixtureComponent {
                weight: 0.5,
                mean: -1.0,
                sd: 2.0,
            },
        ])
        .unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"family\":\"symmetric_gaussian_mixture\""));
        assert!(
            json.contains("\"w\":0.5") && json.contains("\"mu\":1.0") && json.contains("\"s\":2.0")
        );
        let back: NoiseSpec = serde_json::from_str(&json).unwrap();
        back.validate().unwrap();
        assert_eq!(m, back);
    }
}
