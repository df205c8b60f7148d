//! TOML run configuration: key-value sections per subcommand, merged with
//! command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use threshold_exec::gain::{self, GainModel};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// The config file. Unknown keys are rejected so typos surface as
/// configuration errors instead of silent defaults.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub format: Option<OutputFormat>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub dp: DpSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub iab: IabSection,
    #[serde(default)]
    pub ac: AcSection,
}

impl FileConfig {
    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("bad config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse_str(&text)
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// "linear_uniform" (default) or "empirical".
    pub kind: Option<String>,
    pub scale_g: Option<f64>,
    pub noise_sigma: Option<f64>,
    /// Two-column `signal,price_change` file for the empirical model.
    pub samples_file: Option<PathBuf>,
    /// Previously exported model JSON to import instead.
    pub model_json: Option<PathBuf>,
}

/// Echo of the resolved model for the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ModelEcho {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
}

impl ModelSection {
    pub fn build(&self) -> Result<(GainModel, ModelEcho), CliError> {
        if let Some(path) = &self.model_json {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read model {}: {e}", path.display()))
            })?;
            let model = GainModel::from_json(&text)
                .map_err(|e| CliError::Config(format!("bad model json: {e}")))?;
            let echo = ModelEcho {
                kind: format!("{:?}", model.kind()).to_lowercase(),
                scale_g: model.quadratic_scale(),
                noise_sigma: None,
                source: Some(path.display().to_string()),
                rows: None,
            };
            return Ok((model, echo));
        }
        match self.kind.as_deref().unwrap_or("linear_uniform") {
            "linear_uniform" => {
                let scale_g = self.scale_g.unwrap_or(1.0);
                let noise_sigma = self.noise_sigma.unwrap_or(0.1);
                if !(scale_g.is_finite() && scale_g > 0.0) {
                    return Err(CliError::Config(format!("model.scale_g = {scale_g}")));
                }
                if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
                    return Err(CliError::Config(format!(
                        "model.noise_sigma = {noise_sigma}"
                    )));
                }
                let model = GainModel::linear_uniform_with_noise(scale_g, noise_sigma);
                let echo = ModelEcho {
                    kind: "linear_uniform".into(),
                    scale_g: Some(scale_g),
                    noise_sigma: Some(noise_sigma),
                    source: None,
                    rows: None,
                };
                Ok((model, echo))
            }
            "empirical" => {
                let path = self.samples_file.as_ref().ok_or_else(|| {
                    CliError::Config("model.kind = empirical needs model.samples_file".into())
                })?;
                let file = fs::File::open(path).map_err(|e| {
                    CliError::Config(format!("cannot open samples {}: {e}", path.display()))
                })?;
                let rows = gain::read_samples_csv(file)
                    .map_err(|e| CliError::Config(format!("bad samples file: {e}")))?;
                let model = GainModel::empirical_from_samples(&rows)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                if model.mean_warning() {
                    eprintln!("warning: sample mean of price_change is not statistically zero");
                }
                if let Some(report) = model.monotonicity() {
                    if report.flagged {
                        eprintln!(
                            "warning: absolute gain G(p) is not monotone (max rise {:.3e}); \
                             the signal may not be well designed",
                            report.max_violation
                        );
                    }
                }
                let echo = ModelEcho {
                    kind: "empirical".into(),
                    scale_g: None,
                    noise_sigma: None,
                    source: Some(path.display().to_string()),
                    rows: Some(rows.len()),
                };
                Ok((model, echo))
            }
            other => Err(CliError::Config(format!("unknown model.kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DpSection {
    pub n_steps: Option<usize>,
    pub q_star: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    /// Variant names; defaults to all closed forms plus the solved optimum.
    pub variants: Option<Vec<String>>,
    pub border_width: Option<f64>,
    pub tau_unconstrained: Option<f64>,
    pub tau_constrained: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub paths: Option<usize>,
    pub checkpoints: Option<Vec<usize>>,
    pub p0: Option<f64>,
    pub variant: Option<String>,
    pub force_completion: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IabSection {
    /// "constant", "deterministic", or "ac" (schedule-driven).
    pub field: Option<String>,
    pub fill: Option<f64>,
    pub scale: Option<usize>,
    pub q_star_frac: Option<f64>,
    pub paths: Option<usize>,
    pub checkpoints: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AcSection {
    pub horizon: Option<f64>,
    pub q_star: Option<f64>,
    pub sigma: Option<f64>,
    pub eta: Option<f64>,
    pub gamma_perm: Option<f64>,
    pub lambda_risk: Option<f64>,
    pub tau: Option<f64>,
    /// Signal observations per unit time (`u`).
    pub obs_rate: Option<f64>,
    pub validate: Option<bool>,
    pub validate_paths: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = r#"
            seed = 7
            out = "results"
            format = "json"

            [model]
            kind = "linear_uniform"
            scale_g = 2.0

            [dp]
            n_steps = 50
            q_star = 20

            [sim]
            paths = 1000
            checkpoints = [10, 20]

            [ac]
            horizon = 1.0
            q_star = 100.0
        "#;
        let cfg = FileConfig::parse_str(text).unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.format, Some(OutputFormat::Json));
        assert_eq!(cfg.dp.n_steps, Some(50));
        assert_eq!(cfg.sim.checkpoints.as_deref(), Some(&[10, 20][..]));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(FileConfig::parse_str("qstar = 3").is_err());
        assert!(FileConfig::parse_str("[dp]\nsteps = 3").is_err());
    }

    #[test]
    fn model_defaults_and_validation() {
        let (model, echo) = ModelSection::default().build().unwrap();
        assert_eq!(model.quadratic_scale(), Some(1.0));
        assert_eq!(echo.kind, "linear_uniform");

        let bad = ModelSection {
            scale_g: Some(-1.0),
            ..Default::default()
        };
        assert!(bad.build().is_err());

        let empirical_without_file = ModelSection {
            kind: Some("empirical".into()),
            ..Default::default()
        };
        assert!(empirical_without_file.build().is_err());
    }
}
