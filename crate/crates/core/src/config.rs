//! JSON run configuration and the manifest written next to outputs.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::MarginalDistribution;
use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;
use crate::linalg::Matrix;
use crate::models::{
    ArchimedeanCopulaModel, EllipticalModel, GaussianLinearModel, Generator, IndependentModel,
    LossModel, RadialFunction,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Independent,
    Gaussian,
    Elliptical,
    Archimedean,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial: Option<RadialFunction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    #[serde(flatten)]
    pub generator: Generator,
    #[serde(default)]
    pub survival: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    /// Label used in output files; defaults to the model's own tag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<ModelParameters>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marginals: Vec<MarginalDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copula: Option<CopulaSpec>,
}

fn default_alphas() -> Vec<f64> {
    vec![0.5, 0.9, 0.99]
}

fn default_deltas() -> Vec<f64> {
    vec![1e-3, 1e-4, 1e-5, 1e-6]
}

fn default_sample_sizes() -> Vec<usize> {
    vec![10_000, 31_622, 100_000]
}

fn default_replicates() -> usize {
    200
}

fn default_seed() -> u64 {
    20_240_601
}

fn default_n_pre() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    #[serde(default = "default_n_pre")]
    pub n_pre: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assets: Option<Vec<usize>>,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            alphas: default_alphas(),
            deltas: default_deltas(),
            sample_sizes: default_sample_sizes(),
            replicates: default_replicates(),
            base_seed: default_seed(),
            n_pre: default_n_pre(),
            assets: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    #[serde(default)]
    pub estimation: EstimationConfig,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the parsed configuration in canonical form (sorted keys,
    /// no whitespace), so formatting and key order in the file do not matter.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn model_tag(&self) -> Result<String> {
        match &self.model.name {
            Some(n) => Ok(n.clone()),
            None => Ok(self.build_model()?.tag()),
        }
    }

    pub fn build_model(&self) -> Result<LossModel> {
        let m = &self.model;
        let params = m.parameters.clone().unwrap_or_default();
        let need_l = || {
            params
                .l
                .clone()
                .ok_or_else(|| cfg_err("model.parameters.l is required for this family"))
        };
        let mu_for = |d: usize| match &params.mu {
            Some(mu) => Ok(mu.clone()),
            None => Ok::<_, Error>(vec![0.0; d]),
        };
        let no_copula = || {
            if m.copula.is_some() {
                Err(cfg_err(
                    "model.copula is only valid for the archimedean family",
                ))
            } else {
                Ok(())
            }
        };
        let model = match m.family {
            Family::Independent => {
                no_copula()?;
                LossModel::Independent(IndependentModel::new(m.marginals.clone())?)
            }
            Family::Gaussian => {
                no_copula()?;
                let l = need_l()?;
                let mu = mu_for(l.nrows())?;
                LossModel::GaussianLinear(GaussianLinearModel::new(mu, l)?)
            }
            Family::Elliptical => {
                no_copula()?;
                let l = need_l()?;
                let mu = mu_for(l.nrows())?;
                let radial = params.radial.unwrap_or_default();
                LossModel::Elliptical(EllipticalModel::new(mu, l, radial)?)
            }
            Family::Archimedean => {
                let c = m.copula.ok_or_else(|| {
                    cfg_err("model.copula is required for the archimedean family")
                })?;
                LossModel::Archimedean(ArchimedeanCopulaModel::new(
                    c.generator,
                    c.survival,
                    m.marginals.clone(),
                )?)
            }
        };
        if !matches!(m.family, Family::Independent | Family::Archimedean) && !m.marginals.is_empty()
        {
            return Err(cfg_err(
                "model.marginals is only valid for independent and archimedean families",
            ));
        }
        Ok(model)
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let model = self.build_model()?;
        let e = &self.estimation;
        let tag = self.model.name.clone().unwrap_or_else(|| model.tag());
        let mut cfg = ExperimentConfig::new(model);
        cfg.model_tag = tag;
        cfg.alphas = e.alphas.clone();
        cfg.deltas = e.deltas.clone();
        cfg.sample_sizes = e.sample_sizes.clone();
        cfg.replicates = e.replicates;
        cfg.base_seed = e.base_seed;
        cfg.n_pre = e.n_pre;
        if let Some(a) = &e.assets {
            cfg.assets = a.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Provenance record for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub tool_version: String,
    pub base_seed: u64,
    pub started_unix_ms: u128,
    pub finished_unix_ms: Option<u128>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(config: &Config) -> Self {
        Self {
            config_digest: config.digest(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            base_seed: config.estimation.base_seed,
            started_unix_ms: now_ms(),
            finished_unix_ms: None,
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix_ms = Some(now_ms());
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        crate::experiments::write_atomic(path.as_ref(), text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAUSSIAN: &str = r#"{
        "model": {"family": "gaussian",
                  "parameters": {"l": [[1,0,0],[0.5,0.7,0],[1,0.8,1.1]]}},
        "estimation": {"alphas": [0.99], "replicates": 3}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = Config::from_json(GAUSSIAN).unwrap();
        assert_eq!(c.estimation.replicates, 3);
        assert_eq!(c.estimation.deltas, default_deltas());
        assert_eq!(c.model_tag().unwrap(), "gaussian");
        assert_eq!(
            c.build_model().unwrap().as_gaussian().unwrap().mu(),
            &[0.0; 3]
        );
    }

    #[test]
    fn round_trip_is_idempotent() {
        let c = Config::from_json(GAUSSIAN).unwrap();
        let again = Config::from_json(&c.to_json()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.to_json(), c.to_json());
    }

    #[test]
    fn digest_ignores_key_order_and_whitespace() {
        let a = Config::from_json(GAUSSIAN).unwrap();
        let b = Config::from_json(
            r#"{"estimation":{"replicates":3,"alphas":[0.99]},"model":{"parameters":{"l":[[1,0,0],[0.5,0.7,0],[1,0.8,1.1]]},"family":"gaussian"}}"#,
        )
        .unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn copula_config() {
        let c = Config::from_json(
            r#"{"model": {"family": "archimedean",
                          "copula": {"generator": "clayton", "theta": 2, "survival": true},
                          "marginals": [{"kind": "gpd", "xi": 0.3, "beta": 1},
                                        {"kind": "gpd", "xi": 0.3, "beta": 1}]}}"#,
        )
        .unwrap();
        assert_eq!(c.build_model().unwrap().tag(), "survival-clayton");
        assert_eq!(Config::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(Config::from_json("{"), Err(Error::Config(_))));
        assert!(matches!(
            Config::from_json(r#"{"model": {"family": "gaussian", "bogus": 1}}"#),
            Err(Error::Config(_))
        ));
        let c = Config::from_json(r#"{"model": {"family": "gaussian"}}"#).unwrap();
        assert!(matches!(c.build_model(), Err(Error::Config(_))));
        let c = Config::from_json(r#"{"model": {"family": "archimedean"}}"#).unwrap();
        assert!(matches!(c.build_model(), Err(Error::Config(_))));
    }
}
