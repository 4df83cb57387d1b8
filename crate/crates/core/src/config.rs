//! Pipeline parameters and the flat `key = value` config file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All tunables of a co-saliency run. `Default` holds the reference settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub n_superpixels: usize,
    /// Root seeds for the depth shape prior.
    pub k_roots: usize,
    /// Foreground/background propagation seeds.
    pub kappa: usize,
    /// Depth smoothness threshold.
    pub t1: f64,
    /// Depth consistency threshold.
    pub t2: f64,
    pub sigma2: f64,
    pub zeta: f64,
    pub i_max: usize,
    pub beta2: f64,
    /// Row-normalize the propagation weights (with a unit self weight).
    pub row_normalize: bool,
    /// Saliency subdirectories to fuse; empty means every method present.
    pub methods: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_superpixels: 200,
            k_roots: 10,
            kappa: 10,
            t1: 0.1,
            t2: 0.2,
            sigma2: 0.1,
            zeta: 0.1,
            i_max: 5,
            beta2: 0.3,
            row_normalize: true,
            methods: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_owned()));
        if self.n_superpixels < 16 {
            return bad("n_superpixels must be at least 16");
        }
        if self.k_roots == 0 {
            return bad("k_roots must be at least 1");
        }
        if self.kappa == 0 {
            return bad("kappa must be at least 1");
        }
        if !(self.t1 > 0.0 && self.t1 <= self.t2 && self.t2 <= 1.0) {
            return bad("thresholds must satisfy 0 < t1 <= t2 <= 1");
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad("sigma2 must be positive");
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return bad("zeta must lie in (0, 1)");
        }
        if !(self.beta2 > 0.0 && self.beta2.is_finite()) {
            return bad("beta2 must be positive");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }
}
