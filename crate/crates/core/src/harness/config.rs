//! Run configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::problems::{ConstraintSpec, StreamSpec};
use crate::error::{Error, Result};
use crate::geometry::{SetKind, SimpleSet};
use crate::opmm::{AlgoParams, InnerSolverParams, Route};
use crate::oracle::{Problem, ThetaStrategy};

pub const SCHEMA_VERSION: u32 = 1;

/// Step-size schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ParamSpec {
    /// `σ = T^{-1/4}`, `α = T^{1/4}`
    Theorem1,
    /// `σ = T^{-1/2}`, `α = T^{1/2}`
    Prop4,
    Custom {
        sigma: f64,
        alpha: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Horizon `T`.
    pub horizon: usize,
    /// Initial decision; defaults to the projection of the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub route: Route,
    #[serde(default)]
    pub strict: bool,
    pub params: ParamSpec,
    #[serde(default)]
    pub theta: ThetaStrategy,
    #[serde(default)]
    pub inner: InnerSolverParams,
    pub set: SetKind,
    pub constraints: ConstraintSpec,
    pub stream: StreamSpec,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        self.algo_params().validate()?;
        SimpleSet::new(self.set.clone())?;
        Ok(())
    }

    /// Copy with the stream seed replaced.
    pub fn with_seed(&self, seed: u64) -> Self {
        RunConfig {
            stream: self.stream.with_seed(seed),
            ..self.clone()
        }
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        RunConfig {
            horizon,
            ..self.clone()
        }
    }

    pub fn algo_params(&self) -> AlgoParams {
        let mut p = match self.params {
            ParamSpec::Theorem1 => AlgoParams::theorem1(self.horizon, self.theta),
            ParamSpec::Prop4 => AlgoParams::quadratic(self.horizon, self.theta),
            ParamSpec::Custom { sigma, alpha } => AlgoParams::custom(sigma, alpha, self.horizon, self.theta),
        };
        p.inner = self.inner;
        p.strict = self.strict;
        p
    }

    pub fn build_set(&self) -> Result<SimpleSet> {
        SimpleSet::new(self.set.clone())
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let set = self.build_set()?;
        let constraints = self.constraints.build(&set)?;
        let stream = self.stream.build(&set)?;
        let x1 = match &self.x1 {
            Some(x) => x.clone(),
            None => set.project(&vec![0.0; set.dim()])?,
        };
        Problem::new(set, constraints, stream, x1)
    }
}
