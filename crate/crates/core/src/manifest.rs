//! Run configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentHandle, EndpointAgent, EndpointConfig, SyntheticAgent, SyntheticParams};
use crate::boot::{BootstrapSpec, RankConfig};
use crate::error::{ArenaError, Result};
use crate::genpipe::PipelineConfig;
use crate::rasch::{FitConfig, Weights};
use crate::types::{taxonomy, DomainTag, ModelId, Role};

/// Keys that only affect ranking or scheduling, left out of the run hash so
/// a finished run can be re-ranked with other settings.
const UNHASHED: [&str; 11] = [
    "parallelism",
    "lambda",
    "anchor_model",
    "anchor_rating",
    "weights",
    "bootstrap_iterations",
    "bootstrap_seed",
    "alpha",
    "tolerance",
    "max_iterations",
    "templates_dir",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointBinding {
    pub model_name: String,
    pub base_url: String,
    pub auth_env: String,
    /// Overrides the run temperature for this model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backoff_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binding {
    Endpoint(EndpointBinding),
    Synthetic(SyntheticParams),
}

fn all_roles() -> BTreeSet<Role> {
    [Role::Author, Role::Solver, Role::Verifier].into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: ModelId,
    #[serde(default = "all_roles")]
    pub roles: BTreeSet<Role>,
    pub binding: Binding,
}

fn d_lambda() -> f64 {
    0.01
}
fn d_anchor_rating() -> f64 {
    1500.0
}
fn d_bootstrap() -> usize {
    10_000
}
fn d_alpha() -> f64 {
    0.025
}
fn d_stages() -> u8 {
    3
}
fn d_rounds() -> usize {
    1
}
fn d_parallelism() -> usize {
    4
}
fn d_temperature() -> f64 {
    1.0
}
fn d_samples() -> usize {
    1
}
fn d_tolerance() -> f64 {
    1e-8
}
fn d_max_iterations() -> usize {
    500
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub models: Vec<ModelSpec>,
    pub problems_per_model: usize,
    #[serde(default = "taxonomy")]
    pub domains: Vec<DomainTag>,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    pub anchor_model: ModelId,
    #[serde(default = "d_anchor_rating")]
    pub anchor_rating: f64,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default = "d_bootstrap")]
    pub bootstrap_iterations: usize,
    /// Defaults to `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap_seed: Option<u64>,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default = "d_stages")]
    pub pipeline_stages: u8,
    #[serde(default = "d_rounds")]
    pub amplification_rounds: usize,
    pub seed: u64,
    #[serde(default = "d_parallelism")]
    pub parallelism: usize,
    #[serde(default = "d_temperature")]
    pub temperature: f64,
    /// Verification backbone; defaults to the first model with the verifier role.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier: Option<ModelId>,
    #[serde(default = "d_samples")]
    pub verifier_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
    #[serde(default = "d_tolerance")]
    pub tolerance: f64,
    #[serde(default = "d_max_iterations")]
    pub max_iterations: usize,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ArenaError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| ArenaError::Config(format!("manifest {}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    /// An all-synthetic arena: `abilities[i]` is agent `m{i:02}`'s latent
    /// ability, every agent authors around difficulty 0 with `spread`, and
    /// the middle agent is the anchor.
    pub fn synthetic(abilities: &[f64], problems_per_model: usize, spread: f64, seed: u64) -> Self {
        let models: Vec<ModelSpec> = abilities
            .iter()
            .enumerate()
            .map(|(i, &s)| ModelSpec {
                name: ModelId::new(format!("m{i:02}")).expect("non-empty"),
                roles: all_roles(),
                binding: Binding::Synthetic(SyntheticParams {
                    latent_ability: s,
                    authoring_difficulty_mean: 0.0,
                    authoring_difficulty_spread: spread,
                    gold_error_rate: 0.0,
                    ill_posed_rate: 0.0,
                    seed: seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
                }),
            })
            .collect();
        RunManifest {
            anchor_model: models[abilities.len() / 2].name.clone(),
            models,
            problems_per_model,
            domains: taxonomy(),
            lambda: d_lambda(),
            anchor_rating: d_anchor_rating(),
            weights: Weights::default(),
            bootstrap_iterations: 200,
            bootstrap_seed: None,
            alpha: d_alpha(),
            pipeline_stages: 2,
            amplification_rounds: 0,
            seed,
            parallelism: 1,
            temperature: d_temperature(),
            verifier: None,
            verifier_samples: d_samples(),
            templates_dir: None,
            tolerance: d_tolerance(),
            max_iterations: d_max_iterations(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(ArenaError::Config(msg));
        if self.models.is_empty() {
            return fail("no models".into());
        }
        let mut names = BTreeSet::new();
        for m in &self.models {
            if !names.insert(&m.name) {
                return fail(format!("model {} listed twice", m.name));
            }
            if m.roles.is_empty() {
                return fail(format!("model {} has no role", m.name));
            }
        }
        if self.problems_per_model == 0 {
            return fail("problems_per_model must be at least 1".into());
        }
        if self.bootstrap_iterations == 0 {
            return fail("bootstrap_iterations must be at least 1".into());
        }
        if self.domains.is_empty() {
            return fail("domains must not be empty".into());
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return fail(format!("lambda {} must be finite and nonnegative", self.lambda));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return fail(format!("alpha {} must lie in (0, 0.5)", self.alpha));
        }
        if self.parallelism == 0 {
            return fail("parallelism must be positive".into());
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return fail(format!("temperature {} must be finite and nonnegative", self.temperature));
        }
        if !self.anchor_rating.is_finite() {
            return fail("anchor_rating must be finite".into());
        }
        if !self.has_role(&self.anchor_model, Role::Solver) {
            return fail(format!("anchor model {} is not a listed solver", self.anchor_model));
        }
        self.weights.validate()?;
        self.pipeline().validate().map_err(|e| ArenaError::Config(e.to_string()))?;
        self.fit_config().validate().map_err(|e| ArenaError::Config(e.to_string()))?;
        self.backbone()?;
        if self.with_role(Role::Author).is_empty() {
            return fail("no model has the author role".into());
        }
        if self.with_role(Role::Solver).len() < 2 {
            return fail("at least two solvers are needed".into());
        }
        Ok(())
    }

    fn has_role(&self, name: &ModelId, role: Role) -> bool {
        self.models.iter().any(|m| &m.name == name && m.roles.contains(&role))
    }

    pub fn with_role(&self, role: Role) -> Vec<&ModelSpec> {
        self.models.iter().filter(|m| m.roles.contains(&role)).collect()
    }

    pub fn backbone(&self) -> Result<ModelId> {
        match &self.verifier {
            Some(v) if self.has_role(v, Role::Verifier) => Ok(v.clone()),
            Some(v) => Err(ArenaError::Config(format!("verifier {v} lacks the verifier role"))),
            None => self
                .with_role(Role::Verifier)
                .first()
                .map(|m| m.name.clone())
                .ok_or_else(|| ArenaError::Config("no model has the verifier role".into())),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        self.models.iter().all(|m| matches!(m.binding, Binding::Synthetic(_)))
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            stages: self.pipeline_stages,
            amplification_rounds: self.amplification_rounds,
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            lambda: self.lambda,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            init_seed: None,
        }
    }

    pub fn rank_config(&self) -> RankConfig {
        RankConfig {
            fit: self.fit_config(),
            anchor: self.anchor_model.clone(),
            anchor_rating: self.anchor_rating,
            weights: self.weights,
        }
    }

    pub fn bootstrap_spec(&self) -> BootstrapSpec {
        BootstrapSpec::new(self.bootstrap_iterations, self.alpha, self.bootstrap_seed.unwrap_or(self.seed))
    }

    /// Hex SHA-256 of the manifest with ranking-only keys removed.
    pub fn run_hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("manifest serializes");
        if let Some(map) = value.as_object_mut() {
            for key in UNHASHED {
                map.remove(key);
            }
        }
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    /// One agent per model, in manifest order.
    pub fn build_agents(&self) -> Result<Vec<AgentHandle>> {
        self.models
            .iter()
            .map(|m| -> Result<AgentHandle> {
                Ok(match &m.binding {
                    Binding::Synthetic(p) => Arc::new(SyntheticAgent::new(m.name.clone(), p.clone())?),
                    Binding::Endpoint(b) => Arc::new(EndpointAgent::new(
                        m.name.clone(),
                        EndpointConfig {
                            model_name: b.model_name.clone(),
                            base_url: b.base_url.clone(),
                            auth_env: b.auth_env.clone(),
                            temperature: b.temperature.unwrap_or(self.temperature),
                            max_retries: b.max_retries.unwrap_or(3),
                            timeout_secs: b.timeout_secs.unwrap_or(300),
                            backoff_ms: b.backoff_ms.unwrap_or(1000),
                        },
                    )),
                })
            })
            .collect()
    }
}
