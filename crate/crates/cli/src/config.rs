//! Run configuration: every field defaulted, unknown keys rejected.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use navgym_core::obs::ObsConfig;
use navgym_core::sim::SimConfig;
use navgym_nn::NetworkSpec;
use navgym_sac::train::RunParams;
use navgym_sac::{CurriculumConfig, HerStrategy, SacConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Ablation {
    NoLstm,
    NoCurriculum,
    NoBoxcast,
    NoRaycast,
    NoAbsPosition,
    /// Adds hindsight relabeling (future strategy unless one is configured).
    Her,
}

impl Ablation {
    pub fn name(self) -> &'static str {
        match self {
            Ablation::NoLstm => "no_lstm",
            Ablation::NoCurriculum => "no_curriculum",
            Ablation::NoBoxcast => "no_boxcast",
            Ablation::NoRaycast => "no_raycast",
            Ablation::NoAbsPosition => "no_abs_position",
            Ablation::Her => "her",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub map: PathBuf,
    /// Occupancy cache from `bake`. Baked in memory when unset.
    pub cache: Option<PathBuf>,
    pub out: PathBuf,
    pub ablate: Vec<Ablation>,
    pub seed: u64,
    pub budget: u64,
    pub deterministic: bool,
    pub sim: SimConfig,
    pub obs: ObsConfig,
    pub network: NetworkSpec,
    pub sac: SacConfig,
    pub curriculum: CurriculumConfig,
    pub run: RunParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            map: PathBuf::from("fixtures/toy_desk.map.json"),
            cache: None,
            out: PathBuf::from("runs/default"),
            ablate: Vec::new(),
            seed: t.seed,
            budget: t.budget,
            deterministic: t.deterministic,
            sim: t.sim,
            obs: t.obs,
            network: t.network,
            sac: t.sac,
            curriculum: t.curriculum,
            run: t.run,
        }
    }
}

/// Dotted paths of keys in `given` that `reference` does not have.
pub fn unknown_keys(given: &Value, reference: &Value) -> Vec<String> {
    let mut out = Vec::new();
    walk(given, reference, "", &mut out);
    out
}

fn walk(given: &Value, reference: &Value, prefix: &str, out: &mut Vec<String>) {
    let Value::Object(g) = given else { return };
    let Value::Object(r) = reference else { return };
    for (k, v) in g {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match r.get(k) {
            None => out.push(path),
            Some(rv) => walk(v, rv, &path, out),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let v: Value = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        let reference = serde_json::to_value(Self::default()).expect("config serializes");
        let unknown = unknown_keys(&v, &reference);
        if !unknown.is_empty() {
            return Err(CliError::Usage(format!("unknown config keys: {}", unknown.join(", "))));
        }
        serde_json::from_value(v).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn add_ablations(&mut self, extra: &[Ablation]) {
        self.ablate.extend_from_slice(extra);
        self.ablate.sort();
        self.ablate.dedup();
    }

    /// Trainer config with ablations applied and derived sizes filled in.
    pub fn to_train(&self) -> TrainConfig {
        let mut t = TrainConfig {
            seed: self.seed,
            budget: self.budget,
            deterministic: self.deterministic,
            sim: self.sim,
            obs: self.obs,
            network: self.network.clone(),
            sac: self.sac.clone(),
            curriculum: self.curriculum.clone(),
            run: self.run.clone(),
        };
        for a in &self.ablate {
            match a {
                Ablation::NoLstm => t.network.lstm_hidden = None,
                Ablation::NoCurriculum => t.curriculum.enabled = false,
                Ablation::NoBoxcast => t.obs.no_boxcast = true,
                Ablation::NoRaycast => t.obs.no_raycast = true,
                Ablation::NoAbsPosition => t.obs.no_abs_position = true,
                Ablation::Her => {
                    t.sac.her.get_or_insert(HerStrategy::Future);
                }
            }
        }
        t.resolve();
        t
    }

    /// Every problem found, one per line.
    pub fn validate(&self) -> Result<(), CliError> {
        self.to_train().validate().map_err(CliError::Usage)
    }
}
