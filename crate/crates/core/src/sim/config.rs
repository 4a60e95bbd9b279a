//! Scenario configuration.
//!
//! [`ScenarioFile`] is what lives on disk (TOML). Balances and deposits there
//! are in whole tokens, `submission_cost` is in minor units (hundredths of a
//! token), and the key names follow the usual parameter table
//! (`num_words`, `train_size`, `start_balance`, `mean_deposit`,
//! `stdev_deposit`, `mean_update_wait_s`, `prob_mistake`,
//! `submission_cost`). [`ScenarioConfig`] is the validated form the engine
//! runs on, with every amount converted to integer minor units.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentProfile, CorruptionMode};
use crate::contract::{AgentId, ContractRules, Seconds, Units, UNITS_PER_TOKEN};
use crate::sim::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetFile {
    Synthetic {
        n: usize,
        seed: u64,
    },
    Indexed {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_path: Option<PathBuf>,
    },
    Raw {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_path: Option<PathBuf>,
    },
}

impl Default for DatasetFile {
    fn default() -> Self {
        DatasetFile::Synthetic { n: 25_000, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractFile {
    /// Minor units burned per accepted submission.
    pub submission_cost: u64,
    pub refund_wait_s: u64,
    pub min_deposit: f64,
    pub cooldown_s: u64,
    pub escalation_deposit_factor: u64,
    pub escalation_cooldown_factor: u64,
    pub reward_fraction: f64,
    pub standing_window: usize,
    pub standing_threshold: f64,
}

impl Default for ContractFile {
    fn default() -> Self {
        let r = ContractRules::default();
        ContractFile {
            submission_cost: r.submission_cost,
            refund_wait_s: r.refund_wait,
            min_deposit: (r.base_min_deposit / UNITS_PER_TOKEN) as f64,
            cooldown_s: r.base_cooldown,
            escalation_deposit_factor: r.escalation_deposit_factor,
            escalation_cooldown_factor: r.escalation_cooldown_factor,
            reward_fraction: r.reward_fraction,
            standing_window: r.standing_window,
            standing_threshold: r.standing_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentFile {
    pub id: String,
    pub honest: bool,
    pub start_balance: f64,
    pub mean_deposit: f64,
    pub stdev_deposit: f64,
    pub mean_update_wait_s: f64,
    pub prob_mistake: f64,
    pub corruption: CorruptionMode,
}

impl AgentFile {
    pub fn good() -> Self {
        AgentFile {
            id: "good".into(),
            honest: true,
            start_balance: 10_000.0,
            mean_deposit: 50.0,
            stdev_deposit: 10.0,
            mean_update_wait_s: 600.0,
            prob_mistake: 0.0001,
            corruption: CorruptionMode::LabelFlip,
        }
    }

    pub fn malicious() -> Self {
        AgentFile {
            id: "malicious".into(),
            honest: false,
            start_balance: 10_000.0,
            mean_deposit: 100.0,
            stdev_deposit: 3.0,
            mean_update_wait_s: 3600.0,
            prob_mistake: 0.0,
            corruption: CorruptionMode::LabelFlip,
        }
    }
}

impl Default for AgentFile {
    fn default() -> Self {
        AgentFile::good()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: u64,
    pub num_words: u32,
    pub train_size: f64,
    pub test_fraction: f64,
    pub max_epochs: u32,
    pub snapshot_every_s: u64,
    pub max_virtual_time_s: Option<u64>,
    pub dataset: DatasetFile,
    pub contract: ContractFile,
    pub agents: Vec<AgentFile>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile {
            seed: 0,
            num_words: 1000,
            train_size: 0.08,
            test_fraction: 0.5,
            max_epochs: 50,
            snapshot_every_s: 86_400,
            max_virtual_time_s: None,
            dataset: DatasetFile::default(),
            contract: ContractFile::default(),
            agents: vec![AgentFile::good(), AgentFile::malicious()],
        }
    }
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::ConfigParse(e.message().to_owned()))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        let mut file = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            file.resolve_paths(dir);
        }
        Ok(file)
    }

    /// Makes relative dataset paths relative to `base` (the config's folder).
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetFile::Synthetic { .. } => {}
            DatasetFile::Indexed { path, test_path } | DatasetFile::Raw { path, test_path } => {
                fix(path);
                if let Some(t) = test_path {
                    fix(t);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic { n: usize, seed: u64 },
    Indexed { path: PathBuf, test_path: Option<PathBuf> },
    Raw { path: PathBuf, test_path: Option<PathBuf> },
}

/// Everything one run needs, amounts in minor units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_words: u32,
    pub train_size: f64,
    pub test_fraction: f64,
    pub max_epochs: u32,
    pub contract: ContractRules,
    pub agents: Vec<AgentProfile>,
    pub max_virtual_time: Option<Seconds>,
    pub snapshot_every: Seconds,
    pub seed: u64,
    pub dataset: DatasetSource,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::try_from(ScenarioFile::default()).expect("defaults are valid")
    }
}

fn tokens(value: f64, field: &str) -> Result<Units, SimError> {
    if !value.is_finite() || value < 0.0 {
        return Err(SimError::InvalidConfig(field.to_owned()));
    }
    Ok((value * UNITS_PER_TOKEN as f64).round() as Units)
}

fn invalid(field: impl Into<String>) -> SimError {
    SimError::InvalidConfig(field.into())
}

impl TryFrom<ScenarioFile> for ScenarioConfig {
    type Error = SimError;

    fn try_from(f: ScenarioFile) -> Result<Self, SimError> {
        if f.num_words == 0 {
            return Err(invalid("num_words"));
        }
        if !(f.train_size > 0.0 && f.train_size < 1.0) {
            return Err(invalid("train_size"));
        }
        if !(0.0..1.0).contains(&f.test_fraction) {
            return Err(invalid("test_fraction"));
        }
        if f.max_epochs == 0 {
            return Err(invalid("max_epochs"));
        }
        if f.snapshot_every_s == 0 {
            return Err(invalid("snapshot_every_s"));
        }
        if f.agents.is_empty() {
            return Err(invalid("agents"));
        }

        let c = &f.contract;
        let contract = ContractRules {
            submission_cost: c.submission_cost,
            refund_wait: c.refund_wait_s,
            base_min_deposit: tokens(c.min_deposit, "contract.min_deposit")?,
            base_cooldown: c.cooldown_s,
            escalation_deposit_factor: c.escalation_deposit_factor,
            escalation_cooldown_factor: c.escalation_cooldown_factor,
            reward_fraction: c.reward_fraction,
            standing_window: c.standing_window,
            standing_threshold: c.standing_threshold,
        };
        contract.validate().map_err(|e| match e {
            crate::contract::ContractError::InvalidRules(field) => {
                invalid(format!("contract.{field}"))
            }
            other => invalid(other.to_string()),
        })?;

        let mut agents = Vec::with_capacity(f.agents.len());
        for (i, a) in f.agents.iter().enumerate() {
            let field = |name: &str| format!("agents[{i}].{name}");
            if a.id.is_empty() || f.agents[..i].iter().any(|b| b.id == a.id) {
                return Err(invalid(field("id")));
            }
            let mean_deposit = tokens(a.mean_deposit, &field("mean_deposit"))?;
            if mean_deposit == 0 {
                return Err(invalid(field("mean_deposit")));
            }
            if !(a.mean_update_wait_s.is_finite() && a.mean_update_wait_s >= 1.0) {
                return Err(invalid(field("mean_update_wait_s")));
            }
            if !(0.0..=1.0).contains(&a.prob_mistake) {
                return Err(invalid(field("prob_mistake")));
            }
            agents.push(AgentProfile {
                id: AgentId(i as u32),
                name: a.id.clone(),
                honest: a.honest,
                start_balance: tokens(a.start_balance, &field("start_balance"))?,
                mean_deposit,
                stdev_deposit: tokens(a.stdev_deposit, &field("stdev_deposit"))?,
                mean_update_wait: a.mean_update_wait_s.round() as Seconds,
                prob_mistake: if a.honest { a.prob_mistake } else { 0.0 },
                corruption_mode: a.corruption,
            });
        }

        let dataset = match f.dataset {
            DatasetFile::Synthetic { n, seed } => {
                if n < 2 {
                    return Err(invalid("dataset.n"));
                }
                if f.num_words < 4 {
                    return Err(invalid("num_words"));
                }
                DatasetSource::Synthetic { n, seed }
            }
            DatasetFile::Indexed { path, test_path } => DatasetSource::Indexed { path, test_path },
            DatasetFile::Raw { path, test_path } => DatasetSource::Raw { path, test_path },
        };

        Ok(ScenarioConfig {
            num_words: f.num_words,
            train_size: f.train_size,
            test_fraction: f.test_fraction,
            max_epochs: f.max_epochs,
            contract,
            agents,
            max_virtual_time: f.max_virtual_time_s,
            snapshot_every: f.snapshot_every_s,
            seed: f.seed,
            dataset,
        })
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, SimError> {
        ScenarioFile::load(path)?.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_parameter_table() {
        let c = ScenarioConfig::default();
        assert_eq!(c.num_words, 1000);
        assert_eq!(c.train_size, 0.08);
        assert_eq!(c.contract.submission_cost, 5);
        assert_eq!(c.contract.refund_wait, 7 * 86_400);
        assert_eq!(c.contract.escalation_deposit_factor, 2);
        assert_eq!(c.contract.escalation_cooldown_factor, 6);
        let good = &c.agents[0];
        assert!(good.honest);
        assert_eq!(good.start_balance, 1_000_000);
        assert_eq!(good.mean_deposit, 5000);
        assert_eq!(good.stdev_deposit, 1000);
        assert_eq!(good.mean_update_wait, 600);
        assert_eq!(good.prob_mistake, 0.0001);
        let bad = &c.agents[1];
        assert!(!bad.honest);
        assert_eq!(bad.mean_deposit, 10_000);
        assert_eq!(bad.stdev_deposit, 300);
        assert_eq!(bad.mean_update_wait, 3600);
        assert_eq!(bad.corruption_mode, CorruptionMode::LabelFlip);
    }

    #[test]
    fn parses_toml_with_partial_keys() {
        let f = ScenarioFile::from_toml(
            r#"
            seed = 3
            num_words = 200
            [contract]
            submission_cost = 25
            [dataset]
            kind = "synthetic"
            n = 500
            seed = 9
            [[agents]]
            id = "solo"
            mean_deposit = 0.5
            "#,
        )
        .unwrap();
        let c = ScenarioConfig::try_from(f).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.contract.submission_cost, 25);
        assert_eq!(c.agents.len(), 1);
        assert_eq!(c.agents[0].mean_deposit, 50);
        assert_eq!(c.dataset, DatasetSource::Synthetic { n: 500, seed: 9 });
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ScenarioFile::from_toml("num_wrds = 3").is_err());
        let bad = |edit: fn(&mut ScenarioFile), field: &str| {
            let mut f = ScenarioFile::default();
            edit(&mut f);
            let err = ScenarioConfig::try_from(f).unwrap_err();
            assert_eq!(err.to_string(), format!("config invalid: {field}"));
        };
        bad(|f| f.train_size = 1.0, "train_size");
        bad(|f| f.num_words = 0, "num_words");
        bad(|f| f.agents.clear(), "agents");
        bad(|f| f.snapshot_every_s = 0, "snapshot_every_s");
        bad(|f| f.agents[1].prob_mistake = 2.0, "agents[1].prob_mistake");
        bad(|f| f.agents[0].mean_deposit = 0.0, "agents[0].mean_deposit");
        bad(|f| f.agents[1].id = "good".into(), "agents[1].id");
        bad(|f| f.contract.reward_fraction = -0.1, "contract.reward_fraction");
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let mut f = ScenarioFile {
            dataset: DatasetFile::Indexed {
                path: "train.tsv".into(),
                test_path: Some("/abs/test.tsv".into()),
            },
            ..ScenarioFile::default()
        };
        f.resolve_paths(Path::new("/cfg"));
        assert_eq!(
            f.dataset,
            DatasetFile::Indexed {
                path: "/cfg/train.tsv".into(),
                test_path: Some("/abs/test.tsv".into())
            }
        );
    }
}
