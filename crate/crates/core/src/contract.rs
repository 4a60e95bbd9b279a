//! Deposit / refund / forfeit incentive mechanism.
//!
//! All amounts are integer minor units so the ledger balances exactly:
//! `sum(free_balance) + sum(escrow) + reward_pool + burned` never changes.
//! Every operation validates before it mutates, so a rejected call leaves
//! the contract untouched.
//!
//! Agents whose recent claims mostly failed are in bad standing and must
//! stake more and wait longer between submissions.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Label, LabeledSample};

/// Currency in minor units (1 token = 100 units).
pub type Units = u64;
/// Virtual time in whole seconds.
pub type Seconds = u64;

pub const UNITS_PER_TOKEN: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubmissionId(pub u64);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContractError {
    #[error("unregistered agent {0}")]
    UnregisteredAgent(AgentId),
    #[error("agent {0} already registered")]
    AlreadyRegistered(AgentId),
    #[error("deposit below required minimum ({offered} < {required})")]
    DepositBelowMinimum { offered: Units, required: Units },
    #[error("deposit cannot cover submission cost ({offered} < {cost})")]
    CannotCoverCost { offered: Units, cost: Units },
    #[error("insufficient balance ({available} < {offered})")]
    InsufficientBalance { available: Units, offered: Units },
    #[error("cooldown not elapsed (next allowed at {ready_at})")]
    CooldownNotElapsed { ready_at: Seconds },
    #[error("no such pending submission")]
    NoSuchSubmission,
    #[error("refund wait not elapsed (claimable at {claimable_at})")]
    RefundWaitNotElapsed { claimable_at: Seconds },
    #[error("not the submitter")]
    NotSubmitter,
    #[error("invalid contract rules: {0}")]
    InvalidRules(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractRules {
    pub submission_cost: Units,
    pub refund_wait: Seconds,
    pub base_min_deposit: Units,
    pub base_cooldown: Seconds,
    pub escalation_deposit_factor: u64,
    pub escalation_cooldown_factor: u64,
    pub reward_fraction: f64,
    pub standing_window: usize,
    pub standing_threshold: f64,
}

impl Default for ContractRules {
    fn default() -> Self {
        ContractRules {
            submission_cost: 5,
            refund_wait: 7 * 86_400,
            base_min_deposit: 10 * UNITS_PER_TOKEN,
            base_cooldown: 60,
            escalation_deposit_factor: 2,
            escalation_cooldown_factor: 6,
            reward_fraction: 0.05,
            standing_window: 10,
            standing_threshold: 0.5,
        }
    }
}

impl ContractRules {
    pub fn validate(&self) -> Result<(), ContractError> {
        if self.escalation_deposit_factor < 1 {
            return Err(ContractError::InvalidRules("escalation_deposit_factor"));
        }
        if self.escalation_cooldown_factor < 1 {
            return Err(ContractError::InvalidRules("escalation_cooldown_factor"));
        }
        if !(0.0..=1.0).contains(&self.reward_fraction) {
            return Err(ContractError::InvalidRules("reward_fraction"));
        }
        if !(0.0..=1.0).contains(&self.standing_threshold) {
            return Err(ContractError::InvalidRules("standing_threshold"));
        }
        if self.standing_window == 0 {
            return Err(ContractError::InvalidRules("standing_window"));
        }
        Ok(())
    }

    /// Largest deposit the contract can ever demand of one agent.
    pub fn max_required_deposit(&self) -> Units {
        self.base_min_deposit * self.escalation_deposit_factor
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    pub free_balance: BTreeMap<AgentId, Units>,
    pub escrow: BTreeMap<SubmissionId, Units>,
    pub reward_pool: Units,
    pub burned: Units,
}

impl Ledger {
    pub fn total(&self) -> Units {
        self.free_balance.values().sum::<Units>()
            + self.escrow.values().sum::<Units>()
            + self.reward_pool
            + self.burned
    }
}

pub fn ledger_total(ledger: &Ledger) -> Units {
    ledger.total()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingSubmission {
    pub id: SubmissionId,
    pub agent: AgentId,
    pub sample: LabeledSample,
    pub stake: Units,
    pub submitted_at: Seconds,
    pub claimable_at: Seconds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClaimResult {
    Success,
    Failure,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentStanding {
    pub recent_outcomes: VecDeque<ClaimResult>,
    pub last_submission_at: Option<Seconds>,
}

impl AgentStanding {
    fn record(&mut self, outcome: ClaimResult, window: usize) {
        self.recent_outcomes.push_back(outcome);
        while self.recent_outcomes.len() > window {
            self.recent_outcomes.pop_front();
        }
    }

    fn in_bad_standing(&self, threshold: f64) -> bool {
        if self.recent_outcomes.is_empty() {
            return false;
        }
        let failures = self
            .recent_outcomes
            .iter()
            .filter(|o| **o == ClaimResult::Failure)
            .count();
        failures as f64 / self.recent_outcomes.len() as f64 >= threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimOutcome {
    pub verified: bool,
    pub paid: Units,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    rules: ContractRules,
    ledger: Ledger,
    pending: BTreeMap<SubmissionId, PendingSubmission>,
    standing: BTreeMap<AgentId, AgentStanding>,
    next_id: u64,
}

impl Contract {
    pub fn new(rules: ContractRules) -> Result<Self, ContractError> {
        rules.validate()?;
        Ok(Contract {
            rules,
            ledger: Ledger::default(),
            pending: BTreeMap::new(),
            standing: BTreeMap::new(),
            next_id: 0,
        })
    }

    pub fn rules(&self) -> &ContractRules {
        &self.rules
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn register(&mut self, agent: AgentId, start_balance: Units) -> Result<(), ContractError> {
        if self.standing.contains_key(&agent) {
            return Err(ContractError::AlreadyRegistered(agent));
        }
        self.standing.insert(agent, AgentStanding::default());
        self.ledger.free_balance.insert(agent, start_balance);
        Ok(())
    }

    fn standing_of(&self, agent: AgentId) -> Result<&AgentStanding, ContractError> {
        self.standing
            .get(&agent)
            .ok_or(ContractError::UnregisteredAgent(agent))
    }

    pub fn standing(&self, agent: AgentId) -> Result<&AgentStanding, ContractError> {
        self.standing_of(agent)
    }

    pub fn required_deposit(&self, agent: AgentId) -> Result<Units, ContractError> {
        let st = self.standing_of(agent)?;
        Ok(if st.in_bad_standing(self.rules.standing_threshold) {
            self.rules.base_min_deposit * self.rules.escalation_deposit_factor
        } else {
            self.rules.base_min_deposit
        })
    }

    pub fn required_cooldown(&self, agent: AgentId) -> Result<Seconds, ContractError> {
        let st = self.standing_of(agent)?;
        Ok(if st.in_bad_standing(self.rules.standing_threshold) {
            self.rules.base_cooldown * self.rules.escalation_cooldown_factor
        } else {
            self.rules.base_cooldown
        })
    }

    pub fn free_balance(&self, agent: AgentId) -> Result<Units, ContractError> {
        self.ledger
            .free_balance
            .get(&agent)
            .copied()
            .ok_or(ContractError::UnregisteredAgent(agent))
    }

    pub fn escrowed(&self, agent: AgentId) -> Units {
        self.pending
            .values()
            .filter(|p| p.agent == agent)
            .map(|p| p.stake)
            .sum()
    }

    /// Free balance plus everything the agent still has in escrow.
    pub fn holdings(&self, agent: AgentId) -> Result<Units, ContractError> {
        Ok(self.free_balance(agent)? + self.escrowed(agent))
    }

    pub fn has_pending(&self, agent: AgentId) -> bool {
        self.pending.values().any(|p| p.agent == agent)
    }

    pub fn pending(&self, id: SubmissionId) -> Option<&PendingSubmission> {
        self.pending.get(&id)
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn submit(
        &mut self,
        agent: AgentId,
        sample: LabeledSample,
        offered_deposit: Units,
        now: Seconds,
    ) -> Result<SubmissionId, ContractError> {
        let required = self.required_deposit(agent)?;
        if offered_deposit < required {
            return Err(ContractError::DepositBelowMinimum {
                offered: offered_deposit,
                required,
            });
        }
        if offered_deposit < self.rules.submission_cost {
            return Err(ContractError::CannotCoverCost {
                offered: offered_deposit,
                cost: self.rules.submission_cost,
            });
        }
        let available = self.free_balance(agent)?;
        if available < offered_deposit {
            return Err(ContractError::InsufficientBalance {
                available,
                offered: offered_deposit,
            });
        }
        let cooldown = self.required_cooldown(agent)?;
        if let Some(last) = self.standing_of(agent)?.last_submission_at {
            if now.saturating_sub(last) < cooldown {
                return Err(ContractError::CooldownNotElapsed {
                    ready_at: last + cooldown,
                });
            }
        }

        let id = SubmissionId(self.next_id);
        self.next_id += 1;
        let stake = offered_deposit - self.rules.submission_cost;
        *self.ledger.free_balance.get_mut(&agent).expect("registered") -= offered_deposit;
        self.ledger.burned += self.rules.submission_cost;
        self.ledger.escrow.insert(id, stake);
        self.standing
            .get_mut(&agent)
            .expect("registered")
            .last_submission_at = Some(now);
        self.pending.insert(
            id,
            PendingSubmission {
                id,
                agent,
                sample,
                stake,
                submitted_at: now,
                claimable_at: now + self.rules.refund_wait,
            },
        );
        Ok(id)
    }

    /// Settles a pending submission against the model's current prediction.
    pub fn claim(
        &mut self,
        agent: AgentId,
        submission: SubmissionId,
        now: Seconds,
        model_prediction: Label,
    ) -> Result<ClaimOutcome, ContractError> {
        let p = self
            .pending
            .get(&submission)
            .ok_or(ContractError::NoSuchSubmission)?;
        if p.agent != agent {
            return Err(ContractError::NotSubmitter);
        }
        if now < p.claimable_at {
            return Err(ContractError::RefundWaitNotElapsed {
                claimable_at: p.claimable_at,
            });
        }
        let p = self.pending.remove(&submission).expect("checked above");
        let stake = self
            .ledger
            .escrow
            .remove(&submission)
            .expect("escrow mirrors pending");
        let window = self.rules.standing_window;
        let standing = self.standing.get_mut(&agent).expect("registered");

        if model_prediction == p.sample.label {
            let bonus = (self.rules.reward_fraction * self.ledger.reward_pool as f64).floor() as Units;
            let bonus = bonus.min(self.ledger.reward_pool);
            self.ledger.reward_pool -= bonus;
            *self.ledger.free_balance.get_mut(&agent).expect("registered") += stake + bonus;
            standing.record(ClaimResult::Success, window);
            Ok(ClaimOutcome {
                verified: true,
                paid: stake + bonus,
            })
        } else {
            self.ledger.reward_pool += stake;
            standing.record(ClaimResult::Failure, window);
            Ok(ClaimOutcome {
                verified: false,
                paid: 0,
            })
        }
    }
}
