//! Event loop.
//!
//! Events are ordered by virtual time, then claims before submissions, then
//! agent id, then insertion sequence. Snapshots at time `t` see every event
//! with timestamp `<= t`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{choose_offer, corrupt, draw_deposit, draw_wait, good_transform, AgentProfile};
use crate::contract::{AgentId, Contract, ContractError, Seconds, SubmissionId};
use crate::data::{self, DatasetSplit};
use crate::model::{fit_initial, LabeledSample, SparsePerceptron};
use crate::rng;
use crate::sim::config::{DatasetSource, ScenarioConfig};
use crate::sim::report::{compute_gap, SimulationReport, Snapshot, SECONDS_PER_DAY};
use crate::sim::SimError;

/// Data split plus the model fitted on its initial part.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub split: DatasetSplit,
    pub initial_model: SparsePerceptron,
}

fn load_split(config: &ScenarioConfig) -> Result<DatasetSplit, SimError> {
    let split_seed = rng::derived_seed(config.seed, "data.split");
    let nw = config.num_words;
    let with_test = |train: Vec<LabeledSample>, test: Option<Vec<LabeledSample>>| {
        Ok::<_, SimError>(match test {
            Some(test) => DatasetSplit {
                test,
                ..data::split(&train, config.train_size, 0.0, split_seed)?
            },
            None => data::split(&train, config.train_size, config.test_fraction, split_seed)?,
        })
    };
    match &config.dataset {
        DatasetSource::Synthetic { n, seed } => {
            with_test(data::synthesize(*n, nw, *seed), None)
        }
        DatasetSource::Indexed { path, test_path } => {
            let train = data::load_indexed(path, nw)?;
            let test = test_path
                .as_deref()
                .map(|p| data::load_indexed(p, nw))
                .transpose()?;
            with_test(train, test)
        }
        DatasetSource::Raw { path, test_path } => {
            let docs = data::load_raw_documents(path)?;
            let vocab = data::build_vocabulary(docs.iter().map(|(_, t)| t), nw)?;
            let train = data::featurize_documents(&docs, &vocab);
            let test = match test_path.as_deref() {
                Some(p) => Some(data::featurize_documents(&data::load_raw_documents(p)?, &vocab)),
                None => None,
            };
            with_test(train, test)
        }
    }
}

pub fn prepare(config: &ScenarioConfig) -> Result<Prepared, SimError> {
    let split = load_split(config)?;
    let initial_model = fit_initial(
        &split.initial_train,
        config.num_words,
        config.max_epochs,
        rng::derived_seed(config.seed, "model.fit"),
    )?;
    Ok(Prepared {
        split,
        initial_model,
    })
}

fn baseline_from(prepared: &Prepared) -> Result<f64, SimError> {
    let mut model = prepared.initial_model.clone();
    for sample in &prepared.split.submission_pool {
        model.update(sample)?;
    }
    Ok(model.evaluate(&prepared.split.test)?)
}

/// Test accuracy of the initial model after one clean online update per
/// pool sample, with no adversary and no economics.
pub fn baseline_accuracy(config: &ScenarioConfig) -> Result<f64, SimError> {
    baseline_from(&prepare(config)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    // declaration order is the tie-break order at equal timestamps
    Claim(SubmissionId),
    Submit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    at: Seconds,
    kind_rank: u8,
    agent: AgentId,
    seq: u64,
    kind: EventKind,
}

#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, at: Seconds, agent: AgentId, kind: EventKind) {
        let kind_rank = match kind {
            EventKind::Claim(_) => 0,
            EventKind::Submit => 1,
        };
        self.heap.push(Reverse(Event {
            at,
            kind_rank,
            agent,
            seq: self.seq,
            kind,
        }));
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|Reverse(e)| e)
    }

    fn peek_time(&self) -> Option<Seconds> {
        self.heap.peek().map(|Reverse(e)| e.at)
    }
}

struct AgentState {
    profile: AgentProfile,
    rng: ChaCha8Rng,
    drained_at: Option<Seconds>,
    accepted: u64,
}

struct World<'a> {
    config: &'a ScenarioConfig,
    pool: &'a [LabeledSample],
    test: &'a [LabeledSample],
    contract: Contract,
    model: SparsePerceptron,
    agents: Vec<AgentState>,
    queue: Queue,
    pool_cursor: usize,
    snapshots: Vec<Snapshot>,
    events: u64,
}

impl World<'_> {
    fn snapshot(&mut self, t: Seconds) -> Result<(), SimError> {
        let mut balances = BTreeMap::new();
        for a in &self.agents {
            balances.insert(a.profile.name.clone(), self.contract.holdings(a.profile.id)?);
        }
        let ledger = self.contract.ledger();
        self.snapshots.push(Snapshot {
            t,
            accuracy: self.model.evaluate(self.test)?,
            balances,
            pool: ledger.reward_pool,
            burned: ledger.burned,
        });
        Ok(())
    }

    fn note_drain(&mut self, idx: usize, now: Seconds) -> Result<(), SimError> {
        let id = self.agents[idx].profile.id;
        if self.agents[idx].drained_at.is_none() && self.contract.holdings(id)? == 0 {
            self.agents[idx].drained_at = Some(now);
        }
        Ok(())
    }

    fn claim(&mut self, idx: usize, id: SubmissionId, now: Seconds) -> Result<(), SimError> {
        let agent = self.agents[idx].profile.id;
        let features = &self
            .contract
            .pending(id)
            .ok_or(ContractError::NoSuchSubmission)?
            .sample
            .features;
        let prediction = self.model.predict(features)?;
        self.contract.claim(agent, id, now, prediction)?;
        Ok(())
    }

    fn submit(&mut self, idx: usize, now: Seconds) -> Result<(), SimError> {
        let rules = self.contract.rules().clone();
        let num_words = self.config.num_words;
        let pool = self.pool;
        let state = &mut self.agents[idx];
        let id = state.profile.id;

        if state.profile.honest && self.pool_cursor >= pool.len() {
            return Ok(()); // allotment exhausted: retire
        }

        let required = self.contract.required_deposit(id)?;
        let drawn = draw_deposit(&state.profile, rules.submission_cost, &mut state.rng);
        let free = self.contract.free_balance(id)?;
        let floor = rules.max_required_deposit().max(rules.submission_cost + 1);
        let offer = choose_offer(drawn, required, free, floor);
        let sample = if state.profile.honest {
            good_transform(&pool[self.pool_cursor], state.profile.prob_mistake, &mut state.rng)
        } else {
            let pick = state.rng.random_range(0..pool.len());
            corrupt(&pool[pick], state.profile.corruption_mode, num_words, &mut state.rng)
        };
        let wait = draw_wait(&state.profile, &mut state.rng);

        match self.contract.submit(id, sample.clone(), offer, now) {
            Ok(sub) => {
                if state.profile.honest {
                    self.pool_cursor += 1;
                }
                state.accepted += 1;
                self.model.update(&sample)?;
                let claimable_at = self.contract.pending(sub).expect("just submitted").claimable_at;
                self.queue.push(claimable_at, id, EventKind::Claim(sub));
                let cooldown = self.contract.required_cooldown(id)?;
                self.queue.push(now + wait.max(cooldown), id, EventKind::Submit);
            }
            Err(ContractError::CooldownNotElapsed { ready_at }) => {
                self.queue.push((now + wait).max(ready_at), id, EventKind::Submit);
            }
            Err(
                ContractError::InsufficientBalance { .. }
                | ContractError::DepositBelowMinimum { .. }
                | ContractError::CannotCoverCost { .. },
            ) => {
                // broke: keep polling only while refunds may still arrive
                if self.contract.has_pending(id) {
                    self.queue.push(now + wait, id, EventKind::Submit);
                }
            }
            Err(e) => return Err(e.into()),
        }
        Ok(())
    }
}

/// Runs one scenario to completion and scores it against the clean baseline.
pub fn run(config: &ScenarioConfig) -> Result<SimulationReport, SimError> {
    let prepared = prepare(config)?;
    let accuracy_all = baseline_from(&prepared)?;
    let split = &prepared.split;
    if split.test.is_empty() {
        return Err(SimError::InvalidConfig("test_fraction".into()));
    }

    let mut contract = Contract::new(config.contract.clone())?;
    let mut agents = Vec::with_capacity(config.agents.len());
    for profile in &config.agents {
        contract.register(profile.id, profile.start_balance)?;
        agents.push(AgentState {
            rng: rng::stream(config.seed, &format!("agent:{}", profile.name)),
            profile: profile.clone(),
            drained_at: None,
            accepted: 0,
        });
    }

    let mut world = World {
        config,
        pool: &split.submission_pool,
        test: &split.test,
        contract,
        model: prepared.initial_model.clone(),
        agents,
        queue: Queue::default(),
        pool_cursor: 0,
        snapshots: Vec::new(),
        events: 0,
    };

    for idx in 0..world.agents.len() {
        world.note_drain(idx, 0)?;
        let a = &mut world.agents[idx];
        let first = draw_wait(&a.profile, &mut a.rng);
        let id = a.profile.id;
        world.queue.push(first, id, EventKind::Submit);
    }
    world.snapshot(0)?;
    let initial_accuracy = world.snapshots[0].accuracy;

    let every = config.snapshot_every;
    let mut next_snap = every;
    let mut now = 0;
    while let Some(at) = world.queue.peek_time() {
        if config.max_virtual_time.is_some_and(|max| at > max) {
            break;
        }
        while at > next_snap {
            world.snapshot(next_snap)?;
            next_snap += every;
        }
        let ev = world.queue.pop().expect("peeked");
        now = ev.at;
        let idx = ev.agent.0 as usize;
        match ev.kind {
            EventKind::Claim(sub) => world.claim(idx, sub, now)?,
            EventKind::Submit => world.submit(idx, now)?,
        }
        world.note_drain(idx, now)?;
        world.events += 1;
    }
    let end = match config.max_virtual_time {
        Some(max) if !world.queue.heap.is_empty() => {
            while next_snap <= max {
                world.snapshot(next_snap)?;
                next_snap += every;
            }
            max
        }
        _ => now,
    };
    if world.snapshots.last().is_some_and(|s| end > s.t) {
        world.snapshot(end)?;
    }

    let final_accuracy = world.snapshots.last().expect("at least one").accuracy;
    let gap = compute_gap(accuracy_all, final_accuracy)?;
    let mut drain_time_days = BTreeMap::new();
    let mut drained_at = BTreeMap::new();
    let mut accepted_submissions = BTreeMap::new();
    for a in &world.agents {
        let name = a.profile.name.clone();
        if !a.profile.honest {
            drain_time_days.insert(name.clone(), a.drained_at.map(|t| t as f64 / SECONDS_PER_DAY));
        }
        drained_at.insert(name.clone(), a.drained_at);
        accepted_submissions.insert(name, a.accepted);
    }

    Ok(SimulationReport {
        snapshots: world.snapshots,
        initial_accuracy,
        final_accuracy,
        accuracy_all,
        gap,
        drain_time_days,
        drained_at,
        accepted_submissions,
        events_processed: world.events,
    })
}
