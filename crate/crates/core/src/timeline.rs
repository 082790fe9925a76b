//! Slot-level execution of energy-harvesting federated learning.
//!
//! Each slot runs six phases in a fixed order:
//!
//! 1. every client draws its harvest indicator;
//! 2. clients that are mid-training run their next SGD batch, finalizing the
//!    update and its feature moment after the `kappa`-th batch;
//! 3. idle clients holding an unsent update upload it if they can pay one
//!    unit;
//! 4. on the first slot of an epoch the server broadcasts the global model
//!    to idle clients and runs client selection;
//! 5. clients that are idle, have not acted this slot, hold no unsent update
//!    and satisfy the policy's launch rule start training (paying `kappa`
//!    units up front and running their first batch);
//! 6. on the last slot of an epoch the server averages the received updates
//!    and the epoch is evaluated.
//!
//! Clients busy at a broadcast keep their in-progress weights. Updates that
//! reach the server in a later epoch than the one they were trained in are
//! averaged at the end of the epoch in which they arrive.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::datagen::{dirichlet_partition, BatchStream, Dataset, GaussianMixture, PartitionSpec};
use crate::energy::{Battery, HarvestProcess};
use crate::error::{EhflError, Result};
use crate::learner::{
    aggregate, batch_train, finalize_training, predict, FeatureVector, Minibatch, ModelParams,
};
use crate::metrics::{macro_f1, EnergyEvent, EnergyLedger, EpochMetrics, RunLabel};
use crate::rng::{stream, Domain};
use crate::scheduler::{
    fedavg_greedy_eligibility, fedbacys_eligibility, fedbacys_odd_eligibility, vaoi_select,
    ClientView, PolicyKind,
};
use crate::semantics::{probe, VaoiState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotClock {
    slot: u64,
    slots_per_epoch: u64,
    total_epochs: u64,
}

impl SlotClock {
    pub fn new(slots_per_epoch: u64, total_epochs: u64) -> Self {
        assert!(slots_per_epoch > 0);
        SlotClock {
            slot: 0,
            slots_per_epoch,
            total_epochs,
        }
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn epoch(&self) -> u64 {
        self.slot / self.slots_per_epoch
    }

    /// Position of the current slot within its epoch.
    pub fn offset(&self) -> u64 {
        self.slot % self.slots_per_epoch
    }

    pub fn slots_per_epoch(&self) -> u64 {
        self.slots_per_epoch
    }

    pub fn total_epochs(&self) -> u64 {
        self.total_epochs
    }

    pub fn total_slots(&self) -> u64 {
        self.slots_per_epoch * self.total_epochs
    }

    pub fn is_epoch_start(&self) -> bool {
        self.offset() == 0
    }

    pub fn is_epoch_end(&self) -> bool {
        self.offset() == self.slots_per_epoch - 1
    }

    pub fn finished(&self) -> bool {
        self.slot >= self.total_slots()
    }

    pub fn advance(&mut self) {
        self.slot += 1;
    }
}

/// A finished local update waiting for upload.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingMessage {
    pub model: ModelParams,
    pub samples: usize,
    /// Epoch in which the training that produced it started.
    pub trained_epoch: u64,
}

#[derive(Debug, Clone)]
struct TrainingProgress {
    features: Vec<FeatureVector>,
    samples_seen: usize,
    start_epoch: u64,
}

#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub battery: Battery,
    harvest: HarvestProcess,
    pub local_model: ModelParams,
    pub pending_message: Option<PendingMessage>,
    /// Exclusive end slot of the current training.
    pub busy_until: Option<u64>,
    training: Option<TrainingProgress>,
    pub vaoi: VaoiState,
    pub historical_moment: Option<FeatureVector>,
    pub last_train_epoch: Option<u64>,
    pub opportunity_counter: u64,
    /// Last epoch with `q_i = 1`.
    pub last_participation: Option<u64>,
    /// Selected in the current epoch (version-age policy).
    pub eligible: bool,
    /// Distance measured at the latest broadcast.
    pub epoch_distance: Option<f64>,
    data: Dataset,
    batches: BatchStream,
    probe_batch: Minibatch,
    /// Units actually added to the battery (clamped harvests excluded).
    pub harvested_units: u64,
}

impl ClientState {
    pub fn is_busy(&self, slot: u64) -> bool {
        self.busy_until.is_some_and(|end| slot < end)
    }

    /// Index of the next training batch, if training.
    pub fn train_batch_cursor(&self) -> Option<usize> {
        self.training.as_ref().map(|p| p.features.len())
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn probe_batch(&self) -> &Minibatch {
        &self.probe_batch
    }

    fn view(&self, slot: u64, acted: bool) -> ClientView {
        ClientView {
            id: self.id,
            idle: !acted && !self.is_busy(slot),
            has_pending: self.pending_message.is_some(),
            battery: self.battery.level(),
        }
    }

    /// Runs the next SGD batch and finalizes the update after the last one.
    fn advance_training(&mut self, cfg: &Config, slot: u64) -> Result<()> {
        let progress = self
            .training
            .as_mut()
            .expect("advance_training on an idle client");
        let batch = self.batches.next_batch(&self.data, cfg.batch_size);
        let step = batch_train(&self.local_model, &batch, cfg.gamma, cfg.feature_layer())?;
        if !step.loss.is_finite() || step.params.values().iter().any(|v| !v.is_finite()) {
            return Err(EhflError::Divergence {
                slot,
                client: self.id,
            });
        }
        self.local_model = step.params;
        progress.features.push(step.features);
        progress.samples_seen += batch.len();
        if progress.features.len() == cfg.kappa as usize {
            let done = self.training.take().expect("present");
            self.finalize_training(
                &done.features,
                done.samples_seen,
                done.start_epoch,
                cfg.kappa as usize,
            )?;
        }
        Ok(())
    }

    /// Stores the historical feature moment and queues the trained weights
    /// for upload.
    pub fn finalize_training(
        &mut self,
        per_batch_features: &[FeatureVector],
        samples_seen: usize,
        epoch: u64,
        kappa: usize,
    ) -> Result<()> {
        let h = finalize_training(per_batch_features, samples_seen, kappa)?;
        self.historical_moment = Some(h);
        self.last_train_epoch = Some(epoch);
        self.pending_message = Some(PendingMessage {
            model: self.local_model.clone(),
            samples: self.data.len(),
            trained_epoch: epoch,
        });
        Ok(())
    }
}

/// Counters that cross-check the energy ledger.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotActions {
    pub train_starts: u64,
    pub transmissions: u64,
    /// Slots in which one client both uploaded and launched training. Must
    /// stay zero.
    pub exclusivity_violations: u64,
}

pub struct SimulationRun {
    config: Config,
    clock: SlotClock,
    clients: Vec<ClientState>,
    global_model: ModelParams,
    inbox: Vec<(usize, PendingMessage)>,
    test_set: Minibatch,
    scheduler_rng: rand_chacha::ChaCha8Rng,
    ledger: EnergyLedger,
    actions: SlotActions,
    epoch_participants: usize,
    metrics: Vec<EpochMetrics>,
    aggregated_senders: Vec<Vec<usize>>,
}

/// Everything a finished run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub label: RunLabel,
    pub config: Config,
    pub metrics: Vec<EpochMetrics>,
    pub final_model: ModelParams,
    pub elapsed_secs: f64,
}

impl RunArtifacts {
    pub fn final_metrics(&self) -> &EpochMetrics {
        self.metrics.last().expect("at least one epoch")
    }

    /// Mean of `mean_vaoi` over the last `n` epochs.
    pub fn tail_mean_vaoi(&self, n: usize) -> f64 {
        let tail = &self.metrics[self.metrics.len().saturating_sub(n)..];
        tail.iter().map(|m| m.mean_vaoi).sum::<f64>() / tail.len() as f64
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let last = self.final_metrics();
        serde_json::json!({
            "run_id": self.label.run_id,
            "policy": self.label.policy,
            "seed": self.label.seed,
            "alpha": self.label.alpha,
            "p_bc": self.label.p_bc,
            "final": last,
            "config": self.config,
        })
    }
}

pub fn run_label(config: &Config) -> RunLabel {
    RunLabel {
        run_id: format!(
            "{}_a{}_p{}_s{}",
            config.policy, config.alpha, config.p_bc, config.seed
        ),
        policy: config.policy.to_string(),
        seed: config.seed,
        alpha: config.alpha,
        p_bc: config.p_bc,
    }
}

/// Synthetic or file-backed pool plus a class-balanced held-out test set.
fn build_data(config: &Config) -> Result<(Dataset, Minibatch)> {
    let seed = config.seed;
    let needed = config.n_clients * config.samples_per_client;
    match &config.data_file {
        None => {
            let mut pool_rng = stream(seed, Domain::Pool, 0);
            let mixture = GaussianMixture::new(
                config.classes,
                config.input_dim,
                config.class_spread,
                &mut pool_rng,
            );
            let per_class = (2 * needed).div_ceil(config.classes);
            let pool = mixture.sample(per_class, &mut pool_rng);
            let test = mixture.sample(config.test_per_class, &mut stream(seed, Domain::Test, 0));
            Ok((pool, test.as_batch()))
        }
        Some(path) => {
            let file = std::fs::File::open(path)?;
            let all = Dataset::read_from(std::io::BufReader::new(file))?;
            if all.dim() != config.input_dim || all.classes() != config.classes {
                return Err(EhflError::config(
                    "data_file",
                    format!(
                        "file has d_in={} C={}, config expects {} and {}",
                        all.dim(),
                        all.classes(),
                        config.input_dim,
                        config.classes
                    ),
                ));
            }
            let mut taken = vec![0usize; config.classes];
            let (mut test_idx, mut pool_idx) = (Vec::new(), Vec::new());
            for (i, &y) in all.labels().iter().enumerate() {
                if taken[y] < config.test_per_class {
                    taken[y] += 1;
                    test_idx.push(i);
                } else {
                    pool_idx.push(i);
                }
            }
            if test_idx.is_empty() || pool_idx.is_empty() {
                return Err(EhflError::config(
                    "data_file",
                    "too few samples for test set and pool",
                ));
            }
            Ok((all.subset(&pool_idx), all.select(&test_idx)))
        }
    }
}

impl SimulationRun {
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let (pool, test_set) = build_data(&config)?;
        let spec = PartitionSpec {
            alpha: config.alpha,
            clients: config.n_clients,
            samples_per_client: config.samples_per_client,
        };
        let shards = dirichlet_partition(&pool, &spec, &mut stream(seed, Domain::Partition, 0))?;
        let global_model = ModelParams::init(
            &config.layer_sizes(),
            config.init,
            &mut stream(seed, Domain::Init, 0),
        );
        let clients = shards
            .into_iter()
            .enumerate()
            .map(|(id, data)| {
                let mut probe_rng = stream(seed, Domain::Probe, id as u64);
                let probe_idx =
                    rand::seq::index::sample(&mut probe_rng, data.len(), config.batch_size)
                        .into_vec();
                ClientState {
                    id,
                    battery: Battery::new(config.e_init, config.e_max),
                    harvest: HarvestProcess::new(
                        config.p_bc,
                        stream(seed, Domain::Harvest, id as u64),
                    ),
                    local_model: global_model.clone(),
                    pending_message: None,
                    busy_until: None,
                    training: None,
                    vaoi: VaoiState::new(config.mu),
                    historical_moment: None,
                    last_train_epoch: None,
                    opportunity_counter: 0,
                    last_participation: None,
                    eligible: false,
                    epoch_distance: None,
                    probe_batch: data.select(&probe_idx),
                    batches: BatchStream::new(data.len(), stream(seed, Domain::Batches, id as u64)),
                    data,
                    harvested_units: 0,
                }
            })
            .collect();
        Ok(SimulationRun {
            clock: SlotClock::new(config.slots_per_epoch, config.epochs),
            clients,
            global_model,
            inbox: Vec::new(),
            test_set,
            scheduler_rng: stream(seed, Domain::Scheduler, 0),
            ledger: EnergyLedger::default(),
            actions: SlotActions::default(),
            epoch_participants: 0,
            metrics: Vec::with_capacity(config.epochs as usize),
            aggregated_senders: Vec::with_capacity(config.epochs as usize),
            config,
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn clock(&self) -> &SlotClock {
        &self.clock
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn global_model(&self) -> &ModelParams {
        &self.global_model
    }

    pub fn inbox(&self) -> &[(usize, PendingMessage)] {
        &self.inbox
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn actions(&self) -> &SlotActions {
        &self.actions
    }

    pub fn metrics(&self) -> &[EpochMetrics] {
        &self.metrics
    }

    /// Senders whose updates entered each epoch's aggregation.
    pub fn aggregated_senders(&self) -> &[Vec<usize>] {
        &self.aggregated_senders
    }

    pub fn set_global_model(&mut self, model: ModelParams) -> Result<()> {
        if model.layer_sizes() != self.global_model.layer_sizes() {
            return Err(EhflError::Shape("global model architecture differs".into()));
        }
        self.global_model = model;
        Ok(())
    }

    /// Puts client `id` into the middle of a training run (test hook for
    /// broadcast semantics).
    pub fn force_busy(&mut self, id: usize, until: u64) {
        let epoch = self.clock.epoch();
        let c = &mut self.clients[id];
        c.busy_until = Some(until);
        c.training = Some(TrainingProgress {
            features: Vec::new(),
            samples_seen: 0,
            start_epoch: epoch,
        });
    }

    /// Copies the global model into every client that is not training.
    pub fn broadcast(&mut self) {
        let slot = self.clock.slot();
        for c in self.clients.iter_mut().filter(|c| !c.is_busy(slot)) {
            c.local_model.clone_from(&self.global_model);
        }
    }

    fn probe_all(&mut self) -> Result<()> {
        let layer = self.config.feature_layer();
        for c in &mut self.clients {
            c.epoch_distance = probe(
                c.historical_moment.as_ref(),
                &self.global_model,
                &c.probe_batch,
                layer,
            )?;
        }
        Ok(())
    }

    fn select(&mut self) -> Result<()> {
        let epoch = self.clock.epoch();
        self.probe_all()?;
        match self.config.policy {
            PolicyKind::Vaoi => {
                let ages: Vec<u64> = self.clients.iter().map(|c| c.vaoi.age()).collect();
                let last: Vec<Option<u64>> =
                    self.clients.iter().map(|c| c.last_participation).collect();
                let decision = vaoi_select(
                    &ages,
                    &last,
                    self.config.k,
                    self.config.selection,
                    &mut self.scheduler_rng,
                );
                for (c, &q) in self.clients.iter_mut().zip(&decision.q) {
                    c.eligible = q;
                    if q {
                        c.last_participation = Some(epoch);
                    }
                    c.vaoi.update(q, c.epoch_distance);
                }
                self.epoch_participants = decision.selected.len();
            }
            _ => self.epoch_participants = 0,
        }
        Ok(())
    }

    fn may_launch(&mut self, i: usize, acted: bool) -> bool {
        let slot = self.clock.slot();
        let kappa = self.config.kappa;
        let schedule = self.config.group_schedule();
        let c = &mut self.clients[i];
        let view = c.view(slot, acted);
        match self.config.policy {
            PolicyKind::Vaoi => c.eligible && view.can_start(kappa),
            PolicyKind::FedavgGreedy => fedavg_greedy_eligibility(&view, kappa),
            PolicyKind::Fedbacys => fedbacys_eligibility(&view, slot, &schedule),
            PolicyKind::FedbacysOdd => {
                fedbacys_odd_eligibility(&view, slot, &schedule, &mut c.opportunity_counter)
            }
        }
    }

    fn aggregate_and_evaluate(&mut self) -> Result<()> {
        let epoch = self.clock.epoch();
        let senders: Vec<usize> = self.inbox.iter().map(|(id, _)| *id).collect();
        if !self.inbox.is_empty() {
            self.global_model = aggregate(self.inbox.iter().map(|(_, m)| (&m.model, m.samples)))?;
        }
        self.inbox.clear();

        if self.config.policy != PolicyKind::Vaoi {
            let mut q = vec![false; self.clients.len()];
            for &id in &senders {
                q[id] = true;
            }
            for (c, &qi) in self.clients.iter_mut().zip(&q) {
                if qi {
                    c.last_participation = Some(epoch);
                }
                c.vaoi.update(qi, c.epoch_distance);
            }
            self.epoch_participants = q.iter().filter(|&&v| v).count();
        }

        let predictions = predict(&self.global_model, &self.test_set)?;
        let f1 = macro_f1(&predictions, self.test_set.labels(), self.config.classes)?;
        let mean_vaoi = self
            .clients
            .iter()
            .map(|c| c.vaoi.age() as f64)
            .sum::<f64>()
            / self.clients.len() as f64;
        self.metrics.push(EpochMetrics {
            epoch,
            macro_f1: f1,
            mean_vaoi,
            cum_energy: self.ledger.cum_energy,
            trainings_started: self.ledger.trainings,
            transmissions: self.ledger.transmissions,
            participants: self.epoch_participants,
        });
        self.aggregated_senders.push(senders);
        Ok(())
    }

    /// Executes one slot. Infeasible actions are skipped silently.
    pub fn step_slot(&mut self) -> Result<()> {
        assert!(!self.clock.finished(), "simulation already finished");
        let slot = self.clock.slot();
        let n = self.clients.len();
        let mut acted = vec![false; n];
        let mut transmitted = vec![false; n];

        for c in &mut self.clients {
            let before = c.battery.level();
            c.harvest.harvest(&mut c.battery);
            c.harvested_units += (c.battery.level() - before) as u64;
        }

        for (i, c) in self.clients.iter_mut().enumerate() {
            if c.training.is_some() && c.is_busy(slot) {
                c.advance_training(&self.config, slot)?;
                acted[i] = true;
            }
        }

        for (i, c) in self.clients.iter_mut().enumerate() {
            if acted[i] || c.is_busy(slot) || c.pending_message.is_none() {
                continue;
            }
            if c.battery.try_transmit() {
                let msg = c.pending_message.take().expect("checked");
                self.inbox.push((c.id, msg));
                self.ledger.record(EnergyEvent::Transmit);
                self.actions.transmissions += 1;
                acted[i] = true;
                transmitted[i] = true;
            }
        }

        if self.clock.is_epoch_start() {
            self.broadcast();
            self.select()?;
        }

        let kappa = self.config.kappa;
        let epoch = self.clock.epoch();
        for i in 0..n {
            if !self.may_launch(i, acted[i]) {
                continue;
            }
            let c = &mut self.clients[i];
            if !c.battery.try_start_training(kappa) {
                continue;
            }
            if transmitted[i] {
                self.actions.exclusivity_violations += 1;
            }
            self.ledger.record(EnergyEvent::TrainStart { kappa });
            self.actions.train_starts += 1;
            c.busy_until = Some(slot + kappa as u64);
            c.training = Some(TrainingProgress {
                features: Vec::with_capacity(kappa as usize),
                samples_seen: 0,
                start_epoch: epoch,
            });
            c.advance_training(&self.config, slot)?;
        }

        if self.clock.is_epoch_end() {
            self.aggregate_and_evaluate()?;
        }
        self.clock.advance();
        Ok(())
    }

    pub fn finished(&self) -> bool {
        self.clock.finished()
    }

    pub fn run(mut self) -> Result<RunArtifacts> {
        let started = Instant::now();
        while !self.clock.finished() {
            self.step_slot()?;
        }
        Ok(RunArtifacts {
            label: run_label(&self.config),
            metrics: self.metrics,
            final_model: self.global_model,
            config: self.config,
            elapsed_secs: started.elapsed().as_secs_f64(),
        })
    }
}

/// Runs all `S*T` slots of a configuration.
pub fn run_to_completion(config: &Config) -> Result<RunArtifacts> {
    SimulationRun::new(config.clone())?.run()
}
