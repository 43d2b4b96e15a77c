//! Leaf-state value regression: replay buffer, network and its trainer.

mod model;

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{seeded, SeedRng};
use crate::scalar::Scalar;
use crate::sequence::SequenceState;

pub use model::{Adam, SparseInput, ValueError, ValueModel};

/// Trainer hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValueConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub steps_per_update: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
}

impl Default for ValueConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128],
            learning_rate: 2e-3,
            weight_decay: 1e-4,
            steps_per_update: 5,
            batch_size: 32,
            buffer_capacity: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub input: Vec<u32>,
    pub target: T,
}

/// Fixed-capacity FIFO of `(state, fitness)` pairs.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    entries: VecDeque<Sample<T>>,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, state: &SequenceState, target: T) {
        self.push_sample(Sample {
            input: state.active_indices().map(|i| i as u32).collect(),
            target,
        });
    }

    pub fn push_sample(&mut self, sample: Sample<T>) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(sample);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Sample<T>> {
        self.entries.iter()
    }

    /// Uniform batch: without replacement when the buffer holds at least
    /// `size` entries, with replacement otherwise.
    pub fn sample_batch(&self, size: usize, rng: &mut impl Rng) -> Vec<&Sample<T>> {
        let n = self.entries.len();
        if n == 0 || size == 0 {
            return Vec::new();
        }
        if n >= size {
            index::sample(rng, n, size)
                .into_iter()
                .map(|i| &self.entries[i])
                .collect()
        } else {
            (0..size)
                .map(|_| &self.entries[rng.random_range(0..n)])
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateOutcome<T> {
    /// The buffer was empty; nothing changed.
    Skipped,
    Trained { mean_loss: T },
}

impl<T: Copy> UpdateOutcome<T> {
    pub fn loss(&self) -> Option<T> {
        match self {
            Self::Skipped => None,
            Self::Trained { mean_loss } => Some(*mean_loss),
        }
    }
}

/// Value model together with its replay buffer, optimizer and sampling
/// stream.
#[derive(Debug, Clone)]
pub struct ValueLearner<T> {
    model: ValueModel<T>,
    buffer: ReplayBuffer<T>,
    optimizer: Adam<T>,
    config: ValueConfig,
    rng: SeedRng,
}

impl<T: Scalar> ValueLearner<T> {
    pub fn new(alphabet_size: usize, length: usize, config: ValueConfig, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let model = ValueModel::new(alphabet_size, length, &config.hidden, &mut rng);
        Self::with_model(model, config, rng)
    }

    pub fn from_model(model: ValueModel<T>, config: ValueConfig, seed: u64) -> Self {
        Self::with_model(model, config, seeded(seed))
    }

    fn with_model(model: ValueModel<T>, config: ValueConfig, rng: SeedRng) -> Self {
        Self {
            buffer: ReplayBuffer::new(config.buffer_capacity),
            optimizer: Adam::new(T::lit(config.learning_rate), T::lit(config.weight_decay)),
            model,
            config,
            rng,
        }
    }

    pub fn model(&self) -> &ValueModel<T> {
        &self.model
    }

    pub fn buffer(&self) -> &ReplayBuffer<T> {
        &self.buffer
    }

    pub fn config(&self) -> &ValueConfig {
        &self.config
    }

    pub fn predict(&self, state: &SequenceState) -> Result<T, ValueError> {
        self.model.predict(state)
    }

    pub fn record(&mut self, state: &SequenceState, fitness: T) {
        self.buffer.push(state, fitness);
    }

    /// Runs the configured number of minibatch steps and reports the mean
    /// pre-step batch loss.
    pub fn train_update(&mut self) -> UpdateOutcome<T> {
        if self.buffer.is_empty() || self.config.steps_per_update == 0 {
            return UpdateOutcome::Skipped;
        }
        let mut total = T::zero();
        for _ in 0..self.config.steps_per_update {
            let batch: Vec<(&SparseInput, T)> = self
                .buffer
                .sample_batch(self.config.batch_size.max(1), &mut self.rng)
                .into_iter()
                .map(|s| (s.input.as_slice(), s.target))
                .collect();
            let (loss, grad) = self.model.loss_and_gradient(&batch);
            total += loss;
            self.optimizer.step(self.model.params_mut(), &grad);
        }
        UpdateOutcome::Trained {
            mean_loss: total / T::from_usize_lossy(self.config.steps_per_update),
        }
    }

    /// Mean squared error over the whole buffer.
    pub fn buffer_loss(&self) -> T {
        let batch: Vec<(&SparseInput, T)> = self
            .buffer
            .iter()
            .map(|s| (s.input.as_slice(), s.target))
            .collect();
        self.model.loss_and_gradient(&batch).0
    }
}
