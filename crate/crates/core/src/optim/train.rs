use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Example;
use crate::error::{Error, Result};
use crate::layers::{LayerSpec, Mode};
use crate::models::{Gradients, Network};
use crate::optim::loss::euclidean_loss;
use crate::optim::schedule::{lr_at, Schedule};
use crate::optim::sgd::{apply_maxnorm, sgd_nesterov_step, OptState, SgdConfig};

/// When training ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stop {
    Iterations(usize),
    Epochs(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub sgd: SgdConfig,
    pub schedule: Schedule,
    pub batch_size: usize,
    pub stop: Stop,
    /// Row-norm cap applied to fully-connected layers after every step.
    pub maxnorm_cap: Option<f64>,
    /// Iterations between validation passes; 0 disables validation.
    pub val_interval: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Shallow recipe: geometric decay over 1,000 epochs, max-norm 2.0.
    pub fn shallow() -> Self {
        Self {
            sgd: SgdConfig::default(),
            schedule: Schedule::shallow(),
            batch_size: 8,
            stop: Stop::Epochs(1000),
            maxnorm_cap: Some(2.0),
            val_interval: 100,
            seed: 0,
        }
    }

    /// Deep recipe: batches of 2 for 24,000 iterations with step halving.
    pub fn deep() -> Self {
        Self {
            sgd: SgdConfig::default(),
            schedule: Schedule::deep(),
            batch_size: 2,
            stop: Stop::Iterations(24_000),
            maxnorm_cap: None,
            val_interval: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate().map_err(Error::Config)?;
        if !(0.0..1.0).contains(&self.sgd.momentum) {
            return Err(Error::config(format!("momentum must lie in [0, 1), got {}", self.sgd.momentum)));
        }
        if !(self.sgd.weight_decay >= 0.0) {
            return Err(Error::config(format!("weight decay must be >= 0, got {}", self.sgd.weight_decay)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if let Some(cap) = self.maxnorm_cap {
            if !(cap > 0.0) {
                return Err(Error::config(format!("max-norm cap must be positive, got {cap}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterRecord {
    /// 1-based index of the completed step.
    pub iteration: usize,
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub iterations: Vec<IterRecord>,
    /// `(iteration, validation loss)` at each checkpoint.
    pub validation: Vec<(usize, f64)>,
}

impl TrainHistory {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.iterations.last().map(|r| r.train_loss)
    }

    /// `iteration,lr,train_loss,val_loss`, with an empty `val_loss` between
    /// checkpoints.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,lr,train_loss,val_loss\n");
        let mut val = self.validation.iter().peekable();
        for r in &self.iterations {
            write!(s, "{},{},{},", r.iteration, r.lr, r.train_loss).unwrap();
            if let Some(&&(_, v)) = val.peek().filter(|(it, _)| *it == r.iteration) {
                write!(s, "{v}").unwrap();
                val.next();
            }
            s.push('\n');
        }
        s
    }
}

/// Progress hooks. Both methods default to doing nothing.
pub trait TrainObserver {
    fn on_iteration(&mut self, _record: &IterRecord) {}
    fn on_validation(&mut self, _iteration: usize, _loss: f64) {}
}

impl TrainObserver for () {}

/// Mean per-image loss over `examples`, in test mode.
pub fn dataset_loss(net: &Network<f32>, examples: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        let pred = net.infer(&ex.input)?;
        total += euclidean_loss(&pred, &ex.target, 1)?.0;
    }
    Ok(total / examples.len().max(1) as f64)
}

/// Mean squared error per output value, in test mode.
pub fn dataset_mse(net: &Network<f32>, examples: &[Example]) -> Result<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for ex in examples {
        let pred = net.infer(&ex.input)?;
        let (loss, _) = euclidean_loss(&pred, &ex.target, 1)?;
        sum += 2.0 * loss;
        count += pred.len();
    }
    Ok(sum / count.max(1) as f64)
}

fn add_grads(acc: &mut Gradients<f32>, g: Gradients<f32>) {
    for (a, g) in acc.iter_mut().zip(g) {
        match (a.as_mut(), g) {
            (Some(a), Some(g)) => a.add_assign(&g),
            (None, Some(g)) => *a = Some(g),
            _ => {}
        }
    }
}

/// Minibatch SGD with Nesterov momentum. Examples are visited in a fresh
/// seeded permutation every epoch; gradients within a batch are summed in
/// batch order so runs are bit-reproducible.
pub fn train(
    net: &mut Network<f32>,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    let fc_layers: Vec<usize> = net
        .spec()
        .layers
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, LayerSpec::FullyConnected { .. }))
        .map(|(i, _)| i)
        .collect();
    let n = train_set.len();
    let max_iters = match cfg.stop {
        Stop::Iterations(it) => it,
        Stop::Epochs(e) => (e * n).div_ceil(cfg.batch_size),
    };

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut shuffle_rng);
    let mut cursor = 0;

    let mut state = OptState::new(net.params());
    let mut history = TrainHistory::default();
    let validate_now = |it: usize| cfg.val_interval > 0 && !val_set.is_empty() && it % cfg.val_interval == 0;

    for iteration in 1..=max_iters {
        let lr = lr_at(&cfg.schedule, state.iteration, state.epoch);
        let mut grads: Gradients<f32> = vec![None; net.params().len()];
        let mut loss = 0.0;
        for _ in 0..cfg.batch_size {
            if cursor == n {
                cursor = 0;
                state.epoch += 1;
                order.shuffle(&mut shuffle_rng);
            }
            let ex = &train_set[order[cursor]];
            cursor += 1;
            let (pred, trace) = net.forward(&ex.input, Mode::Train, &mut dropout_rng)?;
            let (l, grad_out) = euclidean_loss(&pred, &ex.target, cfg.batch_size)?;
            loss += l;
            let (_, g) = net.backward(trace, &grad_out)?;
            add_grads(&mut grads, g);
        }
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration, loss });
        }
        sgd_nesterov_step(net.params_mut(), &grads, &mut state, &cfg.sgd, lr).map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged { iteration, loss },
            other => other,
        })?;
        if let Some(cap) = cfg.maxnorm_cap {
            for &i in &fc_layers {
                apply_maxnorm(net.params_mut()[i].as_mut().expect("fc params"), cap);
            }
        }
        let record = IterRecord {
            iteration,
            epoch: state.epoch,
            lr,
            train_loss: loss,
        };
        observer.on_iteration(&record);
        history.iterations.push(record);
        if validate_now(iteration) || (iteration == max_iters && !val_set.is_empty() && cfg.val_interval > 0) {
            let v = dataset_loss(net, val_set)?;
            observer.on_validation(iteration, v);
            history.validation.push((iteration, v));
        }
    }
    Ok(history)
}
