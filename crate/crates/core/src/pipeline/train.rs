use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use crate::align::value_and_grad;
use crate::error::{Error, Result};
use crate::model::{Bound, ModelConfig, Parameterized};
use crate::numerics::{adam_step, clip_grad_norm, AdamState, Graph, NodeId, Tensor};

/// What happened during a training run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    /// Loss of every applied step, in order.
    pub losses: Vec<f64>,
    /// Pre-clip global gradient norm of every applied step.
    pub grad_norms: Vec<f64>,
    pub steps: usize,
    /// Minibatches whose loss had nothing to train on.
    pub skipped: usize,
}

impl TrainLog {
    pub fn first_loss(&self) -> Option<f64> {
        self.losses.first().copied()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.losses.last().copied()
    }

    /// Mean loss over the last `n` applied steps.
    pub fn tail_mean(&self, n: usize) -> Option<f64> {
        let tail = &self.losses[self.losses.len().saturating_sub(n)..];
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

/// Seeded minibatch Adam over `data`. Each epoch visits a fresh permutation.
/// A batch whose loss reports [`Error::EmptyFilteredBatch`] is skipped
/// without touching the optimizer; a non-finite loss aborts the run.
pub fn train_loop<P, T, F>(params: &mut P, data: &[T], cfg: &TrainConfig, mut loss: F) -> Result<TrainLog>
where
    P: Parameterized,
    T: Clone,
    F: FnMut(&mut Graph, &ModelConfig, &Bound, &[T]) -> Result<NodeId>,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("training data"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = {
        let named = params.named_tensors();
        let refs: Vec<&Tensor> = named.iter().map(|(_, t)| *t).collect();
        AdamState::new(&refs)
    };
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let n_batches = data.len().div_ceil(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<T> = idx.iter().map(|&i| data[i].clone()).collect();
            params.zero_grads();
            let value = match value_and_grad(params, |g, c, b| loss(g, c, b, &batch)) {
                Ok(v) => v,
                Err(Error::EmptyFilteredBatch) => {
                    log.skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if !value.is_finite() {
                params.zero_grads();
                return Err(Error::Diverged {
                    step: log.steps,
                    loss: value,
                });
            }
            let mut named = params.named_tensors_mut();
            let mut tensors: Vec<&mut Tensor> = named.iter_mut().map(|(_, t)| &mut **t).collect();
            let norm = clip_grad_norm(&mut tensors, cfg.grad_clip_norm);
            adam_step(&mut tensors, &mut adam, cfg.learning_rate)?;
            log.steps += 1;
            log.losses.push(value);
            log.grad_norms.push(norm);
            if bi % 50 == 0 || bi + 1 == n_batches {
                log::info!(
                    "epoch {epoch} batch {}/{n_batches} loss {value:.5} grad_norm {norm:.4}",
                    bi + 1
                );
            }
        }
    }
    params.zero_grads();
    Ok(log)
}
