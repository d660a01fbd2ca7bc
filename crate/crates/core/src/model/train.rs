use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::network::{CaptionModel, Graph, ModelInput};
use super::params::ParamStore;
use super::tape::{Tape, Var};
use super::tensor::Mat;
use super::vocab::PAD;
use crate::{Error, Result};

/// One supervised example: model input plus `[BOS] words [EOS]` target ids,
/// optionally right-padded with PAD.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub id: String,
    pub input: ModelInput,
    pub target: Vec<usize>,
}

/// Teacher-forcing split of `target`: decoder inputs and the tokens they
/// predict, with trailing PAD targets dropped.
fn teacher_forcing(target: &[usize]) -> (&[usize], &[usize]) {
    let mut end = target.len();
    while end > 1 && target[end - 1] == PAD {
        end -= 1;
    }
    if end < 2 {
        return (&[], &[]);
    }
    (&target[..end - 1], &target[1..end])
}

/// Summed token cross-entropy of one example on a fresh tape.
pub(crate) fn example_graph<'a>(
    model: &CaptionModel,
    params: &'a ParamStore,
    ex: &TrainExample,
) -> Option<(Graph<'a>, Var, usize)> {
    let (inputs, targets) = teacher_forcing(&ex.target);
    if targets.is_empty() || targets.contains(&PAD) {
        return None;
    }
    let mut g = Graph::new(params);
    let memory = g.memory(&model.config, &ex.input);
    let logits = g.decode(&model.config, memory, inputs);
    let loss = g.tape.cross_entropy(logits, targets);
    Some((g, loss, targets.len()))
}

fn degenerate() -> Error {
    Error::DegenerateBatch("batch contains no non-PAD target tokens".into())
}

/// Mean token cross-entropy over a batch and its parameter gradients.
pub fn batch_gradients(model: &CaptionModel, batch: &[TrainExample]) -> Result<(f64, Vec<Option<Mat>>)> {
    let graphs: Vec<_> = batch
        .iter()
        .filter_map(|ex| example_graph(model, &model.params, ex).map(|(g, l, n)| (g.tape, l, n)))
        .collect();
    let tokens: usize = graphs.iter().map(|g| g.2).sum();
    if tokens == 0 {
        return Err(degenerate());
    }
    let scale = 1.0 / tokens as f64;
    let mut total = 0.0;
    let mut grads: Vec<Option<Mat>> = vec![None; model.params.len()];
    for (tape, loss, _) in graphs {
        total += tape.value(loss).data[0];
        let scaled = scaled_root(tape, loss, scale, model.params.len());
        for (acc, g) in grads.iter_mut().zip(scaled) {
            if let Some(g) = g {
                match acc {
                    Some(a) => a.add_assign(&g),
                    None => *acc = Some(g),
                }
            }
        }
    }
    let loss = total * scale;
    if !loss.is_finite() {
        return Err(Error::Diverged(format!("loss is {loss}")));
    }
    Ok((loss, grads))
}

fn scaled_root(mut tape: Tape, loss: Var, scale: f64, num_params: usize) -> Vec<Option<Mat>> {
    let root = tape.scale(loss, scale);
    tape.backward(root, num_params)
}

/// Mean token cross-entropy without gradients.
pub fn batch_loss(model: &CaptionModel, batch: &[TrainExample]) -> Result<f64> {
    let mut total = 0.0;
    let mut tokens = 0;
    for ex in batch {
        if let Some((g, l, n)) = example_graph(model, &model.params, ex) {
            total += g.tape.value(l).data[0];
            tokens += n;
        }
    }
    if tokens == 0 {
        return Err(degenerate());
    }
    Ok(total / tokens as f64)
}

/// Adam with decoupled weight decay. Decay applies to weight matrices only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
        AdamW {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn matches(&self, params: &ParamStore) -> bool {
        self.m.len() == params.len()
            && params.iter().zip(&self.m).all(|((_, p), m)| p.len() == m.len())
            && self.v.iter().zip(&self.m).all(|(v, m)| v.len() == m.len())
    }

    pub fn update(&mut self, params: &mut ParamStore, grads: &[Option<Mat>], cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let decays: Vec<bool> = params.names().iter().map(|n| n.ends_with(".w")).collect();
        for (i, g) in grads.iter().enumerate() {
            let p = params.value_mut(i);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for k in 0..p.len() {
                let gk = g.as_ref().map_or(0.0, |g| g.data[k]);
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                if decays[i] {
                    p.data[k] -= cfg.learning_rate * cfg.weight_decay * p.data[k];
                }
                p.data[k] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
    }
}

/// Model plus optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: CaptionModel,
    pub optimizer: AdamW,
    pub config: TrainConfig,
}

impl Trainer {
    pub fn new(model: CaptionModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = AdamW::new(&model.params);
        Ok(Trainer {
            model,
            optimizer,
            config,
        })
    }

    /// One optimizer update on `batch`; returns the loss before the update.
    pub fn train_step(&mut self, batch: &[TrainExample]) -> Result<f64> {
        let (loss, grads) = batch_gradients(&self.model, batch)?;
        self.optimizer.update(&mut self.model.params, &grads, &self.config);
        if let Some((name, _)) = self.model.params.iter().find(|(_, p)| !p.all_finite()) {
            return Err(Error::Diverged(format!("parameter {name} became non-finite")));
        }
        Ok(loss)
    }
}
