//! Training loop: x0-prediction objective with the hybrid time + frequency
//! loss, Adam updates, and an EMA copy of the weights.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use super::model::{DenoiserModel, ModelConfig};
use super::schedule::{cosine_schedule, forward_noise, DiffusionSchedule};
use super::tape::{Tape, Tensor, Var};
use super::DiffusionError;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub batch: usize,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub ema_decay: f64,
    pub k_steps: usize,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            batch: 16,
            steps: 2000,
            lr: 1e-3,
            seed: 0,
            ema_decay: 0.995,
            k_steps: 200,
            log_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DiffusionError> {
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 || (self.lambda1 == 0.0 && self.lambda2 == 0.0) {
            return Err(DiffusionError::InvalidConfig(
                "loss weights must be non-negative and not both zero".into(),
            ));
        }
        if self.batch == 0 || self.steps == 0 || self.lr <= 0.0 || self.k_steps < 2 {
            return Err(DiffusionError::InvalidConfig(
                "batch, steps, lr must be positive and k_steps >= 2".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(DiffusionError::InvalidConfig("ema decay must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One training-log row.
#[derive(Debug, Clone, Copy)]
pub struct LogRow {
    pub step: usize,
    pub loss: f64,
    pub time_term: f64,
    pub freq_term: f64,
    pub lr: f64,
}

pub struct TrainOutput {
    /// EMA weights — the model to sample from.
    pub model: DenoiserModel,
    /// Raw (non-averaged) weights.
    pub raw: DenoiserModel,
    pub log: Vec<LogRow>,
    pub schedule: DiffusionSchedule,
}

/// Full-spectrum DFT matrices along the time axis, built once per length.
pub struct DftBasis {
    cos: Tensor,
    sin: Tensor,
}

impl DftBasis {
    pub fn new(t_len: usize) -> Self {
        let mut cos = Tensor::zeros(t_len, t_len);
        let mut sin = Tensor::zeros(t_len, t_len);
        for f in 0..t_len {
            for t in 0..t_len {
                let angle = TAU * f as f64 * t as f64 / t_len as f64;
                cos.set(f, t, angle.cos());
                sin.set(f, t, -angle.sin());
            }
        }
        Self { cos, sin }
    }
}

/// Hybrid loss on the tape: lambda1 * mean((pred-target)^2) plus lambda2 *
/// mean over channels and frequency bins of |DFT(pred-target)|^2, the DFT
/// running along the time axis per channel. Inputs are T x C.
pub fn hybrid_loss_var(
    tape: &mut Tape,
    pred: Var,
    target: Var,
    lambda1: f64,
    lambda2: f64,
    dft: &DftBasis,
) -> (Var, Var, Var) {
    let diff = tape.sub(pred, target);
    let sq = tape.square(diff);
    let time_term = tape.mean_all(sq);

    let cos = tape.input(dft.cos.clone());
    let sin = tape.input(dft.sin.clone());
    let re = tape.matmul(cos, diff);
    let im = tape.matmul(sin, diff);
    let re2 = tape.square(re);
    let im2 = tape.square(im);
    let mag = tape.add(re2, im2);
    let freq_term = tape.mean_all(mag);

    let a = tape.scale(time_term, lambda1);
    let b = tape.scale(freq_term, lambda2);
    let loss = tape.add(a, b);
    (loss, time_term, freq_term)
}

/// Value-level hybrid loss between two channels x T tensors.
pub fn hybrid_loss(z0: &Tensor, z0_hat: &Tensor, lambda1: f64, lambda2: f64) -> Result<f64, DiffusionError> {
    if z0.shape() != z0_hat.shape() {
        return Err(DiffusionError::ShapeMismatch { expected: z0.shape(), got: z0_hat.shape() });
    }
    let dft = DftBasis::new(z0.cols);
    let mut tape = Tape::new();
    let a = tape.input(z0_hat.transpose());
    let b = tape.input(z0.transpose());
    let (loss, _, _) = hybrid_loss_var(&mut tape, a, b, lambda1, lambda2, &dft);
    Ok(tape.value(loss).data[0])
}

/// One training example: clean signal, step index, and injected noise.
pub struct TrainSample {
    pub z0: Tensor,
    pub k: usize,
    pub eps: Tensor,
}

/// Mean loss and parameter gradients over a batch of samples. Exposed for
/// finite-difference verification; `train` uses it per step.
pub fn loss_and_grads(
    model: &DenoiserModel,
    samples: &[TrainSample],
    sched: &DiffusionSchedule,
    lambda1: f64,
    lambda2: f64,
    dft: &DftBasis,
) -> Result<(f64, f64, f64, Vec<Tensor>), DiffusionError> {
    let per_sample: Vec<(f64, f64, f64, Vec<Tensor>)> = samples
        .par_iter()
        .map(|s| {
            let zk = forward_noise(&s.z0, s.k, &s.eps, sched)?;
            let mut tape = Tape::new();
            let bound = model.bind(&mut tape);
            let x = tape.input(zk.transpose());
            let target = tape.input(s.z0.transpose());
            let out = model.forward(&mut tape, &bound, x, s.k, s.z0.cols);
            let (loss, time_term, freq_term) =
                hybrid_loss_var(&mut tape, out.pred, target, lambda1, lambda2, dft);
            let grads = tape.backward(loss);
            let param_grads: Vec<Tensor> = bound
                .iter()
                .zip(model.params())
                .map(|(v, (_, p))| {
                    grads[v.0].clone().unwrap_or_else(|| Tensor::zeros(p.rows, p.cols))
                })
                .collect();
            Ok((
                tape.value(loss).data[0],
                tape.value(time_term).data[0],
                tape.value(freq_term).data[0],
                param_grads,
            ))
        })
        .collect::<Result<_, DiffusionError>>()?;

    // Deterministic reduction in batch order.
    let b = samples.len() as f64;
    let mut acc: Vec<Tensor> = model
        .params()
        .iter()
        .map(|(_, p)| Tensor::zeros(p.rows, p.cols))
        .collect();
    let (mut loss, mut time_term, mut freq_term) = (0.0, 0.0, 0.0);
    for (l, t, f, grads) in per_sample {
        loss += l / b;
        time_term += t / b;
        freq_term += f / b;
        for (a, g) in acc.iter_mut().zip(&grads) {
            a.axpy(1.0 / b, g);
        }
    }
    Ok((loss, time_term, freq_term, acc))
}

struct Adam {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: usize,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(model: &DenoiserModel) -> Self {
        let zeros: Vec<Tensor> =
            model.params().iter().map(|(_, p)| Tensor::zeros(p.rows, p.cols)).collect();
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }

    fn step(&mut self, model: &mut DenoiserModel, grads: &[Tensor], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for (i, (_, p)) in model.params_mut().iter_mut().enumerate() {
            for j in 0..p.data.len() {
                let g = grads[i].data[j];
                let m = &mut self.m[i].data[j];
                let v = &mut self.v[i].data[j];
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                let mh = *m / bc1;
                let vh = *v / bc2;
                p.data[j] -= lr * mh / (vh.sqrt() + Self::EPS);
            }
        }
    }
}

/// Trains the denoiser on normalized channels x T series. Steps sample k
/// uniformly in [1, K] per example; the returned model carries EMA weights.
pub fn train(
    dataset: &[Tensor],
    model_cfg: ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutput, DiffusionError> {
    cfg.validate()?;
    model_cfg.validate()?;
    let first = dataset
        .first()
        .ok_or_else(|| DiffusionError::InvalidConfig("training dataset is empty".into()))?;
    let shape = first.shape();
    if shape != (model_cfg.channels, model_cfg.seq_len) {
        return Err(DiffusionError::ShapeMismatch {
            expected: (model_cfg.channels, model_cfg.seq_len),
            got: shape,
        });
    }
    if let Some(bad) = dataset.iter().find(|t| t.shape() != shape) {
        return Err(DiffusionError::ShapeMismatch { expected: shape, got: bad.shape() });
    }

    let sched = cosine_schedule(cfg.k_steps);
    let dft = DftBasis::new(model_cfg.seq_len);
    let mut model = DenoiserModel::init(model_cfg, cfg.seed)?;
    let mut ema: Vec<Tensor> = model.params().iter().map(|(_, p)| p.clone()).collect();
    let mut adam = Adam::new(&model);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::new();

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for step in 0..cfg.steps {
        // Cosine decay to lr/10 over the budget.
        let progress = step as f64 / cfg.steps as f64;
        let lr = cfg.lr * (0.1 + 0.45 * (1.0 + (std::f64::consts::PI * progress).cos()));
        let mut samples = Vec::with_capacity(cfg.batch);
        for b in 0..cfg.batch {
            if b % dataset.len() == 0 && dataset.len() > 1 {
                order.shuffle(&mut rng);
            }
            let z0 = dataset[order[b % dataset.len()]].clone();
            let k = rng.gen_range(1..=cfg.k_steps);
            let eps_data: Vec<f64> = (0..z0.len())
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let eps = Tensor::from_vec(z0.rows, z0.cols, eps_data);
            samples.push(TrainSample { z0, k, eps });
        }
        let (loss, time_term, freq_term, grads) =
            loss_and_grads(&model, &samples, &sched, cfg.lambda1, cfg.lambda2, &dft)?;
        if !loss.is_finite() {
            return Err(DiffusionError::NonFiniteLoss { step, loss, time_term, freq_term });
        }
        adam.step(&mut model, &grads, lr);
        for (e, (_, p)) in ema.iter_mut().zip(model.params()) {
            for (ev, pv) in e.data.iter_mut().zip(&p.data) {
                *ev = cfg.ema_decay * *ev + (1.0 - cfg.ema_decay) * pv;
            }
        }
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            log.push(LogRow { step, loss, time_term, freq_term, lr });
        }
    }

    let ema_params: Vec<(String, Tensor)> = model
        .params()
        .iter()
        .zip(ema)
        .map(|((name, _), t)| (name.clone(), t))
        .collect();
    let ema_model = DenoiserModel::from_params(model.cfg.clone(), ema_params);
    Ok(TrainOutput { model: ema_model, raw: model, log, schedule: sched })
}

/// Writes the training log as `step,loss,time_term,freq_term,learning_rate`.
pub fn write_training_log(log: &[LogRow], path: &std::path::Path) -> std::io::Result<()> {
    let mut out = String::from("step,loss,time_term,freq_term,learning_rate\n");
    for row in log {
        out.push_str(&format!(
            "{},{:.12e},{:.12e},{:.12e},{:.6e}\n",
            row.step, row.loss, row.time_term, row.freq_term, row.lr
        ));
    }
    std::fs::write(path, out)
}
