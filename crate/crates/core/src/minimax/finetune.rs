//! The fine-tuning loop.
//!
//! Per step: draw a mini-batch, noise it, predict the noise and the clean
//! embedding, combine the three loss terms, take one optimizer step, then
//! enqueue the real embeddings and the predictions into their banks.

use super::bank::{bank_enqueue, MemoryBank};
use super::losses::{div_term, repr_naive_term, repr_term, total_loss, TermEval};
use super::{DivMode, MinimaxConfig, ReprMode};
use crate::dataset::LabeledDataset;
use crate::diffusion::{
    forward_noise, predict_clean_embedding, zhat_grad_factor, Denoiser, EncoderDecoder,
    NoiseSchedule,
};
use crate::error::{DistillError, Result};
use crate::nn::AdamW;
use crate::rng::{rng_from_seed, standard_normal_vec};
use rand::seq::SliceRandom;
use rand::Rng;

/// One training example with its noise draw.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub z0: Vec<f64>,
    pub label: usize,
    pub t: usize,
    pub eps: Vec<f64>,
}

/// Loss values and flat parameter gradients for one batch, term by term.
#[derive(Debug, Clone)]
pub struct StepEval {
    pub simple: f64,
    pub repr: f64,
    pub div: f64,
    pub total: f64,
    pub grad_simple: Vec<f64>,
    pub grad_repr: Vec<f64>,
    pub grad_div: Vec<f64>,
    pub grad_total: Vec<f64>,
    pub z_hat: Vec<Vec<f64>>,
    pub skipped_repr: usize,
    pub skipped_div: usize,
}

/// One row of the loss trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub simple: f64,
    pub repr: f64,
    pub div: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct FinetuneOutput {
    pub model: Denoiser,
    pub trace: Vec<TraceRow>,
    pub real_bank: MemoryBank,
    pub pred_bank: MemoryBank,
}

fn zero_term(batch_len: usize, dim: usize) -> TermEval {
    TermEval {
        value: 0.0,
        grads: vec![vec![0.0; dim]; batch_len],
        picked: vec![None; batch_len],
        skipped: 0,
    }
}

/// Evaluates the combined objective on a fixed batch against fixed banks,
/// returning the value and analytic gradient of every term.
pub fn step_loss_and_grad(
    model: &Denoiser,
    batch: &[BatchItem],
    real_bank: &MemoryBank,
    pred_bank: &MemoryBank,
    schedule: &NoiseSchedule,
    cfg: &MinimaxConfig,
) -> Result<StepEval> {
    if batch.is_empty() {
        return Err(DistillError::EmptyInput("empty batch".into()));
    }
    let n = batch.len();
    let dim = model.dim;
    let scale = 1.0 / n as f64;

    let mut caches = Vec::with_capacity(n);
    let mut eps_preds = Vec::with_capacity(n);
    let mut z_hat = Vec::with_capacity(n);
    let mut simple = 0.0;
    let mut d_simple = Vec::with_capacity(n);
    for item in batch {
        let zt = forward_noise(&item.z0, item.t, &item.eps, schedule)?;
        let (eps_pred, cache) =
            model.predict_noise_cached(&zt, item.t, item.label, schedule.timesteps);
        simple += scale
            * eps_pred
                .iter()
                .zip(&item.eps)
                .map(|(p, e)| (p - e) * (p - e))
                .sum::<f64>();
        d_simple.push(
            eps_pred
                .iter()
                .zip(&item.eps)
                .map(|(p, e)| 2.0 * scale * (p - e))
                .collect::<Vec<f64>>(),
        );
        z_hat.push(predict_clean_embedding(&zt, &eps_pred, cfg.zhat_mode, item.t, schedule)?);
        eps_preds.push(eps_pred);
        caches.push(cache);
    }

    let labels: Vec<usize> = batch.iter().map(|b| b.label).collect();
    let repr_eval = match cfg.repr_mode {
        ReprMode::Off => zero_term(n, dim),
        ReprMode::Naive => {
            let real: Vec<Vec<f64>> = batch.iter().map(|b| b.z0.clone()).collect();
            repr_naive_term(&z_hat, &real)?
        }
        ReprMode::Minimax => repr_term(&z_hat, real_bank, &labels)?,
    };
    let div_eval = match cfg.div_mode {
        DivMode::Off => zero_term(n, dim),
        DivMode::Minimax => div_term(&z_hat, pred_bank, &labels)?,
    };

    // Chain through z_hat: a perturbation of eps_pred moves z_hat by the
    // mode-dependent factor.
    let chain = |term: &TermEval| -> Result<Vec<Vec<f64>>> {
        batch
            .iter()
            .zip(&term.grads)
            .map(|(item, g)| {
                let f = zhat_grad_factor(cfg.zhat_mode, item.t, schedule)?;
                Ok(g.iter().map(|gi| f * gi).collect())
            })
            .collect()
    };
    let grad_simple = model.backward_batch(&caches, &d_simple);
    let grad_repr = model.backward_batch(&caches, &chain(&repr_eval)?);
    let grad_div = model.backward_batch(&caches, &chain(&div_eval)?);
    let grad_total: Vec<f64> = grad_simple
        .iter()
        .zip(&grad_repr)
        .zip(&grad_div)
        .map(|((s, r), d)| s + cfg.lambda_r * r + cfg.lambda_d * d)
        .collect();

    let total = total_loss(simple, repr_eval.value, div_eval.value, cfg)?;
    Ok(StepEval {
        simple,
        repr: repr_eval.value,
        div: div_eval.value,
        total,
        grad_simple,
        grad_repr,
        grad_div,
        grad_total,
        z_hat,
        skipped_repr: repr_eval.skipped,
        skipped_div: div_eval.skipped,
    })
}

/// Runs the fine-tuning loop. Identical seeds give identical traces.
pub fn finetune(
    model: Denoiser,
    dataset: &LabeledDataset,
    encoder: &EncoderDecoder,
    schedule: &NoiseSchedule,
    cfg: &MinimaxConfig,
    seed: u64,
) -> Result<FinetuneOutput> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(DistillError::EmptyInput("fine-tuning dataset is empty".into()));
    }
    if dataset.class_count != model.class_count {
        return Err(DistillError::invalid(format!(
            "dataset has {} classes but model expects {}",
            dataset.class_count, model.class_count
        )));
    }

    let mut model = model;
    let mut opt = AdamW::new(cfg.learning_rate, cfg.weight_decay, model.param_count());
    let mut real_bank = MemoryBank::new(cfg.memory_capacity, dataset.class_count, cfg.partitioning)?;
    let mut pred_bank = MemoryBank::new(cfg.memory_capacity, dataset.class_count, cfg.partitioning)?;
    let mut rng = rng_from_seed(seed);
    let mut trace = Vec::new();
    let mut step = 0usize;
    let mut bad_streak = 0usize;

    let mut params = model.params_flat();
    for _epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let z0 = encoder.encode(&dataset.features[idx])?;
                let t = rng.gen_range(1..=schedule.timesteps);
                let eps = standard_normal_vec(&mut rng, z0.len());
                batch.push(BatchItem {
                    z0,
                    label: dataset.labels[idx],
                    t,
                    eps,
                });
            }
            let eval = step_loss_and_grad(&model, &batch, &real_bank, &pred_bank, schedule, cfg)?;

            if eval.total.is_finite() {
                bad_streak = 0;
                opt.step(&mut params, &eval.grad_total);
                model.set_params_flat(&params);
            } else {
                bad_streak += 1;
                if bad_streak >= 10 {
                    return Err(DistillError::numeric(format!(
                        "total loss non-finite for {bad_streak} consecutive steps (step {step})"
                    )));
                }
            }

            let real: Vec<Vec<f64>> = batch.iter().map(|b| b.z0.clone()).collect();
            let labels: Vec<usize> = batch.iter().map(|b| b.label).collect();
            bank_enqueue(&mut real_bank, &real, &labels)?;
            bank_enqueue(&mut pred_bank, &eval.z_hat, &labels)?;

            trace.push(TraceRow {
                step,
                simple: eval.simple,
                repr: eval.repr,
                div: eval.div,
                total: eval.total,
            });
            step += 1;
        }
    }
    Ok(FinetuneOutput {
        model,
        trace,
        real_bank,
        pred_bank,
    })
}
