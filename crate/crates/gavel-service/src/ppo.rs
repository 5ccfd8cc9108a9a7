//! Desk-scale PPO-Clip loop over a categorical policy, exercising the
//! online reward pathway end to end.
//!
//! The actor here is deliberately tiny: a softmax over a fixed candidate
//! answer set. Its purpose is to verify reward delivery (determinism,
//! latency, signal ordering), not to train a language model. The critic
//! is the judge; there is no value network, so the advantage baseline is
//! the batch mean reward.

use gavel_backend::{Judge, JudgeError};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

/// Linearly annealed KL-penalty coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct KlSchedule {
    pub beta_start: f64,
    #[serde(default = "default_beta_end")]
    pub beta_end: f64,
    pub total_steps: u32,
}

fn default_beta_end() -> f64 {
    0.1
}

impl KlSchedule {
    pub fn new(beta_start: f64, beta_end: f64, total_steps: u32) -> Result<Self, PpoError> {
        let sched = KlSchedule {
            beta_start,
            beta_end,
            total_steps,
        };
        sched.validate()?;
        Ok(sched)
    }

    pub fn validate(&self) -> Result<(), PpoError> {
        if !(self.beta_start >= self.beta_end && self.beta_end > 0.0) {
            return Err(PpoError::InvalidSchedule(format!(
                "need beta_start >= beta_end > 0, got {} and {}",
                self.beta_start, self.beta_end
            )));
        }
        if self.total_steps == 0 {
            return Err(PpoError::InvalidSchedule(
                "total_steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `beta(step) = beta_start + (beta_end - beta_start) * step / total_steps`,
/// clamped to `beta_end` from `total_steps` onward (the endpoint is exact,
/// not a rounded interpolation).
pub fn kl_coefficient(step: u32, sched: &KlSchedule) -> f64 {
    if step >= sched.total_steps {
        return sched.beta_end;
    }
    let fraction = step as f64 / sched.total_steps as f64;
    sched.beta_start + (sched.beta_end - sched.beta_start) * fraction
}

/// Configuration of the toy online loop.
#[derive(Debug, Clone)]
pub struct ToyPpoConfig {
    /// PPO clip width.
    pub clip_epsilon: f64,
    pub learning_rate: f64,
    /// Prompt-answer pairs sampled per update.
    pub batch_size: usize,
    pub steps: u32,
    /// The task prompt every candidate answers.
    pub prompt: String,
    /// Candidate answers the categorical policy chooses between.
    pub action_space: Vec<String>,
    /// Steps between behavior-policy syncs; ratios are 1 on the first step
    /// after a sync, so the clip only engages between syncs.
    pub sync_interval: u32,
    pub seed: u64,
}

impl ToyPpoConfig {
    pub fn new(prompt: impl Into<String>, action_space: Vec<String>, steps: u32) -> Self {
        ToyPpoConfig {
            clip_epsilon: 0.2,
            learning_rate: 0.1,
            batch_size: 128,
            steps,
            prompt: prompt.into(),
            action_space,
            sync_interval: 4,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PpoError> {
        if self.action_space.len() < 2 {
            return Err(PpoError::DegenerateActionSpace(self.action_space.len()));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(PpoError::InvalidConfig(format!(
                "clip_epsilon must be in (0, 1), got {}",
                self.clip_epsilon
            )));
        }
        if self.learning_rate <= 0.0 || self.batch_size == 0 || self.sync_interval == 0 {
            return Err(PpoError::InvalidConfig(
                "learning_rate, batch_size, and sync_interval must be positive".into(),
            ));
        }
        Ok(())
    }

    /// One-line summary logged at the head of the trace CSV.
    pub fn summary(&self, sched: &KlSchedule) -> String {
        format!(
            "clip_epsilon={} learning_rate={} batch_size={} steps={} actions={} sync_interval={} seed={} beta_start={} beta_end={} total_steps={}",
            self.clip_epsilon,
            self.learning_rate,
            self.batch_size,
            self.steps,
            self.action_space.len(),
            self.sync_interval,
            self.seed,
            sched.beta_start,
            sched.beta_end,
            sched.total_steps,
        )
    }
}

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("action space needs at least 2 candidates, got {0}")]
    DegenerateActionSpace(usize),
    #[error("invalid KL schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid PPO config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Judge(#[from] JudgeError),
}

/// Per-step statistics recorded by the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub step: u32,
    pub mean_reward: f64,
    pub kl: f64,
    pub beta: f64,
}

/// Everything the loop produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    pub config_summary: String,
    pub steps: Vec<StepStats>,
    /// Final policy probabilities over the action space.
    pub final_policy: Vec<f64>,
}

impl TrainingTrace {
    /// CSV with the config summary as a comment header, then
    /// `step,mean_reward,kl,beta` rows.
    pub fn to_csv(&self) -> String {
        let mut text = format!("# {}\n", self.config_summary);
        text.push_str("step,mean_reward,kl,beta\n");
        for s in &self.steps {
            text.push_str(&format!(
                "{},{},{},{}\n",
                s.step, s.mean_reward, s.kl, s.beta
            ));
        }
        text
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

fn kl_divergence(probs: &[f64], reference_log: &[f64]) -> f64 {
    probs
        .iter()
        .zip(reference_log)
        .map(|(&p, &lr)| if p > 0.0 { p * (p.ln() - lr) } else { 0.0 })
        .sum()
}

/// Run the loop: each step samples `batch_size` actions from the behavior
/// policy, gets every distinct sampled action re-scored by the judge,
/// computes batch-mean-baseline advantages, and ascends the clipped
/// surrogate minus `beta(step) * KL(policy || reference)`.
pub async fn toy_online_loop(
    config: &ToyPpoConfig,
    sched: &KlSchedule,
    judge: &Judge,
) -> Result<TrainingTrace, PpoError> {
    config.validate()?;
    sched.validate()?;

    let n = config.action_space.len();
    let mut logits = vec![0.0f64; n];
    let reference = softmax(&logits);
    let reference_log: Vec<f64> = reference.iter().map(|&p| p.ln()).collect();
    let mut behavior_logits = logits.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = Vec::with_capacity(config.steps as usize);

    for step in 0..config.steps {
        if step % config.sync_interval == 0 {
            behavior_logits.clone_from(&logits);
        }
        let behavior = softmax(&behavior_logits);
        let sampler = WeightedIndex::new(&behavior)
            .map_err(|e| PpoError::InvalidConfig(format!("degenerate policy: {e}")))?;
        let batch: Vec<usize> = (0..config.batch_size)
            .map(|_| sampler.sample(&mut rng))
            .collect();

        // The judge re-scores every distinct sampled action each step:
        // rewards arrive online, not from a cache.
        let mut distinct: Vec<usize> = batch.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let verdicts = futures::future::join_all(
            distinct
                .iter()
                .map(|&a| judge.judge_answer(&config.prompt, &config.action_space[a])),
        )
        .await;
        let mut reward_of = vec![0.0f64; n];
        for (&action, verdict) in distinct.iter().zip(verdicts) {
            reward_of[action] = verdict?.reward.value();
        }

        let rewards: Vec<f64> = batch.iter().map(|&a| reward_of[a]).collect();
        let mean_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;

        let probs = softmax(&logits);
        let beta = kl_coefficient(step, sched);

        // Clipped surrogate gradient wrt logits. For a sampled action a:
        // d(rho*A)/dz_k = rho*A*(1[a=k] - pi_k); samples clipped out by
        // min(rho*A, clip(rho)*A) contribute nothing.
        let mut grad = vec![0.0f64; n];
        let mut coeff_total = 0.0f64;
        let batch_f = config.batch_size as f64;
        for (&action, &reward) in batch.iter().zip(&rewards) {
            let advantage = reward - mean_reward;
            let rho = probs[action] / behavior[action];
            let clipped_out = (advantage > 0.0 && rho > 1.0 + config.clip_epsilon)
                || (advantage < 0.0 && rho < 1.0 - config.clip_epsilon);
            if clipped_out {
                continue;
            }
            let coeff = advantage * rho / batch_f;
            grad[action] += coeff;
            coeff_total += coeff;
        }
        for k in 0..n {
            grad[k] -= coeff_total * probs[k];
        }

        // KL(pi || ref) gradient: pi_k * ((ln pi_k - ln ref_k) - KL)
        let kl = kl_divergence(&probs, &reference_log);
        for k in 0..n {
            grad[k] -= beta * probs[k] * ((probs[k].ln() - reference_log[k]) - kl);
        }

        for k in 0..n {
            logits[k] += config.learning_rate * grad[k];
        }

        trace.push(StepStats {
            step,
            mean_reward,
            kl,
            beta,
        });
    }

    Ok(TrainingTrace {
        config_summary: config.summary(sched),
        steps: trace,
        final_policy: softmax(&logits),
    })
}
