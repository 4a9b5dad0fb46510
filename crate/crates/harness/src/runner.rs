//! Single seeded run of the collect / train / reprioritize loop.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use curious_replay::agent::Agent;
use curious_replay::envs::Environment;
use curious_replay::PrioritizedBuffer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::{write_line, Header, IntervalRecord, Line, RunMetrics, Summary, FORMAT_VERSION};

/// Mixed into the run seed for the agent's action and sampling stream.
const AGENT_STREAM: u64 = 0xA6E7_5EED;

#[derive(Default)]
struct Interval {
    episodes: usize,
    returns: f64,
    reward: f64,
    loss_sum: f64,
    loss_count: usize,
    training_reward_sum: f64,
    train_steps: usize,
}

fn heldout_losses(env: &dyn Environment, agent: &Agent) -> Result<Vec<f64>> {
    env.heldout()
        .iter()
        .map(|set| {
            let mut total = 0.0;
            for t in &set.transitions {
                total += agent.model.loss(t)?;
            }
            Ok(total / set.transitions.len().max(1) as f64)
        })
        .collect()
}

/// Run and, when `config.output` is set, stream the metrics to that file.
pub fn run(config: &RunConfig) -> Result<RunMetrics> {
    match &config.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
            }
            let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
            let mut out = BufWriter::new(file);
            let metrics = run_with_writer(config, &mut out).map_err(|e| match e {
                HarnessError::Io { source, .. } => HarnessError::io(path, source),
                other => other,
            })?;
            out.flush().map_err(|e| HarnessError::io(path, e))?;
            Ok(metrics)
        }
        None => run_with_writer(config, &mut std::io::sink()),
    }
}

/// Run, writing each metrics line to `out` as soon as it is produced.
pub fn run_with_writer<W: Write>(config: &RunConfig, out: &mut W) -> Result<RunMetrics> {
    config.validate()?;
    let io = |e| HarnessError::io("<metrics>", e);
    let started = Instant::now();
    let mut env = config.env.build(config.seed)?;
    env.reset(config.seed);
    let mut agent = Agent::new(config.agent.clone(), env.obs_dim(), env.action_count(), config.priority.gamma, config.seed)?;
    let mut buffer = PrioritizedBuffer::new(config.buffer_capacity, config.priority)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ AGENT_STREAM);

    let header = Header {
        format_version: FORMAT_VERSION,
        env: config.env.name().to_owned(),
        strategy: config.strategy(),
        seed: config.seed,
        t0: config.env.t0(),
        heldout_phases: env.heldout().iter().map(|s| s.phase).collect(),
        // the output path is left out so reruns elsewhere stay byte-identical
        config: RunConfig { output: None, ..config.clone() },
    };
    write_line(out, &Line::Header(Box::new(header.clone()))).map_err(io)?;

    let steps_per_train = config.agent.steps_per_train as u64;
    let mut records = Vec::new();
    let mut interval = Interval::default();
    let mut episodes_completed = 0;
    while env.global_step() < config.total_steps {
        if config.clear_buffer_at == Some(env.global_step()) {
            buffer.clear();
        }
        let steps = steps_per_train.min(config.total_steps - env.global_step()) as usize;
        let collected = agent.collect(env.as_mut(), &mut buffer, steps, &mut rng)?;
        let trained = agent.train_step(&mut buffer, &mut rng)?;

        interval.episodes += collected.episodes_ended;
        interval.returns += collected.episode_returns.iter().sum::<f64>();
        interval.reward += collected.extrinsic_reward;
        interval.loss_sum += trained.model_losses.iter().sum::<f64>();
        interval.loss_count += trained.model_losses.len();
        interval.training_reward_sum += trained.mean_training_reward;
        interval.train_steps += 1;
        episodes_completed += collected.episodes_ended;

        let step = env.global_step();
        if step % config.metrics_interval == 0 || step == config.total_steps {
            let done = std::mem::take(&mut interval);
            let record = IntervalRecord {
                step,
                phase: env.phase(),
                interactions: env.interaction_count(),
                heldout_loss: heldout_losses(env.as_ref(), &agent)?,
                episodes_completed: done.episodes,
                mean_return: (done.episodes > 0).then(|| done.returns / done.episodes as f64),
                reward: done.reward,
                mean_model_loss: done.loss_sum / done.loss_count.max(1) as f64,
                mean_training_reward: done.training_reward_sum / done.train_steps.max(1) as f64,
                buffer_len: buffer.len(),
                diagnostics: buffer.diagnostics(),
                wall_clock_s: config.record_wall_clock.then(|| started.elapsed().as_secs_f64()),
            };
            write_line(out, &Line::Interval(Box::new(record.clone()))).map_err(io)?;
            records.push(record);
        }
    }

    let summary = Summary {
        steps: env.global_step(),
        interactions: env.interaction_count(),
        interaction_steps: env.interaction_steps().to_vec(),
        episodes_completed,
        applied_updates: buffer.applied_updates(),
        skipped_updates: buffer.skipped_updates(),
    };
    write_line(out, &Line::Summary(summary.clone())).map_err(io)?;
    Ok(RunMetrics { header, records, summary })
}
