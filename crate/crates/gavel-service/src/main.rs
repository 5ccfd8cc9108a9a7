//! Command-line entry point: serve the reward API or run the toy online
//! loop against a judge.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gavel_backend::{gateway_from_file_or_env, Gateway, Judge, JudgeConfig, ScriptedBackend};
use gavel_core::{DemoRegistry, PromptForge, RubricWeights};
use gavel_service::{
    kl_coefficient, router, toy_online_loop, KlSchedule, ServiceConfig, ToyPpoConfig,
};
use serde::Deserialize;

#[derive(Parser)]
#[command(
    name = "gavel-service",
    about = "Serve the judge as an online reward API, or simulate a policy training against it"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve POST /v1/score, POST /v1/compare, and GET /v1/health.
    Serve(ServeArgs),
    /// Run the desk-scale PPO-clip loop and write its trace CSV.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct ServeArgs {
    /// Service config TOML.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured port.
    #[arg(long)]
    port: Option<u16>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Optimization steps to run.
    #[arg(long)]
    steps: u32,
    /// Actions file: JSON with the task prompt and candidate answers.
    #[arg(long)]
    actions: PathBuf,
    /// KL schedule as "beta_start,beta_end"; anneals across all steps.
    #[arg(long, default_value = "1.0,0.1")]
    schedule: String,
    /// Backend config TOML; without it, candidates are judged by their
    /// scripted rewards from the actions file.
    #[arg(long)]
    backend: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.2)]
    clip_epsilon: f64,
    #[arg(long, default_value_t = 4)]
    sync_interval: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace CSV destination.
    #[arg(long, default_value = "ppo_trace.csv")]
    out: PathBuf,
}

/// Actions file: the task prompt plus candidate answers, each optionally
/// carrying the reward a scripted judge should assign it.
#[derive(Debug, Deserialize)]
struct ActionsFile {
    prompt: String,
    candidates: Vec<Candidate>,
}

#[derive(Debug, Deserialize)]
struct Candidate {
    text: String,
    #[serde(default)]
    reward: Option<f64>,
}

async fn cmd_serve(args: ServeArgs) -> Result<()> {
    let base_dir = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut config = ServiceConfig::from_path(&args.config)?;
    if let Some(port) = args.port {
        config.port = port;
    }
    let port = config.port;
    let state = config.build_state(&base_dir)?;
    let app = router(state);
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
        .await
        .with_context(|| format!("binding port {port}"))?;
    println!("serving on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn scripted_judge_for(actions: &ActionsFile) -> Result<Judge> {
    let mock = Arc::new(ScriptedBackend::new());
    let judge = Judge::new(
        Gateway::scripted(Arc::clone(&mock)),
        PromptForge::default(),
        DemoRegistry::shipped(),
        RubricWeights::human_derived(),
        JudgeConfig::default(),
    )?;
    for candidate in &actions.candidates {
        let Some(reward) = candidate.reward else {
            bail!(
                "candidate {:?} has no scripted reward; supply --backend or add a \"reward\" field",
                candidate.text
            );
        };
        if !(-1.0..=1.0).contains(&reward) {
            bail!(
                "scripted reward {reward} for {:?} is outside [-1, 1]",
                candidate.text
            );
        }
        let prompt = judge.single_prompt(&actions.prompt, &candidate.text);
        mock.script_completion_for(
            &prompt,
            format!(r#"{{"score":{reward},"rationale":"scripted reward"}}"#),
        );
    }
    Ok(judge)
}

fn live_judge(backend: &Path) -> Result<Judge> {
    let gateway = gateway_from_file_or_env(Some(backend))?;
    Ok(Judge::new(
        gateway,
        PromptForge::default(),
        DemoRegistry::shipped(),
        RubricWeights::human_derived(),
        JudgeConfig::default(),
    )?)
}

async fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.actions)
        .with_context(|| format!("reading {}", args.actions.display()))?;
    let actions: ActionsFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.actions.display()))?;

    let (beta_start, beta_end) = {
        let parts: Vec<&str> = args.schedule.split(',').collect();
        if parts.len() != 2 {
            bail!("--schedule expects \"beta_start,beta_end\"");
        }
        (
            parts[0].trim().parse::<f64>()?,
            parts[1].trim().parse::<f64>()?,
        )
    };
    let sched = KlSchedule::new(beta_start, beta_end, args.steps)?;

    let judge = match &args.backend {
        Some(path) => live_judge(path)?,
        None => scripted_judge_for(&actions)?,
    };

    let mut config = ToyPpoConfig::new(
        actions.prompt.clone(),
        actions.candidates.iter().map(|c| c.text.clone()).collect(),
        args.steps,
    );
    config.batch_size = args.batch_size;
    config.learning_rate = args.learning_rate;
    config.clip_epsilon = args.clip_epsilon;
    config.sync_interval = args.sync_interval;
    config.seed = args.seed;

    let trace = toy_online_loop(&config, &sched, &judge).await?;
    std::fs::write(&args.out, trace.to_csv())
        .with_context(|| format!("writing {}", args.out.display()))?;

    let first = trace.steps.first().expect("at least one step");
    let last = trace.steps.last().expect("at least one step");
    println!("wrote {}", args.out.display());
    println!(
        "step 0: mean reward {:.4}, beta {:.4}; step {}: mean reward {:.4}, beta {:.4}",
        first.mean_reward,
        kl_coefficient(0, &sched),
        last.step,
        last.mean_reward,
        last.beta,
    );
    let best = trace
        .final_policy
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty policy");
    println!(
        "final policy peak: candidate {} at probability {:.3}",
        best.0, best.1
    );
    Ok(())
}

#[tokio::main]
async fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Serve(args) => cmd_serve(args).await,
        Command::Simulate(args) => cmd_simulate(args).await,
    }
}
