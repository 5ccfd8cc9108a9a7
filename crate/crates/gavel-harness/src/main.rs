//! Command-line entry point for the evaluation harness.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gavel_backend::{gateway_from_file_or_env, JudgeConfig};
use gavel_core::{DemoRegistry, PromptMode, RubricWeights, TemplateSet};
use gavel_harness::{
    ablation_csv, load_dataset, report_csv, run_ablation, run_benchmark, run_rationale_agreement,
    AblationAxis, AblationPlan, DatasetFormat, JudgeSetup,
};

#[derive(Parser)]
#[command(
    name = "gavel-harness",
    about = "Benchmark, ablate, and audit an LLM judge over preference datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pairwise benchmark and report per-slice accuracy.
    Bench(BenchArgs),
    /// Sweep one prompt-design knob and report variants side by side.
    Ablate(AblateArgs),
    /// Grade judge rationales against human ones on the 0-10 scale.
    RationaleAgreement(AgreementArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSONL preference dataset.
    #[arg(long)]
    dataset: PathBuf,
    /// Backend config TOML (kind = "http" | "scripted"); defaults to the
    /// JUDGE_BACKEND_URL / JUDGE_BACKEND_KEY / JUDGE_MODEL_NAME env vars.
    #[arg(long)]
    backend: Option<PathBuf>,
    /// Rubric weights TOML; defaults to the shipped human-derived weights.
    #[arg(long)]
    weights_file: Option<PathBuf>,
    /// Demo registry JSONL; defaults to the shipped six demos.
    #[arg(long)]
    demos: Option<PathBuf>,
    /// Template override directory.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Append flagged completions to this JSONL audit log.
    #[arg(long)]
    flag_log: Option<PathBuf>,
    /// Strip markdown code fences instead of flagging them.
    #[arg(long)]
    lenient_fences: bool,
    /// Re-query budget for flagged completions.
    #[arg(long, default_value_t = 3)]
    max_parse_attempts: u32,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Judging mode: zero_shot, few_shot, or naive.
    #[arg(long, default_value = "zero_shot")]
    mode: String,
    /// Demo count for few_shot mode.
    #[arg(long, default_value_t = 6)]
    k: u32,
    /// Persist progress here every 50 records and resume from it.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Also write a per-record trace JSONL.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which knob to sweep: prompt, demos, weights, or rationale.
    #[arg(long)]
    axis: String,
    /// Base judging mode held fixed while the axis varies.
    #[arg(long, default_value = "zero_shot")]
    mode: String,
    /// Demo count for a few_shot base mode.
    #[arg(long, default_value_t = 6)]
    k: u32,
    /// Demo-count sweep for the demos axis, ascending.
    #[arg(long, value_delimiter = ',', default_values_t = [0u32, 2, 4, 6])]
    k_sweep: Vec<u32>,
}

#[derive(Args)]
struct AgreementArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Backend config for the grader; defaults to the judge backend.
    #[arg(long)]
    grader_backend: Option<PathBuf>,
}

fn parse_mode(mode: &str, k: u32) -> Result<PromptMode> {
    match mode {
        "zero_shot" => Ok(PromptMode::ZeroShot),
        "few_shot" => Ok(PromptMode::FewShot(k)),
        "naive" => Ok(PromptMode::Naive),
        other => bail!("unknown mode {other:?} (expected zero_shot, few_shot, or naive)"),
    }
}

fn build_setup(common: &CommonArgs) -> Result<JudgeSetup> {
    let gateway = gateway_from_file_or_env(common.backend.as_deref())
        .context("building the backend gateway")?;
    let mut setup = JudgeSetup::new(gateway);
    if let Some(path) = &common.weights_file {
        setup.weights = RubricWeights::from_toml_file(path)
            .with_context(|| format!("loading weights from {}", path.display()))?;
    }
    if let Some(path) = &common.demos {
        setup.registry = DemoRegistry::from_path(path)
            .with_context(|| format!("loading demo registry from {}", path.display()))?;
    }
    if let Some(dir) = &common.templates {
        setup.templates = TemplateSet::from_dir(dir)
            .with_context(|| format!("loading templates from {}", dir.display()))?;
    }
    setup.config = JudgeConfig {
        max_parse_attempts: common.max_parse_attempts,
        lenient_fences: common.lenient_fences,
        ..JudgeConfig::default()
    };
    setup.flag_log = common.flag_log.clone();
    Ok(setup)
}

fn write_out(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

async fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mode = parse_mode(&args.mode, args.k)?;
    let dataset = load_dataset(&args.common.dataset, DatasetFormat::PairwiseJsonl)?;
    let setup = build_setup(&args.common)?;
    let judge = setup.judge()?;
    let outcome = run_benchmark(&dataset, &mode, &judge, args.checkpoint.as_deref()).await?;

    let json = format!(
        "{}\n",
        serde_json::to_string_pretty(&outcome.report).expect("report serializes")
    );
    let csv = report_csv(&mode.label(), &outcome.report);
    write_out(&args.common.out.join("report.json"), &json)?;
    write_out(&args.common.out.join("report.csv"), &csv)?;
    if args.trace {
        let mut trace = String::new();
        for row in &outcome.rows {
            trace.push_str(&serde_json::to_string(row).expect("row serializes"));
            trace.push('\n');
        }
        write_out(&args.common.out.join("trace.jsonl"), &trace)?;
    }
    print!("{csv}");
    println!(
        "overall {}/{} correct, flag rate {:.1}%",
        outcome.report.overall.correct,
        outcome.report.overall.total,
        outcome.report.flag_rate * 100.0
    );
    Ok(())
}

async fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let axis: AblationAxis = args.axis.parse().map_err(anyhow::Error::msg)?;
    let base_mode = parse_mode(&args.mode, args.k)?;
    let dataset = load_dataset(&args.common.dataset, DatasetFormat::PairwiseJsonl)?;
    let setup = build_setup(&args.common)?;
    let plan = AblationPlan::new(axis, base_mode).with_demo_counts(args.k_sweep.clone());
    let outcome = run_ablation(&plan, &dataset, &setup).await?;

    let json = format!(
        "{}\n",
        serde_json::to_string_pretty(&outcome).expect("ablation serializes")
    );
    let csv = ablation_csv(&outcome);
    write_out(&args.common.out.join("ablation.json"), &json)?;
    write_out(&args.common.out.join("ablation.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

async fn cmd_agreement(args: AgreementArgs) -> Result<()> {
    let dataset = load_dataset(&args.common.dataset, DatasetFormat::RationalesJsonl)?;
    let setup = build_setup(&args.common)?;
    let judge = setup.judge()?;
    let grader = match &args.grader_backend {
        None => setup.judge()?,
        Some(path) => {
            let gateway =
                gateway_from_file_or_env(Some(path)).context("building the grader gateway")?;
            let mut grader_setup = setup.clone();
            grader_setup.gateway = gateway;
            grader_setup.judge()?
        }
    };
    let report = run_rationale_agreement(&dataset, &judge, &grader).await?;
    let json = format!(
        "{}\n",
        serde_json::to_string_pretty(&report).expect("agreement serializes")
    );
    write_out(&args.common.out.join("agreement.json"), &json)?;
    println!(
        "graded {} records: mean {:.2}, median {:.1}, quartiles {:.1}/{:.1}",
        report.n, report.mean, report.median, report.q1, report.q3
    );
    Ok(())
}

#[tokio::main]
async fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Bench(args) => cmd_bench(args).await,
        Command::Ablate(args) => cmd_ablate(args).await,
        Command::RationaleAgreement(args) => cmd_agreement(args).await,
    }
}
