use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use blicket_core::analysis::{aggregate, progress_table, write_progress_csv, GroupField};
use blicket_core::backend::{ChatBackend, ReplayBackend};
use blicket_core::env::{ObjectLabels, RenderStyle, Rule};
use blicket_core::harness::{
    read_records, record_to_line, replay_records, run_scenario_battery, run_trial_opts, run_trials,
    AgentKind, RecordWriter, RunOptions, ScenarioKind, TrialConfig, TrialError, TrialRecord,
    TrialStatus,
};
use blicket_core::prompts::{PromptStyle, SystemVariant};
use clap::{Args, Parser, Subcommand};
use tracing::{info, warn};

mod backends;
mod play;

use backends::{session_path, BackendFile};

#[derive(Parser)]
#[command(
    name = "blicket",
    version,
    about = "Text-based blicket detector trials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials and write one JSON record per line
    Run(RunArgs),
    /// Re-run recorded trials and compare their transcripts
    Replay(ReplayArgs),
    /// Summarise records into CSV tables
    Analyze(AnalyzeArgs),
    /// Ask a backend the fixed inference scenarios
    Scenarios(ScenarioArgs),
    /// Explore the machine yourself
    Play(play::PlayArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with TrialConfig fields; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    objects: Option<usize>,
    #[arg(long)]
    blickets: Option<usize>,
    #[arg(long)]
    rule: Option<Rule>,
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    system_msg: Option<SystemVariant>,
    #[arg(long)]
    prompt_style: Option<PromptStyle>,
    /// Seeds such as `0..16`, `7` or `1,4,9`
    #[arg(long, default_value = "0..16")]
    seeds: String,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_parser = parse_render_style)]
    render_style: Option<RenderStyle>,
    #[arg(long)]
    letters: bool,
    /// Backend selection file (TOML)
    #[arg(long)]
    backend_config: Option<PathBuf>,
    /// Also record wall-clock durations (makes records nondeterministic)
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    record: PathBuf,
    /// Re-run each trial in full and require byte-identical record lines
    #[arg(long)]
    verify_bytes: bool,
    /// Directory of `seed-<seed>.jsonl` sessions for backend-driven agents
    #[arg(long)]
    sessions: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, required = true, num_args = 1..)]
    records: Vec<PathBuf>,
    #[arg(long)]
    out_csv: PathBuf,
    /// Comma-separated grouping fields
    #[arg(long, default_value = "model,objects,rule", value_delimiter = ',')]
    group_by: Vec<GroupField>,
    /// Absolute and random-normalised progress per model, objects and rule
    #[arg(long)]
    progress_csv: Option<PathBuf>,
    /// JSON mirror of the summary table
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// disjunctive, conjunctive, ambiguous or all
    #[arg(long, default_value = "all")]
    variant: String,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long)]
    backend_config: PathBuf,
    /// JSON file with every reply
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_render_style(s: &str) -> Result<RenderStyle, String> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "off_the" => Ok(RenderStyle::OffThe),
        "off_of_the" => Ok(RenderStyle::OffOfThe),
        _ => Err(format!("unknown render style {s:?} (off_the, off_of_the)")),
    }
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
            if b <= a {
                bail!("empty seed range {part}");
            }
            seeds.extend(a..b);
        } else {
            seeds.push(part.parse().with_context(|| format!("bad seed {part:?}"))?);
        }
    }
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(seeds)
}

fn trial_config(args: &RunArgs) -> Result<TrialConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            backends::parse_toml::<TrialConfig>(&text, path)?
        }
        None => {
            let objects = args
                .objects
                .context("--objects is required without --config")?;
            let rule = args.rule.context("--rule is required without --config")?;
            let agent = args.agent.context("--agent is required without --config")?;
            TrialConfig::new(objects, rule, agent, 0)
        }
    };
    if let Some(n) = args.objects {
        config.num_objects = n;
        config.num_blickets = config.num_blickets.min(n);
    }
    if let Some(b) = args.blickets {
        config.num_blickets = b;
    }
    if let Some(r) = args.rule {
        config.rule = r;
    }
    if let Some(a) = args.agent {
        config.agent_kind = a;
    }
    if let Some(v) = args.system_msg {
        config.system_message_variant = v;
    }
    if let Some(s) = args.prompt_style {
        config.prompting_style = s;
    }
    if let Some(h) = args.horizon {
        config.horizon = h;
    }
    if let Some(r) = args.render_style {
        config.render_style = r;
    }
    if args.letters {
        config.labels = ObjectLabels::Letters;
    }
    config.validate()?;
    Ok(config)
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = trial_config(&args)?;
    let seeds = parse_seeds(&args.seeds)?;

    let backend_file = args
        .backend_config
        .as_deref()
        .map(BackendFile::load)
        .transpose()?;
    let mut backends: HashMap<u64, Arc<dyn ChatBackend>> = HashMap::new();
    if config.agent_kind.needs_backend() {
        let file = match (&backend_file, &config.backend) {
            (Some(file), _) => file.clone(),
            (None, Some(http)) => BackendFile {
                kind: backends::BackendKind::Http,
                record_sessions: None,
                http: Some(http.clone()),
                scripted: None,
                simulated: None,
                replay: None,
            },
            (None, None) => bail!("agent {} needs --backend-config", config.agent_kind),
        };
        config.backend = file.http_config().cloned();
        let factory = file.factory(config.num_objects)?;
        for &seed in &seeds {
            backends.insert(seed, factory.for_seed(seed)?);
        }
    }

    let options = RunOptions {
        record_timing: args.timing,
        ..RunOptions::default()
    };
    info!(trials = seeds.len(), agent = %config.agent_kind, "running");
    let results = run_trials(
        &config,
        &seeds,
        &|seed| backends.get(&seed).cloned(),
        options,
    );

    let out =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut writer = RecordWriter::new(BufWriter::new(out));
    let (mut complete, mut correct, mut failed) = (0usize, 0usize, 0usize);
    let mut steps = 0usize;
    for result in results {
        let record = match result {
            Ok(record) => record,
            Err(TrialError::Agent { source, partial }) => {
                warn!(seed = partial.config.seed, error = %source, "trial incomplete");
                failed += 1;
                *partial
            }
            Err(e) => return Err(e.into()),
        };
        if record.status == TrialStatus::Complete {
            complete += 1;
            correct += usize::from(record.all_correct);
            steps += record.events.len();
        }
        writer.append(&record)?;
    }
    writer.into_inner().flush()?;
    println!(
        "{} trials -> {}: {} complete, {} all-correct, mean steps {:.2}, {} incomplete",
        seeds.len(),
        args.out.display(),
        complete,
        correct,
        if complete > 0 {
            steps as f64 / complete as f64
        } else {
            0.0
        },
        failed
    );
    if failed > 0 {
        bail!("{failed} trial(s) stopped early; partial records were written");
    }
    Ok(())
}

fn rerun(record: &TrialRecord, sessions: Option<&Path>) -> Result<TrialRecord> {
    let backend: Option<Arc<dyn ChatBackend>> = if record.config.agent_kind.needs_backend() {
        let dir = sessions.context("backend-driven records need --sessions to verify bytes")?;
        Some(Arc::new(ReplayBackend::open(&session_path(
            dir,
            record.config.seed,
        ))?))
    } else {
        None
    };
    let options = RunOptions {
        record_timing: record.timing.is_some(),
        ..RunOptions::default()
    };
    let mut again = run_trial_opts(&record.config, backend, options)?;
    again.timing = record.timing;
    Ok(again)
}

fn replay(args: ReplayArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.record)
        .with_context(|| format!("reading {}", args.record.display()))?;
    let records = read_records(&args.record)?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let trajectories = replay_records(&records)?;
    let mut mismatches = 0;
    for (i, (record, trajectory)) in records.iter().zip(&trajectories).enumerate() {
        let seed = record.config.seed;
        if trajectory.transcript != record.transcript || trajectory.events != record.events {
            mismatches += 1;
            println!("seed {seed}: transcript differs on replay");
            continue;
        }
        if args.verify_bytes && record.status == TrialStatus::Complete {
            let again = rerun(record, args.sessions.as_deref())?;
            if record_to_line(&again)? != lines[i] {
                mismatches += 1;
                println!("seed {seed}: record bytes differ on re-run");
                continue;
            }
        }
        println!("seed {seed}: ok");
    }
    if mismatches > 0 {
        bail!(
            "{mismatches} of {} record(s) did not reproduce",
            records.len()
        );
    }
    println!("{} record(s) reproduced", records.len());
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let mut records = Vec::new();
    for path in &args.records {
        records.extend(read_records(path).with_context(|| format!("reading {}", path.display()))?);
    }
    let table = aggregate(&records, &args.group_by)?;
    table.write_csv(File::create(&args.out_csv)?)?;
    println!(
        "{} group(s) -> {}",
        table.rows.len(),
        args.out_csv.display()
    );
    if let Some(path) = &args.json {
        serde_json::to_writer_pretty(File::create(path)?, &table)?;
    }
    if let Some(path) = &args.progress_csv {
        let rows = progress_table(&records)?;
        write_progress_csv(&rows, File::create(path)?)?;
        println!("{} progress row(s) -> {}", rows.len(), path.display());
    }
    Ok(())
}

fn scenarios(args: ScenarioArgs) -> Result<()> {
    let kinds = if args.variant == "all" {
        ScenarioKind::ALL.to_vec()
    } else {
        vec![args
            .variant
            .parse::<ScenarioKind>()
            .map_err(anyhow::Error::msg)?]
    };
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let file = BackendFile::load(&args.backend_config)?;
    let factory = file.factory(3)?;
    let mut results = Vec::new();
    for (i, kind) in kinds.into_iter().enumerate() {
        let backend = factory.for_seed(i as u64)?;
        let result = match run_scenario_battery(backend.as_ref(), kind, args.reps) {
            Ok(r) => r,
            Err(e) => {
                warn!(%kind, error = %e.source, "scenario battery stopped early");
                e.partial
            }
        };
        println!(
            "{kind}: {:.3} answered True ({} of {} repetitions)",
            result.proportion_true,
            result.answers.len(),
            result.repetitions
        );
        results.push(result);
    }
    if let Some(path) = &args.out {
        serde_json::to_writer_pretty(File::create(path)?, &results)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Replay(args) => replay(args),
        Command::Analyze(args) => analyze(args),
        Command::Scenarios(args) => scenarios(args),
        Command::Play(args) => {
            let stdin = std::io::stdin();
            play::play(
                args,
                &mut BufReader::new(stdin.lock()),
                &mut std::io::stdout(),
            )
        }
    }
}
