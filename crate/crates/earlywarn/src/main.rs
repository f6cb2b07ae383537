use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use earlywarn::archive::{read_jsonl, write_json, write_jsonl, Schema};
use earlywarn::config::{load_policy, PipelineConfig};
use earlywarn::gazetteer::load_gazetteer;
use earlywarn::pipeline::{self, ReportInput, RESOLUTIONS_FILE, STATS_FILE};
use earlywarn::scenario::{load_scenario, write_scenario};
use earlywarn::series_io::write_series;
use earlywarn_core::geo::Resolution;
use earlywarn_core::stats::Method;

/// Early-warning scans of social-media archives against past seasons.
#[derive(Parser)]
#[command(name = "earlywarn", version)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, default_value = "earlywarn.toml")]
    config: PathBuf,
    /// Output directory; defaults to `[output] dir` of the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed (synth only).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Test used by the scan: ks or ad.
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Replaces the configured significance levels with this one.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read archives into deduplicated message and user records.
    Ingest {
        /// Archive files; defaults to `[archive] paths` of the config.
        #[arg(long, num_args = 1..)]
        archive: Vec<PathBuf>,
        /// Field-name mapping; defaults to `[archive] schema`.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Apply the URL, follower and keyword rules to an ingest directory.
    Filter {
        #[arg(long = "in", alias = "input")]
        input: PathBuf,
        /// TOML file with a `[filters]` table; defaults to the config's.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Where to write the drop tallies; defaults to `<out>/stats.json`.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Place the authors of a filter directory into regions.
    Georesolve {
        /// Filter output directory, or the users file inside it.
        #[arg(long, alias = "in")]
        users: PathBuf,
        /// Alias table; defaults to `[geo] gazetteer`.
        #[arg(long)]
        gazetteer: Option<PathBuf>,
    },
    /// Build daily series from a georesolve directory.
    Aggregate {
        #[arg(long = "in", alias = "input")]
        input: PathBuf,
    },
    /// Scan a series directory and write curves, anomalies and season tests.
    Detect {
        #[arg(long = "in", alias = "input")]
        input: PathBuf,
    },
    /// Region tables, choropleths and the population fit from a georesolve directory.
    Report {
        #[arg(long = "in", alias = "input")]
        input: PathBuf,
    },
    /// Generate a synthetic archive and its ground truth.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// All stages from archives to reports.
    Run,
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&cli.config).context("loading config")?;
    cfg.apply_overrides(cli.method, cli.alpha)?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&PipelineConfig>) -> Result<PathBuf> {
    match (&cli.out, cfg) {
        (Some(o), _) => Ok(o.clone()),
        (None, Some(c)) => Ok(c.output_dir()),
        (None, None) => bail!("--out is required"),
    }
}

fn read_resolutions(dir: &Path) -> Result<std::collections::BTreeMap<String, Resolution>> {
    let res: Vec<Resolution> = read_jsonl(&dir.join(RESOLUTIONS_FILE))?;
    Ok(pipeline::resolution_map(res))
}

fn execute(cli: &Cli) -> Result<()> {
    if let Command::Synth { scenario } = &cli.command {
        let mut spec = load_scenario(scenario)?;
        if let Some(seed) = cli.seed {
            spec.seed = seed;
        }
        let out = out_dir(cli, None)?;
        let w = write_scenario(&spec, &out)?;
        println!(
            "{} messages, {} lines -> {}",
            w.ground_truth.totals.messages,
            w.ground_truth.totals.lines,
            w.archive.display()
        );
        return Ok(());
    }
    let cfg = config(cli)?;
    let out = out_dir(cli, Some(&cfg))?;
    let method = cfg.scan.method;
    match &cli.command {
        Command::Synth { .. } => unreachable!("handled above"),
        Command::Run => {
            pipeline::run(&cfg, &out)?;
            println!("run complete -> {}", out.display());
        }
        Command::Ingest { archive, schema } => {
            let schema = match schema.clone().or_else(|| cfg.schema_path()) {
                Some(p) => Schema::load(&p)?,
                None => Schema::default(),
            };
            let paths = if archive.is_empty() { cfg.archive_paths() } else { archive.clone() };
            let sets = cfg.keyword_sets();
            let a = pipeline::ingest(&paths, &schema, cfg.study_range(), Some(&sets), cfg.archive.corrupt_threshold)?;
            pipeline::write_records(&out, &a.messages, &a.users)?;
            write_json(&out.join(STATS_FILE), &a.stats)?;
            println!("{} unique messages from {} records", a.stats.unique_messages, a.stats.total_records);
        }
        Command::Filter { input, policy, stats } => {
            let (messages, users) = pipeline::read_records(input)?;
            let policy = match policy {
                Some(p) => load_policy(p).with_context(|| format!("loading policy {}", p.display()))?,
                None => cfg.filters.policy(cfg.study.start),
            };
            let (kept, tallies) = pipeline::filter(&messages, &users, &policy)?;
            let kept_users: Vec<_> = pipeline::authors_of(&kept, &users).into_iter().cloned().collect();
            pipeline::write_records(&out, &kept, &kept_users)?;
            write_json(&stats.clone().unwrap_or_else(|| out.join(STATS_FILE)), &tallies)?;
            println!("{} of {} messages kept", tallies.survivors_messages, tallies.input_messages);
        }
        Command::Georesolve { users, gazetteer } => {
            let dir = if users.is_dir() { users.as_path() } else { users.parent().unwrap_or(Path::new(".")) };
            let (messages, users) = pipeline::read_records(dir)?;
            let table = gazetteer.clone().unwrap_or_else(|| cfg.gazetteer_path());
            let gaz = load_gazetteer(&table, cfg.boundaries_path().as_deref())?;
            let refs: Vec<_> = users.iter().collect();
            let (res, stats) = pipeline::georesolve(&refs, &gaz);
            pipeline::write_records(&out, &messages, &users)?;
            write_jsonl(&out.join(RESOLUTIONS_FILE), &res)?;
            write_json(&out.join(STATS_FILE), &stats)?;
            println!("{} of {} posters placed", stats.resolved, stats.users);
        }
        Command::Aggregate { input } => {
            let (messages, _) = pipeline::read_records(input)?;
            let res = read_resolutions(input)?;
            let sets: Vec<String> = cfg.keywords.keys().cloned().collect();
            let series = pipeline::aggregate(&messages, &res, &sets, &cfg.study_range())?;
            for s in &series {
                write_series(&out, s)?;
            }
            println!("{} series written", series.len());
        }
        Command::Detect { input } => {
            let series = pipeline::load_series(input)?;
            let (_, warning) = pipeline::scan_anchor(&cfg)?;
            if let Some(w) = warning {
                log::warn!("{w}");
            }
            let detections = pipeline::detect(&series, &cfg, method)?;
            let stats = pipeline::write_detection(&out, &cfg, method, &detections)?;
            write_json(&out.join(STATS_FILE), &stats)?;
            println!("{} early and {} news-era segments", stats.segments_early, stats.segments_news_era);
        }
        Command::Report { input } => {
            let (messages, _) = pipeline::read_records(input)?;
            let res = read_resolutions(input)?;
            let gaz = load_gazetteer(&cfg.gazetteer_path(), cfg.boundaries_path().as_deref())?;
            let input = ReportInput { messages: &messages, resolutions: &res, gazetteer: &gaz };
            let (stats, warnings) = pipeline::write_report(&out, &cfg, method, &input)?;
            for w in warnings {
                log::warn!("{w}");
            }
            write_json(&out.join(STATS_FILE), &stats)?;
            println!("{} regions with posters", stats.regions_with_users);
        }
    }
    Ok(())
}

/// The cause chain, skipping causes whose text an outer message already quotes.
fn render(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            ExitCode::FAILURE
        }
    }
}
