//! The `fable` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input (bad spec, failed
//! check, bad config, unreadable or unwritable files), 3 provider or
//! embedder failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dsl::{parse_spec, Outline, OutlineSpec};
use crate::engine::{
    check_outline, count_models_with, read_pool_file, spec_fingerprint, write_pool_file, Limits,
    PoolReader, DEFAULT_MODEL_CAP,
};
use crate::eval::{
    build_embedder, emit_chart, emit_report, paragraph_homogeneity, EmbedderConfig, EmbedderKind,
    HomogeneityReport, StorySet,
};
use crate::experiment::{derive_seed, run_experiment, ExperimentConfig, ExperimentError};
use crate::fsutil::write_atomic;
use crate::instructions::{load_map, translate, InstructionMap};
use crate::writer::{
    build_provider, Condition, GenerationParams, Premise, ProviderConfig, ProviderError,
    ProviderKind, Story, StoryError, StoryWriter,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fable", version, about = "Enumerate story outlines, write stories from them, and measure how alike the stories are")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enumerate every outline a spec allows into a pool file.
    Enumerate {
        spec: PathBuf,
        /// Pool file to write.
        #[arg(short, long, required_unless_present = "count_only")]
        out: Option<PathBuf>,
        /// Print the count and write nothing.
        #[arg(long)]
        count_only: bool,
        #[arg(long, default_value_t = DEFAULT_MODEL_CAP)]
        cap: u64,
    },
    /// Draw outlines uniformly from a pool file.
    Sample {
        pool: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short = 'n', long, default_value_t = 1)]
        count: usize,
        /// Also print each scene's writing instruction.
        #[arg(long)]
        translate: bool,
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Validate a spec, and optionally outlines against it.
    Check {
        spec: PathBuf,
        /// Outline as comma-separated tokens, e.g. `add_twist,add_conflict`.
        #[arg(long)]
        outline: Vec<String>,
        /// Check every outline in a pool file.
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Write stories for one premise.
    Write(WriteArgs),
    /// Score story archives and emit a CSV report.
    Evaluate {
        /// Directories searched recursively for `story_*.json`.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        chart: Option<PathBuf>,
        #[arg(long, value_parser = ["test", "http"], default_value = "test")]
        embedder: String,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
    },
    /// Run the full guided vs unguided comparison from a config file.
    Experiment { config: PathBuf },
}

#[derive(Debug, Args)]
struct WriteArgs {
    #[arg(long)]
    premise: String,
    /// Number of stories.
    #[arg(short = 'n', long, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    /// Pool to sample outlines from (guided mode).
    #[arg(long, required_unless_present = "baseline")]
    pool: Option<PathBuf>,
    /// Unguided stories: premise only, no outline.
    #[arg(long)]
    baseline: bool,
    /// Master seed; story i uses the same derived seed as in `experiment`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write only story number i (0-based) of the n.
    #[arg(long)]
    only_index: Option<u64>,
    #[arg(long)]
    map: Option<PathBuf>,
    /// Paragraphs per unguided story.
    #[arg(long, default_value_t = 7)]
    paragraphs: usize,
    #[arg(short, long, default_value = "stories")]
    out: PathBuf,
    #[arg(long, value_parser = ["mock", "http"], default_value = "mock")]
    provider: String,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    #[arg(long)]
    max_retries: Option<u32>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn provider(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_PROVIDER,
            message: message.into(),
        }
    }
}

fn provider_failure(e: ProviderError) -> Failure {
    match e {
        ProviderError::Config(_) => Failure::invalid(e.to_string()),
        other => Failure::provider(other.to_string()),
    }
}

fn story_failure(e: StoryError) -> Failure {
    match e {
        StoryError::Provider { .. } | StoryError::EmptyParagraph { .. } => Failure::provider(e.to_string()),
        other => Failure::invalid(other.to_string()),
    }
}

fn experiment_failure(e: ExperimentError) -> Failure {
    match e {
        ExperimentError::Provider(p) => provider_failure(p),
        ExperimentError::Embed(_) => Failure::provider(e.to_string()),
        other => Failure::invalid(other.to_string()),
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Enumerate {
            spec,
            out: path,
            count_only,
            cap,
        } => cmd_enumerate(&spec, path.as_deref(), count_only, cap, out),
        Command::Sample {
            pool,
            seed,
            count,
            translate,
            map,
        } => cmd_sample(&pool, seed, count, translate, map.as_deref(), out),
        Command::Check { spec, outline, pool } => cmd_check(&spec, &outline, pool.as_deref(), out),
        Command::Write(args) => cmd_write(&args, out),
        Command::Evaluate {
            dirs,
            out: csv,
            chart,
            embedder,
            endpoint,
            model,
        } => cmd_evaluate(&dirs, &csv, chart.as_deref(), &embedder, endpoint, model, out),
        Command::Experiment { config } => cmd_experiment(&config, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn read_spec(path: &Path) -> Result<OutlineSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    parse_spec(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn read_map(path: Option<&Path>) -> Result<InstructionMap, Failure> {
    match path {
        Some(p) => load_map(p).map_err(|e| Failure::invalid(format!("{}: {e}", p.display()))),
        None => Ok(InstructionMap::builtin()),
    }
}

fn emit(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> CmdResult {
    writeln!(out, "{text}").map_err(|e| Failure::invalid(format!("stdout: {e}")))
}

fn cmd_enumerate(spec_path: &Path, out_path: Option<&Path>, count_only: bool, cap: u64, out: &mut dyn Write) -> CmdResult {
    let spec = read_spec(spec_path)?;
    let limits = Limits::with_cap(cap);
    let fingerprint = spec_fingerprint(&spec);
    let count = if count_only {
        count_models_with(&spec, limits).map_err(|e| Failure::invalid(e.to_string()))?
    } else {
        let path = out_path.expect("clap requires --out without --count-only");
        write_pool_file(&spec, path, limits)
            .map_err(|e| Failure::invalid(e.to_string()))?
            .count
    };
    emit(out, format_args!("count {count}"))?;
    emit(out, format_args!("fingerprint {fingerprint}"))
}

fn cmd_sample(pool: &Path, seed: u64, count: usize, with_text: bool, map: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    let pool = read_pool_file(pool).map_err(|e| Failure::invalid(format!("{}: {e}", pool.display())))?;
    let map = if with_text { Some(read_map(map)?) } else { None };
    for i in 0..count {
        let s = if count == 1 { seed } else { derive_seed(seed, "", Condition::Guided, i) };
        let (index, outline) = pool.sample(s).map_err(|e| Failure::invalid(e.to_string()))?;
        let tokens = serde_json::to_string(&outline).expect("outline serializes");
        emit(out, format_args!("{index}\t{tokens}"))?;
        if let Some(map) = &map {
            let lines = translate(&outline, map).map_err(|e| Failure::invalid(e.to_string()))?;
            for (k, line) in lines.iter().enumerate() {
                emit(out, format_args!("  {}. {line}", k + 1))?;
            }
        }
    }
    Ok(())
}

fn parse_outline_arg(s: &str) -> Result<Outline, Failure> {
    let tokens: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    Outline::from_tokens(&tokens).map_err(|e| Failure::invalid(e.to_string()))
}

fn cmd_check(spec_path: &Path, outlines: &[String], pool: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    let spec = read_spec(spec_path)?;
    emit(out, format_args!("spec ok ({} scenes, {} functions, {} constraints)", spec.num_scenes, spec.functions.len(), spec.constraints.len()))?;
    let mut bad = 0usize;
    let mut checked = 0usize;
    // per-outline "ok" lines only for outlines given on the command line
    let mut check_one = |label: String, o: &Outline, out: &mut dyn Write, verbose: bool| -> CmdResult {
        checked += 1;
        let violations = check_outline(&spec, o).map_err(|e| Failure::invalid(format!("{label}: {e}")))?;
        if !violations.is_empty() {
            bad += 1;
            emit(out, format_args!("{label}: {} violation(s)", violations.len()))?;
            for v in violations {
                emit(out, format_args!("  {v}"))?;
            }
        } else if verbose {
            emit(out, format_args!("{label}: ok"))?;
        }
        Ok(())
    };
    for (i, s) in outlines.iter().enumerate() {
        let o = parse_outline_arg(s)?;
        check_one(format!("outline {}", i + 1), &o, out, true)?;
    }
    if let Some(path) = pool {
        let reader = PoolReader::open(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
        if reader.header().spec_fingerprint != spec_fingerprint(&spec) {
            emit(out, format_args!("warning: pool was enumerated from a different spec"))?;
        }
        for (i, item) in reader.enumerate() {
            let o = item.map_err(|e| Failure::invalid(e.to_string()))?;
            check_one(format!("pool outline {i}"), &o, out, false)?;
        }
    }
    if bad > 0 {
        return Err(Failure::invalid(format!("{bad} of {checked} outline(s) violate the spec")));
    }
    if pool.is_some() {
        emit(out, format_args!("{checked} outline(s) ok"))?;
    }
    Ok(())
}

fn provider_config(a: &WriteArgs) -> ProviderConfig {
    let mut params = GenerationParams::default();
    let (model, temperature, max_tokens) = (a.model.clone(), a.temperature, a.max_tokens);
    if let Some(m) = model {
        params.model_id = m;
    }
    if let Some(t) = temperature {
        params.temperature = t;
    }
    if let Some(t) = max_tokens {
        params.max_output_tokens = t;
    }
    if let Some(r) = a.max_retries {
        params.max_retries = r;
    }
    ProviderConfig {
        kind: if a.provider == "http" { ProviderKind::Http } else { ProviderKind::Mock },
        endpoint: a.endpoint.clone(),
        params,
    }
}

fn cmd_write(a: &WriteArgs, out: &mut dyn Write) -> CmdResult {
    let premise = Premise::new(&a.premise).map_err(|e| Failure::invalid(e.to_string()))?;
    let n = a.count as usize;
    if let Some(i) = a.only_index {
        if i >= a.count {
            return Err(Failure::invalid(format!("--only-index {i} is not below -n {n}")));
        }
    }
    let config = provider_config(a);
    config.params.validate().map_err(Failure::invalid)?;
    let provider = build_provider(&config).map_err(provider_failure)?;
    let condition = if a.baseline { Condition::Unguided } else { Condition::Guided };
    let (pool, map) = if a.baseline {
        (None, None)
    } else {
        let path = a.pool.as_deref().expect("clap requires --pool unless --baseline");
        let pool = read_pool_file(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
        (Some(pool), Some(read_map(a.map.as_deref())?))
    };
    if a.baseline && a.paragraphs == 0 {
        return Err(Failure::invalid("--paragraphs must be positive"));
    }
    let indices: Vec<usize> = match a.only_index {
        Some(i) => vec![i as usize],
        None => (0..n).collect(),
    };
    for i in indices {
        let seed = derive_seed(a.seed, premise.as_str(), condition, i);
        let params = GenerationParams {
            seed: Some(seed),
            ..config.params.clone()
        };
        let writer = StoryWriter::new(provider.as_ref(), params);
        let written = match (&pool, &map) {
            (Some(pool), Some(map)) => {
                let (_, outline) = pool.sample(seed).map_err(|e| Failure::invalid(e.to_string()))?;
                writer.write(&premise, &outline, map)
            }
            _ => writer.write_unguided(&premise, a.paragraphs),
        }
        .map_err(story_failure)?;
        let path = a.out.join(format!("story_{i:03}.json"));
        write_atomic(&path, written.story.to_json().as_bytes())
            .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
        emit(out, format_args!("{}", path.display()))?;
    }
    Ok(())
}

fn find_archives(dir: &Path, found: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            find_archives(&path, found)?;
        } else if path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("story_") && n.ends_with(".json"))
        {
            found.push(path);
        }
    }
    Ok(())
}

fn cmd_evaluate(
    dirs: &[PathBuf],
    csv: &Path,
    chart: Option<&Path>,
    embedder: &str,
    endpoint: Option<String>,
    model: Option<String>,
    out: &mut dyn Write,
) -> CmdResult {
    let mut files = Vec::new();
    for d in dirs {
        find_archives(d, &mut files).map_err(|e| Failure::invalid(format!("{}: {e}", d.display())))?;
    }
    files.sort();
    if files.is_empty() {
        return Err(Failure::invalid("no story_*.json archives found"));
    }
    let mut order: Vec<(String, Condition)> = Vec::new();
    let mut groups: BTreeMap<(String, Condition), Vec<Story>> = BTreeMap::new();
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(|e| Failure::invalid(format!("{}: {e}", f.display())))?;
        let story = Story::from_json(&text).map_err(|e| Failure::invalid(format!("{}: {e}", f.display())))?;
        let key = (story.premise.to_string(), story.condition);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(story);
    }
    let mut config = EmbedderConfig {
        kind: if embedder == "http" { EmbedderKind::Http } else { EmbedderKind::Test },
        endpoint,
        ..EmbedderConfig::default()
    };
    if let Some(m) = model {
        config.model = m;
    }
    let embedder = build_embedder(&config).map_err(|e| Failure::invalid(e.to_string()))?;
    let mut report = HomogeneityReport::new();
    for key in order {
        let stories = groups.remove(&key).expect("grouped");
        let set = StorySet::new(stories).map_err(|e| Failure::invalid(format!("{} / {}: {e}", key.0, key.1)))?;
        let scores = paragraph_homogeneity(&set, embedder.as_ref())
            .map_err(|e| Failure::provider(format!("{} / {}: {e}", key.0, key.1)))?;
        report.push_scores(&key.0, key.1, &scores, set.len());
    }
    emit_report(&report, csv).map_err(|e| Failure::invalid(e.to_string()))?;
    if let Some(c) = chart {
        emit_chart(&report, c).map_err(|e| Failure::invalid(e.to_string()))?;
    }
    emit(out, format_args!("{} rows from {} stories -> {}", report.len(), files.len(), csv.display()))
}

fn cmd_experiment(config_path: &Path, out: &mut dyn Write) -> CmdResult {
    let config = ExperimentConfig::load(config_path).map_err(experiment_failure)?;
    let outcome = run_experiment(config).map_err(experiment_failure)?;
    emit(out, format_args!("{} archives, {} report rows -> {}", outcome.archives_written(), outcome.report.len(), outcome.output_dir.display()))?;
    for premise in outcome.report.premises() {
        let g = outcome.report.mean(premise, Condition::Guided);
        let u = outcome.report.mean(premise, Condition::Unguided);
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        emit(out, format_args!("{premise}: guided {} unguided {}", fmt(g), fmt(u)))?;
    }
    let failures = outcome.failures();
    if !failures.is_empty() {
        return Err(Failure::provider(format!(
            "{} failure(s), see manifest.json; first: {}",
            failures.len(),
            failures[0].message
        )));
    }
    Ok(())
}
