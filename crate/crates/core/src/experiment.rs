//! Guided vs unguided comparison, end to end.
//!
//! For every premise the runner writes `stories_per_condition` guided
//! stories (each from a uniformly sampled outline) and as many unguided
//! ones, scores each set paragraph by paragraph, and leaves this under
//! `output_dir`:
//!
//! ```text
//! stories/<premise-slug>/<condition>/story_000.json ...
//! report.csv
//! homogeneity.svg
//! manifest.json
//! ```
//!
//! Every story has its own seed derived from the master seed, the premise,
//! the condition and the story index, so adding a premise or story leaves
//! the others untouched. The manifest records each seed and sampled outline.

use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{default_spec, parse_spec, Outline, OutlineSpec, ParseError};
use crate::engine::{
    collect_pool_parallel, read_pool_file, sample_index, spec_fingerprint, EngineError, Limits,
    OutlinePool, PoolError, DEFAULT_MODEL_CAP, GENERATOR_VERSION,
};
use crate::eval::{
    build_embedder, emit_chart, emit_report, paragraph_homogeneity, EmbedError, Embedder,
    EmbedderConfig, HomogeneityReport, ReportError, StorySet,
};
use crate::fsutil::write_atomic;
use crate::instructions::{load_map, InstructionMap, MapError};
use crate::writer::{
    build_provider, ChatProvider, Condition, GenerationParams, Premise, ProviderConfig,
    ProviderError, Story, StoryError, StoryWriter,
};

pub const DEFAULT_PREMISES: [&str; 6] = [
    "cat pirate",
    "dwarven courtroom drama",
    "Cold Emu War",
    "haunted lighthouse keeper",
    "time-travelling bakery",
    "robot gardener on Mars",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Outline spec; the shipped spec when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec_path: Option<PathBuf>,
    /// Instruction map; the shipped map when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instruction_map_path: Option<PathBuf>,
    /// Pre-enumerated pool for the spec; enumerated in memory when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_path: Option<PathBuf>,
    pub premises: Vec<String>,
    pub stories_per_condition: usize,
    /// Unguided story length; must equal the spec's scene count.
    pub paragraphs: usize,
    pub provider: ProviderConfig,
    pub embedder: EmbedderConfig,
    pub output_dir: PathBuf,
    pub master_seed: u64,
    /// Stories generated concurrently.
    pub parallelism: usize,
    /// Enumeration cap when no pool file is given.
    pub cap: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            spec_path: None,
            instruction_map_path: None,
            pool_path: None,
            premises: DEFAULT_PREMISES.iter().map(|s| s.to_string()).collect(),
            stories_per_condition: 10,
            paragraphs: 7,
            provider: ProviderConfig::default(),
            embedder: EmbedderConfig::default(),
            output_dir: PathBuf::from("out"),
            master_seed: 0,
            parallelism: 4,
            cap: DEFAULT_MODEL_CAP,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("spec: {0}")]
    Spec(#[from] ParseError),
    #[error("instruction map: {0}")]
    Map(#[from] MapError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl ExperimentConfig {
    /// Reads a `.toml` or JSON config. Relative paths inside it are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let mut cfg: Self = if is_toml {
            toml::from_str(&text).map_err(|e| ExperimentError::Config(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| ExperimentError::Config(e.to_string()))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.spec_path.as_mut().map(rebase);
        cfg.instruction_map_path.as_mut().map(rebase);
        cfg.pool_path.as_mut().map(rebase);
        rebase(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<Vec<Premise>, ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.premises.is_empty() {
            return bad("premises must not be empty".into());
        }
        if self.stories_per_condition < 2 {
            return bad(format!(
                "stories_per_condition is {}, need at least 2 to score a set",
                self.stories_per_condition
            ));
        }
        if self.paragraphs == 0 {
            return bad("paragraphs must be positive".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be positive".into());
        }
        self.provider.params.validate().map_err(ExperimentError::Config)?;
        let mut premises: Vec<Premise> = Vec::new();
        for p in &self.premises {
            let premise = Premise::new(p).map_err(|e| ExperimentError::Config(format!("premise `{p}`: {e}")))?;
            if premises.contains(&premise) {
                return bad(format!("premise `{premise}` listed twice"));
            }
            premises.push(premise);
        }
        let mut slugs: Vec<String> = premises.iter().map(|p| slug(p.as_str())).collect();
        slugs.sort();
        if let Some(w) = slugs.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("two premises share the directory name `{}`", w[0]));
        }
        Ok(premises)
    }
}

/// Stable per-story seed.
pub fn derive_seed(master_seed: u64, premise: &str, condition: Condition, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(b"fable-story-seed\0");
    h.update(master_seed.to_le_bytes());
    h.update(premise.as_bytes());
    h.update([0]);
    h.update(condition.as_str().as_bytes());
    h.update([0]);
    h.update((index as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Directory name for a premise: lowercase ASCII alphanumerics joined by `-`.
pub fn slug(premise: &str) -> String {
    let mut out = String::new();
    for c in premise.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        let d = Sha256::digest(premise.as_bytes());
        out = format!("premise-{:02x}{:02x}{:02x}{:02x}", d[0], d[1], d[2], d[3]);
    }
    out
}

pub fn archive_path(premise: &Premise, condition: Condition, index: usize) -> PathBuf {
    PathBuf::from("stories")
        .join(slug(premise.as_str()))
        .join(condition.as_str())
        .join(format!("story_{index:03}.json"))
}

/// Everything needed to write one story.
#[derive(Debug, Clone, PartialEq)]
pub struct StoryJob {
    pub premise: Premise,
    pub condition: Condition,
    pub index: usize,
    pub seed: u64,
    pub outline_index: Option<u64>,
    pub outline: Option<Outline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryRecord {
    pub premise: String,
    pub condition: Condition,
    pub index: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outline_index: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outline: Option<Outline>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub archive: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub premise: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator_version: String,
    pub spec_fingerprint: String,
    pub instruction_map_fingerprint: String,
    pub pool_count: usize,
    pub master_seed: u64,
    pub stories_per_condition: usize,
    pub paragraphs: usize,
    pub provider: ProviderConfig,
    pub embedder: EmbedderConfig,
    pub stories: Vec<StoryRecord>,
    pub failures: Vec<Failure>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub report: HomogeneityReport,
    pub manifest: Manifest,
    pub output_dir: PathBuf,
}

impl ExperimentOutcome {
    pub fn archives_written(&self) -> usize {
        self.manifest.stories.iter().filter(|s| s.archive.is_some()).count()
    }

    pub fn failures(&self) -> &[Failure] {
        &self.manifest.failures
    }
}

/// Loaded resources for one configuration.
pub struct Experiment {
    config: ExperimentConfig,
    premises: Vec<Premise>,
    spec: OutlineSpec,
    map: InstructionMap,
    pool: OutlinePool,
    provider: Box<dyn ChatProvider>,
    embedder: Box<dyn Embedder>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self, ExperimentError> {
        let premises = config.validate()?;
        let spec = match &config.spec_path {
            Some(p) => parse_spec(&std::fs::read_to_string(p).map_err(io_err(p))?)?,
            None => default_spec(),
        };
        if spec.num_scenes != config.paragraphs {
            return Err(ExperimentError::Config(format!(
                "paragraphs is {} but the spec has {} scenes; guided and unguided stories must match",
                config.paragraphs, spec.num_scenes
            )));
        }
        let map = match &config.instruction_map_path {
            Some(p) => load_map(p)?,
            None => InstructionMap::builtin(),
        };
        let uncovered = map.uncovered(&spec);
        if !uncovered.is_empty() {
            return Err(ExperimentError::Config(format!(
                "instruction map has no entry for: {}",
                uncovered.join(", ")
            )));
        }
        let pool = match &config.pool_path {
            Some(p) => {
                let pool = read_pool_file(p)?;
                if pool.spec_fingerprint() != spec_fingerprint(&spec) {
                    return Err(ExperimentError::Config(format!(
                        "pool {} was enumerated from a different spec",
                        p.display()
                    )));
                }
                pool
            }
            None => collect_pool_parallel(&spec, Limits::with_cap(config.cap))?,
        };
        if pool.is_empty() {
            return Err(ExperimentError::Pool(PoolError::Empty));
        }
        let provider = build_provider(&config.provider)?;
        let embedder = build_embedder(&config.embedder)?;
        Ok(Self {
            config,
            premises,
            spec,
            map,
            pool,
            provider,
            embedder,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn spec(&self) -> &OutlineSpec {
        &self.spec
    }

    pub fn pool(&self) -> &OutlinePool {
        &self.pool
    }

    /// Seed and (for guided stories) outline of one story.
    pub fn job(&self, premise: &Premise, condition: Condition, index: usize) -> StoryJob {
        let seed = derive_seed(self.config.master_seed, premise.as_str(), condition, index);
        let (outline_index, outline) = match condition {
            Condition::Guided => {
                let i = sample_index(seed, self.pool.count() as u64).expect("pool is nonempty");
                (Some(i), self.pool.get(i as usize))
            }
            Condition::Unguided => (None, None),
        };
        StoryJob {
            premise: premise.clone(),
            condition,
            index,
            seed,
            outline_index,
            outline,
        }
    }

    pub fn jobs(&self) -> Vec<StoryJob> {
        let n = self.config.stories_per_condition;
        let mut out = Vec::with_capacity(self.premises.len() * 2 * n);
        for p in &self.premises {
            for c in [Condition::Guided, Condition::Unguided] {
                out.extend((0..n).map(|i| self.job(p, c, i)));
            }
        }
        out
    }

    /// Writes one story exactly as the full run would.
    pub fn write_one(&self, job: &StoryJob) -> Result<Story, StoryError> {
        let params = GenerationParams {
            seed: Some(job.seed),
            ..self.config.provider.params.clone()
        };
        let writer = StoryWriter::new(self.provider.as_ref(), params);
        let written = match &job.outline {
            Some(o) => writer.write(&job.premise, o, &self.map)?,
            None => writer.write_unguided(&job.premise, self.config.paragraphs)?,
        };
        Ok(written.story)
    }

    pub fn run(&self) -> Result<ExperimentOutcome, ExperimentError> {
        let out_dir = &self.config.output_dir;
        std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
        let jobs = self.jobs();
        let workers = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.parallelism)
            .build()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        let results: Vec<Result<Story, String>> = workers.install(|| {
            jobs.par_iter()
                .map(|job| {
                    let story = self.write_one(job).map_err(|e| e.to_string())?;
                    let rel = archive_path(&job.premise, job.condition, job.index);
                    write_atomic(&out_dir.join(&rel), story.to_json().as_bytes())
                        .map_err(|e| format!("{}: {e}", rel.display()))?;
                    Ok(story)
                })
                .collect()
        });

        let mut records = Vec::with_capacity(jobs.len());
        let mut failures = Vec::new();
        let mut stories: Vec<(StoryJob, Story)> = Vec::new();
        for (job, result) in jobs.into_iter().zip(results) {
            let mut record = StoryRecord {
                premise: job.premise.to_string(),
                condition: job.condition,
                index: job.index,
                seed: job.seed,
                outline_index: job.outline_index,
                outline: job.outline.clone(),
                archive: None,
                error: None,
            };
            match result {
                Ok(story) => {
                    record.archive = Some(portable(&archive_path(&job.premise, job.condition, job.index)));
                    stories.push((job, story));
                }
                Err(message) => {
                    failures.push(Failure {
                        premise: job.premise.to_string(),
                        condition: Some(job.condition),
                        index: Some(job.index),
                        message: message.clone(),
                    });
                    record.error = Some(message);
                }
            }
            records.push(record);
        }

        let mut report = HomogeneityReport::new();
        for premise in &self.premises {
            for condition in [Condition::Guided, Condition::Unguided] {
                let group: Vec<Story> = stories
                    .iter()
                    .filter(|(j, _)| j.premise == *premise && j.condition == condition)
                    .map(|(_, s)| s.clone())
                    .collect();
                let scored = StorySet::new(group).and_then(|set| {
                    paragraph_homogeneity(&set, self.embedder.as_ref()).map(|s| (s, set.len()))
                });
                match scored {
                    Ok((scores, n)) => report.push_scores(premise.as_str(), condition, &scores, n),
                    Err(e) => failures.push(Failure {
                        premise: premise.to_string(),
                        condition: Some(condition),
                        index: None,
                        message: format!("not scored: {e}"),
                    }),
                }
            }
        }
        if !report.is_empty() {
            emit_report(&report, &out_dir.join("report.csv"))?;
            emit_chart(&report, &out_dir.join("homogeneity.svg"))?;
        }

        let manifest = Manifest {
            generator_version: GENERATOR_VERSION.to_string(),
            spec_fingerprint: spec_fingerprint(&self.spec),
            instruction_map_fingerprint: self.map.fingerprint(),
            pool_count: self.pool.count(),
            master_seed: self.config.master_seed,
            stories_per_condition: self.config.stories_per_condition,
            paragraphs: self.config.paragraphs,
            provider: self.config.provider.clone(),
            embedder: self.config.embedder.clone(),
            stories: records,
            failures,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = out_dir.join("manifest.json");
        write_atomic(&path, text.as_bytes()).map_err(io_err(&path))?;
        Ok(ExperimentOutcome {
            report,
            manifest,
            output_dir: out_dir.clone(),
        })
    }
}

/// Forward-slash form for manifests, so they read the same on every OS.
fn portable(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

pub fn run_experiment(config: ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    Experiment::prepare(config)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_independent() {
        let a = derive_seed(7, "cat pirate", Condition::Guided, 0);
        assert_eq!(a, derive_seed(7, "cat pirate", Condition::Guided, 0));
        let others = [
            derive_seed(8, "cat pirate", Condition::Guided, 0),
            derive_seed(7, "cat pirat", Condition::Guided, 0),
            derive_seed(7, "cat pirate", Condition::Unguided, 0),
            derive_seed(7, "cat pirate", Condition::Guided, 1),
        ];
        assert!(others.iter().all(|&s| s != a));
        // the separator keeps premise and condition from running together
        assert_ne!(
            derive_seed(0, "ab", Condition::Guided, 0),
            derive_seed(0, "a", Condition::Guided, 0)
        );
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("Cold Emu War"), "cold-emu-war");
        assert_eq!(slug("  time-travelling bakery!! "), "time-travelling-bakery");
        assert!(slug("猫").starts_with("premise-"));
        assert_eq!(
            portable(&archive_path(&Premise::new("cat pirate").unwrap(), Condition::Unguided, 3)),
            "stories/cat-pirate/unguided/story_003.json"
        );
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let few = ExperimentConfig {
            stories_per_condition: 1,
            ..Default::default()
        };
        assert!(few.validate().is_err());
        let dup = ExperimentConfig {
            premises: vec!["a b".into(), " a b".into()],
            ..Default::default()
        };
        assert!(dup.validate().is_err());
        let clash = ExperimentConfig {
            premises: vec!["a b".into(), "A-B".into()],
            ..Default::default()
        };
        assert!(clash.validate().is_err());
        assert!(ExperimentConfig {
            premises: vec![],
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn config_files_resolve_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("exp.toml");
        std::fs::write(
            &toml_path,
            "premises = [\"cat pirate\", \"x\"]\nstories_per_condition = 3\noutput_dir = \"run\"\n\
             spec_path = \"s.outline\"\n[provider]\nkind = \"mock\"\ntemperature = 0.5\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::load(&toml_path).unwrap();
        assert_eq!(cfg.output_dir, dir.path().join("run"));
        assert_eq!(cfg.spec_path, Some(dir.path().join("s.outline")));
        assert_eq!(cfg.provider.params.temperature, 0.5);
        assert_eq!(cfg.paragraphs, 7);

        let json_path = dir.path().join("exp.json");
        std::fs::write(&json_path, r#"{"premises": ["p"], "master_seed": 9}"#).unwrap();
        let cfg = ExperimentConfig::load(&json_path).unwrap();
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.stories_per_condition, 10);

        std::fs::write(&json_path, r#"{"premise": ["p"]}"#).unwrap();
        assert!(matches!(ExperimentConfig::load(&json_path), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn small_run_with_small_spec() {
        let dir = tempfile::tempdir().unwrap();
        let spec = dir.path().join("s.outline");
        std::fs::write(
            &spec,
            "scenes 3\nfunction add_twist\nfunction add_conflict\nfunction add_bonding\nconstraint no_adjacent_repeat\n",
        )
        .unwrap();
        let cfg = ExperimentConfig {
            spec_path: Some(spec),
            premises: vec!["cat pirate".into()],
            stories_per_condition: 3,
            paragraphs: 3,
            output_dir: dir.path().join("out"),
            ..Default::default()
        };
        let exp = Experiment::prepare(cfg).unwrap();
        assert_eq!(exp.pool().count(), 12);
        let outcome = exp.run().unwrap();
        assert_eq!(outcome.archives_written(), 6);
        assert_eq!(outcome.report.len(), 6);
        assert!(outcome.failures().is_empty());
        for name in ["report.csv", "homogeneity.svg", "manifest.json"] {
            assert!(dir.path().join("out").join(name).is_file(), "{name}");
        }

        // one story rebuilt from its manifest entry matches the archive
        let rec = &outcome.manifest.stories[1];
        let job = exp.job(&Premise::new(&rec.premise).unwrap(), rec.condition, rec.index);
        assert_eq!(job.seed, rec.seed);
        assert_eq!(job.outline, rec.outline);
        let again = exp.write_one(&job).unwrap();
        let archived =
            std::fs::read_to_string(dir.path().join("out").join(rec.archive.as_ref().unwrap())).unwrap();
        assert_eq!(again.to_json(), archived);
    }

    #[test]
    fn scene_count_must_match_paragraphs() {
        let cfg = ExperimentConfig {
            paragraphs: 5,
            ..Default::default()
        };
        assert!(matches!(Experiment::prepare(cfg), Err(ExperimentError::Config(_))));
    }
}
