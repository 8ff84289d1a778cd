//! Outline pools: in-memory, and on disk as JSON lines.
//!
//! File layout: a header object on the first line, then one JSON array of
//! tokens per outline.
//!
//! ```text
//! {"spec_fingerprint":"9f2c…","count":12,"generator_version":"fable-engine 0.1.0"}
//! ["a","b","a"]
//! ["a","b","c"]
//! ```

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{count_models_with, enumerate_with, spec_fingerprint, EngineError, Limits, GENERATOR_VERSION};
use crate::dsl::{Outline, OutlineSpec, SceneAssignment};
use crate::fsutil;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("i/o error on pool file: {0}")]
    Io(#[from] io::Error),
    #[error("pool file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("outline pool is empty")]
    Empty,
}

fn format_err(line: usize, message: impl Into<String>) -> PoolError {
    PoolError::Format {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolHeader {
    pub spec_fingerprint: String,
    pub count: u64,
    pub generator_version: String,
}

/// A set of distinct outlines of equal length, stored as rows of indices
/// into a shared token alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutlinePool {
    fingerprint: String,
    num_scenes: usize,
    alphabet: Vec<SceneAssignment>,
    rows: Vec<u16>,
}

impl OutlinePool {
    pub(crate) fn from_parts(
        fingerprint: String,
        num_scenes: usize,
        alphabet: Vec<SceneAssignment>,
        rows: Vec<u16>,
    ) -> Self {
        debug_assert!(num_scenes > 0 && rows.len().is_multiple_of(num_scenes));
        Self {
            fingerprint,
            num_scenes,
            alphabet,
            rows,
        }
    }

    /// Builds a pool from explicit outlines, rejecting duplicates and
    /// length mismatches.
    pub fn from_outlines(
        fingerprint: impl Into<String>,
        outlines: impl IntoIterator<Item = Outline>,
    ) -> Result<Self, PoolError> {
        let mut builder = PoolBuilder::default();
        for (i, o) in outlines.into_iter().enumerate() {
            builder.push(&o).map_err(|m| format_err(i + 1, m))?;
        }
        Ok(builder.finish(fingerprint.into()))
    }

    pub fn spec_fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn num_scenes(&self) -> usize {
        self.num_scenes
    }

    pub fn count(&self) -> usize {
        self.rows.len().checked_div(self.num_scenes).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<Outline> {
        let start = index.checked_mul(self.num_scenes)?;
        let row = self.rows.get(start..start + self.num_scenes)?;
        Some(Outline::new(
            row.iter().map(|&c| self.alphabet[c as usize].clone()).collect(),
        ))
    }

    pub fn iter(&self) -> impl Iterator<Item = Outline> + '_ {
        (0..self.count()).map(move |i| self.get(i).expect("index in range"))
    }

    pub fn header(&self) -> PoolHeader {
        PoolHeader {
            spec_fingerprint: self.fingerprint.clone(),
            count: self.count() as u64,
            generator_version: GENERATOR_VERSION.to_string(),
        }
    }

    /// Writes this pool in the pool file format.
    pub fn write_to(&self, path: &Path) -> Result<(), PoolError> {
        let header = self.header();
        fsutil::write_atomic_with(path, |w| {
            write_line(w, &header)?;
            for o in self.iter() {
                write_line(w, &o)?;
            }
            Ok(())
        })?;
        Ok(())
    }

    pub fn sample(&self, seed: u64) -> Result<(usize, Outline), PoolError> {
        let index = sample_index(seed, self.count() as u64).ok_or(PoolError::Empty)? as usize;
        Ok((index, self.get(index).expect("sampled index in range")))
    }
}

/// Uniformly random outline from the pool, reproducible from `seed`.
pub fn sample_uniform(pool: &OutlinePool, seed: u64) -> Result<Outline, PoolError> {
    pool.sample(seed).map(|(_, o)| o)
}

/// Index in `[0, count)` drawn from a ChaCha8 stream seeded with `seed`.
pub fn sample_index(seed: u64, count: u64) -> Option<u64> {
    if count == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Some(rng.gen_range(0..count))
}

#[derive(Default)]
struct PoolBuilder {
    num_scenes: Option<usize>,
    alphabet: Vec<SceneAssignment>,
    lookup: HashMap<SceneAssignment, u16>,
    rows: Vec<u16>,
    seen: HashSet<Vec<u16>>,
}

impl PoolBuilder {
    fn push(&mut self, outline: &Outline) -> Result<(), String> {
        let width = *self.num_scenes.get_or_insert(outline.len());
        if width == 0 {
            return Err("outline has no scenes".into());
        }
        if outline.len() != width {
            return Err(format!("outline has {} scenes, expected {width}", outline.len()));
        }
        let mut row = Vec::with_capacity(width);
        for a in &outline.assignments {
            let id = match self.lookup.get(a) {
                Some(&id) => id,
                None => {
                    let id = u16::try_from(self.alphabet.len())
                        .map_err(|_| "too many distinct tokens".to_string())?;
                    self.alphabet.push(a.clone());
                    self.lookup.insert(a.clone(), id);
                    id
                }
            };
            row.push(id);
        }
        if !self.seen.insert(row.clone()) {
            return Err(format!("duplicate outline {outline}"));
        }
        self.rows.extend(row);
        Ok(())
    }

    fn finish(self, fingerprint: String) -> OutlinePool {
        OutlinePool {
            fingerprint,
            num_scenes: self.num_scenes.unwrap_or(0),
            alphabet: self.alphabet,
            rows: self.rows,
        }
    }
}

fn write_line<T: Serialize>(w: &mut dyn Write, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

/// Summary of a written pool file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolSummary {
    pub spec_fingerprint: String,
    pub count: u64,
}

/// Enumerates `spec` straight into a pool file.
///
/// A counting pass runs first so the header can carry the total and the cap
/// is enforced before anything is written; the second pass streams outlines
/// to disk without holding them in memory.
pub fn write_pool_file(
    spec: &OutlineSpec,
    path: &Path,
    limits: Limits,
) -> Result<PoolSummary, PoolError> {
    let count = count_models_with(spec, limits)?;
    let header = PoolHeader {
        spec_fingerprint: spec_fingerprint(spec),
        count,
        generator_version: GENERATOR_VERSION.to_string(),
    };
    let outlines = enumerate_with(spec, limits)?;
    fsutil::write_atomic_with(path, |w| {
        write_line(w, &header)?;
        for o in outlines {
            let o = o.map_err(io::Error::other)?;
            write_line(w, &o)?;
        }
        Ok(())
    })?;
    Ok(PoolSummary {
        spec_fingerprint: header.spec_fingerprint,
        count,
    })
}

/// Streaming reader over a pool file.
pub struct PoolReader {
    header: PoolHeader,
    lines: io::Lines<BufReader<File>>,
    line_no: usize,
}

impl PoolReader {
    pub fn open(path: &Path) -> Result<Self, PoolError> {
        let mut lines = BufReader::new(File::open(path)?).lines();
        let first = lines.next().ok_or_else(|| format_err(1, "missing header"))??;
        let header: PoolHeader =
            serde_json::from_str(&first).map_err(|e| format_err(1, format!("bad header: {e}")))?;
        Ok(Self {
            header,
            lines,
            line_no: 1,
        })
    }

    pub fn header(&self) -> &PoolHeader {
        &self.header
    }

    /// Outline at `index` (0-based), reading forward from the current position.
    pub fn nth_outline(mut self, index: u64) -> Result<Outline, PoolError> {
        let target = index as usize;
        for (i, item) in self.by_ref().enumerate() {
            let o = item?;
            if i == target {
                return Ok(o);
            }
        }
        Err(format_err(0, format!("pool holds fewer than {} outlines", index + 1)))
    }

    /// Draws the same outline [`OutlinePool::sample`] would for this pool.
    pub fn sample(self, seed: u64) -> Result<(u64, Outline), PoolError> {
        let index = sample_index(seed, self.header.count).ok_or(PoolError::Empty)?;
        Ok((index, self.nth_outline(index)?))
    }
}

impl Iterator for PoolReader {
    type Item = Result<Outline, PoolError>;

    fn next(&mut self) -> Option<Self::Item> {
        let line = self.lines.next()?;
        self.line_no += 1;
        let n = self.line_no;
        Some(line.map_err(PoolError::from).and_then(|l| {
            serde_json::from_str::<Outline>(&l).map_err(|e| format_err(n, e.to_string()))
        }))
    }
}

/// Loads a whole pool file, checking the header count and that outlines are
/// distinct and of equal length.
pub fn read_pool_file(path: &Path) -> Result<OutlinePool, PoolError> {
    let reader = PoolReader::open(path)?;
    let header = reader.header().clone();
    let mut builder = PoolBuilder::default();
    for (i, item) in reader.enumerate() {
        builder.push(&item?).map_err(|m| format_err(i + 2, m))?;
    }
    let pool = builder.finish(header.spec_fingerprint.clone());
    if pool.count() as u64 != header.count {
        return Err(format_err(
            1,
            format!("header says {} outlines, file holds {}", header.count, pool.count()),
        ));
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_spec;
    use crate::engine::collect_pool;

    fn demo() -> OutlineSpec {
        parse_spec("scenes 3\nfunction a\nfunction b\nfunction c\nconstraint no_adjacent_repeat").unwrap()
    }

    #[test]
    fn file_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("one.jsonl");
        let p2 = dir.path().join("two.jsonl");
        let s = write_pool_file(&demo(), &p1, Limits::default()).unwrap();
        write_pool_file(&demo(), &p2, Limits::default()).unwrap();
        assert_eq!(s.count, 12);
        let bytes = std::fs::read(&p1).unwrap();
        assert_eq!(bytes, std::fs::read(&p2).unwrap());
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert_eq!(text.lines().nth(1).unwrap(), r#"["a","b","a"]"#);

        let loaded = read_pool_file(&p1).unwrap();
        let direct = collect_pool(&demo(), Limits::default()).unwrap();
        assert_eq!(loaded.iter().collect::<Vec<_>>(), direct.iter().collect::<Vec<_>>());
        assert_eq!(loaded.spec_fingerprint(), spec_fingerprint(&demo()));

        let p3 = dir.path().join("three.jsonl");
        direct.write_to(&p3).unwrap();
        assert_eq!(std::fs::read(&p3).unwrap(), std::fs::read(&p1).unwrap());
    }

    #[test]
    fn file_and_memory_sampling_agree() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.jsonl");
        write_pool_file(&demo(), &path, Limits::default()).unwrap();
        let pool = collect_pool(&demo(), Limits::default()).unwrap();
        for seed in [0, 1, 42, 9_999] {
            let (i, o) = pool.sample(seed).unwrap();
            let (j, p) = PoolReader::open(&path).unwrap().sample(seed).unwrap();
            assert_eq!((i as u64, o), (j, p));
        }
    }

    #[test]
    fn sampling_edge_cases() {
        let one = OutlinePool::from_outlines("x", [Outline::from_tokens(["a"]).unwrap()]).unwrap();
        for seed in 0..20 {
            assert_eq!(sample_uniform(&one, seed).unwrap().tokens(), ["a"]);
        }
        let pool = collect_pool(&demo(), Limits::default()).unwrap();
        assert_eq!(sample_uniform(&pool, 42).unwrap(), sample_uniform(&pool, 42).unwrap());
        let empty = collect_pool(
            &parse_spec("scenes 2\nfunction a\nconstraint no_adjacent_repeat").unwrap(),
            Limits::default(),
        )
        .unwrap();
        assert!(matches!(sample_uniform(&empty, 1), Err(PoolError::Empty)));
    }

    #[test]
    fn uniform_frequencies() {
        let pool = collect_pool(&demo(), Limits::default()).unwrap();
        let mut hits = vec![0u32; 12];
        for seed in 0..12_000u64 {
            hits[pool.sample(seed).unwrap().0] += 1;
        }
        for h in hits {
            let freq = f64::from(h) / 12_000.0;
            assert!((0.06..=0.11).contains(&freq), "frequency {freq}");
        }
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let header = r#"{"spec_fingerprint":"f","count":2,"generator_version":"v"}"#;

        std::fs::write(&path, format!("{header}\n[\"a\"]\n[\"a\"]\n")).unwrap();
        assert!(matches!(read_pool_file(&path), Err(PoolError::Format { line: 3, .. })));

        std::fs::write(&path, format!("{header}\n[\"a\"]\n")).unwrap();
        assert!(matches!(read_pool_file(&path), Err(PoolError::Format { line: 1, .. })));

        std::fs::write(&path, format!("{header}\n[\"a\"]\n[\"a\",\"b\"]\n")).unwrap();
        assert!(matches!(read_pool_file(&path), Err(PoolError::Format { line: 3, .. })));

        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(read_pool_file(&path), Err(PoolError::Format { line: 1, .. })));
    }
}
